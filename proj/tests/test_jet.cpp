#include <doctest.h>

#include <cmath>
#include <map>
#include <random>
#include <vector>

#include "fd.hpp"
#include "finhol/errors.hpp"
#include "finhol/jet.hpp"

using namespace finhol;

namespace {

// Symbolic sparse polynomials over a few variables: the independent oracle
// for jet arithmetic.  Multiplication and differentiation are exact monomial
// calculus, with no jet machinery involved.
struct Poly {
  std::map<std::vector<int>, double> terms;

  static Poly var(int i, int nvars) {
    Poly p;
    std::vector<int> e(nvars, 0);
    e[i] = 1;
    p.terms[e] = 1.0;
    return p;
  }

  Poly operator*(const Poly& o) const {
    Poly r;
    for (const auto& [ea, ca] : terms)
      for (const auto& [eb, cb] : o.terms) {
        std::vector<int> e(ea.size());
        for (std::size_t i = 0; i < e.size(); ++i) e[i] = ea[i] + eb[i];
        r.terms[e] += ca * cb;
      }
    return r;
  }

  Poly operator+(const Poly& o) const {
    Poly r = *this;
    for (const auto& [e, c] : o.terms) r.terms[e] += c;
    return r;
  }

  Poly derivative(int i) const {
    Poly r;
    for (const auto& [e, c] : terms) {
      if (e[i] == 0) continue;
      std::vector<int> d = e;
      d[i] -= 1;
      r.terms[d] += c * e[i];
    }
    return r;
  }

  double eval(const std::vector<double>& x) const {
    double s = 0.0;
    for (const auto& [e, c] : terms) {
      double m = c;
      for (std::size_t i = 0; i < e.size(); ++i)
        for (int k = 0; k < e[i]; ++k) m *= x[i];
      s += m;
    }
    return s;
  }

  double partial_at(std::vector<int> exponent, const std::vector<double>& x) const {
    Poly p = *this;
    for (std::size_t i = 0; i < exponent.size(); ++i)
      for (int k = 0; k < exponent[i]; ++k) p = p.derivative(static_cast<int>(i));
    return p.eval(x);
  }

  Jet to_jet(int order, const std::vector<double>& x) const {
    auto s = jet_shape(static_cast<int>(x.size()), order);
    Jet r = Jet::constant(s, 0.0);
    for (const auto& [e, c] : terms) {
      Jet m = Jet::constant(s, c);
      for (std::size_t i = 0; i < e.size(); ++i)
        for (int k = 0; k < e[i]; ++k) m = m * Jet::seed(s, static_cast<int>(i), x[i]);
      r += m;
    }
    return r;
  }
};

Poly random_poly(std::mt19937& rng, int nvars, int max_deg, int nterms) {
  std::uniform_int_distribution<int> deg(0, max_deg);
  std::uniform_real_distribution<double> coef(-2.0, 2.0);
  Poly p;
  for (int t = 0; t < nterms; ++t) {
    std::vector<int> e(nvars, 0);
    int budget = deg(rng);
    for (int i = 0; i < nvars && budget > 0; ++i) {
      std::uniform_int_distribution<int> pick(0, budget);
      e[i] = pick(rng);
      budget -= e[i];
    }
    p.terms[e] += coef(rng);
  }
  return p;
}

std::vector<int> all_exponents_upto(int nvars, int order) {
  // flattened enumeration: returns packed exponent vectors one after another
  std::vector<int> flat;
  std::vector<int> e(nvars, 0);
  std::function<void(int, int)> rec = [&](int i, int rem) {
    if (i == nvars) {
      flat.insert(flat.end(), e.begin(), e.end());
      return;
    }
    for (int k = 0; k <= rem; ++k) {
      e[i] = k;
      rec(i + 1, rem - k);
    }
    e[i] = 0;
  };
  rec(0, order);
  return flat;
}

}  // namespace

TEST_CASE("seed and extract basics") {
  Jet a = seed_variable(0, 3.0, 2, 2);
  CHECK(a.value() == 3.0);
  CHECK(extract_partial(a, {0}) == 1.0);
  CHECK(extract_partial(a, {1}) == 0.0);

  Jet b = seed_variable(1, -1.0, 2, 2);
  Jet p = a * b;
  CHECK(p.value() == -3.0);
  CHECK(extract_partial(p, {0}) == -1.0);
  CHECK(extract_partial(p, {1}) == 3.0);
  CHECK(extract_partial(p, {0, 1}) == 1.0);
}

TEST_CASE("extract_partial counts repeated indices with factorials") {
  // v0^2 v1: d^3/dv0^2 dv1 = 2
  Jet v0 = seed_variable(0, 0.0, 2, 3);
  Jet v1 = seed_variable(1, 0.0, 2, 3);
  Jet f = v0 * v0 * v1;
  CHECK(extract_partial(f, {0, 0, 1}) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(extract_partial(f, {0, 1}) == 0.0);
}

TEST_CASE("reciprocal of 1+t is the alternating geometric series") {
  Jet t = seed_variable(0, 0.0, 1, 3);
  Jet f = 1.0 / (t + 1.0);
  double expect = 1.0;  // k-th derivative = (-1)^k k!
  double fact = 1.0;
  for (int k = 0; k <= 3; ++k) {
    std::vector<int> idx(k, 0);
    CHECK(extract_partial(f, idx) == doctest::Approx(expect * fact).epsilon(1e-14));
    expect = -expect;
    fact *= (k + 1);
  }
}

TEST_CASE("sqrt composed with square recovers the identity jet") {
  Jet t = seed_variable(0, 2.0, 1, 2);
  Jet f = sqrt(t * t);
  CHECK(f.value() == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(extract_partial(f, {0}) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(extract_partial(f, {0, 0}) == doctest::Approx(0.0).epsilon(1e-14));
}

TEST_CASE("unsupported orders and mismatched shapes are rejected") {
  CHECK_THROWS_AS(jet_shape(2, 0), std::invalid_argument);
  CHECK_THROWS_AS(jet_shape(2, 13), std::invalid_argument);
  CHECK_THROWS_AS(jet_shape(0, 2), std::invalid_argument);
  // within the order range but over the table-size budget
  CHECK_THROWS_AS(jet_shape(8, 12), std::invalid_argument);
  CHECK_THROWS_AS(jet_shape(8, 8), std::invalid_argument);
  Jet a = seed_variable(0, 1.0, 2, 2);
  Jet b = seed_variable(0, 1.0, 3, 2);
  CHECK_THROWS_AS(a + b, std::invalid_argument);
  CHECK_THROWS_AS(a * b, std::invalid_argument);
}

TEST_CASE("division by a near-zero jet raises a domain error") {
  Jet t = seed_variable(0, 0.0, 1, 2);
  Jet one = Jet::constant(t.shape(), 1.0);
  CHECK_THROWS_AS(div(one, t), NumericalError);
  CHECK_THROWS_AS(sqrt(t), NumericalError);
  CHECK_THROWS_AS(pow(t, 0.5), NumericalError);
}

TEST_CASE("jet products match symbolic polynomial calculus") {
  std::mt19937 rng(20240817);
  for (int trial = 0; trial < 8; ++trial) {
    const int nvars = 2 + trial % 3;
    const int order = 2 + trial % 3;
    Poly P = random_poly(rng, nvars, 3, 5);
    Poly Q = random_poly(rng, nvars, 3, 5);
    std::uniform_real_distribution<double> pt(-1.5, 1.5);
    std::vector<double> x(nvars);
    for (double& v : x) v = pt(rng);

    Jet jp = P.to_jet(order, x) * Q.to_jet(order, x);
    Poly PQ = P * Q;

    const auto flat = all_exponents_upto(nvars, order);
    for (std::size_t off = 0; off < flat.size(); off += nvars) {
      std::vector<int> e(flat.begin() + off, flat.begin() + off + nvars);
      const double want = PQ.partial_at(e, x);
      const double got = jp.partial_value(e);
      CHECK(got == doctest::Approx(want).epsilon(1e-10));
    }
  }
}

TEST_CASE("jet partials of a nonpolynomial expression match finite differences") {
  // f(v) = sqrt(1 + v0^2 + v0 v1) / (2 + v1), assembled twice: once with jet
  // ops, once as the plain-double oracle differentiated by central FD.
  auto plain = [](std::vector<double> v) {
    return std::sqrt(1.0 + v[0] * v[0] + v[0] * v[1]) / (2.0 + v[1]);
  };
  const std::vector<double> x = {0.7, -0.4};

  auto s = jet_shape(2, 3);
  Jet v0 = Jet::seed(s, 0, x[0]);
  Jet v1 = Jet::seed(s, 1, x[1]);
  Jet f = sqrt(v0 * v0 + v0 * v1 + 1.0) / (v1 + 2.0);

  CHECK(f.value() == doctest::Approx(plain(x)).epsilon(1e-15));
  for (int i = 0; i < 2; ++i) {
    std::vector<int> e(2, 0);
    e[i] = 1;
    CHECK(f.partial_value(e) == doctest::Approx(fd::partial(plain, x, i, 1e-4)).epsilon(1e-8));
  }
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      std::vector<int> e(2, 0);
      e[i] += 1;
      e[j] += 1;
      CHECK(f.partial_value(e) ==
            doctest::Approx(fd::mixed_partial(plain, x, i, j, 1e-3)).epsilon(1e-6));
    }
}

TEST_CASE("appended first-order blocks reproduce higher derivatives") {
  // g(x) = sqrt(1 + x^2).  g'' via a single order-2 block must equal the
  // mixed u-v coefficient when x is seeded in two stacked order-1 blocks.
  const double x = 0.8;
  auto base = jet_shape(1, 2);
  Jet g2 = sqrt(Jet::seed(base, 0, x) * Jet::seed(base, 0, x) + 1.0);
  const double direct = g2.partial_value({2});

  auto sa = jet_shape(1, 1);
  auto sb = extend_shape(sa, 1, 1);
  Jet inner = Jet::seed(sa, 0, x);            // carries d/dx once
  Jet xx = Jet::seed(sb, 0, inner);           // and once more
  Jet g = sqrt(xx * xx + 1.0);
  const double nested = g.partial({1}).partial_value({1});
  CHECK(nested == doctest::Approx(direct).epsilon(1e-14));

  // chain rule through a seeded ambient value: h(t) = g(t^2) at t
  const double t = 0.6;
  Jet tj = Jet::seed(sa, 0, t);
  Jet ht = Jet::seed(sb, 0, tj * tj);         // value t^2, d/dt tracked in the ambient block
  Jet h = sqrt(ht * ht + 1.0);
  // dh/dt = g'(t^2) * 2t, from the ambient part of the value slice
  auto gp = [](double u) { return u / std::sqrt(1.0 + u * u); };
  CHECK(h.coeff({0}).partial_value({1}) == doctest::Approx(gp(t * t) * 2.0 * t).epsilon(1e-13));
}

TEST_CASE("algebra laws hold on random multi-block jets") {
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> val(-1.0, 1.0);
  auto shape = extend_shape(extend_shape(jet_shape(2, 2), 3, 1), 2, 1);
  auto randjet = [&] {
    Jet j = Jet::constant(shape, 0.0);
    for (double& c : j.coeffs()) c = val(rng);
    j.coeffs()[0] += 3.0;  // keep values away from zero for div/sqrt
    return j;
  };
  for (int trial = 0; trial < 4; ++trial) {
    Jet a = randjet(), b = randjet(), c = randjet();
    Jet ab_c = (a * b) * c;
    Jet a_bc = a * (b * c);
    for (std::size_t i = 0; i < ab_c.coeffs().size(); ++i)
      CHECK(ab_c.coeffs()[i] == doctest::Approx(a_bc.coeffs()[i]).epsilon(1e-12));

    Jet round = div(a * b, b);
    for (std::size_t i = 0; i < round.coeffs().size(); ++i)
      CHECK(round.coeffs()[i] == doctest::Approx(a.coeffs()[i]).epsilon(1e-11));

    Jet s = sqrt(a);
    Jet s2 = s * s;
    for (std::size_t i = 0; i < s2.coeffs().size(); ++i)
      CHECK(s2.coeffs()[i] == doctest::Approx(a.coeffs()[i]).epsilon(1e-11));

    Jet p = pow(a, -1.5);
    Jet q = div(Jet::constant(shape, 1.0), a * sqrt(a));
    for (std::size_t i = 0; i < p.coeffs().size(); ++i)
      CHECK(p.coeffs()[i] == doctest::Approx(q.coeffs()[i]).epsilon(1e-10));
  }
}

TEST_CASE("block-recursive multiplication agrees with the flat table") {
  // [(8,4),(8,4)] exceeds the cached-table cap, so products recurse; embed
  // single-block jets and compare against the single-block product.
  auto s1 = jet_shape(8, 4);
  auto s2 = extend_shape(s1, 8, 4);
  REQUIRE(s2->full_table() == nullptr);
  REQUIRE(s1->full_table() != nullptr);

  std::mt19937 rng(99);
  std::uniform_real_distribution<double> val(-1.0, 1.0);
  Jet a = Jet::constant(s1, 0.0), b = Jet::constant(s1, 0.0);
  for (double& c : a.coeffs()) c = val(rng);
  for (double& c : b.coeffs()) c = val(rng);

  Jet prod1 = a * b;
  Jet prod2 = Jet::lift(s2, a) * Jet::lift(s2, b);
  std::vector<int> zero(8, 0);
  Jet collapsed = prod2.coeff(zero);
  for (std::size_t i = 0; i < prod1.coeffs().size(); ++i)
    CHECK(collapsed.coeffs()[i] == doctest::Approx(prod1.coeffs()[i]).epsilon(1e-12));

  // cross terms between blocks: (a + u)^2 has coefficient a in the u slot
  std::vector<int> e1(8, 0);
  e1[3] = 1;
  Jet u = Jet::seed(s2, 3, Jet::constant(s1, 0.0));
  Jet sq = (Jet::lift(s2, a) + u) * (Jet::lift(s2, a) + u);
  Jet cross = sq.coeff(e1);
  for (std::size_t i = 0; i < a.coeffs().size(); ++i)
    CHECK(cross.coeffs()[i] == doctest::Approx(2.0 * a.coeffs()[i]).epsilon(1e-12));
}

TEST_CASE("pow handles integer and fractional exponents") {
  auto s = jet_shape(2, 4);
  Jet v0 = Jet::seed(s, 0, 1.3);
  Jet v1 = Jet::seed(s, 1, -0.2);
  Jet f = v0 * v0 + v1 * v1 + 0.5;

  Jet p2 = pow(f, 2.0);
  Jet f2 = f * f;
  for (std::size_t i = 0; i < p2.coeffs().size(); ++i)
    CHECK(p2.coeffs()[i] == doctest::Approx(f2.coeffs()[i]).epsilon(1e-13));

  Jet ph = pow(f, 0.5);
  Jet fs = sqrt(f);
  for (std::size_t i = 0; i < ph.coeffs().size(); ++i)
    CHECK(ph.coeffs()[i] == doctest::Approx(fs.coeffs()[i]).epsilon(1e-12));

  Jet pm = pow(f, -2.0);
  Jet fm = div(Jet::constant(s, 1.0), f2);
  for (std::size_t i = 0; i < pm.coeffs().size(); ++i)
    CHECK(pm.coeffs()[i] == doctest::Approx(fm.coeffs()[i]).epsilon(1e-12));
}

TEST_CASE("last-block derivative and truncation agree with polynomial calculus") {
  std::mt19937 rng(77);
  Poly P = random_poly(rng, 3, 4, 7);
  const std::vector<double> x = {0.4, -1.1, 0.7};
  Jet j4 = P.to_jet(4, x);

  Jet j2 = truncate_last(j4, 2);
  Jet j2ref = P.to_jet(2, x);
  REQUIRE(j2.shape().get() == j2ref.shape().get());
  for (std::size_t i = 0; i < j2.coeffs().size(); ++i)
    CHECK(j2.coeffs()[i] == doctest::Approx(j2ref.coeffs()[i]).epsilon(1e-13));

  for (int v = 0; v < 3; ++v) {
    Jet d = derive_last(j4, v);
    Jet dref = P.derivative(v).to_jet(3, x);
    REQUIRE(d.shape().get() == dref.shape().get());
    for (std::size_t i = 0; i < d.coeffs().size(); ++i)
      CHECK(d.coeffs()[i] == doctest::Approx(dref.coeffs()[i]).epsilon(1e-12).scale(1.0));
  }

  // an order-1 block differentiates down to the parent shape
  Jet j1 = truncate_last(j4, 1);
  Jet d1 = derive_last(j1, 2);
  CHECK(d1.shape()->num_blocks() == 0);
  CHECK(d1.value() == doctest::Approx(P.derivative(2).eval(x)).epsilon(1e-13));

  // two-block jet with random coefficients: check through partial_value,
  // where d^e (d_v f) = d^(e+u_v) f ties the two factorial scalings together
  auto s = extend_shape(jet_shape(2, 2), 3, 3);
  Jet w = Jet::constant(s, 0.0);
  std::uniform_real_distribution<double> cf(-2.0, 2.0);
  for (double& c : w.coeffs()) c = cf(rng);
  Jet dw = derive_last(w, 1);
  const auto& ot = dw.shape()->last_table();
  for (int ro = 0; ro < ot.size; ++ro) {
    std::vector<int> e(3), eup(3);
    for (int i = 0; i < 3; ++i) eup[i] = e[i] = ot.expo[static_cast<std::size_t>(ro) * 3 + i];
    eup[1] += 1;
    Jet lhs = dw.partial(e);
    Jet rhs = w.partial(eup);
    for (std::size_t i = 0; i < lhs.coeffs().size(); ++i)
      CHECK(lhs.coeffs()[i] == doctest::Approx(rhs.coeffs()[i]).epsilon(1e-12).scale(1.0));
  }
}

TEST_CASE("high-order single-variable jets beyond order four") {
  auto s8 = jet_shape(1, 8);
  Jet t = Jet::seed(s8, 0, 0.0);
  Jet g = 1.0 / (Jet::constant(s8, 1.0) - t);
  for (int k = 0; k <= 8; ++k) CHECK(g.coeffs()[k] == doctest::Approx(1.0).epsilon(1e-14));

  Jet dg = derive_last(g, 0);  // 1/(1-t)^2 = sum (k+1) t^k
  for (int k = 0; k <= 7; ++k) CHECK(dg.coeffs()[k] == doctest::Approx(k + 1.0).epsilon(1e-14));

  // sqrt(1+t): coefficients are the binomial series C(1/2, k)
  Jet r = sqrt(Jet::constant(s8, 1.0) + t);
  double binom = 1.0;
  for (int k = 0; k <= 8; ++k) {
    CHECK(r.coeffs()[k] == doctest::Approx(binom).epsilon(1e-12).scale(1.0));
    binom *= (0.5 - k) / (k + 1.0);
  }
}

TEST_CASE("last-block operations reject invalid arguments") {
  CHECK_THROWS_AS(derive_last(Jet(1.0), 0), std::invalid_argument);
  CHECK_THROWS_AS(truncate_last(Jet(1.0), 0), std::invalid_argument);
  Jet a = seed_variable(0, 1.0, 2, 2);
  CHECK_THROWS_AS(derive_last(a, 2), std::invalid_argument);
  CHECK_THROWS_AS(derive_last(a, -1), std::invalid_argument);
  CHECK_THROWS_AS(truncate_last(a, 3), std::invalid_argument);
  CHECK_THROWS_AS(truncate_last(a, -1), std::invalid_argument);
}
