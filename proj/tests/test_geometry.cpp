#include "finhol/geometry.hpp"

#include <cmath>
#include <vector>

#include "doctest.h"
#include "finhol/model.hpp"
#include "finhol/riemann.hpp"
#include "finhol/rng.hpp"
#include "support/fd.hpp"

using namespace finhol;

namespace {

FinslerModel make_model(const std::string& family, int dim, double radius = 1.0,
                        std::vector<std::string> metric = {}, std::vector<std::string> beta = {},
                        std::string expr = {}) {
  ModelConfig cfg;
  cfg.family = family;
  cfg.dim = dim;
  cfg.radius = radius;
  cfg.metric = std::move(metric);
  cfg.beta = std::move(beta);
  cfg.expression = std::move(expr);
  return builtin_model(cfg);
}

double max_abs(std::span<const double> v) {
  double m = 0.0;
  for (double c : v) m = std::max(m, std::abs(c));
  return m;
}

// random chart point and direction
void sample_xy(Rng& rng, int n, double bound, std::vector<double>& x, std::vector<double>& y) {
  x.assign(n, 0.0);
  y.assign(n, 0.0);
  double ny = 0.0;
  while (ny < 1e-2) {
    ny = 0.0;
    for (int i = 0; i < n; ++i) {
      x[i] = rng.uniform(-bound, bound);
      y[i] = rng.normal();
      ny += y[i] * y[i];
    }
    ny = std::sqrt(ny);
  }
}

}  // namespace

TEST_CASE("flat models have vanishing connection data") {
  std::vector<FinslerModel> flats;
  flats.push_back(make_model("euclidean", 2));
  flats.push_back(make_model("euclidean", 3));
  flats.push_back(make_model("riemannian_diag", 2, 1.0, {"2", "3"}));

  Rng rng(11);
  std::vector<double> x, y;
  for (const FinslerModel& m : flats) {
    CAPTURE(m.name());
    for (int s = 0; s < 20; ++s) {
      sample_xy(rng, m.dim(), 1.5, x, y);
      const ConnectionEval c = connection_eval(m, x, y);
      CHECK(max_abs(c.G) <= 1e-12);
      CHECK(max_abs(c.Gj) <= 1e-12);
      CHECK(max_abs(c.Gjk) <= 1e-12);
      CHECK(max_abs(c.R) <= 1e-12);
    }
  }

  // a locally Minkowski norm (x-independent, non-quadratic) is also flat,
  // though its metric is not the Euclidean one
  const FinslerModel mink = make_model("custom_polynomial", 2, 1.0, {}, {},
                                       "sqrt(y1^2 + y2^2) + 0.2*y1");
  for (int s = 0; s < 10; ++s) {
    sample_xy(rng, 2, 1.5, x, y);
    const ConnectionEval c = connection_eval(mink, x, y);
    CHECK(max_abs(c.R) <= 1e-12);
  }
}

TEST_CASE("sphere spray, connection and lift match the christoffel oracle") {
  for (auto [n, r] : {std::pair<int, double>{2, 1.0}, {3, 1.5}}) {
    const FinslerModel m = make_model("sphere", n, r);
    CAPTURE(n);
    std::vector<double> x(n, 0.0), y(n, 0.0);
    x[0] = 0.5;
    x[1] = -0.2;
    y[0] = 0.9;
    y[1] = 0.3;
    if (n == 3) {
      x[2] = 0.3;
      y[2] = -0.6;
    }
    const ChristoffelEval ch = christoffel_symbols(m, x);
    const ConnectionEval c = connection_eval(m, x, y);
    auto gamma = [&](int i, int j, int k) { return ch.gamma[(i * n + j) * n + k]; };

    const std::vector<double> G = spray_coeffs(m, x, y);
    for (int i = 0; i < n; ++i) {
      double s = 0.0;
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) s += 0.5 * gamma(i, j, k) * y[j] * y[k];
      CHECK(G[i] == doctest::Approx(s).scale(1).epsilon(1e-9));
      CHECK(c.G[i] == doctest::Approx(s).scale(1).epsilon(1e-9));
    }
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        double s = 0.0;
        for (int a = 0; a < n; ++a) s += gamma(i, j, a) * y[a];
        CHECK(c.Gj[i * n + j] == doctest::Approx(s).scale(1).epsilon(1e-9));
      }
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k)
          CHECK(c.Gjk[(i * n + j) * n + k] ==
                doctest::Approx(gamma(i, j, k)).scale(1).epsilon(1e-9));

    // horizontal lift of e1: x-part is e1, y-part is -Gamma^k_{1a} y^a
    std::vector<double> X(n, 0.0);
    X[0] = 1.0;
    const std::vector<double> lift = horizontal_lift(c, X);
    for (int i = 0; i < n; ++i) CHECK(lift[i] == X[i]);
    for (int k = 0; k < n; ++k) {
      double s = 0.0;
      for (int a = 0; a < n; ++a) s += gamma(k, 0, a) * y[a];
      CHECK(lift[n + k] == doctest::Approx(-s).scale(1).epsilon(1e-9));
    }
  }

  // at the chart origin of the r = 1 sphere all christoffels vanish
  const FinslerModel m0 = make_model("sphere", 2, 1.0);
  const std::vector<double> G0 =
      spray_coeffs(m0, std::vector<double>{0.0, 0.0}, std::vector<double>{1.0, 0.0});
  CHECK(max_abs(G0) <= 1e-12);
}

TEST_CASE("curvature against the classical tensor route") {
  std::vector<FinslerModel> riem;
  riem.push_back(make_model("sphere", 2, 1.0));
  riem.push_back(make_model("sphere", 3, 2.0));
  riem.push_back(make_model("riemannian_diag", 2, 1.0, {"1 + 0.5*x2^2", "2 + x1^2"}));

  Rng rng(5);
  std::vector<double> x, y;
  for (const FinslerModel& m : riem) {
    CAPTURE(m.name());
    const int n = m.dim();
    for (int s = 0; s < 5; ++s) {
      sample_xy(rng, n, 1.0, x, y);
      const ConnectionEval c = connection_eval(m, x, y);
      const std::vector<double> oracle = spray_curvature_from_christoffel(m, x, y);
      for (int i = 0; i < n * n * n; ++i)
        CHECK(c.R[i] == doctest::Approx(oracle[i]).scale(1).epsilon(1e-9));
    }
  }

  // frozen sphere values at the origin, r = 1, y = (0.6, 0.8):
  // R^i_jk = 4 (y_j d^i_k - y_k d^i_j)
  const ConnectionEval c0 = connection_eval(riem[0], std::vector<double>{0.0, 0.0},
                                            std::vector<double>{0.6, 0.8});
  const int n = 2;
  CHECK(c0.R[(0 * n + 0) * n + 1] == doctest::Approx(-3.2).epsilon(1e-11));
  CHECK(c0.R[(1 * n + 0) * n + 1] == doctest::Approx(2.4).epsilon(1e-11));
}

TEST_CASE("curvature cross-checked by x-differencing the connection") {
  // second implementation of R^i_jk: difference G^i_j in x by central
  // differences with a Richardson pass, then add the quadratic terms
  std::vector<FinslerModel> models;
  models.push_back(make_model("randers", 2, 1.0, {}, {"0.3 + 0.03*x2", "0"}));
  models.push_back(make_model("randers", 2, 1.0, {}, {"0.3", "0"}));
  models.push_back(make_model("sphere", 2, 1.0));

  for (const FinslerModel& m : models) {
    CAPTURE(m.name());
    const int n = m.dim();
    const std::vector<double> x{0.4, -0.3};
    const std::vector<double> y{1.0, 0.7};
    const ConnectionEval c = connection_eval(m, x, y);

    auto Gj_at = [&](std::vector<double> xv, int i, int j) {
      std::vector<Jet> xj, yj;
      for (int a = 0; a < n; ++a) xj.emplace_back(xv[a]);
      for (int a = 0; a < n; ++a) yj.emplace_back(y[a]);
      return berwald_connection(m, xj, yj, 1).Gj[i * n + j].value();
    };
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) {
          double r = fd::partial([&](std::vector<double> xv) { return Gj_at(xv, i, j); }, x, k, 1e-4) -
                     fd::partial([&](std::vector<double> xv) { return Gj_at(xv, i, k); }, x, j, 1e-4);
          for (int a = 0; a < n; ++a)
            r += c.Gj[a * n + j] * c.Gjk[(i * n + k) * n + a] -
                 c.Gj[a * n + k] * c.Gjk[(i * n + j) * n + a];
          CHECK(c.R[(i * n + j) * n + k] == doctest::Approx(r).scale(1).epsilon(1e-6));
        }
  }
}

TEST_CASE("homogeneity ladder and index symmetries") {
  std::vector<FinslerModel> models;
  models.push_back(make_model("sphere", 2, 1.0));
  models.push_back(make_model("randers", 2, 1.0, {}, {"0.3 + 0.03*x2", "0"}));
  models.push_back(make_model("riemannian_diag", 2, 1.0, {"1 + 0.5*x2^2", "2 + x1^2"}));
  models.push_back(make_model("custom_polynomial", 2, 1.0, {}, {},
                              "sqrt(y1^2 + y2^2 + (0.5 + 0.1*x1)*y1*y2) + 0.1*y2"));

  Rng rng(17);
  std::vector<double> x, y;
  for (const FinslerModel& m : models) {
    CAPTURE(m.name());
    const int n = m.dim();
    for (int s = 0; s < 10; ++s) {
      sample_xy(rng, n, 1.2, x, y);
      const ConnectionEval c = connection_eval(m, x, y);
      for (double lambda : {0.5, 2.0}) {
        std::vector<double> ly(y);
        for (double& v : ly) v *= lambda;
        const ConnectionEval cl = connection_eval(m, x, ly);
        const double sG = 1.0 + max_abs(c.G), sGj = 1.0 + max_abs(c.Gj),
                     sGjk = 1.0 + max_abs(c.Gjk), sR = 1.0 + max_abs(c.R);
        for (int i = 0; i < n; ++i)
          CHECK(std::abs(cl.G[i] - lambda * lambda * c.G[i]) / sG <= 1e-10);
        for (int i = 0; i < n * n; ++i)
          CHECK(std::abs(cl.Gj[i] - lambda * c.Gj[i]) / sGj <= 1e-10);
        for (int i = 0; i < n * n * n; ++i)
          CHECK(std::abs(cl.Gjk[i] - c.Gjk[i]) / sGjk <= 1e-10);
        // R is built from Gj and x-derivatives, so it scales like y
        for (int i = 0; i < n * n * n; ++i)
          CHECK(std::abs(cl.R[i] - lambda * c.R[i]) / sR <= 1e-10);
      }
      const double sGjk = 1.0 + max_abs(c.Gjk), sR = 1.0 + max_abs(c.R);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          for (int k = 0; k < n; ++k) {
            CHECK(std::abs(c.Gjk[(i * n + j) * n + k] - c.Gjk[(i * n + k) * n + j]) / sGjk <= 1e-10);
            CHECK(std::abs(c.R[(i * n + j) * n + k] + c.R[(i * n + k) * n + j]) / sR <= 1e-10);
          }
    }
  }
}

TEST_CASE("riemannian curvature is linear in y") {
  const FinslerModel m = make_model("sphere", 3, 1.0);
  const int n = 3;
  const std::vector<double> x{0.3, -0.5, 0.1};
  const std::vector<double> y1{1.0, 0.2, -0.4};
  const std::vector<double> y2{-0.3, 0.9, 0.5};
  const double a = 0.7, b = -1.3;
  std::vector<double> mix(n);
  for (int i = 0; i < n; ++i) mix[i] = a * y1[i] + b * y2[i];

  const ConnectionEval c1 = connection_eval(m, x, y1);
  const ConnectionEval c2 = connection_eval(m, x, y2);
  const ConnectionEval cm = connection_eval(m, x, mix);
  for (int i = 0; i < n * n * n; ++i)
    CHECK(cm.R[i] == doctest::Approx(a * c1.R[i] + b * c2.R[i]).scale(1).epsilon(1e-9));
}

TEST_CASE("jet-valued connection data differentiates along curves") {
  // scalars carrying a curve parameter: x(t) = x0 + t v, y fixed; the t-slope
  // of the jet results must match differencing the plain evaluation
  const FinslerModel m = make_model("sphere", 2, 1.0);
  const int n = 2;
  const std::vector<double> x0{0.3, -0.4};
  const std::vector<double> v{0.8, 0.5};
  const std::vector<double> y{1.0, 0.6};

  const JetShapePtr b1 = jet_shape(1, 1);
  std::vector<Jet> xj, yj;
  for (int i = 0; i < n; ++i) xj.push_back(Jet::constant(b1, x0[i]) + v[i] * Jet::seed(b1, 0, 0.0));
  for (int i = 0; i < n; ++i) yj.push_back(Jet::constant(b1, y[i]));

  const BerwaldJets bw = berwald_connection(m, xj, yj, 1);
  const CurvatureJets cj = curvature_connection(m, xj, yj);

  auto conn_at = [&](double t) {
    std::vector<double> xt(n);
    for (int i = 0; i < n; ++i) xt[i] = x0[i] + t * v[i];
    return connection_eval(m, xt, y);
  };
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double slope = bw.Gj[i * n + j].partial_value({1});
      const double oracle =
          fd::deriv([&](double t) { return conn_at(t).Gj[i * n + j]; }, 0.0, 1e-4);
      CHECK(slope == doctest::Approx(oracle).scale(1).epsilon(1e-8));
      CHECK(bw.Gj[i * n + j].value() == doctest::Approx(conn_at(0.0).Gj[i * n + j]).scale(1).epsilon(1e-12));
    }
  for (int idx = 0; idx < n * n * n; ++idx) {
    const double slope = cj.R[idx].partial_value({1});
    const double oracle = fd::deriv([&](double t) { return conn_at(t).R[idx]; }, 0.0, 1e-4);
    CHECK(slope == doctest::Approx(oracle).scale(1).epsilon(1e-7));
  }
}

TEST_CASE("joint-box connection data matches the dual-block route") {
  // the box evaluator shares only the final spray contraction with the
  // block-tower path; metric extraction and ring plumbing are disjoint, so
  // agreement here cross-validates both implementations
  std::vector<FinslerModel> models;
  models.push_back(make_model("sphere", 2, 1.3));
  models.push_back(make_model("sphere", 3, 1.0));
  models.push_back(make_model("randers", 2, 1.0, {}, {"0.3 + 0.03*x2", "0"}));

  Rng rng(314);
  std::vector<double> x, y;
  for (const FinslerModel& m : models) {
    CAPTURE(m.name());
    const int n = m.dim();
    for (int s = 0; s < 3; ++s) {
      sample_xy(rng, n, 1.0, x, y);
      const ConnectionEval ce = connection_eval(m, x, y);
      std::vector<Jet> xj, yj;
      for (double v : x) xj.emplace_back(v);
      for (double v : y) yj.emplace_back(v);

      const ConnectionBox b0 = connection_box(m, xj, yj, 0, 3);
      CHECK(b0.ring->num_blocks() == 0);
      for (int i = 0; i < n; ++i)
        CHECK(b0.G[i].value() == doctest::Approx(ce.G[i]).epsilon(1e-11).scale(1.0));
      for (int i = 0; i < n * n; ++i)
        CHECK(b0.Gj[i].value() == doctest::Approx(ce.Gj[i]).epsilon(1e-11).scale(1.0));
      for (int i = 0; i < n * n * n; ++i) {
        CHECK(b0.Gjk[i].value() == doctest::Approx(ce.Gjk[i]).epsilon(1e-11).scale(1.0));
        CHECK(b0.R[i].value() == doctest::Approx(ce.R[i]).epsilon(1e-11).scale(1.0));
      }

      if (s > 0) continue;

      // first joint (x, y) derivatives against finite differences of the
      // scalar route
      const ConnectionBox b1 = connection_box(m, xj, yj, 1, 3);
      std::vector<double> v0(x.begin(), x.end());
      v0.insert(v0.end(), y.begin(), y.end());
      auto gj_at = [&](int idx) {
        return [&m, idx, n](std::vector<double> v) {
          const ConnectionEval c = connection_eval(m, std::span<const double>(v.data(), n),
                                                   std::span<const double>(v.data() + n, n));
          return c.Gj[idx];
        };
      };
      auto r_at = [&](int idx) {
        return [&m, idx, n](std::vector<double> v) {
          const ConnectionEval c = connection_eval(m, std::span<const double>(v.data(), n),
                                                   std::span<const double>(v.data() + n, n));
          return c.R[idx];
        };
      };
      for (int var = 0; var < 2 * n; ++var) {
        std::vector<int> e(2 * n, 0);
        e[var] = 1;
        for (int idx = 0; idx < n * n; ++idx)
          CHECK(b1.Gj[idx].partial_value(e) ==
                doctest::Approx(fd::partial(gj_at(idx), v0, var, 1e-3)).epsilon(1e-6).scale(1.0));
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j)
            for (int k = j + 1; k < n; ++k) {
              const int idx = (i * n + j) * n + k;
              CHECK(b1.R[idx].partial_value(e) ==
                    doctest::Approx(fd::partial(r_at(idx), v0, var, 1e-3)).epsilon(1e-6).scale(1.0));
            }
      }

      // order coherence: an order-2 box restricts to the order-1 jet
      const ConnectionBox b2 = connection_box(m, xj, yj, 2, 3);
      for (int idx = 0; idx < n * n * n; ++idx) {
        CHECK(b2.R[idx].value() == doctest::Approx(b1.R[idx].value()).epsilon(1e-12).scale(1.0));
        for (int var = 0; var < 2 * n; ++var) {
          std::vector<int> e(2 * n, 0);
          e[var] = 1;
          CHECK(b2.R[idx].partial_value(e) ==
                doctest::Approx(b1.R[idx].partial_value(e)).epsilon(1e-12).scale(1.0));
        }
      }

      // one second mixed derivative against finite differences
      if (n == 2) {
        const int idx = (0 * n + 0) * n + 1;
        std::vector<int> e(2 * n, 0);
        e[1] = 1;
        e[n] = 1;
        CHECK(b2.R[idx].partial_value(e) ==
              doctest::Approx(fd::mixed_partial(r_at(idx), v0, 1, n, 1e-3)).epsilon(1e-5).scale(1.0));
      }
    }
  }

  // level gating and argument validation
  const FinslerModel flat = make_model("euclidean", 2);
  std::vector<Jet> xj, yj;
  for (int i = 0; i < 2; ++i) {
    xj.emplace_back(0.1 * (i + 1));
    yj.emplace_back(1.0 - 0.3 * i);
  }
  const ConnectionBox lv1 = connection_box(flat, xj, yj, 1, 1);
  CHECK(lv1.G.size() == 2);
  CHECK(lv1.Gj.size() == 4);
  CHECK(lv1.Gjk.empty());
  CHECK(lv1.R.empty());
  for (const Jet& c : lv1.Gj)
    for (double v : c.coeffs()) CHECK(std::abs(v) <= 1e-12);
  CHECK_THROWS_AS(connection_box(flat, xj, yj, -1, 3), std::invalid_argument);
  CHECK_THROWS_AS(connection_box(flat, xj, yj, 0, 4), std::invalid_argument);
}
