#include "finhol/transport.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "doctest.h"
#include "finhol/algebra.hpp"
#include "finhol/errors.hpp"
#include "finhol/field.hpp"
#include "finhol/model.hpp"

using namespace finhol;

namespace {

FinslerModel make_model(const std::string& family, int dim, double radius = 1.0) {
  ModelConfig cfg;
  cfg.family = family;
  cfg.dim = dim;
  cfg.radius = radius;
  if (family == "randers") cfg.beta = {"0.3 + 0.03*x2", "0"};
  return builtin_model(cfg);
}

double dist(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

// Conformal factor of the unit-radius sphere chart metric g = C(x) delta.
double conformal(const std::vector<double>& x) {
  double r2 = 0.0;
  for (double xi : x) r2 += xi * xi;
  const double s = 2.0 / (1.0 + r2);
  return s * s;
}

double gnorm2(const std::vector<double>& x, const std::vector<double>& y) {
  double s = 0.0;
  for (double yi : y) s += yi * yi;
  return conformal(x) * s;
}

}  // namespace

TEST_CASE("curve specifications describe their pieces") {
  CurveSpec seg = CurveSpec::segment({-0.4, 0.2}, {0.5, 0.7});
  CHECK(seg.dim() == 2);
  CHECK(seg.piece_count() == 1);
  CHECK(seg.breakpoints().empty());
  CHECK(dist(seg.point(0.0), {-0.4, 0.2}) == doctest::Approx(0.0).scale(1.0).epsilon(1e-15));
  CHECK(dist(seg.point(1.0), {0.5, 0.7}) == doctest::Approx(0.0).scale(1.0).epsilon(1e-15));
  CHECK(seg.describe() == "segment (-0.4, 0.2) -> (0.5, 0.7)");

  CurveSpec poly = CurveSpec::polyline({{0, 0}, {1, 0}, {1, 1}});
  CHECK(poly.piece_count() == 2);
  REQUIRE(poly.breakpoints().size() == 1);
  CHECK(poly.breakpoints()[0] == doctest::Approx(0.5));
  CHECK(poly.describe().rfind("polyline ", 0) == 0);

  CurveSpec par = CurveSpec::parallelogram({0.1, -0.2}, {1, 0}, {0, 1}, 0.3, 0.2);
  CHECK(par.piece_count() == 4);
  CHECK(dist(par.point(0.0), par.point(1.0)) ==
        doctest::Approx(0.0).scale(1.0).epsilon(1e-15));
  CHECK(dist(par.point(0.25), {0.4, -0.2}) ==
        doctest::Approx(0.0).scale(1.0).epsilon(1e-12));

  CurveSpec tri = CurveSpec::geodesic_triangle(0.8);
  CHECK(tri.dim() == 2);
  CHECK(tri.piece_count() == 3);
  CHECK(dist(tri.point(0.0), {0, 0}) == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
  CHECK(dist(tri.point(1.0 / 3.0), {0.8, 0}) ==
        doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
  CHECK(dist(tri.point(2.0 / 3.0), {0, 0.8}) ==
        doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
  CHECK(dist(tri.point(1.0), {0, 0}) == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
  CHECK(tri.describe() == "geodesic octant triangle r = 0.8");

  CurveSpec pc = CurveSpec::parametric({"0.5*t^2", "1 - t"});
  std::vector<double> x, v;
  pc.eval(0.6, x, v);
  CHECK(x[0] == doctest::Approx(0.18));
  CHECK(x[1] == doctest::Approx(0.4));
  CHECK(v[0] == doctest::Approx(0.6));
  CHECK(v[1] == doctest::Approx(-1.0));
  CHECK(pc.describe() == "parametric t -> (0.5*t^2, 1 - t)");

  CurveSpec rev = poly.reversed();
  CHECK(rev.is_reversed());
  CHECK(dist(rev.point(0.0), poly.point(1.0)) ==
        doctest::Approx(0.0).scale(1.0).epsilon(1e-15));
  CHECK(dist(rev.point(0.3), poly.point(0.7)) ==
        doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
  CHECK(rev.describe().find(", reversed") != std::string::npos);
  CHECK(!rev.reversed().is_reversed());

  CHECK_THROWS_AS(CurveSpec::polyline({{0, 0}}), ConfigError);
  CHECK_THROWS_AS(CurveSpec::polyline({{0, 0}, {1}}), ConfigError);
  CHECK_THROWS_AS(CurveSpec::parallelogram({0, 0}, {1, 0}, {0}, 1, 1), ConfigError);
  CHECK_THROWS_AS(CurveSpec::geodesic_triangle(0.0), ConfigError);
  CHECK_THROWS_AS(CurveSpec::parametric({}), ConfigError);
  CHECK_THROWS_AS(CurveSpec::parametric({"t +"}), ConfigError);
}

TEST_CASE("piecewise evaluation is one-sided at corners") {
  CurveSpec poly = CurveSpec::polyline({{0, 0}, {1, 0}, {1, 1}});
  std::vector<double> x, v;

  // Both pieces agree on the corner position but keep their own velocity.
  poly.eval_piece(0, 0.5, x, v);
  CHECK(dist(x, {1, 0}) == doctest::Approx(0.0).scale(1.0).epsilon(1e-15));
  CHECK(v[0] == doctest::Approx(2.0));
  CHECK(v[1] == doctest::Approx(0.0).scale(1.0));
  poly.eval_piece(1, 0.5, x, v);
  CHECK(dist(x, {1, 0}) == doctest::Approx(0.0).scale(1.0).epsilon(1e-15));
  CHECK(v[0] == doctest::Approx(0.0).scale(1.0));
  CHECK(v[1] == doctest::Approx(2.0));

  // The plain evaluation takes the right-hand side at a breakpoint.
  poly.eval(0.5, x, v);
  CHECK(v[1] == doctest::Approx(2.0));

  // Reversed curves map piece k to forward piece count-1-k with flipped sign.
  CurveSpec rev = poly.reversed();
  rev.eval_piece(0, 0.25, x, v);
  CHECK(dist(x, {1, 0.5}) == doctest::Approx(0.0).scale(1.0).epsilon(1e-15));
  CHECK(v[0] == doctest::Approx(0.0).scale(1.0));
  CHECK(v[1] == doctest::Approx(-2.0));

  CHECK_THROWS_AS(poly.eval_piece(2, 0.1, x, v), std::invalid_argument);
  CHECK_THROWS_AS(poly.eval_piece(-1, 0.1, x, v), std::invalid_argument);
}

TEST_CASE("flat transport is the identity") {
  FinslerModel m = make_model("euclidean", 2);
  CurveSpec c = CurveSpec::polyline({{0, 0}, {1, 0.5}, {0.3, 1.2}});
  std::vector<double> y0 = {0.6, 0.8};
  TransportResult r = parallel_transport(m, c, y0);
  CHECK(dist(r.y_end, y0) == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
  CHECK(r.F_drift <= 1e-10);
  CHECK(r.steps > 0);
  CHECK(r.tolerance > 0.0);

  // A constant diagonal metric is flat as well, even though it is anisotropic.
  ModelConfig cfg;
  cfg.family = "riemannian_diag";
  cfg.dim = 2;
  cfg.metric = {"2", "3"};
  FinslerModel md = builtin_model(cfg);
  TransportResult rd = parallel_transport(md, c, y0);
  CHECK(dist(rd.y_end, y0) == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
}

TEST_CASE("transport rejects bad inputs") {
  FinslerModel m = make_model("sphere", 2);
  std::vector<double> y0 = {0.6, 0.8};
  CurveSpec c3 = CurveSpec::segment({0, 0, 0}, {1, 0, 0});
  CHECK_THROWS_AS(parallel_transport(m, c3, y0), ConfigError);
  CurveSpec c = CurveSpec::segment({0, 0}, {0.5, 0.5});
  std::vector<double> y3 = {1, 0, 0};
  CHECK_THROWS_AS(parallel_transport(m, c, y3), ConfigError);
  std::vector<double> yz = {0, 0};
  CHECK_THROWS_AS(parallel_transport(m, c, yz), NumericalError);
  CurveSpec out = CurveSpec::segment({0, 0}, {5, 0});  // leaves the chart bound
  CHECK_THROWS_AS(parallel_transport(m, out, y0), NumericalError);

  TransportOptions bad;
  bad.rtol = -1.0;
  CHECK_THROWS_AS(parallel_transport(m, c, y0, bad), ConfigError);
}

TEST_CASE("transport preserves the norm and reverses exactly") {
  FinslerModel m = make_model("randers", 2);
  CurveSpec c = CurveSpec::segment({-0.4, 0.2}, {0.5, 0.7});
  std::vector<double> y0 = {0.9, -0.3};
  TransportResult fwd = parallel_transport(m, c, y0);
  const std::vector<double> pa = {-0.4, 0.2}, pb = {0.5, 0.7};
  const double F0 = m.finsler_value(pa, y0);
  const double F1 = m.finsler_value(pb, fwd.y_end);
  CHECK(F1 == doctest::Approx(F0).epsilon(1e-8));
  TransportResult back = parallel_transport(m, c.reversed(), fwd.y_end);
  CHECK(dist(back.y_end, y0) == doctest::Approx(0.0).scale(1.0).epsilon(1e-9));

  // Round trip through a curve with corners.
  FinslerModel s = make_model("sphere", 2);
  CurveSpec tri = CurveSpec::geodesic_triangle(0.6);
  std::vector<double> w0 = {0.3, 0.1};
  TransportResult tf = parallel_transport(s, tri, w0);
  TransportResult tb = parallel_transport(s, tri.reversed(), tf.y_end);
  CHECK(dist(tb.y_end, w0) == doctest::Approx(0.0).scale(1.0).epsilon(1e-8));
}

TEST_CASE("quadratic-model transport is linear and isometric") {
  FinslerModel m = make_model("sphere", 2);
  CurveSpec c = CurveSpec::segment({-0.2, 0.4}, {0.6, -0.3});
  std::vector<double> a = {0.7, 0.1}, b = {-0.2, 0.9};
  std::vector<double> combo(2);
  for (int i = 0; i < 2; ++i) combo[i] = 1.5 * a[i] - 0.4 * b[i];
  TransportResult ta = parallel_transport(m, c, a);
  TransportResult tb = parallel_transport(m, c, b);
  TransportResult tc = parallel_transport(m, c, combo);
  std::vector<double> lin(2);
  for (int i = 0; i < 2; ++i) lin[i] = 1.5 * ta.y_end[i] - 0.4 * tb.y_end[i];
  CHECK(dist(tc.y_end, lin) == doctest::Approx(0.0).scale(1.0).epsilon(1e-8));

  const double n0 = gnorm2({-0.2, 0.4}, a);
  const double n1 = gnorm2({0.6, -0.3}, ta.y_end);
  CHECK(n1 == doctest::Approx(n0).epsilon(1e-9));
}

TEST_CASE("octant triangle holonomy is a quarter turn") {
  // The triangle pairs with the sphere model of the same radius; the quarter
  // turn is radius independent.
  for (double r : {1.0, 0.7}) {
    FinslerModel m = make_model("sphere", 2, r);
    CurveSpec tri = CurveSpec::geodesic_triangle(r);
    std::vector<double> y0 = {0.25, 0.0};
    TransportResult tr = parallel_transport(m, tri, y0);
    const double ang = std::atan2(tr.y_end[1], tr.y_end[0]);
    CHECK(ang == doctest::Approx(std::acos(0.0)).epsilon(1e-6));  // pi/2
    const double norm = std::hypot(tr.y_end[0], tr.y_end[1]);
    CHECK(norm == doctest::Approx(0.25).epsilon(1e-7));
    CHECK(tr.F_drift <= 1e-9);
  }
}

TEST_CASE("loop transport degenerates exactly and measures curvature") {
  FinslerModel m = make_model("sphere", 2);
  std::vector<double> p = {0.3, -0.2};
  std::vector<double> X = {1, 0}, Y = {0, 1};
  std::vector<double> y0 = {0.6, 0.8};

  TransportResult deg = loop_transport(m, p, X, Y, 0.0, 0.3, y0);
  CHECK(deg.steps == 0);
  CHECK(deg.y_end == y0);

  std::vector<std::vector<double>> ys = {{0.6, 0.8}, {-0.5, 0.9}};
  FinslerModel flat = make_model("euclidean", 2);
  LoopCurvatureResult lf = curvature_from_loops(flat, p, X, Y, 1e-2, ys);
  CHECK(lf.max_abs_err <= 1e-10);

  LoopCurvatureResult l2 = curvature_from_loops(m, p, X, Y, 2e-2, ys);
  LoopCurvatureResult l1 = curvature_from_loops(m, p, X, Y, 1e-2, ys);
  CHECK(l1.max_rel_err <= 2e-4);
  const double ratio = l2.max_abs_err / l1.max_abs_err;
  CHECK(ratio > 3.5);
  CHECK(ratio < 4.5);
  CHECK(!l1.noise_warning);

  TransportOptions loose;
  loose.rtol = 1e-6;
  LoopCurvatureResult ln = curvature_from_loops(m, p, X, Y, 1e-2, ys, loose);
  CHECK(ln.noise_warning);
  CHECK(ln.recommended_rtol == doctest::Approx(1e-10));
}

TEST_CASE("berwald translation is the derivative of transport") {
  // Around a closed flat loop both footpoint and fiber vector return exactly.
  FinslerModel flat = make_model("euclidean", 2);
  CurveSpec loop = CurveSpec::parallelogram({0, 0}, {1, 0}, {0, 1}, 0.4, 0.3);
  std::vector<std::vector<double>> y0 = {{0.6, 0.8}};
  std::vector<std::vector<double>> xi0 = {{-0.1, 0.7}};
  TranslateResult tf = berwald_translate(flat, loop, y0, xi0);
  CHECK(dist(tf.y_end[0], y0[0]) == doctest::Approx(0.0).scale(1.0).epsilon(1e-10));
  CHECK(dist(tf.xi_end[0], xi0[0]) == doctest::Approx(0.0).scale(1.0).epsilon(1e-10));

  // Chart segment (0,0) -> (1,0) on the unit sphere covers a quarter great
  // circle; the translation doubles components and preserves the metric norm.
  FinslerModel m = make_model("sphere", 2);
  CurveSpec c = CurveSpec::segment({0, 0}, {1, 0});
  TranslateResult tr = berwald_translate(m, c, y0, xi0);
  CHECK(tr.y_end[0][0] == doctest::Approx(2.0 * y0[0][0]).epsilon(1e-6));
  CHECK(tr.y_end[0][1] == doctest::Approx(2.0 * y0[0][1]).epsilon(1e-6));
  CHECK(tr.xi_end[0][0] == doctest::Approx(2.0 * xi0[0][0]).epsilon(1e-6));
  CHECK(tr.xi_end[0][1] == doctest::Approx(2.0 * xi0[0][1]).epsilon(1e-6));
  CHECK(gnorm2({1, 0}, tr.xi_end[0]) ==
        doctest::Approx(gnorm2({0, 0}, xi0[0])).epsilon(1e-9));

  // The field overload refuses a field built over a different model object.
  FinslerModel other = make_model("sphere", 2);
  IndicatrixField f = curvature_field(other, VectorFieldSpec::basis(2, 0),
                                      VectorFieldSpec::basis(2, 1));
  CHECK_THROWS_AS(berwald_translate(m, c, f, y0), ConfigError);
}

TEST_CASE("covariant derivative matches translate differencing") {
  TransportOptions topts;
  for (const std::string fam : {"sphere", "randers"}) {
    FinslerModel m = make_model(fam, 2);
    std::vector<double> p = {0.3, -0.1};
    std::vector<double> y = {0.8, 0.55};
    IndicatrixField f = curvature_field(m, VectorFieldSpec::basis(2, 0),
                                        VectorFieldSpec::basis(2, 1));
    IndicatrixField nab = covariant_derivative(f, VectorFieldSpec::basis(2, 0));
    std::vector<double> exact = field_values(nab, p, y);

    std::vector<double> errs;
    for (double h : {2e-3, 1e-3}) {
      std::vector<double> w[2];
      int side = 0;
      for (double sg : {1.0, -1.0}) {
        std::vector<double> pe = p;
        pe[0] += sg * h;
        CurveSpec fwd = CurveSpec::segment(p, pe);
        TransportResult t = parallel_transport(m, fwd, y, topts);
        std::vector<double> val = field_values(f, pe, t.y_end);
        TranslateResult bk =
            berwald_translate(m, fwd.reversed(), {{t.y_end}}, {{val}}, topts);
        w[side++] = bk.xi_end[0];
      }
      double err = 0.0;
      for (int i = 0; i < 2; ++i)
        err = std::max(err, std::abs((w[0][i] - w[1][i]) / (2 * h) - exact[i]));
      errs.push_back(err);
    }
    if (fam == "sphere") {
      CHECK(errs[0] <= 3e-5);
      CHECK(errs[1] <= 1e-5);
      const double order = std::log2(errs[0] / errs[1]);
      CHECK(order > 1.5);
      CHECK(order < 2.5);
    } else {
      // The derivative field is tiny here, so the difference is exact to
      // integrator noise.
      CHECK(errs[1] <= 1e-10);
    }
  }
}

TEST_CASE("holonomy algebra merges remote generators") {
  std::vector<double> p = {0.1, -0.2};
  std::vector<double> q = {0.5, 0.3};
  AlgebraOptions ao;
  TransportOptions topts;

  FinslerModel flat = make_model("euclidean", 2);
  HolonomySource src{q, CurveSpec::segment(q, p)};
  FieldBasis hflat =
      holonomy_algebra_at(flat, p, std::span<const HolonomySource>(&src, 1), ao, topts);
  CHECK(hflat.rank == 0);
  CHECK(hflat.eval_matrix.cols() == 0);
  CHECK(!hflat.noise_limited);

  FinslerModel sph = make_model("sphere", 2);
  FieldBasis hs =
      holonomy_algebra_at(sph, p, std::span<const HolonomySource>(&src, 1), ao, topts);
  FieldBasis hs_star = generate_infinitesimal_holonomy(sph, p, ao);
  CHECK(hs.rank == 1);
  CHECK(hs.rank == hs_star.rank);
  CHECK(static_cast<int>(hs.column_labels.size()) == hs.eval_matrix.cols());

  FinslerModel ran = make_model("randers", 2);
  FieldBasis hr =
      holonomy_algebra_at(ran, p, std::span<const HolonomySource>(&src, 1), ao, topts);
  FieldBasis hr_curv = generate_curvature_algebra(ran, p, ao);
  FieldBasis hr_star = generate_infinitesimal_holonomy(ran, p, ao);
  CHECK(hr_curv.rank <= hr_star.rank);
  CHECK(hr_star.rank <= hr.rank);
  CHECK(hr.rank >= 10);  // the merged algebra stays maximal-looking here
  CHECK(static_cast<int>(hr.column_labels.size()) == hr.eval_matrix.cols());
  bool has_combined = false;
  for (const std::string& line : hr.generation_log)
    if (line.find("combined rank") != std::string::npos) has_combined = true;
  CHECK(has_combined);

  HolonomySource bad{q, CurveSpec::segment(q, {0.2, -0.2})};
  CHECK_THROWS_AS(
      holonomy_algebra_at(ran, p, std::span<const HolonomySource>(&bad, 1), ao, topts),
      ConfigError);
}

TEST_CASE("commutator families recover the bracket") {
  FinslerModel m = make_model("sphere", 3);
  std::vector<double> p = {0.2, -0.1, 0.15};
  std::vector<double> X1 = {1, 0, 0}, Y1 = {0, 1, 0};
  std::vector<double> X2 = {1, 0, 0}, Y2 = {0, 0, 1};
  std::vector<std::vector<double>> ys = {{0.6, 0.8, 0.1}, {-0.3, 0.5, 0.9}};

  CommutatorFamilyResult c2 = commutator_family_experiment(m, p, X1, Y1, X2, Y2, 0.25, ys);
  CommutatorFamilyResult c1 = commutator_family_experiment(m, p, X1, Y1, X2, Y2, 0.125, ys);
  CHECK(!c1.trivial_pair);
  CHECK(c1.max_rel_err <= 0.05);
  double refmag = 0.0;
  for (const auto& row : c1.reference)
    for (double vv : row) refmag = std::max(refmag, std::abs(vv));
  CHECK(refmag > 1.0);
  const double ratio = c2.max_abs_err / c1.max_abs_err;
  CHECK(ratio > 3.0);
  CHECK(ratio < 5.2);
  CHECK(!c1.noise_warning);

  // Identical families commute; the collapsed stencil cancels exactly.
  CommutatorFamilyResult tr = commutator_family_experiment(m, p, X1, Y1, X1, Y1, 0.25, ys);
  CHECK(tr.trivial_pair);
  CHECK(tr.max_abs_err == 0.0);
}
