#pragma once

#include <span>
#include <string>
#include <vector>

#include "finhol/algebra.hpp"
#include "finhol/expr.hpp"
#include "finhol/field.hpp"
#include "finhol/model.hpp"

namespace finhol {

// Nonlinear parallel transport along chart curves, dy^i/du = -G^i_j(c, y) c'^j,
// the induced linear Berwald translation of indicatrix vectors, and the loop
// experiments that tie both back to the curvature fields.

struct TransportOptions {
  double rtol = 1e-10;  // relative tolerance per step (Dormand-Prince 5(4))
  double atol = 1e-12;  // absolute floor in the step error norm
  int max_steps = 200000;
  // Rescale y at interior curve corners so F returns to its starting value.
  // Off by default; the drift itself is the standard integration check.
  bool project_corners = false;
};

// Piecewise-smooth chart curve u in [0,1] -> x(u).  Straight-edge curves are
// stored as vertex lists; the octant triangle and parametric curves evaluate
// analytically.  Transport results only depend on the trace and orientation,
// so the parameterization of each piece is whatever is simplest.
class CurveSpec {
 public:
  static CurveSpec segment(std::vector<double> a, std::vector<double> b);
  static CurveSpec polyline(std::vector<std::vector<double>> points);
  // p -> p+sX -> p+sX+tY -> p+tY -> p.
  static CurveSpec parallelogram(std::vector<double> p, std::vector<double> X,
                                 std::vector<double> Y, double s, double t);
  // Closed geodesic triangle on the round sphere of the given radius, in the
  // stereographic chart of the sphere model family: chart origin ->
  // (radius, 0) -> (0, radius) -> origin, each side a great-circle arc.
  // Encloses one octant, so the transport holonomy is a rotation by pi/2
  // for every radius.
  static CurveSpec geodesic_triangle(double radius);
  // One expression per coordinate in the variable t (t in [0,1]); velocities
  // come from a first-order jet of each expression.
  static CurveSpec parametric(std::vector<std::string> exprs);

  int dim() const { return dim_; }
  // Position and velocity at parameter u in [0,1].
  void eval(double u, std::vector<double>& x, std::vector<double>& v) const;
  // Same, restricted to smooth piece k (between consecutive breakpoints).
  // At a piece endpoint this returns the one-sided values of piece k, which
  // is what an integrator stopping at corners must see.
  void eval_piece(int k, double u, std::vector<double>& x, std::vector<double>& v) const;
  std::vector<double> point(double u) const;
  // Interior parameters where the velocity may jump; the integrator restarts
  // there.  Sorted, excludes 0 and 1.
  const std::vector<double>& breakpoints() const { return breaks_; }
  int piece_count() const { return static_cast<int>(breaks_.size()) + 1; }
  CurveSpec reversed() const;  // same trace, opposite orientation
  bool is_reversed() const { return reversed_; }
  std::string describe() const;

 private:
  enum class Kind { polyline, triangle, parametric };
  CurveSpec() = default;
  void eval_forward(int k, double u, std::vector<double>& x, std::vector<double>& v) const;

  Kind kind_ = Kind::polyline;
  int dim_ = 0;
  bool reversed_ = false;
  std::vector<double> breaks_;
  std::vector<std::vector<double>> vertices_;  // polyline
  double radius_ = 1.0;                        // triangle
  std::vector<ScalarExpr> exprs_;              // parametric
  std::vector<std::string> expr_texts_;
};

struct TransportResult {
  std::vector<double> y_end;
  double F_drift = 0.0;  // max |F(x(u), y(u)) - F(x(0), y0)| over accepted steps
  long steps = 0;        // accepted integrator steps
  double tolerance = 0.0;  // drift bound the run was held to
};

// Transport y0 from curve.point(0) to curve.point(1).  Throws NumericalError
// if the curve leaves the model chart, the step size underflows, max_steps is
// exhausted, or the F-drift exceeds 10 * rtol * max(1, F(x0, y0)).
TransportResult parallel_transport(const FinslerModel& model, const CurveSpec& curve,
                                   std::span<const double> y0,
                                   const TransportOptions& opts = {});

// Transport around the parallelogram loop p -> p+sX -> p+sX+tY -> p+tY -> p.
// s == 0 or t == 0 retraces its path exactly, so the result is y0 itself with
// zero steps.
TransportResult loop_transport(const FinslerModel& model, std::span<const double> p,
                               std::span<const double> X, std::span<const double> Y,
                               double s, double t, std::span<const double> y0,
                               const TransportOptions& opts = {});

// Central second mixed difference of the loop family at (s, t) = (0, 0):
//   [T(h,h) - T(h,-h) - T(-h,h) + T(-h,-h)] / (4 h^2)
// per sample vector, against the curvature field r(X, Y) evaluated at the same
// (p, y).  The two agree to O(h^2) plus integrator noise of order rtol / h^2.
struct LoopCurvatureResult {
  std::vector<std::vector<double>> difference;  // one vector per y sample
  std::vector<std::vector<double>> reference;   // r(X, Y) at (p, y)
  double max_abs_err = 0.0;
  double max_rel_err = 0.0;  // against the largest reference magnitude
  bool noise_warning = false;  // rtol too loose for this h
  double recommended_rtol = 0.0;
};
LoopCurvatureResult curvature_from_loops(const FinslerModel& model,
                                         std::span<const double> p,
                                         std::span<const double> X,
                                         std::span<const double> Y, double h,
                                         std::span<const std::vector<double>> y_samples,
                                         const TransportOptions& opts = {});

// Berwald translation: alongside each transported y, carry a fiber vector xi
// by the linearized equation dxi^i/du = -G^i_jk(c, y) xi^k c'^j.  This is the
// derivative of the transport map itself, so translating a whole indicatrix
// field commutes with transporting its footpoints.
struct TranslateResult {
  std::vector<std::vector<double>> y_end;
  std::vector<std::vector<double>> xi_end;
  long steps = 0;
  double max_F_drift = 0.0;
  double tolerance = 0.0;
};
TranslateResult berwald_translate(const FinslerModel& model, const CurveSpec& curve,
                                  std::span<const std::vector<double>> y0,
                                  std::span<const std::vector<double>> xi0,
                                  const TransportOptions& opts = {});
// Evaluate the field on the given fiber vectors at curve.point(0), then
// translate field values and footpoints together to curve.point(1).
TranslateResult berwald_translate(const FinslerModel& model, const CurveSpec& curve,
                                  const IndicatrixField& field,
                                  std::span<const std::vector<double>> y0,
                                  const TransportOptions& opts = {});

// A remote seed point for the holonomy algebra: generators found at `point`
// are carried to the base point along `curve`, which must run from `point`
// to the base point of the enclosing call.
struct HolonomySource {
  std::vector<double> point;
  CurveSpec curve;
};

// Lower bound for the holonomy algebra at p: the infinitesimal holonomy
// generators at p, extended by Berwald-translated generators from each
// source point and one generation of finite-difference brackets between
// translated and expression columns.  Translated columns have no expression
// form; `column_labels` names every column of the returned eval_matrix.
// Candidates whose novelty does not clear the transport noise floor are
// dropped and flagged via `noise_limited` rather than admitted.
FieldBasis holonomy_algebra_at(const FinslerModel& model, std::span<const double> p,
                               std::span<const HolonomySource> sources,
                               const AlgebraOptions& opts = {},
                               const TransportOptions& topts = {});

// Fourth mixed derivative of the commutator of two loop families,
//   Phi(s, t) = phi_s^-1 . psi_t^-1 . phi_s . psi_t   (psi applied first),
// with phi_s the (s, s) parallelogram loop of (X1, Y1) and psi_t that of
// (X2, Y2).  The 16-corner central stencil of d^4/ds^2 dt^2 at 0 recovers
// the bracket -[r(X1,Y1), r(X2,Y2)] to O(h^2).  Identical families commute,
// and the collapsed stencil then cancels exactly.
struct CommutatorFamilyResult {
  std::vector<std::vector<double>> difference;
  std::vector<std::vector<double>> reference;  // -[xi, eta] at (p, y)
  double max_abs_err = 0.0;
  double max_rel_err = 0.0;
  bool trivial_pair = false;  // both families identical
  bool noise_warning = false;
  double recommended_rtol = 0.0;
};
CommutatorFamilyResult commutator_family_experiment(
    const FinslerModel& model, std::span<const double> p, std::span<const double> X1,
    std::span<const double> Y1, std::span<const double> X2, std::span<const double> Y2,
    double h, std::span<const std::vector<double>> y_samples,
    const TransportOptions& opts = {});

}  // namespace finhol
