#pragma once

#include <span>
#include <vector>

#include "finhol/jet.hpp"
#include "finhol/model.hpp"

namespace finhol {

// Spray, nonlinear connection, Berwald coefficients and spray curvature.
// Index layout is row-major throughout: Gj[i*n+j] = G^i_j = dG^i/dy^j,
// Gjk[(i*n+j)*n+k] = G^i_jk, R[(i*n+j)*n+k] = R^i_jk with
//   R^i_jk = dG^i_j/dx^k - dG^i_k/dx^j + G^m_j G^i_km - G^m_k G^i_jm.

struct ConnectionEval {
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> G;    // n
  std::vector<double> Gj;   // n*n
  std::vector<double> Gjk;  // n*n*n
  std::vector<double> R;    // n*n*n
};

// G^i = 1/4 g^il (2 dg_jl/dx^k - dg_jk/dx^l) y^j y^k, every partial taken
// from one jet of F^2 in all 2n chart variables.
std::vector<double> spray_coeffs(const FinslerModel& model, std::span<const double> x,
                                 std::span<const double> y);

ConnectionEval connection_eval(const FinslerModel& model, std::span<const double> x,
                               std::span<const double> y);

// Components of X^h in the (d/dx, d/dy) frame: (X; -G^k_i X^i).
std::vector<double> horizontal_lift(const ConnectionEval& conn, std::span<const double> X);

// Jet-valued core: the same connection data over an arbitrary scalar ring,
// used wherever connection coefficients must themselves be differentiated
// (field calculus, transport curves).  x and y hold one jet per coordinate,
// all of the same shape.  y_order selects how far G is resolved in y:
// 0 = spray only, 1 = + Gj, 2 = + Gj and Gjk.
struct BerwaldJets {
  std::vector<Jet> G;    // n
  std::vector<Jet> Gj;   // n*n      (y_order >= 1)
  std::vector<Jet> Gjk;  // n*n*n    (y_order == 2)
};
BerwaldJets berwald_connection(const FinslerModel& model, std::span<const Jet> x,
                               std::span<const Jet> y, int y_order);

// Berwald data plus the curvature R^i_jk, obtained by rerunning the
// connection computation over scalars that carry first-order x-duals.
struct CurvatureJets {
  std::vector<Jet> G;
  std::vector<Jet> Gj;
  std::vector<Jet> Gjk;
  std::vector<Jet> R;  // n*n*n
};
CurvatureJets curvature_connection(const FinslerModel& model, std::span<const Jet> x,
                                   std::span<const Jet> y);

// Connection data over a joint offset box: a single extra block of 2n
// variables carries x- and y-offsets together, so every mixed derivative up
// to total degree `order` comes out of one evaluation.  Nested operations on
// indicatrix fields raise the order instead of stacking blocks, which keeps
// deep expressions affordable.  order 0 collapses to the base ring itself.
// level selects the outputs: 0 spray only, 1 +Gj, 2 +Gjk, 3 +R; F^2 is
// resolved internally to joint order `order + 3 + min(level, 2)`.
struct ConnectionBox {
  JetShapePtr ring;
  int order = 0;
  std::vector<Jet> x, y;           // coordinates as ring jets
  std::vector<Jet> G, Gj, Gjk, R;  // layouts as in ConnectionEval
};
ConnectionBox connection_box(const FinslerModel& model, std::span<const Jet> x,
                             std::span<const Jet> y, int order, int level);

}  // namespace finhol
