#pragma once

#include <span>
#include <vector>

#include "finhol/model.hpp"

namespace finhol {

// Classical curvature route for the quadratic model families: closed-form
// Christoffel symbols and their x-derivatives, assembled from the metric
// coefficients directly (polynomial calculus for diagonal metrics, the
// conformal-factor formulas for the stereographic sphere).  No jets are
// involved, so these values are an independent cross-check of the spray and
// curvature machinery on Riemannian inputs.

struct ChristoffelEval {
  int n = 0;
  std::vector<double> gamma;   // [(i*n+j)*n+k] = Gamma^i_jk
  std::vector<double> dgamma;  // [((i*n+j)*n+k)*n+l] = d Gamma^i_jk / dx^l
};

// Rejects non-Riemannian models (std::invalid_argument).
ChristoffelEval christoffel_symbols(const FinslerModel& model, std::span<const double> x);

// Curvature of the linear connection, indexed so that the contraction below
// gives the spray curvature:
//   B^i_{ajk} = d_k Gamma^i_ja - d_j Gamma^i_ka
//             + Gamma^i_km Gamma^m_ja - Gamma^i_jm Gamma^m_ka
// layout [((i*n+a)*n+j)*n+k].
std::vector<double> linear_curvature_tensor(const FinslerModel& model,
                                            std::span<const double> x);

// R^i_jk(x, y) = B^i_{ajk} y^a, layout [(i*n+j)*n+k].
std::vector<double> spray_curvature_from_christoffel(const FinslerModel& model,
                                                     std::span<const double> x,
                                                     std::span<const double> y);

}  // namespace finhol
