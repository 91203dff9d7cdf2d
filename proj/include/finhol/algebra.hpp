#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "finhol/field.hpp"
#include "finhol/model.hpp"

namespace finhol {

// Knobs for the span-generation loops.  The defaults keep every run well
// inside the jet-table budget; when a cap cuts exploration short the result
// carries truncated = true and the log says which cap fired.
struct AlgebraOptions {
  int max_fields = 64;     // accepted generators, total
  int bracket_depth = 4;   // max bracket nodes along any path of a candidate
  int nabla_depth = 3;     // max germ monomial degree (monomial_germs only)
  bool monomial_germs = false;  // derivative directions x^a e_j instead of e_j
  int samples = 0;         // fiber samples per point; 0 = 4 n^2
  double tol = 1e-8;       // relative rank / novelty threshold
  std::uint64_t seed = 1;  // sample stream
};

// Rank of a column span: number of singular values above tol * sigma_max.
struct RankResult {
  int rank = 0;
  std::vector<double> singular_values;
};
RankResult numerical_rank(const Eigen::MatrixXd& m, double tol = 1e-8);

// A generated family of indicatrix fields at one chart point, together with
// the sampled evaluation matrix its rank estimate is read from.  Column f of
// eval_matrix stacks the field-f values over the fiber samples; the rank is
// a dimension lower bound for the span the generators sit in.
struct FieldBasis {
  const FinslerModel* model = nullptr;
  std::vector<double> base_point;
  std::vector<std::vector<double>> sample_set;
  std::vector<IndicatrixField> fields;
  Eigen::MatrixXd eval_matrix;  // (samples * n) x fields.size()
  int rank = 0;
  std::vector<double> sv_spectrum;
  std::vector<std::string> generation_log;
  bool closed = false;       // no admissible candidate raises the rank
  bool truncated = false;    // a cap cut exploration short
  bool ill_conditioned = false;  // rank moved when the sample set was doubled
  // Extra columns without an expression form (transported generators and
  // their finite-difference brackets) carry labels here, one per eval_matrix
  // column; empty when every column corresponds to an entry of `fields`.
  std::vector<std::string> column_labels;
  bool noise_limited = false;  // candidates were suppressed at the transport noise floor
};

// Closure of the curvature sections r(e_i, e_j) under fiberwise brackets.
FieldBasis generate_curvature_algebra(const FinslerModel& model, std::span<const double> x,
                                      const AlgebraOptions& opts = {});

// Closure of the curvature sections under fiberwise brackets and Berwald
// covariant derivatives; extends the curvature closure, so its fields start
// with exactly the generate_curvature_algebra output for the same options.
FieldBasis generate_infinitesimal_holonomy(const FinslerModel& model, std::span<const double> x,
                                           const AlgebraOptions& opts = {});

// Matrix Lie algebra spanned by the curvature operators y -> R(e_j, e_k) y
// of a Riemannian model, closed under commutators.  Only defined when the
// curvature is linear in y; non-Riemannian models are rejected.
struct OperatorAlgebra {
  std::vector<Eigen::MatrixXd> matrices;  // n x n, acting on fiber coordinates
  int rank = 0;
  std::vector<double> sv_spectrum;
  bool closed = false;
};
OperatorAlgebra riemannian_curvature_operator_algebra(const FinslerModel& model,
                                                      std::span<const double> x,
                                                      const AlgebraOptions& opts = {});

// Stacked values of the operator fields y -> A y over a fiber sample set,
// one column per matrix; comparable against FieldBasis::eval_matrix built on
// the same samples.
Eigen::MatrixXd operator_eval_matrix(std::span<const Eigen::MatrixXd> matrices,
                                     std::span<const std::vector<double>> samples);

// max over columns a of sub of min_z ||sup z - a|| / ||a||; ~0 when every
// sub column lies in the column span of sup.  The FieldBasis overload
// insists both bases were built over the same point and samples.
double span_inclusion_residual(const Eigen::MatrixXd& sub, const Eigen::MatrixXd& sup);
double span_inclusion_residual(const FieldBasis& sub, const FieldBasis& sup);

}  // namespace finhol
