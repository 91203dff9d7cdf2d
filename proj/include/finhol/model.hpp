#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "finhol/expr.hpp"
#include "finhol/jet.hpp"

namespace finhol {

// A Finsler structure on a coordinate chart: a positive function F(x, y),
// 1-homogeneous in y, whose fundamental tensor
//   g_ij(x, y) = 1/2 d^2(F^2)/dy^i dy^j
// is positive definite away from y = 0.  Evaluation goes through jets, so
// every consumer picks its own truncation shape; the slot convention is
// x1..xn followed by y1..yn.
class FinslerModel {
public:
  enum class Family { euclidean, riemannian_diag, sphere, randers, custom };

  int dim() const { return dim_; }
  Family family() const { return family_; }
  const std::string& family_name() const { return family_name_; }
  const std::string& name() const { return name_; }
  double chart_bound() const { return chart_bound_; }
  bool in_chart(std::span<const double> x) const;

  // F and F^2 on jet arguments xy = (x1..xn, y1..yn).  For the quadratic
  // families F^2 is evaluated from a sqrt-free expression.
  Jet finsler(std::span<const Jet> xy) const;
  Jet finsler_squared(std::span<const Jet> xy) const;
  double finsler_value(std::span<const double> x, std::span<const double> y) const;

  // Family data used by closed-form cross-checks.  metric_diag() holds the
  // diagonal entries a_i(x) for the quadratic part (identity for euclidean),
  // beta() the drift covector of a randers model; both are polynomials in x.
  bool is_riemannian() const {
    return family_ == Family::euclidean || family_ == Family::riemannian_diag ||
           family_ == Family::sphere;
  }
  const std::vector<Polynomial>& metric_diag() const { return metric_diag_; }
  const std::vector<Polynomial>& beta() const { return beta_; }
  double sphere_radius() const { return radius_; }

private:
  friend FinslerModel builtin_model(const struct ModelConfig& cfg);

  int dim_ = 0;
  Family family_ = Family::euclidean;
  std::string family_name_;
  std::string name_;
  double chart_bound_ = 0.0;
  double radius_ = 0.0;
  std::vector<Polynomial> metric_diag_;
  std::vector<Polynomial> beta_;
  ScalarExpr f_;        // F itself
  ScalarExpr f2_;       // F^2, sqrt-free when the family allows it
  bool f2_direct_ = false;  // evaluate f2_ instead of squaring f_
};

// Construction parameters.  `family` picks the assembly rule; the remaining
// fields are consumed where they make sense and ignored otherwise.
struct ModelConfig {
  std::string family = "euclidean";
  int dim = 2;
  std::string name;                  // defaults to the family name
  double chart_bound = 0.0;          // 0 = family default
  double radius = 1.0;               // sphere
  std::vector<std::string> metric;   // diagonal entries a_i(x)
  std::vector<std::string> beta;     // randers drift b_i(x)
  std::string expression;            // custom F(x, y)
};

// Assembles a model and rejects broken input: unknown family, dimension
// outside 2..4, randers drift with ||b||_a >= 1 somewhere on the chart,
// custom expressions that fail the sampled 1-homogeneity test.
FinslerModel builtin_model(const ModelConfig& cfg);

// Fundamental tensor at (x, y), with inverse and determinant.  Throws
// DegenerateModelError when g fails the positive-definiteness check.
struct MetricEval {
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> g;      // n x n, row-major
  std::vector<double> g_inv;  // n x n, row-major
  double det = 0.0;
};
MetricEval fundamental_tensor(const FinslerModel& model, std::span<const double> x,
                              std::span<const double> y);

// `count` points y with F(x, y) = 1, from seeded normal directions.
std::vector<std::vector<double>> indicatrix_sample(const FinslerModel& model,
                                                   std::span<const double> x, int count,
                                                   std::uint64_t seed);

// Sampled sanity sweep over seeded chart points and directions: positivity
// and 1-homogeneity of F, the Euler identity y^i dF/dy^i = F, positive
// definiteness and 0-homogeneity of g, and y^i y^j g_ij = F^2.
struct ModelValidation {
  int samples = 0;
  double min_finsler = 0.0;  // smallest F over Euclidean-unit directions
  double max_homogeneity_error = 0.0;
  double max_euler_error = 0.0;
  double min_metric_eigenvalue = 0.0;
  double max_g_homogeneity_error = 0.0;
  double max_metric_identity_error = 0.0;
};
ModelValidation validate_model(const FinslerModel& model, int samples, std::uint64_t seed);

}  // namespace finhol
