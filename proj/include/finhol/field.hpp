#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "finhol/expr.hpp"
#include "finhol/geometry.hpp"
#include "finhol/model.hpp"

namespace finhol {

// Polynomial vector field on the chart.  Component i is a polynomial in
// x1..xn (slot j = x_{j+1}); constant frames and coordinate monomials cover
// the germ bases the algebra layer works with.
class VectorFieldSpec {
public:
  VectorFieldSpec() = default;

  static VectorFieldSpec constant(std::vector<double> v);
  static VectorFieldSpec basis(int dim, int axis);  // e_{axis+1}
  static VectorFieldSpec monomial(int dim, int axis, std::vector<int> exponent,
                                  double coeff = 1.0);
  static VectorFieldSpec from_components(std::vector<Polynomial> components);
  static VectorFieldSpec parse(std::span<const std::string> texts);

  int dim() const { return static_cast<int>(comps_.size()); }
  const std::vector<Polynomial>& components() const { return comps_; }
  std::vector<Jet> eval(std::span<const Jet> x) const;
  std::vector<double> eval_value(std::span<const double> x) const;
  const std::string& describe() const { return text_; }

private:
  std::vector<Polynomial> comps_;
  std::string text_;
};

// Vertical vector field on the indicatrix bundle, kept as a closed
// expression over curvature sections r(X, Y), fiberwise Lie brackets and
// Berwald covariant derivatives.  Construction only records the expression;
// FieldEval evaluates it over any base ring.  The model must outlive every
// field built on it.
inline constexpr int kMaxFieldDepth = 12;

class IndicatrixField {
public:
  struct Node;

  IndicatrixField() = default;
  bool empty() const { return !node_; }
  const FinslerModel& model() const;
  int dim() const;
  int depth() const;
  const std::string& describe() const;
  const std::shared_ptr<const Node>& node() const { return node_; }

private:
  explicit IndicatrixField(std::shared_ptr<const Node> n) : node_(std::move(n)) {}
  friend IndicatrixField curvature_field(const FinslerModel&, VectorFieldSpec, VectorFieldSpec);
  friend IndicatrixField lie_bracket(const IndicatrixField&, const IndicatrixField&);
  friend IndicatrixField covariant_derivative(const IndicatrixField&, VectorFieldSpec);
  std::shared_ptr<const Node> node_;
};

// xi^i = R^i_jk X^j(x) Y^k(x)
IndicatrixField curvature_field(const FinslerModel& model, VectorFieldSpec X, VectorFieldSpec Y);
// fiberwise bracket [xi, eta]^i = xi^k d(eta^i)/dy^k - eta^k d(xi^i)/dy^k
IndicatrixField lie_bracket(const IndicatrixField& a, const IndicatrixField& b);
// (D_X xi)^i = (d(xi^i)/dx^j - G^k_j d(xi^i)/dy^k + G^i_jk xi^k) X^j(x)
IndicatrixField covariant_derivative(const IndicatrixField& xi, VectorFieldSpec X);

// Shared evaluation state for one base point (or one base ring of jets).
// Connection boxes and node values are cached per derivative order, so every
// curvature leaf at a given order shares a single connection computation and
// common subexpressions are evaluated once.  The context retains every
// expression graph it has evaluated, so handing eval() a temporary field is
// fine; the model must outlive the context.
class FieldEval {
public:
  FieldEval(const FinslerModel& model, std::span<const Jet> x, std::span<const Jet> y);
  FieldEval(const FinslerModel& model, std::span<const double> x, std::span<const double> y);

  // Field components as jets in base x (2n, order); order 0 gives the base
  // ring itself.
  std::span<const Jet> eval(const IndicatrixField& f, int order = 0);
  std::vector<double> values(const IndicatrixField& f);
  const ConnectionBox& connection(int order);

  const std::vector<Jet>& x() const { return x_; }
  const std::vector<Jet>& y() const { return y_; }

private:
  const std::vector<Jet>& eval_node(const IndicatrixField::Node* nd, int order);
  const FinslerModel* model_ = nullptr;
  std::vector<Jet> x_, y_;
  std::map<int, ConnectionBox> boxes_;
  std::map<std::pair<const void*, int>, std::vector<Jet>> memo_;
  // Roots pinned by eval(); keeps memo keys from aliasing freed nodes.
  std::map<const void*, std::shared_ptr<const IndicatrixField::Node>> pins_;
};

// One-shot value evaluation at a chart point.
std::vector<double> field_values(const IndicatrixField& f, std::span<const double> x,
                                 std::span<const double> y);

// max |g_y(y, xi)| over `samples` indicatrix points at x.
double metric_orthogonality_check(const IndicatrixField& f, std::span<const double> x,
                                  int samples, std::uint64_t seed);

}  // namespace finhol
