#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "finhol/jet.hpp"

namespace finhol {

// Closed-form scalar expressions over named variables, evaluated over any
// jet ring.  This is the representation for user-specified Finsler functions
// and parametric curve components; builtin model families assemble their F
// through the same combinators.
//
// Grammar accepted by parse():
//   expr    := term (('+'|'-') term)*
//   term    := unary (('*'|'/') unary)*
//   unary   := '-' unary | postfix
//   postfix := primary ('^' number)?
//   primary := number | name | '(' expr ')' | sqrt(expr) | pow(expr, number)
// Exponents must be numeric literals.  Variable names are supplied by the
// caller (the model layer uses x1..xn, y1..yn; curves use t).

class ScalarExpr {
public:
  ScalarExpr();  // constant 0

  static ScalarExpr constant(double v);
  static ScalarExpr variable(int slot, const std::string& name);
  static ScalarExpr parse(const std::string& text, std::span<const std::string> names);

  ScalarExpr operator+(const ScalarExpr& o) const;
  ScalarExpr operator-(const ScalarExpr& o) const;
  ScalarExpr operator*(const ScalarExpr& o) const;
  ScalarExpr operator/(const ScalarExpr& o) const;
  ScalarExpr operator-() const;
  friend ScalarExpr sqrt(const ScalarExpr& a);
  friend ScalarExpr pow(const ScalarExpr& a, double p);

  // `vars` holds one jet per variable slot, all of the same shape.
  Jet eval(std::span<const Jet> vars) const;
  double eval_value(std::span<const double> vars) const;

  int num_slots() const;  // 1 + highest referenced slot
  std::string to_string() const;

  struct Node;
  using NodePtr = std::shared_ptr<const Node>;
  explicit ScalarExpr(NodePtr n) : node_(std::move(n)) {}
  const NodePtr& node() const { return node_; }

private:
  NodePtr node_;
};

inline ScalarExpr operator+(const ScalarExpr& a, double b) { return a + ScalarExpr::constant(b); }
inline ScalarExpr operator+(double a, const ScalarExpr& b) { return ScalarExpr::constant(a) + b; }
inline ScalarExpr operator-(const ScalarExpr& a, double b) { return a - ScalarExpr::constant(b); }
inline ScalarExpr operator-(double a, const ScalarExpr& b) { return ScalarExpr::constant(a) - b; }
inline ScalarExpr operator*(const ScalarExpr& a, double b) { return a * ScalarExpr::constant(b); }
inline ScalarExpr operator*(double a, const ScalarExpr& b) { return ScalarExpr::constant(a) * b; }
inline ScalarExpr operator/(const ScalarExpr& a, double b) { return a / ScalarExpr::constant(b); }
inline ScalarExpr operator/(double a, const ScalarExpr& b) { return ScalarExpr::constant(a) / b; }

// Exact multivariate polynomials (monomial lists).  Used for model family
// parameters whose x-derivatives the classical oracles need in closed form,
// and for polynomial vector fields.  parse() accepts the ScalarExpr grammar
// restricted to +, -, *, integer pow >= 0, and division by constants.
class Polynomial {
public:
  Polynomial() : nvars_(0) {}
  explicit Polynomial(int nvars) : nvars_(nvars) {}

  static Polynomial constant(int nvars, double v);
  static Polynomial variable(int nvars, int slot);
  static Polynomial parse(const std::string& text, std::span<const std::string> names);

  Polynomial operator+(const Polynomial& o) const;
  Polynomial operator-(const Polynomial& o) const;
  Polynomial operator*(const Polynomial& o) const;
  Polynomial scaled(double s) const;
  Polynomial derivative(int slot) const;
  // substitute slot i -> x_i + shift_i (recentering at a base point)
  Polynomial shifted(std::span<const double> shift) const;

  double eval_value(std::span<const double> x) const;
  Jet eval(std::span<const Jet> x) const;
  ScalarExpr to_expr() const;

  int nvars() const { return nvars_; }
  bool is_zero() const { return terms_.empty(); }
  const std::vector<std::pair<std::vector<int>, double>>& terms() const { return terms_; }
  std::string to_string(std::span<const std::string> names) const;

private:
  void add_term(const std::vector<int>& e, double c);
  int nvars_;
  std::vector<std::pair<std::vector<int>, double>> terms_;  // sorted by exponent
};

// Standard variable name lists.
std::vector<std::string> chart_variable_names(int dim);  // x1..xn then y1..yn
std::vector<std::string> x_variable_names(int dim);      // x1..xn

}  // namespace finhol
