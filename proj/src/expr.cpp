#include "finhol/expr.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <map>
#include <sstream>

#include "finhol/errors.hpp"

namespace finhol {

struct ScalarExpr::Node {
  enum class Kind { Constant, Variable, Add, Sub, Mul, Div, Neg, Sqrt, Pow };
  Kind kind;
  double value = 0.0;  // Constant payload or Pow exponent
  int slot = -1;
  std::string name;
  NodePtr a, b;
};

namespace {

using Node = ScalarExpr::Node;
using NodePtr = ScalarExpr::NodePtr;

NodePtr make_node(Node n) { return std::make_shared<const Node>(std::move(n)); }

NodePtr binary(Node::Kind k, NodePtr a, NodePtr b) {
  Node n;
  n.kind = k;
  n.a = std::move(a);
  n.b = std::move(b);
  return make_node(std::move(n));
}

std::string node_to_string(const NodePtr& n);

std::string paren(const NodePtr& n) {
  const std::string s = node_to_string(n);
  if (n->kind == Node::Kind::Constant || n->kind == Node::Kind::Variable ||
      n->kind == Node::Kind::Sqrt)
    return s;
  return "(" + s + ")";
}

std::string format_number(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

std::string node_to_string(const NodePtr& n) {
  switch (n->kind) {
    case Node::Kind::Constant:
      return format_number(n->value);
    case Node::Kind::Variable:
      return n->name;
    case Node::Kind::Add:
      return node_to_string(n->a) + " + " + node_to_string(n->b);
    case Node::Kind::Sub:
      return node_to_string(n->a) + " - " + paren(n->b);
    case Node::Kind::Mul:
      return paren(n->a) + "*" + paren(n->b);
    case Node::Kind::Div:
      return paren(n->a) + "/" + paren(n->b);
    case Node::Kind::Neg:
      return "-" + paren(n->a);
    case Node::Kind::Sqrt:
      return "sqrt(" + node_to_string(n->a) + ")";
    case Node::Kind::Pow:
      return "pow(" + node_to_string(n->a) + ", " + format_number(n->value) + ")";
  }
  return "?";
}

Jet eval_node(const NodePtr& n, std::span<const Jet> vars) {
  switch (n->kind) {
    case Node::Kind::Constant:
      return Jet::constant(vars.empty() ? scalar_shape() : vars[0].shape(), n->value);
    case Node::Kind::Variable:
      if (n->slot >= static_cast<int>(vars.size()))
        throw std::invalid_argument("expression references variable slot " +
                                    std::to_string(n->slot) + " but only " +
                                    std::to_string(vars.size()) + " values were supplied");
      return vars[n->slot];
    case Node::Kind::Add:
      return eval_node(n->a, vars) + eval_node(n->b, vars);
    case Node::Kind::Sub:
      return eval_node(n->a, vars) - eval_node(n->b, vars);
    case Node::Kind::Mul:
      return eval_node(n->a, vars) * eval_node(n->b, vars);
    case Node::Kind::Neg:
      return -eval_node(n->a, vars);
    case Node::Kind::Div:
      try {
        return eval_node(n->a, vars) / eval_node(n->b, vars);
      } catch (const NumericalError& e) {
        throw NumericalError(std::string(e.what()) + " in '" + node_to_string(n) + "'");
      }
    case Node::Kind::Sqrt:
      try {
        return sqrt(eval_node(n->a, vars));
      } catch (const NumericalError& e) {
        throw NumericalError(std::string(e.what()) + " in '" + node_to_string(n) + "'");
      }
    case Node::Kind::Pow:
      try {
        return pow(eval_node(n->a, vars), n->value);
      } catch (const NumericalError& e) {
        throw NumericalError(std::string(e.what()) + " in '" + node_to_string(n) + "'");
      }
  }
  throw std::logic_error("unreachable expression kind");
}

int max_slot(const NodePtr& n) {
  if (!n) return -1;
  int m = n->slot;
  if (n->a) m = std::max(m, max_slot(n->a));
  if (n->b) m = std::max(m, max_slot(n->b));
  return m;
}

// --- tokenizer / recursive-descent parser ---

struct Parser {
  const std::string& text;
  std::span<const std::string> names;
  std::size_t pos = 0;

  [[noreturn]] void fail(const std::string& msg) const {
    throw ConfigError("expression parse error at offset " + std::to_string(pos) + ": " + msg +
                      " in '" + text + "'");
  }

  void skip_ws() {
    while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
  }

  bool eat(char c) {
    skip_ws();
    if (pos < text.size() && text[pos] == c) {
      ++pos;
      return true;
    }
    return false;
  }

  double number() {
    skip_ws();
    const char* start = text.c_str() + pos;
    char* end = nullptr;
    double v = std::strtod(start, &end);
    if (end == start) fail("expected a number");
    pos += static_cast<std::size_t>(end - start);
    return v;
  }

  NodePtr expr() {
    NodePtr lhs = term();
    while (true) {
      skip_ws();
      if (eat('+'))
        lhs = binary(Node::Kind::Add, lhs, term());
      else if (eat('-'))
        lhs = binary(Node::Kind::Sub, lhs, term());
      else
        return lhs;
    }
  }

  NodePtr term() {
    NodePtr lhs = unary();
    while (true) {
      skip_ws();
      if (eat('*'))
        lhs = binary(Node::Kind::Mul, lhs, unary());
      else if (eat('/'))
        lhs = binary(Node::Kind::Div, lhs, unary());
      else
        return lhs;
    }
  }

  NodePtr unary() {
    skip_ws();
    if (eat('-')) {
      Node n;
      n.kind = Node::Kind::Neg;
      n.a = unary();
      return make_node(std::move(n));
    }
    return postfix();
  }

  NodePtr postfix() {
    NodePtr base = primary();
    skip_ws();
    if (eat('^')) {
      Node n;
      n.kind = Node::Kind::Pow;
      n.a = base;
      skip_ws();
      bool negative = eat('-');
      n.value = number();
      if (negative) n.value = -n.value;
      return make_node(std::move(n));
    }
    return base;
  }

  NodePtr primary() {
    skip_ws();
    if (pos >= text.size()) fail("unexpected end of expression");
    char c = text[pos];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      Node n;
      n.kind = Node::Kind::Constant;
      n.value = number();
      return make_node(std::move(n));
    }
    if (c == '(') {
      ++pos;
      NodePtr inner = expr();
      if (!eat(')')) fail("expected ')'");
      return inner;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t start = pos;
      while (pos < text.size() && (std::isalnum(static_cast<unsigned char>(text[pos])) || text[pos] == '_'))
        ++pos;
      std::string word = text.substr(start, pos - start);
      if (word == "sqrt") {
        if (!eat('(')) fail("expected '(' after sqrt");
        Node n;
        n.kind = Node::Kind::Sqrt;
        n.a = expr();
        if (!eat(')')) fail("expected ')'");
        return make_node(std::move(n));
      }
      if (word == "pow") {
        if (!eat('(')) fail("expected '(' after pow");
        Node n;
        n.kind = Node::Kind::Pow;
        n.a = expr();
        if (!eat(',')) fail("expected ',' in pow");
        skip_ws();
        bool negative = eat('-');
        n.value = number();
        if (negative) n.value = -n.value;
        if (!eat(')')) fail("expected ')'");
        return make_node(std::move(n));
      }
      for (std::size_t i = 0; i < names.size(); ++i) {
        if (names[i] == word) {
          Node n;
          n.kind = Node::Kind::Variable;
          n.slot = static_cast<int>(i);
          n.name = word;
          return make_node(std::move(n));
        }
      }
      std::string valid;
      for (const auto& nm : names) valid += (valid.empty() ? "" : ", ") + nm;
      fail("unknown name '" + word + "' (known: " + valid + ")");
    }
    fail(std::string("unexpected character '") + c + "'");
  }
};

}  // namespace

ScalarExpr::ScalarExpr() {
  Node n;
  n.kind = Node::Kind::Constant;
  n.value = 0.0;
  node_ = make_node(std::move(n));
}

ScalarExpr ScalarExpr::constant(double v) {
  Node n;
  n.kind = Node::Kind::Constant;
  n.value = v;
  return ScalarExpr(make_node(std::move(n)));
}

ScalarExpr ScalarExpr::variable(int slot, const std::string& name) {
  Node n;
  n.kind = Node::Kind::Variable;
  n.slot = slot;
  n.name = name;
  return ScalarExpr(make_node(std::move(n)));
}

ScalarExpr ScalarExpr::parse(const std::string& text, std::span<const std::string> names) {
  Parser p{text, names};
  NodePtr root = p.expr();
  p.skip_ws();
  if (p.pos != text.size()) p.fail("trailing input");
  return ScalarExpr(root);
}

ScalarExpr ScalarExpr::operator+(const ScalarExpr& o) const {
  return ScalarExpr(binary(Node::Kind::Add, node_, o.node_));
}
ScalarExpr ScalarExpr::operator-(const ScalarExpr& o) const {
  return ScalarExpr(binary(Node::Kind::Sub, node_, o.node_));
}
ScalarExpr ScalarExpr::operator*(const ScalarExpr& o) const {
  return ScalarExpr(binary(Node::Kind::Mul, node_, o.node_));
}
ScalarExpr ScalarExpr::operator/(const ScalarExpr& o) const {
  return ScalarExpr(binary(Node::Kind::Div, node_, o.node_));
}
ScalarExpr ScalarExpr::operator-() const {
  Node n;
  n.kind = Node::Kind::Neg;
  n.a = node_;
  return ScalarExpr(make_node(std::move(n)));
}

ScalarExpr sqrt(const ScalarExpr& a) {
  Node n;
  n.kind = Node::Kind::Sqrt;
  n.a = a.node();
  return ScalarExpr(make_node(std::move(n)));
}

ScalarExpr pow(const ScalarExpr& a, double p) {
  Node n;
  n.kind = Node::Kind::Pow;
  n.a = a.node();
  n.value = p;
  return ScalarExpr(make_node(std::move(n)));
}

Jet ScalarExpr::eval(std::span<const Jet> vars) const { return eval_node(node_, vars); }

double ScalarExpr::eval_value(std::span<const double> vars) const {
  std::vector<Jet> jv;
  jv.reserve(vars.size());
  for (double v : vars) jv.emplace_back(v);
  return eval(jv).value();
}

int ScalarExpr::num_slots() const { return max_slot(node_) + 1; }

std::string ScalarExpr::to_string() const { return node_to_string(node_); }

// --- Polynomial ---

void Polynomial::add_term(const std::vector<int>& e, double c) {
  if (c == 0.0) return;
  auto it = std::lower_bound(terms_.begin(), terms_.end(), e,
                             [](const auto& t, const std::vector<int>& key) { return t.first < key; });
  if (it != terms_.end() && it->first == e) {
    it->second += c;
    if (it->second == 0.0) terms_.erase(it);
  } else {
    terms_.insert(it, {e, c});
  }
}

Polynomial Polynomial::constant(int nvars, double v) {
  Polynomial p(nvars);
  p.add_term(std::vector<int>(nvars, 0), v);
  return p;
}

Polynomial Polynomial::variable(int nvars, int slot) {
  Polynomial p(nvars);
  std::vector<int> e(nvars, 0);
  e.at(slot) = 1;
  p.add_term(e, 1.0);
  return p;
}

Polynomial Polynomial::operator+(const Polynomial& o) const {
  Polynomial r = *this;
  for (const auto& [e, c] : o.terms_) r.add_term(e, c);
  return r;
}

Polynomial Polynomial::operator-(const Polynomial& o) const {
  Polynomial r = *this;
  for (const auto& [e, c] : o.terms_) r.add_term(e, -c);
  return r;
}

Polynomial Polynomial::operator*(const Polynomial& o) const {
  Polynomial r(nvars_);
  std::vector<int> e(nvars_);
  for (const auto& [ea, ca] : terms_)
    for (const auto& [eb, cb] : o.terms_) {
      for (int i = 0; i < nvars_; ++i) e[i] = ea[i] + eb[i];
      r.add_term(e, ca * cb);
    }
  return r;
}

Polynomial Polynomial::scaled(double s) const {
  Polynomial r(nvars_);
  for (const auto& [e, c] : terms_) r.add_term(e, c * s);
  return r;
}

Polynomial Polynomial::derivative(int slot) const {
  Polynomial r(nvars_);
  for (const auto& [e, c] : terms_) {
    if (e[slot] == 0) continue;
    std::vector<int> d = e;
    d[slot] -= 1;
    r.add_term(d, c * e[slot]);
  }
  return r;
}

Polynomial Polynomial::shifted(std::span<const double> shift) const {
  // substitute x_i -> x_i + shift_i by repeated single-variable expansion
  Polynomial r = *this;
  for (int i = 0; i < nvars_; ++i) {
    if (shift[i] == 0.0) continue;
    Polynomial next(nvars_);
    for (const auto& [e, c] : r.terms_) {
      // (x_i + s)^e_i expanded binomially
      double binom = 1.0;
      for (int k = 0; k <= e[i]; ++k) {
        std::vector<int> d = e;
        d[i] = e[i] - k;
        next.add_term(d, c * binom * std::pow(shift[i], k));
        binom = binom * (e[i] - k) / (k + 1);
      }
    }
    r = next;
  }
  return r;
}

double Polynomial::eval_value(std::span<const double> x) const {
  double s = 0.0;
  for (const auto& [e, c] : terms_) {
    double m = c;
    for (int i = 0; i < nvars_; ++i)
      for (int k = 0; k < e[i]; ++k) m *= x[i];
    s += m;
  }
  return s;
}

Jet Polynomial::eval(std::span<const Jet> x) const {
  if (static_cast<int>(x.size()) < nvars_)
    throw std::invalid_argument("polynomial evaluated with too few variables");
  auto shape = x.empty() ? scalar_shape() : x[0].shape();
  Jet s = Jet::constant(shape, 0.0);
  for (const auto& [e, c] : terms_) {
    Jet m = Jet::constant(shape, c);
    for (int i = 0; i < nvars_; ++i)
      for (int k = 0; k < e[i]; ++k) m = m * x[i];
    s += m;
  }
  return s;
}

ScalarExpr Polynomial::to_expr() const {
  ScalarExpr sum = ScalarExpr::constant(0.0);
  bool first = true;
  for (const auto& [e, c] : terms_) {
    ScalarExpr mono = ScalarExpr::constant(c);
    for (int i = 0; i < nvars_; ++i)
      for (int k = 0; k < e[i]; ++k)
        mono = mono * ScalarExpr::variable(i, "x" + std::to_string(i + 1));
    sum = first ? mono : sum + mono;
    first = false;
  }
  return sum;
}

std::string Polynomial::to_string(std::span<const std::string> names) const {
  if (terms_.empty()) return "0";
  std::ostringstream os;
  bool first = true;
  for (const auto& [e, c] : terms_) {
    if (!first) os << " + ";
    first = false;
    os << c;
    for (int i = 0; i < nvars_; ++i) {
      if (e[i] == 0) continue;
      os << "*" << names[i];
      if (e[i] > 1) os << "^" << e[i];
    }
  }
  return os.str();
}

namespace {

Polynomial expand_polynomial(const NodePtr& n, int nvars, const std::string& original) {
  using K = Node::Kind;
  switch (n->kind) {
    case K::Constant:
      return Polynomial::constant(nvars, n->value);
    case K::Variable:
      return Polynomial::variable(nvars, n->slot);
    case K::Add:
      return expand_polynomial(n->a, nvars, original) + expand_polynomial(n->b, nvars, original);
    case K::Sub:
      return expand_polynomial(n->a, nvars, original) - expand_polynomial(n->b, nvars, original);
    case K::Mul:
      return expand_polynomial(n->a, nvars, original) * expand_polynomial(n->b, nvars, original);
    case K::Neg:
      return expand_polynomial(n->a, nvars, original).scaled(-1.0);
    case K::Div: {
      if (n->b->kind != K::Constant || n->b->value == 0.0)
        throw ConfigError("'" + original + "' is not polynomial: division must be by a nonzero constant");
      return expand_polynomial(n->a, nvars, original).scaled(1.0 / n->b->value);
    }
    case K::Pow: {
      const double p = n->value;
      if (p != std::floor(p) || p < 0.0 || p > 16.0)
        throw ConfigError("'" + original + "' is not polynomial: exponent must be an integer in 0..16");
      Polynomial base = expand_polynomial(n->a, nvars, original);
      Polynomial r = Polynomial::constant(nvars, 1.0);
      for (int k = 0; k < static_cast<int>(p); ++k) r = r * base;
      return r;
    }
    case K::Sqrt:
      throw ConfigError("'" + original + "' is not polynomial: sqrt is not allowed here");
  }
  throw std::logic_error("unreachable polynomial kind");
}

}  // namespace

Polynomial Polynomial::parse(const std::string& text, std::span<const std::string> names) {
  ScalarExpr e = ScalarExpr::parse(text, names);
  return expand_polynomial(e.node(), static_cast<int>(names.size()), text);
}

std::vector<std::string> chart_variable_names(int dim) {
  std::vector<std::string> names;
  for (int i = 1; i <= dim; ++i) names.push_back("x" + std::to_string(i));
  for (int i = 1; i <= dim; ++i) names.push_back("y" + std::to_string(i));
  return names;
}

std::vector<std::string> x_variable_names(int dim) {
  std::vector<std::string> names;
  for (int i = 1; i <= dim; ++i) names.push_back("x" + std::to_string(i));
  return names;
}

}  // namespace finhol
