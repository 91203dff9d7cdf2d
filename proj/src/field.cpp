#include "finhol/field.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "finhol/errors.hpp"

namespace finhol {

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

// "e3" for a unit coordinate vector, otherwise empty
std::string basis_label(std::span<const double> v) {
  int unit = -1;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (v[i] == 0.0) continue;
    if (v[i] != 1.0 || unit >= 0) return {};
    unit = static_cast<int>(i);
  }
  return unit >= 0 ? "e" + std::to_string(unit + 1) : std::string{};
}

}  // namespace

VectorFieldSpec VectorFieldSpec::constant(std::vector<double> v) {
  if (v.empty()) throw std::invalid_argument("vector field needs at least one component");
  VectorFieldSpec out;
  const int n = static_cast<int>(v.size());
  out.comps_.reserve(v.size());
  for (double c : v) out.comps_.push_back(Polynomial::constant(n, c));
  out.text_ = basis_label(v);
  if (out.text_.empty()) {
    std::string t = "(";
    for (int i = 0; i < n; ++i) t += (i ? ", " : "") + fmt(v[i]);
    out.text_ = t + ")";
  }
  return out;
}

VectorFieldSpec VectorFieldSpec::basis(int dim, int axis) {
  if (dim < 1) throw std::invalid_argument("vector field needs at least one component");
  if (axis < 0 || axis >= dim)
    throw std::invalid_argument("basis axis " + std::to_string(axis) + " outside 0.." +
                                std::to_string(dim - 1));
  std::vector<double> v(dim, 0.0);
  v[axis] = 1.0;
  return constant(std::move(v));
}

VectorFieldSpec VectorFieldSpec::monomial(int dim, int axis, std::vector<int> exponent,
                                          double coeff) {
  if (dim < 1) throw std::invalid_argument("vector field needs at least one component");
  if (axis < 0 || axis >= dim)
    throw std::invalid_argument("monomial axis " + std::to_string(axis) + " outside 0.." +
                                std::to_string(dim - 1));
  if (static_cast<int>(exponent.size()) != dim)
    throw std::invalid_argument("monomial exponent length does not match the dimension");
  Polynomial p = Polynomial::constant(dim, coeff);
  std::string mono;
  for (int i = 0; i < dim; ++i) {
    if (exponent[i] < 0) throw std::invalid_argument("monomial exponents must be nonnegative");
    for (int k = 0; k < exponent[i]; ++k) p = p * Polynomial::variable(dim, i);
    if (exponent[i] > 0) {
      mono += (mono.empty() ? "" : " ") + ("x" + std::to_string(i + 1));
      if (exponent[i] > 1) mono += "^" + std::to_string(exponent[i]);
    }
  }
  VectorFieldSpec out;
  out.comps_.assign(dim, Polynomial::constant(dim, 0.0));
  out.comps_[axis] = std::move(p);
  out.text_ = coeff == 1.0 ? std::string{} : fmt(coeff) + " ";
  if (!mono.empty()) out.text_ += mono + " ";
  out.text_ += "e" + std::to_string(axis + 1);
  return out;
}

VectorFieldSpec VectorFieldSpec::from_components(std::vector<Polynomial> components) {
  if (components.empty()) throw std::invalid_argument("vector field needs at least one component");
  const int n = static_cast<int>(components.size());
  for (const Polynomial& p : components)
    if (p.nvars() != n)
      throw std::invalid_argument("vector field component over " + std::to_string(p.nvars()) +
                                  " variables in dimension " + std::to_string(n));
  VectorFieldSpec out;
  const auto names = x_variable_names(n);
  std::string t = "(";
  for (int i = 0; i < n; ++i) t += (i ? ", " : "") + components[i].to_string(names);
  out.text_ = t + ")";
  out.comps_ = std::move(components);
  return out;
}

VectorFieldSpec VectorFieldSpec::parse(std::span<const std::string> texts) {
  if (texts.empty()) throw std::invalid_argument("vector field needs at least one component");
  const int n = static_cast<int>(texts.size());
  const auto names = x_variable_names(n);
  std::vector<Polynomial> comps;
  comps.reserve(texts.size());
  for (const std::string& t : texts) comps.push_back(Polynomial::parse(t, names));
  VectorFieldSpec out;
  out.comps_ = std::move(comps);
  std::string t = "(";
  for (int i = 0; i < n; ++i) t += (i ? ", " : "") + texts[i];
  out.text_ = t + ")";
  return out;
}

std::vector<Jet> VectorFieldSpec::eval(std::span<const Jet> x) const {
  if (static_cast<int>(x.size()) != dim())
    throw std::invalid_argument("vector field evaluated at a point of wrong dimension");
  std::vector<Jet> out;
  out.reserve(comps_.size());
  for (const Polynomial& p : comps_) out.push_back(p.eval(x));
  return out;
}

std::vector<double> VectorFieldSpec::eval_value(std::span<const double> x) const {
  if (static_cast<int>(x.size()) != dim())
    throw std::invalid_argument("vector field evaluated at a point of wrong dimension");
  std::vector<double> out;
  out.reserve(comps_.size());
  for (const Polynomial& p : comps_) out.push_back(p.eval_value(x));
  return out;
}

struct IndicatrixField::Node {
  enum class Kind { curvature, bracket, nabla };
  Kind kind = Kind::curvature;
  const FinslerModel* model = nullptr;
  VectorFieldSpec X, Y;  // curvature: both arguments; nabla: the direction
  std::shared_ptr<const Node> a, b;
  int depth = 1;
  std::string label;
};

const FinslerModel& IndicatrixField::model() const {
  if (!node_) throw std::invalid_argument("empty indicatrix field");
  return *node_->model;
}

int IndicatrixField::dim() const { return model().dim(); }

int IndicatrixField::depth() const { return node_ ? node_->depth : 0; }

const std::string& IndicatrixField::describe() const {
  static const std::string kEmpty;
  return node_ ? node_->label : kEmpty;
}

namespace {

void check_depth(int depth) {
  if (depth > kMaxFieldDepth)
    throw ConfigError("field expression depth " + std::to_string(depth) +
                      " exceeds the supported cap " + std::to_string(kMaxFieldDepth));
}

}  // namespace

IndicatrixField curvature_field(const FinslerModel& model, VectorFieldSpec X, VectorFieldSpec Y) {
  if (X.dim() != model.dim() || Y.dim() != model.dim())
    throw std::invalid_argument("curvature_field: vector field dimension does not match the model");
  auto nd = std::make_shared<IndicatrixField::Node>();
  nd->kind = IndicatrixField::Node::Kind::curvature;
  nd->model = &model;
  nd->label = "r(" + X.describe() + ", " + Y.describe() + ")";
  nd->X = std::move(X);
  nd->Y = std::move(Y);
  return IndicatrixField(std::move(nd));
}

IndicatrixField lie_bracket(const IndicatrixField& a, const IndicatrixField& b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("lie_bracket: empty field");
  if (&a.model() != &b.model())
    throw std::invalid_argument("lie_bracket: fields live on different models");
  auto nd = std::make_shared<IndicatrixField::Node>();
  nd->kind = IndicatrixField::Node::Kind::bracket;
  nd->model = &a.model();
  nd->a = a.node();
  nd->b = b.node();
  nd->depth = 1 + std::max(a.depth(), b.depth());
  check_depth(nd->depth);
  nd->label = "[" + a.describe() + ", " + b.describe() + "]";
  return IndicatrixField(std::move(nd));
}

IndicatrixField covariant_derivative(const IndicatrixField& xi, VectorFieldSpec X) {
  if (xi.empty()) throw std::invalid_argument("covariant_derivative: empty field");
  if (X.dim() != xi.dim())
    throw std::invalid_argument(
        "covariant_derivative: vector field dimension does not match the model");
  auto nd = std::make_shared<IndicatrixField::Node>();
  nd->kind = IndicatrixField::Node::Kind::nabla;
  nd->model = &xi.model();
  nd->a = xi.node();
  nd->depth = 1 + xi.depth();
  check_depth(nd->depth);
  nd->label = "D_{" + X.describe() + "} " + xi.describe();
  nd->X = std::move(X);
  return IndicatrixField(std::move(nd));
}

FieldEval::FieldEval(const FinslerModel& model, std::span<const Jet> x, std::span<const Jet> y)
    : model_(&model), x_(x.begin(), x.end()), y_(y.begin(), y.end()) {
  const int n = model.dim();
  if (static_cast<int>(x_.size()) != n || static_cast<int>(y_.size()) != n)
    throw std::invalid_argument("FieldEval: wrong point dimension");
  for (const Jet& c : x_)
    if (c.shape() != x_[0].shape()) throw std::invalid_argument("FieldEval: mixed coordinate shapes");
  for (const Jet& c : y_)
    if (c.shape() != x_[0].shape()) throw std::invalid_argument("FieldEval: mixed coordinate shapes");
}

FieldEval::FieldEval(const FinslerModel& model, std::span<const double> x,
                     std::span<const double> y)
    : model_(&model) {
  const int n = model.dim();
  if (static_cast<int>(x.size()) != n || static_cast<int>(y.size()) != n)
    throw std::invalid_argument("FieldEval: wrong point dimension");
  x_.reserve(n);
  y_.reserve(n);
  for (double v : x) x_.emplace_back(v);
  for (double v : y) y_.emplace_back(v);
}

const ConnectionBox& FieldEval::connection(int order) {
  auto it = boxes_.find(order);
  if (it == boxes_.end())
    it = boxes_.emplace(order, connection_box(*model_, x_, y_, order, 3)).first;
  return it->second;
}

std::span<const Jet> FieldEval::eval(const IndicatrixField& f, int order) {
  if (f.empty()) throw std::invalid_argument("FieldEval: empty field");
  if (&f.model() != model_)
    throw std::invalid_argument("FieldEval: field belongs to a different model");
  if (order < 0) throw std::invalid_argument("FieldEval: negative order");
  pins_.emplace(f.node().get(), f.node());
  const std::vector<Jet>& v = eval_node(f.node().get(), order);
  return {v.data(), v.size()};
}

std::vector<double> FieldEval::values(const IndicatrixField& f) {
  std::span<const Jet> v = eval(f, 0);
  std::vector<double> out;
  out.reserve(v.size());
  for (const Jet& c : v) out.push_back(c.value());
  return out;
}

const std::vector<Jet>& FieldEval::eval_node(const IndicatrixField::Node* nd, int order) {
  const auto key = std::make_pair(static_cast<const void*>(nd), order);
  auto hit = memo_.find(key);
  if (hit != memo_.end()) return hit->second;

  const int n = model_->dim();
  std::vector<Jet> out(n);
  using Kind = IndicatrixField::Node::Kind;
  switch (nd->kind) {
    case Kind::curvature: {
      const ConnectionBox& box = connection(order);
      const std::vector<Jet> Xc = nd->X.eval(box.x);
      const std::vector<Jet> Yc = nd->Y.eval(box.x);
      std::vector<Jet> P(n * n, Jet::constant(box.ring, 0.0));
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) mul_accumulate(P[j * n + k], Xc[j], Yc[k]);
      for (int i = 0; i < n; ++i) {
        Jet acc = Jet::constant(box.ring, 0.0);
        for (int j = 0; j < n; ++j)
          for (int k = 0; k < n; ++k) mul_accumulate(acc, box.R[(i * n + j) * n + k], P[j * n + k]);
        out[i] = std::move(acc);
      }
      break;
    }
    case Kind::bracket: {
      const std::vector<Jet>& ca = eval_node(nd->a.get(), order + 1);
      const std::vector<Jet>& cb = eval_node(nd->b.get(), order + 1);
      std::vector<Jet> ta(n), tb(n), da(n * n), db(n * n);
      for (int k = 0; k < n; ++k) {
        ta[k] = truncate_last(ca[k], order);
        tb[k] = truncate_last(cb[k], order);
      }
      for (int i = 0; i < n; ++i)
        for (int k = 0; k < n; ++k) {
          da[i * n + k] = derive_last(ca[i], n + k);
          db[i * n + k] = derive_last(cb[i], n + k);
        }
      for (int i = 0; i < n; ++i) {
        Jet acc = ta[0] * 0.0;
        for (int k = 0; k < n; ++k) {
          mul_accumulate(acc, ta[k], db[i * n + k]);
          mul_accumulate(acc, tb[k], da[i * n + k], -1);
        }
        out[i] = std::move(acc);
      }
      break;
    }
    case Kind::nabla: {
      const std::vector<Jet>& c = eval_node(nd->a.get(), order + 1);
      const ConnectionBox& box = connection(order);
      const std::vector<Jet> Xc = nd->X.eval(box.x);
      std::vector<Jet> t(n), dx(n * n), dy(n * n);
      for (int k = 0; k < n; ++k) t[k] = truncate_last(c[k], order);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          dx[i * n + j] = derive_last(c[i], j);
          dy[i * n + j] = derive_last(c[i], n + j);
        }
      for (int i = 0; i < n; ++i) {
        Jet acc = Jet::constant(box.ring, 0.0);
        for (int j = 0; j < n; ++j) {
          Jet inner = dx[i * n + j];
          for (int k = 0; k < n; ++k) {
            mul_accumulate(inner, box.Gj[k * n + j], dy[i * n + k], -1);
            mul_accumulate(inner, box.Gjk[(i * n + j) * n + k], t[k]);
          }
          mul_accumulate(acc, inner, Xc[j]);
        }
        out[i] = std::move(acc);
      }
      break;
    }
  }
  return memo_.emplace(key, std::move(out)).first->second;
}

std::vector<double> field_values(const IndicatrixField& f, std::span<const double> x,
                                 std::span<const double> y) {
  FieldEval ctx(f.model(), x, y);
  return ctx.values(f);
}

double metric_orthogonality_check(const IndicatrixField& f, std::span<const double> x,
                                  int samples, std::uint64_t seed) {
  const FinslerModel& model = f.model();
  const int n = model.dim();
  const auto ys = indicatrix_sample(model, x, samples, seed);
  double worst = 0.0;
  for (const auto& y : ys) {
    const MetricEval me = fundamental_tensor(model, x, y);
    const std::vector<double> xi = field_values(f, x, y);
    double s = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) s += me.g[i * n + j] * y[i] * xi[j];
    worst = std::max(worst, std::abs(s));
  }
  return worst;
}

}  // namespace finhol
