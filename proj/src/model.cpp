#include "finhol/model.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "finhol/errors.hpp"
#include "finhol/rng.hpp"

namespace finhol {

namespace {

std::string point_str(std::span<const double> v) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) os << ", ";
    os << v[i];
  }
  os << ')';
  return os.str();
}

double euclid_norm(std::span<const double> v) {
  double s = 0.0;
  for (double c : v) s += c * c;
  return std::sqrt(s);
}

// Nonzero vector of standard normals.
std::vector<double> normal_vector(Rng& rng, int n) {
  std::vector<double> u(n);
  for (;;) {
    for (double& c : u) c = rng.normal();
    if (euclid_norm(u) > 1e-6) return u;
  }
}

// Uniform draw from the ball of the given radius.
std::vector<double> ball_point(Rng& rng, int n, double radius) {
  std::vector<double> x = normal_vector(rng, n);
  const double scale =
      radius * std::pow(rng.uniform(), 1.0 / n) / euclid_norm(x);
  for (double& c : x) c *= scale;
  return x;
}

constexpr int kConstructionSamples = 64;  // per-family sampled admissibility sweep

}  // namespace

bool FinslerModel::in_chart(std::span<const double> x) const {
  if (static_cast<int>(x.size()) != dim_)
    throw std::invalid_argument("in_chart: wrong point dimension");
  return euclid_norm(x) <= chart_bound_;
}

Jet FinslerModel::finsler(std::span<const Jet> xy) const {
  if (static_cast<int>(xy.size()) != 2 * dim_)
    throw std::invalid_argument("finsler: expected 2n jet arguments");
  return f_.eval(xy);
}

Jet FinslerModel::finsler_squared(std::span<const Jet> xy) const {
  if (static_cast<int>(xy.size()) != 2 * dim_)
    throw std::invalid_argument("finsler_squared: expected 2n jet arguments");
  if (f2_direct_) return f2_.eval(xy);
  const Jet f = f_.eval(xy);
  return f * f;
}

double FinslerModel::finsler_value(std::span<const double> x, std::span<const double> y) const {
  if (static_cast<int>(x.size()) != dim_ || static_cast<int>(y.size()) != dim_)
    throw std::invalid_argument("finsler_value: wrong point dimension");
  std::vector<double> xy(x.begin(), x.end());
  xy.insert(xy.end(), y.begin(), y.end());
  return f_.eval_value(xy);
}

FinslerModel builtin_model(const ModelConfig& cfg) {
  if (cfg.dim < 2 || cfg.dim > 4)
    throw ConfigError("model dimension must be between 2 and 4, got " + std::to_string(cfg.dim));
  const int n = cfg.dim;

  FinslerModel m;
  m.dim_ = n;
  m.family_name_ = cfg.family;
  m.name_ = cfg.name.empty() ? cfg.family : cfg.name;
  m.chart_bound_ = cfg.chart_bound > 0.0 ? cfg.chart_bound : 3.0;

  const auto names = chart_variable_names(n);
  const auto xnames = x_variable_names(n);
  auto yvar = [&](int i) { return ScalarExpr::variable(n + i, names[n + i]); };
  auto xvar = [&](int i) { return ScalarExpr::variable(i, names[i]); };
  ScalarExpr y2 = yvar(0) * yvar(0);
  for (int i = 1; i < n; ++i) y2 = y2 + yvar(i) * yvar(i);

  auto parse_diag = [&](const std::vector<std::string>& texts, const char* what) {
    if (static_cast<int>(texts.size()) != n) {
      std::ostringstream os;
      os << cfg.family << " needs exactly " << n << " " << what << " entries, got " << texts.size();
      throw ConfigError(os.str());
    }
    std::vector<Polynomial> ps;
    ps.reserve(n);
    for (const auto& t : texts) ps.push_back(Polynomial::parse(t, xnames));
    return ps;
  };
  auto identity_diag = [&] {
    std::vector<Polynomial> ps;
    for (int i = 0; i < n; ++i) ps.push_back(Polynomial::constant(n, 1.0));
    return ps;
  };
  // Sampled admissibility of the diagonal quadratic part, and of the randers
  // drift when present: a_i(x) > 0 and sum b_i(x)^2 / a_i(x) < 1 on the chart.
  auto check_quadratic_part = [&] {
    Rng rng(0x11);
    for (int s = 0; s < kConstructionSamples; ++s) {
      const std::vector<double> x = ball_point(rng, n, m.chart_bound_);
      double b2 = 0.0;
      for (int i = 0; i < n; ++i) {
        const double a = m.metric_diag_[i].eval_value(x);
        if (!(a > 0.0)) {
          std::ostringstream os;
          os << "metric entry " << (i + 1) << " = " << a << " is not positive at x = "
             << point_str(x);
          throw DegenerateModelError(os.str());
        }
        if (!m.beta_.empty()) {
          const double b = m.beta_[i].eval_value(x);
          b2 += b * b / a;
        }
      }
      if (!m.beta_.empty() && b2 >= 1.0 - 1e-9) {
        std::ostringstream os;
        os << "randers drift has |b|_a = " << std::sqrt(b2) << " >= 1 at x = " << point_str(x)
           << "; metric not positive definite";
        throw DegenerateModelError(os.str());
      }
    }
  };
  auto quadratic_f2 = [&] {
    ScalarExpr a2 = m.metric_diag_[0].to_expr() * yvar(0) * yvar(0);
    for (int i = 1; i < n; ++i) a2 = a2 + m.metric_diag_[i].to_expr() * yvar(i) * yvar(i);
    return a2;
  };

  if (cfg.family == "euclidean") {
    m.family_ = FinslerModel::Family::euclidean;
    m.metric_diag_ = identity_diag();
    m.f2_ = y2;
    m.f_ = sqrt(y2);
    m.f2_direct_ = true;
  } else if (cfg.family == "riemannian_diag") {
    m.family_ = FinslerModel::Family::riemannian_diag;
    m.metric_diag_ = parse_diag(cfg.metric, "metric");
    check_quadratic_part();
    m.f2_ = quadratic_f2();
    m.f_ = sqrt(m.f2_);
    m.f2_direct_ = true;
  } else if (cfg.family == "sphere") {
    if (!(cfg.radius > 0.0))
      throw ConfigError("sphere radius must be positive");
    m.family_ = FinslerModel::Family::sphere;
    m.radius_ = cfg.radius;
    const double r2 = cfg.radius * cfg.radius;
    ScalarExpr x2 = xvar(0) * xvar(0);
    for (int i = 1; i < n; ++i) x2 = x2 + xvar(i) * xvar(i);
    // round metric of radius r in stereographic coordinates:
    // g_ij = (2r^2 / (r^2 + |x|^2))^2 delta_ij
    ScalarExpr conf = (2.0 * r2) / (r2 + x2);
    m.f2_ = conf * conf * y2;
    m.f_ = conf * sqrt(y2);
    m.f2_direct_ = true;
  } else if (cfg.family == "randers") {
    m.family_ = FinslerModel::Family::randers;
    m.metric_diag_ = cfg.metric.empty() ? identity_diag() : parse_diag(cfg.metric, "metric");
    m.beta_ = parse_diag(cfg.beta, "beta");
    check_quadratic_part();
    ScalarExpr alpha = sqrt(quadratic_f2());
    ScalarExpr drift = m.beta_[0].to_expr() * yvar(0);
    for (int i = 1; i < n; ++i) drift = drift + m.beta_[i].to_expr() * yvar(i);
    m.f_ = alpha + drift;
    m.f2_direct_ = false;
  } else if (cfg.family == "custom_polynomial") {
    if (cfg.expression.empty())
      throw ConfigError("custom_polynomial needs an expression");
    m.family_ = FinslerModel::Family::custom;
    m.f_ = ScalarExpr::parse(cfg.expression, names);
    m.f2_direct_ = false;
    // sampled admissibility: F must evaluate, be positive, and scale linearly
    // with y on random chart points
    Rng rng(0x21);
    for (int s = 0; s < kConstructionSamples / 2; ++s) {
      const std::vector<double> x = ball_point(rng, n, m.chart_bound_);
      std::vector<double> y = normal_vector(rng, n);
      const double lambda = rng.uniform(0.3, 3.0);
      double f1 = 0.0, f2 = 0.0;
      try {
        f1 = m.finsler_value(x, y);
        for (double& c : y) c *= lambda;
        f2 = m.finsler_value(x, y);
      } catch (const NumericalError& e) {
        std::ostringstream os;
        os << "custom expression failed to evaluate at x = " << point_str(x) << ", y = "
           << point_str(y) << ": " << e.what();
        throw ConfigError(os.str());
      }
      if (!(f1 > 0.0) || !(f2 > 0.0)) {
        std::ostringstream os;
        os << "custom expression is not positive: F = " << std::min(f1, f2) << " at x = "
           << point_str(x) << ", y = " << point_str(y);
        throw DegenerateModelError(os.str());
      }
      if (std::abs(f2 - lambda * f1) > 1e-8 * (1.0 + std::abs(lambda * f1))) {
        std::ostringstream os;
        os << "custom expression is not 1-homogeneous in y: F(x, " << lambda
           << "*y) = " << f2 << " but " << lambda << "*F(x, y) = " << lambda * f1
           << " at x = " << point_str(x) << ", y = " << point_str(y);
        throw ConfigError(os.str());
      }
    }
  } else {
    throw ConfigError("unknown model family '" + cfg.family +
                      "' (expected euclidean, riemannian_diag, sphere, randers, custom_polynomial)");
  }
  return m;
}

MetricEval fundamental_tensor(const FinslerModel& model, std::span<const double> x,
                              std::span<const double> y) {
  const int n = model.dim();
  if (static_cast<int>(x.size()) != n || static_cast<int>(y.size()) != n)
    throw std::invalid_argument("fundamental_tensor: wrong point dimension");
  if (!(euclid_norm(y) > 0.0))
    throw std::invalid_argument("fundamental_tensor: y must be nonzero");

  const JetShapePtr shape = jet_shape(n, 2);
  std::vector<Jet> xy;
  xy.reserve(2 * n);
  for (int i = 0; i < n; ++i) xy.push_back(Jet::constant(shape, x[i]));
  for (int i = 0; i < n; ++i) xy.push_back(Jet::seed(shape, i, y[i]));
  const Jet f2 = model.finsler_squared(xy);

  MetricEval out;
  out.x.assign(x.begin(), x.end());
  out.y.assign(y.begin(), y.end());
  out.g.resize(n * n);
  std::vector<int> e(n);
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) {
      std::fill(e.begin(), e.end(), 0);
      e[i] += 1;
      e[j] += 1;
      out.g[i * n + j] = out.g[j * n + i] = 0.5 * f2.partial_value(e);
    }

  Eigen::Map<const Eigen::MatrixXd> G(out.g.data(), n, n);
  Eigen::LDLT<Eigen::MatrixXd> ldlt(G);
  const double dmax = ldlt.vectorD().maxCoeff();
  const double dmin = ldlt.vectorD().minCoeff();
  if (ldlt.info() != Eigen::Success || !(dmin > 1e-12 * std::max(1.0, dmax))) {
    const double lmin =
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(G).eigenvalues().minCoeff();
    std::ostringstream os;
    os << "degenerate metric at x = " << point_str(x) << ", y = " << point_str(y)
       << " (smallest eigenvalue " << lmin << ")";
    throw DegenerateModelError(os.str());
  }
  const Eigen::MatrixXd inv = ldlt.solve(Eigen::MatrixXd::Identity(n, n));
  out.g_inv.assign(inv.data(), inv.data() + n * n);
  out.det = ldlt.vectorD().prod();
  return out;
}

std::vector<std::vector<double>> indicatrix_sample(const FinslerModel& model,
                                                   std::span<const double> x, int count,
                                                   std::uint64_t seed) {
  if (count < 1) throw std::invalid_argument("indicatrix_sample: count must be >= 1");
  const int n = model.dim();
  if (static_cast<int>(x.size()) != n)
    throw std::invalid_argument("indicatrix_sample: wrong point dimension");

  Rng rng(seed);
  std::vector<std::vector<double>> out;
  out.reserve(count);
  for (int k = 0; k < count; ++k) {
    std::vector<double> u = normal_vector(rng, n);
    const double norm = euclid_norm(u);
    for (double& c : u) c /= norm;
    const double f = model.finsler_value(x, u);
    if (!(f > 0.0)) {
      std::ostringstream os;
      os << "F(x, u) = " << f << " not positive at x = " << point_str(x) << ", u = "
         << point_str(u);
      throw DegenerateModelError(os.str());
    }
    for (double& c : u) c /= f;
    out.push_back(std::move(u));
  }
  return out;
}

ModelValidation validate_model(const FinslerModel& model, int samples, std::uint64_t seed) {
  if (samples < 1) throw std::invalid_argument("validate_model: samples must be >= 1");
  const int n = model.dim();
  const JetShapePtr shape1 = jet_shape(n, 1);

  ModelValidation v;
  v.samples = samples;
  v.min_finsler = std::numeric_limits<double>::infinity();
  v.min_metric_eigenvalue = std::numeric_limits<double>::infinity();

  Rng rng(seed);
  std::vector<int> e(n);
  for (int s = 0; s < samples; ++s) {
    const std::vector<double> x = ball_point(rng, n, 0.9 * model.chart_bound());
    std::vector<double> y = normal_vector(rng, n);
    const double norm = euclid_norm(y);
    for (double& c : y) c /= norm;
    const double f = model.finsler_value(x, y);
    v.min_finsler = std::min(v.min_finsler, f);

    const double lambda = rng.uniform(0.3, 3.0);
    std::vector<double> ly(y);
    for (double& c : ly) c *= lambda;
    const double fl = model.finsler_value(x, ly);
    v.max_homogeneity_error =
        std::max(v.max_homogeneity_error, std::abs(fl - lambda * f) / (1.0 + lambda * f));

    // Euler relation y^i dF/dy^i = F via first-order jets
    std::vector<Jet> xy;
    xy.reserve(2 * n);
    for (int i = 0; i < n; ++i) xy.push_back(Jet::constant(shape1, x[i]));
    for (int i = 0; i < n; ++i) xy.push_back(Jet::seed(shape1, i, y[i]));
    const Jet fj = model.finsler(xy);
    double euler = 0.0;
    for (int i = 0; i < n; ++i) {
      std::fill(e.begin(), e.end(), 0);
      e[i] = 1;
      euler += y[i] * fj.partial_value(e);
    }
    v.max_euler_error = std::max(v.max_euler_error, std::abs(euler - f) / std::abs(f));

    const MetricEval me = fundamental_tensor(model, x, y);
    Eigen::Map<const Eigen::MatrixXd> G(me.g.data(), n, n);
    v.min_metric_eigenvalue =
        std::min(v.min_metric_eigenvalue,
                 Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(G).eigenvalues().minCoeff());

    double gyy = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) gyy += me.g[i * n + j] * y[i] * y[j];
    v.max_metric_identity_error =
        std::max(v.max_metric_identity_error, std::abs(gyy - f * f) / (f * f));

    const MetricEval ml = fundamental_tensor(model, x, ly);
    double gdiff = 0.0, gmax = 0.0;
    for (int k = 0; k < n * n; ++k) {
      gdiff = std::max(gdiff, std::abs(ml.g[k] - me.g[k]));
      gmax = std::max(gmax, std::abs(me.g[k]));
    }
    v.max_g_homogeneity_error = std::max(v.max_g_homogeneity_error, gdiff / (1.0 + gmax));
  }
  return v;
}

}  // namespace finhol
