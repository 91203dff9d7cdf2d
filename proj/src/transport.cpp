#include "finhol/transport.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <sstream>
#include <utility>

#include "finhol/errors.hpp"
#include "finhol/geometry.hpp"
#include "finhol/jet.hpp"

namespace finhol {

namespace {

std::string fmt_point(std::span<const double> p) {
  std::ostringstream os;
  os << "(";
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (i) os << ", ";
    os << p[i];
  }
  os << ")";
  return os.str();
}

void check_opts(const TransportOptions& o) {
  if (!(o.rtol > 0.0) || !(o.atol >= 0.0) || o.max_steps <= 0)
    throw ConfigError("transport options: rtol must be positive, atol nonnegative, max_steps positive");
}

constexpr double kPi = 3.14159265358979323846;

// Dormand-Prince 5(4) tableau; kE = 5th-order weights minus the embedded
// 4th-order weights, applied to stages k1..k7 (k7 at the accepted point).
constexpr double kC[7] = {0.0, 1.0 / 5, 3.0 / 10, 4.0 / 5, 8.0 / 9, 1.0, 1.0};
constexpr double kA[5][5] = {
    {1.0 / 5, 0, 0, 0, 0},
    {3.0 / 40, 9.0 / 40, 0, 0, 0},
    {44.0 / 45, -56.0 / 15, 32.0 / 9, 0, 0},
    {19372.0 / 6561, -25360.0 / 2187, 64448.0 / 6561, -212.0 / 729, 0},
    {9017.0 / 3168, -355.0 / 33, 46732.0 / 5247, 49.0 / 176, -5103.0 / 18656},
};
constexpr double kB[6] = {35.0 / 384,     0, 500.0 / 1113,
                          125.0 / 192, -2187.0 / 6784, 11.0 / 84};
constexpr double kE[7] = {71.0 / 57600,       0, -71.0 / 16695, 71.0 / 1920,
                          -17253.0 / 339200, 22.0 / 525, -1.0 / 40};

struct IntegrateStats {
  long accepted = 0;
  long attempts = 0;
};

// Adaptive integration of dz/du = rhs(piece, u, z) across the smooth pieces
// of the curve parameter range.  Every evaluation names the piece it belongs
// to, so stage points landing exactly on a corner still see the one-sided
// velocity of the piece being integrated.  on_accept(piece, u, z) fires
// after every accepted step, on_corner(piece, u, z) at every interior piece
// boundary.
template <class Rhs, class OnAccept, class OnCorner>
void integrate_curve(const Rhs& rhs, const CurveSpec& curve, std::vector<double>& z,
                     const TransportOptions& opts, IntegrateStats& st,
                     OnAccept&& on_accept, OnCorner&& on_corner) {
  std::vector<double> bounds;
  bounds.push_back(0.0);
  for (double b : curve.breakpoints()) bounds.push_back(b);
  bounds.push_back(1.0);

  const std::size_t N = z.size();
  std::array<std::vector<double>, 7> K;
  for (auto& k : K) k.assign(N, 0.0);
  std::vector<double> ztmp(N), z5(N);

  for (int piece = 0; piece + 1 < static_cast<int>(bounds.size()); ++piece) {
    double u = bounds[piece];
    const double u1 = bounds[piece + 1];
    const double span = u1 - u;
    if (!(span > 0.0)) continue;
    const double done_eps = 1e-14 * std::max(1.0, span);
    double h = span / 8.0;
    rhs(piece, u, z, K[0]);
    while (u1 - u > done_eps) {
      if (st.attempts++ >= opts.max_steps) {
        std::ostringstream os;
        os << "transport exceeded max_steps = " << opts.max_steps
           << " (accepted " << st.accepted << ")";
        throw NumericalError(os.str());
      }
      if (!(h >= 1e-14 * std::max(1.0, span)))
        throw NumericalError("transport step size underflow; the connection may be singular along the curve");
      if (h > u1 - u) h = u1 - u;

      for (int s = 1; s <= 5; ++s) {
        for (std::size_t i = 0; i < N; ++i) {
          double acc = z[i];
          for (int j = 0; j < s; ++j) acc += h * kA[s - 1][j] * K[j][i];
          ztmp[i] = acc;
        }
        rhs(piece, u + kC[s] * h, ztmp, K[s]);
      }
      for (std::size_t i = 0; i < N; ++i) {
        double acc = z[i];
        for (int j = 0; j < 6; ++j) acc += h * kB[j] * K[j][i];
        z5[i] = acc;
      }
      rhs(piece, u + h, z5, K[6]);

      double errsum = 0.0;
      for (std::size_t i = 0; i < N; ++i) {
        double e = 0.0;
        for (int j = 0; j < 7; ++j) e += kE[j] * K[j][i];
        e *= h;
        const double sc = opts.atol + opts.rtol * std::max(std::abs(z[i]), std::abs(z5[i]));
        errsum += (e / sc) * (e / sc);
      }
      const double err = std::sqrt(errsum / static_cast<double>(N));

      if (std::isfinite(err) && err <= 1.0) {
        u += h;
        z.swap(z5);
        K[0].swap(K[6]);
        ++st.accepted;
        on_accept(piece, u, z);
        if (u1 - u <= done_eps) break;
      }
      double fac = 5.0;
      if (!std::isfinite(err))
        fac = 0.2;
      else if (err > 0.0)
        fac = std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0);
      h *= fac;
    }
    if (piece + 2 < static_cast<int>(bounds.size())) on_corner(piece, u1, z);
  }
}

// Right-hand side of the transport system.  The state is y (n entries)
// followed by m carried fiber vectors of n entries each:
//   dy^i  = -G^i_j(c, y) c'^j
//   dxi^i = -G^i_jk(c, y) c'^j xi^k
struct TransportRhs {
  const FinslerModel* model;
  const CurveSpec* curve;
  int n;
  int m;  // carried fiber vectors; 0 = footpoint transport only
  mutable std::vector<double> cx, cv;
  mutable std::vector<Jet> xj, yj;

  void operator()(int piece, double u, const std::vector<double>& z, std::vector<double>& dz) const {
    curve->eval_piece(piece, u, cx, cv);
    xj.clear();
    yj.clear();
    for (int i = 0; i < n; ++i) xj.push_back(Jet(cx[i]));
    for (int i = 0; i < n; ++i) yj.push_back(Jet(z[i]));
    const ConnectionBox box = connection_box(*model, xj, yj, 0, m > 0 ? 2 : 1);
    for (int i = 0; i < n; ++i) {
      double s = 0.0;
      for (int j = 0; j < n; ++j) s += box.Gj[i * n + j].value() * cv[j];
      dz[i] = -s;
    }
    for (int c = 0; c < m; ++c) {
      const double* xi = z.data() + n + c * n;
      for (int i = 0; i < n; ++i) {
        double s = 0.0;
        for (int j = 0; j < n; ++j) {
          double g = 0.0;
          for (int k = 0; k < n; ++k) g += box.Gjk[(i * n + j) * n + k].value() * xi[k];
          s += g * cv[j];
        }
        dz[n + c * n + i] = -s;
      }
    }
  }
};

// Shared transport driver: integrates y plus m carried vectors, enforcing
// chart containment and tracking the F-drift of the footpoint.
struct DriveResult {
  std::vector<double> z;
  double F_drift = 0.0;
  long steps = 0;
};

DriveResult drive(const FinslerModel& model, const CurveSpec& curve, std::vector<double> z,
                  int m, const TransportOptions& opts, bool project_corners) {
  const int n = model.dim();
  std::vector<double> x0 = curve.point(0.0);
  if (!model.in_chart(x0))
    throw NumericalError("curve leaves the chart validity region at its start " + fmt_point(x0));
  const double F0 = model.finsler_value(x0, std::span<const double>(z.data(), n));
  if (!(F0 > 0.0))
    throw NumericalError("transported vector has nonpositive F at the curve start");

  TransportRhs rhs{&model, &curve, n, m, {}, {}, {}, {}};
  IntegrateStats st;
  double drift = 0.0;
  std::vector<double> cx, cv;
  auto on_accept = [&](int piece, double u, const std::vector<double>& state) {
    curve.eval_piece(piece, u, cx, cv);
    if (!model.in_chart(cx)) {
      std::ostringstream os;
      os << "curve leaves the chart validity region at u = " << u << ", x = " << fmt_point(cx);
      throw NumericalError(os.str());
    }
    const double F = model.finsler_value(cx, std::span<const double>(state.data(), n));
    drift = std::max(drift, std::abs(F - F0));
  };
  auto on_corner = [&](int piece, double u, std::vector<double>& state) {
    if (!project_corners) return;
    curve.eval_piece(piece, u, cx, cv);
    const double F = model.finsler_value(cx, std::span<const double>(state.data(), n));
    if (F > 0.0)
      for (int i = 0; i < n; ++i) state[i] *= F0 / F;
  };
  integrate_curve(rhs, curve, z, opts, st, on_accept, on_corner);
  return {std::move(z), drift, st.accepted};
}

bool same_vec(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i] != b[i]) return false;
  return true;
}

std::vector<double> to_vec(std::span<const double> s) { return {s.begin(), s.end()}; }

// Fundamental matrix of the fiber translation along the curve: every column
// of M is a translated frame vector, so any xi at the start maps to M xi.
struct FrameResult {
  std::vector<double> y_end;
  Eigen::MatrixXd M;
};

FrameResult transport_frame(const FinslerModel& model, const CurveSpec& curve,
                            std::span<const double> y0, const TransportOptions& opts) {
  const int n = model.dim();
  std::vector<double> z(n + n * n, 0.0);
  std::copy(y0.begin(), y0.end(), z.begin());
  for (int c = 0; c < n; ++c) z[n + c * n + c] = 1.0;
  DriveResult dr = drive(model, curve, std::move(z), n, opts, false);
  FrameResult out;
  out.y_end.assign(dr.z.begin(), dr.z.begin() + n);
  out.M.resize(n, n);
  for (int c = 0; c < n; ++c)
    for (int i = 0; i < n; ++i) out.M(i, c) = dr.z[n + c * n + i];
  return out;
}

// Incremental novelty gate with an absolute noise floor: a candidate must
// clear both the relative tolerance and the floor to be admitted.  Floored
// rejections that would have passed the relative test alone are remembered.
struct NoiseGate {
  explicit NoiseGate(double t) : tol(t) {}
  double tol;
  double scale = 0.0;
  bool floor_blocked = false;
  std::vector<Eigen::VectorXd> q;

  bool admit(const Eigen::VectorXd& c, double floor = 0.0) {
    const double nc = c.norm();
    scale = std::max(scale, nc);
    if (!(nc > tol * scale + floor)) {
      if (nc > tol * scale) floor_blocked = true;
      return false;
    }
    Eigen::VectorXd r = c;
    for (int pass = 0; pass < 2; ++pass)
      for (const Eigen::VectorXd& qi : q) r -= qi.dot(r) * qi;
    const double rn = r.norm();
    if (!(rn > tol * nc + floor)) {
      if (rn > tol * nc) floor_blocked = true;
      return false;
    }
    q.push_back(r / rn);
    return true;
  }
};

}  // namespace

// ---------------------------------------------------------------- CurveSpec

CurveSpec CurveSpec::segment(std::vector<double> a, std::vector<double> b) {
  std::vector<std::vector<double>> pts;
  pts.push_back(std::move(a));
  pts.push_back(std::move(b));
  return polyline(std::move(pts));
}

CurveSpec CurveSpec::polyline(std::vector<std::vector<double>> points) {
  if (points.size() < 2) throw ConfigError("polyline needs at least two points");
  const std::size_t n = points.front().size();
  if (n == 0) throw ConfigError("polyline points must have dimension >= 1");
  for (const auto& p : points)
    if (p.size() != n) throw ConfigError("polyline points disagree in dimension");
  CurveSpec c;
  c.kind_ = Kind::polyline;
  c.dim_ = static_cast<int>(n);
  c.vertices_ = std::move(points);
  const int pieces = static_cast<int>(c.vertices_.size()) - 1;
  for (int i = 1; i < pieces; ++i)
    c.breaks_.push_back(static_cast<double>(i) / pieces);
  return c;
}

CurveSpec CurveSpec::parallelogram(std::vector<double> p, std::vector<double> X,
                                   std::vector<double> Y, double s, double t) {
  const std::size_t n = p.size();
  if (n == 0 || X.size() != n || Y.size() != n)
    throw ConfigError("parallelogram point and spanning vectors disagree in dimension");
  std::vector<std::vector<double>> pts(5, p);
  for (std::size_t i = 0; i < n; ++i) {
    pts[1][i] += s * X[i];
    pts[2][i] += s * X[i] + t * Y[i];
    pts[3][i] += t * Y[i];
  }
  return polyline(std::move(pts));
}

CurveSpec CurveSpec::geodesic_triangle(double radius) {
  if (!(radius > 0.0)) throw ConfigError("geodesic triangle radius must be positive");
  CurveSpec c;
  c.kind_ = Kind::triangle;
  c.dim_ = 2;
  c.radius_ = radius;
  c.breaks_ = {1.0 / 3.0, 2.0 / 3.0};
  return c;
}

CurveSpec CurveSpec::parametric(std::vector<std::string> exprs) {
  if (exprs.empty()) throw ConfigError("parametric curve needs at least one component");
  CurveSpec c;
  c.kind_ = Kind::parametric;
  c.dim_ = static_cast<int>(exprs.size());
  const std::vector<std::string> names = {"t"};
  for (const std::string& e : exprs) c.exprs_.push_back(ScalarExpr::parse(e, names));
  c.expr_texts_ = std::move(exprs);
  return c;
}

void CurveSpec::eval(double u, std::vector<double>& x, std::vector<double>& v) const {
  u = std::clamp(u, 0.0, 1.0);
  int k = 0;
  while (k < static_cast<int>(breaks_.size()) && u >= breaks_[k]) ++k;
  eval_piece(k, u, x, v);
}

void CurveSpec::eval_piece(int k, double u, std::vector<double>& x, std::vector<double>& v) const {
  const int pieces = piece_count();
  if (k < 0 || k >= pieces) throw std::invalid_argument("curve piece index out of range");
  u = std::clamp(u, 0.0, 1.0);
  if (reversed_) {
    eval_forward(pieces - 1 - k, 1.0 - u, x, v);
    for (double& vi : v) vi = -vi;
  } else {
    eval_forward(k, u, x, v);
  }
}

void CurveSpec::eval_forward(int k, double u, std::vector<double>& x, std::vector<double>& v) const {
  x.resize(dim_);
  v.resize(dim_);
  switch (kind_) {
    case Kind::polyline: {
      // Clamping the local parameter keeps the evaluation on piece k even
      // when u sits exactly on a neighbouring breakpoint.
      const int pieces = static_cast<int>(vertices_.size()) - 1;
      const double local = std::clamp(u * pieces - k, 0.0, 1.0);
      const std::vector<double>& a = vertices_[k];
      const std::vector<double>& b = vertices_[k + 1];
      for (int i = 0; i < dim_; ++i) {
        x[i] = a[i] + local * (b[i] - a[i]);
        v[i] = pieces * (b[i] - a[i]);
      }
      return;
    }
    case Kind::triangle: {
      // Octant of the round sphere in the stereographic chart: origin ->
      // (r, 0) along a chart ray, (r, 0) -> (0, r) along the equator circle,
      // (0, r) -> origin along the other chart ray.  Each piece is the chart
      // image of a great-circle arc.
      const double r = radius_;
      const double rate = 3.0 * (kPi / 2.0);
      const double ang = std::clamp(3.0 * u - k, 0.0, 1.0) * (kPi / 2.0);
      if (k == 0) {
        const double d = 1.0 + std::cos(ang);
        x = {r * std::sin(ang) / d, 0.0};
        v = {rate * r / d, 0.0};
      } else if (k == 1) {
        x = {r * std::cos(ang), r * std::sin(ang)};
        v = {-rate * r * std::sin(ang), rate * r * std::cos(ang)};
      } else {
        const double d = 1.0 + std::sin(ang);
        x = {0.0, r * std::cos(ang) / d};
        v = {0.0, -rate * r / d};
      }
      return;
    }
    case Kind::parametric: {
      const Jet tu = seed_variable(0, u, 1, 1);
      const std::span<const Jet> vars(&tu, 1);
      for (int i = 0; i < dim_; ++i) {
        const Jet xi = exprs_[i].eval(vars);
        x[i] = xi.value();
        v[i] = extract_partial(xi, {0});
      }
      return;
    }
  }
}

std::vector<double> CurveSpec::point(double u) const {
  std::vector<double> x, v;
  eval(u, x, v);
  return x;
}

CurveSpec CurveSpec::reversed() const {
  CurveSpec c = *this;
  c.reversed_ = !reversed_;
  c.breaks_.clear();
  for (auto it = breaks_.rbegin(); it != breaks_.rend(); ++it)
    c.breaks_.push_back(1.0 - *it);
  return c;
}

std::string CurveSpec::describe() const {
  std::ostringstream os;
  switch (kind_) {
    case Kind::polyline: {
      os << (vertices_.size() == 2 ? "segment " : "polyline ");
      for (std::size_t i = 0; i < vertices_.size(); ++i) {
        if (i) os << " -> ";
        os << fmt_point(vertices_[i]);
      }
      break;
    }
    case Kind::triangle:
      os << "geodesic octant triangle r = " << radius_;
      break;
    case Kind::parametric: {
      os << "parametric t -> (";
      for (std::size_t i = 0; i < expr_texts_.size(); ++i) {
        if (i) os << ", ";
        os << expr_texts_[i];
      }
      os << ")";
      break;
    }
  }
  if (reversed_) os << ", reversed";
  return os.str();
}

// ---------------------------------------------------------------- transport

TransportResult parallel_transport(const FinslerModel& model, const CurveSpec& curve,
                                   std::span<const double> y0, const TransportOptions& opts) {
  check_opts(opts);
  const int n = model.dim();
  if (curve.dim() != n) throw ConfigError("curve dimension does not match the model");
  if (static_cast<int>(y0.size()) != n)
    throw ConfigError("transported vector dimension does not match the model");

  const std::vector<double> x0 = curve.point(0.0);
  const double F0 = model.in_chart(x0) ? model.finsler_value(x0, y0) : 1.0;
  DriveResult dr = drive(model, curve, to_vec(y0), 0, opts, opts.project_corners);

  TransportResult out;
  out.y_end = std::move(dr.z);
  out.F_drift = dr.F_drift;
  out.steps = dr.steps;
  out.tolerance = 10.0 * opts.rtol * std::max(1.0, F0);
  if (out.F_drift > out.tolerance) {
    std::ostringstream os;
    os << "parallel transport F-drift " << out.F_drift << " exceeds tolerance "
       << out.tolerance << "; tighten rtol or shorten the curve";
    throw NumericalError(os.str());
  }
  return out;
}

TransportResult loop_transport(const FinslerModel& model, std::span<const double> p,
                               std::span<const double> X, std::span<const double> Y,
                               double s, double t, std::span<const double> y0,
                               const TransportOptions& opts) {
  check_opts(opts);
  const int n = model.dim();
  if (static_cast<int>(p.size()) != n || static_cast<int>(X.size()) != n ||
      static_cast<int>(Y.size()) != n)
    throw ConfigError("loop point and spanning vectors must match the model dimension");
  if (static_cast<int>(y0.size()) != n)
    throw ConfigError("transported vector dimension does not match the model");

  if (s == 0.0 || t == 0.0) {
    // Degenerate parallelogram: the loop retraces its own path, so the
    // transport is the identity with no integration at all.
    if (!model.in_chart(p))
      throw NumericalError("loop base point lies outside the chart validity region");
    const double F0 = model.finsler_value(p, y0);
    if (!(F0 > 0.0))
      throw NumericalError("transported vector has nonpositive F at the curve start");
    TransportResult out;
    out.y_end = to_vec(y0);
    out.tolerance = 10.0 * opts.rtol * std::max(1.0, F0);
    return out;
  }
  const CurveSpec curve = CurveSpec::parallelogram(to_vec(p), to_vec(X), to_vec(Y), s, t);
  return parallel_transport(model, curve, y0, opts);
}

LoopCurvatureResult curvature_from_loops(const FinslerModel& model, std::span<const double> p,
                                         std::span<const double> X, std::span<const double> Y,
                                         double h,
                                         std::span<const std::vector<double>> y_samples,
                                         const TransportOptions& opts) {
  check_opts(opts);
  const int n = model.dim();
  if (!(h > 0.0)) throw ConfigError("loop differencing step h must be positive");
  if (y_samples.empty()) throw ConfigError("loop curvature experiment needs at least one fiber sample");

  const IndicatrixField ref_field =
      curvature_field(model, VectorFieldSpec::constant(to_vec(X)), VectorFieldSpec::constant(to_vec(Y)));

  LoopCurvatureResult out;
  double ref_scale = 0.0;
  for (const std::vector<double>& y0 : y_samples) {
    if (static_cast<int>(y0.size()) != n)
      throw ConfigError("fiber sample dimension does not match the model");
    std::vector<double> diff(n, 0.0);
    for (int sa : {-1, 1})
      for (int sb : {-1, 1}) {
        const TransportResult tr = loop_transport(model, p, X, Y, sa * h, sb * h, y0, opts);
        const double w = sa * sb;
        for (int i = 0; i < n; ++i) diff[i] += w * tr.y_end[i];
      }
    for (int i = 0; i < n; ++i) diff[i] /= 4.0 * h * h;
    std::vector<double> ref = field_values(ref_field, p, y0);
    for (int i = 0; i < n; ++i) {
      out.max_abs_err = std::max(out.max_abs_err, std::abs(diff[i] - ref[i]));
      ref_scale = std::max(ref_scale, std::abs(ref[i]));
    }
    out.difference.push_back(std::move(diff));
    out.reference.push_back(std::move(ref));
  }
  out.max_rel_err = ref_scale > 0.0 ? out.max_abs_err / ref_scale : out.max_abs_err;
  out.noise_warning = opts.rtol > 1e-4 * h * h;
  out.recommended_rtol = 1e-6 * h * h;
  return out;
}

// ---------------------------------------------------------------- translate

TranslateResult berwald_translate(const FinslerModel& model, const CurveSpec& curve,
                                  std::span<const std::vector<double>> y0,
                                  std::span<const std::vector<double>> xi0,
                                  const TransportOptions& opts) {
  check_opts(opts);
  const int n = model.dim();
  if (curve.dim() != n) throw ConfigError("curve dimension does not match the model");
  if (y0.size() != xi0.size())
    throw ConfigError("translate needs one fiber vector per footpoint");

  TranslateResult out;
  double maxF0 = 1.0;
  const std::vector<double> x0 = curve.point(0.0);
  for (std::size_t s = 0; s < y0.size(); ++s) {
    if (static_cast<int>(y0[s].size()) != n || static_cast<int>(xi0[s].size()) != n)
      throw ConfigError("translate footpoint or fiber vector dimension mismatch");
    std::vector<double> z(2 * n);
    std::copy(y0[s].begin(), y0[s].end(), z.begin());
    std::copy(xi0[s].begin(), xi0[s].end(), z.begin() + n);
    if (model.in_chart(x0)) maxF0 = std::max(maxF0, model.finsler_value(x0, y0[s]));
    DriveResult dr = drive(model, curve, std::move(z), 1, opts, false);
    out.y_end.emplace_back(dr.z.begin(), dr.z.begin() + n);
    out.xi_end.emplace_back(dr.z.begin() + n, dr.z.end());
    out.steps += dr.steps;
    out.max_F_drift = std::max(out.max_F_drift, dr.F_drift);
  }
  out.tolerance = 10.0 * opts.rtol * maxF0;
  if (out.max_F_drift > out.tolerance) {
    std::ostringstream os;
    os << "translate F-drift " << out.max_F_drift << " exceeds tolerance " << out.tolerance;
    throw NumericalError(os.str());
  }
  return out;
}

TranslateResult berwald_translate(const FinslerModel& model, const CurveSpec& curve,
                                  const IndicatrixField& field,
                                  std::span<const std::vector<double>> y0,
                                  const TransportOptions& opts) {
  if (&field.model() != &model)
    throw ConfigError("indicatrix field belongs to a different model");
  const std::vector<double> x0 = curve.point(0.0);
  std::vector<std::vector<double>> xi0;
  xi0.reserve(y0.size());
  for (const std::vector<double>& y : y0) xi0.push_back(field_values(field, x0, y));
  return berwald_translate(model, curve, y0, xi0, opts);
}

// ------------------------------------------------------- holonomy algebra

FieldBasis holonomy_algebra_at(const FinslerModel& model, std::span<const double> p,
                               std::span<const HolonomySource> sources,
                               const AlgebraOptions& aopts, const TransportOptions& topts) {
  check_opts(topts);
  const int n = model.dim();
  if (static_cast<int>(p.size()) != n)
    throw ConfigError("holonomy base point dimension does not match the model");

  FieldBasis out = generate_infinitesimal_holonomy(model, p, aopts);
  out.generation_log.insert(out.generation_log.begin(),
                            "holonomy algebra lower bound at " + fmt_point(p));
  for (const IndicatrixField& f : out.fields) out.column_labels.push_back(f.describe());
  if (sources.empty()) return out;

  const std::vector<std::vector<double>>& ys = out.sample_set;
  const int S = static_cast<int>(ys.size());
  const int rows = S * n;
  const int n_expr = static_cast<int>(out.eval_matrix.cols());

  NoiseGate gate(aopts.tol);
  std::vector<Eigen::VectorXd> cols;
  for (int c = 0; c < n_expr; ++c) {
    cols.push_back(out.eval_matrix.col(c));
    gate.admit(cols.back());
  }

  // Transported values carry integrator noise of order rtol; the centered
  // fiber differences below divide that by delta and add an O(delta^2)
  // truncation allowance.  Candidates below these floors are unresolvable.
  const double delta = 1e-3;
  const double sq = std::sqrt(static_cast<double>(rows));
  const double floor_translated = 100.0 * topts.rtol * sq;
  const double floor_fd = sq * (40.0 * topts.rtol / delta + 10.0 * delta * delta);
  {
    std::ostringstream os;
    os << "noise floors: translated " << floor_translated << ", fd bracket " << floor_fd;
    out.generation_log.push_back(os.str());
  }

  struct SampledCol {
    Eigen::VectorXd col;
    std::vector<Eigen::MatrixXd> dy;  // per sample: d xi^i / d y^k at (p, ys[s])
    std::string label;
  };
  std::vector<SampledCol> sampled;
  bool cap_hit = false;

  for (const HolonomySource& src : sources) {
    if (cap_hit) break;
    if (static_cast<int>(src.point.size()) != n || src.curve.dim() != n)
      throw ConfigError("holonomy source dimension does not match the model");
    {
      const std::vector<double> a = src.curve.point(0.0);
      const std::vector<double> b = src.curve.point(1.0);
      double d0 = 0.0, d1 = 0.0;
      for (int i = 0; i < n; ++i) {
        d0 = std::max(d0, std::abs(a[i] - src.point[i]));
        d1 = std::max(d1, std::abs(b[i] - p[i]));
      }
      if (d0 > 1e-9 || d1 > 1e-9)
        throw ConfigError("holonomy source curve must run from the source point to the base point");
    }

    FieldBasis remote = generate_infinitesimal_holonomy(model, src.point, aopts);
    out.generation_log.push_back("source " + fmt_point(src.point) + ": rank " +
                                 std::to_string(remote.rank) + " from " +
                                 std::to_string(remote.fields.size()) + " generators");

    // Pull every p-sample (and its fiber stencil) back to the source, then
    // carry the translation frame forward again; one frame per footpoint
    // serves every remote generator at once.
    const CurveSpec back = src.curve.reversed();
    std::vector<std::vector<double>> yq(S);
    std::vector<Eigen::MatrixXd> M(S);
    std::vector<std::vector<double>> yq_st(2 * n * S);
    std::vector<Eigen::MatrixXd> M_st(2 * n * S);
    auto pull_push = [&](const std::vector<double>& y_at_p, std::vector<double>& y_at_q,
                         Eigen::MatrixXd& frame) {
      y_at_q = parallel_transport(model, back, y_at_p, topts).y_end;
      FrameResult fr = transport_frame(model, src.curve, y_at_q, topts);
      frame = std::move(fr.M);
    };
    for (int s = 0; s < S; ++s) {
      pull_push(ys[s], yq[s], M[s]);
      for (int k = 0; k < n; ++k)
        for (int sg = 0; sg < 2; ++sg) {
          std::vector<double> y = ys[s];
          y[k] += (sg ? delta : -delta);
          const int idx = (s * n + k) * 2 + sg;
          pull_push(y, yq_st[idx], M_st[idx]);
        }
    }
    std::vector<FieldEval> ctx, ctx_st;
    ctx.reserve(S);
    ctx_st.reserve(2 * n * S);
    for (int s = 0; s < S; ++s)
      ctx.emplace_back(model, std::span<const double>(src.point), std::span<const double>(yq[s]));
    for (int idx = 0; idx < 2 * n * S; ++idx)
      ctx_st.emplace_back(model, std::span<const double>(src.point),
                          std::span<const double>(yq_st[idx]));

    int acc = 0, cand = 0;
    for (const IndicatrixField& f : remote.fields) {
      if (static_cast<int>(cols.size()) >= aopts.max_fields) {
        cap_hit = true;
        break;
      }
      ++cand;
      Eigen::VectorXd col(rows);
      std::vector<Eigen::MatrixXd> dtab(S, Eigen::MatrixXd(n, n));
      for (int s = 0; s < S; ++s) {
        const std::vector<double> v = ctx[s].values(f);
        col.segment(s * n, n) = M[s] * Eigen::Map<const Eigen::VectorXd>(v.data(), n);
        for (int k = 0; k < n; ++k) {
          const int im = (s * n + k) * 2, ip = im + 1;
          const std::vector<double> vm = ctx_st[im].values(f);
          const std::vector<double> vp = ctx_st[ip].values(f);
          dtab[s].col(k) = (M_st[ip] * Eigen::Map<const Eigen::VectorXd>(vp.data(), n) -
                            M_st[im] * Eigen::Map<const Eigen::VectorXd>(vm.data(), n)) /
                           (2.0 * delta);
        }
      }
      if (gate.admit(col, floor_translated)) {
        std::string label = "translate" + fmt_point(src.point) + " " + f.describe();
        cols.push_back(col);
        out.column_labels.push_back(label);
        sampled.push_back({std::move(col), std::move(dtab), std::move(label)});
        ++acc;
      }
    }
    out.generation_log.push_back("translated pass: " + std::to_string(acc) + " of " +
                                 std::to_string(cand) + " accepted");
  }

  // One generation of finite-difference brackets between the translated
  // columns and everything admitted so far.  Their own brackets would divide
  // the stencil noise by delta again, so they stay terminal.
  if (!sampled.empty() && !cap_hit) {
    std::vector<FieldEval> pctx;
    pctx.reserve(S);
    for (int s = 0; s < S; ++s)
      pctx.emplace_back(model, p, std::span<const double>(ys[s]));
    std::vector<std::vector<Eigen::MatrixXd>> dex(n_expr);
    for (int e = 0; e < n_expr; ++e) {
      dex[e].assign(S, Eigen::MatrixXd(n, n));
      for (int s = 0; s < S; ++s) {
        const std::span<const Jet> js = pctx[s].eval(out.fields[e], 1);
        for (int i = 0; i < n; ++i)
          for (int k = 0; k < n; ++k) dex[e][s](i, k) = extract_partial(js[i], {n + k});
      }
    }
    auto fd_bracket = [&](const Eigen::VectorXd& va, const std::vector<Eigen::MatrixXd>& da,
                          const Eigen::VectorXd& vb, const std::vector<Eigen::MatrixXd>& db) {
      Eigen::VectorXd col(rows);
      for (int s = 0; s < S; ++s)
        col.segment(s * n, n) = db[s] * va.segment(s * n, n) - da[s] * vb.segment(s * n, n);
      return col;
    };
    int acc = 0, cand = 0;
    auto offer = [&](Eigen::VectorXd col, const std::string& la, const std::string& lb) {
      if (static_cast<int>(cols.size()) >= aopts.max_fields) {
        cap_hit = true;
        return;
      }
      ++cand;
      if (gate.admit(col, floor_fd)) {
        cols.push_back(std::move(col));
        out.column_labels.push_back("fd_bracket[" + la + ", " + lb + "]");
        ++acc;
      }
    };
    for (std::size_t a = 0; a < sampled.size() && !cap_hit; ++a) {
      for (int e = 0; e < n_expr && !cap_hit; ++e)
        offer(fd_bracket(sampled[a].col, sampled[a].dy, cols[e], dex[e]), sampled[a].label,
              out.fields[e].describe());
      for (std::size_t b = a + 1; b < sampled.size() && !cap_hit; ++b)
        offer(fd_bracket(sampled[a].col, sampled[a].dy, sampled[b].col, sampled[b].dy),
              sampled[a].label, sampled[b].label);
    }
    out.generation_log.push_back("fd bracket pass: " + std::to_string(acc) + " of " +
                                 std::to_string(cand) + " accepted");
  }

  if (cap_hit) {
    out.truncated = true;
    out.generation_log.push_back("field cap reached; exploration truncated");
  }
  if (!sampled.empty()) {
    out.closed = false;
    out.truncated = true;
    out.generation_log.push_back("fd brackets stop after one generation (noise policy)");
  }
  out.noise_limited = gate.floor_blocked;
  if (out.noise_limited)
    out.generation_log.push_back("some candidates were dropped at the transport noise floor");

  if (static_cast<int>(cols.size()) > n_expr) {
    Eigen::MatrixXd m(rows, static_cast<int>(cols.size()));
    for (int c = 0; c < m.cols(); ++c) m.col(c) = cols[c];
    out.eval_matrix = std::move(m);
    const RankResult rr = numerical_rank(out.eval_matrix, aopts.tol);
    out.rank = rr.rank;
    out.sv_spectrum = rr.singular_values;
  }
  out.generation_log.push_back("combined rank " + std::to_string(out.rank) + " over " +
                               std::to_string(cols.size()) + " columns");
  out.generation_log.push_back("sample-doubling probe covers the expression generators only");
  return out;
}

// ------------------------------------------------------ commutator stencil

CommutatorFamilyResult commutator_family_experiment(
    const FinslerModel& model, std::span<const double> p, std::span<const double> X1,
    std::span<const double> Y1, std::span<const double> X2, std::span<const double> Y2,
    double h, std::span<const std::vector<double>> y_samples, const TransportOptions& opts) {
  check_opts(opts);
  const int n = model.dim();
  if (static_cast<int>(p.size()) != n || static_cast<int>(X1.size()) != n ||
      static_cast<int>(Y1.size()) != n || static_cast<int>(X2.size()) != n ||
      static_cast<int>(Y2.size()) != n)
    throw ConfigError("commutator experiment arguments must match the model dimension");
  if (!(h > 0.0)) throw ConfigError("commutator differencing step h must be positive");
  if (y_samples.empty()) throw ConfigError("commutator experiment needs at least one fiber sample");

  CommutatorFamilyResult out;
  out.trivial_pair = same_vec(X1, X2) && same_vec(Y1, Y2);

  const IndicatrixField bracket =
      lie_bracket(curvature_field(model, VectorFieldSpec::constant(to_vec(X1)),
                                  VectorFieldSpec::constant(to_vec(Y1))),
                  curvature_field(model, VectorFieldSpec::constant(to_vec(X2)),
                                  VectorFieldSpec::constant(to_vec(Y2))));

  auto loop_map = [&](std::span<const double> X, std::span<const double> Y, double a, double b,
                      const std::vector<double>& y, bool inverse) {
    if (a == 0.0 || b == 0.0) return y;
    CurveSpec cur = CurveSpec::parallelogram(to_vec(p), to_vec(X), to_vec(Y), a, b);
    if (inverse) cur = cur.reversed();
    return parallel_transport(model, cur, y, opts).y_end;
  };

  double ref_scale = 0.0;
  for (const std::vector<double>& y0 : y_samples) {
    if (static_cast<int>(y0.size()) != n)
      throw ConfigError("fiber sample dimension does not match the model");
    // Identical families share their loop parameter, so the composite no
    // longer depends on the t-signs and the alternating sum cancels exactly.
    std::map<std::array<int, 4>, std::vector<double>> cache;
    std::vector<double> acc(n, 0.0);
    for (int s1 : {-1, 1})
      for (int s2 : {-1, 1})
        for (int t1 : {-1, 1})
          for (int t2 : {-1, 1}) {
            const std::array<int, 4> key = out.trivial_pair
                                               ? std::array<int, 4>{s1, s2, 0, 0}
                                               : std::array<int, 4>{s1, s2, t1, t2};
            auto it = cache.find(key);
            if (it == cache.end()) {
              const double ta = (out.trivial_pair ? s1 : t1) * h;
              const double tb = (out.trivial_pair ? s2 : t2) * h;
              std::vector<double> z = y0;
              z = loop_map(X2, Y2, ta, tb, z, false);
              z = loop_map(X1, Y1, s1 * h, s2 * h, z, false);
              z = loop_map(X2, Y2, ta, tb, z, true);
              z = loop_map(X1, Y1, s1 * h, s2 * h, z, true);
              it = cache.emplace(key, std::move(z)).first;
            }
            const double w = s1 * s2 * t1 * t2;
            for (int i = 0; i < n; ++i) acc[i] += w * it->second[i];
          }
    for (int i = 0; i < n; ++i) acc[i] /= 16.0 * h * h * h * h;

    std::vector<double> ref = field_values(bracket, p, y0);
    for (int i = 0; i < n; ++i) {
      ref[i] = -ref[i];
      out.max_abs_err = std::max(out.max_abs_err, std::abs(acc[i] - ref[i]));
      ref_scale = std::max(ref_scale, std::abs(ref[i]));
    }
    out.difference.push_back(std::move(acc));
    out.reference.push_back(std::move(ref));
  }
  out.max_rel_err = ref_scale > 0.0 ? out.max_abs_err / ref_scale : out.max_abs_err;
  out.noise_warning = opts.rtol > 1e-4 * h * h * h * h;
  out.recommended_rtol = 1e-6 * h * h * h * h;
  return out;
}

}  // namespace finhol
