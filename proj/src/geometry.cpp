#include "finhol/geometry.hpp"

#include <cmath>
#include <stdexcept>

#include "finhol/errors.hpp"

namespace finhol {

namespace {

// Solve A u = b by Gaussian elimination with partial pivoting on the value
// parts; entries are jets of one common ring.
std::vector<Jet> jet_solve(std::vector<Jet> A, std::vector<Jet> b, int n) {
  for (int col = 0; col < n; ++col) {
    int piv = col;
    for (int r = col + 1; r < n; ++r)
      if (std::abs(A[r * n + col].value()) > std::abs(A[piv * n + col].value())) piv = r;
    if (piv != col) {
      for (int j = col; j < n; ++j) std::swap(A[col * n + j], A[piv * n + j]);
      std::swap(b[col], b[piv]);
    }
    for (int r = col + 1; r < n; ++r) {
      const Jet f = A[r * n + col] / A[col * n + col];
      for (int j = col + 1; j < n; ++j) mul_accumulate(A[r * n + j], f, A[col * n + j], -1);
      mul_accumulate(b[r], f, b[col], -1);
    }
  }
  std::vector<Jet> u(b);
  for (int i = n - 1; i >= 0; --i) {
    for (int j = i + 1; j < n; ++j) mul_accumulate(u[i], A[i * n + j], u[j], -1);
    u[i] = u[i] / A[i * n + i];
  }
  return u;
}

// G^i from the metric data: rhs_l = sum_jk (2 dg[k](j,l) - dg[l](j,k))
// y^j y^k via the contraction C1[k][l] = sum_j dg[k](j,l) y^j, then the
// linear solve g u = rhs and G = u/4.  All entries share one ring.
std::vector<Jet> spray_from_metric(std::vector<Jet> g, const std::vector<Jet>& dg,
                                   std::span<const Jet> ycoef, int n) {
  const Jet zero = ycoef[0] * 0.0;
  std::vector<Jet> C1(n * n, zero);
  for (int k = 0; k < n; ++k)
    for (int l = 0; l < n; ++l)
      for (int j = 0; j < n; ++j) mul_accumulate(C1[k * n + l], dg[(k * n + j) * n + l], ycoef[j]);
  std::vector<Jet> rhs(n, zero);
  for (int l = 0; l < n; ++l) {
    Jet acc = zero;
    for (int k = 0; k < n; ++k)
      mul_accumulate(acc, C1[k * n + l] * 2.0 - C1[l * n + k], ycoef[k]);
    rhs[l] = std::move(acc);
  }
  std::vector<Jet> u = jet_solve(std::move(g), std::move(rhs), n);
  for (Jet& c : u) c *= 0.25;
  return u;
}

// Spray coefficients from a jet E of F^2 living in C x (2n, 3), where C is
// the coefficient ring of the y-arguments `ycoef`.  Extracting last-block
// partials of E yields g and dg/dx as C-jets; the linear solve and the
// quadratic y-contraction then happen entirely in C.
std::vector<Jet> assemble_spray(const Jet& E, std::span<const Jet> ycoef, int n) {
  std::vector<int> e(2 * n);
  auto partial = [&](int a, int b, int c) {
    std::fill(e.begin(), e.end(), 0);
    e[a] += 1;
    e[b] += 1;
    if (c >= 0) e[c] += 1;
    return E.partial(e);
  };

  // g_jl = 1/2 d2E/dy_j dy_l, dg[k](j,l) = 1/2 d3E/dx_k dy_j dy_l
  std::vector<Jet> g(n * n);
  std::vector<Jet> dg(n * n * n);
  for (int j = 0; j < n; ++j)
    for (int l = j; l < n; ++l) {
      Jet h = partial(n + j, n + l, -1) * 0.5;
      g[j * n + l] = h;
      if (l != j) g[l * n + j] = std::move(h);
      for (int k = 0; k < n; ++k) {
        Jet d = partial(n + j, n + l, k) * 0.5;
        dg[(k * n + j) * n + l] = d;
        if (l != j) dg[(k * n + l) * n + j] = std::move(d);
      }
    }
  return spray_from_metric(std::move(g), dg, ycoef, n);
}

void check_chart_args(const FinslerModel& model, std::span<const Jet> x, std::span<const Jet> y,
                      const char* who) {
  const int n = model.dim();
  if (static_cast<int>(x.size()) != n || static_cast<int>(y.size()) != n)
    throw std::invalid_argument(std::string(who) + ": wrong point dimension");
  for (const Jet& c : x)
    if (c.shape() != x[0].shape())
      throw std::invalid_argument(std::string(who) + ": mixed coordinate shapes");
  for (const Jet& c : y)
    if (c.shape() != x[0].shape())
      throw std::invalid_argument(std::string(who) + ": mixed coordinate shapes");
}

}  // namespace

BerwaldJets berwald_connection(const FinslerModel& model, std::span<const Jet> x,
                               std::span<const Jet> y, int y_order) {
  if (y_order < 0 || y_order > 2)
    throw std::invalid_argument("berwald_connection: y_order must be 0, 1 or 2");
  check_chart_args(model, x, y, "berwald_connection");
  const int n = model.dim();

  // positive-definiteness gate at the value point; degeneracy surfaces here
  // with the metric diagnostics
  {
    std::vector<double> xv(n), yv(n);
    for (int i = 0; i < n; ++i) {
      xv[i] = x[i].value();
      yv[i] = y[i].value();
    }
    fundamental_tensor(model, xv, yv);
  }

  const JetShapePtr base = x[0].shape();
  const JetShapePtr mid = y_order > 0 ? extend_shape(base, n, y_order) : base;
  const JetShapePtr top = extend_shape(mid, 2 * n, 3);

  std::vector<Jet> ym;
  ym.reserve(n);
  std::vector<Jet> xyt;
  xyt.reserve(2 * n);
  for (int i = 0; i < n; ++i)
    xyt.push_back(Jet::seed(top, i, y_order > 0 ? Jet::lift(mid, x[i]) : x[i]));
  for (int i = 0; i < n; ++i) {
    ym.push_back(y_order > 0 ? Jet::seed(mid, i, y[i]) : y[i]);
    xyt.push_back(Jet::seed(top, n + i, ym[i]));
  }
  const Jet E = model.finsler_squared(xyt);
  std::vector<Jet> gm = assemble_spray(E, ym, n);

  BerwaldJets out;
  out.G.reserve(n);
  if (y_order == 0) {
    out.G = std::move(gm);
    return out;
  }
  std::vector<int> e(n);
  auto peel = [&](const Jet& j, int a, int b) {
    std::fill(e.begin(), e.end(), 0);
    if (a >= 0) e[a] += 1;
    if (b >= 0) e[b] += 1;
    return j.partial(e);
  };
  for (int i = 0; i < n; ++i) out.G.push_back(peel(gm[i], -1, -1));
  out.Gj.reserve(n * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) out.Gj.push_back(peel(gm[i], j, -1));
  if (y_order == 2) {
    out.Gjk.reserve(n * n * n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) out.Gjk.push_back(peel(gm[i], j, k));
  }
  return out;
}

CurvatureJets curvature_connection(const FinslerModel& model, std::span<const Jet> x,
                                   std::span<const Jet> y) {
  check_chart_args(model, x, y, "curvature_connection");
  const int n = model.dim();
  const JetShapePtr base = x[0].shape();
  const JetShapePtr xd = extend_shape(base, n, 1);

  std::vector<Jet> xx, yx;
  xx.reserve(n);
  yx.reserve(n);
  for (int i = 0; i < n; ++i) xx.push_back(Jet::seed(xd, i, x[i]));
  for (int i = 0; i < n; ++i) yx.push_back(Jet::lift(xd, y[i]));
  const BerwaldJets bw = berwald_connection(model, xx, yx, 2);

  std::vector<int> e(n);
  auto peel = [&](const Jet& j, int k) {
    std::fill(e.begin(), e.end(), 0);
    if (k >= 0) e[k] = 1;
    return j.partial(e);
  };

  CurvatureJets out;
  out.G.reserve(n);
  out.Gj.reserve(n * n);
  out.Gjk.reserve(n * n * n);
  for (const Jet& j : bw.G) out.G.push_back(peel(j, -1));
  for (const Jet& j : bw.Gj) out.Gj.push_back(peel(j, -1));
  for (const Jet& j : bw.Gjk) out.Gjk.push_back(peel(j, -1));

  // dGj[i][j][k] = dG^i_j/dx^k from the x-dual layer
  std::vector<Jet> dGj(n * n * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) dGj[(i * n + j) * n + k] = peel(bw.Gj[i * n + j], k);

  out.R.reserve(n * n * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        Jet r = dGj[(i * n + j) * n + k] - dGj[(i * n + k) * n + j];
        for (int m = 0; m < n; ++m) {
          mul_accumulate(r, out.Gj[m * n + j], out.Gjk[(i * n + k) * n + m]);
          mul_accumulate(r, out.Gj[m * n + k], out.Gjk[(i * n + j) * n + m], -1);
        }
        out.R.push_back(std::move(r));
      }
  return out;
}

ConnectionBox connection_box(const FinslerModel& model, std::span<const Jet> x,
                             std::span<const Jet> y, int order, int level) {
  if (order < 0) throw std::invalid_argument("connection_box: negative order");
  if (level < 0 || level > 3) throw std::invalid_argument("connection_box: level must be 0..3");
  check_chart_args(model, x, y, "connection_box");
  const int n = model.dim();

  {
    std::vector<double> xv(n), yv(n);
    for (int i = 0; i < n; ++i) {
      xv[i] = x[i].value();
      yv[i] = y[i].value();
    }
    fundamental_tensor(model, xv, yv);
  }

  // E(x+dx, y+dy) to joint order q; each derivative taken below lowers the
  // order by one, so the spray survives at order + min(level, 2).
  const JetShapePtr base = x[0].shape();
  const int q = order + 3 + std::min(level, 2);
  const JetShapePtr big = extend_shape(base, 2 * n, q);
  std::vector<Jet> xy;
  xy.reserve(2 * n);
  for (int i = 0; i < n; ++i) xy.push_back(Jet::seed(big, i, x[i]));
  for (int i = 0; i < n; ++i) xy.push_back(Jet::seed(big, n + i, y[i]));
  const Jet E = model.finsler_squared(xy);

  const int qs = q - 3;
  std::vector<Jet> g(n * n), dg(n * n * n);
  for (int j = 0; j < n; ++j)
    for (int l = j; l < n; ++l) {
      Jet h = derive_last(derive_last(E, n + j), n + l) * 0.5;  // order q-2
      for (int k = 0; k < n; ++k) {
        Jet d = derive_last(h, k);  // order q-3
        dg[(k * n + j) * n + l] = d;
        if (l != j) dg[(k * n + l) * n + j] = std::move(d);
      }
      Jet ht = truncate_last(h, qs);
      g[j * n + l] = ht;
      if (l != j) g[l * n + j] = std::move(ht);
    }
  std::vector<Jet> yq(n);
  for (int i = 0; i < n; ++i) yq[i] = truncate_last(xy[n + i], qs);
  std::vector<Jet> G = spray_from_metric(std::move(g), dg, yq, n);

  ConnectionBox out;
  out.order = order;
  out.ring = order == 0 ? base : extend_shape(base, 2 * n, order);
  out.x.reserve(n);
  out.y.reserve(n);
  for (int i = 0; i < n; ++i) out.x.push_back(truncate_last(xy[i], order));
  for (int i = 0; i < n; ++i) out.y.push_back(truncate_last(xy[n + i], order));

  if (level >= 1) {
    out.Gj.resize(n * n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) out.Gj[i * n + j] = derive_last(G[i], n + j);
  }
  if (level >= 2) {
    out.Gjk.resize(n * n * n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k)
          out.Gjk[(i * n + j) * n + k] = derive_last(out.Gj[i * n + j], n + k);
  }
  if (level == 3) {
    std::vector<Jet> dGj(n * n * n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) dGj[(i * n + j) * n + k] = derive_last(out.Gj[i * n + j], k);
    std::vector<Jet> tGj(n * n);
    for (int i = 0; i < n * n; ++i) tGj[i] = truncate_last(out.Gj[i], order);
    out.R.resize(n * n * n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) {
          Jet r = dGj[(i * n + j) * n + k] - dGj[(i * n + k) * n + j];
          for (int m = 0; m < n; ++m) {
            mul_accumulate(r, tGj[m * n + j], out.Gjk[(i * n + k) * n + m]);
            mul_accumulate(r, tGj[m * n + k], out.Gjk[(i * n + j) * n + m], -1);
          }
          out.R[(i * n + j) * n + k] = std::move(r);
        }
  }
  // G sits at order qs, Gj at qs-1; bring both down to `order` (for level 0
  // resp. 1 they are already there, possibly as bare base-ring jets)
  if (qs > order)
    for (Jet& c : G) c = truncate_last(c, order);
  out.G = std::move(G);
  if (level >= 2)
    for (Jet& c : out.Gj) c = truncate_last(c, order);
  return out;
}

std::vector<double> spray_coeffs(const FinslerModel& model, std::span<const double> x,
                                 std::span<const double> y) {
  const int n = model.dim();
  std::vector<Jet> xj, yj;
  xj.reserve(n);
  yj.reserve(n);
  for (int i = 0; i < n; ++i) xj.emplace_back(x[i]);
  for (int i = 0; i < n; ++i) yj.emplace_back(y[i]);
  const BerwaldJets bw = berwald_connection(model, xj, yj, 0);
  std::vector<double> out(n);
  for (int i = 0; i < n; ++i) out[i] = bw.G[i].value();
  return out;
}

ConnectionEval connection_eval(const FinslerModel& model, std::span<const double> x,
                               std::span<const double> y) {
  const int n = model.dim();
  std::vector<Jet> xj, yj;
  xj.reserve(n);
  yj.reserve(n);
  for (int i = 0; i < n; ++i) xj.emplace_back(x[i]);
  for (int i = 0; i < n; ++i) yj.emplace_back(y[i]);
  const CurvatureJets cj = curvature_connection(model, xj, yj);

  ConnectionEval out;
  out.x.assign(x.begin(), x.end());
  out.y.assign(y.begin(), y.end());
  out.G.resize(n);
  out.Gj.resize(n * n);
  out.Gjk.resize(n * n * n);
  out.R.resize(n * n * n);
  for (int i = 0; i < n; ++i) out.G[i] = cj.G[i].value();
  for (int i = 0; i < n * n; ++i) out.Gj[i] = cj.Gj[i].value();
  for (int i = 0; i < n * n * n; ++i) out.Gjk[i] = cj.Gjk[i].value();
  for (int i = 0; i < n * n * n; ++i) out.R[i] = cj.R[i].value();
  return out;
}

std::vector<double> horizontal_lift(const ConnectionEval& conn, std::span<const double> X) {
  const int n = static_cast<int>(conn.G.size());
  if (static_cast<int>(X.size()) != n)
    throw std::invalid_argument("horizontal_lift: wrong vector dimension");
  std::vector<double> out(2 * n, 0.0);
  for (int i = 0; i < n; ++i) out[i] = X[i];
  for (int k = 0; k < n; ++k) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += conn.Gj[k * n + i] * X[i];
    out[n + k] = -s;
  }
  return out;
}

}  // namespace finhol
