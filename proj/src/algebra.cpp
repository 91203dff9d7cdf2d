#include "finhol/algebra.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "finhol/riemann.hpp"

namespace finhol {

namespace {

void check_options(const AlgebraOptions& o) {
  if (o.max_fields < 1) throw std::invalid_argument("max_fields must be >= 1");
  if (o.bracket_depth < 0 || o.nabla_depth < 0)
    throw std::invalid_argument("depth limits must be >= 0");
  if (o.samples < 0) throw std::invalid_argument("samples must be >= 0");
  if (!(o.tol > 0.0)) throw std::invalid_argument("tol must be positive");
}

// Largest box order whose jet tables fit the global budget; mirrors the
// guards in jet shape construction for the joint block (2n, order + 5).
bool box_feasible(int n, int order) {
  const int q = order + 5;
  const int v = 2 * n;
  if (q > kMaxJetOrder) return false;
  double pairs = 1.0;
  for (int k = 1; k <= q; ++k) pairs *= static_cast<double>(2 * v + k) / k;
  return pairs <= 8e6 && std::pow(static_cast<double>(q + 1), v) <= 2e7;
}

int feasible_field_depth(int n) {
  int order = 0;
  while (box_feasible(n, order + 1)) ++order;
  return std::min(kMaxFieldDepth, order + 1);
}

// Incremental column-span membership test: admit() keeps an orthonormal
// basis and accepts a column only when its out-of-span part is relatively
// larger than tol.  Norms are compared against the largest column seen, so
// numerically-zero candidates never enter.
struct SpanGate {
  double tol = 1e-8;
  double scale = 0.0;
  std::vector<Eigen::VectorXd> q;

  bool admit(const Eigen::VectorXd& c) {
    const double nc = c.norm();
    scale = std::max(scale, nc);
    if (!(nc > tol * scale)) return false;
    Eigen::VectorXd r = c;
    for (int pass = 0; pass < 2; ++pass)
      for (const Eigen::VectorXd& qi : q) r -= qi.dot(r) * qi;
    const double rn = r.norm();
    if (!(rn > tol * nc)) return false;
    q.push_back(r / rn);
    return true;
  }
};

std::string count_line(const char* what, int accepted, int candidates) {
  return std::string(what) + ": " + std::to_string(accepted) + " of " +
         std::to_string(candidates) + " accepted";
}

// Derivative directions: the coordinate frame, optionally extended by the
// monomial fields x^a e_j up to total degree nabla_depth.  The single
// application of a derivative along x^a e_j is pointwise a multiple of the
// frame derivative, so the extension only matters as a cross-check.
std::vector<VectorFieldSpec> germ_directions(int n, const AlgebraOptions& opts) {
  std::vector<VectorFieldSpec> dirs;
  for (int j = 0; j < n; ++j) dirs.push_back(VectorFieldSpec::basis(n, j));
  if (!opts.monomial_germs) return dirs;
  std::vector<int> expo(n, 0);
  for (int deg = 1; deg <= opts.nabla_depth; ++deg) {
    // compositions of deg into n parts, leading part descending
    std::vector<std::vector<int>> all;
    auto emit = [&](auto&& self, int pos, int left) -> void {
      if (pos == n - 1) {
        expo[pos] = left;
        all.push_back(expo);
        return;
      }
      for (int e = left; e >= 0; --e) {
        expo[pos] = e;
        self(self, pos + 1, left - e);
      }
    };
    emit(emit, 0, deg);
    for (const std::vector<int>& a : all)
      for (int j = 0; j < n; ++j) dirs.push_back(VectorFieldSpec::monomial(n, j, a));
  }
  return dirs;
}

struct Generator {
  const FinslerModel& model;
  AlgebraOptions opts;
  int n;
  int nsamples;
  int rows;
  std::vector<double> x;
  std::vector<std::vector<double>> ys;
  std::vector<FieldEval> ctxs;
  std::vector<IndicatrixField> fields;
  std::vector<int> bracket_count;
  std::vector<Eigen::VectorXd> cols;
  SpanGate gate;
  int depth_cap;
  int bracket_frontier = 0;
  int nabla_frontier = 0;
  bool depth_skipped = false;
  bool cap_hit = false;
  std::vector<std::string> log;

  Generator(const FinslerModel& m, std::span<const double> point, const AlgebraOptions& o)
      : model(m), opts(o), n(m.dim()), x(point.begin(), point.end()) {
    check_options(opts);
    if (static_cast<int>(x.size()) != n)
      throw std::invalid_argument("algebra generation: wrong point dimension");
    nsamples = opts.samples > 0 ? opts.samples : 4 * n * n;
    rows = nsamples * n;
    gate.tol = opts.tol;
    depth_cap = feasible_field_depth(n);
    ys = indicatrix_sample(model, x, nsamples, opts.seed);
    ctxs.reserve(ys.size());
    for (const std::vector<double>& y : ys) ctxs.emplace_back(model, x, y);
  }

  Eigen::VectorXd column(const IndicatrixField& f) {
    Eigen::VectorXd c(rows);
    for (int s = 0; s < nsamples; ++s) {
      const std::vector<double> v = ctxs[s].values(f);
      for (int i = 0; i < n; ++i) c[s * n + i] = v[i];
    }
    return c;
  }

  // gate and record a candidate; returns true when it joined the basis
  bool offer(IndicatrixField f, int bc) {
    Eigen::VectorXd c = column(f);
    if (!gate.admit(c)) return false;
    cols.push_back(std::move(c));
    log.push_back("+ " + f.describe());
    fields.push_back(std::move(f));
    bracket_count.push_back(bc);
    if (static_cast<int>(fields.size()) >= opts.max_fields) cap_hit = true;
    return true;
  }

  int seed_pass() {
    int candidates = 0, accepted = 0;
    for (int i = 0; i < n && !cap_hit; ++i)
      for (int j = i + 1; j < n && !cap_hit; ++j) {
        ++candidates;
        accepted += offer(curvature_field(model, VectorFieldSpec::basis(n, i),
                                          VectorFieldSpec::basis(n, j)),
                          0);
      }
    log.push_back(count_line("curvature seeds", accepted, candidates));
    return accepted;
  }

  int bracket_sweep() {
    const int size0 = static_cast<int>(fields.size());
    const int start = bracket_frontier;
    bracket_frontier = size0;
    int candidates = 0, accepted = 0;
    for (int j = start; j < size0 && !cap_hit; ++j)
      for (int i = 0; i < j && !cap_hit; ++i) {
        const int bc = 1 + std::max(bracket_count[i], bracket_count[j]);
        if (bc > opts.bracket_depth) {
          depth_skipped = true;
          continue;
        }
        if (1 + std::max(fields[i].depth(), fields[j].depth()) > depth_cap) {
          depth_skipped = true;
          continue;
        }
        ++candidates;
        accepted += offer(lie_bracket(fields[i], fields[j]), bc);
      }
    if (candidates > 0) log.push_back(count_line("bracket pass", accepted, candidates));
    return accepted;
  }

  int bracket_closure() {
    int total = 0;
    while (!cap_hit) {
      const int a = bracket_sweep();
      total += a;
      if (a == 0) break;
    }
    return total;
  }

  int nabla_pass(const std::vector<VectorFieldSpec>& dirs) {
    const int size0 = static_cast<int>(fields.size());
    const int start = nabla_frontier;
    nabla_frontier = size0;
    int candidates = 0, accepted = 0;
    for (int i = start; i < size0 && !cap_hit; ++i) {
      if (fields[i].depth() + 1 > depth_cap) {
        depth_skipped = true;
        continue;
      }
      for (const VectorFieldSpec& d : dirs) {
        if (cap_hit) break;
        ++candidates;
        accepted += offer(covariant_derivative(fields[i], d), bracket_count[i]);
      }
    }
    if (candidates > 0) log.push_back(count_line("derivative pass", accepted, candidates));
    return accepted;
  }

  FieldBasis finish(bool quiet) {
    FieldBasis b;
    b.model = &model;
    b.base_point = x;
    b.sample_set = ys;
    b.fields = fields;
    b.eval_matrix.resize(rows, static_cast<Eigen::Index>(cols.size()));
    for (std::size_t c = 0; c < cols.size(); ++c) b.eval_matrix.col(c) = cols[c];
    RankResult rr = numerical_rank(b.eval_matrix, opts.tol);
    b.rank = rr.rank;
    b.sv_spectrum = std::move(rr.singular_values);
    b.closed = quiet && !cap_hit;
    b.truncated = depth_skipped || cap_hit;

    // stability probe: extending the sample set must not move the rank
    if (!fields.empty()) {
      const auto ys2 = indicatrix_sample(model, x, 2 * nsamples, opts.seed);
      Eigen::MatrixXd wide(2 * rows, b.eval_matrix.cols());
      wide.topRows(rows) = b.eval_matrix;
      for (int s = nsamples; s < 2 * nsamples; ++s) {
        FieldEval ctx(model, x, ys2[s]);
        for (std::size_t f = 0; f < fields.size(); ++f) {
          const std::vector<double> v = ctx.values(fields[f]);
          for (int i = 0; i < n; ++i)
            wide(rows + (s - nsamples) * n + i, static_cast<Eigen::Index>(f)) = v[i];
        }
      }
      const RankResult rr2 = numerical_rank(wide, opts.tol);
      b.ill_conditioned = rr2.rank != b.rank;
      if (b.ill_conditioned)
        log.push_back("rank moved from " + std::to_string(b.rank) + " to " +
                      std::to_string(rr2.rank) + " under sample doubling");
    }

    if (cap_hit) log.push_back("stopped: max_fields reached");
    else if (b.closed) log.push_back("closed: no candidate raises the rank");
    if (depth_skipped) log.push_back("candidates beyond the depth budget were skipped");
    log.push_back("rank " + std::to_string(b.rank) + " from " +
                  std::to_string(fields.size()) + " generators over " +
                  std::to_string(nsamples) + " fiber samples");
    b.generation_log = std::move(log);
    return b;
  }
};

}  // namespace

RankResult numerical_rank(const Eigen::MatrixXd& m, double tol) {
  if (!(tol > 0.0)) throw std::invalid_argument("tol must be positive");
  RankResult out;
  if (m.rows() == 0 || m.cols() == 0) return out;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  const Eigen::VectorXd& sv = svd.singularValues();
  out.singular_values.assign(sv.data(), sv.data() + sv.size());
  const double top = out.singular_values.empty() ? 0.0 : out.singular_values.front();
  if (top > 0.0)
    for (double s : out.singular_values)
      if (s > tol * top) ++out.rank;
  return out;
}

FieldBasis generate_curvature_algebra(const FinslerModel& model, std::span<const double> x,
                                      const AlgebraOptions& opts) {
  Generator gen(model, x, opts);
  gen.seed_pass();
  gen.bracket_closure();
  return gen.finish(true);
}

FieldBasis generate_infinitesimal_holonomy(const FinslerModel& model, std::span<const double> x,
                                           const AlgebraOptions& opts) {
  Generator gen(model, x, opts);
  const std::vector<VectorFieldSpec> dirs = germ_directions(model.dim(), opts);
  gen.seed_pass();
  gen.bracket_closure();
  bool quiet = false;
  while (!gen.cap_hit) {
    const int a = gen.nabla_pass(dirs);
    const int b = gen.bracket_closure();
    if (a + b == 0) {
      quiet = true;
      break;
    }
  }
  return gen.finish(quiet);
}

OperatorAlgebra riemannian_curvature_operator_algebra(const FinslerModel& model,
                                                      std::span<const double> x,
                                                      const AlgebraOptions& opts) {
  check_options(opts);
  const int n = model.dim();
  const std::vector<double> B = linear_curvature_tensor(model, x);
  auto vec = [n](const Eigen::MatrixXd& m) {
    return Eigen::Map<const Eigen::VectorXd>(m.data(), n * n).eval();
  };

  OperatorAlgebra out;
  SpanGate gate;
  gate.tol = opts.tol;
  for (int j = 0; j < n; ++j)
    for (int k = j + 1; k < n; ++k) {
      Eigen::MatrixXd m(n, n);
      for (int i = 0; i < n; ++i)
        for (int a = 0; a < n; ++a) m(i, a) = B[((i * n + a) * n + j) * n + k];
      if (gate.admit(vec(m))) out.matrices.push_back(std::move(m));
    }

  // commutator closure
  std::size_t frontier = 0;
  bool capped = false;
  while (!capped) {
    const std::size_t size0 = out.matrices.size();
    if (frontier == size0) break;
    const std::size_t start = frontier;
    frontier = size0;
    bool grew = false;
    for (std::size_t j = start; j < size0 && !capped; ++j)
      for (std::size_t i = 0; i < j && !capped; ++i) {
        Eigen::MatrixXd c =
            out.matrices[i] * out.matrices[j] - out.matrices[j] * out.matrices[i];
        if (gate.admit(vec(c))) {
          out.matrices.push_back(std::move(c));
          grew = true;
          if (static_cast<int>(out.matrices.size()) >= opts.max_fields) capped = true;
        }
      }
    if (!grew) break;
  }
  out.closed = !capped;

  Eigen::MatrixXd stacked(n * n, static_cast<Eigen::Index>(out.matrices.size()));
  for (std::size_t c = 0; c < out.matrices.size(); ++c)
    stacked.col(static_cast<Eigen::Index>(c)) = vec(out.matrices[c]);
  RankResult rr = numerical_rank(stacked, opts.tol);
  out.rank = rr.rank;
  out.sv_spectrum = std::move(rr.singular_values);
  return out;
}

Eigen::MatrixXd operator_eval_matrix(std::span<const Eigen::MatrixXd> matrices,
                                     std::span<const std::vector<double>> samples) {
  if (samples.empty()) throw std::invalid_argument("operator_eval_matrix: no samples");
  const int n = static_cast<int>(samples[0].size());
  Eigen::MatrixXd out(static_cast<Eigen::Index>(samples.size()) * n,
                      static_cast<Eigen::Index>(matrices.size()));
  for (std::size_t m = 0; m < matrices.size(); ++m) {
    if (matrices[m].rows() != n || matrices[m].cols() != n)
      throw std::invalid_argument("operator_eval_matrix: matrix dimension mismatch");
    for (std::size_t s = 0; s < samples.size(); ++s) {
      const Eigen::Map<const Eigen::VectorXd> y(samples[s].data(), n);
      out.block(static_cast<Eigen::Index>(s) * n, static_cast<Eigen::Index>(m), n, 1) =
          matrices[m] * y;
    }
  }
  return out;
}

double span_inclusion_residual(const Eigen::MatrixXd& sub, const Eigen::MatrixXd& sup) {
  if (sub.cols() == 0) return 0.0;
  if (sup.cols() > 0 && sup.rows() != sub.rows())
    throw std::invalid_argument("span_inclusion_residual: row count mismatch");
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod;
  if (sup.cols() > 0) cod.compute(sup);
  double worst = 0.0;
  for (Eigen::Index c = 0; c < sub.cols(); ++c) {
    const Eigen::VectorXd a = sub.col(c);
    const double na = a.norm();
    if (na == 0.0) continue;
    double res = 1.0;
    if (sup.cols() > 0) res = (sup * cod.solve(a) - a).norm() / na;
    worst = std::max(worst, res);
  }
  return worst;
}

double span_inclusion_residual(const FieldBasis& sub, const FieldBasis& sup) {
  if (sub.model != sup.model || sub.base_point != sup.base_point ||
      sub.sample_set != sup.sample_set)
    throw std::invalid_argument(
        "span_inclusion_residual: bases must share the model, point and samples");
  return span_inclusion_residual(sub.eval_matrix, sup.eval_matrix);
}

}  // namespace finhol
