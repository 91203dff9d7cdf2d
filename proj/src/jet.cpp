#include "finhol/jet.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <map>
#include <mutex>
#include <sstream>

#include "finhol/errors.hpp"

namespace finhol {

namespace {

// Largest flat product table we are willing to cache per shape.  Beyond this
// multiplication recurses block by block, which needs no extra memory.
constexpr long kFullTableCap = 2'500'000;

void enumerate_exponents(int vars, int degree, std::vector<std::uint8_t>& cur,
                         std::vector<std::vector<std::uint8_t>>& out) {
  if (static_cast<int>(cur.size()) == vars - 1) {
    cur.push_back(static_cast<std::uint8_t>(degree));
    out.push_back(cur);
    cur.pop_back();
    return;
  }
  for (int e = degree; e >= 0; --e) {
    cur.push_back(static_cast<std::uint8_t>(e));
    enumerate_exponents(vars, degree - e, cur, out);
    cur.pop_back();
  }
}

long pack_exponent(std::span<const std::uint8_t> e, int order) {
  long p = 0;
  for (std::size_t i = 0; i < e.size(); ++i) p = p * (order + 1) + e[i];
  return p;
}

JetShape::BlockTable build_block_table(int vars, int order) {
  JetShape::BlockTable t;
  t.vars = vars;
  t.order = order;

  long lookup_size = 1;
  for (int i = 0; i < vars; ++i) lookup_size *= (order + 1);
  // Product-pair count is C(2*vars + order, order); refuse tables that would
  // dominate memory before allocating anything.
  double pair_estimate = 1.0;
  for (int k = 1; k <= order; ++k) pair_estimate *= static_cast<double>(2 * vars + k) / k;
  if (pair_estimate > 8e6 || lookup_size > 20'000'000)
    throw std::invalid_argument("jet block (" + std::to_string(vars) + "," + std::to_string(order) +
                                ") needs product tables beyond the supported size; reduce the "
                                "derivative order or nesting depth");

  std::vector<std::vector<std::uint8_t>> expos;
  for (int d = 0; d <= order; ++d) {
    std::vector<std::uint8_t> cur;
    enumerate_exponents(vars, d, cur, expos);
  }
  t.size = static_cast<int>(expos.size());

  t.rank_lookup.assign(lookup_size, -1);

  t.expo.resize(static_cast<std::size_t>(t.size) * vars);
  t.degree.resize(t.size);
  t.fact.resize(t.size);
  for (int r = 0; r < t.size; ++r) {
    const auto& e = expos[r];
    std::copy(e.begin(), e.end(), t.expo.begin() + static_cast<std::size_t>(r) * vars);
    int deg = 0;
    double f = 1.0;
    for (int i = 0; i < vars; ++i) {
      deg += e[i];
      for (int k = 2; k <= e[i]; ++k) f *= k;
    }
    t.degree[r] = deg;
    t.fact[r] = f;
    t.rank_lookup[pack_exponent(e, order)] = r;
  }

  // Ranks are degree-sorted, so the partners of ra form a prefix.
  std::vector<int> degree_end(order + 1, 0);
  for (int r = 0; r < t.size; ++r)
    for (int d = t.degree[r]; d <= order; ++d) degree_end[d] = r + 1;
  std::vector<std::uint8_t> sum(vars);
  for (int ra = 0; ra < t.size; ++ra) {
    const int lim = degree_end[order - t.degree[ra]];
    for (int rb = 0; rb < lim; ++rb) {
      for (int i = 0; i < vars; ++i)
        sum[i] = static_cast<std::uint8_t>(t.expo[static_cast<std::size_t>(ra) * vars + i] +
                                           t.expo[static_cast<std::size_t>(rb) * vars + i]);
      int io = t.rank_lookup[pack_exponent(sum, order)];
      t.triples.push_back({ra, rb, io});
    }
  }
  std::sort(t.triples.begin(), t.triples.end(),
            [](const auto& a, const auto& b) { return a[2] < b[2]; });
  t.triple_begin.assign(t.size + 1, 0);
  for (const auto& tr : t.triples) ++t.triple_begin[tr[2] + 1];
  for (int r = 0; r < t.size; ++r) t.triple_begin[r + 1] += t.triple_begin[r];
  return t;
}

std::mutex g_registry_mutex;
std::map<std::vector<std::pair<int, int>>, JetShapePtr>& registry() {
  static std::map<std::vector<std::pair<int, int>>, JetShapePtr> reg;
  return reg;
}

// res(+/-)= a*b over the blocks [0..level] of `shape`.
template <int Sign>
void mul_rec(const JetShape& shape, int level, const double* a, const double* b, double* out) {
  if (level < 0) {
    if constexpr (Sign > 0)
      out[0] += a[0] * b[0];
    else
      out[0] -= a[0] * b[0];
    return;
  }
  const auto& tab = shape.table(level);
  if (level == 0) {
    for (const auto& t : tab.triples) {
      if constexpr (Sign > 0)
        out[t[2]] += a[t[0]] * b[t[1]];
      else
        out[t[2]] -= a[t[0]] * b[t[1]];
    }
    return;
  }
  const long st = shape.stride(level);
  for (const auto& t : tab.triples)
    mul_rec<Sign>(shape, level - 1, a + t[0] * st, b + t[1] * st, out + t[2] * st);
}

void div_rec(const JetShape& shape, int level, const double* a, const double* b, double* out,
             double tol) {
  if (level < 0) {
    if (std::abs(b[0]) <= tol)
      throw NumericalError("jet division by near-zero value " + std::to_string(b[0]));
    out[0] = a[0] / b[0];
    return;
  }
  const auto& tab = shape.table(level);
  const long st = level == 0 ? 1 : shape.stride(level);
  for (int r = 0; r < tab.size; ++r) {
    double* od = out + r * st;
    const double* ad = a + r * st;
    if (od != ad) std::copy(ad, ad + st, od);
    for (int k = tab.triple_begin[r]; k < tab.triple_begin[r + 1]; ++k) {
      const auto& t = tab.triples[k];
      if (t[0] == 0) continue;  // the b_0 * c_r term is the one being solved for
      mul_rec<-1>(shape, level - 1, b + t[0] * st, out + t[1] * st, od);
    }
    div_rec(shape, level - 1, od, b, od, tol);
  }
}

void sqrt_rec(const JetShape& shape, int level, const double* a, double* out, double tol) {
  if (level < 0) {
    if (a[0] <= tol) throw NumericalError("jet sqrt of non-positive value " + std::to_string(a[0]));
    out[0] = std::sqrt(a[0]);
    return;
  }
  const auto& tab = shape.table(level);
  const long st = level == 0 ? 1 : shape.stride(level);
  sqrt_rec(shape, level - 1, a, out, tol);
  std::vector<double> d0(out, out + st);
  for (double& v : d0) v *= 2.0;
  for (int r = 1; r < tab.size; ++r) {
    double* od = out + r * st;
    const double* ad = a + r * st;
    if (od != ad) std::copy(ad, ad + st, od);
    for (int k = tab.triple_begin[r]; k < tab.triple_begin[r + 1]; ++k) {
      const auto& t = tab.triples[k];
      if (t[0] == 0 || t[1] == 0) continue;
      mul_rec<-1>(shape, level - 1, out + t[0] * st, out + t[1] * st, od);
    }
    div_rec(shape, level - 1, od, d0.data(), od, tol);
  }
}

}  // namespace

int JetShape::block_rank(int b, std::span<const int> exponent) const {
  const auto& t = tables_[b];
  if (static_cast<int>(exponent.size()) != t.vars)
    throw std::invalid_argument("exponent length does not match block variable count");
  int deg = 0;
  long p = 0;
  for (int i = 0; i < t.vars; ++i) {
    if (exponent[i] < 0 || exponent[i] > t.order)
      throw std::invalid_argument("exponent entry outside block order");
    deg += exponent[i];
    p = p * (t.order + 1) + exponent[i];
  }
  if (deg > t.order) throw std::invalid_argument("exponent total degree exceeds block order");
  return t.rank_lookup[p];
}

std::string JetShape::describe() const {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    if (i) os << ",";
    os << "(" << blocks_[i].vars << "," << blocks_[i].order << ")";
  }
  os << "]";
  return os.str();
}

const JetShape::FullTable* JetShape::full_table() const {
  std::lock_guard<std::mutex> lock(g_registry_mutex);
  if (full_tried_) return full_.get();
  full_tried_ = true;
  long count = 1;
  for (const auto& t : tables_) {
    count *= static_cast<long>(t.triples.size());
    if (count > kFullTableCap) return nullptr;
  }
  if (tables_.empty()) return nullptr;
  auto ft = std::make_unique<FullTable>();
  ft->out.reserve(count);
  ft->ia.reserve(count);
  ft->ib.reserve(count);
  // Cartesian product of the per-block triple lists.
  std::vector<std::size_t> idx(tables_.size(), 0);
  while (true) {
    long o = 0, ia = 0, ib = 0;
    for (std::size_t b = 0; b < tables_.size(); ++b) {
      const auto& t = tables_[b].triples[idx[b]];
      ia += t[0] * strides_[b];
      ib += t[1] * strides_[b];
      o += t[2] * strides_[b];
    }
    ft->ia.push_back(static_cast<std::int32_t>(ia));
    ft->ib.push_back(static_cast<std::int32_t>(ib));
    ft->out.push_back(static_cast<std::int32_t>(o));
    std::size_t b = 0;
    while (b < tables_.size() && ++idx[b] == tables_[b].triples.size()) idx[b++] = 0;
    if (b == tables_.size()) break;
  }
  // Sort by output index so accumulation streams through the result array.
  std::vector<std::int32_t> perm(ft->out.size());
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = static_cast<std::int32_t>(i);
  std::sort(perm.begin(), perm.end(),
            [&](std::int32_t x, std::int32_t y) { return ft->out[x] < ft->out[y]; });
  FullTable sorted;
  sorted.out.reserve(perm.size());
  sorted.ia.reserve(perm.size());
  sorted.ib.reserve(perm.size());
  for (auto p : perm) {
    sorted.out.push_back(ft->out[p]);
    sorted.ia.push_back(ft->ia[p]);
    sorted.ib.push_back(ft->ib[p]);
  }
  *ft = std::move(sorted);
  full_ = std::move(ft);
  return full_.get();
}

JetShapePtr scalar_shape() {
  static JetShapePtr s = [] {
    auto shape = std::shared_ptr<JetShape>(new JetShape());
    shape->size_ = 1;
    return JetShapePtr(shape);
  }();
  return s;
}

JetShapePtr extend_shape(const JetShapePtr& base, int num_vars, int order) {
  if (!base) throw std::invalid_argument("extend_shape: null base shape");
  if (num_vars < 1 || num_vars > 8)
    throw std::invalid_argument("jet block variable count " + std::to_string(num_vars) +
                                " outside supported range 1..8");
  if (order < 1 || order > kMaxJetOrder)
    throw std::invalid_argument("jet order " + std::to_string(order) +
                                " outside supported range 1.." + std::to_string(kMaxJetOrder));
  std::vector<std::pair<int, int>> key;
  for (const auto& b : base->blocks_) key.emplace_back(b.vars, b.order);
  key.emplace_back(num_vars, order);
  std::lock_guard<std::mutex> lock(g_registry_mutex);
  auto& reg = registry();
  auto it = reg.find(key);
  if (it != reg.end()) return it->second;

  auto shape = std::shared_ptr<JetShape>(new JetShape());
  shape->blocks_ = base->blocks_;
  shape->blocks_.push_back({num_vars, order});
  shape->tables_ = base->tables_;
  shape->tables_.push_back(build_block_table(num_vars, order));
  shape->strides_ = base->strides_;
  shape->strides_.push_back(base->size_);
  shape->size_ = base->size_ * shape->tables_.back().size;
  shape->total_order_ = base->total_order_ + order;
  shape->parent_ = base;
  JetShapePtr out(shape);
  reg.emplace(std::move(key), out);
  return out;
}

JetShapePtr jet_shape(int num_vars, int order) { return extend_shape(scalar_shape(), num_vars, order); }

Jet::Jet() : shape_(scalar_shape()), c_(1, 0.0) {}
Jet::Jet(double v) : shape_(scalar_shape()), c_(1, v) {}

Jet Jet::constant(const JetShapePtr& s, double v) {
  std::vector<double> c(s->size(), 0.0);
  c[0] = v;
  return Jet(s, std::move(c));
}

Jet Jet::lift(const JetShapePtr& s, const Jet& inner) {
  if (s->parent().get() != inner.shape().get())
    throw std::invalid_argument("lift: shape " + s->describe() + " does not extend " +
                                inner.shape()->describe());
  std::vector<double> c(s->size(), 0.0);
  std::copy(inner.c_.begin(), inner.c_.end(), c.begin());
  return Jet(s, std::move(c));
}

Jet Jet::seed(const JetShapePtr& s, int var, const Jet& inner) {
  const auto& tab = s->last_table();
  if (var < 0 || var >= tab.vars)
    throw std::invalid_argument("seed: variable index " + std::to_string(var) +
                                " outside block of " + std::to_string(tab.vars) + " variables");
  Jet out = lift(s, inner);
  std::vector<int> e(tab.vars, 0);
  e[var] = 1;
  out.c_[s->block_rank(s->num_blocks() - 1, e) * s->last_stride()] = 1.0;
  return out;
}

Jet Jet::seed(const JetShapePtr& s, int var, double v) {
  return seed(s, var, Jet::constant(s->parent() ? s->parent() : scalar_shape(), v));
}

Jet Jet::coeff(std::span<const int> exponent) const {
  if (shape_->num_blocks() == 0)
    throw std::invalid_argument("coeff: scalar-shaped jet has no blocks to extract from");
  int rank = shape_->block_rank(shape_->num_blocks() - 1, exponent);
  const long st = shape_->last_stride();
  std::vector<double> c(c_.begin() + rank * st, c_.begin() + (rank + 1) * st);
  return Jet(shape_->parent(), std::move(c));
}

Jet Jet::partial(std::span<const int> exponent) const {
  if (shape_->num_blocks() == 0)
    throw std::invalid_argument("partial: scalar-shaped jet has no blocks to extract from");
  int rank = shape_->block_rank(shape_->num_blocks() - 1, exponent);
  const double f = shape_->last_table().fact[rank];
  Jet out = coeff(exponent);
  for (double& v : out.c_) v *= f;
  return out;
}

double Jet::partial_value(std::span<const int> exponent) const {
  int rank = shape_->block_rank(shape_->num_blocks() - 1, exponent);
  return c_[rank * shape_->last_stride()] * shape_->last_table().fact[rank];
}

namespace {
void check_same_shape(const Jet& a, const Jet& b, const char* op) {
  if (a.shape().get() != b.shape().get())
    throw std::invalid_argument(std::string(op) + ": jet shapes differ, " + a.shape()->describe() +
                                " vs " + b.shape()->describe());
}
}  // namespace

Jet& Jet::operator+=(const Jet& o) {
  check_same_shape(*this, o, "jet add");
  for (std::size_t i = 0; i < c_.size(); ++i) c_[i] += o.c_[i];
  return *this;
}

Jet& Jet::operator-=(const Jet& o) {
  check_same_shape(*this, o, "jet sub");
  for (std::size_t i = 0; i < c_.size(); ++i) c_[i] -= o.c_[i];
  return *this;
}

Jet& Jet::operator*=(double s) {
  for (double& v : c_) v *= s;
  return *this;
}

Jet operator+(const Jet& a, const Jet& b) {
  Jet r = a;
  r += b;
  return r;
}

Jet operator-(const Jet& a, const Jet& b) {
  Jet r = a;
  r -= b;
  return r;
}

Jet operator-(const Jet& a) {
  Jet r = a;
  for (double& v : r.c_) v = -v;
  return r;
}

Jet operator*(const Jet& a, double s) {
  Jet r = a;
  r *= s;
  return r;
}

Jet operator+(const Jet& a, double s) {
  Jet r = a;
  r.c_[0] += s;
  return r;
}

void mul_accumulate(Jet& res, const Jet& a, const Jet& b, int sign) {
  check_same_shape(a, b, "jet mul");
  check_same_shape(res, a, "jet mul");
  const JetShape& sh = *a.shape();
  if (sh.num_blocks() == 0) {
    res.c_[0] += sign * a.c_[0] * b.c_[0];
    return;
  }
  if (const auto* ft = sh.full_table()) {
    const double* pa = a.c_.data();
    const double* pb = b.c_.data();
    double* po = res.c_.data();
    const std::size_t n = ft->out.size();
    if (sign > 0) {
      for (std::size_t i = 0; i < n; ++i) po[ft->out[i]] += pa[ft->ia[i]] * pb[ft->ib[i]];
    } else {
      for (std::size_t i = 0; i < n; ++i) po[ft->out[i]] -= pa[ft->ia[i]] * pb[ft->ib[i]];
    }
    return;
  }
  if (sign > 0)
    mul_rec<1>(sh, sh.num_blocks() - 1, a.c_.data(), b.c_.data(), res.c_.data());
  else
    mul_rec<-1>(sh, sh.num_blocks() - 1, a.c_.data(), b.c_.data(), res.c_.data());
}

Jet operator*(const Jet& a, const Jet& b) {
  Jet r = Jet::constant(a.shape(), 0.0);
  mul_accumulate(r, a, b, 1);
  return r;
}

Jet div(const Jet& a, const Jet& b, double tol) {
  check_same_shape(a, b, "jet div");
  Jet r = Jet::constant(a.shape(), 0.0);
  div_rec(*a.shape(), a.shape()->num_blocks() - 1, a.c_.data(), b.c_.data(), r.c_.data(), tol);
  return r;
}

Jet operator/(double a, const Jet& b) { return div(Jet::constant(b.shape(), a), b); }

Jet sqrt(const Jet& a, double tol) {
  Jet r = Jet::constant(a.shape(), 0.0);
  sqrt_rec(*a.shape(), a.shape()->num_blocks() - 1, a.c_.data(), r.c_.data(), tol);
  return r;
}

Jet pow(const Jet& a, double p, double tol) {
  const double rounded = std::round(p);
  if (rounded == p && std::abs(p) <= 12.0) {
    int n = static_cast<int>(std::abs(rounded));
    Jet acc = Jet::constant(a.shape(), 1.0);
    Jet base = a;
    while (n > 0) {
      if (n & 1) acc = acc * base;
      n >>= 1;
      if (n > 0) base = base * base;
    }
    return p < 0 ? div(Jet::constant(a.shape(), 1.0), acc, tol) : acc;
  }
  const double v = a.value();
  if (v <= tol)
    throw NumericalError("jet pow with non-integer exponent requires positive value, got " +
                         std::to_string(v));
  // (v + w)^p = v^p * sum_k C(p,k) (w/v)^k with w nilpotent past the total order.
  Jet u = a * (1.0 / v);
  u += Jet::constant(a.shape(), -1.0);
  const int K = std::max(1, a.shape()->total_order());
  std::vector<double> binom(K + 1);
  binom[0] = 1.0;
  for (int k = 1; k <= K; ++k) binom[k] = binom[k - 1] * (p - k + 1) / k;
  Jet res = Jet::constant(a.shape(), binom[K]);
  for (int k = K - 1; k >= 0; --k) {
    res = res * u;
    res += Jet::constant(a.shape(), binom[k]);
  }
  res *= std::pow(v, p);
  return res;
}

Jet derive_last(const Jet& a, int var) {
  const JetShapePtr& s = a.shape();
  if (s->num_blocks() == 0)
    throw std::invalid_argument("derive_last: scalar-shaped jet has no blocks");
  const auto& tab = s->last_table();
  if (var < 0 || var >= tab.vars)
    throw std::invalid_argument("derive_last: variable index " + std::to_string(var) +
                                " outside block of " + std::to_string(tab.vars) + " variables");
  std::vector<int> e(tab.vars, 0);
  if (tab.order == 1) {
    e[var] = 1;
    return a.coeff(e);
  }
  JetShapePtr ts = extend_shape(s->parent() ? s->parent() : scalar_shape(), tab.vars, tab.order - 1);
  Jet out = Jet::constant(ts, 0.0);
  const auto& ot = ts->last_table();
  const long st = s->last_stride();
  std::span<const double> in = a.coeffs();
  std::span<double> oc = out.coeffs();
  for (int ro = 0; ro < ot.size; ++ro) {
    for (int i = 0; i < tab.vars; ++i) e[i] = ot.expo[static_cast<std::size_t>(ro) * tab.vars + i];
    ++e[var];
    const long ri = s->block_rank(s->num_blocks() - 1, e);
    const double f = e[var];
    for (long p = 0; p < st; ++p) oc[ro * st + p] = f * in[ri * st + p];
  }
  return out;
}

Jet truncate_last(const Jet& a, int new_order) {
  const JetShapePtr& s = a.shape();
  if (s->num_blocks() == 0)
    throw std::invalid_argument("truncate_last: scalar-shaped jet has no blocks");
  const auto& tab = s->last_table();
  if (new_order < 0 || new_order > tab.order)
    throw std::invalid_argument("truncate_last: new order " + std::to_string(new_order) +
                                " outside 0.." + std::to_string(tab.order));
  if (new_order == tab.order) return a;
  if (new_order == 0) {
    std::vector<int> e(tab.vars, 0);
    return a.coeff(e);
  }
  JetShapePtr ts = extend_shape(s->parent() ? s->parent() : scalar_shape(), tab.vars, new_order);
  Jet out = Jet::constant(ts, 0.0);
  std::copy(a.coeffs().begin(), a.coeffs().begin() + ts->size(), out.coeffs().begin());
  return out;
}

Jet seed_variable(int index, double value, int num_vars, int order) {
  auto s = jet_shape(num_vars, order);
  return Jet::seed(s, index, Jet(value));
}

double extract_partial(const Jet& a, std::span<const int> variable_list) {
  if (a.shape()->num_blocks() != 1)
    throw std::invalid_argument("extract_partial expects a single-block jet, got shape " +
                                a.shape()->describe());
  const auto& tab = a.shape()->last_table();
  std::vector<int> exponent(tab.vars, 0);
  for (int v : variable_list) {
    if (v < 0 || v >= tab.vars)
      throw std::invalid_argument("extract_partial: variable index " + std::to_string(v) +
                                  " outside 0.." + std::to_string(tab.vars - 1));
    ++exponent[v];
  }
  return a.partial_value(exponent);
}

}  // namespace finhol
