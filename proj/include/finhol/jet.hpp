#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace finhol {

// Dense truncated multivariate Taylor arithmetic (forward-mode jets).
//
// A JetShape is an ordered list of variable blocks.  Each block has its own
// variable count and truncation order (1..4); within a block coefficients are
// kept up to the block's total degree, and across blocks the truncation is
// the product filtration.  A one-block shape is the ordinary multivariate
// jet.  Appending a block is how nested differentiation is done: evaluating
// a whole computation over jets that carry an extra first-order block yields
// one more derivative layer without raising the base order.  Appended blocks
// are peeled off again with coeff()/partial(), so shapes are used
// stack-fashion: the last block belongs to whoever extended the shape.
//
// Coefficient storage is a flat array; the last block has the largest
// stride, so the coefficients of a shape R+B are |B| contiguous slices of
// shape-R coefficients.  Multiplication tables per shape are cached in a
// global registry (shapes are canonical: equal block lists give the same
// JetShape instance, which makes shape checks pointer comparisons).

inline constexpr int kMaxJetOrder = 12;
inline constexpr double kDivTolerance = 1e-12;

class JetShape;
using JetShapePtr = std::shared_ptr<const JetShape>;

class JetShape {
public:
  struct Block {
    int vars = 0;
    int order = 0;
  };

  // Per-block coefficient table: exponent lists in (degree, lex) order with
  // rank 0 = the zero exponent, lookup from packed exponents, and the pair
  // list (ia, ib, io) of every in-truncation product, sorted by io.
  struct BlockTable {
    int vars = 0;
    int order = 0;
    int size = 0;
    std::vector<std::uint8_t> expo;       // size*vars, rank-major
    std::vector<int> degree;              // size
    std::vector<double> fact;             // size, product of exponent factorials
    std::vector<int> rank_lookup;         // packed exponent -> rank, -1 outside
    std::vector<std::array<int, 3>> triples;
    std::vector<int> triple_begin;        // size+1, offsets into triples by io
  };

  const std::vector<Block>& blocks() const { return blocks_; }
  int num_blocks() const { return static_cast<int>(blocks_.size()); }
  long size() const { return size_; }
  int total_order() const { return total_order_; }
  const JetShapePtr& parent() const { return parent_; }
  const BlockTable& table(int b) const { return tables_[b]; }
  long stride(int b) const { return strides_[b]; }

  // Last-block helpers used by seeding and extraction.
  const BlockTable& last_table() const { return tables_.back(); }
  long last_stride() const { return strides_.back(); }

  int block_rank(int b, std::span<const int> exponent) const;

  std::string describe() const;

  // Flat product table over all blocks at once; built lazily, skipped when
  // the pair count is too large (multiplication then recurses over blocks).
  struct FullTable {
    std::vector<std::int32_t> out, ia, ib;
  };
  const FullTable* full_table() const;

private:
  friend JetShapePtr extend_shape(const JetShapePtr&, int, int);
  friend JetShapePtr scalar_shape();
  JetShape() = default;

  std::vector<Block> blocks_;
  std::vector<BlockTable> tables_;
  std::vector<long> strides_;
  long size_ = 1;
  int total_order_ = 0;
  JetShapePtr parent_;

  mutable std::unique_ptr<FullTable> full_;
  mutable bool full_tried_ = false;
};

// Canonical shapes.  scalar_shape() has no blocks and one coefficient; it is
// the ambient ring of plain numeric evaluation.
JetShapePtr scalar_shape();
JetShapePtr extend_shape(const JetShapePtr& base, int num_vars, int order);
JetShapePtr jet_shape(int num_vars, int order);  // extend_shape(scalar, ...)

class Jet {
public:
  Jet();                      // scalar-shape 0
  explicit Jet(double v);     // scalar-shape constant

  static Jet constant(const JetShapePtr& s, double v);
  // Copy `inner` (shaped like s->parent()) into the constant slice of s.
  static Jet lift(const JetShapePtr& s, const Jet& inner);
  // lift() plus a unit in last-block variable `var`: d(result)/d(var) = 1.
  static Jet seed(const JetShapePtr& s, int var, const Jet& inner);
  static Jet seed(const JetShapePtr& s, int var, double v);

  const JetShapePtr& shape() const { return shape_; }
  double value() const { return c_[0]; }
  std::span<const double> coeffs() const { return c_; }
  std::span<double> coeffs() { return c_; }

  // Last-block extraction; `exponent` has one entry per last-block variable.
  // coeff() is the raw Taylor coefficient, partial() multiplies in the
  // factorials to give the derivative.  Both return parent-shaped jets.
  Jet coeff(std::span<const int> exponent) const;
  Jet partial(std::span<const int> exponent) const;
  double partial_value(std::span<const int> exponent) const;
  Jet coeff(std::initializer_list<int> e) const { return coeff(std::span<const int>(e.begin(), e.size())); }
  Jet partial(std::initializer_list<int> e) const { return partial(std::span<const int>(e.begin(), e.size())); }
  double partial_value(std::initializer_list<int> e) const {
    return partial_value(std::span<const int>(e.begin(), e.size()));
  }

  Jet& operator+=(const Jet& o);
  Jet& operator-=(const Jet& o);
  Jet& operator*=(double s);

private:
  Jet(JetShapePtr s, std::vector<double> c) : shape_(std::move(s)), c_(std::move(c)) {}
  friend Jet operator+(const Jet&, const Jet&);
  friend Jet operator-(const Jet&, const Jet&);
  friend Jet operator-(const Jet&);
  friend Jet operator*(const Jet&, const Jet&);
  friend Jet operator*(const Jet&, double);
  friend Jet operator+(const Jet&, double);
  friend Jet div(const Jet&, const Jet&, double);
  friend Jet sqrt(const Jet&, double);
  friend Jet pow(const Jet&, double, double);
  friend void mul_accumulate(Jet&, const Jet&, const Jet&, int);

  JetShapePtr shape_;
  std::vector<double> c_;
};

Jet operator+(const Jet& a, const Jet& b);
Jet operator-(const Jet& a, const Jet& b);
Jet operator-(const Jet& a);
Jet operator*(const Jet& a, const Jet& b);
Jet operator*(const Jet& a, double s);
inline Jet operator*(double s, const Jet& a) { return a * s; }
Jet operator+(const Jet& a, double s);
inline Jet operator+(double s, const Jet& a) { return a + s; }
inline Jet operator-(const Jet& a, double s) { return a + (-s); }
Jet div(const Jet& a, const Jet& b, double tol = kDivTolerance);
inline Jet operator/(const Jet& a, const Jet& b) { return div(a, b); }
Jet operator/(double a, const Jet& b);
inline Jet operator/(const Jet& a, double s) { return a * (1.0 / s); }

// res += sign * a * b, used by the heavy inner loops to avoid temporaries.
void mul_accumulate(Jet& res, const Jet& a, const Jet& b, int sign = 1);

// In-block calculus on the last block.  derive_last differentiates in one
// last-block variable; the result lives in the shape whose last block is one
// order lower (the parent shape when the block was first order).
// truncate_last drops coefficients above new_order in the last block; ranks
// are degree-sorted, so this is a prefix copy.  new_order 0 returns the
// constant slice as a parent-shaped jet.
Jet derive_last(const Jet& a, int var);
Jet truncate_last(const Jet& a, int new_order);

// sqrt and real powers require a strictly positive value part; integer
// exponents are exact via repeated multiplication (negative ones divide).
Jet sqrt(const Jet& a, double tol = kDivTolerance);
Jet pow(const Jet& a, double p, double tol = kDivTolerance);

// Single-block convenience face.  seed_variable makes an order-`order` jet
// in `num_vars` variables representing the coordinate function v_index at
// `value`; extract_partial takes the derivative named by a list of variable
// indices (e.g. {0,0,1} = d^3/dv0^2 dv1) and returns its value.
Jet seed_variable(int index, double value, int num_vars, int order);
double extract_partial(const Jet& a, std::span<const int> variable_list);
inline double extract_partial(const Jet& a, std::initializer_list<int> v) {
  return extract_partial(a, std::span<const int>(v.begin(), v.size()));
}

}  // namespace finhol
