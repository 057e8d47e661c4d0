#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace padj {

using Vector = std::vector<double>;

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);
double norm_inf(std::span<const double> a);

/// Block dimensions of a state split into an x-block and a y-block.
struct BlockShape {
  std::size_t nx = 0;
  std::size_t ny = 0;

  std::size_t size() const { return nx + ny; }
  bool operator==(const BlockShape&) const = default;
};

/// State or costate partitioned into two blocks, u = (x, y) or p = (p_x, p_y).
/// Arithmetic acts blockwise and never changes the block lengths.
class BlockVec {
 public:
  BlockVec() = default;
  explicit BlockVec(BlockShape shape, double fill = 0.0);
  BlockVec(Vector x, Vector y);

  BlockShape shape() const { return {x_.size(), y_.size()}; }
  std::size_t size() const { return x_.size() + y_.size(); }

  Vector& x() { return x_; }
  Vector& y() { return y_; }
  const Vector& x() const { return x_; }
  const Vector& y() const { return y_; }

  /// Flat indexing: [0, nx) addresses x, [nx, nx+ny) addresses y.
  double& operator[](std::size_t i) { return i < x_.size() ? x_[i] : y_[i - x_.size()]; }
  double operator[](std::size_t i) const { return i < x_.size() ? x_[i] : y_[i - x_.size()]; }

  Vector flatten() const;
  static BlockVec unflatten(BlockShape shape, std::span<const double> flat);

  BlockVec& operator+=(const BlockVec& o);
  BlockVec& operator-=(const BlockVec& o);
  BlockVec& operator*=(double s);
  /// this += s * o
  BlockVec& axpy(double s, const BlockVec& o);

  friend BlockVec operator+(BlockVec a, const BlockVec& b) { return a += b; }
  friend BlockVec operator-(BlockVec a, const BlockVec& b) { return a -= b; }
  friend BlockVec operator*(double s, BlockVec a) { return a *= s; }
  friend BlockVec operator-(BlockVec a) { return a *= -1.0; }

  bool all_finite() const;

 private:
  Vector x_;
  Vector y_;
};

/// Standard duality pairing <<p, v>> of two block vectors.
double dot(const BlockVec& a, const BlockVec& b);
double norm2(const BlockVec& a);
double norm_inf(const BlockVec& a);

void require_shape(const BlockVec& v, BlockShape shape, const char* what);

/// Rectangular band matrix. Entry (i, j) may be nonzero only when
/// -lower <= j - i <= upper. A dense matrix is a band matrix with full
/// bandwidths.
class BandMatrix {
 public:
  BandMatrix() = default;
  BandMatrix(std::size_t rows, std::size_t cols, std::size_t lower, std::size_t upper);

  static BandMatrix zeros(std::size_t rows, std::size_t cols) { return {rows, cols, 0, 0}; }
  static BandMatrix identity(std::size_t n);
  static BandMatrix diagonal(std::span<const double> d);
  static BandMatrix dense(std::size_t rows, std::size_t cols);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t lower() const { return lower_; }
  std::size_t upper() const { return upper_; }
  bool is_diagonal() const { return lower_ == 0 && upper_ == 0; }

  bool in_band(std::size_t i, std::size_t j) const {
    return j + lower_ >= i && j <= i + upper_;
  }
  /// Returns 0 outside the band.
  double get(std::size_t i, std::size_t j) const;
  /// Precondition: (i, j) in band.
  double& at(std::size_t i, std::size_t j) { return data_[i * width() + (j + lower_ - i)]; }
  double at(std::size_t i, std::size_t j) const { return data_[i * width() + (j + lower_ - i)]; }
  void set(std::size_t i, std::size_t j, double v);

  /// Column range [first, last) of row i that lies inside the band.
  std::size_t row_begin(std::size_t i) const { return i > lower_ ? i - lower_ : 0; }
  std::size_t row_end(std::size_t i) const { return std::min(cols_, i + upper_ + 1); }

  void apply(std::span<const double> v, std::span<double> out) const;
  void apply_transpose(std::span<const double> w, std::span<double> out) const;
  Vector apply(std::span<const double> v) const;
  Vector apply_transpose(std::span<const double> w) const;
  /// out += alpha * A v
  void apply_add(double alpha, std::span<const double> v, std::span<double> out) const;
  void apply_transpose_add(double alpha, std::span<const double> w, std::span<double> out) const;

  BandMatrix transposed() const;
  BandMatrix scaled(double s) const;
  /// Bandwidths clipped to the matrix extent.
  BandMatrix widened(std::size_t lower, std::size_t upper) const;
  /// Row-major dense copy.
  Vector to_dense() const;

  /// this + s * o; bandwidths are the maxima of both operands.
  BandMatrix plus(const BandMatrix& o, double s = 1.0) const;
  /// Matrix product; bandwidths add and are clipped.
  BandMatrix times(const BandMatrix& o) const;

 private:
  std::size_t width() const { return lower_ + upper_ + 1; }

  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::size_t lower_ = 0;
  std::size_t upper_ = 0;
  Vector data_;
};

/// Thrown when a factorization meets an exactly zero pivot.
class SingularMatrixError : public std::runtime_error {
 public:
  SingularMatrixError(const std::string& what, std::size_t pivot)
      : std::runtime_error(what), pivot_(pivot) {}
  std::size_t pivot() const { return pivot_; }

 private:
  std::size_t pivot_;
};

/// LU factorization of a square band matrix with partial pivoting.
/// Row interchanges are applied only to trailing columns, so the stored
/// multipliers keep their original row positions.
class BandLU {
 public:
  BandLU() = default;
  explicit BandLU(const BandMatrix& a);

  std::size_t size() const { return n_; }
  void solve_in_place(std::span<double> b) const;
  void solve_transpose_in_place(std::span<double> b) const;
  Vector solve(std::span<const double> b) const;
  Vector solve_transpose(std::span<const double> b) const;

 private:
  double& lu(std::size_t i, std::size_t j) { return data_[i * width_ + (j + kl_ - i)]; }
  double lu(std::size_t i, std::size_t j) const { return data_[i * width_ + (j + kl_ - i)]; }

  std::size_t n_ = 0;
  std::size_t kl_ = 0;
  std::size_t ku_ = 0;  // upper bandwidth of U including fill
  std::size_t width_ = 0;
  Vector data_;
  std::vector<std::size_t> piv_;
};

/// 2x2 block operator [[xx, xy], [yx, yy]] acting on BlockVec.
struct BlockOp {
  BandMatrix xx, xy, yx, yy;

  static BlockOp identity(BlockShape shape);
  static BlockOp zeros(BlockShape shape);

  BlockShape shape() const { return {xx.rows(), yy.rows()}; }
  void validate() const;

  BlockVec apply(const BlockVec& v) const;
  BlockVec apply_transpose(const BlockVec& w) const;
  BlockOp transposed() const;
  /// this + s * o
  BlockOp plus(const BlockOp& o, double s = 1.0) const;
  BlockOp scaled(double s) const;
  /// Full (nx+ny) x (nx+ny) row-major dense matrix.
  Vector to_dense() const;
};

/// Identifies which factor failed inside a Schur complement factorization.
enum class SchurBlock { yy, schur_complement };

class SingularBlockError : public std::runtime_error {
 public:
  SingularBlockError(SchurBlock block, std::size_t pivot);
  SchurBlock block() const { return block_; }
  std::size_t pivot() const { return pivot_; }

 private:
  SchurBlock block_;
  std::size_t pivot_;
};

/// Block factorization of N through the complement S = N_xx - N_xy N_yy^-1 N_yx:
///
///   N^-1 = [I, 0; -N_yy^-1 N_yx, I] diag(S^-1, N_yy^-1) [I, -N_xy N_yy^-1; 0, I]
///
/// The same factors serve N^T, whose complement is S^T. S stays banded when
/// N_yy is diagonal, otherwise it is formed densely.
class SchurFactors {
 public:
  SchurFactors() = default;
  explicit SchurFactors(BlockOp n);

  BlockShape shape() const { return op_.shape(); }
  const BlockOp& op() const { return op_; }
  const BandMatrix& complement() const { return complement_; }

  BlockVec solve(const BlockVec& rhs) const;
  BlockVec solve_transpose(const BlockVec& rhs) const;

 private:
  BlockOp op_;
  BandLU yy_lu_;
  BandMatrix complement_;
  BandLU complement_lu_;
};

BlockVec schur_solve(const BlockOp& n, const BlockVec& rhs);
BlockVec schur_solve_transpose(const BlockOp& n, const BlockVec& rhs);

}  // namespace padj
