#include "padj/blockla.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace padj {

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("dot: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

double norm_inf(std::span<const double> a) {
  double m = 0.0;
  for (double v : a) m = std::max(m, std::abs(v));
  return m;
}

// ---------------------------------------------------------------------------
// BlockVec

BlockVec::BlockVec(BlockShape shape, double fill) : x_(shape.nx, fill), y_(shape.ny, fill) {}

BlockVec::BlockVec(Vector x, Vector y) : x_(std::move(x)), y_(std::move(y)) {}

Vector BlockVec::flatten() const {
  Vector out;
  out.reserve(size());
  out.insert(out.end(), x_.begin(), x_.end());
  out.insert(out.end(), y_.begin(), y_.end());
  return out;
}

BlockVec BlockVec::unflatten(BlockShape shape, std::span<const double> flat) {
  if (flat.size() != shape.size()) throw std::invalid_argument("unflatten: length mismatch");
  return {Vector(flat.begin(), flat.begin() + static_cast<std::ptrdiff_t>(shape.nx)),
          Vector(flat.begin() + static_cast<std::ptrdiff_t>(shape.nx), flat.end())};
}

void require_shape(const BlockVec& v, BlockShape shape, const char* what) {
  if (v.shape() != shape) {
    std::ostringstream os;
    os << what << ": block shape (" << v.shape().nx << ", " << v.shape().ny << ") does not match ("
       << shape.nx << ", " << shape.ny << ")";
    throw std::invalid_argument(os.str());
  }
}

BlockVec& BlockVec::operator+=(const BlockVec& o) { return axpy(1.0, o); }
BlockVec& BlockVec::operator-=(const BlockVec& o) { return axpy(-1.0, o); }

BlockVec& BlockVec::operator*=(double s) {
  for (double& v : x_) v *= s;
  for (double& v : y_) v *= s;
  return *this;
}

BlockVec& BlockVec::axpy(double s, const BlockVec& o) {
  require_shape(o, shape(), "BlockVec arithmetic");
  for (std::size_t i = 0; i < x_.size(); ++i) x_[i] += s * o.x_[i];
  for (std::size_t i = 0; i < y_.size(); ++i) y_[i] += s * o.y_[i];
  return *this;
}

bool BlockVec::all_finite() const {
  auto finite = [](double v) { return std::isfinite(v); };
  return std::all_of(x_.begin(), x_.end(), finite) && std::all_of(y_.begin(), y_.end(), finite);
}

double dot(const BlockVec& a, const BlockVec& b) {
  require_shape(b, a.shape(), "dot");
  return dot(a.x(), b.x()) + dot(a.y(), b.y());
}

double norm2(const BlockVec& a) { return std::sqrt(dot(a, a)); }

double norm_inf(const BlockVec& a) { return std::max(norm_inf(a.x()), norm_inf(a.y())); }

// ---------------------------------------------------------------------------
// BandMatrix

BandMatrix::BandMatrix(std::size_t rows, std::size_t cols, std::size_t lower, std::size_t upper)
    : rows_(rows),
      cols_(cols),
      lower_(rows ? std::min(lower, rows - 1) : 0),
      upper_(cols ? std::min(upper, cols - 1) : 0),
      data_(rows * (lower_ + upper_ + 1), 0.0) {}

BandMatrix BandMatrix::identity(std::size_t n) {
  BandMatrix m(n, n, 0, 0);
  for (std::size_t i = 0; i < n; ++i) m.at(i, i) = 1.0;
  return m;
}

BandMatrix BandMatrix::diagonal(std::span<const double> d) {
  BandMatrix m(d.size(), d.size(), 0, 0);
  for (std::size_t i = 0; i < d.size(); ++i) m.at(i, i) = d[i];
  return m;
}

BandMatrix BandMatrix::dense(std::size_t rows, std::size_t cols) {
  return {rows, cols, rows ? rows - 1 : 0, cols ? cols - 1 : 0};
}

double BandMatrix::get(std::size_t i, std::size_t j) const {
  return in_band(i, j) ? at(i, j) : 0.0;
}

void BandMatrix::set(std::size_t i, std::size_t j, double v) {
  if (i >= rows_ || j >= cols_ || !in_band(i, j)) {
    throw std::out_of_range("BandMatrix::set outside band");
  }
  at(i, j) = v;
}

void BandMatrix::apply(std::span<const double> v, std::span<double> out) const {
  std::fill(out.begin(), out.end(), 0.0);
  apply_add(1.0, v, out);
}

void BandMatrix::apply_transpose(std::span<const double> w, std::span<double> out) const {
  std::fill(out.begin(), out.end(), 0.0);
  apply_transpose_add(1.0, w, out);
}

Vector BandMatrix::apply(std::span<const double> v) const {
  Vector out(rows_);
  apply(v, out);
  return out;
}

Vector BandMatrix::apply_transpose(std::span<const double> w) const {
  Vector out(cols_);
  apply_transpose(w, out);
  return out;
}

void BandMatrix::apply_add(double alpha, std::span<const double> v, std::span<double> out) const {
  if (v.size() != cols_ || out.size() != rows_) {
    throw std::invalid_argument("BandMatrix::apply: dimension mismatch");
  }
  for (std::size_t i = 0; i < rows_; ++i) {
    double s = 0.0;
    for (std::size_t j = row_begin(i); j < row_end(i); ++j) s += at(i, j) * v[j];
    out[i] += alpha * s;
  }
}

void BandMatrix::apply_transpose_add(double alpha, std::span<const double> w,
                                     std::span<double> out) const {
  if (w.size() != rows_ || out.size() != cols_) {
    throw std::invalid_argument("BandMatrix::apply_transpose: dimension mismatch");
  }
  for (std::size_t i = 0; i < rows_; ++i) {
    const double wi = alpha * w[i];
    for (std::size_t j = row_begin(i); j < row_end(i); ++j) out[j] += at(i, j) * wi;
  }
}

BandMatrix BandMatrix::transposed() const {
  BandMatrix t(cols_, rows_, upper_, lower_);
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t j = row_begin(i); j < row_end(i); ++j) t.at(j, i) = at(i, j);
  return t;
}

BandMatrix BandMatrix::scaled(double s) const {
  BandMatrix m = *this;
  for (double& v : m.data_) v *= s;
  return m;
}

BandMatrix BandMatrix::widened(std::size_t lower, std::size_t upper) const {
  BandMatrix m(rows_, cols_, std::max(lower, lower_), std::max(upper, upper_));
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t j = row_begin(i); j < row_end(i); ++j) m.at(i, j) = at(i, j);
  return m;
}

Vector BandMatrix::to_dense() const {
  Vector d(rows_ * cols_, 0.0);
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t j = row_begin(i); j < row_end(i); ++j) d[i * cols_ + j] = at(i, j);
  return d;
}

BandMatrix BandMatrix::plus(const BandMatrix& o, double s) const {
  if (o.rows_ != rows_ || o.cols_ != cols_) {
    throw std::invalid_argument("BandMatrix::plus: dimension mismatch");
  }
  BandMatrix m = widened(o.lower_, o.upper_);
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t j = o.row_begin(i); j < o.row_end(i); ++j) m.at(i, j) += s * o.at(i, j);
  return m;
}

BandMatrix BandMatrix::times(const BandMatrix& o) const {
  if (cols_ != o.rows_) throw std::invalid_argument("BandMatrix::times: dimension mismatch");
  BandMatrix m(rows_, o.cols_, lower_ + o.lower_, upper_ + o.upper_);
  for (std::size_t i = 0; i < rows_; ++i) {
    for (std::size_t k = row_begin(i); k < row_end(i); ++k) {
      const double aik = at(i, k);
      if (aik == 0.0) continue;
      for (std::size_t j = o.row_begin(k); j < o.row_end(k); ++j) m.at(i, j) += aik * o.at(k, j);
    }
  }
  return m;
}

// ---------------------------------------------------------------------------
// BandLU

BandLU::BandLU(const BandMatrix& a)
    : n_(a.rows()), kl_(a.lower()), ku_(a.upper() + a.lower()), piv_(a.rows()) {
  if (a.rows() != a.cols()) throw std::invalid_argument("BandLU: matrix must be square");
  if (n_ > 0) ku_ = std::min(ku_, n_ - 1);
  width_ = kl_ + ku_ + 1;
  data_.assign(n_ * width_, 0.0);
  for (std::size_t i = 0; i < n_; ++i)
    for (std::size_t j = a.row_begin(i); j < a.row_end(i); ++j) lu(i, j) = a.at(i, j);

  for (std::size_t k = 0; k < n_; ++k) {
    const std::size_t last_row = std::min(n_ - 1, k + kl_);
    const std::size_t last_col = std::min(n_ - 1, k + ku_);
    std::size_t p = k;
    double best = std::abs(lu(k, k));
    for (std::size_t r = k + 1; r <= last_row; ++r) {
      if (std::abs(lu(r, k)) > best) {
        best = std::abs(lu(r, k));
        p = r;
      }
    }
    piv_[k] = p;
    if (best == 0.0) throw SingularMatrixError("BandLU: zero pivot", k);
    if (p != k) {
      for (std::size_t j = k; j <= last_col; ++j) std::swap(lu(k, j), lu(p, j));
    }
    const double inv_pivot = 1.0 / lu(k, k);
    for (std::size_t r = k + 1; r <= last_row; ++r) {
      double& l = lu(r, k);
      if (l == 0.0) continue;
      l *= inv_pivot;
      for (std::size_t j = k + 1; j <= last_col; ++j) lu(r, j) -= l * lu(k, j);
    }
  }
}

void BandLU::solve_in_place(std::span<double> b) const {
  if (b.size() != n_) throw std::invalid_argument("BandLU::solve: dimension mismatch");
  for (std::size_t k = 0; k < n_; ++k) {
    if (piv_[k] != k) std::swap(b[k], b[piv_[k]]);
    const std::size_t last_row = std::min(n_ - 1, k + kl_);
    for (std::size_t r = k + 1; r <= last_row; ++r) b[r] -= lu(r, k) * b[k];
  }
  for (std::size_t k = n_; k-- > 0;) {
    const std::size_t last_col = std::min(n_ - 1, k + ku_);
    double s = b[k];
    for (std::size_t j = k + 1; j <= last_col; ++j) s -= lu(k, j) * b[j];
    b[k] = s / lu(k, k);
  }
}

void BandLU::solve_transpose_in_place(std::span<double> b) const {
  if (b.size() != n_) throw std::invalid_argument("BandLU::solve_transpose: dimension mismatch");
  // U^T y = b
  for (std::size_t k = 0; k < n_; ++k) {
    const std::size_t first = k > ku_ ? k - ku_ : 0;
    double s = b[k];
    for (std::size_t i = first; i < k; ++i) s -= lu(i, k) * b[i];
    b[k] = s / lu(k, k);
  }
  // L^T with interchanges in reverse order
  for (std::size_t k = n_; k-- > 0;) {
    const std::size_t last_row = std::min(n_ - 1, k + kl_);
    double s = b[k];
    for (std::size_t r = k + 1; r <= last_row; ++r) s -= lu(r, k) * b[r];
    b[k] = s;
    if (piv_[k] != k) std::swap(b[k], b[piv_[k]]);
  }
}

Vector BandLU::solve(std::span<const double> b) const {
  Vector x(b.begin(), b.end());
  solve_in_place(x);
  return x;
}

Vector BandLU::solve_transpose(std::span<const double> b) const {
  Vector x(b.begin(), b.end());
  solve_transpose_in_place(x);
  return x;
}

// ---------------------------------------------------------------------------
// BlockOp

BlockOp BlockOp::identity(BlockShape s) {
  return {BandMatrix::identity(s.nx), BandMatrix::zeros(s.nx, s.ny), BandMatrix::zeros(s.ny, s.nx),
          BandMatrix::identity(s.ny)};
}

BlockOp BlockOp::zeros(BlockShape s) {
  return {BandMatrix::zeros(s.nx, s.nx), BandMatrix::zeros(s.nx, s.ny),
          BandMatrix::zeros(s.ny, s.nx), BandMatrix::zeros(s.ny, s.ny)};
}

void BlockOp::validate() const {
  const std::size_t nx = xx.rows();
  const std::size_t ny = yy.rows();
  if (xx.cols() != nx || yy.cols() != ny || xy.rows() != nx || xy.cols() != ny ||
      yx.rows() != ny || yx.cols() != nx) {
    throw std::invalid_argument("BlockOp: inconsistent block dimensions");
  }
}

BlockVec BlockOp::apply(const BlockVec& v) const {
  require_shape(v, shape(), "BlockOp::apply");
  BlockVec out(shape());
  xx.apply_add(1.0, v.x(), out.x());
  xy.apply_add(1.0, v.y(), out.x());
  yx.apply_add(1.0, v.x(), out.y());
  yy.apply_add(1.0, v.y(), out.y());
  return out;
}

BlockVec BlockOp::apply_transpose(const BlockVec& w) const {
  require_shape(w, shape(), "BlockOp::apply_transpose");
  BlockVec out(shape());
  xx.apply_transpose_add(1.0, w.x(), out.x());
  yx.apply_transpose_add(1.0, w.y(), out.x());
  xy.apply_transpose_add(1.0, w.x(), out.y());
  yy.apply_transpose_add(1.0, w.y(), out.y());
  return out;
}

BlockOp BlockOp::transposed() const {
  return {xx.transposed(), yx.transposed(), xy.transposed(), yy.transposed()};
}

BlockOp BlockOp::plus(const BlockOp& o, double s) const {
  return {xx.plus(o.xx, s), xy.plus(o.xy, s), yx.plus(o.yx, s), yy.plus(o.yy, s)};
}

BlockOp BlockOp::scaled(double s) const {
  return {xx.scaled(s), xy.scaled(s), yx.scaled(s), yy.scaled(s)};
}

Vector BlockOp::to_dense() const {
  const std::size_t nx = xx.rows();
  const std::size_t n = nx + yy.rows();
  Vector d(n * n, 0.0);
  auto put = [&](const BandMatrix& m, std::size_t r0, std::size_t c0) {
    for (std::size_t i = 0; i < m.rows(); ++i)
      for (std::size_t j = m.row_begin(i); j < m.row_end(i); ++j)
        d[(r0 + i) * n + (c0 + j)] = m.at(i, j);
  };
  put(xx, 0, 0);
  put(xy, 0, nx);
  put(yx, nx, 0);
  put(yy, nx, nx);
  return d;
}

// ---------------------------------------------------------------------------
// Schur complement

namespace {

const char* block_name(SchurBlock b) {
  return b == SchurBlock::yy ? "N_yy" : "Schur complement N_xx - N_xy N_yy^-1 N_yx";
}

BandLU factor_block(const BandMatrix& m, SchurBlock which) {
  try {
    return BandLU(m);
  } catch (const SingularMatrixError& e) {
    throw SingularBlockError(which, e.pivot());
  }
}

}  // namespace

SingularBlockError::SingularBlockError(SchurBlock block, std::size_t pivot)
    : std::runtime_error(std::string("singular ") + block_name(block) + " at pivot " +
                         std::to_string(pivot)),
      block_(block),
      pivot_(pivot) {}

SchurFactors::SchurFactors(BlockOp n) : op_(std::move(n)) {
  op_.validate();
  const std::size_t nx = op_.xx.rows();
  const std::size_t ny = op_.yy.rows();
  yy_lu_ = factor_block(op_.yy, SchurBlock::yy);

  // Z = N_yy^-1 N_yx, banded only when N_yy is diagonal.
  BandMatrix z;
  if (op_.yy.is_diagonal()) {
    z = op_.yx;
    for (std::size_t i = 0; i < ny; ++i) {
      const double d = op_.yy.at(i, i);
      for (std::size_t j = z.row_begin(i); j < z.row_end(i); ++j) z.at(i, j) /= d;
    }
  } else {
    z = BandMatrix::dense(ny, nx);
    Vector col(ny);
    for (std::size_t j = 0; j < nx; ++j) {
      for (std::size_t i = 0; i < ny; ++i) col[i] = op_.yx.get(i, j);
      yy_lu_.solve_in_place(col);
      for (std::size_t i = 0; i < ny; ++i) z.at(i, j) = col[i];
    }
  }
  complement_ = ny ? op_.xx.plus(op_.xy.times(z), -1.0) : op_.xx;
  complement_lu_ = factor_block(complement_, SchurBlock::schur_complement);
}

BlockVec SchurFactors::solve(const BlockVec& rhs) const {
  require_shape(rhs, shape(), "schur_solve");
  // [I, -N_xy N_yy^-1; 0, I]
  Vector w = yy_lu_.solve(rhs.y());
  Vector a = rhs.x();
  op_.xy.apply_add(-1.0, w, a);
  // diag(S^-1, N_yy^-1)
  complement_lu_.solve_in_place(a);
  // [I, 0; -N_yy^-1 N_yx, I]
  Vector b = rhs.y();
  op_.yx.apply_add(-1.0, a, b);
  yy_lu_.solve_in_place(b);
  return {std::move(a), std::move(b)};
}

BlockVec SchurFactors::solve_transpose(const BlockVec& rhs) const {
  require_shape(rhs, shape(), "schur_solve_transpose");
  // [I, -N_yx^T N_yy^-T; 0, I]
  Vector w = yy_lu_.solve_transpose(rhs.y());
  Vector a = rhs.x();
  op_.yx.apply_transpose_add(-1.0, w, a);
  // diag(S^-T, N_yy^-T)
  complement_lu_.solve_transpose_in_place(a);
  // [I, 0; -N_yy^-T N_xy^T, I]
  Vector b = rhs.y();
  op_.xy.apply_transpose_add(-1.0, a, b);
  yy_lu_.solve_transpose_in_place(b);
  return {std::move(a), std::move(b)};
}

BlockVec schur_solve(const BlockOp& n, const BlockVec& rhs) { return SchurFactors(n).solve(rhs); }

BlockVec schur_solve_transpose(const BlockOp& n, const BlockVec& rhs) {
  return SchurFactors(n).solve_transpose(rhs);
}

}  // namespace padj
