#include "padj/adjoint_core.hpp"

#include <stdexcept>

namespace padj {

// ---------------------------------------------------------------------------
// Pairings

DiagonalPairing::DiagonalPairing(BlockVec diagonal) : diag_(std::move(diagonal)) {
  for (std::size_t i = 0; i < diag_.size(); ++i) {
    if (diag_[i] == 0.0) {
      throw SingularMatrixError("DiagonalPairing: zero diagonal entry", i);
    }
  }
}

BlockVec DiagonalPairing::apply(const BlockVec& v) const {
  require_shape(v, shape(), "DiagonalPairing::apply");
  BlockVec out = v;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= diag_[i];
  return out;
}

BlockVec DiagonalPairing::solve(const BlockVec& v) const {
  require_shape(v, shape(), "DiagonalPairing::solve");
  BlockVec out = v;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] /= diag_[i];
  return out;
}

BlockOp DiagonalPairing::matrix() const {
  const BlockShape s = shape();
  return {BandMatrix::diagonal(diag_.x()), BandMatrix::zeros(s.nx, s.ny),
          BandMatrix::zeros(s.ny, s.nx), BandMatrix::diagonal(diag_.y())};
}

BlockOpPairing::BlockOpPairing(BlockOp p) : factors_(std::move(p)) {}

// ---------------------------------------------------------------------------
// PartitionedField

BlockOp PartitionedField::jacobian(Slot slot, const FieldPoint& at) const {
  const BlockShape s = shape();
  BlockOp j{BandMatrix::dense(s.nx, s.nx), BandMatrix::dense(s.nx, s.ny),
            BandMatrix::dense(s.ny, s.nx), BandMatrix::dense(s.ny, s.ny)};
  BlockVec e(s);
  for (std::size_t c = 0; c < s.size(); ++c) {
    e[c] = 1.0;
    const BlockVec col = jvp(slot, at, e);
    e[c] = 0.0;
    for (std::size_t r = 0; r < s.nx; ++r) {
      if (c < s.nx) j.xx.at(r, c) = col.x()[r];
      else j.xy.at(r, c - s.nx) = col.x()[r];
    }
    for (std::size_t r = 0; r < s.ny; ++r) {
      if (c < s.nx) j.yx.at(r, c) = col.y()[r];
      else j.yy.at(r, c - s.nx) = col.y()[r];
    }
  }
  return j;
}

FunctionalField::FunctionalField(Parts parts) : parts_(std::move(parts)) {
  if (!parts_.value || !parts_.jvp_first || !parts_.jvp_second || !parts_.vjp_first ||
      !parts_.vjp_second) {
    throw std::invalid_argument("FunctionalField: every callable must be provided");
  }
  if (parts_.mass && parts_.mass->shape() != parts_.shape) {
    throw std::invalid_argument("FunctionalField: mass matrix shape mismatch");
  }
}

BlockVec FunctionalField::value(const FieldPoint& at) const {
  require_shape(at.u1, parts_.shape, "field value (slot 1)");
  require_shape(at.u2, parts_.shape, "field value (slot 2)");
  return parts_.value(at);
}

BlockVec FunctionalField::jvp(Slot slot, const FieldPoint& at, const BlockVec& du) const {
  require_shape(du, parts_.shape, "field jvp");
  return slot == Slot::first ? parts_.jvp_first(at, du) : parts_.jvp_second(at, du);
}

BlockVec FunctionalField::vjp(Slot slot, const FieldPoint& at, const BlockVec& w) const {
  require_shape(w, parts_.shape, "field vjp");
  return slot == Slot::first ? parts_.vjp_first(at, w) : parts_.vjp_second(at, w);
}

LinearSplitField::LinearSplitField(BlockOp lagged, BlockOp implicit_part,
                                   std::shared_ptr<const PairingMap> mass)
    : a1_(std::move(lagged)), a2_(std::move(implicit_part)), mass_(std::move(mass)) {
  a1_.validate();
  a2_.validate();
  if (a1_.shape() != a2_.shape()) throw std::invalid_argument("LinearSplitField: shape mismatch");
  if (mass_ && mass_->shape() != a1_.shape()) {
    throw std::invalid_argument("LinearSplitField: mass matrix shape mismatch");
  }
}

BlockVec LinearSplitField::value(const FieldPoint& at) const {
  return a1_.apply(at.u1) + a2_.apply(at.u2);
}

BlockVec LinearSplitField::jvp(Slot slot, const FieldPoint&, const BlockVec& du) const {
  return slot == Slot::first ? a1_.apply(du) : a2_.apply(du);
}

BlockVec LinearSplitField::vjp(Slot slot, const FieldPoint&, const BlockVec& w) const {
  return slot == Slot::first ? a1_.apply_transpose(w) : a2_.apply_transpose(w);
}

// ---------------------------------------------------------------------------
// Canonical adjoint and variational right-hand sides

BlockVec field_rhs(const PartitionedField& field, double t, const BlockVec& u) {
  require_shape(u, field.shape(), "field_rhs");
  BlockVec big_f = field.value(FieldPoint::diagonal(t, u));
  return field.mass() ? field.mass()->solve(big_f) : big_f;
}

BlockVec variational_rhs(const PartitionedField& field, double t, const BlockVec& u,
                         const BlockVec& du) {
  require_shape(u, field.shape(), "variational_rhs (state)");
  require_shape(du, field.shape(), "variational_rhs (variation)");
  const FieldPoint at = FieldPoint::diagonal(t, u);
  BlockVec out = field.jvp(Slot::first, at, du) + field.jvp(Slot::second, at, du);
  return field.mass() ? field.mass()->solve(out) : out;
}

BlockVec jacobian_transpose_action(const PartitionedField& field, double t, const BlockVec& u,
                                   const BlockVec& w) {
  require_shape(u, field.shape(), "adjoint action (state)");
  require_shape(w, field.shape(), "adjoint action (costate)");
  const BlockVec q = field.mass() ? field.mass()->solve_transpose(w) : w;
  const FieldPoint at = FieldPoint::diagonal(t, u);
  return field.vjp(Slot::first, at, q) + field.vjp(Slot::second, at, q);
}

BlockVec canonical_adjoint_rhs(const PartitionedField& field, double t, const BlockVec& u,
                               const BlockVec& p) {
  return -jacobian_transpose_action(field, t, u, p);
}

std::vector<double> pairing_drift(const std::vector<BlockVec>& p_series,
                                  const std::vector<BlockVec>& du_series,
                                  const PairingMap* pairing) {
  if (p_series.size() != du_series.size()) {
    throw std::invalid_argument("pairing_drift: series length mismatch");
  }
  std::vector<double> drift;
  drift.reserve(p_series.size());
  double initial = 0.0;
  for (std::size_t n = 0; n < p_series.size(); ++n) {
    const double value =
        pairing ? pairing->pair(p_series[n], du_series[n]) : dot(p_series[n], du_series[n]);
    if (n == 0) initial = value;
    drift.push_back(value - initial);
  }
  return drift;
}

}  // namespace padj
