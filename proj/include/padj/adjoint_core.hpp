#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "padj/blockla.hpp"
#include "padj/pairing.hpp"

namespace padj {

/// Argument slots of a partitioned vector field F(t1, u1; t2, u2). The
/// semi-implicit scheme lags the first slot and solves for the second.
enum class Slot { first, second };

/// Evaluation point (t1, u1; t2, u2) of a partitioned field.
struct FieldPoint {
  double t1;
  const BlockVec& u1;
  double t2;
  const BlockVec& u2;

  /// The point (t, u; t, u) on the diagonal.
  static FieldPoint diagonal(double t, const BlockVec& u) { return {t, u, t, u}; }
};

/// Coupled vector field split into a lagged and an implicit argument. On the
/// diagonal it agrees with the underlying f(t, u).
///
/// A field may carry a constant mass matrix M, in which case value() returns
/// the weak form F and the dynamics are M du/dt = F(t, u). Derivative actions
/// always refer to F.
class PartitionedField {
 public:
  virtual ~PartitionedField() = default;

  virtual BlockShape shape() const = 0;
  virtual BlockVec value(const FieldPoint& at) const = 0;
  /// D_slot F · du
  virtual BlockVec jvp(Slot slot, const FieldPoint& at, const BlockVec& du) const = 0;
  /// [D_slot F]^T · w
  virtual BlockVec vjp(Slot slot, const FieldPoint& at, const BlockVec& w) const = 0;
  /// Explicit block Jacobian of one slot. The default densifies jvp columns,
  /// which is only meant for small test problems.
  virtual BlockOp jacobian(Slot slot, const FieldPoint& at) const;
  /// nullptr means M = I.
  virtual const PairingMap* mass() const { return nullptr; }
};

/// Field assembled from callables; used for test models and small examples.
class FunctionalField final : public PartitionedField {
 public:
  using ValueFn = std::function<BlockVec(const FieldPoint&)>;
  using ActionFn = std::function<BlockVec(const FieldPoint&, const BlockVec&)>;

  struct Parts {
    BlockShape shape;
    ValueFn value;
    ActionFn jvp_first, jvp_second;
    ActionFn vjp_first, vjp_second;
    std::shared_ptr<const PairingMap> mass;
  };

  explicit FunctionalField(Parts parts);

  BlockShape shape() const override { return parts_.shape; }
  BlockVec value(const FieldPoint& at) const override;
  BlockVec jvp(Slot slot, const FieldPoint& at, const BlockVec& du) const override;
  BlockVec vjp(Slot slot, const FieldPoint& at, const BlockVec& w) const override;
  const PairingMap* mass() const override { return parts_.mass.get(); }

 private:
  Parts parts_;
};

/// F(t1, u1; t2, u2) = A1 u1 + A2 u2 (+ optional mass matrix).
class LinearSplitField final : public PartitionedField {
 public:
  LinearSplitField(BlockOp lagged, BlockOp implicit_part,
                   std::shared_ptr<const PairingMap> mass = nullptr);

  BlockShape shape() const override { return a1_.shape(); }
  BlockVec value(const FieldPoint& at) const override;
  BlockVec jvp(Slot slot, const FieldPoint& at, const BlockVec& du) const override;
  BlockVec vjp(Slot slot, const FieldPoint& at, const BlockVec& w) const override;
  BlockOp jacobian(Slot slot, const FieldPoint&) const override {
    return slot == Slot::first ? a1_ : a2_;
  }
  const PairingMap* mass() const override { return mass_.get(); }

 private:
  BlockOp a1_;
  BlockOp a2_;
  std::shared_ptr<const PairingMap> mass_;
};

/// Costate together with its time stamp.
struct AdjointState {
  BlockVec p;
  double t = 0.0;
};

/// f(t, u) = M^-1 F(t, u; t, u).
BlockVec field_rhs(const PartitionedField& field, double t, const BlockVec& u);
/// Df(t, u) du on the diagonal.
BlockVec variational_rhs(const PartitionedField& field, double t, const BlockVec& u,
                         const BlockVec& du);
/// [Df(t, u)]^T w on the diagonal.
BlockVec jacobian_transpose_action(const PartitionedField& field, double t, const BlockVec& u,
                                   const BlockVec& w);
/// -[Df(t, u)]^T p, the right-hand side of the canonical adjoint equation.
BlockVec canonical_adjoint_rhs(const PartitionedField& field, double t, const BlockVec& u,
                               const BlockVec& p);

/// <p_n, du_n>_P - <p_0, du_0>_P for each index n. A null pairing means the
/// standard pairing.
std::vector<double> pairing_drift(const std::vector<BlockVec>& p_series,
                                  const std::vector<BlockVec>& du_series,
                                  const PairingMap* pairing = nullptr);

}  // namespace padj
