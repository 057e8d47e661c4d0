#pragma once

#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "padj/adjoint_core.hpp"

namespace padj {

// ---------------------------------------------------------------------------
// Fiberwise pairings u -> P(u)

class FiberPairing {
 public:
  virtual ~FiberPairing() = default;

  virtual BlockShape shape() const = 0;
  virtual std::shared_ptr<const PairingMap> p_at(const BlockVec& u) const = 0;
  /// [DP(u) v] w
  virtual BlockVec dp_action(const BlockVec& u, const BlockVec& v, const BlockVec& w) const = 0;
  /// [DP(u) v]^T q
  virtual BlockVec dp_action_transpose(const BlockVec& u, const BlockVec& v,
                                       const BlockVec& q) const = 0;
};

class ConstantFiberPairing final : public FiberPairing {
 public:
  explicit ConstantFiberPairing(std::shared_ptr<const PairingMap> p) : p_(std::move(p)) {}

  BlockShape shape() const override { return p_->shape(); }
  std::shared_ptr<const PairingMap> p_at(const BlockVec&) const override { return p_; }
  BlockVec dp_action(const BlockVec&, const BlockVec&, const BlockVec& w) const override {
    return BlockVec(w.shape());
  }
  BlockVec dp_action_transpose(const BlockVec&, const BlockVec&,
                               const BlockVec& q) const override {
    return BlockVec(q.shape());
  }

 private:
  std::shared_ptr<const PairingMap> p_;
};

/// P(u) = diag(d(u)), with the directional derivative of d supplied separately.
class DiagonalFiberPairing final : public FiberPairing {
 public:
  using DiagFn = std::function<BlockVec(const BlockVec&)>;
  using DiagDerivFn = std::function<BlockVec(const BlockVec& u, const BlockVec& v)>;

  DiagonalFiberPairing(BlockShape shape, DiagFn diag, DiagDerivFn diag_derivative)
      : shape_(shape), diag_(std::move(diag)), ddiag_(std::move(diag_derivative)) {}

  BlockShape shape() const override { return shape_; }
  std::shared_ptr<const PairingMap> p_at(const BlockVec& u) const override;
  BlockVec dp_action(const BlockVec& u, const BlockVec& v, const BlockVec& w) const override;
  BlockVec dp_action_transpose(const BlockVec& u, const BlockVec& v,
                               const BlockVec& q) const override {
    return dp_action(u, v, q);
  }

 private:
  BlockShape shape_;
  DiagFn diag_;
  DiagDerivFn ddiag_;
};

/// Dense Christoffel table, gamma[nu][g][beta] = sum_a Pinv(a, nu) d_g P(beta, a).
struct ChristoffelTable {
  std::size_t n = 0;
  std::vector<double> values;

  double operator()(std::size_t nu, std::size_t g, std::size_t beta) const {
    return values[(nu * n + g) * n + beta];
  }
};

inline constexpr std::size_t kMaxChristoffelDim = 16;

ChristoffelTable christoffel(const FiberPairing& pu, const BlockVec& u);

/// Contraction Gamma(u) . f . xi, i.e. P(u)^-T [DP(u) f]^T xi.
BlockVec connection_term(const FiberPairing& pu, const BlockVec& u, const BlockVec& f,
                         const BlockVec& xi);

// ---------------------------------------------------------------------------
// State transforms u~ = L(u)

class TransformError : public std::runtime_error {
 public:
  TransformError(const std::string& what, BlockVec at)
      : std::runtime_error(what), at_(std::move(at)) {}
  const BlockVec& at() const { return at_; }

 private:
  BlockVec at_;
};

class StateTransform {
 public:
  virtual ~StateTransform() = default;

  virtual BlockShape shape() const = 0;
  virtual BlockVec forward(const BlockVec& u) const = 0;
  virtual BlockVec inverse(const BlockVec& ut) const = 0;
  /// DL(u) v
  virtual BlockVec d_forward(const BlockVec& u, const BlockVec& v) const = 0;
  /// DL(u)^T w
  virtual BlockVec d_forward_transpose(const BlockVec& u, const BlockVec& w) const = 0;
  /// (D^2 L(u) v) w
  virtual BlockVec d2_forward(const BlockVec& u, const BlockVec& v, const BlockVec& w) const = 0;
  /// (D^2 L(u) v)^T q
  virtual BlockVec d2_forward_transpose(const BlockVec& u, const BlockVec& v,
                                        const BlockVec& q) const = 0;

  /// Dense DL(u) on flattened coordinates, built column by column.
  virtual BandMatrix jacobian(const BlockVec& u) const;
  /// DL(u)^-1 y and DL(u)^-T y.
  BlockVec d_forward_solve(const BlockVec& u, const BlockVec& y) const;
  BlockVec d_forward_solve_transpose(const BlockVec& u, const BlockVec& y) const;
};

/// L(u) = A u.
class LinearTransform final : public StateTransform {
 public:
  explicit LinearTransform(BlockOp a) : factors_(std::move(a)) {}

  BlockShape shape() const override { return factors_.shape(); }
  BlockVec forward(const BlockVec& u) const override { return factors_.op().apply(u); }
  BlockVec inverse(const BlockVec& ut) const override { return factors_.solve(ut); }
  BlockVec d_forward(const BlockVec&, const BlockVec& v) const override {
    return factors_.op().apply(v);
  }
  BlockVec d_forward_transpose(const BlockVec&, const BlockVec& w) const override {
    return factors_.op().apply_transpose(w);
  }
  BlockVec d2_forward(const BlockVec&, const BlockVec&, const BlockVec& w) const override {
    return BlockVec(w.shape());
  }
  BlockVec d2_forward_transpose(const BlockVec&, const BlockVec&,
                                const BlockVec& q) const override {
    return BlockVec(q.shape());
  }

 private:
  SchurFactors factors_;
};

/// Transform assembled from callables. Without an explicit inverse, L^-1 is
/// evaluated by Newton's method started from u~.
class FunctionalTransform final : public StateTransform {
 public:
  using MapFn = std::function<BlockVec(const BlockVec&)>;
  using ActionFn = std::function<BlockVec(const BlockVec&, const BlockVec&)>;
  using Action2Fn = std::function<BlockVec(const BlockVec&, const BlockVec&, const BlockVec&)>;

  struct Parts {
    BlockShape shape;
    MapFn forward;
    MapFn inverse;  // optional
    ActionFn d_forward, d_forward_transpose;
    Action2Fn d2_forward, d2_forward_transpose;
  };

  explicit FunctionalTransform(Parts parts);

  BlockShape shape() const override { return parts_.shape; }
  BlockVec forward(const BlockVec& u) const override { return parts_.forward(u); }
  BlockVec inverse(const BlockVec& ut) const override;
  BlockVec d_forward(const BlockVec& u, const BlockVec& v) const override {
    return parts_.d_forward(u, v);
  }
  BlockVec d_forward_transpose(const BlockVec& u, const BlockVec& w) const override {
    return parts_.d_forward_transpose(u, w);
  }
  BlockVec d2_forward(const BlockVec& u, const BlockVec& v, const BlockVec& w) const override {
    return parts_.d2_forward(u, v, w);
  }
  BlockVec d2_forward_transpose(const BlockVec& u, const BlockVec& v,
                                const BlockVec& q) const override {
    return parts_.d2_forward_transpose(u, v, q);
  }

 private:
  Parts parts_;
};

/// Solve L(u) = ut by Newton's method with dense LU on DL.
BlockVec newton_inverse(const StateTransform& l, const BlockVec& ut, const BlockVec& guess,
                        double tol = 1e-14, int max_iter = 60);

/// Field whose diagonal value is DL(L^-1(u~)) f(t, L^-1(u~)). Off the
/// diagonal the outer DL is taken at the slot-2 state.
class TransformedField final : public PartitionedField {
 public:
  TransformedField(std::shared_ptr<const StateTransform> l,
                   std::shared_ptr<const PartitionedField> field);

  BlockShape shape() const override { return field_->shape(); }
  BlockVec value(const FieldPoint& at) const override;
  BlockVec jvp(Slot slot, const FieldPoint& at, const BlockVec& du) const override;
  BlockVec vjp(Slot slot, const FieldPoint& at, const BlockVec& w) const override;

 private:
  BlockVec inner_rhs(const FieldPoint& at, const BlockVec& u1, const BlockVec& u2) const;

  std::shared_ptr<const StateTransform> l_;
  std::shared_ptr<const PartitionedField> field_;
};

std::shared_ptr<TransformedField> transform_state_dynamics(
    std::shared_ptr<const StateTransform> l, std::shared_ptr<const PartitionedField> field);

/// -DL^-T [Df]^T DL^T p~ - DL^-T (D^2L(u) f)^T p~ with u = L^-1(u~).
BlockVec state_transform_adjoint_rhs(const StateTransform& l, const PartitionedField& field,
                                     double t, const BlockVec& ut, const BlockVec& pt);

// ---------------------------------------------------------------------------
// Mass matrix form: d(M u)/dt = F, d(M^T p~)/dt = -[DF]^T p~

class MassMatrixSystem {
 public:
  MassMatrixSystem(std::shared_ptr<const PairingMap> m,
                   std::shared_ptr<const PartitionedField> big_f);

  /// u' = M^-1 F(t, u)
  BlockVec state_rhs(double t, const BlockVec& u) const;
  /// p~' = -M^-T [DF]^T p~
  BlockVec adjoint_rhs(double t, const BlockVec& u, const BlockVec& pt) const;
  /// p~(T) = M^-T DC
  BlockVec terminal_costate(const BlockVec& dc) const { return m_->solve_transpose(dc); }
  /// Canonical costate p = M^T p~.
  BlockVec canonical_costate(const BlockVec& pt) const { return m_->apply_transpose(pt); }
  /// The weak-form field carrying M, for use with the time integrator.
  std::shared_ptr<const PartitionedField> field() const { return with_mass_; }

 private:
  std::shared_ptr<const PairingMap> m_;
  std::shared_ptr<const PartitionedField> big_f_;
  std::shared_ptr<const PartitionedField> with_mass_;
};

MassMatrixSystem mass_matrix_adjoint_system(std::shared_ptr<const PairingMap> m,
                                            std::shared_ptr<const PartitionedField> big_f);

// ---------------------------------------------------------------------------
// Pairing preconditioning

/// -P^-T [Df]^T P^T xi
BlockVec pairing_precondition_adjoint_rhs(const PairingMap& p, const PartitionedField& field,
                                          double t, const BlockVec& u, const BlockVec& xi);

/// -P(u)^-T [Df]^T P(u)^T xi - P(u)^-T [DP(u) f]^T xi
BlockVec fiberwise_precondition_adjoint_rhs(const FiberPairing& pu, const PartitionedField& field,
                                            double t, const BlockVec& u, const BlockVec& xi);

/// dxi/dt + Gamma(u) f xi + [Df]^{*P(u)} xi
BlockVec covariant_adjoint_residual(const FiberPairing& pu, const PartitionedField& field,
                                    double t, const BlockVec& u, const BlockVec& xi,
                                    const BlockVec& dxi_dt);

/// diag(scale_x I, scale_y I)
std::shared_ptr<const DiagonalPairing> build_scale_preconditioner(BlockShape shape, double scale_x,
                                                                  double scale_y);

}  // namespace padj
