#include "padj/precond.hpp"

#include <cmath>
#include <sstream>

namespace padj {

namespace {

BlockVec basis(BlockShape s, std::size_t i) {
  BlockVec e(s);
  e[i] = 1.0;
  return e;
}

}  // namespace

// ---------------------------------------------------------------------------
// Fiberwise pairings

std::shared_ptr<const PairingMap> DiagonalFiberPairing::p_at(const BlockVec& u) const {
  require_shape(u, shape_, "DiagonalFiberPairing::p_at");
  return std::make_shared<DiagonalPairing>(diag_(u));
}

BlockVec DiagonalFiberPairing::dp_action(const BlockVec& u, const BlockVec& v,
                                         const BlockVec& w) const {
  require_shape(w, shape_, "DiagonalFiberPairing::dp_action");
  BlockVec out = ddiag_(u, v);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= w[i];
  return out;
}

ChristoffelTable christoffel(const FiberPairing& pu, const BlockVec& u) {
  const BlockShape s = pu.shape();
  const std::size_t n = s.size();
  if (n > kMaxChristoffelDim) {
    throw std::invalid_argument("christoffel: dense table limited to dimension 16");
  }
  const auto p = pu.p_at(u);
  ChristoffelTable table{n, std::vector<double>(n * n * n, 0.0)};
  for (std::size_t nu = 0; nu < n; ++nu) {
    const BlockVec col = p->solve(basis(s, nu));
    for (std::size_t g = 0; g < n; ++g) {
      const BlockVec d = pu.dp_action(u, basis(s, g), col);
      for (std::size_t beta = 0; beta < n; ++beta) table.values[(nu * n + g) * n + beta] = d[beta];
    }
  }
  return table;
}

BlockVec connection_term(const FiberPairing& pu, const BlockVec& u, const BlockVec& f,
                         const BlockVec& xi) {
  return pu.p_at(u)->solve_transpose(pu.dp_action_transpose(u, f, xi));
}

// ---------------------------------------------------------------------------
// State transforms

BandMatrix StateTransform::jacobian(const BlockVec& u) const {
  const BlockShape s = shape();
  const std::size_t n = s.size();
  BandMatrix j = BandMatrix::dense(n, n);
  for (std::size_t c = 0; c < n; ++c) {
    const BlockVec col = d_forward(u, basis(s, c));
    for (std::size_t r = 0; r < n; ++r) j.at(r, c) = col[r];
  }
  return j;
}

BlockVec StateTransform::d_forward_solve(const BlockVec& u, const BlockVec& y) const {
  return BlockVec::unflatten(shape(), BandLU(jacobian(u)).solve(y.flatten()));
}

BlockVec StateTransform::d_forward_solve_transpose(const BlockVec& u, const BlockVec& y) const {
  return BlockVec::unflatten(shape(), BandLU(jacobian(u)).solve_transpose(y.flatten()));
}

FunctionalTransform::FunctionalTransform(Parts parts) : parts_(std::move(parts)) {
  if (!parts_.forward || !parts_.d_forward || !parts_.d_forward_transpose ||
      !parts_.d2_forward || !parts_.d2_forward_transpose) {
    throw std::invalid_argument("FunctionalTransform: missing callable");
  }
}

BlockVec FunctionalTransform::inverse(const BlockVec& ut) const {
  if (parts_.inverse) return parts_.inverse(ut);
  return newton_inverse(*this, ut, ut);
}

BlockVec newton_inverse(const StateTransform& l, const BlockVec& ut, const BlockVec& guess,
                        double tol, int max_iter) {
  BlockVec u = guess;
  const double scale = std::max(norm_inf(ut), 1e-300);
  for (int it = 0; it < max_iter; ++it) {
    const BlockVec r = l.forward(u) - ut;
    if (!r.all_finite()) break;
    if (norm_inf(r) <= tol * scale) return u;
    try {
      u -= l.d_forward_solve(u, r);
    } catch (const SingularMatrixError&) {
      break;
    }
  }
  std::ostringstream os;
  os << "state transform inverse did not converge (|u~|_inf = " << norm_inf(ut) << ")";
  throw TransformError(os.str(), ut);
}

TransformedField::TransformedField(std::shared_ptr<const StateTransform> l,
                                   std::shared_ptr<const PartitionedField> field)
    : l_(std::move(l)), field_(std::move(field)) {
  if (l_->shape() != field_->shape()) {
    throw std::invalid_argument("transform_state_dynamics: shape mismatch");
  }
}

BlockVec TransformedField::inner_rhs(const FieldPoint& at, const BlockVec& u1,
                                     const BlockVec& u2) const {
  BlockVec big_f = field_->value({at.t1, u1, at.t2, u2});
  return field_->mass() ? field_->mass()->solve(big_f) : big_f;
}

BlockVec TransformedField::value(const FieldPoint& at) const {
  const BlockVec u1 = l_->inverse(at.u1);
  const BlockVec u2 = l_->inverse(at.u2);
  return l_->d_forward(u2, inner_rhs(at, u1, u2));
}

BlockVec TransformedField::jvp(Slot slot, const FieldPoint& at, const BlockVec& du) const {
  const BlockVec u1 = l_->inverse(at.u1);
  const BlockVec u2 = l_->inverse(at.u2);
  const FieldPoint inner{at.t1, u1, at.t2, u2};
  const BlockVec v = l_->d_forward_solve(slot == Slot::first ? u1 : u2, du);
  BlockVec jf = field_->jvp(slot, inner, v);
  if (field_->mass()) jf = field_->mass()->solve(jf);
  BlockVec out = l_->d_forward(u2, jf);
  if (slot == Slot::second) out += l_->d2_forward(u2, v, inner_rhs(at, u1, u2));
  return out;
}

BlockVec TransformedField::vjp(Slot slot, const FieldPoint& at, const BlockVec& w) const {
  const BlockVec u1 = l_->inverse(at.u1);
  const BlockVec u2 = l_->inverse(at.u2);
  const FieldPoint inner{at.t1, u1, at.t2, u2};
  BlockVec q = l_->d_forward_transpose(u2, w);
  if (field_->mass()) q = field_->mass()->solve_transpose(q);
  BlockVec acc = field_->vjp(slot, inner, q);
  if (slot == Slot::second) acc += l_->d2_forward_transpose(u2, inner_rhs(at, u1, u2), w);
  return l_->d_forward_solve_transpose(slot == Slot::first ? u1 : u2, acc);
}

std::shared_ptr<TransformedField> transform_state_dynamics(
    std::shared_ptr<const StateTransform> l, std::shared_ptr<const PartitionedField> field) {
  return std::make_shared<TransformedField>(std::move(l), std::move(field));
}

BlockVec state_transform_adjoint_rhs(const StateTransform& l, const PartitionedField& field,
                                     double t, const BlockVec& ut, const BlockVec& pt) {
  require_shape(ut, l.shape(), "state_transform_adjoint_rhs (state)");
  require_shape(pt, l.shape(), "state_transform_adjoint_rhs (costate)");
  const BlockVec u = l.inverse(ut);
  const BlockVec f = field_rhs(field, t, u);
  BlockVec acc = jacobian_transpose_action(field, t, u, l.d_forward_transpose(u, pt));
  acc += l.d2_forward_transpose(u, f, pt);
  return -l.d_forward_solve_transpose(u, acc);
}

// ---------------------------------------------------------------------------
// Mass matrices

MassMatrixSystem::MassMatrixSystem(std::shared_ptr<const PairingMap> m,
                                   std::shared_ptr<const PartitionedField> big_f)
    : m_(std::move(m)), big_f_(std::move(big_f)) {
  if (m_->shape() != big_f_->shape()) {
    throw std::invalid_argument("mass_matrix_adjoint_system: shape mismatch");
  }
  auto f = big_f_;
  with_mass_ = std::make_shared<FunctionalField>(FunctionalField::Parts{
      f->shape(),
      [f](const FieldPoint& at) { return f->value(at); },
      [f](const FieldPoint& at, const BlockVec& d) { return f->jvp(Slot::first, at, d); },
      [f](const FieldPoint& at, const BlockVec& d) { return f->jvp(Slot::second, at, d); },
      [f](const FieldPoint& at, const BlockVec& w) { return f->vjp(Slot::first, at, w); },
      [f](const FieldPoint& at, const BlockVec& w) { return f->vjp(Slot::second, at, w); },
      m_});
}

BlockVec MassMatrixSystem::state_rhs(double t, const BlockVec& u) const {
  return m_->solve(big_f_->value(FieldPoint::diagonal(t, u)));
}

BlockVec MassMatrixSystem::adjoint_rhs(double t, const BlockVec& u, const BlockVec& pt) const {
  const FieldPoint at = FieldPoint::diagonal(t, u);
  BlockVec g = big_f_->vjp(Slot::first, at, pt) + big_f_->vjp(Slot::second, at, pt);
  return -m_->solve_transpose(g);
}

MassMatrixSystem mass_matrix_adjoint_system(std::shared_ptr<const PairingMap> m,
                                            std::shared_ptr<const PartitionedField> big_f) {
  return {std::move(m), std::move(big_f)};
}

// ---------------------------------------------------------------------------
// Pairing preconditioning

BlockVec pairing_precondition_adjoint_rhs(const PairingMap& p, const PartitionedField& field,
                                          double t, const BlockVec& u, const BlockVec& xi) {
  require_shape(xi, p.shape(), "pairing_precondition_adjoint_rhs");
  return -p.solve_transpose(jacobian_transpose_action(field, t, u, p.apply_transpose(xi)));
}

BlockVec fiberwise_precondition_adjoint_rhs(const FiberPairing& pu, const PartitionedField& field,
                                            double t, const BlockVec& u, const BlockVec& xi) {
  require_shape(xi, pu.shape(), "fiberwise_precondition_adjoint_rhs");
  const auto p = pu.p_at(u);
  const BlockVec transport =
      p->solve_transpose(jacobian_transpose_action(field, t, u, p->apply_transpose(xi)));
  const BlockVec connection = connection_term(pu, u, field_rhs(field, t, u), xi);
  return -(transport + connection);
}

BlockVec covariant_adjoint_residual(const FiberPairing& pu, const PartitionedField& field,
                                    double t, const BlockVec& u, const BlockVec& xi,
                                    const BlockVec& dxi_dt) {
  require_shape(dxi_dt, pu.shape(), "covariant_adjoint_residual");
  const auto p = pu.p_at(u);
  const BlockVec f = field_rhs(field, t, u);
  BlockVec covariant = dxi_dt;
  if (pu.shape().size() <= kMaxChristoffelDim) {
    const ChristoffelTable gamma = christoffel(pu, u);
    const std::size_t n = gamma.n;
    for (std::size_t nu = 0; nu < n; ++nu) {
      double s = 0.0;
      for (std::size_t g = 0; g < n; ++g) {
        if (f[g] == 0.0) continue;
        for (std::size_t beta = 0; beta < n; ++beta) s += gamma(nu, g, beta) * f[g] * xi[beta];
      }
      covariant[nu] += s;
    }
  } else {
    covariant += connection_term(pu, u, f, xi);
  }
  return covariant +
         p->solve_transpose(jacobian_transpose_action(field, t, u, p->apply_transpose(xi)));
}

std::shared_ptr<const DiagonalPairing> build_scale_preconditioner(BlockShape shape, double scale_x,
                                                                  double scale_y) {
  if (!(scale_x > 0.0) || !(scale_y > 0.0) || !std::isfinite(scale_x) || !std::isfinite(scale_y)) {
    std::ostringstream os;
    os << "scale preconditioner requires positive finite scales (got " << scale_x << ", "
       << scale_y << ")";
    throw std::invalid_argument(os.str());
  }
  BlockVec d(shape);
  for (double& v : d.x()) v = scale_x;
  for (double& v : d.y()) v = scale_y;
  return std::make_shared<DiagonalPairing>(std::move(d));
}

}  // namespace padj
