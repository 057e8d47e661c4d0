#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "padj/fdcheck.hpp"
#include "padj/precond.hpp"
#include "padj/timeint.hpp"
#include "precond_fixtures.hpp"
#include "test_util.hpp"

using namespace padj;
using namespace padj::testing;

// ---------------------------------------------------------------------------
// State transforms

TEST(StateTransform, QuadraticInvariants) {
  const BlockShape s{2, 2};
  auto l = quadratic_transform(s, 3);
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 5; ++trial) {
    const BlockVec u = random_vec(rng, s), v = random_vec(rng, s), w = random_vec(rng, s);
    EXPECT_LT(fd::relative_error(l->inverse(l->forward(u)), u), 1e-10);
    const VecMap fwd = [&](const BlockVec& x) { return l->forward(x); };
    EXPECT_LT(fd::relative_error(fd::directional(fwd, u, v, 1e-6), l->d_forward(u, v)), 1e-8);
    const VecMap dfw = [&](const BlockVec& x) { return l->d_forward(x, w); };
    EXPECT_LT(fd::relative_error(fd::directional(dfw, u, v, 1e-6), l->d2_forward(u, v, w)), 1e-8);
    EXPECT_NEAR(dot(w, l->d_forward(u, v)), dot(l->d_forward_transpose(u, w), v), 1e-13);
    const BlockVec q = random_vec(rng, s);
    EXPECT_NEAR(dot(q, l->d2_forward(u, v, w)), dot(l->d2_forward_transpose(u, v, q), w), 1e-13);
  }
}

TEST(StateTransform, NonInvertibleRegionReportsState) {
  FunctionalTransform::Parts parts;
  parts.shape = {1, 0};
  parts.forward = [](const BlockVec& u) { return scalar(u[0] * u[0]); };
  parts.d_forward = [](const BlockVec& u, const BlockVec& v) { return scalar(2 * u[0] * v[0]); };
  parts.d_forward_transpose = parts.d_forward;
  parts.d2_forward = [](const BlockVec&, const BlockVec& v, const BlockVec& w) {
    return scalar(2 * v[0] * w[0]);
  };
  parts.d2_forward_transpose = parts.d2_forward;
  FunctionalTransform l(parts);
  try {
    l.inverse(scalar(-1.0));
    FAIL();
  } catch (const TransformError& e) {
    EXPECT_EQ(e.at()[0], -1.0);
  }
}

TEST(TransformStateDynamics, IdentityLeavesFieldUnchanged) {
  auto f = std::make_shared<ToyField>(3, 1);
  auto l = std::make_shared<LinearTransform>(BlockOp::identity(f->shape()));
  auto g = transform_state_dynamics(l, f);
  std::mt19937_64 rng(2);
  const BlockVec u1 = random_vec(rng, f->shape()), u2 = random_vec(rng, f->shape());
  const FieldPoint at{0.0, u1, 0.0, u2};
  const BlockVec a = g->value(at), b = f->value(at);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_DOUBLE_EQ(a[i], b[i]);
}

TEST(TransformStateDynamics, LinearConjugation) {
  auto f = dense_linear_field(2, {0.0, 1.0, 1.0, 0.0});
  BlockOp a = BlockOp::identity({2, 0});
  a.xx.at(0, 0) = 2.0;
  auto g = transform_state_dynamics(std::make_shared<LinearTransform>(a), f);
  const BlockOp j = g->PartitionedField::jacobian(Slot::second, FieldPoint::diagonal(0.0, BlockVec({2, 0})));
  EXPECT_DOUBLE_EQ(j.xx.get(0, 0), 0.0);
  EXPECT_DOUBLE_EQ(j.xx.get(0, 1), 2.0);
  EXPECT_DOUBLE_EQ(j.xx.get(1, 0), 0.5);
  EXPECT_DOUBLE_EQ(j.xx.get(1, 1), 0.0);
}

TEST(TransformStateDynamics, ScalarCubeChainRule) {
  auto f = dense_linear_field(1, {1.0});
  auto g = transform_state_dynamics(cube_transform(), f);
  for (double ut : {0.5, 1.0, 8.0}) {
    EXPECT_NEAR(g->value(FieldPoint::diagonal(0.0, scalar(ut)))[0], 3.0 * ut, 1e-13 * ut);
  }
}

TEST(TransformStateDynamics, JvpVjpConsistentAndMatchFd) {
  auto f = std::make_shared<ToyField>(2, 5);
  auto g = transform_state_dynamics(quadratic_transform(f->shape(), 6), f);
  std::mt19937_64 rng(7);
  const BlockVec u1 = random_vec(rng, f->shape(), -0.5, 0.5), u2 = random_vec(rng, f->shape(), -0.5, 0.5);
  const FieldPoint at{0.0, u1, 0.0, u2};
  for (Slot slot : {Slot::first, Slot::second}) {
    const BlockVec du = random_vec(rng, f->shape()), w = random_vec(rng, f->shape());
    EXPECT_NEAR(dot(w, g->jvp(slot, at, du)), dot(g->vjp(slot, at, w), du), 1e-12);
    EXPECT_LT(fd::relative_error(fd::field_jvp(*g, slot, at, du), g->jvp(slot, at, du)), 1e-7);
  }
}

TEST(StateTransformAdjoint, LinearTransformMatchesDirectAssembly) {
  std::mt19937_64 rng(8);
  const BlockShape s{3, 2};
  auto f = std::make_shared<ToyField>(s.nx, 9);
  const BlockShape fs = f->shape();
  const BlockOp a = random_block_op(rng, fs, false);
  LinearTransform l(a);
  const BlockVec ut = random_vec(rng, fs), pt = random_vec(rng, fs);
  const BlockVec u = l.inverse(ut);
  // -A^-T [Df]^T A^T p~
  const Eigen::MatrixXd am = to_eigen(a);
  const Eigen::VectorXd inner = to_eigen(jacobian_transpose_action(*f, 0.0, u, l.d_forward_transpose(u, pt)));
  const Eigen::VectorXd ref = -am.transpose().partialPivLu().solve(inner);
  EXPECT_LT(rel_diff(state_transform_adjoint_rhs(l, *f, 0.0, ut, pt), ref), 1e-12);
}

TEST(StateTransformAdjoint, ScalarCube) {
  auto f = dense_linear_field(1, {1.0});
  auto l = cube_transform();
  for (double ut : {0.3, 2.0}) {
    EXPECT_NEAR(state_transform_adjoint_rhs(*l, *f, 0.0, scalar(ut), scalar(1.5))[0], -4.5, 1e-12);
  }
}

TEST(StateTransformAdjoint, QuadraticMatchesFdOfTransformedDynamics) {
  std::mt19937_64 rng(10);
  const BlockShape s{2, 2};
  auto f = std::make_shared<LinearSplitField>(random_block_op(rng, s, false), random_block_op(rng, s, false));
  auto l = quadratic_transform(s, 11);
  auto g = transform_state_dynamics(l, f);
  const BlockVec ut = random_vec(rng, s, -0.5, 0.5), pt = random_vec(rng, s);
  const VecMap map = [&](const BlockVec& v) { return g->value(FieldPoint::diagonal(0.0, v)); };
  const Eigen::VectorXd ref = -fd_jacobian(map, ut).transpose() * to_eigen(pt);
  EXPECT_LT(rel_diff(state_transform_adjoint_rhs(*l, *f, 0.0, ut, pt), ref), 1e-8);
}

TEST(StateTransformAdjoint, InducedSchemeConservesTransformedPairing) {
  auto f = std::make_shared<ToyField>(2, 12);
  auto g = transform_state_dynamics(quadratic_transform(f->shape(), 13, 0.05), f);
  std::mt19937_64 rng(14);
  StepConfig cfg;
  cfg.dt = 0.05;
  cfg.newton_tol = 1e-14;
  const Trajectory tr = integrate_forward(*g, random_vec(rng, f->shape(), -0.5, 0.5), 0.0, 0.5, cfg);
  const auto du = propagate_variation(*g, tr, random_vec(rng, f->shape()), cfg);
  const auto p = integrate_adjoint(*g, tr, random_vec(rng, f->shape()), cfg);
  const double ref = std::abs(dot(p.back(), du.back()));
  for (double d : pairing_drift(p, du)) EXPECT_LE(std::abs(d), 1e-12 * ref);
}

// ---------------------------------------------------------------------------
// Mass matrices

TEST(MassMatrix, IdentityReducesToCanonical) {
  auto f = std::make_shared<ToyField>(3, 15);
  auto sys = mass_matrix_adjoint_system(std::make_shared<IdentityPairing>(f->shape()), f);
  std::mt19937_64 rng(16);
  const BlockVec u = random_vec(rng, f->shape()), p = random_vec(rng, f->shape());
  EXPECT_LT(fd::relative_error(sys.adjoint_rhs(0.0, u, p), canonical_adjoint_rhs(*f, 0.0, u, p)), 1e-15);
  EXPECT_LT(fd::relative_error(sys.state_rhs(0.0, u), field_rhs(*f, 0.0, u)), 1e-15);
}

TEST(MassMatrix, ScalarClosedForm) {
  auto f = dense_linear_field(1, {1.0});
  auto sys = mass_matrix_adjoint_system(std::make_shared<DiagonalPairing>(scalar(2.0)), f);
  EXPECT_DOUBLE_EQ(sys.state_rhs(0.0, scalar(3.0))[0], 1.5);
  EXPECT_DOUBLE_EQ(sys.adjoint_rhs(0.0, scalar(3.0), scalar(4.0))[0], -2.0);
}

TEST(MassMatrix, CostateRelationToCanonical) {
  std::mt19937_64 rng(17);
  auto f = std::make_shared<ToyField>(3, 18);
  auto m = std::make_shared<BlockOpPairing>(random_block_op(rng, f->shape(), true));
  auto sys = mass_matrix_adjoint_system(m, f);
  const BlockVec u = random_vec(rng, f->shape()), pt = random_vec(rng, f->shape());
  // p = M^T p~ evolves canonically for f = M^-1 F
  const BlockVec lhs = sys.canonical_costate(sys.adjoint_rhs(0.0, u, pt));
  const BlockVec rhs = canonical_adjoint_rhs(*sys.field(), 0.0, u, sys.canonical_costate(pt));
  EXPECT_LT(fd::relative_error(lhs, rhs), 1e-12);
}

TEST(MassMatrix, FemMassGradientMatchesFd) {
  const std::size_t n = 6;
  std::mt19937_64 rng(19);
  BlockOp mm = BlockOp::identity({n, 0});
  mm.xx = BandMatrix(n, n, 1, 1);
  const double h = 1.0 / n;
  for (std::size_t i = 0; i < n; ++i) {
    mm.xx.at(i, i) = 4.0 * h / 6.0;
    if (i + 1 < n) mm.xx.at(i, i + 1) = mm.xx.at(i + 1, i) = h / 6.0;
  }
  BlockOp kk = BlockOp::zeros({n, 0});
  kk.xx = BandMatrix(n, n, 1, 1);
  for (std::size_t i = 0; i < n; ++i) {
    kk.xx.at(i, i) = -2.0 / h;
    if (i + 1 < n) kk.xx.at(i, i + 1) = kk.xx.at(i + 1, i) = 1.0 / h;
  }
  auto big_f = std::make_shared<LinearSplitField>(BlockOp::zeros({n, 0}), kk);
  auto sys = mass_matrix_adjoint_system(std::make_shared<BlockOpPairing>(mm), big_f);
  StepConfig cfg;
  cfg.dt = 1e-3;
  cfg.newton_tol = 1e-14;
  const BlockVec u0 = random_vec(rng, {n, 0});
  const auto cost = [&](const BlockVec& v) {
    const BlockVec uk = integrate_forward(*sys.field(), v, 0.0, 0.05, cfg).final_state();
    return 0.5 * dot(uk, uk);
  };
  const Trajectory tr = integrate_forward(*sys.field(), u0, 0.0, 0.05, cfg);
  const BlockVec grad = integrate_adjoint(*sys.field(), tr, tr.final_state(), cfg).front();
  for (int i = 0; i < 5; ++i) {
    const BlockVec dir = random_vec(rng, {n, 0});
    const double fd_val = fd::directional(std::function<double(const BlockVec&)>(cost), u0, dir, 1e-6);
    EXPECT_LT(fd::relative_error(dot(grad, dir), fd_val), 1e-6);
  }
}

// ---------------------------------------------------------------------------
// Pairing preconditioning

TEST(PairingPrecondition, IdentityIsCanonical) {
  ToyField f(3, 20);
  IdentityPairing p(f.shape());
  std::mt19937_64 rng(21);
  const BlockVec u = random_vec(rng, f.shape()), xi = random_vec(rng, f.shape());
  const BlockVec a = pairing_precondition_adjoint_rhs(p, f, 0.0, u, xi);
  const BlockVec b = canonical_adjoint_rhs(f, 0.0, u, xi);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i], b[i]);
}

TEST(PairingPrecondition, ScaleExampleReproducesStateOperator) {
  const double alpha = 100.0, beta = 0.01;
  const std::size_t n = 3;
  const BlockShape s{n, n};
  BlockOp l = BlockOp::identity(s);
  l.xy = BandMatrix::diagonal(std::vector<double>(n, alpha));
  l.yx = BandMatrix::diagonal(std::vector<double>(n, beta));
  LinearSplitField f(BlockOp::zeros(s), l);
  auto scale = build_scale_preconditioner(s, 1.0, alpha / beta);
  EXPECT_DOUBLE_EQ(scale->diagonal().y()[0], 1e4);
  const Eigen::MatrixXd lm = to_eigen(l);
  for (std::size_t c = 0; c < s.size(); ++c) {
    BlockVec e(s);
    e[c] = 1.0;
    const BlockVec col = pairing_precondition_adjoint_rhs(*scale, f, 0.0, BlockVec(s), e);
    for (std::size_t r = 0; r < s.size(); ++r) {
      EXPECT_NEAR(col[r], -lm(r, c), 1e-14 * std::abs(lm(r, c)));
    }
  }
}

TEST(PairingPrecondition, RandomDenseConjugation) {
  std::mt19937_64 rng(22);
  const BlockShape s{3, 3};
  const BlockOp a = random_block_op(rng, s, false);
  LinearSplitField f(BlockOp::zeros(s), a);
  const BlockOp pm = random_block_op(rng, s, false);
  BlockOpPairing p(pm);
  const BlockVec xi = random_vec(rng, s);
  const Eigen::MatrixXd pe = to_eigen(pm), ae = to_eigen(a);
  const Eigen::VectorXd ref =
      -pe.transpose().partialPivLu().solve(ae.transpose() * pe.transpose() * to_eigen(xi));
  EXPECT_LT(rel_diff(pairing_precondition_adjoint_rhs(p, f, 0.0, BlockVec(s), xi), ref), 1e-12);
}

TEST(PairingPrecondition, InducedSchemeConservesPPairing) {
  ToyField f(3, 23);
  std::mt19937_64 rng(24);
  StepConfig cfg;
  cfg.dt = 0.02;
  cfg.newton_tol = 1e-14;
  const Trajectory tr = integrate_forward(f, random_vec(rng, f.shape()), 0.0, 1.0, cfg);
  auto s = build_scale_preconditioner(f.shape(), 2.0, 300.0);
  const auto du = propagate_variation(f, tr, random_vec(rng, f.shape()), cfg);
  const auto xi = integrate_adjoint(f, tr, random_vec(rng, f.shape()), cfg, AdjointScheme::induced, s.get());
  const auto drift = pairing_drift(xi, du, s.get());
  const double ref = std::abs(s->pair(xi.back(), du.back()));
  for (double d : drift) EXPECT_LE(std::abs(d), 1e-12 * ref);
}

TEST(ScalePreconditioner, BuilderContract) {
  const BlockShape s{2, 3};
  auto one = build_scale_preconditioner(s, 1.0, 1.0);
  const BlockVec v(Vector{1.0, 2.0}, Vector{3.0, 4.0, 5.0});
  const BlockVec pv = one->apply(v);
  for (std::size_t i = 0; i < v.size(); ++i) EXPECT_EQ(pv[i], v[i]);
  EXPECT_THROW(build_scale_preconditioner(s, 0.0, 1.0), std::invalid_argument);
  EXPECT_THROW(build_scale_preconditioner(s, 1.0, -2.0), std::invalid_argument);
}

TEST(ScalePreconditioner, DenseConjugationOracle) {
  std::mt19937_64 rng(25);
  const BlockShape s{3, 2};
  const BlockOp l = random_block_op(rng, s, false);
  auto sp = build_scale_preconditioner(s, 3.0, 1e5);
  LinearSplitField f(l, BlockOp::zeros(s));
  const BlockVec xi = random_vec(rng, s);
  const Eigen::MatrixXd sm = to_eigen(sp->matrix()), lm = to_eigen(l);
  const Eigen::VectorXd ref = -(sm.inverse() * lm.transpose() * sm) * to_eigen(xi);
  EXPECT_LT(rel_diff(pairing_precondition_adjoint_rhs(*sp, f, 0.0, BlockVec(s), xi), ref), 1e-13);
}

// ---------------------------------------------------------------------------
// Fiberwise pairings

TEST(FiberPairing, DpActionMatchesFd) {
  const BlockShape s{2, 2};
  auto pu = polynomial_pairing(s, 26);
  std::mt19937_64 rng(27);
  const BlockVec u = random_vec(rng, s), v = random_vec(rng, s), w = random_vec(rng, s);
  const VecMap map = [&](const BlockVec& x) { return pu->p_at(x)->apply(w); };
  EXPECT_LT(fd::relative_error(fd::directional(map, u, v, 1e-6), pu->dp_action(u, v, w)), 1e-6);
  const BlockVec q = random_vec(rng, s);
  EXPECT_NEAR(dot(q, pu->dp_action(u, v, w)), dot(pu->dp_action_transpose(u, v, q), w), 1e-14);
}

TEST(Fiberwise, ConstantPairingMatchesPairingRhs) {
  ToyField f(3, 28);
  std::mt19937_64 rng(29);
  auto p = std::make_shared<BlockOpPairing>(random_block_op(rng, f.shape(), false));
  ConstantFiberPairing pu(p);
  const BlockVec u = random_vec(rng, f.shape()), xi = random_vec(rng, f.shape());
  const BlockVec a = fiberwise_precondition_adjoint_rhs(pu, f, 0.0, u, xi);
  const BlockVec b = pairing_precondition_adjoint_rhs(*p, f, 0.0, u, xi);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i], b[i]);
}

TEST(Fiberwise, ExponentialScalarClosedForm) {
  auto f = std::make_shared<FunctionalField>(FunctionalField::Parts{
      {1, 0},
      [](const FieldPoint&) { return scalar(1.0); },
      [](const FieldPoint&, const BlockVec&) { return scalar(0.0); },
      [](const FieldPoint&, const BlockVec&) { return scalar(0.0); },
      [](const FieldPoint&, const BlockVec&) { return scalar(0.0); },
      [](const FieldPoint&, const BlockVec&) { return scalar(0.0); },
      nullptr});
  auto pu = exp_pairing();
  for (double u : {-1.0, 0.0, 2.5}) {
    EXPECT_NEAR(fiberwise_precondition_adjoint_rhs(*pu, *f, 0.0, scalar(u), scalar(1.7))[0], -1.7, 1e-14);
    // xi(t) = xi(T) e^{T - t} solves dxi/dt = -xi
    const BlockVec res = covariant_adjoint_residual(*pu, *f, 0.0, scalar(u), scalar(1.7), scalar(-1.7));
    EXPECT_NEAR(res[0], 0.0, 1e-14);
  }
}

TEST(Christoffel, ClosedForms) {
  std::mt19937_64 rng(30);
  ConstantFiberPairing constant(std::make_shared<BlockOpPairing>(random_block_op(rng, {2, 2}, false)));
  const ChristoffelTable zero = christoffel(constant, random_vec(rng, {2, 2}));
  for (double g : zero.values) EXPECT_EQ(g, 0.0);
  for (double u : {-2.0, 0.3, 4.0}) EXPECT_NEAR(christoffel(*exp_pairing(), scalar(u))(0, 0, 0), 1.0, 1e-15);
  for (double u : {0.5, 2.0, 7.0}) {
    EXPECT_NEAR(christoffel(*identity_map_pairing(), scalar(u))(0, 0, 0), 1.0 / u, 1e-15);
  }
}

TEST(Christoffel, ContractionMatchesConnectionTerm) {
  const BlockShape s{3, 2};
  auto pu = polynomial_pairing(s, 31);
  std::mt19937_64 rng(32);
  const BlockVec u = random_vec(rng, s), f = random_vec(rng, s), xi = random_vec(rng, s);
  const ChristoffelTable g = christoffel(*pu, u);
  BlockVec contracted(s);
  for (std::size_t nu = 0; nu < s.size(); ++nu)
    for (std::size_t c = 0; c < s.size(); ++c)
      for (std::size_t b = 0; b < s.size(); ++b) contracted[nu] += g(nu, c, b) * f[c] * xi[b];
  EXPECT_LT(fd::relative_error(contracted, connection_term(*pu, u, f, xi)), 1e-14);
  EXPECT_THROW(christoffel(*polynomial_pairing({9, 8}, 1), BlockVec({9, 8})), std::invalid_argument);
}

TEST(CovariantResidual, VanishesOnRhsAndIsLinearInPerturbation) {
  ToyField f(2, 33);
  auto pu = polynomial_pairing(f.shape(), 34);
  std::mt19937_64 rng(35);
  const BlockVec u = random_vec(rng, f.shape()), xi = random_vec(rng, f.shape());
  const BlockVec rhs = fiberwise_precondition_adjoint_rhs(*pu, f, 0.0, u, xi);
  EXPECT_LT(norm_inf(covariant_adjoint_residual(*pu, f, 0.0, u, xi, rhs)), 1e-12 * norm_inf(rhs));
  const BlockVec bump = random_vec(rng, f.shape());
  const BlockVec res = covariant_adjoint_residual(*pu, f, 0.0, u, xi, rhs + bump);
  EXPECT_LT(fd::relative_error(res, bump), 1e-12);
}

TEST(CovariantResidual, LargeDimensionUsesContraction) {
  ToyField f(10, 36);
  auto pu = polynomial_pairing(f.shape(), 37);
  std::mt19937_64 rng(38);
  const BlockVec u = random_vec(rng, f.shape()), xi = random_vec(rng, f.shape());
  const BlockVec rhs = fiberwise_precondition_adjoint_rhs(*pu, f, 0.0, u, xi);
  EXPECT_LT(norm_inf(covariant_adjoint_residual(*pu, f, 0.0, u, xi, rhs)), 1e-12 * norm_inf(rhs));
}
