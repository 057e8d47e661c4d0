#include "padj/timeint.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace padj {

void StepConfig::validate() const {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw std::invalid_argument("StepConfig: dt must be > 0");
  if (!(newton_tol > 0.0)) throw std::invalid_argument("StepConfig: newton_tol must be > 0");
  if (newton_max_iter < 1) throw std::invalid_argument("StepConfig: newton_max_iter must be >= 1");
}

namespace {

BlockVec mass_apply(const PartitionedField& field, const BlockVec& v) {
  return field.mass() ? field.mass()->apply(v) : v;
}

BlockVec mass_apply_transpose(const PartitionedField& field, const BlockVec& v) {
  return field.mass() ? field.mass()->apply_transpose(v) : v;
}

BlockVec mass_solve_transpose(const PartitionedField& field, const BlockVec& v) {
  return field.mass() ? field.mass()->solve_transpose(v) : v;
}

BandMatrix densify(const BandMatrix& m) {
  const std::size_t lo = m.rows() ? m.rows() - 1 : 0;
  const std::size_t up = m.cols() ? m.cols() - 1 : 0;
  return m.widened(std::max(lo, m.lower()), std::max(up, m.upper()));
}

double block_residual(std::span<const double> g, std::span<const double> a,
                      std::span<const double> b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    worst = std::max(worst, std::abs(g[i]) / (1.0 + std::max(std::abs(a[i]), std::abs(b[i]))));
  }
  return worst;
}

SchurFactors factor_step(const PartitionedField& field, const FieldPoint& at,
                         const StepConfig& cfg, std::size_t step, double t) {
  try {
    return SchurFactors(step_operator(field, at, cfg));
  } catch (const SingularBlockError& e) {
    std::ostringstream os;
    os << "step " << step << " (t = " << t << "): " << e.what();
    throw StepSolveError(os.str(), step, t);
  }
}

}  // namespace

BlockOp step_operator(const PartitionedField& field, const FieldPoint& at, const StepConfig& cfg) {
  const BlockShape s = field.shape();
  const BlockOp m = field.mass() ? field.mass()->matrix() : BlockOp::identity(s);
  BlockOp n = m.plus(field.jacobian(Slot::second, at), -cfg.dt);
  if (cfg.solver == LinearSolverKind::dense) {
    n = {densify(n.xx), densify(n.xy), densify(n.yx), densify(n.yy)};
  }
  return n;
}

StepResult semi_implicit_step(const PartitionedField& field, double t_n, const BlockVec& u_n,
                              const StepConfig& cfg, std::size_t step_index) {
  require_shape(u_n, field.shape(), "semi_implicit_step");
  const double t_np1 = t_n + cfg.dt;
  const BlockVec mu_n = mass_apply(field, u_n);

  BlockVec v = u_n;
  std::vector<double> history;
  for (int it = 0;; ++it) {
    const FieldPoint at{t_n, u_n, t_np1, v};
    const BlockVec mv = mass_apply(field, v);
    BlockVec g = mv - mu_n;
    g.axpy(-cfg.dt, field.value(at));

    const double res = std::max(block_residual(g.x(), mu_n.x(), mv.x()),
                                block_residual(g.y(), mu_n.y(), mv.y()));
    history.push_back(res);
    if (!std::isfinite(res)) break;
    if (res <= cfg.newton_tol) return {std::move(v), {it, res}};
    if (it == cfg.newton_max_iter) break;

    const BlockVec delta = factor_step(field, at, cfg, step_index, t_n).solve(g);
    v -= delta;
    // Roundoff can hold the residual just above tol once the iterate stops moving.
    double moved = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
      moved = std::max(moved, std::abs(delta[i]) / (1.0 + std::abs(v[i])));
    }
    const double still = std::max(1e-3 * cfg.newton_tol, 16.0 * std::numeric_limits<double>::epsilon());
    if (moved <= still && res <= 1e3 * cfg.newton_tol) return {std::move(v), {it + 1, res}};
  }
  std::ostringstream os;
  os << "Newton did not converge at step " << step_index << " (t = " << t_n << ") after "
     << history.size() - 1 << " iterations, residual " << history.back();
  throw NewtonError(os.str(), step_index, t_n, std::move(history));
}

std::size_t step_count(double t0, double t_final, double dt) {
  const double span = t_final - t0;
  if (span < 0.0 || !(dt > 0.0)) throw std::invalid_argument("invalid time span");
  const double k = std::round(span / dt);
  if (std::abs(k * dt - span) > 1e-9 * std::max(span, dt)) {
    std::ostringstream os;
    os << "time span " << span << " is not an integer multiple of dt = " << dt;
    throw std::invalid_argument(os.str());
  }
  return static_cast<std::size_t>(k);
}

Trajectory integrate_forward(const PartitionedField& field, const BlockVec& u0, double t0,
                             double t_final, const StepConfig& cfg) {
  cfg.validate();
  require_shape(u0, field.shape(), "integrate_forward");
  const std::size_t k = step_count(t0, t_final, cfg.dt);
  Trajectory traj;
  traj.times.reserve(k + 1);
  traj.states.reserve(k + 1);
  traj.newton.reserve(k);
  traj.times.push_back(t0);
  traj.states.push_back(u0);
  for (std::size_t n = 0; n < k; ++n) {
    const double t_n = t0 + static_cast<double>(n) * cfg.dt;
    StepResult r = semi_implicit_step(field, t_n, traj.states.back(), cfg, n);
    traj.times.push_back(t0 + static_cast<double>(n + 1) * cfg.dt);
    traj.states.push_back(std::move(r.u));
    traj.newton.push_back(r.stats);
  }
  return traj;
}

BlockVec induced_adjoint_step(const PartitionedField& field, double t_n, const BlockVec& u_n,
                              const BlockVec& u_np1, const BlockVec& p_np1, const StepConfig& cfg) {
  require_shape(p_np1, field.shape(), "induced_adjoint_step");
  const FieldPoint at{t_n, u_n, t_n + cfg.dt, u_np1};
  const BlockVec q = factor_step(field, at, cfg, 0, t_n).solve_transpose(p_np1);
  BlockVec p = mass_apply_transpose(field, q);
  p.axpy(cfg.dt, field.vjp(Slot::first, at, q));
  return p;
}

BlockVec naive_adjoint_step(const PartitionedField& field, double t_n, const BlockVec& u_n,
                            const BlockVec& u_np1, const BlockVec& p_np1, const StepConfig& cfg) {
  require_shape(p_np1, field.shape(), "naive_adjoint_step");
  const FieldPoint at{t_n, u_n, t_n + cfg.dt, u_np1};
  BlockVec r = p_np1;
  r.axpy(cfg.dt, field.vjp(Slot::first, at, mass_solve_transpose(field, p_np1)));
  return mass_apply_transpose(field, factor_step(field, at, cfg, 0, t_n).solve_transpose(r));
}

std::vector<BlockVec> integrate_adjoint(const PartitionedField& field, const Trajectory& traj,
                                        const BlockVec& p_final, const StepConfig& cfg,
                                        AdjointScheme scheme, const PairingMap* precond) {
  cfg.validate();
  require_shape(p_final, field.shape(), "integrate_adjoint");
  const std::size_t k = traj.steps();
  std::vector<BlockVec> p(k + 1);
  p[k] = p_final;
  for (std::size_t n = k; n-- > 0;) {
    const double t_n = traj.times[n];
    BlockVec next = precond ? precond->apply_transpose(p[n + 1]) : p[n + 1];
    try {
      next = scheme == AdjointScheme::induced
                 ? induced_adjoint_step(field, t_n, traj.states[n], traj.states[n + 1], next, cfg)
                 : naive_adjoint_step(field, t_n, traj.states[n], traj.states[n + 1], next, cfg);
    } catch (const StepSolveError& e) {
      std::ostringstream os;
      os << "adjoint step " << n << " (t = " << t_n << "): " << e.what();
      throw StepSolveError(os.str(), n, t_n);
    }
    p[n] = precond ? precond->solve_transpose(next) : std::move(next);
  }
  return p;
}

std::vector<BlockVec> propagate_variation(const PartitionedField& field, const Trajectory& traj,
                                          const BlockVec& du0, const StepConfig& cfg) {
  require_shape(du0, field.shape(), "propagate_variation");
  std::vector<BlockVec> du;
  du.reserve(traj.states.size());
  du.push_back(du0);
  for (std::size_t n = 0; n < traj.steps(); ++n) {
    const double t_n = traj.times[n];
    const FieldPoint at{t_n, traj.states[n], t_n + cfg.dt, traj.states[n + 1]};
    BlockVec rhs = mass_apply(field, du.back());
    rhs.axpy(cfg.dt, field.jvp(Slot::first, at, du.back()));
    du.push_back(factor_step(field, at, cfg, n, t_n).solve(rhs));
  }
  return du;
}

}  // namespace padj
