#include "padj/optim.hpp"

#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

namespace padj::optim {

const char* to_string(Projection p) {
  switch (p) {
    case Projection::none: return "none";
    case Projection::orthogonal: return "orthogonal";
    case Projection::e_coordinate: return "e-coordinate";
  }
  return "?";
}

std::optional<Projection> parse_projection(const std::string& s) {
  if (s == "none") return Projection::none;
  if (s == "orthogonal") return Projection::orthogonal;
  if (s == "e-coordinate" || s == "e_coordinate") return Projection::e_coordinate;
  return std::nullopt;
}

const char* to_string(Outcome o) {
  switch (o) {
    case Outcome::converged: return "converged";
    case Outcome::max_iters: return "max_iters";
    case Outcome::diverged: return "diverged";
  }
  return "?";
}

void DescentConfig::validate() const {
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw std::invalid_argument("DescentConfig: gamma must be positive");
  if (max_iters < 1) throw std::invalid_argument("DescentConfig: max_iters must be at least 1");
  if (!(scale_x > 0.0) || !(scale_y > 0.0) || !std::isfinite(scale_x) || !std::isfinite(scale_y)) {
    throw std::invalid_argument("DescentConfig: scales must be positive and finite");
  }
  if (!(stop_tol >= 0.0)) throw std::invalid_argument("DescentConfig: stop_tol must be nonnegative");
  if (stop_window < 1) throw std::invalid_argument("DescentConfig: stop_window must be at least 1");
  if (!(divergence_factor > 1.0)) throw std::invalid_argument("DescentConfig: divergence_factor must exceed 1");
}

// ---------------------------------------------------------------------------
// Gradients and steps

BlockVec adjoint_gradient(const PartitionedField& field, const Trajectory& traj,
                          const BlockVec& dc_final, const StepConfig& step,
                          const PairingMap* scale) {
  const BlockVec xi_final = scale ? scale->solve_transpose(dc_final) : dc_final;
  return integrate_adjoint(field, traj, xi_final, step, AdjointScheme::induced, scale).front();
}

BlockVec adjoint_gradient(const PartitionedField& field, const BlockVec& u0, double t0,
                          double t_final, const StepConfig& step, const TerminalDerivative& dc,
                          const PairingMap* scale) {
  const Trajectory traj = integrate_forward(field, u0, t0, t_final, step);
  return adjoint_gradient(field, traj, dc(traj.final_state()), step, scale);
}

BlockVec gd_step(const BlockVec& u, const BlockVec& grad, double gamma) {
  require_shape(grad, u.shape(), "gd_step");
  BlockVec out = u;
  out.axpy(-gamma, grad);
  return out;
}

BlockVec mirror_descent_step(const BlockVec& u, const BlockVec& grad, const StateTransform& f,
                             double gamma) {
  require_shape(grad, u.shape(), "mirror_descent_step");
  BlockVec z = f.forward(u);
  z.axpy(-gamma, grad);
  return f.inverse(z);
}

// ---------------------------------------------------------------------------
// Projections

namespace {

// Stationarity of |(E,T) - (E_un,T_un)|^2 along E = ac T^4, divided by 4acT^3.
struct ClosestPointEquation {
  double e_un, t_un, ac;

  double operator()(double t) const {
    const double t3 = t * t * t;
    return (t - t_un) / (4.0 * ac * t3) + ac * t3 * t - e_un;
  }
  double derivative(double t) const {
    const double t3 = t * t * t;
    return 1.0 / (4.0 * ac * t3) - 3.0 * (t - t_un) / (4.0 * ac * t3 * t) + 4.0 * ac * t3;
  }
};

double closest_point_temperature(double e_un, double t_un, double ac, std::size_t i) {
  if (!std::isfinite(e_un) || !std::isfinite(t_un)) {
    throw ProjectionError("orthogonal projection: non-finite input", i, e_un, t_un);
  }
  const ClosestPointEquation h{e_un, t_un, ac};
  double hi = std::max({t_un, std::pow(std::max(e_un, 0.0) / ac, 0.25), 1e-300});
  while (!(h(hi) > 0.0)) {
    hi *= 2.0;
    if (!std::isfinite(hi)) throw ProjectionError("orthogonal projection: no upper bracket", i, 0.0, hi);
  }
  double lo = hi;
  while (!(h(lo) < 0.0)) {
    lo *= 0.5;
    if (lo < 1e-300) throw ProjectionError("orthogonal projection: no lower bracket", i, lo, hi);
  }
  double t = std::pow(std::max(e_un, 0.0) / ac, 0.25);
  if (!(t > lo && t < hi)) t = 0.5 * (lo + hi);
  for (int it = 0; it < 200; ++it) {
    const double v = h(t);
    if (v == 0.0) return t;
    (v < 0.0 ? lo : hi) = t;
    double next = t - v / h.derivative(t);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - t) <= 1e-15 * t || hi - lo <= 1e-15 * hi) return next;
    t = next;
  }
  std::ostringstream os;
  os << "orthogonal projection: no convergence in component " << i << ", bracket [" << lo << ", "
     << hi << "]";
  throw ProjectionError(os.str(), i, lo, hi);
}

void accumulate(ProjectionStats& s, double lambda, std::size_t n) {
  s.lambda_max = std::max(s.lambda_max, std::abs(lambda));
  s.lambda_mean += std::abs(lambda) / static_cast<double>(n);
}

}  // namespace

ProjectionStats project_orthogonal(std::span<double> e, std::span<double> t, double ac) {
  if (e.size() != t.size()) throw std::invalid_argument("project_orthogonal: size mismatch");
  ProjectionStats stats;
  for (std::size_t i = 0; i < e.size(); ++i) {
    const double t4 = t[i] * t[i] * t[i] * t[i];
    if (e[i] == ac * t4 && t[i] > 0.0) continue;
    const double tp = closest_point_temperature(e[i], t[i], ac, i);
    const double ep = ac * tp * tp * tp * tp;
    accumulate(stats, e[i] - ep, e.size());
    e[i] = ep;
    t[i] = tp;
  }
  return stats;
}

ProjectionStats project_e_coordinate(std::span<double> e, std::span<const double> t, double ac) {
  if (e.size() != t.size()) throw std::invalid_argument("project_e_coordinate: size mismatch");
  ProjectionStats stats;
  for (std::size_t i = 0; i < e.size(); ++i) {
    if (!(t[i] > 0.0) || !std::isfinite(t[i])) {
      std::ostringstream os;
      os << "e-coordinate projection: nonpositive temperature " << t[i] << " in component " << i;
      throw ProjectionError(os.str(), i, t[i], t[i]);
    }
    const double ep = ac * t[i] * t[i] * t[i] * t[i];
    accumulate(stats, e[i] - ep, e.size());
    e[i] = ep;
  }
  return stats;
}

// ---------------------------------------------------------------------------
// Inverse problem

BlockVec perturbed_initial_state(const radiff::RadDiffConfig& cfg, const Bump& bump) {
  const Vector x = radiff::cell_centres(cfg);
  Vector t(cfg.n);
  for (std::size_t i = 0; i < cfg.n; ++i) {
    const double z = (x[i] - bump.centre) / bump.width;
    t[i] = cfg.t_init + bump.amplitude * std::exp(-0.5 * z * z);
  }
  return radiff::equilibrium_state(cfg, t);
}

Targets make_targets(const InverseProblem& prob, const Bump& bump) {
  const radiff::MarshakProblem mp = radiff::marshak_problem(prob.model);
  Targets out;
  out.initial = perturbed_initial_state(prob.model, bump);
  out.observed = integrate_forward(*mp.field, out.initial, 0.0, prob.t_final, prob.step).final_state();
  out.unperturbed = integrate_forward(*mp.field, mp.initial, 0.0, prob.t_final, prob.step).final_state();
  return out;
}

namespace {

void restore_pinned(const radiff::RadDiffField& field, const BlockVec& reference, BlockVec& u) {
  const double ac = field.config().ac();
  for (std::size_t i = 0; i < field.config().n; ++i) {
    if (field.t_pinned(i)) u.y()[i] = reference.y()[i];
    if (field.e_pinned(i)) {
      u.x()[i] = reference.x()[i];
    } else if (field.t_pinned(i)) {
      u.x()[i] = ac * std::pow(u.y()[i], 4);
    }
  }
}

}  // namespace

InverseResult run_inverse_problem(const InverseProblem& prob, const BlockVec& observed) {
  prob.descent.validate();
  prob.step.validate();
  const DescentConfig& dc = prob.descent;
  const radiff::MarshakProblem mp = radiff::marshak_problem(prob.model);
  const radiff::RadDiffField& field = *mp.field;
  require_shape(observed, field.shape(), "run_inverse_problem");
  const auto scale = build_scale_preconditioner(field.shape(), dc.scale_x, dc.scale_y);
  const double ac = prob.model.ac();
  const auto start = std::chrono::steady_clock::now();
  auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  };

  InverseResult res;
  res.initial = mp.initial;
  BlockVec u = mp.initial;
  ProjectionStats proj;
  int stalled = 0;
  double best_cost = INFINITY;

  for (int k = 0;; ++k) {
    Trajectory traj;
    radiff::TerminalCost cost;
    try {
      traj = integrate_forward(field, u, 0.0, prob.t_final, prob.step);
      cost = radiff::terminal_cost(field, traj.final_state(), observed);
    } catch (const std::exception& e) {
      res.outcome = Outcome::diverged;
      res.diverged_at = k;
      res.message = std::string("forward solve failed: ") + e.what();
      break;
    }
    for (const NewtonStats& s : traj.newton) res.newton_iterations += s.iterations;

    IterateRecord rec;
    rec.iteration = k;
    rec.c_e = cost.c_e;
    rec.c_t = cost.c_t;
    rec.lambda_max = proj.lambda_max;
    rec.lambda_mean = proj.lambda_mean;

    if (k > 0) {
      const double prev = res.history.back().cost();
      if (!std::isfinite(rec.cost()) || rec.cost() > dc.divergence_factor * prev) {
        rec.wall_s = elapsed();
        res.history.push_back(rec);
        res.outcome = Outcome::diverged;
        res.diverged_at = k;
        std::ostringstream os;
        os << "cost grew from " << prev << " to " << rec.cost();
        res.message = os.str();
        break;
      }
      stalled = (prev - rec.cost()) < dc.stop_tol * prev ? stalled + 1 : 0;
    }
    res.initial = u;
    res.final_state = traj.final_state();
    if (rec.cost() < best_cost) {
      best_cost = rec.cost();
      res.best_iteration = k;
      res.best_initial = u;
      res.best_final = traj.final_state();
    }

    BlockVec grad;
    if (rec.cost() > 0.0) {
      try {
        grad = adjoint_gradient(field, traj, cost.derivative, prob.step, scale.get());
      } catch (const std::exception& e) {
        rec.wall_s = elapsed();
        res.history.push_back(rec);
        res.outcome = Outcome::diverged;
        res.diverged_at = k;
        res.message = std::string("adjoint solve failed: ") + e.what();
        break;
      }
      field.mask_pinned(grad);
      rec.grad_norm_e = norm_inf(grad.x());
      rec.grad_norm_t = norm_inf(grad.y());
    }
    rec.wall_s = elapsed();
    res.history.push_back(rec);

    if (rec.cost() == 0.0 || (rec.grad_norm_e == 0.0 && rec.grad_norm_t == 0.0)) {
      res.outcome = Outcome::converged;
      break;
    }
    if (stalled >= dc.stop_window) {
      res.outcome = Outcome::converged;
      break;
    }
    if (k >= dc.max_iters) {
      res.outcome = Outcome::max_iters;
      break;
    }

    BlockVec next = gd_step(u, grad, dc.gamma);
    for (double& t : next.y()) {
      if (t < prob.model.t_floor) {
        t = prob.model.t_floor;
        ++res.floor_activations;
      }
    }
    try {
      if (dc.projection == Projection::orthogonal) {
        proj = project_orthogonal(next.x(), next.y(), ac);
      } else if (dc.projection == Projection::e_coordinate) {
        proj = project_e_coordinate(next.x(), next.y(), ac);
      } else {
        proj = {};
      }
    } catch (const ProjectionError& e) {
      res.outcome = Outcome::diverged;
      res.diverged_at = k + 1;
      res.message = e.what();
      break;
    }
    restore_pinned(field, mp.initial, next);
    u = std::move(next);
  }
  return res;
}

std::vector<SweepEntry> sweep(const InverseProblem& prob, const BlockVec& observed,
                              const std::vector<ScalePair>& scales, int workers) {
  if (scales.empty()) throw std::invalid_argument("sweep: empty scale list");
  if (workers < 1) throw std::invalid_argument("sweep: workers must be at least 1");
  std::vector<SweepEntry> out(scales.size());
  std::vector<std::string> errors(scales.size());
  const auto count = static_cast<std::ptrdiff_t>(scales.size());
#pragma omp parallel for schedule(dynamic) num_threads(workers)
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    InverseProblem entry = prob;
    entry.descent.scale_x = scales[i].x;
    entry.descent.scale_y = scales[i].y;
    out[i].scale = scales[i];
    try {
      out[i].result = run_inverse_problem(entry, observed);
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  }
  for (const std::string& e : errors) {
    if (!e.empty()) throw std::invalid_argument("sweep: " + e);
  }
  return out;
}

}  // namespace padj::optim
