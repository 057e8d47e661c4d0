#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <random>

#include "CLI11.hpp"
#include "config.hpp"
#include "output.hpp"
#include "padj/optim.hpp"
#include "padj/radiff.hpp"
#include "padj/timeint.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace padj;
using namespace padj::cli;

namespace {

enum Exit { ok = 0, config_error = 2, solver_failure = 3, check_failure = 4, diverged = 5 };

struct Overrides {
  std::string config_path;
  std::string out;
  std::vector<double> scales;
  std::string projection;
  bool strict = false;
  int workers = 0;
  std::uint64_t seed = 0;
  bool seed_given = false;
};

RunConfig resolve(const Overrides& o) {
  RunConfig cfg = o.config_path.empty() ? RunConfig{} : load_config(o.config_path);
  if (!o.out.empty()) cfg.out_dir = o.out;
  if (!o.projection.empty()) {
    const auto p = optim::parse_projection(o.projection);
    if (!p) throw ConfigError("--projection: expected orthogonal, e-coordinate or none");
    cfg.descent.projection = *p;
  }
  if (!o.scales.empty()) {
    cfg.descent.scale_y = o.scales.back();
    cfg.sweep.clear();
    for (double s : o.scales) cfg.sweep.push_back({cfg.descent.scale_x, s});
  }
  if (o.workers > 0) cfg.workers = o.workers;
  if (o.seed_given) cfg.seed = o.seed;
  cfg.validate();
  return cfg;
}

fs::path prepare_dir(const fs::path& dir) {
  fs::create_directories(dir);
  return dir;
}

json newton_summary(const Trajectory& tr) {
  long total = 0;
  int most = 0;
  double worst = 0.0;
  for (const auto& s : tr.newton) {
    total += s.iterations;
    most = std::max(most, s.iterations);
    worst = std::max(worst, s.residual);
  }
  return {{"total_iterations", total}, {"max_iterations", most}, {"max_residual", worst}};
}

double wall_time(const RunConfig& cfg, std::chrono::steady_clock::time_point t0) {
  if (!cfg.record_wall_time) return 0.0;
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------------------

int cmd_forward(const RunConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  const fs::path out = prepare_dir(cfg.out_dir);
  const auto prob = radiff::marshak_problem(cfg.model);
  const Trajectory tr = integrate_forward(*prob.field, prob.initial, 0.0, cfg.t_final, cfg.step);
  if (cfg.trajectory_stride > 0) write_trajectory_csv(out / "trajectory.csv", tr, cfg.trajectory_stride);
  json snaps = json::array();
  for (std::size_t k = 0; k < cfg.snapshot_times.size(); ++k) {
    const double t = cfg.snapshot_times[k];
    const auto idx = static_cast<std::size_t>(std::llround(t / cfg.step.dt));
    char name[32];
    std::snprintf(name, sizeof name, "snapshot_%03zu.csv", k);
    write_state_csv(out / name, cfg.model, tr.states.at(idx));
    snaps.push_back({{"t", tr.times[idx]}, {"step", idx}, {"file", name}});
  }
  write_summary(out / "summary.json", "forward",
                {{"config", json::parse(to_json(cfg))},
                 {"steps", tr.steps()},
                 {"newton", newton_summary(tr)},
                 {"floor_activations", prob.field->floor_activations()},
                 {"wavefront_cm", radiff::wavefront_position(cfg.model, tr.final_state(), 0.5 * cfg.model.t_drive)},
                 {"snapshots", snaps},
                 {"wall_s", wall_time(cfg, t0)}});
  std::printf("forward: %zu steps, %zu snapshots written to %s\n", tr.steps(), cfg.snapshot_times.size(),
              out.string().c_str());
  return ok;
}

// ---------------------------------------------------------------------------

struct CheckProblem {
  std::shared_ptr<const PartitionedField> field;
  StepConfig step;
  double t_final = 0.0;
  BlockVec u0;
  BlockVec target;
  BlockVec weight;  // C(u) = 1/2 sum_i w_i (u_i - target_i)^2, zero on held DOFs
};

// Smooth profile f_i = base + peak exp(-i / decay), used for both test models.
Vector decaying_profile(const GradCheckConfig& g, std::size_t n, double warm) {
  Vector v(n);
  for (std::size_t i = 0; i < n; ++i) {
    v[i] = warm * (g.t_base + g.t_peak * std::exp(-static_cast<double>(i) / g.t_decay));
  }
  return v;
}

double skew(const GradCheckConfig& g, std::size_t i) {
  return 1.0 + g.e_skew * std::sin(1.7 * static_cast<double>(i));
}

CheckProblem radiation_check(const RunConfig& cfg) {
  const GradCheckConfig& g = cfg.grad_check;
  radiff::RadDiffConfig mc = cfg.model;
  mc.n = g.n;
  mc.drive = g.drive;
  auto f = std::make_shared<const radiff::RadDiffField>(mc);
  CheckProblem cp{f, cfg.step, static_cast<double>(g.steps) * g.dt, {}, {}, {}};
  cp.step.dt = g.dt;
  auto start = [&](double warm) {
    BlockVec u = radiff::equilibrium_state(mc, decaying_profile(g, mc.n, warm));
    for (std::size_t i = 0; i < mc.n; ++i) {
      if (!f->e_pinned(i)) u.x()[i] *= skew(g, i);
    }
    return u;
  };
  cp.u0 = start(1.0);
  cp.target = integrate_forward(*f, start(1.05), 0.0, cp.t_final, cp.step).final_state();
  cp.weight = BlockVec(cp.u0.shape(), mc.dx());
  f->mask_pinned(cp.weight);
  return cp;
}

BandMatrix second_difference(std::size_t n) {
  BandMatrix d(n, n, 1, 1);
  for (std::size_t i = 0; i < n; ++i) {
    d.at(i, i) = -2.0;
    if (i > 0) d.at(i, i - 1) = 1.0;
    if (i + 1 < n) d.at(i, i + 1) = 1.0;
  }
  return d;
}

// du/dt = A1 u_n + A2 u_{n+1}: lagged diffusion with a one-way coupling into
// x, stiff implicit relaxation with coupling back into y.
CheckProblem linear_check(const RunConfig& cfg) {
  const GradCheckConfig& g = cfg.grad_check;
  const std::size_t n = g.n;
  const BlockShape shape{n, n};
  BlockOp a1 = BlockOp::zeros(shape), a2 = BlockOp::zeros(shape);
  a1.xx = second_difference(n);
  a1.xy = BandMatrix::identity(n).scaled(0.5);
  a2.xx = BandMatrix::identity(n).scaled(-1.0);
  a2.yy = second_difference(n).plus(BandMatrix::identity(n), -3.0);
  a2.yx = BandMatrix::identity(n).scaled(0.5);
  auto f = std::make_shared<const LinearSplitField>(a1, a2);
  CheckProblem cp{f, cfg.step, static_cast<double>(g.steps) * g.dt, {}, {}, {}};
  cp.step.dt = g.dt;
  auto start = [&](double warm) {
    Vector y = decaying_profile(g, n, warm), x = y;
    for (std::size_t i = 0; i < n; ++i) x[i] *= skew(g, i);
    return BlockVec(x, y);
  };
  cp.u0 = start(1.0);
  cp.target = integrate_forward(*f, start(1.05), 0.0, cp.t_final, cp.step).final_state();
  cp.weight = BlockVec(shape, 1.0);
  return cp;
}

int cmd_grad_check(const RunConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  const fs::path out = prepare_dir(cfg.out_dir);
  const GradCheckConfig& g = cfg.grad_check;
  const CheckProblem cp = g.model == "linear" ? linear_check(cfg) : radiation_check(cfg);
  const PartitionedField& f = *cp.field;
  const BlockVec& u0 = cp.u0;
  const BlockVec& weight = cp.weight;
  auto run = [&](const BlockVec& w) { return integrate_forward(f, w, 0.0, cp.t_final, cp.step); };
  auto masked = [&](BlockVec v) {
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (weight[i] == 0.0) v[i] = 0.0;
    }
    return v;
  };

  const Trajectory tr = run(u0);
  BlockVec dc = tr.final_state() - cp.target;
  for (std::size_t i = 0; i < dc.size(); ++i) dc[i] *= weight[i];
  const auto p_induced = integrate_adjoint(f, tr, dc, cp.step);
  const auto p_naive = integrate_adjoint(f, tr, dc, cp.step, AdjointScheme::naive);
  const BlockVec& grad = p_induced.front();

  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  BlockVec du0(u0.shape());
  for (std::size_t i = 0; i < du0.size(); ++i) du0[i] = unit(rng) * std::max(std::abs(u0[i]), 1.0);
  const auto du = propagate_variation(f, tr, masked(du0), cp.step);
  const double ref = std::abs(dot(p_induced.back(), du.back()));
  const auto d_induced = pairing_drift(p_induced, du);
  const auto d_naive = pairing_drift(p_naive, du);
  double induced_max = 0.0;
  {
    CsvWriter w(out / "drift.csv", {"step", "induced [rel]", "naive [rel]"});
    for (std::size_t n = 0; n < d_induced.size(); ++n) {
      const double a = std::abs(d_induced[n]) / ref;
      induced_max = std::max(induced_max, a);
      w.row({std::to_string(n), format_double(a), format_double(std::abs(d_naive[n]) / ref)});
    }
  }
  const double naive_total = std::abs(d_naive.back()) / ref;

  std::uniform_int_distribution<std::size_t> pick(0, u0.size() - 1);
  double mismatch = 0.0;
  CsvWriter w(out / "gradient.csv", {"direction", "adjoint [cost]", "fd [cost]", "rel_error [1]"});
  for (std::size_t k = 0; k < g.directions; ++k) {
    BlockVec dir(u0.shape());
    if (g.direction_kind == "coordinate") {
      std::size_t i;
      do i = pick(rng); while (weight[i] == 0.0);
      dir[i] = std::max(std::abs(u0[i]), 1.0);
    } else {
      for (std::size_t i = 0; i < dir.size(); ++i) dir[i] = unit(rng) * std::abs(u0[i]);
      dir = masked(dir);
    }
    BlockVec up = u0, down = u0;
    up.axpy(g.fd_step, dir);
    down.axpy(-g.fd_step, dir);
    const BlockVec a = run(up).final_state(), b = run(down).final_state();
    // C(a) - C(b) without forming the two (large) costs separately
    double diff = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) {
      diff += 0.5 * weight[j] * (a[j] - b[j]) * (a[j] + b[j] - 2.0 * cp.target[j]);
    }
    const double fd_val = diff / (2.0 * g.fd_step);
    const double adj = dot(grad, dir);
    const double err = std::abs(adj - fd_val) / std::max(std::abs(fd_val), 1e-300);
    mismatch = std::max(mismatch, err);
    w.row({std::to_string(k), format_double(adj), format_double(fd_val), format_double(err)});
  }

  const bool pass = induced_max <= 1e-10 && mismatch <= 1e-4;
  write_summary(out / "summary.json", "grad-check",
                {{"config", json::parse(to_json(cfg))},
                 {"model", g.model},
                 {"steps", tr.steps()},
                 {"max_gradient_mismatch", mismatch},
                 {"max_induced_drift", induced_max},
                 {"naive_total_drift", naive_total},
                 {"pass", pass},
                 {"wall_s", wall_time(cfg, t0)}});
  std::printf("grad-check (%s): gradient mismatch %s, induced drift %s, naive drift %s: %s\n",
              g.model.c_str(), format_double(mismatch).c_str(), format_double(induced_max).c_str(),
              format_double(naive_total).c_str(), pass ? "ok" : "FAILED");
  return pass ? ok : check_failure;
}

// ---------------------------------------------------------------------------

json outcome_json(const optim::InverseResult& r) {
  const double c0 = r.history.empty() ? 0.0 : r.history.front().cost();
  const double best = r.history.empty() ? 0.0 : r.history[static_cast<std::size_t>(r.best_iteration)].cost();
  json j = {{"outcome", optim::to_string(r.outcome)},
            {"iterations", r.history.empty() ? 0 : r.history.size() - 1},
            {"best_iteration", r.best_iteration},
            {"initial_cost", c0},
            {"best_cost", best},
            {"newton_iterations", r.newton_iterations},
            {"floor_activations", r.floor_activations},
            {"message", r.message}};
  j["diverged_at"] = r.outcome == optim::Outcome::diverged ? json(r.diverged_at) : json(nullptr);
  j["cost_reduction"] = best > 0.0 ? json(c0 / best) : json(nullptr);
  return j;
}

void write_run(const fs::path& dir, const RunConfig& cfg, const optim::Targets& tg,
               const optim::InverseResult& r) {
  const radiff::RadDiffConfig& model = cfg.model;
  prepare_dir(dir);
  {
    CsvWriter w(dir / "convergence.csv",
                {"iter", "C_E [erg^2/cm^5]", "C_T [eV^2 cm]", "grad_norm_E [cost/(erg/cm^3)]",
                 "grad_norm_T [cost/eV]", "wall_s [s]"});
    for (const auto& h : r.history) {
      w.row({std::to_string(h.iteration), format_double(h.c_e), format_double(h.c_t),
             format_double(h.grad_norm_e), format_double(h.grad_norm_t), format_double(cfg.record_wall_time ? h.wall_s : 0.0)});
    }
  }
  if (r.best_initial.size() == 0) return;
  write_state_csv(dir / "initial_reconstructed.csv", model, r.best_initial);
  CsvWriter w(dir / "final_comparison.csv",
              {"x [cm]", "E_unperturbed [erg/cm^3]", "T_unperturbed [eV]", "E_observed [erg/cm^3]",
               "T_observed [eV]", "E_reconstructed [erg/cm^3]", "T_reconstructed [eV]"});
  const Vector x = radiff::cell_centres(model);
  for (std::size_t i = 0; i < model.n; ++i) {
    w.row(std::vector<double>{x[i], tg.unperturbed.x()[i], tg.unperturbed.y()[i], tg.observed.x()[i],
                              tg.observed.y()[i], r.best_final.x()[i], r.best_final.y()[i]});
  }
}

optim::InverseProblem inverse_problem(const RunConfig& cfg) {
  return {cfg.model, cfg.step, cfg.t_final, cfg.descent};
}

int cmd_invert(const RunConfig& cfg, bool strict) {
  const auto t0 = std::chrono::steady_clock::now();
  const fs::path out = prepare_dir(cfg.out_dir);
  const optim::InverseProblem prob = inverse_problem(cfg);
  const optim::Targets tg = optim::make_targets(prob, cfg.bump);
  write_state_csv(out / "initial_true.csv", cfg.model, tg.initial);
  const optim::InverseResult r = optim::run_inverse_problem(prob, tg.observed);
  write_run(out, cfg, tg, r);
  json body = outcome_json(r);
  body["config"] = json::parse(to_json(cfg));
  body["scale"] = {{"x", cfg.descent.scale_x}, {"y", cfg.descent.scale_y}};
  body["projection"] = optim::to_string(cfg.descent.projection);
  body["wall_s"] = wall_time(cfg, t0);
  write_summary(out / "summary.json", "invert", body);
  if (r.outcome == optim::Outcome::diverged) {
    std::printf("invert: diverged at iteration %d", r.diverged_at);
  } else {
    std::printf("invert: %s after %zu iterations", optim::to_string(r.outcome), r.history.size() - 1);
  }
  std::printf(", cost %s -> %s\n", format_double(body["initial_cost"].get<double>()).c_str(),
              format_double(body["best_cost"].get<double>()).c_str());
  return strict && r.outcome == optim::Outcome::diverged ? diverged : ok;
}

int cmd_sweep(const RunConfig& cfg, bool strict) {
  const auto t0 = std::chrono::steady_clock::now();
  if (cfg.sweep.empty()) throw ConfigError("optimization.sweep: the scale list is empty");
  const fs::path out = prepare_dir(cfg.out_dir);
  const optim::InverseProblem prob = inverse_problem(cfg);
  const optim::Targets tg = optim::make_targets(prob, cfg.bump);
  write_state_csv(out / "initial_true.csv", cfg.model, tg.initial);
  const auto entries = optim::sweep(prob, tg.observed, cfg.sweep, cfg.workers);
  json rows = json::array();
  bool any_ok = false;
  CsvWriter table(out / "sweep.csv",
                  {"entry", "scale_x [1]", "scale_y [1]", "outcome", "diverged_at", "iterations",
                   "initial_cost [cost]", "best_cost [cost]", "directory"});
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& e = entries[i];
    char name[32];
    std::snprintf(name, sizeof name, "entry_%02zu", i);
    write_run(out / name, cfg, tg, e.result);
    json j = outcome_json(e.result);
    j["scale"] = {{"x", e.scale.x}, {"y", e.scale.y}};
    j["directory"] = name;
    write_summary(out / name / "summary.json", "invert", j);
    rows.push_back(j);
    any_ok = any_ok || e.result.outcome != optim::Outcome::diverged;
    table.row({std::to_string(i), format_double(e.scale.x), format_double(e.scale.y),
               optim::to_string(e.result.outcome),
               e.result.outcome == optim::Outcome::diverged ? std::to_string(e.result.diverged_at) : "",
               std::to_string(e.result.history.size() - 1), format_double(j["initial_cost"].get<double>()),
               format_double(j["best_cost"].get<double>()), name});
    std::printf("sweep entry %zu (%s, %s): %s\n", i, format_double(e.scale.x).c_str(),
                format_double(e.scale.y).c_str(), optim::to_string(e.result.outcome));
  }
  write_summary(out / "summary.json", "sweep",
                {{"config", json::parse(to_json(cfg))},
                 {"projection", optim::to_string(cfg.descent.projection)},
                 {"entries", rows},
                 {"wall_s", wall_time(cfg, t0)}});
  return strict && !any_ok ? diverged : ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Preconditioned adjoint solver for the 1D radiation diffusion inverse problem"};
  app.require_subcommand(1);
  app.fallthrough();
  Overrides o;
  app.add_option("--config", o.config_path, "JSON configuration file")->check(CLI::ExistingFile);
  app.add_option("--out", o.out, "output directory");
  app.add_option("--scale", o.scales, "scale_y of the preconditioner; repeat for a sweep list");
  app.add_option("--projection", o.projection, "orthogonal | e-coordinate | none");
  app.add_flag("--strict", o.strict, "exit with status 5 when the inversion diverges");
  app.add_option("--workers", o.workers, "concurrent sweep entries")->check(CLI::PositiveNumber);
  auto* seed = app.add_option("--seed", o.seed, "seed for the randomized checks");

  auto* forward = app.add_subcommand("forward", "integrate the Marshak problem and write snapshots");
  auto* grad = app.add_subcommand("grad-check", "adjoint gradient and conservation checks");
  auto* invert = app.add_subcommand("invert", "recover the initial state from the observed final state");
  auto* sweep = app.add_subcommand("sweep", "one inversion per preconditioner scale");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? ok : config_error;
  }
  o.seed_given = seed->count() > 0;

  try {
    const RunConfig cfg = resolve(o);
    if (forward->parsed()) return cmd_forward(cfg);
    if (grad->parsed()) return cmd_grad_check(cfg);
    if (invert->parsed()) return cmd_invert(cfg, o.strict);
    if (sweep->parsed()) return cmd_sweep(cfg, o.strict);
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return config_error;
  } catch (const NewtonError& e) {
    std::cerr << "solver failure: " << e.what() << '\n';
    return solver_failure;
  } catch (const StepSolveError& e) {
    std::cerr << "solver failure: " << e.what() << '\n';
    return solver_failure;
  } catch (const std::domain_error& e) {
    std::cerr << "solver failure: " << e.what() << '\n';
    return solver_failure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return ok;
}
