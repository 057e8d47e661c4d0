#include "config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace padj::cli {

using nlohmann::json;

namespace {

class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail(path_, "expected an object");
  }

  [[noreturn]] static void fail(const std::string& where, const std::string& what) {
    throw ConfigError(where + ": " + what);
  }

  std::string at(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  const json* find(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void number(const std::string& key, double& out) {
    if (const json* v = find(key)) {
      if (!v->is_number()) fail(at(key), "expected a number");
      out = v->get<double>();
    }
  }

  void count(const std::string& key, std::size_t& out) {
    if (const json* v = find(key)) {
      if (!v->is_number_unsigned()) fail(at(key), "expected a non-negative integer");
      out = v->get<std::size_t>();
    }
  }

  void integer(const std::string& key, int& out) {
    if (const json* v = find(key)) {
      if (!v->is_number_integer()) fail(at(key), "expected an integer");
      out = v->get<int>();
    }
  }

  void flag(const std::string& key, bool& out) {
    if (const json* v = find(key)) {
      if (!v->is_boolean()) fail(at(key), "expected true or false");
      out = v->get<bool>();
    }
  }

  void text(const std::string& key, std::string& out) {
    if (const json* v = find(key)) {
      if (!v->is_string()) fail(at(key), "expected a string");
      out = v->get<std::string>();
    }
  }

  std::optional<Section> child(const std::string& key) {
    if (const json* v = find(key)) return Section(*v, at(key));
    return std::nullopt;
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) fail(at(it.key()), "unknown key");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void read_model(Section s, radiff::RadDiffConfig& m) {
  s.count("n", m.n);
  s.number("length", m.length);
  s.number("c", m.c);
  s.number("a", m.a);
  s.number("rho", m.rho);
  s.number("cv", m.cv);
  s.number("sigma_coef", m.sigma_coef);
  s.number("t_drive", m.t_drive);
  s.number("t_floor", m.t_floor);
  s.number("t_init", m.t_init);
  s.flag("drive", m.drive);
  std::string boundary = m.e_boundary == radiff::EBoundary::dirichlet ? "dirichlet" : "zero_flux";
  s.text("e_boundary", boundary);
  if (boundary == "dirichlet") {
    m.e_boundary = radiff::EBoundary::dirichlet;
  } else if (boundary == "zero_flux") {
    m.e_boundary = radiff::EBoundary::zero_flux;
  } else {
    Section::fail(s.at("e_boundary"), "expected \"dirichlet\" or \"zero_flux\"");
  }
  std::string exec = m.exec == radiff::Exec::serial ? "serial" : "parallel";
  s.text("exec", exec);
  if (exec == "serial") {
    m.exec = radiff::Exec::serial;
  } else if (exec == "parallel") {
    m.exec = radiff::Exec::parallel;
  } else {
    Section::fail(s.at("exec"), "expected \"serial\" or \"parallel\"");
  }
  s.finish();
}

void read_integration(Section s, RunConfig& cfg) {
  s.number("dt", cfg.step.dt);
  s.number("t_final", cfg.t_final);
  s.number("newton_tol", cfg.step.newton_tol);
  s.integer("newton_max_iter", cfg.step.newton_max_iter);
  std::string solver = cfg.step.solver == LinearSolverKind::banded ? "banded" : "dense";
  s.text("solver", solver);
  if (solver == "banded") {
    cfg.step.solver = LinearSolverKind::banded;
  } else if (solver == "dense") {
    cfg.step.solver = LinearSolverKind::dense;
  } else {
    Section::fail(s.at("solver"), "expected \"banded\" or \"dense\"");
  }
  s.finish();
}

void read_optimization(Section s, RunConfig& cfg) {
  auto& d = cfg.descent;
  s.number("gamma", d.gamma);
  s.integer("max_iters", d.max_iters);
  s.number("scale_x", d.scale_x);
  s.number("scale_y", d.scale_y);
  std::string proj = optim::to_string(d.projection);
  s.text("projection", proj);
  const auto parsed = optim::parse_projection(proj);
  if (!parsed) Section::fail(s.at("projection"), "expected \"orthogonal\", \"e-coordinate\" or \"none\"");
  d.projection = *parsed;
  s.number("stop_tol", d.stop_tol);
  s.integer("stop_window", d.stop_window);
  s.number("divergence_factor", d.divergence_factor);
  if (auto b = s.child("bump")) {
    b->number("centre", cfg.bump.centre);
    b->number("width", cfg.bump.width);
    b->number("amplitude", cfg.bump.amplitude);
    b->finish();
  }
  if (const json* sw = s.find("sweep")) {
    const std::string where = s.at("sweep");
    if (!sw->is_array()) Section::fail(where, "expected an array");
    cfg.sweep.clear();
    for (std::size_t i = 0; i < sw->size(); ++i) {
      const json& e = (*sw)[i];
      const std::string item = where + "[" + std::to_string(i) + "]";
      optim::ScalePair p;
      if (e.is_number()) {
        p = {d.scale_x, e.get<double>()};
      } else {
        Section es(e, item);
        es.number("x", p.x);
        es.number("y", p.y);
        es.finish();
      }
      cfg.sweep.push_back(p);
    }
  }
  s.finish();
}

void read_output(Section s, RunConfig& cfg) {
  s.text("directory", cfg.out_dir);
  s.count("trajectory_stride", cfg.trajectory_stride);
  s.flag("record_wall_time", cfg.record_wall_time);
  if (const json* t = s.find("snapshot_times")) {
    if (!t->is_array()) Section::fail(s.at("snapshot_times"), "expected an array of times in s");
    cfg.snapshot_times.clear();
    for (std::size_t i = 0; i < t->size(); ++i) {
      if (!(*t)[i].is_number()) {
        Section::fail(s.at("snapshot_times") + "[" + std::to_string(i) + "]", "expected a number");
      }
      cfg.snapshot_times.push_back((*t)[i].get<double>());
    }
  }
  s.finish();
}

void read_grad_check(Section s, GradCheckConfig& g) {
  s.count("n", g.n);
  s.count("steps", g.steps);
  s.number("dt", g.dt);
  s.flag("drive", g.drive);
  s.number("t_base", g.t_base);
  s.number("t_peak", g.t_peak);
  s.number("t_decay", g.t_decay);
  s.number("e_skew", g.e_skew);
  s.count("directions", g.directions);
  s.text("direction_kind", g.direction_kind);
  s.number("fd_step", g.fd_step);
  s.text("model", g.model);
  s.finish();
}

void read_run(Section s, RunConfig& cfg) {
  if (auto c = s.child("model")) read_model(*c, cfg.model);
  if (auto c = s.child("integration")) read_integration(*c, cfg);
  if (auto c = s.child("optimization")) read_optimization(*c, cfg);
  if (auto c = s.child("output")) read_output(*c, cfg);
  if (auto c = s.child("grad_check")) read_grad_check(*c, cfg.grad_check);
  if (auto c = s.child("run")) {
    c->integer("workers", cfg.workers);
    if (const json* v = c->find("seed")) {
      if (!v->is_number_unsigned()) Section::fail(c->at("seed"), "expected a non-negative integer");
      cfg.seed = v->get<std::uint64_t>();
    }
    c->finish();
  }
  s.finish();
}

}  // namespace

void RunConfig::validate() const {
  try {
    model.validate();
    step.validate();
    descent.validate();
    step_count(0.0, t_final, step.dt);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (!(bump.width > 0.0)) throw ConfigError("optimization.bump.width: must be positive");
  for (const auto& p : sweep) {
    if (!(p.x > 0.0) || !(p.y > 0.0) || !std::isfinite(p.x) || !std::isfinite(p.y)) {
      throw ConfigError("optimization.sweep: scale values must be positive and finite");
    }
  }
  for (double t : snapshot_times) {
    if (!(t >= 0.0) || t > t_final * (1.0 + 1e-9)) {
      throw ConfigError("output.snapshot_times: " + std::to_string(t) + " lies outside [0, t_final]");
    }
    const double k = std::round(t / step.dt);
    if (std::abs(k * step.dt - t) > 1e-9 * std::max(t, step.dt)) {
      throw ConfigError("output.snapshot_times: " + std::to_string(t) + " is not a multiple of dt");
    }
  }
  if (workers < 1) throw ConfigError("run.workers: must be at least 1");
  const auto& g = grad_check;
  if (g.n < 3 || g.steps < 1 || !(g.dt > 0.0) || g.directions < 1 || !(g.fd_step > 0.0) ||
      !(g.t_base > 0.0) || !(g.t_decay > 0.0)) {
    throw ConfigError("grad_check: sizes, dt, fd_step, t_base and t_decay must be positive");
  }
  if (g.model != "radiation" && g.model != "linear") {
    throw ConfigError("grad_check.model: expected \"radiation\" or \"linear\"");
  }
  if (g.direction_kind != "coordinate" && g.direction_kind != "scaled") {
    throw ConfigError("grad_check.direction_kind: expected \"coordinate\" or \"scaled\"");
  }
}

RunConfig parse_config(const std::string& text, const std::string& origin) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(origin + ": " + e.what());
  }
  RunConfig cfg;
  try {
    read_run(Section(j, ""), cfg);
  } catch (const ConfigError& e) {
    throw ConfigError(origin + ": " + e.what());
  }
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path);
}

std::string to_json(const RunConfig& cfg) {
  const auto& m = cfg.model;
  json sweep = json::array();
  for (const auto& p : cfg.sweep) sweep.push_back({{"x", p.x}, {"y", p.y}});
  const auto& g = cfg.grad_check;
  json j = {
      {"model",
       {{"n", m.n}, {"length", m.length}, {"c", m.c}, {"a", m.a}, {"rho", m.rho}, {"cv", m.cv},
        {"sigma_coef", m.sigma_coef}, {"t_drive", m.t_drive}, {"t_floor", m.t_floor},
        {"t_init", m.t_init}, {"drive", m.drive},
        {"e_boundary", m.e_boundary == radiff::EBoundary::dirichlet ? "dirichlet" : "zero_flux"},
        {"exec", m.exec == radiff::Exec::serial ? "serial" : "parallel"}}},
      {"integration",
       {{"dt", cfg.step.dt}, {"t_final", cfg.t_final}, {"newton_tol", cfg.step.newton_tol},
        {"newton_max_iter", cfg.step.newton_max_iter},
        {"solver", cfg.step.solver == LinearSolverKind::banded ? "banded" : "dense"}}},
      {"optimization",
       {{"gamma", cfg.descent.gamma}, {"max_iters", cfg.descent.max_iters},
        {"scale_x", cfg.descent.scale_x}, {"scale_y", cfg.descent.scale_y},
        {"projection", optim::to_string(cfg.descent.projection)},
        {"stop_tol", cfg.descent.stop_tol}, {"stop_window", cfg.descent.stop_window},
        {"divergence_factor", cfg.descent.divergence_factor},
        {"bump", {{"centre", cfg.bump.centre}, {"width", cfg.bump.width}, {"amplitude", cfg.bump.amplitude}}},
        {"sweep", sweep}}},
      {"output",
       {{"directory", cfg.out_dir}, {"snapshot_times", cfg.snapshot_times},
        {"trajectory_stride", cfg.trajectory_stride}, {"record_wall_time", cfg.record_wall_time}}},
      {"grad_check",
       {{"n", g.n}, {"steps", g.steps}, {"dt", g.dt}, {"drive", g.drive}, {"t_base", g.t_base},
        {"t_peak", g.t_peak}, {"t_decay", g.t_decay}, {"e_skew", g.e_skew},
        {"directions", g.directions}, {"direction_kind", g.direction_kind}, {"fd_step", g.fd_step},
        {"model", g.model}}},
      {"run", {{"workers", cfg.workers}, {"seed", cfg.seed}}},
  };
  return j.dump(2);
}

}  // namespace padj::cli
