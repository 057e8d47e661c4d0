#pragma once

#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "padj/precond.hpp"
#include "padj/radiff.hpp"
#include "padj/timeint.hpp"

namespace padj::optim {

enum class Projection { none, orthogonal, e_coordinate };

const char* to_string(Projection p);
/// Accepts "none", "orthogonal" and "e-coordinate" (or "e_coordinate").
std::optional<Projection> parse_projection(const std::string& s);

struct DescentConfig {
  double gamma = 0.1;
  int max_iters = 30;
  double scale_x = 1.0;
  double scale_y = 1.0;
  Projection projection = Projection::orthogonal;
  double stop_tol = 1e-3;
  int stop_window = 3;
  double divergence_factor = 10.0;

  void validate() const;
};

struct IterateRecord {
  int iteration = 0;
  double c_e = 0.0;
  double c_t = 0.0;
  double grad_norm_e = 0.0;  // of the applied descent direction, inf-norm
  double grad_norm_t = 0.0;
  double lambda_max = 0.0;   // largest |multiplier| of the projection
  double lambda_mean = 0.0;
  double wall_s = 0.0;       // since the start of the run

  double cost() const { return c_e + c_t; }
};

using TerminalDerivative = std::function<BlockVec(const BlockVec&)>;

/// xi(0) from the induced backward sweep over an existing trajectory, started
/// from xi(T) = P^-T DC(u(T)).
BlockVec adjoint_gradient(const PartitionedField& field, const Trajectory& traj,
                          const BlockVec& dc_final, const StepConfig& step,
                          const PairingMap* scale = nullptr);

/// Forward run from u0 followed by the preconditioned backward sweep.
BlockVec adjoint_gradient(const PartitionedField& field, const BlockVec& u0, double t0,
                          double t_final, const StepConfig& step, const TerminalDerivative& dc,
                          const PairingMap* scale = nullptr);

BlockVec gd_step(const BlockVec& u, const BlockVec& grad, double gamma);

/// F^-1(F(u) - gamma grad)
BlockVec mirror_descent_step(const BlockVec& u, const BlockVec& grad, const StateTransform& f,
                             double gamma);

class ProjectionError : public std::runtime_error {
 public:
  ProjectionError(const std::string& what, std::size_t component, double lo, double hi)
      : std::runtime_error(what), component(component), lo(lo), hi(hi) {}
  std::size_t component;
  double lo, hi;
};

struct ProjectionStats {
  double lambda_max = 0.0;
  double lambda_mean = 0.0;
};

/// Closest point on E = ac T^4 in each (E_i, T_i) plane. E and T are updated
/// in place. The multiplier reported is E_un - E'.
ProjectionStats project_orthogonal(std::span<double> e, std::span<double> t, double ac);

/// E' = ac T^4 with T unchanged.
ProjectionStats project_e_coordinate(std::span<double> e, std::span<const double> t, double ac);

struct InverseProblem {
  radiff::RadDiffConfig model;
  StepConfig step{5e-13};
  double t_final = 1e-8;
  DescentConfig descent;
};

struct Bump {
  double centre = 0.125;     // cm
  double width = 0.025;      // cm
  double amplitude = 50.0;   // eV
};

/// Equilibrium initial state with a Gaussian bump added to T_0.
BlockVec perturbed_initial_state(const radiff::RadDiffConfig& cfg, const Bump& bump);

struct Targets {
  BlockVec initial;     // initial state that produced the observation
  BlockVec observed;    // E*, T* at t_final
  BlockVec unperturbed; // final state of the constant-equilibrium run
};

Targets make_targets(const InverseProblem& prob, const Bump& bump);

enum class Outcome { converged, max_iters, diverged };
const char* to_string(Outcome o);

struct InverseResult {
  Outcome outcome = Outcome::max_iters;
  int diverged_at = -1;
  std::string message;
  std::vector<IterateRecord> history;
  BlockVec initial;        // last accepted iterate
  BlockVec final_state;    // its state at t_final
  int best_iteration = 0;  // lowest total cost in history
  BlockVec best_initial;
  BlockVec best_final;
  long newton_iterations = 0;
  long floor_activations = 0;  // temperatures raised to t_floor before projection
};

/// Projected preconditioned gradient descent from the constant-equilibrium
/// initial state of the Marshak problem.
InverseResult run_inverse_problem(const InverseProblem& prob, const BlockVec& observed);

/// Diagonal scale preconditioner diag(x I, y I) on the (E, T) costate.
struct ScalePair {
  double x = 1.0;
  double y = 1.0;
};

struct SweepEntry {
  ScalePair scale;
  InverseResult result;
};

/// One run per scale pair, executed concurrently on up to `workers` threads.
std::vector<SweepEntry> sweep(const InverseProblem& prob, const BlockVec& observed,
                              const std::vector<ScalePair>& scales, int workers);

}  // namespace padj::optim
