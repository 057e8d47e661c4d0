#pragma once

#include <atomic>
#include <cstddef>
#include <memory>
#include <string>
#include <vector>

#include "padj/adjoint_core.hpp"
#include "padj/timeint.hpp"

namespace padj::radiff {

/// Boundary treatment of E at x = 0 when the drive is active.
enum class EBoundary { dirichlet, zero_flux };

/// Per-cell kernel execution: a plain loop (reference) or an OpenMP loop.
enum class Exec { serial, parallel };

/// CGS-eV units throughout: cm, s, erg/cm^3, eV.
struct RadDiffConfig {
  std::size_t n = 100;
  double length = 0.25;
  double c = 2.99792e10;
  double a = 137.2;
  double rho = 1.0;
  double cv = 3e12;
  double sigma_coef = 1e12;  // sigma_a(T) = sigma_coef / T^3
  double t_drive = 1200.0;
  double t_floor = 1e-6;
  double t_init = 0.025;
  bool drive = true;
  EBoundary e_boundary = EBoundary::dirichlet;
  Exec exec = Exec::serial;

  void validate() const;
  double dx() const { return length / static_cast<double>(n); }
  double ac() const { return a * c; }
  BlockShape shape() const { return {n, n}; }
};

double sigma_a(const RadDiffConfig& cfg, double t);
double diffusion_coefficient(const RadDiffConfig& cfg, double t);

/// Lumped mass matrices, the diffusion operator K(T), the absorption operator
/// Sigma_a(T) and the emission vector Em(T1, T2), all in weak form and before
/// boundary rows are removed.
struct AssembledOps {
  BandMatrix m;
  BandMatrix m_rhocv;
  BandMatrix k;
  BandMatrix sigma;
};

AssembledOps assemble(const RadDiffConfig& cfg, std::span<const double> t);
Vector emission(const RadDiffConfig& cfg, std::span<const double> t1, std::span<const double> t2);

/// Semi-implicit split of the semi-discrete system: K, Sigma_a and the opacity
/// factor of Em take T from slot 1; E and the T^4 factor of Em from slot 2.
class RadDiffField final : public PartitionedField {
 public:
  explicit RadDiffField(RadDiffConfig cfg);

  const RadDiffConfig& config() const { return cfg_; }
  BlockShape shape() const override { return cfg_.shape(); }
  BlockVec value(const FieldPoint& at) const override;
  BlockVec jvp(Slot slot, const FieldPoint& at, const BlockVec& du) const override;
  BlockVec vjp(Slot slot, const FieldPoint& at, const BlockVec& w) const override;
  BlockOp jacobian(Slot slot, const FieldPoint& at) const override;
  const PairingMap* mass() const override { return mass_.get(); }

  /// DOFs whose rows are held fixed by the boundary drive.
  bool e_pinned(std::size_t i) const { return i == 0 && cfg_.drive && cfg_.e_boundary == EBoundary::dirichlet; }
  bool t_pinned(std::size_t i) const { return i == 0 && cfg_.drive; }
  /// Zero out the entries of v belonging to pinned DOFs.
  void mask_pinned(BlockVec& v) const;

  /// Number of material evaluations that hit the temperature floor.
  long floor_activations() const { return floor_hits_.load(); }

 private:
  RadDiffConfig cfg_;
  std::shared_ptr<const DiagonalPairing> mass_;
  mutable std::atomic<long> floor_hits_{0};
};

struct MarshakProblem {
  std::shared_ptr<const RadDiffField> field;
  BlockVec initial;
};

/// Uniform equilibrium at t_init with the drive cell set to t_drive.
MarshakProblem marshak_problem(const RadDiffConfig& cfg);

/// Equilibrium state E = ac T^4 for the given temperatures, with the boundary
/// cell set as in marshak_problem.
BlockVec equilibrium_state(const RadDiffConfig& cfg, std::span<const double> t);

struct TerminalCost {
  double c_e = 0.0;
  double c_t = 0.0;
  BlockVec derivative;  // (dx (E - E*), dx (T - T*)) on free DOFs

  double total() const { return c_e + c_t; }
};

/// C_E = 1/2 (E - E*)^T M (E - E*), C_T = 1/2 (T - T*)^T M (T - T*) over free DOFs.
TerminalCost terminal_cost(const RadDiffField& field, const BlockVec& state, const BlockVec& target);

/// Position (cm) of the last cell whose temperature exceeds threshold.
double wavefront_position(const RadDiffConfig& cfg, const BlockVec& state, double threshold);

/// Cell-centre coordinates (cm).
Vector cell_centres(const RadDiffConfig& cfg);

}  // namespace padj::radiff
