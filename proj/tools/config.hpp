#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "padj/optim.hpp"
#include "padj/radiff.hpp"
#include "padj/timeint.hpp"

namespace padj::cli {

/// Problem in the configuration: unreadable file, bad JSON, unknown key, wrong
/// type or an invalid value. The message names the offending location.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GradCheckConfig {
  std::size_t n = 20;
  std::size_t steps = 200;
  double dt = 1e-12;
  bool drive = false;
  // initial temperature T_i = base + peak exp(-i / decay), eV
  double t_base = 0.5;
  double t_peak = 1.5;
  double t_decay = 4.0;
  double e_skew = 0.3;      // E_i = ac T_i^4 (1 + e_skew sin(1.7 i))
  std::size_t directions = 20;
  std::string direction_kind = "coordinate";  // or "scaled"
  double fd_step = 1e-5;
  std::string model = "radiation";  // or "linear"
};

struct RunConfig {
  radiff::RadDiffConfig model;
  StepConfig step{5e-13};
  double t_final = 1e-8;
  optim::DescentConfig descent;
  optim::Bump bump;
  std::vector<optim::ScalePair> sweep{{1.0, 1.0}, {1.0, 1e3}, {1.0, 1e6}, {1.0, 1e9}, {1.0, 1e12}};
  std::vector<double> snapshot_times;
  std::string out_dir = "out";
  std::size_t trajectory_stride = 0;  // 0: no trajectory.csv
  bool record_wall_time = true;       // false writes wall_s as 0 for reproducible files
  GradCheckConfig grad_check;
  int workers = 1;
  std::uint64_t seed = 1;

  void validate() const;
};

/// Reads a JSON configuration; absent keys keep their defaults.
RunConfig load_config(const std::string& path);
RunConfig parse_config(const std::string& text, const std::string& origin);

/// The configuration as JSON text, in the same schema load_config reads.
std::string to_json(const RunConfig& cfg);

}  // namespace padj::cli
