#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "padj/blockla.hpp"
#include "padj/radiff.hpp"
#include "padj/timeint.hpp"

namespace padj::cli {

inline constexpr const char* kSummarySchema = "padj.run-summary";
inline constexpr int kSummaryVersion = 1;

/// Shortest decimal string that reads back to the same double.
std::string format_double(double v);

/// RFC-4180 field: quoted when it holds a comma, quote or line break.
std::string csv_field(const std::string& s);

class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header);
  void row(const std::vector<std::string>& fields);
  void row(const std::vector<double>& values);

 private:
  std::filesystem::path path_;
  std::ofstream out_;
};

/// x [cm], E [erg/cm^3], T [eV] per cell.
void write_state_csv(const std::filesystem::path& path, const radiff::RadDiffConfig& cfg,
                     const BlockVec& state);

/// t [s], E_0 .. E_{n-1}, T_0 .. T_{n-1}; every stride-th step plus the last.
void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& traj,
                          std::size_t stride);

/// Writes {"schema", "version", "command", ...body} as indented JSON.
void write_summary(const std::filesystem::path& path, const std::string& command,
                   const nlohmann::json& body);

}  // namespace padj::cli
