#include "output.hpp"

#include <charconv>
#include <cmath>
#include <stdexcept>

namespace padj::cli {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

CsvWriter::CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header)
    : path_(path), out_(path, std::ios::binary) {
  if (!out_) throw std::runtime_error("cannot write " + path.string());
  row(header);
}

void CsvWriter::row(const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out_ << ',';
    out_ << csv_field(fields[i]);
  }
  out_ << "\r\n";
  if (!out_) throw std::runtime_error("write failed: " + path_.string());
}

void CsvWriter::row(const std::vector<double>& values) {
  std::vector<std::string> f;
  f.reserve(values.size());
  for (double v : values) f.push_back(format_double(v));
  row(f);
}

void write_state_csv(const std::filesystem::path& path, const radiff::RadDiffConfig& cfg,
                     const BlockVec& state) {
  CsvWriter w(path, {"x [cm]", "E [erg/cm^3]", "T [eV]"});
  const Vector x = radiff::cell_centres(cfg);
  for (std::size_t i = 0; i < cfg.n; ++i) w.row(std::vector<double>{x[i], state.x()[i], state.y()[i]});
}

void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& traj,
                          std::size_t stride) {
  const BlockShape shape = traj.states.front().shape();
  std::vector<std::string> header{"t [s]"};
  for (std::size_t i = 0; i < shape.nx; ++i) header.push_back("E_" + std::to_string(i) + " [erg/cm^3]");
  for (std::size_t i = 0; i < shape.ny; ++i) header.push_back("T_" + std::to_string(i) + " [eV]");
  CsvWriter w(path, header);
  std::vector<double> row;
  for (std::size_t n = 0; n < traj.states.size(); ++n) {
    if (n % stride != 0 && n + 1 != traj.states.size()) continue;
    const Vector flat = traj.states[n].flatten();
    row.assign(1, traj.times[n]);
    row.insert(row.end(), flat.begin(), flat.end());
    w.row(row);
  }
}

void write_summary(const std::filesystem::path& path, const std::string& command,
                   const nlohmann::json& body) {
  nlohmann::json doc = {{"schema", kSummarySchema}, {"version", kSummaryVersion}, {"command", command}};
  doc.update(body);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << doc.dump(2) << '\n';
}

}  // namespace padj::cli
