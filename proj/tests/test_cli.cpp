#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "config.hpp"
#include "output.hpp"

using namespace padj;
using namespace padj::cli;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("padj_test_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// Minimal RFC-4180 reader used to check the writer.
std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows(1);
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"' && i + 1 < text.size() && text[i + 1] == '"') {
        field += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      rows.back().push_back(field);
      field.clear();
    } else if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') {
      rows.back().push_back(field);
      field.clear();
      rows.emplace_back();
      ++i;
    } else {
      field += c;
    }
  }
  if (rows.back().empty()) rows.pop_back();
  return rows;
}

}  // namespace

TEST(FormatDouble, RoundTripsRandomBitPatterns) {
  std::mt19937_64 rng(7);
  for (int k = 0; k < 20000; ++k) {
    double v;
    const std::uint64_t bits = rng();
    std::memcpy(&v, &bits, sizeof v);
    if (!std::isfinite(v)) continue;
    const std::string s = format_double(v);
    const double back = std::strtod(s.c_str(), nullptr);
    EXPECT_EQ(std::memcmp(&back, &v, sizeof v), 0) << s;
  }
}

TEST(FormatDouble, ShortestForm) {
  EXPECT_EQ(format_double(0.1), "0.1");
  EXPECT_EQ(format_double(1200.0), "1200");
  EXPECT_EQ(format_double(5e-13), "5e-13");
  EXPECT_EQ(format_double(-0.0), "-0");
  EXPECT_EQ(format_double(std::nan("")), "nan");
  EXPECT_EQ(format_double(-HUGE_VAL), "-inf");
}

TEST(Csv, QuotesOnlyWhenNeeded) {
  EXPECT_EQ(csv_field("plain"), "plain");
  EXPECT_EQ(csv_field("E [erg/cm^3]"), "E [erg/cm^3]");
  EXPECT_EQ(csv_field("a,b"), "\"a,b\"");
  EXPECT_EQ(csv_field("say \"hi\""), "\"say \"\"hi\"\"\"");
  EXPECT_EQ(csv_field("two\nlines"), "\"two\nlines\"");
}

TEST(Csv, WriterOutputParsesBack) {
  const fs::path dir = scratch("csv");
  const std::vector<std::string> header = {"x [cm]", "note, with comma", "q \"u\""};
  {
    CsvWriter w(dir / "t.csv", header);
    w.row(std::vector<double>{0.1, 1.0 / 3.0, -2.5e-300});
    w.row({"a\r\nb", "", "\"\""});
  }
  const std::string text = slurp(dir / "t.csv");
  EXPECT_EQ(text.substr(text.size() - 2), "\r\n");
  const auto rows = parse_csv(text);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0], header);
  EXPECT_EQ(std::strtod(rows[1][1].c_str(), nullptr), 1.0 / 3.0);
  EXPECT_EQ(rows[2][0], "a\r\nb");
  EXPECT_EQ(rows[2][1], "");
  EXPECT_EQ(rows[2][2], "\"\"");
}

TEST(Csv, StateFileHasUnitsAndOneRowPerCell) {
  const fs::path dir = scratch("state");
  radiff::RadDiffConfig m;
  m.n = 7;
  const auto prob = radiff::marshak_problem(m);
  write_state_csv(dir / "s.csv", m, prob.initial);
  const auto rows = parse_csv(slurp(dir / "s.csv"));
  ASSERT_EQ(rows.size(), 8u);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"x [cm]", "E [erg/cm^3]", "T [eV]"}));
  EXPECT_EQ(std::strtod(rows[3][2].c_str(), nullptr), prob.initial.y()[2]);
}

TEST(Summary, CarriesSchemaAndVersion) {
  const fs::path dir = scratch("summary");
  write_summary(dir / "s.json", "invert", {{"iterations", 4}});
  const auto j = nlohmann::json::parse(slurp(dir / "s.json"));
  EXPECT_EQ(j["schema"], kSummarySchema);
  EXPECT_EQ(j["version"], kSummaryVersion);
  EXPECT_EQ(j["command"], "invert");
  EXPECT_EQ(j["iterations"], 4);
}

TEST(Config, EmptyDocumentGivesDefaults) {
  const RunConfig cfg = parse_config("{}", "test");
  EXPECT_EQ(cfg.model.n, 100u);
  EXPECT_EQ(cfg.step.dt, 5e-13);
  EXPECT_EQ(cfg.t_final, 1e-8);
  EXPECT_EQ(cfg.descent.projection, optim::Projection::orthogonal);
  EXPECT_EQ(cfg.sweep.size(), 5u);
  EXPECT_NO_THROW(cfg.validate());
}

TEST(Config, ReadsEverySection) {
  const RunConfig cfg = parse_config(R"({
    "model": {"n": 40, "drive": false, "e_boundary": "zero_flux", "exec": "parallel"},
    "integration": {"dt": 1e-12, "t_final": 1e-10, "solver": "dense", "newton_max_iter": 9},
    "optimization": {"gamma": 0.2, "scale_x": 7, "projection": "e-coordinate",
                     "bump": {"amplitude": 10}, "sweep": [2, {"x": 3, "y": 4}]},
    "output": {"directory": "runs", "snapshot_times": [0, 1e-10], "trajectory_stride": 4,
               "record_wall_time": false},
    "grad_check": {"n": 10, "direction_kind": "scaled", "model": "linear"},
    "run": {"workers": 3, "seed": 99}
  })", "test");
  EXPECT_EQ(cfg.model.n, 40u);
  EXPECT_FALSE(cfg.model.drive);
  EXPECT_EQ(cfg.model.e_boundary, radiff::EBoundary::zero_flux);
  EXPECT_EQ(cfg.model.exec, radiff::Exec::parallel);
  EXPECT_EQ(cfg.step.solver, LinearSolverKind::dense);
  EXPECT_EQ(cfg.step.newton_max_iter, 9);
  EXPECT_EQ(cfg.descent.gamma, 0.2);
  EXPECT_EQ(cfg.descent.projection, optim::Projection::e_coordinate);
  EXPECT_EQ(cfg.bump.amplitude, 10.0);
  EXPECT_EQ(cfg.bump.width, optim::Bump{}.width);
  ASSERT_EQ(cfg.sweep.size(), 2u);
  EXPECT_EQ(cfg.sweep[0].x, 7.0);  // bare numbers take the configured scale_x
  EXPECT_EQ(cfg.sweep[0].y, 2.0);
  EXPECT_EQ(cfg.sweep[1].x, 3.0);
  EXPECT_EQ(cfg.out_dir, "runs");
  EXPECT_EQ(cfg.snapshot_times.size(), 2u);
  EXPECT_EQ(cfg.trajectory_stride, 4u);
  EXPECT_FALSE(cfg.record_wall_time);
  EXPECT_EQ(cfg.grad_check.direction_kind, "scaled");
  EXPECT_EQ(cfg.grad_check.model, "linear");
  EXPECT_EQ(cfg.workers, 3);
  EXPECT_EQ(cfg.seed, 99u);
  EXPECT_NO_THROW(cfg.validate());
}

TEST(Config, RoundTripsThroughJson) {
  RunConfig a = parse_config(R"({"model": {"n": 33}, "optimization": {"scale_y": 1e40}})", "a");
  const RunConfig b = parse_config(to_json(a), "b");
  EXPECT_EQ(to_json(a), to_json(b));
  EXPECT_EQ(b.descent.scale_y, 1e40);
}

TEST(Config, ErrorsNameTheLocation) {
  auto message = [](const std::string& text) {
    try {
      parse_config(text, "cfg.json");
    } catch (const ConfigError& e) {
      return std::string(e.what());
    }
    return std::string("no error");
  };
  EXPECT_EQ(message(R"({"model": {"cells": 3}})"), "cfg.json: model.cells: unknown key");
  EXPECT_EQ(message(R"({"modle": {}})"), "cfg.json: modle: unknown key");
  EXPECT_EQ(message(R"({"model": {"n": -3}})"), "cfg.json: model.n: expected a non-negative integer");
  EXPECT_EQ(message(R"({"integration": {"dt": "small"}})"), "cfg.json: integration.dt: expected a number");
  EXPECT_EQ(message(R"({"optimization": {"sweep": [{"x": 1, "z": 2}]}})"),
            "cfg.json: optimization.sweep[0].z: unknown key");
  EXPECT_NE(message("{"), "no error");
  EXPECT_NE(message(R"({"optimization": {"projection": "oblique"}})").find("optimization.projection"),
            std::string::npos);
}

TEST(Config, ValidationRejectsInconsistentValues) {
  auto invalid = [](const std::string& text) {
    const RunConfig cfg = parse_config(text, "t");
    EXPECT_THROW(cfg.validate(), ConfigError) << text;
  };
  invalid(R"({"integration": {"dt": -1}})");
  invalid(R"({"integration": {"dt": 3e-13, "t_final": 1e-12}})");
  invalid(R"({"output": {"snapshot_times": [2e-8]}})");
  invalid(R"({"output": {"snapshot_times": [1.2e-13]}})");
  invalid(R"({"optimization": {"sweep": [0]}})");
  invalid(R"({"optimization": {"gamma": -1}})");
  invalid(R"({"run": {"workers": 0}})");
  invalid(R"({"grad_check": {"direction_kind": "random"}})");
  invalid(R"({"grad_check": {"model": "quadratic"}})");
  invalid(R"({"model": {"n": 1}})");
}

TEST(Config, MissingFileIsAConfigError) {
  EXPECT_THROW(load_config("/nonexistent/padj.json"), ConfigError);
}
