#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "dg/config.hpp"
#include "dg/error.hpp"
#include "dg/experiment.hpp"

using namespace dg;
namespace fs = std::filesystem;

namespace {

std::vector<std::string> read_lines(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

std::vector<std::string> fields(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  for (std::string f; std::getline(ss, f, ',');) out.push_back(f);
  return out;
}

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("dg_test_" + name);
  fs::remove_all(p);
  return p;
}

ExperimentConfig quick(ExperimentKind kind, GeneratorConfig dataset) {
  ExperimentConfig c;
  c.kind = kind;
  c.dataset = std::move(dataset);
  c.train.epochs = 2;
  c.train.batch_size = 16;
  c.seeds = {0, 1, 2};
  return c;
}

StyleShapesConfig small_styles(std::size_t classes, std::size_t per_cell) {
  StyleShapesConfig s;
  s.classes = classes;
  s.styles = {Style::Plain, Style::PaintJitter, Style::CartoonFlat, Style::SketchOutline};
  s.per_cell = per_cell;
  return s;
}

}  // namespace

TEST_CASE("minimal config gets the training defaults") {
  const auto c = experiment_config_from_json(nlohmann::json::parse(R"({"kind": "shortcut", "seeds": [0]})"));
  CHECK(c.train.epochs == 30);
  CHECK(c.train.batch_size == 32);
  CHECK(c.train.lr() == 0.01);
  CHECK(c.kind == ExperimentKind::Shortcut);
  CHECK(std::holds_alternative<StyleShapesConfig>(c.dataset));
  CHECK(std::get<StyleShapesConfig>(c.dataset).classes == 10);
}

TEST_CASE("config validation names the field") {
  CHECK_THROWS_AS(experiment_config_from_json({{"kind", "bogus"}, {"seeds", {0}}}), ConfigError);
  try {
    experiment_config_from_json({{"kind", "shortcut"}, {"seeds", nlohmann::json::array()}});
    FAIL("empty seeds accepted");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("seeds") != std::string::npos);
  }
  try {
    experiment_config_from_json({{"kind", "cwdg-benchmark"}, {"seeds", {0}}, {"train", {{"epochs", 0}}}});
    FAIL("zero epochs accepted");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("train") != std::string::npos);
  }
  CHECK_THROWS_AS(load_config("/nonexistent/dg.json"), IoError);
}

TEST_CASE("config round trip") {
  for (const char* kind : {"shortcut", "pairwise-matrix", "incremental", "prior-injection", "tdg-benchmark",
                           "cwdg-benchmark", "optimizer-ablation"}) {
    const auto c = experiment_config_from_json({{"kind", kind}, {"seeds", {3, 4}}, {"workers", 2}});
    const auto j = to_json(c);
    CHECK(to_json(experiment_config_from_json(j)) == j);
  }
  auto c = quick(ExperimentKind::PriorInjection, small_styles(5, 4));
  c.protocol.class_order = {2, 1, 0, 3, 4};
  c.protocol.base_domain = "paint-jitter";
  c.protocol.injected_domain = "sketch-outline";
  c.train.trainer = TrainerKind::Idfm;
  const auto j = to_json(c);
  CHECK(to_json(experiment_config_from_json(nlohmann::json::parse(j.dump()))) == j);
}

TEST_CASE("cwdg benchmark run count and summary") {
  auto c = quick(ExperimentKind::CwdgBenchmark, small_styles(7, 4));
  c.protocol.use_presets = false;
  c.protocol.random_assignments = 1;
  c.protocol.trainers = {TrainerKind::Erm, TrainerKind::Idfm};
  const auto report = run_experiment(c);
  REQUIRE(report.complete);
  CHECK(report.runs.size() == 6);
  for (const auto& r : report.runs) {
    CHECK(r.metrics.at("a_min") <= r.metrics.at("a_sel"));
    CHECK(r.metrics.at("a_sel") <= r.metrics.at("a_max"));
  }
  // Hand-averaged per-group means.
  for (const auto& row : report.summary()) {
    double total = 0.0;
    std::size_t n = 0;
    for (const auto& r : report.runs) {
      if (r.group != row.group) continue;
      total += r.metrics.at(row.metric);
      ++n;
    }
    CHECK(row.n == n);
    CHECK(row.mean == doctest::Approx(total / static_cast<double>(n)).epsilon(1e-14));
  }

  const auto dir = scratch("cwdg");
  emit_report(report, dir.string());
  const auto rows = read_lines(dir / "summary.csv");
  REQUIRE(rows.size() == report.summary().size() + 1);
  CHECK(rows[0] == "group,metric,n,mean,std");
  const auto summary = report.summary();
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto f = fields(rows[i]);
    REQUIRE(f.size() == 5);
    CHECK(f[0] == summary[i - 1].group);
    CHECK(std::stod(f[3]) == summary[i - 1].mean);
  }
  CHECK(fs::exists(dir / "runs" / "000" / "split.json"));
  CHECK(fs::exists(dir / "report.json"));
  CHECK(!fs::exists(dir / "PARTIAL"));
  fs::remove_all(dir);
}

TEST_CASE("experiments are deterministic across worker counts") {
  auto c = quick(ExperimentKind::TdgBenchmark, small_styles(3, 4));
  c.seeds = {0, 1};
  c.protocol.folds = {"sketch-outline"};
  const auto serial = report_to_json(run_experiment(c));
  c.workers = 3;
  auto parallel = report_to_json(run_experiment(c));
  CHECK(parallel["runs"] == serial["runs"]);
  CHECK(parallel["summary"] == serial["summary"]);
}

TEST_CASE("incremental gives one row per step and seed") {
  auto c = quick(ExperimentKind::Incremental, small_styles(4, 4));
  c.protocol.test_domain = "sketch-outline";
  const auto report = run_experiment(c);
  REQUIRE(report.complete);
  CHECK(report.runs.size() == 3 * c.seeds.size());
  for (const auto& r : report.runs) CHECK(r.metrics.count("fid") == 1);
  const auto dir = scratch("incremental");
  emit_report(report, dir.string());
  const auto fid = read_lines(dir / "fid.csv");
  CHECK(fid.size() == 1 + 3 * c.seeds.size());
  CHECK(fid[0] == "experiment,run,seed,step,d");
  fs::remove_all(dir);
}

TEST_CASE("pairwise matrix has one row per domain pair") {
  StyleShapesConfig s;
  s.classes = 3;
  s.styles = {Style::Plain, Style::ClassShade, Style::SketchOutline};
  s.per_cell = 10;
  auto c = quick(ExperimentKind::PairwiseMatrix, s);
  c.seeds = {0};
  const auto report = run_experiment(c);
  REQUIRE(report.complete);
  const auto dir = scratch("pairwise");
  emit_report(report, dir.string());
  const auto matrix = read_lines(dir / "matrix.csv");
  CHECK(matrix.size() == 1 + 9);
  CHECK(fs::exists(dir / "embeddings.csv"));
  fs::remove_all(dir);
}

TEST_CASE("prior injection sweep writes histograms") {
  auto c = quick(ExperimentKind::PriorInjection, small_styles(3, 6));
  c.seeds = {0};
  const auto report = run_experiment(c);
  REQUIRE(report.complete);
  CHECK(report.runs.size() == 3);
  for (const auto& r : report.runs) {
    CHECK(r.histogram.size() == 3);
    CHECK(r.metrics.count("injected_test_fraction") == 1);
  }
  const auto dir = scratch("prior");
  emit_report(report, dir.string());
  CHECK(read_lines(dir / "histogram.csv").size() == 1 + 3 * 3);
  fs::remove_all(dir);
}

TEST_CASE("unknown domains are rejected before any run") {
  auto c = quick(ExperimentKind::TdgBenchmark, small_styles(3, 4));
  c.protocol.folds = {"no-such-domain"};
  CHECK_THROWS_AS(run_experiment(c), ConfigError);
}

TEST_CASE("incomplete reports leave a partial marker") {
  Report report;
  report.config = quick(ExperimentKind::TdgBenchmark, small_styles(3, 4));
  report.complete = false;
  report.error = "run 2 failed";
  const auto dir = scratch("partial");
  emit_report(report, dir.string());
  CHECK(fs::exists(dir / "PARTIAL"));
  const auto j = nlohmann::json::parse(std::ifstream(dir / "report.json"));
  CHECK(j.at("complete") == false);
  CHECK(j.at("error") == "run 2 failed");
  fs::remove_all(dir);
}
