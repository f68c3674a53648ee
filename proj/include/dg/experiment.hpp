#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dg/config.hpp"
#include "dg/split.hpp"
#include "dg/trainer.hpp"

namespace dg {

inline constexpr const char* kToolVersion = "0.1.0";

/// One training run inside an experiment.
struct RunEntry {
  /// Identifying fields, e.g. {"seed": 1, "trainer": "idfm", "fold": "sketch-outline"}.
  nlohmann::json key;
  /// Aggregation group for summary.csv.
  std::string group;
  RunRecord record;
  /// Named scalar results (a_sel, a_max, a_min, fid, ...).
  std::map<std::string, double> metrics;
  /// Predicted-class histogram of the selected checkpoint on the test set.
  std::vector<std::size_t> histogram;
  SplitSpec split;
  /// Pairwise matrix only: accuracy of the selected checkpoint on each domain.
  std::vector<double> domain_accuracy;
  /// Pairwise matrix only: rows (index, class, domain, x, y).
  std::vector<std::array<double, 5>> embeddings;
};

struct SummaryRow {
  std::string group;
  std::string metric;
  std::size_t n = 0;
  double mean = 0.0;
  double std = 0.0;
};

struct Report {
  ExperimentConfig config;
  std::vector<std::string> domain_names;
  std::vector<RunEntry> runs;
  /// False when a run failed; `error` then names it.
  bool complete = true;
  std::string error;

  /// Mean/std of every metric per group, groups in first-appearance order.
  std::vector<SummaryRow> summary() const;
};

Report run_experiment(const ExperimentConfig& cfg);
/// Uses an already generated bundle instead of cfg.dataset.
Report run_experiment(const ExperimentConfig& cfg, const DatasetBundle& bundle);

/// Index of `name` in bundle.domain_names; throws ConfigError if absent.
std::uint32_t domain_index(const DatasetBundle& bundle, const std::string& name);

/// report.json, summary.csv and the kind-specific CSVs. Per-run run.json,
/// metrics.csv and split.json go under runs/NNN/.
void emit_report(const Report& report, const std::string& dir);

nlohmann::json report_to_json(const Report& report);

}  // namespace dg
