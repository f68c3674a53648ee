#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dg/dataset.hpp"
#include "dg/trainer.hpp"

namespace dg {

enum class ExperimentKind {
  Shortcut,
  PairwiseMatrix,
  Incremental,
  PriorInjection,
  TdgBenchmark,
  CwdgBenchmark,
  OptimizerAblation
};

std::string to_string(ExperimentKind k);
ExperimentKind parse_experiment_kind(const std::string& s);

nlohmann::json to_json(const GeneratorConfig& g);
GeneratorConfig generator_from_json(const nlohmann::json& j);

enum class EmbedderKind { Pixel, Trunk };

/// Kind-specific protocol knobs. Domains are referred to by name.
struct ProtocolConfig {
  /// Share of every training (class, domain) cell moved to validation.
  double val_fraction = 0.05;

  // shortcut
  std::vector<std::string> shortcut_domains = {"class-shade", "class-texture"};
  std::string plain_domain = "plain";

  // incremental and tdg
  std::string test_domain;
  /// Incremental domain orders; empty means the remaining domains ascending.
  std::vector<std::vector<std::string>> orders;
  /// TDG held-out domains; empty means every domain.
  std::vector<std::string> folds;

  // prior-injection
  std::string base_domain;
  std::string injected_domain;
  /// Class injection order; empty means ascending class id.
  std::vector<std::uint32_t> class_order;
  double injected_train_fraction = 0.5;

  // cwdg
  std::size_t random_assignments = 1;
  bool use_presets = true;
  /// Runs every S^C assignment. Expensive.
  bool enumerate_all = false;
  /// Cap on the preset count (the first ones are used).
  std::optional<std::size_t> max_presets;

  // tdg, cwdg, ablation
  std::vector<TrainerKind> trainers = {TrainerKind::Erm, TrainerKind::Idfm};
  std::vector<OptimizerKind> optimizers = {OptimizerKind::Sgd, OptimizerKind::Adam};

  EmbedderKind embedder = EmbedderKind::Pixel;
};

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::Shortcut;
  GeneratorConfig dataset;
  TrainConfig train;
  ProtocolConfig protocol;
  std::vector<std::uint64_t> seeds;
  std::string output_dir = "out";
  std::size_t workers = 1;

  /// Throws ConfigError naming the offending field.
  void validate() const;
};

nlohmann::json to_json(const ExperimentConfig& cfg);
ExperimentConfig experiment_config_from_json(const nlohmann::json& j);
/// Parses and validates a JSON config file.
ExperimentConfig load_config(const std::string& path);
nlohmann::json read_json_file(const std::string& path);

/// Default dataset for each experiment kind.
GeneratorConfig default_dataset(ExperimentKind kind);

}  // namespace dg
