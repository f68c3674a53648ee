#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "dg/augment.hpp"
#include "dg/dataset.hpp"
#include "dg/model.hpp"
#include "dg/optim.hpp"
#include "dg/split.hpp"

namespace dg {

enum class OptimizerKind { Sgd, Adam };
enum class TrainerKind { Erm, Grl, Rsc, Idfm };
enum class MaskScope { PerSample, BatchMean };
/// How IDFM masks the class path at evaluation time, when no domain label
/// is available.
enum class InferenceMask { None, PredictedDomain };

std::string to_string(OptimizerKind k);
std::string to_string(TrainerKind k);
std::string to_string(MaskScope k);
std::string to_string(InferenceMask k);
OptimizerKind parse_optimizer(const std::string& s);
TrainerKind parse_trainer(const std::string& s);
MaskScope parse_mask_scope(const std::string& s);
InferenceMask parse_inference_mask(const std::string& s);

struct TrainConfig {
  std::size_t epochs = 30;
  std::size_t batch_size = 32;
  OptimizerKind optimizer = OptimizerKind::Sgd;
  /// Unset means 0.01 for SGD and 0.001 for Adam.
  std::optional<double> learning_rate;
  double momentum = 0.9;
  double weight_decay = 0.0005;
  TrainerKind trainer = TrainerKind::Erm;
  /// Mask percentile for IDFM and RSC.
  double q = 33.0;
  /// Weight of the domain loss (GRL and IDFM).
  double lambda_dom = 1.0;
  double lambda_grl = 1.0;
  /// GRL trainer only: false replaces the reversal node with identity
  /// (plain multitask training).
  bool grl_reversal = true;
  /// IDFM only: false stops the domain loss at g, so only the domain head
  /// learns from it.
  bool domain_loss_to_trunk = true;
  MaskScope mask_scope = MaskScope::PerSample;
  InferenceMask inference_mask = InferenceMask::None;
  bool bottleneck = false;
  bool augment = false;
  AugConfig aug;
  std::uint64_t seed = 0;

  double lr() const;
  void validate() const;
};

nlohmann::json to_json(const TrainConfig& cfg);
/// Missing fields keep their defaults.
TrainConfig train_config_from_json(const nlohmann::json& j);

struct EpochMetrics {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_acc = 0.0;
  double test_acc = 0.0;
  std::vector<std::size_t> test_histogram;
};

/// Per-epoch metrics and the checkpoint-selection outcome of one training run.
struct RunRecord {
  std::vector<EpochMetrics> epochs;
  double a_sel = 0.0;
  double a_max = 0.0;
  double a_min = 0.0;
  std::size_t selected_epoch = 0;
  /// First epoch of the post-saturation window used for selection.
  std::size_t window_start = 0;
};

nlohmann::json to_json(const RunRecord& r);
RunRecord run_record_from_json(const nlohmann::json& j);

/// Accuracy and prediction histogram for a sample set.
struct EvalResult {
  double accuracy = 0.0;
  std::vector<std::size_t> histogram;
  std::vector<std::uint32_t> predictions;
};

/// Predicts classes for `indices`. Empty index sets give accuracy 0.
EvalResult evaluate(const TwoBranchParams& params, const DatasetBundle& bundle, std::span<const std::size_t> indices,
                    const TrainConfig& cfg);

/// Optimizer buffers shaped like `params`.
OptimState make_optim_state(const TwoBranchParams& params, OptimizerKind kind);

/// One pass over split.train in a seeded shuffled order. Returns the mean
/// class loss. ERM and RSC leave the domain head untouched.
double train_epoch(TwoBranchParams& params, OptimState& state, const SplitSpec& split, const DatasetBundle& bundle,
                   const TrainConfig& cfg, std::size_t epoch);

/// Checkpoint accuracies on validation and test.
struct CheckpointScore {
  double val_acc = 0.0;
  double test_acc = 0.0;
};

struct Selection {
  double a_sel = 0.0;
  double a_max = 0.0;
  double a_min = 0.0;
  /// Position of the validation-selected checkpoint (earliest on ties).
  std::size_t selected = 0;
};

Selection select_model(std::span<const CheckpointScore> checkpoints);
/// Scores each checkpoint on the split's val and test sets, then selects.
Selection select_model(std::span<const TwoBranchParams> checkpoints, const SplitSpec& split,
                       const DatasetBundle& bundle, const TrainConfig& cfg);

/// First epoch (0-based) of the post-saturation window: the final third.
std::size_t selection_window_start(std::size_t epochs);

Architecture architecture_for(const DatasetBundle& bundle, bool bottleneck);

struct TrainResult {
  RunRecord record;
  TwoBranchParams final_params;
  TwoBranchParams selected_params;
};

/// Trains from a seeded initialization for cfg.epochs, checkpointing at the
/// end of every epoch, and selects within the post-saturation window.
TrainResult run_training(const DatasetBundle& bundle, const SplitSpec& split, const TrainConfig& cfg);

}  // namespace dg
