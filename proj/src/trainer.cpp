#include "dg/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dg/error.hpp"
#include "dg/losses.hpp"
#include "dg/masking.hpp"
#include "dg/metrics.hpp"
#include "dg/ops.hpp"
#include "dg/rng.hpp"

namespace dg {
namespace {

constexpr std::uint64_t kShuffleTag = 0x53485546ULL;
constexpr std::uint64_t kAugTag = 0x41554721ULL;
constexpr std::uint64_t kModelInitTag = 0x4d4f444cULL;
constexpr std::size_t kEvalBatch = 256;

bool is_identity_normalization(const AugConfig& a) {
  return a.mean == std::array<double, 3>{0, 0, 0} && a.std == std::array<double, 3>{1, 1, 1};
}

Tensor make_batch(const DatasetBundle& bundle, std::span<const std::size_t> idx, const TrainConfig& cfg, Rng* aug_rng) {
  Tensor x = bundle.batch(idx);
  const std::size_t per = bundle.image_values();
  if (aug_rng) {
    for (std::size_t k = 0; k < idx.size(); ++k) {
      auto out = augment(bundle.image(idx[k]), bundle.height, bundle.width, cfg.aug, *aug_rng);
      std::copy(out.begin(), out.end(), x.data().begin() + static_cast<std::ptrdiff_t>(k * per));
    }
  } else if (!is_identity_normalization(cfg.aug)) {
    for (std::size_t k = 0; k < idx.size(); ++k) {
      normalize_in_place(x.data().subspan(k * per, per), bundle.height, bundle.width, cfg.aug);
    }
  }
  return x;
}

std::vector<std::uint32_t> gather(const std::vector<std::uint32_t>& labels, std::span<const std::size_t> idx) {
  std::vector<std::uint32_t> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(labels[i]);
  return out;
}

std::vector<std::uint32_t> argmax_rows(const Tensor& logits) {
  const std::size_t B = logits.dim(0), K = logits.dim(1);
  std::vector<std::uint32_t> out(B);
  for (std::size_t b = 0; b < B; ++b) {
    const double* row = logits.data().data() + b * K;
    out[b] = static_cast<std::uint32_t>(std::max_element(row, row + K) - row);
  }
  return out;
}

Tensor mask_from(const Tensor& grads, const TrainConfig& cfg) {
  return cfg.mask_scope == MaskScope::PerSample ? top_q_mask(grads, cfg.q) : batch_mean_mask(grads, cfg.q);
}

template <typename E>
std::string lookup(E value, std::initializer_list<std::pair<E, const char*>> table) {
  for (const auto& [k, name] : table) {
    if (k == value) return name;
  }
  return "unknown";
}

template <typename E>
E parse(const std::string& s, const char* what, std::initializer_list<std::pair<E, const char*>> table) {
  for (const auto& [k, name] : table) {
    if (s == name) return k;
  }
  throw ConfigError(std::string("unknown ") + what + " '" + s + "'");
}

#define DG_OPTIMIZERS {{OptimizerKind::Sgd, "sgd"}, {OptimizerKind::Adam, "adam"}}
#define DG_TRAINERS \
  {{TrainerKind::Erm, "erm"}, {TrainerKind::Grl, "grl"}, {TrainerKind::Rsc, "rsc"}, {TrainerKind::Idfm, "idfm"}}
#define DG_SCOPES {{MaskScope::PerSample, "per-sample"}, {MaskScope::BatchMean, "batch-mean"}}
#define DG_INFERENCE {{InferenceMask::None, "none"}, {InferenceMask::PredictedDomain, "predicted-domain"}}

}  // namespace

std::string to_string(OptimizerKind k) { return lookup<OptimizerKind>(k, DG_OPTIMIZERS); }
std::string to_string(TrainerKind k) { return lookup<TrainerKind>(k, DG_TRAINERS); }
std::string to_string(MaskScope k) { return lookup<MaskScope>(k, DG_SCOPES); }
std::string to_string(InferenceMask k) { return lookup<InferenceMask>(k, DG_INFERENCE); }
OptimizerKind parse_optimizer(const std::string& s) { return parse<OptimizerKind>(s, "optimizer", DG_OPTIMIZERS); }
TrainerKind parse_trainer(const std::string& s) { return parse<TrainerKind>(s, "trainer", DG_TRAINERS); }
MaskScope parse_mask_scope(const std::string& s) { return parse<MaskScope>(s, "mask scope", DG_SCOPES); }
InferenceMask parse_inference_mask(const std::string& s) {
  return parse<InferenceMask>(s, "inference mask", DG_INFERENCE);
}

double TrainConfig::lr() const {
  if (learning_rate) return *learning_rate;
  return optimizer == OptimizerKind::Sgd ? 0.01 : 0.001;
}

void TrainConfig::validate() const {
  if (epochs == 0) throw ConfigError("epochs must be positive");
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (!(lr() >= 0.0) || !std::isfinite(lr())) throw ConfigError("learning_rate must be finite and >= 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must lie in [0, 1)");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be >= 0");
  if (!(q >= 0.0 && q <= 100.0)) throw ConfigError("q must lie in [0, 100]");
  if (!(lambda_dom >= 0.0) || !std::isfinite(lambda_dom)) throw ConfigError("lambda_dom must be finite and >= 0");
  if (!(lambda_grl >= 0.0) || !std::isfinite(lambda_grl)) throw ConfigError("lambda_grl must be finite and >= 0");
  aug.validate();
}

nlohmann::json to_json(const TrainConfig& c) {
  nlohmann::json j = {{"epochs", c.epochs},
                      {"batch_size", c.batch_size},
                      {"optimizer", to_string(c.optimizer)},
                      {"learning_rate", c.lr()},
                      {"momentum", c.momentum},
                      {"weight_decay", c.weight_decay},
                      {"trainer", to_string(c.trainer)},
                      {"q", c.q},
                      {"lambda_dom", c.lambda_dom},
                      {"lambda_grl", c.lambda_grl},
                      {"grl_reversal", c.grl_reversal},
                      {"domain_loss_to_trunk", c.domain_loss_to_trunk},
                      {"mask_scope", to_string(c.mask_scope)},
                      {"inference_mask", to_string(c.inference_mask)},
                      {"bottleneck", c.bottleneck},
                      {"augment", c.augment},
                      {"seed", c.seed}};
  j["aug"] = {{"crop", c.aug.crop},
              {"flip_probability", c.aug.flip_probability},
              {"jitter_range", {c.aug.jitter_low, c.aug.jitter_high}},
              {"grayscale_probability", c.aug.grayscale_probability},
              {"mean", c.aug.mean},
              {"std", c.aug.std}};
  return j;
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  if (j.contains("optimizer")) c.optimizer = parse_optimizer(j.at("optimizer").get<std::string>());
  if (j.contains("learning_rate") && !j.at("learning_rate").is_null()) c.learning_rate = j.at("learning_rate").get<double>();
  c.momentum = j.value("momentum", c.momentum);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  if (j.contains("trainer")) c.trainer = parse_trainer(j.at("trainer").get<std::string>());
  c.q = j.value("q", c.q);
  c.lambda_dom = j.value("lambda_dom", c.lambda_dom);
  c.lambda_grl = j.value("lambda_grl", c.lambda_grl);
  c.grl_reversal = j.value("grl_reversal", c.grl_reversal);
  c.domain_loss_to_trunk = j.value("domain_loss_to_trunk", c.domain_loss_to_trunk);
  if (j.contains("mask_scope")) c.mask_scope = parse_mask_scope(j.at("mask_scope").get<std::string>());
  if (j.contains("inference_mask")) c.inference_mask = parse_inference_mask(j.at("inference_mask").get<std::string>());
  c.bottleneck = j.value("bottleneck", c.bottleneck);
  c.augment = j.value("augment", c.augment);
  c.seed = j.value("seed", c.seed);
  if (j.contains("aug")) {
    const auto& a = j.at("aug");
    c.aug.crop = a.value("crop", c.aug.crop);
    c.aug.flip_probability = a.value("flip_probability", c.aug.flip_probability);
    if (a.contains("jitter_range")) {
      const auto r = a.at("jitter_range").get<std::vector<double>>();
      if (r.size() != 2) throw ConfigError("aug.jitter_range must have two entries");
      c.aug.jitter_low = r[0];
      c.aug.jitter_high = r[1];
    }
    c.aug.grayscale_probability = a.value("grayscale_probability", c.aug.grayscale_probability);
    if (a.contains("mean")) c.aug.mean = a.at("mean").get<std::array<double, 3>>();
    if (a.contains("std")) c.aug.std = a.at("std").get<std::array<double, 3>>();
  }
  c.validate();
  return c;
}

nlohmann::json to_json(const RunRecord& r) {
  nlohmann::json epochs = nlohmann::json::array();
  for (const auto& e : r.epochs) {
    epochs.push_back({{"epoch", e.epoch},
                      {"train_loss", e.train_loss},
                      {"val_acc", e.val_acc},
                      {"test_acc", e.test_acc},
                      {"test_histogram", e.test_histogram}});
  }
  return {{"epochs", epochs},         {"a_sel", r.a_sel},
          {"a_max", r.a_max},         {"a_min", r.a_min},
          {"selected_epoch", r.selected_epoch}, {"window_start", r.window_start}};
}

RunRecord run_record_from_json(const nlohmann::json& j) {
  RunRecord r;
  for (const auto& e : j.at("epochs")) {
    r.epochs.push_back({e.at("epoch").get<std::size_t>(), e.at("train_loss").get<double>(), e.at("val_acc").get<double>(),
                        e.at("test_acc").get<double>(), e.value("test_histogram", std::vector<std::size_t>{})});
  }
  r.a_sel = j.at("a_sel").get<double>();
  r.a_max = j.at("a_max").get<double>();
  r.a_min = j.at("a_min").get<double>();
  r.selected_epoch = j.value("selected_epoch", std::size_t{0});
  r.window_start = j.value("window_start", std::size_t{0});
  return r;
}

EvalResult evaluate(const TwoBranchParams& params, const DatasetBundle& bundle, std::span<const std::size_t> indices,
                    const TrainConfig& cfg) {
  EvalResult r;
  if (indices.empty()) {
    r.histogram.assign(params.arch.classes, 0);
    return r;
  }
  const bool masked = cfg.trainer == TrainerKind::Idfm && cfg.inference_mask == InferenceMask::PredictedDomain;
  for (std::size_t start = 0; start < indices.size(); start += kEvalBatch) {
    const auto chunk = indices.subspan(start, std::min(kEvalBatch, indices.size() - start));
    const Tensor x = make_batch(bundle, chunk, cfg, nullptr);
    MaskProvider provider;
    if (masked) {
      provider = [&params, &cfg](const Tensor& g) {
        Tape side;
        const Tensor dom = dense(side.constant(params.dom_w), side.constant(params.dom_b), side.constant(g)).value();
        return mask_from(head_gradient(params, g, argmax_rows(dom), false), cfg);
      };
    }
    const ForwardPass fp = forward(params, x, GrlConfig{}, provider);
    const auto preds = argmax_rows(fp.class_logits.value());
    r.predictions.insert(r.predictions.end(), preds.begin(), preds.end());
  }
  const auto labels = gather(bundle.classes, indices);
  const AccuracyResult acc = accuracy(r.predictions, labels, params.arch.classes);
  r.accuracy = acc.fraction;
  r.histogram = acc.histogram;
  return r;
}

OptimState make_optim_state(const TwoBranchParams& params, OptimizerKind kind) {
  OptimState s;
  for (const Tensor* t : params.tensors()) {
    s.first.emplace_back(t->size(), 0.0);
    if (kind == OptimizerKind::Adam) s.second.emplace_back(t->size(), 0.0);
  }
  return s;
}

double train_epoch(TwoBranchParams& params, OptimState& state, const SplitSpec& split, const DatasetBundle& bundle,
                   const TrainConfig& cfg, std::size_t epoch) {
  if (split.train.empty()) throw ContractError("train_epoch on an empty train split");
  cfg.validate();
  std::vector<std::size_t> order = split.train;
  Rng shuffle_rng(derive_seed({kShuffleTag, cfg.seed, epoch}));
  shuffle_rng.shuffle(std::span<std::size_t>(order));
  Rng aug_rng(derive_seed({kAugTag, cfg.seed, epoch}));

  const auto groups = params.groups();
  const bool touches_domain_head = cfg.trainer == TrainerKind::Grl || cfg.trainer == TrainerKind::Idfm;
  double loss_sum = 0.0;
  for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
    const std::span<const std::size_t> idx(order.data() + start, std::min(cfg.batch_size, order.size() - start));
    const Tensor x = make_batch(bundle, idx, cfg, cfg.augment ? &aug_rng : nullptr);
    const auto y = gather(bundle.classes, idx);
    const auto d = gather(bundle.domains, idx);

    ForwardPass fp;
    switch (cfg.trainer) {
      case TrainerKind::Erm:
        fp = forward(params, x);
        break;
      case TrainerKind::Grl:
        fp = forward(params, x, GrlConfig{cfg.grl_reversal, cfg.lambda_grl});
        break;
      case TrainerKind::Rsc:
        fp = forward(params, x, GrlConfig{},
                     [&](const Tensor& g) { return mask_from(head_gradient(params, g, y, true), cfg); });
        break;
      case TrainerKind::Idfm:
        fp = forward(params, x, GrlConfig{!cfg.domain_loss_to_trunk, 0.0},
                     [&](const Tensor& g) { return mask_from(head_gradient(params, g, d, false), cfg); });
        break;
    }
    Var class_loss = cross_entropy(fp.class_logits, y);
    Var total = class_loss;
    if (touches_domain_head) total = add(class_loss, scale(cross_entropy(fp.domain_logits, d), cfg.lambda_dom));
    const Gradients grads = fp.tape->backward(total);

    ++state.step;
    auto tensors = params.tensors();
    for (std::size_t k = 0; k < tensors.size(); ++k) {
      if (!touches_domain_head && groups[k] == TwoBranchParams::Group::DomainHead) continue;
      const Tensor g = grads.wrt(fp.params[k]);
      if (cfg.optimizer == OptimizerKind::Sgd) {
        sgd_step(tensors[k]->data(), g.data(), state.first[k], cfg.lr(), cfg.momentum, cfg.weight_decay);
      } else {
        adam_step(tensors[k]->data(), g.data(), state.first[k], state.second[k], state.step, cfg.lr(), 0.9, 0.999,
                  1e-8, cfg.weight_decay);
      }
    }
    loss_sum += class_loss.value().item() * static_cast<double>(idx.size());
  }
  return loss_sum / static_cast<double>(order.size());
}

Selection select_model(std::span<const CheckpointScore> checkpoints) {
  if (checkpoints.empty()) throw ContractError("select_model needs at least one checkpoint");
  Selection s;
  s.a_max = -std::numeric_limits<double>::infinity();
  s.a_min = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < checkpoints.size(); ++i) {
    if (checkpoints[i].val_acc > checkpoints[s.selected].val_acc) s.selected = i;
    s.a_max = std::max(s.a_max, checkpoints[i].test_acc);
    s.a_min = std::min(s.a_min, checkpoints[i].test_acc);
  }
  s.a_sel = checkpoints[s.selected].test_acc;
  return s;
}

Selection select_model(std::span<const TwoBranchParams> checkpoints, const SplitSpec& split,
                       const DatasetBundle& bundle, const TrainConfig& cfg) {
  std::vector<CheckpointScore> scores;
  for (const auto& p : checkpoints) {
    scores.push_back({evaluate(p, bundle, split.val, cfg).accuracy, evaluate(p, bundle, split.test, cfg).accuracy});
  }
  return select_model(scores);
}

std::size_t selection_window_start(std::size_t epochs) {
  const std::size_t window = std::max<std::size_t>(1, (epochs + 2) / 3);
  return epochs - std::min(window, epochs);
}

Architecture architecture_for(const DatasetBundle& bundle, bool bottleneck) {
  Architecture a;
  if (bundle.height != bundle.width) throw ConfigError("model needs square images");
  a.image_size = bundle.height;
  a.classes = bundle.class_count;
  a.domains = bundle.domain_count;
  a.bottleneck = bottleneck;
  a.validate();
  return a;
}

TrainResult run_training(const DatasetBundle& bundle, const SplitSpec& split, const TrainConfig& cfg) {
  cfg.validate();
  TrainResult out;
  out.final_params = init_two_branch(architecture_for(bundle, cfg.bottleneck), derive_seed({kModelInitTag, cfg.seed}));
  OptimState state = make_optim_state(out.final_params, cfg.optimizer);
  const std::size_t window = selection_window_start(cfg.epochs);
  out.record.window_start = window;

  std::vector<CheckpointScore> scores;
  double best_val = -1.0;
  for (std::size_t e = 0; e < cfg.epochs; ++e) {
    EpochMetrics m;
    m.epoch = e;
    m.train_loss = train_epoch(out.final_params, state, split, bundle, cfg, e);
    m.val_acc = evaluate(out.final_params, bundle, split.val, cfg).accuracy;
    const EvalResult test = evaluate(out.final_params, bundle, split.test, cfg);
    m.test_acc = test.accuracy;
    m.test_histogram = test.histogram;
    if (e >= window) {
      scores.push_back({m.val_acc, m.test_acc});
      if (m.val_acc > best_val) {
        best_val = m.val_acc;
        out.selected_params = out.final_params;
      }
    }
    out.record.epochs.push_back(std::move(m));
  }
  const Selection sel = select_model(scores);
  out.record.a_sel = sel.a_sel;
  out.record.a_max = sel.a_max;
  out.record.a_min = sel.a_min;
  out.record.selected_epoch = window + sel.selected;
  return out;
}

}  // namespace dg
