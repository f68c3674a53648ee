#include "dg/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <functional>
#include <mutex>
#include <numeric>
#include <optional>
#include <thread>

#include "dg/error.hpp"
#include "dg/fid.hpp"
#include "dg/metrics.hpp"
#include "dg/rng.hpp"

namespace dg {
namespace {

using nlohmann::json;

constexpr std::uint64_t kSplitTag = 0x53504c54ULL;
constexpr std::uint64_t kValTag = 0x56414c44ULL;
constexpr std::uint64_t kAssignTag = 0x41534e47ULL;

struct Job {
  json key;
  std::string group;
  std::function<RunEntry()> run;
};

std::vector<std::size_t> samples_in(const DatasetBundle& b, const std::vector<std::uint32_t>& domains) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < b.size(); ++i) {
    if (std::find(domains.begin(), domains.end(), b.domains[i]) != domains.end()) out.push_back(i);
  }
  return out;
}

/// Train on `train_domains`, test on `test_domains` (all classes).
SplitSpec domain_split(const DatasetBundle& b, const std::vector<std::uint32_t>& train_domains,
                       const std::vector<std::uint32_t>& test_domains) {
  SplitSpec s;
  s.regime = Regime::Tdg;
  s.parameters = {{"train_domains", train_domains}, {"test_domains", test_domains}};
  s.train = samples_in(b, train_domains);
  s.test = samples_in(b, test_domains);
  return s;
}

TrainConfig run_config(const ExperimentConfig& cfg, std::uint64_t seed) {
  TrainConfig t = cfg.train;
  t.seed = seed;
  return t;
}

Embedder embedder_for(const ExperimentConfig& cfg, const TrainResult& result) {
  return cfg.protocol.embedder == EmbedderKind::Pixel ? pixel_embedder() : trunk_embedder(result.selected_params);
}

RunEntry finish(const json& key, const std::string& group, const SplitSpec& split, const TrainResult& result) {
  RunEntry e;
  e.key = key;
  e.group = group;
  e.record = result.record;
  e.split = split;
  e.metrics["a_sel"] = result.record.a_sel;
  e.metrics["a_max"] = result.record.a_max;
  e.metrics["a_min"] = result.record.a_min;
  e.histogram = result.record.epochs.at(result.record.selected_epoch).test_histogram;
  return e;
}

/// Carves validation and trains; `variant` keeps split seeds independent of
/// the trainer so trainers are compared on identical splits.
std::pair<SplitSpec, TrainResult> carve_and_train(const DatasetBundle& b, SplitSpec split, const ExperimentConfig& cfg,
                                                 std::uint64_t seed, std::uint64_t variant, const TrainConfig& t) {
  split = carve_validation(split, b, cfg.protocol.val_fraction, derive_seed({kValTag, seed, variant}));
  TrainResult r = run_training(b, split, t);
  return {std::move(split), std::move(r)};
}

std::string join(const std::vector<std::string>& parts, const char* sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) out += (i ? sep : "") + parts[i];
  return out;
}

std::vector<Job> shortcut_jobs(const ExperimentConfig& cfg, const DatasetBundle& b) {
  const auto& p = cfg.protocol;
  const std::uint32_t plain = domain_index(b, p.plain_domain);
  std::vector<std::vector<std::string>> sets;
  for (const auto& d : p.shortcut_domains) sets.push_back({d});
  if (p.shortcut_domains.size() > 1) sets.push_back(p.shortcut_domains);
  std::vector<Job> jobs;
  for (std::uint64_t seed : cfg.seeds) {
    for (std::size_t v = 0; v < sets.size(); ++v) {
      std::vector<std::uint32_t> train;
      for (const auto& name : sets[v]) train.push_back(domain_index(b, name));
      const std::string group = "train=" + join(sets[v], "+");
      const json key = {{"seed", seed}, {"train_domains", sets[v]}, {"test_domain", p.plain_domain}};
      jobs.push_back({key, group, [&cfg, &b, seed, v, train, plain, key, group] {
                        auto [split, r] =
                            carve_and_train(b, domain_split(b, train, {plain}), cfg, seed, v, run_config(cfg, seed));
                        return finish(key, group, split, r);
                      }});
    }
  }
  return jobs;
}

std::vector<Job> pairwise_jobs(const ExperimentConfig& cfg, const DatasetBundle& b) {
  std::vector<Job> jobs;
  for (std::uint64_t seed : cfg.seeds) {
    for (std::uint32_t d = 0; d < b.domain_count; ++d) {
      const json key = {{"seed", seed}, {"train_domain", b.domain_names[d]}};
      const std::string group = "train=" + b.domain_names[d];
      jobs.push_back({key, group, [&cfg, &b, seed, d, key, group] {
                        std::vector<std::uint32_t> others;
                        for (std::uint32_t o = 0; o < b.domain_count; ++o) {
                          if (o != d) others.push_back(o);
                        }
                        auto [split, r] =
                            carve_and_train(b, domain_split(b, {d}, others), cfg, seed, d, run_config(cfg, seed));
                        RunEntry e = finish(key, group, split, r);
                        const TrainConfig t = run_config(cfg, seed);
                        // In-domain accuracy uses the held-out validation samples.
                        for (std::uint32_t o = 0; o < b.domain_count; ++o) {
                          const auto idx = o == d ? split.val : samples_in(b, {o});
                          e.domain_accuracy.push_back(evaluate(r.selected_params, b, idx, t).accuracy);
                        }
                        if (r.selected_params.arch.bottleneck) {
                          std::vector<std::size_t> all(b.size());
                          std::iota(all.begin(), all.end(), std::size_t{0});
                          for (std::size_t start = 0; start < all.size(); start += 256) {
                            const std::span<const std::size_t> chunk(all.data() + start,
                                                                     std::min<std::size_t>(256, all.size() - start));
                            const Tensor z = bottleneck_embed(r.selected_params, b.batch(chunk));
                            for (std::size_t k = 0; k < chunk.size(); ++k) {
                              const std::size_t i = chunk[k];
                              e.embeddings.push_back({static_cast<double>(i), static_cast<double>(b.classes[i]),
                                                      static_cast<double>(b.domains[i]), z.data()[2 * k],
                                                      z.data()[2 * k + 1]});
                            }
                          }
                        }
                        return e;
                      }});
    }
  }
  return jobs;
}

std::vector<Job> incremental_jobs(const ExperimentConfig& cfg, const DatasetBundle& b) {
  const auto& p = cfg.protocol;
  const std::uint32_t test = p.test_domain.empty() ? static_cast<std::uint32_t>(b.domain_count - 1)
                                                   : domain_index(b, p.test_domain);
  std::vector<std::vector<std::uint32_t>> orders;
  for (const auto& o : p.orders) {
    std::vector<std::uint32_t> ids;
    for (const auto& name : o) ids.push_back(domain_index(b, name));
    orders.push_back(ids);
  }
  if (orders.empty()) {
    std::vector<std::uint32_t> ids;
    for (std::uint32_t d = 0; d < b.domain_count; ++d) {
      if (d != test) ids.push_back(d);
    }
    orders.push_back(ids);
  }
  std::vector<Job> jobs;
  for (std::uint64_t seed : cfg.seeds) {
    for (std::size_t oi = 0; oi < orders.size(); ++oi) {
      const auto schedule = make_incremental_schedule(b, test, orders[oi], derive_seed({kSplitTag, seed, oi}));
      std::vector<std::string> names;
      for (auto d : orders[oi]) names.push_back(b.domain_names[d]);
      for (std::size_t step = 0; step < schedule.size(); ++step) {
        const json key = {{"seed", seed}, {"order", names}, {"step", step}, {"test_domain", b.domain_names[test]}};
        const std::string group = "step=" + std::to_string(step);
        const SplitSpec base = schedule[step];
        jobs.push_back({key, group, [&cfg, &b, seed, oi, step, base, key, group] {
                          auto [split, r] = carve_and_train(b, base, cfg, seed, oi * 100 + step, run_config(cfg, seed));
                          RunEntry e = finish(key, group, split, r);
                          e.metrics["fid"] = fid_between_splits(b, split.train, split.test, embedder_for(cfg, r));
                          return e;
                        }});
      }
    }
  }
  return jobs;
}

std::vector<Job> prior_injection_jobs(const ExperimentConfig& cfg, const DatasetBundle& b) {
  const auto& p = cfg.protocol;
  const std::uint32_t base = p.base_domain.empty() ? 0u : domain_index(b, p.base_domain);
  const std::uint32_t inj = p.injected_domain.empty() ? 1u : domain_index(b, p.injected_domain);
  std::vector<std::uint32_t> order = p.class_order;
  if (order.empty()) {
    order.resize(b.class_count);
    std::iota(order.begin(), order.end(), 0u);
  }
  std::vector<Job> jobs;
  for (std::uint64_t seed : cfg.seeds) {
    for (std::size_t k = 0; k < b.class_count; ++k) {
      const std::vector<std::uint32_t> injected(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
      const json key = {{"seed", seed}, {"injected", injected}, {"base_domain", b.domain_names[base]},
                        {"injected_domain", b.domain_names[inj]}};
      const std::string group = "injected=" + std::to_string(k);
      jobs.push_back({key, group, [&cfg, &b, seed, k, base, inj, injected, key, group] {
                        const SplitSpec s = make_prior_injection_split(b, base, injected, inj,
                                                                       cfg.protocol.injected_train_fraction,
                                                                       derive_seed({kSplitTag, seed}));
                        auto [split, r] = carve_and_train(b, s, cfg, seed, k, run_config(cfg, seed));
                        RunEntry e = finish(key, group, split, r);
                        std::size_t injected_test = 0;
                        for (std::size_t i : split.test) {
                          if (std::find(injected.begin(), injected.end(), b.classes[i]) != injected.end()) {
                            ++injected_test;
                          }
                        }
                        e.metrics["injected_test_fraction"] =
                            static_cast<double>(injected_test) / static_cast<double>(split.test.size());
                        if (!injected.empty()) {
                          std::size_t on_injected = 0;
                          for (auto c : injected) on_injected += e.histogram[c];
                          e.metrics["injected_prediction_fraction"] =
                              static_cast<double>(on_injected) / static_cast<double>(split.test.size());
                        }
                        e.metrics["fid"] = fid_between_splits(b, split.train, split.test, embedder_for(cfg, r));
                        return e;
                      }});
    }
  }
  return jobs;
}

std::vector<std::uint32_t> fold_domains(const ExperimentConfig& cfg, const DatasetBundle& b) {
  std::vector<std::uint32_t> folds;
  for (const auto& name : cfg.protocol.folds) folds.push_back(domain_index(b, name));
  if (folds.empty()) {
    for (std::uint32_t d = 0; d < b.domain_count; ++d) folds.push_back(d);
  }
  return folds;
}

std::vector<Job> tdg_jobs(const ExperimentConfig& cfg, const DatasetBundle& b) {
  std::vector<Job> jobs;
  for (std::uint64_t seed : cfg.seeds) {
    for (TrainerKind trainer : cfg.protocol.trainers) {
      for (std::uint32_t fold : fold_domains(cfg, b)) {
        const json key = {{"seed", seed}, {"trainer", to_string(trainer)}, {"fold", b.domain_names[fold]}};
        const std::string group = "trainer=" + to_string(trainer);
        jobs.push_back({key, group, [&cfg, &b, seed, trainer, fold, key, group] {
                          TrainConfig t = run_config(cfg, seed);
                          t.trainer = trainer;
                          auto [split, r] = carve_and_train(b, make_tdg_split(b, fold), cfg, seed, fold, t);
                          return finish(key, group, split, r);
                        }});
      }
    }
  }
  return jobs;
}

std::vector<Job> ablation_jobs(const ExperimentConfig& cfg, const DatasetBundle& b) {
  std::vector<Job> jobs;
  for (std::uint64_t seed : cfg.seeds) {
    for (OptimizerKind opt : cfg.protocol.optimizers) {
      for (std::uint32_t fold : fold_domains(cfg, b)) {
        const json key = {{"seed", seed}, {"optimizer", to_string(opt)}, {"fold", b.domain_names[fold]}};
        const std::string group = "optimizer=" + to_string(opt);
        jobs.push_back({key, group, [&cfg, &b, seed, opt, fold, key, group] {
                          TrainConfig t = run_config(cfg, seed);
                          t.optimizer = opt;
                          if (cfg.train.optimizer != opt) t.learning_rate.reset();
                          auto [split, r] = carve_and_train(b, make_tdg_split(b, fold), cfg, seed, fold, t);
                          return finish(key, group, split, r);
                        }});
      }
    }
  }
  return jobs;
}

std::vector<CwdgAssignment> benchmark_assignments(const ExperimentConfig& cfg, const DatasetBundle& b) {
  const auto& p = cfg.protocol;
  std::vector<CwdgAssignment> out;
  if (p.enumerate_all) {
    const std::uint64_t n = count_cwdg_assignments(b.domain_count, b.class_count);
    for (std::uint64_t i = 0; i < n; ++i) out.push_back(cwdg_assignment_at(i, b.class_count, b.domain_count));
    return out;
  }
  if (p.use_presets) {
    auto presets = pacs_like_presets();
    if (p.max_presets && *p.max_presets < presets.size()) presets.resize(*p.max_presets);
    out.insert(out.end(), presets.begin(), presets.end());
  }
  for (std::size_t i = 0; i < p.random_assignments; ++i) {
    out.push_back(sample_cwdg_assignment(b.class_count, b.domain_count, derive_seed({kAssignTag, i})));
  }
  return out;
}

std::vector<Job> cwdg_jobs(const ExperimentConfig& cfg, const DatasetBundle& b) {
  const auto assignments = benchmark_assignments(cfg, b);
  std::vector<Job> jobs;
  for (std::uint64_t seed : cfg.seeds) {
    for (TrainerKind trainer : cfg.protocol.trainers) {
      for (std::size_t a = 0; a < assignments.size(); ++a) {
        const CwdgAssignment assignment = assignments[a];
        const json key = {{"seed", seed}, {"trainer", to_string(trainer)}, {"assignment", a},
                          {"held_out", assignment.held_out}};
        const std::string group = "trainer=" + to_string(trainer);
        jobs.push_back({key, group, [&cfg, &b, seed, trainer, a, assignment, key, group] {
                          TrainConfig t = run_config(cfg, seed);
                          t.trainer = trainer;
                          auto [split, r] = carve_and_train(b, make_cwdg_split(b, assignment), cfg, seed, a, t);
                          return finish(key, group, split, r);
                        }});
      }
    }
  }
  return jobs;
}

std::vector<Job> make_jobs(const ExperimentConfig& cfg, const DatasetBundle& b) {
  switch (cfg.kind) {
    case ExperimentKind::Shortcut: return shortcut_jobs(cfg, b);
    case ExperimentKind::PairwiseMatrix: return pairwise_jobs(cfg, b);
    case ExperimentKind::Incremental: return incremental_jobs(cfg, b);
    case ExperimentKind::PriorInjection: return prior_injection_jobs(cfg, b);
    case ExperimentKind::TdgBenchmark: return tdg_jobs(cfg, b);
    case ExperimentKind::CwdgBenchmark: return cwdg_jobs(cfg, b);
    case ExperimentKind::OptimizerAblation: return ablation_jobs(cfg, b);
  }
  throw ConfigError("unhandled experiment kind");
}

}  // namespace

std::uint32_t domain_index(const DatasetBundle& bundle, const std::string& name) {
  const auto it = std::find(bundle.domain_names.begin(), bundle.domain_names.end(), name);
  if (it == bundle.domain_names.end()) throw ConfigError("unknown domain '" + name + "'");
  return static_cast<std::uint32_t>(it - bundle.domain_names.begin());
}

std::vector<SummaryRow> Report::summary() const {
  std::vector<std::string> groups;
  std::vector<std::string> metric_names;
  for (const auto& r : runs) {
    if (std::find(groups.begin(), groups.end(), r.group) == groups.end()) groups.push_back(r.group);
    for (const auto& [name, value] : r.metrics) {
      if (std::find(metric_names.begin(), metric_names.end(), name) == metric_names.end()) {
        metric_names.push_back(name);
      }
    }
  }
  std::sort(metric_names.begin(), metric_names.end());
  std::vector<SummaryRow> rows;
  for (const auto& g : groups) {
    for (const auto& m : metric_names) {
      std::vector<double> values;
      for (const auto& r : runs) {
        if (r.group != g) continue;
        const auto it = r.metrics.find(m);
        if (it != r.metrics.end()) values.push_back(it->second);
      }
      if (values.empty()) continue;
      const MeanStd ms = mean_std(values);
      rows.push_back({g, m, values.size(), ms.mean, ms.std});
    }
  }
  return rows;
}

Report run_experiment(const ExperimentConfig& cfg) { return run_experiment(cfg, generate(cfg.dataset)); }

Report run_experiment(const ExperimentConfig& cfg, const DatasetBundle& bundle) {
  cfg.validate();
  Report report;
  report.config = cfg;
  report.domain_names = bundle.domain_names;
  const std::vector<Job> jobs = make_jobs(cfg, bundle);

  std::vector<std::optional<RunEntry>> results(jobs.size());
  std::vector<std::string> errors(jobs.size());
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  auto worker = [&] {
    for (;;) {
      if (failed.load()) return;
      const std::size_t i = next.fetch_add(1);
      if (i >= jobs.size()) return;
      try {
        results[i] = jobs[i].run();
      } catch (const std::exception& e) {
        errors[i] = e.what();
        failed.store(true);
      }
    }
  };
  const std::size_t n_threads = std::max<std::size_t>(1, std::min(cfg.workers, jobs.size()));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  for (std::size_t i = 0; i < jobs.size(); ++i) {
    if (!errors[i].empty() && report.complete) {
      report.complete = false;
      report.error = "run " + jobs[i].key.dump() + " failed: " + errors[i];
    }
    if (results[i]) report.runs.push_back(std::move(*results[i]));
  }
  if (report.complete && report.runs.size() != jobs.size()) {
    report.complete = false;
    report.error = "runs were skipped";
  }
  return report;
}

}  // namespace dg
