// dg: synthetic domain-generalization experiments from the command line.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "dg/config.hpp"
#include "dg/error.hpp"
#include "dg/experiment.hpp"
#include "dg/fid.hpp"
#include "dg/split.hpp"
#include "dg/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string required_string(const json& j, const char* name) {
  if (!j.contains(name) || !j.at(name).is_string()) throw dg::ConfigError(std::string(name) + ": required string field");
  return j.at(name).get<std::string>();
}

std::uint32_t domain_ref(const dg::DatasetBundle& b, const json& j, const char* name) {
  if (!j.contains(name)) throw dg::ConfigError(std::string(name) + ": required field");
  const json& v = j.at(name);
  if (v.is_string()) return dg::domain_index(b, v.get<std::string>());
  const auto d = v.get<std::uint32_t>();
  if (d >= b.domain_count) throw dg::ConfigError(std::string(name) + ": domain " + std::to_string(d) + " out of range");
  return d;
}

std::vector<std::uint32_t> domain_list(const dg::DatasetBundle& b, const json& j, const char* name) {
  std::vector<std::uint32_t> out;
  if (!j.contains(name)) return out;
  for (const auto& v : j.at(name)) {
    json wrapper = {{name, v}};
    out.push_back(domain_ref(b, wrapper, name));
  }
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw dg::IoError("cannot write " + path.string());
  out << text;
}

int gen_data(const std::string& cfg_path, const std::string& out_override) {
  const json j = dg::read_json_file(cfg_path);
  const dg::GeneratorConfig g = dg::generator_from_json(j.contains("dataset") ? j.at("dataset") : j);
  const std::string out = out_override.empty() ? required_string(j, "output") : out_override;
  const dg::DatasetBundle b = dg::generate(g);
  dg::save_bundle(b, out);
  std::cout << "wrote " << b.size() << " samples (" << b.class_count << " classes x " << b.domain_count
            << " domains) to " << out << "\n";
  return 0;
}

int make_split(const std::string& cfg_path, const std::string& out_override) {
  const json j = dg::read_json_file(cfg_path);
  const dg::DatasetBundle b = dg::load_bundle(required_string(j, "bundle"));
  const std::string regime = required_string(j, "regime");
  const std::string out = out_override.empty() ? required_string(j, "output") : out_override;
  const std::uint64_t seed = j.value("seed", std::uint64_t{0});
  const double val_fraction = j.value("val_fraction", 0.0);

  std::vector<dg::SplitSpec> splits;
  if (regime == "tdg") {
    splits.push_back(dg::make_tdg_split(b, domain_ref(b, j, "test_domain")));
  } else if (regime == "cwdg") {
    dg::CwdgAssignment a;
    if (j.contains("held_out")) {
      a.held_out = domain_list(b, j, "held_out");
    } else {
      a = dg::sample_cwdg_assignment(b.class_count, b.domain_count, j.value("assignment_seed", seed));
    }
    splits.push_back(dg::make_cwdg_split(b, a));
  } else if (regime == "prior-injection") {
    const auto injected = j.value("injected", std::vector<std::uint32_t>{});
    splits.push_back(dg::make_prior_injection_split(b, domain_ref(b, j, "base_domain"), injected,
                                                    domain_ref(b, j, "injected_domain"),
                                                    j.value("injected_train_fraction", 0.5), seed));
  } else if (regime == "incremental") {
    splits = dg::make_incremental_schedule(b, domain_ref(b, j, "test_domain"), domain_list(b, j, "order"), seed);
  } else {
    throw dg::ConfigError("regime: unknown regime '" + regime + "'");
  }
  if (val_fraction > 0.0) {
    for (auto& s : splits) s = dg::carve_validation(s, b, val_fraction, seed);
  }
  if (splits.size() == 1) {
    dg::save_split(splits[0], out);
    std::cout << "wrote " << out << " (train " << splits[0].train.size() << ", val " << splits[0].val.size()
              << ", test " << splits[0].test.size() << ")\n";
  } else {
    fs::create_directories(out);
    for (const auto& s : splits) {
      const fs::path p = fs::path(out) / ("step_" + std::to_string(s.step) + ".json");
      dg::save_split(s, p.string());
      std::cout << "wrote " << p.string() << " (train " << s.train.size() << ", test " << s.test.size() << ")\n";
    }
  }
  return 0;
}

int train(const std::string& cfg_path, const std::string& out_override) {
  const json j = dg::read_json_file(cfg_path);
  const dg::DatasetBundle b = dg::load_bundle(required_string(j, "bundle"));
  const dg::SplitSpec split = dg::load_split(required_string(j, "split"));
  split.check_disjoint(b.size());
  const dg::TrainConfig cfg = dg::train_config_from_json(j.value("train", json::object()));
  const std::string out = out_override.empty() ? required_string(j, "output") : out_override;

  const dg::TrainResult r = dg::run_training(b, split, cfg);
  fs::create_directories(out);
  json run = dg::to_json(r.record);
  run["config"] = dg::to_json(cfg);
  write_text(fs::path(out) / "run.json", run.dump(2) + "\n");
  std::string csv = "epoch,train_loss,val_acc,test_acc\n";
  for (const auto& e : r.record.epochs) {
    char line[160];
    std::snprintf(line, sizeof line, "%zu,%.17g,%.17g,%.17g\n", e.epoch, e.train_loss, e.val_acc, e.test_acc);
    csv += line;
  }
  write_text(fs::path(out) / "metrics.csv", csv);
  dg::save_checkpoint(r.selected_params, r.record.selected_epoch, (fs::path(out) / "selected").string());
  dg::save_checkpoint(r.final_params, cfg.epochs, (fs::path(out) / "final").string());
  std::printf("A_sel %.4f  A_max %.4f  A_min %.4f  (selected epoch %zu)\n", r.record.a_sel, r.record.a_max,
              r.record.a_min, r.record.selected_epoch);
  return 0;
}

int fid(const std::string& a, const std::string& b) {
  const double d = dg::fid_between_bundles(dg::load_bundle(a), dg::load_bundle(b));
  std::printf("%.10g\n", d);
  return 0;
}

int experiment(const std::string& cfg_path, std::size_t workers, const std::string& out_override) {
  dg::ExperimentConfig cfg = dg::load_config(cfg_path);
  if (workers > 0) cfg.workers = workers;
  if (!out_override.empty()) cfg.output_dir = out_override;
  const dg::Report report = dg::run_experiment(cfg);
  dg::emit_report(report, cfg.output_dir);
  for (const auto& s : report.summary()) {
    std::printf("%-40s %-28s n=%-3zu mean=%.4f std=%.4f\n", s.group.c_str(), s.metric.c_str(), s.n, s.mean, s.std);
  }
  if (!report.complete) {
    std::cerr << "dg: experiment incomplete: " << report.error << "\n";
    return 1;
  }
  std::cout << "report written to " << cfg.output_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Synthetic domain-generalization experiments"};
  app.require_subcommand(1);
  std::string cfg, out, bundle_a, bundle_b;
  std::size_t workers = 0;

  auto* gen = app.add_subcommand("gen-data", "Render a synthetic dataset bundle");
  gen->add_option("config", cfg, "JSON config")->required()->check(CLI::ExistingFile);
  gen->add_option("--out", out, "Output directory (overrides the config)");

  auto* split = app.add_subcommand("split", "Build train/val/test index sets for a bundle");
  split->add_option("config", cfg, "JSON config")->required()->check(CLI::ExistingFile);
  split->add_option("--out", out, "Output path (overrides the config)");

  auto* tr = app.add_subcommand("train", "Train one model on a bundle and split");
  tr->add_option("config", cfg, "JSON config")->required()->check(CLI::ExistingFile);
  tr->add_option("--out", out, "Output directory (overrides the config)");

  auto* fd = app.add_subcommand("fid", "Pixel-space Frechet distance between two bundles");
  fd->add_option("bundle_a", bundle_a)->required()->check(CLI::ExistingDirectory);
  fd->add_option("bundle_b", bundle_b)->required()->check(CLI::ExistingDirectory);

  auto* ex = app.add_subcommand("experiment", "Run a named experiment and write its report");
  ex->add_option("config", cfg, "JSON config")->required()->check(CLI::ExistingFile);
  ex->add_option("--workers", workers, "Parallel runs (overrides the config)")->check(CLI::PositiveNumber);
  ex->add_option("--out", out, "Report directory (overrides the config)");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*gen) return gen_data(cfg, out);
    if (*split) return make_split(cfg, out);
    if (*tr) return train(cfg, out);
    if (*fd) return fid(bundle_a, bundle_b);
    if (*ex) return experiment(cfg, workers, out);
  } catch (const std::exception& e) {
    std::cerr << "dg: error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
