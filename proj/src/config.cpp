#include "dg/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "dg/error.hpp"

namespace dg {
namespace {

using nlohmann::json;

const std::vector<std::pair<ExperimentKind, const char*>> kKinds = {
    {ExperimentKind::Shortcut, "shortcut"},
    {ExperimentKind::PairwiseMatrix, "pairwise-matrix"},
    {ExperimentKind::Incremental, "incremental"},
    {ExperimentKind::PriorInjection, "prior-injection"},
    {ExperimentKind::TdgBenchmark, "tdg-benchmark"},
    {ExperimentKind::CwdgBenchmark, "cwdg-benchmark"},
    {ExperimentKind::OptimizerAblation, "optimizer-ablation"},
};

std::vector<Style> four_styles() {
  return {Style::Plain, Style::PaintJitter, Style::CartoonFlat, Style::SketchOutline};
}

template <typename T>
T field(const json& j, const char* name, const std::string& where) {
  try {
    return j.at(name).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + name + ": " + e.what());
  }
}

template <typename T>
void optional_field(const json& j, const char* name, T& out, const std::string& where) {
  if (j.contains(name)) out = field<T>(j, name, where);
}

void check_domain(const std::vector<std::string>& names, const std::string& value, const std::string& what) {
  if (value.empty()) return;
  if (std::find(names.begin(), names.end(), value) == names.end()) {
    throw ConfigError(what + ": unknown domain '" + value + "'");
  }
}

}  // namespace

std::string to_string(ExperimentKind k) {
  for (const auto& [kind, name] : kKinds) {
    if (kind == k) return name;
  }
  return "unknown";
}

ExperimentKind parse_experiment_kind(const std::string& s) {
  for (const auto& [kind, name] : kKinds) {
    if (s == name) return kind;
  }
  throw ConfigError("kind: unknown experiment kind '" + s + "'");
}

json to_json(const GeneratorConfig& g) {
  return std::visit(
      [](const auto& c) -> json {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, StyleShapesConfig>) {
          std::vector<std::string> styles;
          for (Style s : c.styles) styles.emplace_back(style_name(s));
          return {{"generator", "style-shapes"}, {"classes", c.classes},      {"styles", styles},
                  {"per_cell", c.per_cell},     {"image_size", c.image_size}, {"seed", c.seed},
                  {"pixel_noise", c.pixel_noise}};
        } else if constexpr (std::is_same_v<T, ColorTwoClassConfig>) {
          return {{"generator", "color-two-class"}, {"correlation", c.correlation}, {"per_domain", c.per_domain},
                  {"image_size", c.image_size},     {"seed", c.seed}};
        } else {
          return {{"generator", "rotated-shapes"}, {"angles", c.angles},         {"classes", c.classes},
                  {"per_cell", c.per_cell},        {"image_size", c.image_size}, {"seed", c.seed}};
        }
      },
      g);
}

GeneratorConfig generator_from_json(const json& j) {
  const std::string where = "dataset.";
  const auto gen = field<std::string>(j, "generator", where);
  if (gen == "style-shapes") {
    StyleShapesConfig c;
    c.styles.clear();
    optional_field(j, "classes", c.classes, where);
    optional_field(j, "per_cell", c.per_cell, where);
    optional_field(j, "image_size", c.image_size, where);
    optional_field(j, "seed", c.seed, where);
    optional_field(j, "pixel_noise", c.pixel_noise, where);
    if (j.contains("styles")) {
      for (const auto& name : field<std::vector<std::string>>(j, "styles", where)) {
        try {
          c.styles.push_back(parse_style(name));
        } catch (const std::exception& e) {
          throw ConfigError(where + "styles: " + e.what());
        }
      }
    } else {
      c.styles = four_styles();
    }
    return c;
  }
  if (gen == "color-two-class") {
    ColorTwoClassConfig c;
    optional_field(j, "correlation", c.correlation, where);
    optional_field(j, "per_domain", c.per_domain, where);
    optional_field(j, "image_size", c.image_size, where);
    optional_field(j, "seed", c.seed, where);
    return c;
  }
  if (gen == "rotated-shapes") {
    RotatedShapesConfig c;
    c.angles = field<std::vector<double>>(j, "angles", where);
    optional_field(j, "classes", c.classes, where);
    optional_field(j, "per_cell", c.per_cell, where);
    optional_field(j, "image_size", c.image_size, where);
    optional_field(j, "seed", c.seed, where);
    return c;
  }
  throw ConfigError("dataset.generator: unknown generator '" + gen + "'");
}

GeneratorConfig default_dataset(ExperimentKind kind) {
  StyleShapesConfig c;
  c.styles = four_styles();
  if (kind == ExperimentKind::Shortcut) {
    c.classes = 10;
    c.styles = {Style::Plain, Style::ClassShade, Style::ClassTexture};
  }
  return c;
}

void ExperimentConfig::validate() const {
  if (seeds.empty()) throw ConfigError("seeds: at least one seed is required");
  if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size()) {
    throw ConfigError("seeds: duplicate seed");
  }
  if (workers == 0) throw ConfigError("workers: must be at least 1");
  try {
    train.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("train: ") + e.what());
  }
  const auto& p = protocol;
  if (!(p.val_fraction > 0.0 && p.val_fraction < 1.0)) {
    throw ConfigError("protocol.val_fraction: must lie in (0, 1)");
  }
  const auto names = domain_names(dataset);
  const std::size_t classes = class_count(dataset);
  if (names.size() < 2) throw ConfigError("dataset: at least two domains are required");

  switch (kind) {
    case ExperimentKind::Shortcut:
      if (p.shortcut_domains.empty()) throw ConfigError("protocol.shortcut_domains: must not be empty");
      for (const auto& d : p.shortcut_domains) check_domain(names, d, "protocol.shortcut_domains");
      check_domain(names, p.plain_domain, "protocol.plain_domain");
      if (p.plain_domain.empty()) throw ConfigError("protocol.plain_domain: required");
      break;
    case ExperimentKind::PairwiseMatrix:
      break;
    case ExperimentKind::Incremental: {
      check_domain(names, p.test_domain, "protocol.test_domain");
      if (names.size() < 3) throw ConfigError("dataset: incremental needs at least three domains");
      const std::string test = p.test_domain.empty() ? names.back() : p.test_domain;
      for (const auto& order : p.orders) {
        std::set<std::string> seen;
        for (const auto& d : order) {
          check_domain(names, d, "protocol.orders");
          if (d == test) throw ConfigError("protocol.orders: order contains the test domain '" + d + "'");
          if (!seen.insert(d).second) throw ConfigError("protocol.orders: repeated domain '" + d + "'");
        }
        if (seen.size() != names.size() - 1) {
          throw ConfigError("protocol.orders: every order must list all non-test domains");
        }
      }
      break;
    }
    case ExperimentKind::PriorInjection: {
      check_domain(names, p.base_domain, "protocol.base_domain");
      check_domain(names, p.injected_domain, "protocol.injected_domain");
      const std::string base = p.base_domain.empty() ? names[0] : p.base_domain;
      const std::string inj = p.injected_domain.empty() ? names[1] : p.injected_domain;
      if (base == inj) throw ConfigError("protocol.injected_domain: must differ from base_domain");
      if (!(p.injected_train_fraction > 0.0 && p.injected_train_fraction < 1.0)) {
        throw ConfigError("protocol.injected_train_fraction: must lie in (0, 1)");
      }
      if (!p.class_order.empty()) {
        std::set<std::uint32_t> seen(p.class_order.begin(), p.class_order.end());
        if (seen.size() != classes || p.class_order.size() != classes || *seen.rbegin() >= classes) {
          throw ConfigError("protocol.class_order: must be a permutation of the class ids");
        }
      }
      break;
    }
    case ExperimentKind::TdgBenchmark:
    case ExperimentKind::OptimizerAblation:
      for (const auto& d : p.folds) check_domain(names, d, "protocol.folds");
      if (kind == ExperimentKind::TdgBenchmark && p.trainers.empty()) {
        throw ConfigError("protocol.trainers: must not be empty");
      }
      if (kind == ExperimentKind::OptimizerAblation && p.optimizers.empty()) {
        throw ConfigError("protocol.optimizers: must not be empty");
      }
      break;
    case ExperimentKind::CwdgBenchmark:
      if (p.trainers.empty()) throw ConfigError("protocol.trainers: must not be empty");
      if (!p.enumerate_all && p.random_assignments == 0 && !p.use_presets) {
        throw ConfigError("protocol.random_assignments: no assignments selected");
      }
      if (p.use_presets && (classes != 7 || names.size() != 4)) {
        throw ConfigError("protocol.use_presets: presets need 7 classes and 4 domains");
      }
      if (p.enumerate_all) count_cwdg_assignments(names.size(), classes);
      break;
  }
}

json to_json(const ExperimentConfig& c) {
  const auto& p = c.protocol;
  std::vector<std::string> trainers, optimizers;
  for (auto t : p.trainers) trainers.push_back(to_string(t));
  for (auto o : p.optimizers) optimizers.push_back(to_string(o));
  json proto = {{"val_fraction", p.val_fraction},
                {"shortcut_domains", p.shortcut_domains},
                {"plain_domain", p.plain_domain},
                {"test_domain", p.test_domain},
                {"orders", p.orders},
                {"folds", p.folds},
                {"base_domain", p.base_domain},
                {"injected_domain", p.injected_domain},
                {"class_order", p.class_order},
                {"injected_train_fraction", p.injected_train_fraction},
                {"random_assignments", p.random_assignments},
                {"use_presets", p.use_presets},
                {"enumerate_all", p.enumerate_all},
                {"trainers", trainers},
                {"optimizers", optimizers},
                {"embedder", p.embedder == EmbedderKind::Pixel ? "pixel" : "trunk"}};
  proto["max_presets"] = p.max_presets ? json(*p.max_presets) : json(nullptr);
  return {{"kind", to_string(c.kind)}, {"dataset", to_json(c.dataset)}, {"train", to_json(c.train)},
          {"protocol", proto},         {"seeds", c.seeds},              {"output_dir", c.output_dir},
          {"workers", c.workers}};
}

ExperimentConfig experiment_config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config: expected a JSON object");
  ExperimentConfig c;
  c.kind = parse_experiment_kind(field<std::string>(j, "kind", ""));
  c.dataset = j.contains("dataset") ? generator_from_json(j.at("dataset")) : default_dataset(c.kind);
  if (c.kind == ExperimentKind::PairwiseMatrix) {
    c.train.bottleneck = true;
    c.protocol.val_fraction = 0.10;
  }
  if (j.contains("train")) {
    json t = j.at("train");
    if (c.kind == ExperimentKind::PairwiseMatrix && !t.contains("bottleneck")) t["bottleneck"] = true;
    try {
      c.train = train_config_from_json(t);
    } catch (const json::exception& e) {
      throw ConfigError(std::string("train: ") + e.what());
    } catch (const ConfigError& e) {
      throw ConfigError(std::string("train: ") + e.what());
    }
  }
  if (j.contains("protocol")) {
    const json& p = j.at("protocol");
    const std::string w = "protocol.";
    auto& o = c.protocol;
    optional_field(p, "val_fraction", o.val_fraction, w);
    optional_field(p, "shortcut_domains", o.shortcut_domains, w);
    optional_field(p, "plain_domain", o.plain_domain, w);
    optional_field(p, "test_domain", o.test_domain, w);
    optional_field(p, "orders", o.orders, w);
    optional_field(p, "folds", o.folds, w);
    optional_field(p, "base_domain", o.base_domain, w);
    optional_field(p, "injected_domain", o.injected_domain, w);
    optional_field(p, "class_order", o.class_order, w);
    optional_field(p, "injected_train_fraction", o.injected_train_fraction, w);
    optional_field(p, "random_assignments", o.random_assignments, w);
    optional_field(p, "use_presets", o.use_presets, w);
    optional_field(p, "enumerate_all", o.enumerate_all, w);
    if (p.contains("max_presets") && !p.at("max_presets").is_null()) {
      o.max_presets = field<std::size_t>(p, "max_presets", w);
    }
    if (p.contains("trainers")) {
      o.trainers.clear();
      for (const auto& t : field<std::vector<std::string>>(p, "trainers", w)) o.trainers.push_back(parse_trainer(t));
    }
    if (p.contains("optimizers")) {
      o.optimizers.clear();
      for (const auto& t : field<std::vector<std::string>>(p, "optimizers", w)) {
        o.optimizers.push_back(parse_optimizer(t));
      }
    }
    if (p.contains("embedder")) {
      const auto e = field<std::string>(p, "embedder", w);
      if (e == "pixel") o.embedder = EmbedderKind::Pixel;
      else if (e == "trunk") o.embedder = EmbedderKind::Trunk;
      else throw ConfigError("protocol.embedder: unknown embedder '" + e + "'");
    }
  }
  if (!j.contains("seeds")) throw ConfigError("seeds: at least one seed is required");
  c.seeds = field<std::vector<std::uint64_t>>(j, "seeds", "");
  optional_field(j, "output_dir", c.output_dir, "");
  optional_field(j, "workers", c.workers, "");
  c.validate();
  return c;
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(path + ": parse error: " + e.what());
  }
}

ExperimentConfig load_config(const std::string& path) {
  try {
    return experiment_config_from_json(read_json_file(path));
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

}  // namespace dg
