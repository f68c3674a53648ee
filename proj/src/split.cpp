#include "dg/split.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <set>

#include "dg/error.hpp"
#include "dg/rng.hpp"

namespace dg {
namespace {

constexpr std::uint64_t kCwdgTag = 0x43574447ULL;
constexpr std::uint64_t kIncrementalTag = 0x494e4352ULL;
constexpr std::uint64_t kCarveTag = 0x43415256ULL;
constexpr std::uint64_t kInjectTag = 0x494e4a45ULL;

std::size_t round_half_up(double x) { return static_cast<std::size_t>(std::floor(x + 0.5)); }

void check_domain(const DatasetBundle& b, std::uint32_t d, const char* what) {
  if (d >= b.domain_count) {
    throw ConfigError(std::string(what) + " " + std::to_string(d) + " is not a domain of this bundle (S=" +
                      std::to_string(b.domain_count) + ")");
  }
}

/// Indices grouped by (class, domain) cell key, each group in ascending order.
std::map<std::size_t, std::vector<std::size_t>> group_by_cell(const DatasetBundle& b,
                                                              const std::vector<std::size_t>& indices) {
  std::map<std::size_t, std::vector<std::size_t>> cells;
  for (std::size_t i : indices) cells[b.classes[i] * b.domain_count + b.domains[i]].push_back(i);
  return cells;
}

std::vector<std::size_t> shuffled(std::vector<std::size_t> items, std::uint64_t seed) {
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(items));
  return items;
}

}  // namespace

void CwdgAssignment::validate(std::size_t classes, std::size_t domains) const {
  if (held_out.size() != classes) {
    throw ConfigError("CWDG assignment covers " + std::to_string(held_out.size()) + " classes, bundle has " +
                      std::to_string(classes));
  }
  for (std::size_t c = 0; c < held_out.size(); ++c) {
    if (held_out[c] >= domains) {
      throw ConfigError("CWDG assignment sends class " + std::to_string(c) + " to unknown domain " +
                        std::to_string(held_out[c]));
    }
  }
}

bool CwdgAssignment::is_constant() const {
  return std::adjacent_find(held_out.begin(), held_out.end(), std::not_equal_to<>()) == held_out.end();
}

std::string regime_name(Regime r) {
  switch (r) {
    case Regime::Tdg: return "tdg";
    case Regime::Cwdg: return "cwdg";
    case Regime::PriorInjection: return "prior-injection";
    case Regime::Incremental: return "incremental";
  }
  return "unknown";
}

void SplitSpec::check_disjoint(std::size_t bundle_size) const {
  std::vector<char> seen(bundle_size, 0);
  for (const auto* set : {&train, &val, &test}) {
    for (std::size_t i : *set) {
      if (i >= bundle_size) throw ContractError("split index " + std::to_string(i) + " outside bundle");
      if (seen[i]) throw ContractError("split sets overlap at index " + std::to_string(i));
      seen[i] = 1;
    }
  }
}

SplitSpec make_tdg_split(const DatasetBundle& bundle, std::uint32_t test_domain) {
  check_domain(bundle, test_domain, "test domain");
  if (bundle.domain_count < 2) throw ConfigError("TDG split needs at least two domains");
  SplitSpec s;
  s.regime = Regime::Tdg;
  s.parameters = {{"test_domain", test_domain}};
  for (std::size_t i = 0; i < bundle.size(); ++i) {
    (bundle.domains[i] == test_domain ? s.test : s.train).push_back(i);
  }
  return s;
}

SplitSpec make_cwdg_split(const DatasetBundle& bundle, const CwdgAssignment& assignment) {
  assignment.validate(bundle.class_count, bundle.domain_count);
  SplitSpec s;
  s.regime = Regime::Cwdg;
  s.parameters = {{"held_out", assignment.held_out}, {"assignment_seed", assignment.seed}};
  for (std::size_t i = 0; i < bundle.size(); ++i) {
    const bool held = bundle.domains[i] == assignment.held_out[bundle.classes[i]];
    (held ? s.test : s.train).push_back(i);
  }
  return s;
}

CwdgAssignment sample_cwdg_assignment(std::size_t classes, std::size_t domains, std::uint64_t seed) {
  if (classes == 0 || domains == 0) throw ConfigError("CWDG assignment needs C >= 1 and S >= 1");
  Rng rng(derive_seed({kCwdgTag, seed}));
  CwdgAssignment a;
  a.seed = seed;
  for (std::size_t c = 0; c < classes; ++c) a.held_out.push_back(static_cast<std::uint32_t>(rng.below(domains)));
  return a;
}

std::uint64_t count_cwdg_assignments(std::uint64_t domains, std::uint64_t classes) {
  if (domains == 0 || classes == 0) throw ConfigError("count_cwdg_assignments needs S >= 1 and C >= 1");
  constexpr std::uint64_t limit = std::uint64_t{1} << 63;
  std::uint64_t count = 1;
  for (std::uint64_t c = 0; c < classes; ++c) {
    if (domains > 1 && count > (limit - 1) / domains) {
      throw ConfigError("S^C overflows 2^63 for S=" + std::to_string(domains) + ", C=" + std::to_string(classes));
    }
    count *= domains;
  }
  return count;
}

CwdgAssignment cwdg_assignment_at(std::uint64_t index, std::size_t classes, std::size_t domains) {
  if (index >= count_cwdg_assignments(domains, classes)) throw ConfigError("assignment index out of range");
  CwdgAssignment a;
  a.seed = index;
  for (std::size_t c = 0; c < classes; ++c) {
    a.held_out.push_back(static_cast<std::uint32_t>(index % domains));
    index /= domains;
  }
  return a;
}

std::vector<CwdgAssignment> pacs_like_presets() {
  // Domains: 0 photo, 1 art, 2 cartoon, 3 sketch.
  // Classes: dog, elephant, giraffe, guitar, horse, house, person.
  return {
      {{0, 3, 1, 0, 2, 2, 0}, 0},
      {{1, 0, 0, 1, 3, 2, 2}, 1},
      {{3, 1, 2, 2, 2, 0, 1}, 2},
      {{2, 3, 1, 3, 1, 3, 0}, 3},
      {{2, 1, 0, 1, 0, 3, 2}, 4},
  };
}

SplitSpec make_prior_injection_split(const DatasetBundle& bundle, std::uint32_t base_domain,
                                     const std::vector<std::uint32_t>& injected, std::uint32_t injected_domain,
                                     double injected_train_fraction, std::uint64_t seed) {
  check_domain(bundle, base_domain, "base domain");
  check_domain(bundle, injected_domain, "injected domain");
  if (base_domain == injected_domain) throw ConfigError("base and injected domains must differ");
  if (!(injected_train_fraction > 0.0 && injected_train_fraction <= 1.0)) {
    throw ConfigError("injected_train_fraction must lie in (0, 1]");
  }
  std::set<std::uint32_t> inj;
  for (std::uint32_t c : injected) {
    if (c >= bundle.class_count) throw ConfigError("injected class " + std::to_string(c) + " out of range");
    if (!inj.insert(c).second) throw ConfigError("injected class " + std::to_string(c) + " listed twice");
  }

  std::vector<char> in_train(bundle.size(), 0);
  std::map<std::uint32_t, std::vector<std::size_t>> injected_cells;
  for (std::size_t i = 0; i < bundle.size(); ++i) {
    const std::uint32_t c = bundle.classes[i], d = bundle.domains[i];
    if (inj.count(c)) {
      if (d == injected_domain) injected_cells[c].push_back(i);
    } else if (d == base_domain) {
      in_train[i] = 1;
    }
  }
  for (auto& [c, cell] : injected_cells) {
    const auto order = shuffled(cell, derive_seed({kInjectTag, seed, c}));
    const std::size_t take = std::min(order.size(), round_half_up(injected_train_fraction * order.size()));
    for (std::size_t k = 0; k < take; ++k) in_train[order[k]] = 1;
  }

  SplitSpec s;
  s.regime = Regime::PriorInjection;
  s.parameters = {{"base_domain", base_domain},
                  {"injected_domain", injected_domain},
                  {"injected", std::vector<std::uint32_t>(inj.begin(), inj.end())},
                  {"injected_train_fraction", injected_train_fraction},
                  {"seed", seed}};
  for (std::size_t i = 0; i < bundle.size(); ++i) {
    if (in_train[i]) s.train.push_back(i);
    else if (bundle.domains[i] == injected_domain) s.test.push_back(i);
  }
  return s;
}

std::vector<std::size_t> apportion(std::size_t total, const std::vector<std::size_t>& weights) {
  const std::size_t wsum = std::accumulate(weights.begin(), weights.end(), std::size_t{0});
  std::vector<std::size_t> out(weights.size(), 0);
  if (wsum == 0) {
    if (total != 0) throw ContractError("cannot apportion a positive total over zero weights");
    return out;
  }
  std::vector<std::pair<std::size_t, std::size_t>> remainders;  // (remainder numerator, index)
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const unsigned __int128 num = static_cast<unsigned __int128>(total) * weights[i];
    out[i] = static_cast<std::size_t>(num / wsum);
    remainders.emplace_back(static_cast<std::size_t>(num % wsum), i);
    assigned += out[i];
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t k = 0; assigned < total; ++k, ++assigned) ++out[remainders[k].second];
  return out;
}

std::vector<SplitSpec> make_incremental_schedule(const DatasetBundle& bundle, std::uint32_t test_domain,
                                                 const std::vector<std::uint32_t>& order, std::uint64_t seed) {
  check_domain(bundle, test_domain, "test domain");
  std::set<std::uint32_t> seen;
  for (std::uint32_t d : order) {
    check_domain(bundle, d, "order entry");
    if (d == test_domain) throw ConfigError("incremental order must not contain the test domain");
    if (!seen.insert(d).second) throw ConfigError("incremental order repeats domain " + std::to_string(d));
  }
  if (order.size() + 1 != bundle.domain_count) {
    throw ConfigError("incremental order must list every domain except the test domain");
  }

  std::vector<std::size_t> test;
  for (std::size_t i = 0; i < bundle.size(); ++i) {
    if (bundle.domains[i] == test_domain) test.push_back(i);
  }
  std::size_t target = 0;
  for (std::size_t i = 0; i < bundle.size(); ++i) target += bundle.domains[i] == order[0];

  const std::size_t S = bundle.domain_count, C = bundle.class_count;
  std::vector<SplitSpec> steps;
  for (std::size_t k = 0; k < order.size(); ++k) {
    std::set<std::uint32_t> active(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k + 1));
    std::vector<std::vector<std::size_t>> cells(C * S);
    for (std::size_t i = 0; i < bundle.size(); ++i) {
      if (active.count(bundle.domains[i])) cells[bundle.classes[i] * S + bundle.domains[i]].push_back(i);
    }
    std::vector<std::size_t> class_sizes(C, 0);
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t d = 0; d < S; ++d) class_sizes[c] += cells[c * S + d].size();
    const auto class_quota = apportion(target, class_sizes);

    SplitSpec s;
    s.regime = Regime::Incremental;
    s.step = k;
    s.parameters = {{"test_domain", test_domain},
                    {"order", order},
                    {"domains", std::vector<std::uint32_t>(active.begin(), active.end())},
                    {"seed", seed}};
    for (std::size_t c = 0; c < C; ++c) {
      std::vector<std::size_t> dom_sizes(S);
      for (std::size_t d = 0; d < S; ++d) dom_sizes[d] = cells[c * S + d].size();
      const auto quota = apportion(class_quota[c], dom_sizes);
      for (std::size_t d = 0; d < S; ++d) {
        const auto& cell = cells[c * S + d];
        if (quota[d] == cell.size()) {
          s.train.insert(s.train.end(), cell.begin(), cell.end());
          continue;
        }
        const auto picked = shuffled(cell, derive_seed({kIncrementalTag, seed, k, c, d}));
        s.train.insert(s.train.end(), picked.begin(), picked.begin() + static_cast<std::ptrdiff_t>(quota[d]));
      }
    }
    std::sort(s.train.begin(), s.train.end());
    s.test = test;
    steps.push_back(std::move(s));
  }
  return steps;
}

SplitSpec carve_validation(const SplitSpec& split, const DatasetBundle& bundle, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) throw ConfigError("validation fraction must lie in (0, 1)");
  auto cells = group_by_cell(bundle, split.train);

  struct Cell {
    std::size_t key;
    std::size_t size;
    std::size_t take;
  };
  std::vector<Cell> plan;
  for (const auto& [key, members] : cells) {
    const std::size_t take = round_half_up(fraction * members.size());
    if (take >= members.size()) {
      throw ConfigError("validation fraction " + std::to_string(fraction) + " empties train cell (class " +
                        std::to_string(key / bundle.domain_count) + ", domain " +
                        std::to_string(key % bundle.domain_count) + ")");
    }
    plan.push_back({key, members.size(), take});
  }
  // Per-cell rounding can drift from the rounded overall total; absorb the
  // drift starting with the largest cell, never emptying a train cell.
  const std::size_t target = round_half_up(fraction * split.train.size());
  std::vector<std::size_t> by_size(plan.size());
  std::iota(by_size.begin(), by_size.end(), std::size_t{0});
  std::stable_sort(by_size.begin(), by_size.end(), [&](std::size_t a, std::size_t b) { return plan[a].size > plan[b].size; });
  std::size_t current = 0;
  for (const auto& c : plan) current += c.take;
  for (std::size_t k : by_size) {
    Cell& c = plan[k];
    if (current < target) {
      const std::size_t room = c.size - 1 - c.take;
      const std::size_t add = std::min(room, target - current);
      c.take += add;
      current += add;
    } else if (current > target) {
      const std::size_t sub = std::min(c.take, current - target);
      c.take -= sub;
      current -= sub;
    }
  }

  SplitSpec out = split;
  out.train.clear();
  out.val.clear();
  for (const auto& c : plan) {
    const auto order = shuffled(cells[c.key], derive_seed({kCarveTag, seed, c.key}));
    out.val.insert(out.val.end(), order.begin(), order.begin() + static_cast<std::ptrdiff_t>(c.take));
    out.train.insert(out.train.end(), order.begin() + static_cast<std::ptrdiff_t>(c.take), order.end());
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.val.begin(), out.val.end());
  out.parameters["val_fraction"] = fraction;
  out.parameters["val_seed"] = seed;
  return out;
}

nlohmann::json to_json(const SplitSpec& s) {
  return {{"regime", regime_name(s.regime)}, {"step", s.step}, {"parameters", s.parameters},
          {"train", s.train},                {"val", s.val},   {"test", s.test}};
}

SplitSpec split_from_json(const nlohmann::json& j) {
  SplitSpec s;
  const auto name = j.at("regime").get<std::string>();
  if (name == "tdg") s.regime = Regime::Tdg;
  else if (name == "cwdg") s.regime = Regime::Cwdg;
  else if (name == "prior-injection") s.regime = Regime::PriorInjection;
  else if (name == "incremental") s.regime = Regime::Incremental;
  else throw ConfigError("unknown split regime '" + name + "'");
  s.step = j.value("step", std::size_t{0});
  s.parameters = j.value("parameters", nlohmann::json::object());
  s.train = j.at("train").get<std::vector<std::size_t>>();
  s.val = j.value("val", std::vector<std::size_t>{});
  s.test = j.at("test").get<std::vector<std::size_t>>();
  return s;
}

void save_split(const SplitSpec& split, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << to_json(split).dump() << '\n';
}

SplitSpec load_split(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path);
  try {
    return split_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed split file " + path + ": " + e.what());
  }
}

}  // namespace dg
