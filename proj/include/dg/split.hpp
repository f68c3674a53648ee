#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "dg/dataset.hpp"

namespace dg {

/// For every class, the domain whose samples of that class are held out for
/// testing. held_out[c] is the domain of class c.
struct CwdgAssignment {
  std::vector<std::uint32_t> held_out;
  std::uint64_t seed = 0;

  void validate(std::size_t classes, std::size_t domains) const;
  bool is_constant() const;
};

enum class Regime { Tdg, Cwdg, PriorInjection, Incremental };

std::string regime_name(Regime r);

/// Train/validation/test index sets into a DatasetBundle. Indices are kept
/// sorted ascending.
struct SplitSpec {
  Regime regime = Regime::Tdg;
  /// Step number for incremental schedules.
  std::size_t step = 0;
  nlohmann::json parameters = nlohmann::json::object();
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;

  /// Throws ContractError if the sets overlap or index past `bundle_size`.
  void check_disjoint(std::size_t bundle_size) const;
};

SplitSpec make_tdg_split(const DatasetBundle& bundle, std::uint32_t test_domain);

SplitSpec make_cwdg_split(const DatasetBundle& bundle, const CwdgAssignment& assignment);

/// Uniform draw over all S^C assignments (constant ones included).
CwdgAssignment sample_cwdg_assignment(std::size_t classes, std::size_t domains, std::uint64_t seed);

/// S^C; throws ConfigError when the count does not fit below 2^63.
std::uint64_t count_cwdg_assignments(std::uint64_t domains, std::uint64_t classes);

/// Decodes assignment number `index` in [0, S^C) (class 0 is the least
/// significant base-S digit).
CwdgAssignment cwdg_assignment_at(std::uint64_t index, std::size_t classes, std::size_t domains);

/// Named held-out tables for a 7-class, 4-domain PACS-like bundle with
/// domains (photo, art, cartoon, sketch) and classes (dog, elephant,
/// giraffe, guitar, horse, house, person).
std::vector<CwdgAssignment> pacs_like_presets();

/// Classes not in `injected` train on `base_domain`; injected classes train on
/// a seeded `injected_train_fraction` of their `injected_domain` samples. The
/// test set is every `injected_domain` sample not used for training.
SplitSpec make_prior_injection_split(const DatasetBundle& bundle, std::uint32_t base_domain,
                                     const std::vector<std::uint32_t>& injected, std::uint32_t injected_domain,
                                     double injected_train_fraction = 0.5, std::uint64_t seed = 0);

/// Step k trains on domains order[0..k], subsampled (stratified by class, then
/// domain) to the size of step 0's pool. The test set is the whole test domain.
std::vector<SplitSpec> make_incremental_schedule(const DatasetBundle& bundle, std::uint32_t test_domain,
                                                 const std::vector<std::uint32_t>& order, std::uint64_t seed);

/// Moves round(fraction * n) samples of every (class, domain) train cell into
/// the validation set.
SplitSpec carve_validation(const SplitSpec& split, const DatasetBundle& bundle, double fraction, std::uint64_t seed);

/// Largest-remainder apportionment of `total` proportional to `weights`;
/// ties go to the lower index. The result sums to `total` exactly.
std::vector<std::size_t> apportion(std::size_t total, const std::vector<std::size_t>& weights);

nlohmann::json to_json(const SplitSpec& split);
SplitSpec split_from_json(const nlohmann::json& j);
void save_split(const SplitSpec& split, const std::string& path);
SplitSpec load_split(const std::string& path);

}  // namespace dg
