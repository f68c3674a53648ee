#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace dg {

struct AccuracyResult {
  double fraction = 0.0;
  /// histogram[k] = number of predictions equal to class k.
  std::vector<std::size_t> histogram;
};

/// Fraction of matching entries plus the predicted-class histogram. Throws
/// ContractError on empty or unequal-length input.
AccuracyResult accuracy(std::span<const std::uint32_t> predictions, std::span<const std::uint32_t> labels,
                        std::size_t num_classes);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // sample std (n - 1); 0 for a single value
};

MeanStd mean_std(std::span<const double> values);

}  // namespace dg
