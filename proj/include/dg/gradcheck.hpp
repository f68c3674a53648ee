#pragma once

#include <cstddef>
#include <functional>
#include <span>

#include "dg/tape.hpp"

namespace dg {

/// Builds a scalar from a differentiable point placed on a fresh tape.
using ScalarFn = std::function<Var(Var point)>;

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_coordinate = 0;
};

/// Compares the backward gradient of `fn` at `point` with central differences
/// of step `eps`. Relative error per coordinate is |a-b| / max(|a|, |b|, 1e-8).
/// When `coordinates` is nonempty only those entries are probed.
GradCheckResult finite_difference_check(const ScalarFn& fn, const Tensor& point, double eps,
                                        std::span<const std::size_t> coordinates = {});

}  // namespace dg
