#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace dg {

/// Per-parameter optimizer buffers. `first` is the SGD velocity or the Adam
/// first moment; `second` is only used by Adam.
struct OptimState {
  std::vector<std::vector<double>> first;
  std::vector<std::vector<double>> second;
  std::uint64_t step = 0;
};

/// v <- momentum * v + (grad + weight_decay * w);  w <- w - lr * v
void sgd_step(std::span<double> w, std::span<const double> grad, std::span<double> velocity, double lr,
              double momentum, double weight_decay);

/// Bias-corrected Adam for one tensor. `step` is the 1-based update count.
/// Weight decay, when nonzero, is added to the gradient (L2 form).
void adam_step(std::span<double> w, std::span<const double> grad, std::span<double> m, std::span<double> v,
               std::uint64_t step, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8,
               double weight_decay = 0.0);

}  // namespace dg
