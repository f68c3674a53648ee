#include "dg/optim.hpp"

#include <cmath>

#include "dg/error.hpp"

namespace dg {

void sgd_step(std::span<double> w, std::span<const double> grad, std::span<double> velocity, double lr,
              double momentum, double weight_decay) {
  if (w.size() != grad.size() || w.size() != velocity.size()) throw DimensionError("sgd_step buffer sizes differ");
  for (std::size_t i = 0; i < w.size(); ++i) {
    velocity[i] = momentum * velocity[i] + (grad[i] + weight_decay * w[i]);
    w[i] -= lr * velocity[i];
  }
}

void adam_step(std::span<double> w, std::span<const double> grad, std::span<double> m, std::span<double> v,
               std::uint64_t step, double lr, double beta1, double beta2, double eps, double weight_decay) {
  if (w.size() != grad.size() || w.size() != m.size() || w.size() != v.size()) {
    throw DimensionError("adam_step buffer sizes differ");
  }
  if (step == 0) throw ContractError("adam_step counts steps from 1");
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double g = grad[i] + weight_decay * w[i];
    m[i] = beta1 * m[i] + (1.0 - beta1) * g;
    v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
    w[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps);
  }
}

}  // namespace dg
