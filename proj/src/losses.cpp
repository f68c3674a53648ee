#include "dg/losses.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "dg/error.hpp"

namespace dg {

Var cross_entropy(Var logits, std::span<const std::uint32_t> labels) {
  const Tensor& L = logits.value();
  if (L.rank() != 2 || L.dim(0) != labels.size() || L.dim(0) == 0) {
    throw DimensionError("cross_entropy needs [B x K] logits and B labels, got " + to_string(L.shape()));
  }
  const std::size_t B = L.dim(0), K = L.dim(1);
  std::vector<std::uint32_t> y(labels.begin(), labels.end());
  Tensor probs(Shape{B, K});
  double total = 0.0;
  for (std::size_t b = 0; b < B; ++b) {
    if (y[b] >= K) throw ContractError("label " + std::to_string(y[b]) + " out of range for " + std::to_string(K) + " logits");
    const double* row = L.data().data() + b * K;
    const double mx = *std::max_element(row, row + K);
    double z = 0.0;
    for (std::size_t k = 0; k < K; ++k) z += std::exp(row[k] - mx);
    const double log_z = mx + std::log(z);
    total += log_z - row[y[b]];
    for (std::size_t k = 0; k < K; ++k) probs[b * K + k] = std::exp(row[k] - log_z);
  }
  const double inv_b = 1.0 / static_cast<double>(B);
  return logits.tape().record(Tensor::scalar(total * inv_b), {logits},
                              [logits, probs = std::move(probs), y = std::move(y), B, K, inv_b](
                                  const Tensor& up, Gradients& grads) {
                                Tensor& g = grads.slot(logits);
                                const double u = up[0] * inv_b;
                                for (std::size_t b = 0; b < B; ++b) {
                                  for (std::size_t k = 0; k < K; ++k) g[b * K + k] += u * probs[b * K + k];
                                  g[b * K + y[b]] -= u;
                                }
                              });
}

}  // namespace dg
