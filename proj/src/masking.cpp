#include "dg/masking.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "dg/error.hpp"

namespace dg {
namespace {

void check_q(double q) {
  if (!(q >= 0.0 && q <= 100.0)) throw ConfigError("mask percentile q must lie in [0, 100]");
}

void mask_row(const double* grad, double* out, std::size_t width, std::size_t k, std::vector<std::size_t>& order) {
  order.resize(width);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [grad](std::size_t a, std::size_t b) { return std::abs(grad[a]) > std::abs(grad[b]); });
  std::fill(out, out + width, 1.0);
  for (std::size_t i = 0; i < k; ++i) out[order[i]] = 0.0;
}

std::size_t row_width(const Tensor& grads) {
  if (grads.rank() != 1 && grads.rank() != 2) throw DimensionError("mask gradients must be [G] or [B x G]");
  return grads.dim(grads.rank() - 1);
}

}  // namespace

std::size_t masked_count(std::size_t width, double q) {
  check_q(q);
  return static_cast<std::size_t>(std::floor(q / 100.0 * static_cast<double>(width) + 0.5));
}

Tensor top_q_mask(const Tensor& grads, double q) {
  const std::size_t width = row_width(grads);
  const std::size_t k = masked_count(width, q);
  Tensor mask(grads.shape());
  const std::size_t rows = width ? grads.size() / width : 0;
  std::vector<std::size_t> order;
  for (std::size_t r = 0; r < rows; ++r) {
    mask_row(grads.data().data() + r * width, mask.data().data() + r * width, width, k, order);
  }
  return mask;
}

Tensor batch_mean_mask(const Tensor& grads, double q) {
  const std::size_t width = row_width(grads);
  const std::size_t k = masked_count(width, q);
  const std::size_t rows = width ? grads.size() / width : 0;
  std::vector<double> mean_abs(width, 0.0);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t i = 0; i < width; ++i) mean_abs[i] += std::abs(grads[r * width + i]);
  std::vector<double> row(width);
  std::vector<std::size_t> order;
  mask_row(mean_abs.data(), row.data(), width, k, order);
  Tensor mask(grads.shape());
  for (std::size_t r = 0; r < rows; ++r) std::copy(row.begin(), row.end(), mask.data().data() + r * width);
  return mask;
}

}  // namespace dg
