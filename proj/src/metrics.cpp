#include "dg/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "dg/error.hpp"

namespace dg {

AccuracyResult accuracy(std::span<const std::uint32_t> predictions, std::span<const std::uint32_t> labels,
                        std::size_t num_classes) {
  if (predictions.empty()) throw ContractError("accuracy of an empty prediction set");
  if (predictions.size() != labels.size()) throw ContractError("accuracy: predictions and labels differ in length");
  AccuracyResult r;
  std::size_t top = num_classes;
  for (std::uint32_t p : predictions) top = std::max<std::size_t>(top, p + 1);
  r.histogram.assign(top, 0);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    ++r.histogram[predictions[i]];
    hits += predictions[i] == labels[i];
  }
  r.fraction = static_cast<double>(hits) / static_cast<double>(predictions.size());
  return r;
}

MeanStd mean_std(std::span<const double> values) {
  MeanStd out;
  if (values.empty()) return out;
  double s = 0.0;
  for (double v : values) s += v;
  out.mean = s / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    out.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return out;
}

}  // namespace dg
