#pragma once

#include <array>
#include <span>
#include <vector>

#include "dg/rng.hpp"

namespace dg {

/// Train-time image perturbations. Defaults follow the usual DomainBed-style
/// pipeline: flip with p = 0.5, color jitter factors in [0.6, 1.4],
/// grayscale with p = 0.1. Normalization defaults to the identity because
/// the synthetic images already live in [0, 1].
struct AugConfig {
  bool crop = true;
  double flip_probability = 0.5;
  double jitter_low = 0.6;
  double jitter_high = 1.4;
  double grayscale_probability = 0.1;
  std::array<double, 3> mean = {0.0, 0.0, 0.0};
  std::array<double, 3> std = {1.0, 1.0, 1.0};

  void validate() const;
  /// ImageNet channel statistics for normalization.
  static AugConfig imagenet_normalized();
};

/// Augments one [3 x H x W] image: crop-and-resize (crop fraction in
/// [0.8, 1.0]), horizontal flip, brightness/contrast/saturation jitter,
/// grayscale, clamp to [0, 1], per-channel normalization.
std::vector<double> augment(std::span<const double> image, std::size_t height, std::size_t width,
                            const AugConfig& cfg, Rng& rng);

/// Normalization only (the evaluation-time transform).
void normalize_in_place(std::span<double> image, std::size_t height, std::size_t width, const AugConfig& cfg);

void flip_horizontal(std::span<double> image, std::size_t height, std::size_t width);
void to_grayscale(std::span<double> image, std::size_t height, std::size_t width);

}  // namespace dg
