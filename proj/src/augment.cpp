#include "dg/augment.hpp"

#include <algorithm>
#include <cmath>

#include "dg/error.hpp"

namespace dg {
namespace {

constexpr double kLumaR = 0.299, kLumaG = 0.587, kLumaB = 0.114;

std::vector<double> crop_resize(std::span<const double> image, std::size_t h, std::size_t w, Rng& rng) {
  const double frac = rng.uniform(0.8, 1.0);
  const double ch = frac * static_cast<double>(h), cw = frac * static_cast<double>(w);
  const double y0 = rng.uniform(0.0, static_cast<double>(h) - ch);
  const double x0 = rng.uniform(0.0, static_cast<double>(w) - cw);
  std::vector<double> out(image.size());
  for (std::size_t c = 0; c < 3; ++c) {
    const double* src = image.data() + c * h * w;
    double* dst = out.data() + c * h * w;
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) {
        // Pixel centers of the output grid mapped into the crop window.
        const double sy = std::clamp(y0 + (y + 0.5) * ch / h - 0.5, 0.0, h - 1.0);
        const double sx = std::clamp(x0 + (x + 0.5) * cw / w - 0.5, 0.0, w - 1.0);
        const std::size_t iy = std::min(static_cast<std::size_t>(sy), h - 2);
        const std::size_t ix = std::min(static_cast<std::size_t>(sx), w - 2);
        const double fy = sy - iy, fx = sx - ix;
        const double a = src[iy * w + ix], b = src[iy * w + ix + 1];
        const double c2 = src[(iy + 1) * w + ix], d = src[(iy + 1) * w + ix + 1];
        dst[y * w + x] = (1 - fy) * ((1 - fx) * a + fx * b) + fy * ((1 - fx) * c2 + fx * d);
      }
  }
  return out;
}

}  // namespace

void AugConfig::validate() const {
  auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (!prob(flip_probability) || !prob(grayscale_probability)) {
    throw ConfigError("augmentation probabilities must lie in [0, 1]");
  }
  if (!(jitter_low <= jitter_high) || jitter_low < 0.0) throw ConfigError("jitter range must satisfy 0 <= low <= high");
  for (double s : std) {
    if (!(s > 0.0)) throw ConfigError("normalization std must be positive");
  }
}

AugConfig AugConfig::imagenet_normalized() {
  AugConfig cfg;
  cfg.mean = {0.485, 0.456, 0.406};
  cfg.std = {0.229, 0.224, 0.225};
  return cfg;
}

void flip_horizontal(std::span<double> image, std::size_t h, std::size_t w) {
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t y = 0; y < h; ++y) {
      double* row = image.data() + (c * h + y) * w;
      std::reverse(row, row + w);
    }
}

void to_grayscale(std::span<double> image, std::size_t h, std::size_t w) {
  const std::size_t plane = h * w;
  for (std::size_t i = 0; i < plane; ++i) {
    const double g = kLumaR * image[i] + kLumaG * image[plane + i] + kLumaB * image[2 * plane + i];
    image[i] = image[plane + i] = image[2 * plane + i] = g;
  }
}

void normalize_in_place(std::span<double> image, std::size_t h, std::size_t w, const AugConfig& cfg) {
  const std::size_t plane = h * w;
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t i = 0; i < plane; ++i) {
      double& v = image[c * plane + i];
      v = (v - cfg.mean[c]) / cfg.std[c];
    }
}

std::vector<double> augment(std::span<const double> image, std::size_t h, std::size_t w, const AugConfig& cfg,
                            Rng& rng) {
  if (image.size() != 3 * h * w) throw DimensionError("augment expects a [3 x H x W] image");
  std::vector<double> out = cfg.crop ? crop_resize(image, h, w, rng) : std::vector<double>(image.begin(), image.end());
  const std::size_t plane = h * w;

  if (rng.bernoulli(cfg.flip_probability)) flip_horizontal(out, h, w);

  const double brightness = rng.uniform(cfg.jitter_low, cfg.jitter_high);
  const double contrast = rng.uniform(cfg.jitter_low, cfg.jitter_high);
  const double saturation = rng.uniform(cfg.jitter_low, cfg.jitter_high);
  if (brightness != 1.0) {
    for (double& v : out) v *= brightness;
  }
  if (contrast != 1.0) {
    double mean_gray = 0.0;
    for (std::size_t i = 0; i < plane; ++i)
      mean_gray += kLumaR * out[i] + kLumaG * out[plane + i] + kLumaB * out[2 * plane + i];
    mean_gray /= static_cast<double>(plane);
    for (double& v : out) v = mean_gray + contrast * (v - mean_gray);
  }
  if (saturation != 1.0) {
    for (std::size_t i = 0; i < plane; ++i) {
      const double g = kLumaR * out[i] + kLumaG * out[plane + i] + kLumaB * out[2 * plane + i];
      for (std::size_t c = 0; c < 3; ++c) out[c * plane + i] = g + saturation * (out[c * plane + i] - g);
    }
  }
  if (rng.bernoulli(cfg.grayscale_probability)) to_grayscale(out, h, w);

  for (double& v : out) v = std::clamp(v, 0.0, 1.0);
  normalize_in_place(out, h, w, cfg);
  return out;
}

}  // namespace dg
