#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "dg/tensor.hpp"

namespace dg {

inline constexpr std::size_t kImageChannels = 3;
inline constexpr std::size_t kGlyphCount = 10;

/// Rendering styles; each style is one domain of a style-shapes bundle.
enum class Style { Plain, ClassShade, ClassTexture, SketchOutline, CartoonFlat, PaintJitter };

std::string_view style_name(Style s);
Style parse_style(std::string_view name);

/// Background gray level of class k in the class-shade style.
double class_shade(std::size_t class_id);
/// Stripe period in pixels of class k in the class-texture style.
std::size_t class_texture_period(std::size_t class_id);

struct StyleShapesConfig {
  std::size_t classes = 7;
  std::vector<Style> styles;
  std::size_t per_cell = 40;
  std::size_t image_size = 16;
  std::uint64_t seed = 0;
  /// Std of additive Gaussian pixel noise applied before clamping. 0 disables.
  double pixel_noise = 0.0;
};

struct ColorTwoClassConfig {
  double correlation = 0.9;
  std::size_t per_domain = 500;
  std::size_t image_size = 16;
  std::uint64_t seed = 0;
};

struct RotatedShapesConfig {
  std::vector<double> angles;
  std::size_t classes = 10;
  std::size_t per_cell = 20;
  std::size_t image_size = 16;
  std::uint64_t seed = 0;
};

using GeneratorConfig = std::variant<StyleShapesConfig, ColorTwoClassConfig, RotatedShapesConfig>;

/// Labeled multi-domain image collection. Images are [3 x H x W] in [0, 1],
/// stored back to back in `pixels` in sample order.
struct DatasetBundle {
  std::string generator;
  std::uint64_t seed = 0;
  std::size_t class_count = 0;
  std::size_t domain_count = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::string> domain_names;
  std::vector<double> pixels;
  std::vector<std::uint32_t> classes;
  std::vector<std::uint32_t> domains;
  /// Generator configuration echo, serialized as JSON text.
  std::string config_json;

  std::size_t size() const { return classes.size(); }
  std::size_t image_values() const { return kImageChannels * height * width; }
  std::span<const double> image(std::size_t i) const {
    return std::span<const double>(pixels).subspan(i * image_values(), image_values());
  }
  /// Stacks the selected images into a [B x 3 x H x W] batch.
  Tensor batch(std::span<const std::size_t> indices) const;
  /// Number of samples in each (class, domain) cell, indexed class * S + domain.
  std::vector<std::size_t> cell_counts() const;
};

DatasetBundle generate_style_shapes(const StyleShapesConfig& cfg);
DatasetBundle generate_color_two_class(const ColorTwoClassConfig& cfg);
DatasetBundle generate_rotated_shapes(const RotatedShapesConfig& cfg);
DatasetBundle generate(const GeneratorConfig& cfg);
/// Domain names a generator will produce, without rendering anything.
std::vector<std::string> domain_names(const GeneratorConfig& cfg);
std::size_t class_count(const GeneratorConfig& cfg);

/// Writes manifest.json, data.bin and labels.csv into `dir` (created if needed).
void save_bundle(const DatasetBundle& bundle, const std::string& dir);
DatasetBundle load_bundle(const std::string& dir);

}  // namespace dg
