#include "dg/dataset.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <set>
#include <sstream>

#include <json.hpp>

#include "dg/error.hpp"
#include "dg/render.hpp"
#include "dg/rng.hpp"

namespace dg {
namespace {

constexpr std::array<std::pair<Style, std::string_view>, 6> kStyleNames = {{
    {Style::Plain, "plain"},
    {Style::ClassShade, "class-shade"},
    {Style::ClassTexture, "class-texture"},
    {Style::SketchOutline, "sketch-outline"},
    {Style::CartoonFlat, "cartoon-flat"},
    {Style::PaintJitter, "paint-jitter"},
}};

// Stream tags keep the generators' RNG streams apart even for equal seeds.
constexpr std::uint64_t kStyleShapesTag = 0x5354594c45ULL;
constexpr std::uint64_t kColorTag = 0x434f4c4f52ULL;
constexpr std::uint64_t kRotatedTag = 0x524f5441ULL;

void check_image_size(std::size_t size) {
  if (size < 16) throw ConfigError("image_size must be >= 16, got " + std::to_string(size));
}

DatasetBundle empty_bundle(std::string generator, std::uint64_t seed, std::size_t classes,
                           std::vector<std::string> domain_names, std::size_t size) {
  DatasetBundle b;
  b.generator = std::move(generator);
  b.seed = seed;
  b.class_count = classes;
  b.domain_count = domain_names.size();
  b.domain_names = std::move(domain_names);
  b.height = size;
  b.width = size;
  return b;
}

void append_sample(DatasetBundle& b, const std::vector<double>& image, std::size_t cls, std::size_t dom) {
  b.pixels.insert(b.pixels.end(), image.begin(), image.end());
  b.classes.push_back(static_cast<std::uint32_t>(cls));
  b.domains.push_back(static_cast<std::uint32_t>(dom));
}

std::string format_angle(double a) {
  std::ostringstream os;
  os << a << "deg";
  return os.str();
}

}  // namespace

std::string_view style_name(Style s) {
  for (const auto& [style, name] : kStyleNames) {
    if (style == s) return name;
  }
  return "unknown";
}

Style parse_style(std::string_view name) {
  for (const auto& [style, n] : kStyleNames) {
    if (n == name) return style;
  }
  throw ConfigError("unknown style '" + std::string(name) + "'");
}

double class_shade(std::size_t class_id) { return 0.05 + 0.09 * static_cast<double>(class_id); }

std::size_t class_texture_period(std::size_t class_id) { return class_id + 2; }

Tensor DatasetBundle::batch(std::span<const std::size_t> indices) const {
  const std::size_t per = image_values();
  Tensor out(Shape{indices.size(), kImageChannels, height, width});
  double* dst = out.data().data();
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const auto img = image(indices[k]);
    std::copy(img.begin(), img.end(), dst + k * per);
  }
  return out;
}

std::vector<std::size_t> DatasetBundle::cell_counts() const {
  std::vector<std::size_t> counts(class_count * domain_count, 0);
  for (std::size_t i = 0; i < size(); ++i) ++counts[classes[i] * domain_count + domains[i]];
  return counts;
}

DatasetBundle generate_style_shapes(const StyleShapesConfig& cfg) {
  if (cfg.classes == 0 || cfg.classes > kGlyphCount) {
    throw ConfigError("style-shapes supports 1..10 classes, got " + std::to_string(cfg.classes));
  }
  if (cfg.styles.empty()) throw ConfigError("style-shapes needs at least one style");
  if (cfg.pixel_noise < 0.0) throw ConfigError("pixel_noise must be >= 0");
  check_image_size(cfg.image_size);

  std::vector<std::string> names;
  for (Style s : cfg.styles) names.emplace_back(style_name(s));
  DatasetBundle b = empty_bundle("style-shapes", cfg.seed, cfg.classes, names, cfg.image_size);
  const std::size_t n = cfg.image_size;
  std::vector<double> image(kImageChannels * n * n);
  for (std::size_t d = 0; d < cfg.styles.size(); ++d) {
    for (std::size_t c = 0; c < cfg.classes; ++c) {
      Rng rng(derive_seed({kStyleShapesTag, cfg.seed, c, d}));
      for (std::size_t i = 0; i < cfg.per_cell; ++i) {
        const auto pose = render::jittered_pose(rng);
        const auto cov = render::glyph_coverage(c, pose, n);
        render::compose_style(cfg.styles[d], c, cov, n, rng, image);
        if (cfg.pixel_noise > 0.0) {
          for (double& v : image) v = std::clamp(v + cfg.pixel_noise * rng.normal(), 0.0, 1.0);
        }
        append_sample(b, image, c, d);
      }
    }
  }
  nlohmann::json j = {{"classes", cfg.classes},       {"styles", names},
                      {"per_cell", cfg.per_cell},     {"image_size", cfg.image_size},
                      {"seed", cfg.seed},             {"pixel_noise", cfg.pixel_noise}};
  b.config_json = j.dump();
  return b;
}

DatasetBundle generate_color_two_class(const ColorTwoClassConfig& cfg) {
  if (!(cfg.correlation >= 0.0 && cfg.correlation <= 1.0)) {
    throw ConfigError("correlation must lie in [0, 1]");
  }
  check_image_size(cfg.image_size);
  DatasetBundle b = empty_bundle("color-two-class", cfg.seed, 2, {"red", "green"}, cfg.image_size);
  const std::size_t n = cfg.image_size, plane = n * n;
  std::vector<double> image(kImageChannels * plane);
  for (std::size_t d = 0; d < 2; ++d) {
    Rng rng(derive_seed({kColorTag, cfg.seed, d}));
    for (std::size_t i = 0; i < cfg.per_domain; ++i) {
      // Domain d is the color; the class agrees with it with probability rho.
      const std::size_t cls = rng.bernoulli(cfg.correlation) ? d : 1 - d;
      const std::size_t glyph = cls * 5 + rng.below(5);
      const auto cov = render::glyph_coverage(glyph, render::jittered_pose(rng), n);
      std::fill(image.begin(), image.end(), 0.0);
      std::copy(cov.begin(), cov.end(), image.begin() + static_cast<std::ptrdiff_t>(d * plane));
      append_sample(b, image, cls, d);
    }
  }
  nlohmann::json j = {{"correlation", cfg.correlation},
                      {"per_domain", cfg.per_domain},
                      {"image_size", cfg.image_size},
                      {"seed", cfg.seed}};
  b.config_json = j.dump();
  return b;
}

DatasetBundle generate_rotated_shapes(const RotatedShapesConfig& cfg) {
  if (cfg.angles.empty()) throw ConfigError("rotated-shapes needs at least one angle");
  if (std::set<double>(cfg.angles.begin(), cfg.angles.end()).size() != cfg.angles.size()) {
    throw ConfigError("rotated-shapes angles must be distinct");
  }
  if (cfg.classes == 0 || cfg.classes > kGlyphCount) {
    throw ConfigError("rotated-shapes supports 1..10 classes, got " + std::to_string(cfg.classes));
  }
  check_image_size(cfg.image_size);
  std::vector<std::string> names;
  for (double a : cfg.angles) names.push_back(format_angle(a));
  DatasetBundle b = empty_bundle("rotated-shapes", cfg.seed, cfg.classes, names, cfg.image_size);
  const std::size_t n = cfg.image_size;
  std::vector<double> image(kImageChannels * n * n);
  for (std::size_t d = 0; d < cfg.angles.size(); ++d) {
    for (std::size_t c = 0; c < cfg.classes; ++c) {
      Rng rng(derive_seed({kRotatedTag, cfg.seed, c, d}));
      for (std::size_t i = 0; i < cfg.per_cell; ++i) {
        const auto cov = render::glyph_coverage(c, render::jittered_pose(rng, cfg.angles[d]), n);
        render::compose_style(Style::Plain, c, cov, n, rng, image);
        append_sample(b, image, c, d);
      }
    }
  }
  nlohmann::json j = {{"angles", cfg.angles},
                      {"classes", cfg.classes},
                      {"per_cell", cfg.per_cell},
                      {"image_size", cfg.image_size},
                      {"seed", cfg.seed}};
  b.config_json = j.dump();
  return b;
}

DatasetBundle generate(const GeneratorConfig& cfg) {
  return std::visit(
      [](const auto& c) -> DatasetBundle {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, StyleShapesConfig>) return generate_style_shapes(c);
        else if constexpr (std::is_same_v<T, ColorTwoClassConfig>) return generate_color_two_class(c);
        else return generate_rotated_shapes(c);
      },
      cfg);
}

std::vector<std::string> domain_names(const GeneratorConfig& cfg) {
  return std::visit(
      [](const auto& c) -> std::vector<std::string> {
        using T = std::decay_t<decltype(c)>;
        std::vector<std::string> names;
        if constexpr (std::is_same_v<T, StyleShapesConfig>) {
          for (Style s : c.styles) names.emplace_back(style_name(s));
        } else if constexpr (std::is_same_v<T, ColorTwoClassConfig>) {
          names = {"red", "green"};
        } else {
          for (double a : c.angles) names.push_back(format_angle(a));
        }
        return names;
      },
      cfg);
}

std::size_t class_count(const GeneratorConfig& cfg) {
  return std::visit(
      [](const auto& c) -> std::size_t {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, ColorTwoClassConfig>) return 2;
        else return c.classes;
      },
      cfg);
}

}  // namespace dg
