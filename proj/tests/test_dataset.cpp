#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>

#include "dg/augment.hpp"
#include "dg/dataset.hpp"
#include "dg/error.hpp"
#include "dg/render.hpp"
#include "dg/rng.hpp"

using namespace dg;

namespace {

StyleShapesConfig pacs_like(std::uint64_t seed = 7) {
  StyleShapesConfig c;
  c.classes = 7;
  c.styles = {Style::Plain, Style::PaintJitter, Style::CartoonFlat, Style::SketchOutline};
  c.per_cell = 40;
  c.image_size = 16;
  c.seed = seed;
  return c;
}

/// Background level of a class-shade image: pixels well below the glyph
/// level, averaged. Partially covered edge pixels are excluded by the cut.
double background_level(std::span<const double> image, std::size_t plane) {
  const auto red = image.subspan(0, plane);
  const double lo = *std::min_element(red.begin(), red.end());
  const double cut = lo + 0.25 * (1.0 - lo);
  double acc = 0.0;
  std::size_t n = 0;
  for (double v : red) {
    if (v < cut) {
      acc += v;
      ++n;
    }
  }
  return acc / static_cast<double>(n);
}

}  // namespace

TEST_CASE("style shapes have exact cell counts") {
  const auto b = generate_style_shapes(pacs_like());
  CHECK(b.size() == 7 * 4 * 40);
  CHECK(b.class_count == 7);
  CHECK(b.domain_count == 4);
  CHECK(b.pixels.size() == b.size() * 3 * 16 * 16);
  for (std::size_t n : b.cell_counts()) CHECK(n == 40);
  CHECK(std::all_of(b.pixels.begin(), b.pixels.end(), [](double v) { return v >= 0.0 && v <= 1.0; }));
}

TEST_CASE("generation is deterministic") {
  const auto a = generate_style_shapes(pacs_like(3));
  const auto b = generate_style_shapes(pacs_like(3));
  CHECK(a.pixels == b.pixels);
  CHECK(a.classes == b.classes);
  CHECK(a.domains == b.domains);
  const auto c = generate_style_shapes(pacs_like(4));
  CHECK(a.pixels != c.pixels);
}

TEST_CASE("class-shade background follows the shade table") {
  StyleShapesConfig c;
  c.classes = 10;
  c.styles = {Style::ClassShade};
  c.per_cell = 10;
  const auto b = generate_style_shapes(c);
  const std::size_t plane = 16 * 16;
  for (std::size_t i = 0; i < b.size(); ++i) {
    const double expected = 0.05 + 0.09 * static_cast<double>(b.classes[i]);
    CHECK(std::abs(background_level(b.image(i), plane) - expected) <= 0.02);
  }
}

TEST_CASE("mean background intensity alone separates class-shade classes") {
  StyleShapesConfig c;
  c.classes = 10;
  c.styles = {Style::ClassShade};
  c.per_cell = 30;
  c.seed = 19;
  const auto b = generate_style_shapes(c);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < b.size(); ++i) {
    const double level = background_level(b.image(i), 256);
    std::size_t best = 0;
    for (std::size_t k = 1; k < 10; ++k) {
      if (std::abs(level - class_shade(k)) < std::abs(level - class_shade(best))) best = k;
    }
    correct += best == b.classes[i];
  }
  CHECK(static_cast<double>(correct) / static_cast<double>(b.size()) >= 0.95);
}

TEST_CASE("class-texture stripes repeat with the class period") {
  StyleShapesConfig c;
  c.classes = 4;
  c.styles = {Style::ClassTexture};
  c.per_cell = 3;
  const auto b = generate_style_shapes(c);
  for (std::size_t i = 0; i < b.size(); ++i) {
    const std::size_t period = class_texture_period(b.classes[i]);
    CHECK(period == b.classes[i] + 2);
    const auto img = b.image(i);
    std::size_t agree = 0, total = 0;
    for (std::size_t y = 0; y < 16; ++y) {
      for (std::size_t x = 0; x + period < 16; ++x) {
        const double a = img[y * 16 + x], s = img[y * 16 + x + period];
        const auto bare = [](double v) { return v == 0.0 || std::abs(v - 0.6) < 1e-12; };
        if (bare(a) && bare(s)) {
          ++total;
          agree += std::abs(a - s) < 1e-9;
        }
      }
    }
    CHECK(total > 50);
    CHECK(agree == total);
  }
}

TEST_CASE("style shapes reject bad configs") {
  StyleShapesConfig c = pacs_like();
  c.classes = 11;
  CHECK_THROWS_AS(generate_style_shapes(c), ConfigError);
  c = pacs_like();
  c.styles.clear();
  CHECK_THROWS_AS(generate_style_shapes(c), ConfigError);
  c = pacs_like();
  c.image_size = 12;
  CHECK_THROWS_AS(generate_style_shapes(c), ConfigError);
  CHECK_THROWS_AS(parse_style("watercolor"), ConfigError);
  CHECK(parse_style("sketch-outline") == Style::SketchOutline);
}

TEST_CASE("color two-class correlation") {
  SUBCASE("full correlation makes class 0 red") {
    const auto b = generate_color_two_class({1.0, 200, 16, 1});
    CHECK(b.class_count == 2);
    for (std::size_t i = 0; i < b.size(); ++i) {
      if (b.classes[i] != 0) continue;
      const auto img = b.image(i);
      const double red = std::accumulate(img.begin(), img.begin() + 256, 0.0);
      const double green = std::accumulate(img.begin() + 256, img.begin() + 512, 0.0);
      CHECK(red > green);
    }
  }
  SUBCASE("half correlation agrees about half the time") {
    const auto b = generate_color_two_class({0.5, 1000, 16, 2});
    std::size_t agree = 0;
    for (std::size_t i = 0; i < b.size(); ++i) agree += b.classes[i] == b.domains[i];
    CHECK(std::abs(static_cast<double>(agree) / static_cast<double>(b.size()) - 0.5) <= 0.03);
  }
  SUBCASE("empty") {
    const auto b = generate_color_two_class({0.9, 0, 16, 0});
    CHECK(b.size() == 0);
    CHECK(b.class_count == 2);
    CHECK(b.domain_count == 2);
  }
}

TEST_CASE("rotated shapes") {
  SUBCASE("single angle") {
    RotatedShapesConfig c;
    c.angles = {0};
    c.per_cell = 2;
    CHECK(generate_rotated_shapes(c).domain_count == 1);
  }
  SUBCASE("six angles") {
    RotatedShapesConfig c;
    c.angles = {0, 15, 30, 45, 60, 75};
    c.per_cell = 20;
    const auto b = generate_rotated_shapes(c);
    CHECK(b.size() == 1200);
    CHECK(b.domain_names[3] == "45deg");
  }
  SUBCASE("a disk looks the same upside down") {
    RotatedShapesConfig c;
    c.angles = {0, 180};
    c.classes = 1;
    c.per_cell = 200;
    const auto b = generate_rotated_shapes(c);
    double m[2] = {0, 0};
    for (std::size_t i = 0; i < b.size(); ++i) {
      const auto img = b.image(i);
      m[b.domains[i]] += std::accumulate(img.begin(), img.end(), 0.0) / static_cast<double>(img.size());
    }
    CHECK(std::abs(m[0] - m[1]) / 200.0 <= 0.02);
  }
  SUBCASE("duplicate angles") {
    RotatedShapesConfig c;
    c.angles = {0, 30, 30};
    CHECK_THROWS_AS(generate_rotated_shapes(c), ConfigError);
  }
}

TEST_CASE("glyph pose jitter stays in range") {
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) {
    const auto p = render::jittered_pose(rng, 30.0);
    CHECK(std::abs(p.dx) <= 0.2);
    CHECK(std::abs(p.dy) <= 0.2);
    CHECK(p.scale >= 0.85);
    CHECK(p.scale <= 1.15);
    CHECK(std::abs(p.rotation_deg - 30.0) <= 10.0);
  }
}

TEST_CASE("every glyph covers part of the image") {
  for (std::size_t g = 0; g < kGlyphCount; ++g) {
    const auto cov = render::glyph_coverage(g, {}, 16);
    const double area = std::accumulate(cov.begin(), cov.end(), 0.0) / 256.0;
    CHECK(area > 0.02);
    CHECK(area < 0.6);
  }
  CHECK_THROWS(render::glyph_contains(10, 0, 0));
}

TEST_CASE("augmentation") {
  const auto b = generate_style_shapes(pacs_like());
  const auto img = b.image(100);
  SUBCASE("identity configuration only normalizes") {
    AugConfig cfg;
    cfg.crop = false;
    cfg.flip_probability = 0.0;
    cfg.jitter_low = cfg.jitter_high = 1.0;
    cfg.grayscale_probability = 0.0;
    cfg.mean = {0.5, 0.4, 0.3};
    cfg.std = {0.2, 0.25, 0.5};
    Rng rng(0);
    const auto out = augment(img, 16, 16, cfg, rng);
    std::vector<double> expected(img.begin(), img.end());
    normalize_in_place(expected, 16, 16, cfg);
    for (std::size_t i = 0; i < out.size(); ++i) CHECK(out[i] == doctest::Approx(expected[i]).epsilon(1e-12));
  }
  SUBCASE("flip is an involution") {
    std::vector<double> x(img.begin(), img.end());
    flip_horizontal(x, 16, 16);
    CHECK(x != std::vector<double>(img.begin(), img.end()));
    flip_horizontal(x, 16, 16);
    CHECK(x == std::vector<double>(img.begin(), img.end()));
  }
  SUBCASE("grayscale equalizes channels") {
    AugConfig cfg;
    cfg.grayscale_probability = 1.0;
    Rng rng(4);
    const auto out = augment(img, 16, 16, cfg, rng);
    for (std::size_t p = 0; p < 256; ++p) {
      CHECK(out[p] == out[256 + p]);
      CHECK(out[p] == out[512 + p]);
    }
  }
  SUBCASE("output stays in range before normalization") {
    AugConfig cfg;
    Rng rng(9);
    for (int i = 0; i < 50; ++i) {
      const auto out = augment(b.image(static_cast<std::size_t>(i) * 20), 16, 16, cfg, rng);
      CHECK(std::all_of(out.begin(), out.end(), [](double v) { return v >= 0.0 && v <= 1.0; }));
    }
  }
  SUBCASE("invalid config") {
    AugConfig cfg;
    cfg.flip_probability = 1.5;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = AugConfig{};
    cfg.jitter_low = 1.5;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
  }
}

TEST_CASE("bundle round-trips through disk") {
  const auto dir = std::filesystem::temp_directory_path() / "dg_bundle_roundtrip";
  std::filesystem::remove_all(dir);
  const auto b = generate_style_shapes(pacs_like(11));
  save_bundle(b, dir.string());
  CHECK(std::filesystem::exists(dir / "manifest.json"));
  CHECK(std::filesystem::exists(dir / "labels.csv"));
  const auto back = load_bundle(dir.string());
  CHECK(back.pixels == b.pixels);
  CHECK(back.classes == b.classes);
  CHECK(back.domains == b.domains);
  CHECK(back.domain_names == b.domain_names);
  CHECK(back.generator == "style-shapes");
  std::filesystem::remove_all(dir);
  CHECK_THROWS_AS(load_bundle(dir.string()), IoError);
}
