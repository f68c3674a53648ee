#include "dg/render.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "dg/error.hpp"

namespace dg::render {
namespace {

constexpr std::array<std::string_view, kGlyphCount> kGlyphNames = {
    "disk", "ring", "cross", "bar", "triangle", "square", "L", "T", "diamond", "dot-pair"};

bool in_box(double u, double v, double u0, double u1, double v0, double v1) {
  return u >= u0 && u <= u1 && v >= v0 && v <= v1;
}

std::vector<bool> binarize(std::span<const double> coverage) {
  std::vector<bool> mask(coverage.size());
  for (std::size_t i = 0; i < coverage.size(); ++i) mask[i] = coverage[i] >= 0.5;
  return mask;
}

/// City-block distance (in pixels, capped) from each inside pixel to the
/// nearest outside pixel or the image border.
std::vector<int> inside_depth(const std::vector<bool>& mask, std::size_t size, int cap) {
  std::vector<int> depth(mask.size(), 0);
  const int n = static_cast<int>(size);
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) {
      if (!mask[y * n + x]) continue;
      int best = cap + 1;
      for (int dy = -cap; dy <= cap; ++dy)
        for (int dx = -cap; dx <= cap; ++dx) {
          const int d = std::abs(dx) + std::abs(dy);
          if (d == 0 || d >= best) continue;
          const int yy = y + dy, xx = x + dx;
          if (yy < 0 || yy >= n || xx < 0 || xx >= n || !mask[yy * n + xx]) best = d;
        }
      depth[y * n + x] = best;
    }
  return depth;
}

void set_rgb(std::span<double> image, std::size_t plane, std::size_t i, double r, double g, double b) {
  image[i] = r;
  image[plane + i] = g;
  image[2 * plane + i] = b;
}

}  // namespace

std::string_view glyph_name(std::size_t glyph) { return kGlyphNames.at(glyph); }

bool glyph_contains(std::size_t glyph, double u, double v) {
  const double r = std::hypot(u, v);
  switch (glyph) {
    case 0:
      return r <= 0.6;
    case 1:
      return r >= 0.35 && r <= 0.65;
    case 2:
      return in_box(u, v, -0.18, 0.18, -0.7, 0.7) || in_box(u, v, -0.7, 0.7, -0.18, 0.18);
    case 3:
      return in_box(u, v, -0.7, 0.7, -0.2, 0.2);
    case 4:
      return v >= -0.55 && v <= 0.7 && std::abs(u) <= 0.65 * (0.7 - v) / 1.25;
    case 5:
      return in_box(u, v, -0.55, 0.55, -0.55, 0.55);
    case 6:
      return in_box(u, v, -0.55, -0.2, -0.65, 0.65) || in_box(u, v, -0.55, 0.55, -0.65, -0.3);
    case 7:
      return in_box(u, v, -0.6, 0.6, 0.35, 0.65) || in_box(u, v, -0.17, 0.17, -0.65, 0.65);
    case 8:
      return std::abs(u) + std::abs(v) <= 0.7;
    case 9:
      return std::hypot(u - 0.4, v) <= 0.25 || std::hypot(u + 0.4, v) <= 0.25;
    default:
      throw ConfigError("glyph id out of range: " + std::to_string(glyph));
  }
}

GlyphPose jittered_pose(Rng& rng, double base_rotation_deg) {
  GlyphPose p;
  p.dx = rng.uniform(-0.2, 0.2);
  p.dy = rng.uniform(-0.2, 0.2);
  p.scale = rng.uniform(0.85, 1.15);
  p.rotation_deg = base_rotation_deg + rng.uniform(-10.0, 10.0);
  return p;
}

std::vector<double> glyph_coverage(std::size_t glyph, const GlyphPose& pose, std::size_t size,
                                   std::size_t supersample) {
  std::vector<double> cov(size * size, 0.0);
  const double theta = pose.rotation_deg * std::numbers::pi / 180.0;
  const double c = std::cos(theta), s = std::sin(theta);
  const double inv_scale = 1.0 / pose.scale;
  const double n = static_cast<double>(size);
  const double weight = 1.0 / static_cast<double>(supersample * supersample);
  for (std::size_t py = 0; py < size; ++py)
    for (std::size_t px = 0; px < size; ++px) {
      double acc = 0.0;
      for (std::size_t sy = 0; sy < supersample; ++sy)
        for (std::size_t sx = 0; sx < supersample; ++sx) {
          const double x = (static_cast<double>(px) + (sx + 0.5) / supersample) / n * 2.0 - 1.0;
          const double y = 1.0 - (static_cast<double>(py) + (sy + 0.5) / supersample) / n * 2.0;
          // Inverse pose: translate, rotate by -theta, unscale.
          const double tx = x - pose.dx, ty = y - pose.dy;
          const double u = (c * tx + s * ty) * inv_scale;
          const double v = (-s * tx + c * ty) * inv_scale;
          if (glyph_contains(glyph, u, v)) acc += weight;
        }
      cov[py * size + px] = acc;
    }
  return cov;
}

void hsv_to_rgb(double h, double s, double v, double& r, double& g, double& b) {
  h = h - std::floor(h);
  const double hh = h * 6.0;
  const int sector = static_cast<int>(hh) % 6;
  const double f = hh - std::floor(hh);
  const double p = v * (1 - s), q = v * (1 - s * f), t = v * (1 - s * (1 - f));
  switch (sector) {
    case 0: r = v, g = t, b = p; break;
    case 1: r = q, g = v, b = p; break;
    case 2: r = p, g = v, b = t; break;
    case 3: r = p, g = q, b = v; break;
    case 4: r = t, g = p, b = v; break;
    default: r = v, g = p, b = q; break;
  }
}

void compose_style(Style style, std::size_t class_id, std::span<const double> coverage, std::size_t size,
                   Rng& rng, std::span<double> image) {
  const std::size_t plane = size * size;
  if (coverage.size() != plane || image.size() != kImageChannels * plane) {
    throw DimensionError("compose_style buffer sizes do not match image size");
  }
  switch (style) {
    case Style::Plain:
      for (std::size_t i = 0; i < plane; ++i) set_rgb(image, plane, i, coverage[i], coverage[i], coverage[i]);
      return;
    case Style::ClassShade: {
      const double bg = class_shade(class_id);
      for (std::size_t i = 0; i < plane; ++i) {
        const double v = bg * (1.0 - coverage[i]) + coverage[i];
        set_rgb(image, plane, i, v, v, v);
      }
      return;
    }
    case Style::ClassTexture: {
      const std::size_t period = class_texture_period(class_id);
      for (std::size_t y = 0; y < size; ++y)
        for (std::size_t x = 0; x < size; ++x) {
          const std::size_t i = y * size + x;
          const double bg = 2 * ((x + y) % period) < period ? 0.6 : 0.0;
          const double v = bg * (1.0 - coverage[i]) + coverage[i];
          set_rgb(image, plane, i, v, v, v);
        }
      return;
    }
    case Style::SketchOutline: {
      const auto mask = binarize(coverage);
      const auto depth = inside_depth(mask, size, 1);
      for (std::size_t i = 0; i < plane; ++i) {
        const double v = (mask[i] && depth[i] == 1) ? 0.0 : 1.0;
        set_rgb(image, plane, i, v, v, v);
      }
      return;
    }
    case Style::CartoonFlat: {
      const auto mask = binarize(coverage);
      const auto depth = inside_depth(mask, size, 2);
      double r, g, b;
      hsv_to_rgb(rng.uniform(), 1.0, 1.0, r, g, b);
      for (std::size_t i = 0; i < plane; ++i) {
        if (!mask[i]) {
          set_rgb(image, plane, i, 1.0, 1.0, 1.0);
        } else if (depth[i] <= 2) {
          set_rgb(image, plane, i, 0.0, 0.0, 0.0);
        } else {
          set_rgb(image, plane, i, r, g, b);
        }
      }
      return;
    }
    case Style::PaintJitter: {
      double r0, g0, b0, r1, g1, b1;
      hsv_to_rgb(rng.uniform(), rng.uniform(0.3, 0.7), rng.uniform(0.4, 0.9), r0, g0, b0);
      hsv_to_rgb(rng.uniform(), rng.uniform(0.3, 0.7), rng.uniform(0.4, 0.9), r1, g1, b1);
      const double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
      const double gx = std::cos(angle), gy = std::sin(angle);
      const double hue = rng.uniform();
      const double n = static_cast<double>(size);
      for (std::size_t y = 0; y < size; ++y)
        for (std::size_t x = 0; x < size; ++x) {
          const std::size_t i = y * size + x;
          const double u = ((x + 0.5) / n * 2.0 - 1.0), v = ((y + 0.5) / n * 2.0 - 1.0);
          const double t = std::clamp(0.5 + 0.5 * (gx * u + gy * v) / std::numbers::sqrt2, 0.0, 1.0);
          const double br = r0 + t * (r1 - r0), bgc = g0 + t * (g1 - g0), bb = b0 + t * (b1 - b0);
          double fr, fg, fb;
          hsv_to_rgb(hue + 0.1 * rng.normal(), 0.85, 0.95, fr, fg, fb);
          const double a = coverage[i];
          set_rgb(image, plane, i, br * (1 - a) + fr * a, bgc * (1 - a) + fg * a, bb * (1 - a) + fb * a);
        }
      return;
    }
  }
}

}  // namespace dg::render
