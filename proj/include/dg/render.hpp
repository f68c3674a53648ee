#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "dg/dataset.hpp"
#include "dg/rng.hpp"

namespace dg::render {

/// Glyph ids 0..9: disk, ring, cross, bar, triangle, square, L, T, diamond, dot-pair.
std::string_view glyph_name(std::size_t glyph);

/// Point-in-glyph test in the glyph's own frame, coordinates in [-1, 1]
/// with +v pointing up.
bool glyph_contains(std::size_t glyph, double u, double v);

/// Placement of a glyph in the image frame. Offsets are in normalized units
/// (the image spans [-1, 1]).
struct GlyphPose {
  double dx = 0.0;
  double dy = 0.0;
  double scale = 1.0;
  double rotation_deg = 0.0;
};

/// Per-sample pose jitter: position +-10% of the image extent, scale +-15%,
/// rotation +-10 degrees, added on top of `base_rotation_deg`.
GlyphPose jittered_pose(Rng& rng, double base_rotation_deg = 0.0);

/// Antialiased glyph coverage in [0, 1], [size x size], from a supersample x
/// supersample grid per pixel.
std::vector<double> glyph_coverage(std::size_t glyph, const GlyphPose& pose, std::size_t size,
                                   std::size_t supersample = 4);

/// Renders the coverage map in a domain style into `image` ([3 x size x size]).
void compose_style(Style style, std::size_t class_id, std::span<const double> coverage, std::size_t size,
                   Rng& rng, std::span<double> image);

/// HSV (all in [0, 1]) to RGB.
void hsv_to_rgb(double h, double s, double v, double& r, double& g, double& b);

}  // namespace dg::render
