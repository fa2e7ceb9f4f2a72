#pragma once

#include <array>
#include <cstddef>

namespace chmy {

/// Barycentric coordinates (relative to a parent triangle) of a sub-triangle's
/// three corners.
struct SubTriangle {
  std::array<std::array<double, 3>, 3> corner{};

  /// |sub-triangle| / |parent|.
  double area_fraction() const;
  /// Parent barycentric coordinates of the midpoint of the sub-edge opposite
  /// corner i.
  std::array<double, 3> edge_midpoint(std::size_t i) const;
};

/// Up to two sub-triangles (a triangle or a quadrilateral split in two).
struct ClipRegion {
  std::array<SubTriangle, 2> tri{};
  std::size_t count = 0;

  double area_fraction() const;
};

struct ClipResult {
  ClipRegion above;  // affine interpolant >= level
  ClipRegion below;  // affine interpolant < level
};

/// Splits a triangle along the level line of the affine interpolant of the
/// nodal values. Vertices with value exactly equal to `level` count as above.
ClipResult clip_triangle(const std::array<double, 3>& values, double level);

/// Exact integral over a sub-triangle of a function that is quadratic in the
/// parent barycentric coordinates, relative to the parent area:
/// (1/|parent|) * integral. Three-point edge-midpoint rule.
template <class F>
double integrate_quadratic(const SubTriangle& t, F&& f) {
  const double w = t.area_fraction() / 3.0;
  return w * (f(t.edge_midpoint(0)) + f(t.edge_midpoint(1)) + f(t.edge_midpoint(2)));
}

template <class F>
double integrate_quadratic(const ClipRegion& r, F&& f) {
  double sum = 0.0;
  for (std::size_t i = 0; i < r.count; ++i) sum += integrate_quadratic(r.tri[i], f);
  return sum;
}

inline double interpolate(const std::array<double, 3>& values, const std::array<double, 3>& bary) {
  return values[0] * bary[0] + values[1] * bary[1] + values[2] * bary[2];
}

}  // namespace chmy
