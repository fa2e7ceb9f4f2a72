#include "chmy/clip.hpp"

#include <cmath>

namespace chmy {

namespace {

using Bary = std::array<double, 3>;

Bary unit(std::size_t i) {
  Bary b{0.0, 0.0, 0.0};
  b[i] = 1.0;
  return b;
}

// Point on edge (i -> j) where the interpolant crosses `level`.
Bary crossing(const std::array<double, 3>& v, std::size_t i, std::size_t j, double level) {
  const double t = (level - v[i]) / (v[j] - v[i]);
  Bary b{0.0, 0.0, 0.0};
  b[i] = 1.0 - t;
  b[j] = t;
  return b;
}

}  // namespace

double SubTriangle::area_fraction() const {
  const auto& a = corner[0];
  const auto& b = corner[1];
  const auto& c = corner[2];
  const double det = a[0] * (b[1] * c[2] - b[2] * c[1]) - a[1] * (b[0] * c[2] - b[2] * c[0]) +
                     a[2] * (b[0] * c[1] - b[1] * c[0]);
  return std::abs(det);
}

std::array<double, 3> SubTriangle::edge_midpoint(std::size_t i) const {
  const auto& p = corner[(i + 1) % 3];
  const auto& q = corner[(i + 2) % 3];
  return {0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1]), 0.5 * (p[2] + q[2])};
}

double ClipRegion::area_fraction() const {
  double sum = 0.0;
  for (std::size_t i = 0; i < count; ++i) sum += tri[i].area_fraction();
  return sum;
}

ClipResult clip_triangle(const std::array<double, 3>& values, double level) {
  ClipResult r;
  const std::array<bool, 3> up{values[0] >= level, values[1] >= level, values[2] >= level};
  const int n_up = int(up[0]) + int(up[1]) + int(up[2]);
  const SubTriangle whole{{unit(0), unit(1), unit(2)}};
  if (n_up == 3) {
    r.above.tri[0] = whole;
    r.above.count = 1;
    return r;
  }
  if (n_up == 0) {
    r.below.tri[0] = whole;
    r.below.count = 1;
    return r;
  }

  // The vertex alone on its side of the level line.
  std::size_t lone = 0;
  for (std::size_t i = 0; i < 3; ++i) {
    if ((n_up == 1) == up[i]) lone = i;
  }
  const std::size_t j = (lone + 1) % 3;
  const std::size_t k = (lone + 2) % 3;
  const Bary xj = crossing(values, lone, j, level);
  const Bary xk = crossing(values, lone, k, level);

  ClipRegion tip;
  tip.tri[0] = SubTriangle{{unit(lone), xj, xk}};
  tip.count = 1;
  ClipRegion base;
  base.tri[0] = SubTriangle{{xj, unit(j), unit(k)}};
  base.tri[1] = SubTriangle{{xj, unit(k), xk}};
  base.count = 2;

  if (up[lone]) {
    r.above = tip;
    r.below = base;
  } else {
    r.above = base;
    r.below = tip;
  }
  return r;
}

}  // namespace chmy
