#include <algorithm>
#include <cmath>

#include "chmy/chstep.hpp"
#include "chmy/clip.hpp"
#include "chmy/kernels.hpp"

namespace chmy {

namespace {

DiskMoments triangle_piece(Point u, Point v) {
  const double area = 0.5 * cross(u, v);
  return {area, (area / 3.0) * (u + v)};
}

DiskMoments sector_piece(Point u, Point v, double radius) {
  const double nu = std::hypot(u.x, u.y);
  const double nv = std::hypot(v.x, v.y);
  if (nu == 0.0 || nv == 0.0) return {};
  const double theta = std::atan2(cross(u, v), dot(u, v));
  const Point eu = (1.0 / nu) * u;
  const Point ev = (1.0 / nv) * v;
  const double r3 = radius * radius * radius / 3.0;
  return {0.5 * radius * radius * theta, {r3 * (ev.y - eu.y), r3 * (eu.x - ev.x)}};
}

void accumulate(DiskMoments& acc, const DiskMoments& piece) {
  acc.area += piece.area;
  acc.moment = acc.moment + piece.moment;
}

// Signed moments of triangle(0, p, q) intersected with the disk |x| <= radius.
DiskMoments wedge(Point p, Point q, double radius) {
  const Point d = q - p;
  const double a = dot(d, d);
  DiskMoments out;
  if (a == 0.0) return out;
  const double b = 2.0 * dot(p, d);
  const double c = dot(p, p) - radius * radius;
  const double disc = b * b - 4.0 * a * c;
  if (disc <= 0.0) return sector_piece(p, q, radius);
  const double root = std::sqrt(disc);
  const double t1 = std::clamp((-b - root) / (2.0 * a), 0.0, 1.0);
  const double t2 = std::clamp((-b + root) / (2.0 * a), 0.0, 1.0);
  const Point p1 = p + t1 * d;
  const Point p2 = p + t2 * d;
  if (t1 > 0.0) accumulate(out, sector_piece(p, p1, radius));
  if (t2 > t1) accumulate(out, triangle_piece(p1, p2));
  if (t2 < 1.0) accumulate(out, sector_piece(p2, q, radius));
  return out;
}

// Integral of the affine function with corner values g over the triangle
// (a, b, c) intersected with the disk.
double affine_in_disk(const std::array<Point, 3>& x, const std::array<double, 3>& g, Point center,
                      double radius) {
  const double r2 = radius * radius;
  auto inside = [&](Point p) {
    const Point d = p - center;
    return dot(d, d) <= r2;
  };
  const double twice_area = cross(x[1] - x[0], x[2] - x[0]);
  if (twice_area == 0.0) return 0.0;
  if (inside(x[0]) && inside(x[1]) && inside(x[2])) {
    return 0.5 * std::abs(twice_area) * (g[0] + g[1] + g[2]) / 3.0;
  }
  const DiskMoments m = disk_triangle_moments(x[0], x[1], x[2], center, radius);
  if (m.area == 0.0) return 0.0;
  // g(y) = g0 + grad . (y - x0)
  const Point e1 = x[1] - x[0];
  const Point e2 = x[2] - x[0];
  const double d1 = g[1] - g[0];
  const double d2 = g[2] - g[0];
  const Point grad{(d1 * e2.y - d2 * e1.y) / twice_area, (d2 * e1.x - d1 * e2.x) / twice_area};
  const Point offset = x[0] - center;
  return g[0] * m.area + dot(grad, m.moment - m.area * offset);
}

Point to_physical(const std::array<Point, 3>& x, const std::array<double, 3>& b) {
  return {b[0] * x[0].x + b[1] * x[1].x + b[2] * x[2].x, b[0] * x[0].y + b[1] * x[1].y + b[2] * x[2].y};
}

}  // namespace

DiskMoments disk_triangle_moments(Point a, Point b, Point c, Point center, double radius) {
  const Point pa = a - center, pb = b - center, pc = c - center;
  DiskMoments m;
  accumulate(m, wedge(pa, pb, radius));
  accumulate(m, wedge(pb, pc, radius));
  accumulate(m, wedge(pc, pa, radius));
  if (cross(pb - pa, pc - pa) < 0.0) {
    m.area = -m.area;
    m.moment = -1.0 * m.moment;
  }
  return m;
}

std::vector<BallSample> default_ball_samples() {
  std::vector<BallSample> out;
  for (double r : {0.05, 0.1, 0.2}) {
    for (int j = 1; j <= 5; ++j) {
      for (int i = 1; i <= 5; ++i) out.push_back({{i / 6.0, j / 6.0}, r});
    }
  }
  return out;
}

double violation_l1(const P1Function& phi) {
  const Mesh& mesh = *phi.mesh;
  double sum = 0.0;
  for (std::size_t c = 0; c < mesh.num_cells(); ++c) {
    const int ci = static_cast<int>(c);
    const auto v = phi.cell_values(ci);
    if (std::abs(v[0]) <= 1.0 && std::abs(v[1]) <= 1.0 && std::abs(v[2]) <= 1.0) continue;
    const ClipRegion upper = clip_triangle(v, 1.0).above;
    const ClipRegion lower = clip_triangle(v, -1.0).below;
    double rel = 0.0;
    for (std::size_t t = 0; t < upper.count; ++t) {
      const auto& tri = upper.tri[t];
      double mean = 0.0;
      for (const auto& b : tri.corner) mean += interpolate(v, b) - 1.0;
      rel += tri.area_fraction() * mean / 3.0;
    }
    for (std::size_t t = 0; t < lower.count; ++t) {
      const auto& tri = lower.tri[t];
      double mean = 0.0;
      for (const auto& b : tri.corner) mean -= interpolate(v, b) + 1.0;
      rel += tri.area_fraction() * mean / 3.0;
    }
    sum += mesh.geometry(ci).area * rel;
  }
  return sum;
}

double violation_in_ball(const P1Function& phi, Point center, double radius) {
  const Mesh& mesh = *phi.mesh;
  double sum = 0.0;
  for (std::size_t c = 0; c < mesh.num_cells(); ++c) {
    const int ci = static_cast<int>(c);
    const auto v = phi.cell_values(ci);
    if (std::abs(v[0]) <= 1.0 && std::abs(v[1]) <= 1.0 && std::abs(v[2]) <= 1.0) continue;
    const auto& vid = mesh.cell(ci).v;
    const std::array<Point, 3> x{mesh.vertex(vid[0]), mesh.vertex(vid[1]), mesh.vertex(vid[2])};
    const double xmin = std::min({x[0].x, x[1].x, x[2].x}), xmax = std::max({x[0].x, x[1].x, x[2].x});
    const double ymin = std::min({x[0].y, x[1].y, x[2].y}), ymax = std::max({x[0].y, x[1].y, x[2].y});
    if (xmin > center.x + radius || xmax < center.x - radius || ymin > center.y + radius ||
        ymax < center.y - radius) {
      continue;
    }
    const ClipRegion upper = clip_triangle(v, 1.0).above;
    const ClipRegion lower = clip_triangle(v, -1.0).below;
    for (std::size_t t = 0; t < upper.count; ++t) {
      const auto& tri = upper.tri[t];
      std::array<Point, 3> px;
      std::array<double, 3> g;
      for (std::size_t i = 0; i < 3; ++i) {
        px[i] = to_physical(x, tri.corner[i]);
        g[i] = interpolate(v, tri.corner[i]) - 1.0;
      }
      sum += affine_in_disk(px, g, center, radius);
    }
    for (std::size_t t = 0; t < lower.count; ++t) {
      const auto& tri = lower.tri[t];
      std::array<Point, 3> px;
      std::array<double, 3> g;
      for (std::size_t i = 0; i < 3; ++i) {
        px[i] = to_physical(x, tri.corner[i]);
        g[i] = -(interpolate(v, tri.corner[i]) + 1.0);
      }
      sum += affine_in_disk(px, g, center, radius);
    }
  }
  return sum;
}

ViolationReport violation_report(const StepProblem& p, const FemOperators& ops,
                                 const StepSolution& sol, std::span<const BallSample> samples) {
  ViolationReport r;
  r.linf = kernels::max_violation(sol.phi.values);
  r.l1 = violation_l1(sol.phi);
  const auto& d = ops.lumped.d;
  double mass = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) mass += d[i] * (sol.phi.values[i] - p.phi_prev.values[i]);
  r.mass_error = std::abs(mass);
  if (r.linf > 0.0) {
    for (const BallSample& b : samples) {
      const double integral = violation_in_ball(sol.phi, b.center, b.radius);
      r.structural_K = std::max(r.structural_K, p.s * integral / (b.radius * b.radius));
    }
  }
  return r;
}

}  // namespace chmy
