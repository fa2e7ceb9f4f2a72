#pragma once

// Independent reference computations for the tests: recursive triangle
// subdivision quadrature and dense re-assembly of the P1 operators.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <random>
#include <vector>

#include "chmy/mesh.hpp"

namespace oracle {

using Bary = std::array<double, 3>;
template <std::size_t N>
using Values = std::array<double, N>;

inline Bary mid(const Bary& a, const Bary& b) {
  return {0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1]), 0.5 * (a[2] + b[2])};
}

/// Recursive midpoint subdivision of the parent triangle in barycentric
/// coordinates. `smooth(a, b, c)` says the integrand is a polynomial of degree
/// <= 2 on the sub-triangle; there a degree-2 interior rule is exact. Other
/// sub-triangles are split until `depth` levels, then the centroid rule is
/// used. Returns (1/|parent|) * integral.
template <std::size_t N>
class Subdivision {
 public:
  using Integrand = std::function<Values<N>(const Bary&)>;
  using Smooth = std::function<bool(const Bary&, const Bary&, const Bary&)>;

  Subdivision(Integrand f, Smooth smooth) : f_(std::move(f)), smooth_(std::move(smooth)) {}

  Values<N> at_depth(int depth) const {
    Values<N> sum{};
    recurse({1, 0, 0}, {0, 1, 0}, {0, 0, 1}, 1.0, depth, sum);
    return sum;
  }

  /// Richardson extrapolation of the two deepest levels. The kink error of
  /// straddling leaves shrinks by 4 per level. A fixed depth is used because
  /// slivers near a vertex stay invisible to shallow levels, which fools any
  /// stopping rule; beyond depth 17 summation rounding of the tiny leaf
  /// contributions dominates.
  Values<N> converged(int depth = 17) const {
    const Values<N> fine = at_depth(depth);
    const Values<N> coarse = at_depth(depth - 1);
    Values<N> out{};
    for (std::size_t i = 0; i < N; ++i) out[i] = fine[i] + (fine[i] - coarse[i]) / 3.0;
    return out;
  }

 private:
  void recurse(const Bary& a, const Bary& b, const Bary& c, double frac, int depth,
               Values<N>& sum) const {
    if (smooth_(a, b, c)) {
      // Strang-Fix three-point rule, exact for quadratics.
      static constexpr double w1 = 2.0 / 3.0, w2 = 1.0 / 6.0;
      const std::array<Bary, 3> pts{
          Bary{w1 * a[0] + w2 * b[0] + w2 * c[0], w1 * a[1] + w2 * b[1] + w2 * c[1],
               w1 * a[2] + w2 * b[2] + w2 * c[2]},
          Bary{w2 * a[0] + w1 * b[0] + w2 * c[0], w2 * a[1] + w1 * b[1] + w2 * c[1],
               w2 * a[2] + w1 * b[2] + w2 * c[2]},
          Bary{w2 * a[0] + w2 * b[0] + w1 * c[0], w2 * a[1] + w2 * b[1] + w1 * c[1],
               w2 * a[2] + w2 * b[2] + w1 * c[2]}};
      for (const Bary& p : pts) {
        const Values<N> v = f_(p);
        for (std::size_t i = 0; i < N; ++i) sum[i] += frac / 3.0 * v[i];
      }
      return;
    }
    if (depth == 0) {
      const Bary g{(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0,
                   (a[2] + b[2] + c[2]) / 3.0};
      const Values<N> v = f_(g);
      for (std::size_t i = 0; i < N; ++i) sum[i] += frac * v[i];
      return;
    }
    const Bary ab = mid(a, b), bc = mid(b, c), ca = mid(c, a);
    const double q = 0.25 * frac;
    recurse(a, ab, ca, q, depth - 1, sum);
    recurse(ab, b, bc, q, depth - 1, sum);
    recurse(ca, bc, c, q, depth - 1, sum);
    recurse(ab, bc, ca, q, depth - 1, sum);
  }

  Integrand f_;
  Smooth smooth_;
};

inline double lam(double v) { return std::max(0.0, v - 1.0) + std::min(0.0, v + 1.0); }

inline int band(double v) { return v > 1.0 ? 1 : (v < -1.0 ? -1 : 0); }

/// (1/|T|) * integral of lambda(phi_h) * beta_i over a triangle with nodal
/// values v, by subdivision.
inline Values<3> exact_penalty_cell(const std::array<double, 3>& v) {
  auto at = [v](const Bary& b) { return v[0] * b[0] + v[1] * b[1] + v[2] * b[2]; };
  Subdivision<3> q(
      [at](const Bary& b) {
        const double l = lam(at(b));
        return Values<3>{l * b[0], l * b[1], l * b[2]};
      },
      [at](const Bary& a, const Bary& b, const Bary& c) {
        // lambda is affine on each band; touching a kink counts as smooth only
        // when all corners share a closed band.
        const double va = at(a), vb = at(b), vc = at(c);
        const double lo = std::min({va, vb, vc}), hi = std::max({va, vb, vc});
        return hi <= -1.0 || lo >= 1.0 || (lo >= -1.0 && hi <= 1.0);
      });
  return q.converged();
}

using Dense = std::vector<std::vector<double>>;

inline Dense zeros(std::size_t n) { return Dense(n, std::vector<double>(n, 0.0)); }

struct ElementGeometry {
  double area;
  std::array<std::array<double, 2>, 3> grad;
};

/// Barycentric gradients from the inverse of the 2x2 edge matrix.
inline ElementGeometry element(const chmy::Point& p0, const chmy::Point& p1, const chmy::Point& p2) {
  const double a = p1.x - p0.x, b = p2.x - p0.x, c = p1.y - p0.y, d = p2.y - p0.y;
  const double det = a * d - b * c;
  // rows of inverse(J), J = [[a, b], [c, d]] maps reference to physical
  const double i00 = d / det, i01 = -b / det, i10 = -c / det, i11 = a / det;
  ElementGeometry g;
  g.area = 0.5 * std::abs(det);
  g.grad[1] = {i00, i01};
  g.grad[2] = {i10, i11};
  g.grad[0] = {-i00 - i10, -i01 - i11};
  return g;
}

/// Dense mass matrix from the quadratic-exact edge-midpoint rule.
inline Dense dense_mass(const chmy::Mesh& m) {
  Dense M = zeros(m.num_vertices());
  for (const auto& cell : m.cells()) {
    const auto g = element(m.vertex(cell.v[0]), m.vertex(cell.v[1]), m.vertex(cell.v[2]));
    const std::array<Bary, 3> pts{Bary{0.5, 0.5, 0}, Bary{0, 0.5, 0.5}, Bary{0.5, 0, 0.5}};
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        double s = 0.0;
        for (const Bary& p : pts) s += p[static_cast<std::size_t>(i)] * p[static_cast<std::size_t>(j)];
        M[static_cast<std::size_t>(cell.v[static_cast<std::size_t>(i)])]
         [static_cast<std::size_t>(cell.v[static_cast<std::size_t>(j)])] += g.area * s / 3.0;
      }
    }
  }
  return M;
}

inline Dense dense_stiffness(const chmy::Mesh& m) {
  Dense K = zeros(m.num_vertices());
  for (const auto& cell : m.cells()) {
    const auto g = element(m.vertex(cell.v[0]), m.vertex(cell.v[1]), m.vertex(cell.v[2]));
    for (std::size_t i = 0; i < 3; ++i) {
      for (std::size_t j = 0; j < 3; ++j) {
        K[static_cast<std::size_t>(cell.v[i])][static_cast<std::size_t>(cell.v[j])] +=
            g.area * (g.grad[i][0] * g.grad[j][0] + g.grad[i][1] * g.grad[j][1]);
      }
    }
  }
  return K;
}

inline std::vector<double> dense_lumped(const chmy::Mesh& m) {
  std::vector<double> d(m.num_vertices(), 0.0);
  for (const auto& cell : m.cells()) {
    const auto g = element(m.vertex(cell.v[0]), m.vertex(cell.v[1]), m.vertex(cell.v[2]));
    for (int v : cell.v) d[static_cast<std::size_t>(v)] += g.area / 3.0;
  }
  return d;
}

inline std::vector<double> matvec(const Dense& a, const std::vector<double>& x) {
  std::vector<double> y(a.size(), 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < x.size(); ++j) y[i] += a[i][j] * x[j];
  }
  return y;
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

inline double max_abs(const std::vector<double>& a) {
  double d = 0.0;
  for (double v : a) d = std::max(d, std::abs(v));
  return d;
}

inline std::vector<double> random_vector(std::size_t n, double lo, double hi, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (double& x : v) x = u(rng);
  return v;
}

}  // namespace oracle
