#include "chmy/fem.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "chmy/clip.hpp"
#include "chmy/kernels.hpp"

namespace chmy {

P1Function::P1Function(MeshPtr m, std::vector<double> v) : mesh(std::move(m)), values(std::move(v)) {
  if (!mesh) throw std::invalid_argument("P1Function without mesh");
  if (values.size() != mesh->num_vertices()) {
    throw std::invalid_argument("P1Function: coefficient count differs from vertex count");
  }
  for (double x : values) {
    if (!std::isfinite(x)) throw std::invalid_argument("P1Function: non-finite coefficient");
  }
}

P1Function::P1Function(MeshPtr m, double constant)
    : P1Function(m, std::vector<double>(m ? m->num_vertices() : 0, constant)) {}

std::array<double, 3> P1Function::cell_values(int c) const {
  const auto& v = mesh->cell(c).v;
  return {values[static_cast<std::size_t>(v[0])], values[static_cast<std::size_t>(v[1])],
          values[static_cast<std::size_t>(v[2])]};
}

P1Function interpolate(MeshPtr mesh, const std::function<double(Point)>& f) {
  std::vector<double> v;
  v.reserve(mesh->num_vertices());
  for (const Point& p : mesh->vertices()) v.push_back(f(p));
  return P1Function(std::move(mesh), std::move(v));
}

P1Pattern::P1Pattern(const Mesh& mesh) {
  const std::size_t n = mesh.num_vertices();
  std::vector<int> ptr{0};
  std::vector<int> col;
  col.reserve(n + 2 * mesh.num_edges());
  for (std::size_t i = 0; i < n; ++i) {
    const auto& nb = mesh.vertex_neighbors(static_cast<int>(i));
    const auto pos = std::lower_bound(nb.begin(), nb.end(), static_cast<int>(i));
    col.insert(col.end(), nb.begin(), pos);
    col.push_back(static_cast<int>(i));
    col.insert(col.end(), pos, nb.end());
    ptr.push_back(static_cast<int>(col.size()));
  }
  std::vector<double> val(col.size(), 0.0);
  zero_ = SparseMatrix(n, n, std::move(ptr), std::move(col), std::move(val));

  scatter_.resize(mesh.num_cells());
  for (std::size_t c = 0; c < mesh.num_cells(); ++c) {
    const auto& v = mesh.cell(static_cast<int>(c)).v;
    for (std::size_t i = 0; i < 3; ++i) {
      for (std::size_t j = 0; j < 3; ++j) {
        scatter_[c][3 * i + j] = static_cast<int>(
            zero_.find(static_cast<std::size_t>(v[i]), static_cast<std::size_t>(v[j])));
      }
    }
  }
}

namespace {

template <class Local>
SparseMatrix assemble(const Mesh& mesh, const P1Pattern& pattern, Local&& local) {
  SparseMatrix a = pattern.zero();
  auto& val = a.values();
  for (std::size_t c = 0; c < mesh.num_cells(); ++c) {
    const int ci = static_cast<int>(c);
    const std::array<double, 9> e = local(ci);
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        val[static_cast<std::size_t>(pattern.slot(ci, i, j))] += e[static_cast<std::size_t>(3 * i + j)];
      }
    }
  }
  return a;
}

std::array<double, 9> local_mass(const Mesh& mesh, int c) {
  const double a = mesh.geometry(c).area / 12.0;
  return {2 * a, a, a, a, 2 * a, a, a, a, 2 * a};
}

std::array<double, 9> local_stiffness(const Mesh& mesh, int c) {
  const CellGeometry g = mesh.geometry(c);
  std::array<double, 9> e{};
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 3; ++j) e[3 * i + j] = g.area * dot(g.grad[i], g.grad[j]);
  }
  return e;
}

SparseMatrix mass_on(const Mesh& mesh, const P1Pattern& p) {
  return assemble(mesh, p, [&](int c) { return local_mass(mesh, c); });
}

SparseMatrix stiffness_on(const Mesh& mesh, const P1Pattern& p) {
  return assemble(mesh, p, [&](int c) { return local_stiffness(mesh, c); });
}

}  // namespace

SparseMatrix assemble_mass(const Mesh& mesh) { return mass_on(mesh, P1Pattern(mesh)); }

SparseMatrix assemble_stiffness(const Mesh& mesh) { return stiffness_on(mesh, P1Pattern(mesh)); }

LumpedMass assemble_lumped_mass(const Mesh& mesh) {
  LumpedMass l;
  l.d.assign(mesh.num_vertices(), 0.0);
  for (std::size_t c = 0; c < mesh.num_cells(); ++c) {
    const double third = mesh.geometry(static_cast<int>(c)).area / 3.0;
    for (int v : mesh.cell(static_cast<int>(c)).v) l.d[static_cast<std::size_t>(v)] += third;
  }
  return l;
}

FemOperators::FemOperators(MeshPtr m)
    : mesh(std::move(m)),
      pattern(*mesh),
      mass(mass_on(*mesh, pattern)),
      stiffness(stiffness_on(*mesh, pattern)),
      lumped(assemble_lumped_mass(*mesh)) {}

double l1_norm(const P1Function& f) {
  const Mesh& mesh = *f.mesh;
  double sum = 0.0;
  for (std::size_t c = 0; c < mesh.num_cells(); ++c) {
    const int ci = static_cast<int>(c);
    const auto v = f.cell_values(ci);
    const ClipResult parts = clip_triangle(v, 0.0);
    // Integral of an affine function over a triangle = area * mean of corners.
    double rel = 0.0;
    for (const ClipRegion* region : {&parts.above, &parts.below}) {
      for (std::size_t t = 0; t < region->count; ++t) {
        const SubTriangle& tri = region->tri[t];
        const double mean = (interpolate(v, tri.corner[0]) + interpolate(v, tri.corner[1]) +
                             interpolate(v, tri.corner[2])) / 3.0;
        rel += tri.area_fraction() * std::abs(mean);
      }
    }
    sum += mesh.geometry(ci).area * rel;
  }
  return sum;
}

double linf_norm(const P1Function& f) { return kernels::max_abs(f.values); }

double quadratic_form(const SparseMatrix& a, std::span<const double> v, std::span<const double> w) {
  const std::vector<double> aw = a.multiply(w);
  double sum = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) sum += v[i] * aw[i];
  return sum;
}

double h1_norm(const FemOperators& ops, std::span<const double> f) {
  return std::sqrt(quadratic_form(ops.mass, f, f) + quadratic_form(ops.stiffness, f, f));
}

}  // namespace chmy
