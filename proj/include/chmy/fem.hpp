#pragma once

#include <array>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "chmy/mesh.hpp"
#include "chmy/sparse.hpp"

namespace chmy {

using MeshPtr = std::shared_ptr<const Mesh>;

/// Continuous piecewise-linear function given by its nodal values.
struct P1Function {
  MeshPtr mesh;
  std::vector<double> values;

  P1Function() = default;
  P1Function(MeshPtr m, std::vector<double> v);
  P1Function(MeshPtr m, double constant);

  std::size_t size() const { return values.size(); }
  /// Nodal values of the cell's three vertices.
  std::array<double, 3> cell_values(int c) const;
};

P1Function interpolate(MeshPtr mesh, const std::function<double(Point)>& f);

/// Diagonal of the lumped mass matrix: d_i = integral of the i-th hat function.
struct LumpedMass {
  std::vector<double> d;
};

/// P1 sparsity pattern of a mesh plus, per cell, the positions of the 3x3
/// element matrix entries in the CSR value array.
class P1Pattern {
 public:
  explicit P1Pattern(const Mesh& mesh);

  /// Zero-valued matrix with the full vertex-adjacency pattern.
  const SparseMatrix& zero() const { return zero_; }
  /// Index into values() of local entry (i, j) of cell c.
  int slot(int c, int i, int j) const {
    return scatter_[static_cast<std::size_t>(c)][static_cast<std::size_t>(3 * i + j)];
  }

 private:
  SparseMatrix zero_;
  std::vector<std::array<int, 9>> scatter_;
};

SparseMatrix assemble_mass(const Mesh& mesh);
SparseMatrix assemble_stiffness(const Mesh& mesh);
LumpedMass assemble_lumped_mass(const Mesh& mesh);

/// Assembled operators of one mesh, shared by everything solved on it.
struct FemOperators {
  MeshPtr mesh;
  P1Pattern pattern;
  SparseMatrix mass;
  SparseMatrix stiffness;
  LumpedMass lumped;

  explicit FemOperators(MeshPtr m);
};

/// Exact integral of |f| (the triangle is split along f = 0).
double l1_norm(const P1Function& f);
/// max_i |f_i|, which is the exact sup norm of a P1 function.
double linf_norm(const P1Function& f);
/// sqrt(f^T M f + f^T K f).
double h1_norm(const FemOperators& ops, std::span<const double> f);
/// v^T A w
double quadratic_form(const SparseMatrix& a, std::span<const double> v, std::span<const double> w);

}  // namespace chmy
