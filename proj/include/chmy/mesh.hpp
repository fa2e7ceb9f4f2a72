#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace chmy {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

inline Point operator+(Point a, Point b) { return {a.x + b.x, a.y + b.y}; }
inline Point operator-(Point a, Point b) { return {a.x - b.x, a.y - b.y}; }
inline Point operator*(double s, Point a) { return {s * a.x, s * a.y}; }
inline double dot(Point a, Point b) { return a.x * b.x + a.y * b.y; }
inline double cross(Point a, Point b) { return a.x * b.y - a.y * b.x; }

class MeshError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A triangle stores its vertices so that (v[0], v[1]) is the refinement edge
/// and v[2] is the newest vertex. Orientation is counter-clockwise.
struct Cell {
  std::array<int, 3> v{};
  int generation = 0;
};

/// Undirected edge with a < b. `cells[1] == -1` on the boundary.
struct Edge {
  int a = 0;
  int b = 0;
  std::array<int, 2> cells{-1, -1};

  bool boundary() const { return cells[1] < 0; }
};

/// Per-cell geometric data of a P1 triangle. Local edge i is opposite local
/// vertex i.
struct CellGeometry {
  double area = 0.0;
  std::array<Point, 3> grad{};     // gradients of barycentric coordinates
  std::array<Point, 3> normal{};   // outward unit normals of local edges
  std::array<double, 3> length{};  // local edge lengths
};

/// Conforming triangulation of the unit square. Immutable once built; refine()
/// returns a new mesh.
class Mesh {
 public:
  Mesh() = default;
  Mesh(std::vector<Point> vertices, std::vector<Cell> cells);

  std::size_t num_vertices() const { return vertices_.size(); }
  std::size_t num_cells() const { return cells_.size(); }
  std::size_t num_edges() const { return edges_.size(); }

  const std::vector<Point>& vertices() const { return vertices_; }
  const std::vector<Cell>& cells() const { return cells_; }
  const std::vector<Edge>& edges() const { return edges_; }

  const Point& vertex(int i) const { return vertices_[static_cast<std::size_t>(i)]; }
  const Cell& cell(int c) const { return cells_[static_cast<std::size_t>(c)]; }

  /// Global edge index of local edge i (opposite local vertex i) of cell c.
  int cell_edge(int c, int i) const {
    return cell_edges_[static_cast<std::size_t>(c)][static_cast<std::size_t>(i)];
  }

  /// Vertices sharing an edge with vertex i, sorted ascending.
  const std::vector<int>& vertex_neighbors(int i) const {
    return vertex_neighbors_[static_cast<std::size_t>(i)];
  }

  CellGeometry geometry(int c) const;
  double signed_area(int c) const;
  double total_area() const;
  double min_angle() const;  // radians

 private:
  void build_topology();

  std::vector<Point> vertices_;
  std::vector<Cell> cells_;
  std::vector<Edge> edges_;
  std::vector<std::array<int, 3>> cell_edges_;
  std::vector<std::vector<int>> vertex_neighbors_;
};

/// Cell indices flagged for refinement (validated, sorted, duplicate free).
class MarkedSet {
 public:
  MarkedSet() = default;
  MarkedSet(std::vector<int> cells, std::size_t num_cells);

  const std::vector<int>& cells() const { return cells_; }
  std::size_t size() const { return cells_.size(); }
  bool empty() const { return cells_.empty(); }

 private:
  std::vector<int> cells_;
};

/// New vertex index -> the pair of vertices whose edge it bisects. Vertices
/// that existed before refinement keep their index and have no entry.
struct Prolongation {
  std::size_t old_vertex_count = 0;
  std::vector<std::pair<int, int>> parents;  // indexed by (v - old_vertex_count)

  /// Linear interpolation of nodal values from the coarse to the fine mesh.
  std::vector<double> apply(const std::vector<double>& coarse) const;
};

struct RefineOptions {
  /// Cap on closure sweeps; exceeding it signals a malformed refinement-edge
  /// assignment.
  int max_closure_sweeps = 10000;
};

struct RefineResult {
  Mesh mesh;
  Prolongation prolongation;
};

/// Structured (n0+1)^2-vertex, 2 n0^2-triangle mesh of [0,1]^2. Diagonals
/// alternate in a union-jack pattern so that for even n0 the mesh is invariant
/// under the symmetries of the square. Refinement edge = hypotenuse.
Mesh unit_square_mesh(int n0);

/// Newest-vertex bisection of the marked cells plus conformity closure.
RefineResult refine(const Mesh& mesh, const MarkedSet& marked,
                    const RefineOptions& options = {});

/// Bisects every cell once.
RefineResult refine_uniform(const Mesh& mesh);

/// Edge-incidence audit: returns an empty string when every interior edge has
/// two incident cells, every boundary edge one, and boundary edges lie on the
/// boundary of the unit square. Otherwise a description of the first defect.
std::string audit_conformity(const Mesh& mesh);

/// Plain-text dump: `vertices N cells M`, N lines `x y`, M lines `i j k`.
void write_mesh(std::ostream& os, const Mesh& mesh);

}  // namespace chmy
