#include "chmy/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <ostream>
#include <sstream>
#include <unordered_map>

namespace chmy {

namespace {

std::uint64_t edge_key(int a, int b) {
  if (a > b) std::swap(a, b);
  return (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint32_t>(b);
}

// Both endpoints on the same side of the unit square.
bool on_unit_square_boundary(const Point& p, const Point& q) {
  constexpr double tol = 1e-14;
  auto near = [](double a, double b) { return std::abs(a - b) < tol; };
  return (near(p.x, 0.0) && near(q.x, 0.0)) || (near(p.x, 1.0) && near(q.x, 1.0)) ||
         (near(p.y, 0.0) && near(q.y, 0.0)) || (near(p.y, 1.0) && near(q.y, 1.0));
}

}  // namespace

Mesh::Mesh(std::vector<Point> vertices, std::vector<Cell> cells)
    : vertices_(std::move(vertices)), cells_(std::move(cells)) {
  const int nv = static_cast<int>(vertices_.size());
  for (const Cell& c : cells_) {
    for (int v : c.v) {
      if (v < 0 || v >= nv) throw MeshError("cell references vertex out of range");
    }
  }
  build_topology();
}

void Mesh::build_topology() {
  edges_.clear();
  cell_edges_.assign(cells_.size(), {-1, -1, -1});
  std::unordered_map<std::uint64_t, int> index;
  index.reserve(cells_.size() * 2);

  for (std::size_t c = 0; c < cells_.size(); ++c) {
    const auto& v = cells_[c].v;
    for (int i = 0; i < 3; ++i) {
      const int a = v[static_cast<std::size_t>((i + 1) % 3)];
      const int b = v[static_cast<std::size_t>((i + 2) % 3)];
      auto [it, inserted] = index.try_emplace(edge_key(a, b), static_cast<int>(edges_.size()));
      if (inserted) {
        Edge e;
        e.a = std::min(a, b);
        e.b = std::max(a, b);
        e.cells[0] = static_cast<int>(c);
        edges_.push_back(e);
      } else {
        Edge& e = edges_[static_cast<std::size_t>(it->second)];
        if (e.cells[1] >= 0) {
          throw MeshError("edge shared by more than two cells");
        }
        e.cells[1] = static_cast<int>(c);
      }
      cell_edges_[c][static_cast<std::size_t>(i)] = it->second;
    }
  }

  vertex_neighbors_.assign(vertices_.size(), {});
  for (const Edge& e : edges_) {
    vertex_neighbors_[static_cast<std::size_t>(e.a)].push_back(e.b);
    vertex_neighbors_[static_cast<std::size_t>(e.b)].push_back(e.a);
  }
  for (auto& nb : vertex_neighbors_) std::sort(nb.begin(), nb.end());
}

double Mesh::signed_area(int c) const {
  const auto& v = cell(c).v;
  const Point p0 = vertex(v[0]);
  return 0.5 * cross(vertex(v[1]) - p0, vertex(v[2]) - p0);
}

CellGeometry Mesh::geometry(int c) const {
  const auto& v = cell(c).v;
  const std::array<Point, 3> p{vertex(v[0]), vertex(v[1]), vertex(v[2])};
  CellGeometry g;
  g.area = 0.5 * cross(p[1] - p[0], p[2] - p[0]);
  if (!(g.area > 0.0)) {
    std::ostringstream msg;
    msg << "degenerate or inverted cell " << c << " (signed area " << g.area << ")";
    throw MeshError(msg.str());
  }
  const double inv2a = 1.0 / (2.0 * g.area);
  for (std::size_t i = 0; i < 3; ++i) {
    const Point& pj = p[(i + 1) % 3];
    const Point& pk = p[(i + 2) % 3];
    g.grad[i] = {(pj.y - pk.y) * inv2a, (pk.x - pj.x) * inv2a};
    const Point d = pk - pj;
    g.length[i] = std::hypot(d.x, d.y);
    // outward normal of the edge opposite vertex i
    g.normal[i] = {d.y / g.length[i], -d.x / g.length[i]};
  }
  return g;
}

double Mesh::total_area() const {
  double sum = 0.0;
  for (std::size_t c = 0; c < cells_.size(); ++c) sum += signed_area(static_cast<int>(c));
  return sum;
}

double Mesh::min_angle() const {
  double best = std::numeric_limits<double>::infinity();
  for (const Cell& c : cells_) {
    for (std::size_t i = 0; i < 3; ++i) {
      const Point p = vertex(c.v[i]);
      const Point a = vertex(c.v[(i + 1) % 3]) - p;
      const Point b = vertex(c.v[(i + 2) % 3]) - p;
      best = std::min(best, std::atan2(std::abs(cross(a, b)), dot(a, b)));
    }
  }
  return best;
}

MarkedSet::MarkedSet(std::vector<int> cells, std::size_t num_cells) : cells_(std::move(cells)) {
  std::sort(cells_.begin(), cells_.end());
  if (std::adjacent_find(cells_.begin(), cells_.end()) != cells_.end()) {
    throw MeshError("marked set contains duplicate cells");
  }
  if (!cells_.empty() && (cells_.front() < 0 || static_cast<std::size_t>(cells_.back()) >= num_cells)) {
    throw MeshError("marked cell index out of range");
  }
}

std::vector<double> Prolongation::apply(const std::vector<double>& coarse) const {
  if (coarse.size() != old_vertex_count) {
    throw MeshError("prolongation applied to a vector of the wrong length");
  }
  std::vector<double> fine(coarse);
  fine.reserve(old_vertex_count + parents.size());
  for (const auto& [a, b] : parents) {
    fine.push_back(0.5 * (fine[static_cast<std::size_t>(a)] + fine[static_cast<std::size_t>(b)]));
  }
  return fine;
}

Mesh unit_square_mesh(int n0) {
  if (n0 < 1) throw MeshError("unit_square_mesh needs n0 >= 1");
  const int n = n0 + 1;
  std::vector<Point> vertices;
  vertices.reserve(static_cast<std::size_t>(n * n));
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      vertices.push_back({static_cast<double>(i) / n0, static_cast<double>(j) / n0});
    }
  }
  auto id = [n](int i, int j) { return j * n + i; };

  std::vector<Cell> cells;
  cells.reserve(static_cast<std::size_t>(2 * n0 * n0));
  for (int j = 0; j < n0; ++j) {
    for (int i = 0; i < n0; ++i) {
      const int a = id(i, j), b = id(i + 1, j), c = id(i + 1, j + 1), d = id(i, j + 1);
      if ((i + j) % 2 == 0) {
        // diagonal a-c
        cells.push_back({{c, a, b}, 0});
        cells.push_back({{a, c, d}, 0});
      } else {
        // diagonal b-d
        cells.push_back({{b, d, a}, 0});
        cells.push_back({{d, b, c}, 0});
      }
    }
  }
  return Mesh(std::move(vertices), std::move(cells));
}

RefineResult refine(const Mesh& mesh, const MarkedSet& marked, const RefineOptions& options) {
  const int num_cells = static_cast<int>(mesh.num_cells());
  std::vector<char> edge_marked(mesh.num_edges(), 0);
  for (int c : marked.cells()) {
    if (c < 0 || c >= num_cells) throw MeshError("marked cell index out of range");
    edge_marked[static_cast<std::size_t>(mesh.cell_edge(c, 2))] = 1;
  }

  // Closure: a cell with any marked edge must have its refinement edge marked.
  for (int sweep = 0;; ++sweep) {
    if (sweep > options.max_closure_sweeps) {
      throw MeshError("refinement closure did not terminate; refinement edges are malformed");
    }
    bool changed = false;
    for (int c = 0; c < num_cells; ++c) {
      const auto ref = static_cast<std::size_t>(mesh.cell_edge(c, 2));
      if (edge_marked[ref]) continue;
      if (edge_marked[static_cast<std::size_t>(mesh.cell_edge(c, 0))] ||
          edge_marked[static_cast<std::size_t>(mesh.cell_edge(c, 1))]) {
        edge_marked[ref] = 1;
        changed = true;
      }
    }
    if (!changed) break;
  }

  RefineResult result;
  std::vector<Point> vertices = mesh.vertices();
  Prolongation& prolong = result.prolongation;
  prolong.old_vertex_count = vertices.size();

  std::vector<int> midpoint(mesh.num_edges(), -1);
  for (std::size_t e = 0; e < mesh.num_edges(); ++e) {
    if (!edge_marked[e]) continue;
    const Edge& edge = mesh.edges()[e];
    midpoint[e] = static_cast<int>(vertices.size());
    vertices.push_back(0.5 * (vertices[static_cast<std::size_t>(edge.a)] +
                              vertices[static_cast<std::size_t>(edge.b)]));
    prolong.parents.emplace_back(edge.a, edge.b);
  }

  std::vector<Cell> cells;
  cells.reserve(mesh.num_cells() + 3 * marked.size());
  for (int c = 0; c < num_cells; ++c) {
    const Cell& parent = mesh.cell(c);
    const auto ref = static_cast<std::size_t>(mesh.cell_edge(c, 2));
    if (!edge_marked[ref]) {
      cells.push_back(parent);
      continue;
    }
    const auto [v0, v1, v2] = parent.v;
    const int m = midpoint[ref];
    const int gen = parent.generation + 1;
    // Children inherit the parent's remaining edges as refinement edges:
    // (v2, v0) is local edge 1 and (v1, v2) is local edge 0 of the parent.
    const std::array<std::pair<Cell, std::size_t>, 2> children{{
        {Cell{{v2, v0, m}, gen}, static_cast<std::size_t>(mesh.cell_edge(c, 1))},
        {Cell{{v1, v2, m}, gen}, static_cast<std::size_t>(mesh.cell_edge(c, 0))},
    }};
    for (const auto& [child, child_ref] : children) {
      if (!edge_marked[child_ref]) {
        cells.push_back(child);
        continue;
      }
      const auto [w0, w1, w2] = child.v;
      const int mm = midpoint[child_ref];
      cells.push_back({{w2, w0, mm}, gen + 1});
      cells.push_back({{w1, w2, mm}, gen + 1});
    }
  }

  result.mesh = Mesh(std::move(vertices), std::move(cells));
  return result;
}

RefineResult refine_uniform(const Mesh& mesh) {
  std::vector<int> all(mesh.num_cells());
  for (std::size_t c = 0; c < all.size(); ++c) all[c] = static_cast<int>(c);
  return refine(mesh, MarkedSet(std::move(all), mesh.num_cells()));
}

std::string audit_conformity(const Mesh& mesh) {
  std::ostringstream msg;
  for (std::size_t c = 0; c < mesh.num_cells(); ++c) {
    if (!(mesh.signed_area(static_cast<int>(c)) > 0.0)) {
      msg << "cell " << c << " has non-positive signed area";
      return msg.str();
    }
  }
  for (std::size_t e = 0; e < mesh.num_edges(); ++e) {
    const Edge& edge = mesh.edges()[e];
    const bool on_boundary = on_unit_square_boundary(mesh.vertex(edge.a), mesh.vertex(edge.b));
    if (edge.boundary() && !on_boundary) {
      msg << "edge " << e << " (" << edge.a << ", " << edge.b
          << ") has a single incident cell but is interior (hanging vertex)";
      return msg.str();
    }
    if (!edge.boundary() && on_boundary) {
      msg << "boundary edge " << e << " has two incident cells";
      return msg.str();
    }
  }
  return {};
}

void write_mesh(std::ostream& os, const Mesh& mesh) {
  const auto precision = os.precision(17);
  os << "vertices " << mesh.num_vertices() << " cells " << mesh.num_cells() << '\n';
  for (const Point& p : mesh.vertices()) os << p.x << ' ' << p.y << '\n';
  for (const Cell& c : mesh.cells()) os << c.v[0] << ' ' << c.v[1] << ' ' << c.v[2] << '\n';
  os.precision(precision);
}

}  // namespace chmy
