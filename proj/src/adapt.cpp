#include "chmy/adapt.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace chmy {

double IndicatorField::total() const { return std::accumulate(eta_sq.begin(), eta_sq.end(), 0.0); }

namespace {

Point cell_gradient(const CellGeometry& g, const std::array<double, 3>& v) {
  Point grad{};
  for (std::size_t i = 0; i < 3; ++i) grad = grad + v[i] * g.grad[i];
  return grad;
}

int local_index_of_edge(const Mesh& mesh, int c, int e) {
  for (int i = 0; i < 3; ++i) {
    if (mesh.cell_edge(c, i) == e) return i;
  }
  throw MeshError("edge not found in its incident cell");
}

}  // namespace

IndicatorField estimate(const Mesh& mesh, const P1Function& phi, const P1Function& mu, double eps,
                        double tau) {
  if (phi.size() != mesh.num_vertices() || mu.size() != mesh.num_vertices()) {
    throw std::invalid_argument("estimate: functions do not match the mesh");
  }
  const std::size_t nc = mesh.num_cells();
  std::vector<CellGeometry> geo(nc);
  std::vector<Point> grad_phi(nc), grad_mu(nc);
  for (std::size_t c = 0; c < nc; ++c) {
    const int ci = static_cast<int>(c);
    geo[c] = mesh.geometry(ci);
    grad_phi[c] = cell_gradient(geo[c], phi.cell_values(ci));
    grad_mu[c] = cell_gradient(geo[c], mu.cell_values(ci));
  }

  IndicatorField eta;
  eta.eta_sq.assign(nc, 0.0);
  const double we = eps * eps;
  const double wt = tau * tau;
  for (std::size_t e = 0; e < mesh.num_edges(); ++e) {
    const Edge& edge = mesh.edges()[e];
    const auto c0 = static_cast<std::size_t>(edge.cells[0]);
    const int li = local_index_of_edge(mesh, edge.cells[0], static_cast<int>(e));
    const Point n = geo[c0].normal[static_cast<std::size_t>(li)];
    const double h = geo[c0].length[static_cast<std::size_t>(li)];
    double jump_phi = dot(grad_phi[c0], n);
    double jump_mu = dot(grad_mu[c0], n);
    if (!edge.boundary()) {
      const auto c1 = static_cast<std::size_t>(edge.cells[1]);
      jump_phi -= dot(grad_phi[c1], n);
      jump_mu -= dot(grad_mu[c1], n);
    }
    const double term = (we * jump_phi * jump_phi + wt * jump_mu * jump_mu) * h * h;
    if (edge.boundary()) {
      eta.eta_sq[c0] += term;
    } else {
      eta.eta_sq[c0] += 0.5 * term;
      eta.eta_sq[static_cast<std::size_t>(edge.cells[1])] += 0.5 * term;
    }
  }
  return eta;
}

void MarkParams::validate() const {
  if (!(theta > 0.0 && theta < 1.0)) throw std::invalid_argument("Doerfler theta must lie in (0, 1)");
}

MarkedSet doerfler_mark(const IndicatorField& eta, const MarkParams& params) {
  params.validate();
  for (double v : eta.eta_sq) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw std::invalid_argument("indicator must be finite and >= 0");
  }
  const double total = eta.total();
  if (total == 0.0) return MarkedSet({}, eta.eta_sq.size());

  std::vector<int> order(eta.eta_sq.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return eta.eta_sq[static_cast<std::size_t>(a)] > eta.eta_sq[static_cast<std::size_t>(b)];
  });
  const double target = params.theta * total;
  double sum = 0.0;
  std::size_t count = 0;
  while (count < order.size() && sum < target) {
    sum += eta.eta_sq[static_cast<std::size_t>(order[count])];
    ++count;
  }
  order.resize(count);
  return MarkedSet(std::move(order), eta.eta_sq.size());
}

namespace {

StepProblem make_step(const AdaptiveProblem& p, const MeshPtr& mesh) {
  StepProblem step;
  step.eps = p.eps;
  step.tau = p.tau;
  step.s = p.s;
  step.k = p.k;
  step.scheme = p.scheme;
  step.phi_prev = interpolate(mesh, p.phi_prev);
  return step;
}

}  // namespace

AdaptiveResult adaptive_cycle(const AdaptiveProblem& problem, MeshPtr m0, const AdaptOptions& options,
                              const NewtonConfig& newton, const std::optional<WarmStart>& guess) {
  if (options.cycles < 1) throw std::invalid_argument("adaptive_cycle needs at least one cycle");
  options.mark.validate();
  if (!problem.phi_prev) throw std::invalid_argument("adaptive_cycle: no previous phase field");

  MeshPtr mesh = std::move(m0);
  std::optional<WarmStart> start = guess;
  if (start && (start->phi.mesh != mesh || start->mu.mesh != mesh)) {
    throw std::invalid_argument("adaptive_cycle: warm start lives on a different mesh");
  }

  AdaptiveResult result;
  for (int cycle = 0; cycle <= options.cycles; ++cycle) {
    auto ops = std::make_shared<const FemOperators>(mesh);
    StepProblem step = make_step(problem, mesh);
    const StepSystem system(step, ops);
    const P1Function phi0 = start ? start->phi : step.phi_prev;
    const P1Function mu0 = start ? start->mu : P1Function(mesh, 0.0);
    StepSolution sol = newton_solve(system, phi0, mu0, newton);

    SolveDiagnostics diag;
    diag.cycle = cycle;
    diag.vertices = mesh->num_vertices();
    diag.cells = mesh->num_cells();
    diag.newton_iterations = sol.iterations;
    diag.status = sol.status;

    const bool last = cycle == options.cycles;
    const bool failed = !sol.converged();
    if (last || failed) {
      result.solves.push_back(diag);
      result.ops = ops;
      result.problem = std::move(step);
      result.solution = std::move(sol);
      if (failed) {
        std::ostringstream msg;
        msg << "cycle " << cycle << ": " << status_name(result.solution.status) << " ("
            << result.solution.diagnostic << ")";
        result.failure = msg.str();
      }
      return result;
    }

    const IndicatorField eta = estimate(*mesh, sol.phi, sol.mu, problem.eps, problem.tau);
    diag.estimate = std::sqrt(eta.total());
    MarkedSet marked;
    if (mesh->num_vertices() < options.max_vertices) marked = doerfler_mark(eta, options.mark);
    diag.marked = marked.size();
    result.solves.push_back(diag);

    if (marked.empty()) {
      start = WarmStart{sol.phi, sol.mu};
      continue;
    }
    RefineResult refined = refine(*mesh, marked);
    auto fine = std::make_shared<const Mesh>(std::move(refined.mesh));
    start = WarmStart{P1Function(fine, refined.prolongation.apply(sol.phi.values)),
                      P1Function(fine, refined.prolongation.apply(sol.mu.values))};
    mesh = std::move(fine);
  }
  return result;  // unreachable
}

}  // namespace chmy
