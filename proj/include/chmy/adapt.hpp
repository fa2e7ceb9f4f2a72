#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "chmy/chstep.hpp"
#include "chmy/fem.hpp"
#include "chmy/mesh.hpp"

namespace chmy {

/// Per-cell squared error indicators eta_T^2.
struct IndicatorField {
  std::vector<double> eta_sq;

  double total() const;
};

/// Edge-jump indicator: for an interior edge E,
///   j(E) = |[grad u . n_E]|^2 h_E^2   (squared L2 norm on E times h_E),
/// split half/half between the two neighbours and weighted eps^2 for phi and
/// tau^2 for mu. A boundary edge adds the full normal-flux term to its cell.
IndicatorField estimate(const Mesh& mesh, const P1Function& phi, const P1Function& mu, double eps,
                        double tau);

struct MarkParams {
  double theta = 0.5;

  void validate() const;
};

/// Smallest greedy set (largest eta^2 first, ties by lower cell index) whose
/// squared indicators reach theta * total. Empty when all indicators vanish.
MarkedSet doerfler_mark(const IndicatorField& eta, const MarkParams& params);

struct AdaptiveProblem {
  double eps = 0.04;
  double tau = 0.01;
  double s = 1e2;
  PenaltyPower k{};
  PenaltyScheme scheme = PenaltyScheme::Lumped;
  /// Previous phase field; re-evaluated at the vertices of every mesh.
  std::function<double(Point)> phi_prev;
};

struct AdaptOptions {
  int cycles = 3;
  MarkParams mark{};
  /// Marking is skipped once the mesh has this many vertices.
  std::size_t max_vertices = 20000;
};

struct SolveDiagnostics {
  int cycle = 0;  // == cycles for the final solve
  std::size_t vertices = 0;
  std::size_t cells = 0;
  std::size_t marked = 0;
  int newton_iterations = 0;
  NewtonStatus status = NewtonStatus::Converged;
  double estimate = 0.0;  // sqrt of the summed indicators (0 for the final solve)
};

struct AdaptiveResult {
  std::shared_ptr<const FemOperators> ops;
  StepProblem problem;  // phi_prev on the final mesh
  StepSolution solution;
  std::vector<SolveDiagnostics> solves;
  /// Empty on success; otherwise names the failing cycle.
  std::string failure;

  const MeshPtr& mesh() const { return ops->mesh; }
  bool converged() const { return failure.empty() && solution.converged(); }
};

struct WarmStart {
  P1Function phi;
  P1Function mu;
};

/// solve -> estimate -> mark -> refine, `cycles` times, then a final solve on
/// the last mesh. Each solve is warm-started from the previous solution
/// prolongated to the new mesh; the first one from `guess` (which must live on
/// m0) or from (phi_prev, 0).
AdaptiveResult adaptive_cycle(const AdaptiveProblem& problem, MeshPtr m0, const AdaptOptions& options,
                              const NewtonConfig& newton, const std::optional<WarmStart>& guess = {});

}  // namespace chmy
