#pragma once

#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "chmy/fem.hpp"
#include "chmy/penalty.hpp"
#include "chmy/sparse.hpp"

namespace chmy {

/// Circular interface: phi0 = sin(z), z = (|x - center| - radius) / eps,
/// clamped to +-1 for |z| >= pi/2.
struct SphereInitialCondition {
  double eps = 0.04;
  Point center{0.5, 0.5};
  double radius = 0.25;

  double operator()(Point x) const;
};

P1Function initial_phase_field(MeshPtr mesh, double eps, Point center, double radius);

/// One implicit step of the penalized Cahn-Hilliard system.
struct StepProblem {
  double eps = 0.04;
  double tau = 0.01;
  double s = 1e2;
  PenaltyPower k{};
  PenaltyScheme scheme = PenaltyScheme::Lumped;
  P1Function phi_prev;

  /// Throws std::invalid_argument on non-positive eps/tau, negative s or an
  /// incompatible (k, scheme) pair.
  void validate() const;
};

/// Residual and Jacobian of the step on a fixed mesh. Unknowns are ordered
/// [phi; mu], each of length N.
///
///   F1 = M phi + tau K mu - M phi_prev
///   F2 = eps K phi + P(phi)/eps - M phi_prev/eps - M mu
///
///   J = [[M, tau K], [eps K + P'(phi)/eps, -M]]
class StepSystem {
 public:
  StepSystem(StepProblem problem, std::shared_ptr<const FemOperators> ops);

  const StepProblem& problem() const { return problem_; }
  const FemOperators& operators() const { return *ops_; }
  std::size_t num_vertices() const { return n_; }

  std::vector<double> residual(std::span<const double> phi, std::span<const double> mu) const;
  SparseMatrix jacobian(std::span<const double> phi) const;

  struct Linearization {
    std::vector<double> residual;
    SparseMatrix jacobian;
  };
  Linearization linearize(std::span<const double> phi, std::span<const double> mu) const;

 private:
  std::vector<double> residual_with(std::span<const double> penalty, std::span<const double> phi,
                                    std::span<const double> mu) const;
  SparseMatrix jacobian_with(const SparseMatrix& penalty_jacobian) const;

  StepProblem problem_;
  std::shared_ptr<const FemOperators> ops_;
  std::size_t n_ = 0;
  std::vector<double> m_phi_prev_;
  SparseMatrix tau_k_;
  SparseMatrix eps_k_;
  SparseMatrix minus_m_;
};

/// Convenience forms building the operators of phi.mesh. Throw
/// std::invalid_argument when phi, mu and phi_prev live on different meshes.
std::vector<double> residual(const StepProblem& p, const P1Function& phi, const P1Function& mu);
SparseMatrix jacobian(const StepProblem& p, const P1Function& phi);

enum class NewtonStatus { Converged, Diverged, MaxIterations };
std::string_view status_name(NewtonStatus status);

struct NewtonConfig {
  double abs_tol = 1e-10;
  double rel_tol = 1e-12;
  int max_iterations = 50;
  /// Step length factor in (0, 1]; 1 is plain Newton.
  double damping = 1.0;
  /// Divergence when the residual exceeds this multiple of the initial one.
  double divergence_factor = 1e4;
};

struct StepSolution {
  P1Function phi;
  P1Function mu;
  NewtonStatus status = NewtonStatus::MaxIterations;
  int iterations = 0;
  std::vector<double> residual_history;  // max-norm of [F1; F2], starting at the guess
  std::string diagnostic;

  bool converged() const { return status == NewtonStatus::Converged; }
};

/// Semismooth Newton iteration U <- U - damping * J(U)^{-1} F(U).
StepSolution newton_solve(const StepSystem& system, const P1Function& phi0, const P1Function& mu0,
                          const NewtonConfig& config = {});

struct BallSample {
  Point center;
  double radius;
};

/// Centers on the 5x5 lattice {1/6, ..., 5/6}^2, radii {0.05, 0.1, 0.2}.
std::vector<BallSample> default_ball_samples();

struct ViolationReport {
  double linf = 0.0;          // max |lambda(phi)|
  double l1 = 0.0;            // integral of |lambda(phi)|
  double mass_error = 0.0;    // |(phi - phi_prev, 1)|
  double structural_K = 0.0;  // max over samples of s * int_{B_R(x)} |lambda(phi)| / R^2
};

/// Exact integral of |lambda(phi_h)|.
double violation_l1(const P1Function& phi);

/// Exact integral of |lambda(phi_h)| over the disk B_R(center) intersected with
/// the mesh domain.
double violation_in_ball(const P1Function& phi, Point center, double radius);

ViolationReport violation_report(const StepProblem& p, const FemOperators& ops,
                                 const StepSolution& sol,
                                 std::span<const BallSample> samples);

/// Area and first moment (about `center`) of triangle(a, b, c) intersected
/// with the disk of the given radius around `center`. Exact.
struct DiskMoments {
  double area = 0.0;
  Point moment{};  // integral of (x - center)
};
DiskMoments disk_triangle_moments(Point a, Point b, Point c, Point center, double radius);

}  // namespace chmy
