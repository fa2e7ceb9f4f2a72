#include "chmy/chstep.hpp"

#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "chmy/kernels.hpp"

namespace chmy {

double SphereInitialCondition::operator()(Point x) const {
  const Point d = x - center;
  const double z = (std::hypot(d.x, d.y) - radius) / eps;
  constexpr double half_pi = std::numbers::pi / 2.0;
  if (z >= half_pi) return 1.0;
  if (z <= -half_pi) return -1.0;
  return std::sin(z);
}

P1Function initial_phase_field(MeshPtr mesh, double eps, Point center, double radius) {
  if (!(eps > 0.0)) throw std::invalid_argument("initial_phase_field: eps must be positive");
  if (!(radius > 0.0 && radius < 0.5)) {
    throw std::invalid_argument("initial_phase_field: radius must lie in (0, 0.5)");
  }
  const SphereInitialCondition ic{eps, center, radius};
  return interpolate(std::move(mesh), [&](Point x) { return ic(x); });
}

void StepProblem::validate() const {
  if (!(eps > 0.0) || !std::isfinite(eps)) throw std::invalid_argument("eps must be positive");
  if (!(tau > 0.0) || !std::isfinite(tau)) throw std::invalid_argument("tau must be positive");
  if (!(s >= 0.0) || !std::isfinite(s)) throw std::invalid_argument("s must be finite and >= 0");
  check_compatible(k, scheme);
  if (!phi_prev.mesh) throw std::invalid_argument("phi_prev has no mesh");
}

StepSystem::StepSystem(StepProblem problem, std::shared_ptr<const FemOperators> ops)
    : problem_(std::move(problem)), ops_(std::move(ops)) {
  problem_.validate();
  if (!ops_ || ops_->mesh != problem_.phi_prev.mesh) {
    throw std::invalid_argument("StepSystem: operators and phi_prev use different meshes");
  }
  n_ = ops_->mesh->num_vertices();
  m_phi_prev_ = ops_->mass.multiply(problem_.phi_prev.values);
  tau_k_ = ops_->stiffness.scaled(problem_.tau);
  eps_k_ = ops_->stiffness.scaled(problem_.eps);
  minus_m_ = ops_->mass.scaled(-1.0);
}

std::vector<double> StepSystem::residual_with(std::span<const double> penalty,
                                              std::span<const double> phi,
                                              std::span<const double> mu) const {
  if (phi.size() != n_ || mu.size() != n_) throw std::invalid_argument("residual: size mismatch");
  const double inv_eps = 1.0 / problem_.eps;
  const std::vector<double> m_phi = ops_->mass.multiply(phi);
  const std::vector<double> m_mu = ops_->mass.multiply(mu);
  const std::vector<double> k_phi = ops_->stiffness.multiply(phi);
  const std::vector<double> k_mu = ops_->stiffness.multiply(mu);
  std::vector<double> f(2 * n_);
  for (std::size_t i = 0; i < n_; ++i) {
    f[i] = m_phi[i] + problem_.tau * k_mu[i] - m_phi_prev_[i];
    f[n_ + i] = problem_.eps * k_phi[i] + inv_eps * penalty[i] - inv_eps * m_phi_prev_[i] - m_mu[i];
  }
  return f;
}

SparseMatrix StepSystem::jacobian_with(const SparseMatrix& penalty_jacobian) const {
  const SparseMatrix lower_left = add(eps_k_, penalty_jacobian, 1.0, 1.0 / problem_.eps);
  return block2x2(ops_->mass, tau_k_, lower_left, minus_m_);
}

std::vector<double> StepSystem::residual(std::span<const double> phi, std::span<const double> mu) const {
  const std::vector<double> p = assemble_penalty_vector(*ops_, phi, problem_.s, problem_.k, problem_.scheme);
  return residual_with(p, phi, mu);
}

SparseMatrix StepSystem::jacobian(std::span<const double> phi) const {
  return jacobian_with(assemble_penalty_jacobian(*ops_, phi, problem_.s, problem_.k, problem_.scheme));
}

StepSystem::Linearization StepSystem::linearize(std::span<const double> phi,
                                                std::span<const double> mu) const {
  const PenaltyEvaluation pe = evaluate_penalty(*ops_, phi, problem_.s, problem_.k, problem_.scheme);
  return {residual_with(pe.value, phi, mu), jacobian_with(pe.jacobian)};
}

namespace {
void require_same_mesh(const StepProblem& p, const P1Function& f) {
  if (f.mesh != p.phi_prev.mesh) {
    throw std::invalid_argument("function and phi_prev live on different meshes");
  }
}
}  // namespace

std::vector<double> residual(const StepProblem& p, const P1Function& phi, const P1Function& mu) {
  require_same_mesh(p, phi);
  require_same_mesh(p, mu);
  StepSystem system(p, std::make_shared<const FemOperators>(p.phi_prev.mesh));
  return system.residual(phi.values, mu.values);
}

SparseMatrix jacobian(const StepProblem& p, const P1Function& phi) {
  require_same_mesh(p, phi);
  StepSystem system(p, std::make_shared<const FemOperators>(p.phi_prev.mesh));
  return system.jacobian(phi.values);
}

std::string_view status_name(NewtonStatus status) {
  switch (status) {
    case NewtonStatus::Converged: return "converged";
    case NewtonStatus::Diverged: return "diverged";
    case NewtonStatus::MaxIterations: return "max_iterations";
  }
  return "unknown";
}

StepSolution newton_solve(const StepSystem& system, const P1Function& phi0, const P1Function& mu0,
                          const NewtonConfig& config) {
  const MeshPtr& mesh = system.operators().mesh;
  if (phi0.mesh != mesh || mu0.mesh != mesh) {
    throw std::invalid_argument("newton_solve: initial guess lives on a different mesh");
  }
  if (!(config.damping > 0.0 && config.damping <= 1.0)) {
    throw std::invalid_argument("newton_solve: damping must lie in (0, 1]");
  }
  const std::size_t n = system.num_vertices();
  std::vector<double> phi = phi0.values;
  std::vector<double> mu = mu0.values;

  StepSolution sol;
  auto finish = [&](NewtonStatus status, std::string diagnostic) {
    sol.status = status;
    sol.diagnostic = std::move(diagnostic);
    sol.phi = P1Function(mesh, std::move(phi));
    sol.mu = P1Function(mesh, std::move(mu));
    return sol;
  };

  StepSystem::Linearization lin = system.linearize(phi, mu);
  const double r0 = kernels::max_abs(lin.residual);
  sol.residual_history.push_back(r0);
  if (!std::isfinite(r0)) return finish(NewtonStatus::Diverged, "non-finite initial residual");
  if (r0 <= config.abs_tol) return finish(NewtonStatus::Converged, {});

  DirectSolver solver;
  for (int it = 1; it <= config.max_iterations; ++it) {
    std::vector<double> delta;
    try {
      solver.factorize(lin.jacobian);
      delta = solver.solve(lin.residual);
    } catch (const SingularMatrixError& e) {
      std::ostringstream msg;
      msg << "singular Newton system at iteration " << it << ": " << e.what();
      return finish(NewtonStatus::Diverged, msg.str());
    }
    for (std::size_t i = 0; i < n; ++i) {
      phi[i] -= config.damping * delta[i];
      mu[i] -= config.damping * delta[n + i];
    }
    sol.iterations = it;
    lin = system.linearize(phi, mu);
    const double r = kernels::max_abs(lin.residual);
    sol.residual_history.push_back(r);
    if (!std::isfinite(r) || r > config.divergence_factor * r0) {
      std::ostringstream msg;
      msg << "residual grew to " << r << " (initial " << r0 << ") at iteration " << it;
      for (double& v : phi) if (!std::isfinite(v)) v = 0.0;
      for (double& v : mu) if (!std::isfinite(v)) v = 0.0;
      return finish(NewtonStatus::Diverged, msg.str());
    }
    if (r <= config.abs_tol || r <= config.rel_tol * r0) return finish(NewtonStatus::Converged, {});
  }
  std::ostringstream msg;
  msg << "no convergence after " << config.max_iterations << " iterations (residual "
      << sol.residual_history.back() << ")";
  return finish(NewtonStatus::MaxIterations, msg.str());
}

}  // namespace chmy
