#include <cmath>
#include <map>
#include <numbers>
#include <random>

#include "chmy/chstep.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace chmy;
using std::numbers::pi;

namespace {

const PenaltyScheme kSchemes[] = {PenaltyScheme::Exact, PenaltyScheme::Interpolated, PenaltyScheme::Lumped};

bool compatible(int k, PenaltyScheme s) { return s != PenaltyScheme::Exact || k == 2; }

MeshPtr small_mesh() {
  // 41 vertices, locally refined
  Mesh m = unit_square_mesh(4);
  std::vector<int> mark;
  for (std::size_t c = 0; c < m.num_cells(); c += 3) mark.push_back(static_cast<int>(c));
  m = refine(m, MarkedSet(mark, m.num_cells())).mesh;
  return std::make_shared<const Mesh>(std::move(m));
}

StepProblem make_problem(MeshPtr mesh, double s, int k, PenaltyScheme scheme, double eps = 0.04) {
  StepProblem p;
  p.eps = eps;
  p.tau = 0.01;
  p.s = s;
  p.k = PenaltyPower(k);
  p.scheme = scheme;
  p.phi_prev = initial_phase_field(std::move(mesh), eps, {0.5, 0.5}, 0.25);
  return p;
}

std::vector<double> dense_penalty(const Mesh& m, const std::vector<double>& phi, double s, int k,
                                  PenaltyScheme scheme) {
  const std::size_t n = m.num_vertices();
  std::vector<double> out(n, 0.0);
  std::vector<double> lk(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double l = oracle::lam(phi[i]);
    lk[i] = s * l * std::pow(std::abs(l), k - 2);
  }
  switch (scheme) {
    case PenaltyScheme::Lumped: {
      const auto d = oracle::dense_lumped(m);
      for (std::size_t i = 0; i < n; ++i) out[i] = d[i] * lk[i];
      break;
    }
    case PenaltyScheme::Interpolated: out = oracle::matvec(oracle::dense_mass(m), lk); break;
    case PenaltyScheme::Exact:
      for (const Cell& cell : m.cells()) {
        const std::array<double, 3> v{phi[static_cast<std::size_t>(cell.v[0])], phi[static_cast<std::size_t>(cell.v[1])],
                                      phi[static_cast<std::size_t>(cell.v[2])]};
        const auto o = oracle::exact_penalty_cell(v);
        const double area = oracle::element(m.vertex(cell.v[0]), m.vertex(cell.v[1]), m.vertex(cell.v[2])).area;
        for (std::size_t i = 0; i < 3; ++i) out[static_cast<std::size_t>(cell.v[i])] += s * area * o[i];
      }
      break;
  }
  return out;
}

// F1 = M phi + tau K mu - M phi_prev, F2 = eps K phi + P/eps - M phi_prev/eps - M mu
std::vector<double> dense_residual(const StepProblem& p, const std::vector<double>& phi, const std::vector<double>& mu) {
  const Mesh& m = *p.phi_prev.mesh;
  const auto M = oracle::dense_mass(m);
  const auto K = oracle::dense_stiffness(m);
  const auto mphi = oracle::matvec(M, phi), kmu = oracle::matvec(K, mu), mprev = oracle::matvec(M, p.phi_prev.values);
  const auto kphi = oracle::matvec(K, phi), mmu = oracle::matvec(M, mu);
  const auto pen = dense_penalty(m, phi, p.s, p.k.value(), p.scheme);
  const std::size_t n = phi.size();
  std::vector<double> f(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    f[i] = mphi[i] + p.tau * kmu[i] - mprev[i];
    f[n + i] = p.eps * kphi[i] + pen[i] / p.eps - mprev[i] / p.eps - mmu[i];
  }
  return f;
}

// phi_prev scaled so that some nodes violate the obstacle, away from the kinks
std::vector<double> violating_state(const StepProblem& p) {
  std::vector<double> phi;
  for (std::size_t i = 0; i < p.phi_prev.size(); ++i) {
    const Point x = p.phi_prev.mesh->vertices()[i];
    phi.push_back(1.37 * p.phi_prev.values[i] + 0.05 * std::sin(7 * x.x + 3 * x.y));
  }
  return phi;
}

StepSolution solve_cold(const StepProblem& p, const NewtonConfig& cfg = {}) {
  auto ops = std::make_shared<const FemOperators>(p.phi_prev.mesh);
  const StepSystem sys(p, ops);
  return newton_solve(sys, p.phi_prev, P1Function(p.phi_prev.mesh, 0.0), cfg);
}

}  // namespace

TEST_CASE("initial phase field") {
  const SphereInitialCondition ic{0.01, {0.5, 0.5}, 0.25};
  CHECK(ic({0.5, 0.5}) == -1.0);
  CHECK(std::abs(ic({0.75, 0.5})) < 1e-15);
  CHECK(ic({0.0, 0.0}) == 1.0);
  const SphereInitialCondition wide{0.04, {0.5, 0.5}, 0.25};
  // z = 0.02 / 0.04 = 0.5
  CHECK(wide({0.77, 0.5}) == doctest::Approx(std::sin(0.5)).epsilon(1e-12));
  const MeshPtr m = std::make_shared<const Mesh>(unit_square_mesh(16));
  const P1Function f = initial_phase_field(m, 0.04, {0.5, 0.5}, 0.25);
  for (std::size_t i = 0; i < f.size(); ++i) {
    CHECK(f.values[i] >= -1.0);
    CHECK(f.values[i] <= 1.0);
    CHECK(f.values[i] == wide(m->vertices()[i]));
  }
  CHECK_THROWS(initial_phase_field(m, 0.0, {0.5, 0.5}, 0.25));
  CHECK_THROWS(initial_phase_field(m, 0.04, {0.5, 0.5}, 0.5));
  CHECK_THROWS(initial_phase_field(m, 0.04, {0.5, 0.5}, 0.0));
}

TEST_CASE("step problem validation") {
  const MeshPtr m = small_mesh();
  StepProblem p = make_problem(m, 10.0, 2, PenaltyScheme::Lumped);
  CHECK_NOTHROW(p.validate());
  p.s = -1;
  CHECK_THROWS(p.validate());
  p.s = 10;
  p.tau = 0;
  CHECK_THROWS(p.validate());
  p.tau = 0.01;
  p.scheme = PenaltyScheme::Exact;
  p.k = PenaltyPower(3);
  CHECK_THROWS(p.validate());
}

TEST_CASE("residual examples") {
  const MeshPtr m = small_mesh();
  REQUIRE(m->num_vertices() <= 50);
  SUBCASE("previous state with zero potential") {
    const StepProblem p = make_problem(m, 100.0, 2, PenaltyScheme::Lumped);
    const auto f = residual(p, p.phi_prev, P1Function(m, 0.0));
    const std::size_t n = m->num_vertices();
    for (std::size_t i = 0; i < n; ++i) CHECK(f[i] == 0.0);
    const auto want = dense_residual(p, p.phi_prev.values, std::vector<double>(n, 0.0));
    CHECK(oracle::max_abs_diff(f, want) <= 1e-12);
  }
  SUBCASE("zero state is a fixed point") {
    StepProblem p = make_problem(m, 100.0, 3, PenaltyScheme::Interpolated);
    p.phi_prev = P1Function(m, 0.0);
    const auto f = residual(p, P1Function(m, 0.0), P1Function(m, 0.0));
    for (double v : f) CHECK(v == 0.0);
  }
  SUBCASE("random states against dense re-assembly") {
    std::mt19937_64 rng(1);
    for (PenaltyScheme scheme : kSchemes) {
      for (int k = 2; k <= 4; ++k) {
        if (!compatible(k, scheme)) continue;
        const StepProblem p = make_problem(m, 50.0, k, scheme);
        const auto phi = oracle::random_vector(m->num_vertices(), -2.0, 2.0, rng);
        const auto mu = oracle::random_vector(m->num_vertices(), -1.0, 1.0, rng);
        const auto f = residual(p, P1Function(m, phi), P1Function(m, mu));
        const auto want = dense_residual(p, phi, mu);
        CAPTURE(k);
        CAPTURE(scheme_name(scheme));
        // the exact scheme's oracle is quadrature-limited
        const double tol = scheme == PenaltyScheme::Exact ? 1e-10 : 1e-12;
        CHECK(oracle::max_abs_diff(f, want) <= tol * std::max(1.0, oracle::max_abs(want)));
      }
    }
  }
  SUBCASE("mesh mismatch") {
    const StepProblem p = make_problem(m, 1.0, 2, PenaltyScheme::Lumped);
    const MeshPtr other = std::make_shared<const Mesh>(*m);
    CHECK_THROWS_AS(residual(p, P1Function(other, 0.0), P1Function(m, 0.0)), std::invalid_argument);
    CHECK_THROWS_AS(jacobian(p, P1Function(other, 0.0)), std::invalid_argument);
  }
}

TEST_CASE("jacobian blocks") {
  const MeshPtr m = small_mesh();
  const std::size_t n = m->num_vertices();
  const StepProblem p = make_problem(m, 100.0, 2, PenaltyScheme::Exact);
  const SparseMatrix K = assemble_stiffness(*m);
  const SparseMatrix M = assemble_mass(*m);
  const SparseMatrix j = jacobian(p, p.phi_prev);
  REQUIRE(j.rows() == 2 * n);
  for (std::size_t r = 0; r < n; ++r) {
    for (int q = K.row_ptr()[r]; q < K.row_ptr()[r + 1]; ++q) {
      const auto c = static_cast<std::size_t>(K.col_idx()[static_cast<std::size_t>(q)]);
      const double kv = K.values()[static_cast<std::size_t>(q)];
      CHECK(j.at(r, n + c) == p.tau * kv);
      CHECK(j.at(n + r, c) == p.eps * kv);
      CHECK(j.at(r, c) == M.at(r, c));
      CHECK(j.at(n + r, n + c) == -M.at(r, c));
    }
  }
}

TEST_CASE("jacobian matches finite differences of the residual") {
  const MeshPtr m = small_mesh();
  const std::size_t n = m->num_vertices();
  std::mt19937_64 rng(2);
  const auto dir = oracle::random_vector(n, -1.0, 1.0, rng);
  const auto mu = oracle::random_vector(n, -1.0, 1.0, rng);
  for (PenaltyScheme scheme : kSchemes) {
    for (int k = 2; k <= 4; ++k) {
      if (!compatible(k, scheme)) continue;
      const StepProblem p = make_problem(m, 30.0, k, scheme);
      const auto phi = violating_state(p);
      const auto base = residual(p, P1Function(m, phi), P1Function(m, mu));
      std::vector<double> step(2 * n, 0.0);
      for (std::size_t i = 0; i < n; ++i) step[i] = dir[i];
      const auto jd = jacobian(p, P1Function(m, phi)).multiply(step);
      const double scale = oracle::max_abs(jd);
      double e_prev = 0.0;
      for (double h : {1e-4, 1e-5, 1e-6}) {
        std::vector<double> moved = phi;
        for (std::size_t i = 0; i < n; ++i) moved[i] += h * dir[i];
        const auto f = residual(p, P1Function(m, moved), P1Function(m, mu));
        double err = 0.0;
        for (std::size_t i = 0; i < 2 * n; ++i) err = std::max(err, std::abs((f[i] - base[i]) / h - jd[i]));
        CAPTURE(k);
        CAPTURE(scheme_name(scheme));
        CAPTURE(h);
        CHECK(err <= (1e3 * h + 1e-9) * scale);
        if (e_prev > 1e-10 * scale) CHECK(err <= 0.2 * e_prev);
        e_prev = err;
      }
    }
  }
}

TEST_CASE("newton on trivial problems") {
  const MeshPtr m = small_mesh();
  SUBCASE("zero previous state") {
    for (double s : {1.0, 1e4}) {
      StepProblem p = make_problem(m, s, 2, PenaltyScheme::Lumped);
      p.phi_prev = P1Function(m, 0.0);
      const StepSolution sol = solve_cold(p);
      CHECK(sol.converged());
      CHECK(sol.iterations <= 2);
      CHECK(oracle::max_abs(sol.phi.values) == 0.0);
      CHECK(oracle::max_abs(sol.mu.values) == 0.0);
    }
  }
  SUBCASE("penalty off is one linear solve") {
    const StepProblem p = make_problem(m, 0.0, 2, PenaltyScheme::Lumped);
    const StepSolution sol = solve_cold(p);
    CHECK(sol.converged());
    CHECK(sol.iterations == 1);
    CHECK(sol.residual_history.size() == 2);
  }
  SUBCASE("configuration and guess validation") {
    const StepProblem p = make_problem(m, 1.0, 2, PenaltyScheme::Lumped);
    auto ops = std::make_shared<const FemOperators>(m);
    const StepSystem sys(p, ops);
    NewtonConfig bad;
    bad.damping = 0.0;
    CHECK_THROWS(newton_solve(sys, p.phi_prev, P1Function(m, 0.0), bad));
    const MeshPtr other = std::make_shared<const Mesh>(*m);
    CHECK_THROWS(newton_solve(sys, P1Function(other, 0.0), P1Function(m, 0.0)));
  }
}

TEST_CASE("newton failures are reported, not thrown") {
  const MeshPtr m = std::make_shared<const Mesh>(unit_square_mesh(12));
  SUBCASE("iteration cap") {
    const StepProblem p = make_problem(m, 1e2, 2, PenaltyScheme::Lumped);
    NewtonConfig cfg;
    cfg.max_iterations = 1;
    const StepSolution sol = solve_cold(p, cfg);
    CHECK(sol.status == NewtonStatus::MaxIterations);
    CHECK_FALSE(sol.diagnostic.empty());
    CHECK(status_name(sol.status) == "max_iterations");
  }
  SUBCASE("divergence") {
    // the first undamped step from an inactive state overshoots far into the
    // steep k = 4 penalty
    const StepProblem p = make_problem(m, 1e6, 4, PenaltyScheme::Lumped);
    const StepSolution sol = solve_cold(p);
    CHECK(sol.status == NewtonStatus::Diverged);
    CHECK(status_name(sol.status) == "diverged");
    CHECK_FALSE(sol.diagnostic.empty());
    for (double v : sol.phi.values) CHECK(std::isfinite(v));
  }
}

TEST_CASE("warm-started sphere solve converges quadratically") {
  const MeshPtr m = std::make_shared<const Mesh>(unit_square_mesh(32));
  auto ops = std::make_shared<const FemOperators>(m);
  // continuation in s, a cold start this steep overshoots
  StepSolution warm;
  warm.phi = initial_phase_field(m, 0.04, {0.5, 0.5}, 0.25);
  warm.mu = P1Function(m, 0.0);
  for (double s : {1e2, 1e3}) {
    const StepProblem p = make_problem(m, s, 2, PenaltyScheme::Lumped);
    warm = newton_solve(StepSystem(p, ops), warm.phi, warm.mu);
    REQUIRE(warm.converged());
  }
  const StepProblem p4 = make_problem(m, 1e4, 2, PenaltyScheme::Lumped);
  const StepSolution sol = newton_solve(StepSystem(p4, ops), warm.phi, warm.mu);
  REQUIRE(sol.converged());
  CHECK(sol.iterations >= 1);
  CHECK(sol.iterations <= 30);
  const auto& r = sol.residual_history;
  REQUIRE(r.size() >= 2);
  CHECK(r.back() <= 1e-10);
  // monotone tail and a final contraction well beyond linear
  if (r.size() >= 3) CHECK(r[r.size() - 1] < r[r.size() - 2]);
  CHECK(r[r.size() - 1] / r[r.size() - 2] <= 1e-2);
  const ViolationReport v = violation_report(p4, *ops, sol, default_ball_samples());
  CHECK(v.mass_error <= 1e-9);
  CHECK(v.linf > 0.0);
}

TEST_CASE("linear_solve") {
  SUBCASE("identity") {
    const std::vector<double> b{1.0, -2.0, 3.5};
    CHECK(linear_solve(SparseMatrix::identity(3), b) == b);
  }
  SUBCASE("mass matrix") {
    const Mesh m = unit_square_mesh(8);
    const SparseMatrix M = assemble_mass(m);
    const std::vector<double> one(m.num_vertices(), 1.0);
    const auto x = linear_solve(M, M.multiply(one));
    for (double v : x) CHECK(std::abs(v - 1.0) <= 1e-10);
  }
  SUBCASE("random sparse SPD") {
    std::mt19937_64 rng(50);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::uniform_int_distribution<int> col(0, 49);
    std::vector<Triplet> t;
    std::vector<double> rowsum(50, 0.0);
    for (int e = 0; e < 150; ++e) {
      const int i = col(rng), j = col(rng);
      if (i == j) continue;
      const double v = u(rng);
      t.push_back({i, j, v});
      t.push_back({j, i, v});
      rowsum[static_cast<std::size_t>(i)] += std::abs(v);
      rowsum[static_cast<std::size_t>(j)] += std::abs(v);
    }
    for (int i = 0; i < 50; ++i) t.push_back({i, i, rowsum[static_cast<std::size_t>(i)] + 0.5});
    const SparseMatrix a = from_triplets(50, 50, t);
    CHECK(a.asymmetry() == 0.0);
    const auto b = oracle::random_vector(50, -1.0, 1.0, rng);
    const auto x = linear_solve(a, b);
    CHECK(solve_residual(a, x, b) <= 1e-9);
    const auto ax = a.multiply(x);
    CHECK(oracle::max_abs_diff(ax, b) <= 1e-12);
  }
  SUBCASE("singular") {
    const SparseMatrix z = from_triplets(2, 2, {{0, 0, 1.0}, {0, 1, 2.0}, {1, 0, 2.0}, {1, 1, 4.0}});
    CHECK_THROWS_AS(linear_solve(z, std::vector<double>{1.0, 1.0}), SingularMatrixError);
  }
  SUBCASE("unsymmetric Newton block system") {
    const MeshPtr m = small_mesh();
    const StepProblem p = make_problem(m, 30.0, 2, PenaltyScheme::Interpolated);
    const SparseMatrix j = jacobian(p, P1Function(m, violating_state(p)));
    CHECK(j.asymmetry() > 0.0);
    std::mt19937_64 rng(6);
    const auto b = oracle::random_vector(j.rows(), -1.0, 1.0, rng);
    const auto x = linear_solve(j, b);
    CHECK(solve_residual(j, x, b) <= 1e-9);
  }
}

TEST_CASE("disk and triangle moments") {
  const double R = 0.3;
  const Point c{0.2, -0.1};
  SUBCASE("triangle inside the disk") {
    const Point a{0.25, -0.05}, b{0.3, -0.02}, d{0.22, 0.0};
    const DiskMoments mo = disk_triangle_moments(a, b, d, c, R);
    const double area = 0.5 * std::abs(cross(b - a, d - a));
    CHECK(mo.area == doctest::Approx(area).epsilon(1e-13));
    const Point centroid = (1.0 / 3.0) * (a + b + d);
    CHECK(mo.moment.x == doctest::Approx(area * (centroid.x - c.x)).epsilon(1e-12));
    CHECK(mo.moment.y == doctest::Approx(area * (centroid.y - c.y)).epsilon(1e-12));
  }
  SUBCASE("disk inside the triangle") {
    const DiskMoments mo = disk_triangle_moments({-10, -10}, {10, -10}, {0, 10}, c, R);
    CHECK(mo.area == doctest::Approx(pi * R * R).epsilon(1e-13));
    CHECK(std::abs(mo.moment.x) < 1e-14);
    CHECK(std::abs(mo.moment.y) < 1e-14);
  }
  SUBCASE("half disk") {
    const DiskMoments mo = disk_triangle_moments({c.x - 5, c.y}, {c.x + 5, c.y}, {c.x, c.y + 5}, c, R);
    CHECK(mo.area == doctest::Approx(pi * R * R / 2).epsilon(1e-13));
    CHECK(std::abs(mo.moment.x) < 1e-14);
    CHECK(mo.moment.y == doctest::Approx(2 * R * R * R / 3).epsilon(1e-13));
  }
  SUBCASE("quarter disk with a corner at the centre") {
    const DiskMoments mo = disk_triangle_moments(c, {c.x + 5, c.y}, {c.x, c.y + 5}, c, R);
    CHECK(mo.area == doctest::Approx(pi * R * R / 4).epsilon(1e-13));
    CHECK(mo.moment.x == doctest::Approx(R * R * R / 3).epsilon(1e-13));
    CHECK(mo.moment.y == doctest::Approx(R * R * R / 3).epsilon(1e-13));
  }
  SUBCASE("disjoint") {
    const DiskMoments mo = disk_triangle_moments({5, 5}, {6, 5}, {5, 6}, c, R);
    CHECK(std::abs(mo.area) <= 1e-15);
  }
  SUBCASE("additivity and orientation independence") {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(-0.4, 0.8);
    for (int trial = 0; trial < 200; ++trial) {
      const Point a{u(rng), u(rng)}, b{u(rng), u(rng)}, d{u(rng), u(rng)};
      if (std::abs(cross(b - a, d - a)) < 1e-3) continue;
      const Point mid = 0.5 * (b + d);
      const DiskMoments whole = disk_triangle_moments(a, b, d, c, R);
      const DiskMoments rev = disk_triangle_moments(a, d, b, c, R);
      const DiskMoments h1 = disk_triangle_moments(a, b, mid, c, R);
      const DiskMoments h2 = disk_triangle_moments(a, mid, d, c, R);
      CHECK(whole.area >= -1e-15);
      CHECK(whole.area <= 0.5 * std::abs(cross(b - a, d - a)) + 1e-14);
      CHECK(whole.area <= pi * R * R + 1e-14);
      CHECK(rev.area == doctest::Approx(whole.area).epsilon(1e-12));
      CHECK(std::abs(h1.area + h2.area - whole.area) <= 1e-13);
      CHECK(std::abs(h1.moment.x + h2.moment.x - whole.moment.x) <= 1e-13);
      CHECK(std::abs(h1.moment.y + h2.moment.y - whole.moment.y) <= 1e-13);
    }
  }
}

TEST_CASE("violation metrics") {
  const MeshPtr m = std::make_shared<const Mesh>(unit_square_mesh(8));
  const StepProblem p = make_problem(m, 1e3, 2, PenaltyScheme::Lumped);
  auto ops = std::make_shared<const FemOperators>(m);
  const auto samples = default_ball_samples();
  CHECK(samples.size() == 75);
  SUBCASE("feasible state") {
    StepSolution sol;
    sol.phi = p.phi_prev;
    sol.mu = P1Function(m, 0.0);
    sol.status = NewtonStatus::Converged;
    const ViolationReport v = violation_report(p, *ops, sol, samples);
    CHECK(v.linf == 0.0);
    CHECK(v.l1 == 0.0);
    CHECK(v.structural_K == 0.0);
    CHECK(v.mass_error == 0.0);
  }
  SUBCASE("single violating vertex") {
    std::vector<double> phi(m->num_vertices(), 0.0);
    phi[40] = 1.5;
    StepSolution sol;
    sol.phi = P1Function(m, phi);
    sol.mu = P1Function(m, 0.0);
    sol.status = NewtonStatus::Converged;
    const ViolationReport v = violation_report(p, *ops, sol, samples);
    CHECK(v.linf == 0.5);
    // lambda is a pyramid of height 1/2 on the clipped star of vertex 40
    double ref = 0.0;
    for (std::size_t c = 0; c < m->num_cells(); ++c) {
      const auto vals = sol.phi.cell_values(static_cast<int>(c));
      const double area = m->geometry(static_cast<int>(c)).area;
      const auto o = oracle::exact_penalty_cell(vals);
      ref += area * (o[0] + o[1] + o[2]);
    }
    CHECK(v.l1 == doctest::Approx(ref).epsilon(1e-10));
  }
  SUBCASE("constant violation measures disk areas") {
    const P1Function two(m, 2.0);
    CHECK(violation_l1(two) == doctest::Approx(1.0).epsilon(1e-13));
    CHECK(violation_in_ball(two, {0.5, 0.5}, 0.2) == doctest::Approx(pi * 0.04).epsilon(1e-13));
    CHECK(violation_in_ball(two, {0.0, 0.0}, 0.2) == doctest::Approx(pi * 0.01).epsilon(1e-13));
    CHECK(violation_in_ball(two, {0.5, 0.5}, 1.0) == doctest::Approx(1.0).epsilon(1e-13));
  }
  SUBCASE("ball integral of an affine violation") {
    // phi = 2 + x: lambda = 1 + x, integral over the disk = (1 + cx) pi R^2
    const P1Function f = interpolate(m, [](Point x) { return 2.0 + x.x; });
    CHECK(violation_in_ball(f, {0.4, 0.6}, 0.1) == doctest::Approx(1.4 * pi * 0.01).epsilon(1e-13));
    CHECK(violation_l1(f) == doctest::Approx(1.5).epsilon(1e-13));
  }
}

TEST_CASE("sphere solution is invariant under the symmetries of the square") {
  const int n0 = 16;
  const MeshPtr m = std::make_shared<const Mesh>(unit_square_mesh(n0));
  std::map<std::pair<int, int>, std::size_t> index;
  for (std::size_t i = 0; i < m->num_vertices(); ++i) {
    const Point x = m->vertices()[i];
    index[{static_cast<int>(std::lround(x.x * n0)), static_cast<int>(std::lround(x.y * n0))}] = i;
  }
  const auto image = [&](std::size_t i, int which) {
    const int a = static_cast<int>(std::lround(m->vertices()[i].x * n0));
    const int b = static_cast<int>(std::lround(m->vertices()[i].y * n0));
    switch (which) {
      case 0: return index.at({n0 - a, b});
      case 1: return index.at({a, n0 - b});
      case 2: return index.at({b, a});
      default: return index.at({n0 - b, n0 - a});
    }
  };
  for (PenaltyScheme scheme : kSchemes) {
    const StepProblem p = make_problem(m, 1e2, 2, scheme);
    const StepSolution sol = solve_cold(p);
    REQUIRE(sol.converged());
    double worst = 0.0;
    for (int which = 0; which < 4; ++which) {
      for (std::size_t i = 0; i < m->num_vertices(); ++i) {
        worst = std::max(worst, std::abs(sol.phi.values[i] - sol.phi.values[image(i, which)]));
        worst = std::max(worst, std::abs(sol.mu.values[i] - sol.mu.values[image(i, which)]));
      }
    }
    CAPTURE(scheme_name(scheme));
    CHECK(worst <= 1e-8);
  }
}

TEST_CASE("converged solves conserve mass") {
  const MeshPtr m = small_mesh();
  const NewtonConfig cfg{};
  for (PenaltyScheme scheme : kSchemes) {
    for (double s : {1e2, 1e4}) {
      const StepProblem p = make_problem(m, s, 2, scheme);
      auto ops = std::make_shared<const FemOperators>(m);
      const StepSolution sol = newton_solve(StepSystem(p, ops), p.phi_prev, P1Function(m, 0.0), cfg);
      if (!sol.converged()) continue;
      const std::vector<double> one(m->num_vertices(), 1.0);
      std::vector<double> diff(m->num_vertices());
      for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = sol.phi.values[i] - p.phi_prev.values[i];
      CHECK(std::abs(quadratic_form(ops->mass, one, diff)) <= 10 * cfg.abs_tol);
      const ViolationReport v = violation_report(p, *ops, sol, default_ball_samples());
      CHECK(v.mass_error <= 10 * cfg.abs_tol);
    }
  }
}

TEST_CASE("step system caches agree with the convenience forms") {
  const MeshPtr m = small_mesh();
  const StepProblem p = make_problem(m, 40.0, 3, PenaltyScheme::Lumped);
  auto ops = std::make_shared<const FemOperators>(m);
  const StepSystem sys(p, ops);
  const auto phi = violating_state(p);
  std::mt19937_64 rng(3);
  const auto mu = oracle::random_vector(phi.size(), -1.0, 1.0, rng);
  const auto lin = sys.linearize(phi, mu);
  CHECK(lin.residual == residual(p, P1Function(m, phi), P1Function(m, mu)));
  CHECK(lin.jacobian.values() == jacobian(p, P1Function(m, phi)).values());
  CHECK(lin.jacobian.values() == sys.jacobian(phi).values());
}
