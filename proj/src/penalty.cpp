#include "chmy/penalty.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <string>

#include "chmy/kernels.hpp"

namespace chmy {

std::string_view scheme_name(PenaltyScheme scheme) {
  switch (scheme) {
    case PenaltyScheme::Exact: return "exact";
    case PenaltyScheme::Interpolated: return "interpolated";
    case PenaltyScheme::Lumped: return "lumped";
  }
  return "unknown";
}

PenaltyScheme parse_scheme(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
  if (lower == "exact") return PenaltyScheme::Exact;
  if (lower == "interpolated" || lower == "interpolation") return PenaltyScheme::Interpolated;
  if (lower == "lumped" || lower == "lumping") return PenaltyScheme::Lumped;
  throw PenaltyError("unknown penalty scheme '" + std::string(name) + "'");
}

void check_compatible(PenaltyPower k, PenaltyScheme scheme) {
  if (scheme == PenaltyScheme::Exact && k.value() != 2) {
    throw PenaltyError("exact penalty integration is only available for k = 2");
  }
}

double lambda(double v) { return std::max(0.0, v - 1.0) + std::min(0.0, v + 1.0); }

double lambda_k(double v, PenaltyPower k) {
  const double l = lambda(v);
  const double mag = std::abs(l);
  double r = l;
  for (int j = 2; j < k.value(); ++j) r *= mag;
  return r;
}

double dlambda_k(double v, PenaltyPower k) {
  if (std::abs(v) <= 1.0) return 0.0;
  const double mag = std::abs(lambda(v));
  double r = static_cast<double>(k.value() - 1);
  for (int j = 2; j < k.value(); ++j) r *= mag;
  return r;
}

std::array<double, 3> exact_cell_penalty(const std::array<double, 3>& v) {
  std::array<double, 3> out{0.0, 0.0, 0.0};
  const ClipResult upper = clip_triangle(v, 1.0);
  const ClipResult lower = clip_triangle(v, -1.0);
  for (std::size_t i = 0; i < 3; ++i) {
    out[i] = integrate_quadratic(upper.above,
                                 [&](const std::array<double, 3>& b) { return (interpolate(v, b) - 1.0) * b[i]; }) +
             integrate_quadratic(lower.below,
                                 [&](const std::array<double, 3>& b) { return (interpolate(v, b) + 1.0) * b[i]; });
  }
  return out;
}

namespace {

// (1/|T|) * integral over {|phi_h| > 1} of beta_i beta_j.
std::array<double, 9> exact_cell_jacobian(const std::array<double, 3>& v) {
  std::array<double, 9> out{};
  const ClipResult upper = clip_triangle(v, 1.0);
  const ClipResult lower = clip_triangle(v, -1.0);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = i; j < 3; ++j) {
      auto f = [&](const std::array<double, 3>& b) { return b[i] * b[j]; };
      const double e = integrate_quadratic(upper.above, f) + integrate_quadratic(lower.below, f);
      out[3 * i + j] = e;
      out[3 * j + i] = e;
    }
  }
  return out;
}

bool cell_active(const std::array<double, 3>& v) {
  return std::abs(v[0]) > 1.0 || std::abs(v[1]) > 1.0 || std::abs(v[2]) > 1.0;
}

void check_inputs(const FemOperators& ops, std::span<const double> phi, double s, PenaltyPower k,
                  PenaltyScheme scheme) {
  check_compatible(k, scheme);
  if (phi.size() != ops.mesh->num_vertices()) {
    throw PenaltyError("penalty: phi length differs from vertex count");
  }
  if (!(s >= 0.0) || !std::isfinite(s)) throw PenaltyError("penalty: s must be finite and >= 0");
}

void exact_assembly(const FemOperators& ops, std::span<const double> phi, double s,
                    std::vector<double>* value, SparseMatrix* jac) {
  const Mesh& mesh = *ops.mesh;
  for (std::size_t c = 0; c < mesh.num_cells(); ++c) {
    const int ci = static_cast<int>(c);
    const auto& vid = mesh.cell(ci).v;
    const std::array<double, 3> v{phi[static_cast<std::size_t>(vid[0])], phi[static_cast<std::size_t>(vid[1])],
                                  phi[static_cast<std::size_t>(vid[2])]};
    if (!cell_active(v)) continue;
    const double w = s * mesh.geometry(ci).area;
    if (value) {
      const auto p = exact_cell_penalty(v);
      for (std::size_t i = 0; i < 3; ++i) (*value)[static_cast<std::size_t>(vid[i])] += w * p[i];
    }
    if (jac) {
      const auto e = exact_cell_jacobian(v);
      auto& val = jac->values();
      for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
          val[static_cast<std::size_t>(ops.pattern.slot(ci, i, j))] += w * e[static_cast<std::size_t>(3 * i + j)];
        }
      }
    }
  }
}

// M * diag(w) on the mass pattern.
SparseMatrix mass_times_diagonal(const SparseMatrix& m, std::span<const double> w, double s) {
  SparseMatrix r = m;
  auto& val = r.values();
  const auto& ptr = r.row_ptr();
  const auto& col = r.col_idx();
  for (std::size_t i = 0; i < r.rows(); ++i) {
    for (int p = ptr[i]; p < ptr[i + 1]; ++p) {
      const auto q = static_cast<std::size_t>(p);
      val[q] *= s * w[static_cast<std::size_t>(col[q])];
    }
  }
  return r;
}

SparseMatrix diagonal_on_pattern(const P1Pattern& pattern, std::span<const double> diag) {
  SparseMatrix r = pattern.zero();
  for (std::size_t i = 0; i < diag.size(); ++i) {
    r.values()[static_cast<std::size_t>(r.find(i, i))] = diag[i];
  }
  return r;
}

PenaltyEvaluation evaluate(const FemOperators& ops, std::span<const double> phi, double s,
                           PenaltyPower k, PenaltyScheme scheme, bool want_value, bool want_jac) {
  check_inputs(ops, phi, s, k, scheme);
  const std::size_t n = phi.size();
  PenaltyEvaluation out;
  switch (scheme) {
    case PenaltyScheme::Exact: {
      if (want_value) out.value.assign(n, 0.0);
      if (want_jac) out.jacobian = ops.pattern.zero();
      exact_assembly(ops, phi, s, want_value ? &out.value : nullptr, want_jac ? &out.jacobian : nullptr);
      break;
    }
    case PenaltyScheme::Interpolated: {
      std::vector<double> lam(n), dlam(n);
      kernels::penalty_nodal(phi, k.value(), lam, dlam);
      if (want_value) {
        out.value = ops.mass.multiply(lam);
        for (double& x : out.value) x *= s;
      }
      if (want_jac) out.jacobian = mass_times_diagonal(ops.mass, dlam, s);
      break;
    }
    case PenaltyScheme::Lumped: {
      std::vector<double> p(n), diag(n);
      kernels::lumped_penalty(phi, ops.lumped.d, s, k.value(), p, diag);
      if (want_value) out.value = std::move(p);
      if (want_jac) out.jacobian = diagonal_on_pattern(ops.pattern, diag);
      break;
    }
  }
  return out;
}

}  // namespace

std::vector<double> assemble_penalty_vector(const FemOperators& ops, std::span<const double> phi,
                                            double s, PenaltyPower k, PenaltyScheme scheme) {
  return evaluate(ops, phi, s, k, scheme, true, false).value;
}

SparseMatrix assemble_penalty_jacobian(const FemOperators& ops, std::span<const double> phi,
                                       double s, PenaltyPower k, PenaltyScheme scheme) {
  return evaluate(ops, phi, s, k, scheme, false, true).jacobian;
}

PenaltyEvaluation evaluate_penalty(const FemOperators& ops, std::span<const double> phi, double s,
                                   PenaltyPower k, PenaltyScheme scheme) {
  return evaluate(ops, phi, s, k, scheme, true, true);
}

}  // namespace chmy
