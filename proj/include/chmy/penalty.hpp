#pragma once

#include <span>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "chmy/clip.hpp"
#include "chmy/fem.hpp"

namespace chmy {

class PenaltyError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Exponent k of the penalty lambda_k = lambda |lambda|^(k-2). Supported: 2..4.
class PenaltyPower {
 public:
  static constexpr int kMin = 2;
  static constexpr int kMax = 4;

  constexpr PenaltyPower() = default;
  explicit PenaltyPower(int k) : k_(k) {
    if (k < kMin || k > kMax) throw PenaltyError("penalty power must be in {2, 3, 4}");
  }
  constexpr int value() const { return k_; }
  friend constexpr bool operator==(PenaltyPower, PenaltyPower) = default;

 private:
  int k_ = 2;
};

/// How the penalty form (s lambda(phi_h), v) is evaluated.
///  Exact        - exact integration of the piecewise-affine lambda(phi_h)
///  Interpolated - (s I(lambda_k(phi_h)), v), nodal interpolant times mass
///  Lumped       - mass-lumped quadrature sum_i d_i s lambda_k(phi_i) v_i
enum class PenaltyScheme { Exact, Interpolated, Lumped };

std::string_view scheme_name(PenaltyScheme scheme);
/// Accepts "exact", "interpolated", "lumped" (case-insensitive).
PenaltyScheme parse_scheme(std::string_view name);

/// Throws PenaltyError for Exact with k != 2.
void check_compatible(PenaltyPower k, PenaltyScheme scheme);

/// max(0, v - 1) + min(0, v + 1)
double lambda(double v);
double lambda_k(double v, PenaltyPower k);
/// Generalized derivative; zero for |v| <= 1 (including the kinks).
double dlambda_k(double v, PenaltyPower k);

std::vector<double> assemble_penalty_vector(const FemOperators& ops, std::span<const double> phi,
                                            double s, PenaltyPower k, PenaltyScheme scheme);

/// dP/dphi on the P1 sparsity pattern of the mesh.
SparseMatrix assemble_penalty_jacobian(const FemOperators& ops, std::span<const double> phi,
                                       double s, PenaltyPower k, PenaltyScheme scheme);

struct PenaltyEvaluation {
  std::vector<double> value;
  SparseMatrix jacobian;
};

/// Vector and Jacobian in one pass.
PenaltyEvaluation evaluate_penalty(const FemOperators& ops, std::span<const double> phi, double s,
                                   PenaltyPower k, PenaltyScheme scheme);

/// Exact value of (1/|T|) * integral over T of lambda(phi_h) * beta_i for the
/// three barycentric coordinates beta_i of a triangle with nodal values `v`.
std::array<double, 3> exact_cell_penalty(const std::array<double, 3>& v);

}  // namespace chmy
