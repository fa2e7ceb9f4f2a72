#include <algorithm>
#include <cmath>
#include <limits>

#include "chmy/kernels.hpp"

namespace chmy::kernels {

namespace {

void spmv(const CsrView& a, const double* x, double* y) {
  for (std::size_t i = 0; i < a.rows; ++i) {
    double sum = 0.0;
    for (int p = a.row_ptr[i]; p < a.row_ptr[i + 1]; ++p) {
      sum += a.values[p] * x[a.col_idx[p]];
    }
    y[i] = sum;
  }
}

inline double violation(double v) { return std::max(0.0, v - 1.0) + std::min(0.0, v + 1.0); }

inline double power_k(double lam, int k) {
  const double mag = std::abs(lam);
  double r = lam;
  for (int j = 2; j < k; ++j) r *= mag;
  return r;
}

inline double dpower_k(double v, double lam, int k) {
  const double mag = std::abs(lam);
  double r = static_cast<double>(k - 1);
  for (int j = 2; j < k; ++j) r *= mag;
  return std::abs(v) > 1.0 ? r : 0.0;
}

void penalty_nodal(std::size_t n, const double* phi, int k, double* lam, double* dlam) {
  for (std::size_t i = 0; i < n; ++i) {
    const double l = violation(phi[i]);
    lam[i] = power_k(l, k);
    dlam[i] = dpower_k(phi[i], l, k);
  }
}

void lumped_penalty(std::size_t n, const double* phi, const double* d, double s, int k, double* p,
                    double* diag) {
  for (std::size_t i = 0; i < n; ++i) {
    const double l = violation(phi[i]);
    const double w = s * d[i];
    p[i] = w * power_k(l, k);
    diag[i] = w * dpower_k(phi[i], l, k);
  }
}

double max_abs(std::size_t n, const double* x) {
  double m = 0.0;
  bool nan = false;
  for (std::size_t i = 0; i < n; ++i) {
    nan |= std::isnan(x[i]);
    m = std::max(m, std::abs(x[i]));
  }
  return nan ? std::numeric_limits<double>::quiet_NaN() : m;
}

double max_violation(std::size_t n, const double* phi) {
  double m = 0.0;
  bool nan = false;
  for (std::size_t i = 0; i < n; ++i) {
    nan |= std::isnan(phi[i]);
    m = std::max(m, std::abs(violation(phi[i])));
  }
  return nan ? std::numeric_limits<double>::quiet_NaN() : m;
}

}  // namespace

const KernelTable& scalar_table() {
  static const KernelTable t{&spmv, &penalty_nodal, &lumped_penalty, &max_abs, &max_violation};
  return t;
}

}  // namespace chmy::kernels
