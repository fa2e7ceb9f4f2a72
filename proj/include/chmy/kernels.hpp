#pragma once

// Data-parallel inner loops: nodal penalty evaluation, lumped penalty
// assembly, CSR mat-vec and max-norm reductions. Each kernel has a scalar
// reference implementation and, on x86-64, an AVX2+FMA variant picked at
// runtime. The element-wise kernels are bit-identical across variants; the
// mat-vec differs only by summation order.

#include <cstddef>
#include <span>
#include <string_view>

namespace chmy::kernels {

enum class Isa { Scalar, Avx2 };

std::string_view isa_name(Isa isa);
bool isa_supported(Isa isa);

/// Best supported ISA, unless overridden by CHMY_ISA=scalar|avx2 in the
/// environment.
Isa default_isa();
Isa active_isa();
/// Throws std::invalid_argument when the ISA is unsupported on this CPU.
void set_isa(Isa isa);

struct CsrView {
  std::size_t rows = 0;
  const int* row_ptr = nullptr;
  const int* col_idx = nullptr;
  const double* values = nullptr;
};

struct KernelTable {
  /// y = A x
  void (*spmv)(const CsrView& a, const double* x, double* y);
  /// lam[i] = lambda_k(phi[i]), dlam[i] = lambda_k'(phi[i]) (0 on |phi| <= 1).
  void (*penalty_nodal)(std::size_t n, const double* phi, int k, double* lam, double* dlam);
  /// p[i] = s d[i] lambda_k(phi[i]), diag[i] = s d[i] lambda_k'(phi[i]).
  void (*lumped_penalty)(std::size_t n, const double* phi, const double* d, double s, int k,
                         double* p, double* diag);
  /// max_i |x[i]|; NaN if any entry is NaN.
  double (*max_abs)(std::size_t n, const double* x);
  /// max_i |lambda(phi[i])|; NaN if any entry is NaN.
  double (*max_violation)(std::size_t n, const double* phi);
};

const KernelTable& scalar_table();
/// Null when the AVX2 variant is not compiled in.
const KernelTable* avx2_table();
const KernelTable& table(Isa isa);
const KernelTable& active();

// Dispatching wrappers.
void spmv(const CsrView& a, std::span<const double> x, std::span<double> y);
void penalty_nodal(std::span<const double> phi, int k, std::span<double> lam,
                   std::span<double> dlam);
void lumped_penalty(std::span<const double> phi, std::span<const double> d, double s, int k,
                    std::span<double> p, std::span<double> diag);
double max_abs(std::span<const double> x);
double max_violation(std::span<const double> phi);

}  // namespace chmy::kernels
