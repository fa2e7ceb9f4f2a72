#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "chmy/kernels.hpp"

namespace chmy::kernels {

#ifndef CHMY_HAVE_AVX2
const KernelTable* avx2_table() { return nullptr; }
#endif

namespace {

bool cpu_has_avx2() {
#if defined(CHMY_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Isa detect() {
  if (const char* env = std::getenv("CHMY_ISA")) {
    const std::string want(env);
    if (want == "scalar") return Isa::Scalar;
    if (want == "avx2" && isa_supported(Isa::Avx2)) return Isa::Avx2;
  }
  return isa_supported(Isa::Avx2) ? Isa::Avx2 : Isa::Scalar;
}

std::atomic<Isa>& current() {
  static std::atomic<Isa> isa{detect()};
  return isa;
}

}  // namespace

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::Scalar: return "scalar";
    case Isa::Avx2: return "avx2";
  }
  return "unknown";
}

bool isa_supported(Isa isa) {
  if (isa == Isa::Scalar) return true;
  static const bool avx2 = avx2_table() != nullptr && cpu_has_avx2();
  return avx2;
}

Isa default_isa() { return detect(); }

Isa active_isa() { return current().load(std::memory_order_relaxed); }

void set_isa(Isa isa) {
  if (!isa_supported(isa)) {
    throw std::invalid_argument("instruction set not supported: " + std::string(isa_name(isa)));
  }
  current().store(isa, std::memory_order_relaxed);
}

const KernelTable& table(Isa isa) {
  if (isa == Isa::Avx2 && isa_supported(Isa::Avx2)) return *avx2_table();
  return scalar_table();
}

const KernelTable& active() { return table(active_isa()); }

namespace {
void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}
}  // namespace

void spmv(const CsrView& a, std::span<const double> x, std::span<double> y) {
  require(y.size() == a.rows, "spmv: output length mismatch");
  active().spmv(a, x.data(), y.data());
}

void penalty_nodal(std::span<const double> phi, int k, std::span<double> lam,
                   std::span<double> dlam) {
  require(lam.size() == phi.size() && dlam.size() == phi.size(), "penalty_nodal: length mismatch");
  active().penalty_nodal(phi.size(), phi.data(), k, lam.data(), dlam.data());
}

void lumped_penalty(std::span<const double> phi, std::span<const double> d, double s, int k,
                    std::span<double> p, std::span<double> diag) {
  require(d.size() == phi.size() && p.size() == phi.size() && diag.size() == phi.size(),
          "lumped_penalty: length mismatch");
  active().lumped_penalty(phi.size(), phi.data(), d.data(), s, k, p.data(), diag.data());
}

double max_abs(std::span<const double> x) { return active().max_abs(x.size(), x.data()); }

double max_violation(std::span<const double> phi) {
  return active().max_violation(phi.size(), phi.data());
}

}  // namespace chmy::kernels
