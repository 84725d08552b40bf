#include <atomic>
#include <cstdlib>
#include <cstring>

#include "wkb/kernels.hpp"

namespace wkb::kernels {

namespace {

Isa detect() {
  const char* env = std::getenv("WKB_ISA");
  if (env && std::strcmp(env, "scalar") == 0) return Isa::Scalar;
  return avx2_available() ? Isa::Avx2 : Isa::Scalar;
}

std::atomic<Isa>& current() {
  static std::atomic<Isa> isa{detect()};
  return isa;
}

}  // namespace

bool avx2_available() {
#if defined(__x86_64__) || defined(__i386__)
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Isa active() { return current().load(); }

void force(Isa isa) {
  if (isa == Isa::Avx2 && !avx2_available()) isa = Isa::Scalar;
  current().store(isa);
}

void reset() { current().store(detect()); }

const char* name(Isa isa) { return isa == Isa::Avx2 ? "avx2" : "scalar"; }

#define WKB_DISPATCH(fn, ...) \
  (active() == Isa::Avx2 ? avx2::fn(__VA_ARGS__) : scalar::fn(__VA_ARGS__))

void caxpy(std::size_t n, cplx a, const cplx* x, cplx* y) { WKB_DISPATCH(caxpy, n, a, x, y); }
double wnorm2(std::size_t n, const double* w, const cplx* x) { return WKB_DISPATCH(wnorm2, n, w, x); }
cplx wdot(std::size_t n, const double* w, const cplx* x, const cplx* y) { return WKB_DISPATCH(wdot, n, w, x, y); }
void phase_mac(std::size_t nr, std::size_t nc, cplx s, const cplx* et, const cplx* ex, const cplx* d, cplx* acc) {
  WKB_DISPATCH(phase_mac, nr, nc, s, et, ex, d, acc);
}
void fd4_rows(std::size_t nr, std::size_t nc, double h, const cplx* x, cplx* y) { WKB_DISPATCH(fd4_rows, nr, nc, h, x, y); }
void fd4_cols(std::size_t nr, std::size_t nc, double h, const cplx* x, cplx* y) { WKB_DISPATCH(fd4_cols, nr, nc, h, x, y); }

#undef WKB_DISPATCH

}  // namespace wkb::kernels
