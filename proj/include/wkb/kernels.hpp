#pragma once

#include <complex>
#include <cstddef>

// Hot loops with a scalar reference body and an AVX2/FMA body.
// The active body is picked once from CPUID; force() pins one for testing.
namespace wkb::kernels {

using cplx = std::complex<double>;

enum class Isa { Scalar, Avx2 };

bool avx2_available();
Isa active();
void force(Isa isa);
void reset();
const char* name(Isa isa);

// y += a * x
void caxpy(std::size_t n, cplx a, const cplx* x, cplx* y);

// sum_i w_i |x_i|^2
double wnorm2(std::size_t n, const double* w, const cplx* x);

// sum_i w_i conj(x_i) y_i
cplx wdot(std::size_t n, const double* w, const cplx* x, const cplx* y);

// acc[i*nc + j] += s * et[i] * ex[j] * d[i*nc + j]
void phase_mac(std::size_t nr, std::size_t nc, cplx s, const cplx* et, const cplx* ex, const cplx* d, cplx* acc);

// Periodic fourth-order central difference of a row-major nr x nc array.
// fd4_rows differentiates across rows (slow index), fd4_cols along a row.
void fd4_rows(std::size_t nr, std::size_t nc, double h, const cplx* x, cplx* y);
void fd4_cols(std::size_t nr, std::size_t nc, double h, const cplx* x, cplx* y);

namespace scalar {
void caxpy(std::size_t n, cplx a, const cplx* x, cplx* y);
double wnorm2(std::size_t n, const double* w, const cplx* x);
cplx wdot(std::size_t n, const double* w, const cplx* x, const cplx* y);
void phase_mac(std::size_t nr, std::size_t nc, cplx s, const cplx* et, const cplx* ex, const cplx* d, cplx* acc);
void fd4_rows(std::size_t nr, std::size_t nc, double h, const cplx* x, cplx* y);
void fd4_cols(std::size_t nr, std::size_t nc, double h, const cplx* x, cplx* y);
}  // namespace scalar

namespace avx2 {
void caxpy(std::size_t n, cplx a, const cplx* x, cplx* y);
double wnorm2(std::size_t n, const double* w, const cplx* x);
cplx wdot(std::size_t n, const double* w, const cplx* x, const cplx* y);
void phase_mac(std::size_t nr, std::size_t nc, cplx s, const cplx* et, const cplx* ex, const cplx* d, cplx* acc);
void fd4_rows(std::size_t nr, std::size_t nc, double h, const cplx* x, cplx* y);
void fd4_cols(std::size_t nr, std::size_t nc, double h, const cplx* x, cplx* y);
}  // namespace avx2

}  // namespace wkb::kernels
