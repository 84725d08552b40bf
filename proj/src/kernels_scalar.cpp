#include "wkb/kernels.hpp"

namespace wkb::kernels::scalar {

void caxpy(std::size_t n, cplx a, const cplx* x, cplx* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

double wnorm2(std::size_t n, const double* w, const cplx* x) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += w[i] * std::norm(x[i]);
  return s;
}

cplx wdot(std::size_t n, const double* w, const cplx* x, const cplx* y) {
  cplx s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += w[i] * std::conj(x[i]) * y[i];
  return s;
}

void phase_mac(std::size_t nr, std::size_t nc, cplx s, const cplx* et, const cplx* ex, const cplx* d, cplx* acc) {
  for (std::size_t i = 0; i < nr; ++i) {
    const cplx si = s * et[i];
    for (std::size_t j = 0; j < nc; ++j) acc[i * nc + j] += si * ex[j] * d[i * nc + j];
  }
}

void fd4_rows(std::size_t nr, std::size_t nc, double h, const cplx* x, cplx* y) {
  const double c1 = 8.0 / (12.0 * h), c2 = 1.0 / (12.0 * h);
  for (std::size_t i = 0; i < nr; ++i) {
    const cplx* p1 = x + ((i + 1) % nr) * nc;
    const cplx* p2 = x + ((i + 2) % nr) * nc;
    const cplx* m1 = x + ((i + nr - 1) % nr) * nc;
    const cplx* m2 = x + ((i + nr - 2) % nr) * nc;
    cplx* out = y + i * nc;
    for (std::size_t j = 0; j < nc; ++j) out[j] = c1 * (p1[j] - m1[j]) - c2 * (p2[j] - m2[j]);
  }
}

void fd4_cols(std::size_t nr, std::size_t nc, double h, const cplx* x, cplx* y) {
  const double c1 = 8.0 / (12.0 * h), c2 = 1.0 / (12.0 * h);
  for (std::size_t i = 0; i < nr; ++i) {
    const cplx* row = x + i * nc;
    cplx* out = y + i * nc;
    for (std::size_t j = 0; j < nc; ++j) {
      const cplx p1 = row[(j + 1) % nc], p2 = row[(j + 2) % nc];
      const cplx m1 = row[(j + nc - 1) % nc], m2 = row[(j + nc - 2) % nc];
      out[j] = c1 * (p1 - m1) - c2 * (p2 - m2);
    }
  }
}

}  // namespace wkb::kernels::scalar
