#include <immintrin.h>

#include "wkb/kernels.hpp"

namespace wkb::kernels::avx2 {

namespace {

inline __m256d load2(const cplx* p) { return _mm256_loadu_pd(reinterpret_cast<const double*>(p)); }
inline void store2(cplx* p, __m256d v) { _mm256_storeu_pd(reinterpret_cast<double*>(p), v); }

// (ar + i ai) * v for two packed complex numbers
inline __m256d cmul_s(__m256d ar, __m256d ai, __m256d v) {
  const __m256d vs = _mm256_permute_pd(v, 0x5);
  return _mm256_fmaddsub_pd(ar, v, _mm256_mul_pd(ai, vs));
}

inline __m256d cmul_v(__m256d u, __m256d v) {
  const __m256d vr = _mm256_movedup_pd(v);
  const __m256d vi = _mm256_permute_pd(v, 0xF);
  const __m256d us = _mm256_permute_pd(u, 0x5);
  return _mm256_fmaddsub_pd(u, vr, _mm256_mul_pd(us, vi));
}

inline __m256d wdup(const double* w) {
  const __m256d t = _mm256_castpd128_pd256(_mm_loadu_pd(w));
  return _mm256_permute4x64_pd(t, 0x50);
}

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

}  // namespace

void caxpy(std::size_t n, cplx a, const cplx* x, cplx* y) {
  const __m256d ar = _mm256_set1_pd(a.real()), ai = _mm256_set1_pd(a.imag());
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) store2(y + i, _mm256_add_pd(load2(y + i), cmul_s(ar, ai, load2(x + i))));
  for (; i < n; ++i) y[i] += a * x[i];
}

double wnorm2(std::size_t n, const double* w, const cplx* x) {
  __m256d acc0 = _mm256_setzero_pd(), acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d x0 = load2(x + i), x1 = load2(x + i + 2);
    acc0 = _mm256_fmadd_pd(_mm256_mul_pd(wdup(w + i), x0), x0, acc0);
    acc1 = _mm256_fmadd_pd(_mm256_mul_pd(wdup(w + i + 2), x1), x1, acc1);
  }
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += w[i] * std::norm(x[i]);
  return s;
}

cplx wdot(std::size_t n, const double* w, const cplx* x, const cplx* y) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const __m256d xv = load2(x + i), yv = load2(y + i);
    const __m256d xr = _mm256_movedup_pd(xv), xi = _mm256_permute_pd(xv, 0xF);
    const __m256d ys = _mm256_permute_pd(yv, 0x5);
    const __m256d p = _mm256_fmsubadd_pd(xr, yv, _mm256_mul_pd(xi, ys));
    acc = _mm256_fmadd_pd(wdup(w + i), p, acc);
  }
  alignas(32) double t[4];
  _mm256_store_pd(t, acc);
  cplx s(t[0] + t[2], t[1] + t[3]);
  for (; i < n; ++i) s += w[i] * std::conj(x[i]) * y[i];
  return s;
}

void phase_mac(std::size_t nr, std::size_t nc, cplx s, const cplx* et, const cplx* ex, const cplx* d, cplx* acc) {
  for (std::size_t i = 0; i < nr; ++i) {
    const cplx si = s * et[i];
    const __m256d ar = _mm256_set1_pd(si.real()), ai = _mm256_set1_pd(si.imag());
    const cplx* drow = d + i * nc;
    cplx* arow = acc + i * nc;
    std::size_t j = 0;
    for (; j + 2 <= nc; j += 2) {
      const __m256d t = cmul_v(load2(ex + j), load2(drow + j));
      store2(arow + j, _mm256_add_pd(load2(arow + j), cmul_s(ar, ai, t)));
    }
    for (; j < nc; ++j) arow[j] += si * ex[j] * drow[j];
  }
}

void fd4_rows(std::size_t nr, std::size_t nc, double h, const cplx* x, cplx* y) {
  const double c1 = 8.0 / (12.0 * h), c2 = 1.0 / (12.0 * h);
  const __m256d v1 = _mm256_set1_pd(c1), v2 = _mm256_set1_pd(c2);
  for (std::size_t i = 0; i < nr; ++i) {
    const cplx* p1 = x + ((i + 1) % nr) * nc;
    const cplx* p2 = x + ((i + 2) % nr) * nc;
    const cplx* m1 = x + ((i + nr - 1) % nr) * nc;
    const cplx* m2 = x + ((i + nr - 2) % nr) * nc;
    cplx* out = y + i * nc;
    std::size_t j = 0;
    for (; j + 2 <= nc; j += 2) {
      const __m256d a = _mm256_sub_pd(load2(p1 + j), load2(m1 + j));
      const __m256d b = _mm256_sub_pd(load2(p2 + j), load2(m2 + j));
      store2(out + j, _mm256_fmsub_pd(v1, a, _mm256_mul_pd(v2, b)));
    }
    for (; j < nc; ++j) out[j] = c1 * (p1[j] - m1[j]) - c2 * (p2[j] - m2[j]);
  }
}

void fd4_cols(std::size_t nr, std::size_t nc, double h, const cplx* x, cplx* y) {
  const double c1 = 8.0 / (12.0 * h), c2 = 1.0 / (12.0 * h);
  const __m256d v1 = _mm256_set1_pd(c1), v2 = _mm256_set1_pd(c2);
  auto edge = [&](const cplx* row, cplx* out, std::size_t j) {
    const cplx p1 = row[(j + 1) % nc], p2 = row[(j + 2) % nc];
    const cplx m1 = row[(j + nc - 1) % nc], m2 = row[(j + nc - 2) % nc];
    out[j] = c1 * (p1 - m1) - c2 * (p2 - m2);
  };
  for (std::size_t i = 0; i < nr; ++i) {
    const cplx* row = x + i * nc;
    cplx* out = y + i * nc;
    std::size_t j = 0;
    for (; j < 2 && j < nc; ++j) edge(row, out, j);
    for (; j + 3 < nc; j += 2) {
      const __m256d a = _mm256_sub_pd(load2(row + j + 1), load2(row + j - 1));
      const __m256d b = _mm256_sub_pd(load2(row + j + 2), load2(row + j - 2));
      store2(out + j, _mm256_fmsub_pd(v1, a, _mm256_mul_pd(v2, b)));
    }
    for (; j < nc; ++j) edge(row, out, j);
  }
}

}  // namespace wkb::kernels::avx2
