#include "wkb/xpoly.hpp"

#include <cmath>

namespace wkb {

int ExpTable::intern(cplx l) {
  const double scale = tol * (1.0 + std::abs(l));
  for (std::size_t i = 0; i < lam.size(); ++i)
    if (std::abs(lam[i] - l) <= scale) return static_cast<int>(i);
  lam.push_back(l);
  return static_cast<int>(lam.size()) - 1;
}

XSc dot(const Eigen::RowVector3cd& l, const XVec& x) {
  XSc out;
  out.terms.reserve(x.terms.size());
  for (const auto& t : x.terms) out.terms.push_back({t.id, t.pow, (l * t.c)(0)});
  return out;
}

XVec outer(const Vec3c& r, const XSc& s) {
  XVec out;
  out.terms.reserve(s.terms.size());
  for (const auto& t : s.terms) out.terms.push_back({t.id, t.pow, Vec3c(r * t.c)});
  return out;
}

XSc component(const XVec& x, int i) {
  XSc out;
  for (const auto& t : x.terms) out.terms.push_back({t.id, t.pow, t.c(i)});
  return out;
}

namespace {

double fact(int n) { return std::tgamma(n + 1.0); }

}  // namespace

XSc integrate_in(int lam_id, const XSc& f, const ExpTable& tab, double x2max) {
  XSc out;
  const cplx lam = tab.lam[lam_id];
  for (const auto& t : f.terms) {
    const int p = t.pow;
    if (t.id == lam_id) {
      out.terms.push_back({lam_id, p + 1, t.c / double(p + 1)});
      continue;
    }
    const cplx D = I * (tab.lam[t.id] - lam);
    if (std::abs(D) * x2max < 1.0) {
      // e^{i lam x} sum_n D^n x^{p+n+1} / (n! (p+n+1))
      cplx Dn = 1.0;
      double nf = 1.0;
      for (int n = 0; n < 60; ++n) {
        if (n > 0) {
          Dn *= D;
          nf *= n;
        }
        const cplx c = t.c * Dn / (nf * (p + n + 1));
        out.terms.push_back({lam_id, p + n + 1, c});
        if (std::abs(Dn) * std::pow(x2max, n + p + 1) / nf < 1e-18 * std::max(1.0, std::pow(x2max, p + 1))) break;
      }
      continue;
    }
    cplx Dq = D;
    for (int q = 0; q <= p; ++q) {
      const double sgn = (q % 2 == 0) ? 1.0 : -1.0;
      out.terms.push_back({t.id, p - q, t.c * sgn * fact(p) / fact(p - q) / Dq});
      Dq *= D;
    }
    const double sgnp = (p % 2 == 0) ? 1.0 : -1.0;
    out.terms.push_back({lam_id, 0, -t.c * sgnp * fact(p) / (Dq / D)});
  }
  compress(out);
  return out;
}

XSc integrate_out(int lam_id, const XSc& f, const ExpTable& tab) {
  XSc out;
  const cplx lam = tab.lam[lam_id];
  for (const auto& t : f.terms) {
    const int p = t.pow;
    const cplx D = I * (tab.lam[t.id] - lam);
    if (!(D.real() < 0.0)) throw compute_error("DivergentIntegral", "source does not decay against the outgoing exponent");
    cplx Dq = D;
    for (int q = 0; q <= p; ++q) {
      const double sgn = (q % 2 == 0) ? 1.0 : -1.0;
      out.terms.push_back({t.id, p - q, t.c * sgn * fact(p) / fact(p - q) / Dq});
      Dq *= D;
    }
  }
  compress(out);
  return out;
}

double gram_norm2(const std::vector<ExpTerm>& terms) {
  double s = 0.0;
  const std::size_t n = terms.size();
  for (std::size_t i = 0; i < n; ++i) {
    const ExpTerm& a = terms[i];
    const cplx ma = std::conj(a.mu);
    for (std::size_t j = i; j < n; ++j) {
      const ExpTerm& b = terms[j];
      const cplx D = I * (b.mu - ma);
      if (!(D.real() < 0.0)) throw compute_error("DivergentIntegral", "non-decaying term on the half line");
      const int p = a.pow + b.pow;
      const cplx inv = -1.0 / D;
      cplx v = inv;
      for (int q = 1; q <= p; ++q) v *= inv * double(q);
      const double g = (a.c.dot(b.c) * v).real();
      s += (i == j) ? g : 2.0 * g;
    }
  }
  return s;
}

double half_line_norm2(const XVec& p, const ExpTable& tab) {
  std::vector<ExpTerm> t;
  t.reserve(p.terms.size());
  for (const auto& x : p.terms) t.push_back({tab.lam[x.id], x.pow, x.c});
  return gram_norm2(t);
}

}  // namespace wkb
