#pragma once

#include <algorithm>
#include <vector>

#include "wkb/types.hpp"

namespace wkb {

// Exponents e^{i lambda x} interned by value; nearly equal values share one id.
struct ExpTable {
  std::vector<cplx> lam;
  double tol = 1e-10;
  int intern(cplx l);
};

// Finite sum of c x^p e^{i lambda_id x}.
template <class T>
struct XPoly {
  struct Term {
    int id;
    int pow;
    T c;
  };
  std::vector<Term> terms;
  bool empty() const { return terms.empty(); }
};

using XSc = XPoly<cplx>;
using XVec = XPoly<Vec3c>;

inline double abs2(cplx c) { return std::norm(c); }
inline double abs2(const Vec3c& v) { return v.squaredNorm(); }

template <class T>
void compress(XPoly<T>& p, double drop = 0.0) {
  auto& t = p.terms;
  std::sort(t.begin(), t.end(), [](const auto& a, const auto& b) { return a.id != b.id ? a.id < b.id : a.pow < b.pow; });
  std::size_t w = 0;
  for (std::size_t i = 0; i < t.size();) {
    auto acc = t[i];
    std::size_t j = i + 1;
    while (j < t.size() && t[j].id == acc.id && t[j].pow == acc.pow) acc.c += t[j++].c;
    if (abs2(acc.c) > drop * drop) t[w++] = acc;
    i = j;
  }
  t.resize(w);
}

template <class T>
void add_into(XPoly<T>& y, const XPoly<T>& x, cplx s) {
  for (const auto& tm : x.terms) y.terms.push_back({tm.id, tm.pow, T(s * tm.c)});
  compress(y);
}

template <class T>
double norm2(const XPoly<T>& p) {
  double s = 0;
  for (const auto& t : p.terms) s += abs2(t.c);
  return s;
}

template <class T>
XPoly<T> scaled(const XPoly<T>& p, cplx s) {
  XPoly<T> out = p;
  for (auto& t : out.terms) t.c *= s;
  return out;
}

inline XVec mat_apply(const Mat3c& A, const XVec& x) {
  XVec out;
  out.terms.reserve(x.terms.size());
  for (const auto& t : x.terms) out.terms.push_back({t.id, t.pow, A * t.c});
  return out;
}

XSc dot(const Eigen::RowVector3cd& l, const XVec& x);
XVec outer(const Vec3c& r, const XSc& s);
XSc component(const XVec& x, int i);

template <class T>
T eval(const XPoly<T>& p, const ExpTable& tab, double x) {
  T s = p.terms.empty() ? T() : T(p.terms[0].c * 0.0);
  for (const auto& t : p.terms) s += t.c * (std::pow(x, t.pow) * std::exp(I * tab.lam[t.id] * x));
  return s;
}

// Value at x = 0.
template <class T>
T trace(const XPoly<T>& p) {
  T s = p.terms.empty() ? T() : T(p.terms[0].c * 0.0);
  for (const auto& t : p.terms)
    if (t.pow == 0) s += t.c;
  return s;
}

template <class T>
XPoly<T> deriv(const XPoly<T>& p, const ExpTable& tab) {
  XPoly<T> out;
  for (const auto& t : p.terms) {
    out.terms.push_back({t.id, t.pow, T(I * tab.lam[t.id] * t.c)});
    if (t.pow > 0) out.terms.push_back({t.id, t.pow - 1, T(double(t.pow) * t.c)});
  }
  compress(out);
  return out;
}

// int_0^x e^{i lam (x - s)} f(s) ds
XSc integrate_in(int lam_id, const XSc& f, const ExpTable& tab, double x2max);
// -int_x^inf e^{i lam (x - s)} f(s) ds; needs Im(mu - lam) > 0 for every exponent mu of f.
XSc integrate_out(int lam_id, const XSc& f, const ExpTable& tab);

struct ExpTerm {
  cplx mu;
  int pow;
  Vec3c c;
};

// int_0^inf |sum c x^pow e^{i mu x}|^2 dx in closed form; every term needs Im mu > 0.
double gram_norm2(const std::vector<ExpTerm>& terms);
double half_line_norm2(const XVec& p, const ExpTable& tab);

}  // namespace wkb
