#pragma once

#include <array>
#include <compare>
#include <map>
#include <string>
#include <vector>

#include "wkb/phase.hpp"
#include "wkb/xpoly.hpp"

namespace wkb {

// Fourier label on the torus: mean, pure theta_m mode n, or noncharacteristic (k, l) in (theta2, theta3).
struct ModeKey {
  enum Kind : int { Mean = 0, Pure1 = 1, Pure2 = 2, Pure3 = 3, Nc = 4 };
  int kind = Mean;
  int a = 0;
  int b = 0;

  static ModeKey mean() { return {Mean, 0, 0}; }
  static ModeKey pure(int m, int n) { return {m, n, 0}; }
  static ModeKey nc(int k, int l) { return {Nc, k, l}; }
  bool is_pure() const { return kind >= Pure1 && kind <= Pure3; }
  // theta0 mode of the x2 = 0 trace
  int trace_mode() const { return kind == Nc ? a + b : a; }
  auto operator<=>(const ModeKey&) const = default;
  std::string str() const;
};

// 3-vector field sampled on grid points, one column per point.
struct GridField {
  Eigen::Matrix<cplx, 3, Eigen::Dynamic> v;
};

inline GridField mat_apply(const Mat3c& A, const GridField& x) { return {A * x.v}; }
inline void add_into(GridField& y, const GridField& x, cplx s) {
  if (y.v.cols() == 0) y.v = Eigen::Matrix<cplx, 3, Eigen::Dynamic>::Zero(3, x.v.cols());
  y.v += s * x.v;
}
inline double norm2(const GridField& x) { return x.v.squaredNorm(); }
inline GridField conj_field(const GridField& x) { return {x.v.conjugate()}; }

template <class C>
struct Profile {
  std::map<ModeKey, C> modes;

  C& operator[](const ModeKey& k) { return modes[k]; }
  const C* find(const ModeKey& k) const {
    auto it = modes.find(k);
    return it == modes.end() ? nullptr : &it->second;
  }
  void add(const ModeKey& k, const C& x, cplx s = 1.0) { add_into(modes[k], x, s); }
  double norm2() const {
    double s = 0;
    for (const auto& [k, c] : modes) s += wkb::norm2(c);
    return s;
  }
};

template <class C>
Profile<C> axpy(const Profile<C>& x, const Profile<C>& y, cplx s) {
  Profile<C> out = y;
  for (const auto& [k, c] : x.modes) out.add(k, c, s);
  return out;
}

struct ProjectorKit {
  VecR omega;
  Eigen::Vector2d beta{0, 0};
  Mat3c r, ell, B2;
  std::array<Mat3c, 3> P, Q, R, L;  // L[m] = L(dphi_m)

  // L(k dphi_2 + l dphi_3) and its closed-form inverse
  Mat3c L_nc(int k, int l) const;
  Mat3c Linv_nc(int k, int l) const;
  // L(d) on a mode label, without the factor i
  Mat3c L_mode(const ModeKey& key) const;
};

ProjectorKit build_projectors(const HyperbolicSystem& sys, const PhaseSet& ph);

struct Caps {
  int K_pure = 32;
  int K_nc = 16;
  bool within(const ModeKey& k) const {
    if (k.kind == ModeKey::Mean) return true;
    if (k.is_pure()) return std::abs(k.a) <= K_pure;
    return std::abs(k.a) <= K_nc && std::abs(k.b) <= K_nc;
  }
};

struct ClipStats {
  double clipped = 0.0;
  double total = 0.0;
  int count = 0;
  double ratio() const { return total > 0 ? clipped / total : 0.0; }
};

template <class C>
Profile<C> apply_EP(const ProjectorKit& kit, const Profile<C>& U) {
  Profile<C> out;
  for (const auto& [k, c] : U.modes) {
    if (k.kind == ModeKey::Mean)
      out.modes[k] = c;
    else if (k.is_pure())
      out.modes[k] = mat_apply(kit.P[k.kind - 1], c);
  }
  return out;
}

template <class C>
Profile<C> apply_EQ(const ProjectorKit& kit, const Profile<C>& U) {
  Profile<C> out;
  for (const auto& [k, c] : U.modes) {
    if (k.kind == ModeKey::Mean)
      out.modes[k] = c;
    else if (k.is_pure())
      out.modes[k] = mat_apply(kit.Q[k.kind - 1], c);
  }
  return out;
}

template <class C>
Profile<C> apply_R(const ProjectorKit& kit, const Profile<C>& U) {
  Profile<C> out;
  for (const auto& [k, c] : U.modes) {
    if (k.kind == ModeKey::Mean) continue;
    if (k.is_pure())
      out.modes[k] = mat_apply(kit.R[k.kind - 1] / (I * double(k.a)), c);
    else
      out.modes[k] = mat_apply(kit.Linv_nc(k.a, k.b) / I, c);
  }
  return out;
}

template <class C>
Profile<C> apply_Ltheta(const ProjectorKit& kit, const Profile<C>& U) {
  Profile<C> out;
  for (const auto& [k, c] : U.modes) {
    if (k.kind == ModeKey::Mean) continue;
    out.modes[k] = mat_apply(I * kit.L_mode(k), c);
  }
  return out;
}

// Label of e^{i s theta3} times the mode; throws SpectrumViolation for theta1 modes.
ModeKey shift_theta3(const ModeKey& k, int s);

// sum over s in spectrum of e^{i s theta3} M U, clipping labels outside the caps.
template <class C>
Profile<C> multiply_osc(const Profile<C>& U, const std::vector<int>& spectrum, const Mat3c& M, const Caps& caps,
                        ClipStats* stats = nullptr) {
  Profile<C> out;
  for (const auto& [k, c] : U.modes) {
    if (k.kind == ModeKey::Pure1) {
      if (wkb::norm2(c) == 0.0) continue;
      throw compute_error("SpectrumViolation", "theta1 mode under theta3 multiplication");
    }
    const C mc = mat_apply(M, c);
    for (int s : spectrum) {
      const ModeKey t = shift_theta3(k, s);
      const double n2 = wkb::norm2(mc);
      if (stats) stats->total += n2;
      if (!caps.within(t)) {
        if (stats) {
          stats->clipped += n2;
          if (n2 > 0) ++stats->count;
        }
        continue;
      }
      out.add(t, mc);
    }
  }
  return out;
}

// Conjugate-symmetry check c^{-key} = conj(c^{key}); relative mismatch.
double conjugate_asymmetry(const Profile<GridField>& U);

}  // namespace wkb
