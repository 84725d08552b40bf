#include "wkb/profile.hpp"

#include <sstream>

namespace wkb {

std::string ModeKey::str() const {
  std::ostringstream os;
  if (kind == Mean)
    os << "mean";
  else if (kind == Nc)
    os << "nc(" << a << "," << b << ")";
  else
    os << "theta" << kind << "(" << a << ")";
  return os.str();
}

ProjectorKit build_projectors(const HyperbolicSystem& sys, const PhaseSet& ph) {
  if (sys.N != 3) throw config_error("profiles need N = 3");
  ProjectorKit kit;
  kit.omega = ph.omega;
  kit.beta = ph.beta_l;
  for (int i = 0; i < 3; ++i)
    for (int j = i + 1; j < 3; ++j)
      if (std::abs(ph.omega(i) - ph.omega(j)) < kGapTol * ph.omega.cwiseAbs().maxCoeff())
        throw compute_error("DegenerateSpectrum", "phases are not distinct");
  kit.r = ph.r.cast<cplx>();
  kit.ell = ph.ell.cast<cplx>();
  kit.B2 = sys.B2.cast<cplx>();
  for (int m = 0; m < 3; ++m) {
    kit.P[m] = kit.r.col(m) * kit.ell.row(m) * kit.B2;
    kit.Q[m] = kit.B2 * kit.r.col(m) * kit.ell.row(m);
    kit.R[m].setZero();
    for (int mp = 0; mp < 3; ++mp)
      if (mp != m) kit.R[m] += kit.r.col(mp) * kit.ell.row(mp) / (ph.omega(m) - ph.omega(mp));
    kit.L[m] = (ph.beta_l(0) * MatR::Identity(3, 3) + ph.beta_l(1) * sys.B1 + ph.omega(m) * sys.B2).cast<cplx>();
  }
  return kit;
}

Mat3c ProjectorKit::L_nc(int k, int l) const { return double(k) * L[1] + double(l) * L[2]; }

Mat3c ProjectorKit::Linv_nc(int k, int l) const {
  const Eigen::Vector3d d = nc_denominators(omega, k, l);
  const double scale = omega.cwiseAbs().maxCoeff() * (std::abs(k) + std::abs(l));
  Mat3c out = Mat3c::Zero();
  for (int m = 0; m < 3; ++m) {
    if (std::abs(d(m)) <= 1e-12 * scale) {
      std::ostringstream os;
      os << "L(k dphi2 + l dphi3) is singular at (k, l) = (" << k << ", " << l << ")";
      throw compute_error("SingularMode", os.str());
    }
    out += r.col(m) * ell.row(m) / d(m);
  }
  return out;
}

Mat3c ProjectorKit::L_mode(const ModeKey& key) const {
  if (key.kind == ModeKey::Mean) return Mat3c::Zero();
  if (key.kind == ModeKey::Nc) return L_nc(key.a, key.b);
  return double(key.a) * L[key.kind - 1];
}

ModeKey shift_theta3(const ModeKey& k, int s) {
  switch (k.kind) {
    case ModeKey::Mean:
      return ModeKey::pure(3, s);
    case ModeKey::Pure2:
      return ModeKey::nc(k.a, s);
    case ModeKey::Pure3:
      return k.a + s == 0 ? ModeKey::mean() : ModeKey::pure(3, k.a + s);
    case ModeKey::Nc:
      return k.b + s == 0 ? ModeKey::pure(2, k.a) : ModeKey::nc(k.a, k.b + s);
    default:
      throw compute_error("SpectrumViolation", "theta1 mode under theta3 multiplication");
  }
}

double conjugate_asymmetry(const Profile<GridField>& U) {
  double num = 0, den = 0;
  for (const auto& [k, c] : U.modes) {
    ModeKey m = k;
    m.a = -k.a;
    m.b = -k.b;
    const GridField* o = U.find(m);
    den += c.v.squaredNorm();
    if (!o)
      num += c.v.squaredNorm();
    else
      num += (c.v - o->v.conjugate()).squaredNorm();
  }
  return den > 0 ? std::sqrt(num / den) : 0.0;
}

}  // namespace wkb
