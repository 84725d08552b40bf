#include "wkb/phase.hpp"

#include <cmath>
#include <sstream>

namespace wkb {

namespace {

VecC roots(const HyperbolicSystem& sys, double eta, double xi) {
  Eigen::EigenSolver<MatR> es(sys.B1 * eta + sys.B2 * xi, false);
  return es.eigenvalues();
}

double nearest_real(const VecC& l, double target) {
  Eigen::Index m;
  (l.array() - target).abs().minCoeff(&m);
  return l(m).real();
}

}  // namespace

PhaseSet build_phases(const HyperbolicSystem& sys, const Eigen::Vector2d& beta_l) {
  const ModeDecomposition d = decompose(sys, Frequency{beta_l(0), 0.0, beta_l(1)});
  const double nA = std::max(d.omega.cwiseAbs().maxCoeff(), 1.0);
  for (int j = 0; j < sys.N; ++j)
    if (std::abs(d.omega(j).imag()) > 1e-10 * nA)
      throw compute_error("DegenerateSpectrum", "beta_l is not in the hyperbolic region");
  PhaseSet ph;
  ph.beta_l = beta_l;
  ph.n_out = d.n_out;
  ph.omega = d.omega.real();
  ph.r = d.r.real();
  ph.ell = d.ell.real();
  const double sigma = beta_l(0), eta = beta_l(1);
  for (int j = 0; j < sys.N; ++j) {
    const double w = ph.omega(j);
    ph.dphi.emplace_back(sigma, eta, w);
    const double he = 1e-6 * std::max(1.0, std::abs(eta)), hx = 1e-6 * std::max(1.0, std::abs(w));
    const double ge = (nearest_real(roots(sys, eta + he, w), -sigma) - nearest_real(roots(sys, eta - he, w), -sigma)) /
                      (2 * he);
    const double gx = (nearest_real(roots(sys, eta, w + hx), -sigma) - nearest_real(roots(sys, eta, w - hx), -sigma)) /
                      (2 * hx);
    ph.group_velocity.emplace_back(ge, gx);
  }
  return ph;
}

double omega_ratio(const VecR& w, int i, int j, double tol) {
  const int N = static_cast<int>(w.size());
  const double den = w(j - 1) - w(i - 1);
  if (std::abs(den) <= tol * std::max(1.0, w.cwiseAbs().maxCoeff()))
    throw compute_error("DegenerateRatio", "omega_j - omega_i vanishes");
  return (w(i - 1) - w(N - 1)) / den;
}

double omega_ratio_alt(const VecR& w, int i, int j, double tol) {
  const int N = static_cast<int>(w.size());
  const double den = w(j - 1) - w(N - 1);
  if (std::abs(den) <= tol * std::max(1.0, w.cwiseAbs().maxCoeff()))
    throw compute_error("DegenerateRatio", "omega_j - omega_N vanishes");
  return (w(i - 1) - w(j - 1)) / den;
}

std::vector<Convergent> convergents(double x, long long q_max) {
  std::vector<Convergent> out;
  long long p0 = 1, q0 = 0, p1 = static_cast<long long>(std::floor(x)), q1 = 1;
  out.push_back({p1, q1});
  double frac = x - std::floor(x);
  for (int it = 0; it < 64 && frac > 1e-300; ++it) {
    const double inv = 1.0 / frac;
    const double a = std::floor(inv);
    if (a > 4e18 || q1 * a + q0 > q_max) break;
    const long long ai = static_cast<long long>(a);
    const long long p2 = ai * p1 + p0, q2 = ai * q1 + q0;
    out.push_back({p2, q2});
    p0 = p1;
    q0 = q1;
    p1 = p2;
    q1 = q2;
    frac = inv - a;
  }
  return out;
}

double diophantine_margin(double x, long long q_max, double delta_exp) {
  double m = INFINITY;
  for (long long q = 1; q <= q_max; ++q) {
    const double qd = static_cast<double>(q);
    const double e = std::abs(std::round(qd * x) / qd - x) * std::pow(qd, 2.0 + delta_exp);
    m = std::min(m, e);
  }
  return m;
}

ResonanceReport detect_resonance(double ratio, long long q_max, double tol, double delta_exp) {
  ResonanceReport rep;
  rep.omega_ratio = ratio;
  rep.q_max = q_max;
  rep.delta_exp = delta_exp;
  rep.convergents = convergents(ratio, q_max);
  for (const auto& c : rep.convergents) {
    if (std::abs(double(c.p) / double(c.q) - ratio) <= tol * std::max(1.0, std::abs(ratio))) {
      rep.resonant = true;
      rep.p = c.p;
      rep.q = c.q;
      return rep;
    }
  }
  rep.p = rep.convergents.back().p;
  rep.q = rep.convergents.back().q;
  rep.margin = diophantine_margin(ratio, q_max, delta_exp);
  return rep;
}

Eigen::Vector3d nc_denominators(const VecR& w, int k, int l) {
  return {k * (w(1) - w(0)) + l * (w(2) - w(0)), l * (w(2) - w(1)), k * (w(1) - w(2))};
}

MatR nc_inverse(const PhaseSet& ph, int k, int l) {
  const Eigen::Vector3d d = nc_denominators(ph.omega, k, l);
  MatR out = MatR::Zero(3, 3);
  for (int m = 0; m < 3; ++m) out += ph.r.col(m) * ph.ell.row(m) / d(m);
  return out;
}

MatR nc_symbol(const HyperbolicSystem& sys, const PhaseSet& ph, int k, int l) {
  const double s = ph.beta_l(0) * (k + l), e = ph.beta_l(1) * (k + l);
  const double x = k * ph.omega(1) + l * ph.omega(2);
  return s * MatR::Identity(sys.N, sys.N) + e * sys.B1 + x * sys.B2;
}

SmallDivisorAudit small_divisor_audit(const PhaseSet& ph, int K, double singular_tol, bool throw_on_singular) {
  if (ph.omega.size() != 3) throw config_error("small divisor audit needs N = 3");
  SmallDivisorAudit a;
  a.K = K;
  a.envelope.assign(K, 0.0);
  a.min_divisor = INFINITY;
  const double scale = ph.omega.cwiseAbs().maxCoeff();
  // shells |(k, l)|_inf = n, so the first singular mode found is the smallest
  for (int n = 1; n <= K; ++n)
    for (int k = -n; k <= n; ++k)
      for (int l = -n; l <= n; ++l) {
        if (k == 0 || l == 0 || std::max(std::abs(k), std::abs(l)) != n) continue;
        const Eigen::Vector3d d = nc_denominators(ph.omega, k, l);
        const double dmin = d.cwiseAbs().minCoeff();
        if (dmin <= singular_tol * scale * (std::abs(k) + std::abs(l))) {
          if (!throw_on_singular) {
            a.singular = AuditEntry{k, l, INFINITY, dmin};
            a.min_divisor = dmin;
            a.worst = *a.singular;
            a.envelope.resize(n - 1);
            for (int i = 1; i < n - 1; ++i) a.envelope[i] = std::max(a.envelope[i], a.envelope[i - 1]);
            return a;
          }
          std::ostringstream os;
          os << "L(k dphi2 + l dphi3) is singular at (k, l) = (" << k << ", " << l << ")";
          throw compute_error("SingularMode", os.str());
        }
        Eigen::JacobiSVD<MatR> svd(nc_inverse(ph, k, l));
        AuditEntry e{k, l, svd.singularValues()(0), dmin};
        a.entries.push_back(e);
        a.envelope[n - 1] = std::max(a.envelope[n - 1], e.norm);
        if (dmin < a.min_divisor) {
          a.min_divisor = dmin;
          a.worst = e;
        }
      }
  for (int n = 1; n < K; ++n) a.envelope[n] = std::max(a.envelope[n], a.envelope[n - 1]);
  // least squares on log env = log C + a log n over the corners of the staircase
  double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0, m = 0, prev = 0;
  for (int n = 1; n <= K; ++n) {
    if (!(a.envelope[n - 1] > prev * (1 + 1e-12))) continue;
    prev = a.envelope[n - 1];
    const double x = std::log(double(n)), y = std::log(prev);
    m += 1;
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    syy += y * y;
  }
  const double vx = sxx - sx * sx / m, vy = syy - sy * sy / m, cxy = sxy - sx * sy / m;
  a.fit_a = vx > 0 ? cxy / vx : 0.0;
  a.fit_C = std::exp((sy - a.fit_a * sx) / m);
  a.r2 = (vx > 0 && vy > 0) ? cxy * cxy / (vx * vy) : 1.0;
  return a;
}

}  // namespace wkb
