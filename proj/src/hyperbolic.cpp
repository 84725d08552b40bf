#include "wkb/hyperbolic.hpp"

#include <algorithm>
#include <boost/math/tools/minima.hpp>
#include <boost/math/tools/roots.hpp>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

namespace wkb {

namespace {

constexpr double kPi = 3.14159265358979323846;

std::string dir_str(double eta, double xi) {
  std::ostringstream os;
  os.precision(10);
  os << "(eta, xi) = (" << eta << ", " << xi << ")";
  return os.str();
}

double op_norm(const MatC& A) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < A.rows(); ++i) s = std::max(s, A.row(i).cwiseAbs().sum());
  return s;
}

}  // namespace

HyperbolicSystem build_system(const MatR& B1, const MatR& B2, const MatR& B, const MatR& M, int circle_samples,
                              double tol, std::string id) {
  const Eigen::Index N = B1.rows();
  if (B1.cols() != N || B2.rows() != N || B2.cols() != N || M.rows() != N || M.cols() != N || B.cols() != N)
    throw fixture_error("FixtureError", "inconsistent matrix dimensions");

  HyperbolicSystem sys;
  sys.id = std::move(id);
  sys.N = static_cast<int>(N);
  sys.B1 = B1;
  sys.B2 = B2;
  sys.B = B;
  sys.M = M;

  Eigen::JacobiSVD<MatR> svd2(B2);
  const double smax = svd2.singularValues()(0), smin = svd2.singularValues()(N - 1);
  sys.cert.det_B2 = B2.determinant();
  sys.cert.cond_B2 = smin > 0 ? smax / smin : INFINITY;
  if (!(smin > tol * std::max(smax, 1e-300))) throw fixture_error("SingularB2", "B2 is not invertible");

  sys.cert.circle_samples = circle_samples;
  sys.cert.min_root_gap = INFINITY;
  for (int s = 0; s < circle_samples; ++s) {
    const double th = 2.0 * kPi * s / circle_samples;
    const double eta = std::cos(th), xi = std::sin(th);
    const MatR P = B1 * eta + B2 * xi;
    Eigen::EigenSolver<MatR> es(P, false);
    const VecC ev = es.eigenvalues();
    const double scale = std::max(P.norm(), 1e-300);
    double im = 0.0;
    std::vector<double> re;
    for (Eigen::Index k = 0; k < N; ++k) {
      im = std::max(im, std::abs(ev(k).imag()));
      re.push_back(ev(k).real());
    }
    std::sort(re.begin(), re.end());
    double gap = INFINITY;
    for (std::size_t k = 1; k < re.size(); ++k) gap = std::min(gap, re[k] - re[k - 1]);
    sys.cert.max_imag_root = std::max(sys.cert.max_imag_root, im / scale);
    if (gap / scale < sys.cert.min_root_gap) {
      sys.cert.min_root_gap = gap / scale;
      sys.cert.worst_direction = th;
    }
    if (im > tol * scale || gap <= tol * scale) {
      std::ostringstream os;
      os << "repeated or complex root at " << dir_str(eta, xi) << ", gap " << gap / scale;
      throw fixture_error("NotStrictlyHyperbolic", os.str());
    }
  }

  Eigen::EigenSolver<MatR> es2(B2, false);
  int p = 0;
  for (Eigen::Index k = 0; k < N; ++k)
    if (es2.eigenvalues()(k).real() > 0) ++p;
  if (p < 1 || p > N - 1) throw fixture_error("FixtureError", "B2 must have between 1 and N-1 positive eigenvalues");
  sys.p = p;

  Eigen::JacobiSVD<MatR> svdb(B);
  const double bmax = svdb.singularValues().size() ? svdb.singularValues()(0) : 0.0;
  sys.cert.rank_tol = tol * std::max(bmax, 1e-300);
  int rank = 0;
  for (Eigen::Index k = 0; k < svdb.singularValues().size(); ++k)
    if (svdb.singularValues()(k) > sys.cert.rank_tol) ++rank;
  if (B.rows() != p || rank != p) {
    std::ostringstream os;
    os << "rank(B) = " << rank << " with " << B.rows() << " rows, p = " << p;
    throw fixture_error("RankDeficientB", os.str());
  }

  sys.A0 = B2.inverse();
  sys.A1 = sys.A0 * B1;
  return sys;
}

MatC symbol(const HyperbolicSystem& sys, cplx tau, cplx eta) {
  return -(sys.A0.cast<cplx>() * tau + sys.A1.cast<cplx>() * eta);
}

namespace {

void fix_phase_default(MatC& r) {
  for (Eigen::Index j = 0; j < r.cols(); ++j) {
    Eigen::Index imax = 0;
    double amax = -1.0;
    for (Eigen::Index i = 0; i < r.rows(); ++i) {
      const double a = std::abs(r(i, j));
      if (a > amax * (1.0 + 1e-12)) {
        amax = a;
        imax = i;
      }
    }
    const cplx ph = std::conj(r(imax, j)) / std::abs(r(imax, j));
    r.col(j) *= ph;
  }
}

// Best permutation of columns idx (within a group) against reference columns ref.
std::vector<int> match_group(const MatC& ref, const MatC& cand) {
  const int n = static_cast<int>(cand.cols());
  std::vector<int> perm(n), best;
  std::iota(perm.begin(), perm.end(), 0);
  double best_score = -1.0;
  do {
    double s = 0.0;
    for (int j = 0; j < n; ++j) s += std::abs(ref.col(j).dot(cand.col(perm[j])));
    if (s > best_score) {
      best_score = s;
      best = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

}  // namespace

ModeDecomposition decompose(const HyperbolicSystem& sys, const Frequency& z, const ModeDecomposition* prev) {
  const MatC A = symbol(sys, z);
  const int N = sys.N;
  const double nA = std::max(op_norm(A), 1e-300);
  Eigen::ComplexEigenSolver<MatC> es(A);
  if (es.info() != Eigen::Success) throw compute_error("DegenerateSpectrum", "eigensolver failed");
  VecC w = es.eigenvalues();
  MatC V = es.eigenvectors();
  for (int i = 0; i < N; ++i)
    for (int j = i + 1; j < N; ++j)
      if (std::abs(w(i) - w(j)) < kGapTol * nA) {
        std::ostringstream os;
        os << "eigenvalue gap " << std::abs(w(i) - w(j)) / nA << " at (sigma, gamma, eta) = (" << z.sigma << ", "
           << z.gamma << ", " << z.eta << ")";
        throw compute_error("DegenerateSpectrum", os.str());
      }
  for (int j = 0; j < N; ++j) V.col(j).normalize();
  const MatC Vinv = V.inverse();
  const MatC T = Vinv * sys.A0.cast<cplx>() * V;

  std::vector<int> out, in;
  for (int j = 0; j < N; ++j) {
    bool incoming;
    if (std::abs(w(j).imag()) > 1e-10 * nA)
      incoming = w(j).imag() > 0;
    else
      incoming = T(j, j).real() > 0;
    (incoming ? in : out).push_back(j);
  }
  auto by_value = [&](int a, int b) {
    if (w(a).real() != w(b).real()) return w(a).real() > w(b).real();
    return w(a).imag() > w(b).imag();
  };
  std::sort(out.begin(), out.end(), by_value);
  std::sort(in.begin(), in.end(), by_value);

  ModeDecomposition d;
  d.z = z;
  d.n_out = static_cast<int>(out.size());
  d.n_in = static_cast<int>(in.size());
  if (prev && prev->n_out == d.n_out && prev->n_in == d.n_in) {
    auto reorder = [&](std::vector<int>& g, int off) {
      if (g.size() < 2) return;
      MatC cand(N, g.size());
      for (std::size_t k = 0; k < g.size(); ++k) cand.col(k) = V.col(g[k]);
      const auto perm = match_group(prev->r.middleCols(off, g.size()), cand);
      std::vector<int> ng(g.size());
      for (std::size_t k = 0; k < g.size(); ++k) ng[k] = g[perm[k]];
      g = ng;
    };
    reorder(out, 0);
    reorder(in, d.n_out);
  }
  std::vector<int> order = out;
  order.insert(order.end(), in.begin(), in.end());
  d.omega.resize(N);
  d.r.resize(N, N);
  for (int k = 0; k < N; ++k) {
    d.omega(k) = w(order[k]);
    d.r.col(k) = V.col(order[k]);
  }
  if (prev && prev->r.cols() == N) {
    for (int k = 0; k < N; ++k) {
      const cplx ov = prev->r.col(k).dot(d.r.col(k));
      if (std::abs(ov) > 0) d.r.col(k) *= ov / std::abs(ov);
    }
  } else {
    fix_phase_default(d.r);
  }
  d.R_raw = d.r;
  for (int k = 0; k < N; ++k) {
    Eigen::Index imax;
    d.r.col(k).cwiseAbs().maxCoeff(&imax);
    d.R_raw.col(k) /= d.r(imax, k);
  }
  d.S = d.r;
  d.S_inv = d.S.inverse();
  d.ell = (sys.B2.cast<cplx>() * d.S).inverse();
  return d;
}

ModeDecomposition extend_branch(const HyperbolicSystem&, const ModeDecomposition& d) {
  ModeDecomposition e = d;
  e.z = Frequency{-d.z.sigma, d.z.gamma, -d.z.eta};
  e.omega = -d.omega.conjugate();
  e.r = d.r.conjugate();
  e.R_raw = d.R_raw.conjugate();
  e.ell = d.ell.conjugate();
  e.S = d.S.conjugate();
  e.S_inv = d.S_inv.conjugate();
  return e;
}

int cone_side(const Frequency& z, const Eigen::Vector2d& beta, double delta) {
  const double n = z.norm();
  if (n == 0.0) return 0;
  const Eigen::Vector3d u(z.sigma / n, z.gamma / n, z.eta / n);
  const Eigen::Vector3d b = Eigen::Vector3d(beta(0), 0.0, beta(1)).normalized();
  if ((u - b).norm() < delta) return 1;
  if ((u + b).norm() < delta) return -1;
  return 0;
}

ModeDecomposition decompose_tracked(const HyperbolicSystem& sys, const Frequency& z, const Eigen::Vector2d& beta,
                                    double delta) {
  const int side = cone_side(z, beta, delta);
  if (side == -1) {
    ModeDecomposition e = extend_branch(sys, decompose(sys, Frequency{-z.sigma, z.gamma, -z.eta}));
    e.cone_tag = true;
    return e;
  }
  ModeDecomposition d = decompose(sys, z);
  d.cone_tag = side == 1;
  return d;
}

double dxi_lambda(const HyperbolicSystem& sys, double sigma, double eta, double xi) {
  auto roots = [&](double x) {
    Eigen::EigenSolver<MatR> es(sys.B1 * eta + sys.B2 * x, false);
    return VecC(es.eigenvalues());
  };
  const VecC l0 = roots(xi);
  Eigen::Index k;
  (l0.array() + sigma).abs().minCoeff(&k);
  const double lam = l0(k).real();
  const double h = 1e-6 * std::max(1.0, std::abs(xi));
  auto nearest = [&](const VecC& l) {
    Eigen::Index m;
    (l.array() - lam).abs().minCoeff(&m);
    return l(m).real();
  };
  return (nearest(roots(xi + h)) - nearest(roots(xi - h))) / (2.0 * h);
}

PhaseKind classify_phase(const HyperbolicSystem& sys, const Eigen::Vector2d& beta, cplx omega_j, double tol) {
  const double g = dxi_lambda(sys, beta(0), beta(1), omega_j.real());
  if (std::abs(g) < tol) throw compute_error("GlancingPhase", "d lambda / d xi vanishes");
  return g > 0 ? PhaseKind::Incoming : PhaseKind::Outgoing;
}

MatC stable_subspace(const HyperbolicSystem& sys, const Frequency& z) {
  const ModeDecomposition d = decompose(sys, z);
  Eigen::HouseholderQR<MatC> qr(d.r_in());
  return qr.householderQ() * MatC::Identity(sys.N, d.n_in);
}

LopatinskiValue lopatinski(const HyperbolicSystem& sys, const ModeDecomposition& d) {
  const MatC Bc = sys.B.cast<cplx>();
  return {(Bc * d.r_in()).determinant(), (Bc * d.R_raw.rightCols(d.n_in)).determinant()};
}

LopatinskiValue lopatinski(const HyperbolicSystem& sys, const Frequency& z, const ModeDecomposition* prev) {
  return lopatinski(sys, decompose(sys, z, prev));
}

std::string region_tag(const HyperbolicSystem& sys, const Frequency& z) {
  if (z.gamma > 0) return "gamma_pos";
  const MatC A = symbol(sys, z);
  const double nA = std::max(op_norm(A), 1e-300);
  Eigen::ComplexEigenSolver<MatC> es(A, false);
  const VecC w = es.eigenvalues();
  for (int i = 0; i < sys.N; ++i)
    for (int j = i + 1; j < sys.N; ++j)
      if (std::abs(w(i) - w(j)) < kGapTol * nA) return "glancing";
  int nreal = 0;
  for (int i = 0; i < sys.N; ++i)
    if (std::abs(w(i).imag()) <= 1e-10 * nA) ++nreal;
  if (nreal == sys.N) return "hyperbolic";
  if (nreal == 0) return "elliptic";
  return "mixed";
}

cplx dtau_delta(const HyperbolicSystem& sys, const Frequency& z, double rel_step) {
  const double h = rel_step * z.norm();
  const ModeDecomposition d0 = decompose(sys, z);
  const ModeDecomposition dp = decompose(sys, Frequency{z.sigma + h, z.gamma, z.eta}, &d0);
  const ModeDecomposition dm = decompose(sys, Frequency{z.sigma - h, z.gamma, z.eta}, &d0);
  return (lopatinski(sys, dp).delta - lopatinski(sys, dm).delta) / (2.0 * h);
}

Eigen::Vector2d grad_re_delta(const HyperbolicSystem& sys, const Frequency& z, double rel_step) {
  const double h = rel_step * z.norm();
  const ModeDecomposition d0 = decompose(sys, z);
  auto D = [&](double ds, double de) {
    return lopatinski(sys, decompose(sys, Frequency{z.sigma + ds, z.gamma, z.eta + de}, &d0)).delta.real();
  };
  return {(D(h, 0) - D(-h, 0)) / (2 * h), (D(0, h) - D(0, -h)) / (2 * h)};
}

double refine_zero_angle(const HyperbolicSystem& sys, double angle0, double half_width) {
  auto at = [](double th) { return Frequency{std::cos(th), 0.0, std::sin(th)}; };
  const ModeDecomposition d0 = decompose(sys, at(angle0));
  const cplx ref = lopatinski(sys, d0).delta;
  const cplx ph = std::abs(ref) > 0 ? std::conj(ref) / std::abs(ref) : cplx(1.0);
  auto g = [&](double th) { return (lopatinski(sys, decompose(sys, at(th), &d0)).delta * ph).real(); };
  const double a = angle0 - half_width, b = angle0 + half_width;
  const double ga = g(a), gb = g(b);
  if (ga * gb < 0) {
    std::uintmax_t it = 200;
    auto r = boost::math::tools::toms748_solve(
        g, a, b, ga, gb, [](double x, double y) { return std::abs(x - y) < 1e-15; }, it);
    return 0.5 * (r.first + r.second);
  }
  auto f = [&](double th) { return std::abs(lopatinski(sys, decompose(sys, at(th), &d0)).delta); };
  return boost::math::tools::brent_find_minima(f, a, b, 26).first;
}

LopatinskiProbe scan_ulc(const HyperbolicSystem& sys, double res, double zero_tol) {
  LopatinskiProbe pr;
  pr.min_abs_delta = INFINITY;
  const int ne = static_cast<int>(std::round(90.0 / res));
  const int na = static_cast<int>(std::round(360.0 / res));
  std::vector<double> ring(na, INFINITY);
  for (int ie = 0; ie <= ne; ++ie) {
    const double ph = ie * res * kPi / 180.0;
    const int nth = ie == ne ? 1 : na;
    for (int ia = 0; ia < nth; ++ia) {
      const double th = ia * res * kPi / 180.0;
      Frequency z{std::cos(ph) * std::cos(th), std::sin(ph), std::cos(ph) * std::sin(th)};
      if (ie == ne) z = Frequency{0.0, 1.0, 0.0};
      ScanSample s{z, cplx(NAN, NAN), region_tag(sys, z)};
      if (s.region != "glancing") {
        try {
          s.delta = lopatinski(sys, z).delta;
        } catch (const Error&) {
          s.region = "glancing";
        }
      }
      if (s.region != "glancing") {
        const double a = std::abs(s.delta);
        if (a < pr.min_abs_delta) {
          pr.min_abs_delta = a;
          pr.argmin = z;
        }
        if (ie == 0) ring[ia] = a;
        if (ie > 0 && a < zero_tol) pr.failure_set.push_back(z);
      }
      pr.samples.push_back(s);
    }
  }
  double med;
  {
    std::vector<double> v;
    for (double a : ring)
      if (std::isfinite(a)) v.push_back(a);
    std::sort(v.begin(), v.end());
    med = v.empty() ? 0.0 : v[v.size() / 2];
  }
  const double step = res * kPi / 180.0;
  for (int ia = 0; ia < na; ++ia) {
    const double a = ring[ia], l = ring[(ia + na - 1) % na], r = ring[(ia + 1) % na];
    if (!std::isfinite(a) || !(a <= l && a <= r) || a > 0.1 * med) continue;
    try {
      const double th = refine_zero_angle(sys, ia * step, step);
      const Frequency z{std::cos(th), 0.0, std::sin(th)};
      if (std::abs(lopatinski(sys, z).delta) <= zero_tol) {
        pr.failure_set.push_back(z);
        pr.dtau_at_failure.push_back(dtau_delta(sys, z));
      }
    } catch (const Error&) {
    }
  }
  for (std::size_t i = 0; i < pr.failure_set.size(); ++i) {
    const Frequency& z = pr.failure_set[i];
    if (z.gamma != 0.0) continue;
    if (z.sigma > 1e-12 || (std::abs(z.sigma) <= 1e-12 && z.eta > 0)) {
      pr.beta_l = Eigen::Vector2d(z.sigma, z.eta);
      pr.dtau_delta = i < pr.dtau_at_failure.size() ? pr.dtau_at_failure[i] : dtau_delta(sys, z);
      pr.c_plus = z.eta != 0.0 ? z.sigma / z.eta : INFINITY;
      break;
    }
  }
  if (pr.beta_l.norm() > 0 && std::isfinite(pr.c_plus)) {
    const auto [lo, hi] = cone_ratio(sys, pr.beta_l, pr.c_plus, pr.delta_cone, 400, 7u);
    pr.cone_ratio_lo = lo;
    pr.cone_ratio_hi = hi;
  }
  return pr;
}

std::pair<double, double> cone_ratio(const HyperbolicSystem& sys, const Eigen::Vector2d& beta, double c_plus,
                                    double delta, int samples, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(-1.0, 1.0), mag(0.5, 10.0);
  const Eigen::Vector3d b = Eigen::Vector3d(beta(0), 0.0, beta(1)).normalized();
  double lo = INFINITY, hi = 0.0;
  int got = 0;
  while (got < samples) {
    Eigen::Vector3d u = b + 0.9 * delta * Eigen::Vector3d(U(rng), std::abs(U(rng)), U(rng)) / std::sqrt(3.0);
    if (u(1) <= 1e-6) continue;
    const double s = (got % 2 == 0) ? 1.0 : -1.0;
    const double m = mag(rng);
    Frequency z{s * m * u(0) / u.norm(), m * u(1) / u.norm(), s * m * u(2) / u.norm()};
    if (cone_side(z, beta, delta) == 0) continue;
    const ModeDecomposition d = decompose_tracked(sys, z, beta, delta);
    const double D = std::abs(lopatinski(sys, d).delta);
    const double ratio = std::abs(z.tau() - c_plus * z.eta) / (D * z.norm());
    lo = std::min(lo, ratio);
    hi = std::max(hi, ratio);
    ++got;
  }
  return {lo, hi};
}

}  // namespace wkb
