#include "wkb/estimates.hpp"

#include <algorithm>
#include <array>
#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/special_functions/legendre.hpp>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "wkb/parallel.hpp"

namespace wkb {

namespace {

constexpr double kPi = 3.14159265358979323846;

double dot_beta(const Frequency& z, const Eigen::Vector2d& b) { return z.sigma * b(0) + z.eta * b(1); }

Mat3c coupling_matrix(const HyperbolicSystem& sys) {
  return (sys.B2.inverse() * sys.M).cast<cplx>();
}

}  // namespace

Frequency SingularLattice::X(const Frequency& z, int k) const {
  return {z.sigma + k * beta_l(0) / epsilon, z.gamma, z.eta + k * beta_l(1) / epsilon};
}

Frequency SingularLattice::X_tilde(const Frequency& z, int k) const {
  const double t = dot_beta(X(z, k), beta_l);
  return {t * beta_l(0), 0.0, t * beta_l(1)};
}

bool SingularLattice::chi_b(const Frequency& z, int k) const { return cone_side(X(z, k), beta_l, delta) != 0; }

LatticeModes lattice_modes(const HyperbolicSystem& sys, const PhaseSet& ph, const Frequency& X, double delta) {
  if (sys.N != 3 || sys.p != 2 || ph.n_out != 1)
    throw config_error("singular estimates need N = 3 with one outgoing and two incoming phases");
  LatticeModes m;
  m.X = X;
  const MatC A = symbol(sys, X);
  Eigen::ComplexEigenSolver<MatC> es(A);
  const VecC ev = es.eigenvalues();
  const MatC vec = es.eigenvectors();
  std::array<int, 3> perm{0, 1, 2};
  const double scale = std::max(1.0, X.norm());
  if (cone_side(X, ph.beta_l, delta) != 0) {
    const double t = dot_beta(X, ph.beta_l);
    double best = std::numeric_limits<double>::infinity();
    std::array<int, 3> p{0, 1, 2};
    do {
      double d = 0.0;
      for (int j = 0; j < 3; ++j) d += std::abs(ev(p[j]) - t * ph.omega(j));
      if (d < best) {
        best = d;
        perm = p;
      }
    } while (std::next_permutation(p.begin(), p.end()));
    m.labelled = true;
  } else {
    std::vector<int> out, in;
    for (int j = 0; j < 3; ++j) {
      const double im = ev(j).imag();
      if (std::abs(im) <= 1e-12 * scale)
        throw compute_error("DegenerateSpectrum", "real eigenvalue off the cone, incoming/outgoing undefined");
      (im < 0 ? out : in).push_back(j);
    }
    if (out.size() != 1) throw compute_error("DegenerateSpectrum", "outgoing count differs from one");
    std::sort(in.begin(), in.end(), [&](int a, int b) { return ev(a).real() < ev(b).real(); });
    perm = {out[0], in[0], in[1]};
  }
  for (int j = 0; j < 3; ++j) {
    m.omega(j) = ev(perm[j]);
    m.r.col(j) = vec.col(perm[j]).normalized();
  }
  m.S_inv = m.r.inverse();
  const Eigen::Matrix<cplx, 2, 3> B = sys.B.cast<cplx>();
  m.Br_plus = B * m.r.col(0);
  m.Br_minus = B * m.r.rightCols<2>();
  m.delta = m.Br_minus.determinant();
  return m;
}

cplx E_ij(const SingularLattice& L, const HyperbolicSystem& sys, const PhaseSet& ph, int i, int j, int k, int r,
          const Frequency& z) {
  const LatticeModes a = lattice_modes(sys, ph, L.X(z, k), L.delta);
  const LatticeModes b = lattice_modes(sys, ph, L.X(z, k - r), L.delta);
  return a.omega(i) - double(r) * ph.omega(2) / L.epsilon - b.omega(j);
}

cplx E_ij_tilde(const SingularLattice& L, const PhaseSet& ph, int i, int j, int k, int r, const Frequency& z) {
  const double s = L.epsilon * dot_beta(z, L.beta_l);
  const double Om = omega_ratio(ph.omega, i + 1, j + 1);
  return (s + k - r - r * Om) / L.epsilon * (ph.omega(i) - ph.omega(j));
}

const char* region_name(Region g) {
  switch (g) {
    case Region::I: return "I";
    case Region::II: return "II";
    case Region::III: return "III";
    default: return "off-cone";
  }
}

Region region_classify(const SingularLattice& L, int k, int r, const Frequency& z) {
  const Frequency Xk = L.X(z, k);
  if (cone_side(Xk, L.beta_l, L.delta) == 0) return Region::OffCone;
  const double ar = std::abs(r);
  if (cone_side(Xk, L.beta_l, L.delta / (L.N1 * ar)) == 0) return Region::III;
  return cone_side(L.X(z, k - r), L.beta_l, L.delta / ar) != 0 ? Region::I : Region::II;
}

namespace {

bool uses_eps_branch(const SingularLattice& L, int r) { return std::abs(r) > std::pow(L.epsilon, -L.xi); }

double eps_branch(const SingularLattice& L, int r, double gamma) {
  return gamma > 0 ? L.C5 * std::abs(r) / (L.epsilon * gamma) : std::numeric_limits<double>::infinity();
}

}  // namespace

double amplification_D(const SingularLattice& L, int k, int r, const Frequency& z) {
  switch (region_classify(L, k, r, z)) {
    case Region::OffCone: return 0.0;
    case Region::II:
    case Region::III: return L.C5 * std::abs(r);
    case Region::I:
      return uses_eps_branch(L, r) ? eps_branch(L, r, z.gamma) : L.C5 * std::pow(std::abs(r), 2.0 + L.delta_exp);
  }
  return 0.0;
}

double amplification_DD(const SingularLattice& L, int k, int r, const Frequency& z) {
  const Region g = region_classify(L, k, r, z);
  if (g == Region::OffCone) return 1.0;
  if (g == Region::I && uses_eps_branch(L, r)) return eps_branch(L, r, z.gamma);
  return L.C5 * std::pow(std::abs(r), 2.0 + L.delta_exp);
}

std::vector<Frequency> lower_bound_samples(const SingularLattice& L, int n_rad, int n_ang) {
  std::vector<double> theta{0.0}, phi{0.0};
  for (int m = 0; m < n_ang; ++m) {
    const double a = L.delta * std::pow(0.5, m);
    theta.push_back(a);
    theta.push_back(-a);
    phi.push_back(a);
  }
  const double base = std::atan2(L.beta_l(1), L.beta_l(0));
  std::vector<Frequency> out;
  for (int j = 0; j < n_rad; ++j) {
    const double rho = L.cutoff() * std::pow(0.5, j);
    for (double side : {0.0, kPi})
      for (double th : theta)
        for (double ph : phi) {
          const double a = base + side + th;
          out.push_back({rho * std::cos(ph) * std::cos(a), rho * std::sin(ph), rho * std::cos(ph) * std::sin(a)});
        }
  }
  return out;
}

std::vector<Frequency> estimate_samples(const SingularLattice& L, double gamma, int n_rad, int n_ang) {
  const double c = L.cutoff();
  if (gamma > c) return {};
  const double rmax = std::sqrt(c * c - gamma * gamma);
  std::vector<double> theta{0.0, kPi / 2, kPi, 3 * kPi / 2};
  for (int m = 0; m < n_ang; ++m) {
    const double a = 0.3 * std::pow(3.0, -m);
    theta.push_back(a);
    theta.push_back(-a);
    theta.push_back(kPi + a);
  }
  const double base = std::atan2(L.beta_l(1), L.beta_l(0));
  std::vector<Frequency> out{{0.0, gamma, 0.0}};
  for (int j = 0; j < n_rad; ++j) {
    const double rho = rmax * std::pow(0.25, j);
    for (double th : theta) out.push_back({rho * std::cos(base + th), gamma, rho * std::sin(base + th)});
  }
  return out;
}

LowerBoundReport lower_bound_scan(const SingularLattice& L, const HyperbolicSystem& sys, const PhaseSet& ph,
                                  int M_cap, int threads) {
  const int r2cap = static_cast<int>(std::floor(std::pow(L.epsilon, -L.xi) + 1e-12));
  const int rcap = std::max(M_cap, r2cap);
  const int N = 2;
  struct Acc {
    double c1 = std::numeric_limits<double>::infinity(), c2 = c1, cN = c1, k0 = c1;
    int n = 0;
    Frequency z;
    int k = 0, r = 0;
  };
  const auto& Z = L.zeta_samples;
  std::vector<std::array<Acc, 2>> acc(Z.size());
  parallel_for(Z.size(), threads, [&](std::size_t zi) {
    const Frequency& z = Z[zi];
    std::map<int, LatticeModes> cache;
    auto modes = [&](int k) -> const LatticeModes& {
      auto it = cache.find(k);
      if (it == cache.end()) it = cache.emplace(k, lattice_modes(sys, ph, L.X(z, k), L.delta)).first;
      return it->second;
    };
    for (int k = L.k_min; k <= L.k_max; ++k) {
      const Frequency Xk = L.X(z, k);
      if (cone_side(Xk, L.beta_l, L.delta) == 0) continue;
      for (int r = -rcap; r <= rcap; ++r) {
        if (r == 0 || region_classify(L, k, r, z) != Region::I) continue;
        const Frequency Xkr = L.X(z, k - r);
        const double nk = Xk.norm(), nkr = Xkr.norm();
        for (int j = 1; j <= 2; ++j) {
          Acc& a = acc[zi][j - 1];
          const double E = std::abs(modes(k).omega(0) - double(r) * ph.omega(N) / L.epsilon - modes(k - r).omega(j));
          ++a.n;
          if (j != N) {
            if (std::abs(r) <= M_cap) a.c1 = std::min(a.c1, E / nkr);
            if (std::abs(r) <= r2cap) {
              const double c2 = E * std::pow(std::abs(r), 2.0 + L.delta_exp) / nk;
              if (c2 < a.c2) {
                a.c2 = c2;
                a.z = z;
                a.k = k;
                a.r = r;
              }
            }
          } else {
            a.cN = std::min(a.cN, std::max(E * std::abs(r) / nk, E / nkr));
          }
          if (k == 0 && std::abs(r) <= M_cap) a.k0 = std::min(a.k0, E * L.epsilon / std::abs(r));
        }
      }
    }
  });
  LowerBoundReport rep;
  rep.epsilon = L.epsilon;
  for (int j = 1; j <= 2; ++j) {
    LowerBoundRow row;
    row.i = 0;
    row.j = j;
    row.r_cap = j != N ? r2cap : rcap;
    Acc tot;
    for (const auto& a : acc) {
      const Acc& b = a[j - 1];
      tot.c1 = std::min(tot.c1, b.c1);
      tot.cN = std::min(tot.cN, b.cN);
      tot.k0 = std::min(tot.k0, b.k0);
      tot.n += b.n;
      if (b.c2 < tot.c2) {
        tot.c2 = b.c2;
        tot.z = b.z;
        tot.k = b.k;
        tot.r = b.r;
      }
    }
    auto fin = [](double v) { return std::isfinite(v) ? v : 0.0; };
    row.c1 = j != N ? fin(tot.c1) : 0.0;
    row.c2 = j != N ? fin(tot.c2) : 0.0;
    row.cN = j == N ? fin(tot.cN) : 0.0;
    row.k0_ratio = fin(tot.k0);
    row.samples = tot.n;
    row.argmin_c2 = tot.z;
    row.argmin_k = tot.k;
    row.argmin_r = tot.r;
    rep.rows.push_back(row);
  }
  return rep;
}

Quadrature gauss_legendre(double length, int panels, int order) {
  if (panels < 1 || order < 2 || !(length > 0)) throw config_error("bad quadrature parameters");
  Quadrature q;
  q.panels = panels;
  q.order = order;
  q.length = length;
  std::vector<double> t(order), w(order);
  // Golub-Welsch
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(order, order);
  for (int i = 1; i < order; ++i) J(i, i - 1) = J(i - 1, i) = i / std::sqrt(4.0 * i * i - 1.0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
  for (int i = 0; i < order; ++i) {
    t[i] = es.eigenvalues()(i);
    w[i] = 2.0 * es.eigenvectors()(0, i) * es.eigenvectors()(0, i);
  }
  const double h = length / panels;
  for (int p = 0; p < panels; ++p)
    for (int i = 0; i < order; ++i) {
      q.x.push_back(p * h + 0.5 * h * (t[i] + 1.0));
      q.w.push_back(0.5 * h * w[i]);
    }
  return q;
}

namespace {

// Q(i, j) = int_{-1}^{t_i} l_j on the reference panel
struct PanelRule {
  Eigen::MatrixXd Q;
  Eigen::VectorXd t, w;
};

PanelRule panel_rule(const Quadrature& q) {
  const int n = q.order;
  const double h = q.length / q.panels;
  PanelRule pr;
  pr.t.resize(n);
  pr.w.resize(n);
  for (int i = 0; i < n; ++i) {
    pr.t(i) = 2.0 * q.x[i] / h - 1.0;
    pr.w(i) = 2.0 * q.w[i] / h;
  }
  Eigen::MatrixXd V(n, n), In(n, n);
  for (int i = 0; i < n; ++i)
    for (int m = 0; m < n; ++m) {
      V(i, m) = boost::math::legendre_p(m, pr.t(i));
      In(i, m) = m == 0 ? pr.t(i) + 1.0
                        : (boost::math::legendre_p(m + 1, pr.t(i)) - boost::math::legendre_p(m - 1, pr.t(i))) /
                              (2.0 * m + 1.0);
    }
  pr.Q = In * V.inverse();
  return pr;
}

}  // namespace

std::vector<cplx> volterra_forward(const Quadrature& q, cplx mu, const std::vector<cplx>& f) {
  const PanelRule pr = panel_rule(q);
  const int n = q.order;
  const double h = q.length / q.panels;
  const cplx E = std::exp(I * mu * h);
  std::vector<cplx> out(f.size()), e(n), g(n);
  cplx Ia = 0.0;
  for (int p = 0; p < q.panels; ++p) {
    const double a = p * h;
    const int o = p * n;
    // e^{i mu (x_i - x_j)} = e_i / e_j with panel-local phases
    cplx Sw = 0.0;
    for (int j = 0; j < n; ++j) {
      e[j] = std::exp(I * mu * (q.x[o + j] - a));
      g[j] = f[o + j] / e[j];
      Sw += q.w[o + j] * g[j];
    }
    for (int i = 0; i < n; ++i) {
      cplx s = 0.0;
      for (int j = 0; j < n; ++j) s += pr.Q(i, j) * g[j];
      out[o + i] = e[i] * (Ia + 0.5 * h * s);
    }
    Ia = E * (Ia + Sw);
  }
  return out;
}

std::vector<cplx> volterra_backward(const Quadrature& q, cplx mu, const std::vector<cplx>& f) {
  const PanelRule pr = panel_rule(q);
  const int n = q.order;
  const double h = q.length / q.panels;
  const cplx Einv = std::exp(-I * mu * h);
  std::vector<cplx> out(f.size()), e(n), g(n);
  cplx Jb = 0.0;
  for (int p = q.panels - 1; p >= 0; --p) {
    const double b = (p + 1) * h;
    const int o = p * n;
    cplx Sw = 0.0;
    for (int j = 0; j < n; ++j) {
      e[j] = std::exp(I * mu * (q.x[o + j] - b));
      g[j] = f[o + j] / e[j];
      Sw += q.w[o + j] * g[j];
    }
    for (int i = 0; i < n; ++i) {
      cplx s = 0.0;
      for (int j = 0; j < n; ++j) s += (pr.w(j) - pr.Q(i, j)) * g[j];
      out[o + i] = e[i] * (Jb + 0.5 * h * s);
    }
    Jb = Einv * (Jb + Sw);
  }
  return out;
}

LaplaceBoundsResult laplace_bounds_check(double gamma, int trials, unsigned seed) {
  if (!(gamma > 0)) throw config_error("laplace bounds need gamma > 0");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  LaplaceBoundsResult res;
  res.gamma = gamma;
  res.trials = trials;
  const int n_se = 4;  // (sigma, eta) sample points carrying the parameter dependence
  for (int tr = 0; tr < trials; ++tr) {
    struct Term {
      cplx a, mu;
      int p;
    };
    std::vector<std::vector<Term>> f(n_se);
    double min_re = gamma, max_im = 1.0;
    for (auto& fs : f) {
      const int nt = 1 + static_cast<int>(U(rng) * 3);
      for (int j = 0; j < nt; ++j) {
        Term t{cplx(2 * U(rng) - 1, 2 * U(rng) - 1), cplx(0.3 + 2.7 * U(rng), 10 * U(rng) - 5),
               static_cast<int>(U(rng) * 3)};
        min_re = std::min(min_re, t.mu.real());
        max_im = std::max(max_im, std::abs(t.mu.imag()));
        fs.push_back(t);
      }
    }
    const double Lx = 60.0 / min_re;
    const double h = std::min(0.5, 2.0 / std::max({max_im, gamma, 3.0}));
    const Quadrature q = gauss_legendre(Lx, static_cast<int>(std::ceil(Lx / h)), 14);
    double nf = 0.0, na = 0.0, nb = 0.0, nc = 0.0, nd = 0.0, ng = 0.0;
    for (int e = 0; e < n_se; ++e) {
      std::vector<cplx> fx(q.x.size());
      for (std::size_t i = 0; i < q.x.size(); ++i)
        for (const auto& t : f[e]) fx[i] += t.a * std::pow(q.x[i], t.p) * std::exp(-t.mu * q.x[i]);
      const auto A = volterra_forward(q, cplx(0.0, gamma), fx);
      const auto B = volterra_backward(q, cplx(0.0, -gamma), fx);
      cplx C = 0.0;
      for (std::size_t i = 0; i < q.x.size(); ++i) {
        nf += q.w[i] * std::norm(fx[i]);
        na += q.w[i] * std::norm(A[i]);
        nb += q.w[i] * std::norm(B[i]);
        C += q.w[i] * std::exp(-gamma * q.x[i]) * fx[i];
      }
      nc += std::norm(C);
      const cplx g = f[e][0].a;
      ng += std::norm(g);
      for (std::size_t i = 0; i < q.x.size(); ++i) nd += q.w[i] * std::norm(std::exp(-gamma * q.x[i]) * g);
    }
    res.worst_a = std::max(res.worst_a, std::sqrt(na) / (std::sqrt(nf) / gamma));
    res.worst_b = std::max(res.worst_b, std::sqrt(nb) / (std::sqrt(nf) / gamma));
    res.worst_c = std::max(res.worst_c, std::sqrt(nc) / (std::sqrt(nf) / std::sqrt(2 * gamma)));
    res.worst_d = std::max(res.worst_d, std::abs(std::sqrt(nd) / (std::sqrt(ng) / std::sqrt(2 * gamma)) - 1.0));
  }
  res.pass = res.worst_a <= 1 + 1e-6 && res.worst_b <= 1 + 1e-6 && res.worst_c <= 1 + 1e-6 && res.worst_d <= 1e-8;
  return res;
}

double TruncatedSystem::nu() const { return ph->omega(2) / L.epsilon; }

TruncatedSystem make_truncated(const HyperbolicSystem& sys, const PhaseSet& ph, const SingularLattice& L,
                               const Frequency& zeta, const std::map<int, double>& alpha) {
  if (!(zeta.gamma > 0)) throw config_error("truncated system needs gamma > 0");
  if (L.k_max < L.k_min) throw config_error("empty k range");
  TruncatedSystem T;
  T.sys = &sys;
  T.ph = &ph;
  T.L = L;
  T.zeta = zeta;
  for (const auto& [r, a] : alpha)
    if (r != 0 && r >= L.r_min && r <= L.r_max && a != 0.0) T.alpha[r] = a;
  for (int k = L.k_min; k <= L.k_max; ++k) T.modes.push_back(lattice_modes(sys, ph, L.X(zeta, k), L.delta));
  return T;
}

std::map<int, double> decay_coefficients(int r_min, int r_max, double exponent) {
  std::map<int, double> a;
  for (int r = r_min; r <= r_max; ++r)
    if (r != 0) a[r] = std::pow(1.0 + double(r) * r, -0.5 * exponent);
  return a;
}

Vec3c ExactSolution::eval(int k_index, double x2) const {
  Vec3c s = Vec3c::Zero();
  for (Eigen::Index n = 0; n < lambda.size(); ++n) s += coef(n) * v[k_index].col(n) * std::exp(I * mu(k_index, n) * x2);
  return s;
}

namespace {

// decaying basis of the truncated system and its boundary matrix
ExactSolution truncated_basis(const TruncatedSystem& T, MatC& Bm) {
  const int K = T.K();
  const double nu = T.nu();
  const Mat3c C = coupling_matrix(*T.sys);
  MatC A = MatC::Zero(3 * K, 3 * K);
  for (int a = 0; a < K; ++a) {
    const int k = T.L.k_min + a;
    A.block(3 * a, 3 * a, 3, 3) = symbol(*T.sys, T.modes[a].X) - double(k) * nu * MatC::Identity(3, 3);
    for (const auto& [r, al] : T.alpha) {
      const int b = a - r;
      if (b < 0 || b >= K) continue;
      A.block(3 * a, 3 * b, 3, 3) += I * al * C;
    }
  }
  Eigen::ComplexEigenSolver<MatC> es(A);
  const VecC ev = es.eigenvalues();
  double scale = 1.0;
  for (int i = 0; i < 3 * K; ++i) scale = std::max(scale, std::abs(ev(i)));
  std::vector<int> in;
  for (int i = 0; i < 3 * K; ++i) {
    if (std::abs(ev(i).imag()) <= 1e-13 * scale)
      throw compute_error("DegenerateSpectrum", "truncated system has a real exponent");
    if (ev(i).imag() > 0) in.push_back(i);
  }
  if (static_cast<int>(in.size()) != 2 * K)
    throw compute_error("DegenerateSpectrum", "incoming count of the truncated system differs from 2K");
  ExactSolution s;
  s.nu = nu;
  s.k_min = T.L.k_min;
  s.lambda.resize(2 * K);
  s.v.assign(K, MatC(3, 2 * K));
  Bm.resize(2 * K, 2 * K);
  const MatC B = T.sys->B.cast<cplx>();
  for (int n = 0; n < 2 * K; ++n) {
    s.lambda(n) = ev(in[n]);
    VecC col = es.eigenvectors().col(in[n]);
    col /= col.norm();
    for (int a = 0; a < K; ++a) {
      s.v[a].col(n) = col.segment(3 * a, 3);
      Bm.block(2 * a, n, 2, 1) = B * s.v[a].col(n);
    }
  }
  return s;
}

VecC stack(const std::vector<Vec2c>& G) {
  VecC g(2 * G.size());
  for (std::size_t a = 0; a < G.size(); ++a) g.segment(2 * a, 2) = G[a];
  return g;
}

}  // namespace

ExactSolution solve_truncated_exact(const TruncatedSystem& T, const std::vector<Vec2c>& G) {
  if (static_cast<int>(G.size()) != T.K()) throw config_error("boundary data size differs from the mode count");
  MatC Bm;
  ExactSolution s = truncated_basis(T, Bm);
  s.coef = Bm.partialPivLu().solve(stack(G));
  return s;
}

namespace {

// Gram matrix of columns X e^{i mu_n x} on the half line; mu_n = lambda_n + shift.
MatC half_line_gram(const MatC& X, const VecC& lambda) {
  const Eigen::Index n = lambda.size();
  MatC Gm(n, n);
  const MatC XX = X.adjoint() * X;
  for (Eigen::Index a = 0; a < n; ++a)
    for (Eigen::Index b = 0; b < n; ++b) Gm(a, b) = XX(a, b) * I / (lambda(b) - std::conj(lambda(a)));
  return Gm;
}

double quad_form(const MatC& Gm, const VecC& c) { return std::max(0.0, (c.adjoint() * Gm * c)(0).real()); }

// rows of the modified-norm components: (Delta^-1 w+, w-) from V
Mat3c modified_map(const LatticeModes& m) {
  Mat3c W = m.S_inv;
  W.row(0) /= m.delta;
  return W;
}

}  // namespace

NormPieces exact_norms(const TruncatedSystem& T, const ExactSolution& s) {
  const int K = T.K();
  const double g = T.zeta.gamma;
  NormPieces np;
  for (int a = 0; a < K; ++a) {
    const int k = T.L.k_min + a;
    const bool cone = T.L.chi_b(T.zeta, k);
    const MatC X = cone ? MatC(modified_map(T.modes[a]) * s.v[a]) : s.v[a];
    const MatC Gm = half_line_gram(X, s.lambda);
    const double l2sq = quad_form(half_line_gram(s.v[a], s.lambda), s.coef);
    const double tr = (s.v[a] * s.coef).norm();
    const double mod_l2 = quad_form(Gm, s.coef);
    const double mod_tr = (X * s.coef).squaredNorm();
    np.l2.push_back(std::sqrt(l2sq));
    np.trace.push_back(tr);
    np.in_cone.push_back(cone);
    np.modified.push_back(std::sqrt(mod_l2 + mod_tr / g));
  }
  return np;
}

NormPieces quadrature_norms(const TruncatedSystem& T, const ModeState& m) {
  const int K = T.K();
  const double g = T.zeta.gamma;
  NormPieces np;
  for (int a = 0; a < K; ++a) {
    const int k = T.L.k_min + a;
    const bool cone = T.L.chi_b(T.zeta, k);
    double l2 = 0.0, mod = 0.0;
    const Mat3c W = modified_map(T.modes[a]);
    for (std::size_t i = 0; i < m.q.x.size(); ++i) {
      l2 += m.q.w[i] * m.V[a][i].squaredNorm();
      if (cone) mod += m.q.w[i] * (W * m.V[a][i]).squaredNorm();
    }
    // boundary values are stored after the nodes
    Vec3c w_at0;
    w_at0 << m.w_plus[a].back(), m.w_minus[a].back();
    const Vec3c V0 = T.modes[a].r * w_at0;
    np.l2.push_back(std::sqrt(l2));
    np.trace.push_back(V0.norm());
    np.in_cone.push_back(cone);
    if (cone) {
      Vec3c W0 = w_at0;
      W0(0) /= T.modes[a].delta;
      np.modified.push_back(std::sqrt(mod + W0.squaredNorm() / g));
    } else {
      np.modified.push_back(std::sqrt(l2 + V0.squaredNorm() / g));
    }
  }
  return np;
}

Quadrature fixed_point_grid(const TruncatedSystem& T, const FixedPointOptions& opt) {
  double decay = std::numeric_limits<double>::infinity(), osc = 1.0;
  for (const auto& m : T.modes)
    for (int j = 0; j < 3; ++j) {
      decay = std::min(decay, std::abs(m.omega(j).imag()));
      osc = std::max(osc, std::abs(m.omega(j).real()));
    }
  double rmax = 0.0;
  for (const auto& [r, a] : T.alpha) rmax = std::max(rmax, double(std::abs(r)));
  osc = 2.0 * osc + rmax * std::abs(T.nu());
  const double Lx = opt.X2_max > 0 ? opt.X2_max : 32.0 / decay;
  const int panels = opt.panels > 0 ? opt.panels : static_cast<int>(std::ceil(Lx * osc / 4.0)) + 4;
  if (panels > 200000) throw config_error("fixed-point grid too fine for this lattice; use the exact solver");
  return gauss_legendre(Lx, panels, opt.order);
}

ModeState solve_truncated_integral_system(const TruncatedSystem& T, const std::vector<Vec2c>& G,
                                          const std::vector<std::vector<Vec3c>>& F, const FixedPointOptions& opt) {
  const int K = T.K();
  if (static_cast<int>(G.size()) != K) throw config_error("boundary data size differs from the mode count");
  ModeState st;
  st.q = fixed_point_grid(T, opt);
  const auto& q = st.q;
  const std::size_t n = q.x.size();
  if (!F.empty() && (static_cast<int>(F.size()) != K || F[0].size() != n))
    throw config_error("forcing must be given per mode at the quadrature nodes");
  const double nu = T.nu();
  const Mat3c C = coupling_matrix(*T.sys);
  // couplings S_k^-1 B2^-1 M S_{k-r}
  std::map<std::pair<int, int>, Mat3c> cm;
  for (int a = 0; a < K; ++a)
    for (const auto& [r, al] : T.alpha) {
      const int b = a - r;
      if (b >= 0 && b < K) cm[{a, r}] = T.modes[a].S_inv * C * T.modes[b].r;
    }
  std::vector<std::vector<cplx>> phase(T.alpha.size());
  {
    std::size_t i = 0;
    for (const auto& [r, al] : T.alpha) {
      phase[i].resize(n);
      for (std::size_t j = 0; j < n; ++j) phase[i][j] = al * std::exp(I * double(r) * nu * q.x[j]);
      ++i;
    }
  }
  // w stores nodes then the x2 = 0 value at the end
  using Field = std::vector<std::vector<Vec3c>>;
  Field w(K, std::vector<Vec3c>(n + 1, Vec3c::Zero()));
  auto apply = [&](const Field& in, bool with_data) {
    Field out(K, std::vector<Vec3c>(n + 1, Vec3c::Zero()));
    for (int a = 0; a < K; ++a) {
      const LatticeModes& m = T.modes[a];
      std::vector<Vec3c> src(n, Vec3c::Zero());
      std::size_t ri = 0;
      for (const auto& [r, al] : T.alpha) {
        auto it = cm.find({a, r});
        if (it != cm.end()) {
          const int b = a - r;
          for (std::size_t j = 0; j < n; ++j) src[j] += phase[ri][j] * (it->second * in[b][j]);
        }
        ++ri;
      }
      std::vector<cplx> sp(n), fp(n, 0.0);
      std::array<std::vector<cplx>, 2> sm{std::vector<cplx>(n), std::vector<cplx>(n)};
      std::array<std::vector<cplx>, 2> fm{std::vector<cplx>(n, 0.0), std::vector<cplx>(n, 0.0)};
      const bool forced = with_data && !F.empty();
      for (std::size_t j = 0; j < n; ++j) {
        sp[j] = src[j](0);
        sm[0][j] = src[j](1);
        sm[1][j] = src[j](2);
        if (forced) {
          const Vec3c lf = m.S_inv * F[a][j];
          fp[j] = lf(0);
          fm[0][j] = lf(1);
          fm[1][j] = lf(2);
        }
      }
      // w+ = int_x^inf e^{i xi+ (x - s)} (src+ - i l+ F) ds
      std::vector<cplx> g(n);
      for (std::size_t j = 0; j < n; ++j) g[j] = sp[j] - I * fp[j];
      const auto wp = volterra_backward(q, m.omega(0), g);
      // value at x2 = 0
      cplx wp0 = 0.0;
      for (std::size_t j = 0; j < n; ++j) wp0 += q.w[j] * std::exp(-I * m.omega(0) * q.x[j]) * g[j];
      Eigen::Vector2cd rhs = with_data ? Eigen::Vector2cd(G[a]) : Eigen::Vector2cd::Zero();
      rhs -= m.Br_plus * wp0;
      const Eigen::Vector2cd hom = m.Br_minus.partialPivLu().solve(rhs);
      std::array<std::vector<cplx>, 2> wm;
      for (int c = 0; c < 2; ++c) {
        std::vector<cplx> h(n);
        for (std::size_t j = 0; j < n; ++j) h[j] = -sm[c][j] + I * fm[c][j];
        wm[c] = volterra_forward(q, m.omega(1 + c), h);
        for (std::size_t j = 0; j < n; ++j) wm[c][j] += std::exp(I * m.omega(1 + c) * q.x[j]) * hom(c);
      }
      for (std::size_t j = 0; j < n; ++j) out[a][j] = Vec3c(wp[j], wm[0][j], wm[1][j]);
      out[a][n] = Vec3c(wp0, hom(0), hom(1));
    }
    return out;
  };
  auto field_norm = [&](const Field& f) {
    double s = 0.0;
    for (int a = 0; a < K; ++a) {
      for (std::size_t j = 0; j < n; ++j) s += q.w[j] * f[a][j].squaredNorm();
      s += f[a][n].squaredNorm();
    }
    return std::sqrt(s);
  };
  // affine map w -> w_data + L w
  const Field base = apply(Field(K, std::vector<Vec3c>(n + 1, Vec3c::Zero())), true);
  w = base;
  double prev_change = -1.0;
  std::vector<double> ratios;
  for (int it = 1; it <= opt.max_iter; ++it) {
    Field nw = apply(w, false);
    for (int a = 0; a < K; ++a)
      for (std::size_t j = 0; j <= n; ++j) nw[a][j] += base[a][j];
    Field d(K, std::vector<Vec3c>(n + 1));
    for (int a = 0; a < K; ++a)
      for (std::size_t j = 0; j <= n; ++j) d[a][j] = nw[a][j] - w[a][j];
    const double change = field_norm(d), size = std::max(field_norm(nw), 1e-300);
    w = std::move(nw);
    st.iterations = it;
    if (prev_change > 0) ratios.push_back(change / prev_change);
    prev_change = change;
    if (change <= opt.tol * size) break;
    if (!std::isfinite(change) || (ratios.size() >= 8 && ratios.back() > 1.0 && ratios[ratios.size() - 2] > 1.0) ||
        it == opt.max_iter)
      throw compute_error("NoContraction", "fixed-point map does not contract at gamma = " +
                                               std::to_string(T.zeta.gamma));
  }
  st.contraction = ratios.empty() ? 0.0 : ratios.back();
  {
    Field nw = apply(w, false);
    Field d(K, std::vector<Vec3c>(n + 1));
    for (int a = 0; a < K; ++a)
      for (std::size_t j = 0; j <= n; ++j) d[a][j] = nw[a][j] + base[a][j] - w[a][j];
    st.residual = field_norm(d) / std::max(field_norm(w), 1e-300);
  }
  st.V.assign(K, std::vector<Vec3c>(n));
  st.w_plus.assign(K, std::vector<cplx>(n + 1));
  st.w_minus.assign(K, std::vector<Vec2c>(n + 1));
  for (int a = 0; a < K; ++a) {
    for (std::size_t j = 0; j <= n; ++j) {
      st.w_plus[a][j] = w[a][j](0);
      st.w_minus[a][j] = w[a][j].tail<2>();
      if (j < n) st.V[a][j] = T.modes[a].r * w[a][j];
    }
  }
  st.norms = quadrature_norms(T, st).modified;
  return st;
}

double contraction_threshold(const HyperbolicSystem& sys, const PhaseSet& ph, const SingularLattice& L,
                             const Frequency& z1, const std::map<int, double>& alpha, double lo, double hi,
                             int steps) {
  auto contracts = [&](double g) {
    Frequency z = z1;
    z.gamma = g;
    const TruncatedSystem T = make_truncated(sys, ph, L, z, alpha);
    std::vector<Vec2c> G(T.K(), Vec2c(1.0, 1.0));
    FixedPointOptions o;
    o.max_iter = 200;
    try {
      solve_truncated_integral_system(T, G, {}, o);
      return true;
    } catch (const Error& e) {
      if (e.kind() == "NoContraction") return false;
      throw;
    }
  };
  if (contracts(lo)) return lo;
  if (!contracts(hi)) throw compute_error("NoContraction", "no contraction up to gamma = " + std::to_string(hi));
  for (int s = 0; s < steps; ++s) {
    const double mid = std::sqrt(lo * hi);
    (contracts(mid) ? hi : lo) = mid;
  }
  return hi;
}

namespace {

constexpr double kGramEps = 1e-14;

struct SampleEval {
  double main = 0.0, iter = 0.0;
  int iter_k = 0;
};

SampleEval evaluate_sample(const HyperbolicSystem& sys, const PhaseSet& ph, const SingularLattice& L,
                           const Frequency& z, const std::map<int, double>& alpha) {
  const TruncatedSystem T = make_truncated(sys, ph, L, z, alpha);
  const int K = T.K();
  const double g = z.gamma;
  MatC Bm;
  const ExactSolution s = truncated_basis(T, Bm);
  const Eigen::PartialPivLU<MatC> lu(Bm);
  std::vector<double> wX(K);
  std::vector<MatC> gram(K), gram_mod(K), trace_mod(K);
  std::vector<MatR> abs_gram_mod(K), abs_trace_mod(K);
  MatC Q = MatC::Zero(2 * K, 2 * K);
  for (int a = 0; a < K; ++a) {
    wX[a] = std::pow(g, -1.5) * T.modes[a].X.norm();
    gram[a] = half_line_gram(s.v[a], s.lambda);
    const MatC X = T.L.chi_b(z, L.k_min + a) ? MatC(modified_map(T.modes[a]) * s.v[a]) : s.v[a];
    gram_mod[a] = half_line_gram(X, s.lambda);
    trace_mod[a] = X;
    abs_gram_mod[a] = gram_mod[a].cwiseAbs();
    abs_trace_mod[a] = X.cwiseAbs();
    Q += gram[a] + s.v[a].adjoint() * s.v[a] / g;
  }
  std::vector<VecC> data;
  {
    // worst data for the Hilbert form of the main estimate
    const MatC P = lu.inverse();
    MatC Wi = MatC::Zero(2 * K, 2 * K);
    for (int a = 0; a < K; ++a) Wi(2 * a, 2 * a) = Wi(2 * a + 1, 2 * a + 1) = 1.0 / wX[a];
    MatC H = Wi * P.adjoint() * Q * P * Wi;
    H = (0.5 * (H + H.adjoint())).eval();
    Eigen::SelfAdjointEigenSolver<MatC> es(H);
    data.push_back(Wi * es.eigenvectors().col(2 * K - 1));
  }
  for (int k0 : {0, -1, 1})
    for (int c = 0; c < 2; ++c) {
      const int a = k0 - L.k_min;
      if (a < 0 || a >= K) continue;
      VecC G = VecC::Zero(2 * K);
      G(2 * a + c) = 1.0;
      data.push_back(G);
    }
  // sum_t |alpha_r alpha_t| DD(k, k - r), indexed by (k, k - r - t)
  std::vector<std::pair<int, double>> at{{0, 1.0}};
  for (const auto& [t, a] : T.alpha) at.push_back({t, std::abs(a)});
  std::vector<std::map<int, double>> weight(K);
  for (int a = 0; a < K; ++a)
    for (const auto& [r, ar] : T.alpha) {
      const double DD = amplification_DD(L, L.k_min + a, r, z);
      for (const auto& [t, w] : at) {
        const int b = a - r - t;
        if (b >= 0 && b < K) weight[a][b] += std::abs(ar) * w * DD;
      }
    }
  SampleEval ev;
  for (const VecC& G : data) {
    const VecC c = lu.solve(G);
    double l2 = 0.0, tr = 0.0, rhs = 0.0;
    std::vector<double> mod(K), floor(K);
    const VecR ac = c.cwiseAbs();
    for (int a = 0; a < K; ++a) {
      l2 += quad_form(gram[a], c);
      tr += (s.v[a] * c).squaredNorm();
      mod[a] = std::sqrt(quad_form(gram_mod[a], c) + (trace_mod[a] * c).squaredNorm() / g);
      // roundoff level of the Gram form
      floor[a] = std::sqrt(kGramEps * ac.dot(abs_gram_mod[a] * ac)) +
                 kGramEps * (abs_trace_mod[a] * ac).norm() / std::sqrt(g);
      rhs += std::pow(wX[a] * G.segment(2 * a, 2).norm(), 2);
    }
    if (rhs > 0) ev.main = std::max(ev.main, (std::sqrt(l2) + std::sqrt(tr / g)) / std::sqrt(rhs));
    for (int a = 0; a < K; ++a) {
      double cpl = 0.0;
      for (const auto& [b, w] : weight[a]) cpl += w * mod[b];
      const double R = cpl / g + wX[a] * G.segment(2 * a, 2).norm();
      if (mod[a] <= 10.0 * floor[a]) continue;
      if (R > 0 && mod[a] / R > ev.iter) {
        ev.iter = mod[a] / R;
        ev.iter_k = L.k_min + a;
      }
    }
  }
  return ev;
}

EstimatePair sweep(const HyperbolicSystem& sys, const PhaseSet& ph, const SingularLattice& L, double gamma,
                   const std::map<int, double>& alpha, const SweepOptions& opt) {
  const auto Z = estimate_samples(L, gamma, opt.n_rad, opt.n_ang);
  if (Z.empty()) throw config_error("gamma exceeds the frequency cutoff for this epsilon");
  std::vector<SampleEval> ev(Z.size());
  parallel_for(Z.size(), opt.threads, [&](std::size_t i) { ev[i] = evaluate_sample(sys, ph, L, Z[i], alpha); });
  EstimatePair out;
  for (EstimateRatio* e : {&out.iteration, &out.main}) {
    e->epsilon = L.epsilon;
    e->gamma = gamma;
    e->samples = static_cast<int>(Z.size());
  }
  for (std::size_t i = 0; i < Z.size(); ++i) {
    if (ev[i].iter > out.iteration.fitted) {
      out.iteration.fitted = ev[i].iter;
      out.iteration.argmax = Z[i];
      out.iteration.argmax_k = ev[i].iter_k;
    }
    if (ev[i].main > out.main.fitted) {
      out.main.fitted = ev[i].main;
      out.main.argmax = Z[i];
    }
  }
  return out;
}

}  // namespace

EstimatePair estimate_checks(const HyperbolicSystem& sys, const PhaseSet& ph, const SingularLattice& L, double gamma,
                             const std::map<int, double>& alpha, const SweepOptions& opt) {
  return sweep(sys, ph, L, gamma, alpha, opt);
}

EstimateRatio iteration_estimate_check(const HyperbolicSystem& sys, const PhaseSet& ph, const SingularLattice& L,
                                       double gamma, const std::map<int, double>& alpha, const SweepOptions& opt) {
  return sweep(sys, ph, L, gamma, alpha, opt).iteration;
}

EstimateRatio main_estimate_check(const HyperbolicSystem& sys, const PhaseSet& ph, const SingularLattice& L,
                                  double gamma, const std::map<int, double>& alpha, const SweepOptions& opt) {
  return sweep(sys, ph, L, gamma, alpha, opt).main;
}

std::vector<double> beta_l1_partial_sums(const SingularLattice& L, double gamma, int M, int N, int r_max) {
  (void)gamma;
  std::vector<double> sums;
  double s = 0.0;
  int next = 1;
  for (int r = 1; r <= r_max; ++r) {
    const double a = std::pow(1.0 + double(r) * r, -0.5 * (M + N));
    const double b = std::abs(r) <= std::pow(L.epsilon, -L.xi) ? a * L.C5 * std::pow(r, 2.0 + L.delta_exp)
                                                              : a * L.C5 * r / L.epsilon;
    s += 2.0 * b;
    if (r == next) {
      sums.push_back(s);
      next *= 2;
    }
  }
  return sums;
}

ModeFrameReport mode_frame_suite(const SingularLattice& L, const HyperbolicSystem& sys, const PhaseSet& ph,
                        const std::vector<Frequency>& samples) {
  ModeFrameReport rep;
  rep.gap_lo = std::numeric_limits<double>::infinity();
  rep.c_im = std::numeric_limits<double>::infinity();
  for (const auto& z : samples) {
    for (int k = L.k_min; k <= L.k_max; ++k) {
      const Frequency Xk = L.X(z, k);
      const bool cone = cone_side(Xk, L.beta_l, L.delta) != 0;
      if (!(z.gamma > 0) && !cone) continue;
      const LatticeModes m = lattice_modes(sys, ph, Xk, L.delta);
      if (cone) {
        ++rep.samples;
        rep.max_delta = std::max(rep.max_delta, std::abs(m.delta));
        rep.max_Br = std::max({rep.max_Br, m.Br_plus.norm(),
                               Eigen::JacobiSVD<Eigen::Matrix2cd>(m.Br_minus).singularValues()(0)});
        for (int i = 0; i < 3; ++i)
          for (int j = i + 1; j < 3; ++j) {
            const double gap = std::abs(m.omega(i) - m.omega(j)) / Xk.norm();
            rep.gap_lo = std::min(rep.gap_lo, gap);
            rep.gap_hi = std::max(rep.gap_hi, gap);
          }
        if (z.gamma > 0) {
          rep.c_im = std::min(rep.c_im, -m.omega(0).imag() / z.gamma);
          for (int j = 1; j < 3; ++j) rep.c_im = std::min(rep.c_im, m.omega(j).imag() / z.gamma);
          if (!(m.omega(0).imag() < 0 && m.omega(1).imag() > 0 && m.omega(2).imag() > 0)) rep.dichotomy = false;
        }
      }
      for (int r = L.r_min; r <= L.r_max; ++r) {
        if (r == 0) continue;
        if (amplification_D(L, k, r, z) > amplification_DD(L, k, r, z) * (1 + 1e-14)) rep.D_le_DD_violations += 1;
        if (z.gamma > 0 && cone_side(Xk, L.beta_l, L.delta / std::abs(r)) == 0)
          rep.g_max = std::max(rep.g_max, 1.0 / (std::abs(m.delta) * std::abs(r)));
        if (region_classify(L, k, r, z) == Region::II)
          rep.case2_max = std::max(rep.case2_max, L.X(z, k - r).norm() * L.N1 / Xk.norm());
      }
    }
  }
  if (!std::isfinite(rep.gap_lo)) rep.gap_lo = 0.0;
  if (!std::isfinite(rep.c_im)) rep.c_im = 0.0;
  return rep;
}

}  // namespace wkb
