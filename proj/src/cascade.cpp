#include "wkb/cascade.hpp"

#include <fftw3.h>

#include <cmath>
#include <set>

#include "wkb/parallel.hpp"

namespace wkb {

namespace {

constexpr double kTwoPi = 6.283185307179586476925;

cplx fd4_symbol(cplx w, double h) { return (8.0 * std::sin(w * h) - std::sin(2.0 * w * h)) / (6.0 * h); }

Vec3c trace_sum(const Profile<XVec>& U, int n) {
  Vec3c s = Vec3c::Zero();
  for (const auto& [k, v] : U.modes)
    if (k.kind != ModeKey::Mean && k.trace_mode() == n) s += trace(v);
  return s;
}

XVec single_term(int id, const Vec3c& c) {
  XVec x;
  x.terms.push_back({id, 0, c});
  return x;
}

void drop_small(Profile<XVec>& U, double drop) {
  for (auto it = U.modes.begin(); it != U.modes.end();) {
    compress(it->second, drop);
    if (it->second.empty())
      it = U.modes.erase(it);
    else
      ++it;
  }
}

struct Fft2 {
  int nt, nx;
  std::vector<cplx> buf;
  fftw_plan plan;
  Fft2(int nt_, int nx_, int sign) : nt(nt_), nx(nx_), buf(std::size_t(nt_) * nx_) {
    auto* p = reinterpret_cast<fftw_complex*>(buf.data());
    plan = fftw_plan_dft_2d(nt, nx, p, p, sign, FFTW_ESTIMATE);
  }
  ~Fft2() { fftw_destroy_plan(plan); }
  Fft2(const Fft2&) = delete;
  Fft2& operator=(const Fft2&) = delete;
  void run() { fftw_execute(plan); }
};

}  // namespace

double BoxGrid::nu(int s) const { return kTwoPi * s / T; }
double BoxGrid::kappa(int s) const { return kTwoPi * s / (2.0 * X); }

cplx BoxGrid::tau_symbol(int s) const {
  const cplx tau(nu(s), -gamma);
  return fd4 ? fd4_symbol(tau, T / nt) : tau;
}

double BoxGrid::kappa_symbol(int s) const {
  const double k = kappa(s);
  return fd4 ? fd4_symbol(k, 2.0 * X / nx).real() : k;
}

BoxGrid fitted_box(const Eigen::Vector2d& beta, double eps_max, double T_target, double X_target, int nt, int nx,
                   double gamma) {
  BoxGrid b;
  b.nt = nt;
  b.nx = nx;
  b.gamma = gamma;
  auto fit = [&](double bc, double L) {
    if (std::abs(bc) < 1e-14) return L;
    const double unit = kTwoPi * eps_max / std::abs(bc);
    return unit * std::max(1.0, std::round(L / unit));
  };
  b.T = fit(beta(0), T_target);
  b.X = 0.5 * fit(beta(1), 2.0 * X_target);
  return b;
}

BoundaryData pulse_data(const BoxGrid& box, double tc, double wt, double xc, double wx, const Vec2c& g,
                        int harmonic) {
  BoundaryData d;
  auto& s = d.harmonics[harmonic];
  s.resize(std::size_t(box.nt) * box.nx);
  for (int i = 0; i < box.nt; ++i)
    for (int j = 0; j < box.nx; ++j) {
      const double a = (box.t(i) - tc) / wt, b = (box.x(j) - xc) / wx;
      s[std::size_t(i) * box.nx + j] = g * std::exp(-0.5 * (a * a + b * b));
    }
  return d;
}

cplx BoundaryFrame::m1(int k) const {
  return double(k + 1) * (b * B * kit.Linv_nc(k, 1) * M * (e_coef(0) * kit.r.col(1)))(0);
}

cplx BoundaryFrame::m2(int k) const {
  return double(k - 1) * (b * B * kit.Linv_nc(k, -1) * M * (e_coef(0) * kit.r.col(1)))(0);
}

BoundaryFrame build_boundary_frame(const HyperbolicSystem& sys, const ProjectorKit& kit, double tol) {
  if (sys.N != 3 || sys.p != 2) throw config_error("boundary frame needs N = 3, p = 2");
  BoundaryFrame f;
  f.kit = kit;
  f.B = sys.B.cast<cplx>();
  f.M = sys.M.cast<cplx>();
  const Vec3c r2 = kit.r.col(1).normalized(), r3 = kit.r.col(2).normalized();
  Eigen::Matrix2cd Bs;
  Bs.col(0) = f.B * r2;
  Bs.col(1) = f.B * r3;
  Eigen::JacobiSVD<Eigen::Matrix2cd> svd(Bs, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const auto sv = svd.singularValues();
  const double scale = std::max(f.B.norm(), 1e-300);
  if (sv(0) <= tol * scale) throw compute_error("MultiDimKernel", "B vanishes on E^s(beta_l)");
  if (sv(1) > tol * scale) throw compute_error("ULCHolds", "B is injective on E^s(beta_l)");

  auto real_phase = [](auto& v) {
    Eigen::Index i;
    v.cwiseAbs().maxCoeff(&i);
    v *= std::abs(v(i)) / v(i);
  };
  Vec2c v = svd.matrixV().col(1);
  Vec3c e = v(0) * r2 + v(1) * r3;
  const cplx ph = [&] {
    Eigen::Index i;
    e.cwiseAbs().maxCoeff(&i);
    return std::abs(e(i)) / e(i);
  }();
  v *= ph / e.norm();
  e = v(0) * r2 + v(1) * r3;
  f.e = e;
  // coefficients on the kit's (unnormalized) r2, r3
  f.e_coef = Vec2c(v(0) / kit.r.col(1).norm(), v(1) / kit.r.col(2).norm());

  const Vec3c cand = std::abs(e.dot(r2)) < std::abs(e.dot(r3)) ? r2 : r3;
  Vec3c ec = cand - e * e.dot(cand);
  ec.normalize();
  real_phase(ec);
  f.e_check = ec;
  Eigen::Matrix<cplx, 3, 2> R23;
  R23.col(0) = kit.r.col(1);
  R23.col(1) = kit.r.col(2);
  f.e_check_coef = R23.colPivHouseholderQr().solve(ec);

  Eigen::RowVector2cd b = svd.matrixU().col(1).adjoint();
  const Eigen::Index i0 = std::abs(b(0)) > 1e-12 ? 0 : 1;
  b *= std::abs(b(i0)) / b(i0);
  f.b = b;

  const Vec3c e2 = f.e_coef(0) * kit.r.col(1), e3 = f.e_coef(1) * kit.r.col(2);
  const Mat3c B1 = sys.B1.cast<cplx>();
  f.c0 = (b * f.B * (kit.R[1] * e2 + kit.R[2] * e3))(0).real();
  f.c1 = (b * f.B * (kit.R[1] * B1 * e2 + kit.R[2] * B1 * e3))(0).real();
  f.be_residual = (f.B * e).norm();
  f.b_residual = std::max(std::abs((b * f.B * kit.r.col(1))(0)), std::abs((b * f.B * kit.r.col(2))(0)));
  f.m_limit = (b * f.B * kit.r.col(0))(0) * (kit.ell.row(0) * f.M * e2)(0) / (kit.omega(1) - kit.omega(0));
  return f;
}

std::map<int, cplx> solve_xlop(const BoundaryFrame& frame, cplx tau, double kappa, const std::map<int, cplx>& h,
                               int K_b) {
  std::map<int, cplx> a;
  const cplx D = I * (frame.c0 * tau + frame.c1 * kappa);
  for (int sgn : {1, -1}) {
    bool any = false;
    VecC rhs = VecC::Zero(K_b);
    for (int i = 0; i < K_b; ++i) {
      auto it = h.find(sgn * (i + 1));
      if (it != h.end()) {
        rhs(i) = it->second;
        any = any || it->second != 0.0;
      }
    }
    if (!any) continue;
    MatC A = MatC::Zero(K_b, K_b);
    for (int i = 0; i < K_b; ++i) {
      const int n = sgn * (i + 1);
      A(i, i) = D;
      const int lo = n - 1, hi = n + 1;
      if (lo != 0 && std::abs(lo) <= K_b) A(i, std::abs(lo) - 1) += frame.m1(lo);
      if (hi != 0 && std::abs(hi) <= K_b) A(i, std::abs(hi) - 1) += frame.m2(hi);
    }
    const VecC x = A.partialPivLu().solve(rhs);
    for (int i = 0; i < K_b; ++i) a[sgn * (i + 1)] = x(i);
  }
  return a;
}

FreqContext make_context(const HyperbolicSystem& sys, const ProjectorKit& kit, cplx tau, double kappa,
                         ExpTable& tab) {
  FreqContext c;
  c.sys = &sys;
  c.kit = &kit;
  c.tau = tau;
  c.kappa = kappa;
  c.tab = &tab;
  c.B1 = sys.B1.cast<cplx>();
  c.B2 = sys.B2.cast<cplx>();
  c.M = sys.M.cast<cplx>();
  c.B = sys.B.cast<cplx>();
  for (int m = 0; m < 3; ++m) {
    const cplx a = (kit.ell.row(m) * kit.r.col(m))(0);
    const cplx b = (kit.ell.row(m) * c.B1 * kit.r.col(m))(0);
    c.lam[m] = -(a * tau + b * kappa);
    c.lam_id[m] = tab.intern(c.lam[m]);
  }
  c.dec = decompose(sys, Frequency{tau.real(), -tau.imag(), kappa});
  for (int m = 0; m < 3; ++m) c.omega_id[m] = tab.intern(c.dec.omega(m));
  return c;
}

XVec apply_Lf(const FreqContext& c, const XVec& X) {
  XVec out = mat_apply(I * c.tau * Mat3c::Identity() + I * c.kappa * c.B1, X);
  const XVec d = mat_apply(c.B2, deriv(X, *c.tab));
  out.terms.insert(out.terms.end(), d.terms.begin(), d.terms.end());
  compress(out);
  return out;
}

XVec mean_solve(const FreqContext& c, const XVec& F, const Vec2c& g0) {
  if (F.empty() && g0.squaredNorm() == 0.0) return {};
  const ModeDecomposition& d = c.dec;
  std::array<XSc, 3> w;
  std::vector<int> in;
  for (int m = 0; m < 3; ++m) {
    const XSc s = dot(d.ell.row(m), F);
    if (d.omega(m).imag() > 0.0) {
      in.push_back(m);
      if (!s.empty()) w[m] = integrate_in(c.omega_id[m], s, *c.tab, c.x2scale);
    } else if (!s.empty()) {
      w[m] = integrate_out(c.omega_id[m], s, *c.tab);
    }
  }
  if (in.size() != 2) throw compute_error("DegenerateSpectrum", "mean problem needs two decaying modes");
  Eigen::Matrix2cd Bin;
  Vec3c part = Vec3c::Zero();
  for (int m = 0; m < 3; ++m) part += d.r.col(m) * trace(w[m]);
  for (int k = 0; k < 2; ++k) Bin.col(k) = c.B * d.r.col(in[k]);
  Eigen::JacobiSVD<Eigen::Matrix2cd> svd(Bin);
  if (svd.singularValues()(1) <= 1e-10 * svd.singularValues()(0))
    throw compute_error("ULCViolation", "B is not invertible on the decaying modes");
  const Vec2c coef = Bin.partialPivLu().solve(g0 - c.B * part);
  XVec u;
  for (int k = 0; k < 2; ++k) w[in[k]].terms.push_back({c.omega_id[in[k]], 0, coef(k)});
  for (int m = 0; m < 3; ++m) {
    const XVec t = outer(d.r.col(m), w[m]);
    u.terms.insert(u.terms.end(), t.terms.begin(), t.terms.end());
  }
  compress(u);
  return u;
}

XSc transport_solve(const FreqContext& c, int m, cplx trace0, const XSc& s) {
  const int id = c.lam_id[m];
  XSc out;
  if (c.lam[m].imag() > 0.0) {
    if (!s.empty()) out = integrate_in(id, s, *c.tab, c.x2scale);
    if (trace0 != 0.0) out.terms.push_back({id, 0, trace0});
    compress(out);
    return out;
  }
  if (trace0 != 0.0) throw compute_error("OutgoingWithData", "boundary data on an outgoing phase");
  if (!s.empty()) out = integrate_out(id, s, *c.tab);
  return out;
}

namespace {

struct LocalDiag {
  ClipStats clip;
  double theta1 = 0, a0 = 0, bsolv = 0, recomb = 0, tail = 0;
};

Profile<XVec> apply_Lf(const FreqContext& c, const Profile<XVec>& U) {
  Profile<XVec> out;
  for (const auto& [k, v] : U.modes) out.modes[k] = apply_Lf(c, v);
  return out;
}

void solve_frequency(const HyperbolicSystem& sys, const CascadeResult& res, double gmax, FreqSolution& fs,
                     LocalDiag& d) {
  const CascadeConfig& cfg = res.cfg;
  const ProjectorKit& kit = res.kit;
  FreqContext c = make_context(sys, kit, fs.tau, fs.kappa, fs.tab);
  const bool weak = cfg.regime == Regime::Weak;
  const double drop = 1e-18 * gmax;

  auto H = [&](int j, int n) -> Vec2c {
    if (res.has_data(j)) {
      auto it = fs.G.find(n);
      if (it != fs.G.end()) return it->second;
    }
    return Vec2c::Zero();
  };
  auto fM = [&](const Profile<XVec>& U, ClipStats* st) { return multiply_osc(U, res.spectrum, res.M, cfg.caps, st); };

  Eigen::Matrix2cd Bs;
  Bs.col(0) = c.B * kit.r.col(1);
  Bs.col(1) = c.B * kit.r.col(2);
  const auto Bs_lu = Bs.partialPivLu();
  Vec2c Bec = Vec2c::Zero();
  if (weak) Bec = c.B * res.frame->e_check;

  Profile<XVec> prev;
  for (int j = res.first; j <= cfg.J; ++j) {
    Profile<XVec> IEP;
    if (j > res.first) {
      IEP = apply_R(kit, axpy(fM(prev, &d.clip), apply_Lf(c, prev), 1.0));
      for (auto& [k, v] : IEP.modes) v = scaled(v, -1.0);
      drop_small(IEP, drop);
    }
    Profile<XVec> U = IEP;

    const Profile<XVec> fmI = fM(IEP, nullptr);
    XVec F;
    if (const XVec* p = fmI.find(ModeKey::mean())) F = scaled(*p, -1.0);
    const Vec2c g0 = H(j, 0) - c.B * trace_sum(IEP, 0);
    const XVec Ubar = mean_solve(c, F, g0);
    Profile<XVec> withmean = IEP;
    if (!Ubar.empty()) {
      withmean.modes[ModeKey::mean()] = Ubar;
      U.modes[ModeKey::mean()] = Ubar;
    }
    const Profile<XVec> src = axpy(fM(withmean, nullptr), apply_Lf(c, IEP), 1.0);

    for (const auto& [k, v] : src.modes) {
      if (k.kind != ModeKey::Pure1) continue;
      const XSc sig = transport_solve(c, 0, 0.0, scaled(dot(kit.ell.row(0), v), -1.0));
      if (sig.empty()) continue;
      d.theta1 = std::max(d.theta1, std::sqrt(norm2(sig)) / gmax);
      U.add(k, outer(kit.r.col(0), sig));
    }

    std::set<int> ns;
    if (res.has_data(j))
      for (const auto& [n, g] : fs.G) ns.insert(n);
    for (const auto& [k, v] : U.modes)
      if (k.kind != ModeKey::Mean) ns.insert(k.trace_mode());
    for (const auto& [k, v] : src.modes)
      if (k.kind == ModeKey::Pure2 || k.kind == ModeKey::Pure3) ns.insert(k.a);
    ns.erase(0);

    for (int n : ns) {
      const Vec2c rhs = H(j, n) - c.B * trace_sum(U, n);
      Vec2c tr;
      if (!weak) {
        tr = Bs_lu.solve(rhs);
        d.recomb = std::max(d.recomb, (Bs * tr - rhs).norm() / gmax);
      } else {
        const cplx acheck = Bec.dot(rhs) / Bec.squaredNorm();
        if (j == res.first) d.a0 = std::max(d.a0, std::abs(acheck) / gmax);
        if (j > res.first) d.bsolv = std::max(d.bsolv, std::abs((res.frame->b * rhs)(0)) / gmax);
        tr = acheck * res.frame->e_check_coef;
        const Vec3c back = tr(0) * kit.r.col(1) + tr(1) * kit.r.col(2);
        d.recomb = std::max(d.recomb, (back - acheck * res.frame->e_check).norm() / gmax);
      }
      for (int m = 1; m <= 2; ++m) {
        const ModeKey key = ModeKey::pure(m + 1, n);
        XSc s;
        if (const XVec* p = src.find(key)) s = scaled(dot(kit.ell.row(m), *p), -1.0);
        if (tr(m - 1) == 0.0 && s.empty()) continue;
        U.add(key, outer(kit.r.col(m), transport_solve(c, m, tr(m - 1), s)));
      }
    }

    if (weak) {
      const BoundaryFrame& fr = *res.frame;
      const Profile<XVec> Y = apply_R(kit, axpy(fM(U, nullptr), apply_Lf(c, U), 1.0));
      std::map<int, Vec3c> ytr;
      for (const auto& [k, v] : Y.modes)
        if (k.kind != ModeKey::Mean) {
          auto& s = ytr.try_emplace(k.trace_mode(), Vec3c::Zero()).first->second;
          s += trace(v);
        }
      std::set<int> hn;
      for (const auto& [n, y] : ytr) hn.insert(n);
      if (res.has_data(j + 1))
        for (const auto& [n, g] : fs.G) hn.insert(n);
      std::map<int, cplx> h;
      for (int n : hn) {
        if (n == 0) continue;
        cplx v = (fr.b * H(j + 1, n))(0);
        if (auto it = ytr.find(n); it != ytr.end()) v += (fr.b * c.B * it->second)(0);
        if (std::abs(n) > cfg.K_b)
          d.tail = std::max(d.tail, std::abs(v) / gmax);
        else if (v != 0.0)
          h[n] = -I * double(n) * v;
      }
      const std::map<int, cplx> a = solve_xlop(fr, c.tau, c.kappa, h, cfg.K_b);
      for (const auto& [n, an] : a) {
        if (an == 0.0) continue;
        U.add(ModeKey::pure(2, n), single_term(c.lam_id[1], an * fr.e_coef(0) * kit.r.col(1)));
        U.add(ModeKey::pure(3, n), single_term(c.lam_id[2], an * fr.e_coef(1) * kit.r.col(2)));
      }
    }
    drop_small(U, drop);
    fs.U.push_back(U);
    prev = std::move(U);
  }
}

}  // namespace

CascadeResult run_cascade(const HyperbolicSystem& sys, const PhaseSet& ph, const BoundaryData& G,
                          const CascadeConfig& cfg) {
  if (sys.N != 3 || sys.p != 2) throw config_error("cascade needs N = 3, p = 2");
  if (cfg.J < (cfg.regime == Regime::Weak ? 0 : 1)) throw config_error("order J out of range");
  CascadeResult res;
  res.cfg = cfg;
  res.sys = sys;
  res.ph = ph;
  res.kit = build_projectors(sys, ph);
  res.M = sys.M.cast<cplx>();
  if ((res.M * res.kit.r.col(2)).norm() > 1e-10 * std::max(1.0, res.M.norm()))
    throw config_error("cascade needs M r3 = 0");
  if (cfg.regime == Regime::Weak) {
    res.first = 0;
    res.spectrum = {-1, 1};
    res.frame = build_boundary_frame(sys, res.kit);
  } else {
    res.first = 1;
    res.spectrum = {1};
    Eigen::Matrix2cd Bs;
    Bs.col(0) = sys.B.cast<cplx>() * res.kit.r.col(1).normalized();
    Bs.col(1) = sys.B.cast<cplx>() * res.kit.r.col(2).normalized();
    Eigen::JacobiSVD<Eigen::Matrix2cd> svd(Bs);
    const auto s = svd.singularValues();
    if (s(1) <= 1e-10 * s(0)) throw compute_error("ULCViolation", "B is not an isomorphism on E^s(beta_l)");
    res.diag.split_cond = s(0) / s(1);
  }

  const BoxGrid& box = cfg.box;
  const int nt = box.nt, nx = box.nx;
  std::map<int, std::vector<Vec2c>> coef;
  {
    Fft2 fft(nt, nx, FFTW_FORWARD);
    for (const auto& [n, samples] : G.harmonics) {
      if (samples.size() != std::size_t(nt) * nx) throw config_error("boundary data does not match the grid");
      auto& out = coef[n];
      out.assign(samples.size(), Vec2c::Zero());
      for (int comp = 0; comp < 2; ++comp) {
        for (int i = 0; i < nt; ++i)
          for (int j = 0; j < nx; ++j)
            fft.buf[std::size_t(i) * nx + j] = std::exp(-box.gamma * box.t(i)) * samples[std::size_t(i) * nx + j](comp);
        fft.run();
        for (int i = 0; i < nt; ++i)
          for (int j = 0; j < nx; ++j) {
            const double k = box.kappa(BoxGrid::signed_index(j, nx));
            out[std::size_t(i) * nx + j](comp) = fft.buf[std::size_t(i) * nx + j] * std::exp(I * k * box.X) / double(nt * nx);
          }
      }
    }
  }
  double gmax = 0.0;
  for (const auto& [n, v] : coef)
    for (const auto& c : v) gmax = std::max(gmax, c.cwiseAbs().maxCoeff());
  if (gmax == 0.0) gmax = 1.0;

  for (int i = 0; i < nt; ++i)
    for (int j = 0; j < nx; ++j) {
      double m = 0.0;
      for (const auto& [n, v] : coef) m = std::max(m, v[std::size_t(i) * nx + j].cwiseAbs().maxCoeff());
      if (m <= cfg.drop_rel * gmax) {
        ++res.diag.dropped;
        continue;
      }
      FreqSolution fs;
      fs.st = BoxGrid::signed_index(i, nt);
      fs.sx = BoxGrid::signed_index(j, nx);
      fs.tau = box.tau_symbol(fs.st);
      fs.kappa = box.kappa_symbol(fs.sx);
      for (const auto& [n, v] : coef)
        if (v[std::size_t(i) * nx + j].squaredNorm() > 0.0) fs.G[n] = v[std::size_t(i) * nx + j];
      res.freqs.push_back(std::move(fs));
    }
  res.diag.frequencies = static_cast<int>(res.freqs.size());

  std::vector<LocalDiag> diags(res.freqs.size());
  parallel_for(res.freqs.size(), cfg.threads, [&](std::size_t k) { solve_frequency(sys, res, gmax, res.freqs[k], diags[k]); });
  for (const auto& d : diags) {
    res.diag.clip.clipped += d.clip.clipped;
    res.diag.clip.total += d.clip.total;
    res.diag.clip.count += d.clip.count;
    res.diag.theta1_norm = std::max(res.diag.theta1_norm, d.theta1);
    res.diag.check_a0 = std::max(res.diag.check_a0, d.a0);
    res.diag.b_solvability = std::max(res.diag.b_solvability, d.bsolv);
    res.diag.recombination = std::max(res.diag.recombination, d.recomb);
    res.diag.xlop_tail = std::max(res.diag.xlop_tail, d.tail);
  }
  return res;
}

std::vector<Vec3c> eval_mode(const CascadeResult& res, int k, const ModeKey& key, double x2) {
  const BoxGrid& box = res.cfg.box;
  const int nt = box.nt, nx = box.nx;
  const int idx = k - res.first;
  std::vector<Vec3c> out(std::size_t(nt) * nx, Vec3c::Zero());
  if (idx < 0 || idx >= res.cfg.J - res.first + 1) return out;
  Fft2 fft(nt, nx, FFTW_BACKWARD);
  std::vector<std::pair<std::size_t, Vec3c>> vals;
  for (const auto& fs : res.freqs) {
    const XVec* p = fs.U[idx].find(key);
    if (!p) continue;
    const std::size_t pos = std::size_t((fs.st + nt) % nt) * nx + (fs.sx + nx) % nx;
    vals.emplace_back(pos, eval(*p, fs.tab, x2) * std::exp(-I * box.kappa(fs.sx) * box.X));
  }
  for (int comp = 0; comp < 3; ++comp) {
    std::fill(fft.buf.begin(), fft.buf.end(), cplx(0.0));
    for (const auto& [pos, v] : vals) fft.buf[pos] = v(comp);
    fft.run();
    for (int i = 0; i < nt; ++i) {
      const double w = std::exp(box.gamma * box.t(i));
      for (int j = 0; j < nx; ++j) out[std::size_t(i) * nx + j](comp) = w * fft.buf[std::size_t(i) * nx + j];
    }
  }
  return out;
}

double causality_ratio(const CascadeResult& res, double t_cut, const std::vector<double>& x2s) {
  const BoxGrid& box = res.cfg.box;
  double early = 0.0, all = 0.0;
  for (int k = res.first; k <= res.cfg.J; ++k) {
    std::set<ModeKey> keys;
    for (const auto& fs : res.freqs)
      for (const auto& [key, v] : fs.U[k - res.first].modes) keys.insert(key);
    for (const ModeKey& key : keys)
      for (double x2 : x2s) {
        const auto g = eval_mode(res, k, key, x2);
        for (int i = 0; i < box.nt; ++i)
          for (int j = 0; j < box.nx; ++j) {
            const double a = g[std::size_t(i) * box.nx + j].norm();
            all = std::max(all, a);
            if (box.t(i) < t_cut) early = std::max(early, a);
          }
      }
  }
  return all > 0 ? early / all : 0.0;
}

std::vector<double> consistency_defects(const CascadeResult& res) {
  const Caps open{1 << 20, 1 << 20};
  const int n = res.cfg.J - res.first + 1;
  std::vector<double> num(n, 0.0), den(n, 0.0);
  for (const auto& fs : res.freqs) {
    ExpTable tab = fs.tab;
    FreqContext c;
    c.tau = fs.tau;
    c.kappa = fs.kappa;
    c.tab = &tab;
    c.B1 = res.sys.B1.cast<cplx>();
    c.B2 = res.sys.B2.cast<cplx>();
    auto norm = [&](const Profile<XVec>& P) {
      double s = 0.0;
      for (const auto& [k, v] : P.modes) s += half_line_norm2(v, tab);
      return s;
    };
    // entry 0: L_theta U_first alone; entry i: L_theta U_{first+i} + L U_{first+i-1} + f M U_{first+i-1}
    for (int i = 0; i < n; ++i) {
      Profile<XVec> d = apply_Ltheta(res.kit, fs.U[i]);
      if (i > 0) {
        const Profile<XVec> lu = apply_Lf(c, fs.U[i - 1]);
        d = axpy(lu, d, 1.0);
        d = axpy(multiply_osc(fs.U[i - 1], res.spectrum, res.M, open), d, 1.0);
        den[i] += norm(lu);
      } else {
        den[i] += norm(apply_Lf(c, fs.U[0]));
      }
      num[i] += norm(d);
    }
  }
  std::vector<double> out(n);
  for (int i = 0; i < n; ++i) out[i] = den[i] > 0 ? std::sqrt(std::max(num[i], 0.0) / den[i]) : 0.0;
  return out;
}

}  // namespace wkb
