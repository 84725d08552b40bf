#include "wkb/residual.hpp"

#include <cmath>
#include <set>
#include <unordered_map>

namespace wkb {

namespace {

constexpr double kTwoPi = 6.283185307179586476925;

double mode_w(const ProjectorKit& kit, const ModeKey& k) {
  if (k.kind == ModeKey::Mean) return 0.0;
  if (k.kind == ModeKey::Nc) return k.a * kit.omega(1) + k.b * kit.omega(2);
  return k.a * kit.omega(k.kind - 1);
}

int as_int(double v, const char* what) {
  const double r = std::round(v);
  if (std::abs(v - r) > 1e-6 * std::max(1.0, std::abs(v)))
    throw config_error(std::string("epsilon does not fit the box in ") + what);
  return static_cast<int>(r);
}

struct FreqPieces {
  // per order index: A = L U_k + f M U_k, Bt = i L_theta U_k
  std::vector<std::map<ModeKey, XVec>> A, Bt;
  std::map<int, std::vector<ModeKey>> keys_by_n;
  std::vector<std::map<int, Vec3c>> trace_by_n;
};

}  // namespace

std::pair<double, double> loglog_fit(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  return {slope, (sy - slope * sx) / n};
}

ResidualReport residual_scan(const CascadeResult& res, const std::vector<double>& eps) {
  const Caps open{1 << 20, 1 << 20};
  const BoxGrid& box = res.cfg.box;
  const ProjectorKit& kit = res.kit;
  const int norders = res.cfg.J - res.first + 1;
  const Mat23c B = res.sys.B.cast<cplx>();
  const double area = box.T * 2.0 * box.X;

  std::vector<FreqPieces> pieces(res.freqs.size());
  std::vector<ExpTable> tabs(res.freqs.size());
  ResidualReport rep;
  double theta2 = 0.0, h12 = 0.0;
  for (std::size_t i = 0; i < res.freqs.size(); ++i) {
    const FreqSolution& fs = res.freqs[i];
    tabs[i] = fs.tab;
    FreqContext c;
    c.tau = fs.tau;
    c.kappa = fs.kappa;
    c.tab = &tabs[i];
    c.B1 = res.sys.B1.cast<cplx>();
    c.B2 = res.sys.B2.cast<cplx>();
    FreqPieces& p = pieces[i];
    p.A.resize(norders);
    p.Bt.resize(norders);
    p.trace_by_n.resize(norders);
    std::set<ModeKey> keys;
    for (int o = 0; o < norders; ++o) {
      const Profile<XVec>& U = fs.U[o];
      for (const auto& [k, v] : U.modes) {
        p.A[o][k] = apply_Lf(c, v);
        if (k.kind != ModeKey::Mean) {
          XVec b = mat_apply(I * kit.L_mode(k), v);
          compress(b);
          p.Bt[o][k] = b;
        }
        auto& t = p.trace_by_n[o].try_emplace(k.trace_mode(), Vec3c::Zero()).first->second;
        t += trace(v);
        keys.insert(k);
      }
      for (const auto& [k, v] : multiply_osc(U, res.spectrum, res.M, open).modes) {
        add_into(p.A[o][k], v, 1.0);
        keys.insert(k);
      }
    }
    for (const ModeKey& k : keys) p.keys_by_n[k.trace_mode()].push_back(k);

    // leading defect in L2 and H1 over (t, x, theta)
    const double nu = box.nu(fs.st), ka = box.kappa(fs.sx);
    for (const auto& [k, v] : p.A[norders - 1]) {
      const double l2 = half_line_norm2(v, tabs[i]);
      double th = 0.0;
      if (k.kind == ModeKey::Nc)
        th = double(k.a) * k.a + double(k.b) * k.b;
      else if (k.kind != ModeKey::Mean)
        th = double(k.a) * k.a;
      theta2 += l2;
      h12 += (1.0 + nu * nu + ka * ka + th) * l2 + half_line_norm2(deriv(v, tabs[i]), tabs[i]);
    }
  }
  rep.lead_theta_l2 = std::sqrt(area * theta2);
  rep.lead_h1 = std::sqrt(area * h12);

  std::vector<double> ex, ey;
  for (double e : eps) {
    const int st = as_int(kit.beta(0) * box.T / (kTwoPi * e), "t");
    const int sx = as_int(kit.beta(1) * 2.0 * box.X / (kTwoPi * e), "x1");
    std::unordered_map<long long, std::vector<std::pair<std::size_t, int>>> groups;
    for (std::size_t i = 0; i < res.freqs.size(); ++i) {
      std::set<int> ns;
      for (const auto& [n, v] : pieces[i].keys_by_n) ns.insert(n);
      for (const auto& [n, g] : res.freqs[i].G) ns.insert(n);
      for (int n : ns) {
        const long long Ft = res.freqs[i].st + (long long)n * st, Fx = res.freqs[i].sx + (long long)n * sx;
        groups[(Ft << 32) ^ (Fx & 0xffffffffLL)].emplace_back(i, n);
      }
    }
    double interior = 0.0, bnd = 0.0, lead = 0.0;
    std::vector<ExpTerm> terms, lterms;
    for (const auto& [F, members] : groups) {
      terms.clear();
      lterms.clear();
      Vec2c b = Vec2c::Zero();
      for (const auto& [i, n] : members) {
        const FreqPieces& p = pieces[i];
        if (auto it = p.keys_by_n.find(n); it != p.keys_by_n.end())
          for (const ModeKey& k : it->second) {
            XVec d;
            for (int o = 0; o < norders; ++o) {
              const int ord = res.first + o;
              if (auto a = p.A[o].find(k); a != p.A[o].end()) add_into(d, a->second, std::pow(e, ord));
              if (auto bt = p.Bt[o].find(k); bt != p.Bt[o].end()) add_into(d, bt->second, std::pow(e, ord - 1));
            }
            const double w = mode_w(kit, k) / e;
            for (const auto& t : d.terms) terms.push_back({tabs[i].lam[t.id] + w, t.pow, t.c});
            if (auto a = p.A[norders - 1].find(k); a != p.A[norders - 1].end())
              for (const auto& t : a->second.terms) lterms.push_back({tabs[i].lam[t.id] + w, t.pow, t.c});
          }
        for (int o = 0; o < norders; ++o)
          if (auto it = p.trace_by_n[o].find(n); it != p.trace_by_n[o].end())
            b += std::pow(e, res.first + o) * (B * it->second);
        if (auto g = res.freqs[i].G.find(n); g != res.freqs[i].G.end()) b -= e * g->second;
      }
      interior += gram_norm2(terms);
      lead += gram_norm2(lterms);
      bnd += b.squaredNorm();
    }
    ResidualRow row;
    row.eps = e;
    row.interior_l2 = std::sqrt(std::max(0.0, area * interior));
    row.boundary_l2 = std::sqrt(area * bnd);
    row.lead_osc_l2 = std::sqrt(std::max(0.0, area * lead));
    rep.boundary_max = std::max(rep.boundary_max, row.boundary_l2);
    if (rep.lead_h1 > 0) rep.periodic_ratio_max = std::max(rep.periodic_ratio_max, row.lead_osc_l2 / rep.lead_h1);
    rep.rows.push_back(row);
    ex.push_back(e);
    ey.push_back(row.interior_l2);
  }
  if (ex.size() >= 2) std::tie(rep.slope, rep.intercept) = loglog_fit(ex, ey);
  return rep;
}

}  // namespace wkb
