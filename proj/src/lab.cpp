#include "wkb/lab.hpp"

#include <fftw3.h>

#include <boost/version.hpp>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <set>
#include <sstream>

#include "wkb/estimates.hpp"
#include "wkb/fixture.hpp"
#include "wkb/kernels.hpp"
#include "wkb/residual.hpp"

namespace wkb {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      // common
      "experiment", "fixture", "out", "seed", "threads",
      // check-assumptions
      "resolution_deg", "zero_tol",
      // resonance-audit
      "q_max", "resonance_tol", "delta_exp", "audit_K", "singular_tol",
      // cascade, cascade-weak, residual-scan
      "regime", "J", "eps_max", "eps_halvings", "T", "X", "nt", "nx", "gamma", "K_b", "K_pure", "K_nc", "drop_rel",
      "pulse_tc", "pulse_wt", "pulse_xc", "pulse_wx", "pulse_g", "harmonic", "snapshots", "snapshot_x2",
      "multiplier_K",
      // estimate-scan
      "alpha", "xi", "delta", "N1", "C5", "chi_C", "k_cap", "r_cap", "M_cap", "lb_chi_C", "lb_k_cap", "lb_eps",
      "lb_n_rad", "lb_n_ang", "eps_decades", "n_rad", "n_ang", "gamma_doubling", "decay_exponent", "laplace_trials",
      "laplace_gammas", "gamma0_lo", "gamma0_hi", "run_lower_bounds", "run_estimates", "run_laplace", "run_mode_frame"};
  return keys;
}

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.15g", v);
  return buf;
}

json cjson(cplx z) { return json::array({z.real(), z.imag()}); }

template <class V>
json vjson(const V& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if constexpr (std::is_same_v<std::decay_t<decltype(v(i))>, cplx>)
      a.push_back(cjson(v(i)));
    else
      a.push_back(double(v(i)));
  }
  return a;
}

json fjson(const Frequency& z) { return json{{"sigma", z.sigma}, {"gamma", z.gamma}, {"eta", z.eta}}; }

class Csv {
 public:
  Csv(const fs::path& p, const std::vector<std::string>& header) : os_(p) {
    if (!os_) throw config_error("cannot write " + p.string());
    row(header);
  }
  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) os_ << (i ? "," : "") << cells[i];
    os_ << "\n";
  }

 private:
  std::ofstream os_;
};

struct Out {
  fs::path dir;
  std::vector<std::string> files;

  Csv csv(const std::string& name, const std::vector<std::string>& header) {
    files.push_back(name);
    return Csv(dir / name, header);
  }
  void write_json(const std::string& name, const json& j) {
    std::ofstream os(dir / name);
    if (!os) throw config_error("cannot write " + (dir / name).string());
    os << j.dump(2) << "\n";
    files.push_back(name);
  }
};

struct Loaded {
  Fixture fx;
  PhaseSet ph;
  bool has_phases = false;
};

Loaded load(const RunConfig& c, bool need_phases) {
  if (c.fixture.empty()) throw config_error("no fixture given");
  Loaded l{load_fixture(c.fixture), {}, false};
  if (l.fx.beta_l) {
    l.ph = build_phases(l.fx.sys, *l.fx.beta_l);
    l.has_phases = true;
  } else if (need_phases) {
    throw fixture_error("FixtureError", "fixture has no beta_l");
  }
  return l;
}

json system_json(const Fixture& fx) {
  const auto& c = fx.sys.cert;
  return json{{"id", fx.sys.id},
              {"N", fx.sys.N},
              {"p", fx.sys.p},
              {"real", fx.real},
              {"hyperbolicity",
               {{"circle_samples", c.circle_samples},
                {"min_root_gap", c.min_root_gap},
                {"worst_direction", c.worst_direction},
                {"max_imag_root", c.max_imag_root},
                {"det_B2", c.det_B2},
                {"cond_B2", c.cond_B2},
                {"rank_tol", c.rank_tol}}}};
}

json phases_json(const PhaseSet& ph) {
  json g = json::array();
  for (const auto& v : ph.group_velocity) g.push_back(json::array({v(0), v(1)}));
  return json{{"beta_l", json::array({ph.beta_l(0), ph.beta_l(1)})},
              {"omega", vjson(ph.omega)},
              {"n_out", ph.n_out},
              {"group_velocity", g}};
}

// ---------------------------------------------------------------- check-assumptions

json check_assumptions(const RunConfig& c, Out& out) {
  const Loaded l = load(c, false);
  const HyperbolicSystem& sys = l.fx.sys;
  const double tol = c.num("zero_tol", 1e-8);
  const LopatinskiProbe p = scan_ulc(sys, c.num("resolution_deg", 1.0), tol);

  Csv csv = out.csv("lopatinski.csv", {"sigma", "gamma", "eta", "re_delta", "im_delta", "abs_delta", "region_tag"});
  for (const auto& s : p.samples)
    csv.row({num(s.z.sigma), num(s.z.gamma), num(s.z.eta), num(s.delta.real()), num(s.delta.imag()),
             num(std::abs(s.delta)), s.region});

  json fail = json::array();
  for (std::size_t i = 0; i < p.failure_set.size(); ++i) {
    json f = fjson(p.failure_set[i]);
    if (i < p.dtau_at_failure.size()) {
      f["dtau_delta"] = cjson(p.dtau_at_failure[i]);
      f["abs_dtau_delta"] = std::abs(p.dtau_at_failure[i]);
    }
    fail.push_back(f);
  }
  const bool ulc = p.failure_set.empty() && p.min_abs_delta > tol;
  json lop{{"resolution_deg", c.num("resolution_deg", 1.0)},
           {"samples", p.samples.size()},
           {"min_abs_delta", p.min_abs_delta},
           {"argmin", fjson(p.argmin)},
           {"failure_set", fail},
           {"verdict", ulc ? "uniform" : (p.failure_set.empty() ? "undetermined" : "weak")}};
  if (!p.failure_set.empty()) {
    lop["beta_l"] = json::array({p.beta_l(0), p.beta_l(1)});
    lop["dtau_delta"] = cjson(p.dtau_delta);
    lop["c_plus"] = p.c_plus;
    lop["cone_delta"] = p.delta_cone;
    lop["cone_ratio"] = json::array({p.cone_ratio_lo, p.cone_ratio_hi});
  }
  json cert{{"system", system_json(l.fx)}, {"lopatinski", lop}};
  if (l.has_phases) cert["phases"] = phases_json(l.ph);
  out.write_json("assumptions.json", cert);
  return json{{"verdict", lop["verdict"]}, {"min_abs_delta", p.min_abs_delta}, {"failures", fail.size()}};
}

// ---------------------------------------------------------------- resonance-audit

json resonance_audit(const RunConfig& c, Out& out) {
  const Loaded l = load(c, true);
  const PhaseSet& ph = l.ph;
  const int N = int(ph.omega.size());
  const long long q_max = static_cast<long long>(c.num("q_max", 1e6));
  const double rtol = c.num("resonance_tol", 1e-13), dexp = c.num("delta_exp", 0.1);

  Csv csv = out.csv("resonance.csv", {"i", "j", "omega_ratio", "p", "q", "margin", "verdict"});
  json pairs = json::array();
  bool any = false;
  for (int i = 1; i <= ph.n_out; ++i)
    for (int j = ph.n_out + 1; j < N; ++j) {
      const double ratio = omega_ratio(ph.omega, i, j);
      const ResonanceReport r = detect_resonance(ratio, q_max, rtol, dexp);
      any = any || r.resonant;
      csv.row({std::to_string(i), std::to_string(j), num(ratio), std::to_string(r.p), std::to_string(r.q),
               num(r.margin), r.verdict()});
      pairs.push_back({{"i", i},
                       {"j", j},
                       {"omega_ratio", ratio},
                       {"omega_ratio_alt", omega_ratio_alt(ph.omega, i, j)},
                       {"p", r.p},
                       {"q", r.q},
                       {"margin", r.margin},
                       {"verdict", r.verdict()}});
    }

  const int K = c.integer("audit_K", 200);
  const SmallDivisorAudit a = small_divisor_audit(ph, K, c.num("singular_tol", 1e-12), false);
  Csv env = out.csv("small_divisor.csv", {"n", "envelope"});
  for (std::size_t n = 0; n < a.envelope.size(); ++n) env.row({std::to_string(n + 1), num(a.envelope[n])});
  auto entry = [](const AuditEntry& e) {
    return json{{"k", e.k}, {"l", e.l}, {"norm", std::isfinite(e.norm) ? json(e.norm) : json("inf")},
                {"min_divisor", e.min_divisor}};
  };
  json audit{{"K", a.K},
             {"scanned_to", a.envelope.size()},
             {"fit_exponent", a.fit_a},
             {"fit_constant", a.fit_C},
             {"fit_r2", a.r2},
             {"min_divisor", a.min_divisor},
             {"worst", entry(a.worst)},
             {"singular", a.singular ? entry(*a.singular) : json(nullptr)}};
  json rep{{"q_max", q_max}, {"delta_exp", dexp}, {"phases", phases_json(ph)}, {"pairs", pairs},
           {"small_divisor_audit", audit}};
  out.write_json("resonance.json", rep);
  return json{{"resonant", any}, {"singular_mode", a.singular.has_value()}, {"fit_exponent", a.fit_a}};
}

// ---------------------------------------------------------------- cascades

Regime regime_of(const RunConfig& c) {
  if (c.experiment == "cascade") return Regime::Ulc;
  if (c.experiment == "cascade-weak") return Regime::Weak;
  const std::string r = c.text("regime", "ulc");
  if (r == "ulc") return Regime::Ulc;
  if (r == "weak") return Regime::Weak;
  throw config_error("regime must be \"ulc\" or \"weak\"");
}

std::vector<double> eps_halvings(const RunConfig& c) {
  std::vector<double> e;
  const double e0 = c.num("eps_max", 1.0 / 16);
  for (int m = 0; m <= c.integer("eps_halvings", 6); ++m) e.push_back(std::ldexp(e0, -m));
  return e;
}

Vec2c pulse_amplitude(const RunConfig& c) {
  if (!c.has("pulse_g")) return Vec2c(1.0, 0.5);
  const json& g = c.params.at("pulse_g");
  if (!g.is_array() || g.size() != 2) throw config_error("pulse_g needs two entries");
  Vec2c v;
  for (int i = 0; i < 2; ++i) {
    if (g[i].is_number())
      v(i) = g[i].get<double>();
    else if (g[i].is_array() && g[i].size() == 2 && g[i][0].is_number() && g[i][1].is_number())
      v(i) = cplx(g[i][0].get<double>(), g[i][1].get<double>());
    else
      throw config_error("pulse_g entries are numbers or [re, im] pairs");
  }
  return v;
}

struct CascadeRun {
  Loaded l;
  CascadeConfig cfg;
  CascadeResult res;
};

CascadeRun cascade_run(const RunConfig& c) {
  CascadeRun r{load(c, true), {}, {}};
  const Regime reg = regime_of(c);
  CascadeConfig& cfg = r.cfg;
  cfg.regime = reg;
  cfg.J = c.integer("J", 1);
  if (cfg.J < (reg == Regime::Weak ? 0 : 1) || cfg.J > 6) throw config_error("J out of range");
  cfg.box = fitted_box(*r.l.fx.beta_l, c.num("eps_max", 1.0 / 16), c.num("T", 10.0), c.num("X", 6.0),
                       c.integer("nt", 32), c.integer("nx", 16), c.num("gamma", reg == Regime::Weak ? 4.0 : 2.0));
  cfg.K_b = c.integer("K_b", 32);
  const int cap = reg == Regime::Weak ? cfg.K_b + cfg.J + 4 : 0;
  cfg.caps = Caps{c.integer("K_pure", reg == Regime::Weak ? cap : 32), c.integer("K_nc", reg == Regime::Weak ? cap : 16)};
  cfg.drop_rel = c.num("drop_rel", 1e-13);
  cfg.threads = c.threads;
  const BoundaryData G = pulse_data(cfg.box, c.num("pulse_tc", 4.0), c.num("pulse_wt", 0.7), c.num("pulse_xc", 0.0),
                                    c.num("pulse_wx", 1.5), pulse_amplitude(c), c.integer("harmonic", 1));
  r.res = run_cascade(r.l.fx.sys, r.l.ph, G, cfg);
  return r;
}

json residual_block(const CascadeResult& res, const std::vector<double>& eps, Out& out) {
  const ResidualReport rep = residual_scan(res, eps);
  Csv csv = out.csv("residual_scan.csv", {"epsilon", "interior_l2", "boundary_l2", "slope_fit"});
  for (const auto& row : rep.rows)
    csv.row({num(row.eps), num(row.interior_l2), num(row.boundary_l2), num(rep.slope)});
  return json{{"slope", rep.slope},
              {"intercept", rep.intercept},
              {"boundary_max", rep.boundary_max},
              {"lead_theta_l2", rep.lead_theta_l2},
              {"lead_h1", rep.lead_h1},
              {"periodic_substitution_ratio", rep.periodic_ratio_max}};
}

json diagnostics_json(const CascadeResult& res) {
  const CascadeDiagnostics& d = res.diag;
  json defects = json::array();
  for (double v : consistency_defects(res)) defects.push_back(v);
  return json{{"theta1_norm", d.theta1_norm},
              {"check_a0", d.check_a0},
              {"b_solvability", d.b_solvability},
              {"recombination", d.recombination},
              {"split_cond", d.split_cond},
              {"xlop_tail", d.xlop_tail},
              {"frequencies", d.frequencies},
              {"dropped", d.dropped},
              {"clip", {{"clipped", d.clip.clipped}, {"total", d.clip.total}}},
              {"consistency_defects", defects}};
}

json box_json(const BoxGrid& b) {
  return json{{"T", b.T}, {"X", b.X}, {"nt", b.nt}, {"nx", b.nx}, {"gamma", b.gamma}};
}

void write_snapshots(const RunConfig& c, const CascadeResult& res, Out& out) {
  const std::vector<double> x2s = c.list("snapshot_x2", {0.0});
  const BoxGrid& box = res.cfg.box;
  for (int k = res.first; k <= res.cfg.J; ++k) {
    std::set<ModeKey> keys;
    for (const auto& fsol : res.freqs)
      for (const auto& [key, v] : fsol.U[k - res.first].modes) keys.insert(key);
    Csv csv = out.csv("profile_U" + std::to_string(k) + ".csv",
                      {"mode", "x2", "nt", "nx", "it", "ix", "re1", "im1", "re2", "im2", "re3", "im3"});
    for (const ModeKey& key : keys)
      for (double x2 : x2s) {
        const std::vector<Vec3c> v = eval_mode(res, k, key, x2);
        const std::string m = "\"" + key.str() + "\"";
        for (int i = 0; i < box.nt; ++i)
          for (int j = 0; j < box.nx; ++j) {
            const Vec3c& u = v[std::size_t(i) * box.nx + j];
            csv.row({m, num(x2), std::to_string(box.nt), std::to_string(box.nx), std::to_string(i),
                     std::to_string(j), num(u(0).real()), num(u(0).imag()), num(u(1).real()), num(u(1).imag()),
                     num(u(2).real()), num(u(2).imag())});
          }
      }
  }
}

json frame_json(const RunConfig& c, const BoundaryFrame& f, Out& out) {
  const int K = c.integer("multiplier_K", 40);
  Csv csv = out.csv("multipliers.csv", {"k", "re_m1", "im_m1", "re_m2", "im_m2"});
  for (int k = -K; k <= K; ++k) {
    if (k == 0) continue;
    const cplx a = f.m1(k), b = f.m2(k);
    csv.row({std::to_string(k), num(a.real()), num(a.imag()), num(b.real()), num(b.imag())});
  }
  return json{{"e", vjson(f.e)},
              {"e_check", vjson(f.e_check)},
              {"b", json::array({cjson(f.b(0)), cjson(f.b(1))})},
              {"c0", f.c0},
              {"c1", f.c1},
              {"Be_residual", f.be_residual},
              {"b_residual", f.b_residual},
              {"m_limit", cjson(f.m_limit)}};
}

json cascade(const RunConfig& c, Out& out) {
  const CascadeRun r = cascade_run(c);
  const CascadeResult& res = r.res;
  json spec = json::array();
  for (int s : res.spectrum) spec.push_back(s);
  json rep{{"regime", res.cfg.regime == Regime::Weak ? "weak" : "ulc"},
           {"J", res.cfg.J},
           {"first_order", res.first},
           {"box", box_json(res.cfg.box)},
           {"K_b", res.cfg.K_b},
           {"caps", {{"K_pure", res.cfg.caps.K_pure}, {"K_nc", res.cfg.caps.K_nc}}},
           {"spectrum", spec},
           {"diagnostics", diagnostics_json(res)}};
  if (res.frame) rep["frame"] = frame_json(c, *res.frame, out);
  if (c.flag("snapshots", true)) write_snapshots(c, res, out);
  rep["residual"] = residual_block(res, eps_halvings(c), out);
  out.write_json("cascade.json", rep);
  return json{{"slope", rep["residual"]["slope"]}, {"boundary_max", rep["residual"]["boundary_max"]}};
}

json residual_experiment(const RunConfig& c, Out& out) {
  const CascadeRun r = cascade_run(c);
  json rep{{"regime", r.cfg.regime == Regime::Weak ? "weak" : "ulc"},
           {"J", r.cfg.J},
           {"box", box_json(r.cfg.box)},
           {"residual", residual_block(r.res, eps_halvings(c), out)}};
  out.write_json("residual.json", rep);
  return rep["residual"];
}

// ---------------------------------------------------------------- estimate-scan

SingularLattice base_lattice(const RunConfig& c, const PhaseSet& ph) {
  SingularLattice L;
  L.beta_l = ph.beta_l;
  L.alpha = c.num("alpha", 0.5);
  L.xi = c.num("xi", 0.25);
  L.delta = c.num("delta", 0.1);
  L.N1 = L.N2 = c.num("N1", 32.0);
  L.C5 = c.num("C5", 1.0);
  L.chi_C = c.num("chi_C", 1.0);
  L.delta_exp = c.num("delta_exp", 0.1);
  L.k_min = -c.integer("k_cap", 16);
  L.k_max = c.integer("k_cap", 16);
  L.r_min = -c.integer("r_cap", 16);
  L.r_max = c.integer("r_cap", 16);
  L.epsilon = c.num("eps_max", 1.0 / 16);
  return L;
}

double ratio_of(const std::vector<double>& v) {
  double lo = INFINITY, hi = 0.0;
  for (double x : v) {
    lo = std::min(lo, x);
    hi = std::max(hi, x);
  }
  return lo > 0 ? hi / lo : INFINITY;
}

json estimate_scan(const RunConfig& c, Out& out) {
  const Loaded l = load(c, true);
  const HyperbolicSystem& sys = l.fx.sys;
  const PhaseSet& ph = l.ph;
  const SingularLattice base = base_lattice(c, ph);
  const int N = int(ph.omega.size());
  const double exponent = c.num("decay_exponent", 4.0 + std::ceil(1.0 / base.xi));
  json rep{{"alpha_r_exponent", exponent}, {"lattice", {{"alpha", base.alpha}, {"xi", base.xi}, {"delta", base.delta},
                                                        {"N1", base.N1}, {"C5", base.C5}, {"delta_exp", base.delta_exp}}}};
  json summary;

  if (c.flag("run_lower_bounds", true)) {
    SingularLattice L = base;
    L.chi_C = c.num("lb_chi_C", base.chi_C);
    L.k_min = -c.integer("lb_k_cap", 32);
    L.k_max = c.integer("lb_k_cap", 32);
    const int M_cap = c.integer("M_cap", 8);
    Csv csv = out.csv("lowerbounds.csv", {"eps", "i", "j", "r_cap", "c1", "c2", "cN", "k0_ratio", "samples",
                                          "argmin_k", "argmin_r", "argmin_sigma", "argmin_gamma", "argmin_eta"});
    std::map<std::pair<int, int>, std::vector<double>> c1s, c2s;
    for (double e : c.list("lb_eps", {1.0 / 16, 1.0 / 32, 1.0 / 64, 1.0 / 128, 1.0 / 256})) {
      L.epsilon = e;
      L.zeta_samples = lower_bound_samples(L, c.integer("lb_n_rad", 6), c.integer("lb_n_ang", 5));
      const LowerBoundReport lb = lower_bound_scan(L, sys, ph, M_cap, c.threads);
      for (const auto& row : lb.rows) {
        const bool toN = row.j + 1 == N;
        csv.row({num(e), std::to_string(row.i + 1), std::to_string(row.j + 1), std::to_string(row.r_cap),
                 toN ? "" : num(row.c1), toN ? "" : num(row.c2), toN ? num(row.cN) : "", num(row.k0_ratio),
                 std::to_string(row.samples), std::to_string(row.argmin_k), std::to_string(row.argmin_r),
                 num(row.argmin_c2.sigma), num(row.argmin_c2.gamma), num(row.argmin_c2.eta)});
        if (!toN) {
          c1s[{row.i + 1, row.j + 1}].push_back(row.c1);
          c2s[{row.i + 1, row.j + 1}].push_back(row.c2);
        }
      }
    }
    json lbj = json::array();
    for (const auto& [ij, v] : c1s)
      lbj.push_back({{"i", ij.first}, {"j", ij.second}, {"c1_ratio", ratio_of(v)}, {"c2_ratio", ratio_of(c2s[ij])}});
    rep["lower_bounds"] = {{"chi_C", L.chi_C}, {"k_cap", L.k_max}, {"M_cap", M_cap}, {"pairs", lbj}};
    summary["lower_bounds"] = lbj;
  }

  double gamma0 = c.num("gamma", 0.0);
  if (gamma0 == 0.0 && (c.flag("run_estimates", true) || c.flag("run_laplace", true))) {
    SingularLattice L = base;
    L.k_min = L.r_min = -2;
    L.k_max = L.r_max = 2;
    const Frequency z{0.3 * ph.beta_l(0) + 0.1, 1.0, 0.3 * ph.beta_l(1)};
    const double thr = contraction_threshold(sys, ph, L, z, decay_coefficients(-2, 2, exponent),
                                             c.num("gamma0_lo", 0.1), c.num("gamma0_hi", 8.0), 8);
    gamma0 = std::max(1.0, thr);
    rep["contraction_threshold"] = thr;
  }
  rep["gamma0"] = gamma0;

  if (c.flag("run_estimates", true)) {
    const auto al = decay_coefficients(base.r_min, base.r_max, exponent);
    SweepOptions o;
    o.n_rad = c.integer("n_rad", 5);
    o.n_ang = c.integer("n_ang", 7);
    o.threads = c.threads;
    std::vector<double> gammas{gamma0};
    if (c.flag("gamma_doubling", true)) gammas.push_back(2 * gamma0);
    Csv ci = out.csv("iteration.csv", {"eps", "gamma", "fitted_C", "k_cap", "r_cap", "argmax_k", "argmax_sigma",
                                       "argmax_gamma", "argmax_eta", "samples"});
    Csv cm = out.csv("main.csv", {"eps", "gamma", "fitted_K", "k_cap", "r_cap", "argmax_k", "argmax_sigma",
                                  "argmax_gamma", "argmax_eta", "samples"});
    auto line = [&](const EstimateRatio& r) {
      return std::vector<std::string>{num(r.epsilon), num(r.gamma), num(r.fitted), std::to_string(base.k_max),
                                      std::to_string(base.r_max), std::to_string(r.argmax_k), num(r.argmax.sigma),
                                      num(r.argmax.gamma), num(r.argmax.eta), std::to_string(r.samples)};
    };
    json per_gamma = json::array();
    std::vector<double> Cmax, Kmax;
    for (double g : gammas) {
      std::vector<double> Cs, Ks;
      for (int m = 0; m <= c.integer("eps_decades", 4); ++m) {
        SingularLattice L = base;
        L.epsilon = base.epsilon * std::pow(10.0, -m);
        const EstimatePair p = estimate_checks(sys, ph, L, g, al, o);
        ci.row(line(p.iteration));
        cm.row(line(p.main));
        Cs.push_back(p.iteration.fitted);
        Ks.push_back(p.main.fitted);
      }
      Cmax.push_back(*std::max_element(Cs.begin(), Cs.end()));
      Kmax.push_back(*std::max_element(Ks.begin(), Ks.end()));
      per_gamma.push_back({{"gamma", g}, {"C_ratio", ratio_of(Cs)}, {"K_ratio", ratio_of(Ks)}, {"C_max", Cmax.back()},
                           {"K_max", Kmax.back()}});
    }
    rep["estimates"] = per_gamma;
    summary["estimates"] = per_gamma;
  }

  if (c.flag("run_laplace", true)) {
    json g1 = json::array();
    for (double g : c.list("laplace_gammas", {0.5, 1.0, 2.0, 8.0})) {
      const LaplaceBoundsResult r = laplace_bounds_check(g, c.integer("laplace_trials", 100), static_cast<unsigned>(c.seed));
      g1.push_back({{"gamma", g}, {"trials", r.trials}, {"worst_a", r.worst_a}, {"worst_b", r.worst_b},
                    {"worst_c", r.worst_c}, {"worst_d", r.worst_d}, {"pass", r.pass}});
    }
    rep["laplace_bounds"] = g1;
    json sums = json::array();
    for (double s : beta_l1_partial_sums(base, gamma0, 4, int(std::ceil(1.0 / base.xi)), 4096)) sums.push_back(s);
    rep["beta_l1_partial_sums"] = sums;
  }

  if (c.flag("run_mode_frame", true)) {
    SingularLattice L = base;
    L.k_min = L.r_min = -6;
    L.k_max = L.r_max = 6;
    const ModeFrameReport t = mode_frame_suite(L, sys, ph, lower_bound_samples(L, 3, 3));
    rep["mode_frame"] = {{"samples", t.samples},          {"max_abs_delta", t.max_delta},
                         {"max_Br", t.max_Br},            {"gap", json::array({t.gap_lo, t.gap_hi})},
                         {"c_im", t.c_im},                {"dichotomy", t.dichotomy},
                         {"g_max", t.g_max},              {"case2_max", t.case2_max},
                         {"D_le_DD_violations", t.D_le_DD_violations}};
  }
  out.write_json("estimates.json", rep);
  summary["gamma0"] = gamma0;
  return summary;
}

void check_range(bool ok, const std::string& what) {
  if (!ok) throw config_error(what + " out of range");
}

}  // namespace

const std::vector<std::string>& experiment_ids() {
  static const std::vector<std::string> ids = {"check-assumptions", "resonance-audit", "cascade",
                                               "cascade-weak",      "residual-scan",   "estimate-scan"};
  return ids;
}

double RunConfig::num(const std::string& key, double def) const {
  if (!params.contains(key)) return def;
  const json& v = params.at(key);
  if (!v.is_number()) throw config_error(key + " must be a number");
  return v.get<double>();
}

int RunConfig::integer(const std::string& key, int def) const {
  if (!params.contains(key)) return def;
  const json& v = params.at(key);
  if (!v.is_number_integer()) throw config_error(key + " must be an integer");
  return v.get<int>();
}

bool RunConfig::flag(const std::string& key, bool def) const {
  if (!params.contains(key)) return def;
  const json& v = params.at(key);
  if (!v.is_boolean()) throw config_error(key + " must be true or false");
  return v.get<bool>();
}

std::string RunConfig::text(const std::string& key, const std::string& def) const {
  if (!params.contains(key)) return def;
  const json& v = params.at(key);
  if (!v.is_string()) throw config_error(key + " must be a string");
  return v.get<std::string>();
}

std::vector<double> RunConfig::list(const std::string& key, const std::vector<double>& def) const {
  if (!params.contains(key)) return def;
  const json& v = params.at(key);
  if (!v.is_array() || v.empty()) throw config_error(key + " must be a non-empty array");
  std::vector<double> out;
  for (const auto& x : v) {
    if (!x.is_number()) throw config_error(key + " must hold numbers");
    out.push_back(x.get<double>());
  }
  return out;
}

RunConfig parse_config(const std::string& text, const std::string& base_dir) {
  RunConfig c;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw config_error("line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    if (!known_keys().count(key)) throw config_error("unknown key " + key);
    json v;
    try {
      v = json::parse(val);
    } catch (const json::exception&) {
      v = val;
    }
    if (key == "experiment") {
      c.experiment = v.is_string() ? v.get<std::string>() : v.dump();
    } else if (key == "fixture") {
      if (!v.is_string()) throw config_error("fixture must be a path");
      fs::path p(v.get<std::string>());
      if (p.is_relative()) p = fs::path(base_dir) / p;
      c.fixture = p.lexically_normal().string();
    } else if (key == "out") {
      if (!v.is_string()) throw config_error("out must be a path");
      c.out = v.get<std::string>();
    } else if (key == "seed") {
      if (!v.is_number_unsigned()) throw config_error("seed must be a non-negative integer");
      c.seed = v.get<unsigned long long>();
    } else if (key == "threads") {
      if (!v.is_number_integer() || v.get<int>() < 0) throw config_error("threads must be >= 0");
      c.threads = v.get<int>();
    } else {
      c.params[key] = v;
    }
  }
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot read config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), fs::path(path).parent_path().string());
}

void validate(const RunConfig& c) {
  const auto& ids = experiment_ids();
  if (std::find(ids.begin(), ids.end(), c.experiment) == ids.end())
    throw config_error("unknown experiment id '" + c.experiment + "'");
  if (c.threads < 0) throw config_error("threads must be >= 0");
  const double alpha = c.num("alpha", 0.5);
  check_range(alpha > 0 && alpha < 1, "alpha");
  const double xi = c.num("xi", 0.25);
  check_range(xi >= 0 && xi < alpha, "xi");
  const double e0 = c.num("eps_max", 1.0 / 16);
  check_range(e0 > 0 && e0 < 1, "eps_max");
  for (double e : c.list("lb_eps", {0.5})) check_range(e > 0 && e < 1, "lb_eps");
  if (c.has("gamma")) {
    const double g = c.num("gamma", 1.0);
    check_range(g >= 1 || (g == 0 && c.experiment == "estimate-scan"), "gamma");
  }
  check_range(c.integer("eps_halvings", 6) >= 1, "eps_halvings");
  check_range(c.integer("eps_decades", 4) >= 0, "eps_decades");
  check_range(c.num("q_max", 1e6) >= 1, "q_max");
  check_range(c.integer("audit_K", 200) >= 1, "audit_K");
  check_range(c.num("delta", 0.1) > 0 && c.num("delta", 0.1) < 1, "delta");
  check_range(c.num("chi_C", 1.0) > 0 && c.num("lb_chi_C", 1.0) > 0, "chi_C");
  check_range(c.integer("k_cap", 16) >= 1 && c.integer("r_cap", 16) >= 1 && c.integer("lb_k_cap", 32) >= 1,
              "lattice caps");
  for (double g : c.list("laplace_gammas", {1.0})) check_range(g > 0, "laplace_gammas");
}

json version_info() {
  return json{{"wkblab", "0.1.0"},
              {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                            std::to_string(EIGEN_MINOR_VERSION)},
              {"boost", std::string(BOOST_LIB_VERSION)},
              {"fftw", std::string(fftw_version)},
              {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                    std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                    std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
              {"compiler", __VERSION__},
              {"cxx_standard", __cplusplus},
              {"kernels", kernels::name(kernels::active())}};
}

RunResult run(const RunConfig& c) {
  const auto t0 = std::chrono::steady_clock::now();
  validate(c);
  std::error_code ec;
  fs::create_directories(c.out, ec);
  if (ec || !fs::is_directory(c.out)) throw config_error("cannot create output directory " + c.out);
  Out out{fs::path(c.out), {}};

  json summary;
  if (c.experiment == "check-assumptions")
    summary = check_assumptions(c, out);
  else if (c.experiment == "resonance-audit")
    summary = resonance_audit(c, out);
  else if (c.experiment == "cascade" || c.experiment == "cascade-weak")
    summary = cascade(c, out);
  else if (c.experiment == "residual-scan")
    summary = residual_experiment(c, out);
  else
    summary = estimate_scan(c, out);

  RunResult r;
  r.out_dir = c.out;
  r.files = out.files;
  r.summary = summary;
  r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  json config = c.params;
  config["experiment"] = c.experiment;
  config["fixture"] = c.fixture;
  config["seed"] = c.seed;
  config["threads"] = c.threads;
  json files = out.files;
  out.write_json("manifest.json", json{{"experiment", c.experiment},
                                       {"config", config},
                                       {"versions", version_info()},
                                       {"outputs", files},
                                       {"summary", summary},
                                       {"wall_time_s", r.wall_seconds}});
  r.files.push_back("manifest.json");
  return r;
}

int run_guarded(const RunConfig& c, std::ostream& err) {
  try {
    run(c);
    return 0;
  } catch (const Error& e) {
    err << e.what() << "\n";
    return static_cast<int>(e.cls());
  } catch (const nlohmann::json::exception& e) {
    err << "ConfigError: " << e.what() << "\n";
    return static_cast<int>(ErrorClass::Config);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return static_cast<int>(ErrorClass::Computation);
  }
}

}  // namespace wkb
