#pragma once

#include <map>
#include <optional>
#include <vector>

#include "wkb/profile.hpp"
#include "wkb/xpoly.hpp"

namespace wkb {

enum class Regime { Ulc, Weak };

using Mat23c = Eigen::Matrix<cplx, 2, 3>;

// Periodic (t, x1) box, t in [0, T), x1 in [-X, X). Profiles are e^{gamma t} times box-periodic functions.
struct BoxGrid {
  double T = 10.0, X = 6.0;
  int nt = 64, nx = 32;
  double gamma = 2.0;
  bool fd4 = false;

  double t(int i) const { return T * i / nt; }
  double x(int j) const { return -X + 2.0 * X * j / nx; }
  static int signed_index(int j, int n) { return j < n / 2 ? j : j - n; }
  double nu(int s) const;     // 2 pi s / T
  double kappa(int s) const;  // 2 pi s / (2X)
  // d/dt and d/dx1 symbols: exact, or the fourth-order stencil when fd4
  cplx tau_symbol(int s) const;
  double kappa_symbol(int s) const;
};

// Smallest box near the targets on which e^{i beta.(t,x1)/eps} is periodic for every eps = eps_max 2^-m.
BoxGrid fitted_box(const Eigen::Vector2d& beta, double eps_max, double T_target, double X_target, int nt, int nx,
                   double gamma);

// G(t, x1, theta0) = sum_n G_n(t, x1) e^{i n theta0}, samples row-major nt x nx.
struct BoundaryData {
  std::map<int, std::vector<Vec2c>> harmonics;
};

BoundaryData pulse_data(const BoxGrid& box, double tc, double wt, double xc, double wx, const Vec2c& g,
                        int harmonic = 1);

struct BoundaryFrame {
  Vec3c e, e_check;
  Vec2c e_coef, e_check_coef;  // coefficients on r2, r3
  Eigen::RowVector2cd b;       // b . X = b * X
  double c0 = 0.0, c1 = 0.0;
  double be_residual = 0.0;    // |B e|
  double b_residual = 0.0;     // max |b . B r_m|, m = 2, 3
  cplx m_limit{0.0, 0.0};
  ProjectorKit kit;
  Mat23c B;
  Mat3c M;

  cplx m1(int k) const;
  cplx m2(int k) const;
};

BoundaryFrame build_boundary_frame(const HyperbolicSystem& sys, const ProjectorKit& kit, double tol = 1e-8);

// Coupled theta0-mode system i(c0 tau + c1 kappa) a_n + m1(n-1) a_{n-1} + m2(n+1) a_{n+1} = h_n
// on each half block 1 <= |n| <= K_b at one (t, x1) frequency.
std::map<int, cplx> solve_xlop(const BoundaryFrame& frame, cplx tau, double kappa, const std::map<int, cplx>& h,
                               int K_b);

// One (t, x1) frequency: exponent table and constant-coefficient operators in x2.
struct FreqContext {
  const HyperbolicSystem* sys = nullptr;
  const ProjectorKit* kit = nullptr;
  cplx tau{0.0, 0.0};
  double kappa = 0.0;
  ExpTable* tab = nullptr;
  Mat3c B1, B2, M;
  Mat23c B;
  ModeDecomposition dec;
  std::array<int, 3> omega_id{};
  std::array<cplx, 3> lam{};  // transport exponents, phase order
  std::array<int, 3> lam_id{};
  double x2scale = 40.0;
};

FreqContext make_context(const HyperbolicSystem& sys, const ProjectorKit& kit, cplx tau, double kappa,
                         ExpTable& tab);

// (i tau + i kappa B1) X + B2 X'
XVec apply_Lf(const FreqContext& c, const XVec& X);
// L U = F in x2 > 0, B U(0) = g0, bounded as x2 -> infinity
XVec mean_solve(const FreqContext& c, const XVec& F, const Vec2c& g0);
// sigma' = i lam_m sigma + s; phase index m in 0..2 (0 outgoing)
XSc transport_solve(const FreqContext& c, int m, cplx trace, const XSc& s);

struct CascadeConfig {
  Regime regime = Regime::Ulc;
  int J = 1;
  BoxGrid box;
  Caps caps;
  int K_b = 48;
  double drop_rel = 1e-13;
  int threads = 1;
};

struct FreqSolution {
  int st = 0, sx = 0;  // signed box indices
  cplx tau{0.0, 0.0};
  double kappa = 0.0;
  ExpTable tab;
  std::map<int, Vec2c> G;         // data coefficients on e^{i(nu t + kappa x1)}
  std::vector<Profile<XVec>> U;   // orders first..J
};

struct CascadeDiagnostics {
  ClipStats clip;
  double theta1_norm = 0.0;
  double check_a0 = 0.0;
  double b_solvability = 0.0;
  double recombination = 0.0;
  double split_cond = 0.0;
  double xlop_tail = 0.0;
  int frequencies = 0;
  int dropped = 0;
};

struct CascadeResult {
  CascadeConfig cfg;
  int first = 1;
  std::vector<int> spectrum;
  HyperbolicSystem sys;
  PhaseSet ph;
  ProjectorKit kit;
  Mat3c M;
  std::optional<BoundaryFrame> frame;
  std::vector<FreqSolution> freqs;
  CascadeDiagnostics diag;

  // Boundary data harmonic n at order j.
  bool has_data(int j) const { return j == 1; }
};

CascadeResult run_cascade(const HyperbolicSystem& sys, const PhaseSet& ph, const BoundaryData& G,
                          const CascadeConfig& cfg);

// Profile of order k, mode key, sampled at x2 on the box grid (row-major nt x nx).
std::vector<Vec3c> eval_mode(const CascadeResult& res, int k, const ModeKey& key, double x2);

// max |U_k(t, x, .)| over t < t_cut divided by the overall max, over all modes and the given x2 values.
double causality_ratio(const CascadeResult& res, double t_cut, const std::vector<double>& x2s);

// Interior consistency per order: entry 0 is ||L_theta U_first|| / ||L U_first||, entry i is
// ||L_theta U_{first+i} + L U_{first+i-1} + f M U_{first+i-1}|| / ||L U_{first+i-1}||, unclipped.
std::vector<double> consistency_defects(const CascadeResult& res);

}  // namespace wkb
