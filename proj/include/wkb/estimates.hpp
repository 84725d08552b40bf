#pragma once

#include <map>
#include <string>
#include <vector>

#include "wkb/phase.hpp"

namespace wkb {

struct SingularLattice {
  double epsilon = 1.0 / 16;
  Eigen::Vector2d beta_l{0.0, 0.0};
  double alpha = 0.5;
  double xi = 0.25;
  int k_min = -16, k_max = 16;
  int r_min = -16, r_max = 16;
  std::vector<Frequency> zeta_samples;
  double delta = 0.1;
  double N1 = 32.0, N2 = 32.0;
  double C5 = 1.0;
  double gamma0 = 1.0;
  double chi_C = 1.0;
  double delta_exp = 0.1;  // exponent slack in |r|^{2 + delta_exp}

  double cutoff() const { return chi_C * std::pow(epsilon, alpha - 1.0); }
  bool chi(const Frequency& z) const { return z.norm() <= cutoff(); }
  Frequency X(const Frequency& z, int k) const;
  // projection of X_k on the beta_l line
  Frequency X_tilde(const Frequency& z, int k) const;
  bool chi_b(const Frequency& z, int k) const;
};

// Eigenstructure at X labelled by continuity from beta_l: omega_j(X) ~ (X . beta_l) omega_j(beta_l) near the ray,
// Im-sign classification (outgoing first) elsewhere.
struct LatticeModes {
  Frequency X;
  Vec3c omega;
  Mat3c r;  // unit columns
  Mat3c S_inv;
  Eigen::Matrix2cd Br_minus;
  Eigen::Vector2cd Br_plus;
  cplx delta{0.0, 0.0};
  bool labelled = false;
};

LatticeModes lattice_modes(const HyperbolicSystem& sys, const PhaseSet& ph, const Frequency& X, double delta = 0.1);

// i outgoing (0-based phase index), j incoming.
cplx E_ij(const SingularLattice& L, const HyperbolicSystem& sys, const PhaseSet& ph, int i, int j, int k, int r,
          const Frequency& z);
// Closed form ((s + k - r - r Omega_ij) / eps) (omega_i - omega_j)(beta_l), s = eps (zeta . beta_l).
cplx E_ij_tilde(const SingularLattice& L, const PhaseSet& ph, int i, int j, int k, int r, const Frequency& z);

enum class Region { I, II, III, OffCone };
const char* region_name(Region g);
Region region_classify(const SingularLattice& L, int k, int r, const Frequency& z);

double amplification_D(const SingularLattice& L, int k, int r, const Frequency& z);
double amplification_DD(const SingularLattice& L, int k, int r, const Frequency& z);

// Log-radial x angular product grid around the beta_l ray, |zeta| <= cutoff, gamma components included.
std::vector<Frequency> lower_bound_samples(const SingularLattice& L, int n_rad, int n_ang);
// Fixed gamma, (sigma, eta) on a log-radial x angular grid, |zeta| <= cutoff.
std::vector<Frequency> estimate_samples(const SingularLattice& L, double gamma, int n_rad, int n_ang);

struct LowerBoundRow {
  int i = 0, j = 0;
  int r_cap = 0;
  double c1 = 0.0;  // min |E| / |X_{k-r}|, |r| <= M_cap
  double c2 = 0.0;  // min |E| |r|^{2+delta} / |X_k|, |r| <= eps^-xi, j != N
  double cN = 0.0;  // j = N dichotomy: min max(|E| |r| / |X_k|, |E| / |X_{k-r}|)
  double k0_ratio = 0.0;  // k = 0: min |E| eps / |r|
  int samples = 0;
  Frequency argmin_c2;
  int argmin_k = 0, argmin_r = 0;
};

struct LowerBoundReport {
  double epsilon = 0.0;
  std::vector<LowerBoundRow> rows;
};

LowerBoundReport lower_bound_scan(const SingularLattice& L, const HyperbolicSystem& sys, const PhaseSet& ph,
                                  int M_cap, int threads = 1);

struct LaplaceBoundsResult {
  double gamma = 0.0;
  double worst_a = 0.0, worst_b = 0.0, worst_c = 0.0;  // |lhs| / bound
  double worst_d = 0.0;                                // relative identity error
  int trials = 0;
  bool pass = false;
};

// Random exponential-polynomial test functions f(s; sigma, eta), inequalities on a Gauss-Legendre grid.
LaplaceBoundsResult laplace_bounds_check(double gamma, int trials, unsigned seed);

// Composite Gauss-Legendre rule on [0, L].
struct Quadrature {
  std::vector<double> x, w;
  int panels = 0, order = 0;
  double length = 0.0;
};
Quadrature gauss_legendre(double length, int panels, int order);

// int_0^x e^{i mu (x - s)} f(s) ds and int_x^inf e^{i mu (x - s)} f(s) ds at the nodes (f = 0 beyond the grid).
std::vector<cplx> volterra_forward(const Quadrature& q, cplx mu, const std::vector<cplx>& f);
std::vector<cplx> volterra_backward(const Quadrature& q, cplx mu, const std::vector<cplx>& f);

// Truncated singular system at one zeta: modes k in [k_min, k_max], couplings alpha_r (r != 0).
struct TruncatedSystem {
  const HyperbolicSystem* sys = nullptr;
  const PhaseSet* ph = nullptr;
  SingularLattice L;
  Frequency zeta;
  std::map<int, double> alpha;  // alpha_r, r != 0
  std::vector<LatticeModes> modes;  // per k
  int K() const { return L.k_max - L.k_min + 1; }
  double nu() const;  // omega_N(beta_l) / eps
};

TruncatedSystem make_truncated(const HyperbolicSystem& sys, const PhaseSet& ph, const SingularLattice& L,
                               const Frequency& zeta, const std::map<int, double>& alpha);

std::map<int, double> decay_coefficients(int r_min, int r_max, double exponent);

// V_k(x2) = sum_n coef(n) v_n^k e^{i mu_{k,n} x2}.
struct ExactSolution {
  VecC lambda;               // eigenvalues of the gauged block matrix, incoming part
  std::vector<MatC> v;       // per k: 3 x n_in
  VecC coef;
  double nu = 0.0;
  int k_min = 0;
  cplx mu(int k, int n) const { return lambda(n) + double(k + k_min) * nu; }
  Vec3c eval(int k_index, double x2) const;
};

// Decaying solution with F = 0, B V_k(0) = G_k.
ExactSolution solve_truncated_exact(const TruncatedSystem& T, const std::vector<Vec2c>& G);

struct ModeState {
  Quadrature q;
  std::vector<std::vector<Vec3c>> V;            // per k, per node
  std::vector<std::vector<cplx>> w_plus;        // per k, per node
  std::vector<std::vector<Vec2c>> w_minus;      // per k, per node
  std::vector<double> norms;                    // ||V_k||_k
  int iterations = 0;
  double contraction = 0.0;                     // observed ratio of successive updates
  double residual = 0.0;                        // relative defect in the integral equations
};

struct FixedPointOptions {
  double X2_max = 0.0;  // 0: from the decay rate
  int panels = 0;       // 0: from the oscillation scale
  int order = 10;
  int max_iter = 400;
  double tol = 1e-10;
};

// Fixed-point iteration of the diagonalized integral equations; F given per k at the nodes (may be empty).
ModeState solve_truncated_integral_system(const TruncatedSystem& T, const std::vector<Vec2c>& G,
                                          const std::vector<std::vector<Vec3c>>& F, const FixedPointOptions& opt);
// Quadrature for the fixed-point solver sized from the decay and oscillation scales of T.
Quadrature fixed_point_grid(const TruncatedSystem& T, const FixedPointOptions& opt);

// Smallest gamma in [lo, hi] at which the fixed-point map contracts (bisection).
double contraction_threshold(const HyperbolicSystem& sys, const PhaseSet& ph, const SingularLattice& L,
                             const Frequency& zeta_at_unit_gamma, const std::map<int, double>& alpha, double lo,
                             double hi, int steps = 12);

// Norm pieces of one solution at one zeta.
struct NormPieces {
  std::vector<double> modified;  // ||V_k||_k
  std::vector<double> l2;        // |V_k|_{L2(x2)}
  std::vector<double> trace;     // |V_k(0)|
  std::vector<bool> in_cone;
};
NormPieces exact_norms(const TruncatedSystem& T, const ExactSolution& s);
NormPieces quadrature_norms(const TruncatedSystem& T, const ModeState& m);

struct EstimateRatio {
  double epsilon = 0.0, gamma = 0.0;
  double fitted = 0.0;
  Frequency argmax;
  int argmax_k = 0;
  int samples = 0;
};

struct SweepOptions {
  int n_rad = 5, n_ang = 7;
  int threads = 1;
};

// Iteration estimate: max over samples, data and k of ||V_k|| / RHS with C = 1.
EstimateRatio iteration_estimate_check(const HyperbolicSystem& sys, const PhaseSet& ph, const SingularLattice& L,
                                       double gamma, const std::map<int, double>& alpha, const SweepOptions& opt);
// Main estimate: max over samples and data of (|U| + |U(0)| / sqrt(gamma)) / RHS with K = 1.
EstimateRatio main_estimate_check(const HyperbolicSystem& sys, const PhaseSet& ph, const SingularLattice& L,
                                  double gamma, const std::map<int, double>& alpha, const SweepOptions& opt);

struct EstimatePair {
  EstimateRatio iteration, main;
};
// Both checks from one sweep.
EstimatePair estimate_checks(const HyperbolicSystem& sys, const PhaseSet& ph, const SingularLattice& L, double gamma,
                             const std::map<int, double>& alpha, const SweepOptions& opt);

// beta_r for the given alpha_r; returns the l1 norms of beta over growing windows.
std::vector<double> beta_l1_partial_sums(const SingularLattice& L, double gamma, int M, int N, int r_max);

struct ModeFrameReport {
  int samples = 0;
  double max_delta = 0.0;           // max |Delta| over samples
  double max_Br = 0.0;              // max boundary coupling norm
  double gap_lo = 0.0, gap_hi = 0.0;  // eigenvalue gap range
  double c_im = 0.0;                // min over samples of |Im omega| / gamma with correct signs
  bool dichotomy = true;
  double g_max = 0.0;               // max |Delta|^-1 / |r| off Gamma_{delta/|r|}
  double case2_max = 0.0;           // |X_{k-r}| N1 / |X_k| in case II
  double D_le_DD_violations = 0.0;
};

ModeFrameReport mode_frame_suite(const SingularLattice& L, const HyperbolicSystem& sys, const PhaseSet& ph,
                        const std::vector<Frequency>& samples);

}  // namespace wkb
