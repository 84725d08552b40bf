#pragma once

#include <optional>
#include <string>
#include <vector>

#include "wkb/hyperbolic.hpp"

namespace wkb {

struct PhaseSet {
  Eigen::Vector2d beta_l{0.0, 0.0};
  VecR omega;                                  // omega_j(beta_l), outgoing first
  std::vector<Eigen::Vector3d> dphi;           // (sigma_l, eta_l, omega_j)
  std::vector<Eigen::Vector2d> group_velocity; // grad of lambda_k at (eta_l, omega_j)
  int n_out = 0;
  MatR r;    // real eigenvectors at beta_l
  MatR ell;  // ell_m B2 r_m' = delta
  Eigen::Vector2d phi0() const { return beta_l; }
};

PhaseSet build_phases(const HyperbolicSystem& sys, const Eigen::Vector2d& beta_l);

// Ratio (w_i - w_N) / (w_j - w_i) with 1-based indices.
double omega_ratio(const VecR& omega, int i, int j, double tol = 1e-12);
// Alternate form (w_i - w_j) / (w_j - w_N).
double omega_ratio_alt(const VecR& omega, int i, int j, double tol = 1e-12);

struct Convergent {
  long long p = 0, q = 1;
};

struct ResonanceReport {
  double omega_ratio = 0.0;
  long long p = 0, q = 1;
  double margin = 0.0;
  double delta_exp = 0.1;
  long long q_max = 0;
  bool resonant = false;
  std::vector<Convergent> convergents;
  std::string verdict() const { return resonant ? "resonant" : "nonresonant-within-qmax"; }
};

std::vector<Convergent> convergents(double x, long long q_max);
// min_{q <= q_max} |round(q x)/q - x| q^(2 + delta)
double diophantine_margin(double x, long long q_max, double delta_exp);
ResonanceReport detect_resonance(double ratio, long long q_max = 1000000, double tol = 1e-13,
                                 double delta_exp = 0.1);

// Denominators d_m of L(k dphi_2 + l dphi_3)^{-1} = sum_m r_m ell_m / d_m.
Eigen::Vector3d nc_denominators(const VecR& omega, int k, int l);
MatR nc_inverse(const PhaseSet& ph, int k, int l);
// L(xi) = xi_t I + B1 xi_1 + B2 xi_2 for the covector k dphi_2 + l dphi_3.
MatR nc_symbol(const HyperbolicSystem& sys, const PhaseSet& ph, int k, int l);

struct AuditEntry {
  int k = 0, l = 0;
  double norm = 0.0;
  double min_divisor = 0.0;
};

struct SmallDivisorAudit {
  int K = 0;
  std::vector<AuditEntry> entries;
  std::vector<double> envelope;  // running max of the norm over |(k,l)|_inf <= n, n = 1..K
  double fit_a = 0.0, fit_C = 0.0, r2 = 0.0;  // fit through the record values of the envelope
  double min_divisor = 0.0;
  AuditEntry worst;
  std::optional<AuditEntry> singular;  // first singular mode when not throwing
};

SmallDivisorAudit small_divisor_audit(const PhaseSet& ph, int K, double singular_tol = 1e-12,
                                      bool throw_on_singular = true);

}  // namespace wkb
