#pragma once

#include <optional>
#include <string>
#include <vector>

#include "wkb/types.hpp"

namespace wkb {

struct HyperbolicCertificate {
  int circle_samples = 0;
  double min_root_gap = 0.0;       // over sampled (eta, xi) directions
  double worst_direction = 0.0;    // angle of the smallest gap
  double max_imag_root = 0.0;
  double det_B2 = 0.0;
  double cond_B2 = 0.0;
  double rank_tol = 0.0;
};

struct HyperbolicSystem {
  std::string id;
  int N = 0;
  int p = 0;
  MatR B1, B2, B, M;
  MatR A0, A1;
  HyperbolicCertificate cert;
};

HyperbolicSystem build_system(const MatR& B1, const MatR& B2, const MatR& B, const MatR& M,
                              int circle_samples = 720, double tol = 1e-8, std::string id = "");

struct Frequency {
  double sigma = 0.0;
  double gamma = 0.0;
  double eta = 0.0;
  cplx tau() const { return {sigma, -gamma}; }
  double norm() const { return std::sqrt(sigma * sigma + gamma * gamma + eta * eta); }
  Frequency scaled(double t) const { return {t * sigma, t * gamma, t * eta}; }
};

// Symbol A(zeta) = -(A0 tau + A1 eta).
MatC symbol(const HyperbolicSystem& sys, cplx tau, cplx eta);
inline MatC symbol(const HyperbolicSystem& sys, const Frequency& z) { return symbol(sys, z.tau(), cplx(z.eta)); }

struct ModeDecomposition {
  Frequency z;
  VecC omega;
  MatC r;      // unit right eigenvectors, columns; outgoing first
  MatC R_raw;  // analytic normalization (reference-functional scaled)
  MatC ell;    // rows, ell_m B2 r_m' = delta
  int n_out = 0;
  int n_in = 0;
  MatC S, S_inv;
  bool cone_tag = false;

  MatC r_out() const { return r.leftCols(n_out); }
  MatC r_in() const { return r.rightCols(n_in); }
};

// Eigen-gap tolerance relative to ||A||.
inline constexpr double kGapTol = 1e-8;

ModeDecomposition decompose(const HyperbolicSystem& sys, const Frequency& z,
                            const ModeDecomposition* prev = nullptr);

// Conjugate reflection onto (-sigma - i gamma, -eta).
ModeDecomposition extend_branch(const HyperbolicSystem& sys, const ModeDecomposition& d);

// Cone membership in (sigma, gamma, eta) directions around (beta, 0).
// Returns +1 for Gamma^+, -1 for Gamma^-, 0 outside.
int cone_side(const Frequency& z, const Eigen::Vector2d& beta, double delta);

// Decomposition with branch labels carried from Gamma^+ into Gamma^- by reflection.
ModeDecomposition decompose_tracked(const HyperbolicSystem& sys, const Frequency& z, const Eigen::Vector2d& beta,
                                    double delta);

enum class PhaseKind { Incoming, Outgoing };
PhaseKind classify_phase(const HyperbolicSystem& sys, const Eigen::Vector2d& beta, cplx omega_j,
                         double tol = 1e-8);
// d lambda_k / d xi at (eta, xi) for the root with lambda_k = -sigma.
double dxi_lambda(const HyperbolicSystem& sys, double sigma, double eta, double xi);

MatC stable_subspace(const HyperbolicSystem& sys, const Frequency& z);

struct LopatinskiValue {
  cplx delta;
  cplx delta_a;
};
LopatinskiValue lopatinski(const HyperbolicSystem& sys, const ModeDecomposition& d);
LopatinskiValue lopatinski(const HyperbolicSystem& sys, const Frequency& z, const ModeDecomposition* prev = nullptr);

struct ScanSample {
  Frequency z;
  cplx delta;
  std::string region;
};

struct LopatinskiProbe {
  Eigen::Vector2d beta_l{0.0, 0.0};
  std::vector<ScanSample> samples;
  double min_abs_delta = 0.0;
  Frequency argmin;
  std::vector<Frequency> failure_set;
  std::vector<cplx> dtau_at_failure;
  cplx dtau_delta{0.0, 0.0};
  double c_plus = 0.0;
  double delta_cone = 0.1;
  double cone_ratio_lo = 0.0, cone_ratio_hi = 0.0;
};

// Hemisphere grid at the given resolution in degrees.
LopatinskiProbe scan_ulc(const HyperbolicSystem& sys, double resolution_deg = 1.0, double zero_tol = 1e-8);

// Central finite difference of Delta in tau at a real frequency.
cplx dtau_delta(const HyperbolicSystem& sys, const Frequency& z, double rel_step = 1e-5);
// Finite-difference gradient of Re Delta in (sigma, eta) at gamma = 0.
Eigen::Vector2d grad_re_delta(const HyperbolicSystem& sys, const Frequency& z, double rel_step = 1e-5);
// Real zero of Delta on the unit gamma = 0 circle nearest the given angle.
double refine_zero_angle(const HyperbolicSystem& sys, double angle0, double half_width);

// Two-sided ratio |tau - c_plus eta| / (|Delta| |zeta|) on cone samples.
std::pair<double, double> cone_ratio(const HyperbolicSystem& sys, const Eigen::Vector2d& beta, double c_plus,
                                    double delta, int samples, unsigned seed);

std::string region_tag(const HyperbolicSystem& sys, const Frequency& z);

}  // namespace wkb
