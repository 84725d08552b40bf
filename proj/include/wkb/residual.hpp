#pragma once

#include <vector>

#include "wkb/cascade.hpp"

namespace wkb {

struct ResidualRow {
  double eps = 0.0;
  double interior_l2 = 0.0;
  double boundary_l2 = 0.0;
  double lead_osc_l2 = 0.0;  // ||f(., Phi/eps)|| for f = L U_J + f M U_J
};

struct ResidualReport {
  std::vector<ResidualRow> rows;
  double slope = 0.0, intercept = 0.0;
  double boundary_max = 0.0;
  double lead_theta_l2 = 0.0;  // ||f||_{L2(t, x, theta)}
  double lead_h1 = 0.0;        // ||f||_{H1(t, x, theta)}
  double periodic_ratio_max = 0.0;  // max over eps of ||f(., Phi/eps)|| / ||f||_{H1}
};

// Residual of u_a = sum eps^k U_k(t, x, Phi/eps) in the e^{-gamma t} weighted L2 norm over the box times x2 > 0.
// Closed form per frequency; eps must make e^{i beta.(t,x1)/eps} box-periodic.
ResidualReport residual_scan(const CascadeResult& res, const std::vector<double>& eps);

// Least-squares slope and intercept of log y against log x.
std::pair<double, double> loglog_fit(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace wkb
