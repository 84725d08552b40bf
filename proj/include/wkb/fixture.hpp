#pragma once

#include <map>
#include <optional>
#include <random>
#include <string>

#include "wkb/hyperbolic.hpp"

namespace wkb {

struct Fixture {
  HyperbolicSystem sys;
  std::optional<Eigen::Vector2d> beta_l;  // unit vector when present
  bool real = true;
  std::map<std::string, std::string> extra;
};

// key = value lines; values are JSON literals (numbers, nested arrays, strings, booleans).
Fixture parse_fixture(const std::string& text, int circle_samples = 720);
Fixture load_fixture(const std::string& path, int circle_samples = 720);
std::string format_fixture(const Fixture& f);

// Acoustic system with parameters (v, u, c); beta_l = (c, 1) normalized.
Fixture euler_fixture(double v, double u, double c, const std::string& id = "euler");
// Same interior operator with a strictly dissipative boundary matrix.
Fixture euler_ulc_fixture(double v, double u, double c, const std::string& id = "euler_ulc");
// Random symmetric strictly hyperbolic pair with p positive eigenvalues of B2.
Fixture random_fixture(std::mt19937_64& rng, int p = 2, const std::string& id = "random");

}  // namespace wkb
