#include <cmath>

#include "doctest.h"
#include "wkb/fixture.hpp"
#include "wkb/phase.hpp"

using namespace wkb;

namespace {
const double kU = std::sqrt(std::sqrt(2.0) - 1.0);
}

TEST_CASE("phase set on the euler fixture") {
  const auto f = euler_fixture(1.0, kU, 1.0);
  const auto ph = build_phases(f.sys, *f.beta_l);
  // closed-form roots of the acoustic and shear factors, scaled by |beta|
  const double s = 1.0 / std::sqrt(2.0);
  CHECK(ph.omega(0) == doctest::Approx(s * 2 * kU / (1 - kU * kU)).epsilon(1e-12));
  CHECK(std::abs(ph.omega(1)) < 1e-12);
  CHECK(ph.omega(2) == doctest::Approx(-s / kU).epsilon(1e-12));
  CHECK(ph.n_out == 1);
  for (int j = 0; j < 3; ++j)
    for (int m = 0; m < 3; ++m) {
      const Eigen::Vector3d dd = ph.dphi[j] - ph.dphi[m];
      CHECK(dd(0) == 0.0);
      CHECK(dd(1) == 0.0);
      CHECK(dd(2) == ph.omega(j) - ph.omega(m));
    }
  // incoming iff the xi-component of the group velocity is positive
  for (int j = 0; j < 3; ++j) CHECK((ph.group_velocity[j](1) > 0) == (j >= ph.n_out));
  // phi_j(t, x1, 0) is the boundary phase
  const double t = 0.3, x1 = -1.7;
  for (int j = 0; j < 3; ++j) CHECK(ph.dphi[j].head<2>().dot(Eigen::Vector2d(t, x1)) == ph.phi0().dot(Eigen::Vector2d(t, x1)));
}

TEST_CASE("omega ratio") {
  VecR w(3);
  w << 0, 1, 2;
  CHECK(omega_ratio(w, 1, 2) == -2.0);
  w << 2, 1, 2;
  CHECK(omega_ratio(w, 1, 2) == 0.0);
  w << 1, 1, 2;
  CHECK_THROWS(omega_ratio(w, 1, 2));
  const auto f = euler_fixture(1.0, kU, 1.0);
  const auto ph = build_phases(f.sys, *f.beta_l);
  CHECK(omega_ratio(ph.omega, 1, 2) == doctest::Approx(-1.0 - std::sqrt(2.0) / 2).epsilon(1e-11));
  // recompute from raw eigenvalues of the symbol
  Eigen::ComplexEigenSolver<MatC> es(symbol(f.sys, Frequency{(*f.beta_l)(0), 0, (*f.beta_l)(1)}));
  VecR raw = es.eigenvalues().real();
  std::sort(raw.data(), raw.data() + 3, std::greater<>());
  CHECK(omega_ratio(raw, 1, 2) == doctest::Approx(omega_ratio(ph.omega, 1, 2)).epsilon(1e-12));
  const auto r = euler_fixture(1.0, 0.5, 1.0);
  CHECK(omega_ratio(build_phases(r.sys, *r.beta_l).omega, 1, 2) == doctest::Approx(-2.5).epsilon(1e-12));
}

TEST_CASE("resonance detection") {
  auto r = detect_resonance(0.5, 100);
  CHECK(r.resonant);
  CHECK(r.p == 1);
  CHECK(r.q == 2);
  r = detect_resonance(0.0, 100);
  CHECK(r.resonant);
  CHECK(r.p == 0);
  CHECK(r.q == 1);
  for (int q = 1; q <= 40; ++q)
    for (int p = -60; p <= 60; ++p) {
      if (std::gcd(p, q) != 1) continue;
      const auto rr = detect_resonance(double(p) / q, 1000);
      CHECK(rr.resonant);
      CHECK(rr.p == p);
      CHECK(rr.q == q);
    }
  r = detect_resonance(-2.5, 1000000);
  CHECK(r.resonant);
  CHECK(r.p == -5);
  CHECK(r.q == 2);
  r = detect_resonance(std::sqrt(2.0) - 1, 1000000, 1e-13, 0.1);
  CHECK(!r.resonant);
  CHECK(r.margin > 0);
  // convergent 1136689/665857 sits within 1e-12 of this ratio
  const auto nr = euler_fixture(1.0, std::sqrt(std::sqrt(2.0) - 1.0), 1.0);
  r = detect_resonance(omega_ratio(build_phases(nr.sys, *nr.beta_l).omega, 1, 2), 1000000);
  CHECK(!r.resonant);
  CHECK(r.margin > 0);
}

TEST_CASE("margin is positive and non-increasing in q_max for quadratic surds") {
  for (double x : {std::sqrt(2.0) - 1, (1 + std::sqrt(5.0)) / 2, std::sqrt(3.0), -1 - std::sqrt(2.0) / 2}) {
    double prev = INFINITY;
    for (long long q : {10LL, 100LL, 1000LL, 10000LL, 100000LL, 1000000LL}) {
      const double m = diophantine_margin(x, q, 0.1);
      CHECK(m > 0);
      CHECK(m <= prev);
      prev = m;
    }
  }
}

TEST_CASE("closed-form inverse against a dense solve") {
  const auto f = euler_fixture(1.0, kU, 1.0);
  const auto ph = build_phases(f.sys, *f.beta_l);
  for (int k : {-7, -1, 1, 3, 50})
    for (int l : {-9, -2, 1, 4, 31}) {
      const MatR L = nc_symbol(f.sys, ph, k, l);
      const MatR Li = L.partialPivLu().inverse();
      const MatR C = nc_inverse(ph, k, l);
      CHECK((C - Li).norm() <= 1e-8 * Li.norm());
      Eigen::JacobiSVD<MatR> a(C), b(Li);
      CHECK(a.singularValues()(0) == doctest::Approx(b.singularValues()(0)).epsilon(1e-8));
    }
}

TEST_CASE("small divisor audit") {
  VecR w(3);
  w << 1.3, 0.4, -0.9;
  for (int k = 1; k < 5; ++k) CHECK(std::abs(nc_denominators(w, k, 3)(2)) > 0);
  // omega_1 = (p w2 + q w3)/(p + q) forces d_1 = 0 at (k, l) = (p, q)
  PhaseSet ph;
  ph.omega.resize(3);
  ph.omega << (3 * 0.4 + 2 * -0.9) / 5.0, 0.4, -0.9;
  ph.r = MatR::Identity(3, 3);
  ph.ell = MatR::Identity(3, 3);
  CHECK(std::abs(nc_denominators(ph.omega, 3, 2)(0)) < 1e-15);
  try {
    small_divisor_audit(ph, 5);
    FAIL("expected SingularMode");
  } catch (const Error& e) {
    CHECK(e.kind() == "SingularMode");
  }
  const auto sa = small_divisor_audit(ph, 5, 1e-12, false);
  REQUIRE(sa.singular);
  CHECK(std::abs(sa.singular->k) == 3);
  CHECK(sa.singular->l * sa.singular->k == 6);
  const auto f = euler_fixture(1.0, kU, 1.0);
  const auto a = small_divisor_audit(build_phases(f.sys, *f.beta_l), 200);
  CHECK(a.entries.size() == 400u * 400u);
  CHECK(a.fit_a >= 1.0);
  CHECK(a.r2 > 0.9);
  MESSAGE("fit a = " << a.fit_a << " R2 = " << a.r2);
}
