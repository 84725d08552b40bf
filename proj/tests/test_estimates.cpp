#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>

#include "doctest.h"
#include "wkb/estimates.hpp"
#include "wkb/fixture.hpp"

using namespace wkb;

namespace {

struct Setup {
  Fixture fx;
  PhaseSet ph;
};

Setup make_setup(double u) {
  Setup s{euler_fixture(1.0, u, 1.0), {}};
  s.ph = build_phases(s.fx.sys, *s.fx.beta_l);
  return s;
}

const Setup& nonresonant() {
  static const Setup s = make_setup(std::sqrt(std::sqrt(2.0) - 1.0));
  return s;
}

const Setup& resonant() {
  static const Setup s = make_setup(0.5);
  return s;
}

SingularLattice lattice(const PhaseSet& ph, double eps) {
  SingularLattice L;
  L.epsilon = eps;
  L.beta_l = ph.beta_l;
  return L;
}

Frequency along(const Eigen::Vector2d& b, double t, double gamma = 0.0) { return {t * b(0), gamma, t * b(1)}; }

Frequency rotated(const Eigen::Vector2d& b, double rho, double angle, double gamma = 0.0) {
  const double a = std::atan2(b(1), b(0)) + angle;
  return {rho * std::cos(a), gamma, rho * std::sin(a)};
}

TruncatedSystem small_truncated(const Setup& s, double gamma, double a, std::map<int, double> al = {}) {
  SingularLattice L = lattice(s.ph, 0.5);
  L.k_min = L.r_min = -2;
  L.k_max = L.r_max = 2;
  if (al.empty()) al = {{1, a}, {-1, 0.5 * a}, {2, 0.3 * a}};
  const Frequency z{0.3 * s.ph.beta_l(0) + 0.1, gamma, 0.3 * s.ph.beta_l(1)};
  return make_truncated(s.fx.sys, s.ph, L, z, al);
}

std::vector<Vec2c> some_data(int K) {
  std::vector<Vec2c> G(K);
  for (int i = 0; i < K; ++i) G[i] = Vec2c(1.0 + 0.1 * i, cplx(0.2, -0.3 * i));
  return G;
}

}  // namespace

TEST_CASE("lattice frequencies and the projection on the beta ray") {
  const auto& s = nonresonant();
  const SingularLattice L = lattice(s.ph, 1.0 / 16);
  const Frequency z{0.4, 0.2, -0.7};
  for (int k : {-3, 0, 5}) {
    const Frequency X = L.X(z, k), Xt = L.X_tilde(z, k);
    CHECK(X.sigma - z.sigma == doctest::Approx(16.0 * k * s.ph.beta_l(0)));
    CHECK(Xt.gamma == 0.0);
    CHECK(std::abs(Xt.sigma * s.ph.beta_l(1) - Xt.eta * s.ph.beta_l(0)) < 1e-12);
    // distance to the ray does not depend on k
    const double d = std::hypot(X.sigma - Xt.sigma, X.eta - Xt.eta);
    const double perp = std::abs(z.sigma * s.ph.beta_l(1) - z.eta * s.ph.beta_l(0));
    CHECK(d == doctest::Approx(perp).epsilon(1e-12));
  }
  CHECK(L.cutoff() == doctest::Approx(4.0));
  CHECK(L.chi(Frequency{3.0, 0.0, 2.0}));
  CHECK_FALSE(L.chi(Frequency{3.0, 0.0, 3.0}));
}

TEST_CASE("lattice modes follow the phases along the ray") {
  const auto& s = nonresonant();
  for (double t : {0.7, -2.5, 40.0}) {
    const LatticeModes m = lattice_modes(s.fx.sys, s.ph, along(s.ph.beta_l, t));
    CHECK(m.labelled);
    for (int j = 0; j < 3; ++j) CHECK(std::abs(m.omega(j) - t * s.ph.omega(j)) < 1e-10 * std::abs(t));
    CHECK((symbol(s.fx.sys, m.X) * m.r - m.r * m.omega.asDiagonal()).norm() < 1e-10 * std::abs(t));
    CHECK((m.S_inv * m.r - Mat3c::Identity()).norm() < 1e-10);
  }
  // off the cone: outgoing first
  const LatticeModes m = lattice_modes(s.fx.sys, s.ph, Frequency{0.0, 1.0, 0.3});
  CHECK_FALSE(m.labelled);
  CHECK(m.omega(0).imag() < 0);
  CHECK(m.omega(1).imag() > 0);
  CHECK(m.omega(2).imag() > 0);
  CHECK_THROWS(lattice_modes(s.fx.sys, s.ph, rotated(s.ph.beta_l, 1.0, 1.2)));
}

TEST_CASE("E tilde vanishes at the aligned frequency") {
  const auto& s = nonresonant();
  const SingularLattice L = lattice(s.ph, 1.0 / 16);
  const double Om = omega_ratio(s.ph.omega, 1, 2);
  for (auto [k, r] : {std::pair{3, 2}, std::pair{-1, 4}, std::pair{5, -3}}) {
    // s + k - r = r Omega with s = eps (zeta . beta)
    const double sv = r * Om - k + r;
    const Frequency z = along(s.ph.beta_l, sv / L.epsilon);
    CHECK(std::abs(E_ij_tilde(L, s.ph, 0, 1, k, r, z)) < 1e-9);
    const Frequency z2 = along(s.ph.beta_l, (sv + 0.25) / L.epsilon);
    CHECK(std::abs(E_ij_tilde(L, s.ph, 0, 1, k, r, z2)) > 1.0);
  }
}

TEST_CASE("E by homogeneity on the ray") {
  const auto& s = nonresonant();
  for (double eps : {0.5, 1.0 / 16}) {
    const SingularLattice L = lattice(s.ph, eps);
    const Frequency z = along(s.ph.beta_l, 1.0);
    for (int j : {1, 2}) {
      // X_0 = beta, X_{-1} = (1 - 1/eps) beta
      const cplx oracle = s.ph.omega(0) - s.ph.omega(2) / eps - (1.0 - 1.0 / eps) * s.ph.omega(j);
      CHECK(std::abs(E_ij(L, s.fx.sys, s.ph, 0, j, 0, 1, z) - oracle) < 1e-10 / eps);
      CHECK(std::abs(E_ij_tilde(L, s.ph, 0, j, 0, 1, z) - oracle) < 1e-10 / eps);
    }
  }
}

TEST_CASE("E stays within a Lipschitz band of E tilde") {
  const auto& s = nonresonant();
  const SingularLattice L = lattice(s.ph, 1.0 / 16);
  double worst = 0.0;
  int n = 0;
  for (double ang : {0.0, 0.002, -0.004, 0.01})
    for (double rho : {0.5, 2.0, 3.5})
      for (int k = -6; k <= 6; ++k)
        for (int r : {-3, -1, 1, 2, 5}) {
          const Frequency z = rotated(s.ph.beta_l, rho, ang);
          if (L.X(z, k).norm() == 0 || cone_side(L.X(z, k), L.beta_l, L.delta) == 0 ||
              cone_side(L.X(z, k - r), L.beta_l, L.delta) == 0)
            continue;
          const double dist = [&] {
            auto d = [&](int kk) {
              const Frequency X = L.X(z, kk), Xt = L.X_tilde(z, kk);
              return std::hypot(X.sigma - Xt.sigma, X.eta - Xt.eta);
            };
            return d(k) + d(k - r);
          }();
          const double e = std::abs(E_ij(L, s.fx.sys, s.ph, 0, 1, k, r, z) - E_ij_tilde(L, s.ph, 0, 1, k, r, z));
          if (dist == 0) {
            CHECK(e < 1e-9 * L.X(z, k).norm());
          } else {
            worst = std::max(worst, e / dist);
            ++n;
          }
        }
  CHECK(n > 100);
  CHECK(worst < 50.0);
}

TEST_CASE("region classification and amplification factors") {
  const auto& s = nonresonant();
  SingularLattice L = lattice(s.ph, 1.0 / 16);
  const Eigen::Vector2d b = s.ph.beta_l, perp(-b(1), b(0));
  SUBCASE("both on the ray") {
    const Frequency z = along(b, 0.3);
    CHECK(region_classify(L, 2, 1, z) == Region::I);
    CHECK(amplification_D(L, 2, 1, z) == doctest::Approx(1.0));
    CHECK(amplification_DD(L, 2, 1, z) == doctest::Approx(1.0));
  }
  SUBCASE("shifted frequency rotated away") {
    const Frequency z{1e-4 * (b(0) + perp(0)), 0.0, 1e-4 * (b(1) + perp(1))};
    CHECK(region_classify(L, 1, 1, z) == Region::II);
    CHECK(L.X(z, 0).norm() * L.N1 / L.X(z, 1).norm() < 1.0);
  }
  SUBCASE("case III") {
    const Frequency z = rotated(b, 1.0, 0.05);
    CHECK(region_classify(L, 0, 5, z) == Region::III);
    CHECK(amplification_D(L, 0, 5, z) == doctest::Approx(5.0));
    CHECK(amplification_DD(L, 0, 5, z) == doctest::Approx(std::pow(5.0, 2.1)));
  }
  SUBCASE("off the cone") {
    const Frequency z{perp(0), 0.0, perp(1)};
    CHECK(region_classify(L, 0, 2, z) == Region::OffCone);
    CHECK(amplification_D(L, 0, 2, z) == 0.0);
    CHECK(amplification_DD(L, 0, 2, z) == 1.0);
  }
  SUBCASE("large r branch") {
    const int r = static_cast<int>(std::ceil(std::pow(L.epsilon, -L.xi))) + 1;
    const double g = 1e-3;
    const Frequency z = along(b, 0.3, g);
    REQUIRE(region_classify(L, 20, r, z) == Region::I);
    const double expect = L.C5 * r / (L.epsilon * g);
    CHECK(amplification_D(L, 20, r, z) == doctest::Approx(expect));
    CHECK(amplification_DD(L, 20, r, z) == doctest::Approx(expect));
  }
  CHECK(std::string(region_name(Region::II)) == "II");
}

TEST_CASE("Volterra integrals against closed forms") {
  const Quadrature q = gauss_legendre(40.0, 80, 12);
  double wsum = 0.0;
  for (double w : q.w) wsum += w;
  CHECK(wsum == doctest::Approx(40.0).epsilon(1e-13));
  std::vector<cplx> f(q.x.size());
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = std::exp(-q.x[i]);
  for (cplx mu : {cplx(0.0, 2.0), cplx(3.0, 0.5), cplx(-1.0, 0.0)}) {
    const auto F = volterra_forward(q, mu, f);
    double err = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) {
      const double x = q.x[i];
      const cplx exact = std::exp(I * mu * x) * (1.0 - std::exp(-(1.0 + I * mu) * x)) / (1.0 + I * mu);
      err = std::max(err, std::abs(F[i] - exact));
    }
    CHECK(err < 1e-12);
  }
  for (cplx mu : {cplx(0.0, -2.0), cplx(3.0, -0.5), cplx(1.0, 0.0)}) {
    const auto B = volterra_backward(q, mu, f);
    double err = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) {
      const double x = q.x[i];
      // f vanishes past the grid end
      const double Lx = q.length;
      const cplx exact = std::exp(-x) * (1.0 - std::exp(-(1.0 + I * mu) * (Lx - x))) / (1.0 + I * mu);
      err = std::max(err, std::abs(B[i] - exact));
    }
    CHECK(err < 1e-12);
  }
}

TEST_CASE("laplace transform inequalities and identity") {
  // f = e^{-s}: the Laplace-side convolution stays below the 1/gamma bound
  for (double g : {0.5, 2.0}) {
    const double conv2 = [&] {
      // |(e^{-s} - e^{-g s}) / (g - 1)|^2 integrated
      if (std::abs(g - 1.0) < 1e-12) return 0.25;
      return (0.5 + 1.0 / (2 * g) - 2.0 / (1.0 + g)) / ((g - 1.0) * (g - 1.0));
    }();
    CHECK(std::sqrt(conv2) < std::sqrt(0.5) / g);
  }
  for (double g : {0.5, 1.0, 2.0, 8.0}) {
    const LaplaceBoundsResult r = laplace_bounds_check(g, 100, 7);
    CHECK(r.pass);
    CHECK(r.worst_a <= 1.0 + 1e-6);
    CHECK(r.worst_b <= 1.0 + 1e-6);
    CHECK(r.worst_c <= 1.0 + 1e-6);
    CHECK(r.worst_d <= 1e-8);
  }
  CHECK_THROWS(laplace_bounds_check(0.0, 1, 1));
}

TEST_CASE("exact truncated solution solves the boundary problem") {
  const auto& s = nonresonant();
  const TruncatedSystem T = small_truncated(s, 1.0, 0.1);
  const auto G = some_data(T.K());
  const ExactSolution sol = solve_truncated_exact(T, G);
  const MatC B = s.fx.sys.B.cast<cplx>();
  for (int a = 0; a < T.K(); ++a) CHECK((B * sol.eval(a, 0.0) - G[a]).norm() < 1e-12);
  // ODE residual by central differences
  const Mat3c C = (s.fx.sys.B2.inverse() * s.fx.sys.M).cast<cplx>();
  const double x = 0.7, h = 1e-5;
  for (int a = 0; a < T.K(); ++a) {
    const Vec3c dV = (sol.eval(a, x + h) - sol.eval(a, x - h)) / (2 * h);
    Vec3c rhs = I * symbol(s.fx.sys, T.modes[a].X) * sol.eval(a, x);
    for (const auto& [r, al] : T.alpha) {
      const int b = a - r;
      if (b >= 0 && b < T.K()) rhs -= al * std::exp(I * double(r) * T.nu() * x) * (C * sol.eval(b, x));
    }
    CHECK((dV - rhs).norm() < 1e-7 * std::max(1.0, rhs.norm()));
  }
}

TEST_CASE("uncoupled norms against direct quadrature") {
  const auto& s = nonresonant();
  const TruncatedSystem T = small_truncated(s, 0.4, 0.0, {{1, 0.0}});
  CHECK(T.alpha.empty());
  const auto G = some_data(T.K());
  const ExactSolution sol = solve_truncated_exact(T, G);
  const NormPieces np = exact_norms(T, sol);
  for (int a = 0; a < T.K(); ++a) {
    const LatticeModes& m = T.modes[a];
    const Vec2c c = m.Br_minus.inverse() * G[a];
    auto V = [&](double x) -> Vec3c {
      return m.r.col(1) * c(0) * std::exp(I * m.omega(1) * x) + m.r.col(2) * c(1) * std::exp(I * m.omega(2) * x);
    };
    const double l2 = std::sqrt(boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
        [&](double x) { return V(x).squaredNorm(); }, 0.0, std::numeric_limits<double>::infinity(), 15, 1e-13));
    CHECK(np.l2[a] == doctest::Approx(l2).epsilon(1e-9));
    CHECK(np.trace[a] == doctest::Approx(V(0.0).norm()).epsilon(1e-12));
  }
}

TEST_CASE("fixed-point solver matches the exact solver") {
  const auto& s = nonresonant();
  for (double g : {2.0, 0.3}) {
    const TruncatedSystem T = small_truncated(s, g, 0.1);
    const auto G = some_data(T.K());
    const ExactSolution ex = solve_truncated_exact(T, G);
    const NormPieces ne = exact_norms(T, ex);
    const ModeState st = solve_truncated_integral_system(T, G, {}, FixedPointOptions{});
    const NormPieces nq = quadrature_norms(T, st);
    CHECK(st.residual < 1e-8);
    CHECK(st.contraction < 1.0);
    double md = 0.0, scale = 0.0;
    for (int a = 0; a < T.K(); ++a) {
      CHECK(nq.modified[a] == doctest::Approx(ne.modified[a]).epsilon(1e-8));
      CHECK(nq.l2[a] == doctest::Approx(ne.l2[a]).epsilon(1e-8));
      CHECK(nq.trace[a] == doctest::Approx(ne.trace[a]).epsilon(1e-8));
      CHECK(st.norms[a] == nq.modified[a]);
      for (std::size_t j = 0; j < st.q.x.size(); j += 37) {
        md = std::max(md, (ex.eval(a, st.q.x[j]) - st.V[a][j]).norm());
        scale = std::max(scale, st.V[a][j].norm());
      }
    }
    CHECK(md < 1e-9 * scale);
  }
}

TEST_CASE("fixed-point solver with forcing") {
  const auto& s = nonresonant();
  const TruncatedSystem T = small_truncated(s, 1.0, 0.05);
  const auto G = some_data(T.K());
  FixedPointOptions o;
  const Quadrature q = fixed_point_grid(T, o);
  std::vector<std::vector<Vec3c>> F(T.K(), std::vector<Vec3c>(q.x.size()));
  for (int a = 0; a < T.K(); ++a)
    for (std::size_t j = 0; j < q.x.size(); ++j) F[a][j] = Vec3c(1.0, -0.5, 0.25 * a) * std::exp(-2.0 * q.x[j]);
  const ModeState st = solve_truncated_integral_system(T, G, F, o);
  CHECK(st.residual < 1e-8);
  const MatC B = s.fx.sys.B.cast<cplx>();
  for (int a = 0; a < T.K(); ++a) {
    const Vec3c V0 = T.modes[a].r * Vec3c(st.w_plus[a].back(), st.w_minus[a].back()(0), st.w_minus[a].back()(1));
    CHECK((B * V0 - G[a]).norm() < 1e-10);
  }
  CHECK_THROWS(solve_truncated_integral_system(T, G, {std::vector<Vec3c>(3)}, o));
}

TEST_CASE("decoupled fixed point is the boundary term") {
  const auto& s = nonresonant();
  const TruncatedSystem T = small_truncated(s, 1.0, 0.0, {{1, 0.0}});
  const auto G = some_data(T.K());
  const ModeState st = solve_truncated_integral_system(T, G, {}, FixedPointOptions{});
  for (int a = 0; a < T.K(); ++a) {
    const LatticeModes& m = T.modes[a];
    const Vec2c h = m.Br_minus.inverse() * G[a];
    double ep = 0.0, em = 0.0;
    for (std::size_t j = 0; j < st.q.x.size(); ++j) {
      ep = std::max(ep, std::abs(st.w_plus[a][j]));
      const double x = st.q.x[j];
      const Vec2c e(std::exp(I * m.omega(1) * x) * h(0), std::exp(I * m.omega(2) * x) * h(1));
      em = std::max(em, (st.w_minus[a][j] - e).norm());
    }
    CHECK(ep == 0.0);
    CHECK(em < 1e-14 * h.norm());
  }
}

TEST_CASE("small coupling is first order") {
  const auto& s = nonresonant();
  auto trace = [&](double a) {
    const TruncatedSystem T = small_truncated(s, 1.0, 0.0, {{1, a}});
    const ExactSolution e = solve_truncated_exact(T, some_data(T.K()));
    VecC out(3 * T.K());
    for (int k = 0; k < T.K(); ++k) out.segment(3 * k, 3) = e.eval(k, 0.8);
    return out;
  };
  const VecC v0 = trace(0.0);
  std::vector<double> second;
  for (double a : {1e-4, 1e-5}) {
    const VecC d1 = trace(a) - v0, d2 = trace(2 * a) - v0;
    CHECK(d1.norm() > 0);
    second.push_back((d2 - 2.0 * d1).norm() / d1.norm());
  }
  // relative second-order defect shrinks linearly with the coupling
  CHECK(second[1] / second[0] == doctest::Approx(0.1).epsilon(0.2));
}

TEST_CASE("quadrature refinement") {
  const auto& s = nonresonant();
  const TruncatedSystem T = small_truncated(s, 1.0, 0.1);
  const auto G = some_data(T.K());
  FixedPointOptions o;
  const Quadrature q = fixed_point_grid(T, o);
  FixedPointOptions o2 = o;
  o2.X2_max = q.length;
  o2.panels = 2 * q.panels;
  const ModeState a = solve_truncated_integral_system(T, G, {}, o), b = solve_truncated_integral_system(T, G, {}, o2);
  for (int k = 0; k < T.K(); ++k) CHECK(std::abs(a.norms[k] - b.norms[k]) < 1e-8 * b.norms[k]);
}

TEST_CASE("contraction threshold") {
  const auto& s = nonresonant();
  SingularLattice L = lattice(s.ph, 0.5);
  L.k_min = L.r_min = -2;
  L.k_max = L.r_max = 2;
  const Frequency z{0.3 * s.ph.beta_l(0) + 0.1, 1.0, 0.3 * s.ph.beta_l(1)};
  const std::map<int, double> weak{{1, 0.05}};
  CHECK(contraction_threshold(s.fx.sys, s.ph, L, z, weak, 1.0, 8.0) == 1.0);
  const std::map<int, double> strong{{1, 0.3}, {-1, 0.3}};
  const double g0 = contraction_threshold(s.fx.sys, s.ph, L, z, strong, 0.1, 1.6, 4);
  CHECK(g0 > 0.1);
  CHECK(g0 <= 1.6);
}

TEST_CASE("decay coefficients and beta summability") {
  const auto a = decay_coefficients(-16, 16, 8.0);
  CHECK(a.size() == 32);
  CHECK(a.count(0) == 0);
  CHECK(a.at(1) == doctest::Approx(1.0 / 16));
  CHECK(a.at(-3) == doctest::Approx(1e-4));
  const auto& s = nonresonant();
  const SingularLattice L = lattice(s.ph, 1.0 / 256);
  const auto sums = beta_l1_partial_sums(L, 1.0, 4, 4, 4096);
  REQUIRE(sums.size() == 13);
  for (std::size_t i = 1; i < sums.size(); ++i) CHECK(sums[i] >= sums[i - 1]);
  CHECK(sums.back() - sums[sums.size() - 2] < 1e-9 * sums.back());
}

TEST_CASE("mode-frame bounds over lattice samples") {
  const auto& s = nonresonant();
  SingularLattice L = lattice(s.ph, 1.0 / 16);
  L.k_min = L.r_min = -6;
  L.k_max = L.r_max = 6;
  std::vector<Frequency> Z;
  for (double g : {0.05, 0.5})
    for (double ang : {0.0, 0.01, -0.03, 0.06, 0.5, 2.0})
      for (double rho : {0.3, 1.5, 3.9}) Z.push_back(rotated(s.ph.beta_l, rho, ang, g));
  const ModeFrameReport rep = mode_frame_suite(L, s.fx.sys, s.ph, Z);
  CHECK(rep.samples >= 300);
  CHECK(rep.dichotomy);
  CHECK(rep.D_le_DD_violations == 0);
  CHECK(rep.max_delta < 1.0);
  CHECK(rep.max_Br < 10.0);
  CHECK(rep.gap_lo > 0.1);
  CHECK(rep.gap_hi < 10.0);
  CHECK(rep.c_im > 0.0);
}

TEST_CASE("lower bounds separate the two fixtures") {
  const auto& nr = nonresonant();
  const auto& rs = resonant();
  auto scan = [](const Setup& s, double eps, int n_rad) {
    SingularLattice L = lattice(s.ph, eps);
    L.chi_C = 0.1;
    L.k_min = -32;
    L.k_max = 32;
    L.zeta_samples = lower_bound_samples(L, n_rad, 4);
    return lower_bound_scan(L, s.fx.sys, s.ph, 8);
  };
  const auto a = scan(nr, 1.0 / 16, 4), b = scan(nr, 1.0 / 64, 4);
  REQUIRE(a.rows.size() == 2);
  CHECK(a.rows[0].j == 1);
  CHECK(a.rows[0].c1 > 0);
  CHECK(a.rows[0].c2 > 0);
  CHECK(std::max(a.rows[0].c1, b.rows[0].c1) < 3 * std::min(a.rows[0].c1, b.rows[0].c1));
  CHECK(a.rows[1].cN > 0);
  CHECK(a.rows[0].k0_ratio > 0.5);
  const auto c = scan(rs, 1.0 / 16, 4), d = scan(rs, 1.0 / 16, 16);
  CHECK(d.rows[0].c2 < 0.1 * c.rows[0].c2);
  // the minimiser sits at the root of the closed form
  const SingularLattice L = lattice(rs.ph, 1.0 / 16);
  const auto& row = d.rows[0];
  CHECK(std::abs(E_ij_tilde(L, rs.ph, 0, 1, row.argmin_k, row.argmin_r, row.argmin_c2)) <
        1e-3 * std::abs(row.argmin_r) / L.epsilon);
}

TEST_CASE("estimate ratios on a small lattice") {
  const auto& s = nonresonant();
  SingularLattice L = lattice(s.ph, 1.0 / 16);
  L.k_min = L.r_min = -4;
  L.k_max = L.r_max = 4;
  const auto al = decay_coefficients(-4, 4, 8.0);
  SweepOptions o;
  o.n_rad = 2;
  o.n_ang = 2;
  const EstimatePair p = estimate_checks(s.fx.sys, s.ph, L, 1.0, al, o);
  CHECK(p.main.fitted > 0);
  CHECK(p.iteration.fitted > 0);
  CHECK(std::isfinite(p.main.fitted));
  CHECK(main_estimate_check(s.fx.sys, s.ph, L, 1.0, al, o).fitted == p.main.fitted);
  CHECK(iteration_estimate_check(s.fx.sys, s.ph, L, 1.0, al, o).fitted == p.iteration.fitted);
  CHECK_THROWS(estimate_checks(s.fx.sys, s.ph, L, 100.0, al, o));
}
