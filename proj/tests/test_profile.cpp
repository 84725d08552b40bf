#include <cmath>
#include <random>

#include "doctest.h"
#include "wkb/fixture.hpp"
#include "wkb/profile.hpp"

using namespace wkb;

namespace {

const ProjectorKit& kit() {
  static const ProjectorKit k = [] {
    const auto f = euler_fixture(1.0, std::sqrt(std::sqrt(2.0) - 1.0), 1.0);
    return build_projectors(f.sys, build_phases(f.sys, *f.beta_l));
  }();
  return k;
}

GridField rand_field(std::mt19937_64& rng, int n) {
  std::normal_distribution<double> d;
  GridField g;
  g.v.resize(3, n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < 3; ++i) g.v(i, j) = {d(rng), d(rng)};
  return g;
}

Profile<GridField> rand_profile(std::mt19937_64& rng, int npts, bool theta1 = true, int Knc = 16) {
  Profile<GridField> U;
  std::uniform_int_distribution<int> pick(-Knc, Knc);
  U[ModeKey::mean()] = rand_field(rng, npts);
  for (int m = theta1 ? 1 : 2; m <= 3; ++m)
    for (int n : {-3, -1, 1, 2, 7}) U[ModeKey::pure(m, n)] = rand_field(rng, npts);
  for (int i = 0; i < 12; ++i) {
    int k = pick(rng), l = pick(rng);
    if (k == 0 || l == 0) continue;
    U[ModeKey::nc(k, l)] = rand_field(rng, npts);
  }
  return U;
}

double rel_diff(const Profile<GridField>& a, const Profile<GridField>& b) {
  const auto d = axpy(a, b, -1.0);
  return std::sqrt(d.norm2() / std::max(b.norm2(), 1e-300));
}

double abs_norm(const Profile<GridField>& a) { return std::sqrt(a.norm2()); }

}  // namespace

TEST_CASE("projector identities") {
  const auto& K = kit();
  const Mat3c Id = Mat3c::Identity();
  Mat3c sP = Mat3c::Zero(), sQ = Mat3c::Zero();
  for (int m = 0; m < 3; ++m) {
    CHECK((K.R[m] * K.L[m] - (Id - K.P[m])).norm() < 1e-10);
    CHECK((K.L[m] * K.R[m] - (Id - K.Q[m])).norm() < 1e-10);
    CHECK((K.P[m] * K.R[m]).norm() < 1e-10);
    CHECK((K.R[m] * K.Q[m]).norm() < 1e-10);
    CHECK((K.P[m] * K.P[m] - K.P[m]).norm() < 1e-10);
    CHECK((K.Q[m] * K.Q[m] - K.Q[m]).norm() < 1e-10);
    sP += K.P[m];
    sQ += K.Q[m];
    for (int mp = 0; mp < 3; ++mp) {
      const Vec3c pr = K.P[m] * K.r.col(mp);
      CHECK((pr - (m == mp ? Vec3c(K.r.col(mp)) : Vec3c(Vec3c::Zero()))).norm() < 1e-12);
    }
    CHECK((K.R[m] * (K.B2 * K.r.col(m))).norm() < 1e-12);
    CHECK((K.L[m] * K.r.col(m)).norm() < 1e-12);
  }
  CHECK((sP - Id).norm() < 1e-10);
  CHECK((sQ - Id).norm() < 1e-10);
  // Im L(dphi_m) = Ker Q_m, checked on random X
  std::mt19937_64 rng(1);
  std::normal_distribution<double> d;
  for (int t = 0; t < 20; ++t) {
    Vec3c x(cplx(d(rng), d(rng)), cplx(d(rng), d(rng)), cplx(d(rng), d(rng)));
    for (int m = 0; m < 3; ++m) CHECK((K.Q[m] * K.L[m] * x).norm() < 1e-12 * x.norm() * 10);
  }
}

TEST_CASE("operator identities on random profiles") {
  const auto& K = kit();
  std::mt19937_64 rng(42);
  for (int trial = 0; trial < 100; ++trial) {
    const auto U = rand_profile(rng, 4);
    const double n = abs_norm(U);
    const auto EP = apply_EP(K, U), EQ = apply_EQ(K, U);
    const auto IminusEP = axpy(EP, U, -1.0), IminusEQ = axpy(EQ, U, -1.0);
    CHECK(rel_diff(apply_R(K, apply_Ltheta(K, U)), IminusEP) < 1e-10);
    CHECK(rel_diff(apply_Ltheta(K, apply_R(K, U)), IminusEQ) < 1e-10);
    CHECK(abs_norm(apply_EP(K, apply_R(K, U))) < 1e-10 * n);
    CHECK(abs_norm(apply_R(K, EQ)) < 1e-10 * n);
    CHECK(abs_norm(apply_EQ(K, apply_Ltheta(K, U))) < 1e-10 * n * 50);
    CHECK(abs_norm(apply_Ltheta(K, EP)) < 1e-10 * n * 50);
    CHECK(rel_diff(apply_EP(K, EP), EP) < 1e-12);
  }
}

TEST_CASE("simple actions") {
  const auto& K = kit();
  std::mt19937_64 rng(7);
  Profile<GridField> mean;
  mean[ModeKey::mean()] = rand_field(rng, 3);
  CHECK(rel_diff(apply_EP(K, mean), mean) == 0.0);
  CHECK(apply_R(K, mean).norm2() == 0.0);
  CHECK(apply_Ltheta(K, mean).norm2() == 0.0);
  Profile<GridField> nc;
  nc[ModeKey::nc(2, -3)] = rand_field(rng, 3);
  CHECK(apply_EP(K, nc).norm2() == 0.0);
  for (int m = 1; m <= 3; ++m) {
    Profile<GridField> p;
    GridField g;
    g.v = K.r.col(m - 1) * Eigen::RowVector3cd(1.0, cplx(0, 2), -0.5);
    p[ModeKey::pure(m, 1)] = g;
    CHECK(abs_norm(apply_Ltheta(K, p)) < 1e-12);
  }
}

TEST_CASE("multiply_osc") {
  const auto& K = kit();
  const Mat3c M = Mat3c(Eigen::Matrix3d{{1, 0, 0}, {0, 1, -1.0 / std::sqrt(std::sqrt(2.0) - 1.0)}, {0, 0, 0}}.cast<cplx>());
  std::mt19937_64 rng(3);
  Caps caps;
  // M r3 = 0 kills a theta3 profile along r3 (the fixture's M is built so)
  const auto f = euler_fixture(1.0, std::sqrt(std::sqrt(2.0) - 1.0), 1.0);
  const Mat3c Mf = f.sys.M.cast<cplx>();
  CHECK((Mf * K.r.col(2)).norm() < 1e-12);
  Profile<GridField> s3;
  for (int n : {-2, 1, 4}) {
    GridField g;
    g.v = K.r.col(2) * Eigen::RowVector2cd(cplx(0.3, n), 1.0);
    s3[ModeKey::pure(3, n)] = g;
  }
  CHECK(abs_norm(multiply_osc(s3, {-1, 1}, Mf, caps)) < 1e-12);

  Profile<GridField> mean;
  mean[ModeKey::mean()] = rand_field(rng, 2);
  const auto sh = multiply_osc(mean, {1}, M, caps);
  REQUIRE(sh.modes.size() == 1);
  CHECK(sh.modes.begin()->first == ModeKey::pure(3, 1));

  CHECK(shift_theta3(ModeKey::pure(2, 4), -1) == ModeKey::nc(4, -1));
  CHECK(shift_theta3(ModeKey::nc(4, -1), 1) == ModeKey::pure(2, 4));
  CHECK(shift_theta3(ModeKey::pure(3, -1), 1) == ModeKey::mean());
  CHECK(shift_theta3(ModeKey::nc(2, 5), 1) == ModeKey::nc(2, 6));
  CHECK_THROWS(shift_theta3(ModeKey::pure(1, 2), 1));

  // conjugate-symmetric input stays symmetric under f(theta3) with real M
  Profile<GridField> U;
  U[ModeKey::mean()] = GridField{rand_field(rng, 3).v.real().cast<cplx>()};
  for (auto key : {ModeKey::pure(2, 3), ModeKey::pure(3, 1), ModeKey::nc(2, -5), ModeKey::nc(1, 1)}) {
    const GridField g = rand_field(rng, 3);
    U[key] = g;
    ModeKey m = key;
    m.a = -m.a;
    m.b = -m.b;
    U[m] = conj_field(g);
  }
  CHECK(conjugate_asymmetry(U) < 1e-15);
  const auto V = multiply_osc(U, {-1, 1}, M, caps);
  CHECK(conjugate_asymmetry(V) < 1e-14);

  // caps clip and count
  Profile<GridField> edge;
  edge[ModeKey::nc(3, 16)] = rand_field(rng, 2);
  ClipStats st;
  const auto E = multiply_osc(edge, {-1, 1}, M, caps, &st);
  CHECK(E.modes.size() == 1);
  CHECK(st.count == 1);
  CHECK(st.ratio() == doctest::Approx(0.5));
}

TEST_CASE("spectrum closure and pointwise locality") {
  const auto& K = kit();
  std::mt19937_64 rng(9);
  const auto U = rand_profile(rng, 6, false);
  const Mat3c M = Mat3c::Random();
  const Caps caps{64, 64};
  for (const auto& P : {apply_EP(K, U), apply_EQ(K, U), apply_R(K, U), apply_Ltheta(K, U),
                        multiply_osc(U, {-1, 1}, M, caps)})
    for (const auto& [k, c] : P.modes) {
      if (k.kind == ModeKey::Nc) {
        CHECK(k.a != 0);
        CHECK(k.b != 0);
      }
      if (k.is_pure()) CHECK(k.a != 0);
    }
  // restriction to one grid point commutes with the operators
  Profile<GridField> U2;
  for (const auto& [k, c] : U.modes) U2[k] = GridField{c.v.col(2)};
  const auto A = apply_R(K, apply_Ltheta(K, U));
  const auto B = apply_R(K, apply_Ltheta(K, U2));
  for (const auto& [k, c] : B.modes) CHECK((A.find(k)->v.col(2) - c.v).norm() == 0.0);
}
