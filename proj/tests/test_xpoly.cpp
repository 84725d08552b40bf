#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>

#include "doctest.h"
#include "wkb/xpoly.hpp"

using namespace wkb;

namespace {

cplx quad(const std::function<cplx(double)>& f, double a, double b) {
  auto re = [&](double s) { return f(s).real(); };
  auto im = [&](double s) { return f(s).imag(); };
  using Q = boost::math::quadrature::gauss_kronrod<double, 61>;
  return {Q::integrate(re, a, b, 15, 1e-14), Q::integrate(im, a, b, 15, 1e-14)};
}

}  // namespace

TEST_CASE("interning clusters equal exponents") {
  ExpTable t;
  const int a = t.intern({1.0, 2.0});
  CHECK(t.intern({1.0 + 1e-14, 2.0}) == a);
  CHECK(t.intern({1.1, 2.0}) != a);
}

TEST_CASE("derivative and evaluation") {
  ExpTable t;
  const int a = t.intern({0.7, 1.3});
  XSc p;
  p.terms = {{a, 2, {1.0, -0.5}}, {a, 0, {0.2, 0.0}}};
  const XSc d = deriv(p, t);
  for (double x : {0.0, 0.3, 2.1}) {
    const double h = 1e-5;
    const cplx fd = (eval(p, t, x + h) - eval(p, t, x - h)) / (2 * h);
    CHECK(std::abs(eval(d, t, x) - fd) < 1e-8);
  }
}

TEST_CASE("incoming integral against adaptive quadrature") {
  ExpTable t;
  const int lam = t.intern({0.9, 0.8});
  const double xmax = 4.0;
  // distinct, equal and near-equal source exponents, several powers
  for (cplx mu : {cplx(-1.3, 2.0), cplx(0.9, 0.8), cplx(0.9 + 0.05, 0.8), cplx(3.0, 0.1)}) {
    const int id = t.intern(mu);
    for (int p : {0, 1, 3}) {
      XSc f;
      f.terms = {{id, p, {0.4, -1.1}}};
      const XSc F = integrate_in(lam, f, t, xmax);
      for (double x : {0.0, 0.5, 1.7, 4.0}) {
        const cplx ref = quad([&](double s) { return std::exp(I * t.lam[lam] * (x - s)) * eval(f, t, s); }, 0.0, x);
        CHECK(std::abs(eval(F, t, x) - ref) < 1e-11 * (1 + std::abs(ref)));
      }
    }
  }
}

TEST_CASE("outgoing integral against adaptive quadrature") {
  ExpTable t;
  const int lam = t.intern({-0.4, -1.2});
  for (cplx mu : {cplx(0.5, 0.3), cplx(-0.4, -0.5), cplx(2.0, 1.0)}) {
    const int id = t.intern(mu);
    for (int p : {0, 2}) {
      XSc f;
      f.terms = {{id, p, {1.0, 0.5}}};
      const XSc F = integrate_out(lam, f, t);
      for (double x : {0.0, 1.0, 3.0}) {
        const cplx ref = -quad([&](double s) { return std::exp(I * t.lam[lam] * (x - s)) * eval(f, t, s); }, x, x + 80.0);
        CHECK(std::abs(eval(F, t, x) - ref) < 1e-10 * (1 + std::abs(ref)));
      }
    }
  }
  XSc bad;
  bad.terms = {{t.intern({0.0, -2.0}), 0, 1.0}};
  CHECK_THROWS(integrate_out(lam, bad, t));
}

TEST_CASE("half-line Gram norm against quadrature") {
  std::vector<ExpTerm> t = {{cplx(0.4, 0.9), 0, Vec3c(1.0, -0.5, 0.2)},
                            {cplx(-1.2, 0.6), 2, Vec3c(0.3, 0.1, -0.7)},
                            {cplx(5.0, 1.5), 1, Vec3c(-0.2, 0.8, 0.4)}};
  auto f = [&](double x) {
    Vec3c v = Vec3c::Zero();
    for (const auto& e : t) v += e.c * std::pow(x, e.pow) * std::exp(I * e.mu * x);
    return v.squaredNorm();
  };
  using Q = boost::math::quadrature::gauss_kronrod<double, 61>;
  const double ref = Q::integrate(f, 0.0, 80.0, 20, 1e-14);
  CHECK(gram_norm2(t) == doctest::Approx(ref).epsilon(1e-11));
  t.push_back({cplx(1.0, -0.1), 0, Vec3c(1, 0, 0)});
  CHECK_THROWS_AS(gram_norm2(t), Error);
}
