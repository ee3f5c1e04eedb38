#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <numbers>
#include <random>

#include "lrw/error.hpp"
#include "lrw/rv.hpp"

using namespace lrw;

TEST_CASE("phi evaluation") {
  CHECK(RegVaryingFn::pure_power(1.0)(3.0) == 4.0);
  for (double b : {0.3, 1.0, 1.7}) CHECK(RegVaryingFn::pure_power(b)(0.0) == 1.0);
  CHECK(RegVaryingFn(1.5, SlowlyVaryingFn::logpow(1.0))(0.0) == doctest::Approx(1.0).epsilon(1e-15));
  const RegVaryingFn phi(0.5, SlowlyVaryingFn::logpow(2.0));
  const double x = 37.0;
  CHECK(phi(x) == doctest::Approx(std::pow((1 + x) * std::pow(std::log(std::numbers::e + x), 2.0), 0.5)).epsilon(1e-14));
  CHECK_THROWS(RegVaryingFn(2.5, SlowlyVaryingFn::constant(1.0)));
  CHECK_THROWS(RegVaryingFn(0.0, SlowlyVaryingFn::constant(1.0)));
}

TEST_CASE("slowly varying kinds") {
  CHECK(SlowlyVaryingFn::constant(3.0)(1e9) == 3.0);
  CHECK(SlowlyVaryingFn::iterlog(1.0)(0.0) == doctest::Approx(1.0));
  const auto t = SlowlyVaryingFn::table({{0.0, 1.0}, {10.0, 2.0}});
  CHECK(t(5.0) == doctest::Approx(1.5));
  CHECK(t(100.0) == 2.0);
  const auto j = SlowlyVaryingFn::from_json({{"kind", "logpow"}, {"params", {0.5}}});
  CHECK(j(100.0) == doctest::Approx(std::sqrt(std::log(std::numbers::e + 100.0))));
  CHECK(SlowlyVaryingFn::from_json(j.to_json())(77.0) == j(77.0));
  CHECK_THROWS_AS(SlowlyVaryingFn::from_json({{"kind", "bogus"}, {"params", {1.0}}}), ConfigError);
  for (const auto& l : {SlowlyVaryingFn::logpow(1.0), SlowlyVaryingFn::constant(2.0)}) CHECK(check_slowly_varying(l).pass());
  // iterated log: statistic rises until x = 2^5
  CHECK_FALSE(check_slowly_varying(SlowlyVaryingFn::iterlog(2.0)).statistic_decreasing);
  CHECK(check_slowly_varying(SlowlyVaryingFn::iterlog(2.0), 6).pass());
  CHECK_THROWS_AS(SlowlyVaryingFn::table({{0.0, 1.0}, {10.0, -1.0}}), ConfigError);
}

TEST_CASE("de Bruijn conjugate closed forms") {
  CHECK(de_bruijn_conjugate(SlowlyVaryingFn::constant(1.0), 50.0) == 1.0);
  CHECK(de_bruijn_conjugate(SlowlyVaryingFn::constant(4.0), 50.0) == 0.25);
  CHECK_THROWS_AS(de_bruijn_conjugate(SlowlyVaryingFn::logpow(1.0), 2.0), PreconditionError);
}

TEST_CASE("de Bruijn conjugate of log(e + x)") {
  const auto l = SlowlyVaryingFn::logpow(1.0);
  const double x = std::exp(10.0);
  DeBruijnOptions opt;
  opt.tol = 1e-10;
  const double y = de_bruijn_conjugate(l, x, opt);
  // direct evaluation, independent of the library's residual helper
  CHECK(std::fabs(std::log(std::numbers::e + x * y) * y - 1.0) <= 1e-9);
  CHECK(y > 0.0);
  CHECK(y < 1.0);
  for (double xx = 16.0; xx < 1e12; xx *= 7.3) {
    const double yy = de_bruijn_conjugate(l, xx, opt);
    CHECK(de_bruijn_residual(l, xx, yy) <= 10.0 * opt.tol);
  }
}

TEST_CASE("concave regularization of (1 + x)^{2/3}") {
  const RegVaryingFn phi = RegVaryingFn::pure_power(1.0);
  const auto g = concave_regularize(phi, 1.5);
  const auto& c = g->certificate();
  CHECK(c.pass());
  CHECK(g->value(0.0) == 0.0);
  CHECK(std::isfinite(c.ratio_constant));
  for (int k = 20; k <= 40; ++k) {
    const double x = std::ldexp(1.0, k);
    const double r = g->value(x) / std::pow(1.0 + x, 2.0 / 3.0);
    CHECK(r >= 0.9);
    CHECK(r <= 1.1);
  }
  double prev = -1.0;
  for (double x = 0.0; x < 1e7; x = x * 1.3 + 0.1) {
    const double v = g->value(x);
    CHECK(v > prev);
    prev = v;
  }
}

TEST_CASE("concavity, subadditivity and round trips") {
  for (const auto& [phi, delta] : std::vector<std::pair<RegVaryingFn, double>>{
           {RegVaryingFn::pure_power(1.0), 1.5},
           {RegVaryingFn(1.0, SlowlyVaryingFn::logpow(1.0)), 1.5},
           {RegVaryingFn::pure_power(0.5), 1.25},
           {RegVaryingFn(1.5, SlowlyVaryingFn::iterlog(1.0)), 1.75}}) {
    const auto g = concave_regularize(phi, delta);
    CHECK(g->certificate().pass());
    // second differences on a geometric grid
    for (double x = 0.5; x < 1e9; x *= 1.7) {
      const double h = 0.25 * x;
      const double d2 = g->value(x + h) - 2.0 * g->value(x) + g->value(x - h);
      CHECK(d2 <= 1e-10 * std::max(1.0, g->value(x)));
    }
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0.0, 20.0);
    for (int i = 0; i < 200; ++i) {
      const double s = std::exp(u(rng)), t = std::exp(u(rng));
      CHECK(g->value(s + t) <= (g->value(s) + g->value(t)) * (1.0 + 1e-12));
    }
    for (double y = 0.0; y < 1e6; y = 2.0 * y + 0.3) {
      const double x = inverse_transform(*g, y);
      CHECK(std::fabs(g->value(x) - y) <= 1e-9 * std::max(1.0, y));
    }
  }
}

TEST_CASE("inverse on the linear segment") {
  const auto g = concave_regularize(RegVaryingFn::pure_power(1.0), 1.5);
  CHECK(inverse_transform(*g, 0.0) == 0.0);
  CHECK(inverse_transform(*g, g->value(7.5)) == doctest::Approx(7.5).epsilon(1e-9));
  const double top = g->value(g->breakpoint());
  for (double y : {0.1 * top, 0.5 * top, 0.9 * top})
    CHECK(inverse_transform(*g, y) == doctest::Approx(y / g->slope()).epsilon(1e-12));
}

TEST_CASE("transformed lattice") {
  const auto g = concave_regularize(RegVaryingFn::pure_power(1.0), 1.5);
  auto base = std::make_shared<const MetricMeasureSpace>(MetricMeasureSpace::lattice(MetricKind::LatticeL1, 1));
  const auto sp = transform_space(*base, g);
  CHECK(sp.kind() == MetricKind::Transformed);
  CHECK(sp.lattice_like());
  CHECK(sp.discreteness_gap() == doctest::Approx(g->value(1.0)));
  if (g->breakpoint() >= 4.0) CHECK(sp.distance(Site::at(0), Site::at(4)) == doctest::Approx(4.0 * g->slope()));
  std::mt19937_64 rng(9);
  std::uniform_int_distribution<int> u(-100000, 100000);
  for (int i = 0; i < 100; ++i) {
    const Site a = Site::at(u(rng)), b = Site::at(u(rng)), c = Site::at(u(rng));
    CHECK(sp.distance(a, c) <= (sp.distance(a, b) + sp.distance(b, c)) * (1.0 + 1e-12));
  }
  // V_h' = V_h o g^{-1}
  for (double r : {0.5, 3.0, 40.0}) CHECK(sp.profile()(r) == doctest::Approx(base->profile()(g->inverse(r))));
  // balls in d' are balls in d of radius g^{-1}(r)
  const double r = g->value(10.0);
  CHECK(sp.ball(Site::at(0), r).size() == 21);
}

TEST_CASE("pure power makes l_# trivial") {
  const auto one = SlowlyVaryingFn::constant(1.0);
  for (double x : {10.0, 1e3, 1e8}) CHECK(de_bruijn_conjugate(one, x) == 1.0);
}
