#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <sstream>

#include "lrw/error.hpp"
#include "lrw/heat.hpp"
#include "lrw/numeric.hpp"
#include "oracle.hpp"

using namespace lrw;

namespace {

std::shared_ptr<const TransitionKernel> finite_kernel(std::size_t n, std::uint64_t seed, double beta = 1.0) {
  return TransitionKernel::build(oracle::random_finite_space(n, seed), Window::all(n), RegVaryingFn::pure_power(beta));
}

std::shared_ptr<const TransitionKernel> z1_kernel(std::int64_t radius, double beta = 1.0, std::vector<double> mu = {1.0}) {
  auto sp = std::make_shared<const MetricMeasureSpace>(MetricMeasureSpace::lattice(MetricKind::LatticeL1, 1, std::move(mu)));
  return TransitionKernel::build(sp, Window::for_space(*sp, radius), RegVaryingFn::pure_power(beta));
}

}  // namespace

TEST_CASE("h_0 and h_1") {
  const auto k = finite_kernel(5, 1);
  HeatTable t(k, Site::index(2));
  t.evolve(1);
  for (std::size_t y = 0; y < 5; ++y) {
    CHECK(t.value(0, y) == (y == 2 ? 1.0 / k->mu()[2] : 0.0));
    CHECK(t.value(1, y) == doctest::Approx(k->J(2, y)).epsilon(1e-15));
  }
}

TEST_CASE("three-site h_2 from h_1") {
  const auto k = finite_kernel(3, 7);
  std::vector<HeatTable> ts;
  for (int i = 0; i < 3; ++i) {
    ts.emplace_back(k, Site::index(i));
    ts.back().evolve(2);
  }
  for (std::size_t x = 0; x < 3; ++x)
    for (std::size_t y = 0; y < 3; ++y) {
      double s = 0.0;
      for (std::size_t z = 0; z < 3; ++z) s += k->J(x, z) * k->J(z, y) * k->mu()[z];
      CHECK(std::fabs(ts[x].value(2, y) - s) <= 1e-15);
    }
}

TEST_CASE("evolve matches dense matrix powers") {
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto k = finite_kernel(5, seed, 0.4 + 0.5 * static_cast<double>(seed));
    const auto P = oracle::dense(*k);
    for (int o = 0; o < 5; ++o) {
      HeatTable t(k, Site::index(o));
      t.evolve(64);
      oracle::Matrix Pn = oracle::Matrix::Identity(5, 5);
      for (int n = 0; n <= 64; ++n) {
        for (int y = 0; y < 5; ++y)
          CHECK(std::fabs(t.value(static_cast<std::size_t>(n), static_cast<std::size_t>(y)) - Pn(o, y) / k->mu()[static_cast<std::size_t>(y)]) <=
                1e-13);
        Pn = Pn * P;
      }
      CHECK(t.max_leak() <= 1e-13);
    }
  }
}

TEST_CASE("mass, positivity and leak on a lattice window") {
  const auto k = z1_kernel(512);
  HeatTable t(k, Site::at(0), 0.1);
  t.evolve(64, 2);
  double prev = 0.0;
  for (std::size_t n = 0; n <= t.depth(); ++n) {
    CompensatedSum mass;
    for (std::size_t y = 0; y < k->size(); ++y) {
      CHECK(t.value(n, y) >= 0.0);
      mass.add(t.value(n, y) * k->mu()[y]);
    }
    CHECK(t.leak(n) >= prev);
    prev = t.leak(n);
    CHECK(std::fabs(mass.value() - (1.0 - t.leak(n))) <= 1e-13);
  }
  // rows are stochastic on the window: the leak is rounding only
  CHECK(t.max_leak() <= 1e-13);
  // periodic measure: rounding loses ~2e-16 within a few steps
  HeatTable tight(z1_kernel(512, 0.5, {1.0, 2.0, 0.5}), Site::at(0), 1e-17);
  try {
    tight.evolve(64);
    FAIL("leak budget not enforced");
  } catch (const LeakBudgetError& e) {
    CHECK(e.n_reached() >= 1);
    CHECK(e.n_reached() <= 64);
  }
}

TEST_CASE("evolve is independent of the worker count") {
  const auto k = z1_kernel(256, 0.7);
  HeatTable a(k, Site::at(3), 1.0), b(k, Site::at(3), 1.0);
  a.evolve(20, 1);
  b.evolve(20, 3);
  for (std::size_t y = 0; y < k->size(); ++y) CHECK(std::fabs(a.value(20, y) - b.value(20, y)) <= 1e-13 * a.max_value(20));
}

TEST_CASE("symmetry across swapped origins") {
  const auto k = z1_kernel(256, 1.0, {1.0, 2.0, 0.5});
  const Site a = Site::at(-7), b = Site::at(30);
  HeatTable ta(k, a, 1.0), tb(k, b, 1.0);
  ta.evolve(40);
  tb.evolve(40);
  const auto ia = *k->window().index_of(a), ib = *k->window().index_of(b);
  for (std::size_t n = 0; n <= 40; ++n) CHECK(std::fabs(ta.value(n, ib) - tb.value(n, ia)) <= 1e-12 * std::max(1.0, ta.max_value(n)));
}

TEST_CASE("one-step diagonal lower bound") {
  const auto k = z1_kernel(256, 1.2, {1.0, 1.5});
  HeatTable t(k, Site::at(0), 1.0);
  t.evolve(32);
  const double kappa = k->certificate().kappa;
  const double cmu = k->space().comparability_constant();
  for (std::size_t n = 0; n < 32; ++n)
    for (std::size_t y = 0; y < k->size(); y += 7) CHECK(t.value(n + 1, y) >= t.value(n, y) * kappa / cmu * (1.0 - 1e-12));
}

TEST_CASE("Chapman-Kolmogorov") {
  const auto k = finite_kernel(5, 4);
  HeatTable a(k, Site::index(0)), b(k, Site::index(3));
  a.evolve(8);
  b.evolve(8);
  CHECK(chapman_check(a, a, 0, 4).residual == 0.0);
  CHECK(chapman_check(a, b, 0, 4).residual <= 1e-15);
  CHECK(chapman_check(a, b, 2, 2).residual <= 1e-13);
  CHECK(chapman_check(a, b, 2, 2).within());

  const auto z = z1_kernel(512);
  HeatTable ta(z, Site::at(0), 0.1), tb(z, Site::at(5), 0.1);
  ta.evolve(16);
  tb.evolve(16);
  const auto r = chapman_check(ta, tb, 8, 8);
  double M = 0.0;
  for (std::size_t n = 1; n <= 16; ++n) M = std::max({M, ta.max_value(n), tb.max_value(n)});
  CHECK(r.residual <= 2.0 * std::max(ta.leak(16), 2.0 * ta.leak(8)) * M + 1e-13 * M);
  CHECK(r.within());
  CHECK_THROWS_AS(chapman_check(ta, tb, 10, 10), PreconditionError);
}

TEST_CASE("Poisson weights and ranges") {
  for (double t : {0.3, 1.0, 7.5, 64.0, 400.0}) {
    const auto [lo, hi] = poisson_range(t, 1e-12);
    CHECK(static_cast<double>(lo) <= t);
    CHECK(static_cast<double>(hi) >= t);
    const auto w = poisson_weights(t, lo, hi);
    CHECK(compensated_sum(w) >= 1.0 - 1e-12);
    CHECK(compensated_sum(w) <= 1.0 + 1e-13);
    const auto all = poisson_weights(t, 0, hi + 50);
    for (std::size_t k = 0; k < all.size(); ++k)
      CHECK(all[k] == doctest::Approx(std::exp(-t + static_cast<double>(k) * std::log(t) - std::lgamma(static_cast<double>(k) + 1.0))).epsilon(1e-11));
  }
  CHECK(poisson_range(0.0, 1e-12) == std::pair<std::size_t, std::size_t>{0, 0});
}

TEST_CASE("poissonize") {
  SUBCASE("t = 0") {
    const auto k = finite_kernel(5, 5);
    HeatTable t(k, Site::index(1));
    t.evolve(4);
    CHECK(poissonize(t, 0.0).values == t.row(0));
  }
  SUBCASE("two-site closed form") {
    auto sp = std::make_shared<const MetricMeasureSpace>(
        MetricMeasureSpace::from_json({{"sites", {"x", "y"}}, {"mu", {1.0, 1.0}}, {"dist", {{0, 1}, {1, 0}}}}));
    KernelOptions opt;
    opt.theta_diag = 0.7;
    const auto k = TransitionKernel::build(sp, Window::all(2), RegVaryingFn::pure_power(1.0), opt);
    HeatTable t(k, Site::index(0));
    t.evolve(40);
    const double p = k->p(0, 1);
    const auto q = poissonize(t, 1.0);
    CHECK(std::fabs(q.values[0] - 0.5 * (1.0 + std::exp(-2.0 * p))) <= 1e-10);
    CHECK(std::fabs(q.values[1] - 0.5 * (1.0 - std::exp(-2.0 * p))) <= 1e-10);
  }
  SUBCASE("spectral oracle on five sites") {
    const auto k = finite_kernel(5, 6);
    const auto P = oracle::dense(*k);
    for (int o = 0; o < 5; ++o) {
      HeatTable t(k, Site::index(o));
      t.evolve(64);
      for (double tt : {0.5, 1.0, 2.0}) {
        const auto E = oracle::heat_semigroup(P, k->mu(), tt);
        const auto q = poissonize(t, tt);
        CHECK(q.tail_bound <= 1e-12);
        for (int y = 0; y < 5; ++y) CHECK(std::fabs(q.values[static_cast<std::size_t>(y)] - E(o, y) / k->mu()[static_cast<std::size_t>(y)]) <= 1e-10);
      }
    }
  }
  SUBCASE("mass and eps sensitivity on a lattice") {
    const auto k = z1_kernel(1024);
    HeatTable t(k, Site::at(0), 1e-2);
    t.evolve(140);
    for (double tt : {1.0, 8.0, 64.0}) {
      const auto q = poissonize(t, tt, 1e-12);
      double mass = 0.0, maxh = 0.0;
      for (std::size_t y = 0; y < k->size(); ++y) {
        CHECK(q.values[y] >= 0.0);
        mass += q.values[y] * k->mu()[y];
      }
      for (std::size_t n = 0; n <= t.depth(); ++n) maxh = std::max(maxh, t.max_value(n));
      CHECK(mass >= 1.0 - 1e-12 - t.leak(q.k_max) - 1e-13);
      const auto q2 = poissonize(t, tt, 5e-13);
      for (std::size_t y = 0; y < k->size(); y += 11) CHECK(std::fabs(q.values[y] - q2.values[y]) <= 1e-12 * maxh);
    }
    CHECK_THROWS_AS(poissonize(t, 200.0), InsufficientDepthError);
  }
}

TEST_CASE("diagonal monotonicity and Cauchy-Schwarz") {
  const auto k = finite_kernel(5, 9);
  const auto P = oracle::dense(*k);
  std::vector<HeatTable> ts;
  for (int i = 0; i < 5; ++i) {
    ts.emplace_back(k, Site::index(i));
    ts.back().evolve(40);
  }
  for (std::size_t x = 0; x < 5; ++x) {
    const auto d = diagonal_profile(ts[x]);
    CHECK(d.pass());
    CHECK(ts[x].value(2, x) >= k->theta_diag() * k->theta_diag() / k->mu()[x]);
    oracle::Matrix M = P * P;
    for (int n = 2; n <= 40; n += 2) {
      const oracle::Matrix next = M * P * P;
      CHECK(next(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(x)) <= M(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(x)) + 1e-15);
      M = next;
    }
  }
  for (std::size_t n : {2, 4, 10})
    for (std::size_t x = 0; x < 5; ++x)
      for (std::size_t y = 0; y < 5; ++y) CHECK(ts[x].value(n, y) <= std::sqrt(ts[x].value(n, x) * ts[y].value(n, y)) * (1.0 + 1e-14));

  const auto z = z1_kernel(1024);
  HeatTable t(z, Site::at(0), 1e-2);
  t.evolve(100);
  CHECK(diagonal_profile(t).pass());
}

TEST_CASE("tail sums") {
  const auto sp = MetricMeasureSpace::lattice(MetricKind::LatticeL1, 1);
  const Window w = Window::box(1, 4096);
  const auto s8 = tail_sums(sp, w, Site::at(0), 8.0, 1.0);
  double ref = 0.0;
  for (int d = 9; d <= 4096; ++d) ref += 2.0 / ((1.0 + 2.0 * d) * d);
  CHECK(s8.S1 == doctest::Approx(ref).epsilon(1e-13));
  double ref2 = 0.0;
  for (int d = 1; d <= 8; ++d) ref2 += 2.0 * d / (1.0 + 2.0 * d);
  CHECK(s8.S2 == doctest::Approx(ref2).epsilon(1e-13));
  const auto s16 = tail_sums(sp, w, Site::at(0), 16.0, 1.0);
  const double a = s8.S1 * 8.0, b = s16.S1 * 16.0;
  CHECK(std::max(a / b, b / a) < 4.0);
  CHECK(s8.S1 <= s8.bound1);
  CHECK(s8.S2 <= s8.bound2);
  CHECK(tail_sums(sp, w, Site::at(0), 0.5, 1.0).S2 == 0.0);
  double prev = INFINITY;
  for (double r = 1.0; r <= 128.0; r *= 2.0) {
    const double s = tail_sums(sp, w, Site::at(0), r, 1.0).S1;
    CHECK(s <= prev);
    prev = s;
  }
  CHECK_THROWS_AS(tail_sums(sp, w, Site::at(0), 256.0, 1.0), WindowTooSmallError);
  CHECK_THROWS_AS(tail_sums(sp, Window::box(1, 16), Site::at(0), 8.0, 1.0), WindowTooSmallError);
}

TEST_CASE("CSV export") {
  const auto k = z1_kernel(32);
  HeatTable t(k, Site::at(0), 1.0);
  t.evolve(3);
  std::ostringstream os;
  write_heat_csv(t, os, 2.0);
  std::istringstream is(os.str());
  std::string header;
  std::getline(is, header);
  CHECK(header == "n,site,h,leak");
  std::size_t lines = 0;
  for (std::string l; std::getline(is, l);) ++lines;
  CHECK(lines == 4 * 5);
}
