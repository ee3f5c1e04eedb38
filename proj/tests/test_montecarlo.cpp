#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <numeric>
#include <sstream>

#include "lrw/error.hpp"
#include "lrw/montecarlo.hpp"
#include "oracle.hpp"

using namespace lrw;

namespace {

std::shared_ptr<const TransitionKernel> z1_kernel(std::int64_t radius, double beta = 1.0, double theta = 0.2,
                                                  std::optional<double> jump = std::nullopt) {
  auto sp = std::make_shared<const MetricMeasureSpace>(MetricMeasureSpace::lattice(MetricKind::LatticeL1, 1));
  KernelOptions opt;
  opt.theta_diag = theta;
  opt.jump_radius = jump;
  return TransitionKernel::build(sp, Window::for_space(*sp, radius), RegVaryingFn::pure_power(beta), opt);
}

std::shared_ptr<const TransitionKernel> two_site(double theta) {
  auto sp = std::make_shared<const MetricMeasureSpace>(
      MetricMeasureSpace::from_json({{"sites", {"x", "y"}}, {"mu", {1.0, 1.0}}, {"dist", {{0, 1}, {1, 0}}}}));
  KernelOptions opt;
  opt.theta_diag = theta;
  return TransitionKernel::build(sp, Window::all(2), RegVaryingFn::pure_power(1.0), opt);
}

}  // namespace

TEST_CASE("alias tables reproduce their weights") {
  const std::vector<double> w{0.1, 3.0, 0.0, 2.5, 1e-9, 0.4};
  const AliasTable t(w);
  const double s = std::accumulate(w.begin(), w.end(), 0.0);
  const auto r = t.reconstruct();
  for (std::size_t i = 0; i < w.size(); ++i) CHECK(std::fabs(r[i] - w[i] / s) <= 1e-15);
  CHECK_THROWS_AS(AliasTable(std::vector<double>{0.0, 0.0}), PreconditionError);
  CHECK_THROWS_AS(AliasTable(std::vector<double>{1.0, -1.0}), PreconditionError);
}

TEST_CASE("sampler tables reconstruct the kernel") {
  SUBCASE("shared displacement table") {
    const auto k = z1_kernel(256);
    const SamplerTable s(k);
    CHECK(s.shared());
    const auto& w = k->window();
    for (std::int64_t x : {0, 5, -100})
      for (std::int64_t y : {-128, -1, 0, 1, 3, 64, 127})
        CHECK(std::fabs(s.reconstructed(Site::at(x), Site::at(y)) -
                        k->p(*w.index_of(Site::at(x)), *w.index_of(Site::at(y)))) <= 1e-15);
  }
  SUBCASE("per-row tables") {
    const auto k = TransitionKernel::build(oracle::random_finite_space(7, 2), Window::all(7), RegVaryingFn::pure_power(1.3));
    const SamplerTable s(k);
    CHECK_FALSE(s.shared());
    for (int x = 0; x < 7; ++x)
      for (int y = 0; y < 7; ++y)
        CHECK(std::fabs(s.reconstructed(Site::index(x), Site::index(y)) - k->p(static_cast<std::size_t>(x), static_cast<std::size_t>(y))) <=
              1e-15);
    CHECK_THROWS_AS(SamplerTable(k, std::int64_t{100}), PreconditionError);
  }
}

TEST_CASE("two-site frequencies") {
  const auto k = two_site(0.5);
  const SamplerTable s(k);
  std::size_t moved = 0;
  const std::size_t n = 100000;
  for (std::size_t i = 0; i < n; ++i) {
    PathRng rng(42, i);
    if (*s.sample(Site::index(0), rng) == Site::index(1)) ++moved;
  }
  const double sigma = std::sqrt(0.25 / static_cast<double>(n));
  CHECK(std::fabs(static_cast<double>(moved) / static_cast<double>(n) - 0.5) <= 4.0 * sigma);
}

TEST_CASE("seeded streams are reproducible") {
  const auto k = z1_kernel(1024);
  const SamplerTable s(k);
  std::vector<Site> a, b;
  for (int rep = 0; rep < 2; ++rep) {
    PathRng rng(7, 3);
    Site cur = Site::at(0);
    for (int i = 0; i < 200; ++i) {
      const auto y = s.sample(cur, rng);
      if (!y) break;
      cur = *y;
      (rep ? b : a).push_back(cur);
    }
  }
  CHECK(a == b);
}

TEST_CASE("nearly fully lazy kernel stays put") {
  const auto k = z1_kernel(64, 1.0, 1.0 - 1e-15);
  const SamplerTable s(k);
  for (std::size_t i = 0; i < 10000; ++i) {
    PathRng rng(1, i);
    CHECK(*s.sample(Site::at(3), rng) == Site::at(3));
  }
}

TEST_CASE("simulation box and censoring") {
  const auto k = z1_kernel(256);
  const SamplerTable s(k, std::int64_t{4096});
  CHECK(s.sim_radius() == 4096);
  CHECK(s.inside(Site::at(4000)));
  CHECK_FALSE(s.inside(Site::at(5000)));
  const SamplerTable small(k);
  McOptions opt{2000, 3, 1};
  CHECK_THROWS_AS(exit_probability(small, Site::at(0), 1e6, 64.0, TimeMode::Discrete, opt), CensoredPathsError);
}

TEST_CASE("exit probability edge cases") {
  const auto k = z1_kernel(1024);
  const SamplerTable s(k);
  McOptions opt{1000, 5, 1};
  const auto z = exit_probability(s, Site::at(0), 8.0, 0.0, TimeMode::Discrete, opt);
  CHECK(z.n_exited == 0);
  CHECK(z.estimate == 0.0);
  CHECK(exit_probability(s, Site::at(0), 8.0, 0.0, TimeMode::Continuous, opt).n_exited == 0);

  const auto kj = z1_kernel(1024, 1.0, 0.2, 2.0);
  const SamplerTable sj(kj);
  CHECK(exit_probability(sj, Site::at(0), 7.0, 3.0, TimeMode::Discrete, opt).n_exited == 0);
  CHECK(exit_probability(sj, Site::at(0), 5.0, 3.0, TimeMode::Discrete, opt).n_exited > 0);

  const auto e = exit_probability(s, Site::at(0), 16.0, 32.0, TimeMode::Discrete, opt);
  CHECK(e.n_exited <= e.n_paths);
  CHECK(e.ci.low <= e.estimate);
  CHECK(e.estimate <= e.ci.high);
  CHECK_THROWS_AS(exit_probability(s, Site::at(0), 16.0, 4.0, TimeMode::Discrete, {50, 1, 1}), PreconditionError);
}

TEST_CASE("exit probability is monotone on coupled paths") {
  const auto k = z1_kernel(2048);
  const SamplerTable s(k);
  const McOptions opt{4000, 11, 2};
  for (auto mode : {TimeMode::Discrete, TimeMode::Continuous}) {
    std::size_t prev = 0;
    for (double t : {1.0, 2.0, 4.0, 8.0, 16.0}) {
      const auto e = exit_probability(s, Site::at(0), 16.0, t, mode, opt);
      CHECK(e.n_exited >= prev);
      prev = e.n_exited;
    }
    prev = opt.n_paths;
    for (double r : {2.0, 4.0, 8.0, 16.0, 32.0}) {
      const auto e = exit_probability(s, Site::at(0), r, 8.0, mode, opt);
      CHECK(e.n_exited <= prev);
      prev = e.n_exited;
    }
  }
}

TEST_CASE("results do not depend on the worker count") {
  const auto k = z1_kernel(2048);
  const SamplerTable s(k);
  const auto a = exit_probability(s, Site::at(0), 16.0, 10.0, TimeMode::Continuous, {5000, 9, 1});
  const auto b = exit_probability(s, Site::at(0), 16.0, 10.0, TimeMode::Continuous, {5000, 9, 4});
  CHECK(a.n_exited == b.n_exited);
  const auto g1 = estimate_gamma(s, {Site::at(0)}, {8, 16}, {2000, 9, 1});
  const auto g3 = estimate_gamma(s, {Site::at(0)}, {8, 16}, {2000, 9, 3});
  CHECK(g1.gamma == g3.gamma);
  REQUIRE(g1.table.size() == g3.table.size());
  for (std::size_t i = 0; i < g1.table.size(); ++i) CHECK(g1.table[i].p_hat == g3.table[i].p_hat);
}

TEST_CASE("Poisson sampler") {
  for (double t : {0.5, 3.0, 40.0}) {
    const PoissonSampler p(t), p2(2.0 * t);
    double mean = 0.0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
      const double u = (i + 0.5) / n;
      CHECK(p(u) <= p2(u));
      mean += static_cast<double>(p(u));
    }
    CHECK(mean / n == doctest::Approx(t).epsilon(1e-3));
  }
  CHECK(PoissonSampler(0.0)(0.7) == 0);
}

TEST_CASE("gamma estimation") {
  const auto k = z1_kernel(2048);
  const SamplerTable s(k);
  const McOptions opt{4000, 2, 2};
  const auto g = estimate_gamma(s, {Site::at(0), Site::at(5)}, {8, 16}, opt);
  CHECK(g.gamma > 0.0);
  for (const auto& row : g.table)
    if (row.gamma == g.gamma) CHECK(row.ci.high <= 0.25);
  bool next_fails = false;
  for (const auto& row : g.table)
    if (row.gamma == 2.0 * g.gamma && row.ci.high > 0.25) next_fails = true;
  CHECK((next_fails || g.gamma == g.gamma_grid.back()));

  const auto lazy = z1_kernel(2048, 1.0, 0.95);
  const auto gl = estimate_gamma(SamplerTable(lazy), {Site::at(0)}, {8, 16}, opt);
  CHECK(gl.gamma >= 4.0 * g.gamma);
}

TEST_CASE("hitting probability") {
  const auto k = z1_kernel(2048);
  const SamplerTable s(k, std::int64_t{1} << 16);
  const McOptions opt{4000, 4, 2};
  CHECK_THROWS_AS(hitting_probability(s, Site::at(0), Site::at(0), 8, opt), PreconditionError);
  std::size_t prev = 0;
  for (std::size_t n : {1, 4, 16, 64}) {
    const auto h = hitting_probability(s, Site::at(0), Site::at(32), n, opt);
    CHECK(h.n_exited >= prev);
    CHECK(h.envelope > 0.0);
    CHECK(h.envelope_ratio == doctest::Approx(h.estimate / h.envelope));
    prev = h.n_exited;
  }
  CHECK(static_cast<double>(prev) / static_cast<double>(opt.n_paths) > 0.3);
}

TEST_CASE("one-step chi-square") {
  const auto k = z1_kernel(1024);
  const auto chi = one_step_chi_square(SamplerTable(k), Site::at(0), 1000000, 3);
  CHECK(chi.dof > 10.0);
  CHECK(chi.p_value >= 1e-3);
  const auto kf = TransitionKernel::build(oracle::random_finite_space(6, 1), Window::all(6), RegVaryingFn::pure_power(0.8));
  CHECK(one_step_chi_square(SamplerTable(kf), Site::index(2), 1000000, 5).p_value >= 1e-3);
}

TEST_CASE("stats CSV") {
  ExitStats e;
  e.x = Site::at(1);
  e.radius = 4;
  e.horizon = 2;
  e.n_paths = 100;
  e.n_exited = 7;
  std::ostringstream os;
  write_stats_csv({e}, os, 1);
  CHECK(os.str().rfind("x,r,t,n_paths,estimate,ci_low,ci_high,censored_fraction", 0) == 0);
}
