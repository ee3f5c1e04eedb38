#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>

#include "lrw/error.hpp"
#include "lrw/space.hpp"
#include "oracle.hpp"

using namespace lrw;

TEST_CASE("lattice distances") {
  const auto z1 = MetricMeasureSpace::lattice(MetricKind::LatticeL1, 1);
  CHECK(z1.distance(Site::at(0), Site::at(5)) == 5.0);
  CHECK(z1.distance(Site::at(-3), Site::at(-3)) == 0.0);
  const auto z2 = MetricMeasureSpace::lattice(MetricKind::LatticeL1, 2);
  CHECK(z2.distance(Site::at(0, 0), Site::at(1, 2)) == 3.0);
  const auto z2inf = MetricMeasureSpace::lattice(MetricKind::LatticeLinf, 2);
  CHECK(z2inf.distance(Site::at(0, 0), Site::at(1, 2)) == 2.0);
}

TEST_CASE("balls and volumes") {
  const auto z1 = MetricMeasureSpace::lattice(MetricKind::LatticeL1, 1);
  const auto b = z1.ball(Site::at(0), 2.5);
  REQUIRE(b.size() == 5);
  for (int i = 0; i < 5; ++i) CHECK(b[static_cast<std::size_t>(i)] == Site::at(i - 2));
  CHECK(z1.volume(Site::at(0), 2.5) == 5.0);
  CHECK(z1.ball(Site::at(7), 0.0) == std::vector<Site>{Site::at(7)});
  CHECK(z1.volume(Site::at(7), 0.0) == 1.0);

  const auto z2inf = MetricMeasureSpace::lattice(MetricKind::LatticeLinf, 2);
  CHECK(z2inf.ball(Site::at(0, 0), 1.0).size() == 9);
  CHECK(z2inf.volume(Site::at(0, 0), 1.0) == 9.0);

  const auto z2 = MetricMeasureSpace::lattice(MetricKind::LatticeL1, 2);
  CHECK(z2.ball(Site::at(0, 0), 2.0).size() == 13);
  const auto bb = z2.ball(Site::at(0, 0), 3.0);
  CHECK(std::is_sorted(bb.begin(), bb.end()));
}

TEST_CASE("periodic measure") {
  const auto z1 = MetricMeasureSpace::lattice(MetricKind::LatticeL1, 1, {1.0, 2.0});
  CHECK(z1.measure(Site::at(0)) == 1.0);
  CHECK(z1.measure(Site::at(1)) == 2.0);
  CHECK(z1.measure(Site::at(-1)) == 2.0);
  CHECK(z1.volume(Site::at(0), 1.0) == 5.0);
  CHECK(z1.comparability_constant() == 2.0);
}

TEST_CASE("volume is nondecreasing in r") {
  for (auto kind : {MetricKind::LatticeL1, MetricKind::LatticeLinf}) {
    const auto s = MetricMeasureSpace::lattice(kind, 2, {1.0, 0.5, 1.5});
    double prev = 0.0;
    for (double r = 0.0; r <= 20.0; r += 0.75) {
      const double v = s.volume(Site::at(3, -2), r);
      CHECK(v >= prev);
      prev = v;
    }
  }
}

TEST_CASE("budget is enforced") {
  const auto z2 = MetricMeasureSpace::lattice(MetricKind::LatticeLinf, 2).with_site_budget(100);
  CHECK_NOTHROW(z2.ball(Site::at(0, 0), 4.0));
  CHECK_THROWS_AS(z2.ball(Site::at(0, 0), 50.0), BudgetExceededError);
  // constant measure: closed-form count, nothing enumerated
  CHECK(z2.volume(Site::at(0, 0), 50.0) == 101.0 * 101.0);
  const auto periodic = MetricMeasureSpace::lattice(MetricKind::LatticeLinf, 2, {1.0, 2.0}).with_site_budget(100);
  CHECK_THROWS_AS(periodic.volume(Site::at(0, 0), 50.0), BudgetExceededError);
}

TEST_CASE("finite spaces") {
  const auto sp = MetricMeasureSpace::from_json(
      {{"sites", {"a", "b", "c"}}, {"mu", {1.0, 2.0, 0.5}}, {"dist", {{0, 1, 2}, {1, 0, 1.5}, {2, 1.5, 0}}}});
  CHECK(sp.size() == 3);
  CHECK(sp.distance(Site::index(0), Site::index(2)) == 2.0);
  CHECK(sp.discreteness_gap() == 1.0);
  CHECK(sp.volume(Site::index(1), 1.0) == doctest::Approx(3.0));
  CHECK(sp.ball(Site::index(1), 1.5) == std::vector<Site>{Site::index(0), Site::index(1), Site::index(2)});
  CHECK_THROWS_AS(sp.distance(Site::index(0), Site::index(3)), InvalidSiteError);

  // triangle violation
  CHECK_THROWS_AS(MetricMeasureSpace::from_json({{"sites", {"a", "b", "c"}},
                                                 {"mu", {1.0, 1.0, 1.0}},
                                                 {"dist", {{0, 1, 5}, {1, 0, 1}, {5, 1, 0}}}}),
                  ConfigError);
  // zero distance between distinct sites
  CHECK_THROWS_AS(MetricMeasureSpace::from_json(
                      {{"sites", {"a", "b"}}, {"mu", {1.0, 1.0}}, {"dist", {{0, 0}, {0, 0}}}}),
                  ConfigError);
  // asymmetric
  CHECK_THROWS_AS(MetricMeasureSpace::from_json(
                      {{"sites", {"a", "b"}}, {"mu", {1.0, 1.0}}, {"dist", {{0, 1}, {2, 0}}}}),
                  ConfigError);
}

TEST_CASE("metric axioms on sampled triples") {
  const auto sp = oracle::random_finite_space(7, 11);
  for (std::size_t i = 0; i < 7; ++i)
    for (std::size_t j = 0; j < 7; ++j) {
      const Site x = Site::index(static_cast<std::int64_t>(i)), y = Site::index(static_cast<std::int64_t>(j));
      CHECK(sp->distance(x, y) == sp->distance(y, x));
      CHECK((sp->distance(x, y) == 0.0) == (i == j));
      for (std::size_t k = 0; k < 7; ++k)
        CHECK(sp->distance(x, y) <= sp->distance(x, Site::index(static_cast<std::int64_t>(k))) +
                                        sp->distance(Site::index(static_cast<std::int64_t>(k)), y) + 1e-12);
    }
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> u(-50, 50);
  const auto z2 = MetricMeasureSpace::lattice(MetricKind::LatticeL1, 2);
  for (int t = 0; t < 200; ++t) {
    const Site a = Site::at(u(rng), u(rng)), b = Site::at(u(rng), u(rng)), c = Site::at(u(rng), u(rng));
    CHECK(z2.distance(a, c) <= z2.distance(a, b) + z2.distance(b, c));
  }
}

TEST_CASE("audit on Z^1 counting measure") {
  const auto z1 = MetricMeasureSpace::lattice(MetricKind::LatticeL1, 1);
  std::vector<Site> xs;
  for (int x = -8; x <= 8; ++x) xs.push_back(Site::at(x));
  const auto rep = audit_space(z1, xs, {1, 2, 4, 8});
  CHECK(rep.pass());
  CHECK(rep.c_homog_hat <= 3.0);
  CHECK(rep.c_mu_hat == 1.0);
  CHECK(rep.gap_hat == 1.0);
}

TEST_CASE("audit on Z^2 L-infinity") {
  const auto z2 = MetricMeasureSpace::lattice(MetricKind::LatticeLinf, 2);
  std::vector<Site> xs{Site::at(0, 0), Site::at(3, -1), Site::at(-7, 5)};
  const auto rep = audit_space(z2, xs, {1, 2, 4, 8, 16});
  CHECK(rep.pass());
  CHECK(rep.c_doubling_hat <= 4.0 + 1e-12);
}

TEST_CASE("audit of a finite space against its measured profile") {
  const auto sp = oracle::random_finite_space(6, 3);
  std::vector<Site> xs;
  for (int i = 0; i < 6; ++i) xs.push_back(Site::index(i));
  const auto rep = audit_space(*sp, xs, {1, 2, 4, 8});
  CHECK(rep.pass());
  CHECK(rep.metric_axioms);
}

TEST_CASE("audit fails when the declared profile is too small") {
  const auto z1 = MetricMeasureSpace::lattice(MetricKind::LatticeL1, 1);
  VolumeProfile bad = z1.profile();
  bad.fn = [](double r) { return 1.0 + 0.01 * r; };
  const auto rep = audit_space(z1.with_profile(bad), {Site::at(0)}, {1, 2, 4, 8, 16});
  CHECK_FALSE(rep.pass());
}

TEST_CASE("windows") {
  const auto w = Window::box(2, 2);
  CHECK(w.size() == 25);
  CHECK(w.index_of(Site::at(-2, -2)) == std::optional<std::size_t>(0));
  CHECK(w.index_of(Site::at(2, 2)) == std::optional<std::size_t>(24));
  CHECK_FALSE(w.contains(Site::at(3, 0)));
  for (std::size_t i = 0; i < w.size(); ++i) CHECK(w.index_of(w.site(i)) == std::optional<std::size_t>(i));
}
