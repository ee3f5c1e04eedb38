#include "lrw/heat.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>

#include "lrw/error.hpp"
#include "lrw/numeric.hpp"

namespace lrw {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

double row_mass(const std::vector<double>& h, const std::vector<double>& mu) {
  CompensatedSum acc;
  for (std::size_t i = 0; i < h.size(); ++i) acc.add(h[i] * mu[i]);
  return acc.value();
}

// log of the Chernoff bound e^{-t} (e t / k)^k for the Poisson tail at k
double log_chernoff(double t, double k) {
  if (k <= 0.0) return -t;
  return -t + k * (1.0 + std::log(t) - std::log(k));
}

}  // namespace

HeatTable::HeatTable(std::shared_ptr<const TransitionKernel> kernel, const Site& origin, double eps_leak)
    : kernel_(std::move(kernel)), origin_(origin), eps_leak_(eps_leak) {
  if (!kernel_) throw PreconditionError("heat table needs a kernel");
  const auto idx = kernel_->window().index_of(origin);
  if (!idx) throw InvalidSiteError("origin " + to_string(origin, kernel_->space().dimension()) + " lies outside the window");
  origin_idx_ = *idx;
  std::vector<double> h0(kernel_->size(), 0.0);
  h0[origin_idx_] = 1.0 / kernel_->mu()[origin_idx_];
  rows_.push_back(std::move(h0));
  leak_.push_back(0.0);
}

void HeatTable::evolve(std::size_t steps, unsigned workers) {
  if (steps == 0) throw PreconditionError("evolve needs steps >= 1");
  const auto& mu = kernel_->mu();
  for (std::size_t s = 0; s < steps; ++s) {
    // h_{n+1}(x_0, y) = sum_z h_n(x_0, z) p(z, y) / mu_y = (P h_n)(y) by reversibility
    std::vector<double> next = kernel_->apply(rows_.back(), workers);
    const double lost = std::max(0.0, 1.0 - row_mass(next, mu));
    const double lam = std::max(leak_.back(), lost);
    if (lam > eps_leak_)
      throw LeakBudgetError("mass leak " + std::to_string(lam) + " exceeds the budget " + std::to_string(eps_leak_) + " at n = " +
                                std::to_string(rows_.size()),
                            rows_.size());
    rows_.push_back(std::move(next));
    leak_.push_back(lam);
  }
}

double HeatTable::max_value(std::size_t n) const {
  const auto& r = rows_.at(n);
  return *std::max_element(r.begin(), r.end());
}

ChapmanResult chapman_check(const HeatTable& a, const HeatTable& b, std::size_t n, std::size_t m) {
  if (&a.kernel() != &b.kernel()) throw PreconditionError("chapman_check: tables must share one kernel");
  if (n + m > a.depth() || m > b.depth()) throw PreconditionError("chapman_check: table depth too small");
  const auto& mu = a.kernel().mu();
  const auto& hn = a.row(n);
  const auto& hm = b.row(m);  // h_m(y_0, z) = h_m(z, y_0)
  CompensatedSum acc;
  if (n == 0) {
    acc.add(hm[a.origin_index()]);
  } else {
    for (std::size_t z = 0; z < hn.size(); ++z) acc.add(hn[z] * hm[z] * mu[z]);
  }
  const double lhs = a.value(n + m, b.origin_index());
  ChapmanResult r;
  r.residual = std::fabs(lhs - acc.value());
  const double M = std::max({a.max_value(n), b.max_value(m), a.max_value(n + m)});
  const double lam = std::max(a.leak(n + m), a.leak(n) + b.leak(m));
  r.bound = 2.0 * lam * M + 1e-13 * M;
  if (n == 0 || m == 0) r.bound = std::max(r.bound, 4.0 * kEps * M);
  return r;
}

std::pair<std::size_t, std::size_t> poisson_range(double t, double eps) {
  if (!(t >= 0.0) || !std::isfinite(t)) throw PreconditionError("poissonize: t must be finite and >= 0");
  if (!(eps > 0.0)) throw PreconditionError("poissonize: eps_poisson must be positive");
  if (t == 0.0) return {0, 0};
  const double target = std::log(eps / 2.0);
  // k_max: smallest k > t with P(N >= k + 1) <= eps / 2
  auto up_ok = [&](std::size_t k) { return log_chernoff(t, static_cast<double>(k + 1)) <= target; };
  std::size_t lo = static_cast<std::size_t>(std::ceil(t)), hi = lo + 1;
  while (!up_ok(hi)) hi = 2 * hi + 1;
  while (lo < hi) {
    const std::size_t mid = lo + (hi - lo) / 2;
    if (up_ok(mid)) {
      hi = mid;
    } else {
      lo = mid + 1;
    }
  }
  const std::size_t k_max = lo;
  // k_min: largest k <= t with P(N <= k - 1) <= eps / 2
  auto down_ok = [&](std::size_t k) { return k == 0 || log_chernoff(t, static_cast<double>(k - 1)) <= target; };
  std::size_t a = 0, b = static_cast<std::size_t>(std::floor(t));
  while (a < b) {
    const std::size_t mid = a + (b - a + 1) / 2;
    if (down_ok(mid)) {
      a = mid;
    } else {
      b = mid - 1;
    }
  }
  return {a, k_max};
}

std::vector<double> poisson_weights(double t, std::size_t k_min, std::size_t k_max) {
  std::vector<double> w(k_max - k_min + 1, 0.0);
  if (t == 0.0) {
    if (k_min == 0) w[0] = 1.0;
    return w;
  }
  const auto mode = std::clamp(static_cast<std::size_t>(std::floor(t)), k_min, k_max);
  const double md = static_cast<double>(mode);
  w[mode - k_min] = std::exp(-t + md * std::log(t) - std::lgamma(md + 1.0));
  for (std::size_t k = mode; k < k_max; ++k) w[k + 1 - k_min] = w[k - k_min] * t / static_cast<double>(k + 1);
  for (std::size_t k = mode; k > k_min; --k) w[k - 1 - k_min] = w[k - k_min] * static_cast<double>(k) / t;
  return w;
}

PoissonRow poissonize(const HeatTable& table, double t, double eps_poisson) {
  const auto [k_min, k_max] = poisson_range(t, eps_poisson);
  if (k_max > table.depth())
    throw InsufficientDepthError("poissonize at t = " + std::to_string(t) + " needs depth " + std::to_string(k_max) + ", table has " +
                                     std::to_string(table.depth()),
                                 k_max);
  const auto w = poisson_weights(t, k_min, k_max);
  PoissonRow out;
  out.t = t;
  out.k_min = k_min;
  out.k_max = k_max;
  out.values.assign(table.kernel().size(), 0.0);
  for (std::size_t k = k_min; k <= k_max; ++k) {
    const double wk = w[k - k_min];
    const auto& h = table.row(k);
    for (std::size_t y = 0; y < h.size(); ++y) out.values[y] += wk * h[y];
  }
  double chernoff = 0.0;
  if (t > 0.0) {
    chernoff += std::exp(log_chernoff(t, static_cast<double>(k_max + 1)));
    if (k_min > 0) chernoff += std::exp(log_chernoff(t, static_cast<double>(k_min - 1)));
  }
  out.tail_bound = std::max(chernoff, 1.0 - compensated_sum(w));
  out.tail_bound = std::max(out.tail_bound, 0.0);
  return out;
}

DiagonalProfile diagonal_profile(const HeatTable& table) {
  if (table.depth() < 2) throw PreconditionError("diagonal_profile needs depth >= 2");
  DiagonalProfile d;
  const std::size_t o = table.origin_index();
  double maxh = 0.0;
  for (std::size_t n = 0; n <= table.depth(); ++n) {
    d.points.emplace_back(n, table.value(n, o));
    if (n) maxh = std::max(maxh, table.max_value(n));
  }
  for (std::size_t n = 0; n + 2 <= table.depth(); n += 2) {
    const double slack = 2.0 * table.leak(n + 2) * maxh + 4.0 * kEps * table.value(n, o);
    d.slack = std::max(d.slack, slack);
    if (table.value(n + 2, o) > table.value(n, o) + slack) d.violations.push_back(n);
  }
  return d;
}

TailSums tail_sums(const MetricMeasureSpace& space, const Window& window, const Site& x, double r, double beta) {
  if (!(r > 0.0)) throw PreconditionError("tail_sums: r must be positive");
  if (!(beta > 0.0 && beta < 2.0)) throw PreconditionError("tail_sums: beta must lie in (0,2)");
  if (!window.contains(x)) throw InvalidSiteError("tail_sums: x lies outside the window");
  const VolumeProfile& vh = space.profile();
  TailSums ts;
  CompensatedSum s1, s2;
  for (const Site& y : window.sites()) {
    const double d = space.distance(x, y);
    if (d == 0.0) continue;
    const double m = space.measure(y);
    if (d > r) {
      s1.add(m / (vh(d) * std::pow(d, beta)));
    } else {
      s2.add(std::pow(d, 2.0 - beta) * m / vh(d));
    }
  }
  ts.S1 = s1.value();
  ts.S2 = s2.value();
  ts.C1 = vh.homogeneity_constant * vh.doubling_constant / (1.0 - std::exp2(-beta));
  const double q = std::exp2(2.0 - beta);
  ts.C2 = vh.homogeneity_constant * vh.doubling_constant * q * q / (q - 1.0);
  ts.bound1 = ts.C1 * std::pow(r, -beta);
  ts.bound2 = ts.C2 * std::pow(r, 2.0 - beta);

  if (window.is_box()) {
    // B(x, rho) lies inside the box; bound the rest by exact dyadic shells
    std::int64_t k0 = window.radius();
    for (int i = 0; i < window.dim(); ++i) k0 = std::min(k0, window.radius() - static_cast<std::int64_t>(std::llabs(x.c[static_cast<std::size_t>(i)])));
    if (k0 < 1) throw WindowTooSmallError("tail_sums: x sits on the window boundary");
    const double rho = space.kind() == MetricKind::Transformed ? space.transform()->value(static_cast<double>(k0)) : static_cast<double>(k0);
    if (r >= rho) throw PreconditionError("tail_sums: B(x, r) is not contained in the window");
    CompensatedSum rem;
    double R = rho;
    int n = 0;
    for (; n < 60 && 2.0 * R <= std::exp2(50.0); ++n, R *= 2.0) {
      const double shell = space.homogeneous() ? space.volume(x, 2.0 * R) - space.volume(x, R)
                                               : vh.homogeneity_constant * vh(2.0 * R);
      rem.add(shell / (vh(R) * std::pow(R, beta)));
    }
    rem.add(ts.C1 * std::pow(R, -beta));
    ts.remainder_bound = rem.value();
    if (ts.remainder_bound >= 0.1 * ts.S1)
      throw WindowTooSmallError("tail_sums: window complement bound " + std::to_string(ts.remainder_bound) + " is not below 10% of S1 = " +
                                std::to_string(ts.S1));
  }
  return ts;
}

void write_heat_csv(const HeatTable& table, std::ostream& os, double export_radius) {
  const auto& k = table.kernel();
  const int dim = k.space().dimension();
  std::vector<std::size_t> keep;
  for (std::size_t y = 0; y < k.size(); ++y)
    if (k.space().distance(table.origin(), k.window().site(y)) <= export_radius) keep.push_back(y);
  os.precision(17);
  os << "n,site,h,leak\n";
  for (std::size_t n = 0; n <= table.depth(); ++n)
    for (std::size_t y : keep) os << n << ",\"" << to_string(k.window().site(y), dim) << "\"," << table.value(n, y) << ',' << table.leak(n) << '\n';
}

void write_poisson_csv(const HeatTable& table, const std::vector<PoissonRow>& rows, std::ostream& os, double export_radius) {
  const auto& k = table.kernel();
  const int dim = k.space().dimension();
  os.precision(17);
  os << "t,site,q,tail_bound\n";
  for (const auto& pr : rows)
    for (std::size_t y = 0; y < k.size(); ++y)
      if (k.space().distance(table.origin(), k.window().site(y)) <= export_radius)
        os << pr.t << ",\"" << to_string(k.window().site(y), dim) << "\"," << pr.values[y] << ',' << pr.tail_bound << '\n';
}

}  // namespace lrw
