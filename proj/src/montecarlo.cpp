#include "lrw/montecarlo.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <string>

#include <boost/math/distributions/chi_squared.hpp>

#include "lrw/error.hpp"
#include "lrw/heat.hpp"

namespace lrw {

namespace {

constexpr std::size_t kMaxRowEntries = std::size_t{1} << 23;

Site add(const Site& a, const Site& b, int dim) {
  Site s;
  for (int i = 0; i < dim; ++i) s.c[static_cast<std::size_t>(i)] = a.c[static_cast<std::size_t>(i)] + b.c[static_cast<std::size_t>(i)];
  return s;
}

Site sub(const Site& a, const Site& b, int dim) {
  Site s;
  for (int i = 0; i < dim; ++i) s.c[static_cast<std::size_t>(i)] = a.c[static_cast<std::size_t>(i)] - b.c[static_cast<std::size_t>(i)];
  return s;
}

std::uint64_t cell_seed(std::uint64_t seed, std::uint64_t cell) { return splitmix64(seed ^ splitmix64(cell + 0x5851f42d4c957f2dULL)); }

struct Counts {
  std::size_t hit = 0;
  std::size_t censored = 0;
};

// sums per-chunk counts; integer addition keeps the result independent of
// the worker count
template <class PathFn>
Counts run_paths(std::size_t n_paths, unsigned workers, PathFn&& path) {
  const unsigned w = std::max(1u, workers);
  std::vector<Counts> part(w);
  const std::size_t chunk = (n_paths + w - 1) / w;
  parallel_chunks(n_paths, w, [&](std::size_t b, std::size_t e) {
    Counts c;
    for (std::size_t i = b; i < e; ++i) {
      const int r = path(i);
      if (r > 0) ++c.hit;
      if (r < 0) ++c.censored;
    }
    part[chunk ? b / chunk : 0] = c;
  });
  Counts total;
  for (const auto& c : part) {
    total.hit += c.hit;
    total.censored += c.censored;
  }
  return total;
}

void finish(ExitStats& st) {
  st.estimate = st.n_paths ? static_cast<double>(st.n_exited) / static_cast<double>(st.n_paths) : 0.0;
  st.ci = wilson_interval(st.n_exited, st.n_paths);
  st.half_width = 0.5 * (st.ci.high - st.ci.low);
}

void check_paths(std::size_t n_paths) {
  if (n_paths < 100) throw PreconditionError("n_paths must be >= 100, got " + std::to_string(n_paths));
}

}  // namespace

AliasTable::AliasTable(const std::vector<double>& weights) {
  const std::size_t n = weights.size();
  if (n == 0) throw PreconditionError("alias table needs at least one outcome");
  CompensatedSum total;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw PreconditionError("alias table weights must be finite and >= 0");
    total.add(w);
  }
  const double sum = total.value();
  if (!(sum > 0.0)) throw PreconditionError("alias table weights sum to zero");
  prob_.assign(n, 1.0);
  alias_.resize(n);
  std::vector<double> scaled(n);
  std::vector<std::size_t> small, large;
  for (std::size_t i = 0; i < n; ++i) {
    alias_[i] = i;
    scaled[i] = weights[i] * static_cast<double>(n) / sum;
    (scaled[i] < 1.0 ? small : large).push_back(i);
  }
  while (!small.empty() && !large.empty()) {
    const std::size_t s = small.back();
    small.pop_back();
    const std::size_t l = large.back();
    prob_[s] = scaled[s];
    alias_[s] = l;
    scaled[l] = (scaled[l] + scaled[s]) - 1.0;
    if (scaled[l] < 1.0) {
      large.pop_back();
      small.push_back(l);
    }
  }
  // leftovers are 1 up to rounding
  for (std::size_t i : small) prob_[i] = 1.0;
  for (std::size_t i : large) prob_[i] = 1.0;
}

std::vector<double> AliasTable::reconstruct() const {
  const std::size_t n = prob_.size();
  std::vector<CompensatedSum> acc(n);
  const double inv = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    acc[i].add(prob_[i] * inv);
    if (prob_[i] < 1.0) acc[alias_[i]].add((1.0 - prob_[i]) * inv);
  }
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = acc[i].value();
  return out;
}

SamplerTable::SamplerTable(std::shared_ptr<const TransitionKernel> kernel, std::optional<std::int64_t> sim_radius,
                           std::size_t per_row_limit)
    : kernel_(std::move(kernel)) {
  if (!kernel_) throw PreconditionError("sampler needs a kernel");
  const auto& k = *kernel_;
  const Window& w = k.window();
  shared_ = k.mode() == TransitionKernel::Mode::Stencil && k.space().homogeneous() && w.is_box() &&
            k.stencil_radius() <= w.radius();
  if (shared_) {
    sim_radius_ = sim_radius.value_or(w.radius());
    if (sim_radius_ < 0) throw PreconditionError("sim_radius must be >= 0");
    const std::size_t centre = *w.index_of(Site{});
    std::vector<double> weights;
    for (const auto& [y, p] : k.row(centre)) {
      if (y == centre) continue;
      displacements_.push_back(w.site(y));
      weights.push_back(p);
    }
    displacements_.push_back(Site{});
    weights.push_back(k.p(centre, centre));
    table_ = AliasTable(weights);
    return;
  }
  if (sim_radius) throw PreconditionError("sim_radius applies only to translation-invariant lattice kernels");
  const std::size_t n = k.size();
  if (n > per_row_limit)
    throw BuildError("per-row sampler on " + std::to_string(n) + " sites exceeds the limit " + std::to_string(per_row_limit));
  rows_.reserve(n);
  row_targets_.reserve(n);
  std::size_t entries = 0;
  for (std::size_t x = 0; x < n; ++x) {
    const auto row = k.row(x);
    entries += row.size();
    if (entries > kMaxRowEntries) throw BuildError("per-row sampler tables exceed " + std::to_string(kMaxRowEntries) + " entries");
    std::vector<double> weights;
    std::vector<std::size_t> targets;
    for (const auto& [y, p] : row) {
      if (p == 0.0) continue;
      targets.push_back(y);
      weights.push_back(p);
    }
    rows_.emplace_back(weights);
    row_targets_.push_back(std::move(targets));
  }
}

bool SamplerTable::inside(const Site& s) const noexcept {
  if (!shared_) return kernel_->window().contains(s);
  for (int i = 0; i < kernel_->window().dim(); ++i)
    if (std::llabs(s.c[static_cast<std::size_t>(i)]) > sim_radius_) return false;
  return true;
}

std::size_t SamplerTable::draw(const Site& x, PathRng& rng) const {
  const double u1 = rng.uniform();
  const double u2 = rng.uniform();
  if (shared_) return table_.sample(u1, u2);
  const auto xi = kernel_->window().index_of(x);
  if (!xi) throw InvalidSiteError("sampler: site " + to_string(x, kernel_->space().dimension()) + " lies outside the window");
  return rows_[*xi].sample(u1, u2);
}

Site SamplerTable::outcome(const Site& x, std::size_t idx) const {
  if (shared_) return add(x, displacements_.at(idx), kernel_->window().dim());
  const auto xi = kernel_->window().index_of(x);
  if (!xi) throw InvalidSiteError("sampler: site " + to_string(x, kernel_->space().dimension()) + " lies outside the window");
  return kernel_->window().site(row_targets_[*xi].at(idx));
}

std::vector<double> SamplerTable::outcome_probabilities(const Site& x) const {
  const Window& w = kernel_->window();
  std::vector<double> out;
  if (shared_) {
    const std::size_t centre = *w.index_of(Site{});
    for (const Site& v : displacements_) out.push_back(kernel_->p(centre, *w.index_of(v)));
    return out;
  }
  const auto xi = w.index_of(x);
  if (!xi) throw InvalidSiteError("sampler: site " + to_string(x, kernel_->space().dimension()) + " lies outside the window");
  for (std::size_t y : row_targets_[*xi]) out.push_back(kernel_->p(*xi, y));
  return out;
}

std::optional<Site> SamplerTable::sample(const Site& x, PathRng& rng) const {
  Site y = outcome(x, draw(x, rng));
  if (!inside(y)) return std::nullopt;
  return y;
}

double SamplerTable::reconstructed(const Site& x, const Site& y) const {
  const int dim = kernel_->window().dim();
  if (shared_) {
    const Site v = sub(y, x, dim);
    const auto it = std::find(displacements_.begin(), displacements_.end(), v);
    if (it == displacements_.end()) return 0.0;
    return table_.reconstruct()[static_cast<std::size_t>(it - displacements_.begin())];
  }
  const Window& w = kernel_->window();
  const auto xi = w.index_of(x);
  const auto yi = w.index_of(y);
  if (!xi || !yi) return 0.0;
  const auto& t = row_targets_[*xi];
  const auto it = std::find(t.begin(), t.end(), *yi);
  if (it == t.end()) return 0.0;
  return rows_[*xi].reconstruct()[static_cast<std::size_t>(it - t.begin())];
}

PoissonSampler::PoissonSampler(double t) {
  if (!(t >= 0.0) || !std::isfinite(t)) throw PreconditionError("Poisson sampler needs finite t >= 0");
  const auto [lo, hi] = poisson_range(t, 1e-15);
  k_min_ = lo;
  const auto w = poisson_weights(t, lo, hi);
  cdf_.resize(w.size());
  CompensatedSum acc;
  for (std::size_t i = 0; i < w.size(); ++i) {
    acc.add(w[i]);
    cdf_[i] = acc.value();
  }
  // mass below k_min is folded into k_min, above k_max into k_max
  const double below = std::max(0.0, (1.0 - cdf_.back()) / 2.0);
  for (double& c : cdf_) c += below;
  cdf_.back() = 1.0;
}

std::uint64_t PoissonSampler::operator()(double u) const {
  const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
  const auto i = std::min(static_cast<std::size_t>(it - cdf_.begin()), cdf_.size() - 1);
  return k_min_ + i;
}

ExitStats exit_probability(const SamplerTable& sampler, const Site& x, double r, double horizon, TimeMode mode,
                           const McOptions& opt) {
  check_paths(opt.n_paths);
  if (!(r > 0.0)) throw PreconditionError("exit_probability: r must be positive");
  if (!(horizon >= 0.0) || !std::isfinite(horizon)) throw PreconditionError("exit_probability: horizon must be finite and >= 0");
  if (!sampler.inside(x)) throw InvalidSiteError("exit_probability: x lies outside the simulation domain");
  const auto& space = sampler.kernel().space();
  const std::optional<PoissonSampler> ps = mode == TimeMode::Continuous ? std::optional<PoissonSampler>(PoissonSampler(horizon))
                                                                        : std::nullopt;
  const auto steps_fixed = static_cast<std::uint64_t>(std::floor(horizon));
  const Counts c = run_paths(opt.n_paths, opt.workers, [&](std::size_t i) {
    PathRng rng(opt.seed, i);
    const std::uint64_t steps = ps ? (*ps)(rng.uniform()) : steps_fixed;
    Site cur = x;
    for (std::uint64_t k = 0; k < steps; ++k) {
      const Site y = sampler.outcome(cur, sampler.draw(cur, rng));
      if (space.distance(x, y) > r) return 1;
      if (!sampler.inside(y)) return -1;
      cur = y;
    }
    return 0;
  });
  ExitStats st;
  st.x = x;
  st.radius = r;
  st.horizon = horizon;
  st.n_paths = opt.n_paths;
  st.n_exited = c.hit;
  st.n_censored = c.censored;
  if (c.censored)
    throw CensoredPathsError("exit_probability: " + std::to_string(c.censored) + " of " + std::to_string(opt.n_paths) +
                             " paths left the simulation domain before exiting B(x, r)");
  finish(st);
  return st;
}

GammaEstimate estimate_gamma(const SamplerTable& sampler, const std::vector<Site>& x_samples, const std::vector<double>& r_grid,
                             const McOptions& opt) {
  check_paths(opt.n_paths);
  if (x_samples.empty() || r_grid.empty()) throw PreconditionError("estimate_gamma: grids must be nonempty");
  const auto& space = sampler.kernel().space();
  const double beta = sampler.kernel().phi().beta();
  GammaEstimate out;
  for (int j = -10; j <= 2; ++j) out.gamma_grid.push_back(std::exp2(j));
  std::vector<bool> feasible(out.gamma_grid.size(), true);
  std::uint64_t cell = 0;
  for (const Site& x : x_samples) {
    if (!sampler.inside(x)) throw InvalidSiteError("estimate_gamma: x lies outside the simulation domain");
    for (double r : r_grid) {
      if (!(r > 0.0)) throw PreconditionError("estimate_gamma: radii must be positive");
      const double rb = std::pow(r, beta);
      const auto horizon = static_cast<std::size_t>(std::floor(out.gamma_grid.back() * rb));
      // first exit step from B(x, r/2), horizon + 1 when none
      std::vector<std::size_t> tau(opt.n_paths, horizon + 1);
      std::vector<char> cens(opt.n_paths, 0);
      const std::uint64_t seed = cell_seed(opt.seed, cell++);
      parallel_chunks(opt.n_paths, opt.workers, [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) {
          PathRng rng(seed, i);
          Site cur = x;
          for (std::size_t k = 1; k <= horizon; ++k) {
            const Site y = sampler.outcome(cur, sampler.draw(cur, rng));
            if (space.distance(x, y) > r / 2.0) {
              tau[i] = k;
              break;
            }
            if (!sampler.inside(y)) {
              cens[i] = 1;
              break;
            }
            cur = y;
          }
        }
      });
      const auto n_cens = static_cast<std::size_t>(std::count(cens.begin(), cens.end(), 1));
      if (n_cens)
        throw CensoredPathsError("estimate_gamma: " + std::to_string(n_cens) + " paths left the simulation domain at r = " +
                                 std::to_string(r));
      std::sort(tau.begin(), tau.end());
      for (std::size_t g = 0; g < out.gamma_grid.size(); ++g) {
        GammaRow row;
        row.x = x;
        row.r = r;
        row.gamma = out.gamma_grid[g];
        row.steps = static_cast<std::size_t>(std::floor(row.gamma * rb));
        const auto hits = static_cast<std::size_t>(std::upper_bound(tau.begin(), tau.end(), row.steps) - tau.begin());
        row.p_hat = static_cast<double>(hits) / static_cast<double>(opt.n_paths);
        row.ci = wilson_interval(hits, opt.n_paths);
        if (row.ci.high > 0.25) feasible[g] = false;
        out.table.push_back(row);
      }
    }
  }
  out.gamma = 0.0;
  for (std::size_t g = 0; g < out.gamma_grid.size(); ++g)
    if (feasible[g]) out.gamma = out.gamma_grid[g];
  if (out.gamma == 0.0) throw NoFeasibleGammaError("estimate_gamma: even gamma = 2^-10 violates the 1/4 exit bound");
  return out;
}

ExitStats hitting_probability(const SamplerTable& sampler, const Site& x, const Site& y, std::size_t n, const McOptions& opt) {
  check_paths(opt.n_paths);
  const auto& space = sampler.kernel().space();
  const double d = space.distance(x, y);
  if (!(d > 0.0)) throw PreconditionError("hitting_probability: d(x, y) must be positive");
  if (!sampler.inside(x) || !sampler.inside(y)) throw InvalidSiteError("hitting_probability: x and y must lie in the simulation domain");
  const double beta = sampler.kernel().phi().beta();
  const double rho = std::pow(static_cast<double>(n), 1.0 / beta);
  const Counts c = run_paths(opt.n_paths, opt.workers, [&](std::size_t i) {
    if (d <= rho) return 1;
    PathRng rng(opt.seed, i);
    Site cur = x;
    for (std::size_t k = 0; k < n; ++k) {
      const Site z = sampler.outcome(cur, sampler.draw(cur, rng));
      if (space.distance(z, y) <= rho) return 1;
      if (!sampler.inside(z)) return -1;
      cur = z;
    }
    return 0;
  });
  if (c.censored)
    throw CensoredPathsError("hitting_probability: " + std::to_string(c.censored) + " of " + std::to_string(opt.n_paths) +
                             " paths left the simulation domain");
  ExitStats st;
  st.x = x;
  st.radius = d;
  st.horizon = static_cast<double>(n);
  st.n_paths = opt.n_paths;
  st.n_exited = c.hit;
  finish(st);
  const auto& vh = space.profile();
  st.envelope = static_cast<double>(n) * vh(rho) / (vh(d) * std::pow(1.0 + d, beta));
  st.envelope_ratio = st.estimate / st.envelope;
  return st;
}

ChiSquare one_step_chi_square(const SamplerTable& sampler, const Site& x, std::size_t draws, std::uint64_t seed) {
  if (draws == 0) throw PreconditionError("chi-square test needs draws > 0");
  const auto probs = sampler.outcome_probabilities(x);
  std::vector<std::size_t> counts(probs.size(), 0);
  PathRng rng(seed, 0);
  for (std::size_t i = 0; i < draws; ++i) ++counts[sampler.draw(x, rng)];
  // outcomes with expected count < 5 are pooled into one bin
  const double n = static_cast<double>(draws);
  double stat = 0.0, pool_e = 0.0, pool_o = 0.0;
  std::size_t bins = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double e = n * probs[i];
    const auto o = static_cast<double>(counts[i]);
    if (e >= 5.0) {
      stat += (o - e) * (o - e) / e;
      ++bins;
    } else {
      pool_e += e;
      pool_o += o;
    }
  }
  if (pool_e > 0.0) {
    stat += (pool_o - pool_e) * (pool_o - pool_e) / pool_e;
    ++bins;
  }
  ChiSquare out;
  out.statistic = stat;
  out.dof = static_cast<double>(bins > 1 ? bins - 1 : 1);
  boost::math::chi_squared_distribution<double> dist(out.dof);
  out.p_value = boost::math::cdf(boost::math::complement(dist, stat));
  return out;
}

void write_stats_csv(const std::vector<ExitStats>& rows, std::ostream& os, int dim) {
  os.precision(17);
  os << "x,r,t,n_paths,estimate,ci_low,ci_high,censored_fraction\n";
  for (const auto& s : rows)
    os << '"' << to_string(s.x, dim) << "\"," << s.radius << ',' << s.horizon << ',' << s.n_paths << ',' << s.estimate << ','
       << s.ci.low << ',' << s.ci.high << ',' << s.censored_fraction() << '\n';
}

nlohmann::json to_json(const GammaEstimate& g, int dim) {
  nlohmann::json j;
  j["gamma"] = g.gamma;
  j["gamma_grid"] = g.gamma_grid;
  auto& t = j["table"] = nlohmann::json::array();
  for (const auto& r : g.table)
    t.push_back({{"x", to_string(r.x, dim)},
                 {"r", r.r},
                 {"gamma", r.gamma},
                 {"steps", r.steps},
                 {"p_hat", r.p_hat},
                 {"ci_low", r.ci.low},
                 {"ci_high", r.ci.high}});
  return j;
}

}  // namespace lrw
