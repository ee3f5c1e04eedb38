#include "lrw/verify.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "lrw/error.hpp"
#include "lrw/numeric.hpp"

namespace lrw {

namespace {

constexpr std::size_t kMaxListedExclusions = 20;

const TransitionKernel& common_kernel(const std::vector<const HeatTable*>& tables, const char* who) {
  if (tables.empty()) throw EmptyScanError(std::string(who) + ": no heat tables");
  const TransitionKernel& k = tables.front()->kernel();
  for (const auto* t : tables)
    if (&t->kernel() != &k) throw PreconditionError(std::string(who) + ": tables must share one kernel");
  return k;
}

std::size_t scan_depth(const std::vector<const HeatTable*>& tables, const ScanOptions& opt) {
  std::size_t depth = tables.front()->depth();
  for (const auto* t : tables) depth = std::min(depth, t->depth());
  if (opt.n_max) {
    if (opt.n_max > depth) throw InsufficientDepthError("scan needs depth " + std::to_string(opt.n_max), opt.n_max);
    depth = opt.n_max;
  }
  return depth;
}

Metric metric_or_default(const ScanOptions& opt, const MetricMeasureSpace& space) {
  if (opt.metric) return opt.metric;
  return [&space](const Site& a, const Site& b) { return space.distance(a, b); };
}

struct Target {
  std::size_t idx;
  double d;
};

std::vector<Target> targets_within(const HeatTable& t, const Metric& metric, double radius) {
  std::vector<Target> out;
  const Window& w = t.kernel().window();
  for (std::size_t y = 0; y < w.size(); ++y) {
    const double d = metric(t.origin(), w.site(y));
    if (d <= radius) out.push_back({y, d});
  }
  return out;
}

// per-key point lists computed in parallel, merged in key order
void merge_in_order(BoundReport& rep, std::vector<std::vector<ScanPoint>>& per_key, std::vector<std::vector<std::string>>& excl,
                    bool keep) {
  for (std::size_t i = 0; i < per_key.size(); ++i) {
    for (const auto& p : per_key[i]) rep.add(p);
    for (const auto& e : excl[i]) rep.exclude(e);
    if (keep) {
      rep.points.insert(rep.points.end(), per_key[i].begin(), per_key[i].end());
    }
    std::vector<ScanPoint>().swap(per_key[i]);
  }
}

std::string grid_text(const std::vector<double>& g) {
  std::ostringstream os;
  os << '{';
  for (std::size_t i = 0; i < g.size(); ++i) os << (i ? "," : "") << g[i];
  os << '}';
  return os.str();
}

double vh_time(const VolumeProfile& vh, double key, double beta) { return vh(std::pow(key, 1.0 / beta)); }

}  // namespace

void BoundReport::add(const ScanPoint& p) {
  ++n_points;
  c_low = std::min(c_low, p.ratio);
  C_up = std::max(C_up, p.ratio);
  if (!(p.key > 0.0)) return;
  const int j = std::ilogb(p.key);
  auto it = std::find_if(slices.begin(), slices.end(), [j](const SliceBand& s) { return s.j >= j; });
  if (it == slices.end() || it->j != j) it = slices.insert(it, SliceBand{j});
  it->low = std::min(it->low, p.ratio);
  it->high = std::max(it->high, p.ratio);
  ++it->count;
}

void BoundReport::exclude(const std::string& why) {
  ++n_excluded;
  if (exclusions.size() < kMaxListedExclusions) exclusions.push_back(why);
}

void BoundReport::finalize() {
  max_drift = 1.0;
  for (std::size_t i = 1; i < slices.size(); ++i) {
    const auto& a = slices[i - 1];
    const auto& b = slices[i];
    if (side != BandSide::Lower) max_drift = std::max({max_drift, b.high / a.high, a.high / b.high});
    if (side != BandSide::Upper) max_drift = std::max({max_drift, b.low / a.low, a.low / b.low});
  }
  const bool low_ok = side == BandSide::Upper || c_low > 0.0;
  const bool up_ok = side == BandSide::Lower || std::isfinite(C_up);
  verdict = n_points > 0 && low_ok && up_ok && std::isfinite(max_drift) && max_drift < drift_factor;
}

nlohmann::json BoundReport::to_json() const {
  nlohmann::json j;
  j["name"] = name;
  j["grid"] = grid;
  j["side"] = side == BandSide::Both ? "both" : side == BandSide::Upper ? "upper" : "lower";
  j["c_low"] = c_low;
  j["C_up"] = C_up;
  j["band_width"] = band_width();
  auto& s = j["slices"] = nlohmann::json::array();
  for (const auto& b : slices)
    s.push_back({{"j", b.j}, {"key_lo", std::ldexp(1.0, b.j)}, {"key_hi", std::ldexp(1.0, b.j + 1)}, {"low", b.low}, {"high", b.high},
                 {"count", b.count}});
  j["drift_factor"] = drift_factor;
  j["max_drift"] = max_drift;
  j["n_points"] = n_points;
  j["n_excluded"] = n_excluded;
  j["exclusions"] = exclusions;
  j["annotations"] = annotations;
  j["verdict"] = verdict ? "PASS" : "FAIL";
  return j;
}

void BoundReport::write_csv(std::ostream& os, int dim) const {
  os.precision(17);
  os << "key,x0,y,d,value,envelope,ratio\n";
  for (const auto& p : points)
    os << p.key << ",\"" << to_string(p.x0, dim) << "\",\"" << to_string(p.y, dim) << "\"," << p.d << ',' << p.value << ','
       << p.envelope << ',' << p.ratio << '\n';
}

LSharp::LSharp(SlowlyVaryingFn l, DeBruijnOptions opt) : l_(std::move(l)), opt_(opt) {}

double LSharp::operator()(double x) const {
  const double xc = std::max(x, opt_.x_min);
  const double y = de_bruijn_conjugate(l_, xc, opt_);
  if (!l_.is_constant()) max_residual_ = std::max(max_residual_, de_bruijn_residual(l_, xc, y));
  return y;
}

BoundReport hkp_scan(const std::vector<const HeatTable*>& tables, const RegVaryingFn& phi, const VolumeProfile& profile,
                     const LSharp& l_sharp, const ScanOptions& opt) {
  const TransitionKernel& k = common_kernel(tables, "hkp_scan");
  const std::size_t depth = scan_depth(tables, opt);
  const Metric metric = metric_or_default(opt, k.space());
  const double beta = phi.beta();
  const auto& mu = k.mu();
  BoundReport rep;
  rep.name = "hkp";
  rep.drift_factor = opt.drift_factor;
  std::ostringstream g;
  g << "n in [" << opt.n_min << ", " << depth << "], d(x0, y) <= " << opt.target_radius << ", " << tables.size() << " origin(s)";
  rep.grid = g.str();
  // time scale and far-branch denominators are evaluated once
  std::vector<double> near(depth + 1, 0.0);
  for (std::size_t n = std::max<std::size_t>(opt.n_min, 1); n <= depth; ++n) {
    const double s = std::pow(static_cast<double>(n), 1.0 / beta);
    near[n] = 1.0 / profile(s * l_sharp(s));
  }
  double max_leak = 0.0;
  for (const auto* t : tables) {
    const auto ys = targets_within(*t, metric, opt.target_radius);
    std::vector<double> far_den(ys.size());
    for (std::size_t i = 0; i < ys.size(); ++i) far_den[i] = profile(ys[i].d) * phi(ys[i].d);
    const std::size_t n0 = std::max<std::size_t>(opt.n_min, 1);
    const std::size_t count = depth >= n0 ? depth - n0 + 1 : 0;
    std::vector<std::vector<ScanPoint>> per(count);
    std::vector<std::vector<std::string>> excl(count);
    parallel_chunks(count, opt.workers, [&](std::size_t b, std::size_t e) {
      for (std::size_t i = b; i < e; ++i) {
        const std::size_t n = n0 + i;
        const auto& h = t->row(n);
        const double lam = t->leak(n);
        for (std::size_t q = 0; q < ys.size(); ++q) {
          const auto& [y, d] = ys[q];
          const double env = std::min(near[n], static_cast<double>(n) / far_den[q]);
          if (lam / mu[y] > opt.exclusion_fraction * env) {
            excl[i].push_back("n=" + std::to_string(n) + " y=" + to_string(k.window().site(y), k.space().dimension()) + ": leak");
            continue;
          }
          per[i].push_back({static_cast<double>(n), t->origin(), k.window().site(y), d, h[y], env, h[y] / env});
        }
      }
    });
    merge_in_order(rep, per, excl, opt.keep_points);
    max_leak = std::max(max_leak, t->max_leak());
  }
  if (rep.n_points == 0) throw EmptyScanError("hkp_scan: every entry was excluded");
  rep.annotations["max_leak"] = max_leak;
  rep.annotations["beta"] = beta;
  rep.annotations["pure_power"] = phi.is_pure_power();
  rep.annotations["de_bruijn_residual"] = l_sharp.max_residual();
  rep.finalize();
  return rep;
}

DiagonalDecay diagonal_decay(const std::vector<const HeatTable*>& tables, const VolumeProfile& profile, double beta,
                             const std::vector<double>& t_grid, const ScanOptions& opt, double eps_poisson) {
  common_kernel(tables, "diagonal_decay");
  const std::size_t depth = scan_depth(tables, opt);
  DiagonalDecay out;
  out.heat.name = "diagonal_decay_h";
  out.poisson.name = "diagonal_decay_q";
  out.heat.drift_factor = out.poisson.drift_factor = opt.drift_factor;
  out.heat.grid = "n in [" + std::to_string(opt.n_min) + ", " + std::to_string(depth) + "]";
  out.poisson.grid = "t in " + grid_text(t_grid);
  for (const auto* t : tables) {
    const std::size_t o = t->origin_index();
    const double mu0 = t->kernel().mu()[o];
    for (std::size_t n = opt.n_min; n <= depth; ++n) {
      const double env = 1.0 / vh_time(profile, static_cast<double>(n), beta);
      const double v = t->value(n, o);
      out.heat.add({static_cast<double>(n), t->origin(), t->origin(), 0.0, v, env, v / env});
    }
    for (double tt : t_grid) {
      const double v = tt == 0.0 ? 1.0 / mu0 : poissonize(*t, tt, eps_poisson).values[o];
      const double env = 1.0 / vh_time(profile, tt, beta);
      out.poisson.add({tt, t->origin(), t->origin(), 0.0, v, env, v / env});
    }
    out.even_monotone = out.even_monotone && diagonal_profile(*t).pass();
  }
  out.heat.annotations["even_diagonal_monotone"] = out.even_monotone;
  out.heat.finalize();
  out.poisson.finalize();
  return out;
}

BoundReport qt_bound_scan(const HeatTable& table, const std::vector<PoissonRow>& rows, const RegVaryingFn& phi,
                          const VolumeProfile& profile, const ScanOptions& opt) {
  if (!phi.is_pure_power()) throw PreconditionError("qt_bound_scan requires a pure-power phi");
  if (rows.empty()) throw EmptyScanError("qt_bound_scan: no Poisson rows");
  const TransitionKernel& k = table.kernel();
  const Metric metric = metric_or_default(opt, k.space());
  const double beta = phi.beta();
  const auto& mu = k.mu();
  const double mu0 = mu[table.origin_index()];
  BoundReport rep;
  rep.name = "qt_bound";
  rep.side = BandSide::Upper;
  rep.drift_factor = opt.drift_factor;
  std::vector<double> ts;
  for (const auto& r : rows) ts.push_back(r.t);
  rep.grid = "t in " + grid_text(ts) + ", d(x0, y) <= " + std::to_string(opt.target_radius);
  const auto ys = targets_within(table, metric, opt.target_radius);
  for (const auto& row : rows) {
    const double t = row.t;
    const double near = t > 0.0 ? 1.0 / vh_time(profile, t, beta) : std::numeric_limits<double>::infinity();
    const double lam = table.leak(std::min(row.k_max, table.depth()));
    for (const auto& [y, d] : ys) {
      const double env = std::min(near, t / (profile(d) * std::pow(1.0 + d, beta)));
      if (!(env > 0.0)) continue;
      const double unc = row.tail_bound / mu0 + lam / mu[y];
      if (unc > opt.exclusion_fraction * env) {
        rep.exclude("t=" + std::to_string(t) + " y=" + to_string(k.window().site(y), k.space().dimension()) + ": truncation");
        continue;
      }
      const ScanPoint p{t, table.origin(), k.window().site(y), d, row.values[y], env, row.values[y] / env};
      rep.add(p);
      if (opt.keep_points) rep.points.push_back(p);
    }
  }
  if (rep.n_points == 0) throw EmptyScanError("qt_bound_scan: every entry was excluded");
  rep.finalize();
  return rep;
}

std::vector<std::vector<double>> random_bumps(const Window& window, std::size_t count, std::uint64_t seed, double spread,
                                              double max_width, bool signed_heights) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int dim = window.dim();
  std::vector<std::vector<double>> out;
  out.reserve(count);
  for (std::size_t s = 0; s < count; ++s) {
    std::vector<double> f(window.size(), 0.0);
    const int bumps = 1 + static_cast<int>(rng() % 3);
    for (int b = 0; b < bumps; ++b) {
      std::array<double, kMaxDim> c{};
      for (int i = 0; i < dim; ++i) c[static_cast<std::size_t>(i)] = std::round((2.0 * unit(rng) - 1.0) * spread);
      const double w = std::exp(unit(rng) * std::log(max_width));
      double a = 0.5 + unit(rng);
      if (signed_heights && unit(rng) < 0.5) a = -a;
      for (std::size_t x = 0; x < window.size(); ++x) {
        const Site& site = window.site(x);
        double dist = 0.0;
        for (int i = 0; i < dim; ++i)
          dist = std::max(dist, std::fabs(static_cast<double>(site.c[static_cast<std::size_t>(i)]) - c[static_cast<std::size_t>(i)]));
        if (dist < w) f[x] += a * (1.0 - dist / w);
      }
    }
    if (std::all_of(f.begin(), f.end(), [](double v) { return v == 0.0; })) f[window.size() / 2] = 1.0;
    out.push_back(std::move(f));
  }
  return out;
}

BoundReport nash_check(const DirichletForm& form, const VolumeProfile& profile, const std::vector<std::vector<double>>& f_samples,
                       const std::vector<double>& R_grid, double alpha, double stability) {
  const auto& k = form.kernel();
  const double beta = k.phi().beta();
  if (!(alpha > std::max(beta, std::log2(profile.doubling_constant))))
    throw PreconditionError("nash_check: alpha must exceed max(beta, log2 C_D)");
  if (f_samples.empty() || R_grid.empty()) throw PreconditionError("nash_check: samples and R grid must be nonempty");
  const auto& mu = k.mu();
  BoundReport rep;
  rep.name = "nash";
  rep.side = BandSide::Upper;
  rep.grid = std::to_string(f_samples.size()) + " samples, R in " + grid_text(R_grid);
  const std::size_t half = (f_samples.size() + 1) / 2;
  double max_half = 0.0, max_all = 0.0;
  for (std::size_t s = 0; s < f_samples.size(); ++s) {
    const auto& f = f_samples[s];
    const double n1 = norm1(f, mu);
    const double n2 = norm2(f, mu);
    if (!(n1 > 0.0)) throw PreconditionError("nash_check: sample functions must be nonzero");
    const double E = form.energy(f);
    for (double R : R_grid) {
      const double vol = std::pow(std::pow(R, alpha) / profile(R), beta / alpha);
      const double core = std::pow(vol * (E + std::pow(R, -beta) * n2 * n2), alpha / (2.0 * (alpha + beta))) *
                          std::pow(n1, beta / (alpha + beta));
      const double c1 = n2 / core;
      rep.add({R, Site::index(static_cast<std::int64_t>(s)), Site{}, 0.0, n2, core, c1});
      max_all = std::max(max_all, c1);
      if (s < half) max_half = std::max(max_half, c1);
    }
  }
  rep.finalize();
  const double stab = max_all / max_half;
  rep.annotations["alpha"] = alpha;
  rep.annotations["C2"] = 1.0;
  rep.annotations["c1_max"] = max_all;
  rep.annotations["c1_max_half"] = max_half;
  rep.annotations["stability"] = stab;
  rep.annotations["stability_limit"] = stability;
  rep.verdict = std::isfinite(max_all) && max_all > 0.0 && stab <= stability;
  return rep;
}

BoundReport pseudo_poincare_scan(const DirichletForm& form, const std::vector<std::vector<double>>& f_samples,
                                 const std::vector<double>& r_grid, double band) {
  const auto& k = form.kernel();
  const auto& space = k.space();
  const Window& w = k.window();
  const auto& mu = k.mu();
  const double beta = k.phi().beta();
  if (f_samples.empty() || r_grid.empty()) throw PreconditionError("pseudo_poincare_scan: samples and r grid must be nonempty");
  BoundReport rep;
  rep.name = "pseudo_poincare";
  rep.side = BandSide::Upper;
  rep.drift_factor = band;
  rep.grid = std::to_string(f_samples.size()) + " samples, r in " + grid_text(r_grid);
  std::vector<double> energy(f_samples.size());
  for (std::size_t s = 0; s < f_samples.size(); ++s) energy[s] = form.energy(f_samples[s]);
  std::size_t truncated = 0;
  std::vector<double> per_r;
  for (double r : r_grid) {
    if (!(r > 0.0)) throw PreconditionError("pseudo_poincare_scan: radii must be positive");
    // ball index lists are shared by every sample
    std::vector<std::vector<std::size_t>> balls(w.size());
    std::vector<double> den(w.size());
    for (std::size_t x = 0; x < w.size(); ++x) {
      CompensatedSum m;
      bool clipped = false;
      for (const Site& y : space.ball(w.site(x), r)) {
        const auto j = w.index_of(y);
        if (!j) {
          clipped = true;
          continue;
        }
        balls[x].push_back(*j);
        m.add(mu[*j]);
      }
      den[x] = m.value();
      if (clipped) ++truncated;
    }
    double best = 0.0;
    for (std::size_t s = 0; s < f_samples.size(); ++s) {
      const auto& f = f_samples[s];
      CompensatedSum acc;
      for (std::size_t x = 0; x < w.size(); ++x) {
        CompensatedSum num;
        for (std::size_t j : balls[x]) num.add(f[j] * mu[j]);
        const double diff = f[x] - num.value() / den[x];
        acc.add(diff * diff * mu[x]);
      }
      const double lhs = acc.value();
      const double rhs = std::pow(r, beta) * energy[s];
      const double cp = lhs / rhs;
      best = std::max(best, cp);
      rep.add({r, Site::index(static_cast<std::int64_t>(s)), Site{}, 0.0, lhs, rhs, cp});
    }
    per_r.push_back(best);
  }
  rep.finalize();
  const double spread = *std::max_element(per_r.begin(), per_r.end()) / *std::min_element(per_r.begin(), per_r.end());
  rep.annotations["per_r_max"] = per_r;
  rep.annotations["global_spread"] = spread;
  rep.annotations["truncated_balls"] = truncated;
  return rep;
}

ContractionResult contraction_check(const DirichletForm& form, const std::vector<std::vector<double>>& f_samples, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  ContractionResult out;
  for (const auto& f : f_samples) {
    const double top = *std::max_element(f.begin(), f.end());
    if (!(top > 0.0)) continue;
    const double level = unit(rng) * top;
    const double cap = (0.05 + 0.95 * unit(rng)) * (top - level);
    std::vector<double> g(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) g[i] = std::min(std::max(f[i] - level, 0.0), cap);
    const double ef = form.energy(f);
    const double eg = form.energy(g);
    ++out.tests;
    if (ef > 0.0) out.worst_ratio = std::max(out.worst_ratio, eg / ef);
    if (eg > ef * (1.0 + 1e-12)) ++out.failures;
  }
  return out;
}

NearDiagonalReport near_diagonal_lower(const std::vector<const HeatTable*>& tables, const VolumeProfile& profile, double beta,
                                       const std::vector<double>& c2_grid, double ratio_floor, const ScanOptions& opt) {
  const TransitionKernel& k = common_kernel(tables, "near_diagonal_lower");
  const std::size_t depth = scan_depth(tables, opt);
  const Metric metric = metric_or_default(opt, k.space());
  if (c2_grid.empty()) throw PreconditionError("near_diagonal_lower: c2 grid must be nonempty");
  NearDiagonalReport out;
  auto sorted = c2_grid;
  std::sort(sorted.begin(), sorted.end());
  const double reach = sorted.back() * std::pow(static_cast<double>(depth), 1.0 / beta);
  std::vector<std::vector<Target>> ys;
  for (const auto* t : tables) ys.push_back(targets_within(*t, metric, reach));
  for (double c2 : sorted) {
    BoundReport rep;
    rep.name = "near_diagonal_lower";
    rep.side = BandSide::Lower;
    rep.drift_factor = opt.drift_factor;
    rep.grid = "c2 = " + std::to_string(c2) + ", n in [" + std::to_string(opt.n_min) + ", " + std::to_string(depth) + "]";
    for (std::size_t ti = 0; ti < tables.size(); ++ti) {
      const auto* t = tables[ti];
      for (std::size_t n = std::max<std::size_t>(opt.n_min, 1); n <= depth; ++n) {
        const double s = std::pow(static_cast<double>(n), 1.0 / beta);
        const double env = 1.0 / profile(s);
        for (const auto& [y, d] : ys[ti]) {
          if (d > c2 * s) continue;
          const double v = t->value(n, y);
          rep.add({static_cast<double>(n), t->origin(), k.window().site(y), d, v, env, v / env});
        }
      }
    }
    rep.finalize();
    NearDiagonalRow row{c2, rep.c_low, rep.max_drift, false};
    row.ok = rep.n_points > 0 && rep.c_low >= ratio_floor && rep.max_drift < opt.drift_factor;
    out.rows.push_back(row);
    if (row.ok) {
      out.c2 = c2;
      rep.annotations["ratio_floor"] = ratio_floor;
      out.band = std::move(rep);
    }
  }
  out.verdict = out.c2 > 0.0;
  return out;
}

nlohmann::json NearDiagonalReport::to_json() const {
  nlohmann::json j;
  auto& r = j["rows"] = nlohmann::json::array();
  for (const auto& x : rows) r.push_back({{"c2", x.c2}, {"floor", x.floor}, {"drift", x.drift}, {"ok", x.ok}});
  j["c2"] = c2;
  j["band"] = band.to_json();
  j["verdict"] = verdict ? "PASS" : "FAIL";
  return j;
}

double parabolicity_residual(const HeatTable& table, std::size_t n0, std::size_t samples) {
  if (n0 == 0 || samples == 0) return 0.0;
  if (n0 > table.depth()) throw InsufficientDepthError("parabolicity check needs depth " + std::to_string(n0), n0);
  const auto& k = table.kernel();
  const std::size_t N = k.size();
  const std::size_t o = table.origin_index();
  double worst = 0.0;
  for (std::size_t i = 0; i < samples; ++i) {
    const std::size_t kk = (i * n0) / samples;  // q_k = h_{n0-k}, q_{k+1} = h_{n0-k-1}
    // half of the samples sit next to the origin, the rest spread over the window
    const std::size_t x = i % 2 == 0 ? std::min(N - 1, o + (i / 2) % 17 - std::min<std::size_t>(o, 8))
                                     : (i * 0x9E3779B97F4A7C15ULL) % N;
    const auto& next = table.row(n0 - kk - 1);
    CompensatedSum acc;
    for (const auto& [y, p] : k.row(x)) acc.add(p * next[y]);
    worst = std::max(worst, std::fabs(table.value(n0 - kk, x) - acc.value()));
  }
  return worst;
}

HarnackReport harnack_scan(const std::vector<const HeatTable*>& tables, const std::vector<double>& R_list, double gamma,
                           const HarnackOptions& opt) {
  const TransitionKernel& k = common_kernel(tables, "harnack_scan");
  if (!(gamma > 0.0) || gamma > 1.0 / 9.0) throw PreconditionError("harnack_scan: gamma must lie in (0, 1/9]");
  if (R_list.empty()) throw PreconditionError("harnack_scan: R list must be nonempty");
  const auto& space = k.space();
  const Window& w = k.window();
  const double beta = k.phi().beta();
  HarnackReport rep;
  rep.gamma = gamma;
  rep.drift_factor = opt.drift_factor;
  auto Rs = R_list;
  std::sort(Rs.begin(), Rs.end());
  rep.R0 = 0.0;
  for (double R : Rs)
    if (std::floor(gamma * std::pow(R, beta)) >= 1.0) {
      rep.R0 = R;
      break;
    }
  std::vector<double> per_R;
  std::vector<std::size_t> n0_max(tables.size(), 0);
  for (double R : Rs) {
    double worst = 0.0;
    for (std::size_t ti = 0; ti < tables.size(); ++ti) {
      const auto* t = tables[ti];
      for (double shift : opt.z_shifts) {
        HarnackRow row;
        row.R = R;
        row.k_box = static_cast<std::size_t>(std::floor(gamma * std::pow(R, beta)));
        row.n0 = static_cast<std::size_t>(std::floor(8.0 * gamma * std::pow(R, beta)));
        row.K = static_cast<std::size_t>(std::floor(gamma * std::pow(R / 3.0, beta)));
        if (row.n0 > t->depth())
          throw InsufficientDepthError("harnack_scan at R = " + std::to_string(R) + " needs depth " + std::to_string(row.n0), row.n0);
        row.z = t->origin();
        row.z.c[0] += static_cast<std::int64_t>(std::llround(shift * R));
        for (const Site& s : space.ball(row.z, 2.0 * R))
          if (!w.contains(s)) throw PreconditionError("harnack_scan: window does not contain B(z, 2R) at R = " + std::to_string(R));
        std::vector<std::size_t> ball;
        for (const Site& s : space.ball(row.z, R / 3.0)) ball.push_back(*w.index_of(s));
        row.min_ball = std::numeric_limits<double>::infinity();
        for (std::size_t y : ball) row.min_ball = std::min(row.min_ball, t->value(row.n0, y));
        for (std::size_t kk = row.k_box; kk <= row.k_box + row.K; ++kk)
          for (std::size_t y : ball) row.max_box = std::max(row.max_box, t->value(row.n0 - kk, y));
        if (!(row.min_ball > 0.0))
          throw ZeroMinimumError("harnack_scan: q(0, .) vanishes on B(z, R/3) at R = " + std::to_string(R) + "; the window is too small");
        row.ratio = row.max_box / row.min_ball;
        worst = std::max(worst, row.ratio);
        n0_max[ti] = std::max(n0_max[ti], row.n0);
        rep.rows.push_back(row);
      }
    }
    per_R.push_back(worst);
    if (R >= rep.R0) rep.C_H = std::max(rep.C_H, worst);
  }
  for (std::size_t i = 1; i < per_R.size(); ++i) rep.max_drift = std::max(rep.max_drift, per_R[i] / per_R[i - 1]);
  for (std::size_t ti = 0; ti < tables.size(); ++ti) {
    const auto* t = tables[ti];
    const std::size_t n0 = n0_max[ti];
    double M = 0.0;
    for (std::size_t n = 0; n <= n0; ++n) M = std::max(M, t->max_value(n));
    rep.parabolicity_residual = std::max(rep.parabolicity_residual, parabolicity_residual(*t, n0, opt.parabolicity_samples));
    rep.parabolicity_tolerance = std::max(rep.parabolicity_tolerance, 2.0 * t->leak(n0) * M + 1e-13 * M);
  }
  const bool finite = std::all_of(rep.rows.begin(), rep.rows.end(), [](const HarnackRow& r) { return std::isfinite(r.ratio); });
  rep.verdict = finite && rep.max_drift < rep.drift_factor && rep.parabolicity_residual <= rep.parabolicity_tolerance;
  return rep;
}

nlohmann::json HarnackReport::to_json() const {
  nlohmann::json j;
  j["gamma"] = gamma;
  j["R0"] = R0;
  auto& r = j["rows"] = nlohmann::json::array();
  for (const auto& x : rows)
    r.push_back({{"R", x.R},
                 {"k_box", x.k_box},
                 {"n0", x.n0},
                 {"K", x.K},
                 {"z", x.z.c[0]},
                 {"max_box", x.max_box},
                 {"min_ball", x.min_ball},
                 {"ratio", x.ratio}});
  j["C_H"] = C_H;
  j["max_drift"] = max_drift;
  j["drift_factor"] = drift_factor;
  j["parabolicity_residual"] = parabolicity_residual;
  j["parabolicity_tolerance"] = parabolicity_tolerance;
  j["verdict"] = verdict ? "PASS" : "FAIL";
  return j;
}

GeneralPhiReport general_phi_pipeline(std::shared_ptr<const MetricMeasureSpace> space, const SlowlyVaryingFn& l, double beta,
                                      double delta, const GeneralPhiConfig& cfg) {
  if (!space) throw PreconditionError("general_phi_pipeline needs a space");
  if (!(delta > beta && delta < 2.0)) throw PreconditionError("general_phi_pipeline: delta must lie in (beta, 2)");
  const RegVaryingFn phi(beta, l);
  GeneralPhiReport out;
  const auto g = concave_regularize(phi, delta);
  out.certificate = g->certificate();
  out.A = g->A();
  auto tspace = std::make_shared<const MetricMeasureSpace>(transform_space(*space, g));
  const Window window = Window::for_space(*tspace, cfg.window_radius);
  KernelOptions kopt;
  kopt.theta_diag = cfg.theta_diag;
  kopt.workers = cfg.workers;
  out.kernel = TransitionKernel::build(tspace, window, RegVaryingFn::pure_power(delta), kopt);
  HeatTable table(out.kernel, space->lattice_like() ? Site{} : window.site(0), cfg.eps_leak);
  table.evolve(cfg.n_max, cfg.workers);
  LSharp lsharp(l);
  ScanOptions scan = cfg.scan;
  scan.workers = cfg.workers;
  if (!scan.metric) scan.metric = [space](const Site& a, const Site& b) { return space->distance(a, b); };
  out.hkp = hkp_scan({&table}, phi, space->profile(), lsharp, scan);
  out.hkp.name = "hkp_general";
  // V_h'(r) against V_h(r^{delta/beta} l_#(r^{delta/beta}))
  const auto& vt = tspace->profile();
  const auto& vb = space->profile();
  out.emn1_min = std::numeric_limits<double>::infinity();
  for (int i = 0; i <= cfg.emn1_octaves; ++i) {
    const double r = std::ldexp(1.0, i);
    const double x = std::pow(r, delta / beta);
    const double ratio = vt(r) / vb(x * lsharp(x));
    out.emn1.emplace_back(r, ratio);
    out.emn1_min = std::min(out.emn1_min, ratio);
    out.emn1_max = std::max(out.emn1_max, ratio);
  }
  out.de_bruijn_residual = lsharp.max_residual();
  const bool emn1_ok = out.emn1_min > 0.0 && std::isfinite(out.emn1_max);
  out.verdict = out.certificate.pass() && out.hkp.verdict && emn1_ok && out.de_bruijn_residual <= 1e-9;
  return out;
}

nlohmann::json GeneralPhiReport::to_json() const {
  nlohmann::json j;
  j["certificate"] = lrw::to_json(certificate);
  j["A"] = A;
  j["de_bruijn_residual"] = de_bruijn_residual;
  auto& e = j["emn1"] = nlohmann::json::array();
  for (const auto& [r, v] : emn1) e.push_back({{"r", r}, {"ratio", v}});
  j["emn1_min"] = emn1_min;
  j["emn1_max"] = emn1_max;
  j["hkp"] = hkp.to_json();
  if (kernel) j["kernel"] = kernel->metadata();
  j["verdict"] = verdict ? "PASS" : "FAIL";
  return j;
}

}  // namespace lrw
