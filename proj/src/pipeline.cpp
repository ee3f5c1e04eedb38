#include "lrw/pipeline.hpp"

#include <algorithm>
#include <cmath>

#include "lrw/error.hpp"
#include "lrw/io.hpp"
#include "lrw/verify.hpp"

namespace lrw {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

double spread(const std::vector<double>& v) {
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  return *hi / *lo;
}

Site shifted(const Site& x, double d) {
  Site y = x;
  y.c[0] += static_cast<std::int64_t>(std::llround(d));
  return y;
}

const char* verdict(bool pass) { return pass ? "PASS" : "FAIL"; }

}  // namespace

std::shared_ptr<const MetricMeasureSpace> make_space(const ExperimentConfig& cfg) {
  const auto& s = cfg.space;
  if (s.kind == "finite") return std::make_shared<const MetricMeasureSpace>(MetricMeasureSpace::from_json(s.finite));
  const MetricKind kind = s.kind == "lattice_linf" ? MetricKind::LatticeLinf : MetricKind::LatticeL1;
  return std::make_shared<const MetricMeasureSpace>(MetricMeasureSpace::lattice(kind, s.dim, s.mu_pattern));
}

RegVaryingFn make_phi(const ExperimentConfig& cfg) { return {cfg.phi.beta, SlowlyVaryingFn::from_json(cfg.phi.l)}; }

std::shared_ptr<const TransitionKernel> make_kernel(const ExperimentConfig& cfg, std::shared_ptr<const MetricMeasureSpace> space) {
  KernelOptions opt;
  opt.theta_diag = cfg.kernel.theta_diag;
  opt.jump_radius = cfg.kernel.jump_radius;
  opt.noise_rho = cfg.kernel.noise_rho;
  opt.noise_seed = cfg.kernel.noise_seed;
  opt.workers = cfg.workers;
  const Window w = Window::for_space(*space, cfg.space.window_radius);
  return TransitionKernel::build(std::move(space), w, make_phi(cfg), opt);
}

SamplerTable make_sampler(std::shared_ptr<const TransitionKernel> kernel, const ExperimentConfig& cfg) {
  SamplerTable probe(kernel);
  if (!probe.shared()) return probe;
  return SamplerTable(kernel, std::max(cfg.montecarlo.sim_radius, kernel->window().radius()));
}

double loglog_slope(const std::vector<double>& d, const std::vector<double>& p) {
  if (d.size() != p.size() || d.size() < 2) throw PreconditionError("loglog_slope needs at least two points");
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    mx += std::log(d[i]);
    my += std::log(p[i]);
  }
  mx /= static_cast<double>(d.size());
  my /= static_cast<double>(d.size());
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double dx = std::log(d[i]) - mx;
    sxy += dx * (std::log(p[i]) - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

Pipeline::Pipeline(ExperimentConfig cfg, fs::path out, std::ostream& log) : cfg_(std::move(cfg)), out_(std::move(out)), log_(log) {}

const MetricMeasureSpace& Pipeline::space() {
  if (!space_) space_ = make_space(cfg_);
  return *space_;
}

std::shared_ptr<const TransitionKernel> Pipeline::kernel() {
  if (!kernel_) {
    space();
    kernel_ = make_kernel(cfg_, space_);
  }
  return kernel_;
}

const std::vector<std::unique_ptr<HeatTable>>& Pipeline::tables() {
  if (tables_.empty()) {
    auto k = kernel();
    for (const Site& o : cfg_.heat.origins) {
      auto t = std::make_unique<HeatTable>(k, o, cfg_.heat.eps_leak);
      t->evolve(cfg_.heat.n_max, cfg_.workers);
      tables_.push_back(std::move(t));
    }
  }
  return tables_;
}

void Pipeline::require_artifact(const fs::path& rel, const std::string& producer) const {
  if (!fs::exists(out_ / rel))
    throw MissingDependencyError("missing " + (out_ / rel).string() + "; run `" + producer + "` first");
}

StageResult Pipeline::audit() {
  const auto& sp = space();
  std::vector<Site> xs;
  const Window w = Window::for_space(sp, cfg_.space.window_radius);
  if (sp.lattice_like()) {
    xs = cfg_.heat.origins;
    for (int i = 1; i <= 3; ++i) xs.push_back(shifted(Site{}, std::floor(static_cast<double>(w.radius()) * i / 4.0)));
  } else {
    xs = w.sites();
  }
  std::vector<double> grid;
  const double top = sp.lattice_like() ? static_cast<double>(w.radius()) / 4.0 : 64.0;
  for (double r = 1.0; r <= top; r *= 2.0) grid.push_back(r);
  if (grid.empty()) grid.push_back(1.0);
  const auto rep = audit_space(sp, xs, grid);
  write_json(out_ / "audit.json", to_json(rep));
  log_ << "audit: " << verdict(rep.pass()) << '\n';
  return {"audit", rep.pass(), to_json(rep)};
}

StageResult Pipeline::build() {
  auto k = kernel();
  const auto& c = k->certificate();
  json meta = k->metadata();
  const bool pass = c.max_row_error <= 1e-12 && c.max_reversibility_error <= 1e-12 && c.min_diagonal >= 0.0;
  meta["verdict"] = verdict(pass);
  write_json(out_ / "kernel.meta.json", meta);
  log_ << "build: " << verdict(pass) << " (" << meta["mode"].get<std::string>() << ", " << k->size() << " sites)\n";
  return {"build", pass, meta};
}

StageResult Pipeline::heat() {
  require_artifact("kernel.meta.json", "run build");
  const auto& ts = tables();
  json manifest;
  manifest["n_max"] = cfg_.heat.n_max;
  bool pass = true;
  auto& rows = manifest["origins"] = json::array();
  for (std::size_t i = 0; i < ts.size(); ++i) {
    const HeatTable& t = *ts[i];
    std::vector<PoissonRow> q;
    for (double tt : cfg_.heat.t_grid) q.push_back(poissonize(t, tt, cfg_.heat.eps_poisson));
    const std::string tag = std::to_string(i);
    write_atomic(out_ / "heat" / ("h_" + tag + ".csv"), [&](std::ostream& os) { write_heat_csv(t, os, cfg_.heat.export_radius); });
    write_atomic(out_ / "heat" / ("q_" + tag + ".csv"), [&](std::ostream& os) { write_poisson_csv(t, q, os, cfg_.heat.export_radius); });
    json chap = json::array();
    const std::size_t n = t.depth();
    for (const auto& [a, b] : std::vector<std::pair<std::size_t, std::size_t>>{{1, 1}, {2, 3}, {n / 4, n / 4}, {n / 2, n / 2}}) {
      if (a + b > n) continue;
      const auto r = chapman_check(t, t, a, b);
      pass = pass && r.within();
      chap.push_back({{"n", a}, {"m", b}, {"residual", r.residual}, {"bound", r.bound}});
    }
    const auto diag = diagonal_profile(t);
    pass = pass && diag.pass();
    rows.push_back({{"origin", site_to_json(t.origin(), cfg_.space.dim)},
                    {"depth", t.depth()},
                    {"max_leak", t.max_leak()},
                    {"chapman", chap},
                    {"even_diagonal_violations", diag.violations.size()},
                    {"poisson_tail_bounds", [&] {
                       json a = json::array();
                       for (const auto& r : q) a.push_back({{"t", r.t}, {"k_min", r.k_min}, {"k_max", r.k_max}, {"tail_bound", r.tail_bound}});
                       return a;
                     }()}});
  }
  manifest["verdict"] = verdict(pass);
  write_json(out_ / "heat" / "manifest.json", manifest);
  log_ << "heat: " << verdict(pass) << " (depth " << cfg_.heat.n_max << ", " << ts.size() << " origin(s))\n";
  return {"heat", pass, manifest};
}

StageResult Pipeline::simulate() {
  require_artifact("kernel.meta.json", "run build");
  auto k = kernel();
  const auto& mc = cfg_.montecarlo;
  const SamplerTable sampler = make_sampler(k, cfg_);
  const double beta = k->phi().beta();
  const int dim = cfg_.space.dim;
  const Site x0 = cfg_.heat.origins.front();
  McOptions opt{mc.n_paths, mc.seed, cfg_.workers};
  json summary;
  summary["shared_table"] = sampler.shared();
  summary["sim_radius"] = sampler.shared() ? sampler.sim_radius() : k->window().radius();

  const auto chi = one_step_chi_square(sampler, x0, mc.chi_draws, mc.seed);
  const bool chi_ok = chi.p_value >= 1e-3;
  summary["chi_square"] = {{"statistic", chi.statistic}, {"dof", chi.dof}, {"p_value", chi.p_value}, {"pass", chi_ok}};

  // scale collapse: (r, t) against (2r, 2^beta t)
  std::vector<ExitStats> exits;
  bool collapse_ok = true;
  json collapse = json::array();
  for (double r : mc.exit_r) {
    const double t = mc.exit_t_fraction * std::pow(r, beta);
    const auto a = exit_probability(sampler, x0, r, t, TimeMode::Continuous, opt);
    const auto b = exit_probability(sampler, x0, 2.0 * r, std::exp2(beta) * t, TimeMode::Continuous, opt);
    const bool overlap = a.ci.low <= b.ci.high && b.ci.low <= a.ci.high;
    collapse_ok = collapse_ok && overlap;
    collapse.push_back({{"r", r}, {"t", t}, {"p_r", a.estimate}, {"p_2r", b.estimate}, {"overlap", overlap}});
    exits.push_back(a);
    exits.push_back(b);
  }
  summary["exit_collapse"] = collapse;
  write_atomic(out_ / "mc" / "exit.csv", [&](std::ostream& os) { write_stats_csv(exits, os, dim); });

  const auto g1 = estimate_gamma(sampler, mc.gamma_x, mc.gamma_r, opt);
  McOptions opt4 = opt;
  opt4.n_paths = 4 * mc.n_paths;
  const auto g4 = estimate_gamma(sampler, mc.gamma_x, mc.gamma_r, opt4);
  const double gstab = std::max(g1.gamma / g4.gamma, g4.gamma / g1.gamma);
  json gj = to_json(g1, dim);
  gj["gamma_4x_paths"] = g4.gamma;
  gj["stability"] = gstab;
  gj["gamma_used"] = std::min(g1.gamma, 1.0 / 9.0);
  write_json(out_ / "mc" / "gamma.json", gj);
  write_atomic(out_ / "mc" / "gamma.csv", [&](std::ostream& os) {
    os.precision(17);
    os << "x,r,gamma,steps,p_hat,ci_low,ci_high\n";
    for (const auto& row : g1.table)
      os << '"' << to_string(row.x, dim) << "\"," << row.r << ',' << row.gamma << ',' << row.steps << ',' << row.p_hat << ',' << row.ci.low
         << ',' << row.ci.high << '\n';
  });
  const bool gamma_ok = gstab <= 2.0;
  summary["gamma"] = {{"gamma", g1.gamma}, {"gamma_4x_paths", g4.gamma}, {"stability", gstab}, {"pass", gamma_ok}};

  std::vector<ExitStats> hits;
  std::vector<double> ds, ps;
  for (double d : mc.hitting_d) {
    const auto h = hitting_probability(sampler, x0, shifted(x0, d), mc.hitting_n, opt);
    hits.push_back(h);
    ds.push_back(h.radius);
    ps.push_back(h.estimate);
  }
  write_atomic(out_ / "mc" / "hitting.csv", [&](std::ostream& os) { write_stats_csv(hits, os, dim); });
  const bool positive = std::all_of(ps.begin(), ps.end(), [](double p) { return p > 0.0; });
  const double slope = positive && ds.size() >= 2 ? loglog_slope(ds, ps) : 0.0;
  const double slope_limit = -(k->space().profile().alpha + beta) + 0.3;
  const bool slope_ok = positive && slope <= slope_limit;
  summary["hitting"] = {{"slope", slope}, {"limit", slope_limit}, {"n", mc.hitting_n}, {"pass", slope_ok}};

  const bool pass = chi_ok && collapse_ok && gamma_ok && slope_ok;
  summary["verdict"] = verdict(pass);
  write_json(out_ / "mc" / "summary.json", summary);
  log_ << "simulate: " << verdict(pass) << " (gamma " << g1.gamma << ", hitting slope " << slope << ")\n";
  return {"simulate", pass, summary};
}

StageResult Pipeline::verify() {
  require_artifact(fs::path("heat") / "manifest.json", "run heat");
  require_artifact(fs::path("mc") / "gamma.json", "run simulate");
  const double gamma_est = read_json(out_ / "mc" / "gamma.json").at("gamma").get<double>();
  const auto& ts = tables();
  auto k = kernel();
  const auto& sp = space();
  const auto& v = cfg_.verify;
  const auto phi = make_phi(cfg_);
  const double beta = phi.beta();
  const int dim = cfg_.space.dim;
  std::vector<const HeatTable*> tp;
  for (const auto& t : ts) tp.push_back(t.get());
  ScanOptions scan;
  scan.target_radius = v.target_radius;
  scan.drift_factor = v.drift_factor;
  scan.workers = cfg_.workers;
  json summary;
  bool pass = true;
  auto record = [&](const std::string& name, bool ok) {
    summary[name] = verdict(ok);
    pass = pass && ok;
    log_ << "verify/" << name << ": " << verdict(ok) << '\n';
  };
  const fs::path rd = out_ / "reports";

  const LSharp lsharp(phi.slowly_varying());
  const auto hkp = hkp_scan(tp, phi, sp.profile(), lsharp, scan);
  write_json(rd / "hkp.json", hkp.to_json());
  write_atomic(rd / "hkp.csv", [&](std::ostream& os) { hkp.write_csv(os, dim); });
  record("hkp", hkp.verdict);

  ScanOptions dscan = scan;
  dscan.n_min = v.diag_n_min;
  const auto dd = diagonal_decay(tp, sp.profile(), beta, cfg_.heat.t_grid, dscan, cfg_.heat.eps_poisson);
  write_json(rd / "diagonal.json", {{"heat", dd.heat.to_json()}, {"poisson", dd.poisson.to_json()}, {"even_monotone", dd.even_monotone}});
  record("diagonal_decay", dd.heat.verdict && dd.poisson.verdict && dd.even_monotone);

  if (phi.is_pure_power()) {
    std::vector<PoissonRow> rows;
    for (double t : cfg_.heat.t_grid) rows.push_back(poissonize(*tp.front(), t, cfg_.heat.eps_poisson));
    const auto qt = qt_bound_scan(*tp.front(), rows, phi, sp.profile(), scan);
    write_json(rd / "qt.json", qt.to_json());
    write_atomic(rd / "qt.csv", [&](std::ostream& os) { qt.write_csv(os, dim); });
    record("qt_bound", qt.verdict);
  }

  const DirichletForm form(k);
  const double alpha = std::max(beta, std::log2(sp.profile().doubling_constant)) + 1.0;
  const double spread_r = std::min(64.0, static_cast<double>(k->window().radius()) / 4.0);
  const auto bumps = random_bumps(k->window(), 2 * v.nash_samples, v.sample_seed, spread_r, spread_r);
  const std::vector<std::vector<double>> first(bumps.begin(), bumps.begin() + static_cast<std::ptrdiff_t>(v.nash_samples));
  const auto nash_small = nash_check(form, sp.profile(), first, v.nash_R, alpha);
  const auto nash = nash_check(form, sp.profile(), bumps, v.nash_R, alpha);
  write_json(rd / "nash.json", {{"samples", nash_small.to_json()}, {"doubled", nash.to_json()}});
  record("nash", nash.verdict);

  const auto pp = pseudo_poincare_scan(form, first, v.poincare_r);
  write_json(rd / "pseudo_poincare.json", pp.to_json());
  const auto con = contraction_check(form, first, v.sample_seed + 1);
  write_json(rd / "contraction.json", {{"tests", con.tests}, {"failures", con.failures}, {"worst_ratio", con.worst_ratio}});
  record("pseudo_poincare", pp.verdict);
  record("contraction", con.pass());

  const auto nd = near_diagonal_lower(tp, sp.profile(), beta, v.c2_grid, v.ratio_floor, scan);
  write_json(rd / "near_diagonal.json", nd.to_json());
  record("near_diagonal", nd.verdict);

  const double gamma = std::min(gamma_est, 1.0 / 9.0);
  const auto hr = harnack_scan(tp, v.harnack_R, gamma);
  write_json(rd / "harnack.json", hr.to_json());
  record("harnack", hr.verdict);

  if (sp.lattice_like()) {
    json tj = json::array();
    std::vector<double> a, b;
    bool within = true;
    for (double r : v.tail_r) {
      const auto s = tail_sums(sp, k->window(), tp.front()->origin(), r, beta);
      a.push_back(s.S1 * std::pow(r, beta));
      b.push_back(s.S2 * std::pow(r, beta - 2.0));
      within = within && s.S1 <= s.bound1 && s.S2 <= s.bound2;
      tj.push_back({{"r", r}, {"S1", s.S1}, {"S2", s.S2}, {"bound1", s.bound1}, {"bound2", s.bound2}, {"remainder_bound", s.remainder_bound}});
    }
    const bool ok = within && spread(a) < 4.0 && spread(b) < 4.0;
    write_json(rd / "tail_sums.json", {{"rows", tj}, {"S1_spread", spread(a)}, {"S2_spread", spread(b)}, {"verdict", verdict(ok)}});
    record("tail_sums", ok);
  }

  if (v.delta || !phi.slowly_varying().is_constant()) {
    GeneralPhiConfig gc;
    gc.window_radius = cfg_.space.window_radius;
    gc.n_max = cfg_.heat.n_max;
    gc.theta_diag = cfg_.kernel.theta_diag;
    gc.eps_leak = cfg_.heat.eps_leak;
    gc.scan = scan;
    gc.scan.keep_points = false;
    gc.workers = cfg_.workers;
    const double delta = v.delta.value_or((beta + 2.0) / 2.0);
    const auto gp = general_phi_pipeline(space_, phi.slowly_varying(), beta, delta, gc);
    write_json(rd / "general_phi.json", gp.to_json());
    record("general_phi", gp.verdict);
  }

  summary["verdict"] = verdict(pass);
  write_json(rd / "summary.json", summary);
  return {"verify", pass, summary};
}

int Pipeline::run(const std::string& sub) {
  fs::create_directories(out_);
  write_json(out_ / "effective-config.json", to_json(cfg_));
  std::vector<StageResult> results;
  if (sub == "audit") {
    results.push_back(audit());
  } else if (sub == "build") {
    results.push_back(build());
  } else if (sub == "heat") {
    results.push_back(heat());
  } else if (sub == "simulate") {
    results.push_back(simulate());
  } else if (sub == "verify") {
    results.push_back(verify());
  } else if (sub == "all") {
    results.push_back(audit());
    results.push_back(build());
    results.push_back(heat());
    results.push_back(simulate());
    results.push_back(verify());
  } else {
    throw ConfigError("unknown subcommand '" + sub + "'");
  }
  const bool pass = std::all_of(results.begin(), results.end(), [](const StageResult& r) { return r.pass; });
  return pass ? 0 : 2;
}

}  // namespace lrw
