#include "lrw/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <ostream>

#include "lrw/error.hpp"
#include "lrw/numeric.hpp"
#include "lrw/rng.hpp"

namespace lrw {

namespace {

MetricKind base_kind(const MetricMeasureSpace& s) { return s.kind() == MetricKind::Transformed ? s.base()->kind() : s.kind(); }

std::int64_t base_lattice_distance(MetricKind kind, int dim, const std::array<std::int64_t, kMaxDim>& v) {
  std::int64_t acc = 0;
  for (int i = 0; i < dim; ++i) {
    const std::int64_t a = std::llabs(v[static_cast<std::size_t>(i)]);
    acc = kind == MetricKind::LatticeLinf ? std::max(acc, a) : acc + a;
  }
  return acc;
}

// lower bound of phi(d) / d^beta over d > r, sampled
double phi_power_floor(const RegVaryingFn& phi, double r) {
  if (phi.is_pure_power()) return 1.0;
  double lo = std::numeric_limits<double>::infinity();
  for (int j = 0; j <= 160; ++j) {
    const double d = std::max(r, 1e-9) * std::exp2(j / 4.0);
    lo = std::min(lo, phi(d) / std::pow(d, phi.beta()));
  }
  return lo;
}

}  // namespace

std::shared_ptr<const TransitionKernel> TransitionKernel::build(std::shared_ptr<const MetricMeasureSpace> space,
                                                                const Window& window, const RegVaryingFn& phi,
                                                                const KernelOptions& opt) {
  if (!space) throw BuildError("build_kernel: no space");
  if (window.size() < 2) throw BuildError("build_kernel: degenerate window with fewer than 2 sites");
  if (!(opt.theta_diag > 0.0 && opt.theta_diag < 1.0)) throw ConfigError("kernel.theta_diag must lie in (0,1)");
  if (!(opt.noise_rho >= 1.0)) throw ConfigError("kernel.noise_rho must be >= 1");
  std::shared_ptr<TransitionKernel> k(new TransitionKernel());
  k->space_ = std::move(space);
  k->window_ = window;
  k->phi_ = phi;
  k->theta_ = opt.theta_diag;
  k->tail_warning_fraction_ = opt.tail_warning_fraction;
  k->noise_rho_ = opt.noise_rho;
  k->noise_seed_ = opt.noise_seed;

  const MetricMeasureSpace& sp = *k->space_;
  if (sp.lattice_like() != window.is_box()) throw BuildError("build_kernel: window type does not match the space");
  if (opt.jump_radius) {
    if (!(*opt.jump_radius > 0.0)) throw ConfigError("kernel.R_J must be positive");
    k->jump_radius_ = *opt.jump_radius;
  } else if (window.is_box()) {
    const auto W = static_cast<double>(window.radius());
    k->jump_radius_ = sp.kind() == MetricKind::Transformed ? sp.transform()->value(W) : W;
  } else {
    double dmax = 0.0;
    for (std::size_t i = 0; i < window.size(); ++i)
      for (std::size_t j = 0; j < window.size(); ++j) dmax = std::max(dmax, sp.distance(window.site(i), window.site(j)));
    k->jump_radius_ = dmax;
  }

  k->mu_.resize(window.size());
  for (std::size_t i = 0; i < window.size(); ++i) k->mu_[i] = sp.measure(window.site(i));

  if (window.is_box() && !k->noisy()) {
    k->mode_ = Mode::Stencil;
    k->build_stencil(opt.workers);
  } else {
    if (window.size() > opt.dense_limit)
      throw BuildError("build_kernel: dense mode needs a window of at most " + std::to_string(opt.dense_limit) + " sites, got " +
                       std::to_string(window.size()));
    k->mode_ = Mode::Dense;
    k->build_dense(opt.workers);
  }
  return k;
}

double TransitionKernel::target(double d) const {
  return 1.0 / (space_->profile()(d) * phi_(d));
}

double TransitionKernel::noise_factor(std::size_t x, std::size_t y) const {
  if (!noisy()) return 1.0;
  const std::size_t a = std::min(x, y), b = std::max(x, y);
  const double u = unit_double(splitmix64(noise_seed_ ^ splitmix64(a * window_.size() + b)));
  return 1.0 / noise_rho_ + (noise_rho_ - 1.0 / noise_rho_) * u;
}

void TransitionKernel::build_stencil(unsigned workers) {
  const MetricMeasureSpace& sp = *space_;
  const int dim = sp.dimension();
  const MetricKind bk = base_kind(sp);
  const std::int64_t W = window_.radius();
  const std::int64_t kJ = sp.transformed_integer_radius(jump_radius_);
  const std::int64_t D = std::min<std::int64_t>(2 * W, kJ);
  stencil_radius_ = D;
  const auto S = static_cast<std::size_t>(2 * D + 1);

  // unscaled weight by base integer distance
  std::int64_t kmax = bk == MetricKind::LatticeLinf ? D : D * dim;
  kmax = std::min(kmax, kJ);
  std::vector<double> by_k(static_cast<std::size_t>(kmax + 1), 0.0);
  for (std::int64_t kk = 1; kk <= kmax; ++kk) {
    const double d = sp.kind() == MetricKind::Transformed ? sp.transform()->value(static_cast<double>(kk)) : static_cast<double>(kk);
    if (d <= jump_radius_) by_k[static_cast<std::size_t>(kk)] = target(d);
  }

  std::size_t total = 1;
  for (int i = 0; i < dim; ++i) total *= S;
  stencil_.assign(total, 0.0);
  for (std::size_t idx = 0; idx < total; ++idx) {
    std::array<std::int64_t, kMaxDim> v{};
    std::size_t rest = idx;
    for (int i = dim - 1; i >= 0; --i) {
      v[static_cast<std::size_t>(i)] = static_cast<std::int64_t>(rest % S) - D;
      rest /= S;
    }
    const std::int64_t kk = base_lattice_distance(bk, dim, v);
    if (kk >= 1 && kk <= kmax) stencil_[idx] = by_k[static_cast<std::size_t>(kk)];
  }

  const std::size_t n = window_.size();
  std::vector<double> hi, lo;
  convolve_compensated(mu_, hi, lo, workers);
  double umax = 0.0;
  for (std::size_t x = 0; x < n; ++x) umax = std::max(umax, hi[x] + lo[x]);
  if (!(umax > 0.0)) throw BuildError("build_kernel: no off-diagonal mass within R_J");
  s_ = (1.0 - theta_) / umax;
  sm_.resize(n);
  for (std::size_t i = 0; i < n; ++i) sm_[i] = s_ * mu_[i];
  convolve_compensated(sm_, hi, lo, workers);
  diag_.assign(n, 0.0);
  double worst_row = 0.0;
  for (std::size_t x = 0; x < n; ++x) {
    CompensatedSum off;
    off.add(hi[x]);
    off.add(lo[x]);
    diag_[x] = 1.0 - off.value();
    CompensatedSum chk;
    chk.add(diag_[x]);
    chk.add(hi[x]);
    chk.add(lo[x]);
    chk.add(-1.0);
    worst_row = std::max(worst_row, std::fabs(chk.value()));
  }
  cert_.max_row_error = worst_row;
  certify(umax);
}

void TransitionKernel::build_dense(unsigned workers) {
  const MetricMeasureSpace& sp = *space_;
  const std::size_t n = window_.size();
  dense_.assign(n * n, 0.0);
  for (std::size_t x = 0; x < n; ++x) {
    for (std::size_t y = x + 1; y < n; ++y) {
      const double d = sp.distance(window_.site(x), window_.site(y));
      double w = 0.0;
      if (d > 0.0 && d <= jump_radius_) w = target(d) * noise_factor(x, y);
      dense_[x * n + y] = w;
      dense_[y * n + x] = w;
    }
  }
  std::vector<double> unscaled(n, 0.0), scaled(n, 0.0);
  double umax = 0.0;
  for (std::size_t x = 0; x < n; ++x) {
    CompensatedSum acc;
    for (std::size_t y = 0; y < n; ++y)
      if (y != x) acc.add(dense_[x * n + y] * mu_[y]);
    unscaled[x] = acc.value();
    umax = std::max(umax, unscaled[x]);
  }
  if (!(umax > 0.0)) throw BuildError("build_kernel: no off-diagonal mass within R_J");
  s_ = (1.0 - theta_) / umax;
  sm_.resize(n);
  for (std::size_t i = 0; i < n; ++i) sm_[i] = s_ * mu_[i];
  diag_.assign(n, 0.0);
  double worst_row = 0.0;
  parallel_chunks(n, workers, [&](std::size_t b, std::size_t e) {
    for (std::size_t x = b; x < e; ++x) {
      CompensatedSum acc;
      for (std::size_t y = 0; y < n; ++y)
        if (y != x) acc.add(p(x, y));
      scaled[x] = acc.value();
    }
  });
  for (std::size_t x = 0; x < n; ++x) {
    diag_[x] = 1.0 - scaled[x];
    CompensatedSum chk;
    chk.add(diag_[x]);
    chk.add(scaled[x]);
    chk.add(-1.0);
    worst_row = std::max(worst_row, std::fabs(chk.value()));
  }
  cert_.max_row_error = worst_row;
  certify(umax);
}

void TransitionKernel::certify(double unscaled_max_row) {
  const MetricMeasureSpace& sp = *space_;
  const std::size_t n = window_.size();
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  std::size_t pairs = 0;
  auto visit = [&](double Jxy, double d) {
    const double r = Jxy * sp.profile()(d) * phi_(d);
    lo = std::min(lo, r);
    hi = std::max(hi, r);
    ++pairs;
  };
  double rev = 0.0;
  if (mode_ == Mode::Stencil) {
    // J depends on the displacement only; visit each stored displacement
    const int dim = sp.dimension();
    const auto S = static_cast<std::size_t>(2 * stencil_radius_ + 1);
    for (std::size_t idx = 0; idx < stencil_.size(); ++idx) {
      if (stencil_[idx] == 0.0) continue;
      Site v;
      std::size_t rest = idx;
      for (int i = dim - 1; i >= 0; --i) {
        v.c[static_cast<std::size_t>(i)] = static_cast<std::int64_t>(rest % S) - stencil_radius_;
        rest /= S;
      }
      visit(s_ * stencil_[idx], sp.distance(Site{}, v));
    }
    // periodic measures: reversibility check on the central row
    const std::size_t c = *window_.index_of(Site{});
    for (const auto& [y, pv] : row(c)) {
      if (y == c) continue;
      const double a = pv * mu_[c], b = p(y, c) * mu_[y];
      rev = std::max(rev, std::fabs(a - b) / std::max(a, b));
    }
  } else {
    for (std::size_t x = 0; x < n; ++x) {
      for (std::size_t y = 0; y < n; ++y) {
        if (x == y || dense_[x * n + y] == 0.0) continue;
        visit(J(x, y), sp.distance(window_.site(x), window_.site(y)));
        const double a = p(x, y) * mu_[x], b = p(y, x) * mu_[y];
        rev = std::max(rev, std::fabs(a - b) / std::max(a, b));
      }
    }
  }
  cert_.pairs_checked = pairs;
  cert_.ratio_min = pairs ? lo : 0.0;
  cert_.ratio_max = hi;
  cert_.certified_c1 = pairs ? std::max(hi, 1.0 / lo) * (1.0 + 1e-12) : 0.0;
  cert_.max_reversibility_error = rev;
  cert_.min_diagonal = *std::min_element(diag_.begin(), diag_.end());
  cert_.kappa = std::numeric_limits<double>::infinity();
  for (std::size_t x = 0; x < n; ++x) cert_.kappa = std::min(cert_.kappa, diag_[x] / mu_[x]);

  // mass beyond R_J, dyadic tail estimate
  const VolumeProfile& vh = sp.profile();
  const double beta = phi_.beta();
  double bound = 0.0;
  if (window_.is_box()) {
    bound = vh.homogeneity_constant * vh.doubling_constant / (1.0 - std::exp2(-beta)) * std::pow(jump_radius_, -beta) /
            phi_power_floor(phi_, jump_radius_) * *std::max_element(mu_.begin(), mu_.end());
  }
  cert_.tail_bound = bound;
  cert_.tail_fraction = bound / unscaled_max_row;
  cert_.truncation_warning = cert_.tail_fraction > tail_warning_fraction_;
}

double TransitionKernel::p(std::size_t x, std::size_t y) const {
  if (x == y) return diag_[x];
  if (mode_ == Mode::Dense) return sm_[y] * dense_[x * window_.size() + y];
  const Site& a = window_.site(x);
  const Site& b = window_.site(y);
  const int dim = window_.dim();
  const auto S = static_cast<std::size_t>(2 * stencil_radius_ + 1);
  std::size_t idx = 0;
  for (int i = 0; i < dim; ++i) {
    const std::int64_t v = b.c[static_cast<std::size_t>(i)] - a.c[static_cast<std::size_t>(i)];
    if (v < -stencil_radius_ || v > stencil_radius_) return 0.0;
    idx = idx * S + static_cast<std::size_t>(v + stencil_radius_);
  }
  return sm_[y] * stencil_[idx];
}

std::vector<std::pair<std::size_t, double>> TransitionKernel::row(std::size_t x) const {
  std::vector<std::pair<std::size_t, double>> out;
  const std::size_t n = window_.size();
  if (mode_ == Mode::Dense) {
    for (std::size_t y = 0; y < n; ++y) {
      const double v = p(x, y);
      if (v != 0.0 || y == x) out.emplace_back(y, v);
    }
    return out;
  }
  // box rows: enumerate window sites within the stencil box, lexicographic
  const int dim = window_.dim();
  const std::int64_t W = window_.radius(), D = stencil_radius_;
  const Site& a = window_.site(x);
  std::array<std::int64_t, kMaxDim> lo{}, hi{};
  for (int i = 0; i < dim; ++i) {
    lo[static_cast<std::size_t>(i)] = std::max(-W, a.c[static_cast<std::size_t>(i)] - D);
    hi[static_cast<std::size_t>(i)] = std::min(W, a.c[static_cast<std::size_t>(i)] + D);
  }
  Site cur;
  for (int i = 0; i < dim; ++i) cur.c[static_cast<std::size_t>(i)] = lo[static_cast<std::size_t>(i)];
  while (true) {
    const std::size_t y = *window_.index_of(cur);
    const double v = p(x, y);
    if (v != 0.0 || y == x) out.emplace_back(y, v);
    int i = dim - 1;
    while (i >= 0) {
      auto& ci = cur.c[static_cast<std::size_t>(i)];
      if (ci < hi[static_cast<std::size_t>(i)]) {
        ++ci;
        break;
      }
      ci = lo[static_cast<std::size_t>(i)];
      --i;
    }
    if (i < 0) break;
  }
  return out;
}

namespace {

// out[y] += a * k[y] for y in [lo, hi), optionally as an error-free
// transformation into (out, comp)
template <bool Comp>
inline void accumulate(double* out, double* comp, const double* k, double a, std::int64_t lo, std::int64_t hi) {
  if constexpr (Comp) {
    for (std::int64_t y = lo; y < hi; ++y) {
      const double v = a * k[y];
      const double t = out[y] + v;
      const double bp = t - out[y];
      comp[y] += (out[y] - (t - bp)) + (v - bp);
      out[y] = t;
    }
  } else {
    (void)comp;
    for (std::int64_t y = lo; y < hi; ++y) out[y] += a * k[y];
  }
}

// out(y) = sum_z src(z) K(y - z) over a box window; sources visited in
// lexicographic order for every target, whatever the chunking
template <bool Comp>
void convolve_box(const Window& window, std::int64_t D, const double* K, const std::vector<double>& src, double* o,
                  double* c, unsigned workers) {
  const int dim = window.dim();
  const auto E = static_cast<std::int64_t>(window.extent());
  const std::int64_t S = 2 * D + 1;
  parallel_chunks(static_cast<std::size_t>(E), workers, [&](std::size_t b, std::size_t e) {
    const auto y0b = static_cast<std::int64_t>(b), y0e = static_cast<std::int64_t>(e);
    if (dim == 1) {
      for (std::int64_t z = 0; z < E; ++z) {
        const double a = src[static_cast<std::size_t>(z)];
        if (a == 0.0) continue;
        accumulate<Comp>(o, c, K + (D - z), a, std::max(y0b, z - D), std::min(y0e, z + D + 1));
      }
    } else if (dim == 2) {
      for (std::int64_t z0 = 0; z0 < E; ++z0) {
        const std::int64_t lo0 = std::max(y0b, z0 - D), hi0 = std::min(y0e, z0 + D + 1);
        if (lo0 >= hi0) continue;
        for (std::int64_t z1 = 0; z1 < E; ++z1) {
          const double a = src[static_cast<std::size_t>(z0 * E + z1)];
          if (a == 0.0) continue;
          const std::int64_t lo1 = std::max<std::int64_t>(0, z1 - D), hi1 = std::min(E, z1 + D + 1);
          for (std::int64_t y0 = lo0; y0 < hi0; ++y0)
            accumulate<Comp>(o + y0 * E, c ? c + y0 * E : nullptr, K + (y0 - z0 + D) * S + (D - z1), a, lo1, hi1);
        }
      }
    } else {
      for (std::int64_t z0 = 0; z0 < E; ++z0) {
        const std::int64_t lo0 = std::max(y0b, z0 - D), hi0 = std::min(y0e, z0 + D + 1);
        if (lo0 >= hi0) continue;
        for (std::int64_t z1 = 0; z1 < E; ++z1) {
          const std::int64_t lo1 = std::max<std::int64_t>(0, z1 - D), hi1 = std::min(E, z1 + D + 1);
          for (std::int64_t z2 = 0; z2 < E; ++z2) {
            const double a = src[static_cast<std::size_t>((z0 * E + z1) * E + z2)];
            if (a == 0.0) continue;
            const std::int64_t lo2 = std::max<std::int64_t>(0, z2 - D), hi2 = std::min(E, z2 + D + 1);
            for (std::int64_t y0 = lo0; y0 < hi0; ++y0)
              for (std::int64_t y1 = lo1; y1 < hi1; ++y1) {
                const std::int64_t off = (y0 * E + y1) * E;
                accumulate<Comp>(o + off, c ? c + off : nullptr, K + ((y0 - z0 + D) * S + (y1 - z1 + D)) * S + (D - z2), a, lo2,
                                 hi2);
              }
          }
        }
      }
    }
  });
}

}  // namespace

void TransitionKernel::convolve(const std::vector<double>& src, std::vector<double>& out, unsigned workers) const {
  out.assign(src.size(), 0.0);
  convolve_box<false>(window_, stencil_radius_, stencil_.data(), src, out.data(), nullptr, workers);
}

void TransitionKernel::convolve_compensated(const std::vector<double>& src, std::vector<double>& hi, std::vector<double>& lo,
                                            unsigned workers) const {
  hi.assign(src.size(), 0.0);
  lo.assign(src.size(), 0.0);
  convolve_box<true>(window_, stencil_radius_, stencil_.data(), src, hi.data(), lo.data(), workers);
}

std::vector<double> TransitionKernel::apply(const std::vector<double>& f, unsigned workers) const {
  const std::size_t n = window_.size();
  if (f.size() != n) throw PreconditionError("apply_P: function must be defined on the whole window");
  std::vector<double> out(n, 0.0);
  if (mode_ == Mode::Stencil) {
    std::vector<double> g(n);
    for (std::size_t i = 0; i < n; ++i) g[i] = sm_[i] * f[i];
    std::vector<double> conv;
    convolve(g, conv, workers);
    for (std::size_t i = 0; i < n; ++i) out[i] = diag_[i] * f[i] + conv[i];
    return out;
  }
  parallel_chunks(n, workers, [&](std::size_t b, std::size_t e) {
    for (std::size_t x = b; x < e; ++x) {
      double acc = 0.0;
      const double* rowp = dense_.data() + x * n;
      for (std::size_t y = 0; y < n; ++y) acc += rowp[y] * (sm_[y] * f[y]);
      out[x] = diag_[x] * f[x] + acc;
    }
  });
  return out;
}

nlohmann::json TransitionKernel::metadata() const {
  const auto& c = cert_;
  nlohmann::json phi = {{"beta", phi_.beta()}, {"l", phi_.slowly_varying().to_json()}};
  return {{"mode", mode_ == Mode::Stencil ? "stencil" : "dense"},
          {"space", to_string(space_->kind())},
          {"dimension", space_->dimension()},
          {"volume_profile", space_->profile().description},
          {"window_sites", window_.size()},
          {"window_radius", window_.radius()},
          {"phi", phi},
          {"theta_diag", theta_},
          {"offdiag_scale", s_},
          {"R_J", jump_radius_},
          {"stencil_radius", stencil_radius_},
          {"noise_rho", noise_rho_},
          {"certificate",
           {{"ratio_min", c.ratio_min},
            {"ratio_max", c.ratio_max},
            {"certified_C1", c.certified_c1},
            {"min_diagonal", c.min_diagonal},
            {"kappa", c.kappa},
            {"max_row_error", c.max_row_error},
            {"max_reversibility_error", c.max_reversibility_error},
            {"pairs_checked", c.pairs_checked},
            {"tail_bound", c.tail_bound},
            {"tail_fraction", c.tail_fraction},
            {"truncation_warning", c.truncation_warning}}}};
}

// ---------------------------------------------------------------------------

double DirichletForm::energy(const std::vector<double>& f) const {
  const TransitionKernel& k = *k_;
  const std::size_t n = k.size();
  if (f.size() != n) throw PreconditionError("dirichlet_energy: function must be defined on the window");
  std::vector<std::size_t> supp;
  for (std::size_t i = 0; i < n; ++i)
    if (f[i] != 0.0) supp.push_back(i);
  const auto& mu = k.mu();
  CompensatedSum total;
  for (std::size_t a = 0; a < supp.size(); ++a) {
    const std::size_t x = supp[a];
    CompensatedSum inside;  // sum over y in supp, y != x, of p(x, y)
    for (std::size_t b = 0; b < supp.size(); ++b) {
      const std::size_t y = supp[b];
      if (y == x) continue;
      const double pxy = k.p(x, y);
      inside.add(pxy);
      const double df = f[x] - f[y];
      total.add(0.5 * df * df * pxy * mu[x]);
    }
    const double outside = (1.0 - k.diagonal()[x]) - inside.value();
    total.add(f[x] * f[x] * mu[x] * std::max(outside, 0.0));
  }
  return total.value();
}

double DirichletForm::quadratic_form(const std::vector<double>& f, unsigned workers) const {
  const auto pf = k_->apply(f, workers);
  const auto& mu = k_->mu();
  CompensatedSum acc;
  for (std::size_t i = 0; i < f.size(); ++i)
    if (f[i] != 0.0) acc.add(mu[i] * f[i] * (f[i] - pf[i]));
  return acc.value();
}

double besov_seminorm(const TransitionKernel& kernel, const std::vector<double>& f, double beta) {
  const MetricMeasureSpace& sp = kernel.space();
  const Window& w = kernel.window();
  const std::size_t n = w.size();
  if (f.size() != n) throw PreconditionError("besov_seminorm: function must be defined on the window");
  const auto& mu = kernel.mu();
  const bool homog = sp.homogeneous();
  std::map<double, double> vcache;
  auto weight = [&](std::size_t x, std::size_t y) {
    const double d = sp.distance(w.site(x), w.site(y));
    double v;
    if (homog) {
      auto it = vcache.find(d);
      if (it == vcache.end()) it = vcache.emplace(d, sp.volume(w.site(x), d)).first;
      v = it->second;
    } else {
      v = sp.volume(w.site(x), d);
    }
    return 1.0 / (std::pow(d, beta) * v);
  };
  std::vector<std::size_t> supp;
  std::vector<char> in_supp(n, 0);
  for (std::size_t i = 0; i < n; ++i)
    if (f[i] != 0.0) {
      supp.push_back(i);
      in_supp[i] = 1;
    }
  CompensatedSum total;
  for (std::size_t x : supp) {
    CompensatedSum outside;
    for (std::size_t y = 0; y < n; ++y) {
      if (y == x) continue;
      const double wxy = weight(x, y) * mu[x] * mu[y];
      if (in_supp[y]) {
        const double df = f[x] - f[y];
        total.add(df * df * wxy);
      } else {
        outside.add(wxy);
      }
    }
    total.add(2.0 * f[x] * f[x] * outside.value());
  }
  return std::sqrt(total.value());
}

LocalAverage local_average(const MetricMeasureSpace& space, const Window& window, const std::vector<double>& f, double r) {
  if (!(r >= 0.0)) throw PreconditionError("local_average: r must be >= 0");
  if (f.size() != window.size()) throw PreconditionError("local_average: function must be defined on the window");
  LocalAverage out;
  out.values.resize(window.size());
  for (std::size_t i = 0; i < window.size(); ++i) {
    CompensatedSum num, den;
    bool clipped = false;
    for (const Site& y : space.ball(window.site(i), r)) {
      const auto j = window.index_of(y);
      if (!j) {
        clipped = true;
        continue;
      }
      const double m = space.measure(y);
      num.add(f[*j] * m);
      den.add(m);
    }
    out.values[i] = num.value() / den.value();
    if (clipped) ++out.truncated_sites;
  }
  return out;
}

double inner(const std::vector<double>& f, const std::vector<double>& g, const std::vector<double>& mu) {
  CompensatedSum acc;
  for (std::size_t i = 0; i < f.size(); ++i) acc.add(f[i] * g[i] * mu[i]);
  return acc.value();
}

double norm1(const std::vector<double>& f, const std::vector<double>& mu) {
  CompensatedSum acc;
  for (std::size_t i = 0; i < f.size(); ++i) acc.add(std::fabs(f[i]) * mu[i]);
  return acc.value();
}

double norm2(const std::vector<double>& f, const std::vector<double>& mu) { return std::sqrt(inner(f, f, mu)); }

void write_kernel_csv(const TransitionKernel& kernel, std::ostream& os) {
  os.precision(17);
  const Window& w = kernel.window();
  const int dim = kernel.space().dimension();
  if (kernel.mode() == TransitionKernel::Mode::Dense) {
    os << "x,y,p\n";
    for (std::size_t x = 0; x < w.size(); ++x)
      for (const auto& [y, v] : kernel.row(x))
        os << '"' << to_string(w.site(x), dim) << "\",\"" << to_string(w.site(y), dim) << "\"," << v << '\n';
    return;
  }
  // stencil: off-diagonal p(x, x + v) = s K(v) mu_{x+v}; diagonal listed per site
  os << "kind,site_or_displacement,value\n";
  const auto S = static_cast<std::size_t>(2 * kernel.stencil_radius() + 1);
  const auto& st = kernel.stencil();
  for (std::size_t idx = 0; idx < st.size(); ++idx) {
    if (st[idx] == 0.0) continue;
    Site v;
    std::size_t rest = idx;
    for (int i = dim - 1; i >= 0; --i) {
      v.c[static_cast<std::size_t>(i)] = static_cast<std::int64_t>(rest % S) - kernel.stencil_radius();
      rest /= S;
    }
    os << "J,\"" << to_string(v, dim) << "\"," << kernel.offdiag_scale() * st[idx] << '\n';
  }
  for (std::size_t x = 0; x < w.size(); ++x) os << "diag,\"" << to_string(w.site(x), dim) << "\"," << kernel.diagonal()[x] << '\n';
}

}  // namespace lrw
