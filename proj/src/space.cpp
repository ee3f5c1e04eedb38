#include "lrw/space.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

#include "lrw/error.hpp"
#include "lrw/numeric.hpp"

namespace lrw {

namespace {

std::int64_t floor_radius(double r) {
  if (!(r >= 0.0) || !std::isfinite(r)) throw PreconditionError("ball radius must be finite and >= 0");
  return static_cast<std::int64_t>(std::floor(r));
}

double binom(std::int64_t n, int k) {
  if (k < 0 || n < k) return 0.0;
  double v = 1.0;
  for (int i = 0; i < k; ++i) v = v * static_cast<double>(n - i) / static_cast<double>(i + 1);
  return v;
}

// Number of lattice sites within integer radius k.
double lattice_count(MetricKind kind, int dim, std::int64_t k) {
  if (kind == MetricKind::LatticeLinf) return std::pow(2.0 * static_cast<double>(k) + 1.0, dim);
  double total = 0.0;
  for (int i = 0; i <= dim; ++i) total += std::ldexp(binom(dim, i), i) * binom(k, i);
  return total;
}

bool rel_exceeds(double measured, double declared) {
  return measured > declared * (1.0 + 1e-9) + 1e-300;
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(10);
  os << v;
  return os.str();
}

}  // namespace

std::string to_string(const Site& s, int dim) {
  if (dim <= 1) return std::to_string(s.c[0]);
  std::string out = "(";
  for (int i = 0; i < dim; ++i) {
    if (i) out += ",";
    out += std::to_string(s.c[static_cast<std::size_t>(i)]);
  }
  return out + ")";
}

std::string to_string(MetricKind kind) {
  switch (kind) {
    case MetricKind::LatticeL1: return "lattice-L1";
    case MetricKind::LatticeLinf: return "lattice-Linf";
    case MetricKind::ExplicitFinite: return "explicit-finite";
    case MetricKind::Transformed: return "transformed";
  }
  return "unknown";
}

VolumeProfile VolumeProfile::lattice_default(MetricKind kind, int dim) {
  VolumeProfile p;
  const double d = dim;
  const double scale = kind == MetricKind::LatticeL1 ? std::tgamma(d + 1.0) : 1.0;
  p.fn = [d, scale](double r) { return std::pow(1.0 + 2.0 * r, d) / scale; };
  p.doubling_constant = std::ldexp(1.0, dim);
  p.homogeneity_constant = std::pow(3.0, d);
  p.alpha = d;
  p.description = kind == MetricKind::LatticeL1 ? "(1+2r)^d/d!" : "(1+2r)^d";
  return p;
}

// ---------------------------------------------------------------------------

MetricMeasureSpace MetricMeasureSpace::lattice(MetricKind kind, int dim, std::vector<double> mu_pattern) {
  if (kind != MetricKind::LatticeL1 && kind != MetricKind::LatticeLinf)
    throw ConfigError("lattice(): kind must be lattice-L1 or lattice-Linf");
  if (dim < 1 || dim > kMaxDim) throw ConfigError("space.dimension must be in [1, 3]");
  if (mu_pattern.empty()) throw ConfigError("space.measure must be nonempty");
  for (double m : mu_pattern)
    if (!(m > 0.0) || !std::isfinite(m)) throw ConfigError("space.measure entries must be positive");
  MetricMeasureSpace s;
  s.kind_ = kind;
  s.dim_ = dim;
  s.mu_pattern_ = std::move(mu_pattern);
  s.gap_ = 1.0;
  s.c_mu_ = 1.0;
  for (double m : s.mu_pattern_) s.c_mu_ = std::max({s.c_mu_, m, 1.0 / m});
  s.profile_ = VolumeProfile::lattice_default(kind, dim);
  if (s.mu_pattern_.size() > 1 || s.mu_pattern_[0] != 1.0) {
    // V(x, r) / count lies in [min mu, max mu]
    const auto [lo, hi] = std::minmax_element(s.mu_pattern_.begin(), s.mu_pattern_.end());
    s.profile_.homogeneity_constant *= std::max(*hi, 1.0 / *lo);
  }
  return s;
}

MetricMeasureSpace MetricMeasureSpace::finite(std::vector<std::string> labels, std::vector<double> mu,
                                              std::vector<std::vector<double>> dist,
                                              std::optional<VolumeProfile> profile) {
  const std::size_t n = labels.size();
  if (n == 0) throw ConfigError("finite space: sites must be nonempty");
  if (mu.size() != n) throw ConfigError("finite space: mu has " + std::to_string(mu.size()) + " entries, expected " + std::to_string(n));
  if (dist.size() != n) throw ConfigError("finite space: dist must be an n x n matrix");
  std::set<std::string> seen(labels.begin(), labels.end());
  if (seen.size() != n) throw ConfigError("finite space: site ids must be distinct");
  for (std::size_t i = 0; i < n; ++i) {
    if (!(mu[i] > 0.0) || !std::isfinite(mu[i])) throw ConfigError("finite space: mu[" + std::to_string(i) + "] must be positive");
    if (dist[i].size() != n) throw ConfigError("finite space: dist must be an n x n matrix");
  }
  double gap = std::numeric_limits<double>::infinity();
  double scale = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double d = dist[i][j];
      if (!std::isfinite(d) || d < 0.0) throw ConfigError("finite space: dist entries must be finite and >= 0");
      scale = std::max(scale, d);
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (dist[i][i] != 0.0) throw ConfigError("finite space: dist[i][i] must be 0");
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      if (dist[i][j] != dist[j][i]) throw ConfigError("finite space: dist is not symmetric");
      if (dist[i][j] == 0.0) throw ConfigError("finite space: distinct sites at distance 0");
      gap = std::min(gap, dist[i][j]);
    }
  }
  const double tol = 1e-12 * std::max(1.0, scale);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t k = 0; k < n; ++k)
        if (dist[i][k] > dist[i][j] + dist[j][k] + tol)
          throw ConfigError("finite space: triangle inequality fails at (" + labels[i] + "," + labels[j] + "," + labels[k] + ")");

  MetricMeasureSpace s;
  s.kind_ = MetricKind::ExplicitFinite;
  s.dim_ = 1;
  s.labels_ = std::move(labels);
  s.mu_ = std::move(mu);
  s.dist_ = std::move(dist);
  s.gap_ = n > 1 ? gap : 1.0;
  s.c_mu_ = 1.0;
  for (double m : s.mu_) s.c_mu_ = std::max({s.c_mu_, m, 1.0 / m});

  if (profile) {
    s.profile_ = std::move(*profile);
    return s;
  }

  // measured profile: V_h(r) = max_x V(x, r), a step function
  auto sorted_rows = std::make_shared<std::vector<std::vector<std::pair<double, double>>>>(n);
  std::vector<double> breaks{0.0};
  for (std::size_t i = 0; i < n; ++i) {
    auto& row = (*sorted_rows)[i];
    for (std::size_t j = 0; j < n; ++j) row.emplace_back(s.dist_[i][j], s.mu_[j]);
    std::sort(row.begin(), row.end());
    double acc = 0.0;
    for (auto& [d, m] : row) {
      acc += m;
      m = acc;  // cumulative volume up to and including this entry
      breaks.push_back(d);
    }
  }
  std::sort(breaks.begin(), breaks.end());
  breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());
  auto vol_at = [sorted_rows](std::size_t i, double r) {
    const auto& row = (*sorted_rows)[i];
    auto it = std::upper_bound(row.begin(), row.end(), r, [](double v, const auto& e) { return v < e.first; });
    return it == row.begin() ? 0.0 : std::prev(it)->second;
  };
  auto vh = [sorted_rows, vol_at](double r) {
    double best = 0.0;
    for (std::size_t i = 0; i < sorted_rows->size(); ++i) best = std::max(best, vol_at(i, std::max(r, 0.0)));
    return best;
  };
  VolumeProfile p;
  p.fn = vh;
  p.description = "measured max_x V(x,r)";
  double cd = 1.0, ch = 1.0;
  for (double b : breaks) {
    for (double r : {b / 2.0, b * (1.0 - 1e-12), b}) {
      if (r <= 0.0) continue;
      cd = std::max(cd, vh(2.0 * r) / vh(r));
    }
    double lo = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) lo = std::min(lo, vol_at(i, b));
    ch = std::max(ch, vh(b) / lo);
  }
  p.doubling_constant = cd;
  p.homogeneity_constant = ch;
  p.alpha = std::log2(cd);
  s.profile_ = std::move(p);
  return s;
}

MetricMeasureSpace MetricMeasureSpace::from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw ConfigError("finite space document must be a JSON object");
  for (const char* key : {"sites", "mu", "dist"})
    if (!doc.contains(key)) throw ConfigError(std::string("finite space document lacks \"") + key + "\"");
  std::vector<std::string> labels;
  for (const auto& id : doc.at("sites")) labels.push_back(id.is_string() ? id.get<std::string>() : id.dump());
  std::vector<double> mu;
  std::vector<std::vector<double>> dist;
  try {
    mu = doc.at("mu").get<std::vector<double>>();
    dist = doc.at("dist").get<std::vector<std::vector<double>>>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("finite space document: ") + e.what());
  }
  return finite(std::move(labels), std::move(mu), std::move(dist));
}

MetricMeasureSpace MetricMeasureSpace::transformed(std::shared_ptr<const MetricMeasureSpace> base,
                                                   std::shared_ptr<const MetricTransform> g) {
  if (!base || !g) throw ConfigError("transformed space needs a base space and a transform");
  if (base->kind() == MetricKind::Transformed) throw ConfigError("transforms of transformed spaces are not supported");
  MetricMeasureSpace s;
  s.kind_ = MetricKind::Transformed;
  s.dim_ = base->dim_;
  s.mu_pattern_ = base->mu_pattern_;
  s.labels_ = base->labels_;
  s.mu_ = base->mu_;
  s.base_ = base;
  s.transform_ = g;
  s.gap_ = g->value(base->gap_);
  s.c_mu_ = base->c_mu_;
  s.site_budget_ = base->site_budget_;

  const VolumeProfile& bp = base->profile();
  VolumeProfile p;
  auto bfn = bp.fn;
  p.fn = [bfn, g](double r) { return bfn(g->inverse(std::max(r, 0.0))); };
  p.homogeneity_constant = bp.homogeneity_constant;
  double cd = 1.0;
  for (int i = 0; i <= 16 * 48; ++i) {
    const double y = g->value(1.0) * std::exp2(-4.0 + i / 16.0);
    cd = std::max(cd, p.fn(2.0 * y) / p.fn(y));
  }
  p.doubling_constant = cd * 1.05;
  p.alpha = std::log2(p.doubling_constant);
  p.description = bp.description + " o g^{-1}";
  s.profile_ = std::move(p);
  return s;
}

bool MetricMeasureSpace::lattice_like() const noexcept {
  if (kind_ == MetricKind::Transformed) return base_->lattice_like();
  return kind_ == MetricKind::LatticeL1 || kind_ == MetricKind::LatticeLinf;
}

bool MetricMeasureSpace::homogeneous() const noexcept {
  if (!lattice_like()) return false;
  return std::all_of(mu_pattern_.begin(), mu_pattern_.end(), [&](double m) { return m == mu_pattern_[0]; });
}

MetricMeasureSpace MetricMeasureSpace::with_profile(VolumeProfile profile) const {
  MetricMeasureSpace s = *this;
  s.profile_ = std::move(profile);
  return s;
}

MetricMeasureSpace MetricMeasureSpace::with_site_budget(std::size_t budget) const {
  MetricMeasureSpace s = *this;
  s.site_budget_ = budget;
  return s;
}

void MetricMeasureSpace::validate_site(const Site& x) const {
  if (kind_ == MetricKind::Transformed) {
    base_->validate_site(x);
    return;
  }
  if (kind_ == MetricKind::ExplicitFinite) {
    if (x.c[0] < 0 || static_cast<std::size_t>(x.c[0]) >= labels_.size() || x.c[1] != 0 || x.c[2] != 0)
      throw InvalidSiteError("unknown site id " + std::to_string(x.c[0]));
    return;
  }
  for (int i = dim_; i < kMaxDim; ++i)
    if (x.c[static_cast<std::size_t>(i)] != 0)
      throw InvalidSiteError("site " + to_string(x, kMaxDim) + " has coordinates beyond dimension " + std::to_string(dim_));
}

double MetricMeasureSpace::distance(const Site& x, const Site& y) const {
  validate_site(x);
  validate_site(y);
  switch (kind_) {
    case MetricKind::LatticeL1: {
      std::int64_t s = 0;
      for (int i = 0; i < dim_; ++i) s += std::llabs(x.c[static_cast<std::size_t>(i)] - y.c[static_cast<std::size_t>(i)]);
      return static_cast<double>(s);
    }
    case MetricKind::LatticeLinf: {
      std::int64_t s = 0;
      for (int i = 0; i < dim_; ++i) s = std::max<std::int64_t>(s, std::llabs(x.c[static_cast<std::size_t>(i)] - y.c[static_cast<std::size_t>(i)]));
      return static_cast<double>(s);
    }
    case MetricKind::ExplicitFinite:
      return dist_[static_cast<std::size_t>(x.c[0])][static_cast<std::size_t>(y.c[0])];
    case MetricKind::Transformed: {
      const double d = base_->distance(x, y);
      return d == 0.0 ? 0.0 : transform_->value(d);
    }
  }
  return 0.0;
}

double MetricMeasureSpace::measure(const Site& x) const {
  validate_site(x);
  if (kind_ == MetricKind::ExplicitFinite || (kind_ == MetricKind::Transformed && !lattice_like()))
    return mu_[static_cast<std::size_t>(x.c[0])];
  if (mu_pattern_.size() == 1) return mu_pattern_[0];
  std::int64_t s = 0;
  for (int i = 0; i < dim_; ++i) s += x.c[static_cast<std::size_t>(i)];
  const auto m = static_cast<std::int64_t>(mu_pattern_.size());
  return mu_pattern_[static_cast<std::size_t>(((s % m) + m) % m)];
}

std::int64_t MetricMeasureSpace::transformed_integer_radius(double r) const {
  if (kind_ != MetricKind::Transformed) return floor_radius(r);
  if (!(r >= 0.0) || !std::isfinite(r)) throw PreconditionError("ball radius must be finite and >= 0");
  auto k = static_cast<std::int64_t>(std::floor(transform_->inverse(r)));
  k = std::max<std::int64_t>(k, 0);
  while (transform_->value(static_cast<double>(k + 1)) <= r) ++k;
  while (k > 0 && transform_->value(static_cast<double>(k)) > r) --k;
  return k;
}

void MetricMeasureSpace::check_budget(double count) const {
  if (count > static_cast<double>(site_budget_))
    throw BudgetExceededError("ball enumeration of " + fmt(count) + " sites exceeds the site budget " + std::to_string(site_budget_));
}

std::vector<Site> MetricMeasureSpace::lattice_ball(const Site& x, double r) const {
  const std::int64_t k = transformed_integer_radius(r);
  const MetricKind k_base = kind_ == MetricKind::Transformed ? base_->kind() : kind_;
  check_budget(lattice_count(k_base, dim_, k));
  std::vector<Site> out;
  out.reserve(static_cast<std::size_t>(lattice_count(k_base, dim_, k)));
  Site lo = x, cur = x;
  for (int i = 0; i < dim_; ++i) lo.c[static_cast<std::size_t>(i)] -= k;
  // odometer over the box, filtered by the metric
  cur = lo;
  while (true) {
    std::int64_t l1 = 0;
    for (int i = 0; i < dim_; ++i) l1 += std::llabs(cur.c[static_cast<std::size_t>(i)] - x.c[static_cast<std::size_t>(i)]);
    if (k_base == MetricKind::LatticeLinf || l1 <= k) out.push_back(cur);
    int i = dim_ - 1;
    while (i >= 0) {
      auto& ci = cur.c[static_cast<std::size_t>(i)];
      if (ci < x.c[static_cast<std::size_t>(i)] + k) {
        ++ci;
        break;
      }
      ci = lo.c[static_cast<std::size_t>(i)];
      --i;
    }
    if (i < 0) break;
  }
  return out;
}

std::vector<Site> MetricMeasureSpace::ball(const Site& x, double r) const {
  validate_site(x);
  if (!(r >= 0.0) || !std::isfinite(r)) throw PreconditionError("ball radius must be finite and >= 0");
  if (lattice_like()) return lattice_ball(x, r);
  std::vector<Site> out;
  for (std::size_t j = 0; j < labels_.size(); ++j) {
    const Site y = Site::index(static_cast<std::int64_t>(j));
    if (distance(x, y) <= r) out.push_back(y);
  }
  return out;
}

double MetricMeasureSpace::lattice_volume(const Site& x, double r) const {
  const std::int64_t k = transformed_integer_radius(r);
  const MetricKind k_base = kind_ == MetricKind::Transformed ? base_->kind() : kind_;
  const double count = lattice_count(k_base, dim_, k);
  if (mu_pattern_.size() == 1) return count * mu_pattern_[0];
  CompensatedSum acc;
  for (const Site& y : lattice_ball(x, r)) acc.add(measure(y));
  return acc.value();
}

double MetricMeasureSpace::volume(const Site& x, double r) const {
  validate_site(x);
  if (!(r >= 0.0) || !std::isfinite(r)) throw PreconditionError("ball radius must be finite and >= 0");
  if (lattice_like()) return lattice_volume(x, r);
  CompensatedSum acc;
  for (const Site& y : ball(x, r)) acc.add(measure(y));
  return acc.value();
}

// ---------------------------------------------------------------------------

Window Window::box(int dim, std::int64_t radius) {
  if (dim < 1 || dim > kMaxDim) throw ConfigError("window dimension must be in [1, 3]");
  if (radius < 0) throw ConfigError("window radius must be >= 0");
  Window w;
  w.is_box_ = true;
  w.dim_ = dim;
  w.radius_ = radius;
  const std::size_t e = w.extent();
  std::size_t total = 1;
  for (int i = 0; i < dim; ++i) total *= e;
  w.sites_.reserve(total);
  for (std::size_t idx = 0; idx < total; ++idx) {
    Site s;
    std::size_t rest = idx;
    for (int i = dim - 1; i >= 0; --i) {
      s.c[static_cast<std::size_t>(i)] = static_cast<std::int64_t>(rest % e) - radius;
      rest /= e;
    }
    w.sites_.push_back(s);
  }
  return w;
}

Window Window::all(std::size_t n) {
  Window w;
  w.is_box_ = false;
  w.dim_ = 1;
  w.radius_ = 0;
  for (std::size_t i = 0; i < n; ++i) w.sites_.push_back(Site::index(static_cast<std::int64_t>(i)));
  return w;
}

Window Window::for_space(const MetricMeasureSpace& space, std::int64_t radius) {
  if (space.lattice_like()) return box(space.dimension(), radius);
  return all(space.size());
}

std::optional<std::size_t> Window::index_of(const Site& s) const {
  if (!is_box_) {
    if (s.c[0] < 0 || static_cast<std::size_t>(s.c[0]) >= sites_.size() || s.c[1] != 0 || s.c[2] != 0) return std::nullopt;
    return static_cast<std::size_t>(s.c[0]);
  }
  std::size_t idx = 0;
  const auto e = static_cast<std::int64_t>(extent());
  for (int i = 0; i < kMaxDim; ++i) {
    const std::int64_t v = s.c[static_cast<std::size_t>(i)];
    if (i >= dim_) {
      if (v != 0) return std::nullopt;
      continue;
    }
    if (v < -radius_ || v > radius_) return std::nullopt;
    idx = idx * static_cast<std::size_t>(e) + static_cast<std::size_t>(v + radius_);
  }
  return idx;
}

// ---------------------------------------------------------------------------

SpaceAuditReport audit_space(const MetricMeasureSpace& space, const std::vector<Site>& x_samples,
                             const std::vector<double>& r_grid) {
  if (x_samples.empty() || r_grid.empty()) throw PreconditionError("audit_space needs nonempty samples and radius grid");
  SpaceAuditReport rep;
  const VolumeProfile& vh = space.profile();
  std::vector<double> grid = r_grid;
  std::sort(grid.begin(), grid.end());
  for (double r : grid)
    if (!(r > 0.0)) throw PreconditionError("audit radius grid must be positive");

  double gap = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < x_samples.size(); ++i) {
    rep.c_mu_hat = std::max({rep.c_mu_hat, space.measure(x_samples[i]), 1.0 / space.measure(x_samples[i])});
    for (std::size_t j = i + 1; j < x_samples.size(); ++j) {
      const double d = space.distance(x_samples[i], x_samples[j]);
      if (d > 0.0) gap = std::min(gap, d);
    }
  }
  rep.gap_hat = std::isfinite(gap) ? gap : space.discreteness_gap();

  for (double r : grid) rep.c_doubling_hat = std::max(rep.c_doubling_hat, vh(2.0 * r) / vh(r));
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (vh(grid[i]) < vh(grid[i - 1])) rep.profile_monotone = false;
  for (std::size_t i = 0; i < grid.size(); ++i)
    for (std::size_t j = i; j < grid.size(); ++j)
      rep.vc_ratio_hat = std::max(rep.vc_ratio_hat, vh(grid[j]) / (vh(grid[i]) * vh.doubling_constant * std::pow(grid[j] / grid[i], vh.alpha)));

  for (const Site& x : x_samples) {
    double prev = 0.0;
    for (double r : grid) {
      const double v = space.volume(x, r);
      if (v < prev) rep.volume_monotone = false;
      prev = v;
      rep.c_homog_hat = std::max({rep.c_homog_hat, v / vh(r), vh(r) / v});
    }
  }

  // metric axioms: exhaustive on finite spaces, on (capped) sample triples otherwise
  std::vector<Site> pts;
  if (!space.lattice_like()) {
    for (std::size_t i = 0; i < space.size(); ++i) pts.push_back(Site::index(static_cast<std::int64_t>(i)));
  } else {
    pts.assign(x_samples.begin(), x_samples.begin() + static_cast<std::ptrdiff_t>(std::min<std::size_t>(x_samples.size(), 40)));
  }
  for (const Site& a : pts) {
    for (const Site& b : pts) {
      const double dab = space.distance(a, b);
      if (dab != space.distance(b, a) || ((dab == 0.0) != (a == b))) rep.metric_axioms = false;
      for (const Site& c : pts) {
        const double dac = space.distance(a, c), dbc = space.distance(b, c);
        if (dac > dab + dbc + 1e-12 * std::max(1.0, dac)) rep.metric_axioms = false;
        ++rep.triples_checked;
      }
    }
  }

  if (rep.gap_hat < space.discreteness_gap() * (1.0 - 1e-9)) rep.failures.push_back("discreteness gap " + fmt(rep.gap_hat) + " below declared " + fmt(space.discreteness_gap()));
  if (rel_exceeds(rep.c_mu_hat, space.comparability_constant())) rep.failures.push_back("C_mu " + fmt(rep.c_mu_hat) + " exceeds declared " + fmt(space.comparability_constant()));
  if (rel_exceeds(rep.c_doubling_hat, vh.doubling_constant)) rep.failures.push_back("C_D " + fmt(rep.c_doubling_hat) + " exceeds declared " + fmt(vh.doubling_constant));
  if (rel_exceeds(rep.c_homog_hat, vh.homogeneity_constant)) rep.failures.push_back("C_h " + fmt(rep.c_homog_hat) + " exceeds declared " + fmt(vh.homogeneity_constant));
  if (rel_exceeds(rep.vc_ratio_hat, 1.0)) rep.failures.push_back("polynomial volume comparison fails, ratio " + fmt(rep.vc_ratio_hat));
  if (vh.alpha < std::log2(vh.doubling_constant) * (1.0 - 1e-12)) rep.failures.push_back("alpha below log2 C_D");
  if (!rep.profile_monotone) rep.failures.push_back("V_h not monotone on the grid");
  if (!rep.volume_monotone) rep.failures.push_back("V(x, r) not monotone in r");
  if (!rep.metric_axioms) rep.failures.push_back("metric axioms fail on sampled triples");
  return rep;
}

nlohmann::json to_json(const SpaceAuditReport& r) {
  return {{"gap_hat", r.gap_hat},
          {"C_mu_hat", r.c_mu_hat},
          {"C_D_hat", r.c_doubling_hat},
          {"C_h_hat", r.c_homog_hat},
          {"vc_ratio_hat", r.vc_ratio_hat},
          {"profile_monotone", r.profile_monotone},
          {"volume_monotone", r.volume_monotone},
          {"metric_axioms", r.metric_axioms},
          {"triples_checked", r.triples_checked},
          {"failures", r.failures},
          {"verdict", r.pass() ? "PASS" : "FAIL"}};
}

}  // namespace lrw
