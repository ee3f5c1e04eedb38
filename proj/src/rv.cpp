#include "lrw/rv.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "lrw/error.hpp"

namespace lrw {

namespace {

constexpr double kE = std::numbers::e;

double bump(double u) {
  const double s = 1.0 - u * u;
  return s > 0.0 ? std::exp(-1.0 / s) : 0.0;
}

double bump_prime(double u) {
  const double s = 1.0 - u * u;
  return s > 0.0 ? std::exp(-1.0 / s) * (-2.0 * u / (s * s)) : 0.0;
}

template <class F>
double integrate_bump(F&& fn) {
  using boost::math::quadrature::gauss_kronrod;
  return gauss_kronrod<double, 61>::integrate(fn, -1.0, 1.0, 6, 1e-14);
}

}  // namespace

// ---------------------------------------------------------------------------

SlowlyVaryingFn SlowlyVaryingFn::constant(double c) {
  if (!(c > 0.0) || !std::isfinite(c)) throw ConfigError("phi.l: constant must be positive");
  SlowlyVaryingFn l;
  l.kind_ = Kind::Const;
  l.param_ = c;
  return l;
}

SlowlyVaryingFn SlowlyVaryingFn::logpow(double a) {
  if (!std::isfinite(a)) throw ConfigError("phi.l: logpow exponent must be finite");
  SlowlyVaryingFn l;
  l.kind_ = Kind::LogPow;
  l.param_ = a;
  return l;
}

SlowlyVaryingFn SlowlyVaryingFn::iterlog(double a) {
  if (!std::isfinite(a)) throw ConfigError("phi.l: iterlog exponent must be finite");
  SlowlyVaryingFn l;
  l.kind_ = Kind::IterLog;
  l.param_ = a;
  return l;
}

SlowlyVaryingFn SlowlyVaryingFn::table(std::vector<std::pair<double, double>> points) {
  if (points.empty()) throw ConfigError("phi.l: table needs at least one point");
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!(points[i].second > 0.0)) throw ConfigError("phi.l: table values must be positive");
    if (i && !(points[i].first > points[i - 1].first)) throw ConfigError("phi.l: table abscissae must increase");
  }
  SlowlyVaryingFn l;
  l.kind_ = Kind::Table;
  l.table_ = std::move(points);
  return l;
}

SlowlyVaryingFn SlowlyVaryingFn::from_json(const nlohmann::json& spec) {
  if (!spec.is_object() || !spec.contains("kind")) throw ConfigError("phi.l must be an object with a \"kind\"");
  const std::string kind = spec.at("kind").get<std::string>();
  std::vector<double> p;
  if (spec.contains("params")) p = spec.at("params").get<std::vector<double>>();
  auto need = [&](std::size_t n) {
    if (p.size() != n) throw ConfigError("phi.l.params: kind " + kind + " takes " + std::to_string(n) + " parameter(s)");
  };
  if (kind == "const") {
    need(1);
    return constant(p[0]);
  }
  if (kind == "logpow") {
    need(1);
    return logpow(p[0]);
  }
  if (kind == "iterlog") {
    need(1);
    return iterlog(p[0]);
  }
  if (kind == "table") {
    if (p.empty() || p.size() % 2) throw ConfigError("phi.l.params: table takes pairs x0, v0, x1, v1, ...");
    std::vector<std::pair<double, double>> pts;
    for (std::size_t i = 0; i < p.size(); i += 2) pts.emplace_back(p[i], p[i + 1]);
    return table(std::move(pts));
  }
  throw ConfigError("phi.l.kind must be one of const, logpow, iterlog, table (got \"" + kind + "\")");
}

double SlowlyVaryingFn::operator()(double x) const {
  switch (kind_) {
    case Kind::Const: return param_;
    case Kind::LogPow: return std::pow(std::log(kE + x), param_);
    case Kind::IterLog: return std::pow(std::log(std::log(std::exp(kE) + x)), param_);
    case Kind::Table: {
      if (x <= table_.front().first) return table_.front().second;
      if (x >= table_.back().first) return table_.back().second;
      auto it = std::upper_bound(table_.begin(), table_.end(), x, [](double v, const auto& e) { return v < e.first; });
      const auto& [x1, v1] = *it;
      const auto& [x0, v0] = *std::prev(it);
      return v0 + (v1 - v0) * (x - x0) / (x1 - x0);
    }
  }
  return 1.0;
}

nlohmann::json SlowlyVaryingFn::to_json() const {
  static const char* names[] = {"const", "logpow", "iterlog", "table"};
  nlohmann::json params = nlohmann::json::array();
  if (kind_ == Kind::Table) {
    for (const auto& [x, v] : table_) {
      params.push_back(x);
      params.push_back(v);
    }
  } else {
    params.push_back(param_);
  }
  return {{"kind", names[static_cast<int>(kind_)]}, {"params", params}};
}

double SlowlyVaryingFn::index_statistic(double x) const {
  double worst = 0.0;
  for (double lambda : {2.0, 4.0}) worst = std::max(worst, std::fabs(std::log((*this)(lambda * x) / (*this)(x)) / std::log(lambda)));
  return worst;
}

SlowVariationCheck check_slowly_varying(const SlowlyVaryingFn& l, int k_min, int k_max) {
  SlowVariationCheck c;
  for (int k = -16; k <= 4 * k_max; ++k) {
    const double x = k == -16 ? 0.0 : std::exp2(k / 4.0);
    const double v = l(x);
    if (!(v > 0.0) || !std::isfinite(v)) c.positive = false;
  }
  for (int k = k_min; k <= k_max; ++k) c.statistic.push_back(l.index_statistic(std::exp2(k)));
  for (std::size_t i = 1; i < c.statistic.size(); ++i)
    if (c.statistic[i] > c.statistic[i - 1] + 1e-12) c.statistic_decreasing = false;
  return c;
}

// ---------------------------------------------------------------------------

RegVaryingFn::RegVaryingFn(double beta, SlowlyVaryingFn l) : beta_(beta), l_(std::move(l)) {
  if (!(beta > 0.0 && beta < 2.0)) throw ConfigError("beta must lie in (0,2), got " + std::to_string(beta));
}

double RegVaryingFn::operator()(double x) const {
  if (is_pure_power()) return std::pow(1.0 + x, beta_);
  return std::pow((1.0 + x) * l_(x), beta_);
}

double de_bruijn_residual(const SlowlyVaryingFn& l, double x, double y) { return std::fabs(l(x * y) * y - 1.0); }

double de_bruijn_conjugate(const SlowlyVaryingFn& l, double x, const DeBruijnOptions& opt) {
  if (!(x >= opt.x_min)) throw PreconditionError("de Bruijn conjugate needs x >= x_min = " + std::to_string(opt.x_min));
  if (!(opt.tol > 0.0)) throw PreconditionError("de Bruijn tolerance must be positive");
  if (l.is_constant()) return 1.0 / l.constant_value();
  double y = 1.0 / l(x);
  for (int it = 0; it < opt.max_iter; ++it) {
    const double next = 1.0 / l(x * y);
    const bool done = std::fabs(next - y) <= opt.tol * y;
    y = next;
    if (done) {
      const double res = de_bruijn_residual(l, x, y);
      if (res > 10.0 * opt.tol) throw ConvergenceError("de Bruijn iteration stalled with residual above 10 tol", y, res);
      return y;
    }
  }
  throw ConvergenceError("de Bruijn iteration did not converge in " + std::to_string(opt.max_iter) + " iterations", y,
                         de_bruijn_residual(l, x, y));
}

// ---------------------------------------------------------------------------

ConcaveTransform::ConcaveTransform(RegVaryingFn phi, double delta, double A)
    : phi_(std::move(phi)), delta_(delta), rho_(phi_.beta() / delta), A_(A) {
  if (!(delta > phi_.beta() && delta < 2.0)) throw PreconditionError("delta must lie in (beta, 2)");
  if (!(A > 0.0)) throw PreconditionError("breakpoint parameter A must be positive");
  norm_ = integrate_bump([this](double u) { return std::exp(rho_ * u) * bump(u); });
  const double a1 = A_ + 1.0;
  B_ = (A_ + 2.0) * f1_prime(a1);
  g_break_ = B_ + f1(a1);
  slope_ = g_break_ / a1;
}

double ConcaveTransform::f(double x) const { return std::pow(phi_(x), 1.0 / delta_); }

double ConcaveTransform::smooth(double x, int order) const {
  if (order == 0) return integrate_bump([&](double u) { return f(x * std::exp(u)) * bump(u); }) / norm_;
  return -integrate_bump([&](double u) { return f(x * std::exp(u)) * bump_prime(u); }) / (x * norm_);
}

double ConcaveTransform::f1(double x) const { return smooth(x, 0); }
double ConcaveTransform::f1_prime(double x) const { return smooth(x, 1); }

double ConcaveTransform::value(double x) const {
  if (x <= A_ + 1.0) return x * slope_;
  return B_ + f1(x);
}

double ConcaveTransform::derivative(double x) const {
  if (x <= A_ + 1.0) return slope_;
  return f1_prime(x);
}

double ConcaveTransform::inverse(double y) const {
  if (!(y >= 0.0) || !std::isfinite(y)) throw PreconditionError("inverse_transform needs finite y >= 0");
  if (y <= g_break_) return y / slope_;
  double lo = A_ + 1.0, hi = 2.0 * lo;
  while (value(hi) < y) {
    lo = hi;
    hi *= 2.0;
  }
  const double tol = 1e-12 * std::max(1.0, y);
  double x = 0.5 * (lo + hi);
  for (int it = 0; it < 200; ++it) {
    const double r = value(x) - y;
    if (std::fabs(r) <= tol) return x;
    if (r < 0.0) {
      lo = x;
    } else {
      hi = x;
    }
    if (hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * hi) return x;
    const double newton = x - r / derivative(x);
    x = (newton > lo && newton < hi) ? newton : 0.5 * (lo + hi);
  }
  return x;
}

bool ConcaveTransform::tail_concave_on_grid(double* worst_excess) const {
  const double a1 = A_ + 1.0;
  std::vector<double> xs;
  for (int j = 0; j <= 16; ++j) xs.push_back(a1 * (1.0 + j / 16.0));
  for (double x = 2.0 * a1 * std::exp2(1.0 / 8.0); x < std::exp2(44.0); x *= std::exp2(1.0 / 8.0)) xs.push_back(x);
  std::vector<double> gs;
  for (double x : xs) gs.push_back(value(x));
  double prev_slope = slope_;
  double worst = 0.0;
  for (std::size_t i = 1; i < xs.size(); ++i) {
    const double s = (gs[i] - gs[i - 1]) / (xs[i] - xs[i - 1]);
    worst = std::max(worst, (s - prev_slope) / std::fabs(prev_slope));
    prev_slope = s;
  }
  if (worst_excess) *worst_excess = worst;
  return worst <= 1e-10;
}

namespace {

ConcaveCertificate certify(const ConcaveTransform& g) {
  ConcaveCertificate c;
  std::vector<double> xs{0.0};
  for (int j = -32; j <= 320; ++j) xs.push_back(std::exp2(j / 8.0));
  for (int k = 1; k <= 64; ++k) xs.push_back(k);
  xs.push_back(g.breakpoint());
  std::sort(xs.begin(), xs.end());
  xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
  std::ostringstream grid;
  grid << "{0} U 2^{j/8}, j=-32..320 U {1..64} U {A+1}, " << xs.size() << " points";
  c.grid = grid.str();

  std::vector<double> gs;
  for (double x : xs) gs.push_back(g.value(x));
  c.g0_zero = g.value(0.0) == 0.0;
  c.monotone = true;
  c.concave = true;
  double prev_slope = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < xs.size(); ++i) {
    if (!(gs[i] > gs[i - 1])) c.monotone = false;
    const double s = (gs[i] - gs[i - 1]) / (xs[i] - xs[i - 1]);
    if (std::isfinite(prev_slope)) {
      const double excess = (s - prev_slope) / std::fabs(prev_slope);
      c.worst_concavity_excess = std::max(c.worst_concavity_excess, excess);
      if (excess > 1e-10) c.concave = false;
    }
    prev_slope = s;
  }
  c.ratio_constant = 1.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double r = (1.0 + gs[i]) / g.f(xs[i]);
    c.ratio_constant = std::max({c.ratio_constant, r, 1.0 / r});
  }
  c.tail_ratio_min = std::numeric_limits<double>::infinity();
  c.tail_ratio_max = 0.0;
  for (int k = 20; k <= 40; ++k) {
    const double x = std::exp2(k);
    const double r = g.value(x) / g.f(x);
    c.tail_ratio_min = std::min(c.tail_ratio_min, r);
    c.tail_ratio_max = std::max(c.tail_ratio_max, r);
  }
  c.subadditive = true;
  for (std::size_t i = 0; i < xs.size(); i += 4) {
    for (std::size_t j = i; j < xs.size(); j += 4) {
      const double lhs = g.value(xs[i] + xs[j]);
      if (lhs > (gs[i] + gs[j]) * (1.0 + 1e-12)) c.subadditive = false;
    }
  }
  return c;
}

}  // namespace

std::shared_ptr<ConcaveTransform> concave_regularize(const RegVaryingFn& phi, double delta) {
  if (!(delta > phi.beta() && delta < 2.0)) throw PreconditionError("delta must lie in (beta, 2)");
  double best_excess = std::numeric_limits<double>::infinity();
  for (int k = 0; k <= 30; ++k) {
    auto g = std::make_shared<ConcaveTransform>(phi, delta, std::exp2(k));
    double excess = 0.0;
    if (g->tail_concave_on_grid(&excess)) {
      g->set_certificate(certify(*g));
      return g;
    }
    best_excess = std::min(best_excess, excess);
  }
  std::ostringstream os;
  os << "no A in 2^0..2^30 yields a concave tail (smallest slope excess " << best_excess << ")";
  throw CertificationError(os.str());
}

MetricMeasureSpace transform_space(const MetricMeasureSpace& space, std::shared_ptr<const ConcaveTransform> g) {
  return MetricMeasureSpace::transformed(std::make_shared<MetricMeasureSpace>(space), std::move(g));
}

nlohmann::json to_json(const ConcaveCertificate& c) {
  return {{"g0_zero", c.g0_zero},
          {"monotone", c.monotone},
          {"concave", c.concave},
          {"subadditive", c.subadditive},
          {"ratio_constant", c.ratio_constant},
          {"tail_ratio_min", c.tail_ratio_min},
          {"tail_ratio_max", c.tail_ratio_max},
          {"worst_concavity_excess", c.worst_concavity_excess},
          {"grid", c.grid},
          {"verdict", c.pass() ? "PASS" : "FAIL"}};
}

}  // namespace lrw
