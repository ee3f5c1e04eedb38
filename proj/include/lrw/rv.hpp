#pragma once

#include <cmath>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "lrw/space.hpp"

namespace lrw {

/// Slowly varying function l used in phi(x) = ((1 + x) l(x))^beta.
class SlowlyVaryingFn {
 public:
  enum class Kind { Const, LogPow, IterLog, Table };

  static SlowlyVaryingFn constant(double c);
  /// (log(e + x))^a
  static SlowlyVaryingFn logpow(double a);
  /// (log(log(e^e + x)))^a
  static SlowlyVaryingFn iterlog(double a);
  /// Piecewise linear through (x_i, v_i), constant outside the table.
  static SlowlyVaryingFn table(std::vector<std::pair<double, double>> points);
  /// {"kind": "const"|"logpow"|"iterlog"|"table", "params": [...]}
  static SlowlyVaryingFn from_json(const nlohmann::json& spec);

  double operator()(double x) const;
  Kind kind() const noexcept { return kind_; }
  bool is_constant() const noexcept { return kind_ == Kind::Const; }
  double constant_value() const noexcept { return param_; }
  nlohmann::json to_json() const;

  /// max over lambda in {2, 4} of |log(l(lambda x) / l(x)) / log(lambda)|.
  double index_statistic(double x) const;

 private:
  Kind kind_ = Kind::Const;
  double param_ = 1.0;
  std::vector<std::pair<double, double>> table_;
};

struct SlowVariationCheck {
  bool positive = true;
  bool statistic_decreasing = true;
  std::vector<double> statistic;  // along x = 2^k
  bool pass() const noexcept { return positive && statistic_decreasing; }
};

/// Positivity on a sampled grid and a nonincreasing index statistic along
/// x = 2^k for k in [k_min, k_max].
SlowVariationCheck check_slowly_varying(const SlowlyVaryingFn& l, int k_min = 4, int k_max = 40);

/// phi(x) = ((1 + x) l(x))^beta with beta in (0, 2).
class RegVaryingFn {
 public:
  RegVaryingFn(double beta, SlowlyVaryingFn l);
  static RegVaryingFn pure_power(double beta) { return {beta, SlowlyVaryingFn::constant(1.0)}; }

  double operator()(double x) const;
  double beta() const noexcept { return beta_; }
  const SlowlyVaryingFn& slowly_varying() const noexcept { return l_; }
  bool is_pure_power() const noexcept { return l_.is_constant() && l_.constant_value() == 1.0; }

 private:
  double beta_;
  SlowlyVaryingFn l_;
};

inline double eval_phi(const RegVaryingFn& phi, double x) { return phi(x); }

struct DeBruijnOptions {
  double tol = 1e-10;
  int max_iter = 200;
  double x_min = 10.0;
};

/// Fixed point of y -> 1 / l(x y) started from y_0 = 1 / l(x). Throws
/// ConvergenceError after max_iter iterations, PreconditionError for x < x_min.
double de_bruijn_conjugate(const SlowlyVaryingFn& l, double x, const DeBruijnOptions& opt = {});

/// |l(x y) y - 1|
double de_bruijn_residual(const SlowlyVaryingFn& l, double x, double y);

struct ConcaveCertificate {
  bool g0_zero = false;
  bool monotone = false;
  bool concave = false;
  bool subadditive = false;
  double ratio_constant = 0.0;  // C with C^-1 <= (1 + g) / f <= C on the grid
  double tail_ratio_min = 0.0;  // g(2^k) / f(2^k), k >= 20
  double tail_ratio_max = 0.0;
  double worst_concavity_excess = 0.0;
  std::string grid;
  bool pass() const noexcept {
    return g0_zero && monotone && concave && subadditive && std::isfinite(ratio_constant) && ratio_constant > 0.0;
  }
};

/// Concave strictly increasing g with g(0) = 0 and g ~ f = phi^{1/delta}:
/// linear on [0, A + 1], B + f_1 beyond, where f_1 is f smoothed on a log scale.
class ConcaveTransform final : public MetricTransform {
 public:
  ConcaveTransform(RegVaryingFn phi, double delta, double A);

  double value(double x) const override;
  double inverse(double y) const override;
  double derivative(double x) const;

  double f(double x) const;    // phi(x)^{1/delta}
  double f1(double x) const;   // smoothed f
  double f1_prime(double x) const;

  double delta() const noexcept { return delta_; }
  double rho() const noexcept { return rho_; }
  double A() const noexcept { return A_; }
  double breakpoint() const noexcept { return A_ + 1.0; }
  double slope() const noexcept { return slope_; }
  double shift() const noexcept { return B_; }
  const RegVaryingFn& phi() const noexcept { return phi_; }
  const ConcaveCertificate& certificate() const noexcept { return cert_; }
  void set_certificate(ConcaveCertificate c) { cert_ = std::move(c); }

  /// Slopes between consecutive grid points beyond A + 1 are nonincreasing.
  bool tail_concave_on_grid(double* worst_excess = nullptr) const;

 private:
  double smooth(double x, int order) const;

  RegVaryingFn phi_;
  double delta_;
  double rho_;
  double A_;
  double norm_ = 1.0;
  double B_ = 0.0;
  double slope_ = 1.0;
  double g_break_ = 0.0;
  ConcaveCertificate cert_;
};

/// Scans A over 2^0 .. 2^30 for the first tail-concave construction and
/// certifies it. Throws CertificationError when no A works.
std::shared_ptr<ConcaveTransform> concave_regularize(const RegVaryingFn& phi, double delta);

/// x with |g(x) - y| <= 1e-12 max(1, y).
inline double inverse_transform(const ConcaveTransform& g, double y) { return g.inverse(y); }

MetricMeasureSpace transform_space(const MetricMeasureSpace& space, std::shared_ptr<const ConcaveTransform> g);

nlohmann::json to_json(const ConcaveCertificate& c);

}  // namespace lrw
