#pragma once

// Power-law relaxation fits and cross-sectional exponent statistics.

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "spreadlab/errors.hpp"
#include "spreadlab/spread.hpp"

namespace spreadlab {

/// Inclusive 1-based range of intraday bins.
struct TauRange {
  int min = 1;
  int max = 120;

  std::size_t size() const noexcept { return static_cast<std::size_t>(max - min + 1); }
};

inline constexpr TauRange kMarketTauRange{1, 120};
inline constexpr TauRange kStockTauRange{1, 80};

/// Log-log OLS fit of S(tau) = amplitude * tau^(-beta).
struct PowerLawFit {
  double beta = 0.0;
  double amplitude = 0.0;  // fitted value at tau = 1
  double beta_stderr = 0.0;
  double t_statistic = 0.0;  // beta / stderr; +-infinity for an exact fit
  int dof = 0;
  TauRange range;
  double residual_variance = 0.0;  // RSS / dof in log space
};

/// Thrown when the profile holds values that cannot be log-transformed.
class NonPositiveProfile : public DegenerateInput {
 public:
  NonPositiveProfile(std::vector<int> taus)
      : DegenerateInput(make_message(taus)), taus_(std::move(taus)) {}
  const std::vector<int>& taus() const noexcept { return taus_; }

 private:
  static std::string make_message(const std::vector<int>& taus) {
    std::string msg = "fit_power_law: non-positive profile value at tau =";
    for (std::size_t i = 0; i < taus.size() && i < 20; ++i) msg += " " + std::to_string(taus[i]);
    if (taus.size() > 20) msg += " ...";
    return msg;
  }
  std::vector<int> taus_;
};

inline PowerLawFit fit_power_law(std::span<const double> profile, TauRange range) {
  if (range.min < 1 || range.max > static_cast<int>(profile.size()) || range.max < range.min)
    throw InvalidArgument("fit_power_law: range [" + std::to_string(range.min) + ", " +
                          std::to_string(range.max) + "] outside the profile");
  if (range.size() < 3) throw DegenerateInput("fit_power_law: need at least 3 points");

  std::vector<int> bad;
  for (int tau = range.min; tau <= range.max; ++tau)
    if (!(profile[static_cast<std::size_t>(tau - 1)] > 0.0)) bad.push_back(tau);
  if (!bad.empty()) throw NonPositiveProfile(std::move(bad));

  const std::size_t n = range.size();
  std::vector<double> x(n), y(n);
  double mean_x = 0.0, mean_y = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const int tau = range.min + static_cast<int>(i);
    x[i] = std::log(static_cast<double>(tau));
    y[i] = std::log(profile[static_cast<std::size_t>(tau - 1)]);
    mean_x += x[i];
    mean_y += y[i];
  }
  mean_x /= static_cast<double>(n);
  mean_y /= static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mean_x) * (x[i] - mean_x);
    sxy += (x[i] - mean_x) * (y[i] - mean_y);
  }
  const double slope = sxy / sxx;
  const double intercept = mean_y - slope * mean_x;
  double rss = 0.0;
  double y_scale = 1.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = y[i] - (intercept + slope * x[i]);
    rss += r * r;
    y_scale = std::max(y_scale, std::abs(y[i]));
  }
  // Residuals at rounding level mean the profile is an exact power law.
  if (std::sqrt(rss / static_cast<double>(n)) <= 64.0 * std::numeric_limits<double>::epsilon() * y_scale)
    rss = 0.0;

  PowerLawFit fit;
  fit.range = range;
  fit.dof = static_cast<int>(n) - 2;
  fit.beta = -slope;
  fit.amplitude = std::exp(intercept);
  fit.residual_variance = rss / fit.dof;
  fit.beta_stderr = std::sqrt(fit.residual_variance / sxx);
  if (fit.beta_stderr > 0.0)
    fit.t_statistic = fit.beta / fit.beta_stderr;
  else
    fit.t_statistic = fit.beta == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), fit.beta);
  return fit;
}

inline PowerLawFit fit_power_law(const IntradayProfile& profile, TauRange range) {
  return fit_power_law(std::span<const double>(profile.values), range);
}

/// Student-t quantile t_q(dof): P(T <= t) = q.
inline double student_t_quantile(double q, int dof) {
  if (!(q > 0.0 && q < 1.0)) throw InvalidArgument("student_t_quantile: q must be in (0, 1)");
  if (dof < 1) throw InvalidArgument("student_t_quantile: dof must be >= 1");
  return boost::math::quantile(boost::math::students_t(dof), q);
}

inline double chi_squared_quantile(double q, int dof) {
  if (!(q > 0.0 && q < 1.0)) throw InvalidArgument("chi_squared_quantile: q must be in (0, 1)");
  if (dof < 1) throw InvalidArgument("chi_squared_quantile: dof must be >= 1");
  return boost::math::quantile(boost::math::chi_squared(dof), q);
}

struct TTestResult {
  double t_abs = 0.0;
  double critical = 0.0;
  int dof = 0;
  bool reject_zero_slope = false;
};

/// Compares |beta / stderr| with t_q(dof). An exact fit (stderr 0) always rejects
/// the zero-slope null unless beta itself is zero.
inline TTestResult regression_t_test(const PowerLawFit& fit, double quantile = 0.99995) {
  TTestResult r;
  r.dof = fit.dof;
  r.critical = student_t_quantile(quantile, fit.dof);
  r.t_abs = std::abs(fit.t_statistic);
  r.reject_zero_slope = r.t_abs > r.critical;
  return r;
}

struct Moments {
  double mean = 0.0;
  double stddev = 0.0;    // n - 1 denominator
  double skewness = 0.0;  // m3 / m2^1.5
  double kurtosis = 0.0;  // m4 / m2^2, non-excess
};

inline Moments exponent_moments(std::span<const double> values) {
  const std::size_t n = values.size();
  if (n < 2) throw DegenerateInput("exponent_moments: need at least 2 values");
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(n);
  double m2 = 0.0, m3 = 0.0, m4 = 0.0;
  for (double v : values) {
    const double d = v - mean;
    const double d2 = d * d;
    m2 += d2;
    m3 += d2 * d;
    m4 += d2 * d2;
  }
  const double scale = std::max(std::abs(mean), 1e-300);
  if (!(m2 > 0.0) || std::sqrt(m2 / static_cast<double>(n)) <= 1e-14 * scale)
    throw DegenerateInput("exponent_moments: zero variance");
  Moments m;
  m.mean = mean;
  m.stddev = std::sqrt(m2 / static_cast<double>(n - 1));
  m2 /= static_cast<double>(n);
  m3 /= static_cast<double>(n);
  m4 /= static_cast<double>(n);
  m.skewness = m3 / std::pow(m2, 1.5);
  m.kurtosis = m4 / (m2 * m2);
  return m;
}

struct Chi2Result {
  std::size_t n = 0;
  double mean = 0.0;
  double stddev = 0.0;
  double chi2 = 0.0;
  int bins = 0;
  int dof = 0;
  double level = 0.0;
  double critical = 0.0;
  bool rejected = false;
  std::vector<double> edges;  // interior bin edges, size bins - 1
  std::vector<std::size_t> observed;
  double expected = 0.0;  // per bin
};

/// Chi-square goodness of fit against N(mean, stddev^2) estimated from the sample,
/// using `bins` equal-probability bins and dof = bins - 3.
inline Chi2Result chi2_normality(std::span<const double> values, int bins = 100,
                                 double level = 0.99) {
  if (bins < 4) throw InvalidArgument("chi2_normality: need at least 4 bins");
  if (!(level > 0.0 && level < 1.0)) throw InvalidArgument("chi2_normality: level must be in (0, 1)");
  const Moments m = exponent_moments(values);
  Chi2Result r;
  r.n = values.size();
  r.mean = m.mean;
  r.stddev = m.stddev;
  r.bins = bins;
  r.dof = bins - 3;
  r.level = level;
  r.expected = static_cast<double>(r.n) / bins;
  if (r.expected < 1.0)
    throw DegenerateInput("chi2_normality: expected count per bin " + std::to_string(r.expected) +
                          " < 1; use fewer bins");

  const boost::math::normal fitted(m.mean, m.stddev);
  r.edges.resize(static_cast<std::size_t>(bins - 1));
  for (int k = 1; k < bins; ++k)
    r.edges[static_cast<std::size_t>(k - 1)] =
        boost::math::quantile(fitted, static_cast<double>(k) / bins);
  r.observed.assign(static_cast<std::size_t>(bins), 0);
  for (double v : values) {
    const auto bin = std::upper_bound(r.edges.begin(), r.edges.end(), v) - r.edges.begin();
    ++r.observed[static_cast<std::size_t>(bin)];
  }
  for (std::size_t count : r.observed) {
    const double d = static_cast<double>(count) - r.expected;
    r.chi2 += d * d / r.expected;
  }
  r.critical = chi_squared_quantile(level, r.dof);
  r.rejected = !(r.chi2 < r.critical);
  return r;
}

struct HistogramBin {
  double center = 0.0;
  std::size_t count = 0;
  double fitted_density = 0.0;  // N(mean, sd^2) density at the center
};

/// Equal-width histogram with the fitted normal density, for plotting.
inline std::vector<HistogramBin> exponent_histogram(std::span<const double> values, int bins = 30) {
  if (bins < 1) throw InvalidArgument("exponent_histogram: bins must be >= 1");
  const Moments m = exponent_moments(values);
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *lo_it;
  const double width = (*hi_it - lo) / bins;
  const boost::math::normal fitted(m.mean, m.stddev);
  std::vector<HistogramBin> out(static_cast<std::size_t>(bins));
  for (int b = 0; b < bins; ++b) {
    out[static_cast<std::size_t>(b)].center = lo + (b + 0.5) * width;
    out[static_cast<std::size_t>(b)].fitted_density =
        boost::math::pdf(fitted, out[static_cast<std::size_t>(b)].center);
  }
  for (double v : values) {
    auto b = static_cast<int>((v - lo) / width);
    b = std::clamp(b, 0, bins - 1);
    ++out[static_cast<std::size_t>(b)].count;
  }
  return out;
}

enum class RelaxationLabel { endogenous, exogenous, indeterminate };

inline const char* to_string(RelaxationLabel label) noexcept {
  switch (label) {
    case RelaxationLabel::endogenous: return "endogenous";
    case RelaxationLabel::exogenous: return "exogenous";
    case RelaxationLabel::indeterminate: return "indeterminate";
  }
  return "indeterminate";
}

struct RelaxationClass {
  double beta = 0.0;
  double theta_endogenous = 0.0;  // (1 - beta) / 2
  double theta_exogenous = 0.0;   // 1 - beta
  RelaxationLabel label = RelaxationLabel::indeterminate;
  double theta_reference = 0.4;
  double tolerance = 0.1;
};

/// Reads a relaxation exponent beta as decay ~ tau^-(1 - 2 theta) (endogenous) or
/// ~ tau^-(1 - theta) (exogenous) and labels it by whichever theta lies closer to
/// the reference value, provided it is within `tolerance`.
inline RelaxationClass classify_relaxation(double beta, double theta_reference = 0.4,
                                           double tolerance = 0.1) {
  if (!std::isfinite(beta)) throw InvalidArgument("classify_relaxation: beta must be finite");
  RelaxationClass c;
  c.beta = beta;
  c.theta_reference = theta_reference;
  c.tolerance = tolerance;
  c.theta_endogenous = (1.0 - beta) / 2.0;
  c.theta_exogenous = 1.0 - beta;
  const double d_endo = std::abs(c.theta_endogenous - theta_reference);
  const double d_exo = std::abs(c.theta_exogenous - theta_reference);
  if (d_endo < d_exo && d_endo <= tolerance)
    c.label = RelaxationLabel::endogenous;
  else if (d_exo < d_endo && d_exo <= tolerance)
    c.label = RelaxationLabel::exogenous;
  return c;
}

}  // namespace spreadlab
