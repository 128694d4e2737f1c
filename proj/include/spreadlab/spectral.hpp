#pragma once

// Normalized Lomb periodogram, peak significance and harmonic-ladder fitting.
//
// P_N(f) = 1/(2 s^2) * { [sum h_j cos w(t_j - tau)]^2 / sum cos^2 w(t_j - tau)
//                       + [sum h_j sin w(t_j - tau)]^2 / sum sin^2 w(t_j - tau) }
// with h_j = y_j - mean(y), s^2 the sample variance, w = 2 pi f and
// tan(2 w tau) = sum sin(2 w t_j) / sum cos(2 w t_j).

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <memory>
#include <mutex>
#include <numbers>
#include <numeric>
#include <span>
#include <vector>

#include "spreadlab/errors.hpp"
#include "spreadlab/parallel.hpp"

namespace spreadlab {

/// Strictly increasing positive frequencies, in cycles per unit of sample time.
///
/// Grids from default_freq_grid also record that frequencies[k] = (first_multiple + k) *
/// step, which enables the exact FFT evaluation for integer sample times.
struct FrequencyGrid {
  std::vector<double> frequencies;
  double oversample = 1.0;
  double step = 0.0;
  std::size_t first_multiple = 0;

  std::size_t size() const noexcept { return frequencies.size(); }
  bool empty() const noexcept { return frequencies.empty(); }
  bool is_uniform() const noexcept { return step > 0.0 && first_multiple > 0; }
};

/// Oversampled grid from 1/(oversample*span) up to hi_factor*n/(2*span).
inline FrequencyGrid default_freq_grid(std::size_t n_samples, double time_span,
                                       double oversample = 4.0, double hi_factor = 1.0) {
  if (n_samples < 2) throw InvalidArgument("frequency grid: need at least 2 samples");
  if (!(time_span > 0.0)) throw InvalidArgument("frequency grid: time span must be positive");
  if (!(oversample >= 1.0)) throw InvalidArgument("frequency grid: oversample must be >= 1");
  if (!(hi_factor > 0.0)) throw InvalidArgument("frequency grid: hi_factor must be positive");
  FrequencyGrid grid;
  grid.oversample = oversample;
  grid.step = 1.0 / (oversample * time_span);
  grid.first_multiple = 1;
  const double f_max = hi_factor * static_cast<double>(n_samples) / (2.0 * time_span);
  const auto count = static_cast<std::size_t>(std::floor(f_max / grid.step + 1e-9));
  if (count == 0) throw InvalidArgument("frequency grid: upper limit below the first step");
  grid.frequencies.resize(count);
  for (std::size_t k = 0; k < count; ++k)
    grid.frequencies[k] = static_cast<double>(k + 1) * grid.step;
  return grid;
}

/// Wraps an arbitrary frequency list; only the direct evaluation path applies.
inline FrequencyGrid make_frequency_grid(std::vector<double> frequencies, double oversample = 1.0) {
  if (frequencies.empty()) throw InvalidArgument("frequency grid: empty");
  for (std::size_t k = 0; k < frequencies.size(); ++k) {
    if (!(frequencies[k] > 0.0) || !std::isfinite(frequencies[k]))
      throw InvalidArgument("frequency grid: frequencies must be positive and finite");
    if (k > 0 && !(frequencies[k] > frequencies[k - 1]))
      throw InvalidArgument("frequency grid: frequencies must be strictly increasing");
  }
  FrequencyGrid grid;
  grid.frequencies = std::move(frequencies);
  grid.oversample = oversample;
  return grid;
}

struct Periodogram {
  std::vector<double> frequencies;
  std::vector<double> powers;
  std::size_t n_samples = 0;
  double oversample = 1.0;
  /// Number of independent frequencies used for false-alarm probabilities.
  double m_independent = 1.0;

  std::size_t size() const noexcept { return frequencies.size(); }
};

enum class LombMethod { automatic, direct, fft };

struct LombOptions {
  LombMethod method = LombMethod::automatic;
  unsigned threads = 0;
  /// Overrides the default M = grid size / oversample when positive.
  double m_independent = 0.0;
};

namespace detail {

struct LombInput {
  std::vector<double> times;  // shifted so the first sample sits at 0
  std::vector<double> centered;
  double variance = 0.0;
};

inline LombInput prepare_lomb_input(std::span<const double> times, std::span<const double> values) {
  if (times.size() != values.size())
    throw InvalidArgument("lomb_power: times and values differ in length");
  if (times.size() < 2) throw DegenerateInput("lomb_power: need at least 2 samples");
  LombInput in;
  const std::size_t n = values.size();
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(n);
  in.centered.resize(n);
  in.times.resize(n);
  double ss = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    in.centered[j] = values[j] - mean;
    ss += in.centered[j] * in.centered[j];
    in.times[j] = times[j] - times[0];
    if (!std::isfinite(times[j]) || !std::isfinite(values[j]))
      throw InvalidArgument("lomb_power: non-finite sample");
  }
  in.variance = ss / static_cast<double>(n - 1);
  const double scale = std::max(std::abs(mean), std::sqrt(ss / static_cast<double>(n)));
  if (!(in.variance > 0.0) || std::sqrt(in.variance) <= 1e-14 * scale)
    throw DegenerateInput("lomb_power: constant series (zero variance)");
  return in;
}

// Power from the four sums at one frequency, with tau chosen from (c2, s2).
inline double lomb_from_sums(double n, double variance, double c2, double s2, double yc,
                             double ys) noexcept {
  const double r = std::hypot(c2, s2);
  double cos2 = 1.0, sin2 = 0.0;
  if (r > 0.0) {
    cos2 = c2 / r;
    sin2 = s2 / r;
  }
  const double cos_wt = std::sqrt(std::max(0.0, 0.5 * (1.0 + cos2)));
  const double sin_wt = std::copysign(std::sqrt(std::max(0.0, 0.5 * (1.0 - cos2))), sin2);
  const double proj_c = yc * cos_wt + ys * sin_wt;
  const double proj_s = ys * cos_wt - yc * sin_wt;
  const double den_c = 0.5 * (n + r);
  const double den_s = 0.5 * (n - r);
  const double floor = 1e-12 * n;
  double p = 0.0;
  if (den_c > floor) p += proj_c * proj_c / den_c;
  if (den_s > floor) p += proj_s * proj_s / den_s;
  return p / (2.0 * variance);
}

inline double lomb_direct_at(const LombInput& in, double f) noexcept {
  const double w = 2.0 * std::numbers::pi * f;
  const std::size_t n = in.times.size();
  double c2 = 0.0, s2 = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const double a = 2.0 * w * in.times[j];
    c2 += std::cos(a);
    s2 += std::sin(a);
  }
  const double tau = std::atan2(s2, c2) / (2.0 * w);
  double yc = 0.0, ys = 0.0, cc = 0.0, ss = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const double a = w * (in.times[j] - tau);
    const double c = std::cos(a);
    const double s = std::sin(a);
    yc += in.centered[j] * c;
    ys += in.centered[j] * s;
    cc += c * c;
    ss += s * s;
  }
  const double floor = 1e-12 * static_cast<double>(n);
  double p = 0.0;
  if (cc > floor) p += yc * yc / cc;
  if (ss > floor) p += ys * ys / ss;
  return p / (2.0 * in.variance);
}

struct FftwDeleter {
  void operator()(void* p) const noexcept { fftw_free(p); }
};

inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

// Real-to-complex DFT X[k] = sum_p x[p] exp(-2 pi i k p / L), k = 0..L/2.
inline std::vector<std::complex<double>> real_dft(const std::vector<double>& x) {
  const auto len = x.size();
  std::unique_ptr<double, FftwDeleter> in(fftw_alloc_real(len));
  std::unique_ptr<fftw_complex, FftwDeleter> out(fftw_alloc_complex(len / 2 + 1));
  fftw_plan plan;
  {
    std::lock_guard lock(fftw_planner_mutex());
    plan = fftw_plan_dft_r2c_1d(static_cast<int>(len), in.get(), out.get(), FFTW_ESTIMATE);
  }
  std::copy(x.begin(), x.end(), in.get());
  fftw_execute(plan);
  std::vector<std::complex<double>> result(len / 2 + 1);
  for (std::size_t k = 0; k < result.size(); ++k)
    result[k] = {out.get()[k][0], out.get()[k][1]};
  {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(plan);
  }
  return result;
}

inline std::complex<double> dft_at(const std::vector<std::complex<double>>& half, std::size_t len,
                                   std::size_t k) noexcept {
  k %= len;
  return k <= len / 2 ? half[k] : std::conj(half[len - k]);
}

// The grid written as frequencies[k] = multiplier * (first_multiple + k) / period with an
// integer period, or period 0 when the FFT path does not apply.
struct FftLayout {
  std::size_t period = 0;
  std::size_t multiplier = 1;
};

inline FftLayout fft_layout(const LombInput& in, const FrequencyGrid& grid) noexcept {
  if (!grid.is_uniform()) return {};
  for (double t : in.times)
    if (std::abs(t - std::round(t)) > 1e-9) return {};
  for (std::size_t q = 1; q <= 16; ++q) {
    const double period = static_cast<double>(q) / grid.step;
    const double rounded = std::round(period);
    if (rounded > 1e9) return {};
    if (rounded >= 2.0 && std::abs(period - rounded) <= 1e-9 * period)
      return {static_cast<std::size_t>(rounded), q};
  }
  return {};
}

inline void lomb_fft(const LombInput& in, const FrequencyGrid& grid, FftLayout layout,
                     std::span<double> powers) {
  const std::size_t period = layout.period;
  std::vector<double> weights(period, 0.0);
  std::vector<double> deviations(period, 0.0);
  for (std::size_t j = 0; j < in.times.size(); ++j) {
    const auto t = std::llround(in.times[j]);
    const auto p = static_cast<std::size_t>(((t % static_cast<long long>(period)) + static_cast<long long>(period)) %
                                            static_cast<long long>(period));
    weights[p] += 1.0;
    deviations[p] += in.centered[j];
  }
  const auto w_hat = real_dft(weights);
  const auto h_hat = real_dft(deviations);
  const auto n = static_cast<double>(in.times.size());
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const std::size_t m = layout.multiplier * (grid.first_multiple + k);
    const auto w2 = dft_at(w_hat, period, 2 * m);
    const auto h1 = dft_at(h_hat, period, m);
    powers[k] = lomb_from_sums(n, in.variance, w2.real(), -w2.imag(), h1.real(), -h1.imag());
  }
}

}  // namespace detail

/// Normalized Lomb power of (times, values) at every grid frequency.
///
/// The direct path evaluates the defining sums per frequency (O(N*F), parallel over
/// frequencies). The FFT path applies when sample times are integers and the grid is
/// a uniform ladder of q*k/L for integers q and L; it computes the same sums exactly as length-L DFTs.
inline Periodogram lomb_power(std::span<const double> times, std::span<const double> values,
                              const FrequencyGrid& grid, const LombOptions& options = {}) {
  if (grid.empty()) throw InvalidArgument("lomb_power: empty frequency grid");
  const detail::LombInput in = detail::prepare_lomb_input(times, values);

  Periodogram pg;
  pg.frequencies = grid.frequencies;
  pg.powers.assign(grid.size(), 0.0);
  pg.n_samples = values.size();
  pg.oversample = grid.oversample;
  pg.m_independent = options.m_independent > 0.0
                         ? options.m_independent
                         : std::max(1.0, static_cast<double>(grid.size()) / grid.oversample);

  detail::FftLayout layout;
  if (options.method != LombMethod::direct) layout = detail::fft_layout(in, grid);
  if (options.method == LombMethod::fft && layout.period == 0)
    throw InvalidArgument("lomb_power: FFT path needs integer times and a uniform k/L grid");

  if (layout.period > 0) {
    detail::lomb_fft(in, grid, layout, pg.powers);
  } else {
    constexpr std::size_t kChunk = 64;
    const std::size_t chunks = (grid.size() + kChunk - 1) / kChunk;
    parallel_for(chunks, options.threads, [&](std::size_t c) {
      const std::size_t end = std::min(grid.size(), (c + 1) * kChunk);
      for (std::size_t k = c * kChunk; k < end; ++k)
        pg.powers[k] = detail::lomb_direct_at(in, grid.frequencies[k]);
    });
  }
  return pg;
}

/// Sample times (1-based bin index) and values for Lomb analysis of a binned series.
struct LombSamples {
  std::vector<double> times;
  std::vector<double> values;
};

enum class ZeroPolicy {
  omit,  // treat the zero sentinel as a missing observation
  keep,  // literal replication: zeros are observations
};

inline LombSamples lomb_samples(std::span<const double> series, ZeroPolicy policy = ZeroPolicy::omit) {
  LombSamples s;
  s.times.reserve(series.size());
  s.values.reserve(series.size());
  for (std::size_t i = 0; i < series.size(); ++i) {
    if (policy == ZeroPolicy::omit && series[i] == 0.0) continue;
    s.times.push_back(static_cast<double>(i + 1));
    s.values.push_back(series[i]);
  }
  return s;
}

/// False-alarm probability 1 - (1 - exp(-P))^M, stable for large P.
inline double peak_significance(double power, double m_independent) {
  if (!(power >= 0.0)) throw InvalidArgument("peak_significance: power must be >= 0");
  if (!(m_independent >= 1.0)) throw InvalidArgument("peak_significance: M must be >= 1");
  const double tail = std::exp(-power);
  const double p = -std::expm1(m_independent * std::log1p(-tail));
  return std::clamp(p, 0.0, 1.0);
}

struct Peak {
  int harmonic = 0;  // 0 when not tied to a harmonic
  double frequency = 0.0;
  double power = 0.0;
  double p_value = 1.0;
};

struct PeakSet {
  std::vector<Peak> peaks;  // power-descending
  double window = 0.0;
  double min_power = 0.0;
};

/// Indices of strict interior local maxima.
inline std::vector<std::size_t> local_maxima(const Periodogram& pg) {
  std::vector<std::size_t> idx;
  for (std::size_t k = 1; k + 1 < pg.powers.size(); ++k)
    if (pg.powers[k] > pg.powers[k - 1] && pg.powers[k] > pg.powers[k + 1]) idx.push_back(k);
  return idx;
}

inline Peak highest_peak(const Periodogram& pg) {
  if (pg.powers.empty()) throw InvalidArgument("highest_peak: empty periodogram");
  const auto it = std::max_element(pg.powers.begin(), pg.powers.end());
  const auto k = static_cast<std::size_t>(it - pg.powers.begin());
  return Peak{0, pg.frequencies[k], *it, peak_significance(*it, pg.m_independent)};
}

/// For n = 1..n_max, the highest local maximum within n*f0_guess*(1 -/+ window).
/// Harmonics with no local maximum (or none reaching min_power) in range are skipped.
inline PeakSet detect_harmonic_peaks(const Periodogram& pg, double f0_guess, int n_max,
                                     double window, double min_power = 0.0) {
  if (pg.size() < 3) throw InvalidArgument("detect_harmonic_peaks: empty periodogram");
  if (!(f0_guess > 0.0) || f0_guess < pg.frequencies.front() || f0_guess > pg.frequencies.back())
    throw InvalidArgument("detect_harmonic_peaks: f0 guess outside the frequency grid");
  if (n_max < 1) throw InvalidArgument("detect_harmonic_peaks: n_max must be >= 1");
  if (static_cast<double>(n_max) * f0_guess > pg.frequencies.back() * (1.0 + 1e-12))
    throw InvalidArgument("detect_harmonic_peaks: n_max * f0 beyond the frequency grid");
  if (!(window > 0.0) || window >= 1.0)
    throw InvalidArgument("detect_harmonic_peaks: window must be in (0, 1)");

  const auto maxima = local_maxima(pg);
  PeakSet set;
  set.window = window;
  set.min_power = min_power;
  for (int n = 1; n <= n_max; ++n) {
    const double centre = n * f0_guess;
    const double lo = centre * (1.0 - window);
    const double hi = centre * (1.0 + window);
    const auto first = std::lower_bound(maxima.begin(), maxima.end(), lo,
                                        [&](std::size_t k, double f) { return pg.frequencies[k] < f; });
    std::size_t best = pg.size();
    for (auto it = first; it != maxima.end() && pg.frequencies[*it] <= hi; ++it)
      if (pg.powers[*it] >= min_power && (best == pg.size() || pg.powers[*it] > pg.powers[best]))
        best = *it;
    if (best == pg.size()) continue;
    set.peaks.push_back(Peak{n, pg.frequencies[best], pg.powers[best],
                             peak_significance(pg.powers[best], pg.m_independent)});
  }
  std::stable_sort(set.peaks.begin(), set.peaks.end(),
                   [](const Peak& a, const Peak& b) { return a.power > b.power; });
  return set;
}

struct HarmonicPoint {
  int n = 0;
  double frequency = 0.0;
};

inline std::vector<HarmonicPoint> harmonic_points(const PeakSet& set) {
  std::vector<HarmonicPoint> pts;
  for (const Peak& p : set.peaks)
    if (p.harmonic > 0) pts.push_back({p.harmonic, p.frequency});
  std::sort(pts.begin(), pts.end(), [](auto& a, auto& b) { return a.n < b.n; });
  return pts;
}

enum class FitModel { through_origin, with_intercept };

struct FundamentalFit {
  double f0 = 0.0;
  double standard_error = 0.0;
  std::size_t harmonics = 0;
  std::vector<double> residuals;  // f_n - (intercept + n f0), in input order
  double intercept = 0.0;
  FitModel model = FitModel::through_origin;
};

/// Least-squares fit of f_n = n * f0 over a harmonic ladder.
///
/// The default model has no intercept: f0 = sum(n f_n) / sum(n^2), with standard
/// error sqrt(RSS / (k - 1) / sum(n^2)). FitModel::with_intercept fits an ordinary
/// line and reports its slope for sensitivity checks.
inline FundamentalFit estimate_fundamental(std::span<const HarmonicPoint> points,
                                           FitModel model = FitModel::through_origin) {
  const std::size_t k = points.size();
  const std::size_t min_points = model == FitModel::through_origin ? 2 : 3;
  if (k < min_points)
    throw DegenerateInput("estimate_fundamental: need at least " + std::to_string(min_points) +
                          " harmonics");
  std::vector<int> ns;
  for (const auto& p : points) {
    if (p.n < 1) throw InvalidArgument("estimate_fundamental: harmonic numbers must be >= 1");
    ns.push_back(p.n);
  }
  std::sort(ns.begin(), ns.end());
  if (std::adjacent_find(ns.begin(), ns.end()) != ns.end())
    throw InvalidArgument("estimate_fundamental: duplicate harmonic number");

  FundamentalFit fit;
  fit.harmonics = k;
  fit.model = model;
  fit.residuals.resize(k);
  double rss = 0.0;
  double sxx = 0.0;
  if (model == FitModel::through_origin) {
    double snf = 0.0;
    for (const auto& p : points) {
      snf += p.n * p.frequency;
      sxx += static_cast<double>(p.n) * p.n;
    }
    fit.f0 = snf / sxx;
    for (std::size_t i = 0; i < k; ++i) {
      fit.residuals[i] = points[i].frequency - points[i].n * fit.f0;
      rss += fit.residuals[i] * fit.residuals[i];
    }
    fit.standard_error = std::sqrt(rss / static_cast<double>(k - 1) / sxx);
  } else {
    double mean_n = 0.0, mean_f = 0.0;
    for (const auto& p : points) {
      mean_n += p.n;
      mean_f += p.frequency;
    }
    mean_n /= static_cast<double>(k);
    mean_f /= static_cast<double>(k);
    double sxy = 0.0;
    for (const auto& p : points) {
      sxx += (p.n - mean_n) * (p.n - mean_n);
      sxy += (p.n - mean_n) * (p.frequency - mean_f);
    }
    fit.f0 = sxy / sxx;
    fit.intercept = mean_f - fit.f0 * mean_n;
    for (std::size_t i = 0; i < k; ++i) {
      fit.residuals[i] = points[i].frequency - (fit.intercept + points[i].n * fit.f0);
      rss += fit.residuals[i] * fit.residuals[i];
    }
    fit.standard_error = std::sqrt(rss / static_cast<double>(k - 2) / sxx);
  }
  if (!(fit.f0 > 0.0)) throw DegenerateInput("estimate_fundamental: non-positive f0");
  return fit;
}

}  // namespace spreadlab
