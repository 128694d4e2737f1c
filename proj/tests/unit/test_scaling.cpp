#include <gtest/gtest.h>

#include <numbers>
#include <random>

#include "oracles.hpp"
#include "spreadlab/scaling.hpp"

using namespace spreadlab;

namespace {

std::vector<double> power_profile(double c, double beta, int len = 480) {
  std::vector<double> v(static_cast<std::size_t>(len));
  for (int tau = 1; tau <= len; ++tau) v[static_cast<std::size_t>(tau - 1)] = c * std::pow(tau, -beta);
  return v;
}

std::vector<double> normal_sample(std::uint64_t seed, std::size_t n, double mu, double sd) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(mu, sd);
  std::vector<double> v(n);
  for (auto& x : v) x = g(rng);
  return v;
}

}  // namespace

TEST(PowerLaw, NoiselessExample) {
  const auto fit = fit_power_law(power_profile(0.04, 0.20), kMarketTauRange);
  EXPECT_NEAR(fit.beta, 0.20, 1e-12);
  EXPECT_NEAR(fit.amplitude, 0.04, 1e-14);
  EXPECT_EQ(fit.dof, 118);
  EXPECT_EQ(fit.beta_stderr, 0.0);
  EXPECT_TRUE(std::isinf(fit.t_statistic));
  const auto t = regression_t_test(fit);
  EXPECT_TRUE(std::isinf(t.t_abs));
  EXPECT_TRUE(t.reject_zero_slope);
}

TEST(PowerLaw, ExactRecoveryAcrossExponents) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> b(0.05, 1.0), c(0.001, 5.0);
  for (int i = 0; i < 200; ++i) {
    const double beta = b(rng);
    const auto fit = fit_power_law(power_profile(c(rng), beta), TauRange{1 + i % 5, 60 + i});
    EXPECT_NEAR(fit.beta, beta, 1e-10);
    EXPECT_NEAR(fit.residual_variance, 0.0, 1e-28);
  }
}

TEST(PowerLaw, MatchesTextbookSlope) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g(0.0, 0.1);
  auto p = power_profile(0.05, 0.3);
  for (auto& v : p) v *= std::exp(g(rng));
  std::vector<double> x, y;
  for (int tau = 1; tau <= 80; ++tau) {
    x.push_back(std::log(tau));
    y.push_back(std::log(p[static_cast<std::size_t>(tau - 1)]));
  }
  EXPECT_NEAR(fit_power_law(p, kStockTauRange).beta, -oracle::ols_slope(x, y), 1e-10);
}

TEST(PowerLaw, ScaleInvariance) {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> g(0.0, 0.1);
  auto p = power_profile(0.03, 0.25);
  for (auto& v : p) v *= std::exp(g(rng));
  auto q = p;
  for (auto& v : q) v *= 7.25;
  const auto a = fit_power_law(p, kMarketTauRange), b = fit_power_law(q, kMarketTauRange);
  EXPECT_NEAR(a.beta, b.beta, 1e-12);
  EXPECT_NEAR(a.beta_stderr, b.beta_stderr, 1e-12);
  EXPECT_NEAR(std::abs(a.t_statistic), std::abs(b.t_statistic), 1e-12 * std::abs(a.t_statistic));
  EXPECT_NEAR(b.amplitude / a.amplitude, 7.25, 1e-12);
}

TEST(PowerLaw, ConsistentUnderNoise) {
  const double beta = 0.2;
  const auto base = power_profile(0.04, beta);
  double sum = 0.0, sum2 = 0.0, se = 0.0;
  const int seeds = 1000;
  for (int seed = 0; seed < seeds; ++seed) {
    std::mt19937_64 rng(static_cast<std::uint64_t>(seed));
    std::normal_distribution<double> g(0.0, 0.1);
    auto p = base;
    for (auto& v : p) v *= std::exp(g(rng));
    const auto fit = fit_power_law(p, kMarketTauRange);
    sum += fit.beta;
    sum2 += fit.beta * fit.beta;
    se += fit.beta_stderr;
  }
  const double mean = sum / seeds;
  const double sd = std::sqrt((sum2 - seeds * mean * mean) / (seeds - 1));
  se /= seeds;
  EXPECT_NEAR(mean, beta, 4.0 * sd / std::sqrt(seeds));
  EXPECT_NEAR(sd / se, 1.0, 0.2);
}

TEST(PowerLaw, Errors) {
  auto p = power_profile(0.04, 0.2);
  p[9] = 0.0;
  p[20] = -1.0;
  try {
    fit_power_law(p, kMarketTauRange);
    FAIL() << "expected NonPositiveProfile";
  } catch (const NonPositiveProfile& e) {
    EXPECT_EQ(e.taus(), (std::vector<int>{10, 21}));
  }
  EXPECT_NO_THROW(fit_power_law(p, TauRange{22, 120}));
  EXPECT_THROW(fit_power_law(p, TauRange{30, 31}), DegenerateInput);
  EXPECT_THROW(fit_power_law(p, TauRange{0, 31}), InvalidArgument);
  EXPECT_THROW(fit_power_law(p, TauRange{400, 481}), InvalidArgument);
}

TEST(TTest, CriticalValueAndNullBehaviour) {
  PowerLawFit fit;
  fit.dof = 118;
  fit.beta = 0.2;
  fit.beta_stderr = 0.002;
  fit.t_statistic = 100.0;
  const auto t = regression_t_test(fit, 0.99995);
  EXPECT_NEAR(t.critical, 4.0277, 1e-3);
  EXPECT_TRUE(t.reject_zero_slope);
  EXPECT_THROW(regression_t_test(fit, 1.0), InvalidArgument);
  EXPECT_THROW(regression_t_test(fit, 0.0), InvalidArgument);

  int accepted = 0;
  for (int seed = 0; seed < 1000; ++seed) {
    std::mt19937_64 rng(static_cast<std::uint64_t>(seed));
    std::normal_distribution<double> g(0.0, 0.1);
    std::vector<double> flat(480);
    for (auto& v : flat) v = 0.04 * std::exp(g(rng));
    accepted += !regression_t_test(fit_power_law(flat, kMarketTauRange)).reject_zero_slope;
  }
  EXPECT_GE(accepted, 990);
}

TEST(Quantiles, ChiSquaredSetup) {
  EXPECT_NEAR(chi_squared_quantile(0.9999, 97), 157.0, 1.0);
  EXPECT_NEAR(student_t_quantile(0.99995, 118), 4.0277, 1e-3);
}

TEST(Moments, Examples) {
  const auto a = exponent_moments(std::vector<double>{-1, 0, 1});
  EXPECT_DOUBLE_EQ(a.mean, 0.0);
  EXPECT_DOUBLE_EQ(a.skewness, 0.0);
  const auto b = exponent_moments(std::vector<double>{0, 1});
  EXPECT_DOUBLE_EQ(b.mean, 0.5);
  EXPECT_DOUBLE_EQ(b.stddev, std::sqrt(0.5));
  EXPECT_THROW(exponent_moments(std::vector<double>{1, 1, 1, 1}), DegenerateInput);
  EXPECT_THROW(oracle::moments({1, 1, 1, 1}), std::domain_error);
  EXPECT_THROW(exponent_moments(std::vector<double>{1}), DegenerateInput);
}

TEST(Moments, LargeNormalSample) {
  const auto m = exponent_moments(normal_sample(42, 100000, 0.20, 0.067));
  EXPECT_NEAR(m.mean, 0.20, 1e-3);
  EXPECT_NEAR(m.stddev, 0.067, 1e-3);
  EXPECT_NEAR(m.skewness, 0.0, 0.03);
  EXPECT_NEAR(m.kurtosis, 3.0, 0.05);
}

TEST(Moments, MatchOracle) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> v(5 + rng() % 2000);
    std::gamma_distribution<double> g(2.0, 0.1);
    for (auto& x : v) x = g(rng);
    const auto a = exponent_moments(v);
    const auto b = oracle::moments(v);
    EXPECT_NEAR(a.mean, b.mean, 1e-10 * std::abs(b.mean));
    EXPECT_NEAR(a.stddev, b.sd, 1e-10 * b.sd);
    EXPECT_NEAR(a.skewness, b.skew, 1e-10 * std::max(1.0, std::abs(b.skew)));
    EXPECT_NEAR(a.kurtosis, b.kurt, 1e-10 * b.kurt);
    EXPECT_GE(a.kurtosis, 1.0);
  }
  const auto v = normal_sample(3, 10000, 0.2, 0.067);
  const auto a = exponent_moments(v);
  const auto b = oracle::moments(v);
  EXPECT_NEAR(a.kurtosis, b.kurt, 1e-12);
  EXPECT_NEAR(a.skewness, b.skew, 1e-12);
}

TEST(Chi2, SetupAndOracleCounts) {
  const auto v = normal_sample(5, 1000, 0.2, 0.067);
  const auto r = chi2_normality(v, 100, 0.9999);
  EXPECT_EQ(r.dof, 97);
  EXPECT_NEAR(r.critical, 157.0, 1.0);
  const auto m = oracle::moments(v);
  const auto counts = oracle::normal_bin_counts(v, m.mean, m.sd, 100);
  EXPECT_EQ(r.observed, counts);
  EXPECT_DOUBLE_EQ(r.chi2, oracle::chi2_from_counts(counts, 10.0));
  EXPECT_DOUBLE_EQ(r.expected, 10.0);
}

TEST(Chi2, NormalSamplesAreNotRejected) {
  int kept = 0;
  for (std::uint64_t seed = 0; seed < 500; ++seed)
    kept += !chi2_normality(normal_sample(seed, 1000, 0.2, 0.067), 100, 0.99).rejected;
  EXPECT_GE(kept, 490);
}

TEST(Chi2, UniformSamplesAreRejected) {
  int rejected = 0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 0.4);
    std::vector<double> v(1000);
    for (auto& x : v) x = u(rng);
    rejected += chi2_normality(v, 100, 0.99).rejected;
  }
  EXPECT_GE(rejected, 198);
}

TEST(Chi2, Errors) {
  const auto v = normal_sample(1, 50, 0.0, 1.0);
  EXPECT_THROW(chi2_normality(v, 100, 0.99), DegenerateInput);
  EXPECT_THROW(chi2_normality(v, 3, 0.99), InvalidArgument);
  EXPECT_THROW(chi2_normality(v, 10, 1.5), InvalidArgument);
}

TEST(Histogram, CountsAndDensity) {
  const auto v = normal_sample(2, 500, 0.2, 0.067);
  const auto h = exponent_histogram(v, 30);
  ASSERT_EQ(h.size(), 30u);
  std::size_t total = 0;
  for (const auto& b : h) total += b.count;
  EXPECT_EQ(total, v.size());
  const auto m = oracle::moments(v);
  const double z = (h[15].center - m.mean) / m.sd;
  EXPECT_NEAR(h[15].fitted_density, std::exp(-0.5 * z * z) / (m.sd * std::sqrt(2 * std::numbers::pi)), 1e-9);
}

TEST(Classify, Examples) {
  const auto a = classify_relaxation(0.20);
  EXPECT_NEAR(a.theta_endogenous, 0.40, 1e-15);
  EXPECT_EQ(a.label, RelaxationLabel::endogenous);
  const auto b = classify_relaxation(1.0);
  EXPECT_EQ(b.theta_endogenous, 0.0);
  EXPECT_EQ(b.theta_exogenous, 0.0);
  const auto c = classify_relaxation(0.60, 0.4);
  EXPECT_NEAR(c.theta_exogenous, 0.40, 1e-15);
  EXPECT_EQ(c.label, RelaxationLabel::exogenous);
  EXPECT_EQ(classify_relaxation(-2.0).label, RelaxationLabel::indeterminate);
  EXPECT_THROW(classify_relaxation(std::nan("")), InvalidArgument);
  EXPECT_STREQ(to_string(RelaxationLabel::endogenous), "endogenous");
}

TEST(Classify, ThetaIdentities) {
  for (double beta = -1.0; beta <= 2.0; beta += 0.037) {
    const auto c = classify_relaxation(beta);
    EXPECT_NEAR(c.theta_endogenous + beta / 2, 0.5, 1e-15);
    EXPECT_NEAR(c.theta_exogenous + beta, 1.0, 1e-15);
  }
}
