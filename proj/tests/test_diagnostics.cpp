#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include "superstat/diagnostics.hpp"
#include "superstat/error.hpp"

using namespace superstat;

namespace {

std::vector<double> ar1(double a, std::size_t n, std::uint64_t seed, double sd = 1.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z(0.0, sd);
    std::vector<double> x(n);
    double v = 0.0;
    for (std::size_t i = 0; i < 1000; ++i) v = a * v + z(rng);
    for (auto& e : x) e = v = a * v + z(rng);
    return x;
}

std::vector<double> white(std::size_t n, std::uint64_t seed, double sd = 1.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z(0.0, sd);
    std::vector<double> x(n);
    for (auto& e : x) e = z(rng);
    return x;
}

// Direct O(N^2) one-sided periodogram used as an independent oracle.
double dft_power(const std::vector<double>& x, std::size_t k) {
    const double n = static_cast<double>(x.size());
    const double mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
    double re = 0, im = 0;
    for (std::size_t t = 0; t < x.size(); ++t) {
        const double w = -2.0 * std::numbers::pi * double(k) * double(t) / n;
        re += (x[t] - mean) * std::cos(w);
        im += (x[t] - mean) * std::sin(w);
    }
    const double p = (re * re + im * im) / (n * n);
    return (k == 0 || 2 * k == x.size()) ? p : 2.0 * p;
}

}  // namespace

TEST(PowerSpectrum, SinusoidPeak) {
    std::vector<double> x(1024);
    for (std::size_t t = 0; t < x.size(); ++t) x[t] = std::sin(2.0 * std::numbers::pi * 32.0 * t / 1024.0);
    const auto s = power_spectrum(x);
    ASSERT_EQ(s.points.size(), 513u);
    const auto peak = std::max_element(s.points.begin(), s.points.end(),
                                       [](auto& a, auto& b) { return a.power < b.power; });
    EXPECT_DOUBLE_EQ(peak->frequency, 32.0 / 1024.0);
    EXPECT_NEAR(peak->power, 0.5, 1e-10);
}

TEST(PowerSpectrum, MatchesDirectDft) {
    const auto x = ar1(0.7, 101, 3);
    const auto s = power_spectrum(x);
    for (std::size_t k : {0u, 1u, 7u, 50u}) EXPECT_NEAR(s.points[k].power, dft_power(x, k), 1e-12) << k;
}

TEST(PowerSpectrum, ParsevalAndFlatWhiteNoise) {
    const auto x = white(1 << 14, 5);
    const auto s = power_spectrum(x);
    double total = 0.0;
    for (const auto& p : s.points) total += p.power;
    const double mean = std::accumulate(x.begin(), x.end(), 0.0) / x.size();
    double var = 0.0;
    for (double v : x) var += (v - mean) * (v - mean);
    var /= x.size();
    EXPECT_NEAR(total, var, 1e-6 * var);

    // Low and high halves carry equal power within a few percent.
    double low = 0.0, high = 0.0;
    for (std::size_t k = 1; k < s.points.size(); ++k) (k < s.points.size() / 2 ? low : high) += s.points[k].power;
    EXPECT_NEAR(low / high, 1.0, 0.05);
}

TEST(PowerSpectrum, ConstantSeriesIsZero) {
    const std::vector<double> x(64, 3.5);
    for (const auto& p : power_spectrum(x).points) EXPECT_NEAR(p.power, 0.0, 1e-24);
}

TEST(PowerSpectrum, GapsInterpolatedAndShortRejected) {
    std::vector<double> x{std::nan(""), 1, 2, std::nan(""), std::nan(""), 5, 6, 7, 8, 9, 10, std::nan("")};
    const auto s = power_spectrum(x);
    EXPECT_EQ(s.interpolated, 2u);
    EXPECT_EQ(s.points.size(), 10u / 2 + 1);
    EXPECT_THROW(power_spectrum(std::vector<double>(7, 1.0)), InputError);
}

TEST(Autocorrelation, UnitLagZeroAndBounded) {
    const auto x = ar1(0.5, 5000, 7);
    const auto acf = autocorrelation(x, 50);
    EXPECT_DOUBLE_EQ(acf[0], 1.0);
    for (double r : acf) EXPECT_LE(std::abs(r), 1.0 + 1e-12);
    EXPECT_NEAR(acf[1], 0.5, 0.03);
}

TEST(AcfFit, GeometricDecay) {
    std::vector<double> acf(21);
    for (std::size_t k = 0; k < acf.size(); ++k) acf[k] = std::pow(0.9, double(k));
    const auto f = fit_acf_decay(acf, 1000000, 0.0);
    EXPECT_NEAR(f.xi, -1.0 / std::log(0.9), 1e-9);
    EXPECT_NEAR(f.xi, 9.49, 0.005);
    EXPECT_NEAR(f.beta, 1.0, 1e-9);
    EXPECT_EQ(f.lags_used, 20);
}

TEST(AcfFit, DiscretizedOrnsteinUhlenbeck) {
    const double xi = 10.0;
    const auto x = ar1(std::exp(-1.0 / xi), 400000, 11);
    const auto f = acf_exponential_fit(x, 40);
    EXPECT_NEAR(f.xi, xi, 0.1 * xi);
    EXPECT_NEAR(f.beta, 1.0, 0.1);
}

TEST(AcfFit, WhiteNoiseHasNoDecay) {
    EXPECT_THROW(acf_exponential_fit(white(10000, 13), 20), NumericalError);
    EXPECT_THROW(acf_exponential_fit(white(30, 13), 20), InputError);
}

TEST(JointGaussian, ReferenceCovarianceRecovered) {
    // Cholesky factor of the reference fluctuation covariance.
    const double sxx = 0.0619, sxy = -0.0036, syy = 0.0039;
    const double l11 = std::sqrt(sxx), l21 = sxy / l11, l22 = std::sqrt(syy - l21 * l21);
    std::mt19937_64 rng(17);
    std::normal_distribution<double> z;
    std::vector<double> x(100000), y(100000);
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double a = z(rng), b = z(rng);
        x[i] = l11 * a;
        y[i] = l21 * a + l22 * b;
    }
    const auto g = joint_gaussian_summary(x, y);
    const auto se = g.sigma_se();
    EXPECT_NEAR(g.sigma[0][0], sxx, 3 * se[0]);
    EXPECT_NEAR(g.sigma[0][1], sxy, 3 * se[1]);
    EXPECT_NEAR(g.sigma[1][1], syy, 3 * se[2]);
    EXPECT_DOUBLE_EQ(g.sigma[0][1], g.sigma[1][0]);
    EXPECT_NEAR(g.determinant, sxx * syy - sxy * sxy, 1e-4);
}

TEST(JointGaussian, IndependentComponents) {
    const auto x = white(50000, 19), y = white(50000, 20, 2.0);
    const auto g = joint_gaussian_summary(x, y);
    EXPECT_NEAR(g.sigma[0][1], 0.0, 3 * g.sigma_se()[1]);
    EXPECT_NEAR(g.sigma[1][1], 4.0, 0.1);
}

TEST(JointGaussian, DegenerateAndShortRejected) {
    const auto x = white(1000, 21);
    EXPECT_THROW(joint_gaussian_summary(x, x), NumericalError);
    EXPECT_THROW(joint_gaussian_summary(white(50, 1), white(50, 2)), InputError);
}

TEST(JointGaussian, DensityIntegratesToOne) {
    GaussianSummary g;
    g.sigma = {{{0.0619, -0.0036}, {-0.0036, 0.0039}}};
    g.determinant = 0.0619 * 0.0039 - 0.0036 * 0.0036;
    const double hx = 0.005, hy = 0.001;
    double sum = 0.0;
    for (int i = -400; i <= 400; ++i)
        for (int j = -400; j <= 400; ++j) sum += g.density(i * hx, j * hy);
    EXPECT_NEAR(sum * hx * hy, 1.0, 1e-4);
}

TEST(Wilcoxon, HandComputedStatistic) {
    // Ranks of a = {1, 2, 3} in the pooled {1, 2, 3, 4, 5, 6}: W = 6, mean 10.5,
    // variance 3 * 3 * 7 / 12 = 5.25.
    const std::vector<double> a{1, 2, 3}, b{4, 5, 6};
    EXPECT_NEAR(wilcoxon_rank_sum_z(a, b), (6.0 - 10.5) / std::sqrt(5.25), 1e-12);
    EXPECT_NEAR(wilcoxon_rank_sum_z(b, a), (15.0 - 10.5) / std::sqrt(5.25), 1e-12);
    EXPECT_THROW(wilcoxon_rank_sum_z(std::vector<double>{}, b), InputError);
}

TEST(Wilcoxon, TiesUseMidRanks) {
    // Pooled {1, 1, 2, 2}: mid-ranks 1.5, 1.5, 3.5, 3.5. W(a = {1, 2}) = 5 = mean, so z = 0.
    EXPECT_NEAR(wilcoxon_rank_sum_z(std::vector<double>{1, 2}, std::vector<double>{1, 2}), 0.0, 1e-12);
}

TEST(MarkovTest, FirstOrderAutoregression) {
    const auto r = markov_test(ar1(0.8, 200000, 23), 1, 10);
    EXPECT_LT(r.t_ratio, 1.5);
    EXPECT_GT(r.cells, 50);
}

TEST(MarkovTest, MovingSumIsNotMarkov) {
    const auto w = white(200003, 29);
    std::vector<double> x(200000);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = w[i] + w[i + 1] + w[i + 2];
    EXPECT_GT(markov_test(x, 1, 10).t_ratio, 3.0);
}

TEST(MarkovTest, IndependentNoise) {
    EXPECT_LT(markov_test(white(100000, 31), 1, 10).t_ratio, 1.5);
    EXPECT_THROW(markov_test(white(100, 31), 0, 10), InputError);
    EXPECT_THROW(markov_test(white(100, 31), 1, 1), InputError);
}

TEST(Pawula, GaussianIncrements) {
    // Random walk increments N(0, 0.1^2): D2 = 0.01, D4 = 3 sigma^4 / 24 = 1.25e-5.
    const auto dz = white(400000, 37, 0.1);
    std::vector<double> x(dz.size() + 1, 0.0);
    for (std::size_t i = 0; i < dz.size(); ++i) x[i + 1] = x[i] + dz[i];
    const auto r = pawula_check(x, 1, 1);
    ASSERT_EQ(r.bins.size(), 1u);
    EXPECT_NEAR(r.bins[0].d2, 0.01, 1e-4);
    EXPECT_NEAR(r.bins[0].d4, 1.25e-5, 0.3e-6);
    EXPECT_NEAR(r.pooled_ratio, 0.125, 0.004);
}

TEST(Pawula, HeavyTailedIncrementsRaiseRatio) {
    std::mt19937_64 rng(41);
    std::student_t_distribution<double> t(5.0);  // kurtosis 9
    std::vector<double> x(200001, 0.0);
    for (std::size_t i = 1; i < x.size(); ++i) x[i] = x[i - 1] + 0.1 * t(rng);
    EXPECT_GT(pawula_check(x, 1, 1).pooled_ratio, 0.25);
    EXPECT_THROW(pawula_check(x, 0, 1), InputError);
}

TEST(Grids, ClockGridAndDayBreaks) {
    // Two days of three slots, opening at clock slot 57.
    const std::vector<std::int64_t> wi{0, 1, 2, 3, 5};
    const std::vector<double> v{1, 2, 3, 4, 6};
    const auto clock = to_clock_grid(wi, v, 3, 57);
    ASSERT_EQ(clock.size(), 144u + 3u);
    EXPECT_EQ(clock[0], 1.0);
    EXPECT_EQ(clock[2], 3.0);
    EXPECT_TRUE(std::isnan(clock[3]));
    EXPECT_EQ(clock[144], 4.0);
    EXPECT_TRUE(std::isnan(clock[145]));
    EXPECT_EQ(clock[146], 6.0);

    const auto breaks = with_day_breaks(wi, v, 3);
    ASSERT_EQ(breaks.size(), 7u);
    EXPECT_TRUE(std::isnan(breaks[3]));
    EXPECT_EQ(breaks[4], 4.0);
    EXPECT_TRUE(std::isnan(breaks[5]));
}
