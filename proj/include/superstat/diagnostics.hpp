#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "superstat/decompose.hpp"

namespace superstat {

// Series passed to the diagnostics may contain NaN entries marking gaps
// (dropped windows, closed market). Spectra interpolate across them; the
// lag-based statistics skip any pair or triple touching one.

/// Places values on a 144-slot-per-day clock grid starting at the first
/// observed window; unobserved clock slots are NaN.
std::vector<double> to_clock_grid(std::span<const std::int64_t> window_index,
                                  std::span<const double> values, int slots_per_day,
                                  int open_slot);

/// Inserts NaN between trading days without adding overnight slots.
std::vector<double> with_day_breaks(std::span<const std::int64_t> window_index,
                                    std::span<const double> values, int slots_per_day);

struct SpectrumPoint {
    double frequency;  // cycles per step
    double power;
};

struct Spectrum {
    std::vector<SpectrumPoint> points;  // k = 0 .. N/2, one-sided
    std::size_t interpolated = 0;       // number of gap values filled in
};

/// One-sided periodogram of the mean-removed series, normalized so the total
/// power equals the series variance.
Spectrum power_spectrum(std::span<const double> series);

/// Biased sample autocorrelation, acf[0] = 1.
std::vector<double> autocorrelation(std::span<const double> series, int max_lag);

/// alpha(tau) = beta exp(-tau / xi)
struct AcfFit {
    double beta = 0.0;
    double xi = 0.0;
    int max_lag = 0;
    int lags_used = 0;
    double r_squared = 0.0;
    std::vector<double> acf;
};

/// Straight-line fit of log ACF over lags 1..max_lag. The range is truncated
/// at the first lag whose ACF is not above noise_floor_z / sqrt(N); set
/// noise_floor_z = 0 to truncate at the first non-positive value only.
AcfFit acf_exponential_fit(std::span<const double> series, int max_lag = 144,
                           double noise_floor_z = 2.0);

/// The same fit applied to a precomputed ACF (acf[0] = 1) of a series with
/// `n_values` finite entries.
AcfFit fit_acf_decay(std::vector<double> acf, std::size_t n_values, double noise_floor_z = 2.0);

struct GaussianSummary {
    std::array<double, 2> mu{};
    std::array<std::array<double, 2>, 2> sigma{};
    double determinant = 0.0;
    std::size_t n = 0;

    /// Bivariate normal density with this mean and covariance.
    double density(double x, double y) const;
    /// Standard errors of (sigma_xx, sigma_xy, sigma_yy) under normality.
    std::array<double, 3> sigma_se() const;
};

GaussianSummary joint_gaussian_summary(std::span<const double> x, std::span<const double> y);
GaussianSummary joint_gaussian_summary(const FluctuationSeries& fl);

/// Normal-approximation z score of the Wilcoxon rank-sum statistic of `a`
/// against `b` (mid-ranks for ties, tie-corrected variance).
double wilcoxon_rank_sum_z(std::span<const double> a, std::span<const double> b);

struct MarkovTestResult {
    int lag = 1;
    double t_ratio = 0.0;
    int bins = 0;
    int cells = 0;          // conditioning cells that produced a statistic
    double mean_abs_z = 0.0;
    std::vector<double> z;  // per cell
};

/// Markov check on triples (x(t+lag) | x(t), x(t-lag)). For each quantile
/// bin of x(t) the future values are compared, cell by cell over quantiles of
/// x(t-lag), against the rest of the bin with a rank-sum test. Within a bin
/// the future values are first adjusted for the local linear dependence on
/// x(t) so the bin width itself does not register as memory.
/// t_ratio = mean |z| / sqrt(2/pi); about 1 for a Markov process.
MarkovTestResult markov_test(std::span<const double> series, int lag, int bins,
                             std::size_t min_cell = 30);

struct PawulaBin {
    double center = 0.0;  // mean state in the bin
    std::size_t n = 0;
    double d2 = 0.0;  // <dx^2> / tau
    double d4 = 0.0;  // <dx^4> / (4! tau)
    double ratio = 0.0;
};

struct PawulaResult {
    int tau = 1;
    std::vector<PawulaBin> bins;
    double pooled_ratio = 0.0;  // count-weighted mean of per-bin ratios
};

PawulaResult pawula_check(std::span<const double> series, int tau, int bins);

}  // namespace superstat
