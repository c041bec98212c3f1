#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "superstat/lognormal.hpp"

namespace superstat {

enum class Component { phi, theta };
enum class PatternMethod { global_mean, moving_mean };
enum class MovingAlignment { centered, trailing };

struct PatternOptions {
    PatternMethod method = PatternMethod::moving_mean;
    int window_days = 20;
    MovingAlignment alignment = MovingAlignment::centered;
};

/// Average intraday profile of one parameter. `slot_means` always holds the
/// all-days average; in moving_mean mode `day_means[d]` holds the profile
/// averaged over the trading days around day rank d.
struct DailyPattern {
    PatternMethod method = PatternMethod::global_mean;
    int window_days = 0;
    int slots_per_day = 0;
    int open_slot = 0;
    std::vector<double> slot_means;
    std::vector<std::vector<double>> day_means;

    /// Pattern value for a global window index. NaN when the slot was never
    /// observed.
    double at(std::int64_t window_index) const;
};

DailyPattern daily_pattern(const ParamSeries& series, Component which, const PatternOptions& opts);

/// Intraday time in 10-minute units, shifted so that 09:00 is zero:
/// t_d = (clock slot mod 144) - 54.
double intraday_time(int slot, int open_slot);

/// a t^3 + b t^2 + c t + d in intraday time.
struct CubicFit {
    double a = 0.0, b = 0.0, c = 0.0, d = 0.0;
    double r_squared = 1.0;
    std::array<double, 4> se{};  // least-squares standard errors of (a, b, c, d)

    double operator()(double t_d) const { return ((a * t_d + b) * t_d + c) * t_d + d; }
};

CubicFit fit_cubic(std::span<const double> t_d, std::span<const double> values);
CubicFit fit_cubic(const DailyPattern& pattern);

/// Cubic patterns fitted to the average NYSE 10-minute volume-price profile.
CubicFit nyse_phi_pattern();
CubicFit nyse_theta_pattern();

/// Primed fluctuations around the daily pattern. `slots_per_day == 0` marks a
/// continuous series without day boundaries (e.g. simulated paths).
struct FluctuationSeries {
    std::vector<std::int64_t> window_index;
    std::vector<double> phi_f;
    std::vector<double> theta_f;
    int slots_per_day = 0;
    int open_slot = 0;

    std::size_t size() const { return window_index.size(); }
    /// True when entries i and j may form an increment pair (same day).
    bool same_segment(std::int64_t a, std::int64_t b) const;
};

struct DetrendResult {
    FluctuationSeries fluctuations;
    std::size_t removed_phi = 0;
    std::size_t removed_theta = 0;
};

/// Subtracts the patterns and clips each component at outlier_sigma; an
/// entry clipped in either component is dropped.
DetrendResult detrend(const ParamSeries& series, const DailyPattern& phi_pattern,
                      const DailyPattern& theta_pattern, double outlier_sigma = 5.0);

void write_fluctuations_csv(std::ostream& out, const FluctuationSeries& fl);
FluctuationSeries read_fluctuations_csv(std::istream& in);

/// `slot,t_d,phi,theta` rows of the all-days patterns.
void write_patterns_csv(std::ostream& out, const DailyPattern& phi, const DailyPattern& theta);

}  // namespace superstat
