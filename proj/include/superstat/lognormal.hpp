#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "superstat/ingest.hpp"

namespace superstat {

/// Maximum-likelihood log-normal parameters of one window: phi is the mean
/// and theta the (population) standard deviation of log s.
struct LogNormalParams {
    double phi = 0.0;
    double theta = 0.0;
    std::size_t n = 0;
    double se_phi = 0.0;    // theta / sqrt(n)
    double se_theta = 0.0;  // theta / sqrt(2n)
};

struct LogNormalFitOptions {
    /// When positive, windows with theta below the floor are fitted with
    /// theta = floor instead of being rejected.
    double theta_floor = 0.0;
};

LogNormalParams fit_window(std::span<const double> values, const LogNormalFitOptions& opts = {});
LogNormalParams fit_window(const WindowSample& sample, const LogNormalFitOptions& opts = {});

/// Time series of fitted parameters, sorted by window_index. Gaps (dropped
/// windows) are allowed.
struct ParamSeries {
    std::vector<std::int64_t> window_index;
    std::vector<LogNormalParams> params;
    int slots_per_day = 39;
    int open_slot = 57;

    std::size_t size() const { return params.size(); }
    std::vector<double> phi() const;
    std::vector<double> theta() const;
};

struct FitAllResult {
    ParamSeries series;
    SkipLog skips;
};

/// Fits every window; degenerate windows are skip-logged. Throws InputError
/// when nothing survives.
FitAllResult fit_all(std::span<const WindowSample> windows, int slots_per_day, int open_slot,
                     const LogNormalFitOptions& opts = {});

double lognormal_pdf(double s, double phi, double theta);
inline double lognormal_pdf(double s, const LogNormalParams& p) {
    return lognormal_pdf(s, p.phi, p.theta);
}

/// CSV: `window_index,phi,theta,n,se_phi,se_theta`, preceded by a
/// `# slots_per_day=.. open_slot=..` metadata line.
void write_param_series_csv(std::ostream& out, const ParamSeries& series);
ParamSeries read_param_series_csv(std::istream& in);

}  // namespace superstat
