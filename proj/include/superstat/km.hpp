#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "superstat/decompose.hpp"

namespace superstat {

/// Quantile grid over (phi', theta') with per-bin occupancy, row-major by
/// phi bin.
struct StateGrid {
    std::vector<double> phi_edges;
    std::vector<double> theta_edges;
    std::vector<std::size_t> counts;
    std::size_t min_count = 50;

    int phi_bins() const { return static_cast<int>(phi_edges.size()) - 1; }
    int theta_bins() const { return static_cast<int>(theta_edges.size()) - 1; }
    /// Flat bin index of a state; -1 outside the grid.
    int locate(double phi, double theta) const;
    bool retained(int bin) const { return counts[static_cast<std::size_t>(bin)] >= min_count; }
};

StateGrid build_grid(const FluctuationSeries& fl, int bins_per_axis, std::size_t min_count = 50);

/// D2 normalization: increments gives <dX dY> / tau, factorial the literal
/// <dX dY> / (2 tau).
enum class DiffusionConvention { increments, factorial };

struct KMBin {
    int bin = 0;
    double phi_c = 0.0;  // mean conditioning state in the bin
    double theta_c = 0.0;
    std::size_t n = 0;  // increment pairs used
    double d1_phi = 0.0, d1_theta = 0.0;
    double d2_pp = 0.0, d2_pt = 0.0, d2_tt = 0.0;
    // Standard errors of the five estimates above.
    double se_d1_phi = 0.0, se_d1_theta = 0.0;
    double se_d2_pp = 0.0, se_d2_pt = 0.0, se_d2_tt = 0.0;
    int tau_used = 1;  // 0 after a successful tau -> 0 extrapolation
};

struct KMField {
    std::vector<KMBin> bins;
    int tau = 1;  // 0 for extrapolated fields
};

/// Conditional moments of increments over `tau` steps. Pairs crossing a day
/// boundary or a missing window are skipped; bins with fewer than
/// grid.min_count pairs are dropped.
KMField conditional_moments(const FluctuationSeries& fl, const StateGrid& grid, int tau,
                            DiffusionConvention convention = DiffusionConvention::increments);

/// Per bin and coefficient, weighted straight line of the estimate against
/// tau; the intercept is the tau -> 0 value. Bins seen at fewer than two lags
/// keep their smallest-lag value (tau_used stays non-zero).
KMField extrapolate_tau(std::span<const KMField> fields);

/// Convenience: conditional moments at tau = 1..max_tau followed by
/// extrapolation (or the plain tau = 1 field when max_tau == 1).
KMField estimate_km(const FluctuationSeries& fl, const StateGrid& grid, int max_tau,
                    DiffusionConvention convention = DiffusionConvention::increments);

/// Fills standard errors from Gaussian theory (used for fields read from CSV).
void assign_theoretical_se(KMField& field);

/// CSV: `phi_c,theta_c,n,d1_phi,d1_theta,d2_pp,d2_pt,d2_tt`.
void write_km_csv(std::ostream& out, const KMField& field);
KMField read_km_csv(std::istream& in);

}  // namespace superstat
