#pragma once

#include <vector>

#include "superstat/langevin.hpp"

namespace superstat {

/// Optional post-fit adjustment: coordinate search over the surface
/// coefficients, each kept within ±max_relative of its fitted value, that
/// lowers the worst marginal KS distance between simulated and empirical
/// fluctuations. All candidates share one noise realization.
struct RefineOptions {
    bool enabled = false;
    double max_relative = 0.2;
    std::vector<double> steps{-0.2, -0.1, 0.1, 0.2};
    int sweeps = 1;
    SimConfig sim;  // n_steps <= 0: match the empirical length
};

struct RefineResult {
    CoeffSurfaces surfaces;
    double ks_before = 0.0;
    double ks_after = 0.0;
    int accepted = 0;
};

/// max(KS(phi'), KS(theta')) of one simulated path against the data.
double marginal_ks(const CoeffSurfaces& s, const FluctuationSeries& empirical, const SimConfig& cfg);

RefineResult refine_surfaces(const CoeffSurfaces& fitted, const FluctuationSeries& empirical,
                             const RefineOptions& opts);

}  // namespace superstat
