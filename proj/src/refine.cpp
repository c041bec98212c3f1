#include "superstat/refine.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include <fmt/format.h>

#include "superstat/moments.hpp"

namespace superstat {

namespace {

std::vector<double*> coefficients(CoeffSurfaces& s) {
    return {&s.d1_phi.a, &s.d1_phi.b,   &s.d1_phi.c,   &s.d1_theta.a, &s.d1_theta.b, &s.d1_theta.c,
            &s.g_pp.a,   &s.g_pp.b,     &s.g_pp.c,     &s.g_pp.d,     &s.g_pp.e,     &s.g_pp.f,
            &s.g_tt.a,   &s.g_tt.b,     &s.g_tt.c,     &s.g_tt.d,     &s.g_tt.e,     &s.g_tt.f,
            &s.g_pt.a,   &s.g_pt.b,     &s.g_pt.c,     &s.g_pt.d,     &s.g_pt.e,     &s.g_pt.f};
}

SimConfig matched(const SimConfig& cfg, const FluctuationSeries& empirical) {
    SimConfig c = cfg;
    if (c.n_steps <= 0) c.n_steps = static_cast<std::int64_t>(empirical.size());
    return c;
}

}  // namespace

double marginal_ks(const CoeffSurfaces& s, const FluctuationSeries& empirical, const SimConfig& cfg) {
    const auto path = simulate(s, matched(cfg, empirical));
    std::vector<double> phi, theta;
    phi.reserve(path.states.size());
    theta.reserve(path.states.size());
    for (const auto& x : path.states) {
        phi.push_back(x.phi);
        theta.push_back(x.theta);
    }
    return std::max(ks_distance(phi, empirical.phi_f), ks_distance(theta, empirical.theta_f));
}

RefineResult refine_surfaces(const CoeffSurfaces& fitted, const FluctuationSeries& empirical,
                             const RefineOptions& opts) {
    if (!(opts.max_relative >= 0.0)) throw InputError("refine: max_relative must be non-negative");
    if (opts.sweeps < 0) throw InputError("refine: sweeps must be non-negative");
    const SimConfig cfg = matched(opts.sim, empirical);

    RefineResult r;
    r.surfaces = fitted;
    r.ks_before = marginal_ks(fitted, empirical, cfg);
    r.ks_after = r.ks_before;
    if (!opts.enabled) return r;

    CoeffSurfaces base = fitted;
    const auto reference = coefficients(base);
    for (int sweep = 0; sweep < opts.sweeps; ++sweep) {
        for (std::size_t k = 0; k < reference.size(); ++k) {
            const double origin = *reference[k];
            if (origin == 0.0) continue;
            const double lo = origin - opts.max_relative * std::abs(origin);
            const double hi = origin + opts.max_relative * std::abs(origin);
            for (double step : opts.steps) {
                CoeffSurfaces candidate = r.surfaces;
                double& c = *coefficients(candidate)[k];
                c = std::clamp(c + step * std::abs(origin), lo, hi);
                if (c == *coefficients(r.surfaces)[k]) continue;
                double ks;
                try {
                    ks = marginal_ks(candidate, empirical, cfg);
                } catch (const NumericalError&) {
                    continue;
                }
                if (ks < r.ks_after) {
                    r.ks_after = ks;
                    r.surfaces = candidate;
                    ++r.accepted;
                }
            }
        }
    }
    return r;
}

}  // namespace superstat
