#pragma once

#include <cstdint>
#include <vector>

#include "superstat/decompose.hpp"
#include "superstat/ingest.hpp"
#include "superstat/surfaces.hpp"

namespace superstat {

/// Tick data whose per-window volume-price is log-normal with parameters
/// cubic pattern + simulated fluctuations.
struct FixtureSpec {
    int n_assets = 60;
    int n_days = 30;
    std::uint64_t seed = 7;
    std::int64_t first_day = 18631;  // 2021-01-04, a Monday; weekends are skipped
    CubicFit phi_pattern = nyse_phi_pattern();
    CubicFit theta_pattern = nyse_theta_pattern();
    CoeffSurfaces fluctuations = nyse_reference_surfaces();
    double fluctuation_scale = 1.0;  // 0 gives pure patterns
    bool include_noise_records = true;  // after-hours, zero-volume ticks and one sparse day
};

struct Fixture {
    std::vector<TickRecord> ticks;
    // Generating parameters of every regular trading window, by window index
    // over the regular days.
    std::vector<double> phi;
    std::vector<double> theta;
    int slots_per_day = 39;
};

Fixture make_fixture(const FixtureSpec& spec);

/// Fixture on which the default pipeline runs to completion: constant noise
/// matrix from the reference surfaces, fluctuations scaled by five so they
/// dominate the per-window sampling noise.
FixtureSpec pipeline_fixture_spec();

}  // namespace superstat
