#include "superstat/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <fmt/format.h>

#include "superstat/langevin.hpp"

namespace superstat {

namespace {

constexpr int kOpenMinutes = 9 * 60 + 30;
constexpr int kSlots = 39;
constexpr int kOpenSlot = kOpenMinutes / 10;

bool weekend(std::int64_t day) {
    // 1970-01-01 was a Thursday.
    const auto dow = ((day % 7) + 7 + 3) % 7;  // 0 = Monday
    return dow >= 5;
}

}  // namespace

Fixture make_fixture(const FixtureSpec& spec) {
    if (spec.n_assets < 2 || spec.n_days < 1) {
        throw InputError(fmt::format("fixture needs >= 2 assets and >= 1 day (got {}, {})",
                                     spec.n_assets, spec.n_days));
    }
    Fixture fx;
    fx.slots_per_day = kSlots;
    const auto n_windows = static_cast<std::int64_t>(spec.n_days) * kSlots;

    std::vector<State> fluct(static_cast<std::size_t>(n_windows));
    if (spec.fluctuation_scale != 0.0) {
        SimConfig cfg;
        cfg.n_steps = n_windows;
        cfg.seed = spec.seed;
        fluct = simulate(spec.fluctuations, cfg).states;
    }

    std::vector<std::int64_t> days;
    for (std::int64_t d = spec.first_day; static_cast<int>(days.size()) < spec.n_days + 1; ++d) {
        if (!weekend(d)) days.push_back(d);
    }

    std::mt19937_64 rng(spec.seed ^ 0x5DEECE66DULL);
    std::normal_distribution<double> normal;
    std::uniform_real_distribution<double> price_dist(10.0, 200.0);
    std::vector<std::string> assets;
    for (int a = 0; a < spec.n_assets; ++a) assets.push_back(fmt::format("A{:03d}", a));

    auto emit = [&](std::int64_t day, int minute_of_day, int asset, double s) {
        const double price = price_dist(rng);
        TickRecord t;
        t.asset_id = assets[static_cast<std::size_t>(asset)];
        t.timestamp = day * 86400 + static_cast<std::int64_t>(minute_of_day) * 60 + asset + 1;
        t.price = price;
        t.volume = s / price;
        fx.ticks.push_back(t);
    };

    for (int d = 0; d < spec.n_days; ++d) {
        for (int slot = 0; slot < kSlots; ++slot) {
            const auto w = static_cast<std::size_t>(d * kSlots + slot);
            const double td = intraday_time(slot, kOpenSlot);
            const double phi = spec.phi_pattern(td) + spec.fluctuation_scale * fluct[w].phi;
            const double theta =
                std::max(0.05, spec.theta_pattern(td) + spec.fluctuation_scale * fluct[w].theta);
            fx.phi.push_back(phi);
            fx.theta.push_back(theta);
            for (int a = 0; a < spec.n_assets; ++a) {
                emit(days[static_cast<std::size_t>(d)], kOpenMinutes + 10 * slot, a,
                     std::exp(phi + theta * normal(rng)));
            }
        }
    }

    if (spec.include_noise_records) {
        const auto d0 = days.front();
        TickRecord pre;
        pre.asset_id = assets.front();
        pre.timestamp = d0 * 86400 + 8 * 3600;
        pre.price = 50.0;
        pre.volume = 100.0;
        fx.ticks.push_back(pre);
        TickRecord zero = pre;
        zero.timestamp = d0 * 86400 + 10 * 3600 + 7;
        zero.asset_id = assets.back();
        zero.volume = 0.0;
        fx.ticks.push_back(zero);
        // A trailing day with a single populated window: discarded as an error day.
        for (int a = 0; a < spec.n_assets; ++a) {
            emit(days.back(), kOpenMinutes, a, std::exp(spec.phi_pattern(intraday_time(0, kOpenSlot))));
        }
    }
    std::sort(fx.ticks.begin(), fx.ticks.end(), [](const TickRecord& x, const TickRecord& y) {
        return x.asset_id != y.asset_id ? x.asset_id < y.asset_id : x.timestamp < y.timestamp;
    });
    return fx;
}

FixtureSpec pipeline_fixture_spec() {
    FixtureSpec spec;
    const auto ref = nyse_reference_surfaces();
    CoeffSurfaces linear;
    linear.d1_phi = ref.d1_phi;
    linear.d1_theta = ref.d1_theta;
    linear.g_pp.a = ref.g_pp.a;
    linear.g_tt.a = ref.g_tt.a;
    linear.g_pt.a = ref.g_pt.a;
    spec.fluctuations = linear;
    spec.fluctuation_scale = 5.0;
    return spec;
}

}  // namespace superstat
