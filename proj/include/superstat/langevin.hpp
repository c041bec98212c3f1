#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "superstat/decompose.hpp"
#include "superstat/error.hpp"
#include "superstat/surfaces.hpp"

namespace superstat {

struct State {
    double phi = 0.0;
    double theta = 0.0;
};

/// Euler-Maruyama settings. Time is measured in output units (10 minutes);
/// every `subsample` integration steps one state is emitted, and
/// subsample * dt must equal one output unit.
struct SimConfig {
    double dt = 0.1;
    std::int64_t n_steps = 1000;  // emitted states, including the initial one
    int subsample = 0;            // 0: derive as round(1 / dt)
    std::uint64_t seed = 1;
    State initial{};
    double divergence_bound = 1e6;

    int resolved_subsample() const;
    void validate() const;
};

struct SimPath {
    std::vector<State> states;
    std::uint64_t seed = 0;
    std::string surfaces_fingerprint;
};

/// Raised when |state| exceeds the configured bound.
class DivergenceError : public NumericalError {
public:
    DivergenceError(std::int64_t step, int path = -1);
    std::int64_t step() const { return step_; }
    int path() const { return path_; }

private:
    std::int64_t step_;
    int path_;
};

/// Standard normal pair scaled by sqrt(dt): one Wiener increment per noise source.
struct WienerIncrement {
    double w1 = 0.0;
    double w2 = 0.0;
};

/// One Euler-Maruyama step.
inline State euler_step(const CoeffSurfaces& s, const State& x, double dt, const WienerIncrement& dw) {
    const double gpp = s.g_pp(x.phi, x.theta);
    const double gtt = s.g_tt(x.phi, x.theta);
    const double gpt = s.g_pt(x.phi, x.theta);
    return {x.phi + s.d1_phi(x.phi, x.theta) * dt + gpp * dw.w1 + gpt * dw.w2,
            x.theta + s.d1_theta(x.phi, x.theta) * dt + gpt * dw.w1 + gtt * dw.w2};
}

/// Integrates with caller-supplied increments; returns the initial state
/// followed by the state after every increment.
std::vector<State> integrate_increments(const CoeffSurfaces& s, State x0, double dt,
                                        std::span<const WienerIncrement> increments,
                                        double divergence_bound = 1e6);

/// Standard normal increments scaled by sqrt(dt) from a seeded generator.
std::vector<WienerIncrement> wiener_increments(std::uint64_t seed, std::size_t count, double dt);

SimPath simulate(const CoeffSurfaces& s, const SimConfig& cfg);

/// Seed of ensemble member `index`; member 0 uses the base seed.
std::uint64_t path_seed(std::uint64_t seed, int index);

/// Independent paths, bit-identical for any thread count.
std::vector<SimPath> ensemble(const CoeffSurfaces& s, const SimConfig& cfg, int n_paths,
                              int threads = 1);

/// A path viewed as a continuous fluctuation series (window_index = step).
FluctuationSeries to_fluctuations(const SimPath& path);

void write_sim_path_csv(std::ostream& out, const SimPath& path);

}  // namespace superstat
