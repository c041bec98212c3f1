#include "superstat/langevin.hpp"

#include <cmath>
#include <ostream>
#include <random>

#include <fmt/format.h>

#include "superstat/csv.hpp"
#include "superstat/parallel.hpp"

namespace superstat {

int SimConfig::resolved_subsample() const {
    return subsample > 0 ? subsample : static_cast<int>(std::lround(1.0 / dt));
}

void SimConfig::validate() const {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw InputError(fmt::format("simulation: dt must be positive, got {}", dt));
    if (n_steps < 1) throw InputError(fmt::format("simulation: n_steps must be >= 1, got {}", n_steps));
    const int sub = resolved_subsample();
    if (sub < 1) throw InputError("simulation: dt exceeds one output unit");
    if (std::abs(sub * dt - 1.0) > 1e-9) {
        throw InputError(fmt::format("simulation: subsample*dt must equal 1 (subsample={}, dt={})", sub, dt));
    }
    if (!(divergence_bound > 0.0)) throw InputError("simulation: divergence_bound must be positive");
}

DivergenceError::DivergenceError(std::int64_t step, int path)
    : NumericalError(path < 0 ? fmt::format("simulation diverged at step {}", step)
                              : fmt::format("simulation path {} diverged at step {}", path, step)),
      step_(step),
      path_(path) {}

namespace {

bool diverged(const State& x, double bound) {
    return !(std::abs(x.phi) <= bound) || !(std::abs(x.theta) <= bound);
}

}  // namespace

std::vector<State> integrate_increments(const CoeffSurfaces& s, State x0, double dt,
                                        std::span<const WienerIncrement> increments,
                                        double divergence_bound) {
    std::vector<State> out;
    out.reserve(increments.size() + 1);
    out.push_back(x0);
    State x = x0;
    for (std::size_t k = 0; k < increments.size(); ++k) {
        x = euler_step(s, x, dt, increments[k]);
        if (diverged(x, divergence_bound)) throw DivergenceError(static_cast<std::int64_t>(k + 1));
        out.push_back(x);
    }
    return out;
}

std::vector<WienerIncrement> wiener_increments(std::uint64_t seed, std::size_t count, double dt) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    const double sd = std::sqrt(dt);
    std::vector<WienerIncrement> out(count);
    for (auto& w : out) {
        w.w1 = sd * normal(rng);
        w.w2 = sd * normal(rng);
    }
    return out;
}

SimPath simulate(const CoeffSurfaces& s, const SimConfig& cfg) {
    cfg.validate();
    const int sub = cfg.resolved_subsample();
    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> normal;
    const double sd = std::sqrt(cfg.dt);

    SimPath path;
    path.seed = cfg.seed;
    path.surfaces_fingerprint = surfaces_fingerprint(s);
    path.states.reserve(static_cast<std::size_t>(cfg.n_steps));
    State x = cfg.initial;
    path.states.push_back(x);
    std::int64_t step = 0;
    for (std::int64_t k = 1; k < cfg.n_steps; ++k) {
        for (int j = 0; j < sub; ++j) {
            WienerIncrement dw;
            dw.w1 = sd * normal(rng);
            dw.w2 = sd * normal(rng);
            x = euler_step(s, x, cfg.dt, dw);
            ++step;
            if (diverged(x, cfg.divergence_bound)) throw DivergenceError(step);
        }
        path.states.push_back(x);
    }
    return path;
}

std::uint64_t path_seed(std::uint64_t seed, int index) {
    if (index == 0) return seed;
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(index);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

std::vector<SimPath> ensemble(const CoeffSurfaces& s, const SimConfig& cfg, int n_paths,
                              int threads) {
    if (n_paths < 1) throw InputError(fmt::format("ensemble: n_paths must be >= 1, got {}", n_paths));
    cfg.validate();
    std::vector<SimPath> paths(static_cast<std::size_t>(n_paths));
    parallel_for(paths.size(), threads, [&](std::size_t i) {
        SimConfig c = cfg;
        c.seed = path_seed(cfg.seed, static_cast<int>(i));
        try {
            paths[i] = simulate(s, c);
        } catch (const DivergenceError& e) {
            throw DivergenceError(e.step(), static_cast<int>(i));
        }
    });
    return paths;
}

FluctuationSeries to_fluctuations(const SimPath& path) {
    FluctuationSeries fl;
    fl.window_index.reserve(path.states.size());
    fl.phi_f.reserve(path.states.size());
    fl.theta_f.reserve(path.states.size());
    for (std::size_t i = 0; i < path.states.size(); ++i) {
        fl.window_index.push_back(static_cast<std::int64_t>(i));
        fl.phi_f.push_back(path.states[i].phi);
        fl.theta_f.push_back(path.states[i].theta);
    }
    return fl;
}

void write_sim_path_csv(std::ostream& out, const SimPath& path) {
    out << "# slots_per_day=0 open_slot=0 seed=" << path.seed
        << " surfaces=" << path.surfaces_fingerprint << '\n';
    out << "window_index,phi_f,theta_f\n";
    for (std::size_t i = 0; i < path.states.size(); ++i) {
        out << i << ',' << csv::num(path.states[i].phi) << ',' << csv::num(path.states[i].theta) << '\n';
    }
}

}  // namespace superstat
