#include "superstat/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "superstat/csv.hpp"
#include "superstat/diagnostics.hpp"
#include "superstat/error.hpp"
#include "superstat/hash.hpp"
#include "superstat/moments.hpp"
#include "superstat/surfaces.hpp"

namespace fs = std::filesystem;

namespace superstat {

using nlohmann::ordered_json;

StageError::StageError(std::string stage, const std::string& what, bool numerical)
    : std::runtime_error(fmt::format("stage '{}' failed: {}", stage, what)),
      stage_(std::move(stage)),
      numerical_(numerical) {}

namespace {

std::ifstream open_in(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError(fmt::format("cannot open '{}'", path.string()));
    return in;
}

std::string slurp(const fs::path& path) {
    auto in = open_in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Writes through a string so the file content is exactly what was formatted.
class Outputs {
public:
    explicit Outputs(fs::path dir) : dir_(std::move(dir)) { fs::create_directories(dir_); }

    void write(const std::string& name, const std::string& content) {
        std::ofstream out(dir_ / name, std::ios::binary | std::ios::trunc);
        if (!out) throw InputError(fmt::format("cannot write '{}'", (dir_ / name).string()));
        out << content;
        if (!out) throw InputError(fmt::format("write failed for '{}'", (dir_ / name).string()));
        names_.push_back(name);
    }
    template <typename Fn>
    void stream(const std::string& name, Fn&& fn) {
        std::ostringstream ss;
        fn(ss);
        write(name, ss.str());
    }
    void json(const std::string& name, const ordered_json& j) { write(name, j.dump(2) + "\n"); }

    const std::vector<std::string>& names() const { return names_; }

private:
    fs::path dir_;
    std::vector<std::string> names_;
};

ParamSeries load_params(const fs::path& p) {
    auto in = open_in(p);
    return read_param_series_csv(in);
}

FluctuationSeries load_fluctuations(const fs::path& p) {
    auto in = open_in(p);
    return read_fluctuations_csv(in);
}

ordered_json cubic_json(const CubicFit& c) {
    return {{"a", c.a}, {"b", c.b}, {"c", c.c}, {"d", c.d}, {"r_squared", c.r_squared},
            {"se", {c.se[0], c.se[1], c.se[2], c.se[3]}}};
}

/// Runs one diagnostic; a failure is recorded instead of halting the stage.
template <typename Fn>
void guarded(ordered_json& j, const char* key, Fn&& fn) {
    try {
        j[key] = fn();
    } catch (const InputError& e) {
        j[key] = {{"error", e.what()}};
    } catch (const NumericalError& e) {
        j[key] = {{"error", e.what()}};
    }
}

std::string spectrum_dat(const Spectrum& s, const char* name) {
    std::string out = fmt::format("# frequency power  ({}; {} gap values interpolated)\n", name, s.interpolated);
    for (const auto& p : s.points) out += fmt::format("{} {}\n", p.frequency, p.power);
    return out;
}

std::string acf_dat(const AcfFit& f) {
    std::string out = fmt::format("# lag acf fit  (beta={} xi={})\n", f.beta, f.xi);
    for (std::size_t k = 0; k < f.acf.size(); ++k) {
        const double fit = f.beta * std::exp(-static_cast<double>(k) / f.xi);
        out += fmt::format("{} {} {}\n", k, f.acf[k], fit);
    }
    return out;
}

SimConfig sim_config(const PipelineConfig& cfg, std::int64_t default_steps) {
    SimConfig s;
    s.dt = cfg.sim.dt;
    s.n_steps = cfg.sim.n_steps > 0 ? cfg.sim.n_steps : default_steps;
    s.seed = cfg.seed;
    s.divergence_bound = cfg.sim.divergence_bound;
    return s;
}

constexpr std::int64_t kDefaultSimSteps = 1000;

std::vector<std::string> simulate_into(Outputs& out, const CoeffSurfaces& s, const PipelineConfig& cfg,
                                       std::int64_t steps) {
    const auto paths = ensemble(s, sim_config(cfg, steps), cfg.sim.n_paths, cfg.threads);
    for (std::size_t i = 0; i < paths.size(); ++i) {
        const auto name = i == 0 ? std::string("sim_path.csv") : fmt::format("sim_path_{}.csv", i);
        out.stream(name, [&](std::ostream& o) { write_sim_path_csv(o, paths[i]); });
    }
    return out.names();
}

}  // namespace

std::string manifest_json(const Manifest& m) {
    ordered_json j;
    j["config_sha256"] = m.config_sha256;
    j["files"] = ordered_json::array();
    for (const auto& f : m.files) {
        j["files"].push_back({{"path", f.path}, {"sha256", f.sha256}, {"bytes", f.bytes}});
    }
    return j.dump(2) + "\n";
}

std::vector<std::string> run_fit(const fs::path& input, const PipelineConfig& cfg, const fs::path& out_dir) {
    const auto ticks = load_ticks(input, cfg.format);
    auto windows = windowize(ticks, cfg.ingest);
    auto fitted = fit_all(windows.windows, windows.slots_per_day, windows.open_slot, cfg.fit);
    SkipLog skips = std::move(windows.skips);
    skips.insert(skips.end(), fitted.skips.begin(), fitted.skips.end());

    Outputs out(out_dir);
    out.stream("params.csv", [&](std::ostream& o) { write_param_series_csv(o, fitted.series); });
    out.stream("skip_log.jsonl", [&](std::ostream& o) { write_skip_log(o, skips); });
    return out.names();
}

std::vector<std::string> run_decompose(const fs::path& params_csv, const PipelineConfig& cfg,
                                       const fs::path& out_dir) {
    const auto series = load_params(params_csv);
    const auto phi = daily_pattern(series, Component::phi, cfg.pattern);
    const auto theta = daily_pattern(series, Component::theta, cfg.pattern);
    const auto det = detrend(series, phi, theta, cfg.detrend_sigma);

    ordered_json cubic;
    cubic["phi"] = cubic_json(fit_cubic(phi));
    cubic["theta"] = cubic_json(fit_cubic(theta));
    cubic["removed"] = {{"phi", det.removed_phi}, {"theta", det.removed_theta}};

    Outputs out(out_dir);
    out.stream("fluctuations.csv", [&](std::ostream& o) { write_fluctuations_csv(o, det.fluctuations); });
    out.stream("patterns.csv", [&](std::ostream& o) { write_patterns_csv(o, phi, theta); });
    out.json("cubic.json", cubic);
    return out.names();
}

std::vector<std::string> run_diagnose(const fs::path& fluctuations_csv, const PipelineConfig& cfg,
                                      const fs::path& out_dir) {
    const auto fl = load_fluctuations(fluctuations_csv);
    const auto& d = cfg.diagnostics;
    Outputs out(out_dir);
    ordered_json j;

    const std::pair<const char*, const std::vector<double>*> comps[] = {{"phi", &fl.phi_f},
                                                                        {"theta", &fl.theta_f}};
    for (const auto& [name, values] : comps) {
        std::vector<double> clock, breaks;
        if (fl.slots_per_day > 0) {
            clock = to_clock_grid(fl.window_index, *values, fl.slots_per_day, fl.open_slot);
            breaks = with_day_breaks(fl.window_index, *values, fl.slots_per_day);
        } else {
            clock = *values;
            breaks = *values;
        }
        ordered_json c;
        guarded(c, "spectrum", [&] {
            const auto s = power_spectrum(clock);
            out.write(fmt::format("spectrum_{}.dat", name), spectrum_dat(s, name));
            const auto peak = std::max_element(s.points.begin() + 1, s.points.end(),
                                               [](const auto& a, const auto& b) { return a.power < b.power; });
            return ordered_json{{"points", s.points.size()},
                                {"interpolated", s.interpolated},
                                {"peak_frequency", peak->frequency},
                                {"peak_power", peak->power}};
        });
        guarded(c, "acf", [&] {
            const auto f = acf_exponential_fit(clock, d.max_lag, d.noise_floor_z);
            out.write(fmt::format("acf_{}.dat", name), acf_dat(f));
            return ordered_json{{"beta", f.beta}, {"xi", f.xi}, {"lags_used", f.lags_used},
                                {"r_squared", f.r_squared}};
        });
        guarded(c, "markov", [&] {
            const auto m = markov_test(breaks, d.markov_lag, d.markov_bins);
            return ordered_json{{"lag", m.lag}, {"t_ratio", m.t_ratio}, {"cells", m.cells},
                                {"mean_abs_z", m.mean_abs_z}};
        });
        guarded(c, "pawula", [&] {
            const auto p = pawula_check(breaks, d.pawula_tau, d.pawula_bins);
            return ordered_json{{"tau", p.tau}, {"bins", p.bins.size()}, {"pooled_ratio", p.pooled_ratio}};
        });
        j[name] = c;
    }
    guarded(j, "gaussian", [&] {
        const auto g = joint_gaussian_summary(fl);
        const auto se = g.sigma_se();
        return ordered_json{{"mu", {g.mu[0], g.mu[1]}},
                            {"sigma", {{g.sigma[0][0], g.sigma[0][1]}, {g.sigma[1][0], g.sigma[1][1]}}},
                            {"sigma_se", {se[0], se[1], se[2]}},
                            {"determinant", g.determinant},
                            {"n", g.n}};
    });
    out.json("diagnostics.json", j);
    return out.names();
}

std::vector<std::string> run_km(const fs::path& fluctuations_csv, const PipelineConfig& cfg,
                                const fs::path& out_dir) {
    const auto fl = load_fluctuations(fluctuations_csv);
    const auto grid = build_grid(fl, cfg.km.bins_per_axis, cfg.km.min_count);
    const auto field = estimate_km(fl, grid, cfg.km.max_tau, cfg.km.convention);
    Outputs out(out_dir);
    out.stream("km_field.csv", [&](std::ostream& o) { write_km_csv(o, field); });
    return out.names();
}

std::vector<std::string> run_surfaces(const fs::path& km_csv, const PipelineConfig& cfg,
                                      const fs::path& out_dir, const fs::path& fluctuations_csv) {
    auto in = open_in(km_csv);
    const auto field = read_km_csv(in);
    const auto gfield = g_from_d2(field);
    const auto drift = fit_drift_surfaces(field);
    const auto g = fit_g_surfaces(gfield);
    CoeffSurfaces s;
    s.d1_phi = drift.phi;
    s.d1_theta = drift.theta;
    s.g_pp = g.pp;
    s.g_tt = g.tt;
    s.g_pt = g.pt;
    s.r_squared = {drift.r2_phi, drift.r2_theta, g.r2_pp, g.r2_tt, g.r2_pt};

    Outputs out(out_dir);
    if (cfg.refine.enabled) {
        if (fluctuations_csv.empty()) throw InputError("refine.enabled requires the fluctuation series");
        RefineOptions opts;
        opts.enabled = true;
        opts.max_relative = cfg.refine.max_relative;
        opts.sweeps = cfg.refine.sweeps;
        opts.sim = sim_config(cfg, 0);
        const auto r = refine_surfaces(s, load_fluctuations(fluctuations_csv), opts);
        out.json("refine.json", {{"ks_before", r.ks_before}, {"ks_after", r.ks_after}, {"accepted", r.accepted}});
        s = r.surfaces;
    }
    out.write("surfaces.json", dump_surfaces(s));
    out.stream("g_field.dat", [&](std::ostream& o) {
        o << "# phi_c theta_c n g_pp g_pt g_tt floored\n";
        for (const auto& b : gfield.bins) {
            o << fmt::format("{} {} {} {} {} {} {}\n", b.phi_c, b.theta_c, b.n, b.g(0, 0), b.g(0, 1),
                             b.g(1, 1), b.floored ? 1 : 0);
        }
        for (int e : gfield.excluded) o << "# excluded bin " << e << '\n';
    });
    return out.names();
}

std::vector<std::string> run_simulate(const fs::path& surfaces_json, const PipelineConfig& cfg,
                                      const fs::path& out_dir) {
    const auto s = parse_surfaces(slurp(surfaces_json));
    Outputs out(out_dir);
    return simulate_into(out, s, cfg, kDefaultSimSteps);
}

std::vector<std::string> run_moments(const fs::path& params_csv, const fs::path& surfaces_json,
                                     const PipelineConfig& cfg, const fs::path& out_dir) {
    const auto series = load_params(params_csv);
    const auto s = parse_surfaces(slurp(surfaces_json));
    if (cfg.moments.max_order < 1) throw InputError("moments.max_order must be >= 1");
    const auto phi = daily_pattern(series, Component::phi, cfg.pattern);
    const auto theta = daily_pattern(series, Component::theta, cfg.pattern);
    // The model distribution pools every ensemble path; moments.csv keeps path 0.
    const auto paths = ensemble(s, sim_config(cfg, static_cast<std::int64_t>(series.size())),
                                cfg.sim.n_paths, cfg.threads);

    std::vector<MomentSeries> all;
    ordered_json summary = ordered_json::array();
    Outputs out(out_dir);
    for (int n = 1; n <= cfg.moments.max_order; ++n) {
        auto emp = empirical_moments(series, n);
        auto model = recompose_moments(phi, theta, to_fluctuations(paths.front()), n,
                                       MomentSource::model_direct);
        MomentSeries pooled = model;
        for (std::size_t i = 1; i < paths.size(); ++i) {
            const auto more = recompose_moments(phi, theta, to_fluctuations(paths[i]), n,
                                                MomentSource::model_direct);
            pooled.values.insert(pooled.values.end(), more.values.begin(), more.values.end());
        }
        const auto cmp = moment_distributions(emp, pooled, cfg.moments.bins);
        summary.push_back({{"n", n}, {"ks", cmp.ks}, {"overlap", cmp.overlap}});
        out.stream(fmt::format("moment_pdf_{}.dat", n), [&](std::ostream& o) {
            o << "# s_lo s_hi pdf_empirical pdf_model\n";
            for (std::size_t k = 0; k < cmp.pdf_model.size(); ++k) {
                o << fmt::format("{} {} {} {}\n", cmp.edges[k], cmp.edges[k + 1], cmp.pdf_empirical[k],
                                 cmp.pdf_model[k]);
            }
        });
        all.push_back(std::move(emp));
        all.push_back(std::move(model));
    }
    out.stream("moments.csv", [&](std::ostream& o) { write_moments_csv(o, all); });
    out.json("moments_summary.json", summary);
    return out.names();
}

Manifest run_pipeline(const fs::path& input, const PipelineConfig& cfg, const fs::path& out_dir) {
    fs::create_directories(out_dir);
    std::vector<std::string> names;
    auto stage = [&](const char* name, auto&& fn) {
        try {
            const auto written = fn();
            names.insert(names.end(), written.begin(), written.end());
        } catch (const NumericalError& e) {
            throw StageError(name, e.what(), true);
        } catch (const InputError& e) {
            throw StageError(name, e.what(), false);
        } catch (const fs::filesystem_error& e) {
            throw StageError(name, e.what(), false);
        }
    };
    const auto params = out_dir / "params.csv";
    const auto fluct = out_dir / "fluctuations.csv";
    const auto km = out_dir / "km_field.csv";
    const auto surfaces = out_dir / "surfaces.json";

    stage("fit", [&] { return run_fit(input, cfg, out_dir); });
    stage("decompose", [&] { return run_decompose(params, cfg, out_dir); });
    stage("diagnose", [&] { return run_diagnose(fluct, cfg, out_dir); });
    stage("km", [&] { return run_km(fluct, cfg, out_dir); });
    stage("surfaces", [&] { return run_surfaces(km, cfg, out_dir, fluct); });
    stage("simulate", [&] {
        const auto s = parse_surfaces(slurp(surfaces));
        Outputs out(out_dir);
        return simulate_into(out, s, cfg, static_cast<std::int64_t>(load_fluctuations(fluct).size()));
    });
    stage("moments", [&] { return run_moments(params, surfaces, cfg, out_dir); });

    const auto canonical = canonical_config(cfg);
    {
        Outputs out(out_dir);
        out.write("config.conf", canonical);
        names.push_back("config.conf");
    }
    std::sort(names.begin(), names.end());
    names.erase(std::unique(names.begin(), names.end()), names.end());

    Manifest m;
    m.config_sha256 = sha256_hex(canonical);
    for (const auto& n : names) {
        const auto content = slurp(out_dir / n);
        m.files.push_back({n, sha256_hex(content), content.size()});
    }
    std::ofstream(out_dir / "manifest.json", std::ios::binary | std::ios::trunc) << manifest_json(m);
    return m;
}

}  // namespace superstat
