// superstat: command-line front end for the volume-price analysis pipeline.
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "superstat/config.hpp"
#include "superstat/error.hpp"
#include "superstat/ingest.hpp"
#include "superstat/pipeline.hpp"
#include "superstat/synthetic.hpp"

namespace fs = std::filesystem;
using namespace superstat;

namespace {

constexpr int kExitInput = 2;
constexpr int kExitNumerical = 3;

struct GlobalFlags {
    std::string config_file;
    std::vector<std::string> overrides;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    std::optional<std::string> format;
    std::optional<int> threads;
};

PipelineConfig resolve(const GlobalFlags& g) {
    PipelineConfig cfg = g.config_file.empty() ? PipelineConfig{} : load_config(g.config_file);
    for (const auto& o : g.overrides) apply_override(cfg, o);
    if (g.seed) cfg.seed = *g.seed;
    if (g.out_dir) cfg.out_dir = *g.out_dir;
    if (g.format) cfg.format = parse_tick_format(*g.format);
    if (g.threads) cfg.threads = *g.threads;
    if (cfg.threads < 1) throw InputError("--threads must be >= 1");
    return cfg;
}

void report(const std::vector<std::string>& written, const fs::path& dir) {
    for (const auto& w : written) std::cout << (dir / w).string() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Windowed log-normal fitting, Langevin reconstruction and moment analysis"};
    app.require_subcommand(1);
    app.fallthrough();

    GlobalFlags g;
    app.add_option("--config", g.config_file, "key = value configuration file")->check(CLI::ExistingFile);
    app.add_option("--set", g.overrides, "override a config entry, e.g. km.max_tau=3");
    app.add_option("--seed", g.seed, "global random seed");
    app.add_option("--out-dir", g.out_dir, "output directory");
    app.add_option("--format", g.format, "tick input format")->check(CLI::IsMember({"csv", "jsonl"}));
    app.add_option("--threads", g.threads, "worker thread cap");

    std::string input, second;
    std::string fluct_for_refine;
    std::optional<std::int64_t> steps;
    std::optional<int> paths;
    std::optional<double> dt;
    FixtureSpec fixture;
    std::string fixture_out = "fixture.csv";

    auto* fit = app.add_subcommand("fit", "fit log-normal parameters per window");
    fit->add_option("input", input, "tick file")->required();
    auto* decompose = app.add_subcommand("decompose", "split parameters into daily pattern and fluctuations");
    decompose->add_option("params", input, "params.csv")->required();
    auto* diagnose = app.add_subcommand("diagnose", "stationarity, Markov and Pawula diagnostics");
    diagnose->add_option("fluctuations", input, "fluctuations.csv")->required();
    auto* km = app.add_subcommand("km", "Kramers-Moyal coefficients on a state grid");
    km->add_option("fluctuations", input, "fluctuations.csv")->required();
    auto* surfaces = app.add_subcommand("surfaces", "fit drift and noise-matrix surfaces");
    surfaces->add_option("km_field", input, "km_field.csv")->required();
    surfaces->add_option("--fluctuations", fluct_for_refine, "fluctuation series used by refine");
    auto* simulate = app.add_subcommand("simulate", "integrate the Langevin system");
    simulate->add_option("surfaces", input, "surfaces.json")->required();
    simulate->add_option("--steps", steps, "emitted states per path");
    simulate->add_option("--paths", paths, "number of paths");
    simulate->add_option("--dt", dt, "integration step");
    auto* moments = app.add_subcommand("moments", "compare empirical and model moments");
    moments->add_option("params", input, "params.csv")->required();
    moments->add_option("surfaces", second, "surfaces.json")->required();
    auto* pipeline = app.add_subcommand("pipeline", "run every stage and write a manifest");
    pipeline->add_option("input", input, "tick file")->required();
    auto* synth = app.add_subcommand("synth", "write a synthetic tick fixture");
    bool pipeline_preset = false;
    synth->add_flag("--pipeline-preset", pipeline_preset, "the fixture used by the determinism test");
    synth->add_option("--assets", fixture.n_assets, "assets per window");
    synth->add_option("--days", fixture.n_days, "trading days");
    synth->add_option("--fixture-seed", fixture.seed, "fixture seed");
    synth->add_option("-o,--output", fixture_out, "output file (inside --out-dir)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitInput;
    }

    try {
        PipelineConfig cfg = resolve(g);
        if (steps) cfg.sim.n_steps = *steps;
        if (paths) cfg.sim.n_paths = *paths;
        if (dt) cfg.sim.dt = *dt;
        const fs::path out = cfg.out_dir;

        if (*fit) {
            report(run_fit(input, cfg, out), out);
        } else if (*decompose) {
            report(run_decompose(input, cfg, out), out);
        } else if (*diagnose) {
            report(run_diagnose(input, cfg, out), out);
        } else if (*km) {
            report(run_km(input, cfg, out), out);
        } else if (*surfaces) {
            report(run_surfaces(input, cfg, out, fluct_for_refine), out);
        } else if (*simulate) {
            report(run_simulate(input, cfg, out), out);
        } else if (*moments) {
            report(run_moments(input, second, cfg, out), out);
        } else if (*pipeline) {
            const auto m = run_pipeline(input, cfg, out);
            std::cout << (out / "manifest.json").string() << " (" << m.files.size() << " files)\n";
        } else if (*synth) {
            fs::create_directories(out);
            if (pipeline_preset) {
                const auto preset = pipeline_fixture_spec();
                fixture.fluctuations = preset.fluctuations;
                fixture.fluctuation_scale = preset.fluctuation_scale;
            }
            const auto fx = make_fixture(fixture);
            std::ofstream f(out / fixture_out, std::ios::binary | std::ios::trunc);
            if (!f) throw InputError("cannot write " + (out / fixture_out).string());
            write_ticks_csv(f, fx.ticks);
            std::cout << (out / fixture_out).string() << '\n';
        }
    } catch (const StageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return e.numerical() ? kExitNumerical : kExitInput;
    } catch (const NumericalError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const InputError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitInput;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitInput;
    }
    return 0;
}
