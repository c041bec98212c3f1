#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>

#include "superstat/decompose.hpp"
#include "superstat/ingest.hpp"
#include "superstat/km.hpp"
#include "superstat/langevin.hpp"
#include "superstat/lognormal.hpp"
#include "superstat/refine.hpp"

namespace superstat {

struct DiagnosticsConfig {
    int max_lag = 144;
    double noise_floor_z = 2.0;
    int markov_lag = 1;
    int markov_bins = 10;
    int pawula_tau = 1;
    int pawula_bins = 10;
};

struct KMConfig {
    int bins_per_axis = 10;
    std::size_t min_count = 50;
    int max_tau = 2;
    DiffusionConvention convention = DiffusionConvention::increments;
};

struct RefineConfig {
    bool enabled = false;
    double max_relative = 0.2;
    int sweeps = 1;
};

struct SimStageConfig {
    double dt = 0.1;
    std::int64_t n_steps = 0;  // 0: length of the fluctuation series
    int n_paths = 1;
    double divergence_bound = 1e6;
};

struct MomentsConfig {
    int max_order = 4;
    int bins = 50;
};

struct PipelineConfig {
    std::uint64_t seed = 1;
    int threads = 1;
    std::string out_dir = "out";
    TickFormat format = TickFormat::csv;

    IngestConfig ingest;
    LogNormalFitOptions fit;
    PatternOptions pattern;
    double detrend_sigma = 5.0;
    DiagnosticsConfig diagnostics;
    KMConfig km;
    RefineConfig refine;
    SimStageConfig sim;
    MomentsConfig moments;
};

/// Key-value text: `key = value` lines grouped under `[section]` headers,
/// `#` comments. Unknown keys are an InputError.
PipelineConfig parse_config(std::string_view text);
PipelineConfig load_config(const std::filesystem::path& path);
std::string serialize_config(const PipelineConfig& cfg);

/// Applies one `section.key=value` override.
void apply_override(PipelineConfig& cfg, std::string_view assignment);

/// Serialization without execution-only settings (threads, out_dir); two
/// runs with equal canonical configs must produce equal outputs.
std::string canonical_config(const PipelineConfig& cfg);

}  // namespace superstat
