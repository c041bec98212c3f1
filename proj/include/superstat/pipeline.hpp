#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "superstat/config.hpp"

namespace superstat {

/// Raised by run_pipeline with the name of the failing stage; the original
/// error is nested.
class StageError : public std::runtime_error {
public:
    StageError(std::string stage, const std::string& what, bool numerical);
    const std::string& stage() const { return stage_; }
    bool numerical() const { return numerical_; }

private:
    std::string stage_;
    bool numerical_;
};

struct ManifestEntry {
    std::string path;  // relative to the output directory
    std::string sha256;
    std::size_t bytes = 0;
};

struct Manifest {
    std::string config_sha256;
    std::vector<ManifestEntry> files;
};

std::string manifest_json(const Manifest& m);

/// Each stage writes into `out_dir` and returns the written file names.
std::vector<std::string> run_fit(const std::filesystem::path& input, const PipelineConfig& cfg,
                                 const std::filesystem::path& out_dir);
std::vector<std::string> run_decompose(const std::filesystem::path& params_csv,
                                       const PipelineConfig& cfg,
                                       const std::filesystem::path& out_dir);
std::vector<std::string> run_diagnose(const std::filesystem::path& fluctuations_csv,
                                      const PipelineConfig& cfg,
                                      const std::filesystem::path& out_dir);
std::vector<std::string> run_km(const std::filesystem::path& fluctuations_csv,
                                const PipelineConfig& cfg, const std::filesystem::path& out_dir);
std::vector<std::string> run_surfaces(const std::filesystem::path& km_csv,
                                      const PipelineConfig& cfg,
                                      const std::filesystem::path& out_dir,
                                      const std::filesystem::path& fluctuations_csv = {});
std::vector<std::string> run_simulate(const std::filesystem::path& surfaces_json,
                                      const PipelineConfig& cfg,
                                      const std::filesystem::path& out_dir);
std::vector<std::string> run_moments(const std::filesystem::path& params_csv,
                                     const std::filesystem::path& surfaces_json,
                                     const PipelineConfig& cfg,
                                     const std::filesystem::path& out_dir);

/// All stages in order, then `manifest.json` with content hashes.
Manifest run_pipeline(const std::filesystem::path& input, const PipelineConfig& cfg,
                      const std::filesystem::path& out_dir);

}  // namespace superstat
