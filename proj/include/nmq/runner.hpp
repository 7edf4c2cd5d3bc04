#ifndef NMQ_RUNNER_HPP
#define NMQ_RUNNER_HPP

#include <map>
#include <string>

#include "nmq/config.hpp"

namespace nmq {

inline constexpr const char* kVersion = "0.1.0";

// Reproducibility envelope written next to every subcommand's outputs:
// config hash, tool version, wall-clock, per-file checksums (FNV-1a 64 of
// the file bytes). Identical config + seed reproduce identical checksums.
struct RunManifest {
    std::string subcommand;
    std::string version = kVersion;
    std::string config_hash;
    std::uint64_t seed = 0;
    double wall_ms = 0.0;
    std::map<std::string, std::string> output_checksums;  // file name -> hex

    std::string to_json() const;
};

struct RunOutcome {
    RunManifest manifest;
    std::string report;   // pass/fail lines (validate), or a short summary
    bool validation_failed = false;
};

// Executes one subcommand ("factorize", "trajectory", "ensemble",
// "nonselective", "validate"), writing output files atomically into
// cfg.outputs.directory plus manifest.json. Throws ConfigError / IoError /
// NumericError; "validate" reports failures via RunOutcome instead of
// throwing.
RunOutcome run_subcommand(const ExperimentConfig& cfg, const std::string& subcommand);

}  // namespace nmq

#endif
