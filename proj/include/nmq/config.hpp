#ifndef NMQ_CONFIG_HPP
#define NMQ_CONFIG_HPP

#include <cstdint>
#include <string>

#include "nmq/kernel.hpp"
#include "nmq/lattice.hpp"

namespace nmq {

struct RunOptions {
    std::size_t steps = 0;
    std::size_t trajectories = 1;
    std::uint64_t seed = 0;
};

struct OutputOptions {
    std::string directory = "out";
    bool csv = true;
    bool json = false;
};

// Fully validated experiment description. Parsing is strict: unknown keys
// are rejected with their location, cross-field rules (kernel length vs bin
// count, dimension cap) are checked before any state is allocated.
struct ExperimentConfig {
    SystemSpec system;
    StateVector initial;  // normalized; defaults to the highest basis state
    CouplingKernel kernel;
    LatticeConfig lattice;
    RunOptions run;
    OutputOptions outputs;
    int threads = 1;

    std::string canonical_text;  // sorted-key JSON dump used for hashing
    std::uint64_t config_hash() const;
};

// Parses and validates a JSON experiment config. Throws ConfigError with the
// dotted key path of the offending field.
ExperimentConfig parse_config(const std::string& json_text);

// Reads the file and parses it. Throws IoError if unreadable.
ExperimentConfig load_config(const std::string& path);

}  // namespace nmq

#endif
