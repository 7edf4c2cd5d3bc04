#include "nmq/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "nmq/errors.hpp"
#include "nmq/rng.hpp"

namespace nmq {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& where, const std::string& what) {
    throw ConfigError("config." + where + ": " + what);
}

void require_keys(const json& obj, const std::string& where,
                  const std::set<std::string>& allowed,
                  const std::set<std::string>& required) {
    if (!obj.is_object()) fail(where, "expected an object");
    for (const auto& item : obj.items()) {
        if (!allowed.count(item.key())) fail(where, "unknown key \"" + item.key() + "\"");
    }
    for (const std::string& key : required) {
        if (!obj.contains(key)) fail(where, "missing required key \"" + key + "\"");
    }
}

double get_number(const json& obj, const std::string& where, const std::string& key) {
    const json& v = obj.at(key);
    if (!v.is_number()) fail(where + "." + key, "expected a number");
    return v.get<double>();
}

std::uint64_t get_unsigned(const json& obj, const std::string& where, const std::string& key) {
    const json& v = obj.at(key);
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0))
        fail(where + "." + key, "expected a nonnegative integer");
    return v.get<std::uint64_t>();
}

cplx parse_complex_pair(const json& v, const std::string& where) {
    if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
        fail(where, "expected a [re, im] pair");
    return {v[0].get<double>(), v[1].get<double>()};
}

ComplexMatrix parse_matrix(const json& v, const std::string& where) {
    if (!v.is_array() || v.empty()) fail(where, "expected a non-empty array of rows");
    const std::size_t rows = v.size();
    std::size_t cols = 0;
    std::vector<cplx> entries;
    for (std::size_t i = 0; i < rows; ++i) {
        const json& row = v[i];
        if (!row.is_array() || row.empty())
            fail(where + "[" + std::to_string(i) + "]", "expected a non-empty row array");
        if (i == 0) {
            cols = row.size();
            entries.reserve(rows * cols);
        } else if (row.size() != cols) {
            fail(where + "[" + std::to_string(i) + "]", "ragged rows");
        }
        for (std::size_t j = 0; j < cols; ++j)
            entries.push_back(parse_complex_pair(
                row[j], where + "[" + std::to_string(i) + "][" + std::to_string(j) + "]"));
    }
    return ComplexMatrix(rows, cols, std::move(entries));
}

std::size_t matrix_dim_of(const json& v, const std::string& where) {
    if (!v.is_array() || v.empty()) fail(where, "expected a non-empty array of rows");
    return v.size();
}

CouplingKernel build_kernel(const json& kernel_obj, const LatticeConfig& lattice) {
    require_keys(kernel_obj, "kernel",
                 {"samples", "exponential", "markov"}, {});
    const int variants = static_cast<int>(kernel_obj.contains("samples")) +
                         static_cast<int>(kernel_obj.contains("exponential")) +
                         static_cast<int>(kernel_obj.contains("markov"));
    if (variants != 1)
        fail("kernel", "exactly one of \"samples\", \"exponential\", \"markov\" is required");

    CouplingKernel kappa;
    kappa.dt = lattice.dt;
    if (kernel_obj.contains("samples")) {
        const json& samples = kernel_obj.at("samples");
        if (!samples.is_array() || samples.empty())
            fail("kernel.samples", "expected a non-empty array of [re, im] pairs");
        if (samples.size() != lattice.bins)
            fail("kernel.samples", "sample count " + std::to_string(samples.size()) +
                                       " must equal lattice.bins = " +
                                       std::to_string(lattice.bins));
        for (std::size_t k = 0; k < samples.size(); ++k)
            kappa.samples.push_back(parse_complex_pair(
                samples[k], "kernel.samples[" + std::to_string(k) + "]"));
    } else if (kernel_obj.contains("exponential")) {
        const json& fam = kernel_obj.at("exponential");
        require_keys(fam, "kernel.exponential", {"gamma", "lambda"}, {"gamma", "lambda"});
        const double gamma = get_number(fam, "kernel.exponential", "gamma");
        const double lambda = get_number(fam, "kernel.exponential", "lambda");
        if (gamma <= 0.0) fail("kernel.exponential.gamma", "must be positive");
        if (lambda <= 0.0) fail("kernel.exponential.lambda", "must be positive");
        const double amp = std::sqrt(gamma * lambda);
        kappa.samples.resize(lattice.bins);
        for (std::size_t k = 0; k < lattice.bins; ++k)
            kappa.samples[k] = amp * std::exp(-lambda * static_cast<double>(k) * lattice.dt);
    } else {
        const json& fam = kernel_obj.at("markov");
        require_keys(fam, "kernel.markov", {"gamma"}, {"gamma"});
        const double gamma = get_number(fam, "kernel.markov", "gamma");
        if (gamma <= 0.0) fail("kernel.markov.gamma", "must be positive");
        if (lattice.bins != 1)
            fail("kernel.markov", "requires lattice.bins = 1 (flat-spectrum limit)");
        kappa.samples = {std::sqrt(gamma) / lattice.dt};
    }
    return kappa;
}

}  // namespace

std::uint64_t ExperimentConfig::config_hash() const {
    return fnv1a64(canonical_text.data(), canonical_text.size());
}

ExperimentConfig parse_config(const std::string& json_text) {
    json root;
    try {
        root = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config: JSON parse error: ") + e.what());
    }

    require_keys(root, "<root>", {"system", "kernel", "lattice", "run", "outputs", "threads"},
                 {"system", "kernel", "lattice", "run"});

    ExperimentConfig cfg;

    // Lattice first: its fields gate the dimension cap check, which must run
    // before any matrix is materialized.
    const json& lattice_obj = root.at("lattice");
    require_keys(lattice_obj, "lattice", {"dt", "bins", "n_max", "dimension_cap"},
                 {"dt", "bins", "n_max"});
    cfg.lattice.dt = get_number(lattice_obj, "lattice", "dt");
    cfg.lattice.bins = static_cast<std::size_t>(get_unsigned(lattice_obj, "lattice", "bins"));
    cfg.lattice.n_max = static_cast<int>(get_unsigned(lattice_obj, "lattice", "n_max"));
    if (lattice_obj.contains("dimension_cap"))
        cfg.lattice.dimension_cap =
            static_cast<std::size_t>(get_unsigned(lattice_obj, "lattice", "dimension_cap"));

    const json& system_obj = root.at("system");
    require_keys(system_obj, "system", {"hamiltonian", "coupling", "label", "initial"},
                 {"hamiltonian", "coupling"});
    const std::size_t system_dim = matrix_dim_of(system_obj.at("hamiltonian"), "system.hamiltonian");
    try {
        cfg.lattice.validate(system_dim);
    } catch (const DimensionCapError& e) {
        fail("lattice", std::string(e.what()) + " (d_S * (n_max+1)^bins over the cap)");
    } catch (const ConfigError& e) {
        throw ConfigError(std::string("config.") + (std::string(e.what()).rfind("config.", 0) == 0
                                                        ? std::string(e.what()).substr(7)
                                                        : e.what()));
    }

    cfg.system.hamiltonian = parse_matrix(system_obj.at("hamiltonian"), "system.hamiltonian");
    cfg.system.coupling = parse_matrix(system_obj.at("coupling"), "system.coupling");
    if (system_obj.contains("label")) {
        if (!system_obj.at("label").is_string()) fail("system.label", "expected a string");
        cfg.system.label = system_obj.at("label").get<std::string>();
    }
    try {
        cfg.system.validate();
    } catch (const ConfigError& e) {
        fail("system", e.what());
    }

    if (system_obj.contains("initial")) {
        const json& init = system_obj.at("initial");
        if (!init.is_array() || init.size() != system_dim)
            fail("system.initial", "expected " + std::to_string(system_dim) + " [re, im] pairs");
        cfg.initial = StateVector(system_dim);
        for (std::size_t i = 0; i < system_dim; ++i)
            cfg.initial.amplitudes[i] =
                parse_complex_pair(init[i], "system.initial[" + std::to_string(i) + "]");
        const double n2 = cfg.initial.norm_squared();
        if (std::abs(n2 - 1.0) > 1e-6) fail("system.initial", "state is not normalized");
        cfg.initial.normalize();
        cfg.initial.norm_weight = 1.0;
    } else {
        cfg.initial = StateVector(system_dim);
        cfg.initial.amplitudes[system_dim - 1] = 1.0;
    }

    cfg.kernel = build_kernel(root.at("kernel"), cfg.lattice);

    const json& run_obj = root.at("run");
    require_keys(run_obj, "run", {"steps", "trajectories", "seed"}, {"steps", "seed"});
    cfg.run.steps = static_cast<std::size_t>(get_unsigned(run_obj, "run", "steps"));
    if (cfg.run.steps == 0) fail("run.steps", "must be >= 1");
    cfg.run.seed = get_unsigned(run_obj, "run", "seed");
    if (run_obj.contains("trajectories")) {
        cfg.run.trajectories =
            static_cast<std::size_t>(get_unsigned(run_obj, "run", "trajectories"));
        if (cfg.run.trajectories == 0) fail("run.trajectories", "must be >= 1");
    }

    if (root.contains("outputs")) {
        const json& out_obj = root.at("outputs");
        require_keys(out_obj, "outputs", {"directory", "formats"}, {});
        if (out_obj.contains("directory")) {
            if (!out_obj.at("directory").is_string()) fail("outputs.directory", "expected a string");
            cfg.outputs.directory = out_obj.at("directory").get<std::string>();
        }
        if (out_obj.contains("formats")) {
            const json& fmts = out_obj.at("formats");
            if (!fmts.is_array() || fmts.empty())
                fail("outputs.formats", "expected a non-empty array");
            cfg.outputs.csv = false;
            cfg.outputs.json = false;
            for (const json& f : fmts) {
                if (!f.is_string()) fail("outputs.formats", "expected strings");
                const std::string s = f.get<std::string>();
                if (s == "csv") {
                    cfg.outputs.csv = true;
                } else if (s == "json") {
                    cfg.outputs.json = true;
                } else {
                    fail("outputs.formats", "unknown format \"" + s + "\" (csv, json)");
                }
            }
        }
    }

    if (root.contains("threads")) {
        const json& t = root.at("threads");
        if (!t.is_number_integer() || t.get<std::int64_t>() < 1)
            fail("threads", "expected a positive integer");
        cfg.threads = static_cast<int>(t.get<std::int64_t>());
    }

    cfg.canonical_text = root.dump();
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open config file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

}  // namespace nmq
