#include "nmq.h"

#include <cstring>
#include <string>

#include "nmq/config.hpp"
#include "nmq/errors.hpp"
#include "nmq/kernel.hpp"
#include "nmq/runner.hpp"

namespace {

thread_local std::string g_last_error = "";

void set_error(const std::string& msg) { g_last_error = msg; }

nmq_status status_of(const std::exception& e) {
    if (dynamic_cast<const nmq::ConfigError*>(&e)) return NMQ_ERR_CONFIG;
    if (dynamic_cast<const nmq::IoError*>(&e)) return NMQ_ERR_IO;
    if (dynamic_cast<const nmq::NumericError*>(&e)) return NMQ_ERR_NUMERIC;
    if (dynamic_cast<const nmq::Error*>(&e)) return NMQ_ERR_NUMERIC;
    return NMQ_ERR_NUMERIC;
}

template <typename Fn>
nmq_status guarded(Fn&& fn) {
    try {
        return fn();
    } catch (const std::exception& e) {
        set_error(e.what());
        return status_of(e);
    } catch (...) {
        set_error("unknown error");
        return NMQ_ERR_NUMERIC;
    }
}

std::vector<nmq::cplx> from_interleaved(const double* data, size_t n) {
    std::vector<nmq::cplx> v(n);
    for (size_t i = 0; i < n; ++i) v[i] = nmq::cplx(data[2 * i], data[2 * i + 1]);
    return v;
}

void to_interleaved(const std::vector<nmq::cplx>& v, double* out) {
    for (size_t i = 0; i < v.size(); ++i) {
        out[2 * i] = v[i].real();
        out[2 * i + 1] = v[i].imag();
    }
}

}  // namespace

struct nmq_experiment {
    nmq::ExperimentConfig config;
    std::string report;
};

extern "C" {

const char* nmq_version(void) { return nmq::kVersion; }

const char* nmq_last_error(void) { return g_last_error.c_str(); }

nmq_status nmq_experiment_parse(const char* json_text, nmq_experiment** out) {
    if (!json_text || !out) {
        set_error("nmq_experiment_parse: null argument");
        return NMQ_ERR_INVALID;
    }
    *out = nullptr;
    return guarded([&]() {
        auto* exp = new nmq_experiment{nmq::parse_config(json_text), {}};
        *out = exp;
        return NMQ_OK;
    });
}

nmq_status nmq_experiment_load(const char* path, nmq_experiment** out) {
    if (!path || !out) {
        set_error("nmq_experiment_load: null argument");
        return NMQ_ERR_INVALID;
    }
    *out = nullptr;
    return guarded([&]() {
        auto* exp = new nmq_experiment{nmq::load_config(path), {}};
        *out = exp;
        return NMQ_OK;
    });
}

void nmq_experiment_free(nmq_experiment* exp) { delete exp; }

nmq_status nmq_experiment_set_seed(nmq_experiment* exp, uint64_t seed) {
    if (!exp) {
        set_error("null experiment handle");
        return NMQ_ERR_INVALID;
    }
    exp->config.run.seed = seed;
    return NMQ_OK;
}

nmq_status nmq_experiment_set_output_dir(nmq_experiment* exp, const char* dir) {
    if (!exp || !dir) {
        set_error("null experiment handle or directory");
        return NMQ_ERR_INVALID;
    }
    exp->config.outputs.directory = dir;
    return NMQ_OK;
}

nmq_status nmq_experiment_set_threads(nmq_experiment* exp, int threads) {
    if (!exp || threads < 1) {
        set_error("threads must be >= 1");
        return NMQ_ERR_INVALID;
    }
    exp->config.threads = threads;
    return NMQ_OK;
}

nmq_status nmq_experiment_set_format(nmq_experiment* exp, const char* format) {
    if (!exp || !format) {
        set_error("null experiment handle or format");
        return NMQ_ERR_INVALID;
    }
    const std::string f = format;
    bool csv = false, js = false;
    if (f == "csv") {
        csv = true;
    } else if (f == "json") {
        js = true;
    } else if (f == "csv,json" || f == "json,csv") {
        csv = js = true;
    } else {
        set_error("unknown format \"" + f + "\" (csv, json, csv,json)");
        return NMQ_ERR_INVALID;
    }
    exp->config.outputs.csv = csv;
    exp->config.outputs.json = js;
    return NMQ_OK;
}

nmq_status nmq_experiment_run(nmq_experiment* exp, const char* subcommand) {
    if (!exp || !subcommand) {
        set_error("null experiment handle or subcommand");
        return NMQ_ERR_INVALID;
    }
    return guarded([&]() {
        nmq::RunOutcome outcome = nmq::run_subcommand(exp->config, subcommand);
        exp->report = outcome.report;
        if (outcome.validation_failed) {
            set_error("validation failed; see report");
            return NMQ_ERR_NUMERIC;
        }
        return NMQ_OK;
    });
}

const char* nmq_experiment_report(const nmq_experiment* exp) {
    return exp ? exp->report.c_str() : "";
}

nmq_status nmq_kernel_reconstruct(double dt, size_t n, const double* kappa,
                                  double* alpha_out) {
    if (!kappa || !alpha_out || n == 0) {
        set_error("nmq_kernel_reconstruct: bad arguments");
        return NMQ_ERR_INVALID;
    }
    return guarded([&]() {
        nmq::CouplingKernel k;
        k.dt = dt;
        k.samples = from_interleaved(kappa, n);
        const nmq::CorrelationFunction alpha = nmq::reconstruct(k);
        to_interleaved(alpha.samples, alpha_out);
        return NMQ_OK;
    });
}

nmq_status nmq_kernel_factorize(double dt, size_t m, const double* alpha,
                                size_t n_out, double* kappa_out, double* residual_out) {
    if (!alpha || !kappa_out || m == 0 || n_out == 0) {
        set_error("nmq_kernel_factorize: bad arguments");
        return NMQ_ERR_INVALID;
    }
    return guarded([&]() {
        nmq::CorrelationFunction a;
        a.dt = dt;
        a.samples = from_interleaved(alpha, m);
        const nmq::FactorizeResult res = nmq::factorize(a, n_out);
        to_interleaved(res.kernel.samples, kappa_out);
        if (residual_out) *residual_out = res.residual;
        return NMQ_OK;
    });
}

nmq_status nmq_white_noise(size_t n, double dt, uint64_t seed, double* out) {
    if (!out || n == 0) {
        set_error("nmq_white_noise: bad arguments");
        return NMQ_ERR_INVALID;
    }
    return guarded([&]() {
        const nmq::NoisePath path = nmq::sample_white_noise(n, dt, seed);
        to_interleaved(path.bins, out);
        return NMQ_OK;
    });
}

}  // extern "C"
