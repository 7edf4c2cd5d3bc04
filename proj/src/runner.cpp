#include "nmq/runner.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "nmq/errors.hpp"
#include "nmq/monitor.hpp"
#include "nmq/validate.hpp"

namespace nmq {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string hex64(std::uint64_t v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

double purity(const ComplexMatrix& rho) { return (rho * rho).trace().real(); }

void append_rho_header(std::ostringstream& os, std::size_t d, const std::string& prefix) {
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j)
            os << "," << prefix << i << "_" << j << "_re"
               << "," << prefix << i << "_" << j << "_im";
}

void append_rho_row(std::ostringstream& os, const ComplexMatrix& rho) {
    for (const cplx& z : rho.data())
        os << "," << fmt_double(z.real()) << "," << fmt_double(z.imag());
}

json rho_to_json(const ComplexMatrix& rho) {
    json rows = json::array();
    for (std::size_t i = 0; i < rho.rows(); ++i) {
        json row = json::array();
        for (std::size_t j = 0; j < rho.cols(); ++j)
            row.push_back({rho(i, j).real(), rho(i, j).imag()});
        rows.push_back(std::move(row));
    }
    return rows;
}

// Collects (name, content) pairs, then flushes them atomically.
class OutputSet {
public:
    explicit OutputSet(const std::string& directory) : dir_(directory) {}

    void add(const std::string& name, std::string content) {
        files_.emplace_back(name, std::move(content));
    }

    void flush(RunManifest& manifest) const {
        std::error_code ec;
        fs::create_directories(dir_, ec);
        if (ec) throw IoError("cannot create output directory: " + dir_.string());
        for (const auto& [name, content] : files_) {
            const fs::path final_path = dir_ / name;
            const fs::path tmp_path = dir_ / (name + ".tmp");
            {
                std::ofstream out(tmp_path, std::ios::binary | std::ios::trunc);
                if (!out) throw IoError("cannot write file: " + tmp_path.string());
                out << content;
                if (!out) throw IoError("write failed: " + tmp_path.string());
            }
            fs::rename(tmp_path, final_path, ec);
            if (ec) throw IoError("cannot move into place: " + final_path.string());
            manifest.output_checksums[name] = hex64(fnv1a64(content.data(), content.size()));
        }
    }

private:
    fs::path dir_;
    std::vector<std::pair<std::string, std::string>> files_;
};

// --- subcommand bodies -------------------------------------------------------

void run_factorize(const ExperimentConfig& cfg, OutputSet& out, std::string& report) {
    const CorrelationFunction alpha = reconstruct(cfg.kernel);
    const FactorizeResult fact = factorize(alpha, cfg.kernel.bins());

    double kernel_dev = 0.0;
    for (std::size_t k = 0; k < cfg.kernel.bins(); ++k)
        kernel_dev = std::max(kernel_dev,
                              std::abs(fact.kernel.samples[k] - cfg.kernel.samples[k]));

    std::ostringstream corr, kin, kfact;
    write_correlation(corr, alpha);
    write_kernel(kin, cfg.kernel);
    write_kernel(kfact, fact.kernel);
    out.add("correlation.txt", corr.str());
    out.add("kernel_input.txt", kin.str());
    out.add("kernel_factorized.txt", kfact.str());

    json summary;
    summary["schema"] = "nmq.factorize.v1";
    summary["residual"] = fact.residual;
    summary["kernel_deviation"] = kernel_dev;
    summary["lags"] = alpha.lags();
    out.add("summary.json", summary.dump(2) + "\n");

    std::ostringstream rep;
    rep << "factorize: residual=" << fmt_double(fact.residual)
        << " kernel_deviation=" << fmt_double(kernel_dev) << "\n";
    report = rep.str();
}

void run_nonselective(const ExperimentConfig& cfg, OutputSet& out, std::string& report) {
    const std::size_t d = cfg.system.dim();
    const NonselectiveResult ns =
        evolve_nonselective(cfg.system, cfg.kernel, cfg.lattice, cfg.run.steps, cfg.initial);
    const OutputMeanResult om = output_mean_nonselective(cfg.system, cfg.kernel, cfg.lattice,
                                                         cfg.run.steps, cfg.initial);

    if (cfg.outputs.csv) {
        std::ostringstream csv;
        csv << "# nmq nonselective csv v1\n";
        csv << "step,time,purity";
        for (std::size_t i = 0; i < d; ++i) csv << ",pop_" << i;
        append_rho_header(csv, d, "rho_");
        csv << "\n";
        for (const NonselectiveStep& st : ns.steps) {
            csv << st.step << "," << fmt_double(cfg.lattice.dt * static_cast<double>(st.step))
                << "," << fmt_double(purity(st.rho_s));
            for (std::size_t i = 0; i < d; ++i) csv << "," << fmt_double(st.rho_s(i, i).real());
            append_rho_row(csv, st.rho_s);
            csv << "\n";
        }
        out.add("nonselective.csv", csv.str());

        std::ostringstream mcsv;
        mcsv << "# nmq output_mean csv v1\n";
        mcsv << "step,time,re_mean,im_mean,re_pred,im_pred,abs_defect\n";
        for (std::size_t m = 0; m < om.simulated.size(); ++m) {
            mcsv << (m + 1) << "," << fmt_double(cfg.lattice.dt * static_cast<double>(m + 1))
                 << "," << fmt_double(om.simulated[m].real()) << ","
                 << fmt_double(om.simulated[m].imag()) << "," << fmt_double(om.predicted[m].real())
                 << "," << fmt_double(om.predicted[m].imag()) << ","
                 << fmt_double(std::abs(om.simulated[m] - om.predicted[m])) << "\n";
        }
        out.add("output_mean.csv", mcsv.str());
    }
    if (cfg.outputs.json) {
        json doc;
        doc["schema"] = "nmq.nonselective.v1";
        doc["dt"] = cfg.lattice.dt;
        json steps = json::array();
        for (const NonselectiveStep& st : ns.steps) {
            json s;
            s["step"] = st.step;
            s["time"] = cfg.lattice.dt * static_cast<double>(st.step);
            s["purity"] = purity(st.rho_s);
            s["rho"] = rho_to_json(st.rho_s);
            steps.push_back(std::move(s));
        }
        doc["steps"] = std::move(steps);
        json means = json::array();
        for (std::size_t m = 0; m < om.simulated.size(); ++m) {
            json s;
            s["step"] = m + 1;
            s["mean"] = {om.simulated[m].real(), om.simulated[m].imag()};
            s["predicted"] = {om.predicted[m].real(), om.predicted[m].imag()};
            means.push_back(std::move(s));
        }
        doc["output_mean"] = std::move(means);
        out.add("nonselective.json", doc.dump(2) + "\n");
    }

    std::ostringstream rep;
    rep << "nonselective: steps=" << ns.steps.size()
        << " output_mean_defect=" << fmt_double(om.max_defect) << "\n";
    report = rep.str();
}

void run_single_trajectory(const ExperimentConfig& cfg, OutputSet& out, std::string& report) {
    const std::size_t d = cfg.system.dim();
    const std::uint64_t seed = derive_seed(cfg.run.seed, 0);
    const TrajectoryResult tr = run_trajectory(cfg.system, cfg.kernel, cfg.lattice,
                                               cfg.run.steps, seed, cfg.initial);

    if (cfg.outputs.csv) {
        std::ostringstream csv;
        csv << "# nmq trajectory csv v1\n";
        csv << "step,time,re_xi,im_xi,weight,purity";
        append_rho_header(csv, d, "rho_");
        csv << "\n";
        for (std::size_t m = 0; m < tr.states.size(); ++m) {
            const ConditionalMixedState& st = tr.states[m];
            csv << st.step << "," << fmt_double(cfg.lattice.dt * static_cast<double>(st.step))
                << "," << fmt_double(tr.record.bins[m].real()) << ","
                << fmt_double(tr.record.bins[m].imag()) << "," << fmt_double(st.weight) << ","
                << fmt_double(purity(st.rho_s));
            append_rho_row(csv, st.rho_s);
            csv << "\n";
        }
        out.add("trajectory.csv", csv.str());
    }
    if (cfg.outputs.json) {
        json doc;
        doc["schema"] = "nmq.trajectory.v1";
        doc["dt"] = cfg.lattice.dt;
        doc["seed"] = seed;
        json steps = json::array();
        for (std::size_t m = 0; m < tr.states.size(); ++m) {
            const ConditionalMixedState& st = tr.states[m];
            json s;
            s["step"] = st.step;
            s["xi"] = {tr.record.bins[m].real(), tr.record.bins[m].imag()};
            s["weight"] = st.weight;
            s["log_weight"] = st.log_weight;
            s["purity"] = purity(st.rho_s);
            s["rho"] = rho_to_json(st.rho_s);
            steps.push_back(std::move(s));
        }
        doc["steps"] = std::move(steps);
        out.add("trajectory.json", doc.dump(2) + "\n");
    }

    std::ostringstream rec;
    write_record(rec, tr.record);
    out.add("record.txt", rec.str());

    std::ostringstream cond;
    write_conditional_states(cond, tr.states);
    out.add("conditional_states.txt", cond.str());

    std::ostringstream rep;
    rep << "trajectory: steps=" << tr.states.size() << " seed=" << seed << "\n";
    report = rep.str();
}

void run_ensemble(const ExperimentConfig& cfg, OutputSet& out, std::string& report) {
    const std::size_t d = cfg.system.dim();
    const EnsembleStats stats = ensemble_conditional_stats(
        cfg.system, cfg.kernel, cfg.lattice, cfg.run.steps, cfg.run.seed, cfg.initial,
        cfg.run.trajectories, cfg.threads);

    if (cfg.outputs.csv) {
        std::ostringstream csv;
        csv << "# nmq ensemble csv v1\n";
        csv << "step,time";
        append_rho_header(csv, d, "mean_rho_");
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = 0; j < d; ++j)
                csv << ",se_rho_" << i << "_" << j << "_re"
                    << ",se_rho_" << i << "_" << j << "_im";
        csv << "\n";
        for (std::size_t m = 0; m < stats.mean_rho.size(); ++m) {
            csv << (m + 1) << "," << fmt_double(cfg.lattice.dt * static_cast<double>(m + 1));
            append_rho_row(csv, stats.mean_rho[m]);
            for (std::size_t e = 0; e < d * d; ++e)
                csv << "," << fmt_double(stats.se_re[m].data()[e].real()) << ","
                    << fmt_double(stats.se_im[m].data()[e].real());
            csv << "\n";
        }
        out.add("ensemble_mean.csv", csv.str());
    }
    if (cfg.outputs.json) {
        json doc;
        doc["schema"] = "nmq.ensemble.v1";
        doc["dt"] = cfg.lattice.dt;
        doc["trajectories"] = stats.trajectories;
        json steps = json::array();
        for (std::size_t m = 0; m < stats.mean_rho.size(); ++m) {
            json s;
            s["step"] = m + 1;
            s["mean_rho"] = rho_to_json(stats.mean_rho[m]);
            steps.push_back(std::move(s));
        }
        doc["steps"] = std::move(steps);
        out.add("ensemble.json", doc.dump(2) + "\n");
    }

    json summary;
    summary["schema"] = "nmq.ensemble.summary.v1";
    summary["trajectories"] = stats.trajectories;
    summary["seed"] = cfg.run.seed;
    summary["seed_rule"] = "trajectory i uses splitmix64(seed + golden * (i + 1))";
    out.add("summary.json", summary.dump(2) + "\n");

    std::ostringstream rep;
    rep << "ensemble: trajectories=" << stats.trajectories << " steps=" << cfg.run.steps << "\n";
    report = rep.str();
}

bool run_validate(const ExperimentConfig& cfg, OutputSet& out, std::string& report) {
    const ValidationReport vr = run_validation(&cfg);
    report = vr.text();
    json doc;
    doc["schema"] = "nmq.validate.v1";
    json checks = json::array();
    for (const ValidationCheck& c : vr.checks) {
        json jc;
        jc["name"] = c.name;
        jc["pass"] = c.pass;
        jc["measured"] = c.measured;
        jc["tolerance"] = c.tolerance;
        checks.push_back(std::move(jc));
    }
    doc["checks"] = std::move(checks);
    doc["all_pass"] = vr.all_pass();
    out.add("validate.json", doc.dump(2) + "\n");
    return !vr.all_pass();
}

}  // namespace

std::string RunManifest::to_json() const {
    json doc;
    doc["schema"] = "nmq.manifest.v1";
    doc["subcommand"] = subcommand;
    doc["version"] = version;
    doc["config_hash"] = config_hash;
    doc["seed"] = seed;
    doc["wall_ms"] = wall_ms;
    json outputs = json::object();
    for (const auto& [name, sum] : output_checksums) outputs[name] = sum;
    doc["outputs"] = std::move(outputs);
    return doc.dump(2) + "\n";
}

RunOutcome run_subcommand(const ExperimentConfig& cfg, const std::string& subcommand) {
    const auto t0 = std::chrono::steady_clock::now();

    RunOutcome outcome;
    outcome.manifest.subcommand = subcommand;
    outcome.manifest.config_hash = hex64(cfg.config_hash());
    outcome.manifest.seed = cfg.run.seed;

    OutputSet out(cfg.outputs.directory);
    if (subcommand == "factorize") {
        run_factorize(cfg, out, outcome.report);
    } else if (subcommand == "nonselective") {
        run_nonselective(cfg, out, outcome.report);
    } else if (subcommand == "trajectory") {
        run_single_trajectory(cfg, out, outcome.report);
    } else if (subcommand == "ensemble") {
        run_ensemble(cfg, out, outcome.report);
    } else if (subcommand == "validate") {
        outcome.validation_failed = run_validate(cfg, out, outcome.report);
    } else {
        throw ConfigError("unknown subcommand \"" + subcommand +
                          "\" (factorize, trajectory, ensemble, nonselective, validate)");
    }

    out.flush(outcome.manifest);
    outcome.manifest.wall_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();

    // The manifest itself is written last and is not part of its own map.
    const fs::path manifest_path = fs::path(cfg.outputs.directory) / "manifest.json";
    const fs::path tmp = fs::path(cfg.outputs.directory) / "manifest.json.tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw IoError("cannot write manifest: " + tmp.string());
        os << outcome.manifest.to_json();
    }
    std::error_code ec;
    fs::rename(tmp, manifest_path, ec);
    if (ec) throw IoError("cannot move manifest into place: " + manifest_path.string());
    return outcome;
}

}  // namespace nmq
