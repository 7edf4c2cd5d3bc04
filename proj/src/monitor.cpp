#include "nmq/monitor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>
#include <thread>

#include "nmq/errors.hpp"

namespace nmq {

cplx HeterodyneRecord::at(std::size_t m) const {
    if (m == 0 || m > bins.size())
        throw IndexError("HeterodyneRecord: step index " + std::to_string(m) + " out of range");
    return bins[m - 1];
}

// ---------------------------------------------------------------------------
// Elementary conditioning

JointState bargmann_project(const JointState& joint, std::size_t bin, cplx xi) {
    if (bin == 0 || bin >= joint.space.factor_count())
        throw IndexError("bargmann_project: invalid bin index " + std::to_string(bin));
    const int cutoff = static_cast<int>(joint.space.factor_dim(bin)) - 1;
    const StateVector coh = coherent(xi, cutoff);
    JointState out;
    out.vector = contract_factor(joint.vector, joint.space, bin, coh.amplitudes);
    out.vector.norm_weight *= std::exp(-std::norm(xi)) / std::numbers::pi;
    out.space = joint.space.without_factor(bin);
    out.step = joint.step;
    return out;
}

HeterodyneOutcome heterodyne_sample(const JointState& joint, Rng& rng) {
    if (joint.space.factor_count() < 2)
        throw IndexError("heterodyne_sample: state has no memory bins");
    const ComplexMatrix rho_b = reduced_density(joint.vector, joint.space, {1});
    const double tr = rho_b.trace().real();
    if (!(tr > 0.0) || !std::isfinite(tr))
        throw InvalidStateError("heterodyne_sample: degenerate (zero-norm) joint state");
    const std::size_t d = rho_b.rows();

    // Radial part: |xi|^2 is a mixture of Gamma(n+1) laws weighted by the
    // Fock populations, sampled exactly as sums of exponentials.
    std::vector<double> pops(d);
    double total = 0.0;
    for (std::size_t n = 0; n < d; ++n) {
        pops[n] = std::max(rho_b(n, n).real(), 0.0);
        total += pops[n];
    }
    double pick = rng.uniform() * total;
    std::size_t n_pick = d - 1;
    for (std::size_t n = 0; n + 1 < d; ++n) {
        if (pick < pops[n]) {
            n_pick = n;
            break;
        }
        pick -= pops[n];
    }
    double u = 0.0;
    for (std::size_t j = 0; j <= n_pick; ++j) u += rng.exponential();
    const double r = std::sqrt(u);

    // Angular part: the conditional density in phi is the trigonometric
    // polynomial h(phi) = c_0 + 2 Re sum_{k>=1} c_k e^{i k phi} with
    //   c_k = sum_n rho(n, n+k) r^{2n+k} / sqrt(n! (n+k)!);
    // exact rejection against the coefficient bound c_0 + 2 sum |c_k|.
    std::vector<double> inv_sqrt_fact(d);
    double fact = 1.0;
    for (std::size_t n = 0; n < d; ++n) {
        if (n > 0) fact *= static_cast<double>(n);
        inv_sqrt_fact[n] = 1.0 / std::sqrt(fact);
    }
    std::vector<double> rpow(2 * d, 1.0);
    for (std::size_t j = 1; j < 2 * d; ++j) rpow[j] = rpow[j - 1] * r;

    std::vector<cplx> c(d, 0.0);
    for (std::size_t k = 0; k < d; ++k) {
        cplx s = 0.0;
        for (std::size_t n = 0; n + k < d; ++n)
            s += rho_b(n, n + k) * rpow[2 * n + k] * inv_sqrt_fact[n] * inv_sqrt_fact[n + k];
        c[k] = s;
    }
    const double c0 = c[0].real();
    double hmax = c0;
    for (std::size_t k = 1; k < d; ++k) hmax += 2.0 * std::abs(c[k]);
    if (!(hmax > 0.0) || !std::isfinite(hmax))
        throw InvalidStateError("heterodyne_sample: degenerate outcome density");

    double phi = 0.0;
    for (int attempt = 0; attempt < 100000; ++attempt) {
        phi = 2.0 * std::numbers::pi * rng.uniform();
        double h = c0;
        for (std::size_t k = 1; k < d; ++k) {
            const double kk = static_cast<double>(k);
            h += 2.0 * (c[k].real() * std::cos(kk * phi) - c[k].imag() * std::sin(kk * phi));
        }
        if (rng.uniform() * hmax <= h) break;
    }

    HeterodyneOutcome out;
    out.xi = cplx(r * std::cos(phi), r * std::sin(phi));
    out.collapsed = bargmann_project(joint, 1, out.xi);
    return out;
}

// ---------------------------------------------------------------------------
// Conveyor replay machinery shared by trajectories, conditioning and
// retrodiction. States stay normalized; the likelihood is carried in log
// space so long records do not underflow.

namespace {

class Conveyor {
public:
    Conveyor(const SystemSpec& sys, const CouplingKernel& kappa, const LatticeConfig& cfg)
        : sys_(sys), cfg_(cfg), kernel_fp_(kernel_fingerprint(kappa)),
          system_fp_(system_fingerprint(sys)),
          propagator_(expm(build_collision_generator(sys, kappa, cfg))) {}

    JointState initial(const StateVector& psi_s) const {
        return initial_joint(psi_s, sys_, cfg_);
    }

    // Collide, condition the exit bin on the given outcome, renormalize and
    // attach a fresh bin. Returns the log-likelihood increment.
    double step_project(JointState& joint, cplx xi) const {
        joint = collide(joint, propagator_);
        JointState proj = bargmann_project(joint, 1, xi);
        const double mass = proj.vector.norm_weight * proj.vector.norm_squared();
        proj.vector.normalize();
        proj.vector.norm_weight = 1.0;
        joint = attach_fresh_bin(proj, cfg_);
        return std::log(mass);
    }

    // Collide, sample the exit bin, condition on the sampled outcome.
    cplx step_sample(JointState& joint, Rng& rng, double& log_weight) const {
        joint = collide(joint, propagator_);
        HeterodyneOutcome outcome = heterodyne_sample(joint, rng);
        JointState proj = std::move(outcome.collapsed);
        const double mass = proj.vector.norm_weight * proj.vector.norm_squared();
        proj.vector.normalize();
        proj.vector.norm_weight = 1.0;
        joint = attach_fresh_bin(proj, cfg_);
        log_weight += std::log(mass);
        return outcome.xi;
    }

    std::uint64_t kernel_fp() const { return kernel_fp_; }
    std::uint64_t system_fp() const { return system_fp_; }

private:
    SystemSpec sys_;
    LatticeConfig cfg_;
    std::uint64_t kernel_fp_;
    std::uint64_t system_fp_;
    ComplexMatrix propagator_;
};

// Retrodicted system state extracted from the time-p joint: project the N-1
// interacted in-memory bins on their later-recorded values (the bin at
// position j exits at step p+j), drop the fresh vacuum bin, normalize.
StateVector extract_retrodicted(const JointState& joint, const HeterodyneRecord& record,
                                const LatticeConfig& cfg, std::size_t p, double* log_mass) {
    JointState work = joint;
    double lm = 0.0;
    for (std::size_t j = 1; j + 1 <= cfg.bins; ++j) {
        work = bargmann_project(work, 1, record.at(p + j));
        const double mass = work.vector.norm_weight * work.vector.norm_squared();
        work.vector.normalize();
        work.vector.norm_weight = 1.0;
        lm += std::log(mass);
    }
    // The remaining bin is the fresh vacuum attached after step p; contract
    // it out exactly.
    std::vector<cplx> vac(cfg.bin_dim(), 0.0);
    vac[0] = 1.0;
    StateVector psi =
        contract_factor(work.vector, work.space, work.space.factor_count() - 1, vac);
    psi.normalize();
    psi.norm_weight = 1.0;
    if (log_mass) *log_mass = lm;
    return psi;
}

cplx state_expectation(const ComplexMatrix& op, const StateVector& psi) {
    const std::vector<cplx> opv = matvec(op, psi.amplitudes);
    cplx s = 0.0;
    for (std::size_t i = 0; i < psi.dim(); ++i) s += std::conj(psi.amplitudes[i]) * opv[i];
    return s;
}

}  // namespace

// ---------------------------------------------------------------------------
// Trajectories

TrajectoryResult run_trajectory(const SystemSpec& sys, const CouplingKernel& kappa,
                                const LatticeConfig& cfg, std::size_t steps,
                                std::uint64_t seed, const StateVector& initial) {
    Conveyor conv(sys, kappa, cfg);
    JointState joint = conv.initial(initial);
    Rng rng(seed);
    double logw = 0.0;

    TrajectoryResult res;
    res.record.dt = cfg.dt;
    res.record.seed = seed;
    res.record.kernel_fp = conv.kernel_fp();
    res.record.system_fp = conv.system_fp();
    res.record.memory_bins = cfg.bins;
    res.record.n_max = cfg.n_max;
    res.record.bins.reserve(steps);
    res.states.reserve(steps);

    for (std::size_t m = 1; m <= steps; ++m) {
        const cplx xi = conv.step_sample(joint, rng, logw);
        res.record.bins.push_back(xi);
        ConditionalMixedState st;
        st.step = m;
        st.rho_s = reduced_density(joint.vector, joint.space, {0});
        st.log_weight = logw;
        st.weight = std::exp(logw);
        res.states.push_back(std::move(st));
    }
    res.final_joint = std::move(joint);
    return res;
}

ConditionalMixedState conditional_mixed(const HeterodyneRecord& record, const SystemSpec& sys,
                                        const CouplingKernel& kappa, const LatticeConfig& cfg,
                                        std::size_t n, const StateVector& initial) {
    if (record.length() < n)
        throw InsufficientRecordError("conditional_mixed: record too short; need " +
                                          std::to_string(n) + " samples, have " +
                                          std::to_string(record.length()),
                                      n);
    Conveyor conv(sys, kappa, cfg);
    JointState joint = conv.initial(initial);
    double logw = 0.0;
    for (std::size_t m = 1; m <= n; ++m) logw += conv.step_project(joint, record.at(m));

    ConditionalMixedState st;
    st.step = n;
    st.rho_s = reduced_density(joint.vector, joint.space, {0});
    st.log_weight = logw;
    st.weight = std::exp(logw);
    return st;
}

RetrodictedPureState retrodict(const HeterodyneRecord& record, const SystemSpec& sys,
                               const CouplingKernel& kappa, const LatticeConfig& cfg,
                               std::size_t p, const StateVector& initial) {
    const std::size_t required = p + cfg.bins - 1;
    if (record.length() < required)
        throw InsufficientRecordError(
            "retrodict: record too short for step " + std::to_string(p) + "; need horizon " +
                std::to_string(required) + ", have " + std::to_string(record.length()),
            required);
    Conveyor conv(sys, kappa, cfg);
    JointState joint = conv.initial(initial);
    double logw = 0.0;
    for (std::size_t m = 1; m <= p; ++m) logw += conv.step_project(joint, record.at(m));

    RetrodictedPureState out;
    double lm = 0.0;
    out.psi_s = extract_retrodicted(joint, record, cfg, p, &lm);
    out.step = p;
    out.horizon = record.length();
    out.log_weight = logw + lm;
    out.weight = std::exp(out.log_weight);
    return out;
}

std::vector<cplx> retrodicted_s_path(const HeterodyneRecord& record, const SystemSpec& sys,
                                     const CouplingKernel& kappa, const LatticeConfig& cfg,
                                     const StateVector& initial) {
    if (record.length() + 1 < cfg.bins)
        throw InsufficientRecordError(
            "retrodicted_s_path: record shorter than the memory window", cfg.bins - 1);
    const std::size_t p_max = record.length() - (cfg.bins - 1);
    Conveyor conv(sys, kappa, cfg);
    JointState joint = conv.initial(initial);

    std::vector<cplx> s_vals(p_max + 1);
    for (std::size_t p = 0; p <= p_max; ++p) {
        if (p > 0) conv.step_project(joint, record.at(p));
        const StateVector psi = extract_retrodicted(joint, record, cfg, p, nullptr);
        s_vals[p] = state_expectation(sys.coupling, psi);
    }
    return s_vals;
}

// ---------------------------------------------------------------------------
// Signal statistics

SignalPrediction predicted_signal_mean(const HeterodyneRecord& record, const SystemSpec& sys,
                                       const CouplingKernel& kappa, const LatticeConfig& cfg,
                                       std::size_t m, const StateVector& initial,
                                       SignalStateChoice choice) {
    if (m == 0) throw IndexError("predicted_signal_mean: step index is 1-based");
    const std::vector<cplx> theta = step_amplitudes(kappa, cfg);

    SignalPrediction pred;
    pred.mean = 0.0;
    for (std::size_t k = 0; k < theta.size(); ++k) {
        if (m < k + 1) break;
        pred.retrodiction_steps.push_back(m - 1 - k);
    }
    if (choice == SignalStateChoice::retrodicted) {
        // The deepest term needs the record through m + N - 2: predicting a
        // read-out mean lags the measurement by the memory time.
        const std::size_t required = (m - 1) + cfg.bins - 1;
        if (record.length() < required)
            throw InsufficientRecordError(
                "predicted_signal_mean: record too short; need horizon " +
                    std::to_string(required) + ", have " + std::to_string(record.length()),
                required);
    } else if (record.length() + 1 < m) {
        throw InsufficientRecordError("predicted_signal_mean: record too short", m - 1);
    }

    for (std::size_t k = 0; k < pred.retrodiction_steps.size(); ++k) {
        const std::size_t p = pred.retrodiction_steps[k];
        cplx s_exp;
        if (choice == SignalStateChoice::retrodicted) {
            s_exp = state_expectation(sys.coupling,
                                      retrodict(record, sys, kappa, cfg, p, initial).psi_s);
        } else {
            const ConditionalMixedState st =
                conditional_mixed(record, sys, kappa, cfg, p, initial);
            s_exp = (sys.coupling * st.rho_s).trace();
        }
        pred.mean += theta[k] * s_exp;
    }
    return pred;
}

std::vector<cplx> innovation_series(const HeterodyneRecord& record, const SystemSpec& sys,
                                    const CouplingKernel& kappa, const LatticeConfig& cfg,
                                    const StateVector& initial) {
    const std::vector<cplx> theta = step_amplitudes(kappa, cfg);
    const std::vector<cplx> s_vals = retrodicted_s_path(record, sys, kappa, cfg, initial);
    const std::size_t p_max = s_vals.size() - 1;
    // Residuals are available while every <s>_{m-1-k} is retrodictable.
    const std::size_t m_max = std::min(record.length(), p_max + 1);
    std::vector<cplx> residuals(m_max);
    for (std::size_t m = 1; m <= m_max; ++m) {
        cplx mean = 0.0;
        for (std::size_t k = 0; k < theta.size(); ++k) {
            if (m < k + 1) break;
            mean += theta[k] * s_vals[m - 1 - k];
        }
        residuals[m - 1] = record.at(m) - mean;
    }
    return residuals;
}

// ---------------------------------------------------------------------------
// Ensembles

EnsembleStats ensemble_conditional_stats(const SystemSpec& sys, const CouplingKernel& kappa,
                                         const LatticeConfig& cfg, std::size_t steps,
                                         std::uint64_t seed, const StateVector& initial,
                                         std::size_t trajectories, int threads) {
    if (trajectories == 0) throw Error("ensemble_conditional_stats: need >= 1 trajectory");
    const std::size_t d = sys.dim();
    std::vector<std::vector<ComplexMatrix>> rho(trajectories);

    const int workers = std::max(1, threads);
    std::atomic<std::size_t> next{0};
    auto work = [&]() {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= trajectories) return;
            TrajectoryResult tr =
                run_trajectory(sys, kappa, cfg, steps, derive_seed(seed, i), initial);
            std::vector<ComplexMatrix> per_step;
            per_step.reserve(steps);
            for (ConditionalMixedState& st : tr.states) per_step.push_back(std::move(st.rho_s));
            rho[i] = std::move(per_step);
        }
    };
    if (workers == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(workers));
        for (int w = 0; w < workers; ++w) pool.emplace_back(work);
        for (std::thread& t : pool) t.join();
    }

    EnsembleStats stats;
    stats.trajectories = trajectories;
    stats.mean_rho.assign(steps, ComplexMatrix(d, d));
    stats.se_re.assign(steps, ComplexMatrix(d, d));
    stats.se_im.assign(steps, ComplexMatrix(d, d));
    const double inv_n = 1.0 / static_cast<double>(trajectories);
    for (std::size_t m = 0; m < steps; ++m) {
        ComplexMatrix& mean = stats.mean_rho[m];
        for (std::size_t i = 0; i < trajectories; ++i) mean += rho[i][m];
        mean *= cplx(inv_n);
        if (trajectories > 1) {
            ComplexMatrix& vr = stats.se_re[m];
            ComplexMatrix& vi = stats.se_im[m];
            for (std::size_t i = 0; i < trajectories; ++i) {
                for (std::size_t e = 0; e < d * d; ++e) {
                    const cplx diff = rho[i][m].data()[e] - mean.data()[e];
                    vr.data()[e] += diff.real() * diff.real();
                    vi.data()[e] += diff.imag() * diff.imag();
                }
            }
            const double norm = inv_n / static_cast<double>(trajectories - 1);
            for (std::size_t e = 0; e < d * d; ++e) {
                vr.data()[e] = std::sqrt(vr.data()[e].real() * norm);
                vi.data()[e] = std::sqrt(vi.data()[e].real() * norm);
            }
        }
    }
    return stats;
}

// ---------------------------------------------------------------------------
// Girsanov consistency

GirsanovResult girsanov_colored(const HeterodyneRecord& record, const CouplingKernel& kappa,
                                const std::vector<cplx>& s_path) {
    const std::size_t n = record.length();
    const std::size_t nk = kappa.bins();
    if (n < nk) throw Error("girsanov_colored: record shorter than the kernel window");

    LatticeConfig amp_cfg;
    amp_cfg.dt = kappa.dt;
    amp_cfg.bins = nk;
    const std::vector<cplx> theta = step_amplitudes(kappa, amp_cfg);
    const CorrelationFunction alpha = reconstruct(kappa);

    const auto s_at = [&s_path](std::ptrdiff_t idx) -> cplx {
        if (idx < 0 || idx >= static_cast<std::ptrdiff_t>(s_path.size())) return 0.0;
        return s_path[static_cast<std::size_t>(idx)];
    };

    // Innovation part: record minus the kernel-convolved drift.
    NoisePath innovations;
    innovations.dt = kappa.dt;
    innovations.seed = record.seed;
    innovations.normalization = NoiseNorm::bin;
    innovations.bins.resize(n);
    for (std::size_t m = 1; m <= n; ++m) {
        cplx drift = 0.0;
        for (std::size_t k = 0; k < nk; ++k) {
            if (m < k + 1) break;
            drift += theta[k] * s_at(static_cast<std::ptrdiff_t>(m) - 1 -
                                     static_cast<std::ptrdiff_t>(k));
        }
        innovations.bins[m - 1] = record.at(m) - drift;
    }

    NoisePath record_path;
    record_path.dt = kappa.dt;
    record_path.seed = record.seed;
    record_path.normalization = NoiseNorm::bin;
    record_path.bins = record.bins;

    const std::size_t out_len = n - nk + 1;
    const NoisePath a = color(innovations, kappa, out_len);
    const NoisePath a_rec = color(record_path, kappa, out_len);

    GirsanovResult res;
    res.a_tilde = a;
    for (std::size_t m = 1; m <= out_len; ++m) {
        cplx conv = 0.0;
        for (std::ptrdiff_t tau = -(static_cast<std::ptrdiff_t>(nk) - 1);
             tau <= static_cast<std::ptrdiff_t>(nk) - 1; ++tau) {
            conv += alpha.at(tau) * s_at(static_cast<std::ptrdiff_t>(m) - 1 - tau);
        }
        res.a_tilde.bins[m - 1] = a.bins[m - 1] + kappa.dt * conv;
        res.max_residual = std::max(res.max_residual,
                                    std::abs(res.a_tilde.bins[m - 1] - a_rec.bins[m - 1]));
    }
    return res;
}

// ---------------------------------------------------------------------------
// Record files

namespace {

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string fmt_hex(std::uint64_t v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

}  // namespace

void write_record(std::ostream& os, const HeterodyneRecord& record) {
    os << "# nmq record v1\n";
    os << "# dt = " << fmt_double(record.dt) << "\n";
    os << "# bins = " << record.memory_bins << "\n";
    os << "# n_max = " << record.n_max << "\n";
    os << "# seed = " << record.seed << "\n";
    os << "# kernel = " << fmt_hex(record.kernel_fp) << "\n";
    os << "# system = " << fmt_hex(record.system_fp) << "\n";
    os << "# count = " << record.bins.size() << "\n";
    os << "m, re, im\n";
    for (std::size_t m = 1; m <= record.bins.size(); ++m) {
        const cplx z = record.bins[m - 1];
        os << m << ", " << fmt_double(z.real()) << ", " << fmt_double(z.imag()) << "\n";
    }
}

HeterodyneRecord read_record(std::istream& is) {
    HeterodyneRecord rec;
    std::string line;
    std::string kind;
    bool have_count = false;
    std::size_t count = 0;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            std::istringstream ls(line.substr(1));
            std::string word, eq;
            ls >> word;
            if (word == "nmq") {
                ls >> kind;
            } else if (word == "dt") {
                std::string value;
                ls >> eq >> value;
                rec.dt = std::strtod(value.c_str(), nullptr);
            } else if (word == "bins") {
                ls >> eq >> rec.memory_bins;
            } else if (word == "n_max") {
                ls >> eq >> rec.n_max;
            } else if (word == "seed") {
                ls >> eq >> rec.seed;
            } else if (word == "kernel") {
                std::string value;
                ls >> eq >> value;
                rec.kernel_fp = std::strtoull(value.c_str(), nullptr, 16);
            } else if (word == "system") {
                std::string value;
                ls >> eq >> value;
                rec.system_fp = std::strtoull(value.c_str(), nullptr, 16);
            } else if (word == "count") {
                ls >> eq >> count;
                have_count = true;
            }
            continue;
        }
        if (line.rfind("m,", 0) == 0 || line.rfind("m ,", 0) == 0) continue;
        std::istringstream ls(line);
        std::string tok;
        if (!std::getline(ls, tok, ',')) throw Error("record parse: bad line '" + line + "'");
        const std::size_t m = static_cast<std::size_t>(std::strtoull(tok.c_str(), nullptr, 10));
        if (!std::getline(ls, tok, ',')) throw Error("record parse: bad line '" + line + "'");
        const double re = std::strtod(tok.c_str(), nullptr);
        if (!std::getline(ls, tok, ',')) throw Error("record parse: bad line '" + line + "'");
        const double im = std::strtod(tok.c_str(), nullptr);
        if (m != rec.bins.size() + 1)
            throw Error("record parse: non-contiguous step index " + std::to_string(m));
        rec.bins.emplace_back(re, im);
    }
    if (kind != "record") throw Error("record parse: not an nmq record file");
    if (have_count && count != rec.bins.size())
        throw Error("record parse: header count does not match sample lines");
    if (rec.dt <= 0.0) throw Error("record parse: missing or non-positive dt");
    return rec;
}

void write_conditional_states(std::ostream& os,
                              const std::vector<ConditionalMixedState>& states) {
    os << "# nmq conditional v1\n";
    const std::size_t dim = states.empty() ? 0 : states.front().rho_s.rows();
    os << "# dim = " << dim << "\n";
    os << "# count = " << states.size() << "\n";
    os << "m, weight, rho (re, im row-major)\n";
    for (const ConditionalMixedState& st : states) {
        os << st.step << ", " << fmt_double(st.weight);
        for (const cplx& z : st.rho_s.data())
            os << ", " << fmt_double(z.real()) << ", " << fmt_double(z.imag());
        os << "\n";
    }
}

}  // namespace nmq
