#ifndef NMQ_MONITOR_HPP
#define NMQ_MONITOR_HPP

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "nmq/kernel.hpp"
#include "nmq/lattice.hpp"
#include "nmq/rng.hpp"

namespace nmq {

// Sequence of heterodyne read-outs xi_1..xi_n in bin normalization
// (E|xi|^2 = 1 on vacuum); the continuum read-out is xi_m / sqrt(dt).
struct HeterodyneRecord {
    double dt = 0.0;
    std::vector<cplx> bins;  // bins[m-1] is the outcome of step m
    std::uint64_t seed = 0;
    std::uint64_t kernel_fp = 0;
    std::uint64_t system_fp = 0;
    std::size_t memory_bins = 0;
    int n_max = 0;

    std::size_t length() const { return bins.size(); }
    cplx at(std::size_t m) const;  // 1-based step index
};

// Conditional (predicted) system state given the record through `step`, with
// the unmeasured memory traced out. `weight` is the record likelihood
// density; for long records it can underflow, log_weight stays valid.
struct ConditionalMixedState {
    std::size_t step = 0;
    ComplexMatrix rho_s;
    double weight = 1.0;
    double log_weight = 0.0;
};

// Retrodicted (smoothed) pure system state at `step`, available once the
// record covers every bin that interacted through that step
// (horizon >= step + N - 1).
struct RetrodictedPureState {
    std::size_t step = 0;
    std::size_t horizon = 0;
    StateVector psi_s;
    double weight = 1.0;
    double log_weight = 0.0;
};

// --- elementary conditioning -------------------------------------------------

// Heterodyne measurement of the exit bin (factor 1) of a post-collision
// joint state. The outcome is drawn from the exact density
//   p(xi) = (e^{-|xi|^2}/pi) * ||<xi|_bin1 psi||^2 / ||psi||^2
// (radial part: mixture of Gamma laws over the Fock populations; angular
// part: exact rejection on the trigonometric polynomial). The collapsed
// state is the Bargmann projection at the sampled value.
struct HeterodyneOutcome {
    cplx xi;
    JointState collapsed;  // unnormalized, weight updated
};
HeterodyneOutcome heterodyne_sample(const JointState& joint, Rng& rng);

// Projects memory bin `bin` (factor index, 1-based) of the joint state on
// the Bargmann coherent vector at xi. The factor is removed; amplitudes are
// contracted against the conjugated coherent components; norm_weight is
// multiplied by the Gaussian measure density e^{-|xi|^2}/pi.
JointState bargmann_project(const JointState& joint, std::size_t bin, cplx xi);

// --- trajectories -------------------------------------------------------------

struct TrajectoryResult {
    HeterodyneRecord record;
    std::vector<ConditionalMixedState> states;
    JointState final_joint;
};

// Full monitored run: each step collides, heterodyne-samples the exiting
// bin, conditions on the outcome and attaches a fresh vacuum bin. The
// conditional rho_S is the partial trace over the in-memory bins.
// Deterministic in `seed`.
TrajectoryResult run_trajectory(const SystemSpec& sys, const CouplingKernel& kappa,
                                const LatticeConfig& cfg, std::size_t steps,
                                std::uint64_t seed, const StateVector& initial);

// Replays a stored record through step n (projections on measured bins,
// trace over in-memory bins), starting from the same initial system state
// the record was generated with. Step-by-step this reproduces
// run_trajectory's states on the same record.
ConditionalMixedState conditional_mixed(const HeterodyneRecord& record, const SystemSpec& sys,
                                        const CouplingKernel& kappa, const LatticeConfig& cfg,
                                        std::size_t n, const StateVector& initial);

// Retrodicted pure state at step p: replay through p projecting each exiting
// bin on its recorded value, then project the N-1 bins still in memory on
// their later-recorded values. Requires record length >= p + N - 1, else
// InsufficientRecordError carrying the required horizon.
RetrodictedPureState retrodict(const HeterodyneRecord& record, const SystemSpec& sys,
                               const CouplingKernel& kappa, const LatticeConfig& cfg,
                               std::size_t p, const StateVector& initial);

// <s> in the retrodicted pure state for p = 0..p_max in one replay;
// p_max = record length - (N - 1).
std::vector<cplx> retrodicted_s_path(const HeterodyneRecord& record, const SystemSpec& sys,
                                     const CouplingKernel& kappa, const LatticeConfig& cfg,
                                     const StateVector& initial);

// --- signal statistics ---------------------------------------------------------

enum class SignalStateChoice {
    retrodicted,       // <s> in the retrodicted pure state (the default)
    conditional_mixed  // <s> in the conditional mixed state
};

// Conditional mean of the read-out at step m,
//   E[xi_m] = sum_k theta_k <s>_{m-1-k},
// with <s>_p evaluated at the chosen conditional state after p collisions.
// With the retrodicted choice this needs the record through m + N - 2: the
// prediction lags the measurement by the memory time.
struct SignalPrediction {
    cplx mean;
    std::vector<std::size_t> retrodiction_steps;  // the p values used
};
SignalPrediction predicted_signal_mean(const HeterodyneRecord& record, const SystemSpec& sys,
                                       const CouplingKernel& kappa, const LatticeConfig& cfg,
                                       std::size_t m, const StateVector& initial,
                                       SignalStateChoice choice = SignalStateChoice::retrodicted);

// Innovations xi_m - E[xi_m | record] for every step where the retrodicted
// prediction is available (m = 1..record length - N + 2); one shared replay.
std::vector<cplx> innovation_series(const HeterodyneRecord& record, const SystemSpec& sys,
                                    const CouplingKernel& kappa, const LatticeConfig& cfg,
                                    const StateVector& initial);

// --- ensembles -------------------------------------------------------------------

// Per-step ensemble mean of the conditional rho_S over `trajectories`
// independent runs (trajectory i is seeded with derive_seed(seed, i)), with
// entrywise standard errors of the mean. Trajectories fan out across
// `threads` workers; aggregation is by trajectory index, so the result does
// not depend on scheduling.
struct EnsembleStats {
    std::vector<ComplexMatrix> mean_rho;  // one per step
    std::vector<ComplexMatrix> se_re;     // standard error, real parts
    std::vector<ComplexMatrix> se_im;     // standard error, imaginary parts
    std::size_t trajectories = 0;
};
EnsembleStats ensemble_conditional_stats(const SystemSpec& sys, const CouplingKernel& kappa,
                                         const LatticeConfig& cfg, std::size_t steps,
                                         std::uint64_t seed, const StateVector& initial,
                                         std::size_t trajectories, int threads = 1);

// --- Girsanov consistency ------------------------------------------------------

// Builds the colored drift identity: with innovations
//   xi_m = record_m - sum_k theta_k s_path[m-1-k]
// and a = color(xi), computes
//   a~_m = a_m + dt * sum_tau alpha_tau s_path[m-1-tau]
// (tau over the Hermitian-extended lags) and checks it against
// color(record); returns the transformed path and the maximum residual.
struct GirsanovResult {
    NoisePath a_tilde;      // continuum normalization
    double max_residual = 0.0;
};
GirsanovResult girsanov_colored(const HeterodyneRecord& record, const CouplingKernel& kappa,
                                const std::vector<cplx>& s_path);

// --- record files ---------------------------------------------------------------

void write_record(std::ostream& os, const HeterodyneRecord& record);
HeterodyneRecord read_record(std::istream& is);
void write_conditional_states(std::ostream& os,
                              const std::vector<ConditionalMixedState>& states);

}  // namespace nmq

#endif
