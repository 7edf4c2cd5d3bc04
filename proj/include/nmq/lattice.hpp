#ifndef NMQ_LATTICE_HPP
#define NMQ_LATTICE_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "nmq/complex_matrix.hpp"
#include "nmq/composite_space.hpp"
#include "nmq/hilbert.hpp"
#include "nmq/kernel.hpp"
#include "nmq/state_vector.hpp"

namespace nmq {

// The open system: Hamiltonian (Hermitian, units 1/time with hbar = 1) and
// the operator coupling it to the field.
struct SystemSpec {
    ComplexMatrix hamiltonian;
    ComplexMatrix coupling;
    std::string label;

    std::size_t dim() const { return hamiltonian.rows(); }
    // Checks shapes and Hermiticity (1e-12 relative).
    void validate() const;
};

// Discretization of the memory window: N bins of width dt (memory time
// T = N*dt), each bin a Fock mode truncated at n_max.
struct LatticeConfig {
    double dt = 0.0;
    std::size_t bins = 1;
    int n_max = 2;
    std::size_t dimension_cap = kDefaultDimensionCap;

    std::size_t bin_dim() const { return static_cast<std::size_t>(n_max) + 1; }
    double memory_time() const { return dt * static_cast<double>(bins); }
    std::size_t joint_dim(std::size_t system_dim) const;
    // Cross-field consistency, including the dimension cap. Throws.
    void validate(std::size_t system_dim) const;
};

// Pure state of system (x) N memory bins, ordered by exit time (factor 1
// exits next), plus the collision counter (time = step * dt).
struct JointState {
    CompositeSpace space;
    StateVector vector;
    std::uint64_t step = 0;
};

// Per-step coupling amplitudes theta_k = kappa_k * dt^{3/2}; bin k (time to
// exit k steps) couples with theta_k. The Markov limit kappa_0 = sqrt(g)/dt
// gives the standard collision amplitude theta_0 = sqrt(g*dt).
std::vector<cplx> step_amplitudes(const CouplingKernel& kappa, const LatticeConfig& cfg);

// Anti-Hermitian generator of one conveyor step:
//   G = -i*dt*(H_S (x) 1) + sum_k (theta_k s (x) bdag_k - conj(theta_k) sdag (x) b_k)
// with bin k at factor k+1.
ComplexMatrix build_collision_generator(const SystemSpec& sys, const CouplingKernel& kappa,
                                        const LatticeConfig& cfg);

// psi_S (x) |0...0>, step 0. psi_s must be normalized.
JointState initial_joint(const StateVector& psi_s, const SystemSpec& sys,
                         const LatticeConfig& cfg);

// Applies the collision propagator exp(G) and advances the step counter. The
// returned state still holds the post-collision exit bin as factor 1:
// callers measure, project, or trace it out, then attach a fresh bin to
// complete the conveyor shift.
JointState collide(const JointState& state, const ComplexMatrix& propagator);

// Appends a fresh vacuum bin (new position N) after the exit bin was removed.
JointState attach_fresh_bin(const JointState& state, const LatticeConfig& cfg);

// Reduced density matrix of the exit bin (factor 1).
ComplexMatrix exit_bin_density(const JointState& state);

// One full conveyor step: collision applied, exit bin still attached
// (prior to detachment) plus its reduced state, so callers choose whether
// to measure, project, or trace it before attaching the fresh bin.
struct ConveyorStepResult {
    JointState evolved;
    ComplexMatrix exit_bin;
};
ConveyorStepResult conveyor_step(const JointState& state, const ComplexMatrix& generator);

// --- non-selective evolution -----------------------------------------------

struct NonselectiveOptions {
    bool keep_joint = false;  // also record rho_SM per step
};

struct NonselectiveStep {
    std::size_t step = 0;            // 1-based collision index
    ComplexMatrix rho_s;             // reduced system state after the step
    cplx exit_mean;                  // <b_exit> post-collision (bin normalization)
    cplx s_expectation;              // tr(s rho_S) after the step
};

struct NonselectiveResult {
    std::vector<NonselectiveStep> steps;
    std::vector<ComplexMatrix> rho_sm;  // filled when keep_joint
    cplx initial_s_expectation;
};

// Unitary collision + trace over the exited bin each step; trace-one
// Hermitian positive rho at every step.
NonselectiveResult evolve_nonselective(const SystemSpec& sys, const CouplingKernel& kappa,
                                       const LatticeConfig& cfg, std::size_t steps,
                                       const StateVector& initial,
                                       const NonselectiveOptions& opts = {});

// Non-selective output signal: the simulated per-step mean read-out
// E[xi_m] = <b_exit> against the input-output convolution prediction
//   E[xi_m] = sum_k theta_k <s>_{m-1-k}
// where <s>_p is taken in the reduced state after p collisions (<s>_0 from
// the initial state). The difference is the discretization defect.
struct OutputMeanResult {
    std::vector<cplx> simulated;
    std::vector<cplx> predicted;
    double max_defect = 0.0;
};
OutputMeanResult output_mean_nonselective(const SystemSpec& sys, const CouplingKernel& kappa,
                                          const LatticeConfig& cfg, std::size_t steps,
                                          const StateVector& initial);

std::uint64_t system_fingerprint(const SystemSpec& sys);

}  // namespace nmq

#endif
