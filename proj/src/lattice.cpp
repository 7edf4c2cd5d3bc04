#include "nmq/lattice.hpp"

#include <cmath>

#include "nmq/errors.hpp"
#include "nmq/rng.hpp"

namespace nmq {

void SystemSpec::validate() const {
    if (hamiltonian.rows() == 0 || hamiltonian.rows() != hamiltonian.cols())
        throw ConfigError("system: Hamiltonian must be square and non-empty");
    if (coupling.rows() != hamiltonian.rows() || coupling.cols() != hamiltonian.cols())
        throw ConfigError("system: coupling operator shape must match the Hamiltonian");
    if (!hamiltonian.is_finite() || !coupling.is_finite())
        throw ConfigError("system: non-finite matrix entries");
    if (!hamiltonian.is_hermitian(1e-12))
        throw ConfigError("system: Hamiltonian is not Hermitian within 1e-12");
}

std::size_t LatticeConfig::joint_dim(std::size_t system_dim) const {
    long double est = static_cast<long double>(system_dim);
    for (std::size_t k = 0; k < bins; ++k) est *= static_cast<long double>(bin_dim());
    if (est > static_cast<long double>(dimension_cap))
        throw DimensionCapError(est > 1e18L ? static_cast<std::size_t>(-1)
                                            : static_cast<std::size_t>(est),
                                dimension_cap);
    return static_cast<std::size_t>(est);
}

void LatticeConfig::validate(std::size_t system_dim) const {
    if (dt <= 0.0) throw ConfigError("lattice: dt must be positive");
    if (bins == 0) throw ConfigError("lattice: bin count must be >= 1");
    if (n_max < 1) throw ConfigError("lattice: n_max must be >= 1");
    if (system_dim == 0) throw ConfigError("lattice: system dimension must be >= 1");
    (void)joint_dim(system_dim);
}

std::vector<cplx> step_amplitudes(const CouplingKernel& kappa, const LatticeConfig& cfg) {
    if (kappa.bins() != cfg.bins)
        throw ConfigError("lattice: kernel sample count must equal the bin count");
    if (std::abs(kappa.dt - cfg.dt) > 1e-12 * std::max(kappa.dt, cfg.dt))
        throw ConfigError("lattice: kernel dt must equal the lattice dt");
    std::vector<cplx> theta(kappa.bins());
    const double dt32 = cfg.dt * std::sqrt(cfg.dt);
    for (std::size_t k = 0; k < theta.size(); ++k) theta[k] = kappa.samples[k] * dt32;
    return theta;
}

namespace {

CompositeSpace joint_space(std::size_t system_dim, const LatticeConfig& cfg) {
    std::vector<std::size_t> dims(cfg.bins + 1, cfg.bin_dim());
    dims[0] = system_dim;
    return CompositeSpace(dims);
}

StateVector vacuum_bin(const LatticeConfig& cfg) {
    StateVector v(cfg.bin_dim());
    v.amplitudes[0] = 1.0;
    return v;
}

}  // namespace

ComplexMatrix build_collision_generator(const SystemSpec& sys, const CouplingKernel& kappa,
                                        const LatticeConfig& cfg) {
    sys.validate();
    cfg.validate(sys.dim());
    const std::vector<cplx> theta = step_amplitudes(kappa, cfg);
    const CompositeSpace space = joint_space(sys.dim(), cfg);
    const std::size_t dim = space.total_dim();

    const ComplexMatrix a = ladder(cfg.n_max);
    const ComplexMatrix adag = a.adjoint();
    const ComplexMatrix sdag = sys.coupling.adjoint();

    // -i dt H_S on factor 0.
    ComplexMatrix g = embed_factor_op(sys.hamiltonian, 0, space);
    g *= cplx(0.0, -cfg.dt);

    const ComplexMatrix s_full = embed_factor_op(sys.coupling, 0, space);
    const ComplexMatrix sdag_full = embed_factor_op(sdag, 0, space);
    ComplexMatrix coupling(dim, dim);
    for (std::size_t k = 0; k < cfg.bins; ++k) {
        if (theta[k] == cplx(0.0)) continue;
        const ComplexMatrix bdag_k = embed_factor_op(adag, k + 1, space);
        const ComplexMatrix b_k = embed_factor_op(a, k + 1, space);
        coupling += theta[k] * (s_full * bdag_k);
        coupling -= std::conj(theta[k]) * (sdag_full * b_k);
    }
    g += coupling;
    return g;
}

JointState initial_joint(const StateVector& psi_s, const SystemSpec& sys,
                         const LatticeConfig& cfg) {
    sys.validate();
    cfg.validate(sys.dim());
    if (psi_s.dim() != sys.dim())
        throw ConfigError("initial state dimension does not match the system");
    if (!psi_s.is_normalized(1e-10))
        throw InvalidStateError("initial system state must be normalized");
    JointState joint;
    joint.space = joint_space(sys.dim(), cfg);
    StateVector v = psi_s;
    const StateVector vac = vacuum_bin(cfg);
    for (std::size_t k = 0; k < cfg.bins; ++k) v = tensor(v, vac);
    joint.vector = std::move(v);
    joint.step = 0;
    return joint;
}

JointState collide(const JointState& state, const ComplexMatrix& propagator) {
    if (propagator.cols() != state.vector.dim())
        throw Error("collide: propagator dimension does not match the state");
    JointState out;
    out.space = state.space;
    out.vector = StateVector(matvec(propagator, state.vector.amplitudes),
                             state.vector.norm_weight);
    out.step = state.step + 1;
    return out;
}

JointState attach_fresh_bin(const JointState& state, const LatticeConfig& cfg) {
    JointState out;
    out.space = state.space.with_appended_factor(cfg.bin_dim());
    out.vector = tensor(state.vector, vacuum_bin(cfg));
    out.step = state.step;
    return out;
}

ComplexMatrix exit_bin_density(const JointState& state) {
    if (state.space.factor_count() < 2)
        throw IndexError("exit_bin_density: state has no memory bins");
    return reduced_density(state.vector, state.space, {1});
}

ConveyorStepResult conveyor_step(const JointState& state, const ComplexMatrix& generator) {
    ConveyorStepResult r;
    r.evolved = collide(state, expm(generator));
    r.exit_bin = exit_bin_density(r.evolved);
    return r;
}

NonselectiveResult evolve_nonselective(const SystemSpec& sys, const CouplingKernel& kappa,
                                       const LatticeConfig& cfg, std::size_t steps,
                                       const StateVector& initial,
                                       const NonselectiveOptions& opts) {
    const JointState start = initial_joint(initial, sys, cfg);
    const ComplexMatrix u = expm(build_collision_generator(sys, kappa, cfg));
    const ComplexMatrix udag = u.adjoint();
    const ComplexMatrix a = ladder(cfg.n_max);

    const CompositeSpace space = start.space;
    ComplexMatrix rho = outer_product(start.vector);

    // Kept factors when tracing out the exited bin: system plus bins 2..N.
    std::vector<std::size_t> keep_after_exit;
    keep_after_exit.push_back(0);
    for (std::size_t f = 2; f <= cfg.bins; ++f) keep_after_exit.push_back(f);

    ComplexMatrix vac_dm(cfg.bin_dim(), cfg.bin_dim());
    vac_dm(0, 0) = 1.0;

    NonselectiveResult result;
    result.steps.reserve(steps);
    result.initial_s_expectation = (sys.coupling * outer_product(initial)).trace();

    for (std::size_t m = 1; m <= steps; ++m) {
        rho = u * rho * udag;

        NonselectiveStep rec;
        rec.step = m;
        const ComplexMatrix rho_exit = partial_trace(rho, space, {1});
        rec.exit_mean = (a * rho_exit).trace();

        ComplexMatrix rho_rest = partial_trace(rho, space, keep_after_exit);
        rho = tensor(rho_rest, vac_dm, cfg.dimension_cap);

        rec.rho_s = partial_trace(rho, space, {0});
        rec.s_expectation = (sys.coupling * rec.rho_s).trace();
        if (opts.keep_joint) result.rho_sm.push_back(rho);
        result.steps.push_back(std::move(rec));
    }
    return result;
}

OutputMeanResult output_mean_nonselective(const SystemSpec& sys, const CouplingKernel& kappa,
                                          const LatticeConfig& cfg, std::size_t steps,
                                          const StateVector& initial) {
    const NonselectiveResult ns = evolve_nonselective(sys, kappa, cfg, steps, initial);
    const std::vector<cplx> theta = step_amplitudes(kappa, cfg);

    OutputMeanResult out;
    out.simulated.resize(steps);
    out.predicted.resize(steps);
    for (std::size_t m = 1; m <= steps; ++m) {
        out.simulated[m - 1] = ns.steps[m - 1].exit_mean;
        cplx pred = 0.0;
        for (std::size_t k = 0; k < theta.size(); ++k) {
            if (m < k + 1) break;  // no interaction before step 0
            const std::size_t p = m - 1 - k;
            const cplx s_exp =
                (p == 0) ? ns.initial_s_expectation : ns.steps[p - 1].s_expectation;
            pred += theta[k] * s_exp;
        }
        out.predicted[m - 1] = pred;
        out.max_defect = std::max(out.max_defect,
                                  std::abs(out.simulated[m - 1] - out.predicted[m - 1]));
    }
    return out;
}

std::uint64_t system_fingerprint(const SystemSpec& sys) {
    const std::size_t d = sys.dim();
    std::uint64_t h = fnv1a64(&d, sizeof(d));
    auto fold = [&h](const ComplexMatrix& m) {
        for (const cplx& z : m.data()) {
            const double re = z.real(), im = z.imag();
            h = fnv1a64(&re, sizeof(double), h);
            h = fnv1a64(&im, sizeof(double), h);
        }
    };
    fold(sys.hamiltonian);
    fold(sys.coupling);
    return h;
}

}  // namespace nmq
