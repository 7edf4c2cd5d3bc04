#include "nmq/validate.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "nmq/errors.hpp"
#include "nmq/hilbert.hpp"
#include "nmq/monitor.hpp"

namespace nmq {

bool ValidationReport::all_pass() const {
    for (const ValidationCheck& c : checks)
        if (!c.pass) return false;
    return true;
}

std::string ValidationReport::text() const {
    std::ostringstream os;
    for (const ValidationCheck& c : checks) {
        char buf[160];
        std::snprintf(buf, sizeof(buf), "%s  %-38s measured=%.3e  tol=%.3e\n",
                      c.pass ? "PASS" : "FAIL", c.name.c_str(), c.measured, c.tolerance);
        os << buf;
    }
    return os.str();
}

namespace {

ComplexMatrix random_matrix(Rng& rng, std::size_t rows, std::size_t cols) {
    ComplexMatrix m(rows, cols);
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j) m(i, j) = rng.standard_complex_normal();
    return m;
}

StateVector random_state(Rng& rng, std::size_t dim) {
    StateVector v(dim);
    for (cplx& z : v.amplitudes) z = rng.standard_complex_normal();
    v.normalize();
    v.norm_weight = 1.0;
    return v;
}

SystemSpec damped_qubit() {
    SystemSpec sys;
    sys.hamiltonian = ComplexMatrix(2, 2);
    sys.coupling = ComplexMatrix(2, 2);
    sys.coupling(0, 1) = 1.0;  // lowering operator
    sys.label = "damped qubit";
    return sys;
}

void add(ValidationReport& rep, const std::string& name, double measured, double tol) {
    rep.checks.push_back({name, measured <= tol, measured, tol});
}

}  // namespace

ValidationReport run_validation(const ExperimentConfig* cfg) {
    ValidationReport rep;
    Rng rng(0x5eedULL);

    // tensor associativity
    {
        const ComplexMatrix a = random_matrix(rng, 2, 2);
        const ComplexMatrix b = random_matrix(rng, 3, 3);
        const ComplexMatrix c = random_matrix(rng, 2, 2);
        ComplexMatrix lhs = tensor(tensor(a, b), c);
        lhs -= tensor(a, tensor(b, c));
        add(rep, "hilbert.tensor_associativity", lhs.max_abs(), 1e-12);
    }

    // partial trace identities on a random 3-factor pure state
    {
        const CompositeSpace space({2, 3, 2});
        const StateVector psi = random_state(rng, space.total_dim());
        const ComplexMatrix rho = outer_product(psi);
        ComplexMatrix keep_all = partial_trace(rho, space, {0, 1, 2});
        keep_all -= rho;
        const ComplexMatrix r0 = partial_trace(rho, space, {0});
        const double trace_dev = std::abs(r0.trace() - rho.trace());
        add(rep, "hilbert.partial_trace_identity",
            std::max(keep_all.max_abs(), trace_dev), 1e-12);
    }

    // truncated ladder commutator
    {
        const int cutoff = 4;
        const ComplexMatrix a = ladder(cutoff);
        const ComplexMatrix comm = a * a.adjoint() - a.adjoint() * a;
        double dev = 0.0;
        for (int n = 0; n <= cutoff; ++n) {
            const double expected = (n < cutoff) ? 1.0 : -static_cast<double>(cutoff);
            dev = std::max(dev, std::abs(comm(static_cast<std::size_t>(n),
                                              static_cast<std::size_t>(n)) -
                                         expected));
        }
        add(rep, "hilbert.ladder_commutator", dev, 1e-13);
    }

    // propagation isometry for an anti-Hermitian generator
    {
        ComplexMatrix g = random_matrix(rng, 12, 12);
        g -= g.adjoint();
        const StateVector v = random_state(rng, 12);
        const StateVector w = expm_apply(g, v);
        add(rep, "hilbert.expm_isometry", std::abs(w.norm() - 1.0), 1e-10);
    }

    // coherent-basis completeness under the Gaussian quadrature
    {
        const int cutoff = 3;
        const BargmannQuadrature q = bargmann_quadrature(cutoff);
        ComplexMatrix acc(static_cast<std::size_t>(cutoff) + 1,
                          static_cast<std::size_t>(cutoff) + 1);
        for (std::size_t i = 0; i < q.nodes.size(); ++i) {
            const StateVector ket = coherent(q.nodes[i], cutoff);
            ComplexMatrix proj = outer_product(ket);
            proj *= cplx(q.measure_weight[i]);
            acc += proj;
        }
        acc -= ComplexMatrix::identity(static_cast<std::size_t>(cutoff) + 1);
        add(rep, "hilbert.coherent_completeness", acc.max_abs(), 1e-8);
    }

    // factorization round-trip on a damped random kernel
    {
        CouplingKernel kappa;
        kappa.dt = 0.05;
        kappa.samples.resize(6);
        kappa.samples[0] = 1.5;
        for (std::size_t k = 1; k < kappa.samples.size(); ++k)
            kappa.samples[k] = 0.35 * std::pow(0.4, static_cast<double>(k - 1)) *
                               rng.standard_complex_normal();
        const CorrelationFunction alpha = reconstruct(kappa);
        const FactorizeResult f = factorize(alpha, kappa.bins());
        add(rep, "kernel.factorize_roundtrip", f.residual, 1e-8);
    }

    // white-noise moments
    {
        const std::size_t n = 100000;
        const NoisePath path = sample_white_noise(n, 1.0, 77);
        cplx mean = 0.0;
        cplx second = 0.0;
        double abs2 = 0.0;
        for (const cplx& z : path.bins) {
            mean += z;
            second += z * z;
            abs2 += std::norm(z);
        }
        const double root_n = std::sqrt(static_cast<double>(n));
        const double m1 = std::abs(mean) / static_cast<double>(n);
        const double m2 = std::abs(second) / static_cast<double>(n);
        const double v = std::abs(abs2 / static_cast<double>(n) - 1.0);
        double worst = std::max({m1 / (5.0 / root_n), m2 / (5.0 / root_n),
                                 v / (5.0 * std::sqrt(2.0) / root_n)});
        add(rep, "kernel.white_noise_moments", worst, 1.0);
    }

    // colored-noise Gaussianity: fourth moment of a colored ensemble
    {
        CouplingKernel kappa;
        kappa.dt = 0.1;
        kappa.samples = {cplx(1.0), cplx(0.5, 0.2)};
        const std::size_t paths = 400, len = 50;
        double sum2 = 0.0, sum4 = 0.0;
        std::size_t count = 0;
        for (std::size_t p = 0; p < paths; ++p) {
            const NoisePath xi = sample_white_noise(len + 1, kappa.dt, derive_seed(99, p));
            const NoisePath a = color(xi, kappa, len);
            for (const cplx& z : a.bins) {
                sum2 += std::norm(z);
                sum4 += std::norm(z) * std::norm(z);
                ++count;
            }
        }
        const double m2 = sum2 / static_cast<double>(count);
        const double m4 = sum4 / static_cast<double>(count);
        // Gaussian: E|a|^4 = 2 (E|a|^2)^2; samples are correlated across a
        // path so the tolerance uses the path count, not the sample count.
        const double rel = std::abs(m4 / (2.0 * m2 * m2) - 1.0);
        add(rep, "kernel.color_gaussianity", rel, 5.0 * 3.0 / std::sqrt(static_cast<double>(paths)));
    }

    // collision generator anti-Hermiticity + trace preservation + decay law
    {
        SystemSpec sys = cfg ? cfg->system : damped_qubit();
        LatticeConfig lat;
        CouplingKernel kappa;
        if (cfg) {
            lat = cfg->lattice;
            kappa = cfg->kernel;
        } else {
            lat.dt = 0.01;
            lat.bins = 1;
            lat.n_max = 2;
            kappa.dt = lat.dt;
            kappa.samples = {std::sqrt(1.0) / lat.dt};
        }
        const ComplexMatrix g = build_collision_generator(sys, kappa, lat);
        ComplexMatrix anti = g;
        anti += g.adjoint();
        add(rep, "lattice.generator_antihermitian", anti.max_abs(),
            1e-12 * std::max(1.0, g.max_abs()));

        StateVector psi(sys.dim());
        psi.amplitudes[sys.dim() - 1] = 1.0;
        const std::size_t steps = 50;
        const NonselectiveResult ns = evolve_nonselective(sys, kappa, lat, steps, psi);
        double trace_dev = 0.0;
        for (const NonselectiveStep& st : ns.steps)
            trace_dev = std::max(trace_dev, std::abs(st.rho_s.trace() - cplx(1.0)));
        add(rep, "lattice.trace_preservation", trace_dev, 1e-10);
    }

    // Markov decay against the analytic law
    {
        const SystemSpec sys = damped_qubit();
        LatticeConfig lat;
        lat.dt = 0.01;
        lat.bins = 1;
        lat.n_max = 2;
        CouplingKernel kappa;
        kappa.dt = lat.dt;
        kappa.samples = {1.0 / lat.dt};
        StateVector psi(2);
        psi.amplitudes[1] = 1.0;
        const NonselectiveResult ns = evolve_nonselective(sys, kappa, lat, 300, psi);
        double worst = 0.0;
        for (const NonselectiveStep& st : ns.steps) {
            const double t = lat.dt * static_cast<double>(st.step);
            const double pop = st.rho_s(1, 1).real();
            worst = std::max(worst, std::abs(pop - std::exp(-t)) / std::exp(-t));
        }
        add(rep, "lattice.markov_decay", worst, 0.02);
    }

    // outcome-density normalization and projector completeness on one bin
    {
        const SystemSpec sys = damped_qubit();
        LatticeConfig lat;
        lat.dt = 0.05;
        lat.bins = 2;
        lat.n_max = 2;
        CouplingKernel kappa;
        kappa.dt = lat.dt;
        kappa.samples = {cplx(1.2), cplx(0.7, 0.3)};

        StateVector psi(2);
        psi.amplitudes[0] = std::sqrt(0.3);
        psi.amplitudes[1] = std::sqrt(0.7);
        JointState joint = initial_joint(psi, sys, lat);
        joint = collide(joint, expm(build_collision_generator(sys, kappa, lat)));

        const BargmannQuadrature q = bargmann_quadrature(lat.n_max);
        double prob = 0.0;
        ComplexMatrix avg(joint.space.total_dim() / lat.bin_dim(),
                          joint.space.total_dim() / lat.bin_dim());
        for (std::size_t i = 0; i < q.nodes.size(); ++i) {
            const JointState proj = bargmann_project(joint, 1, q.nodes[i]);
            const double mass = proj.vector.norm_weight * proj.vector.norm_squared();
            prob += q.lebesgue_weight[i] * mass;
            ComplexMatrix op = outer_product(proj.vector);
            op *= cplx(q.lebesgue_weight[i] * proj.vector.norm_weight);
            avg += op;
        }
        add(rep, "monitor.outcome_density_normalization", std::abs(prob - 1.0), 1e-8);

        std::vector<std::size_t> keep;
        for (std::size_t f = 0; f < joint.space.factor_count(); ++f)
            if (f != 1) keep.push_back(f);
        avg -= reduced_density(joint.vector, joint.space, keep);
        add(rep, "monitor.projector_completeness", avg.max_abs(), 1e-8);

        // one-step non-disturbance: quadrature-averaged measured rho_S equals
        // the traced rho_S
        ComplexMatrix avg_s(2, 2);
        for (std::size_t i = 0; i < q.nodes.size(); ++i) {
            const JointState proj = bargmann_project(joint, 1, q.nodes[i]);
            ComplexMatrix rs = reduced_density(proj.vector, proj.space, {0});
            rs *= cplx(q.lebesgue_weight[i] * proj.vector.norm_weight);
            avg_s += rs;
        }
        avg_s -= reduced_density(joint.vector, joint.space, {0});
        add(rep, "monitor.nondisturbance_one_step", avg_s.max_abs(), 1e-10);
    }

    return rep;
}

}  // namespace nmq
