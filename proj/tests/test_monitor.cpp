#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <sstream>
#include <vector>

#include "nmq/errors.hpp"
#include "nmq/monitor.hpp"

#include "markov_heterodyne_oracle.hpp"

using namespace nmq;

namespace {

SystemSpec damped_qubit() {
    SystemSpec sys;
    sys.hamiltonian = ComplexMatrix(2, 2);
    sys.coupling = ComplexMatrix(2, 2);
    sys.coupling(0, 1) = 1.0;
    sys.label = "damped qubit";
    return sys;
}

SystemSpec driven_qubit() {
    SystemSpec sys = damped_qubit();
    sys.hamiltonian(0, 1) = cplx(0.4, 0.0);
    sys.hamiltonian(1, 0) = cplx(0.4, 0.0);
    sys.hamiltonian(1, 1) = 0.8;
    return sys;
}

CouplingKernel markov_kernel(double gamma, double dt) {
    CouplingKernel k;
    k.dt = dt;
    k.samples = {std::sqrt(gamma) / dt};
    return k;
}

CouplingKernel exponential_kernel(double gamma, double lambda, double dt, std::size_t n) {
    CouplingKernel k;
    k.dt = dt;
    k.samples.resize(n);
    for (std::size_t j = 0; j < n; ++j)
        k.samples[j] = std::sqrt(gamma * lambda) * std::exp(-lambda * dt * static_cast<double>(j));
    return k;
}

CouplingKernel zero_kernel(double dt, std::size_t n) {
    CouplingKernel k;
    k.dt = dt;
    k.samples.assign(n, cplx(0.0));
    return k;
}

StateVector superposed_qubit() {
    StateVector v(2);
    v.amplitudes[0] = std::sqrt(0.5);
    v.amplitudes[1] = std::sqrt(0.5);
    return v;
}

StateVector excited_qubit() {
    StateVector v(2);
    v.amplitudes[1] = 1.0;
    return v;
}

double max_entry_diff(const ComplexMatrix& a, const ComplexMatrix& b) {
    REQUIRE(a.rows() == b.rows());
    double m = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j)
            m = std::max(m, std::abs(a(i, j) - b(i, j)));
    return m;
}

// Joint state with a prescribed single-bin content next to a trivial system,
// for sampling-statistics tests.
JointState bin_fixture(const std::vector<cplx>& bin_amps) {
    JointState joint;
    joint.space = CompositeSpace({1, bin_amps.size()});
    joint.vector = StateVector(bin_amps);
    joint.vector.normalize();
    joint.vector.norm_weight = 1.0;
    return joint;
}

}  // namespace

TEST_CASE("heterodyne_sample: vacuum bin follows the standard complex normal") {
    const JointState joint = bin_fixture({cplx(1.0), cplx(0.0), cplx(0.0)});
    Rng rng(31337);
    const std::size_t n = 20000;
    cplx mean = 0.0;
    double abs2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const HeterodyneOutcome o = heterodyne_sample(joint, rng);
        mean += o.xi;
        abs2 += std::norm(o.xi);
    }
    const double root_n = std::sqrt(static_cast<double>(n));
    CHECK(std::abs(mean) / static_cast<double>(n) <= 5.0 / root_n);
    CHECK(std::abs(abs2 / static_cast<double>(n) - 1.0) <= 5.0 / root_n);
}

TEST_CASE("heterodyne_sample: coherent bin shifts the outcome mean to beta") {
    const cplx beta(0.45, -0.3);
    std::vector<cplx> amps(9);
    double fact = 1.0;
    cplx pow = 1.0;
    for (std::size_t n = 0; n < amps.size(); ++n) {
        if (n > 0) {
            fact *= static_cast<double>(n);
            pow *= beta;
        }
        amps[n] = pow / std::sqrt(fact);
    }
    const JointState joint = bin_fixture(amps);
    Rng rng(808);
    const std::size_t n = 20000;
    cplx mean = 0.0;
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const HeterodyneOutcome o = heterodyne_sample(joint, rng);
        mean += o.xi;
        var += std::norm(o.xi - beta);
    }
    mean /= static_cast<double>(n);
    var /= static_cast<double>(n);
    const double root_n = std::sqrt(static_cast<double>(n));
    CHECK(std::abs(mean - beta) <= 5.0 / root_n);
    CHECK(std::abs(var - 1.0) <= 5.0 * std::sqrt(2.0) / root_n);
}

TEST_CASE("heterodyne_sample: one-photon bin has E|xi|^2 = 2") {
    const JointState joint = bin_fixture({cplx(0.0), cplx(1.0), cplx(0.0)});

    // Moment integral oracle on the quadrature grid: p(xi) = |xi|^2 e^{-|xi|^2}/pi.
    const BargmannQuadrature q = bargmann_quadrature(2);
    double total = 0.0, second = 0.0;
    for (std::size_t i = 0; i < q.nodes.size(); ++i) {
        const double u = std::norm(q.nodes[i]);
        const double density = u * std::exp(-u) / std::numbers::pi;
        total += q.lebesgue_weight[i] * density;
        second += q.lebesgue_weight[i] * density * u;
    }
    CHECK(std::abs(total - 1.0) <= 1e-12);
    CHECK(std::abs(second - 2.0) <= 1e-12);

    Rng rng(117);
    const std::size_t n = 20000;
    double abs2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) abs2 += std::norm(heterodyne_sample(joint, rng).xi);
    // Var(|xi|^2) = E|xi|^4 - 4 = Gamma(2)-mixture second moment 6 - 4 = 2.
    CHECK(std::abs(abs2 / static_cast<double>(n) - 2.0) <=
          5.0 * std::sqrt(2.0 / static_cast<double>(n)));
}

TEST_CASE("heterodyne_sample: degenerate state is rejected") {
    JointState joint = bin_fixture({cplx(1.0), cplx(0.0)});
    for (cplx& z : joint.vector.amplitudes) z = 0.0;
    Rng rng(1);
    CHECK_THROWS_AS(heterodyne_sample(joint, rng), InvalidStateError);
}

TEST_CASE("bargmann_project: vacuum bin at xi = 0 only contributes the measure factor") {
    const SystemSpec sys = driven_qubit();
    LatticeConfig cfg;
    cfg.dt = 0.05;
    cfg.bins = 2;
    cfg.n_max = 2;
    const JointState joint = initial_joint(superposed_qubit(), sys, cfg);
    const JointState proj = bargmann_project(joint, 1, cplx(0.0));
    REQUIRE(proj.space.factor_count() == 2);
    CHECK(proj.vector.norm_weight == doctest::Approx(1.0 / std::numbers::pi).epsilon(1e-14));
    CHECK(std::abs(proj.vector.norm() - 1.0) <= 1e-12);

    CHECK_THROWS_AS(bargmann_project(joint, 0, cplx(0.0)), IndexError);
    CHECK_THROWS_AS(bargmann_project(joint, 5, cplx(0.0)), IndexError);
}

TEST_CASE("bargmann_project: quadrature average reproduces the partial trace") {
    const SystemSpec sys = driven_qubit();
    LatticeConfig cfg;
    cfg.dt = 0.08;
    cfg.bins = 2;
    cfg.n_max = 3;
    CouplingKernel k;
    k.dt = cfg.dt;
    k.samples = {cplx(1.4, 0.2), cplx(0.8, -0.5)};

    JointState joint = initial_joint(superposed_qubit(), sys, cfg);
    const ComplexMatrix u = expm(build_collision_generator(sys, k, cfg));
    joint = collide(joint, u);
    joint = collide(joint, u);  // genuinely entangled bins now

    const BargmannQuadrature q = bargmann_quadrature(cfg.n_max);
    double prob = 0.0;
    ComplexMatrix avg(joint.vector.dim() / cfg.bin_dim(), joint.vector.dim() / cfg.bin_dim());
    for (std::size_t i = 0; i < q.nodes.size(); ++i) {
        const JointState proj = bargmann_project(joint, 1, q.nodes[i]);
        prob += q.lebesgue_weight[i] * proj.vector.norm_weight * proj.vector.norm_squared();
        ComplexMatrix op = outer_product(proj.vector);
        op *= cplx(q.lebesgue_weight[i] * proj.vector.norm_weight);
        avg += op;
    }
    CHECK(std::abs(prob - 1.0) <= 1e-8);

    std::vector<std::size_t> keep = {0, 2};
    const ComplexMatrix traced = reduced_density(joint.vector, joint.space, keep);
    CHECK(max_entry_diff(avg, traced) <= 1e-8);
}

TEST_CASE("run_trajectory: decoupled monitoring gives white outcomes and pure unitary states") {
    SystemSpec sys = driven_qubit();
    LatticeConfig cfg;
    cfg.dt = 0.02;
    cfg.bins = 2;
    cfg.n_max = 2;
    const std::size_t steps = 50;
    const StateVector psi0 = superposed_qubit();

    // Collect outcomes across several decoupled trajectories.
    cplx mean = 0.0;
    double abs2 = 0.0;
    std::size_t count = 0;
    for (std::uint64_t t = 0; t < 40; ++t) {
        const TrajectoryResult tr =
            run_trajectory(sys, zero_kernel(cfg.dt, 2), cfg, steps, derive_seed(5, t), psi0);
        for (const cplx& xi : tr.record.bins) {
            mean += xi;
            abs2 += std::norm(xi);
            ++count;
        }
        // purity 1, unitary evolution
        const ConditionalMixedState& last = tr.states.back();
        CHECK(std::abs((last.rho_s * last.rho_s).trace().real() - 1.0) <= 1e-10);
        ComplexMatrix hs = sys.hamiltonian;
        hs *= cplx(0.0, -cfg.dt * static_cast<double>(steps));
        const std::vector<cplx> ev = matvec(expm(hs), psi0.amplitudes);
        ComplexMatrix expected(2, 2);
        for (std::size_t i = 0; i < 2; ++i)
            for (std::size_t j = 0; j < 2; ++j) expected(i, j) = ev[i] * std::conj(ev[j]);
        CHECK(max_entry_diff(last.rho_s, expected) <= 1e-9);
    }
    const double root = std::sqrt(static_cast<double>(count));
    CHECK(std::abs(mean) / static_cast<double>(count) <= 5.0 / root);
    CHECK(std::abs(abs2 / static_cast<double>(count) - 1.0) <= 5.0 / root);
}

TEST_CASE("run_trajectory: deterministic in the seed") {
    const SystemSpec sys = damped_qubit();
    LatticeConfig cfg;
    cfg.dt = 0.05;
    cfg.bins = 2;
    cfg.n_max = 2;
    const CouplingKernel k = exponential_kernel(1.0, 2.0, cfg.dt, 2);
    const TrajectoryResult a = run_trajectory(sys, k, cfg, 25, 999, excited_qubit());
    const TrajectoryResult b = run_trajectory(sys, k, cfg, 25, 999, excited_qubit());
    CHECK(a.record.bins == b.record.bins);
    for (std::size_t m = 0; m < a.states.size(); ++m)
        CHECK(a.states[m].rho_s.data() == b.states[m].rho_s.data());
    const TrajectoryResult c = run_trajectory(sys, k, cfg, 25, 1000, excited_qubit());
    CHECK(a.record.bins != c.record.bins);

    SUBCASE("conditional states are Hermitian, positive, unit trace, weighted") {
        for (const ConditionalMixedState& st : a.states) {
            CHECK(st.rho_s.is_hermitian(1e-10));
            CHECK(std::abs(st.rho_s.trace() - cplx(1.0)) <= 1e-10);
            for (double ev : hermitian_eigenvalues(st.rho_s)) CHECK(ev >= -1e-10);
            CHECK(st.weight >= 0.0);
            CHECK(std::isfinite(st.log_weight));
        }
    }
}

TEST_CASE("conditional_mixed: replays run_trajectory bitwise on the same record") {
    const SystemSpec sys = driven_qubit();
    LatticeConfig cfg;
    cfg.dt = 0.04;
    cfg.bins = 3;
    cfg.n_max = 2;
    const CouplingKernel k = exponential_kernel(0.8, 1.5, cfg.dt, 3);
    const StateVector psi0 = superposed_qubit();
    const TrajectoryResult tr = run_trajectory(sys, k, cfg, 20, 4242, psi0);

    for (std::size_t n : {1ul, 7ul, 20ul}) {
        const ConditionalMixedState st = conditional_mixed(tr.record, sys, k, cfg, n, psi0);
        CHECK(st.rho_s.data() == tr.states[n - 1].rho_s.data());
        CHECK(st.log_weight == tr.states[n - 1].log_weight);
    }
    CHECK_THROWS_AS(conditional_mixed(tr.record, sys, k, cfg, 21, psi0),
                    InsufficientRecordError);

    SUBCASE("decoupled conditioning keeps the state pure") {
        const TrajectoryResult free_tr =
            run_trajectory(sys, zero_kernel(cfg.dt, 3), cfg, 10, 7, psi0);
        const ConditionalMixedState st =
            conditional_mixed(free_tr.record, sys, zero_kernel(cfg.dt, 3), cfg, 10, psi0);
        CHECK(std::abs((st.rho_s * st.rho_s).trace().real() - 1.0) <= 1e-10);
    }
}

TEST_CASE("ensemble average of conditional states matches the non-selective evolution") {
    const SystemSpec sys = damped_qubit();
    LatticeConfig cfg;
    cfg.dt = 0.05;
    cfg.bins = 2;
    cfg.n_max = 2;
    const CouplingKernel k = exponential_kernel(1.0, 2.0, cfg.dt, 2);
    const StateVector psi0 = excited_qubit();
    const std::size_t steps = 30, n_traj = 400;

    const EnsembleStats stats =
        ensemble_conditional_stats(sys, k, cfg, steps, 2026, psi0, n_traj, 2);
    const NonselectiveResult ns = evolve_nonselective(sys, k, cfg, steps, psi0);

    for (std::size_t m = 0; m < steps; ++m) {
        double se = 0.0;
        for (std::size_t e = 0; e < 4; ++e) {
            se += stats.se_re[m].data()[e].real() * stats.se_re[m].data()[e].real();
            se += stats.se_im[m].data()[e].real() * stats.se_im[m].data()[e].real();
        }
        se = std::sqrt(se);
        CHECK(trace_distance(stats.mean_rho[m], ns.steps[m].rho_s) <= 5.0 * se);
    }
}

TEST_CASE("ensemble statistics do not depend on the thread count") {
    const SystemSpec sys = damped_qubit();
    LatticeConfig cfg;
    cfg.dt = 0.05;
    cfg.bins = 1;
    cfg.n_max = 2;
    const CouplingKernel k = markov_kernel(1.0, cfg.dt);
    const EnsembleStats a =
        ensemble_conditional_stats(sys, k, cfg, 10, 77, excited_qubit(), 64, 1);
    const EnsembleStats b =
        ensemble_conditional_stats(sys, k, cfg, 10, 77, excited_qubit(), 64, 3);
    for (std::size_t m = 0; m < 10; ++m)
        CHECK(a.mean_rho[m].data() == b.mean_rho[m].data());
}

TEST_CASE("retrodict: decoupled limit is the unitary propagation of the initial state") {
    SystemSpec sys = driven_qubit();
    LatticeConfig cfg;
    cfg.dt = 0.03;
    cfg.bins = 3;
    cfg.n_max = 2;
    const StateVector psi0 = superposed_qubit();
    const TrajectoryResult tr =
        run_trajectory(sys, zero_kernel(cfg.dt, 3), cfg, 12, 5150, psi0);

    const std::size_t p = 10;
    const RetrodictedPureState ret =
        retrodict(tr.record, sys, zero_kernel(cfg.dt, 3), cfg, p, psi0);
    ComplexMatrix hs = sys.hamiltonian;
    hs *= cplx(0.0, -cfg.dt * static_cast<double>(p));
    std::vector<cplx> expected = matvec(expm(hs), psi0.amplitudes);
    cplx overlap = 0.0;
    for (std::size_t i = 0; i < 2; ++i)
        overlap += std::conj(expected[i]) * ret.psi_s.amplitudes[i];
    CHECK(1.0 - std::norm(overlap) <= 1e-10);

    SUBCASE("insufficient record carries the required horizon") {
        try {
            retrodict(tr.record, sys, zero_kernel(cfg.dt, 3), cfg, 11, psi0);
            FAIL("expected InsufficientRecordError");
        } catch (const InsufficientRecordError& e) {
            CHECK(e.required_horizon() == 13);
        }
    }
}

TEST_CASE("retrodict: Markov mode matches the independent heterodyne oracle") {
    SystemSpec sys = driven_qubit();
    LatticeConfig cfg;
    cfg.dt = 0.02;
    cfg.bins = 1;
    cfg.n_max = 3;
    const double gamma = 1.0;
    const CouplingKernel k = markov_kernel(gamma, cfg.dt);
    const StateVector psi0 = superposed_qubit();
    const std::size_t steps = 60;
    const TrajectoryResult tr = run_trajectory(sys, k, cfg, steps, 31415, psi0);

    const double theta = std::sqrt(gamma * cfg.dt);
    const oracle::MarkovHeterodyne mk(sys.hamiltonian.data(), sys.coupling.data(), 2,
                                     cfg.dt, theta, cfg.n_max);
    std::vector<cplx> psi = psi0.amplitudes;
    for (std::size_t p = 1; p <= steps; ++p) {
        psi = mk.step(psi, tr.record.at(p));
        const RetrodictedPureState ret = retrodict(tr.record, sys, k, cfg, p, psi0);
        cplx overlap = 0.0;
        for (std::size_t i = 0; i < 2; ++i)
            overlap += std::conj(psi[i]) * ret.psi_s.amplitudes[i];
        CHECK(1.0 - std::norm(overlap) <= 1e-8);
    }

    SUBCASE("retrodicted_s_path agrees with per-step retrodiction") {
        const std::vector<cplx> s_vals = retrodicted_s_path(tr.record, sys, k, cfg, psi0);
        REQUIRE(s_vals.size() == steps + 1);
        const RetrodictedPureState r5 = retrodict(tr.record, sys, k, cfg, 5, psi0);
        const std::vector<cplx> sv = matvec(sys.coupling, r5.psi_s.amplitudes);
        cplx s5 = 0.0;
        for (std::size_t i = 0; i < 2; ++i)
            s5 += std::conj(r5.psi_s.amplitudes[i]) * sv[i];
        CHECK(std::abs(s_vals[5] - s5) <= 1e-12);
    }
}

TEST_CASE("retrodiction/prediction consistency: quadrature over in-memory bins") {
    const SystemSpec sys = damped_qubit();
    LatticeConfig cfg;
    cfg.dt = 0.06;
    cfg.bins = 3;
    cfg.n_max = 2;
    const CouplingKernel k = exponential_kernel(1.0, 2.0, cfg.dt, 3);
    const StateVector psi0 = superposed_qubit();
    const std::size_t p = 5;

    const TrajectoryResult tr = run_trajectory(sys, k, cfg, p, 2718, psi0);
    const ConditionalMixedState cond = conditional_mixed(tr.record, sys, k, cfg, p, psi0);

    const BargmannQuadrature q = bargmann_quadrature(cfg.n_max);
    ComplexMatrix avg(2, 2);
    HeterodyneRecord extended = tr.record;
    extended.bins.resize(p + 2);
    for (std::size_t i = 0; i < q.nodes.size(); ++i) {
        extended.bins[p] = q.nodes[i];
        for (std::size_t j = 0; j < q.nodes.size(); ++j) {
            extended.bins[p + 1] = q.nodes[j];
            const RetrodictedPureState ret = retrodict(extended, sys, k, cfg, p, psi0);
            ComplexMatrix proj = outer_product(ret.psi_s);
            proj *= cplx(q.lebesgue_weight[i] * q.lebesgue_weight[j] *
                         std::exp(ret.log_weight - cond.log_weight));
            avg += proj;
        }
    }
    CHECK(max_entry_diff(avg, cond.rho_s) <= 1e-8);

    SUBCASE("Monte-Carlo variant converges to the same state") {
        Rng rng(13);
        const std::size_t samples = 4000;
        ComplexMatrix mc(2, 2);
        for (std::size_t s = 0; s < samples; ++s) {
            const cplx z1 = rng.standard_complex_normal();
            const cplx z2 = rng.standard_complex_normal();
            extended.bins[p] = z1;
            extended.bins[p + 1] = z2;
            const RetrodictedPureState ret = retrodict(extended, sys, k, cfg, p, psi0);
            // Strip the Gaussian measure factors: sampling already supplies them.
            const double strip = std::numbers::pi * std::numbers::pi *
                                 std::exp(std::norm(z1) + std::norm(z2));
            ComplexMatrix proj = outer_product(ret.psi_s);
            proj *= cplx(strip * std::exp(ret.log_weight - cond.log_weight));
            mc += proj;
        }
        mc *= cplx(1.0 / static_cast<double>(samples));
        CHECK(trace_distance(mc, cond.rho_s) <= 5.0 / std::sqrt(static_cast<double>(samples)));
    }
}

TEST_CASE("predicted_signal_mean: decoupled system predicts zero") {
    const SystemSpec sys = damped_qubit();
    LatticeConfig cfg;
    cfg.dt = 0.05;
    cfg.bins = 2;
    cfg.n_max = 2;
    const StateVector psi0 = superposed_qubit();
    const TrajectoryResult tr =
        run_trajectory(sys, zero_kernel(cfg.dt, 2), cfg, 10, 1, psi0);
    const SignalPrediction pred =
        predicted_signal_mean(tr.record, sys, zero_kernel(cfg.dt, 2), cfg, 4, psi0);
    CHECK(std::abs(pred.mean) == 0.0);
    REQUIRE(pred.retrodiction_steps.size() == 2);
    CHECK(pred.retrodiction_steps[0] == 3);
    CHECK(pred.retrodiction_steps[1] == 2);
}

TEST_CASE("predicted_signal_mean: Markov drift is theta <s> in the conditional state") {
    const SystemSpec sys = damped_qubit();
    LatticeConfig cfg;
    cfg.dt = 0.02;
    cfg.bins = 1;
    cfg.n_max = 2;
    const double gamma = 1.0;
    const CouplingKernel k = markov_kernel(gamma, cfg.dt);
    const StateVector psi0 = superposed_qubit();
    const TrajectoryResult tr = run_trajectory(sys, k, cfg, 20, 90210, psi0);

    const std::size_t m = 8;
    const SignalPrediction pred = predicted_signal_mean(tr.record, sys, k, cfg, m, psi0);
    // With N = 1 the retrodicted state at p = m-1 is the conditional state.
    const ConditionalMixedState st = conditional_mixed(tr.record, sys, k, cfg, m - 1, psi0);
    const cplx s_exp = (sys.coupling * st.rho_s).trace();
    CHECK(std::abs(pred.mean - std::sqrt(gamma * cfg.dt) * s_exp) <= 1e-12);

    SUBCASE("the conditional-mixed flag matches in the Markov case") {
        const SignalPrediction alt = predicted_signal_mean(
            tr.record, sys, k, cfg, m, psi0, SignalStateChoice::conditional_mixed);
        CHECK(std::abs(alt.mean - pred.mean) <= 1e-12);
    }

    SUBCASE("prediction beyond the horizon is rejected") {
        CHECK_THROWS_AS(predicted_signal_mean(tr.record, sys, k, cfg, 22, psi0),
                        InsufficientRecordError);
    }
}

TEST_CASE("innovation_series: residual whiteness over a small ensemble") {
    const SystemSpec sys = damped_qubit();
    LatticeConfig cfg;
    cfg.dt = 0.05;
    cfg.bins = 2;
    cfg.n_max = 2;
    const CouplingKernel k = exponential_kernel(1.0, 2.0, cfg.dt, 2);
    const StateVector psi0 = superposed_qubit();
    const std::size_t steps = 30, n_traj = 200;

    cplx mean = 0.0;
    double abs2 = 0.0;
    cplx lag1 = 0.0;
    std::size_t count = 0, lag_count = 0;
    for (std::uint64_t t = 0; t < n_traj; ++t) {
        const TrajectoryResult tr =
            run_trajectory(sys, k, cfg, steps, derive_seed(606, t), psi0);
        const std::vector<cplx> inn = innovation_series(tr.record, sys, k, cfg, psi0);
        for (std::size_t i = 0; i < inn.size(); ++i) {
            mean += inn[i];
            abs2 += std::norm(inn[i]);
            ++count;
            if (i + 1 < inn.size()) {
                lag1 += inn[i + 1] * std::conj(inn[i]);
                ++lag_count;
            }
        }
    }
    const double root = std::sqrt(static_cast<double>(count));
    CHECK(std::abs(mean) / static_cast<double>(count) <= 5.0 / root);
    CHECK(std::abs(abs2 / static_cast<double>(count) - 1.0) <= 5.0 * std::sqrt(2.0) / root);
    CHECK(std::abs(lag1) / static_cast<double>(lag_count) <=
          5.0 / std::sqrt(static_cast<double>(lag_count)));
}

TEST_CASE("girsanov_colored: no drift means the transform is the identity") {
    CouplingKernel k = exponential_kernel(1.0, 2.0, 0.05, 3);
    HeterodyneRecord rec;
    rec.dt = k.dt;
    const NoisePath xi = sample_white_noise(40, k.dt, 11);
    rec.bins = xi.bins;
    const std::vector<cplx> zero_s(40, cplx(0.0));
    const GirsanovResult g = girsanov_colored(rec, k, zero_s);
    const NoisePath a = color(xi, k, rec.bins.size() - k.bins() + 1);
    for (std::size_t i = 0; i < g.a_tilde.bins.size(); ++i)
        CHECK(g.a_tilde.bins[i] == a.bins[i]);
    CHECK(g.max_residual <= 1e-12);
}

TEST_CASE("girsanov_colored: by-construction records satisfy the convolved identity") {
    std::mt19937_64 eng(404);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    CouplingKernel k = exponential_kernel(1.3, 1.7, 0.04, 4);
    LatticeConfig amp_cfg;
    amp_cfg.dt = k.dt;
    amp_cfg.bins = 4;
    const std::vector<cplx> theta = step_amplitudes(k, amp_cfg);

    const std::size_t n = 60;
    std::vector<cplx> s_path(n);
    for (cplx& z : s_path) z = cplx(u(eng), u(eng));
    const NoisePath xi = sample_white_noise(n, k.dt, 2024);

    HeterodyneRecord rec;
    rec.dt = k.dt;
    rec.bins.resize(n);
    for (std::size_t m = 1; m <= n; ++m) {
        cplx drift = 0.0;
        for (std::size_t j = 0; j < theta.size(); ++j) {
            if (m < j + 1) break;
            const std::size_t idx = m - 1 - j;
            if (idx < s_path.size()) drift += theta[j] * s_path[idx];
        }
        rec.bins[m - 1] = xi.bins[m - 1] + drift;
    }
    const GirsanovResult g = girsanov_colored(rec, k, s_path);
    CHECK(g.max_residual <= 1e-10);
}

TEST_CASE("girsanov_colored: Markov kernel reduces to the standard drift") {
    const double dt = 0.01, gamma = 1.0;
    const CouplingKernel k = markov_kernel(gamma, dt);
    const std::size_t n = 30;
    std::mt19937_64 eng(7);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<cplx> s_path(n);
    for (cplx& z : s_path) z = cplx(u(eng), u(eng));
    HeterodyneRecord rec;
    rec.dt = dt;
    rec.bins = sample_white_noise(n, dt, 3).bins;

    const GirsanovResult g = girsanov_colored(rec, k, s_path);
    // Innovation part: record minus theta_0 <s> one step back.
    const cplx theta0 = k.samples[0] * dt * std::sqrt(dt);
    NoisePath inn;
    inn.dt = dt;
    inn.normalization = NoiseNorm::bin;
    inn.bins.resize(n);
    for (std::size_t m = 1; m <= n; ++m)
        inn.bins[m - 1] = rec.bins[m - 1] - theta0 * s_path[m - 1];
    // a_tilde - a = gamma * <s> at the matching step.
    const NoisePath a = color(inn, k, n);
    for (std::size_t m = 1; m <= n; ++m) {
        const cplx drift = g.a_tilde.bins[m - 1] - a.bins[m - 1];
        const cplx expected = gamma * s_path[m - 1];
        CHECK(std::abs(drift - expected) <= 1e-10);
    }
}

TEST_CASE("record file round-trip is exact") {
    const SystemSpec sys = damped_qubit();
    LatticeConfig cfg;
    cfg.dt = 0.05;
    cfg.bins = 2;
    cfg.n_max = 2;
    const CouplingKernel k = exponential_kernel(1.0, 2.0, cfg.dt, 2);
    const TrajectoryResult tr = run_trajectory(sys, k, cfg, 17, 888, excited_qubit());

    std::ostringstream os;
    write_record(os, tr.record);
    std::istringstream is(os.str());
    const HeterodyneRecord back = read_record(is);
    CHECK(back.dt == tr.record.dt);
    CHECK(back.seed == tr.record.seed);
    CHECK(back.kernel_fp == tr.record.kernel_fp);
    CHECK(back.system_fp == tr.record.system_fp);
    CHECK(back.memory_bins == tr.record.memory_bins);
    CHECK(back.n_max == tr.record.n_max);
    REQUIRE(back.bins.size() == tr.record.bins.size());
    for (std::size_t i = 0; i < back.bins.size(); ++i) CHECK(back.bins[i] == tr.record.bins[i]);

    SUBCASE("conditional state dump emits one line per step") {
        std::ostringstream cs;
        write_conditional_states(cs, tr.states);
        std::size_t lines = 0;
        std::istringstream count(cs.str());
        std::string line;
        while (std::getline(count, line))
            if (!line.empty() && line[0] != '#' && line[0] != 'm') ++lines;
        CHECK(lines == tr.states.size());
    }
}
