#include <cstdlib>

#include "openq/random.hpp"
#include "openq/trajectories.hpp"
#include "test_util.hpp"

using namespace openq;
using testutil::diag;

namespace {

LindbladGenerator amp_damp(double g, const ComplexMatrix& h = zeros(2, 2)) { return LindbladGenerator(h, {{g, sigma_plus()}}); }
LindbladGenerator phase_damp(double g) { return LindbladGenerator(zeros(2, 2), {{g, pauli_z()}}); }

ComplexVector plus_state() {
    ComplexVector p(2);
    p << 1 / std::sqrt(2.0), 1 / std::sqrt(2.0);
    return p;
}

// Kolmogorov-Smirnov statistic against an exponential law with the given rate.
double ks_exponential(std::vector<double> x, double rate) {
    std::sort(x.begin(), x.end());
    const double n = static_cast<double>(x.size());
    double d = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double f = 1 - std::exp(-rate * x[i]);
        d = std::max({d, std::abs(f - i / n), std::abs(f - (i + 1) / n)});
    }
    return d;
}

double trace_gap(const EnsembleEstimate& e, const ComplexMatrix& ref) { return 0.5 * trace_norm(ComplexMatrix(e.mean.matrix() - ref)); }

}  // namespace

TEST(ConditionalHamiltonian, DecayOperatorIsPsd) {
    Rng rng(1);
    const LindbladGenerator gen(random_hermitian(3, rng), {{0.4, random_ginibre(3, 3, rng)}, {1.1, random_ginibre(3, 3, rng)}});
    const ConditionalHamiltonian hc(gen);
    const ComplexMatrix lhs = I_unit * (hc.matrix() - hc.matrix().adjoint());
    EXPECT_MAT_NEAR(lhs, hc.decay_operator(), 1e-12);
    EXPECT_GE(min_eigh(hermitian_part(lhs)), -1e-10);
}

TEST(ConditionalPropagate, UnitaryWhenNoDissipation) {
    Rng rng(2);
    const ComplexMatrix h = random_hermitian(3, rng);
    const ConditionalHamiltonian hc{LindbladGenerator(h)};
    const ComplexVector psi = random_pure_state(3, rng);
    const ComplexVector out = conditional_propagate(hc, psi, 1.7);
    EXPECT_NEAR(out.norm(), 1.0, 1e-12);
    EXPECT_LE((out - matrix_exp(-I_unit * 1.7 * h) * psi).norm(), 1e-12);
}

TEST(ConditionalPropagate, AmplitudeDampingNorms) {
    const double g = 0.9;
    const ConditionalHamiltonian hc(amp_damp(g));
    for (double tau : {0.0, 0.3, 2.0, 7.0}) {
        EXPECT_NEAR(conditional_propagate(hc, ket(2, 1), tau).squaredNorm(), std::exp(-g * tau), 1e-13);
        EXPECT_NEAR(conditional_propagate(hc, ket(2, 0), tau).squaredNorm(), 1.0, 1e-13);
    }
    EXPECT_THROW(conditional_propagate(hc, ket(2, 0), -0.1), domain_error);
}

TEST(ConditionalPropagate, NormNonIncreasing) {
    Rng rng(3);
    for (int trial = 0; trial < 10; ++trial) {
        const LindbladGenerator gen(random_hermitian(3, rng), {{rng.uniform(), random_ginibre(3, 3, rng)}});
        const ConditionalHamiltonian hc(gen);
        const ComplexVector psi = random_pure_state(3, rng);
        double prev = 1.0 + 1e-12;
        for (int i = 0; i <= 100; ++i) {
            const double n = conditional_propagate(hc, psi, 0.05 * i).squaredNorm();
            EXPECT_LE(n, prev + 1e-12);
            prev = n;
        }
    }
}

TEST(WaitingTime, ExponentialLawForAmplitudeDamping) {
    const double g = 1.3;
    const ConditionalHamiltonian hc(amp_damp(g));
    Rng rng(4);
    std::vector<double> taus;
    for (int k = 0; k < 10000; ++k) {
        const WaitingTime w = waiting_time_sample(hc, ket(2, 1), rng);
        ASSERT_EQ(w.alpha, 0);
        taus.push_back(w.tau);
    }
    // p > 0.01 for the asymptotic Kolmogorov distribution means D < 1.628/sqrt(n)
    EXPECT_LT(ks_exponential(taus, g), 1.628 / std::sqrt(10000.0));
}

TEST(WaitingTime, ChannelChoiceSymmetry) {
    // gamma_1 ||L_1 psi||^2 = gamma_2 ||L_2 psi||^2 for |1> with L_1 = sigma_plus, L_2 = 2 sigma_plus at a quarter rate
    const LindbladGenerator gen(zeros(2, 2), {{1.0, sigma_plus()}, {0.25, ComplexMatrix(2.0 * sigma_plus())}});
    const ConditionalHamiltonian hc(gen);
    Rng rng(5);
    int first = 0;
    const int n = 20000;
    for (int k = 0; k < n; ++k) first += waiting_time_sample(hc, ket(2, 1), rng).alpha == 0;
    EXPECT_NEAR(first / double(n), 0.5, 4 * 0.5 / std::sqrt(double(n)));
}

TEST(WaitingTime, NoJumpSentinels) {
    Rng rng(6);
    const ConditionalHamiltonian none{LindbladGenerator(pauli_x())};
    const WaitingTime w = waiting_time_sample(none, ket(2, 0), rng);
    EXPECT_TRUE(std::isinf(w.tau));
    EXPECT_EQ(w.alpha, -1);
    const ConditionalHamiltonian ad(amp_damp(1.0));
    EXPECT_TRUE(std::isinf(waiting_time_sample(ad, ket(2, 0), rng).tau));  // dark state
    EXPECT_THROW(waiting_time_sample(ad, ComplexVector(2.0 * ket(2, 0)), rng), validation_error);
}

TEST(Trajectory, NoDissipationIsSchrodinger) {
    Rng rng(7);
    const ComplexMatrix h = random_hermitian(2, rng);
    const ComplexVector psi = random_pure_state(2, rng);
    const auto rec = run_trajectory(LindbladGenerator(h), psi, 2.0, 11);
    EXPECT_TRUE(rec.times.empty());
    EXPECT_LE((rec.final_state - matrix_exp(-I_unit * 2.0 * h) * psi).norm(), 1e-12);
}

TEST(Trajectory, AmplitudeDampingEndsInGround) {
    int in_ground = 0;
    for (std::uint64_t s = 0; s < 200; ++s) {
        const auto rec = run_trajectory(amp_damp(1.0), ket(2, 1), 30.0, 99, s);
        in_ground += std::norm(rec.final_state(0)) > 1 - 1e-12;
        EXPECT_LE(rec.times.size(), 1u);
    }
    EXPECT_EQ(in_ground, 200);
}

TEST(Trajectory, DeterministicAndWellFormed) {
    Rng rng(8);
    const LindbladGenerator gen(random_hermitian(3, rng), {{0.7, random_ginibre(3, 3, rng)}, {0.3, random_ginibre(3, 3, rng)}});
    const ComplexVector psi = random_pure_state(3, rng);
    const auto a = run_trajectory(gen, psi, 5.0, 123, 4);
    const auto b = run_trajectory(gen, psi, 5.0, 123, 4);
    EXPECT_EQ(a.times, b.times);
    EXPECT_EQ(a.channels, b.channels);
    EXPECT_EQ((a.final_state - b.final_state).norm(), 0.0);
    EXPECT_NEAR(a.final_state.norm(), 1.0, 1e-9);
    EXPECT_GT(a.times.size(), 0u);
    for (std::size_t i = 0; i < a.times.size(); ++i) {
        EXPECT_GE(a.times[i], 0.0);
        EXPECT_LE(a.times[i], 5.0);
        if (i) EXPECT_GT(a.times[i], a.times[i - 1]);
    }
}

TEST(Trajectory, SurvivalFractionMatchesConditionalNorm) {
    // For amplitude damping from |1>, Pr(no jump before tau) = ||psi~(tau)||^2 = e^{-g tau}.
    const double g = 0.8;
    const ConditionalHamiltonian hc(amp_damp(g));
    const int K = 10000;
    std::vector<double> first(K);
    for (int k = 0; k < K; ++k) {
        const auto rec = run_trajectory(amp_damp(g), ket(2, 1), 10.0, 5, k);
        first[k] = rec.times.empty() ? 1e300 : rec.times[0];
    }
    for (double tau : {0.25, 1.0, 2.5}) {
        const double frac = std::count_if(first.begin(), first.end(), [&](double t) { return t > tau; }) / double(K);
        const double p = conditional_propagate(hc, ket(2, 1), tau).squaredNorm();
        EXPECT_NEAR(frac, p, 4 * std::sqrt(p * (1 - p) / K));
    }
}

TEST(Ensemble, PhaseDampingCoherence) {
    const double g = 0.5, t = 2.0;  // gamma t = 1
    const auto est = ensemble_average(phase_damp(g), plus_state(), t, 10000, 2024);
    const double vx = 2 * est.mean(0, 1).real();
    EXPECT_NEAR(vx, std::exp(-2 * g * t), 3 * 2 * est.std_error(0, 1));
}

TEST(Ensemble, SingleTrajectoryIsPure) {
    const auto est = ensemble_average(amp_damp(1.0), plus_state(), 0.7, 1, 3);
    EXPECT_NEAR(purity(est.mean.matrix()), 1.0, 1e-12);
    EXPECT_EQ(est.max_stderr, 0.0);
    EXPECT_THROW(ensemble_average(amp_damp(1.0), plus_state(), 0.7, 0, 3), domain_error);
}

TEST(Ensemble, MatchesEvolveWithinFiveStderr) {
    Rng rng(9);
    const LindbladGenerator gen(random_hermitian(2, rng), {{0.6, random_ginibre(2, 2, rng)}, {0.2, pauli_z()}});
    const ComplexVector psi = random_pure_state(2, rng);
    const double t = 1.5;
    const auto est = ensemble_average(gen, psi, t, 10000, 77);
    const ComplexMatrix ref = evolve_operator(gen, projector(psi), t);
    EXPECT_LE(trace_gap(est, ref), 5 * est.max_stderr);
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) EXPECT_GE(est.std_error(i, j), 0.0);
}

TEST(Ensemble, StderrHalvesWhenKQuadruples) {
    const auto a = ensemble_average(amp_damp(1.0), plus_state(), 0.8, 2000, 1);
    const auto b = ensemble_average(amp_damp(1.0), plus_state(), 0.8, 8000, 2);
    EXPECT_NEAR(b.max_stderr / a.max_stderr, 0.5, 0.05);
}

TEST(Ensemble, SeriesAgreesWithFinalTimeAverage) {
    const std::vector<double> times{0.0, 0.5, 1.0, 1.5};
    const auto series = ensemble_series(amp_damp(1.0), plus_state(), times, 500, 42);
    const auto fin = ensemble_average(amp_damp(1.0), plus_state(), 1.5, 500, 42);
    ASSERT_EQ(series.size(), 4u);
    EXPECT_LE(max_abs_diff(series.back().mean.matrix(), fin.mean.matrix()), 1e-14);
    EXPECT_LE(max_abs_diff(series.front().mean.matrix(), projector(plus_state())), 1e-14);
}

TEST(Ensemble, IndependentOfThreadCount) {
    Rng rng(10);
    const LindbladGenerator gen(random_hermitian(2, rng), {{0.6, random_ginibre(2, 2, rng)}});
    setenv("OPENQ_THREADS", "1", 1);
    const auto a = ensemble_average(gen, plus_state(), 2.0, 300, 5);
    setenv("OPENQ_THREADS", "4", 1);
    const auto b = ensemble_average(gen, plus_state(), 2.0, 300, 5);
    unsetenv("OPENQ_THREADS");
    EXPECT_EQ(max_abs_diff(a.mean.matrix(), b.mean.matrix()), 0.0);
}

TEST(StochasticSchrodinger, RequiresHermitianOperators) {
    Rng rng(11);
    EXPECT_THROW(stochastic_schrodinger_step(amp_damp(1.0), ket(2, 1), 1e-3, rng), unsupported_error);
    EXPECT_THROW(stochastic_schrodinger_step(phase_damp(1.0), ket(2, 1), 0.0, rng), domain_error);
}

TEST(StochasticSchrodinger, NoNoiseIsSchrodinger) {
    Rng rng(12);
    const ComplexMatrix h = random_hermitian(2, rng);
    const ComplexVector psi = random_pure_state(2, rng);
    const ComplexVector out = sse_trajectory(LindbladGenerator(h, {{0.0, pauli_z()}}), psi, 1.0, 1e-3, 3);
    EXPECT_LE((out - matrix_exp(-I_unit * h) * psi).norm(), 1e-10);
}

TEST(StochasticSchrodinger, StepIsNormPreserving) {
    Rng rng(13);
    const LindbladGenerator gen(pauli_x(), {{0.8, pauli_z()}, {0.3, pauli_y()}});
    ComplexVector psi = plus_state();
    for (int i = 0; i < 1000; ++i) {
        psi = stochastic_schrodinger_step(gen, psi, 1e-3, rng);
        ASSERT_NEAR(psi.norm(), 1.0, 1e-12);
    }
}

TEST(StochasticSchrodinger, DephasingEnsembleMatchesLindblad) {
    const double g = 1.0, t = 0.5;
    const auto est = sse_ensemble(phase_damp(g), plus_state(), t, 1e-3, 10000, 31);
    const double ref = 0.5 * std::exp(-2 * g * t);
    EXPECT_NEAR(est.mean(0, 1).real(), ref, 3 * est.std_error(0, 1));
}

TEST(StochasticSchrodinger, DrivenEnsembleMatchesLindblad) {
    const LindbladGenerator gen(0.7 * pauli_x(), {{0.5, pauli_z()}});
    const double t = 1.0;
    const auto est = sse_ensemble(gen, ket(2, 0), t, 1e-3, 4000, 8);
    const ComplexMatrix ref = evolve_operator(gen, projector(ket(2, 0)), t);
    // O(dt) bias from splitting H and noise is far below the statistical error here
    EXPECT_LE(trace_gap(est, ref), 5 * est.max_stderr + 1e-3);
}

TEST(Telegraph, FixedStepEnsembleMatchesLindblad) {
    const LindbladGenerator gen(0.4 * pauli_x(), {{1.0, sigma_plus()}});
    const double t = 1.0;
    const double dt = default_telegraph_dt(gen);
    EXPECT_DOUBLE_EQ(dt, 1e-3);
    const auto est = telegraph_ensemble(gen, ket(2, 1), t, dt, 4000, 9);
    const ComplexMatrix ref = evolve_operator(gen, projector(ket(2, 1)), t);
    EXPECT_LE(trace_gap(est, ref), 5 * est.max_stderr + 2e-3);
}
