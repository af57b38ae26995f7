#include "openq/random.hpp"
#include "openq/states.hpp"
#include "test_util.hpp"

using namespace openq;
using testutil::diag;

TEST(DensityMatrixType, ValidatesByDefault) {
    EXPECT_NO_THROW(DensityMatrix(identity(2) / 2.0));
    EXPECT_THROW(DensityMatrix(identity(2)), validation_error);
    EXPECT_THROW(DensityMatrix(diag({1.5, -0.5})), validation_error);
    EXPECT_THROW(DensityMatrix(mat2(0.5, 0.5, 0, 0.5)), validation_error);
    EXPECT_NO_THROW(DensityMatrix::raw(identity(2)));
}

TEST(Bloch, EncodeExamples) {
    EXPECT_MAT_NEAR(bloch_encode({0, 0, 1}).matrix(), projector(ket(2, 0)), 1e-15);
    EXPECT_MAT_NEAR(bloch_encode({0, 0, 0}).matrix(), identity(2) / 2.0, 1e-15);
    ComplexVector plus(2);
    plus << 1 / std::sqrt(2.0), 1 / std::sqrt(2.0);
    EXPECT_MAT_NEAR(bloch_encode({1, 0, 0}).matrix(), projector(plus), 1e-15);
    EXPECT_THROW(bloch_encode({1, 1, 0}), domain_error);
}

TEST(Bloch, DecodeExamples) {
    EXPECT_LE((bloch_decode(DensityMatrix::pure(ket(2, 1))) - BlochVector(0, 0, -1)).norm(), 1e-15);
    ComplexVector minus(2);
    minus << 1 / std::sqrt(2.0), -1 / std::sqrt(2.0);
    EXPECT_LE((bloch_decode(DensityMatrix::pure(minus)) - BlochVector(-1, 0, 0)).norm(), 1e-15);
    EXPECT_LE(bloch_decode(DensityMatrix::maximally_mixed(2)).norm(), 1e-15);
    EXPECT_THROW(bloch_decode(DensityMatrix::maximally_mixed(3)), shape_error);
}

TEST(Bloch, RoundTrip) {
    Rng rng(1);
    for (int i = 0; i < 100; ++i) {
        BlochVector v(rng.normal(), rng.normal(), rng.normal());
        v *= rng.uniform() / v.norm();
        EXPECT_LE((bloch_decode(bloch_encode(v)) - v).norm(), 1e-12);
    }
}

TEST(Purity, Examples) {
    EXPECT_NEAR(purity(DensityMatrix::pure(ket(3, 2))), 1.0, 1e-15);
    EXPECT_NEAR(purity(DensityMatrix::maximally_mixed(2)), 0.5, 1e-15);
    EXPECT_NEAR(purity(bloch_encode({0.6, 0, 0})), 0.68, 1e-15);
}

TEST(Purity, BoundsOnRandomStates) {
    Rng rng(2);
    for (int d : {2, 3, 5})
        for (int i = 0; i < 30; ++i) {
            const double p = purity(random_density(d, rng));
            EXPECT_GE(p, 1.0 / d - 1e-12);
            EXPECT_LE(p, 1.0 + 1e-12);
        }
    EXPECT_NEAR(purity(DensityMatrix::maximally_mixed(5)), 0.2, 1e-15);
}

TEST(CoherenceVector, QubitPureStatesOnSphere) {
    const auto basis = gellmann_basis(2);
    Rng rng(3);
    for (int i = 0; i < 20; ++i) {
        const auto v = coherence_vector(projector(random_pure_state(2, rng)), basis);
        EXPECT_NEAR(v.norm(), 1 / std::sqrt(2.0), 1e-12);
    }
    EXPECT_LE(coherence_vector(identity(3) / 3.0, gellmann_basis(3)).norm(), 1e-15);
}

TEST(CoherenceVector, QutritRoundTripAndBound) {
    const auto basis = gellmann_basis(3);
    Rng rng(4);
    for (int i = 0; i < 20; ++i) {
        const ComplexMatrix rho = random_density(3, rng);
        const RealVector v = coherence_vector(rho, basis);
        EXPECT_MAT_NEAR(from_coherence_vector(v, basis, 3), rho, 1e-12);
        EXPECT_LE(v.norm(), std::sqrt(1 - 1.0 / 3) + 1e-9);
    }
}

TEST(CoherenceVector, RejectsBadBasis) {
    auto basis = gellmann_basis(2);
    basis[0] *= 2.0;
    EXPECT_THROW(coherence_vector(identity(2) / 2.0, basis), validation_error);
    basis = gellmann_basis(2);
    basis.pop_back();
    EXPECT_THROW(coherence_vector(identity(2) / 2.0, basis), validation_error);
}

TEST(Gibbs, Examples) {
    Rng rng(5);
    const ComplexMatrix h = random_hermitian(3, rng);
    EXPECT_MAT_NEAR(gibbs_state(h, 0).matrix(), identity(3) / 3.0, 1e-14);
    const auto g = gibbs_state(-0.5 * pauli_z(), 1.0);
    const double z = 1 + std::exp(-1.0);
    EXPECT_MAT_NEAR(g.matrix(), diag({1 / z, std::exp(-1.0) / z}), 1e-14);
    EXPECT_NEAR(g(0, 0).real(), 0.7311, 1e-4);
    // gap 1, beta 50 -> ground projector
    const auto cold = gibbs_state(diag({0.0, 1.0, 2.5}), 50);
    EXPECT_MAT_NEAR(cold.matrix(), projector(ket(3, 0)), 1e-6);
    EXPECT_THROW(gibbs_state(h, -1), domain_error);
}

TEST(Gibbs, CommutesWithHamiltonianAndSurvivesLargeBeta) {
    Rng rng(6);
    const ComplexMatrix h = random_hermitian(4, rng, 100.0);
    for (double beta : {0.3, 10.0, 1e3}) {
        const auto g = gibbs_state(h, beta);
        EXPECT_LE(max_abs(commutator(g.matrix(), h)), 1e-10 * std::max(1.0, max_abs(h)));
    }
}

TEST(Ensemble, Examples) {
    PureStateEnsemble e1{{0.75, 0.25}, {ket(2, 0), ket(2, 1)}};
    EXPECT_MAT_NEAR(ensemble_density(e1).matrix(), diag({0.75, 0.25}), 1e-15);
    ComplexVector a(2), b(2);
    a << std::sqrt(0.75), std::sqrt(0.25);
    b << std::sqrt(0.75), -std::sqrt(0.25);
    PureStateEnsemble e2{{0.5, 0.5}, {a, b}};
    EXPECT_MAT_NEAR(ensemble_density(e2).matrix(), ensemble_density(e1).matrix(), 1e-15);
    PureStateEnsemble single{{1.0}, {a}};
    EXPECT_MAT_NEAR(ensemble_density(single).matrix(), projector(a), 1e-15);
}

TEST(Ensemble, PaddingAndValidation) {
    PureStateEnsemble e{{0.75, 0.25}, {ket(2, 0), ket(2, 1)}};
    const auto padded = pad_ensemble(e, 4);
    EXPECT_EQ(padded.states.size(), 4u);
    EXPECT_NO_THROW(validate_ensemble(padded));
    EXPECT_MAT_NEAR(ensemble_density(padded).matrix(), ensemble_density(e).matrix(), 0);
    PureStateEnsemble bad{{0.5, 0.4}, {ket(2, 0), ket(2, 1)}};
    EXPECT_THROW(validate_ensemble(bad), validation_error);
    PureStateEnsemble unnorm{{0.5, 0.5}, {ket(2, 0), ComplexVector(2.0 * ket(2, 1))}};
    EXPECT_THROW(validate_ensemble(unnorm), validation_error);
}

TEST(Ensemble, UnitaryMixingLeavesDensityInvariant) {
    Rng rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        PureStateEnsemble e;
        const int n = 3;
        double s = 0;
        for (int i = 0; i < n; ++i) {
            e.weights.push_back(rng.uniform() + 0.01);
            s += e.weights.back();
            e.states.push_back(random_pure_state(2, rng));
        }
        for (double& w : e.weights) w /= s;
        const ComplexMatrix u = random_unitary(5, rng);  // larger than the ensemble: padding is exercised
        const auto mixed = mix_ensemble(e, u);
        EXPECT_MAT_NEAR(ensemble_density(mixed).matrix(), ensemble_density(e).matrix(), 1e-10);
    }
}

TEST(TraceDistance, Examples) {
    Rng rng(8);
    const ComplexMatrix rho = random_density(3, rng);
    EXPECT_NEAR(trace_distance(rho, rho), 0.0, 1e-15);
    EXPECT_NEAR(trace_distance(projector(ket(2, 0)), projector(ket(2, 1))), 1.0, 1e-15);
    EXPECT_NEAR(trace_distance(diag({1, 0}), identity(2) / 2.0), 0.5, 1e-15);
    EXPECT_THROW(trace_distance(identity(2), identity(3)), shape_error);
}

TEST(TraceDistance, MetricOnTriples) {
    Rng rng(9);
    for (int i = 0; i < 50; ++i) {
        const ComplexMatrix a = random_density(3, rng), b = random_density(3, rng), c = random_density(3, rng);
        EXPECT_LE(trace_distance(a, c), trace_distance(a, b) + trace_distance(b, c) + 1e-12);
        EXPECT_NEAR(trace_distance(a, b), trace_distance(b, a), 1e-12);
        EXPECT_LE(trace_distance(a, b), 1 + 1e-12);
    }
}

TEST(Fidelity, Examples) {
    Rng rng(10);
    const ComplexMatrix rho = random_density(2, rng);
    EXPECT_NEAR(fidelity(rho, rho), 1.0, 1e-8);
    EXPECT_NEAR(fidelity(projector(ket(2, 0)), identity(2) / 2.0), std::sqrt(0.5), 1e-8);
    EXPECT_THROW(fidelity(identity(2), identity(3)), shape_error);
}

TEST(Fidelity, PureAgainstMixedAndSymmetry) {
    Rng rng(11);
    for (int i = 0; i < 50; ++i) {
        const ComplexVector psi = random_pure_state(3, rng);
        const ComplexMatrix rho = random_density(3, rng), sigma = random_density(3, rng);
        EXPECT_NEAR(fidelity(projector(psi), rho), std::sqrt((psi.adjoint() * rho * psi)(0).real()), 1e-7);
        EXPECT_NEAR(fidelity(rho, sigma), fidelity(sigma, rho), 1e-9);
    }
}

TEST(Fidelity, FuchsVanDeGraaf) {
    Rng rng(12);
    for (int i = 0; i < 1000; ++i) {
        const ComplexMatrix rho = random_density(2, rng), sigma = random_density(2, rng);
        const double f = fidelity(rho, sigma), d = trace_distance(rho, sigma);
        EXPECT_LE(1 - f, d + 1e-9);
        EXPECT_LE(d, std::sqrt(std::max(0.0, 1 - f * f)) + 1e-9);
    }
}

TEST(Distances, JointUnitaryInvariance) {
    Rng rng(13);
    for (int i = 0; i < 30; ++i) {
        const ComplexMatrix a = random_density(3, rng), b = random_density(3, rng), u = random_unitary(3, rng);
        EXPECT_NEAR(trace_distance(u * a * u.adjoint(), u * b * u.adjoint()), trace_distance(a, b), 1e-10);
        EXPECT_NEAR(fidelity(u * a * u.adjoint(), u * b * u.adjoint()), fidelity(a, b), 1e-8);
    }
}

TEST(Povm, BornRule) {
    ComplexVector psi(2);
    psi << cplx(0.6, 0), cplx(0, 0.8);
    const auto p = povm_probabilities(DensityMatrix::pure(psi), {projector(ket(2, 0)), projector(ket(2, 1))});
    EXPECT_NEAR(p[0], 0.36, 1e-15);
    EXPECT_NEAR(p[1], 0.64, 1e-15);
    EXPECT_NEAR(povm_probabilities(DensityMatrix::maximally_mixed(2), {identity(2)})[0], 1.0, 1e-15);
}

TEST(Povm, UnambiguousDiscrimination) {
    const double alpha = std::sqrt(2.0) / (1 + std::sqrt(2.0));
    ComplexVector minus(2), plus(2);
    minus << 1 / std::sqrt(2.0), -1 / std::sqrt(2.0);
    plus << 1 / std::sqrt(2.0), 1 / std::sqrt(2.0);
    const ComplexMatrix e1 = alpha * projector(ket(2, 1)), e2 = alpha * projector(minus);
    const ComplexMatrix e3 = identity(2) - e1 - e2;
    const auto p = povm_probabilities(DensityMatrix::pure(ket(2, 0)), {e1, e2, e3});
    EXPECT_NEAR(p[2], 1 - alpha / 2, 1e-12);
    EXPECT_NEAR(p[2], 0.707, 1e-3);
    EXPECT_NEAR(p[0], 0.0, 1e-15);  // E1 never fires on |0>
    EXPECT_NEAR(p[0] + p[1] + p[2], 1.0, 1e-12);
    // E3 sits at the PSD boundary for this alpha
    EXPECT_NEAR(min_eigh(e3), 0.0, 1e-12);
}

TEST(Povm, RejectsInvalid) {
    EXPECT_THROW(povm_probabilities(DensityMatrix::maximally_mixed(2), {projector(ket(2, 0))}), validation_error);
    EXPECT_THROW(povm_probabilities(DensityMatrix::maximally_mixed(2), {diag({1.5, 1}), diag({-0.5, 0})}),
                 validation_error);
}

TEST(Uncertainty, RandomObservablesAndStates) {
    Rng rng(14);
    for (int i = 0; i < 500; ++i) {
        const ComplexMatrix rho = random_density(2, rng);
        const ComplexMatrix a = random_hermitian(2, rng), b = random_hermitian(2, rng);
        const double lhs = std_dev(rho, a) * std_dev(rho, b);
        const double rhs = 0.5 * std::abs((rho * commutator(a, b)).trace());
        EXPECT_GE(lhs, rhs - 1e-12);
    }
}
