#include "openq/numkit.hpp"
#include "openq/random.hpp"
#include "test_util.hpp"

using namespace openq;
using testutil::diag;

TEST(TensorProduct, IdentityTimesIdentity) { EXPECT_MAT_NEAR(tensor_product(identity(2), identity(2)), identity(4), 0); }

TEST(TensorProduct, ZZIsDiagonal) { EXPECT_MAT_NEAR(tensor_product(pauli_z(), pauli_z()), diag({1, -1, -1, 1}), 0); }

TEST(TensorProduct, BasisOrdering) {
    const ComplexVector v = tensor_product(ket(2, 0), ket(2, 1));
    EXPECT_MAT_NEAR(ComplexMatrix(v), ComplexMatrix(ket(4, 1)), 0);
}

TEST(TensorProduct, BlockStructure) {
    Rng rng(3);
    const ComplexMatrix a = random_ginibre(2, 3, rng), b = random_ginibre(3, 2, rng);
    const ComplexMatrix t = tensor_product(a, b);
    ASSERT_EQ(t.rows(), 6);
    ASSERT_EQ(t.cols(), 6);
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 3; ++j) EXPECT_MAT_NEAR(ComplexMatrix(t.block(3 * i, 2 * j, 3, 2)), ComplexMatrix(a(i, j) * b), 1e-15);
}

TEST(PartialTrace, ProductState) {
    Rng rng(7);
    const ComplexMatrix ra = random_density(2, rng), rb = random_density(3, rng);
    EXPECT_MAT_NEAR(partial_trace(tensor_product(ra, rb), 2, 3, Keep::A), ra, 1e-14);
    EXPECT_MAT_NEAR(partial_trace(tensor_product(ra, rb), 2, 3, Keep::B), rb, 1e-14);
}

TEST(PartialTrace, BellStateGivesMaximallyMixed) {
    ComplexVector psi = ComplexVector::Zero(4);
    psi(0) = psi(3) = 1 / std::sqrt(2.0);
    EXPECT_MAT_NEAR(partial_trace(projector(psi), 2, 2, Keep::A), identity(2) / 2.0, 1e-15);
}

TEST(PartialTrace, TracelessFactor) {
    EXPECT_MAT_NEAR(partial_trace(tensor_product(pauli_z(), pauli_x()), 2, 2, Keep::A), zeros(2, 2), 0);
}

TEST(PartialTrace, ShapeMismatchThrows) { EXPECT_THROW(partial_trace(identity(4), 2, 3, Keep::A), shape_error); }

TEST(PartialTrace, PreservesTraceAndPositivity) {
    Rng rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        for (auto [da, db] : {std::pair{2, 2}, std::pair{2, 3}}) {
            const ComplexMatrix rho = random_density(da * db, rng);
            for (Keep k : {Keep::A, Keep::B}) {
                const ComplexMatrix r = partial_trace(rho, da, db, k);
                EXPECT_NEAR(std::abs(r.trace() - rho.trace()), 0.0, 1e-12);
                EXPECT_GE(min_eigh(r), -1e-12);
            }
        }
    }
}

TEST(MatrixExp, Zero) { EXPECT_MAT_NEAR(matrix_exp(zeros(3, 3)), identity(3), 1e-15); }

TEST(MatrixExp, PauliRotation) {
    for (double th : {0.1, 0.7, 2.5}) {
        const ComplexMatrix e = matrix_exp(I_unit * th * pauli_x());
        EXPECT_MAT_NEAR(e, ComplexMatrix(std::cos(th) * identity(2) + I_unit * std::sin(th) * pauli_x()), 1e-13);
    }
}

TEST(MatrixExp, Diagonal) {
    EXPECT_MAT_NEAR(matrix_exp(diag({0.3, -1.2})), diag({std::exp(0.3), std::exp(-1.2)}), 1e-14);
}

TEST(MatrixExp, AgreesWithSpectralFunctionForHermitian) {
    Rng rng(5);
    const ComplexMatrix h = random_hermitian(4, rng);
    const ComplexMatrix ref = hermitian_function(h, [](double x) { return cplx(std::exp(x)); });
    EXPECT_LE(max_abs_diff(matrix_exp(h), ref), 1e-9 * max_abs(ref));
}

TEST(MatrixExp, InverseProperty) {
    Rng rng(17);
    for (int trial = 0; trial < 20; ++trial) {
        ComplexMatrix a = random_ginibre(3, 3, rng);
        a *= 10.0 * rng.uniform() / a.cwiseAbs().rowwise().sum().maxCoeff();
        EXPECT_MAT_NEAR(ComplexMatrix(matrix_exp(a) * matrix_exp(-a)), identity(3), 1e-8);
    }
}

TEST(MatrixSqrt, Examples) {
    EXPECT_MAT_NEAR(matrix_sqrt_psd(identity(3)), identity(3), 1e-14);
    EXPECT_MAT_NEAR(matrix_sqrt_psd(diag({4, 9})), diag({2, 3}), 1e-14);
    ComplexVector psi(2);
    psi << 0.6, cplx(0, 0.8);
    EXPECT_MAT_NEAR(matrix_sqrt_psd(projector(psi)), projector(psi), 1e-8);
}

TEST(MatrixSqrt, SquaresBack) {
    Rng rng(2);
    const ComplexMatrix rho = random_density(4, rng);
    const ComplexMatrix s = matrix_sqrt_psd(rho);
    EXPECT_MAT_NEAR(ComplexMatrix(s * s), rho, 1e-8);
}

TEST(MatrixSqrt, RejectsNegativeAndNonHermitian) {
    EXPECT_THROW(matrix_sqrt_psd(diag({1, -0.1})), domain_error);
    EXPECT_THROW(matrix_sqrt_psd(mat2(1, 1, 0, 1)), domain_error);
    EXPECT_NO_THROW(matrix_sqrt_psd(diag({1, -1e-12})));
}

TEST(HermitianEig, Reconstruction) {
    Rng rng(9);
    const ComplexMatrix h = random_hermitian(5, rng);
    const auto e = hermitian_eig(h);
    const ComplexMatrix rec = e.eigenvectors * e.eigenvalues.cast<cplx>().asDiagonal() * e.eigenvectors.adjoint();
    EXPECT_LE(max_abs_diff(rec, h), 1e-9 * max_abs(h));
    EXPECT_MAT_NEAR(ComplexMatrix(e.eigenvectors.adjoint() * e.eigenvectors), identity(5), 1e-9);
    for (int i = 1; i < 5; ++i) EXPECT_LE(e.eigenvalues(i - 1), e.eigenvalues(i));
}

TEST(Norms, Examples) {
    Rng rng(4);
    EXPECT_NEAR(trace_norm(random_density(3, rng)), 1.0, 1e-12);
    EXPECT_NEAR(trace_norm(pauli_z()), 2.0, 1e-15);
    EXPECT_NEAR(trace_norm(projector(ket(2, 0)) - projector(ket(2, 1))), 2.0, 1e-15);
}

TEST(Norms, UnitaryInvariance) {
    Rng rng(21);
    for (int trial = 0; trial < 20; ++trial) {
        const ComplexMatrix a = random_ginibre(3, 3, rng);
        const ComplexMatrix u = random_unitary(3, rng), v = random_unitary(3, rng);
        EXPECT_NEAR(trace_norm(u * a * v), trace_norm(a), 1e-10);
    }
}

TEST(Norms, Ordering) {
    Rng rng(22);
    for (int trial = 0; trial < 50; ++trial) {
        const ComplexMatrix a = random_ginibre(4, 4, rng);
        EXPECT_LE(op_norm(a), hs_norm(a) + 1e-12);
        EXPECT_LE(hs_norm(a), trace_norm(a) + 1e-12);
    }
}

TEST(Vectorization, IdentityAndRoundTrip) {
    const ComplexVector v = vec(identity(2));
    ComplexVector expect(4);
    expect << 1, 0, 0, 1;
    EXPECT_MAT_NEAR(ComplexMatrix(v), ComplexMatrix(expect), 0);
    const ComplexMatrix m = mat2(1, 2, 3, 4);
    const ComplexVector mv = vec(m);
    EXPECT_EQ(mv(1), cplx(3));  // column stacking
    EXPECT_MAT_NEAR(unvec(mv, 2), m, 0);
}

TEST(Vectorization, ConjugationIdentity) {
    EXPECT_LE(vec_conjugation(pauli_z(), pauli_z(), pauli_z()), 1e-15);
    Rng rng(123);
    for (int trial = 0; trial < 10; ++trial) {
        const ComplexMatrix a = random_ginibre(2, 2, rng), b = random_ginibre(2, 2, rng), c = random_ginibre(2, 2, rng);
        // direct-multiplication oracle: vec(ABC) entry by entry
        const ComplexMatrix abc = a * b * c;
        const ComplexVector k = tensor_product(ComplexMatrix(c.transpose()), a) * vec(b);
        for (int j = 0; j < 2; ++j)
            for (int i = 0; i < 2; ++i) EXPECT_NEAR(std::abs(k(2 * j + i) - abc(i, j)), 0.0, 1e-12);
        EXPECT_LE(vec_conjugation(a, b, c), 1e-12);
    }
    EXPECT_THROW(vec_conjugation(identity(2), identity(3), identity(3)), shape_error);
}

TEST(Brent, FindsRoot) {
    const double r = brent_root([](double x) { return std::cos(x) - x; }, 0, 1);
    EXPECT_NEAR(r, 0.7390851332151607, 1e-13);
    EXPECT_THROW(brent_root([](double x) { return x * x + 1; }, -1, 1), numerical_error);
}

TEST(Rng, Deterministic) {
    Rng a(42, 3), b(42, 3), c(42, 4);
    for (int i = 0; i < 5; ++i) {
        const double x = a.uniform();
        EXPECT_EQ(x, b.uniform());
        EXPECT_NE(x, c.uniform());
    }
}

TEST(Rng, NormalMoments) {
    Rng r(1);
    double s = 0, s2 = 0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double x = r.normal();
        s += x;
        s2 += x * x;
    }
    EXPECT_NEAR(s / n, 0.0, 0.01);
    EXPECT_NEAR(s2 / n, 1.0, 0.01);
}
