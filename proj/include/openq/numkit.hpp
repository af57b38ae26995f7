#pragma once
// Dense complex linear algebra used everywhere else: tensor products, partial
// trace, Hermitian spectral calculus, norms and column-stacking vectorization.

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <initializer_list>
#include <limits>
#include <string>
#include <vector>

#include "openq/errors.hpp"

namespace openq {

using cplx = std::complex<double>;
using ComplexMatrix = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ComplexVector = Eigen::VectorXcd;
using RealMatrix = Eigen::MatrixXd;
using RealVector = Eigen::VectorXd;

inline constexpr cplx I_unit{0.0, 1.0};
inline constexpr double pi = 3.14159265358979323846;

// ---- small constructors -------------------------------------------------

inline ComplexMatrix identity(int d) { return ComplexMatrix::Identity(d, d); }
inline ComplexMatrix zeros(int r, int c) { return ComplexMatrix::Zero(r, c); }

inline ComplexMatrix mat2(cplx a, cplx b, cplx c, cplx d) {
    ComplexMatrix m(2, 2);
    m << a, b, c, d;
    return m;
}

inline ComplexMatrix pauli_x() { return mat2(0, 1, 1, 0); }
inline ComplexMatrix pauli_y() { return mat2(0, -I_unit, I_unit, 0); }
inline ComplexMatrix pauli_z() { return mat2(1, 0, 0, -1); }

// 0 -> I, 1 -> X, 2 -> Y, 3 -> Z
inline ComplexMatrix pauli(int k) {
    switch (k) {
        case 0: return identity(2);
        case 1: return pauli_x();
        case 2: return pauli_y();
        case 3: return pauli_z();
        default: throw domain_error("pauli index must be 0..3");
    }
}

// sigma_+ = |0><1| and sigma_- = |1><0| with |0> the excited state of Z = diag(1,-1)
inline ComplexMatrix sigma_plus() { return mat2(0, 1, 0, 0); }
inline ComplexMatrix sigma_minus() { return mat2(0, 0, 1, 0); }

inline ComplexVector ket(int d, int i) {
    if (i < 0 || i >= d) throw domain_error("basis index out of range");
    ComplexVector v = ComplexVector::Zero(d);
    v(i) = 1.0;
    return v;
}

inline ComplexMatrix outer(const ComplexVector& a, const ComplexVector& b) { return a * b.adjoint(); }
inline ComplexMatrix projector(const ComplexVector& psi) { return psi * psi.adjoint(); }

inline ComplexMatrix dagger(const ComplexMatrix& a) { return a.adjoint(); }
inline ComplexMatrix commutator(const ComplexMatrix& a, const ComplexMatrix& b) { return a * b - b * a; }
inline ComplexMatrix anticommutator(const ComplexMatrix& a, const ComplexMatrix& b) { return a * b + b * a; }

inline double max_abs(const ComplexMatrix& a) { return a.size() ? a.cwiseAbs().maxCoeff() : 0.0; }
inline double max_abs_diff(const ComplexMatrix& a, const ComplexMatrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) throw shape_error("max_abs_diff: shape mismatch");
    return max_abs(a - b);
}

inline bool all_finite(const ComplexMatrix& a) {
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        const cplx z = a.data()[i];
        if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return false;
    }
    return true;
}

inline void require_square(const ComplexMatrix& a, const char* who) {
    if (a.rows() != a.cols()) throw shape_error(std::string(who) + ": matrix must be square");
}

// Hermitian within tol relative to max(1, largest entry).
inline bool is_hermitian(const ComplexMatrix& a, double tol = 1e-9) {
    if (a.rows() != a.cols()) return false;
    const double scale = std::max(1.0, max_abs(a));
    return max_abs(a - a.adjoint()) <= tol * scale;
}

inline ComplexMatrix hermitian_part(const ComplexMatrix& a) { return 0.5 * (a + a.adjoint()); }

// ---- spectral calculus ---------------------------------------------------

struct HermitianEig {
    RealVector eigenvalues;      // ascending
    ComplexMatrix eigenvectors;  // columns
};

inline HermitianEig hermitian_eig(const ComplexMatrix& a, double tol = 1e-9) {
    require_square(a, "hermitian_eig");
    if (!is_hermitian(a, tol)) throw domain_error("hermitian_eig: matrix is not Hermitian");
    Eigen::MatrixXcd h = hermitian_part(a);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h);
    if (es.info() != Eigen::Success) throw numerical_error("hermitian_eig: eigensolver failed");
    return {es.eigenvalues(), es.eigenvectors()};
}

inline RealVector eigvalsh(const ComplexMatrix& a) {
    require_square(a, "eigvalsh");
    Eigen::MatrixXcd h = hermitian_part(a);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw numerical_error("eigvalsh: eigensolver failed");
    return es.eigenvalues();
}

inline double min_eigh(const ComplexMatrix& a) { return eigvalsh(a).minCoeff(); }

// f(A) = sum_a f(lambda_a) |a><a| for Hermitian A.
inline ComplexMatrix hermitian_function(const ComplexMatrix& a, const std::function<cplx(double)>& f) {
    const auto e = hermitian_eig(a);
    Eigen::VectorXcd fl(e.eigenvalues.size());
    for (Eigen::Index i = 0; i < fl.size(); ++i) fl(i) = f(e.eigenvalues(i));
    return e.eigenvectors * fl.asDiagonal() * e.eigenvectors.adjoint();
}

// Scaling-and-squaring Pade exponential (Eigen's MatrixFunctions module).
inline ComplexMatrix matrix_exp(const ComplexMatrix& a) {
    require_square(a, "matrix_exp");
    if (a.rows() == 0) return a;
    Eigen::MatrixXcd m = a;
    Eigen::MatrixXcd e = m.exp();
    ComplexMatrix out = e;
    if (!all_finite(out)) throw numerical_error("matrix_exp: non-finite result");
    return out;
}

inline ComplexMatrix matrix_sqrt_psd(const ComplexMatrix& a) {
    require_square(a, "matrix_sqrt_psd");
    if (!is_hermitian(a)) throw domain_error("matrix_sqrt_psd: matrix is not Hermitian");
    const auto e = hermitian_eig(a);
    if (e.eigenvalues.size() && e.eigenvalues.minCoeff() < -1e-10)
        throw domain_error("matrix_sqrt_psd: matrix has a negative eigenvalue");
    Eigen::VectorXcd s(e.eigenvalues.size());
    for (Eigen::Index i = 0; i < s.size(); ++i) s(i) = std::sqrt(std::max(0.0, e.eigenvalues(i)));
    return e.eigenvectors * s.asDiagonal() * e.eigenvectors.adjoint();
}

// ---- norms ------------------------------------------------------------------

// Singular values from the spectrum of A^dagger A, clipped at zero (descending).
inline RealVector singular_values(const ComplexMatrix& a) {
    if (a.size() == 0) return RealVector();
    const ComplexMatrix g = a.adjoint() * a;
    RealVector ev = eigvalsh(g);
    RealVector sv(ev.size());
    for (Eigen::Index i = 0; i < ev.size(); ++i) sv(ev.size() - 1 - i) = std::sqrt(std::max(0.0, ev(i)));
    return sv;
}

inline double trace_norm(const ComplexMatrix& a) {
    // Hermitian input: |eigenvalues| are the singular values and avoid squaring the condition number.
    if (a.rows() == a.cols() && is_hermitian(a, 1e-12)) return eigvalsh(a).cwiseAbs().sum();
    return singular_values(a).sum();
}
inline double op_norm(const ComplexMatrix& a) {
    if (a.size() == 0) return 0.0;
    if (a.rows() == a.cols() && is_hermitian(a, 1e-12)) return eigvalsh(a).cwiseAbs().maxCoeff();
    return singular_values(a)(0);
}
inline double hs_norm(const ComplexMatrix& a) { return a.norm(); }

// ---- composite systems ---------------------------------------------------

inline ComplexMatrix tensor_product(const ComplexMatrix& a, const ComplexMatrix& b) {
    ComplexMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

inline ComplexMatrix tensor_product(std::initializer_list<ComplexMatrix> factors) {
    ComplexMatrix out = ComplexMatrix::Ones(1, 1);
    for (const auto& f : factors) out = tensor_product(out, f);
    return out;
}

inline ComplexMatrix tensor_product(const std::vector<ComplexMatrix>& factors) {
    ComplexMatrix out = ComplexMatrix::Ones(1, 1);
    for (const auto& f : factors) out = tensor_product(out, f);
    return out;
}

inline ComplexVector tensor_product(const ComplexVector& a, const ComplexVector& b) {
    ComplexVector out(a.size() * b.size());
    for (Eigen::Index i = 0; i < a.size(); ++i) out.segment(i * b.size(), b.size()) = a(i) * b;
    return out;
}

enum class Keep { A, B };

// Traces out one factor of rho on C^dimA (x) C^dimB.
inline ComplexMatrix partial_trace(const ComplexMatrix& rho, int dimA, int dimB, Keep keep) {
    if (dimA <= 0 || dimB <= 0 || rho.rows() != dimA * dimB || rho.cols() != dimA * dimB)
        throw shape_error("partial_trace: matrix size does not equal dimA*dimB");
    if (keep == Keep::A) {
        ComplexMatrix out = ComplexMatrix::Zero(dimA, dimA);
        for (int i = 0; i < dimA; ++i)
            for (int j = 0; j < dimA; ++j) {
                cplx s = 0;
                for (int k = 0; k < dimB; ++k) s += rho(i * dimB + k, j * dimB + k);
                out(i, j) = s;
            }
        return out;
    }
    ComplexMatrix out = ComplexMatrix::Zero(dimB, dimB);
    for (int k = 0; k < dimA; ++k) out += rho.block(k * dimB, k * dimB, dimB, dimB);
    return out;
}

// ---- vectorization (column stacking) --------------------------------------

inline ComplexVector vec(const ComplexMatrix& a) {
    ComplexVector v(a.size());
    Eigen::Index n = 0;
    for (Eigen::Index j = 0; j < a.cols(); ++j)
        for (Eigen::Index i = 0; i < a.rows(); ++i) v(n++) = a(i, j);
    return v;
}

inline ComplexMatrix unvec(const ComplexVector& v, int rows, int cols) {
    if (rows * cols != v.size()) throw shape_error("unvec: length mismatch");
    ComplexMatrix a(rows, cols);
    Eigen::Index n = 0;
    for (int j = 0; j < cols; ++j)
        for (int i = 0; i < rows; ++i) a(i, j) = v(n++);
    return a;
}

inline ComplexMatrix unvec(const ComplexVector& v, int d) { return unvec(v, d, d); }

// Returns max |vec(ABC) - (C^T (x) A) vec(B)|.
inline double vec_conjugation(const ComplexMatrix& a, const ComplexMatrix& b, const ComplexMatrix& c) {
    if (a.cols() != b.rows() || b.cols() != c.rows()) throw shape_error("vec_conjugation: incompatible shapes");
    const ComplexVector lhs = vec(a * b * c);
    const ComplexVector rhs = tensor_product(ComplexMatrix(c.transpose()), a) * vec(b);
    return (lhs - rhs).cwiseAbs().maxCoeff();
}

// ---- scalar root finding ------------------------------------------------------

// Brent's method on a sign-changing bracket [a, b].
inline double brent_root(const std::function<double(double)>& f, double a, double b, double xtol = 1e-14,
                         int max_iter = 200) {
    double fa = f(a), fb = f(b);
    if (fa == 0.0) return a;
    if (fb == 0.0) return b;
    if ((fa > 0) == (fb > 0)) throw numerical_error("brent_root: endpoints do not bracket a root");
    double c = a, fc = fa, d = b - a, e = d;
    for (int it = 0; it < max_iter; ++it) {
        if ((fb > 0) == (fc > 0)) {
            c = a;
            fc = fa;
            d = e = b - a;
        }
        if (std::abs(fc) < std::abs(fb)) {
            a = b; b = c; c = a;
            fa = fb; fb = fc; fc = fa;
        }
        const double tol = 2 * std::numeric_limits<double>::epsilon() * std::abs(b) + 0.5 * xtol;
        const double m = 0.5 * (c - b);
        if (std::abs(m) <= tol || fb == 0.0) return b;
        if (std::abs(e) >= tol && std::abs(fa) > std::abs(fb)) {
            double p, q, r;
            const double s = fb / fa;
            if (a == c) {
                p = 2 * m * s;
                q = 1 - s;
            } else {
                q = fa / fc;
                r = fb / fc;
                p = s * (2 * m * q * (q - r) - (b - a) * (r - 1));
                q = (q - 1) * (r - 1) * (s - 1);
            }
            if (p > 0) q = -q;
            else p = -p;
            if (2 * p < std::min(3 * m * q - std::abs(tol * q), std::abs(e * q))) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b += (std::abs(d) > tol) ? d : (m > 0 ? tol : -tol);
        fb = f(b);
    }
    throw numerical_error("brent_root: no convergence");
}

}  // namespace openq
