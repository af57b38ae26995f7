#pragma once
// Density operators, Bloch and coherence vectors, ensembles, Gibbs states,
// distances and POVM outcome probabilities.

#include <Eigen/Dense>

#include <cmath>
#include <string>
#include <vector>

#include "openq/numkit.hpp"

namespace openq {

using BlochVector = Eigen::Vector3d;

struct StateTolerance {
    double hermitian = 1e-9;
    double trace = 1e-9;
    double eigen = 1e-10;
};

// Throws validation_error describing the first violated invariant.
inline void validate_density(const ComplexMatrix& m, const StateTolerance& tol = {}) {
    if (m.rows() != m.cols() || m.rows() == 0) throw validation_error("density matrix must be square and non-empty");
    if (!all_finite(m)) throw validation_error("density matrix has non-finite entries");
    if (!is_hermitian(m, tol.hermitian)) throw validation_error("density matrix is not Hermitian");
    if (std::abs(m.trace() - cplx(1.0)) > tol.trace) throw validation_error("density matrix trace differs from 1");
    if (min_eigh(m) < -tol.eigen) throw validation_error("density matrix has a negative eigenvalue");
}

class DensityMatrix {
public:
    DensityMatrix() = default;
    // Validating constructor.
    explicit DensityMatrix(ComplexMatrix m, const StateTolerance& tol = {}) : m_(std::move(m)) {
        validate_density(m_, tol);
    }
    // No checks; for intermediate results of integrators.
    static DensityMatrix raw(ComplexMatrix m) {
        DensityMatrix r;
        r.m_ = std::move(m);
        return r;
    }
    static DensityMatrix pure(const ComplexVector& psi) {
        const double n = psi.norm();
        if (std::abs(n - 1.0) > 1e-9) throw validation_error("pure state vector is not normalized");
        return DensityMatrix(projector(psi));
    }
    static DensityMatrix maximally_mixed(int d) { return DensityMatrix(identity(d) / double(d)); }

    const ComplexMatrix& matrix() const { return m_; }
    int dim() const { return static_cast<int>(m_.rows()); }
    cplx operator()(int i, int j) const { return m_(i, j); }

private:
    ComplexMatrix m_;
};

// ---- Bloch sphere ---------------------------------------------------------

inline ComplexMatrix bloch_matrix(const BlochVector& v) {
    return 0.5 * (identity(2) + v(0) * pauli_x() + v(1) * pauli_y() + v(2) * pauli_z());
}

inline DensityMatrix bloch_encode(const BlochVector& v) {
    if (!v.allFinite() || v.norm() > 1.0 + 1e-9) throw domain_error("bloch_encode: |v| exceeds 1");
    return DensityMatrix(bloch_matrix(v));
}

inline BlochVector bloch_decode(const ComplexMatrix& rho) {
    if (rho.rows() != 2 || rho.cols() != 2) throw shape_error("bloch_decode: qubit state required");
    BlochVector v;
    v(0) = (rho * pauli_x()).trace().real();
    v(1) = (rho * pauli_y()).trace().real();
    v(2) = (rho * pauli_z()).trace().real();
    return v;
}
inline BlochVector bloch_decode(const DensityMatrix& rho) { return bloch_decode(rho.matrix()); }

inline double purity(const ComplexMatrix& rho) { return (rho * rho).trace().real(); }
inline double purity(const DensityMatrix& rho) { return purity(rho.matrix()); }

// ---- coherence vectors ------------------------------------------------------

// Generalized Gell-Mann matrices scaled so Tr(F_j F_k) = delta_jk. For d = 2
// the order is X, Y, Z (each divided by sqrt 2).
inline std::vector<ComplexMatrix> gellmann_basis(int d) {
    if (d < 2) throw domain_error("gellmann_basis: d >= 2 required");
    std::vector<ComplexMatrix> out;
    const double s = 1.0 / std::sqrt(2.0);
    for (int j = 0; j < d; ++j)
        for (int k = j + 1; k < d; ++k) {
            ComplexMatrix sym = zeros(d, d), asym = zeros(d, d);
            sym(j, k) = sym(k, j) = s;
            asym(j, k) = -I_unit * s;
            asym(k, j) = I_unit * s;
            out.push_back(sym);
            out.push_back(asym);
        }
    for (int l = 1; l < d; ++l) {
        ComplexMatrix diag = zeros(d, d);
        const double c = 1.0 / std::sqrt(double(l) * (l + 1));
        for (int m = 0; m < l; ++m) diag(m, m) = c;
        diag(l, l) = -double(l) * c;
        out.push_back(diag);
    }
    return out;
}

// Checks d^2-1 traceless Hermitian operators, orthonormal in Hilbert-Schmidt.
inline void check_coherence_basis(const std::vector<ComplexMatrix>& basis, int d, double tol = 1e-9) {
    if (static_cast<int>(basis.size()) != d * d - 1) throw validation_error("coherence basis must have d^2-1 elements");
    for (std::size_t j = 0; j < basis.size(); ++j) {
        const auto& f = basis[j];
        if (f.rows() != d || f.cols() != d) throw validation_error("coherence basis element has wrong size");
        if (!is_hermitian(f, tol)) throw validation_error("coherence basis element is not Hermitian");
        if (std::abs(f.trace()) > tol) throw validation_error("coherence basis element is not traceless");
        for (std::size_t k = j; k < basis.size(); ++k) {
            const cplx ip = (f * basis[k]).trace();
            const double target = (j == k) ? 1.0 : 0.0;
            if (std::abs(ip - target) > tol) throw validation_error("coherence basis is not orthonormal");
        }
    }
}

inline RealVector coherence_vector(const ComplexMatrix& rho, const std::vector<ComplexMatrix>& basis) {
    const int d = static_cast<int>(rho.rows());
    check_coherence_basis(basis, d);
    RealVector v(basis.size());
    for (std::size_t j = 0; j < basis.size(); ++j) v(j) = (rho * basis[j]).trace().real();
    return v;
}
inline RealVector coherence_vector(const DensityMatrix& rho, const std::vector<ComplexMatrix>& basis) {
    return coherence_vector(rho.matrix(), basis);
}

// rho = I/d + sum_j v_j F_j
inline ComplexMatrix from_coherence_vector(const RealVector& v, const std::vector<ComplexMatrix>& basis, int d) {
    if (v.size() != static_cast<Eigen::Index>(basis.size())) throw shape_error("coherence vector length mismatch");
    ComplexMatrix rho = identity(d) / double(d);
    for (std::size_t j = 0; j < basis.size(); ++j) rho += v(j) * basis[j];
    return rho;
}

// ---- thermal states -----------------------------------------------------------

// e^{-beta H}/Z evaluated in H's eigenbasis with the ground energy subtracted.
inline DensityMatrix gibbs_state(const ComplexMatrix& h, double beta) {
    if (beta < 0) throw domain_error("gibbs_state: beta must be non-negative");
    const auto e = hermitian_eig(h);
    const double e0 = e.eigenvalues.minCoeff();
    Eigen::VectorXcd w(e.eigenvalues.size());
    double z = 0;
    for (Eigen::Index i = 0; i < w.size(); ++i) {
        const double x = std::exp(-beta * (e.eigenvalues(i) - e0));
        w(i) = x;
        z += x;
    }
    w /= z;
    return DensityMatrix(hermitian_part(e.eigenvectors * w.asDiagonal() * e.eigenvectors.adjoint()));
}

// ---- ensembles ------------------------------------------------------------------

struct PureStateEnsemble {
    std::vector<double> weights;
    std::vector<ComplexVector> states;
};

// Zero-weight zero vectors are padding and skip the normalization check.
inline void validate_ensemble(const PureStateEnsemble& e) {
    if (e.weights.empty() || e.weights.size() != e.states.size())
        throw validation_error("ensemble needs matching, non-empty weights and states");
    double sum = 0;
    const auto d = e.states.front().size();
    for (std::size_t i = 0; i < e.weights.size(); ++i) {
        if (e.weights[i] < 0) throw validation_error("ensemble weight is negative");
        if (e.states[i].size() != d) throw validation_error("ensemble states differ in dimension");
        sum += e.weights[i];
        const bool padding = e.weights[i] == 0.0 && e.states[i].norm() == 0.0;
        if (!padding && std::abs(e.states[i].norm() - 1.0) > 1e-9)
            throw validation_error("ensemble state is not normalized");
    }
    if (std::abs(sum - 1.0) > 1e-12) throw validation_error("ensemble weights do not sum to 1");
}

inline DensityMatrix ensemble_density(const PureStateEnsemble& e) {
    validate_ensemble(e);
    const auto d = e.states.front().size();
    ComplexMatrix rho = ComplexMatrix::Zero(d, d);
    for (std::size_t i = 0; i < e.weights.size(); ++i) rho += e.weights[i] * projector(e.states[i]);
    return DensityMatrix(hermitian_part(rho));
}

inline PureStateEnsemble pad_ensemble(PureStateEnsemble e, std::size_t n) {
    const auto d = e.states.empty() ? 0 : e.states.front().size();
    while (e.states.size() < n) {
        e.weights.push_back(0.0);
        e.states.push_back(ComplexVector::Zero(d));
    }
    return e;
}

// New ensemble sqrt(p_j)|phi_j> = sum_i u_ji sqrt(q_i)|psi_i>; pads to u's size.
inline PureStateEnsemble mix_ensemble(const PureStateEnsemble& e, const ComplexMatrix& u) {
    validate_ensemble(e);
    if (u.rows() != u.cols() || static_cast<std::size_t>(u.rows()) < e.states.size())
        throw shape_error("mix_ensemble: unitary must be square and at least the ensemble size");
    const PureStateEnsemble p = pad_ensemble(e, static_cast<std::size_t>(u.rows()));
    const auto d = p.states.front().size();
    PureStateEnsemble out;
    for (Eigen::Index j = 0; j < u.rows(); ++j) {
        ComplexVector phi = ComplexVector::Zero(d);
        for (std::size_t i = 0; i < p.states.size(); ++i) phi += u(j, i) * std::sqrt(p.weights[i]) * p.states[i];
        const double w = phi.squaredNorm();
        out.weights.push_back(w);
        out.states.push_back(w > 0 ? ComplexVector(phi / std::sqrt(w)) : ComplexVector(ComplexVector::Zero(d)));
    }
    // absorb rounding so the weights sum to 1 exactly enough for validation
    double s = 0;
    for (double w : out.weights) s += w;
    for (double& w : out.weights) w /= s;
    return out;
}

// ---- distances --------------------------------------------------------------------

inline double trace_distance(const ComplexMatrix& rho, const ComplexMatrix& sigma) {
    if (rho.rows() != sigma.rows() || rho.cols() != sigma.cols()) throw shape_error("trace_distance: shape mismatch");
    return 0.5 * trace_norm(rho - sigma);
}
inline double trace_distance(const DensityMatrix& a, const DensityMatrix& b) {
    return trace_distance(a.matrix(), b.matrix());
}

// F = || sqrt(rho) sqrt(sigma) ||_1
inline double fidelity(const ComplexMatrix& rho, const ComplexMatrix& sigma) {
    if (rho.rows() != sigma.rows() || rho.cols() != sigma.cols()) throw shape_error("fidelity: shape mismatch");
    const ComplexMatrix p = matrix_sqrt_psd(hermitian_part(rho)) * matrix_sqrt_psd(hermitian_part(sigma));
    return std::min(1.0, singular_values(p).sum());
}
inline double fidelity(const DensityMatrix& a, const DensityMatrix& b) { return fidelity(a.matrix(), b.matrix()); }

// ---- measurements --------------------------------------------------------------------

inline void validate_povm(const std::vector<ComplexMatrix>& effects, int d) {
    if (effects.empty()) throw validation_error("POVM has no effects");
    ComplexMatrix sum = zeros(d, d);
    for (const auto& e : effects) {
        if (e.rows() != d || e.cols() != d) throw validation_error("POVM effect has wrong size");
        if (!is_hermitian(e, 1e-10)) throw validation_error("POVM effect is not Hermitian");
        if (min_eigh(e) < -1e-10) throw validation_error("POVM effect is not positive");
        sum += e;
    }
    if (max_abs(sum - identity(d)) > 1e-9) throw validation_error("POVM effects do not sum to identity");
}

inline std::vector<double> povm_probabilities(const DensityMatrix& rho, const std::vector<ComplexMatrix>& effects) {
    validate_povm(effects, rho.dim());
    std::vector<double> p;
    for (const auto& e : effects) p.push_back(std::max(0.0, (e * rho.matrix()).trace().real()));
    return p;
}

inline double expectation(const ComplexMatrix& rho, const ComplexMatrix& obs) { return (rho * obs).trace().real(); }

// Standard deviation of a Hermitian observable in state rho.
inline double std_dev(const ComplexMatrix& rho, const ComplexMatrix& obs) {
    const double m = expectation(rho, obs);
    return std::sqrt(std::max(0.0, expectation(rho, obs * obs) - m * m));
}

}  // namespace openq
