#pragma once
// Lindblad generators: action on operators, column-stacking superoperator,
// time evolution, the coherence-vector ODE (with a Jordan-block path for
// caller-supplied structure), stationary states and the Pauli rate equations.

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "openq/channels.hpp"
#include "openq/numkit.hpp"
#include "openq/states.hpp"

namespace openq {

struct Dissipator {
    double rate;
    ComplexMatrix L;
};

struct LindbladGenerator {
    ComplexMatrix H;
    std::vector<Dissipator> dissipators;

    LindbladGenerator() = default;
    explicit LindbladGenerator(ComplexMatrix h, std::vector<Dissipator> d = {}) : H(std::move(h)), dissipators(std::move(d)) {
        validate();
    }
    int dim() const { return static_cast<int>(H.rows()); }
    void validate() const {
        if (H.rows() != H.cols() || H.rows() == 0) throw shape_error("LindbladGenerator: H must be square");
        if (!is_hermitian(H)) throw validation_error("LindbladGenerator: H is not Hermitian");
        for (const auto& d : dissipators) {
            if (d.L.rows() != H.rows() || d.L.cols() != H.cols())
                throw shape_error("LindbladGenerator: Lindblad operator has wrong size");
            if (!(d.rate >= 0.0) || !std::isfinite(d.rate)) throw validation_error("LindbladGenerator: negative rate");
        }
    }
};

// Convenience: gamma * (L rho L^dagger - {L^dagger L, rho}/2) with H.
inline LindbladGenerator make_generator(const ComplexMatrix& h, std::initializer_list<std::pair<double, ComplexMatrix>> ds) {
    std::vector<Dissipator> v;
    for (const auto& [g, l] : ds) v.push_back({g, l});
    return LindbladGenerator(h, v);
}

inline ComplexMatrix rhs(const LindbladGenerator& gen, const ComplexMatrix& rho) {
    if (rho.rows() != gen.dim() || rho.cols() != gen.dim()) throw shape_error("rhs: dimension mismatch");
    ComplexMatrix out = -I_unit * commutator(gen.H, rho);
    for (const auto& d : gen.dissipators) {
        if (d.rate == 0.0) continue;
        const ComplexMatrix ldl = d.L.adjoint() * d.L;
        out += d.rate * (d.L * rho * d.L.adjoint() - 0.5 * (ldl * rho + rho * ldl));
    }
    return out;
}

// Matrix S with vec(L rho) = S vec(rho), vec stacking columns.
inline ComplexMatrix to_superoperator(const LindbladGenerator& gen) {
    const int d = gen.dim();
    const ComplexMatrix id = identity(d);
    ComplexMatrix s = -I_unit * (tensor_product(id, gen.H) - tensor_product(ComplexMatrix(gen.H.transpose()), id));
    for (const auto& dis : gen.dissipators) {
        if (dis.rate == 0.0) continue;
        const ComplexMatrix ldl = dis.L.adjoint() * dis.L;
        s += dis.rate * (tensor_product(ComplexMatrix(dis.L.conjugate()), dis.L) - 0.5 * tensor_product(id, ldl) -
                         0.5 * tensor_product(ComplexMatrix(ldl.transpose()), id));
    }
    return s;
}

// Induced infinity norm (max absolute row sum).
inline double inf_norm(const ComplexMatrix& a) { return a.size() ? a.cwiseAbs().rowwise().sum().maxCoeff() : 0.0; }

inline ComplexMatrix propagator(const LindbladGenerator& gen, double t) {
    if (t < 0) throw domain_error("propagator: negative time (the semigroup has no inverse)");
    return matrix_exp(to_superoperator(gen) * t);
}

enum class Method { expm, rk4 };

// Fixed-step RK4 with h = min(0.01/||L||_inf, t/100).
inline ComplexMatrix rk4_evolve(const std::function<ComplexMatrix(const ComplexMatrix&)>& f, const ComplexMatrix& x0, double t,
                                double generator_norm) {
    if (t == 0) return x0;
    double h = t / 100.0;
    if (generator_norm > 0) h = std::min(h, 0.01 / generator_norm);
    const long n = static_cast<long>(std::ceil(t / h - 1e-12));
    h = t / n;
    ComplexMatrix x = x0;
    for (long k = 0; k < n; ++k) {
        const ComplexMatrix k1 = f(x);
        const ComplexMatrix k2 = f(x + 0.5 * h * k1);
        const ComplexMatrix k3 = f(x + 0.5 * h * k2);
        const ComplexMatrix k4 = f(x + h * k3);
        x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    return x;
}

// Evolves any operator (not necessarily a state).
inline ComplexMatrix evolve_operator(const LindbladGenerator& gen, const ComplexMatrix& x0, double t, Method m = Method::expm) {
    if (t < 0) throw domain_error("evolve: negative time (the semigroup has no inverse)");
    if (x0.rows() != gen.dim() || x0.cols() != gen.dim()) throw shape_error("evolve: dimension mismatch");
    if (m == Method::expm) return unvec(propagator(gen, t) * vec(x0), gen.dim());
    const double nrm = inf_norm(to_superoperator(gen));
    return rk4_evolve([&](const ComplexMatrix& x) { return rhs(gen, x); }, x0, t, nrm);
}

inline DensityMatrix evolve(const LindbladGenerator& gen, const DensityMatrix& rho0, double t, Method m = Method::expm) {
    StateTolerance tol;
    tol.trace = 1e-8;
    tol.eigen = 1e-9;
    return DensityMatrix(hermitian_part(evolve_operator(gen, rho0.matrix(), t, m)), tol);
}

// Short-time Kraus operators {I + (-iH - sum gamma L^dagger L/2) dt, sqrt(gamma dt) L}.
inline KrausMap short_time_kraus(const LindbladGenerator& gen, double dt) {
    const int d = gen.dim();
    ComplexMatrix a = zeros(d, d);
    for (const auto& dis : gen.dissipators) a -= 0.5 * dis.rate * dis.L.adjoint() * dis.L;
    std::vector<ComplexMatrix> ops{identity(d) + (-I_unit * gen.H + a) * dt};
    for (const auto& dis : gen.dissipators)
        if (dis.rate > 0) ops.push_back(std::sqrt(dis.rate * dt) * dis.L);
    return KrausMap(std::move(ops), false);
}

// ---- Bloch equations for H = h . sigma ------------------------------------------------

// Rotation of v about h by the angle 2|h|t.
inline BlochVector bloch_field_evolution(const Eigen::Vector3d& h, const BlochVector& v0, double t) {
    const double hn = h.norm();
    if (hn == 0.0) return v0;
    const Eigen::Vector3d k = h / hn;
    const double phi = 2.0 * hn * t;
    return v0 * std::cos(phi) + k.cross(v0) * std::sin(phi) + k * k.dot(v0) * (1 - std::cos(phi));
}

// ---- coherence-vector ODE: dv/dt = G v + c --------------------------------------------

struct CoherenceODE {
    RealMatrix G, Q, R;
    RealVector c;
    std::vector<ComplexMatrix> basis;
};

inline CoherenceODE coherence_ode_build(const LindbladGenerator& gen, const std::vector<ComplexMatrix>& basis) {
    const int d = gen.dim();
    check_coherence_basis(basis, d);
    const int n = d * d - 1;
    CoherenceODE ode;
    ode.basis = basis;
    ode.G.resize(n, n);
    ode.Q.resize(n, n);
    ode.c.resize(n);
    const LindbladGenerator ham(gen.H);
    for (int k = 0; k < n; ++k) {
        const ComplexMatrix lk = rhs(gen, basis[k]);
        for (int j = 0; j < n; ++j) {
            ode.G(j, k) = (basis[j] * lk).trace().real();
            ode.Q(j, k) = (I_unit * (gen.H * commutator(basis[j], basis[k])).trace()).real();
        }
    }
    const ComplexMatrix l0 = rhs(gen, identity(d) / double(d));
    for (int j = 0; j < n; ++j) ode.c(j) = (basis[j] * l0).trace().real();
    ode.R = ode.G - ode.Q;
    return ode;
}

inline Eigen::VectorXcd coherence_eigenvalues(const CoherenceODE& ode) {
    Eigen::EigenSolver<RealMatrix> es(ode.G, false);
    return es.eigenvalues();
}

struct FixedPoint {
    RealVector v_inf;  // particular solution of G v = -c (least squares)
    int kernel_dim;    // dimension of ker G; > 0 means the final state is not unique
};

inline FixedPoint coherence_fixed_point(const CoherenceODE& ode) {
    Eigen::CompleteOrthogonalDecomposition<RealMatrix> cod(ode.G);
    cod.setThreshold(1e-10);
    const int n = static_cast<int>(ode.G.rows());
    FixedPoint fp{RealVector::Zero(n), n - static_cast<int>(cod.rank())};
    if (ode.c.norm() == 0.0) return fp;
    fp.v_inf = cod.solve(RealVector(-ode.c));
    const double resid = (ode.G * fp.v_inf + ode.c).norm();
    if (resid > 1e-9 * std::max(1.0, ode.c.norm()))
        throw validation_error("unphysical generator: G v = -c has no particular solution");
    return fp;
}

// v(t) = v_inf + e^{Gt}(v0 - v_inf); spectral when the eigenvector matrix is well conditioned.
inline RealVector coherence_ode_solve(const CoherenceODE& ode, const RealVector& v0, double t) {
    if (t < 0) throw domain_error("coherence_ode_solve: negative time");
    if (v0.size() != ode.G.rows()) throw shape_error("coherence_ode_solve: vector length mismatch");
    const double scale = std::max(1.0, ode.G.cwiseAbs().maxCoeff());
    Eigen::EigenSolver<RealMatrix> es(ode.G);
    const Eigen::VectorXcd lam = es.eigenvalues();
    for (Eigen::Index i = 0; i < lam.size(); ++i)
        if (lam(i).real() > 1e-10 * scale)
            throw validation_error("unphysical generator: eigenvalue with positive real part");
    const FixedPoint fp = coherence_fixed_point(ode);
    const RealVector u0 = v0 - fp.v_inf;
    const Eigen::MatrixXcd V = es.eigenvectors();
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(V);
    const auto sv = svd.singularValues();
    const double cond = sv(sv.size() - 1) > 0 ? sv(0) / sv(sv.size() - 1) : std::numeric_limits<double>::infinity();
    RealVector u;
    if (cond < 1e8) {
        const Eigen::VectorXcd s = V.partialPivLu().solve(u0.cast<cplx>());
        Eigen::VectorXcd e(lam.size());
        for (Eigen::Index i = 0; i < lam.size(); ++i) e(i) = std::exp(lam(i) * t) * s(i);
        u = (V * e).real();
    } else {
        const RealMatrix gt = ode.G * t;
        u = gt.exp() * u0;
    }
    return fp.v_inf + u;
}

// One Jordan block: dw_j/dt = mu w_j + w_{j+1}; w_j(t) = e^{mu t} sum_{k>=j} w_k(0) t^{k-j}/(k-j)!.
inline Eigen::VectorXcd jordan_block_evolve(cplx mu, const Eigen::VectorXcd& w0, double t) {
    const Eigen::Index n = w0.size();
    Eigen::VectorXcd w(n);
    for (Eigen::Index j = 0; j < n; ++j) {
        cplx s = 0;
        double term = 1.0;
        for (Eigen::Index k = j; k < n; ++k) {
            s += w0(k) * term;
            term *= t / double(k - j + 1);
        }
        w(j) = std::exp(mu * t) * s;
    }
    return w;
}

// Caller-supplied Jordan structure G = P J P^{-1}, blocks listed in order.
struct JordanStructure {
    Eigen::MatrixXcd P;
    std::vector<std::pair<cplx, int>> blocks;  // (eigenvalue, block size)
};

inline RealVector coherence_ode_solve_jordan(const CoherenceODE& ode, const JordanStructure& js, const RealVector& v0, double t) {
    if (t < 0) throw domain_error("coherence_ode_solve_jordan: negative time");
    const FixedPoint fp = coherence_fixed_point(ode);
    const Eigen::VectorXcd w0 = js.P.partialPivLu().solve((v0 - fp.v_inf).cast<cplx>());
    Eigen::VectorXcd w(w0.size());
    Eigen::Index off = 0;
    for (const auto& [mu, size] : js.blocks) {
        w.segment(off, size) = jordan_block_evolve(mu, w0.segment(off, size), t);
        off += size;
    }
    if (off != w0.size()) throw shape_error("coherence_ode_solve_jordan: blocks do not cover the space");
    return fp.v_inf + (js.P * w).real();
}

// ---- stationary states -----------------------------------------------------------------

struct StationaryStates {
    std::vector<ComplexMatrix> kernel;  // Hermitian, Hilbert-Schmidt orthonormal basis of ker L
    std::vector<DensityMatrix> states;  // unit-trace PSD representatives found in the kernel
};

inline StationaryStates stationary_states(const LindbladGenerator& gen, double tol = 1e-9) {
    const int d = gen.dim();
    const Eigen::MatrixXcd s = to_superoperator(gen);
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(s, Eigen::ComputeFullV);
    const auto sv = svd.singularValues();
    const double thresh = tol * std::max(1.0, sv(0));
    std::vector<ComplexMatrix> raw;
    for (Eigen::Index i = 0; i < sv.size(); ++i)
        if (sv(i) < thresh) raw.push_back(unvec(svd.matrixV().col(i), d));
    const std::size_t k = raw.size();
    // L preserves Hermiticity, so Hermitian and anti-Hermitian parts of kernel elements stay in the kernel.
    std::vector<ComplexMatrix> cand;
    for (const auto& x : raw) {
        cand.push_back(hermitian_part(x));
        cand.push_back(hermitian_part(ComplexMatrix(-I_unit * x)));
    }
    // Put the trace-carrying direction first so the remaining elements are traceless.
    std::vector<ComplexMatrix> herm;
    ComplexMatrix trace_dir = zeros(d, d);
    for (const auto& c : cand) trace_dir += c.trace().real() * c;
    if (trace_dir.norm() > 1e-12) cand.insert(cand.begin(), trace_dir);
    for (auto c : cand) {
        for (const auto& b : herm) c -= (b.adjoint() * c).trace().real() * b;
        const double n = c.norm();
        if (n > 1e-8 && herm.size() < k) herm.push_back(c / n);
    }
    StationaryStates out;
    out.kernel = herm;
    for (const auto& h : herm) {
        const double tr = h.trace().real();
        if (std::abs(tr) < 1e-9) continue;
        const ComplexMatrix r = h / tr;
        if (min_eigh(r) >= -1e-9) out.states.push_back(DensityMatrix(hermitian_part(r), StateTolerance{1e-9, 1e-9, 1e-9}));
    }
    return out;
}

// ---- Pauli master equation -------------------------------------------------------------

struct PauliMaster {
    RealVector energies;      // ascending eigenvalues of H_S
    ComplexMatrix basis;      // eigenvectors (columns)
    RealMatrix W;             // W(a, a') = rate a' -> a, zero diagonal
    RealMatrix rate_matrix;   // dp/dt = rate_matrix * p

    RealVector rate_rhs(const RealVector& p) const { return rate_matrix * p; }
    RealVector evolve(const RealVector& p0, double t) const {
        if (t < 0) throw domain_error("PauliMaster::evolve: negative time");
        const RealMatrix mt = rate_matrix * t;
        return mt.exp() * p0;
    }
    // Null vector of the rate matrix, normalized to a probability distribution.
    RealVector stationary() const {
        Eigen::FullPivLU<RealMatrix> lu(rate_matrix);
        const RealMatrix ker = lu.kernel();
        RealVector p = ker.col(0);
        p /= p.sum();
        return p;
    }
};

// W(a|a') = sum_k gamma_k |<a|L_k|a'>|^2 in the (nondegenerate) eigenbasis of H_S.
inline PauliMaster pauli_master(const ComplexMatrix& h_s, const LindbladGenerator& gen) {
    const auto e = hermitian_eig(h_s);
    const int d = static_cast<int>(e.eigenvalues.size());
    const double gap_tol = 1e-9 * std::max(1.0, e.eigenvalues.cwiseAbs().maxCoeff());
    for (int a = 1; a < d; ++a)
        if (e.eigenvalues(a) - e.eigenvalues(a - 1) < gap_tol)
            throw unsupported_error("pauli_master: H_S spectrum is degenerate; populations do not decouple");
    PauliMaster pm;
    pm.energies = e.eigenvalues;
    pm.basis = e.eigenvectors;
    pm.W = RealMatrix::Zero(d, d);
    for (const auto& dis : gen.dissipators) {
        const ComplexMatrix le = e.eigenvectors.adjoint() * dis.L * e.eigenvectors;
        for (int a = 0; a < d; ++a)
            for (int ap = 0; ap < d; ++ap)
                if (a != ap) pm.W(a, ap) += dis.rate * std::norm(le(a, ap));
    }
    pm.rate_matrix = pm.W;
    for (int a = 0; a < d; ++a) pm.rate_matrix(a, a) = -pm.W.col(a).sum();
    return pm;
}

}  // namespace openq
