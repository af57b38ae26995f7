#pragma once
// Quantum maps in Kraus form, Choi matrices and the CP test, partial
// transpose, qubit affine (M, c) geometry, named qubit channels and channel
// fidelity.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <string>
#include <variant>
#include <vector>

#include "openq/numkit.hpp"
#include "openq/parallel.hpp"
#include "openq/states.hpp"

namespace openq {

class KrausMap {
public:
    KrausMap() = default;
    // validate = true additionally requires sum K^dagger K = I.
    explicit KrausMap(std::vector<ComplexMatrix> ops, bool validate = true, double tol = 1e-9) : ops_(std::move(ops)) {
        if (ops_.empty()) throw validation_error("KrausMap needs at least one operator");
        for (const auto& k : ops_)
            if (k.rows() != ops_[0].rows() || k.cols() != ops_[0].cols())
                throw shape_error("Kraus operators differ in shape");
        if (validate && completeness_error() > tol) throw validation_error("Kraus operators are not trace preserving");
    }
    const std::vector<ComplexMatrix>& operators() const { return ops_; }
    int dim_in() const { return static_cast<int>(ops_.at(0).cols()); }
    int dim_out() const { return static_cast<int>(ops_.at(0).rows()); }
    // max |sum K^dagger K - I|
    double completeness_error() const {
        ComplexMatrix s = zeros(dim_in(), dim_in());
        for (const auto& k : ops_) s += k.adjoint() * k;
        return max_abs(s - identity(dim_in()));
    }
    bool trace_preserving(double tol = 1e-9) const { return completeness_error() <= tol; }

private:
    std::vector<ComplexMatrix> ops_;
};

inline ComplexMatrix apply(const KrausMap& map, const ComplexMatrix& x) {
    if (x.rows() != map.dim_in() || x.cols() != map.dim_in()) throw shape_error("apply: dimension mismatch");
    ComplexMatrix out = zeros(map.dim_out(), map.dim_out());
    for (const auto& k : map.operators()) out += k * x * k.adjoint();
    return out;
}

inline DensityMatrix apply(const KrausMap& map, const DensityMatrix& rho) {
    return DensityMatrix(hermitian_part(openq::apply(map, rho.matrix())));
}

// second o first: operators K2_i K1_j.
inline KrausMap compose(const KrausMap& second, const KrausMap& first) {
    if (second.dim_in() != first.dim_out()) throw shape_error("compose: dimension mismatch");
    std::vector<ComplexMatrix> ops;
    for (const auto& a : second.operators())
        for (const auto& b : first.operators()) ops.push_back(a * b);
    return KrausMap(std::move(ops), false);
}

// K_{mu nu} = sqrt(lambda_nu) <mu|U|nu>, bath ordered second (S (x) B).
inline KrausMap kraus_from_joint_unitary(const ComplexMatrix& u, const DensityMatrix& rho_b, double tol = 1e-9) {
    const int db = rho_b.dim();
    require_square(u, "kraus_from_joint_unitary");
    if (u.rows() % db != 0) throw shape_error("kraus_from_joint_unitary: U size is not a multiple of the bath dimension");
    if (max_abs(u.adjoint() * u - identity(static_cast<int>(u.rows()))) > tol)
        throw validation_error("kraus_from_joint_unitary: U is not unitary");
    const int ds = static_cast<int>(u.rows()) / db;
    const auto eb = hermitian_eig(rho_b.matrix());
    std::vector<ComplexMatrix> ops;
    for (int nu = 0; nu < db; ++nu) {
        const double lam = eb.eigenvalues(nu);
        if (lam <= 1e-15) continue;
        const ComplexMatrix vnu = tensor_product(identity(ds), ComplexMatrix(eb.eigenvectors.col(nu)));
        for (int mu = 0; mu < db; ++mu) {
            const ComplexMatrix vmu = tensor_product(identity(ds), ComplexMatrix(eb.eigenvectors.col(mu)));
            ops.push_back(std::sqrt(lam) * (vmu.adjoint() * u * vnu));
        }
    }
    return KrausMap(std::move(ops), true, 1e-8);
}

// Reference channel: Tr_B[U (rho_S (x) rho_B) U^dagger].
inline ComplexMatrix joint_unitary_reduced(const ComplexMatrix& u, const ComplexMatrix& rho_s, const ComplexMatrix& rho_b) {
    const ComplexMatrix full = u * tensor_product(rho_s, rho_b) * u.adjoint();
    return partial_trace(full, static_cast<int>(rho_s.rows()), static_cast<int>(rho_b.rows()), Keep::A);
}

// ---- dephasing by an oscillator bath ------------------------------------------------

struct DiscreteModeBath {
    double beta;
    double omega;
};
// Flat mode density Omega_0 on [0, nu_c]; Omega_0 cancels against the partition function.
struct FlatCutoffBath {
    double beta;
    double omega;
    double nu_c;
};
using OscillatorBath = std::variant<DiscreteModeBath, FlatCutoffBath>;

enum class DephasingSystem { qubit, oscillator };

// Modulation f_x(theta) = sum_nu lambda_nu e^{i x nu theta} for the thermal bath.
inline cplx qho_modulation(double x, double theta, const OscillatorBath& bath) {
    if (std::holds_alternative<DiscreteModeBath>(bath)) {
        const auto& b = std::get<DiscreteModeBath>(bath);
        const double bw = b.beta * b.omega;
        if (bw <= 0) throw domain_error("qho bath requires beta*omega > 0");
        return (1.0 - std::exp(-bw)) / (1.0 - std::exp(cplx(-bw, x * theta)));
    }
    const auto& b = std::get<FlatCutoffBath>(bath);
    const double bw = b.beta * b.omega;
    if (bw <= 0 || b.nu_c <= 0) throw domain_error("flat-cutoff bath requires beta*omega > 0 and nu_c > 0");
    auto g = [&](double y) {
        const cplx z(-bw, y);
        return (std::exp(z * b.nu_c) - 1.0) / z;
    };
    return g(x * theta) / g(0.0);
}

// Entry (m, n) picks up f_{s_n - s_m}(lambda t), s_k = (-1)^k (qubit, sigma^z coupling) or k (oscillator).
inline ComplexMatrix qho_bath_dephasing(const ComplexMatrix& rho0, double lambda, double t, const OscillatorBath& bath,
                                        DephasingSystem sys = DephasingSystem::qubit) {
    require_square(rho0, "qho_bath_dephasing");
    const int d = static_cast<int>(rho0.rows());
    if (sys == DephasingSystem::qubit && d != 2) throw shape_error("qho_bath_dephasing: qubit system must be 2x2");
    auto s = [&](int k) { return sys == DephasingSystem::qubit ? ((k % 2) ? -1.0 : 1.0) : double(k); };
    ComplexMatrix out = rho0;
    for (int m = 0; m < d; ++m)
        for (int n = 0; n < d; ++n)
            if (m != n) out(m, n) *= qho_modulation(s(n) - s(m), lambda * t, bath);
    return out;
}

// ---- qubit affine geometry ------------------------------------------------------------

struct AffineBlochMap {
    Eigen::Matrix3d M = Eigen::Matrix3d::Identity();
    Eigen::Vector3d c = Eigen::Vector3d::Zero();
    Eigen::Vector3d operator()(const Eigen::Vector3d& v) const { return M * v + c; }
};

// (M2, c2) o (M1, c1)
inline AffineBlochMap compose(const AffineBlochMap& second, const AffineBlochMap& first) {
    return {second.M * first.M, second.M * first.c + second.c};
}

inline AffineBlochMap bloch_affine(const KrausMap& map) {
    if (map.dim_in() != 2 || map.dim_out() != 2) throw shape_error("bloch_affine: qubit map required");
    AffineBlochMap a;
    for (int i = 0; i < 3; ++i) {
        const ComplexMatrix si = pauli(i + 1);
        cplx ci = 0;
        for (const auto& k : map.operators()) ci += (si * k * k.adjoint()).trace();
        a.c(i) = 0.5 * ci.real();
        for (int j = 0; j < 3; ++j) {
            const ComplexMatrix sj = pauli(j + 1);
            cplx mij = 0;
            for (const auto& k : map.operators()) mij += (si * k * sj * k.adjoint()).trace();
            a.M(i, j) = 0.5 * mij.real();
        }
    }
    return a;
}

// ---- Choi matrix and positivity -----------------------------------------------------------

using LinearMap = std::function<ComplexMatrix(const ComplexMatrix&)>;

// C = sum_ij |i><j| (x) Phi(|i><j|), unnormalized (trace d for trace-preserving maps).
inline ComplexMatrix choi_matrix(const LinearMap& phi, int d_in) {
    ComplexMatrix c;
    for (int i = 0; i < d_in; ++i)
        for (int j = 0; j < d_in; ++j) {
            ComplexMatrix eij = zeros(d_in, d_in);
            eij(i, j) = 1.0;
            const ComplexMatrix out = phi(eij);
            if (c.size() == 0) c = zeros(d_in * out.rows(), d_in * out.cols());
            c.block(i * out.rows(), j * out.cols(), out.rows(), out.cols()) = out;
        }
    return c;
}

inline ComplexMatrix choi_matrix(const KrausMap& map) {
    return choi_matrix([&](const ComplexMatrix& x) { return openq::apply(map, x); }, map.dim_in());
}

inline double choi_min_eig(const ComplexMatrix& choi) { return min_eigh(choi); }

inline bool is_cp(const KrausMap& map, double tol = 1e-9) { return choi_min_eig(choi_matrix(map)) >= -tol; }
inline bool is_cp(const LinearMap& phi, int d_in, double tol = 1e-9) {
    return choi_min_eig(choi_matrix(phi, d_in)) >= -tol;
}

// Transpose on the first factor of a dimA x dimB bipartite operator.
inline ComplexMatrix partial_transpose(const ComplexMatrix& rho, int dimA, int dimB) {
    if (dimA <= 0 || dimB <= 0 || rho.rows() != dimA * dimB || rho.cols() != dimA * dimB)
        throw shape_error("partial_transpose: dimensions do not match the matrix");
    ComplexMatrix out(rho.rows(), rho.cols());
    for (int i = 0; i < dimA; ++i)
        for (int j = 0; j < dimA; ++j)
            out.block(i * dimB, j * dimB, dimB, dimB) = rho.block(j * dimB, i * dimB, dimB, dimB);
    return out;
}

inline double ppt_min_eig(const ComplexMatrix& rho, int dimA, int dimB) {
    return min_eigh(partial_transpose(rho, dimA, dimB));
}

// Werner state p |Psi^-><Psi^-| + (1-p) I/4.
inline ComplexMatrix werner_state(double p) {
    ComplexVector psi = ComplexVector::Zero(4);
    psi(1) = 1 / std::sqrt(2.0);
    psi(2) = -1 / std::sqrt(2.0);
    return p * projector(psi) + (1 - p) * identity(4) / 4.0;
}

inline ComplexMatrix bell_phi_plus() {
    ComplexVector psi = ComplexVector::Zero(4);
    psi(0) = psi(3) = 1 / std::sqrt(2.0);
    return projector(psi);
}

inline bool maps_equal(const KrausMap& a, const KrausMap& b, double tol = 1e-9) {
    if (a.dim_in() != b.dim_in() || a.dim_out() != b.dim_out()) return false;
    return max_abs(choi_matrix(a) - choi_matrix(b)) <= tol;
}

// ---- named qubit channels -------------------------------------------------------------------

inline void require_probability(double p, const char* name) {
    if (!(p >= 0.0 && p <= 1.0)) throw domain_error(std::string(name) + ": parameter must lie in [0, 1]");
}

// rho -> p rho + (1-p) Z rho Z
inline KrausMap phase_damping(double p) {
    require_probability(p, "phase_damping");
    return KrausMap({std::sqrt(p) * identity(2), std::sqrt(1 - p) * pauli_z()});
}
inline KrausMap bit_flip(double p) {
    require_probability(p, "bit_flip");
    return KrausMap({std::sqrt(p) * identity(2), std::sqrt(1 - p) * pauli_x()});
}
inline KrausMap bit_phase_flip(double p) {
    require_probability(p, "bit_phase_flip");
    return KrausMap({std::sqrt(p) * identity(2), std::sqrt(1 - p) * pauli_y()});
}
// rho -> p I/2 + (1-p) rho
inline KrausMap depolarizing(double p) {
    require_probability(p, "depolarizing");
    return KrausMap({std::sqrt(1 - 0.75 * p) * identity(2), std::sqrt(p / 4) * pauli_x(), std::sqrt(p / 4) * pauli_y(),
                     std::sqrt(p / 4) * pauli_z()});
}
// |0> is the ground state the map decays to.
inline KrausMap amplitude_damping(double p) {
    require_probability(p, "amplitude_damping");
    return KrausMap({mat2(1, 0, 0, std::sqrt(1 - p)), mat2(0, std::sqrt(p), 0, 0)});
}
// Emission with probability weight q, absorption with 1-q; fixed point diag(q, 1-q).
inline KrausMap generalized_amplitude_damping(double p, double q) {
    require_probability(p, "generalized_amplitude_damping");
    require_probability(q, "generalized_amplitude_damping");
    return KrausMap({std::sqrt(q) * mat2(1, 0, 0, std::sqrt(1 - p)), std::sqrt(q * p) * mat2(0, 1, 0, 0),
                     std::sqrt(1 - q) * mat2(std::sqrt(1 - p), 0, 0, 1), std::sqrt((1 - q) * p) * mat2(0, 0, 1, 0)});
}
// rho -> (1-px-py-pz) rho + px X rho X + py Y rho Y + pz Z rho Z
inline KrausMap pauli_channel(double px, double py, double pz) {
    require_probability(px, "pauli_channel");
    require_probability(py, "pauli_channel");
    require_probability(pz, "pauli_channel");
    const double p0 = 1 - px - py - pz;
    if (p0 < -1e-15) throw domain_error("pauli_channel: probabilities exceed 1");
    return KrausMap({std::sqrt(std::max(0.0, p0)) * identity(2), std::sqrt(px) * pauli_x(), std::sqrt(py) * pauli_y(),
                     std::sqrt(pz) * pauli_z()});
}
inline KrausMap identity_channel(int d = 2) { return KrausMap({identity(d)}); }

enum class ChannelKind { phase_damping, bit_flip, bit_phase_flip, depolarizing, amplitude_damping, generalized_amplitude_damping };

inline KrausMap named_channel(ChannelKind kind, const std::vector<double>& params) {
    auto need = [&](std::size_t n) {
        if (params.size() != n) throw domain_error("named_channel: wrong number of parameters");
    };
    switch (kind) {
        case ChannelKind::phase_damping: need(1); return phase_damping(params[0]);
        case ChannelKind::bit_flip: need(1); return bit_flip(params[0]);
        case ChannelKind::bit_phase_flip: need(1); return bit_phase_flip(params[0]);
        case ChannelKind::depolarizing: need(1); return depolarizing(params[0]);
        case ChannelKind::amplitude_damping: need(1); return amplitude_damping(params[0]);
        case ChannelKind::generalized_amplitude_damping: need(2); return generalized_amplitude_damping(params[0], params[1]);
    }
    throw domain_error("named_channel: unknown kind");
}

inline ChannelKind channel_kind_from_string(const std::string& s) {
    if (s == "phase_damping") return ChannelKind::phase_damping;
    if (s == "bit_flip") return ChannelKind::bit_flip;
    if (s == "bit_phase_flip") return ChannelKind::bit_phase_flip;
    if (s == "depolarizing") return ChannelKind::depolarizing;
    if (s == "amplitude_damping") return ChannelKind::amplitude_damping;
    if (s == "generalized_amplitude_damping") return ChannelKind::generalized_amplitude_damping;
    throw domain_error("unknown channel kind: " + s);
}

// ---- channel fidelity ------------------------------------------------------------------------

inline Eigen::Vector3d sphere_point(double theta, double phi) {
    return {std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi), std::cos(theta)};
}

// Fibonacci lattice of n unit vectors.
inline std::vector<Eigen::Vector3d> fibonacci_sphere(int n) {
    std::vector<Eigen::Vector3d> pts(n);
    const double golden = pi * (3.0 - std::sqrt(5.0));
    for (int i = 0; i < n; ++i) {
        const double z = 1.0 - (2.0 * i + 1.0) / n;
        const double r = std::sqrt(std::max(0.0, 1 - z * z));
        pts[i] = {r * std::cos(golden * i), r * std::sin(golden * i), z};
    }
    return pts;
}

struct ChannelFidelityResult {
    double fidelity;
    Eigen::Vector3d worst_direction;
    double grid_min;  // smallest fidelity found on the grid alone
};

// min over pure inputs of sqrt(<psi|Phi(psi)|psi>) = sqrt((1 + n.(Mn + c))/2).
inline ChannelFidelityResult channel_fidelity_detail(const KrausMap& map, int grid_points = 4096) {
    if (grid_points < 2000) throw domain_error("channel_fidelity: at least 2000 grid points required");
    const AffineBlochMap a = bloch_affine(map);
    auto value = [&](const Eigen::Vector3d& n) {
        const double ov = 0.5 * (1 + n.dot(a(n)));
        return std::sqrt(std::clamp(ov, 0.0, 1.0));
    };
    const auto pts = fibonacci_sphere(grid_points);
    std::vector<double> vals(pts.size());
    parallel_for(pts.size(), [&](std::size_t i) { vals[i] = value(pts[i]); });
    std::size_t best = 0;
    for (std::size_t i = 1; i < vals.size(); ++i)
        if (vals[i] < vals[best]) best = i;
    const double grid_min = vals[best];

    // Pattern search in (theta, phi) from the best few grid points.
    std::vector<std::size_t> order(pts.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::partial_sort(order.begin(), order.begin() + 8, order.end(),
                      [&](std::size_t x, std::size_t y) { return vals[x] < vals[y] || (vals[x] == vals[y] && x < y); });
    double fbest = grid_min;
    Eigen::Vector3d nbest = pts[best];
    for (int s = 0; s < 8; ++s) {
        const auto& p = pts[order[s]];
        double th = std::acos(std::clamp(p(2), -1.0, 1.0)), ph = std::atan2(p(1), p(0));
        double fcur = value(p);
        double step = 0.1;
        while (step > 1e-12) {
            bool moved = false;
            const double cand[4][2] = {{step, 0}, {-step, 0}, {0, step}, {0, -step}};
            for (const auto& c : cand) {
                const double f = value(sphere_point(th + c[0], ph + c[1]));
                if (f < fcur) {
                    fcur = f;
                    th += c[0];
                    ph += c[1];
                    moved = true;
                    break;
                }
            }
            if (!moved) step *= 0.5;
        }
        if (fcur < fbest) {
            fbest = fcur;
            nbest = sphere_point(th, ph);
        }
    }
    return {fbest, nbest, grid_min};
}

inline double channel_fidelity(const KrausMap& map, int grid_points = 4096) {
    return channel_fidelity_detail(map, grid_points).fidelity;
}

}  // namespace openq
