#pragma once
// Post-Markovian master equation d rho/dt = L int_0^t k(s) e^{Ls} rho(t-s) ds, solved in the
// damping basis of L: rho(t) = sum_i xi_i(t) Tr(L_i rho0) R_i with
// xi_i = Lap^{-1}[1/(s - lambda_i k~(s - lambda_i))].

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "openq/channels.hpp"
#include "openq/errors.hpp"
#include "openq/lindblad.hpp"
#include "openq/numkit.hpp"
#include "openq/states.hpp"

namespace openq {

// ---- damping basis -----------------------------------------------------------------------

struct DampingBasis {
    int dim = 0;
    std::vector<cplx> eigenvalues;
    std::vector<ComplexMatrix> right;  // L R_i = lambda_i R_i
    std::vector<ComplexMatrix> left;   // L_i L = lambda_i L_i (as Tr(L_i L(X)) = lambda_i Tr(L_i X))
    double condition = 1;

    // sum_i c_i Tr(L_i X) R_i
    ComplexMatrix apply(const std::vector<cplx>& c, const ComplexMatrix& x) const {
        ComplexMatrix out = ComplexMatrix::Zero(dim, dim);
        for (std::size_t i = 0; i < right.size(); ++i) out += c[i] * (left[i] * x).trace() * right[i];
        return out;
    }
};

inline DampingBasis damping_basis(const LindbladGenerator& gen, double max_condition = 1e8) {
    const int d = gen.dim();
    const ComplexMatrix sup = to_superoperator(gen);
    Eigen::ComplexEigenSolver<ComplexMatrix> es(sup);
    if (es.info() != Eigen::Success) throw numerical_error("damping_basis: eigendecomposition failed");
    ComplexMatrix v = es.eigenvectors();
    for (Eigen::Index j = 0; j < v.cols(); ++j) {
        // unit HS norm, largest entry real positive (deterministic phase)
        Eigen::Index imax = 0;
        v.col(j).cwiseAbs().maxCoeff(&imax);
        const cplx ph = v(imax, j) / std::abs(v(imax, j));
        v.col(j) /= ph * v.col(j).norm();
    }
    Eigen::JacobiSVD<ComplexMatrix> svd(v);
    const auto& sv = svd.singularValues();
    const double cond = sv(sv.size() - 1) > 0 ? sv(0) / sv(sv.size() - 1) : std::numeric_limits<double>::infinity();
    if (!(cond < max_condition)) throw unsupported_error("damping_basis: superoperator is defective (eigenvector condition number too large)");
    const ComplexMatrix w = v.inverse();  // rows are left eigenvectors
    DampingBasis b;
    b.dim = d;
    b.condition = cond;
    for (Eigen::Index j = 0; j < v.cols(); ++j) {
        b.eigenvalues.push_back(es.eigenvalues()(j));
        b.right.push_back(unvec(ComplexVector(v.col(j)), d));
        // Tr(L X) = sum_{ab} L_{ba} X_{ab} = w_j . vec(X)  =>  L = unvec(w_j)^T
        b.left.push_back(unvec(ComplexVector(w.row(j).transpose()), d).transpose());
    }
    return b;
}

// ---- kernels -------------------------------------------------------------------------------

struct Kernel {
    enum class Kind { delta, exponential, tabulated, laplace };
    Kind kind = Kind::delta;
    double A = 0, a = 0;                 // exponential A e^{-a t}
    double dt = 0;                       // tabulated grid spacing (samples at 0, dt, 2dt, ...)
    std::vector<double> samples;         // tabulated values
    std::function<cplx(cplx)> k_tilde;   // user Laplace transform

    static Kernel delta() { return {}; }
    static Kernel exponential(double A, double a) {
        if (!std::isfinite(A) || !std::isfinite(a)) throw domain_error("Kernel::exponential: non-finite parameters");
        Kernel k;
        k.kind = Kind::exponential;
        k.A = A;
        k.a = a;
        return k;
    }
    static Kernel tabulated(double dt, std::vector<double> values) {
        if (!(dt > 0) || values.size() < 2) throw domain_error("Kernel::tabulated: need dt > 0 and at least two samples");
        Kernel k;
        k.kind = Kind::tabulated;
        k.dt = dt;
        k.samples = std::move(values);
        return k;
    }
    static Kernel from_laplace(std::function<cplx(cplx)> f) {
        if (!f) throw domain_error("Kernel::from_laplace: empty function");
        Kernel k;
        k.kind = Kind::laplace;
        k.k_tilde = std::move(f);
        return k;
    }

    // k(t) on t > 0 (zero beyond a tabulated range); not defined for delta or pure-Laplace kernels.
    double operator()(double t) const {
        switch (kind) {
            case Kind::exponential:
                return A * std::exp(-a * t);
            case Kind::tabulated: {
                if (t < 0) return 0.0;
                const double x = t / dt;
                const double fl = std::floor(x);
                const std::size_t last = samples.size() - 1;
                if (fl >= double(last)) return fl == double(last) && x == fl ? samples.back() : 0.0;
                const auto i = static_cast<std::size_t>(fl);
                const double f = x - fl;
                return (1 - f) * samples[i] + f * samples[i + 1];
            }
            default:
                throw unsupported_error("Kernel: no time-domain values for this kernel kind");
        }
    }

    // k~(s) = int_0^inf e^{-st} k(t) dt; the tabulated kernel is piecewise linear (exact transform).
    cplx laplace(cplx s) const {
        switch (kind) {
            case Kind::delta:
                return 1.0;
            case Kind::exponential:
                return A / (s + a);
            case Kind::laplace:
                return k_tilde(s);
            case Kind::tabulated: {
                cplx acc = 0;
                const cplx z = s * dt;
                for (std::size_t i = 0; i + 1 < samples.size(); ++i) {
                    // int_0^h e^{-s(t_i + u)} (k_i + (k_{i+1}-k_i) u/h) du
                    cplx i0, i1;  // int_0^1 e^{-z x} dx, int_0^1 x e^{-z x} dx
                    if (std::abs(z) < 1e-3) {
                        i0 = 1.0 - z / 2.0 + z * z / 6.0 - z * z * z / 24.0;
                        i1 = 0.5 - z / 3.0 + z * z / 8.0 - z * z * z / 30.0;
                    } else {
                        const cplx e = std::exp(-z);
                        i0 = (1.0 - e) / z;
                        i1 = (1.0 - e - z * e) / (z * z);
                    }
                    acc += std::exp(-s * (double(i) * dt)) * dt * (samples[i] * i0 + (samples[i + 1] - samples[i]) * i1);
                }
                return acc;
            }
        }
        return 0.0;
    }
};

// ---- numerical Laplace inversion (fixed Talbot contour) ------------------------------------

namespace detail {
inline cplx talbot_sum(const std::function<cplx(cplx)>& F, double t, int M, double shift) {
    const double r = 2.0 * M / (5.0 * t);
    // theta = 0 node
    cplx sum = F(cplx(r + shift)) * std::exp(r * t);
    for (int k = 1; k < M; ++k) {
        const double th = k * pi / M;
        const double cot = 1 / std::tan(th);
        const double sig = th + (th * cot - 1) * cot;
        const cplx s(r * th * cot, r * th);
        const cplx fac(1, sig);
        const cplx sc = std::conj(s), fc = std::conj(fac);
        sum += std::exp(t * s) * F(s + shift) * fac + std::exp(t * sc) * F(sc + shift) * fc;
    }
    return std::exp(shift * t) * r / (2.0 * M) * sum;
}
}  // namespace detail

// Complex-valued inverse; F must be analytic to the right of `shift`. The contour reaches
// |Im s| < r pi with r = 2M/(5t); `im_reach` is the largest |Im| of a singularity the caller needs
// enclosed, and M grows (up to 64) until 0.8 r pi covers it. Each attempt compares M with M - 8 and
// a numerical_error is raised if no node count converges to `tol`.
inline cplx laplace_invert_complex(const std::function<cplx(cplx)>& F, double t, int M = 32, double shift = 0.0,
                                   double tol = 1e-6, double im_reach = 0.0) {
    if (!(t > 0)) throw domain_error("laplace_invert: t must be positive");
    if (M < 16) throw domain_error("laplace_invert: use at least 16 nodes");
    const int m_max = 64;
    const int m_needed = static_cast<int>(std::ceil(5.0 * t * im_reach / (2.0 * pi * 0.8)));
    if (m_needed > m_max)
        throw numerical_error("laplace_invert: singularities too far off the real axis for the Talbot contour at t = " +
                              std::to_string(t));
    for (int m = std::max(M, m_needed); m <= m_max; m += 16) {
        const cplx f1 = detail::talbot_sum(F, t, m, shift);
        const cplx f2 = detail::talbot_sum(F, t, m - 8, shift);
        if (std::isfinite(f1.real()) && std::isfinite(f1.imag()) && std::abs(f1 - f2) <= tol * std::max(1.0, std::abs(f1)))
            return f1;
    }
    throw numerical_error("laplace_invert: Talbot inversion did not converge at t = " + std::to_string(t));
}

inline double laplace_invert(const std::function<cplx(cplx)>& F, double t, int M = 32, double shift = 0.0, double tol = 1e-6,
                             double im_reach = 0.0) {
    return laplace_invert_complex(F, t, M, shift, tol, im_reach).real();
}

// ---- xi functions ----------------------------------------------------------------------------

// Exponential kernel: xi~ = (s + a - lambda)/(s^2 + (a - lambda) s - lambda A), summed over residues.
inline cplx pmme_xi_exponential(cplx lambda, double A, double a, double t) {
    if (lambda == 0.0) return 1.0;
    const cplx b = a - lambda, c = -lambda * A;
    const cplx disc = std::sqrt(b * b - 4.0 * c);
    const cplx r1 = (-b + disc) / 2.0, r2 = (-b - disc) / 2.0;
    if (std::abs(disc) < 1e-8 * std::max(1.0, std::abs(b))) {
        const cplx r = -b / 2.0;
        return std::exp(r * t) * (1.0 + (r + b) * t);
    }
    return ((r1 + b) * std::exp(r1 * t) - (r2 + b) * std::exp(r2 * t)) / disc;
}

// Phase-damping form with lambda = -gamma: e^{-(a+g)t/2}(cos wt + ((a+g)/(2w)) sin wt),
// w = sqrt(4 g A - (g+a)^2)/2; hyperbolic below the oscillation threshold.
inline double pmme_xi_phase_damping(double gamma, double A, double a, double t) {
    const double c = a + gamma;
    const double q = 4 * gamma * A - c * c;
    const double e = std::exp(-c * t / 2);
    if (std::abs(q) < 1e-14 * std::max(1.0, c * c)) return e * (1 + c * t / 2);
    if (q > 0) {
        const double w = std::sqrt(q) / 2;
        return e * (std::cos(w * t) + c / (2 * w) * std::sin(w * t));
    }
    const double k = std::sqrt(-q) / 2;
    return e * (std::cosh(k * t) + c / (2 * k) * std::sinh(k * t));
}

// mu' = lambda int_0^t k(s) e^{lambda s} mu(t - s) ds on the kernel grid (trapezoid in both
// the convolution and the time step, implicit in the newest value). Returns xi at n*dt.
inline std::vector<cplx> pmme_xi_time_domain(const Kernel& kernel, cplx lambda, double dt, int steps) {
    if (!(dt > 0) || steps < 0) throw domain_error("pmme_xi_time_domain: need dt > 0 and steps >= 0");
    std::vector<cplx> K(steps + 1);
    for (int j = 0; j <= steps; ++j) K[j] = lambda * kernel(j * dt) * std::exp(lambda * (j * dt));
    std::vector<cplx> mu(steps + 1), D(steps + 1);
    mu[0] = 1.0;
    D[0] = 0.0;
    for (int n = 1; n <= steps; ++n) {
        // D_n = dt [K_0 mu_n/2 + sum_{j=1}^{n-1} K_j mu_{n-j} + K_n mu_0/2]
        cplx partial = 0.5 * K[n] * mu[0];
        for (int j = 1; j < n; ++j) partial += K[j] * mu[n - j];
        partial *= dt;
        // mu_n = mu_{n-1} + dt/2 (D_{n-1} + partial + dt K_0 mu_n / 2)
        const cplx coef = 1.0 - dt * dt / 4.0 * K[0];
        mu[n] = (mu[n - 1] + dt / 2 * (D[n - 1] + partial)) / coef;
        D[n] = partial + dt / 2 * K[0] * mu[n];
    }
    return mu;
}

inline cplx pmme_xi(const Kernel& kernel, cplx lambda, double t) {
    if (t < 0) throw domain_error("pmme_xi: t must be non-negative");
    if (t == 0 || lambda == 0.0) return 1.0;
    switch (kernel.kind) {
        case Kernel::Kind::delta:
            return std::exp(lambda * t);
        case Kernel::Kind::exponential:
            return pmme_xi_exponential(lambda, kernel.A, kernel.a, t);
        case Kernel::Kind::tabulated: {
            const int steps = static_cast<int>(std::llround(t / kernel.dt));
            if (std::abs(steps * kernel.dt - t) > 1e-9 * std::max(1.0, t))
                throw domain_error("pmme_xi: tabulated kernels are solved on their own grid; t must be a multiple of dt");
            return pmme_xi_time_domain(kernel, lambda, kernel.dt, steps).back();
        }
        case Kernel::Kind::laplace: {
            auto F = [&](cplx s) { return 1.0 / (s - lambda * kernel.laplace(s - lambda)); };
            // heuristic reach: poles of xi~ sit within about |lambda| of lambda for kernels of unit weight
            return laplace_invert_complex(F, t, 32, std::max(0.0, lambda.real()), 1e-6, 2 * std::abs(lambda) + 1);
        }
    }
    return 0.0;
}

inline std::vector<cplx> pmme_xi_all(const DampingBasis& basis, const Kernel& kernel, double t) {
    std::vector<cplx> xi;
    xi.reserve(basis.eigenvalues.size());
    for (cplx l : basis.eigenvalues) xi.push_back(std::abs(l) < 1e-12 ? cplx(1.0) : pmme_xi(kernel, l, t));
    return xi;
}

// ---- solution, map, CP test ---------------------------------------------------------------

// rho(t) as an operator (Hermitian part taken to restore reality of conjugate pairs).
inline ComplexMatrix pmme_evolve_operator(const DampingBasis& basis, const Kernel& kernel, const ComplexMatrix& rho0, double t) {
    if (rho0.rows() != basis.dim || rho0.cols() != basis.dim) throw shape_error("pmme: rho0 has the wrong dimension");
    return hermitian_part(basis.apply(pmme_xi_all(basis, kernel, t), rho0));
}

// Returns the state without a positivity check (a non-CP kernel can leave the state space).
inline DensityMatrix pmme_solve(const LindbladGenerator& gen, const Kernel& kernel, const DensityMatrix& rho0, double t) {
    const DampingBasis basis = damping_basis(gen);
    return DensityMatrix::raw(pmme_evolve_operator(basis, kernel, rho0.matrix(), t));
}

inline LinearMap pmme_map(const DampingBasis& basis, const std::vector<cplx>& xi) {
    return [basis, xi](const ComplexMatrix& x) { return basis.apply(xi, x); };
}

inline LinearMap pmme_map_inverse(const DampingBasis& basis, const std::vector<cplx>& xi) {
    std::vector<cplx> inv;
    for (cplx x : xi) {
        if (std::abs(x) < 1e-14) throw validation_error("pmme_map_inverse: some xi vanishes, map is not invertible");
        inv.push_back(1.0 / x);
    }
    return [basis, inv](const ComplexMatrix& x) { return basis.apply(inv, x); };
}

struct CpResult {
    double min_eig;
    bool is_cp;
    ComplexMatrix choi;
};

// C = sum_k xi_k L_k^T (x) R_k, equal to sum |i><j| (x) Phi(|i><j|).
inline CpResult pmme_cp_test(const DampingBasis& basis, const std::vector<cplx>& xi, double tol = 1e-9) {
    if (xi.size() != basis.right.size()) throw shape_error("pmme_cp_test: one xi per basis element required");
    const int d = basis.dim;
    ComplexMatrix c = ComplexMatrix::Zero(d * d, d * d);
    for (std::size_t k = 0; k < xi.size(); ++k) c += xi[k] * tensor_product(ComplexMatrix(basis.left[k].transpose()), basis.right[k]);
    const double m = min_eigh(hermitian_part(c));
    return {m, m >= -tol, c};
}

// ---- kernel reconstruction ---------------------------------------------------------------

// k(t) = (e^{-lambda t}/lambda) Lap^{-1}[s - 1/xi~(s)] with an analytic xi~.
inline std::vector<double> kernel_reconstruct(const std::function<cplx(cplx)>& xi_tilde, cplx lambda, const std::vector<double>& times) {
    if (std::abs(lambda) < 1e-12) throw domain_error("kernel_reconstruct: lambda = 0 carries no kernel information");
    std::vector<double> k;
    for (double t : times) {
        auto F = [&](cplx s) { return s - 1.0 / xi_tilde(s); };
        const cplx g = laplace_invert_complex(F, t, 32, std::max(0.0, lambda.real()), 1e-6, 2 * std::abs(lambda) + 1);
        k.push_back((std::exp(-lambda * t) / lambda * g).real());
    }
    return k;
}

// Sampled xi on a uniform grid t_n = n h starting at 0 (xi(0) = 1). g = Lap^{-1}[s - 1/xi~] solves
// xi' = g * xi; differentiating, g(t) = xi''(t) - int_0^t g(s) xi'(t - s) ds (trapezoid).
inline std::vector<double> kernel_reconstruct_samples(const std::vector<cplx>& xi, double h, cplx lambda) {
    if (std::abs(lambda) < 1e-12) throw domain_error("kernel_reconstruct: lambda = 0 carries no kernel information");
    const int n = static_cast<int>(xi.size());
    if (n < 5 || !(h > 0)) throw domain_error("kernel_reconstruct: need at least 5 samples and h > 0");
    if (std::abs(xi[0] - 1.0) > 1e-6) throw validation_error("kernel_reconstruct: xi(0) must be 1");
    std::vector<cplx> d1(n), d2(n);
    for (int i = 1; i + 1 < n; ++i) {
        d1[i] = (xi[i + 1] - xi[i - 1]) / (2 * h);
        d2[i] = (xi[i + 1] - 2.0 * xi[i] + xi[i - 1]) / (h * h);
    }
    d1[0] = (-3.0 * xi[0] + 4.0 * xi[1] - xi[2]) / (2 * h);
    d1[n - 1] = (3.0 * xi[n - 1] - 4.0 * xi[n - 2] + xi[n - 3]) / (2 * h);
    d2[0] = (2.0 * xi[0] - 5.0 * xi[1] + 4.0 * xi[2] - xi[3]) / (h * h);
    d2[n - 1] = (2.0 * xi[n - 1] - 5.0 * xi[n - 2] + 4.0 * xi[n - 3] - xi[n - 4]) / (h * h);
    std::vector<cplx> g(n);
    for (int m = 0; m < n; ++m) {
        cplx acc = m > 0 ? 0.5 * g[0] * d1[m] : cplx(0);
        for (int j = 1; j < m; ++j) acc += g[j] * d1[m - j];
        g[m] = (d2[m] - h * acc) / (1.0 + (m > 0 ? h / 2 * d1[0] : cplx(0)));
    }
    std::vector<double> k(n);
    for (int m = 0; m < n; ++m) k[m] = (std::exp(-lambda * (m * h)) / lambda * g[m]).real();
    return k;
}

struct ExponentialFit {
    double A, a;
};

// Log-linear least squares over samples with k > 0.
inline ExponentialFit fit_exponential_kernel(const std::vector<double>& times, const std::vector<double>& k) {
    if (times.size() != k.size()) throw shape_error("fit_exponential_kernel: size mismatch");
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int m = 0;
    for (std::size_t i = 0; i < k.size(); ++i) {
        if (!(k[i] > 0)) continue;
        const double y = std::log(k[i]);
        sx += times[i];
        sy += y;
        sxx += times[i] * times[i];
        sxy += times[i] * y;
        ++m;
    }
    if (m < 2) throw validation_error("fit_exponential_kernel: fewer than two positive samples");
    const double slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    const double icpt = (sy - slope * sx) / m;
    return {std::exp(icpt), -slope};
}

struct KernelEstimate {
    std::vector<double> k;  // mean over channels
    double max_deviation;   // max |k_i - k_mean| / max |k_mean|
    bool consistent;
};

// Combines per-eigenvalue reconstructions; they must agree for a correct guess of L.
inline KernelEstimate kernel_consensus(const std::vector<std::vector<double>>& per_channel, double tol = 0.02) {
    if (per_channel.empty()) throw domain_error("kernel_consensus: no reconstructions");
    const std::size_t n = per_channel[0].size();
    for (const auto& c : per_channel)
        if (c.size() != n) throw shape_error("kernel_consensus: reconstructions have different lengths");
    KernelEstimate est{std::vector<double>(n, 0.0), 0.0, true};
    for (const auto& c : per_channel)
        for (std::size_t i = 0; i < n; ++i) est.k[i] += c[i] / per_channel.size();
    double scale = 0;
    for (double v : est.k) scale = std::max(scale, std::abs(v));
    for (const auto& c : per_channel)
        for (std::size_t i = 0; i < n; ++i) est.max_deviation = std::max(est.max_deviation, std::abs(c[i] - est.k[i]) / std::max(scale, 1e-300));
    est.consistent = est.max_deviation <= tol;
    return est;
}

}  // namespace openq
