#pragma once
// Quantum-jump and white-noise unravelings of a Lindblad generator.
// Trajectory k of an ensemble draws from Rng::stream(base_seed, k) and the
// ensemble mean is reduced in index order, so results do not depend on threads.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <utility>
#include <vector>

#include "openq/lindblad.hpp"
#include "openq/numkit.hpp"
#include "openq/parallel.hpp"
#include "openq/random.hpp"
#include "openq/states.hpp"

namespace openq {

// H_C = H - (i/2) sum gamma L^dagger L, with a cached eigendecomposition for e^{-i H_C tau}.
class ConditionalHamiltonian {
public:
    explicit ConditionalHamiltonian(const LindbladGenerator& gen) : dissipators_(gen.dissipators) {
        const int d = gen.dim();
        ComplexMatrix a = zeros(d, d);
        for (const auto& dis : gen.dissipators) a += dis.rate * dis.L.adjoint() * dis.L;
        decay_ = a;
        matrix_ = gen.H - 0.5 * I_unit * a;
        Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(matrix_);
        if (es.info() == Eigen::Success) {
            V_ = es.eigenvectors();
            lambda_ = es.eigenvalues();
            Eigen::JacobiSVD<Eigen::MatrixXcd> svd(V_);
            const auto sv = svd.singularValues();
            if (sv(sv.size() - 1) > 0 && sv(0) / sv(sv.size() - 1) < 1e8) {
                Vinv_ = V_.inverse();
                spectral_ = true;
            }
        }
        for (const auto& dis : dissipators_) total_rate_scale_ += dis.rate * std::pow(op_norm(dis.L), 2);
    }

    const ComplexMatrix& matrix() const { return matrix_; }
    // i(H_C - H_C^dagger) = sum gamma L^dagger L
    const ComplexMatrix& decay_operator() const { return decay_; }
    const std::vector<Dissipator>& dissipators() const { return dissipators_; }
    int dim() const { return static_cast<int>(matrix_.rows()); }
    bool spectral() const { return spectral_; }
    double rate_scale() const { return total_rate_scale_; }

    ComplexVector propagate(const ComplexVector& psi, double tau) const {
        if (tau < 0) throw domain_error("conditional_propagate: negative time");
        if (psi.size() != dim()) throw shape_error("conditional_propagate: dimension mismatch");
        if (spectral_) {
            const Eigen::VectorXcd s = Vinv_ * psi;
            return propagate_coeffs(s, tau);
        }
        return matrix_exp(-I_unit * tau * matrix_) * psi;
    }

    // Squared norm of e^{-i H_C tau} psi as a reusable function of tau.
    class Survival {
    public:
        Survival(const ConditionalHamiltonian& hc, const ComplexVector& psi) : hc_(hc), psi_(psi) {
            if (hc.spectral_) s_ = hc.Vinv_ * psi;
        }
        ComplexVector state(double tau) const {
            return hc_.spectral_ ? hc_.propagate_coeffs(s_, tau) : ComplexVector(matrix_exp(-I_unit * tau * hc_.matrix_) * psi_);
        }
        double operator()(double tau) const { return state(tau).squaredNorm(); }

    private:
        const ConditionalHamiltonian& hc_;
        ComplexVector psi_;
        Eigen::VectorXcd s_;
    };

private:
    ComplexVector propagate_coeffs(const Eigen::VectorXcd& s, double tau) const {
        Eigen::VectorXcd e(s.size());
        for (Eigen::Index i = 0; i < s.size(); ++i) e(i) = std::exp(-I_unit * lambda_(i) * tau) * s(i);
        return V_ * e;
    }

    std::vector<Dissipator> dissipators_;
    ComplexMatrix matrix_, decay_;
    Eigen::MatrixXcd V_, Vinv_;
    Eigen::VectorXcd lambda_;
    bool spectral_ = false;
    double total_rate_scale_ = 0.0;
};

inline ComplexVector conditional_propagate(const ConditionalHamiltonian& hc, const ComplexVector& psi, double tau) {
    return hc.propagate(psi, tau);
}

inline void require_unit(const ComplexVector& psi, const char* where) {
    if (std::abs(psi.norm() - 1.0) > 1e-9) throw validation_error(std::string(where) + ": state vector is not normalized");
}

// Channel alpha drawn with p_alpha proportional to gamma_alpha ||L_alpha psi||^2; -1 if all vanish.
inline int choose_channel(const std::vector<Dissipator>& ds, const ComplexVector& psi, Rng& rng) {
    std::vector<double> w(ds.size());
    double total = 0;
    for (std::size_t k = 0; k < ds.size(); ++k) total += (w[k] = ds[k].rate * (ds[k].L * psi).squaredNorm());
    if (!(total > 0)) return -1;
    double u = rng.uniform() * total;
    for (std::size_t k = 0; k < ds.size(); ++k) {
        if (u < w[k]) return static_cast<int>(k);
        u -= w[k];
    }
    for (std::size_t k = ds.size(); k-- > 0;)
        if (w[k] > 0) return static_cast<int>(k);
    return -1;
}

struct WaitingTime {
    double tau;  // +infinity when no jump occurs (within the horizon)
    int alpha;   // -1 when no jump
};

namespace detail {

// tau with survival(tau) = u, by bisection on a bracket where survival crosses u.
inline double bisect_survival(const ConditionalHamiltonian::Survival& surv, double u, double lo, double hi) {
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double n = surv(mid);
        if (std::abs(n - u) < 1e-10 || hi - lo <= 1e-15 * std::max(1.0, hi)) return mid;
        (n > u ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace detail

// Next jump: Pr(jump <= tau) = 1 - ||e^{-i H_C tau} psi||^2. horizon bounds the search (infinite by default).
inline WaitingTime waiting_time_sample(const ConditionalHamiltonian& hc, const ComplexVector& psi, Rng& rng,
                                       double horizon = std::numeric_limits<double>::infinity()) {
    require_unit(psi, "waiting_time_sample");
    const double inf = std::numeric_limits<double>::infinity();
    const double u = rng.uniform_open();
    if (!(hc.rate_scale() > 0)) return {inf, -1};
    const ConditionalHamiltonian::Survival surv(hc, psi);
    double hi;
    if (std::isfinite(horizon)) {
        hi = horizon;
        if (surv(hi) > u) return {inf, -1};
    } else {
        hi = 1.0 / hc.rate_scale();
        int doublings = 0;
        while (surv(hi) > u) {
            hi *= 2;
            if (++doublings > 60) return {inf, -1};  // survival saturates above u: dark component
        }
    }
    const double tau = detail::bisect_survival(surv, u, 0.0, hi);
    const ComplexVector psit = surv.state(tau);
    const int alpha = choose_channel(hc.dissipators(), psit / psit.norm(), rng);
    if (alpha < 0) return {inf, -1};
    return {tau, alpha};
}

struct TrajectoryRecord {
    std::vector<double> times;  // jump times, increasing
    std::vector<int> channels;  // jump channel per time
    ComplexVector final_state;  // normalized
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;
    std::vector<ComplexVector> samples;  // normalized states at the requested sample times
};

// Jump algorithm: draw the waiting time, jump L psi/||L psi||, repeat until tf.
// sample_times (sorted, within [0, tf]) collect intermediate normalized states.
inline TrajectoryRecord run_trajectory(const LindbladGenerator& gen, const ComplexVector& psi0, double tf, std::uint64_t seed,
                                       std::uint64_t stream = 0, const std::vector<double>& sample_times = {}) {
    require_unit(psi0, "run_trajectory");
    if (tf < 0) throw domain_error("run_trajectory: negative final time");
    if (psi0.size() != gen.dim()) throw shape_error("run_trajectory: dimension mismatch");
    Rng rng(seed, stream);
    const ConditionalHamiltonian hc(gen);
    TrajectoryRecord rec;
    rec.seed = seed;
    rec.stream = stream;
    ComplexVector psi = psi0;
    double t = 0;
    std::size_t next_sample = 0;
    auto record_until = [&](double t_end, const ConditionalHamiltonian::Survival& surv, bool inclusive) {
        while (next_sample < sample_times.size() &&
               (sample_times[next_sample] < t_end || (inclusive && sample_times[next_sample] <= t_end))) {
            const ComplexVector s = surv.state(std::max(0.0, sample_times[next_sample] - t));
            rec.samples.push_back(s / s.norm());
            ++next_sample;
        }
    };
    for (;;) {
        const WaitingTime w = waiting_time_sample(hc, psi, rng, tf - t);
        const ConditionalHamiltonian::Survival surv(hc, psi);
        if (!std::isfinite(w.tau)) {
            record_until(tf, surv, true);
            const ComplexVector s = surv.state(tf - t);
            rec.final_state = s / s.norm();
            return rec;
        }
        record_until(t + w.tau, surv, false);
        const ComplexVector pre = surv.state(w.tau);
        const ComplexVector post = gen.dissipators[w.alpha].L * pre;
        psi = post / post.norm();
        t += w.tau;
        // keep jump times strictly increasing even if tau underflows against t
        if (!rec.times.empty() && t <= rec.times.back()) t = std::nextafter(rec.times.back(), tf + 1);
        rec.times.push_back(t);
        rec.channels.push_back(w.alpha);
        if (t >= tf) {
            record_until(tf, ConditionalHamiltonian::Survival(hc, psi), true);
            rec.final_state = psi;
            return rec;
        }
    }
}

struct EnsembleEstimate {
    DensityMatrix mean;
    long K = 0;
    RealMatrix std_error;  // per-entry standard error of the mean (complex entries: sqrt(var Re + var Im))
    double max_stderr = 0.0;
};

// Mean of |psi_k><psi_k| reduced in index order.
inline EnsembleEstimate ensemble_from_states(const std::vector<ComplexVector>& states) {
    if (states.empty()) throw domain_error("ensemble: K must be at least 1");
    const int d = static_cast<int>(states[0].size());
    const double K = static_cast<double>(states.size());
    ComplexMatrix sum = zeros(d, d);
    RealMatrix sq = RealMatrix::Zero(d, d);
    for (const auto& psi : states) {
        const ComplexMatrix p = psi * psi.adjoint();
        sum += p;
        sq += p.cwiseAbs2();
    }
    const ComplexMatrix mean = sum / K;
    EnsembleEstimate est{DensityMatrix::raw(hermitian_part(mean)), static_cast<long>(states.size()), RealMatrix::Zero(d, d), 0.0};
    if (states.size() > 1) {
        // E|x - m|^2 = E|x|^2 - |m|^2, with Bessel's correction
        const RealMatrix var = ((sq / K - mean.cwiseAbs2()) * (K / (K - 1))).cwiseMax(0.0);
        est.std_error = (var / K).cwiseSqrt();
        est.max_stderr = est.std_error.maxCoeff();
    }
    return est;
}

inline EnsembleEstimate ensemble_average(const LindbladGenerator& gen, const ComplexVector& psi0, double tf, long K,
                                         std::uint64_t base_seed) {
    if (K < 1) throw domain_error("ensemble_average: K must be at least 1");
    std::vector<ComplexVector> finals(static_cast<std::size_t>(K));
    parallel_for(finals.size(), [&](std::size_t k) { finals[k] = run_trajectory(gen, psi0, tf, base_seed, k).final_state; });
    return ensemble_from_states(finals);
}

// Ensemble estimates at each of the sorted sample times, from one set of K trajectories.
inline std::vector<EnsembleEstimate> ensemble_series(const LindbladGenerator& gen, const ComplexVector& psi0,
                                                     const std::vector<double>& times, long K, std::uint64_t base_seed) {
    if (K < 1) throw domain_error("ensemble_series: K must be at least 1");
    if (times.empty()) return {};
    std::vector<std::vector<ComplexVector>> samples(static_cast<std::size_t>(K));
    parallel_for(samples.size(),
                 [&](std::size_t k) { samples[k] = run_trajectory(gen, psi0, times.back(), base_seed, k, times).samples; });
    std::vector<EnsembleEstimate> out;
    for (std::size_t i = 0; i < times.size(); ++i) {
        std::vector<ComplexVector> at;
        at.reserve(samples.size());
        for (const auto& s : samples) at.push_back(s[i]);
        out.push_back(ensemble_from_states(at));
    }
    return out;
}

// ---- white-noise (stochastic Schroedinger) unraveling ----------------------------------

inline void require_hermitian_jumps(const LindbladGenerator& gen) {
    for (const auto& d : gen.dissipators)
        if (!is_hermitian(d.L))
            throw unsupported_error("stochastic Schroedinger unraveling needs Hermitian Lindblad operators");
}

// psi <- exp(-i (H dt - sum_k L_k dW_k)) psi with dW_k = sqrt(gamma_k dt) N(0,1).
// The exponential form keeps each step exactly unitary.
inline ComplexVector stochastic_schrodinger_step(const LindbladGenerator& gen, const ComplexVector& psi, double dt, Rng& rng) {
    if (!(dt > 0)) throw domain_error("stochastic_schrodinger_step: dt must be positive");
    require_hermitian_jumps(gen);
    ComplexMatrix a = gen.H * dt;
    for (const auto& d : gen.dissipators) a -= d.L * (std::sqrt(d.rate * dt) * rng.normal());
    const auto e = hermitian_eig(hermitian_part(a));
    Eigen::VectorXcd phases(e.eigenvalues.size());
    for (Eigen::Index i = 0; i < phases.size(); ++i) phases(i) = std::exp(-I_unit * e.eigenvalues(i));
    return e.eigenvectors * (phases.asDiagonal() * (e.eigenvectors.adjoint() * psi));
}

inline ComplexVector sse_trajectory(const LindbladGenerator& gen, const ComplexVector& psi0, double tf, double dt,
                                    std::uint64_t seed, std::uint64_t stream = 0) {
    require_unit(psi0, "sse_trajectory");
    require_hermitian_jumps(gen);
    if (!(dt > 0)) throw domain_error("sse_trajectory: dt must be positive");
    const long n = std::max<long>(1, std::lround(tf / dt));
    const double h = tf / n;
    Rng rng(seed, stream);
    ComplexVector psi = psi0;
    if (tf == 0) return psi;
    for (long i = 0; i < n; ++i) psi = stochastic_schrodinger_step(gen, psi, h, rng);
    return psi;
}

inline EnsembleEstimate sse_ensemble(const LindbladGenerator& gen, const ComplexVector& psi0, double tf, double dt, long K,
                                     std::uint64_t base_seed) {
    if (K < 1) throw domain_error("sse_ensemble: K must be at least 1");
    require_hermitian_jumps(gen);
    std::vector<ComplexVector> finals(static_cast<std::size_t>(K));
    parallel_for(finals.size(), [&](std::size_t k) { finals[k] = sse_trajectory(gen, psi0, tf, dt, base_seed, k); });
    return ensemble_from_states(finals);
}

// ---- fixed-step jump scheme (random telegraph increments) ------------------------------

inline double default_telegraph_dt(const LindbladGenerator& gen) {
    double gmax = 0;
    for (const auto& d : gen.dissipators) gmax = std::max(gmax, d.rate);
    return gmax > 0 ? 1e-3 / gmax : 1e-3;
}

// One step: no jump with probability ||M0 psi||^2 (M0 = e^{-i H_C dt}), else a jump chosen by gamma ||L psi||^2.
inline ComplexVector telegraph_step(const ConditionalHamiltonian& hc, const ComplexMatrix& m0, const ComplexVector& psi, Rng& rng) {
    const ComplexVector nj = m0 * psi;
    const double p0 = nj.squaredNorm();
    if (rng.uniform() < p0) return nj / nj.norm();
    const int k = choose_channel(hc.dissipators(), psi, rng);
    if (k < 0) return nj / nj.norm();
    const ComplexVector j = hc.dissipators()[k].L * psi;
    return j / j.norm();
}

inline ComplexVector telegraph_trajectory(const LindbladGenerator& gen, const ComplexVector& psi0, double tf, double dt,
                                          std::uint64_t seed, std::uint64_t stream = 0) {
    require_unit(psi0, "telegraph_trajectory");
    if (!(dt > 0)) throw domain_error("telegraph_trajectory: dt must be positive");
    const ConditionalHamiltonian hc(gen);
    const long n = std::max<long>(1, std::lround(tf / dt));
    const double h = tf / n;
    const ComplexMatrix m0 = matrix_exp(-I_unit * h * hc.matrix());
    Rng rng(seed, stream);
    ComplexVector psi = psi0;
    if (tf == 0) return psi;
    for (long i = 0; i < n; ++i) psi = telegraph_step(hc, m0, psi, rng);
    return psi;
}

inline EnsembleEstimate telegraph_ensemble(const LindbladGenerator& gen, const ComplexVector& psi0, double tf, double dt, long K,
                                           std::uint64_t base_seed) {
    if (K < 1) throw domain_error("telegraph_ensemble: K must be at least 1");
    std::vector<ComplexVector> finals(static_cast<std::size_t>(K));
    parallel_for(finals.size(), [&](std::size_t k) { finals[k] = telegraph_trajectory(gen, psi0, tf, dt, base_seed, k); });
    return ensemble_from_states(finals);
}

}  // namespace openq
