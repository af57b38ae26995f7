#pragma once
// Microscopic generators for a system coupled through H_SB = g sum_a A_a (x) B_a:
// Bohr decomposition, bath spectra (Ohmic closed form, KMS), principal-value
// Lamb shifts, RWA/Davies and singular-coupling generators, coarse-grained
// rates, the time-dependent Redfield equation, dephasing scaling, and the
// Markov-approximation error bound.
//
// Conventions: gamma(w) = int e^{iwt} B(t) dt and S(w) = (1/2pi) PV int gamma(w')/(w - w') dw'
// carry time units; g^2 gamma has frequency units. A(w) = sum_{E_b - E_a = w} P_a A P_b,
// so w > 0 lowers the energy.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <utility>
#include <vector>

#include "openq/errors.hpp"
#include "openq/lindblad.hpp"
#include "openq/numkit.hpp"
#include "openq/quadrature.hpp"

namespace openq {

// ---- Bohr decomposition ----------------------------------------------------------------

struct EnergyLevels {
    std::vector<double> energies;        // distinct, ascending
    std::vector<ComplexMatrix> projectors;
};

inline EnergyLevels energy_levels(const ComplexMatrix& h, double rel_tol = 1e-9) {
    const auto e = hermitian_eig(h);
    const double tol = rel_tol * std::max(1.0, e.eigenvalues.cwiseAbs().maxCoeff());
    EnergyLevels lv;
    const int d = static_cast<int>(e.eigenvalues.size());
    for (int i = 0; i < d; ++i) {
        const ComplexVector v = e.eigenvectors.col(i);
        if (!lv.energies.empty() && e.eigenvalues(i) - lv.energies.back() <= tol) {
            lv.projectors.back() += v * v.adjoint();
        } else {
            lv.energies.push_back(e.eigenvalues(i));
            lv.projectors.push_back(v * v.adjoint());
        }
    }
    return lv;
}

// Jump operators A_a(w) for every coupling a, sharing one frequency list.
struct BohrDecomposition {
    std::vector<double> frequencies;                  // ascending
    std::vector<std::vector<ComplexMatrix>> ops;      // ops[i][a] = A_a(frequencies[i])

    std::size_t index_of(double w, double tol = 1e-9) const {
        for (std::size_t i = 0; i < frequencies.size(); ++i)
            if (std::abs(frequencies[i] - w) <= tol * std::max(1.0, std::abs(w))) return i;
        throw domain_error("BohrDecomposition: frequency not present");
    }
    // Single-coupling accessor.
    const ComplexMatrix& at(double w) const { return ops[index_of(w)][0]; }
};

inline BohrDecomposition bohr_decompose(const ComplexMatrix& h_s, const std::vector<ComplexMatrix>& couplings,
                                        double rel_tol = 1e-9) {
    require_square(h_s, "bohr_decompose");
    for (const auto& a : couplings)
        if (a.rows() != h_s.rows() || a.cols() != h_s.cols()) throw shape_error("bohr_decompose: coupling has wrong size");
    const EnergyLevels lv = energy_levels(h_s, rel_tol);
    const double scale = std::max(1.0, op_norm(h_s));
    const double wtol = rel_tol * scale;
    // collect (w, a, b) in order of w, merging frequencies within tolerance
    std::vector<std::pair<double, std::pair<int, int>>> pairs;
    const int n = static_cast<int>(lv.energies.size());
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) pairs.push_back({lv.energies[b] - lv.energies[a], {a, b}});
    std::stable_sort(pairs.begin(), pairs.end(), [](const auto& x, const auto& y) { return x.first < y.first; });
    BohrDecomposition out;
    const int d = static_cast<int>(h_s.rows());
    std::vector<double> group_sum;
    std::vector<int> group_count;
    for (const auto& [w, ab] : pairs) {
        if (out.frequencies.empty() || w - out.frequencies.back() > wtol) {
            out.frequencies.push_back(w);
            out.ops.emplace_back(couplings.size(), zeros(d, d));
            group_sum.push_back(0.0);
            group_count.push_back(0);
        }
        group_sum.back() += w;
        ++group_count.back();
        for (std::size_t c = 0; c < couplings.size(); ++c)
            out.ops.back()[c] += lv.projectors[ab.first] * couplings[c] * lv.projectors[ab.second];
    }
    // representative frequency: group mean; drop groups where every coupling vanishes
    BohrDecomposition pruned;
    double amax = 0;
    for (const auto& a : couplings) amax = std::max(amax, max_abs(a));
    for (std::size_t i = 0; i < out.frequencies.size(); ++i) {
        bool nonzero = false;
        for (const auto& op : out.ops[i]) nonzero = nonzero || max_abs(op) > 1e-12 * std::max(1.0, amax);
        if (!nonzero) continue;
        double w = group_sum[i] / group_count[i];
        if (std::abs(w) <= wtol) w = 0.0;
        pruned.frequencies.push_back(w);
        pruned.ops.push_back(out.ops[i]);
    }
    return pruned;
}

inline BohrDecomposition bohr_decompose(const ComplexMatrix& h_s, const ComplexMatrix& a) {
    return bohr_decompose(h_s, std::vector<ComplexMatrix>{a});
}

// ---- bath spectra ----------------------------------------------------------------------

// 2 pi eta w e^{-|w|/wc} / (1 - e^{-beta w}); value 2 pi eta / beta at w = 0.
inline double ohmic_gamma(double w, double eta, double wc, double beta) {
    if (!(eta > 0) || !(wc > 0) || !(beta > 0)) throw domain_error("ohmic_gamma: eta, omega_c and beta must be positive");
    if (w == 0.0) return 2 * pi * eta / beta;
    const double x = beta * w;
    return 2 * pi * eta / beta * (x / -std::expm1(-x)) * std::exp(-std::abs(w) / wc);
}

// Bath correlation <B(t)B> for the Ohmic density J(w) = eta w e^{-w/wc} (bosonic bath, inverse temperature beta).
// Expanding 1/(1-e^{-beta w}) gives eta sum_n [1/(1/wc + n beta + it)^2 + 1/(1/wc + (n+1) beta - it)^2];
// the sum is truncated at n_terms and the remainder closed by Euler-Maclaurin.
inline cplx ohmic_correlation(double t, double eta, double wc, double beta, int n_terms = 200) {
    if (!(eta > 0) || !(wc > 0) || !(beta > 0)) throw domain_error("ohmic_correlation: eta, omega_c and beta must be positive");
    auto series = [&](cplx c) {
        // sum_{n>=0} 1/(c + n beta)^2
        cplx s = 0;
        for (int n = 0; n < n_terms; ++n) s += 1.0 / ((c + double(n) * beta) * (c + double(n) * beta));
        const cplx z = c + double(n_terms) * beta;
        // tail: integral + f/2 - f'/12 + f'''/720 - f^(5)/30240
        s += 1.0 / (beta * z) + 0.5 / (z * z) + beta / (6.0 * z * z * z) - std::pow(beta, 3) / (30.0 * std::pow(z, 5)) +
             std::pow(beta, 5) / (42.0 * std::pow(z, 7));
        return s;
    };
    const double c0 = 1.0 / wc;
    return eta * (series(cplx(c0, t)) + series(cplx(c0 + beta, -t)));
}

// Matrix-valued spectrum over couplings: gamma(w) Hermitian PSD, S(w) Hermitian. S may be empty (no Lamb shift).
struct BathSpectrum {
    std::function<ComplexMatrix(double)> gamma;
    std::function<ComplexMatrix(double)> S;
    double beta = std::numeric_limits<double>::infinity();
};

inline BathSpectrum diagonal_spectrum(std::function<double(double)> gamma, std::function<double(double)> S, int n_couplings,
                                      double beta) {
    BathSpectrum b;
    b.beta = beta;
    b.gamma = [gamma, n_couplings](double w) { return ComplexMatrix(gamma(w) * identity(n_couplings)); };
    if (S) b.S = [S, n_couplings](double w) { return ComplexMatrix(S(w) * identity(n_couplings)); };
    return b;
}

// (1/2pi) PV int gamma(w')/(w - w') dw' over [-L, L], L = tail_factor * cutoff + |w|.
// Subtracting gamma(w) leaves a regular integrand; the subtracted piece integrates to gamma(w) ln((L+w)/(L-w)).
inline double lamb_shift_S(const std::function<double(double)>& gamma, double w, double cutoff, double tol = 1e-10,
                           double tail_factor = 20.0) {
    if (!(cutoff > 0)) throw domain_error("lamb_shift_S: cutoff must be positive");
    const double L = tail_factor * cutoff + std::abs(w);
    const double gw = gamma(w);
    const double h = 1e-6 * std::max(1.0, std::abs(w));
    const double slope = (gamma(w + h) - gamma(w - h)) / (2 * h);
    auto f = [&](double x) {
        const double dx = w - x;
        if (std::abs(dx) < 1e-7 * std::max(1.0, std::abs(w))) return -slope;
        return (gamma(x) - gw) / dx;
    };
    // split at the pole and at 0 (where spectra typically have a kink)
    std::vector<double> cuts{-L, L, w};
    if (std::abs(w) > 1e-12) cuts.push_back(0.0);
    std::sort(cuts.begin(), cuts.end());
    auto integrate = [&](double eps) {
        double s = 0;
        for (std::size_t i = 0; i + 1 < cuts.size(); ++i) s += gauss_kronrod<double>(f, cuts[i], cuts[i + 1], eps, eps, 50);
        return s;
    };
    const double coarse = integrate(tol);
    const double fine = integrate(tol / 100);
    if (std::abs(coarse - fine) > 1e-6 * std::max(1.0, std::abs(fine)))
        throw numerical_error("lamb_shift_S: principal-value quadrature did not converge");
    const double log_term = gw == 0.0 ? 0.0 : gw * std::log((L + w) / (L - w));
    return (fine + log_term) / (2 * pi);
}

// Ohmic spectrum with S computed by principal-value quadrature (cached per frequency).
inline BathSpectrum ohmic_spectrum(double eta, double wc, double beta, bool lamb_shift = true) {
    ohmic_gamma(0.0, eta, wc, beta);  // parameter validation
    auto g = [=](double w) { return ohmic_gamma(w, eta, wc, beta); };
    std::function<double(double)> s;
    if (lamb_shift) {
        auto cache = std::make_shared<std::map<double, double>>();
        s = [g, wc, cache](double w) {
            auto it = cache->find(w);
            if (it != cache->end()) return it->second;
            const double v = lamb_shift_S(g, w, wc);
            (*cache)[w] = v;
            return v;
        };
    }
    return diagonal_spectrum(g, s, 1, beta);
}

// ---- RWA (Davies) and singular-coupling generators -------------------------------------

// gamma_{ab} sum (A_b rho A_a^dagger - ...) rewritten with the eigenvectors of the gamma matrix.
inline void append_dissipators(std::vector<Dissipator>& out, const ComplexMatrix& gamma, const std::vector<ComplexMatrix>& ops,
                               double g2) {
    if (!is_hermitian(gamma, 1e-9)) throw spectrum_error("gamma matrix is not Hermitian");
    const auto e = hermitian_eig(hermitian_part(gamma));
    const double scale = std::max(1.0, e.eigenvalues.cwiseAbs().maxCoeff());
    if (e.eigenvalues.minCoeff() < -1e-10 * scale) throw spectrum_error("gamma matrix is not positive semidefinite");
    for (Eigen::Index k = 0; k < e.eigenvalues.size(); ++k) {
        const double dk = e.eigenvalues(k);
        if (dk <= 1e-14 * scale) continue;
        ComplexMatrix l = zeros(ops[0].rows(), ops[0].cols());
        for (std::size_t b = 0; b < ops.size(); ++b) l += std::conj(e.eigenvectors(b, k)) * ops[b];
        if (max_abs(l) < 1e-14) continue;
        out.push_back({g2 * dk, l});
    }
}

inline ComplexMatrix lamb_shift_term(const ComplexMatrix& S, const std::vector<ComplexMatrix>& ops) {
    ComplexMatrix h = zeros(ops[0].rows(), ops[0].cols());
    for (std::size_t a = 0; a < ops.size(); ++a)
        for (std::size_t b = 0; b < ops.size(); ++b)
            if (S(a, b) != 0.0) h += S(a, b) * ops[a].adjoint() * ops[b];
    return h;
}

struct DaviesOptions {
    bool lamb_shift = true;
    bool interaction_picture = false;  // drop H_S (keeps H_LS)
};

inline LindbladGenerator davies_generator(const ComplexMatrix& h_s, const std::vector<ComplexMatrix>& couplings,
                                          const BathSpectrum& spec, double g, DaviesOptions opt = {}) {
    const BohrDecomposition bd = bohr_decompose(h_s, couplings);
    const double g2 = g * g;
    std::vector<Dissipator> ds;
    ComplexMatrix hls = zeros(h_s.rows(), h_s.cols());
    for (std::size_t i = 0; i < bd.frequencies.size(); ++i) {
        const double w = bd.frequencies[i];
        const ComplexMatrix gm = spec.gamma(w);
        if (gm.rows() != static_cast<Eigen::Index>(couplings.size()))
            throw shape_error("davies_generator: spectrum size does not match the number of couplings");
        append_dissipators(ds, gm, bd.ops[i], g2);
        if (opt.lamb_shift && spec.S) hls += g2 * lamb_shift_term(spec.S(w), bd.ops[i]);
    }
    ComplexMatrix h = hermitian_part(hls);
    if (!opt.interaction_picture) h += h_s;
    return LindbladGenerator(h, ds);
}

inline LindbladGenerator davies_generator(const ComplexMatrix& h_s, const ComplexMatrix& a, const BathSpectrum& spec, double g,
                                          DaviesOptions opt = {}) {
    return davies_generator(h_s, std::vector<ComplexMatrix>{a}, spec, g, opt);
}

// Only the static component survives: bare A with gamma(0) and S(0).
inline LindbladGenerator scl_generator(const ComplexMatrix& h_s, const std::vector<ComplexMatrix>& couplings,
                                       const BathSpectrum& spec, double g, bool lamb_shift = true) {
    require_square(h_s, "scl_generator");
    std::vector<Dissipator> ds;
    append_dissipators(ds, spec.gamma(0.0), couplings, g * g);
    ComplexMatrix h = h_s;
    if (lamb_shift && spec.S) h += g * g * hermitian_part(lamb_shift_term(spec.S(0.0), couplings));
    return LindbladGenerator(h, ds);
}

inline LindbladGenerator scl_generator(const ComplexMatrix& h_s, const ComplexMatrix& a, const BathSpectrum& spec, double g,
                                       bool lamb_shift = true) {
    return scl_generator(h_s, std::vector<ComplexMatrix>{a}, spec, g, lamb_shift);
}

// T1 and T2 in the H_S eigenbasis, read off the superoperator (coherences must decouple).
struct QubitTimes {
    double T1, T2;
    double omega;  // precession frequency of rho_{10} in the energy basis (sign: rho_10 ~ e^{-i omega t})
};

inline QubitTimes qubit_relaxation_times(const LindbladGenerator& gen, const ComplexMatrix& h_s) {
    if (gen.dim() != 2) throw shape_error("qubit_relaxation_times: qubit generator required");
    const auto e = hermitian_eig(h_s);
    const ComplexMatrix& v = e.eigenvectors;
    std::vector<Dissipator> ds;
    for (const auto& d : gen.dissipators) ds.push_back({d.rate, ComplexMatrix(v.adjoint() * d.L * v)});
    const ComplexMatrix s = to_superoperator(LindbladGenerator(hermitian_part(v.adjoint() * gen.H * v), ds));
    auto idx = [](int i, int j) { return j * 2 + i; };
    // population-coherence blocks must vanish for T1/T2 to be well defined
    const double leak = std::max({std::abs(s(idx(1, 0), idx(0, 0))), std::abs(s(idx(1, 0), idx(1, 1))),
                                  std::abs(s(idx(0, 0), idx(1, 0))), std::abs(s(idx(1, 0), idx(0, 1)))});
    if (leak > 1e-9 * std::max(1.0, max_abs(s))) throw unsupported_error("qubit_relaxation_times: coherences do not decouple");
    QubitTimes q;
    const double r1 = -(s(idx(0, 0), idx(0, 0)) + s(idx(1, 1), idx(1, 1))).real();
    const cplx c = s(idx(1, 0), idx(1, 0));
    q.T1 = r1 > 0 ? 1.0 / r1 : std::numeric_limits<double>::infinity();
    q.T2 = c.real() < 0 ? -1.0 / c.real() : std::numeric_limits<double>::infinity();
    q.omega = -c.imag();
    return q;
}

// ---- coarse-grained rates --------------------------------------------------------------

using Correlation = std::function<cplx(double)>;

// b_{ww'}(tau) = int_0^tau ds int_0^tau ds' e^{i(w' s - w s')} B(s - s'), using B(-u) = conj(B(u)).
// In centre/difference variables: e^{i D tau/2} int_{-tau}^{tau} du e^{i S u/2} B(u) (tau-|u|) sinc(D (tau-|u|)/2),
// with D = w' - w and S = w + w'.
inline cplx cg_rate_element(const Correlation& corr, double w, double wp, double tau, double abs_tol = 1e-11) {
    if (!(tau > 0)) throw domain_error("cg_rates: tau must be positive");
    const double D = wp - w, Sg = w + wp;
    auto sinc = [](double x) { return std::abs(x) < 1e-8 ? 1.0 - x * x / 6.0 : std::sin(x) / x; };
    auto f = [&](double u) {
        const double r = tau - std::abs(u);
        const cplx b = u >= 0 ? corr(u) : std::conj(corr(-u));
        return std::exp(I_unit * (Sg * u / 2)) * b * r * sinc(D * r / 2);
    };
    // panels sized to the fastest phase so the adaptive rule sees a few oscillations at most
    const double fastest = std::max({std::abs(Sg) / 2, std::abs(D) / 2, 1.0 / tau});
    const int panels = std::max(1, static_cast<int>(std::ceil(tau * fastest / pi)));
    cplx s = 0;
    const double h = tau / panels;
    for (int p = 0; p < panels; ++p) {
        s += gauss_kronrod<cplx>(f, p * h, (p + 1) * h, abs_tol / panels, 1e-12);
        s += gauss_kronrod<cplx>(f, -(p + 1) * h, -p * h, abs_tol / panels, 1e-12);
    }
    return std::exp(I_unit * (D * tau / 2)) * s;
}

struct CGRates {
    std::vector<double> frequencies;
    double tau = 0;
    ComplexMatrix b;  // b(i, j) = b_{w_i w_j}(tau)
    ComplexMatrix rates() const { return b / tau; }
};

inline CGRates cg_rates(const Correlation& corr, const std::vector<double>& freqs, double tau) {
    CGRates r{freqs, tau, zeros(static_cast<int>(freqs.size()), static_cast<int>(freqs.size()))};
    for (std::size_t i = 0; i < freqs.size(); ++i)
        for (std::size_t j = i; j < freqs.size(); ++j) {
            const cplx v = cg_rate_element(corr, freqs[i], freqs[j], tau);
            r.b(i, j) = v;
            r.b(j, i) = std::conj(v);
        }
    return r;
}

// ---- coarse-grained vs exact pure dephasing --------------------------------------------

// Weight w(nu) = Omega(nu) |lambda(nu)|^2 coth(beta nu/2) on [0, nu_max].
struct DephasingWeight {
    std::function<double(double)> w;
    double nu_max;
};

// High-temperature Debye model: Omega ~ nu^2, |lambda|^2 ~ 1/nu, coth ~ 2/(beta nu) makes the weight flat.
// Normalized so that 2 gamma(tau) t equals C t tau int_0^{wc} sinc^2(nu tau/2) dnu.
inline DephasingWeight debye_weight(double C, double wc) {
    if (!(C >= 0) || !(wc > 0)) throw domain_error("debye_weight: need C >= 0 and omega_c > 0");
    return {[C](double) { return C / 2; }, wc};
}

// Ohmic Omega |lambda|^2 = eta nu e^{-nu/wc} at inverse temperature beta (integrated to 40 wc).
inline DephasingWeight ohmic_weight(double eta, double wc, double beta) {
    if (!(eta > 0) || !(wc > 0) || !(beta > 0)) throw domain_error("ohmic_weight: parameters must be positive");
    return {[=](double nu) {
                if (nu < 1e-12) return 2 * eta / beta;
                return eta * nu * std::exp(-nu / wc) / std::tanh(beta * nu / 2);
            },
            40 * wc};
}

// delta-bar(nu, tau) = (tau/pi) sinc^2(nu tau/2)
inline double delta_bar(double nu, double tau) {
    const double x = nu * tau / 2;
    const double s = std::abs(x) < 1e-8 ? 1.0 : std::sin(x) / x;
    return tau / pi * s * s;
}

// gamma(tau) = pi int w(nu) delta_bar(nu, tau) dnu
inline double cg_dephasing_gamma(double tau, const DephasingWeight& wt) {
    if (!(tau > 0)) throw domain_error("cg_dephasing_gamma: tau must be positive");
    auto f = [&](double nu) { return pi * wt.w(nu) * delta_bar(nu, tau); };
    const int panels = std::max(1, static_cast<int>(std::ceil(wt.nu_max * tau / (2 * pi))));
    double s = 0;
    const double h = wt.nu_max / panels;
    for (int p = 0; p < panels; ++p) s += gauss_kronrod<double>(f, p * h, (p + 1) * h, 1e-14, 1e-12);
    return s;
}

// Exponent arguments of the coherence, rho_01 ~ exp(-Gamma(t)): Markovian 2 gamma(tau) t, exact 2 gamma(t) t.
inline double gamma_markov_curve(double t, double tau, const DephasingWeight& wt) { return 2 * cg_dephasing_gamma(tau, wt) * t; }
inline double gamma_exact_curve(double t, const DephasingWeight& wt) {
    return t > 0 ? 2 * cg_dephasing_gamma(t, wt) * t : 0.0;
}

// Crossing of the Markovian line with the exact curve, bracketed in [tau/2, 2 tau].
inline double cg_crossing_time(double tau, const DephasingWeight& wt) {
    const double gt = cg_dephasing_gamma(tau, wt);
    return brent_root([&](double t) { return 2 * gt * t - gamma_exact_curve(t, wt); }, tau / 2, 2 * tau, 1e-13 * tau);
}

// ---- Redfield (TCL2) integration -------------------------------------------------------

struct RedfieldResult {
    std::vector<double> times;
    std::vector<ComplexMatrix> states;  // not guaranteed positive
    double min_eigenvalue = 0;          // over all reported states
    double max_trace_error = 0;
};

// d rho/dt = -i[H, rho] - g^2 ([A, Lambda rho] - [A, rho Lambda^dagger]),
// Lambda_ab(t) = A_ab int_0^t B(s) e^{-i(E_a - E_b)s} ds in the H_S eigenbasis. Fixed-step RK4.
inline RedfieldResult redfield_evolve(const ComplexMatrix& h_s, const ComplexMatrix& a, const Correlation& corr, double g,
                                      const ComplexMatrix& rho0, const std::vector<double>& times, int steps_per_unit = 0) {
    if (times.empty()) return {};
    for (std::size_t i = 0; i < times.size(); ++i)
        if (times[i] < 0 || (i && times[i] < times[i - 1])) throw domain_error("redfield_evolve: times must be sorted and >= 0");
    const int d = static_cast<int>(h_s.rows());
    const auto e = hermitian_eig(h_s);
    const ComplexMatrix& V = e.eigenvectors;
    const ComplexMatrix ae = V.adjoint() * a * V;
    // distinct Bohr frequencies E_a - E_b and the index of each (a,b)
    std::vector<double> freqs;
    Eigen::MatrixXi fidx(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) {
            const double w = e.eigenvalues(i) - e.eigenvalues(j);
            int found = -1;
            for (std::size_t k = 0; k < freqs.size(); ++k)
                if (std::abs(freqs[k] - w) < 1e-12 * std::max(1.0, std::abs(w))) found = static_cast<int>(k);
            if (found < 0) {
                found = static_cast<int>(freqs.size());
                freqs.push_back(w);
            }
            fidx(i, j) = found;
        }
    const double tf = times.back();
    double rate = 1.0;
    for (double w : freqs) rate = std::max(rate, std::abs(w));
    const int per_unit = steps_per_unit > 0 ? steps_per_unit : static_cast<int>(std::ceil(50 * rate));
    const long n = std::max<long>(1, static_cast<long>(std::ceil(tf * per_unit)));
    const double h = tf > 0 ? tf / n : 0.0;
    // cumulative integrals F_k(t) = int_0^t B(s) e^{-i w_k s} ds on the half-step grid
    std::vector<std::vector<cplx>> F(freqs.size(), std::vector<cplx>(2 * n + 1, 0.0));
    for (std::size_t k = 0; k < freqs.size(); ++k) {
        const double w = freqs[k];
        auto f = [&](double s) { return corr(s) * std::exp(-I_unit * w * s); };
        for (long m = 1; m <= 2 * n; ++m)
            F[k][m] = F[k][m - 1] + gauss_kronrod<cplx>(f, (m - 1) * h / 2, m * h / 2, 1e-13, 1e-12);
    }
    auto lambda_at = [&](long half_index) {
        ComplexMatrix lam(d, d);
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) lam(i, j) = ae(i, j) * F[fidx(i, j)][half_index];
        return ComplexMatrix(V * lam * V.adjoint());
    };
    const double g2 = g * g;
    auto rhs_at = [&](const ComplexMatrix& rho, const ComplexMatrix& lam) {
        return ComplexMatrix(-I_unit * commutator(h_s, rho) - g2 * (commutator(a, lam * rho) - commutator(a, rho * lam.adjoint())));
    };
    RedfieldResult res;
    res.min_eigenvalue = std::numeric_limits<double>::infinity();
    ComplexMatrix rho = rho0;
    std::size_t next = 0;
    auto record = [&](double t) {
        while (next < times.size() && times[next] <= t + 1e-12 * std::max(1.0, tf)) {
            res.times.push_back(times[next]);
            res.states.push_back(rho);
            res.min_eigenvalue = std::min(res.min_eigenvalue, min_eigh(hermitian_part(rho)));
            res.max_trace_error = std::max(res.max_trace_error, std::abs(rho.trace() - rho0.trace()));
            ++next;
        }
    };
    record(0.0);
    for (long m = 0; m < n && h > 0; ++m) {
        const ComplexMatrix l0 = lambda_at(2 * m), lh = lambda_at(2 * m + 1), l1 = lambda_at(2 * m + 2);
        const ComplexMatrix k1 = rhs_at(rho, l0);
        const ComplexMatrix k2 = rhs_at(rho + 0.5 * h * k1, lh);
        const ComplexMatrix k3 = rhs_at(rho + 0.5 * h * k2, lh);
        const ComplexMatrix k4 = rhs_at(rho + h * k3, l1);
        rho += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        record((m + 1) * h);
    }
    record(tf);
    return res;
}

// Exact pure-dephasing correlation for discrete modes: sum |lambda_k|^2 (coth(beta w_k/2) cos w_k t - i sin w_k t).
inline Correlation spin_boson_correlation(std::vector<double> lambda2, std::vector<double> omega, double beta) {
    if (lambda2.size() != omega.size()) throw shape_error("spin_boson_correlation: size mismatch");
    return [=](double t) {
        cplx s = 0;
        for (std::size_t k = 0; k < omega.size(); ++k)
            s += lambda2[k] * cplx(std::cos(omega[k] * t) / std::tanh(beta * omega[k] / 2), -std::sin(omega[k] * t));
        return s;
    };
}

// ---- collective vs independent dephasing -----------------------------------------------

enum class DephasingMode { independent, collective };

// Decay rates of rho_ab for H_S = sum eps_i Z_i and Z couplings with equal gamma(0):
// independent 1/2 gamma0 sum_i (z_ai - z_bi)^2, collective 1/2 gamma0 (sum_i z_ai - sum_i z_bi)^2.
// Basis index bit i (most significant first) set means z = -1 on qubit i.
inline RealMatrix dephasing_scaling(int n, DephasingMode mode, double gamma0 = 1.0) {
    if (n < 1 || n > 12) throw domain_error("dephasing_scaling: qubit count must be in [1, 12]");
    const int dim = 1 << n;
    auto z = [n](int idx, int q) { return (idx >> (n - 1 - q)) & 1 ? -1.0 : 1.0; };
    RealMatrix r(dim, dim);
    for (int a = 0; a < dim; ++a)
        for (int b = 0; b < dim; ++b) {
            double v = 0;
            if (mode == DephasingMode::independent) {
                for (int q = 0; q < n; ++q) v += std::pow(z(a, q) - z(b, q), 2);
            } else {
                double s = 0;
                for (int q = 0; q < n; ++q) s += z(a, q) - z(b, q);
                v = s * s;
            }
            r(a, b) = 0.5 * gamma0 * v;
        }
    return r;
}

inline ComplexMatrix z_on(int n, int q) {
    std::vector<ComplexMatrix> f(n, identity(2));
    f[q] = pauli_z();
    return tensor_product(f);
}

// ---- Markov-approximation error bound --------------------------------------------------

// int_0^infty t^n |B(t)| dt by doubling the range until the increments vanish; divergence -> unsupported_error.
inline double correlation_moment(const std::function<double(double)>& abs_corr, int n, double scale = 1.0, int max_doublings = 60) {
    if (!(scale > 0)) throw domain_error("correlation_moment: scale must be positive");
    auto f = [&](double t) { return std::pow(t, n) * abs_corr(t); };
    double total = gauss_kronrod<double>(f, 0.0, scale, 1e-14, 1e-12);
    double lo = scale;
    for (int k = 0; k < max_doublings; ++k) {
        const double piece = gauss_kronrod<double>(f, lo, 2 * lo, 1e-14, 1e-12);
        total += piece;
        lo *= 2;
        if (!std::isfinite(total)) break;
        if (std::abs(piece) <= 1e-12 * std::abs(total) && k >= 3) return total;
    }
    throw unsupported_error("correlation_moment: moment integral does not converge (bath correlation decays too slowly)");
}

struct MarkovBound {
    double m0, m1, m2;  // moments int t^n |B| dt
    double delta1;      // 4 M eta^4 g^2 m1 m0
    double delta2;      // eta^2 int_t^infty |B|
    double total;       // g^2 M (delta1 + delta2)
};

// eta = max ||A_a||, M = (number of couplings)^2. t is the elapsed time entering the tail term.
inline MarkovBound markov_error_bound(const std::function<double(double)>& abs_corr, double g, double eta, double M,
                                      double t = std::numeric_limits<double>::infinity(), double scale = 1.0) {
    MarkovBound b;
    b.m0 = correlation_moment(abs_corr, 0, scale);
    b.m1 = correlation_moment(abs_corr, 1, scale);
    b.m2 = correlation_moment(abs_corr, 2, scale);
    b.delta1 = 4 * M * std::pow(eta, 4) * g * g * b.m1 * b.m0;
    b.delta2 = 0;
    if (std::isfinite(t)) {
        const double head = t > 0 ? gauss_kronrod<double>(abs_corr, 0.0, t, 1e-14, 1e-12) : 0.0;
        b.delta2 = eta * eta * std::max(0.0, b.m0 - head);
    }
    b.total = g * g * M * (b.delta1 + b.delta2);
    return b;
}

}  // namespace openq
