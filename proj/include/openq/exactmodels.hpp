#pragma once
// Exactly solvable reference models: pure-dephasing spin-boson and the resonant
// one-excitation Jaynes-Cummings model with a Lorentzian (exponential memory) bath,
// together with its Markov, TCL2, TCL4 and second-order Nakajima-Zwanzig approximations.

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "openq/davies.hpp"
#include "openq/errors.hpp"
#include "openq/numkit.hpp"
#include "openq/quadrature.hpp"

namespace openq {

// ---- spin-boson pure dephasing ---------------------------------------------------------

// Either discrete modes (lambda2[k] = |lambda_k|^2 at omega[k]) or a continuum
// J(nu) = Omega(nu) |lambda(nu)|^2 on [0, cutoff]. Continuum is used when `spectral` is set.
struct SpinBosonParams {
    std::vector<double> lambda2;
    std::vector<double> omega;
    std::function<double(double)> spectral;
    double cutoff = 0;
    double beta = 1;

    void validate() const {
        if (!(beta > 0)) throw domain_error("spin-boson: beta must be positive");
        if (spectral) {
            if (!(cutoff > 0)) throw domain_error("spin-boson: continuum needs a positive cutoff");
            return;
        }
        if (lambda2.size() != omega.size()) throw shape_error("spin-boson: lambda2/omega size mismatch");
        for (double w : omega)
            if (!(w > 0)) throw domain_error("spin-boson: mode frequencies must be positive");
    }
};

inline SpinBosonParams spin_boson_discrete(std::vector<double> lambda2, std::vector<double> omega, double beta) {
    SpinBosonParams p;
    p.lambda2 = std::move(lambda2);
    p.omega = std::move(omega);
    p.beta = beta;
    p.validate();
    return p;
}

inline SpinBosonParams spin_boson_continuum(std::function<double(double)> spectral, double cutoff, double beta) {
    SpinBosonParams p;
    p.spectral = std::move(spectral);
    p.cutoff = cutoff;
    p.beta = beta;
    p.validate();
    return p;
}

// Weight w(nu) = J(nu) coth(beta nu/2) in the form used by the coarse-grained rate.
inline DephasingWeight spin_boson_weight(const SpinBosonParams& p) {
    p.validate();
    if (!p.spectral) throw unsupported_error("spin_boson_weight: discrete modes have no density");
    const auto j = p.spectral;
    const double beta = p.beta;
    return {[j, beta](double nu) {
                if (nu < 1e-12) {
                    const double h = 1e-6;
                    return 2 * j(h) / (beta * h);  // J(nu) ~ nu near 0
                }
                return j(nu) / std::tanh(beta * nu / 2);
            },
            p.cutoff};
}

// gamma(t) = sum |lambda_k|^2 coth(beta w_k/2) t sinc^2(w_k t/2); coherence decays as e^{-2 gamma(t) t}.
inline double spin_boson_gamma_exact(const SpinBosonParams& p, double t) {
    if (!(t > 0)) throw domain_error("spin_boson_gamma_exact: t must be positive");
    p.validate();
    if (p.spectral) return cg_dephasing_gamma(t, spin_boson_weight(p));
    double s = 0;
    for (std::size_t k = 0; k < p.omega.size(); ++k) {
        const double x = p.omega[k] * t / 2;
        const double sinc = std::abs(x) < 1e-8 ? 1.0 : std::sin(x) / x;
        s += p.lambda2[k] / std::tanh(p.beta * p.omega[k] / 2) * t * sinc * sinc;
    }
    return s;
}

inline cplx spin_boson_coherence(const SpinBosonParams& p, double t, cplx rho01_0) {
    if (t == 0) return rho01_0;
    return std::exp(-2 * spin_boson_gamma_exact(p, t) * t) * rho01_0;
}

// ---- Jaynes-Cummings on resonance ------------------------------------------------------
// Memory function f(t) = e^{-t/tau_B}/(2 tau_M tau_B); alpha^2 = tau_B/tau_M.

struct JCParams {
    double tau_B = 1;
    double tau_M = 5;

    void validate() const {
        if (!(tau_B > 0) || !(tau_M > 0)) throw domain_error("JC: tau_B and tau_M must be positive");
    }
    double alpha2() const { return tau_B / tau_M; }
    bool weak() const { return 2 * alpha2() <= 1; }
};

inline JCParams jc_from_alpha2(double tau_B, double alpha2) { return {tau_B, tau_B / alpha2}; }

inline double jc_memory(const JCParams& p, double t) { return std::exp(-t / p.tau_B) / (2 * p.tau_M * p.tau_B); }

// delta = sqrt(1/tau_B^2 - 2/(tau_M tau_B)); imaginary in strong coupling.
inline cplx jc_delta(const JCParams& p) {
    p.validate();
    return std::sqrt(cplx(1 / (p.tau_B * p.tau_B) - 2 / (p.tau_M * p.tau_B)));
}

namespace detail {
// cosh(d t/2) + a sinh(d t/2)/d and its t-derivative, continuous through d = 0.
inline std::pair<cplx, cplx> jc_bracket(cplx d, double a, double t) {
    const cplx x = d * t / 2.0;
    const cplx ch = std::cosh(x);
    const cplx sh_over_d = std::abs(d) * t < 1e-6 ? cplx(t / 2) * (1.0 + x * x / 6.0) : std::sinh(x) / d;
    const cplx sh = std::sinh(x);
    const cplx val = ch + a * sh_over_d;
    const cplx der = d * d * sh_over_d / 2.0 + a * ch / 2.0;
    return {val, der};
}
}  // namespace detail

// c1(t) = c1(0) e^{-t/(2 tau_B)} [cosh(t delta/2) + sinh(t delta/2)/(tau_B delta)]
inline cplx jc_c1(const JCParams& p, double t, cplx c10 = 1.0) {
    p.validate();
    if (t < 0) throw domain_error("jc_c1: t must be non-negative");
    const auto [v, dv] = detail::jc_bracket(jc_delta(p), 1 / p.tau_B, t);
    (void)dv;
    return c10 * std::exp(-t / (2 * p.tau_B)) * v;
}

inline cplx jc_c1_dot(const JCParams& p, double t, cplx c10 = 1.0) {
    p.validate();
    const auto [v, dv] = detail::jc_bracket(jc_delta(p), 1 / p.tau_B, t);
    const double e = std::exp(-t / (2 * p.tau_B));
    return c10 * e * (dv - v / (2 * p.tau_B));
}

// Isolated single-mode cavity from |1>: c1 = c1(0) cos(|g| t).
inline cplx jc_isolated_c1(double g_abs, double t, cplx c10 = 1.0) { return c10 * std::cos(g_abs * t); }

// Memory-kernel equation differentiated once: c'' + c'/tau_B + c/(2 tau_M tau_B) = 0, c'(0) = 0; RK4.
inline std::vector<cplx> jc_c1_ode(const JCParams& p, const std::vector<double>& times, cplx c10 = 1.0, double dt = 0) {
    p.validate();
    if (dt <= 0) dt = 1e-3 * std::min(p.tau_B, p.tau_M);
    const double k1c = 1 / p.tau_B, k0c = 1 / (2 * p.tau_M * p.tau_B);
    auto f = [&](cplx c, cplx v) { return std::pair<cplx, cplx>{v, -k1c * v - k0c * c}; };
    std::vector<cplx> out;
    out.reserve(times.size());
    cplx c = c10, v = 0;
    double t = 0;
    for (double target : times) {
        if (target < t) throw domain_error("jc_c1_ode: times must be non-decreasing and non-negative");
        while (t < target) {
            const double h = std::min(dt, target - t);
            const auto [a1, b1] = f(c, v);
            const auto [a2, b2] = f(c + 0.5 * h * a1, v + 0.5 * h * b1);
            const auto [a3, b3] = f(c + 0.5 * h * a2, v + 0.5 * h * b2);
            const auto [a4, b4] = f(c + h * a3, v + h * b3);
            c += h / 6 * (a1 + 2.0 * a2 + 2.0 * a3 + a4);
            v += h / 6 * (b1 + 2.0 * b2 + 2.0 * b3 + b4);
            t = target - t < dt ? target : t + h;
        }
        out.push_back(c);
    }
    return out;
}

// Zeros of c1 on (0, t_max]: sign changes of Re and Im on a fine grid refined by Brent.
inline std::vector<double> jc_c1_zeros(const JCParams& p, double t_max) {
    p.validate();
    std::vector<double> zeros;
    const int n = std::max(2000, static_cast<int>(std::ceil(200 * t_max / p.tau_B)));
    const double h = t_max / n;
    for (int part = 0; part < 2; ++part) {
        auto g = [&](double t) {
            const cplx c = jc_c1(p, t);
            return part == 0 ? c.real() : c.imag();
        };
        double a = h, ga = g(a);
        for (int i = 2; i <= n; ++i) {
            const double b = i * h, gb = g(b);
            if (ga == 0) {
                if (std::abs(jc_c1(p, a)) < 1e-12) zeros.push_back(a);
            } else if (ga * gb < 0) {
                const double r = brent_root(g, a, b, 1e-15);
                if (std::abs(jc_c1(p, r)) < 1e-9) zeros.push_back(r);
            }
            a = b;
            ga = gb;
        }
    }
    std::sort(zeros.begin(), zeros.end());
    zeros.erase(std::unique(zeros.begin(), zeros.end(), [](double a, double b) { return std::abs(a - b) < 1e-9; }), zeros.end());
    return zeros;
}

inline double jc_first_c1_zero(const JCParams& p, double t_max) {
    const auto z = jc_c1_zeros(p, t_max);
    return z.empty() ? std::numeric_limits<double>::infinity() : z.front();
}

// Strong-coupling zeros in closed form: t_n = (2/|delta|)(pi - arctan(|delta| tau_B) + n pi).
inline double jc_c1_zero_closed_form(const JCParams& p, int n = 0) {
    if (p.weak()) return std::numeric_limits<double>::infinity();
    const double d = std::abs(jc_delta(p));
    return 2 / d * (pi - std::atan(d * p.tau_B) + n * pi);
}

struct JcRates {
    double gamma;
    double S;
};

// gamma = -2 Re(c1'/c1), S = -2 Im(c1'/c1); throws at a zero of c1.
inline JcRates jc_exact_rates(const JCParams& p, double t) {
    const cplx c = jc_c1(p, t), cd = jc_c1_dot(p, t);
    if (std::abs(c) < 1e-12) throw rate_divergence_error("jc_exact_rates: c1 vanishes, time-local rate diverges", t);
    const cplx r = cd / c;
    return {-2 * r.real(), -2 * r.imag()};
}

// Closed-form rate: (2/(tau_M tau_B)) sinh(x) / (delta cosh(x) + sinh(x)/tau_B), x = t delta/2
// (sin/cos with |delta| in strong coupling).
inline double jc_gamma_closed_form(const JCParams& p, double t) {
    const double k = 2 / (p.tau_M * p.tau_B);
    const cplx d = jc_delta(p);
    if (p.weak()) {
        const double dr = d.real(), x = t * dr / 2;
        if (dr * t < 1e-6) return k * (t / 2) / (1 + t / (2 * p.tau_B));
        return k * std::sinh(x) / (dr * std::cosh(x) + std::sinh(x) / p.tau_B);
    }
    const double dm = std::abs(d), x = t * dm / 2;
    return k * std::sin(x) / (dm * std::cos(x) + std::sin(x) / p.tau_B);
}

// Rates on a grid with +-inf sentinels within `window` of a zero of c1.
inline std::vector<JcRates> jc_rate_series(const JCParams& p, const std::vector<double>& times, double window = 1e-9) {
    double t_max = 0;
    for (double t : times) t_max = std::max(t_max, t);
    const auto zeros = t_max > 0 ? jc_c1_zeros(p, t_max + window) : std::vector<double>{};
    std::vector<JcRates> out;
    out.reserve(times.size());
    const double inf = std::numeric_limits<double>::infinity();
    for (double t : times) {
        bool near = false;
        double side = 1;
        for (double z : zeros)
            if (std::abs(t - z) <= window) {
                near = true;
                side = t < z ? 1 : -1;
            }
        if (near) {
            out.push_back({side * inf, 0.0});
            continue;
        }
        try {
            out.push_back(jc_exact_rates(p, t));
        } catch (const rate_divergence_error&) {
            out.push_back({inf, 0.0});
        }
    }
    return out;
}

enum class JcScheme { exact, markov, tcl2, tcl4, nz2 };

// printed: gamma_4 = (1/tau_M)(1 - e^{-u} + (tau_M/tau_B)(sinh u - u) e^{-u}), u = t/tau_B,
// whose limit is 1/tau_M + 1/(2 tau_B). series: the alpha^4 term of the exact rate,
// (tau_B/tau_M^2)(sinh u - u) e^{-u}, limit 1/tau_M + tau_B/(2 tau_M^2).
enum class Tcl4Form { printed, series };

inline double jc_gamma2(const JCParams& p, double t) { return (1 - std::exp(-t / p.tau_B)) / p.tau_M; }

inline double jc_gamma4(const JCParams& p, double t, Tcl4Form form = Tcl4Form::printed) {
    const double u = t / p.tau_B;
    // (sinh u - u) e^{-u} without overflow
    const double tail = 0.5 * (1 - std::exp(-2 * u)) - u * std::exp(-u);
    const double coef = form == Tcl4Form::printed ? 1 / p.tau_B : p.tau_B / (p.tau_M * p.tau_M);
    return jc_gamma2(p, t) + coef * tail;
}

inline double jc_gamma4_limit(const JCParams& p, Tcl4Form form = Tcl4Form::printed) {
    return 1 / p.tau_M + (form == Tcl4Form::printed ? 1 / (2 * p.tau_B) : p.tau_B / (2 * p.tau_M * p.tau_M));
}

// NZ2 population: e^{-t/(2 tau_B)} [cosh(t d'/2) + sinh(t d'/2)/(tau_B d')], d' = sqrt(1/tau_B^2 - 4/(tau_M tau_B)).
// It is the solution of rho'' + rho'/tau_B + rho/(tau_M tau_B) = 0 and is not a square, so it can go negative.
inline double jc_nz2_population(const JCParams& p, double t) {
    const cplx dp = std::sqrt(cplx(1 / (p.tau_B * p.tau_B) - 4 / (p.tau_M * p.tau_B)));
    const auto [v, dv] = detail::jc_bracket(dp, 1 / p.tau_B, t);
    (void)dv;
    return std::exp(-t / (2 * p.tau_B)) * v.real();
}

// rho11(t) for rho11(0) = rho11_0.
inline double jc_approx(const JCParams& p, double t, JcScheme scheme, double rho11_0 = 1.0, Tcl4Form form = Tcl4Form::printed) {
    p.validate();
    if (t < 0) throw domain_error("jc_approx: t must be non-negative");
    const double u = t / p.tau_B;
    const double int_g2 = (t - p.tau_B * (-std::expm1(-u))) / p.tau_M;
    switch (scheme) {
        case JcScheme::exact:
            return rho11_0 * std::norm(jc_c1(p, t));
        case JcScheme::markov:
            return rho11_0 * std::exp(-t / p.tau_M);
        case JcScheme::tcl2:
            return rho11_0 * std::exp(-int_g2);
        case JcScheme::tcl4: {
            // int_0^u (sinh s - s) e^{-s} ds
            const double i4 = u / 2 - 0.25 * (-std::expm1(-2 * u)) - (1 - (1 + u) * std::exp(-u));
            const double coef = form == Tcl4Form::printed ? 1.0 : p.tau_B * p.tau_B / (p.tau_M * p.tau_M);
            return rho11_0 * std::exp(-int_g2 - coef * i4);
        }
        case JcScheme::nz2:
            return rho11_0 * jc_nz2_population(p, t);
    }
    throw domain_error("jc_approx: unknown scheme");
}

inline const char* jc_scheme_name(JcScheme s) {
    switch (s) {
        case JcScheme::exact: return "exact";
        case JcScheme::markov: return "markov";
        case JcScheme::tcl2: return "tcl2";
        case JcScheme::tcl4: return "tcl4";
        case JcScheme::nz2: return "nz2";
    }
    return "?";
}

// First time the NZ2 population becomes negative on (0, t_max], or inf.
inline double jc_nz2_first_negative(const JCParams& p, double t_max) {
    const int n = std::max(2000, static_cast<int>(std::ceil(200 * t_max / p.tau_B)));
    const double h = t_max / n;
    auto f = [&](double t) { return jc_nz2_population(p, t); };
    double a = 0, fa = 1;
    for (int i = 1; i <= n; ++i) {
        const double b = i * h, fb = f(b);
        if (fb < 0) return fa > 0 ? brent_root(f, a, b, 1e-15) : b;
        a = b;
        fa = fb;
    }
    return std::numeric_limits<double>::infinity();
}

// Integrates rho11' = -gamma(t) rho11 with a supplied time-local rate (RK4, fixed step).
inline double jc_rate_equation(const std::function<double(double)>& gamma, double rho11_0, double t, double dt = 1e-3) {
    if (t < 0) throw domain_error("jc_rate_equation: t must be non-negative");
    const int n = std::max(1, static_cast<int>(std::ceil(t / dt)));
    const double h = t / n;
    double r = rho11_0;
    for (int i = 0; i < n; ++i) {
        const double s = i * h;
        const double k1 = -gamma(s) * r;
        const double k2 = -gamma(s + h / 2) * (r + h / 2 * k1);
        const double k3 = -gamma(s + h / 2) * (r + h / 2 * k2);
        const double k4 = -gamma(s + h) * (r + h * k3);
        r += h / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
    }
    return r;
}

// ---- discretized-mode cross-check --------------------------------------------------------
// One excitation shared between the qubit and modes with couplings g_k and detunings
// d_k = w_0 - w_k (interaction picture): c1' = -i sum g_k c_k e^{i d_k t}, c_k' = -i g_k* c1 e^{-i d_k t}.

struct DiscreteJCResult {
    std::vector<double> times;
    std::vector<cplx> c1;
    std::vector<double> norm;  // |c1|^2 + sum |c_k|^2
};

inline DiscreteJCResult jc_discrete_modes(const std::vector<cplx>& g, const std::vector<double>& detuning, cplx c10,
                                          const std::vector<double>& times, double dt) {
    if (g.size() != detuning.size()) throw shape_error("jc_discrete_modes: size mismatch");
    if (!(dt > 0)) throw domain_error("jc_discrete_modes: dt must be positive");
    const std::size_t n = g.size();
    // rotating frame of the modes removes the explicit time dependence: b_k = c_k e^{i d_k t}
    // gives c1' = -i sum g_k b_k, b_k' = i d_k b_k - i g_k* c1 (constant coefficients).
    ComplexVector x = ComplexVector::Zero(n + 1);
    x(0) = c10;
    auto rhs_fn = [&](const ComplexVector& y) {
        ComplexVector out(n + 1);
        cplx s = 0;
        for (std::size_t k = 0; k < n; ++k) s += g[k] * y(k + 1);
        out(0) = -I_unit * s;
        for (std::size_t k = 0; k < n; ++k) out(k + 1) = I_unit * detuning[k] * y(k + 1) - I_unit * std::conj(g[k]) * y(0);
        return out;
    };
    DiscreteJCResult res;
    double t = 0;
    for (double target : times) {
        if (target < t) throw domain_error("jc_discrete_modes: times must be non-decreasing");
        while (t < target) {
            const double h = std::min(dt, target - t);
            const ComplexVector k1 = rhs_fn(x);
            const ComplexVector k2 = rhs_fn(x + 0.5 * h * k1);
            const ComplexVector k3 = rhs_fn(x + 0.5 * h * k2);
            const ComplexVector k4 = rhs_fn(x + h * k3);
            x += h / 6 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            t = target - t <= dt ? target : t + h;
        }
        res.times.push_back(target);
        res.c1.push_back(x(0));
        res.norm.push_back(x.squaredNorm());
    }
    return res;
}

// Lorentzian discretization reproducing f(t) = e^{-|t|/tau_B}/(2 tau_M tau_B) on |t| << 2 pi / spacing:
// |g_k|^2 = J(d_k) dd with J(d) = (1/(2 pi tau_M tau_B^2)) / (d^2 + 1/tau_B^2).
inline std::pair<std::vector<cplx>, std::vector<double>> jc_lorentzian_modes(const JCParams& p, int n_modes, double half_width) {
    p.validate();
    if (n_modes < 2 || !(half_width > 0)) throw domain_error("jc_lorentzian_modes: need n_modes >= 2 and half_width > 0");
    std::vector<cplx> g(n_modes);
    std::vector<double> d(n_modes);
    const double dd = 2 * half_width / n_modes;
    const double lam = 1 / p.tau_B;
    for (int k = 0; k < n_modes; ++k) {
        d[k] = -half_width + (k + 0.5) * dd;
        const double j = lam * lam / (2 * pi * p.tau_M) / (d[k] * d[k] + lam * lam);
        g[k] = std::sqrt(j * dd);
    }
    return {g, d};
}

}  // namespace openq
