#pragma once
// One-dimensional quadrature: adaptive Simpson and adaptive Gauss-Kronrod
// (7/15), both templated on the value type so complex integrands work.

#include <array>
#include <cmath>
#include <complex>
#include <functional>
#include <limits>

#include "openq/errors.hpp"

namespace openq {

namespace detail {
inline double magnitude(double x) { return std::abs(x); }
inline double magnitude(const std::complex<double>& z) { return std::abs(z); }
inline bool finite(double x) { return std::isfinite(x); }
inline bool finite(const std::complex<double>& z) { return std::isfinite(z.real()) && std::isfinite(z.imag()); }
}  // namespace detail

struct QuadResult {
    bool converged = true;
    int evaluations = 0;
};

// Adaptive Simpson with Richardson correction. Sets info.converged = false if
// the depth cap is reached before the local tolerance is met.
template <class T, class F>
T adaptive_simpson(F&& f, double a, double b, double tol, int max_depth = 48, QuadResult* info = nullptr) {
    QuadResult local;
    QuadResult& inf = info ? *info : local;
    std::function<T(double, double, T, T, T, T, double, int)> rec = [&](double lo, double hi, T flo, T fmid, T fhi,
                                                                         T whole, double eps, int depth) -> T {
        const double mid = 0.5 * (lo + hi);
        const double lm = 0.5 * (lo + mid), rm = 0.5 * (mid + hi);
        const T flm = f(lm), frm = f(rm);
        inf.evaluations += 2;
        const T left = (mid - lo) / 6.0 * (flo + 4.0 * flm + fmid);
        const T right = (hi - mid) / 6.0 * (fmid + 4.0 * frm + fhi);
        const T delta = left + right - whole;
        if (depth <= 0) {
            if (detail::magnitude(delta) > 15.0 * eps) inf.converged = false;
            return left + right + delta / 15.0;
        }
        if (detail::magnitude(delta) <= 15.0 * eps && depth < max_depth - 3) return left + right + delta / 15.0;
        return rec(lo, mid, flo, flm, fmid, left, 0.5 * eps, depth - 1) +
               rec(mid, hi, fmid, frm, fhi, right, 0.5 * eps, depth - 1);
    };
    if (a == b) return T{};
    const T fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
    inf.evaluations += 3;
    const T whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return rec(a, b, fa, fm, fb, whole, tol, max_depth);
}

namespace detail {
// Kronrod 15-point nodes (non-negative half) and weights; Gauss 7-point weights.
inline constexpr std::array<double, 8> gk_x = {0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
                                               0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
                                               0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
                                               0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr std::array<double, 8> gk_wk = {0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
                                                0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
                                                0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
                                                0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr std::array<double, 4> gk_wg = {0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
                                                0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

template <class T, class F>
T gk15(F& f, double a, double b, double& err) {
    const double c = 0.5 * (a + b), h = 0.5 * (b - a);
    const T fc = f(c);
    T k = gk_wk[7] * fc;
    T g = gk_wg[3] * fc;
    for (int j = 0; j < 7; ++j) {
        const double dx = h * gk_x[j];
        const T f1 = f(c - dx), f2 = f(c + dx);
        k += gk_wk[j] * (f1 + f2);
        if (j % 2 == 1) g += gk_wg[j / 2] * (f1 + f2);
    }
    err = magnitude((k - g) * h);
    return k * h;
}
}  // namespace detail

// Recursive adaptive Gauss-Kronrod. Absolute tolerance abs_tol, relative rel_tol.
template <class T, class F>
T gauss_kronrod(F&& f, double a, double b, double abs_tol = 1e-12, double rel_tol = 1e-10, int max_depth = 40,
                QuadResult* info = nullptr) {
    QuadResult local;
    QuadResult& inf = info ? *info : local;
    if (a == b) return T{};
    std::function<T(double, double, double, int)> rec = [&](double lo, double hi, double tol, int depth) -> T {
        double err = 0;
        const T v = detail::gk15<T>(f, lo, hi, err);
        inf.evaluations += 15;
        if (!detail::finite(v)) {
            inf.converged = false;
            return v;
        }
        if (err <= std::max(tol, rel_tol * detail::magnitude(v)) ) return v;
        if (depth <= 0) {
            inf.converged = false;
            return v;
        }
        const double mid = 0.5 * (lo + hi);
        return rec(lo, mid, 0.5 * tol, depth - 1) + rec(mid, hi, 0.5 * tol, depth - 1);
    };
    return rec(a, b, abs_tol, max_depth);
}

// Composite fixed-panel Gauss-Kronrod (no adaptivity): n equal panels.
template <class T, class F>
T composite_gk(F&& f, double a, double b, int panels) {
    T s{};
    const double h = (b - a) / panels;
    for (int p = 0; p < panels; ++p) {
        double err;
        s += detail::gk15<T>(f, a + p * h, a + (p + 1) * h, err);
    }
    return s;
}

}  // namespace openq
