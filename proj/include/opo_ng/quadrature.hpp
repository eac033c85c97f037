#ifndef OPO_NG_QUADRATURE_HPP
#define OPO_NG_QUADRATURE_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <type_traits>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <gsl/gsl_errno.h>
#include <gsl/gsl_integration.h>

#include "cmat2.hpp"
#include "errors.hpp"

namespace opo_ng::quad {

inline constexpr double inf = std::numeric_limits<double>::infinity();

struct Tolerance {
    double rel = 1e-10;
    double abs = 0.0;
    unsigned max_depth = 22;
};

namespace detail {

// Boost's Gauss-Kronrod wants value types constructible from 0 with an abs() norm.
struct MatAcc {
    CMat2 m{};
    MatAcc() = default;
    MatAcc(int) {}
    MatAcc(const CMat2& x) : m(x) {}
    friend MatAcc operator+(MatAcc x, const MatAcc& y) { return x.m + y.m; }
    friend MatAcc operator-(MatAcc x, const MatAcc& y) { return x.m - y.m; }
    friend MatAcc operator-(const MatAcc& x) { return -x.m; }
    friend MatAcc operator*(MatAcc x, double s) { return x.m * s; }
    friend MatAcc operator*(double s, MatAcc x) { return x.m * s; }
    MatAcc& operator+=(const MatAcc& y) { m += y.m; return *this; }
    friend double abs(const MatAcc& x) { return opo_ng::abs(x.m); }
};

template <class T>
double norm_of(const T& x) {
    using std::abs;
    return static_cast<double>(abs(x));
}

template <class T, class F>
T integrate_piece(F&& f, double a, double b, const Tolerance& tol) {
    using GK = boost::math::quadrature::gauss_kronrod<double, 31>;
    double err = 0.0, l1 = 0.0;
    T r{};
    if constexpr (std::is_same_v<T, CMat2>) {
        auto g = [&](double x) { return MatAcc(f(x)); };
        r = GK::integrate(g, a, b, tol.max_depth, tol.rel, &err, &l1).m;
    } else {
        r = GK::integrate(f, a, b, tol.max_depth, tol.rel, &err, &l1);
    }
    const double scale = std::max(norm_of(r), 1e-3 * l1);
    if (!std::isfinite(norm_of(r)) || err > std::max(50.0 * tol.rel * scale, tol.abs))
        throw Error(Errc::QuadratureFailure, "adaptive quadrature on [" + std::to_string(a) + ", " +
                                                 std::to_string(b) + "] left error " + std::to_string(err));
    return r;
}

}  // namespace detail

// Adaptive Gauss-Kronrod over consecutive breakpoints; end points may be infinite.
template <class F>
auto integrate(F&& f, const std::vector<double>& points, const Tolerance& tol = {}) {
    using T = std::decay_t<decltype(f(0.0))>;
    T total{};
    for (std::size_t i = 0; i + 1 < points.size(); ++i)
        total += detail::integrate_piece<T>(f, points[i], points[i + 1], tol);
    return total;
}

template <class F>
auto integrate(F&& f, double a, double b, const Tolerance& tol = {}) {
    return integrate(std::forward<F>(f), std::vector<double>{a, b}, tol);
}

namespace detail {

struct GslWorkspace {
    gsl_integration_workspace* w;
    explicit GslWorkspace(std::size_t n) : w(gsl_integration_workspace_alloc(n)) {}
    ~GslWorkspace() { gsl_integration_workspace_free(w); }
    GslWorkspace(const GslWorkspace&) = delete;
    GslWorkspace& operator=(const GslWorkspace&) = delete;
};

// int_a^inf g(w) cos(w t) or sin(w t) dw for a slowly decaying g, by QAWF.
template <class G>
double oscillatory_tail(const G& g, double a, double t, bool sine, const Tolerance& tol) {
    constexpr std::size_t limit = 1000;
    GslWorkspace ws(limit), cycles(limit);
    gsl_integration_qawo_table* table =
        gsl_integration_qawo_table_alloc(t, 1.0, sine ? GSL_INTEG_SINE : GSL_INTEG_COSINE, 50);
    gsl_function fn{[](double x, void* q) { return (*static_cast<const G*>(q))(x); }, const_cast<G*>(&g)};
    double r = 0.0, err = 0.0;
    gsl_error_handler_t* old = gsl_set_error_handler_off();
    const int status = gsl_integration_qawf(&fn, a, std::max(tol.abs, 1e-14), limit, ws.w, cycles.w, table, &r, &err);
    gsl_set_error_handler(old);
    gsl_integration_qawo_table_free(table);
    if (status != GSL_SUCCESS && !(err <= 1e-12))
        throw Error(Errc::QuadratureFailure, "oscillatory tail from " + std::to_string(a) + " left error " + std::to_string(err));
    return r;
}

}  // namespace detail

// (1/2pi) int f(w) e^{-i w t} dw over the real line for a matrix-valued f that decays at least like 1/w.
// The finite part uses the given breakpoints (first and last must be -cut and cut); the tails are
// folded onto [cut, inf) and handed to an oscillatory rule.
template <class F>
CMat2 inverse_fourier(F&& f, double t, const std::vector<double>& points, const Tolerance& tol = {}) {
    CMat2 mid = integrate([&](double w) { return f(w) * std::polar(1.0, -w * t); }, points, tol);
    const double cut = points.back();
    CMat2 tail{};
    if (t == 0.0) {
        tail = integrate([&](double w) { return f(w) + f(-w); }, cut, inf, tol);
    } else {
        cplx* out[4] = {&tail.aa, &tail.aad, &tail.ada, &tail.adad};
        auto pick = [](const CMat2& m, int i) { return i == 0 ? m.aa : i == 1 ? m.aad : i == 2 ? m.ada : m.adad; };
        for (int i = 0; i < 4; ++i) {
            // f(w) e^{-iwt} + f(-w) e^{iwt} = (f(w) + f(-w)) cos(wt) - i (f(w) - f(-w)) sin(wt)
            auto even_re = [&](double w) { return (pick(f(w), i) + pick(f(-w), i)).real(); };
            auto even_im = [&](double w) { return (pick(f(w), i) + pick(f(-w), i)).imag(); };
            auto odd_re = [&](double w) { return (pick(f(w), i) - pick(f(-w), i)).real(); };
            auto odd_im = [&](double w) { return (pick(f(w), i) - pick(f(-w), i)).imag(); };
            const cplx c(detail::oscillatory_tail(even_re, cut, t, false, tol), detail::oscillatory_tail(even_im, cut, t, false, tol));
            const cplx s(detail::oscillatory_tail(odd_re, cut, t, true, tol), detail::oscillatory_tail(odd_im, cut, t, true, tol));
            *out[i] = c - I * s;
        }
    }
    return (mid + tail) / (2.0 * pi);
}

// Breakpoints for a real-line integrand whose features sit at the given scales.
inline std::vector<double> real_line_points(std::vector<double> scales) {
    std::vector<double> pts{-inf, inf};
    for (double s : scales) {
        s = std::abs(s);
        if (s > 0.0 && std::isfinite(s)) {
            pts.push_back(s);
            pts.push_back(-s);
        }
    }
    pts.push_back(0.0);
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    return pts;
}

}  // namespace opo_ng::quad

#endif
