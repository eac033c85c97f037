#ifndef OPO_NG_LINEAR_HPP
#define OPO_NG_LINEAR_HPP

#include <array>
#include <cmath>

#include "cmat2.hpp"
#include "errors.hpp"
#include "model.hpp"
#include "quadrature.hpp"

// Linearized response of the degenerate OPO below threshold.
// Fourier convention: f(w) = int f(t) e^{+i w t} dt, so causal responses are analytic in the upper half plane.

namespace opo_ng {

struct CharFrequencies {
    cplx omega_plus;
    cplx omega_minus;
};

enum class Mode { Signal, Pump };

// Delta(w) = kappa_hat - i w and its parameter-conjugated partner kappa_hat^* - i w.
inline cplx delta_signal(cplx w, const OpoParams& p) { return p.kappa_hat() - I * w; }
inline cplx delta_signal_dag(cplx w, const OpoParams& p) { return std::conj(p.kappa_hat()) - I * w; }
inline cplx delta_pump(cplx w, const OpoParams& p) { return p.kappa0_hat - I * w; }
inline cplx delta_pump_dag(cplx w, const OpoParams& p) { return std::conj(p.kappa0_hat) - I * w; }

inline cplx d_tilde(cplx w, const OpoParams& p) {
    return delta_signal(w, p) * delta_signal_dag(w, p) - p.e_mag * p.e_mag;
}

inline CharFrequencies char_freqs(const OpoParams& p) {
    const double s = std::sin(p.psi);
    const cplx root = std::sqrt(cplx(p.e_mag * p.e_mag - s * s, 0.0));
    const CharFrequencies f{I * (std::cos(p.psi) - root), I * (std::cos(p.psi) + root)};
    for (double w : {-2.3, -0.7, 0.0, 0.4, 1.9}) {
        const cplx lhs = d_tilde(w, p);
        const cplx rhs = -(w + f.omega_plus) * (w + f.omega_minus);
        if (std::abs(lhs - rhs) > 1e-9 * (1.0 + std::abs(lhs)))
            throw std::logic_error("char_freqs: D(w) factorization self-check failed");
    }
    return f;
}

// D(w) G(w): the adjugate of the linear system matrix, entire in w.
inline CMat2 green_numerator(cplx w, const OpoParams& p) {
    const cplx c = p.coupling();
    return {delta_signal_dag(w, p), c, std::conj(c), delta_signal(w, p)};
}

inline CMat2 green_freq(Mode mode, cplx w, const OpoParams& p) {
    if (mode == Mode::Pump) return CMat2::diag(1.0 / delta_pump(w, p), 1.0 / delta_pump_dag(w, p));
    return green_numerator(w, p) / d_tilde(w, p);
}

inline CMat2 green_freq(Mode mode, double w, const OpoParams& p) { return green_freq(mode, cplx(w, 0.0), p); }

// Closed form for the tuned cavity; causal, identity at tau = 0+.
inline CMat2 green_time(double tau, const OpoParams& p) {
    require_tuned(p, "green_time");
    if (tau < 0.0) return {};
    const double d = std::exp(-tau);
    const double c = d * std::cosh(p.e_mag * tau), s = d * std::sinh(p.e_mag * tau);
    return {c, s, s, c};
}

// Inverse transform of green_freq for any parameters. The 1/(1 - i w) tail is split off and
// restored analytically so the remaining integrand decays like 1/w^2.
inline CMat2 green_time_numeric(double tau, const OpoParams& p, const quad::Tolerance& tol = {1e-9}) {
    auto f = [&](double w) { return green_freq(Mode::Signal, w, p) - CMat2::identity() / (1.0 - I * w); };
    CMat2 r = quad::inverse_fourier(f, tau, {-10.0, -1.0, 0.0, 1.0, 10.0}, tol);
    if (tau >= 0.0) r += CMat2::identity() * std::exp(-tau);
    return r;
}

// Diffusion of the first-order sources in the independent-conjugate phase space.
inline CMat2 source_diffusion(const OpoParams& p) {
    if (p.e_mag == 0.0) throw Error(Errc::ZeroPump, "time-normal spectrum needs e_mag > 0");
    const double th = p.coupling_phase();
    return CMat2::diag(std::polar(1.0, -th), std::polar(1.0, th)) * (2.0 / p.e_mag);
}

// (w^2 - w+^2)(w^2 - w-^2) = D(w) D(-w)
inline cplx spectrum_denominator(cplx w, const OpoParams& p) { return d_tilde(w, p) * d_tilde(-w, p); }

// Entire numerator N(w) of the correlation spectrum S(w) = N(w) / den(w).
inline CMat2 spectrum_numerator(cplx w, const OpoParams& p) {
    return green_numerator(w, p) * source_diffusion(p) * transpose(green_numerator(-w, p));
}

// :sigma^(1,1):(w) = int <alpha(t) alpha^T(0)> e^{i w t} dt
inline CMat2 correlation_spectrum(cplx w, const OpoParams& p) {
    return spectrum_numerator(w, p) / spectrum_denominator(w, p);
}

// Argument convention of the appendix formula: returns :sigma^(1,1):(-w).
inline CMat2 sigma11_tn(double w, const OpoParams& p) { return correlation_spectrum(-w, p); }
inline CMat2 sigma11_flip(double w, const OpoParams& p) { return sigma11_tn(-w, p); }

// Tuned closed-form numerator 4[[(1+E^2+w^2)/(2E), 1], [1, (1+E^2+w^2)/(2E)]].
inline CMat2 sigma_tn_tuned(cplx w, double e) {
    const cplx d = 2.0 * (1.0 + e * e + w * w) / e;
    return {d, 4.0, 4.0, d};
}

// Equal-time-shifted correlation <alpha(t) alpha^T(0)>.
inline CMat2 sigma11_time(double tau, const OpoParams& p) {
    if (p.e_mag == 0.0) throw Error(Errc::ZeroPump, "sigma11_time needs e_mag > 0");
    if (p.tuned()) {
        const double e = p.e_mag, a = 1.0 - e, b = 1.0 + e, t = std::abs(tau);
        const double x = std::exp(-a * t) / (2.0 * a), y = std::exp(-b * t) / (2.0 * b);
        return CMat2{x + y, x - y, x - y, x + y} / e;
    }
    const auto f = char_freqs(p);
    auto pts = quad::real_line_points({f.omega_plus.imag(), f.omega_minus.imag(), 1.0, 10.0});
    pts = std::vector<double>(pts.begin() + 1, pts.end() - 1);
    return quad::inverse_fourier([&](double w) { return correlation_spectrum(w, p); }, tau, pts, {1e-10});
}

}  // namespace opo_ng

#endif
