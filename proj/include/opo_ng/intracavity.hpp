#ifndef OPO_NG_INTRACAVITY_HPP
#define OPO_NG_INTRACAVITY_HPP

#include <array>
#include <cmath>
#include <vector>

#include "cmat2.hpp"
#include "errors.hpp"
#include "linear.hpp"
#include "model.hpp"
#include "perturbation.hpp"
#include "quadrature.hpp"

namespace opo_ng {

// Closed-form nonlinear weights of the intracavity squeezed variance (balanced, tuned OPO).
inline double lambda_nl(NoiseKind kind, const OpoParams& p) {
    require_tuned(p, "lambda_nl");
    const double e = p.e_mag, k = p.kappa0_hat.real();
    const double e2 = e * e, e3 = e2 * e, om = 1.0 - e2;
    switch (kind) {
        case NoiseKind::ChiSignal:
            throw Error(Errc::UnsupportedChannel, "lambda_nl has no chi_signal entry");
        case NoiseKind::ChiPump:
            return e * (2.0 * e3 * k + 2.0 * e2 * k * (2.0 + k) + (2.0 + k) * (2.0 + k) - 2.0 * e * (-2.0 + k * (2.0 + k))) /
                   (2.0 * om * (1.0 + e) * (2.0 + k) * (2.0 + 2.0 * e + k));
        case NoiseKind::PumpPhase:
            return -(k * (2.0 + k) - e * k * (6.0 + k) + 2.0 * e3 * (8.0 + 5.0 * k) - 2.0 * e2 * (12.0 + k * (9.0 + k))) /
                   (16.0 * om * k * (2.0 + k));
        case NoiseKind::CavityDetuning:
            return -e * (e3 + 2.0 * k - e2 * (3.0 + k) - e * (6.0 + k)) / (2.0 * om * (1.0 + e) * k * k);
        case NoiseKind::CrystalTemperature:
            return (e2 * (1.0 + e) * (1.0 + e) - (2.0 + e) * (1.0 - e) * k * k) / (2.0 * om * (1.0 + e) * k * k);
        case NoiseKind::PumpAmplitude: return (2.0 + e2) / (2.0 * (1.0 + e) * (1.0 + e));
    }
    throw Error(Errc::UnsupportedChannel, "unknown channel");
}

// Ratio of the chi0 weight to the positive-P result near threshold.
inline double lambda_ppse_ratio(const OpoParams& p) {
    const double k = p.kappa0_hat.real();
    return (k + 2.0) / (3.0 * k + 2.0);
}

// Leading (1-E)^{-1} term of the chi0 weight with the ratio divided out.
inline double ppse_envelope(const OpoParams& p) {
    const double k = p.kappa0_hat.real();
    return (3.0 * k + 2.0) / (8.0 * (k + 2.0) * (1.0 - p.e_mag));
}

struct LambdaRow {
    NoiseKind kind;
    double value;
    bool diverges;
};

inline std::vector<LambdaRow> lambda_table(const OpoParams& p) {
    std::vector<LambdaRow> rows;
    for (auto k : coupling_kinds) rows.push_back({k, lambda_nl(k, p), k != NoiseKind::PumpAmplitude});
    return rows;
}

namespace detail {

// Mean pump shift per unit g^2 (quadratic reading of the phase term).
inline double b2_per_weight(NoiseKind kind, const OpoParams& p) {
    const double e = p.e_mag, k0 = p.kappa0_hat.real();
    switch (kind) {
        case NoiseKind::ChiPump: return -1.0 / (2.0 * (1.0 - e * e));
        case NoiseKind::PumpPhase: return -e / k0;
        case NoiseKind::CavityDetuning: return -e / (k0 * k0);
        default: return 0.0;
    }
}

// Fourier transform of delta_b2 with the tuned correlation in closed form.
inline cplx delta_b2_freq(double w, const OpoParams& p) {
    const double e = p.e_mag, k0 = p.kappa0_hat.real(), a = 1.0 - e, b = 1.0 + e;
    return -e * k0 * (1.0 / (2.0 * a * (k0 + a - I * w)) - 1.0 / (2.0 * b * (k0 + b - I * w)));
}

}  // namespace detail

// Quadrature evaluation of sigma^(2,2) + sigma^(3,1) + sigma^(1,3) at zero lag, per unit g^2,
// normalized by the linear squeezed variance.
inline double sigma_nl_variance(const NoiseChannel& ch, const OpoParams& p,
                                const quad::Tolerance& tol = {1e-8}) {
    require_tuned(p, "sigma_nl_variance");
    check_params(p);
    if (!(p.e_mag > 0.0)) throw Error(Errc::ZeroPump, "sigma_nl_variance needs 0 < E < 1");
    if (ch.kind == NoiseKind::ChiSignal) throw Error(Errc::UnsupportedChannel, "chi_signal has no B^(1)");

    const double e = p.e_mag, k0 = p.kappa0_hat.real();
    const auto kind = ch.kind;
    const double b2 = detail::b2_per_weight(kind, p);
    auto B = [&](double w) { return channel_coupling(kind, w, p); };
    auto G = [&](double w) { return green_freq(Mode::Signal, w, p); };
    auto S = [&](double w) { return correlation_spectrum(w, p); };

    // Inner w-averages M22(W) and K(W) for each spectrum model.
    auto inner = [&](double W, CMat2& m22, CMat2& kk) {
        if (std::holds_alternative<DeltaLike>(ch.spectrum)) {
            const CMat2 b = B(0.0);
            m22 = b * S(W) * transpose(b);
            kk = b * G(W) * b;
            return;
        }
        auto f22 = [&](double w) { return B(w) * S(W - w) * transpose(B(-w)) * (spectral_density(ch.spectrum, w) / (2.0 * pi)); };
        auto fk = [&](double w) { return B(w) * G(W - w) * B(-w) * (spectral_density(ch.spectrum, w) / (2.0 * pi)); };
        if (auto* band = std::get_if<UniformBand>(&ch.spectrum)) {
            const double wm = band->w_max;
            m22 = quad::integrate(f22, -wm, wm, tol);
            kk = quad::integrate(fk, -wm, wm, tol);
            return;
        }
        const auto pts = quad::real_line_points({W - 1.0, W + 1.0, W, k0, 1.0 - e});
        m22 = quad::integrate(f22, pts, tol);
        // The direct part of B makes fk decay like 1/w; pairing w with -w gives the symmetric
        // (midpoint) limit, which is absolutely convergent.
        auto fk_sym = [&](double w) { return fk(w) + fk(-w); };
        std::vector<double> half{0.0, std::abs(W) + 1.0, std::abs(W) + k0 + 1.0, quad::inf};
        std::sort(half.begin(), half.end());
        kk = quad::integrate(fk_sym, half, tol);
    };

    auto outer = [&](double W) {
        CMat2 m22, kk;
        inner(W, m22, kk);
        CMat2 src = kk + CMat2::swap() * b2;
        if (kind == NoiseKind::ChiPump) src += CMat2::identity() * detail::delta_b2_freq(W, p);
        const CMat2 s31 = G(W) * src * S(W);
        const CMat2 s22 = G(W) * m22 * transpose(G(-W));
        return (s22 + s31 + transpose(s31)) * (1.0 / (2.0 * pi));
    };
    const CMat2 sigma = quad::integrate(outer, quad::real_line_points({1.0 - e, 1.0 + e, k0}), tol);
    const double linear = -1.0 / (2.0 * e * (1.0 + e));
    return squeezed_part(sigma).real() / linear;
}

inline double sigma_nl_variance(NoiseKind kind, const OpoParams& p) {
    return sigma_nl_variance(NoiseChannel{kind, 1.0, default_spectrum(kind)}, p);
}

// Weighted nonlinear correction to the squeezed variance, sum g^2 lambda, relative to the linear value.
inline double nonlinear_squeezed_correction(const std::vector<NoiseChannel>& channels, const OpoParams& p) {
    double s = 0.0;
    for (const auto& c : channels)
        if (c.kind != NoiseKind::ChiSignal && c.weight != 0.0) s += c.weight * c.weight * sigma_nl_variance(c, p);
    return s;
}

}  // namespace opo_ng

#endif
