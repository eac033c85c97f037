#ifndef OPO_NG_PERTURBATION_HPP
#define OPO_NG_PERTURBATION_HPP

#include <string>
#include <variant>
#include <vector>

#include "cmat2.hpp"
#include "errors.hpp"
#include "linear.hpp"
#include "model.hpp"
#include "quadrature.hpp"

namespace opo_ng {

// First-order coupling matrix B^(1)(w) of one classical or pump-noise channel, per unit weight.
// The detuning entries carry the sign that follows from the pump drive -i g dnu (1 + alpha0).
inline CMat2 b1_channel(NoiseKind kind, cplx w, const OpoParams& p) {
    const cplx c = p.coupling(), cc = std::conj(c);
    const cplx d0 = 1.0 / delta_pump(w, p), d0d = 1.0 / delta_pump_dag(w, p);
    switch (kind) {
        case NoiseKind::ChiSignal:
            throw Error(Errc::UnsupportedChannel, "chi_signal is the linear source, not a B^(1) channel");
        case NoiseKind::ChiPump: return CMat2::antidiag(c * d0, 0.0);
        case NoiseKind::PumpAmplitude:
            return CMat2::antidiag(c * p.kappa0_hat * d0, cc * std::conj(p.kappa0_hat) * d0d);
        case NoiseKind::PumpPhase: return I * CMat2{0.5, c * d0, -cc * d0d, -0.5};
        case NoiseKind::CavityDetuning: return I * CMat2{-1.0, -c * d0, cc * d0d, 1.0};
        case NoiseKind::CrystalTemperature: return CMat2::antidiag(c, cc);
    }
    throw Error(Errc::UnsupportedChannel, "unknown channel");
}

inline CMat2 b1_channel(NoiseKind kind, double w, const OpoParams& p) { return b1_channel(kind, cplx(w, 0.0), p); }

// Matrix used by the moment engines. The pump quantum noise is real in the surrogate phase space and
// reaches alpha0 and alpha0^dagger alike, so its coupling is the symmetrized printed matrix.
inline CMat2 channel_coupling(NoiseKind kind, cplx w, const OpoParams& p) {
    if (kind == NoiseKind::ChiPump) {
        const cplx c = p.coupling();
        return CMat2::antidiag(c / delta_pump(w, p), std::conj(c) / delta_pump_dag(w, p));
    }
    return b1_channel(kind, w, p);
}

// Frequency-independent part of channel_coupling (the piece that survives as w -> infinity).
inline CMat2 channel_coupling_direct(NoiseKind kind, const OpoParams& p) {
    switch (kind) {
        case NoiseKind::PumpPhase: return CMat2::diag(0.5 * I, -0.5 * I);
        case NoiseKind::CavityDetuning: return CMat2::diag(-I, I);
        case NoiseKind::CrystalTemperature: return b1_channel(kind, 0.0, p);
        default: return {};
    }
}

enum class B2Variant { AsPrinted, SquaredPhaseWeight };

inline double weight_of(const std::vector<NoiseChannel>& channels, NoiseKind k) {
    for (const auto& c : channels)
        if (c.kind == k) return c.weight;
    return 0.0;
}

// Mean second-order pump shift B^(2) = E <alpha0^(2)>, tuned.
inline double b2_mean(const OpoParams& p, const std::vector<NoiseChannel>& channels,
                      B2Variant variant = B2Variant::AsPrinted) {
    require_tuned(p, "b2_mean");
    const double e = p.e_mag, k0 = p.kappa0_hat.real();
    const double gchi = weight_of(channels, NoiseKind::ChiPump);
    const double gphi = weight_of(channels, NoiseKind::PumpPhase);
    const double gnu = weight_of(channels, NoiseKind::CavityDetuning);
    const double phase_w = variant == B2Variant::AsPrinted ? gphi : gphi * gphi;
    return -gchi * gchi / (2.0 * (1.0 - e * e)) - phase_w * e / k0 - gnu * gnu * e / (k0 * k0);
}

// Memory kernel delta B^(2)(dtau) = -E^2 kappa0 e^{-kappa0 dtau} sigma_{a a^dagger}(dtau).
inline double delta_b2(double dtau, const OpoParams& p) {
    require_tuned(p, "delta_b2");
    if (p.e_mag == 0.0) return 0.0;
    const double k0 = p.kappa0_hat.real();
    return -p.e_mag * p.e_mag * k0 * std::exp(-k0 * dtau) * sigma11_time(dtau, p).aad.real();
}

// Weight of the delta(dtau) part of B^(1,1) carried by white channels with a direct coupling.
inline CMat2 b11_impulse(const OpoParams& p, const std::vector<NoiseChannel>& channels) {
    require_tuned(p, "b11_impulse");
    CMat2 r{};
    for (const auto& c : channels) {
        if (c.kind == NoiseKind::ChiSignal || !std::holds_alternative<White>(c.spectrum)) continue;
        const CMat2 b = channel_coupling_direct(c.kind, p);
        r += c.weight * c.weight * (b * b);
    }
    return r;
}

// Regular part of B^(1,1)(dtau) = sum g^2 <B(t) G(dtau) B(t - dtau)>, from the inverse transform
// (1/2pi) int S(w) e^{-i w dtau} B(w) G(dtau) B(-w) dw.
inline CMat2 b11_kernel(double dtau, const OpoParams& p, const std::vector<NoiseChannel>& channels) {
    require_tuned(p, "b11_kernel");
    if (dtau < 0.0) throw Error(Errc::InvalidArgument, "b11_kernel needs dtau >= 0");
    const CMat2 g = green_time(dtau, p);
    const double k0 = p.kappa0_hat.real();
    CMat2 total{};
    for (const auto& c : channels) {
        if (c.kind == NoiseKind::ChiSignal || c.weight == 0.0) continue;
        const double g2 = c.weight * c.weight;
        if (std::holds_alternative<DeltaLike>(c.spectrum)) {
            const CMat2 b = channel_coupling(c.kind, 0.0, p);
            total += g2 * (b * g * b);
            continue;
        }
        if (std::holds_alternative<White>(c.spectrum)) {
            // B(w) = Bc + P/(kappa0 - i w); white n gives <n_p(t) n(t')> = e^{-k0 dtau} and
            // <n_p(t) n_p(t')> = e^{-k0 dtau}/(2 k0) for the pump-filtered path n_p.
            const CMat2 bc = channel_coupling_direct(c.kind, p);
            const CMat2 pm = (channel_coupling(c.kind, 0.0, p) - bc) * k0;
            total += g2 * std::exp(-k0 * dtau) * (pm * g * bc + pm * g * pm / (2.0 * k0));
            continue;
        }
        const double wm = std::get<UniformBand>(c.spectrum).w_max;
        auto f = [&](double w) {
            const CMat2 m = channel_coupling(c.kind, w, p) * g * channel_coupling(c.kind, -w, p);
            return m * (spectral_density(c.spectrum, w) / (2.0 * pi) * std::polar(1.0, -w * dtau));
        };
        total += g2 * quad::integrate(f, -wm, wm, {1e-10});
    }
    return total;
}

struct SourceHierarchy {
    double first;   // <s1 s1> ~ g_chi^2
    double second;  // <s2 s2> ~ g_chi^2 g^2 / (1-E)
    double third;   // <s3 s3> ~ g_chi^2 g^4 / (1-E)^2
};

inline SourceHierarchy source_hierarchy(const OpoParams& p, const std::vector<NoiseChannel>& channels) {
    double g2 = 0.0;
    for (const auto& c : channels)
        if (c.kind != NoiseKind::ChiSignal && c.kind != NoiseKind::ChiPump) g2 = std::max(g2, c.weight * c.weight);
    const double x = g2 / (1.0 - p.e_mag), s1 = p.g_chi * p.g_chi;
    return {s1, s1 * x, s1 * x * x};
}

}  // namespace opo_ng

#endif
