#ifndef OPO_NG_MODEL_HPP
#define OPO_NG_MODEL_HPP

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "cmat2.hpp"
#include "errors.hpp"

namespace opo_ng {

// Normalized device parameters. Rates are in units of the signal decay rate kappa.
struct OpoParams {
    cplx kappa0_hat{2.0, 0.0};
    double e_mag = 0.5;
    double psi = 0.0;
    double psi0 = 0.0;
    double gamma1_hat = 1.0;
    double g_chi = 1e-6;

    bool tuned() const { return psi == 0.0 && psi0 == 0.0 && kappa0_hat.imag() == 0.0; }
    // Signal damping e^{-i psi}.
    cplx kappa_hat() const { return std::polar(1.0, -psi); }
    // Coupling phase theta = psi - psi0/2.
    double coupling_phase() const { return psi - 0.5 * psi0; }
    // Effective coupling e^{-i theta}|E| in the alpha equation.
    cplx coupling() const { return std::polar(e_mag, -coupling_phase()); }
};

inline void check_params(const OpoParams& p) {
    if (!(p.e_mag >= 0.0))
        throw Error(Errc::InvalidArgument, "e_mag must be non-negative");
    if (p.e_mag >= 1.0)
        throw Error(Errc::AboveThreshold, "e_mag = " + std::to_string(p.e_mag) + " is not below threshold");
    if (!(p.kappa0_hat.real() > 0.0) || !(p.gamma1_hat > 0.0))
        throw Error(Errc::NonPositiveRate, "kappa0_hat and gamma1_hat need positive real parts");
    if (!(p.g_chi > 0.0))
        throw Error(Errc::InvalidArgument, "g_chi must be positive");
}

inline void require_tuned(const OpoParams& p, std::string_view who) {
    if (!p.tuned())
        throw Error(Errc::NotTuned, std::string(who) + " needs psi = psi0 = 0 and a real kappa0_hat");
}

enum class NoiseKind {
    ChiSignal,
    ChiPump,
    PumpAmplitude,
    PumpPhase,
    CavityDetuning,
    CrystalTemperature,
};

inline constexpr NoiseKind all_noise_kinds[] = {
    NoiseKind::ChiSignal,      NoiseKind::ChiPump,          NoiseKind::PumpAmplitude,
    NoiseKind::PumpPhase,      NoiseKind::CavityDetuning,   NoiseKind::CrystalTemperature,
};

// The five channels that enter through B^(1), in canonical summation order.
inline constexpr NoiseKind coupling_kinds[] = {
    NoiseKind::ChiPump,        NoiseKind::PumpAmplitude,      NoiseKind::PumpPhase,
    NoiseKind::CavityDetuning, NoiseKind::CrystalTemperature,
};

constexpr std::string_view to_string(NoiseKind k) {
    switch (k) {
        case NoiseKind::ChiSignal: return "chi_signal";
        case NoiseKind::ChiPump: return "chi_pump";
        case NoiseKind::PumpAmplitude: return "pump_amplitude";
        case NoiseKind::PumpPhase: return "pump_phase";
        case NoiseKind::CavityDetuning: return "cavity_detuning";
        case NoiseKind::CrystalTemperature: return "crystal_temperature";
    }
    return "unknown";
}

// Accepts the long names above plus the short aliases chi, chi0, mu, phase, nu, temp.
inline std::optional<NoiseKind> parse_noise_kind(std::string_view s) {
    for (auto k : all_noise_kinds)
        if (s == to_string(k)) return k;
    if (s == "chi") return NoiseKind::ChiSignal;
    if (s == "chi0") return NoiseKind::ChiPump;
    if (s == "mu") return NoiseKind::PumpAmplitude;
    if (s == "phase" || s == "varpi") return NoiseKind::PumpPhase;
    if (s == "nu") return NoiseKind::CavityDetuning;
    if (s == "temp" || s == "T") return NoiseKind::CrystalTemperature;
    return std::nullopt;
}

struct White {};
struct DeltaLike {};
struct UniformBand {
    double w_max = 0.05;
};

// S(w) = 1 (White), pi/w_max on |w| <= w_max (UniformBand), 2 pi delta(w) (DeltaLike).
using SpectrumModel = std::variant<White, UniformBand, DeltaLike>;

inline double spectral_density(const SpectrumModel& s, double w) {
    if (std::holds_alternative<White>(s)) return 1.0;
    if (auto* b = std::get_if<UniformBand>(&s)) return std::abs(w) <= b->w_max ? pi / b->w_max : 0.0;
    throw Error(Errc::InvalidArgument, "DeltaLike spectrum has no pointwise density");
}

struct NoiseChannel {
    NoiseKind kind = NoiseKind::PumpAmplitude;
    double weight = 0.0;
    SpectrumModel spectrum = UniformBand{};
};

inline SpectrumModel default_spectrum(NoiseKind k, double band = 0.05) {
    switch (k) {
        case NoiseKind::PumpAmplitude: return UniformBand{band};
        case NoiseKind::CavityDetuning:
        case NoiseKind::CrystalTemperature: return DeltaLike{};
        default: return White{};
    }
}

inline void check_channel(const NoiseChannel& c) {
    if (!(c.weight >= 0.0)) throw Error(Errc::InvalidArgument, "channel weight must be >= 0");
    if (auto* b = std::get_if<UniformBand>(&c.spectrum); b && !(b->w_max > 0.0))
        throw Error(Errc::InvalidArgument, "UniformBand needs w_max > 0");
    switch (c.kind) {
        case NoiseKind::ChiSignal:
        case NoiseKind::ChiPump:
        case NoiseKind::PumpPhase:
            if (!std::holds_alternative<White>(c.spectrum))
                throw Error(Errc::InvalidArgument, std::string(to_string(c.kind)) + " must be white");
            break;
        case NoiseKind::CavityDetuning:
        case NoiseKind::CrystalTemperature:
            if (!std::holds_alternative<DeltaLike>(c.spectrum))
                throw Error(Errc::InvalidArgument, std::string(to_string(c.kind)) + " must be delta-like");
            break;
        case NoiseKind::PumpAmplitude: break;
    }
}

inline NoiseChannel make_channel(NoiseKind k, double weight, double band = 0.05) {
    NoiseChannel c{k, weight, default_spectrum(k, band)};
    check_channel(c);
    return c;
}

struct DetectionFilter {
    double omega_f = 0.3;
    double gamma_f = 0.15;
};

struct ChannelDiagnostic {
    NoiseKind kind;
    // <s2 s2>/<s1 s1> ~ g^2/(1-E) and <s3 s3>/<s2 s2> ~ g^2/(1-E); both must stay below one.
    double second_over_first;
    double third_over_second;
};

struct ValidityReport {
    bool valid = true;
    double margin = 0.0;
    std::vector<ChannelDiagnostic> channels;
};

inline ValidityReport validity_check(const OpoParams& p, const std::vector<NoiseChannel>& channels) {
    const double gap = 1.0 - p.e_mag;
    ValidityReport r;
    double gmax2 = 0.0;
    for (const auto& c : channels) {
        const double g2 = c.weight * c.weight;
        gmax2 = std::max(gmax2, g2);
        r.channels.push_back({c.kind, g2 / gap, g2 / gap});
        if (!(gap > g2)) r.valid = false;
    }
    r.margin = gap - gmax2;
    return r;
}

// Physical rates in any consistent unit. Complex damping kappa_k = gamma_k - i nu_k.
struct RawInputs {
    double gamma_signal = 1.0;
    double detuning_signal = 0.0;
    double gamma_pump = 2.0;
    double detuning_pump = 0.0;
    double gamma_out = 1.0;
    double pump_amplitude = 0.0;
    double coupling = 1.0;
};

inline double threshold_amplitude(const RawInputs& r) {
    const double k0 = std::abs(cplx(r.gamma_pump, -r.detuning_pump));
    const double k1 = std::abs(cplx(r.gamma_signal, -r.detuning_signal));
    return k0 * k1 / (2.0 * std::abs(r.coupling));
}

inline OpoParams normalize_params(const RawInputs& r) {
    if (!(r.gamma_signal > 0.0) || !(r.gamma_pump > 0.0) || !(r.gamma_out > 0.0))
        throw Error(Errc::NonPositiveRate, "damping rates must be positive");
    if (r.coupling == 0.0) throw Error(Errc::InvalidArgument, "coupling must be nonzero");
    const cplx k1(r.gamma_signal, -r.detuning_signal);
    const cplx k0(r.gamma_pump, -r.detuning_pump);
    const double kappa = std::abs(k1);
    const double eth = threshold_amplitude(r);
    if (std::abs(r.pump_amplitude) >= eth)
        throw Error(Errc::AboveThreshold, "pump amplitude at or above threshold");

    OpoParams p;
    p.kappa0_hat = k0 / kappa;
    p.e_mag = std::abs(r.pump_amplitude) / eth;
    p.psi = -std::arg(k1);
    p.psi0 = -std::arg(k0);
    p.gamma1_hat = r.gamma_out / kappa;
    p.g_chi = std::abs(r.coupling) / std::sqrt(2.0 * std::abs(k0) * kappa);
    return p;
}

inline OpoParams tuned_params(double e_mag, double kappa0 = 2.0) {
    OpoParams p;
    p.e_mag = e_mag;
    p.kappa0_hat = kappa0;
    check_params(p);
    return p;
}

}  // namespace opo_ng

#endif
