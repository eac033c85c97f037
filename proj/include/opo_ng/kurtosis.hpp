#ifndef OPO_NG_KURTOSIS_HPP
#define OPO_NG_KURTOSIS_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "cmat2.hpp"
#include "errors.hpp"
#include "linear.hpp"
#include "model.hpp"
#include "perturbation.hpp"
#include "quadrature.hpp"

namespace opo_ng {

// Transfer function of the exponential-cosine detection window, poles at +-omega_f - i gamma_f.
inline cplx filter_fourier(cplx w, const DetectionFilter& f) {
    return 0.5 * (1.0 / (f.gamma_f - I * (w - f.omega_f)) + 1.0 / (f.gamma_f - I * (w + f.omega_f)));
}

inline std::array<cplx, 2> filter_poles(const DetectionFilter& f) {
    return {cplx(f.omega_f, -f.gamma_f), cplx(-f.omega_f, -f.gamma_f)};
}

// Upper-half-plane poles omega_l of the varsigma integrand: w+, w-, -Omega+, -Omega-.
inline std::array<cplx, 4> varsigma_poles(const OpoParams& p, const DetectionFilter& f) {
    const auto cf = char_freqs(p);
    const auto om = filter_poles(f);
    std::array<cplx, 4> poles{cf.omega_plus, cf.omega_minus, -om[0], -om[1]};
    for (auto z : poles)
        if (!(z.imag() > 0.0)) throw std::logic_error("varsigma pole outside the upper half plane");
    for (int i = 0; i < 4; ++i)
        for (int j = i + 1; j < 4; ++j)
            if (std::abs(poles[i] - poles[j]) < 1e-9)
                throw Error(Errc::DegeneratePole, "coincident poles in the varsigma integrand");
    return poles;
}

namespace detail {

// d/dw (w^2 - w+^2)(w^2 - w-^2) at w = w_l, with w_m the other root.
inline cplx denominator_slope(cplx wl, cplx wm) { return 2.0 * wl * (wl * wl - wm * wm); }

struct VarsigmaContext {
    OpoParams p;
    DetectionFilter f;
    std::array<cplx, 4> poles;
    CMat2 n_plus, n_minus;  // spectrum numerator at w+ and w-
    CMat2 s3, s4;           // full spectrum at -Omega+ and -Omega-
    cplx slope_plus, slope_minus;
    cplx fm[4];             // F(-w_l)

    VarsigmaContext(const OpoParams& params, const DetectionFilter& filter)
        : p(params), f(filter), poles(varsigma_poles(params, filter)) {
        n_plus = spectrum_numerator(poles[0], p);
        n_minus = spectrum_numerator(poles[1], p);
        s3 = correlation_spectrum(poles[2], p);
        s4 = correlation_spectrum(poles[3], p);
        slope_plus = denominator_slope(poles[0], poles[1]);
        slope_minus = denominator_slope(poles[1], poles[0]);
        for (int l = 0; l < 2; ++l) fm[l] = filter_fourier(-poles[l], f);
    }

    // Residue sum for (1/2pi) int F(w+W) F(-w) G(W+w) B(W) S(w) dw, then (1 + transpose).
    CMat2 operator()(NoiseKind kind, cplx W) const {
        const CMat2 b = channel_coupling(kind, W, p);
        CMat2 acc{};
        acc += filter_fourier(poles[0] + W, f) * fm[0] * (green_freq(Mode::Signal, W + poles[0], p) * b * n_plus) / slope_plus;
        acc += filter_fourier(poles[1] + W, f) * fm[1] * (green_freq(Mode::Signal, W + poles[1], p) * b * n_minus) / slope_minus;
        // F(-w) has residue -i/2 at each -Omega.
        acc += filter_fourier(poles[2] + W, f) * (-0.5 * I) * (green_freq(Mode::Signal, W + poles[2], p) * b * s3);
        acc += filter_fourier(poles[3] + W, f) * (-0.5 * I) * (green_freq(Mode::Signal, W + poles[3], p) * b * s4);
        acc *= I;
        return acc + transpose(acc);
    }
};

}  // namespace detail

// Cross-correlation kernel of first- and second-order filtered quadratures for one channel.
inline CMat2 varsigma(NoiseKind kind, cplx w, const OpoParams& p, const DetectionFilter& f) {
    if (kind == NoiseKind::ChiSignal) throw Error(Errc::UnsupportedChannel, "chi_signal has no B^(1)");
    return detail::VarsigmaContext(p, f)(kind, w);
}

namespace detail {

inline cplx upsilon_integrand(const VarsigmaContext& ctx, NoiseKind kind, CVec2 th, cplx w) {
    return contract(th, ctx(kind, -w)) * contract(th, ctx(kind, w));
}

// Candidate singularities of q(-w) q(w): the upper-half-plane set and its mirror.
inline std::vector<cplx> upsilon_upper_poles(const VarsigmaContext& ctx, NoiseKind kind) {
    const auto om = filter_poles(ctx.f);
    std::vector<cplx> up;
    for (auto wl : ctx.poles) {
        for (auto o : om) up.push_back(wl - o);
        up.push_back(wl + ctx.poles[0]);
        up.push_back(wl + ctx.poles[1]);
    }
    if (kind != NoiseKind::CrystalTemperature) up.push_back(I * ctx.p.kappa0_hat);
    for (auto z : up)
        if (!(z.imag() > 0.0)) throw std::logic_error("white-noise pole table has a non-upper entry");
    return up;
}

}  // namespace detail

// White spectrum: close the w contour in the upper half plane. Each residue is taken from a small
// circular contour around its cluster, so coincident poles from different terms need no special case.
inline double upsilon_white(NoiseKind kind, double theta, const OpoParams& p, const DetectionFilter& f) {
    const detail::VarsigmaContext ctx(p, f);
    const CVec2 th = quadrature_vector(theta);
    const auto up = detail::upsilon_upper_poles(ctx, kind);

    std::vector<cplx> all = up;
    for (auto z : up) all.push_back(-z);

    // Cluster the upper poles.
    std::vector<std::vector<cplx>> clusters;
    for (auto z : up) {
        bool merged = false;
        for (auto& c : clusters)
            if (std::abs(c.front() - z) < 1e-7 * (1.0 + std::abs(z))) {
                c.push_back(z);
                merged = true;
                break;
            }
        if (!merged) clusters.push_back({z});
    }

    constexpr int n = 64;
    cplx total{};
    for (const auto& c : clusters) {
        cplx centre{};
        for (auto z : c) centre += z;
        centre /= static_cast<double>(c.size());
        double spread = 0.0;
        for (auto z : c) spread = std::max(spread, std::abs(z - centre));
        double gap = quad::inf;
        for (auto z : all)
            if (std::abs(z - centre) > spread + 1e-7 * (1.0 + std::abs(z))) gap = std::min(gap, std::abs(z - centre));
        const double r = spread + 0.4 * (gap - spread);
        cplx res{};
        for (int k = 0; k < n; ++k) {
            const cplx dz = std::polar(r, 2.0 * pi * (k + 0.5) / n);
            res += detail::upsilon_integrand(ctx, kind, th, centre + dz) * dz;
        }
        total += res / static_cast<double>(n);
    }
    return (I * total).real();
}

inline double upsilon_theta(const NoiseChannel& ch, double theta, const OpoParams& p, const DetectionFilter& f) {
    if (ch.kind == NoiseKind::ChiSignal) throw Error(Errc::UnsupportedChannel, "chi_signal has no B^(1)");
    if (std::holds_alternative<White>(ch.spectrum)) return upsilon_white(ch.kind, theta, p, f);
    const detail::VarsigmaContext ctx(p, f);
    const CVec2 th = quadrature_vector(theta);
    if (std::holds_alternative<DeltaLike>(ch.spectrum))
        return detail::upsilon_integrand(ctx, ch.kind, th, 0.0).real();
    const double wm = std::get<UniformBand>(ch.spectrum).w_max;
    // The integrand is even in w.
    auto g = [&](double w) { return detail::upsilon_integrand(ctx, ch.kind, th, w).real(); };
    return quad::integrate(g, 0.0, wm, {1e-10}) / wm;
}

inline double upsilon_theta(NoiseKind kind, double theta, const OpoParams& p, const DetectionFilter& f) {
    return upsilon_theta(NoiseChannel{kind, 1.0, default_spectrum(kind)}, theta, p, f);
}

struct UpsilonCoeffs {
    double u4 = 0.0, u2 = 0.0, u0 = 0.0;
    double operator()(double theta) const { return u4 * std::cos(4.0 * theta) + u2 * std::cos(2.0 * theta) + u0; }
};

inline UpsilonCoeffs coeffs_from_samples(double y0, double y45, double y90) {
    const double even = 0.5 * (y0 + y90);
    return {0.5 * (even - y45), 0.5 * (y0 - y90), 0.5 * (even + y45)};
}

inline UpsilonCoeffs upsilon_coeffs(const NoiseChannel& ch, const OpoParams& p, const DetectionFilter& f) {
    return coeffs_from_samples(upsilon_theta(ch, 0.0, p, f), upsilon_theta(ch, pi / 4, p, f),
                               upsilon_theta(ch, pi / 2, p, f));
}

// <:V_theta^(1)2:> from the residues of F(w) F(-w) theta^T S(w) theta in the upper half plane.
inline double linear_filtered_variance(double theta, const OpoParams& p, const DetectionFilter& f) {
    const auto poles = varsigma_poles(p, f);
    const CVec2 th = quadrature_vector(theta);
    cplx acc{};
    for (int l = 0; l < 2; ++l) {
        const cplx wl = poles[l], wm = poles[1 - l];
        acc += filter_fourier(wl, f) * filter_fourier(-wl, f) * contract(th, spectrum_numerator(wl, p)) /
               detail::denominator_slope(wl, wm);
    }
    for (int l = 2; l < 4; ++l)
        acc += filter_fourier(poles[l], f) * (-0.5 * I) * contract(th, correlation_spectrum(poles[l], p));
    return (I * acc).real();
}

// Vacuum (shot-noise) level of the filtered quadrature in the same field units, for a lossless output
// coupler: (1/4E^2) int_0^inf h(t)^2 dt with h(t) = e^{-gamma_f t} cos(omega_f t).
inline double vacuum_filtered_variance(const OpoParams& p, const DetectionFilter& f) {
    if (p.e_mag == 0.0) throw Error(Errc::ZeroPump, "field units need e_mag > 0");
    const double g = f.gamma_f, o = f.omega_f;
    return (1.0 / (4.0 * g) + g / (4.0 * (g * g + o * o))) / (4.0 * p.e_mag * p.e_mag);
}

// Total measured variance: normally ordered part plus vacuum level; always positive.
inline double experimental_variance(double theta, const OpoParams& p, const DetectionFilter& f) {
    return linear_filtered_variance(theta, p, f) + vacuum_filtered_variance(p, f);
}

struct KurtosisBreakdown {
    double total = 0.0;
    std::vector<std::pair<NoiseKind, double>> per_channel;
    bool valid = true;
};

inline KurtosisBreakdown kurtosis_breakdown(double theta, const std::vector<NoiseChannel>& channels, const OpoParams& p,
                                            const DetectionFilter& f, std::optional<double> variance = std::nullopt) {
    KurtosisBreakdown out;
    out.valid = validity_check(p, channels).valid;
    const double v = variance ? *variance : linear_filtered_variance(theta, p, f);
    for (auto kind : coupling_kinds)
        for (const auto& c : channels)
            if (c.kind == kind && c.weight != 0.0) {
                const double k = c.weight * c.weight * upsilon_theta(c, theta, p, f) / (v * v);
                out.per_channel.emplace_back(kind, k);
                out.total += k;
            }
    return out;
}

inline double kurtosis_total(double theta, const std::vector<NoiseChannel>& channels, const OpoParams& p,
                             const DetectionFilter& f, std::optional<double> variance = std::nullopt) {
    return kurtosis_breakdown(theta, channels, p, f, variance).total;
}

struct DriftModel {
    double e0 = 0.932;
    double alpha = 0.013;
    double theta0 = pi;
    double gamma_s = 1.0;
    double gamma_p = 2.0;
};

inline double excitation_with_detuning(const DriftModel& d, double theta) {
    const double nu = d.alpha * (theta - d.theta0);
    const double a = 1.0 + 4.0 * nu * nu / (d.gamma_s * d.gamma_s);
    const double b = 1.0 + nu * nu / (d.gamma_p * d.gamma_p);
    return d.e0 / std::sqrt(a * b);
}

struct KurtosisPoint {
    double theta;
    double e_mag;
    double k_value;
    std::vector<std::pair<NoiseKind, double>> per_channel;
};

using KurtosisCurve = std::vector<KurtosisPoint>;

inline KurtosisCurve kurtosis_curve_with_drift(const std::vector<double>& thetas, const DriftModel& d,
                                               const std::vector<NoiseChannel>& channels, const DetectionFilter& f,
                                               double kappa0_hat,
                                               const std::vector<double>* variances = nullptr) {
    KurtosisCurve curve;
    curve.reserve(thetas.size());
    for (std::size_t i = 0; i < thetas.size(); ++i) {
        const double th = thetas[i];
        const double e = excitation_with_detuning(d, th);
        if (!(e < 1.0)) throw Error(Errc::AboveThreshold, "drift pushes |E| to " + std::to_string(e));
        OpoParams p;
        p.e_mag = e;
        p.kappa0_hat = kappa0_hat;
        std::optional<double> v;
        if (variances) v = (*variances)[i];
        auto kb = kurtosis_breakdown(th, channels, p, f, v);
        curve.push_back({th, e, kb.total, std::move(kb.per_channel)});
    }
    return curve;
}

}  // namespace opo_ng

#endif
