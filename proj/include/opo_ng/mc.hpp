#ifndef OPO_NG_MC_HPP
#define OPO_NG_MC_HPP

#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <random>
#include <span>
#include <thread>
#include <variant>
#include <vector>

#include "cmat2.hpp"
#include "errors.hpp"
#include "kurtosis.hpp"
#include "linear.hpp"
#include "model.hpp"
#include "perturbation.hpp"

// Monte Carlo oracle in the independent-conjugate phase space: first-order fields are two real
// Ornstein-Uhlenbeck processes u (rate 1-E) and v (rate 1+E), beta = (u-v)/2, beta^+ = (u+v)/2.

namespace opo_ng {

struct McConfig {
    std::size_t n_samples = 100000;
    double dt = 0.0;       // 0 selects 0.05/(1+E)
    double burn_in = 0.0;  // 0 selects 10/(1-E)
    std::uint64_t seed = 1;
    bool second_order = true;
    int substeps = 1;  // random innovations per step, composed exactly
    std::size_t samples_per_trajectory = 400;
    unsigned threads = 0;  // 0: OPO_NG_THREADS or hardware concurrency
};

struct KurtosisEstimate {
    double k_hat = 0.0;
    double stderr = 0.0;
    std::size_t n_effective = 0;
    cplx m2{}, m4{};
    double m2_stderr = 0.0;
    double m4_stderr = 0.0;
};

inline double resolved_dt(const OpoParams& p, const McConfig& mc) { return mc.dt > 0.0 ? mc.dt : 0.05 / (1.0 + p.e_mag); }
inline double resolved_burn_in(const OpoParams& p, const McConfig& mc) {
    return mc.burn_in > 0.0 ? mc.burn_in : 10.0 / (1.0 - p.e_mag);
}

inline void check_mc(const OpoParams& p, const McConfig& mc, bool full_run) {
    require_tuned(p, "mc");
    if (p.e_mag == 0.0) throw Error(Errc::ZeroPump, "the surrogate fields need E > 0");
    const double dt = resolved_dt(p, mc);
    if (!(dt > 0.0) || dt > 0.05 / (1.0 + p.e_mag) * (1.0 + 1e-12))
        throw Error(Errc::InvalidArgument, "dt must satisfy 0 < dt <= 0.05/(1+E)");
    if (resolved_burn_in(p, mc) < 10.0 / (1.0 - p.e_mag) * (1.0 - 1e-12))
        throw Error(Errc::InvalidArgument, "burn_in must be >= 10/(1-E)");
    if (mc.substeps < 1) throw Error(Errc::InvalidArgument, "substeps must be >= 1");
    if (full_run && mc.n_samples < 1000) throw Error(Errc::InvalidArgument, "n_samples must be >= 1000");
}

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::mt19937_64 trajectory_rng(std::uint64_t seed, std::uint64_t index) {
    return std::mt19937_64(splitmix64(seed ^ splitmix64(index + 0x632be59bd9b4e019ULL)));
}

// Steps the first-order fields, one classical channel, the second-order response and the filters.
class Simulator {
public:
    static constexpr int band_lines = 256;

    Simulator(const OpoParams& p, const NoiseChannel* channel, const DetectionFilter& f, const McConfig& mc,
              std::uint64_t index)
        : p_(p), f_(f), dt_(resolved_dt(p, mc)), substeps_(mc.substeps), second_(mc.second_order && channel),
          rng_(trajectory_rng(mc.seed, index)) {
        const double e = p.e_mag;
        rate_u_ = 1.0 - e;
        rate_v_ = 1.0 + e;
        k0_ = p.kappa0_hat.real();
        if (channel) {
            if (channel->kind == NoiseKind::ChiSignal)
                throw Error(Errc::UnsupportedChannel, "chi_signal has no B^(1)");
            channel_ = *channel;
            weight_ = channel->weight;
            direct_ = channel_coupling_direct(channel->kind, p) * weight_;
            filtered_ = (channel_coupling(channel->kind, 0.0, p) - channel_coupling_direct(channel->kind, p)) *
                        (k0_ * weight_);
        }
        // Stationary start for the OU pair.
        u_ = std::sqrt(diffusion() / (2.0 * rate_u_)) * gauss();
        v_ = std::sqrt(diffusion() / (2.0 * rate_v_)) * gauss();
        init_noise();
        x_prev_ = first_order();
        s_prev_ = source(x_prev_);
    }

    double dt() const { return dt_; }
    double time() const { return t_; }
    CVec2 first_order() const { return {0.5 * (u_ - v_), 0.5 * (u_ + v_)}; }
    CVec2 second_order() const { return a2_; }
    double u() const { return u_; }
    double v() const { return v_; }
    double noise() const { return n_; }
    double pump_path() const { return np_; }

    // Filtered first- and second-order fields (component-wise, before the theta contraction).
    CVec2 filtered_first() const { return 0.5 * (y1p_ + y1m_); }
    CVec2 filtered_second() const { return 0.5 * (y2p_ + y2m_); }

    void step() {
        const double h = dt_ / substeps_;
        const double eu = std::exp(-rate_u_ * h), ev = std::exp(-rate_v_ * h);
        const double su = std::sqrt(diffusion() / (2.0 * rate_u_) * (1.0 - eu * eu));
        const double sv = std::sqrt(diffusion() / (2.0 * rate_v_) * (1.0 - ev * ev));
        for (int j = 0; j < substeps_; ++j) {
            u_ = eu * u_ + su * gauss();
            v_ = ev * v_ + sv * gauss();
        }
        t_ += dt_;
        double dw = 0.0;
        advance_noise(dw);
        const CVec2 x = first_order();

        if (second_) {
            const CVec2 s_new = source(x);
            CVec2 a = propagate(a2_, dt_) + (0.5 * dt_) * (propagate(s_prev_, dt_) + s_new);
            if (std::holds_alternative<White>(channel_.spectrum)) {
                // Midpoint rule for the directly multiplicative white part.
                const CVec2 mid = 0.5 * (x + x_prev_);
                a = a + propagate(direct_ * mid, 0.5 * dt_) * dw;
            }
            a2_ = a;
            s_prev_ = s_new;
        }

        const cplx lp = cplx(f_.gamma_f, -f_.omega_f), lm = cplx(f_.gamma_f, f_.omega_f);
        const cplx dp = std::exp(-lp * dt_), dm = std::exp(-lm * dt_);
        y1p_ = dp * y1p_ + (0.5 * dt_) * (dp * x_prev_ + x);
        y1m_ = dm * y1m_ + (0.5 * dt_) * (dm * x_prev_ + x);
        if (second_) {
            y2p_ = dp * y2p_ + (0.5 * dt_) * (dp * a2_prev_ + a2_);
            y2m_ = dm * y2m_ + (0.5 * dt_) * (dm * a2_prev_ + a2_);
            a2_prev_ = a2_;
        }
        x_prev_ = x;
    }

private:
    double diffusion() const { return 4.0 / p_.e_mag; }
    double gauss() { return normal_(rng_); }

    // exp(M t) with M = [[-1, E], [E, -1]].
    CVec2 propagate(CVec2 z, double t) const {
        const cplx sx = (z.a + z.ad) * std::exp(-rate_u_ * t);
        const cplx sy = (z.ad - z.a) * std::exp(-rate_v_ * t);
        return {0.5 * (sx - sy), 0.5 * (sx + sy)};
    }

    // Smooth part of s2 = B(t) alpha1(t); the white direct part is added per step.
    CVec2 source(CVec2 x) const {
        if (!second_) return {};
        CMat2 b = filtered_ * np_;
        if (!std::holds_alternative<White>(channel_.spectrum)) b += direct_ * n_;
        return b * x;
    }

    void init_noise() {
        if (!second_) return;
        if (std::holds_alternative<DeltaLike>(channel_.spectrum)) {
            n_ = gauss();
            np_ = n_ / k0_;
        } else if (auto* band = std::get_if<UniformBand>(&channel_.spectrum)) {
            const double dw = band->w_max / band_lines;
            amp_ = std::sqrt(2.0 / band_lines);
            std::uniform_real_distribution<double> phase(0.0, 2.0 * pi);
            freq_.resize(band_lines);
            phase_.resize(band_lines);
            c_.resize(band_lines);
            s_.resize(band_lines);
            cr_.resize(band_lines);
            sr_.resize(band_lines);
            for (int k = 0; k < band_lines; ++k) {
                freq_[k] = (k + 0.5) * dw;
                phase_[k] = phase(rng_);
                cr_[k] = std::cos(freq_[k] * dt_);
                sr_[k] = std::sin(freq_[k] * dt_);
            }
            resync_band();
            // Stationary pump path: integrate the band lines through the pump filter exactly.
            double acc = 0.0;
            for (int k = 0; k < band_lines; ++k)
                acc += amp_ * std::real(std::polar(1.0, phase_[k]) / cplx(k0_, freq_[k]));
            np_ = acc;
        } else {
            n_ = 0.0;
            np_ = std::sqrt(1.0 / (2.0 * k0_)) * gauss();
        }
    }

    void resync_band() {
        double acc = 0.0;
        for (int k = 0; k < band_lines; ++k) {
            c_[k] = std::cos(freq_[k] * t_ + phase_[k]);
            s_[k] = std::sin(freq_[k] * t_ + phase_[k]);
            acc += c_[k];
        }
        n_ = amp_ * acc;
    }

    void advance_noise(double& dw) {
        if (!second_) return;
        const double ek = std::exp(-k0_ * dt_);
        if (std::holds_alternative<DeltaLike>(channel_.spectrum)) return;
        if (std::holds_alternative<White>(channel_.spectrum)) {
            dw = std::sqrt(dt_) * gauss();
            np_ = ek * np_ + std::exp(-0.5 * k0_ * dt_) * dw;
            return;
        }
        const double n_old = n_;
        if (++since_sync_ == 4096) {
            since_sync_ = 0;
            resync_band();
        } else {
            double acc = 0.0;
            for (int k = 0; k < band_lines; ++k) {
                const double c = c_[k] * cr_[k] - s_[k] * sr_[k];
                const double s = s_[k] * cr_[k] + c_[k] * sr_[k];
                c_[k] = c;
                s_[k] = s;
                acc += c;
            }
            n_ = amp_ * acc;
        }
        np_ = ek * np_ + 0.5 * dt_ * (ek * n_old + n_);
    }

    OpoParams p_;
    DetectionFilter f_;
    double dt_;
    int substeps_;
    bool second_;
    std::mt19937_64 rng_;
    std::normal_distribution<double> normal_{0.0, 1.0};

    NoiseChannel channel_{};
    double weight_ = 0.0;
    CMat2 direct_{}, filtered_{};
    double rate_u_ = 1.0, rate_v_ = 1.0, k0_ = 2.0;

    double t_ = 0.0;
    double u_ = 0.0, v_ = 0.0;
    double n_ = 0.0, np_ = 0.0;
    double amp_ = 0.0;
    int since_sync_ = 0;
    std::vector<double> freq_, phase_, c_, s_, cr_, sr_;

    CVec2 a2_{}, a2_prev_{}, s_prev_{}, x_prev_{};
    CVec2 y1p_{}, y1m_{}, y2p_{}, y2m_{};
};

struct FieldTrajectory {
    double dt = 0.0;
    std::vector<double> beta, beta_dag;
    std::vector<double> noise, pump;
};

// Materialized first-order fields (and the channel's noise and pump paths when a channel is given).
inline FieldTrajectory synthesize_linear_fields(const OpoParams& p, const McConfig& mc, std::size_t n_steps,
                                                const NoiseChannel* channel = nullptr, std::uint64_t index = 0) {
    check_mc(p, mc, false);
    McConfig local = mc;
    local.second_order = channel != nullptr;
    Simulator sim(p, channel, DetectionFilter{}, local, index);
    FieldTrajectory tr;
    tr.dt = sim.dt();
    for (std::size_t i = 0; i < n_steps; ++i) {
        const CVec2 x = sim.first_order();
        tr.beta.push_back(x.a.real());
        tr.beta_dag.push_back(x.ad.real());
        tr.noise.push_back(sim.noise());
        tr.pump.push_back(sim.pump_path());
        sim.step();
    }
    return tr;
}

// Discrete convolution of the Green's function with s2 = B^(1)(t) alpha^(1)(t) for a smooth or
// frozen noise path sampled on the trajectory grid (exponential integrator, trapezoidal source).
inline std::vector<CVec2> second_order_response(const FieldTrajectory& tr, const NoiseChannel& channel,
                                                const OpoParams& p) {
    require_tuned(p, "second_order_response");
    if (std::holds_alternative<White>(channel.spectrum))
        throw Error(Errc::InvalidArgument, "white channels are handled inside Simulator");
    const double k0 = p.kappa0_hat.real(), dt = tr.dt;
    const CMat2 direct = channel_coupling_direct(channel.kind, p) * channel.weight;
    const CMat2 filtered =
        (channel_coupling(channel.kind, 0.0, p) - channel_coupling_direct(channel.kind, p)) * (k0 * channel.weight);
    const double eu = std::exp(-(1.0 - p.e_mag) * dt), ev = std::exp(-(1.0 + p.e_mag) * dt);
    auto prop = [&](CVec2 z) {
        const cplx sx = (z.a + z.ad) * eu, sy = (z.ad - z.a) * ev;
        return CVec2{0.5 * (sx - sy), 0.5 * (sx + sy)};
    };
    auto src = [&](std::size_t i) {
        const CMat2 b = direct * tr.noise[i] + filtered * tr.pump[i];
        return b * CVec2{tr.beta[i], tr.beta_dag[i]};
    };
    std::vector<CVec2> out(tr.beta.size());
    for (std::size_t i = 1; i < out.size(); ++i)
        out[i] = prop(out[i - 1]) + (0.5 * dt) * (prop(src(i - 1)) + src(i));
    return out;
}

// Output quadrature theta^T alpha (the vacuum input term has no normally ordered moments) passed
// through the recursive exponential-cosine filter; one sample every 10/gamma_f after burn-in.
inline std::vector<cplx> filtered_quadrature(std::span<const CVec2> field, double dt, double theta,
                                             const DetectionFilter& f, double burn_in) {
    const double memory = 8.0 / f.gamma_f;
    if (field.size() * dt < burn_in + memory)
        throw Error(Errc::TrajectoryTooShort, "trajectory shorter than burn-in plus filter memory");
    const CVec2 th = quadrature_vector(theta);
    const cplx lp = cplx(f.gamma_f, -f.omega_f), lm = cplx(f.gamma_f, f.omega_f);
    const cplx dp = std::exp(-lp * dt), dm = std::exp(-lm * dt);
    const auto window = static_cast<std::size_t>(std::ceil(10.0 / f.gamma_f / dt));
    const auto start = static_cast<std::size_t>(std::ceil((burn_in + memory) / dt));
    cplx yp{}, ym{};
    std::vector<cplx> out;
    for (std::size_t i = 1; i < field.size(); ++i) {
        const cplx x0 = dot(th, field[i - 1]), x1 = dot(th, field[i]);
        yp = dp * yp + 0.5 * dt * (dp * x0 + x1);
        ym = dm * ym + 0.5 * dt * (dm * x0 + x1);
        if (i >= start && (i - start) % window == 0) out.push_back(0.5 * (yp + ym));
    }
    return out;
}

inline KurtosisEstimate sample_kurtosis(std::span<const cplx> v) {
    if (v.size() < 1000) throw Error(Errc::InvalidArgument, "sample_kurtosis needs at least 1000 samples");
    constexpr std::size_t nb = 20;
    auto moments = [](std::span<const cplx> s) {
        cplx m2{}, m4{};
        for (auto x : s) {
            const cplx x2 = x * x;
            m2 += x2;
            m4 += x2 * x2;
        }
        const double n = static_cast<double>(s.size());
        return std::pair{m2 / n, m4 / n};
    };
    auto kurt = [](cplx m2, cplx m4) { return (m4.real() - 3.0 * m2.real() * m2.real()) / (3.0 * m2.real() * m2.real()); };

    KurtosisEstimate est;
    est.n_effective = v.size();
    std::tie(est.m2, est.m4) = moments(v);
    const std::size_t len = v.size() / nb;
    double sk = 0.0, sk2 = 0.0, s2 = 0.0, s22 = 0.0, s4 = 0.0, s42 = 0.0;
    for (std::size_t b = 0; b < nb; ++b) {
        auto [m2, m4] = moments(v.subspan(b * len, len));
        const double k = kurt(m2, m4);
        sk += k;
        sk2 += k * k;
        s2 += m2.real();
        s22 += m2.real() * m2.real();
        s4 += m4.real();
        s42 += m4.real() * m4.real();
    }
    auto sem = [&](double s, double ss) {
        const double mean = s / nb;
        return std::sqrt(std::max(0.0, (ss / nb - mean * mean) * nb / (nb - 1.0)) / nb);
    };
    est.stderr = sem(sk, sk2);
    est.m2_stderr = sem(s2, s22);
    est.m4_stderr = sem(s4, s42);
    if (std::abs(est.m2.real()) == 0.0 || (est.m2_stderr > 0.0 && std::abs(est.m2.real()) <= 3.0 * est.m2_stderr))
        throw Error(Errc::DegenerateVariance, "second moment indistinguishable from zero");
    est.k_hat = kurt(est.m2, est.m4);
    return est;
}

struct McThetaResult {
    double theta = 0.0;
    KurtosisEstimate kurtosis;       // of V1 + V2
    KurtosisEstimate linear;         // of V1 only
};

inline unsigned worker_count(unsigned requested, std::size_t jobs) {
    unsigned n = requested;
    if (n == 0) {
        if (const char* env = std::getenv("OPO_NG_THREADS")) n = static_cast<unsigned>(std::strtoul(env, nullptr, 10));
        if (n == 0) n = std::max(1u, std::thread::hardware_concurrency());
    }
    return static_cast<unsigned>(std::min<std::size_t>(n, std::max<std::size_t>(jobs, 1)));
}

// Full end-to-end estimate: independent trajectories, each contributing a fixed number of samples.
inline std::vector<McThetaResult> run_mc(const NoiseChannel& channel, const OpoParams& p, const DetectionFilter& f,
                                         const McConfig& mc, const std::vector<double>& thetas) {
    check_mc(p, mc, true);
    const double dt = resolved_dt(p, mc);
    const auto window = static_cast<std::size_t>(std::ceil(10.0 / f.gamma_f / dt));
    const auto burn = static_cast<std::size_t>(std::ceil((resolved_burn_in(p, mc) + 8.0 / f.gamma_f) / dt));
    std::size_t per = mc.samples_per_trajectory;
    if (auto* band = std::get_if<UniformBand>(&channel.spectrum)) {
        // Keep each trajectory inside one period of the line spectrum.
        const double period = 2.0 * pi * Simulator::band_lines / band->w_max;
        per = std::min<std::size_t>(per, static_cast<std::size_t>(0.8 * period / (window * dt)));
    }
    per = std::max<std::size_t>(per, 1);
    const std::size_t n_traj = (mc.n_samples + per - 1) / per;
    const std::size_t nth = thetas.size();
    std::vector<CVec2> th(nth);
    for (std::size_t j = 0; j < nth; ++j) th[j] = quadrature_vector(thetas[j]);

    // samples[traj][sample][theta] for V1 and V1+V2.
    std::vector<std::vector<cplx>> lin(n_traj), tot(n_traj);
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t i; (i = next.fetch_add(1)) < n_traj;) {
            Simulator sim(p, &channel, f, mc, i);
            for (std::size_t s = 0; s < burn; ++s) sim.step();
            auto& l = lin[i];
            auto& t = tot[i];
            l.reserve(per * nth);
            t.reserve(per * nth);
            for (std::size_t k = 0; k < per; ++k) {
                for (std::size_t s = 0; s < window; ++s) sim.step();
                const CVec2 y1 = sim.filtered_first(), y2 = sim.filtered_second();
                for (std::size_t j = 0; j < nth; ++j) {
                    const cplx v1 = dot(th[j], y1);
                    l.push_back(v1);
                    t.push_back(v1 + dot(th[j], y2));
                }
            }
        }
    };
    const unsigned nw = worker_count(mc.threads, n_traj);
    std::vector<std::thread> pool;
    for (unsigned w = 1; w < nw; ++w) pool.emplace_back(work);
    work();
    for (auto& t : pool) t.join();

    std::vector<McThetaResult> out;
    for (std::size_t j = 0; j < nth; ++j) {
        std::vector<cplx> a, b;
        a.reserve(n_traj * per);
        b.reserve(n_traj * per);
        for (std::size_t i = 0; i < n_traj; ++i)
            for (std::size_t k = 0; k < per; ++k) {
                a.push_back(lin[i][k * nth + j]);
                b.push_back(tot[i][k * nth + j]);
            }
        a.resize(std::min(a.size(), mc.n_samples));
        b.resize(std::min(b.size(), mc.n_samples));
        out.push_back({thetas[j], sample_kurtosis(b), sample_kurtosis(a)});
    }
    return out;
}

}  // namespace opo_ng

#endif
