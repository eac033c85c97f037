// Acceptance run: one PASS/FAIL line per criterion.
#include <chrono>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <opo_ng.hpp>

#include "oracles.hpp"

using namespace opo_ng;

namespace {

struct Outcome {
    bool pass;
    std::string detail;
};

struct Criterion {
    int id;
    std::string name;
    double budget_s;
    std::function<Outcome()> run;
};

std::string num(double x) {
    char b[32];
    std::snprintf(b, sizeof b, "%.6g", x);
    return b;
}

double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

double slope(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

Outcome ppse_ratio() {
    bool ok = std::abs(lambda_ppse_ratio(tuned_params(0.5, 2.0)) - 0.5) < 1e-14;
    double lo = 1.0, hi = 0.0;
    for (double k : logspace(0.1, 100.0, 500)) {
        const double r = lambda_ppse_ratio(tuned_params(0.5, k));
        lo = std::min(lo, r);
        hi = std::max(hi, r);
    }
    ok = ok && lo > 1.0 / 3.0 && hi < 1.0;
    double worst = 0.0;
    for (double k : {2.0, 5.0, 10.0}) {
        const auto p = tuned_params(0.999, k);
        worst = std::max(worst, rel(lambda_nl(NoiseKind::ChiPump, p) / ppse_envelope(p), lambda_ppse_ratio(p)));
    }
    ok = ok && worst <= 0.02;
    return {ok, "ratio range [" + num(lo) + ", " + num(hi) + "], envelope deviation " + num(worst)};
}

// Pass/fail on the default kappa0 = 2; the Fig. 1 values 5 and 10 are reported alongside.
Outcome divergence() {
    bool ok = true;
    std::string d;
    for (double k : {2.0, 5.0, 10.0}) {
        d += "k" + num(k) + ":";
        for (auto kind : {NoiseKind::ChiPump, NoiseKind::PumpPhase, NoiseKind::CavityDetuning, NoiseKind::CrystalTemperature}) {
            std::vector<double> x, y;
            for (double t : logspace(1e-4, 1e-2, 21)) {
                x.push_back(std::log(t));
                y.push_back(std::log(std::abs(lambda_nl(kind, tuned_params(1.0 - t, k)))));
            }
            const double s = slope(x, y);
            d += " " + short_name(kind) + " " + num(s);
            if (k == 2.0 && std::abs(s + 1.0) > 0.05) ok = false;
        }
        const double mu = lambda_nl(NoiseKind::PumpAmplitude, tuned_params(0.9999, k));
        d += ", mu(0.9999) " + num(mu) + "; ";
        if (std::abs(mu - 0.375) > 1e-3) ok = false;
    }
    return {ok, d};
}

Outcome quadrature_equivalence() {
    double worst = 0.0;
    std::string where;
    for (double e : {0.3, 0.6, 0.9})
        for (double k : {2.0, 5.0, 10.0})
            for (auto kind : coupling_kinds) {
                const auto p = tuned_params(e, k);
                const double r = rel(sigma_nl_variance(kind, p), lambda_nl(kind, p));
                if (r > worst) {
                    worst = r;
                    where = std::string(to_string(kind)) + " E=" + num(e) + " k=" + num(k) + " quad " +
                            num(sigma_nl_variance(kind, p)) + " closed " + num(lambda_nl(kind, p));
                }
            }
    return {worst <= 1e-5, "worst relative deviation " + num(worst) + " (" + where + ")"};
}

Outcome argmax_structure() {
    const DetectionFilter f{0.3, 0.15};
    bool ok = true;
    std::string d;
    for (double e : {0.71, 0.87, 0.975})
        for (auto kind : coupling_kinds) {
            const auto p = tuned_params(e, 2.0);
            const auto ch = NoiseChannel{kind, 1.0, default_spectrum(kind)};
            double best = -1.0, at = 0.0;
            for (int i = -100; i <= 100; ++i) {
                const double th = i * pi / 200.0;
                const double u = upsilon_theta(ch, th, p, f);
                if (u > best) {
                    best = u;
                    at = th;
                }
            }
            const bool quarter = kind == NoiseKind::PumpPhase || kind == NoiseKind::CavityDetuning;
            const double target = quarter ? pi / 4 : 0.0;
            if (std::abs(std::abs(at) - target) > pi / 200 + 1e-12) {
                ok = false;
                d += std::string(to_string(kind)) + "@E" + num(e) + " argmax " + num(at) + "; ";
            }
        }
    return {ok, d.empty() ? "argmax at 0 for chi0/mu/T and +-pi/4 for phase/nu at all three E" : d};
}

Outcome kappa_behaviour() {
    const DetectionFilter f{0.3, 0.15};
    bool ok = true;
    std::string d;
    for (auto kind : coupling_kinds) {
        std::vector<double> m;
        for (double k : linspace(2.0, 10.0, 33)) {
            const auto c = upsilon_coeffs(NoiseChannel{kind, 1.0, default_spectrum(kind)}, tuned_params(0.975, k), f);
            double best = -1e300;
            for (int i = -100; i <= 100; ++i) best = std::max(best, c(i * pi / 200.0));
            m.push_back(best);
        }
        if (kind == NoiseKind::CrystalTemperature) {
            const auto [lo, hi] = std::minmax_element(m.begin(), m.end());
            const double spread = (*hi - *lo) / *hi;
            if (spread > 0.01) ok = false;
            d += "T spread " + num(spread) + "; ";
        } else if (kind != NoiseKind::PumpAmplitude) {
            for (std::size_t i = 1; i < m.size(); ++i)
                if (!(m[i] < m[i - 1])) {
                    ok = false;
                    d += std::string(to_string(kind)) + " not decreasing; ";
                    break;
                }
        }
    }
    return {ok, d + "chi0/phase/nu checked for strict decrease"};
}

Outcome fig4_ordering() {
    const DetectionFilter f{0.3, 0.15};
    std::vector<double> chi, mu;
    bool ok = true;
    for (double x : logspace(0.5, 0.03, 25)) {
        const auto p = tuned_params(std::sqrt(1.0 - x), 2.0);
        chi.push_back(upsilon_theta(NoiseKind::ChiPump, 0.0, p, f));
        mu.push_back(upsilon_theta(NoiseKind::PumpAmplitude, 0.0, p, f));
        ok = ok && chi.back() < mu.back();
    }
    for (std::size_t i = 1; i < chi.size(); ++i) ok = ok && chi[i] > chi[i - 1] && mu[i] > mu[i - 1];
    return {ok, "Upsilon0 chi0 in [" + num(chi.front()) + ", " + num(chi.back()) + "], mu in [" + num(mu.front()) + ", " +
                    num(mu.back()) + "]"};
}

Outcome residue_oracle() {
    std::mt19937_64 rng(20261016);
    std::uniform_real_distribution<double> ue(0.3, 0.95), uk(1.5, 8.0), uo(0.1, 0.6), ug(0.05, 0.3), uw(-0.5, 0.5),
        uth(-pi / 2, pi / 2);
    double worst_v = 0.0, worst_u = 0.0;
    oracle::Gsl q;
    for (auto kind : coupling_kinds)
        for (int draw = 0; draw < 5; ++draw) {
            const auto p = tuned_params(ue(rng), uk(rng));
            const DetectionFilter f{uo(rng), ug(rng)};
            const double w = uw(rng), th = uth(rng);
            const CMat2 a = varsigma(kind, w, p, f);
            const CMat2 b = oracle::varsigma_matrix_direct(kind, w, p, f, q);
            worst_v = std::max(worst_v, abs(a - b) / std::max(abs(b), 1e-300));
            const auto ch = NoiseChannel{kind, 1.0, default_spectrum(kind)};
            worst_u = std::max(worst_u, rel(upsilon_theta(ch, th, p, f), oracle::upsilon_direct(ch, th, p, f)));
        }
    return {worst_v <= 1e-6 && worst_u <= 1e-6, "varsigma " + num(worst_v) + ", upsilon " + num(worst_u)};
}

Outcome monte_carlo() {
    const auto p = tuned_params(0.9, 2.0);
    const DetectionFilter f{0.3, 0.15};
    const auto ch = NoiseChannel{NoiseKind::PumpAmplitude, 0.01, UniformBand{0.05}};
    McConfig mc;
    mc.n_samples = 100000;
    mc.seed = 7;
    const auto r = run_mc(ch, p, f, mc, {0.0}).front();
    const double k = kurtosis_total(0.0, {ch}, p, f);
    const double v = linear_filtered_variance(0.0, p, f);
    const double zk = std::abs(r.kurtosis.k_hat - k) / r.kurtosis.stderr;
    const double zv = std::abs(r.linear.m2.real() - v) / r.linear.m2_stderr;
    return {zk <= 3.0 && zv <= 3.0, "K mc " + num(r.kurtosis.k_hat) + " +- " + num(r.kurtosis.stderr) + " vs " + num(k) +
                                        "; variance mc " + num(r.linear.m2.real()) + " +- " + num(r.linear.m2_stderr) + " vs " + num(v)};
}

Outcome fit_reproduction() {
    const DetectionFilter f{0.3, 0.15};
    FitParams truth;
    truth.drift = DriftModel{0.932, 0.013, pi, 1.0, 2.0};
    truth.g_mu = 0.007;
    std::vector<double> th;
    for (int i = -99; i <= 100; ++i) th.push_back(i * pi / 100.0);
    const auto curve =
        kurtosis_curve_with_drift(th, truth.drift, {NoiseChannel{NoiseKind::PumpAmplitude, 0.007, UniformBand{0.05}}}, f, 2.0);
    double emin = 1.0, emax = 0.0, left = 0.0, right = 0.0;
    for (const auto& pt : curve) {
        emin = std::min(emin, pt.e_mag);
        emax = std::max(emax, pt.e_mag);
        (pt.theta < 0.0 ? left : right) = std::max(pt.theta < 0.0 ? left : right, pt.k_value);
    }
    const double excursion = 0.5 * (emax - emin);
    const bool shape = std::abs(excursion - 0.006) <= 0.2 * 0.006 && rel(left, right) > 0.01;

    std::mt19937_64 rng(11);
    std::normal_distribution<double> n;
    std::vector<ExperimentRecord> rec;
    constexpr int points = 2000;
    for (int i = 0; i < points; ++i) {
        const double t = -pi + 2.0 * pi * (i + 1) / points;
        const double k = model_kurtosis(truth, t, f, 2.0, std::nullopt);
        ExperimentRecord r;
        r.theta = t;
        r.kurtosis = k * (1.0 + 0.05 * n(rng));
        r.k_err = 0.05 * std::abs(k);
        rec.push_back(r);
    }
    FitParams init;
    init.drift = DriftModel{0.925, 0.011, 3.0, 1.0, 2.0};
    init.g_mu = 0.0075;
    FitOptions opt;
    opt.weighted = true;
    const auto r = fit_drift_model(rec, init, f, 2.0, opt);
    const double de = rel(r.best.drift.e0, 0.932), da = rel(r.best.drift.alpha, 0.013), dt = rel(r.best.drift.theta0, pi),
                 dg = rel(r.best.g_mu, 0.007);
    const bool rec_ok = std::max({de, da, dt, dg}) <= 0.05;
    return {shape && rec_ok, "|E| half excursion " + num(excursion) + ", peak heights " + num(left) + "/" + num(right) +
                                 "; recovered deviations e0 " + num(de) + " alpha " + num(da) + " theta0 " + num(dt) +
                                 " g " + num(dg)};
}

Outcome linear_suite() {
    const auto p = tuned_params(0.6, 2.0);
    oracle::Gsl q;
    double worst_f = 0.0;
    for (double w : {-3.0, -0.8, 0.0, 0.5, 2.2}) {
        const CMat2 g = green_freq(Mode::Signal, w, p);
        auto entry = [&](int r) {
            return q.range_c(
                [&](double t) {
                    const CMat2 m = green_time(t, p) * std::polar(1.0, w * t);
                    return r == 0 ? m.aa : r == 1 ? m.aad : r == 2 ? m.ada : m.adad;
                },
                0.0, 80.0, 1e-12);
        };
        const CMat2 num_g{entry(0), entry(1), entry(2), entry(3)};
        worst_f = std::max(worst_f, abs(num_g - g) / abs(g));
    }
    bool causal = true;
    for (double t : {-5.0, -1.0, -1e-9}) causal = causal && abs(green_time(t, p)) == 0.0;
    double worst_v = 0.0;
    for (double e : {0.2, 0.5, 0.9}) {
        const auto pe = tuned_params(e, 2.0);
        const double sq = q.line([&](double w) { return squeezed_part(correlation_spectrum(w, pe)).real(); }, 1e-12) / (2 * pi);
        const double an = q.line([&](double w) { return antisqueezed_part(correlation_spectrum(w, pe)).real(); }, 1e-12) / (2 * pi);
        worst_v = std::max({worst_v, rel(sq, -1.0 / (2 * e * (1 + e))), rel(an, 1.0 / (2 * e * (1 - e)))});
    }
    return {worst_f <= 1e-6 && causal && worst_v <= 1e-8,
            "Fourier " + num(worst_f) + ", causal " + (causal ? "yes" : "no") + ", variances " + num(worst_v)};
}

}  // namespace

// --expect-fail id[,id...] makes the exit status check that exactly these criteria fail.
int main(int argc, char** argv) {
    std::vector<int> expected;
    for (int i = 1; i + 1 < argc; ++i)
        if (std::string(argv[i]) == "--expect-fail") {
            std::string list = argv[i + 1];
            std::size_t pos = 0;
            while (pos < list.size()) {
                const auto comma = list.find(',', pos);
                expected.push_back(std::stoi(list.substr(pos, comma - pos)));
                pos = comma == std::string::npos ? list.size() : comma + 1;
            }
        }
    std::vector<int> failures;
    const std::vector<Criterion> all{
        {1, "PPSE ratio and near-threshold envelope", 1.0, ppse_ratio},
        {2, "lambda divergence exponents", 1.0, divergence},
        {3, "quadrature vs closed-form lambda", 60.0, quadrature_equivalence},
        {4, "Upsilon argmax structure", 60.0, argmax_structure},
        {5, "max Upsilon vs kappa0", 60.0, kappa_behaviour},
        {6, "Upsilon0 ordering and monotonicity", 60.0, fig4_ordering},
        {7, "residues vs direct quadrature", 120.0, residue_oracle},
        {8, "Monte Carlo end-to-end", 600.0, monte_carlo},
        {9, "drift-model forward run and fit recovery", 300.0, fit_reproduction},
        {10, "linear response suite", 10.0, linear_suite},
    };
    for (const auto& c : all) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o{false, ""};
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const bool in_time = s <= c.budget_s;
        const bool pass = o.pass && in_time;
        if (!pass) failures.push_back(c.id);
        std::printf("[%s] criterion %d: %s | %s | %.2f s (budget %.0f s)%s\n", pass ? "PASS" : "FAIL", c.id, c.name.c_str(),
                    o.detail.c_str(), s, c.budget_s, in_time ? "" : " over budget");
        std::fflush(stdout);
    }
    std::printf("%zu of %zu criteria passed\n", all.size() - failures.size(), all.size());
    if (!expected.empty()) {
        std::printf("expected failures:");
        for (int id : expected) std::printf(" %d", id);
        std::printf("\n");
    }
    return failures == expected ? 0 : 1;
}
