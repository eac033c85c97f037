#ifndef OPO_NG_CLI_HPP
#define OPO_NG_CLI_HPP

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "config.hpp"
#include "errors.hpp"
#include "fit.hpp"
#include "intracavity.hpp"
#include "kurtosis.hpp"
#include "linear.hpp"
#include "mc.hpp"

namespace opo_ng::cli {

inline constexpr const char* version = "1.0.0";

enum Exit : int { Ok = 0, Usage = 1, Numerical = 2, Io = 3 };

inline int exit_code(Errc c) {
    switch (c) {
        case Errc::NonConvergence:
        case Errc::QuadratureFailure:
        case Errc::DegeneratePole:
        case Errc::DegenerateVariance: return Numerical;
        case Errc::ParseError:
        case Errc::EmptyDataset: return Io;
        default: return Usage;
    }
}

inline std::string fmt(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17e", x);
    return buf;
}

struct Manifest {
    std::string subcommand;
    std::optional<std::uint64_t> seed;
    std::vector<std::pair<std::string, std::string>> config;

    void write(std::ostream& os) const {
        char ts[32];
        const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
        std::tm tm{};
        gmtime_r(&now, &tm);
        std::strftime(ts, sizeof ts, "%Y-%m-%dT%H:%M:%SZ", &tm);
        os << "# tool: opo-ng " << version << '\n';
        os << "# subcommand: " << subcommand << '\n';
        os << "# seed: " << (seed ? std::to_string(*seed) : std::string("none")) << '\n';
        os << "# timestamp: " << ts << '\n';
        for (const auto& [k, v] : config) os << "# config: " << k << " = " << v << '\n';
    }
};

inline std::vector<std::pair<std::string, std::string>> describe(const RunConfig& c) {
    return {{"kappa0_hat", fmt(c.params.kappa0_hat.real())},
            {"kappa0_hat_im", fmt(c.params.kappa0_hat.imag())},
            {"e_mag", fmt(c.params.e_mag)},
            {"psi", fmt(c.params.psi)},
            {"psi0", fmt(c.params.psi0)},
            {"gamma1_hat", fmt(c.params.gamma1_hat)},
            {"g_chi", fmt(c.params.g_chi)},
            {"g_mu", fmt(c.g_mu)},
            {"g_phase", fmt(c.g_phase)},
            {"g_nu", fmt(c.g_nu)},
            {"g_temp", fmt(c.g_temp)},
            {"spectrum_mu_band", fmt(c.band)},
            {"omega_f", fmt(c.filter.omega_f)},
            {"gamma_f", fmt(c.filter.gamma_f)}};
}

inline void write_table(std::ostream& os, const Table& t) {
    for (std::size_t i = 0; i < t.columns.size(); ++i) os << (i ? "," : "") << t.columns[i];
    os << '\n';
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const bool labelled = r < t.labels.size();
        if (labelled) os << t.labels[r];
        for (std::size_t i = 0; i < t.rows[r].size(); ++i) os << (i || labelled ? "," : "") << fmt(t.rows[r][i]);
        os << '\n';
    }
}

inline std::vector<double> parse_list(const std::string& s, std::size_t expect, const std::string& flag) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(item, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != item.size()) throw CLI::ValidationError(flag, "bad number '" + item + "'");
        out.push_back(v);
    }
    if (expect && out.size() != expect)
        throw CLI::ValidationError(flag, "expected " + std::to_string(expect) + " comma-separated values");
    return out;
}

// Grid of n points on (-pi, pi] or [-pi/2, pi/2].
inline std::vector<double> theta_grid(std::size_t n, bool full_period) {
    std::vector<double> th(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (full_period)
            th[i] = -pi + 2.0 * pi * static_cast<double>(i + 1) / static_cast<double>(n);
        else
            th[i] = n == 1 ? 0.0 : -pi / 2 + pi * static_cast<double>(i) / static_cast<double>(n - 1);
    }
    return th;
}

// Retry once with gamma_f nudged when the filter poles collide with the cavity poles.
template <class F>
auto with_pole_fallback(DetectionFilter& f, std::ostream& err, F&& fn) {
    try {
        return fn(f);
    } catch (const Error& e) {
        if (e.code() != Errc::DegeneratePole) throw;
        f.gamma_f += 1e-6;
        err << "warning: degenerate poles, retrying with gamma_f = " << fmt(f.gamma_f) << '\n';
        return fn(f);
    }
}

struct Options {
    std::string config_path, out_path;
    std::optional<double> e, kappa0;
    std::string channel;
    std::size_t theta_grid = 201;
    std::string drift;
    std::optional<double> exp_variance;
    std::size_t samples = 100000;
    std::uint64_t seed = 1;
    double dt = 0.0;
    std::string thetas = "0";
    bool linear_only = false;
    std::string data, init = "0.932,0.013,3.141592653589793,0.007";
    bool weighted = false, fix_alpha = false;
    std::size_t max_iter = 4000;
    std::string which;
    double w_max = 5.0;
    std::size_t w_points = 101;
};

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"opo-ng: non-Gaussian statistics of a degenerate OPO below threshold"};
    app.set_version_flag("--version", version);
    app.require_subcommand(0, 1);
    Options o;

    auto add_common = [&](CLI::App* s) {
        s->add_option("--config", o.config_path, "key = value parameter file (defaults: e_mag 0.9, kappa0_hat 2)");
        s->add_option("--out", o.out_path, "write the table here instead of stdout");
    };
    auto add_point = [&](CLI::App* s) {
        s->add_option("--e", o.e, "override |E|");
        s->add_option("--kappa0", o.kappa0, "override the normalized pump damping");
    };

    auto* lam = app.add_subcommand("lambda", "near-threshold nonlinear squeezing coefficients per channel");
    add_common(lam);
    add_point(lam);

    auto* ups = app.add_subcommand("upsilon", "fourth-order coefficient Upsilon(theta) for one channel");
    add_common(ups);
    add_point(ups);
    ups->add_option("--channel", o.channel, "chi0 | mu | phase | nu | T")->required();
    ups->add_option("--theta-grid", o.theta_grid, "points on [-pi/2, pi/2] (default 201)")->check(CLI::PositiveNumber);

    auto* kur = app.add_subcommand("kurtosis", "kurtosis excess K(theta) from all configured channels");
    add_common(kur);
    add_point(kur);
    kur->add_option("--drift", o.drift, "alpha,theta0,e0: phase-locked detuning drift");
    kur->add_option("--experimental-variance", o.exp_variance, "normalize by this variance instead of the computed one");
    kur->add_option("--theta-grid", o.theta_grid, "points on (-pi, pi] with drift, [-pi/2, pi/2] without (default 201)")
        ->check(CLI::PositiveNumber);

    auto* mcc = app.add_subcommand("mc", "Monte Carlo kurtosis estimate for one channel");
    add_common(mcc);
    add_point(mcc);
    mcc->add_option("--channel", o.channel, "mu | chi0 | phase | nu | T (weight taken from the config)")->required();
    mcc->add_option("--samples", o.samples, "filtered samples per theta (default 100000)");
    mcc->add_option("--seed", o.seed, "master seed (default 1)");
    mcc->add_option("--dt", o.dt, "integration step (default 0.05/(1+E))");
    mcc->add_option("--theta", o.thetas, "comma-separated quadrature angles (default 0)");
    mcc->add_flag("--linear-only", o.linear_only, "simulate the first-order field only");

    auto* fit = app.add_subcommand("fit", "fit the drift model to measured K(theta)");
    add_common(fit);
    fit->add_option("--data", o.data, "records file with header theta,k[,variance,e2,theta_err,k_err]")->required();
    fit->add_option("--init", o.init, "e0,alpha,theta0,g starting point (default 0.932,0.013,pi,0.007)");
    fit->add_flag("--weighted", o.weighted, "weight residuals by 1/k_err^2");
    fit->add_flag("--fix-alpha", o.fix_alpha, "hold alpha at 0");
    fit->add_option("--max-iter", o.max_iter, "simplex iteration cap (default 4000)");

    auto* figs = app.add_subcommand("figs", "figure reproduction tables");
    add_common(figs);
    figs->add_option("--which", o.which, "fig1 ... fig6")->required()->check(CLI::IsMember({"fig1", "fig2", "fig3", "fig4", "fig5", "fig6"}));

    auto* spec = app.add_subcommand("spectra", "first-order time-normal spectrum entries (debug)");
    add_common(spec);
    add_point(spec);
    spec->add_option("--w-max", o.w_max, "largest frequency (default 5)");
    spec->add_option("--points", o.w_points, "grid points (default 101)")->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return Ok;
    } catch (const CLI::CallForVersion&) {
        out << version << '\n';
        return Ok;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n" << app.help();
        return Usage;
    }
    if (app.get_subcommands().empty()) {
        err << app.help();
        return Usage;
    }
    CLI::App* sub = app.get_subcommands().front();

    try {
        RunConfig cfg;
        if (!o.config_path.empty()) cfg = load_config(o.config_path);
        if (o.e) cfg.params.e_mag = *o.e;
        if (o.kappa0) cfg.params.kappa0_hat = *o.kappa0;
        check_params(cfg.params);

        Manifest man{sub->get_name(), std::nullopt, describe(cfg)};
        Table table;
        std::vector<std::string> notes;

        const std::string name = sub->get_name();
        if (name == "lambda") {
            table.columns = {"channel", "lambda"};
            for (const auto& row : lambda_table(cfg.params)) {
                table.labels.emplace_back(to_string(row.kind));
                table.rows.push_back({row.value});
            }
        } else if (name == "upsilon") {
            const auto kind = parse_noise_kind(o.channel);
            if (!kind || *kind == NoiseKind::ChiSignal) throw CLI::ValidationError("--channel", "unknown channel " + o.channel);
            const auto ch = make_channel(*kind, 1.0, cfg.band);
            man.config.emplace_back("channel", std::string(to_string(*kind)));
            table.columns = {"theta", "upsilon"};
            auto f = cfg.filter;
            for (double th : theta_grid(o.theta_grid, false)) {
                const double u = with_pole_fallback(f, err, [&](const DetectionFilter& ff) {
                    return upsilon_theta(ch, th, cfg.params, ff);
                });
                table.rows.push_back({th, u});
            }
        } else if (name == "kurtosis") {
            const auto channels = cfg.channels();
            table.columns = {"theta", "e_mag", "k"};
            for (const auto& c : channels) table.columns.push_back("k_" + short_name(c.kind));
            std::vector<double> th;
            DriftModel d{cfg.params.e_mag, 0.0, 0.0, 1.0, cfg.params.kappa0_hat.real()};
            if (!o.drift.empty()) {
                const auto v = parse_list(o.drift, 3, "--drift");
                d.alpha = v[0];
                d.theta0 = v[1];
                d.e0 = v[2];
                man.config.emplace_back("drift", o.drift);
            }
            th = theta_grid(o.theta_grid, !o.drift.empty());
            std::vector<double> variances;
            if (o.exp_variance) {
                variances.assign(th.size(), *o.exp_variance);
                man.config.emplace_back("experimental_variance", fmt(*o.exp_variance));
            }
            auto f = cfg.filter;
            const auto curve = with_pole_fallback(f, err, [&](const DetectionFilter& ff) {
                return kurtosis_curve_with_drift(th, d, channels, ff, cfg.params.kappa0_hat.real(),
                                                 o.exp_variance ? &variances : nullptr);
            });
            for (const auto& pt : curve) {
                std::vector<double> row{pt.theta, pt.e_mag, pt.k_value};
                for (const auto& c : channels) {
                    double v = 0.0;
                    for (const auto& [k, x] : pt.per_channel)
                        if (k == c.kind) v = x;
                    row.push_back(v);
                }
                table.rows.push_back(row);
            }
        } else if (name == "mc") {
            const auto kind = parse_noise_kind(o.channel);
            if (!kind || *kind == NoiseKind::ChiSignal) throw CLI::ValidationError("--channel", "unknown channel " + o.channel);
            NoiseChannel ch = make_channel(*kind, 0.0, cfg.band);
            for (const auto& c : cfg.channels())
                if (c.kind == *kind) ch = c;
            McConfig mc;
            mc.n_samples = o.samples;
            mc.seed = o.seed;
            mc.dt = o.dt;
            mc.second_order = !o.linear_only;
            man.seed = o.seed;
            man.config.emplace_back("channel", std::string(to_string(*kind)));
            man.config.emplace_back("samples", std::to_string(o.samples));
            man.config.emplace_back("dt", fmt(resolved_dt(cfg.params, mc)));
            const auto th = parse_list(o.thetas, 0, "--theta");
            const auto res = run_mc(ch, cfg.params, cfg.filter, mc, th);
            table.columns = {"theta", "k_hat", "stderr", "n", "k_analytic"};
            for (const auto& r : res) {
                const auto& est = o.linear_only ? r.linear : r.kurtosis;
                const double ka = o.linear_only ? 0.0 : kurtosis_total(r.theta, {ch}, cfg.params, cfg.filter);
                table.rows.push_back({r.theta, est.k_hat, est.stderr, static_cast<double>(est.n_effective), ka});
            }
        } else if (name == "fit") {
            std::vector<Rejection> rejected;
            const auto records = load_records(o.data, &rejected);
            for (const auto& r : rejected) err << "warning: " << o.data << ":" << r.line << ": rejected, " << r.reason << '\n';
            const auto v = parse_list(o.init, 4, "--init");
            FitParams init;
            init.drift = DriftModel{v[0], v[1], v[2], 1.0, cfg.params.kappa0_hat.real()};
            init.g_mu = v[3];
            FitOptions fo;
            fo.weighted = o.weighted;
            fo.fix_alpha = o.fix_alpha;
            fo.max_iter = o.max_iter;
            fo.band = cfg.band;
            man.config.emplace_back("data", o.data);
            man.config.emplace_back("init", o.init);
            const auto r = fit_drift_model(records, init, cfg.filter, cfg.params.kappa0_hat.real(), fo);
            notes.push_back("residual = " + fmt(r.residual));
            notes.push_back("iterations = " + std::to_string(r.iterations));
            table.columns = {"parameter", "value", "half_width", "flat"};
            table.labels = {"e0", "alpha", "theta0", "g_mu"};
            const std::array<double, 4> vals{r.best.drift.e0, r.best.drift.alpha, r.best.drift.theta0, r.best.g_mu};
            for (int i = 0; i < 4; ++i) table.rows.push_back({vals[i], r.half_width[i], r.flat[i] ? 1.0 : 0.0});
        } else if (name == "figs") {
            man.config.emplace_back("figure", o.which);
            table = emit_figure_data(*parse_figure(o.which), cfg.params, cfg.filter, cfg.band);
        } else if (name == "spectra") {
            table.columns = {"w", "s_aa_re", "s_aa_im", "s_aad_re", "s_aad_im"};
            for (double w : linspace(-o.w_max, o.w_max, o.w_points)) {
                const auto s = sigma11_tn(w, cfg.params);
                table.rows.push_back({w, s.aa.real(), s.aa.imag(), s.aad.real(), s.aad.imag()});
            }
        }

        std::ofstream file;
        if (!o.out_path.empty()) {
            file.open(o.out_path);
            if (!file) {
                err << "error: cannot write " << o.out_path << '\n';
                return Io;
            }
        }
        std::ostream& os = o.out_path.empty() ? out : file;
        man.write(os);
        for (const auto& n : notes) os << "# " << n << '\n';
        write_table(os, table);
        return Ok;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n' << sub->help();
        return Usage;
    } catch (const Error& e) {
        err << "error: " << to_string(e.code()) << ": " << e.what() << '\n';
        return exit_code(e.code());
    }
}

}  // namespace opo_ng::cli

#endif
