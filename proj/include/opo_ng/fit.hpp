#ifndef OPO_NG_FIT_HPP
#define OPO_NG_FIT_HPP

#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <gsl/gsl_eigen.h>
#include <gsl/gsl_errno.h>
#include <gsl/gsl_linalg.h>
#include <gsl/gsl_multimin.h>

#include "errors.hpp"
#include "intracavity.hpp"
#include "kurtosis.hpp"
#include "model.hpp"

namespace opo_ng {

struct ExperimentRecord {
    double theta = 0.0;
    double kurtosis = 0.0;
    std::optional<double> variance, e_squared, theta_err, k_err;
};

struct Rejection {
    std::size_t line;
    std::string reason;
};

namespace detail {

inline std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',' || c == ' ' || c == '\t' || c == ';') {
            if (!cur.empty()) out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

inline std::optional<double> parse_double(const std::string& s) {
    if (s.empty() || s == "NA" || s == "nan" || s == "-") return std::nullopt;
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
}

}  // namespace detail

// Header-tagged delimited text: theta,k[,variance,e2,theta_err,k_err] in any order; '#' starts a comment.
inline std::vector<ExperimentRecord> load_records(const std::string& path, std::vector<Rejection>* rejected = nullptr) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::ParseError, "cannot open " + path);
    std::vector<ExperimentRecord> out;
    std::vector<std::string> header;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
        auto fields = detail::split_fields(line);
        if (fields.empty()) continue;
        if (header.empty()) {
            header = fields;
            bool has_theta = false, has_k = false;
            for (const auto& c : header) {
                if (c == "theta") has_theta = true;
                else if (c == "k") has_k = true;
                else if (c != "variance" && c != "e2" && c != "theta_err" && c != "k_err")
                    throw Error(Errc::ParseError, path + ":" + std::to_string(lineno) + ": unknown column '" + c + "'");
            }
            if (!has_theta || !has_k)
                throw Error(Errc::ParseError, path + ":" + std::to_string(lineno) + ": header needs theta and k");
            continue;
        }
        if (fields.size() > header.size())
            throw Error(Errc::ParseError, path + ":" + std::to_string(lineno) + ": too many fields");
        ExperimentRecord r;
        bool have_theta = false, have_k = false;
        for (std::size_t i = 0; i < fields.size(); ++i) {
            std::optional<double> v;
            try {
                v = detail::parse_double(fields[i]);
            } catch (const std::invalid_argument&) {
                throw Error(Errc::ParseError, path + ":" + std::to_string(lineno) + ":" + std::to_string(i + 1) +
                                                  ": not a number '" + fields[i] + "'");
            }
            const auto& col = header[i];
            if (col == "theta") { have_theta = v.has_value(); r.theta = v.value_or(0.0); }
            else if (col == "k") { have_k = v.has_value(); r.kurtosis = v.value_or(0.0); }
            else if (col == "variance") r.variance = v;
            else if (col == "e2") r.e_squared = v;
            else if (col == "theta_err") r.theta_err = v;
            else if (col == "k_err") r.k_err = v;
        }
        std::string why;
        if (!have_theta || !have_k) why = "missing theta or k";
        else if (!(r.theta > -pi && r.theta <= pi)) why = "theta outside (-pi, pi]";
        else if (r.k_err && *r.k_err < 0.0) why = "negative k_err";
        if (!why.empty()) {
            if (rejected) rejected->push_back({lineno, why});
            continue;
        }
        out.push_back(r);
    }
    if (out.empty()) throw Error(Errc::EmptyDataset, path + " has no usable records");
    return out;
}

struct FitParams {
    DriftModel drift;
    double g_mu = 0.007;
};

struct FitOptions {
    std::size_t max_iter = 4000;
    double size_tol = 1e-9;
    bool weighted = false;
    bool fix_alpha = false;
    double band = 0.05;
};

struct FitResult {
    FitParams best;
    double residual = 0.0;
    // Order: e0, alpha, theta0, g_mu. Infinite half-width marks a flat direction.
    std::array<double, 4> half_width{};
    std::array<bool, 4> flat{};
    std::size_t iterations = 0;
    std::vector<double> history;  // best objective after each simplex step
};

// Single-channel amplitude-noise model K(theta) with the drift-shifted excitation.
inline double model_kurtosis(const FitParams& fp, double theta, const DetectionFilter& f, double kappa0,
                             std::optional<double> variance, double band = 0.05) {
    const double e = excitation_with_detuning(fp.drift, theta);
    if (!(e < 1.0)) throw Error(Errc::AboveThreshold, "drifted |E| at or above threshold");
    OpoParams p;
    p.e_mag = e;
    p.kappa0_hat = kappa0;
    const NoiseChannel ch{NoiseKind::PumpAmplitude, fp.g_mu, UniformBand{band}};
    return kurtosis_total(theta, {ch}, p, f, variance);
}

namespace detail {

struct FitProblem {
    const std::vector<ExperimentRecord>* records;
    DetectionFilter filter;
    double kappa0;
    FitOptions opt;
    FitParams base;
    std::array<int, 4> map;  // parameter slot -> position in the free vector, or -1
    std::size_t evaluations = 0;

    FitParams unpack(const double* x) const {
        FitParams fp = base;
        if (map[0] >= 0) fp.drift.e0 = x[map[0]];
        if (map[1] >= 0) fp.drift.alpha = x[map[1]];
        if (map[2] >= 0) fp.drift.theta0 = x[map[2]];
        if (map[3] >= 0) fp.g_mu = x[map[3]];
        return fp;
    }

    double penalty(const FitParams& fp) const {
        double v = 0.0;
        auto out = [&](double x, double lo, double hi) {
            if (x <= lo) v += lo - x + 1e-3;
            if (x >= hi) v += x - hi + 1e-3;
        };
        out(fp.drift.e0, 0.0, 1.0);
        out(fp.drift.alpha, -0.1, 0.1);
        out(fp.drift.theta0, -pi - 1e-12, pi + 1e-12);
        out(fp.g_mu, 0.0, 0.1);
        return v;
    }

    double rss(const FitParams& fp) {
        ++evaluations;
        const double pen = penalty(fp);
        if (pen > 0.0) return 1e6 * (1.0 + pen);
        return raw_rss(fp);
    }

    // Weighted residuals; empty when the model cannot be evaluated.
    std::vector<double> residuals(const FitParams& fp) const {
        std::vector<double> r;
        r.reserve(records->size());
        for (const auto& rec : *records) {
            double k;
            try {
                k = model_kurtosis(fp, rec.theta, filter, kappa0, rec.variance, opt.band);
            } catch (const Error&) {
                return {};
            }
            const double w = (opt.weighted && rec.k_err && *rec.k_err > 0.0) ? 1.0 / *rec.k_err : 1.0;
            r.push_back(w * (k - rec.kurtosis));
        }
        return r;
    }

    double raw_rss(const FitParams& fp) const {
        const auto r = residuals(fp);
        if (r.empty()) return 2e6;
        double s = 0.0;
        for (double x : r) s += x * x;
        return s;
    }
};

template <auto Free>
struct GslFree {
    template <class T>
    void operator()(T* p) const { Free(p); }
};
using GslVector = std::unique_ptr<gsl_vector, GslFree<gsl_vector_free>>;
using GslMatrix = std::unique_ptr<gsl_matrix, GslFree<gsl_matrix_free>>;
using GslPermutation = std::unique_ptr<gsl_permutation, GslFree<gsl_permutation_free>>;
using GslEigen = std::unique_ptr<gsl_eigen_symmv_workspace, GslFree<gsl_eigen_symmv_free>>;
using GslMinimizer = std::unique_ptr<gsl_multimin_fminimizer, GslFree<gsl_multimin_fminimizer_free>>;

inline GslMatrix matrix(std::size_t r, std::size_t c) { return GslMatrix(gsl_matrix_alloc(r, c)); }

inline double fit_objective(const gsl_vector* x, void* ctx) {
    auto* pr = static_cast<FitProblem*>(ctx);
    return pr->rss(pr->unpack(x->data));
}

}  // namespace detail

// Least-squares drift-model fit with the Nelder-Mead simplex; half-widths from the RSS curvature.
inline FitResult fit_drift_model(const std::vector<ExperimentRecord>& records, const FitParams& init,
                                 const DetectionFilter& f, double kappa0, const FitOptions& opt = {}) {
    if (records.size() < 8) throw Error(Errc::InvalidArgument, "fit needs at least 8 records");
    double lo = records.front().theta, hi = lo;
    for (const auto& r : records) {
        lo = std::min(lo, r.theta);
        hi = std::max(hi, r.theta);
    }
    if (hi - lo <= pi / 2) throw Error(Errc::InvalidArgument, "records must span more than half a period in theta");

    detail::FitProblem pr{&records, f, kappa0, opt, init, {0, 1, 2, 3}};
    if (opt.fix_alpha) {
        pr.base.drift.alpha = 0.0;
        pr.map = {0, -1, 1, 2};
    }
    const std::array<double, 4> full{init.drift.e0, pr.base.drift.alpha, init.drift.theta0, init.g_mu};
    const std::array<double, 4> step{0.005, 0.003, 0.2, 0.0007};
    const std::size_t n = opt.fix_alpha ? 3 : 4;

    detail::GslVector x(gsl_vector_alloc(n)), ss(gsl_vector_alloc(n));
    for (int slot = 0; slot < 4; ++slot)
        if (pr.map[slot] >= 0) {
            gsl_vector_set(x.get(), pr.map[slot], full[slot]);
            gsl_vector_set(ss.get(), pr.map[slot], step[slot]);
        }
    gsl_multimin_function fn{&detail::fit_objective, n, &pr};
    detail::GslMinimizer mz(gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, n));
    gsl_multimin_fminimizer_set(mz.get(), &fn, x.get(), ss.get());

    FitResult res;
    int status = GSL_CONTINUE;
    std::size_t it = 0;
    while (status == GSL_CONTINUE && it < opt.max_iter) {
        ++it;
        if (gsl_multimin_fminimizer_iterate(mz.get()) != GSL_SUCCESS) break;
        res.history.push_back(mz->fval);
        status = gsl_multimin_test_size(gsl_multimin_fminimizer_size(mz.get()), opt.size_tol);
    }
    res.iterations = it;
    res.best = pr.unpack(mz->x->data);
    res.residual = mz->fval;
    if (status != GSL_SUCCESS)
        throw Error(Errc::NonConvergence, "simplex did not converge in " + std::to_string(it) + " iterations");

    // Gauss-Newton curvature J^T J from central-difference residual derivatives.
    std::vector<int> slots;
    for (int sl = 0; sl < 4; ++sl)
        if (pr.map[sl] >= 0) slots.push_back(sl);
    const std::array<double, 4> scale{1e-5, 1e-5, 1e-3, 1e-6};
    auto shifted = [&](int slot, double h) {
        FitParams fp = res.best;
        std::array<double*, 4> v{&fp.drift.e0, &fp.drift.alpha, &fp.drift.theta0, &fp.g_mu};
        *v[slot] += h;
        return pr.residuals(fp);
    };
    const std::size_t k = slots.size();
    const std::size_t m = records.size();
    std::vector<std::vector<double>> jac(k);
    for (std::size_t i = 0; i < k; ++i) {
        const double h = scale[slots[i]];
        const auto up = shifted(slots[i], h), dn = shifted(slots[i], -h);
        jac[i].assign(m, 0.0);
        if (up.size() == m && dn.size() == m)
            for (std::size_t r = 0; r < m; ++r) jac[i][r] = (up[r] - dn[r]) / (2.0 * h);
    }
    auto jtj = detail::matrix(k, k);
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < k; ++j) {
            double acc = 0.0;
            for (std::size_t r = 0; r < m; ++r) acc += jac[i][r] * jac[j][r];
            gsl_matrix_set(jtj.get(), i, j, acc);
        }
    // Flat directions from the spectrum of the column-normalized J^T J.
    auto hs = detail::matrix(k, k);
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < k; ++j) {
            const double di = gsl_matrix_get(jtj.get(), i, i), dj = gsl_matrix_get(jtj.get(), j, j);
            const double norm = std::sqrt(std::max(di, 1e-300) * std::max(dj, 1e-300));
            gsl_matrix_set(hs.get(), i, j, gsl_matrix_get(jtj.get(), i, j) / norm);
        }
    detail::GslVector ev(gsl_vector_alloc(k));
    auto evec = detail::matrix(k, k);
    detail::GslEigen ws(gsl_eigen_symmv_alloc(k));
    gsl_eigen_symmv(hs.get(), ev.get(), evec.get(), ws.get());
    std::array<bool, 4> flat{};
    for (std::size_t i = 0; i < k; ++i) {
        if (gsl_matrix_get(jtj.get(), i, i) <= 0.0) flat[slots[i]] = true;
        if (gsl_vector_get(ev.get(), i) <= 1e-10)
            for (std::size_t r = 0; r < k; ++r)
                if (std::abs(gsl_matrix_get(evec.get(), r, i)) > 0.5) flat[slots[r]] = true;
    }

    const std::size_t dof = m > k ? m - k : 1;
    const double s2 = res.residual / static_cast<double>(dof);
    res.half_width.fill(0.0);
    std::vector<std::size_t> live;
    for (std::size_t i = 0; i < k; ++i)
        if (!flat[slots[i]]) live.push_back(i);
    if (!live.empty()) {
        const std::size_t n_live = live.size();
        auto hl = detail::matrix(n_live, n_live);
        for (std::size_t i = 0; i < n_live; ++i)
            for (std::size_t j = 0; j < n_live; ++j) gsl_matrix_set(hl.get(), i, j, gsl_matrix_get(jtj.get(), live[i], live[j]));
        detail::GslPermutation perm(gsl_permutation_alloc(n_live));
        auto inv = detail::matrix(n_live, n_live);
        int sign = 0;
        gsl_error_handler_t* old = gsl_set_error_handler_off();
        const bool ok = gsl_linalg_LU_decomp(hl.get(), perm.get(), &sign) == GSL_SUCCESS &&
                        gsl_linalg_LU_invert(hl.get(), perm.get(), inv.get()) == GSL_SUCCESS;
        gsl_set_error_handler(old);
        for (std::size_t i = 0; i < n_live; ++i) {
            const double c = ok ? gsl_matrix_get(inv.get(), i, i) : -1.0;
            res.half_width[slots[live[i]]] = c > 0.0 ? 1.96 * std::sqrt(s2 * c) : std::numeric_limits<double>::infinity();
        }
    }
    for (int sl = 0; sl < 4; ++sl)
        if (flat[sl]) res.half_width[sl] = std::numeric_limits<double>::infinity();
    res.flat = flat;
    return res;
}

enum class Figure { Fig1, Fig2, Fig3, Fig4, Fig5, Fig6 };

inline std::optional<Figure> parse_figure(std::string_view s) {
    if (s == "fig1") return Figure::Fig1;
    if (s == "fig2") return Figure::Fig2;
    if (s == "fig3") return Figure::Fig3;
    if (s == "fig4") return Figure::Fig4;
    if (s == "fig5") return Figure::Fig5;
    if (s == "fig6") return Figure::Fig6;
    return std::nullopt;
}

struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;
    std::vector<std::string> labels;  // optional leading text column, one per row
};

inline std::string short_name(NoiseKind k) {
    switch (k) {
        case NoiseKind::ChiSignal: return "chi";
        case NoiseKind::ChiPump: return "chi0";
        case NoiseKind::PumpAmplitude: return "mu";
        case NoiseKind::PumpPhase: return "phase";
        case NoiseKind::CavityDetuning: return "nu";
        case NoiseKind::CrystalTemperature: return "T";
    }
    return "?";
}

inline std::vector<double> linspace(double a, double b, std::size_t n) {
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = n == 1 ? a : a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1);
    return v;
}

inline std::vector<double> logspace(double a, double b, std::size_t n) {
    auto v = linspace(std::log10(a), std::log10(b), n);
    for (auto& x : v) x = std::pow(10.0, x);
    return v;
}

// Tables for the six figures; params supplies kappa0_hat where the figure does not fix it.
inline Table emit_figure_data(Figure fig, const OpoParams& params, const DetectionFilter& f, double band = 0.05) {
    Table t;
    const double k0 = params.kappa0_hat.real();
    auto chan = [&](NoiseKind k) { return NoiseChannel{k, 1.0, default_spectrum(k, band)}; };
    switch (fig) {
        case Figure::Fig1: {
            t.columns = {"e_mag"};
            for (double kk : {5.0, 10.0})
                for (auto k : coupling_kinds)
                    t.columns.push_back("lambda_" + short_name(k) + "_k" + std::to_string(static_cast<int>(kk)));
            auto grid = linspace(0.0, 0.99, 100);
            grid.push_back(0.995);
            grid.push_back(0.999);
            for (double e : grid) {
                std::vector<double> row{e};
                for (double kk : {5.0, 10.0})
                    for (auto k : coupling_kinds) row.push_back(lambda_nl(k, tuned_params(e, kk)));
                t.rows.push_back(row);
            }
            break;
        }
        case Figure::Fig2: {
            t.columns = {"theta"};
            const std::array<double, 3> es{0.71, 0.87, 0.975};
            std::vector<UpsilonCoeffs> cs;
            for (double e : es)
                for (auto k : coupling_kinds) {
                    char buf[32];
                    std::snprintf(buf, sizeof buf, "_e%.3f", e);
                    t.columns.push_back("upsilon_" + short_name(k) + buf);
                    cs.push_back(upsilon_coeffs(chan(k), tuned_params(e, k0), f));
                }
            for (int i = -100; i <= 100; ++i) {
                const double th = i * pi / 200.0;
                std::vector<double> row{th};
                for (const auto& c : cs) row.push_back(c(th));
                t.rows.push_back(row);
            }
            break;
        }
        case Figure::Fig3: {
            t.columns = {"kappa0_hat"};
            for (auto k : coupling_kinds) t.columns.push_back("max_upsilon_" + short_name(k));
            for (double kk : linspace(2.0, 10.0, 33)) {
                std::vector<double> row{kk};
                for (auto k : coupling_kinds) {
                    const auto c = upsilon_coeffs(chan(k), tuned_params(0.975, kk), f);
                    double best = -std::numeric_limits<double>::infinity();
                    for (int i = -100; i <= 100; ++i) best = std::max(best, c(i * pi / 200.0));
                    row.push_back(best);
                }
                t.rows.push_back(row);
            }
            break;
        }
        case Figure::Fig4: {
            t.columns = {"one_minus_e2", "upsilon0_chi0", "upsilon0_mu"};
            for (double x : logspace(0.01, 0.9, 41)) {
                const auto p = tuned_params(std::sqrt(1.0 - x), k0);
                t.rows.push_back({x, upsilon_theta(chan(NoiseKind::ChiPump), 0.0, p, f),
                                  upsilon_theta(chan(NoiseKind::PumpAmplitude), 0.0, p, f)});
            }
            break;
        }
        case Figure::Fig5: {
            t.columns = {"theta", "e_mag", "k_theta"};
            const DriftModel d{0.932, 0.013, pi, 1.0, k0};
            std::vector<double> th;
            for (int i = -99; i <= 100; ++i) th.push_back(i * pi / 100.0);
            const auto curve = kurtosis_curve_with_drift(th, d, {NoiseChannel{NoiseKind::PumpAmplitude, 0.007, UniformBand{band}}}, f, k0);
            for (const auto& pt : curve) t.rows.push_back({pt.theta, pt.e_mag, pt.k_value});
            break;
        }
        case Figure::Fig6: {
            t.columns = {"e2", "g2_upsilon0_mu", "k0_mu"};
            const double g = 0.007;
            for (double e2 : {0.5, 0.7, 0.8, 0.9, 0.95}) {
                const auto p = tuned_params(std::sqrt(e2), k0);
                const double u = upsilon_theta(chan(NoiseKind::PumpAmplitude), 0.0, p, f);
                const double v = linear_filtered_variance(0.0, p, f);
                t.rows.push_back({e2, g * g * u, g * g * u / (v * v)});
            }
            break;
        }
    }
    return t;
}

}  // namespace opo_ng

#endif
