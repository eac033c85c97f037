#ifndef OPO_NG_CONFIG_HPP
#define OPO_NG_CONFIG_HPP

#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "errors.hpp"
#include "model.hpp"

namespace opo_ng {

struct RunConfig {
    OpoParams params = tuned_params(0.9, 2.0);
    DetectionFilter filter;
    double g_mu = 3e-2;
    double g_phase = 1e-3;
    double g_nu = 1e-3;
    double g_temp = 5e-5;
    double band = 0.05;
    std::map<std::string, std::string> raw;  // echoed into run manifests

    std::vector<NoiseChannel> channels() const {
        std::vector<NoiseChannel> out;
        auto add = [&](NoiseKind k, double g) {
            if (g != 0.0) out.push_back(make_channel(k, g, band));
        };
        add(NoiseKind::ChiPump, params.g_chi);
        add(NoiseKind::PumpAmplitude, g_mu);
        add(NoiseKind::PumpPhase, g_phase);
        add(NoiseKind::CavityDetuning, g_nu);
        add(NoiseKind::CrystalTemperature, g_temp);
        return out;
    }
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return {};
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

}  // namespace detail

// key = value lines; '#' comments. Unknown keys and bad numbers are errors.
inline RunConfig parse_config(std::istream& in, const std::string& name = "<config>") {
    RunConfig c;
    std::map<std::string, double*> slots{
        {"e_mag", &c.params.e_mag},         {"psi", &c.params.psi},          {"psi0", &c.params.psi0},
        {"gamma1_hat", &c.params.gamma1_hat}, {"g_chi", &c.params.g_chi},   
        {"g_mu", &c.g_mu},                  {"g_phase", &c.g_phase},         {"g_nu", &c.g_nu},
        {"g_temp", &c.g_temp},              {"spectrum_mu_band", &c.band},   {"omega_f", &c.filter.omega_f},
        {"gamma_f", &c.filter.gamma_f}};
    double k_re = c.params.kappa0_hat.real(), k_im = c.params.kappa0_hat.imag();
    slots["kappa0_hat"] = &k_re;
    slots["kappa0_hat_im"] = &k_im;

    std::string line;
    std::size_t lineno = 0;
    auto fail = [&](const std::string& msg) {
        throw Error(Errc::ParseError, name + ":" + std::to_string(lineno) + ": " + msg);
    };
    while (std::getline(in, line)) {
        ++lineno;
        if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) fail("expected key = value");
        const auto key = detail::trim(line.substr(0, eq));
        const auto val = detail::trim(line.substr(eq + 1));
        auto it = slots.find(key);
        if (it == slots.end()) fail("unknown key '" + key + "'");
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(val, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (val.empty() || used != val.size()) fail("bad number '" + val + "' for " + key);
        *it->second = v;
        c.raw[key] = val;
    }
    c.params.kappa0_hat = cplx(k_re, k_im);
    try {
        check_params(c.params);
        for (const auto& ch : c.channels()) check_channel(ch);
    } catch (const Error& e) {
        throw Error(e.code(), name + ": " + e.what());
    }
    if (!(c.filter.gamma_f > 0.0)) throw Error(Errc::NonPositiveRate, name + ": gamma_f must be positive");
    return c;
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::ParseError, "cannot open " + path);
    return parse_config(in, path);
}

}  // namespace opo_ng

#endif
