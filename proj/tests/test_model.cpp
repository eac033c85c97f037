#include <catch_amalgamated.hpp>

#include <sstream>

#include <opo_ng.hpp>

#include "oracles.hpp"

using namespace opo_ng;
using Catch::Approx;

TEST_CASE("normalize_params examples") {
    RawInputs r;
    r.gamma_signal = 3.0;
    r.gamma_pump = 6.0;
    r.gamma_out = 3.0;
    r.coupling = 0.7;
    const auto p0 = normalize_params(r);
    CHECK(p0.e_mag == 0.0);
    CHECK(p0.kappa0_hat == cplx(2.0, 0.0));
    CHECK(p0.tuned());

    r.pump_amplitude = 0.5 * threshold_amplitude(r);
    CHECK(normalize_params(r).e_mag == Approx(0.5).epsilon(1e-14));

    r.pump_amplitude = 1.01 * threshold_amplitude(r);
    try {
        normalize_params(r);
        FAIL("expected AboveThreshold");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::AboveThreshold);
    }
    r.pump_amplitude = 0.0;
    r.gamma_pump = 0.0;
    try {
        normalize_params(r);
        FAIL("expected NonPositiveRate");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::NonPositiveRate);
    }
}

TEST_CASE("normalize_params is scale invariant") {
    RawInputs r;
    r.gamma_signal = 1.3;
    r.detuning_signal = 0.2;
    r.gamma_pump = 2.9;
    r.detuning_pump = -0.4;
    r.gamma_out = 0.8;
    r.coupling = 0.6;
    r.pump_amplitude = 0.7 * threshold_amplitude(r);
    const auto a = normalize_params(r);
    for (double s : {0.01, 3.0, 1e4}) {
        RawInputs q = r;
        q.gamma_signal *= s;
        q.detuning_signal *= s;
        q.gamma_pump *= s;
        q.detuning_pump *= s;
        q.gamma_out *= s;
        q.coupling *= s;
        q.pump_amplitude *= s;
        const auto b = normalize_params(q);
        CHECK(std::abs(b.kappa0_hat - a.kappa0_hat) < 1e-12);
        CHECK(b.e_mag == Approx(a.e_mag).epsilon(1e-12));
        CHECK(b.psi == Approx(a.psi).margin(1e-12));
        CHECK(b.psi0 == Approx(a.psi0).margin(1e-12));
        CHECK(b.gamma1_hat == Approx(a.gamma1_hat).epsilon(1e-12));
    }
}

TEST_CASE("parameter invariants") {
    OpoParams p;
    p.e_mag = 1.0;
    CHECK_THROWS_AS(check_params(p), Error);
    p.e_mag = 0.5;
    p.kappa0_hat = cplx(-1.0, 0.0);
    CHECK_THROWS_AS(check_params(p), Error);
    p.kappa0_hat = 2.0;
    p.gamma1_hat = 0.0;
    CHECK_THROWS_AS(check_params(p), Error);
    p.gamma1_hat = 1.0;
    CHECK(p.tuned());
    p.psi = 0.1;
    CHECK_FALSE(p.tuned());
    p.psi = 0.0;
    p.kappa0_hat = cplx(2.0, 0.1);
    CHECK_FALSE(p.tuned());
}

TEST_CASE("channel spectra follow their kind") {
    CHECK_THROWS_AS(check_channel({NoiseKind::PumpPhase, 1e-3, DeltaLike{}}), Error);
    CHECK_THROWS_AS(check_channel({NoiseKind::CrystalTemperature, 1e-3, White{}}), Error);
    CHECK_THROWS_AS(check_channel({NoiseKind::ChiPump, 1e-3, UniformBand{0.05}}), Error);
    CHECK_THROWS_AS(check_channel({NoiseKind::PumpAmplitude, 1e-3, UniformBand{0.0}}), Error);
    CHECK_THROWS_AS(check_channel({NoiseKind::PumpAmplitude, -1.0, White{}}), Error);
    CHECK_NOTHROW(check_channel({NoiseKind::PumpAmplitude, 1e-3, UniformBand{0.05}}));
    CHECK_NOTHROW(check_channel({NoiseKind::PumpAmplitude, 1e-3, White{}}));
    for (auto k : coupling_kinds) CHECK_NOTHROW(make_channel(k, 1e-3));
}

TEST_CASE("uniform band carries unit variance") {
    oracle::Gsl q;
    for (double wm : {0.01, 0.05, 1.3}) {
        const SpectrumModel s = UniformBand{wm};
        const double v = q.range([&](double w) { return spectral_density(s, w); }, -wm, wm, 1e-12) / (2.0 * pi);
        CHECK(v == Approx(1.0).epsilon(1e-9));
        CHECK(spectral_density(s, 1.01 * wm) == 0.0);
    }
    CHECK(spectral_density(White{}, 123.0) == 1.0);
}

TEST_CASE("validity_check examples") {
    auto all = [](double g) {
        std::vector<NoiseChannel> v;
        for (auto k : coupling_kinds) v.push_back(make_channel(k, g));
        return v;
    };
    CHECK(validity_check(tuned_params(0.99), all(0.05)).valid);
    CHECK_FALSE(validity_check(tuned_params(0.999), {make_channel(NoiseKind::PumpAmplitude, 0.05)}).valid);
    const auto none = validity_check(tuned_params(0.7), {});
    CHECK(none.valid);
    CHECK(none.margin == Approx(0.3));
}

TEST_CASE("validity_check is monotone in the weights") {
    const auto p = tuned_params(0.98);
    bool was_valid = true;
    for (double g = 0.0; g < 0.3; g += 0.005) {
        const bool v = validity_check(p, {make_channel(NoiseKind::PumpPhase, g), make_channel(NoiseKind::CavityDetuning, 0.05)}).valid;
        if (!was_valid) CHECK_FALSE(v);
        was_valid = v;
    }
    CHECK_FALSE(was_valid);
}

TEST_CASE("channel names round trip") {
    for (auto k : all_noise_kinds) CHECK(parse_noise_kind(to_string(k)) == k);
    CHECK(parse_noise_kind("mu") == NoiseKind::PumpAmplitude);
    CHECK(parse_noise_kind("T") == NoiseKind::CrystalTemperature);
    CHECK(parse_noise_kind("chi0") == NoiseKind::ChiPump);
    CHECK_FALSE(parse_noise_kind("bogus").has_value());
}

TEST_CASE("config file parsing") {
    std::istringstream in("# comment\n e_mag = 0.87\nkappa0_hat=5\n\ng_mu = 0.01 # trailing\nomega_f = 0.4\n");
    const auto c = parse_config(in);
    CHECK(c.params.e_mag == 0.87);
    CHECK(c.params.kappa0_hat == cplx(5.0, 0.0));
    CHECK(c.g_mu == 0.01);
    CHECK(c.g_phase == 1e-3);
    CHECK(c.g_temp == 5e-5);
    CHECK(c.params.g_chi == 1e-6);
    CHECK(c.filter.omega_f == 0.4);
    CHECK(c.channels().size() == 5);

    std::istringstream defaults("");
    const auto d = parse_config(defaults);
    CHECK(d.params.e_mag == 0.9);
    CHECK(d.g_mu == 3e-2);
    CHECK(d.g_nu == 1e-3);

    auto fails_at = [](const std::string& text, const std::string& where) {
        std::istringstream s(text);
        try {
            parse_config(s, "cfg");
            return false;
        } catch (const Error& e) {
            return e.code() == Errc::ParseError && std::string(e.what()).find(where) != std::string::npos;
        }
    };
    CHECK(fails_at("e_mag = 0.5\nfoo = 1\n", "cfg:2"));
    CHECK(fails_at("e_mag = 0.5x\n", "cfg:1"));
    CHECK(fails_at("e_mag\n", "cfg:1"));
    std::istringstream above("e_mag = 1.2\n");
    CHECK_THROWS_AS(parse_config(above), Error);
}
