#include <catch_amalgamated.hpp>

#include <Eigen/Dense>

#include <opo_ng.hpp>

using namespace opo_ng;
using Catch::Approx;

namespace {

// Zero-lag covariance of d alpha = -A alpha dt + noise with diffusion D: A S + S A^T = D.
CMat2 lyapunov(const CMat2& a, const CMat2& d) {
    Eigen::Matrix2cd am;
    am << a.aa, a.aad, a.ada, a.adad;
    const Eigen::Matrix2cd id = Eigen::Matrix2cd::Identity();
    Eigen::Matrix4cd l;
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            for (int k = 0; k < 2; ++k)
                for (int m = 0; m < 2; ++m) l(2 * i + j, 2 * k + m) = am(i, k) * id(j, m) + id(i, k) * am(j, m);
    Eigen::Vector4cd rhs(d.aa, d.aad, d.ada, d.adad);
    const Eigen::Vector4cd s = l.partialPivLu().solve(rhs);
    return {s(0), s(1), s(2), s(3)};
}

// Second-order weight of a frozen unit-variance perturbation g x B plus the mean pump shift g^2 b2,
// from central differences of the exact static covariance.
double static_lambda(NoiseKind kind, const OpoParams& p, double b2) {
    const cplx c = p.coupling();
    const CMat2 a0{p.kappa_hat(), -c, -std::conj(c), std::conj(p.kappa_hat())};
    const CMat2 d = source_diffusion(p);
    const CMat2 b = channel_coupling(kind, 0.0, p);
    auto avg = [&](double g) {
        const CMat2 shift = CMat2::swap() * (g * g * b2);
        return (lyapunov(a0 - b * g - shift, d) + lyapunov(a0 + b * g - shift, d)) * 0.5;
    };
    auto coeff = [&](double g) { return squeezed_part(avg(g) - avg(0.0)).real() / (g * g); };
    const double h = 1e-3;
    const double c2 = (4.0 * coeff(h / 2) - coeff(h)) / 3.0;
    return c2 / squeezed_part(avg(0.0)).real();
}

}  // namespace

TEST_CASE("lambda_nl examples") {
    CHECK(lambda_nl(NoiseKind::PumpAmplitude, tuned_params(0.0)) == 1.0);
    OpoParams edge;
    edge.e_mag = 1.0;
    CHECK(lambda_nl(NoiseKind::PumpAmplitude, edge) == 0.375);
    CHECK(lambda_nl(NoiseKind::CavityDetuning, tuned_params(0.0, 3.0)) == 0.0);
    for (double k : {0.5, 2.0, 10.0}) CHECK(lambda_nl(NoiseKind::CrystalTemperature, tuned_params(0.0, k)) == Approx(-1.0));
    CHECK_THROWS_AS(lambda_nl(NoiseKind::ChiSignal, tuned_params(0.5)), Error);
    auto d = tuned_params(0.5);
    d.psi0 = 0.3;
    CHECK_THROWS_AS(lambda_nl(NoiseKind::PumpAmplitude, d), Error);
}

TEST_CASE("lambda_nl near-threshold scaling") {
    auto slope = [](NoiseKind k, double k0, double e1, double e2) {
        return std::log(std::abs(lambda_nl(k, tuned_params(e2, k0))) / std::abs(lambda_nl(k, tuned_params(e1, k0)))) /
               std::log((1 - e2) / (1 - e1));
    };
    for (auto k : coupling_kinds) {
        if (k == NoiseKind::PumpAmplitude) continue;
        CHECK(slope(k, 2.0, 0.99, 0.9999) == Approx(-1.0).margin(0.05));
        // Larger pump damping pushes the asymptotic regime closer to threshold.
        for (double k0 : {5.0, 10.0}) CHECK(slope(k, k0, 0.99999, 0.9999999) == Approx(-1.0).margin(0.05));
    }
    CHECK(lambda_nl(NoiseKind::PumpAmplitude, tuned_params(0.99999)) == Approx(0.375).epsilon(1e-4));
    const auto rows = lambda_table(tuned_params(0.9));
    CHECK(rows.size() == 5);
    for (const auto& r : rows) CHECK(r.diverges == (r.kind != NoiseKind::PumpAmplitude));
}

TEST_CASE("lambda_ppse_ratio examples and bounds") {
    CHECK(lambda_ppse_ratio(tuned_params(0.5, 2.0)) == Approx(0.5));
    CHECK(lambda_ppse_ratio(tuned_params(0.5, 1e9)) == Approx(1.0 / 3.0).epsilon(1e-8));
    CHECK(lambda_ppse_ratio(tuned_params(0.5, 1e-9)) == Approx(1.0).epsilon(1e-8));
    double prev = 1.0;
    for (double k = 0.1; k < 100.0; k *= 1.5) {
        const double r = lambda_ppse_ratio(tuned_params(0.5, k));
        CHECK(r < prev);
        CHECK(r > 1.0 / 3.0);
        prev = r;
    }
}

TEST_CASE("chi0 weight approaches its near-threshold envelope") {
    for (double k : {2.0, 5.0}) {
        const auto p = tuned_params(0.99999, k);
        CHECK(lambda_nl(NoiseKind::ChiPump, p) / (ppse_envelope(p) * lambda_ppse_ratio(p)) == Approx(1.0).margin(1e-3));
    }
}

TEST_CASE("sigma_nl_variance matches the exact static covariance for frozen channels") {
    for (double e : {0.3, 0.6, 0.9})
        for (double k0 : {2.0, 5.0}) {
            const auto p = tuned_params(e, k0);
            CHECK(sigma_nl_variance(NoiseKind::CrystalTemperature, p) == Approx(static_lambda(NoiseKind::CrystalTemperature, p, 0.0)).epsilon(1e-5));
            CHECK(sigma_nl_variance(NoiseKind::CavityDetuning, p) == Approx(static_lambda(NoiseKind::CavityDetuning, p, -e / (k0 * k0))).epsilon(1e-5));
        }
}

TEST_CASE("sigma_nl_variance zero-weight limit and errors") {
    std::vector<NoiseChannel> zero;
    for (auto k : coupling_kinds) zero.push_back(make_channel(k, 0.0));
    CHECK(nonlinear_squeezed_correction(zero, tuned_params(0.7)) == 0.0);
    CHECK_THROWS_AS(sigma_nl_variance(NoiseKind::ChiSignal, tuned_params(0.5)), Error);
    CHECK_THROWS_AS(sigma_nl_variance(NoiseKind::PumpAmplitude, tuned_params(0.0)), Error);
    const auto p = tuned_params(0.6);
    const double one = sigma_nl_variance(NoiseKind::CrystalTemperature, p);
    CHECK(nonlinear_squeezed_correction({make_channel(NoiseKind::CrystalTemperature, 1e-2)}, p) == Approx(1e-4 * one));
}
