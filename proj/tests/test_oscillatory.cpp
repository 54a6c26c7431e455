#include <catch_amalgamated.hpp>

#include "support.hpp"

using namespace semiconic;
using namespace testing_support;
using Catch::Approx;

namespace {

Eigen::MatrixXcd coupling(std::complex<double> w) {
    Eigen::MatrixXcd A(2, 2);
    A << 0.0, w, -std::conj(w), 0.0;
    return A;
}

}  // namespace

TEST_CASE("oscillatory integrals with closed forms", "[oscillatory]") {
    const double eps = 0.01;
    auto period = PhaseProfile::polynomial({0.0, 1.0}, {1.0}, 0.0, 2.0 * std::numbers::pi * eps);
    CHECK(std::abs(oscillatory_integral(period, eps, period.b)) < 1e-12);

    auto lin = PhaseProfile::polynomial({0.0, 1.0}, {1.0}, 0.0, 1.0);
    for (double e : {0.1, 0.01, 1e-3}) {
        auto I = oscillatory_integral(lin, e, 1.0);
        std::complex<double> want = e * (std::polar(1.0, 1.0 / e) - 1.0) / std::complex<double>(0.0, 1.0);
        CHECK(std::abs(I - want) < 1e-10 * std::abs(want));
        CHECK(std::abs(I) <= 2.0 * e);
    }

    auto quad = PhaseProfile::polynomial({0.0, 0.0, 0.5}, {1.0}, -1.0, 1.0);
    for (double e : {1e-3, 1e-4}) {
        double m = std::abs(oscillatory_integral(quad, e, 1.0));
        CHECK(m / std::sqrt(2.0 * std::numbers::pi * e) == Approx(1.0).margin(0.03));
    }
}

TEST_CASE("phase certification", "[oscillatory]") {
    auto p = PhaseProfile::polynomial({0.0, 0.0, 0.0, 1.0 / 24.0}, {1.0}, -1.0, 1.0);
    auto c = certify_phase(p, 3);
    CHECK(c.pass);
    CHECK(c.rescale == Approx(4.0).epsilon(1e-12));
    for (int i = 0; i <= 4096; ++i) CHECK(std::abs(p.derivative(3, -1.0 + 2.0 * i / 4096)) >= 1.0 - 1e-8);

    auto flat = PhaseProfile::polynomial({0.0, 0.0, 0.5}, {1.0}, -1.0, 1.0);
    CHECK_FALSE(certify_phase(flat, 1).pass);
    CHECK_THROWS_AS(certify_phase(flat, 0), std::invalid_argument);
}

TEST_CASE("Van der Corput exponents", "[oscillatory]") {
    auto eps = default_eps();
    struct Case {
        std::vector<double> phi;
        double a;
        int k;
        double min_slope;
    };
    for (const auto& c : {Case{{0.0, 1.0}, 0.0, 1, 0.95}, Case{{0.0, 0.0, 0.5}, -1.0, 2, 0.45},
                          Case{{0.0, 0.0, 0.0, 1.0 / 6.0}, -1.0, 3, 0.30}}) {
        auto p = PhaseProfile::polynomial(c.phi, {1.0}, c.a, 1.0);
        auto fit = vdc_exponent(p, c.k, eps);
        INFO("k = " << c.k << " slope " << fit.slope);
        CHECK(fit.certificate.pass);
        CHECK(fit.slope >= c.min_slope);
        CHECK(std::isfinite(fit.constant));
        for (std::size_t i = 1; i < fit.sup.size(); ++i) CHECK(fit.sup[i] <= 1.05 * fit.sup[i - 1]);
    }
    auto p = PhaseProfile::polynomial({0.0, 1.0}, {1.0}, 0.0, 1.0);
    CHECK_THROWS_AS(vdc_exponent(p, 1, {0.1, 0.05, 0.02}), std::invalid_argument);
}

TEST_CASE("integration by parts bound holds for monotone phases", "[oscillatory]") {
    auto p = PhaseProfile::polynomial({0.0, 1.0, 0.5}, {1.0}, 0.0, 1.0);
    for (double e : default_eps()) {
        double bound = integration_by_parts_bound(p, e);
        CHECK(oscillatory_sup(p, e).sup <= bound);
    }
    auto lin = PhaseProfile::polynomial({0.0, 1.0}, {1.0}, 0.0, 1.0);
    CHECK(integration_by_parts_bound(lin, 0.01) == Approx(0.02).margin(1e-15));
}

TEST_CASE("averaging distance", "[oscillatory]") {
    Generator A = [](double t) { return coupling(std::complex<double>(0.0, t)); };
    CHECK(averaging_distance(A, A, 0.01) < 1e-14);

    Generator zero = [](double) { return coupling(0.0); };
    std::vector<double> eps{0.1, 0.05, 0.02, 0.01, 0.005, 0.002, 0.001}, dist;
    for (double e : eps) {
        Generator Ae = [e](double t) {
            Eigen::MatrixXcd M(2, 2);
            M << 0.0, std::complex<double>(0.0, std::cos(t / e)), std::complex<double>(0.0, std::cos(t / e)), 0.0;
            return M;
        };
        dist.push_back(averaging_distance(zero, Ae, e));
    }
    CHECK(loglog_fit(eps, dist).slope >= 0.9);

    Generator bad = [](double) {
        Eigen::MatrixXcd M = Eigen::MatrixXcd::Identity(2, 2);
        return M;
    };
    CHECK_THROWS_AS(averaging_distance(zero, bad, 0.1), NonSkewGenerator);
}

TEST_CASE("certified coupling gives flow closeness of the same order", "[oscillatory]") {
    Generator zero = [](double) { return coupling(0.0); };
    std::vector<double> eps = geometric(1e-1, 1e-3, 7), dist;
    for (double e : eps) {
        Generator Ae = [e](double t) { return coupling((1.0 + t) * std::polar(1.0, (t + 0.5 * t * t) / e)); };
        dist.push_back(averaging_distance(zero, Ae, e));
    }
    CHECK(loglog_fit(eps, dist).slope >= 0.9);
}
