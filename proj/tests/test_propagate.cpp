#include <catch_amalgamated.hpp>

#include "support.hpp"

using namespace semiconic;
using namespace testing_support;
using Catch::Approx;

namespace {

const State2 kE1(cplx(1.0, 0.0), cplx(0.0, 0.0));
const State2 kE2(cplx(0.0, 0.0), cplx(1.0, 0.0));

NLevelHamiltonianMap stirap() {
    BuiltinParams p;
    p.E = 0.0;
    p.E_prime = 1.0;
    return builtin_map(builtin_names::stirap, p);
}

}  // namespace

TEST_CASE("single exponential steps", "[propagate]") {
    State2 psi(cplx(0.6, 0.1), cplx(-0.2, 0.7));
    CHECK((step_2level(TwoLevelHamiltonian(0.0, 0.0), 1.3, psi) - psi).norm() == 0.0);

    auto a = step_2level(TwoLevelHamiltonian(1.0, 0.0), std::numbers::pi, kE1);
    CHECK((a - std::polar(1.0, -std::numbers::pi) * kE1).norm() < 1e-15);

    auto b = step_2level(TwoLevelHamiltonian(0.0, 1.0), std::numbers::pi / 2.0, kE1);
    CHECK((b - cplx(0.0, -1.0) * kE2).norm() < 1e-15);

    // Oracle: dense matrix exponential.
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> d(-2.0, 2.0);
    for (int n = 0; n < 100; ++n) {
        TwoLevelHamiltonian H(d(rng), d(rng));
        double s = d(rng);
        Eigen::Matrix2d M;
        M << H(0, 0), H(0, 1), H(1, 0), H(1, 1);
        State2 ref = unitary_step(M, s) * psi;
        CHECK((step_2level(H, s, psi) - ref).norm() < 1e-13);
    }
}

TEST_CASE("transition modulus", "[propagate]") {
    CHECK(transition_probability(kE1, {1.0, 0.0}) == 1.0);
    CHECK(transition_probability(kE1, {0.0, 1.0}) == 0.0);
    State2 mix = (kE1 + cplx(0.0, 1.0) * kE2) / std::sqrt(2.0);
    CHECK(transition_probability(mix, {1.0, 0.0}) == Approx(1.0 / std::sqrt(2.0)).margin(1e-15));
}

TEST_CASE("propagation is unitary", "[propagate][property]") {
    std::mt19937_64 rng(21);
    for (int n = 0; n < 20; ++n) {
        auto f = random_field(rng, 3, 3);
        auto path = ControlPath::polynomial({-0.5, 1.0, 0.2}, {0.3, -0.8, 0.5});
        for (auto scheme : {Scheme::midpoint, Scheme::magnus4}) {
            PropagateOptions o;
            o.scheme = scheme;
            auto r = propagate(f, path, 0.1, 1e-3, kE1, o);
            CHECK(r.norm_drift < 1e-10);
            CHECK(std::abs(r.psi.norm() - 1.0) < 1e-10);
        }
    }
}

TEST_CASE("midpoint stepping is second order", "[propagate][property]") {
    auto f = plane(C(1.0) + U(), V() + 0.3 * U() * V());
    auto path = ControlPath::polynomial({-0.5, 1.0}, {0.2, 0.4, -0.3});
    const double eps = 0.05;
    PropagateOptions ref;
    ref.scheme = Scheme::magnus4;
    ref.theta_max = 0.002;
    auto exact = propagate(f, path, std::nullopt, eps, kE1, ref).psi;
    std::vector<double> err;
    for (double th : {0.2, 0.1, 0.05}) {
        PropagateOptions o;
        o.theta_max = th;
        err.push_back((propagate(f, path, std::nullopt, eps, kE1, o).psi - exact).norm());
    }
    double order1 = std::log2(err[0] / err[1]), order2 = std::log2(err[1] / err[2]);
    INFO("errors " << err[0] << " " << err[1] << " " << err[2]);
    CHECK(order1 >= 1.8);
    CHECK(order2 >= 1.8);
}

TEST_CASE("physical and rotating frames agree on crossing-free paths", "[propagate][property]") {
    auto f = plane(C(1.0) + U(), V() + 0.3 * U() * V());
    auto path = ControlPath::polynomial({-0.5, 1.0}, {0.2, 0.4, -0.3});
    for (double eps : {0.1, 0.02}) {
        auto B = track_branches(f, path, std::nullopt, 4000);
        REQUIRE(B.crossing_times.empty());
        State2 psi0 = real_state(B.phi0.front());
        PropagateOptions o;
        o.scheme = Scheme::magnus4;
        o.theta_max = 0.01;
        auto phys = propagate(f, path, std::nullopt, eps, psi0, o).psi;
        State2 y0 = to_rotating_frame(psi0, B.phi0.front(), 0.0, eps);
        State2 y1 = propagate_rotating(f, path, std::nullopt, eps, y0, -1, o);
        double L = branch_phase(f, path, 0.0, B, 0.0, 1.0);
        State2 back = from_rotating_frame(y1, B.phi0.back(), L, eps);
        INFO("eps " << eps);
        CHECK((back - phys).norm() < 1e-8);
    }
}

TEST_CASE("reversed control with conjugated data undoes the evolution", "[propagate][property]") {
    auto f = plane(U(), U() + V() * V());
    auto path = ControlPath::polynomial({-0.5, 1.0}, {0.3, -0.6});
    State2 psi0(cplx(0.8, 0.0), cplx(0.0, 0.6));
    const double eps = 0.01;
    auto fwd = propagate(f, path, std::nullopt, eps, psi0).psi;
    auto bwd = propagate(f, path.reversed(), std::nullopt, eps, fwd.conjugate()).psi;
    CHECK((bwd - psi0.conjugate()).norm() < 1e-9);
}

TEST_CASE("propagation contracts", "[propagate]") {
    auto fam = builtin_field(builtin_names::f_semiconical);
    auto path = ControlPath::line({0.0, 0.0}, {1.0, 0.0});
    CHECK_THROWS_AS(propagate(fam, path, std::nullopt, 0.1, kE1), std::invalid_argument);
    CHECK_THROWS_AS(propagate(fam, path, 0.0, 0.0, kE1), std::invalid_argument);
    PropagateOptions tight;
    tight.max_steps = 10;
    CHECK_THROWS_AS(propagate(fam, path, 0.0, 1e-6, kE1, tight), StepBudgetExceeded);
}

TEST_CASE("spectral band reduction", "[propagate]") {
    auto map = stirap();
    auto b = band_reduce(map, {0.0, 0.0, 0.0}, 1);
    CHECK(std::abs(b.f1) < 1e-14);
    CHECK(std::abs(b.f2) < 1e-14);
    CHECK(b.isometry.row(2).norm() < 1e-14);
    CHECK((b.isometry.transpose() * b.isometry - Eigen::Matrix2d::Identity()).norm() < 1e-12);

    Eigen::MatrixXd D = Eigen::Vector3d(1.0, 2.0, 5.0).asDiagonal();
    auto d = band_reduce(D, 1);
    CHECK(d.f1 == Approx(-0.5).margin(1e-14));
    CHECK(std::abs(d.f2) < 1e-14);
    CHECK(d.mean == Approx(1.5).margin(1e-14));
    CHECK_THROWS_AS(band_reduce(D, 3), std::invalid_argument);
    Eigen::MatrixXd T = Eigen::Vector3d(1.0, 2.0, 2.0).asDiagonal();
    CHECK_THROWS_AS(band_reduce(T, 1), BandTouching);

    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int n = 0; n < 50; ++n) {
        Eigen::MatrixXd H = map({u(rng), u(rng), 0.0});
        auto r = band_reduce(H, 1);
        CHECK((r.isometry.transpose() * r.isometry - Eigen::Matrix2d::Identity()).norm() < 1e-12);
        Eigen::Matrix2d h = r.isometry.transpose() * H * r.isometry;
        CHECK(std::abs(r.f1 - 0.5 * (h(0, 0) - h(1, 1))) < 1e-14);
        CHECK(std::abs(r.f2 - h(0, 1)) < 1e-14);
    }
}

TEST_CASE("upper band of the three-level system has conical points", "[propagate]") {
    auto map = stirap();
    // Oracle: grid search for the closing of the gap between levels 2 and 3.
    double best = 1e9, bu = 0.0, bv = 0.0;
    for (int i = 0; i <= 200; ++i)
        for (int j = 0; j <= 200; ++j) {
            double u = -2.0 + 4.0 * i / 200, v = -2.0 + 4.0 * j / 200;
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(map({u, v, 0.0}), Eigen::EigenvaluesOnly);
            double g = es.eigenvalues()(2) - es.eigenvalues()(1);
            if (g < best) best = g, bu = u, bv = v;
        }
    REQUIRE(best < 1e-9);
    auto jet = reduced_field_jet(map, {bu, bv, 0.0}, 2);
    auto zero = find_intersection(jet, std::vector<double>{0.0, 0.0});
    CHECK(std::hypot(zero.x[0], zero.x[1]) < 1e-6);
    CHECK(classify_point(jet, zero.x).verdict == Verdict::Conical);
}

TEST_CASE("decoupling error", "[propagate]") {
    auto path = ControlPath::line({-0.5, 0.2}, {0.5, -0.3});
    auto two = NLevelHamiltonianMap(2, 2, {U(), V(), -U()});
    CHECK(decoupling_error(two, path, 0.0, 1, 0.01).error < 1e-10);

    auto diag = NLevelHamiltonianMap(3, 2, {C(1.0), Polynomial(), Polynomial(), C(2.0), Polynomial(), C(5.0)});
    CHECK(decoupling_error(diag, path, 0.0, 1, 0.01).error < 1e-12);
}
