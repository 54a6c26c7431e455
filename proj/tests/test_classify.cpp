#include <catch_amalgamated.hpp>

#include "support.hpp"

using namespace semiconic;
using namespace testing_support;
using Catch::Approx;

namespace {

const std::vector<double> kO2{0.0, 0.0}, kO3{0.0, 0.0, 0.0};

EquivalenceTransform random_equivalence(std::mt19937_64& rng, bool family) {
    std::uniform_real_distribution<double> a(-3.14159, 3.14159), s(0.3, 3.0), b(0.0, 1.0);
    EquivalenceTransform T;
    T.theta = a(rng);
    T.zeta = b(rng) < 0.5 ? 1 : -1;
    T.rotation = rotation_matrix(a(rng));
    T.xi = (b(rng) < 0.5 ? -1.0 : 1.0) * s(rng);
    if (family) T.z_scale = s(rng);
    return T;
}

}  // namespace

TEST_CASE("two-variable verdicts", "[classify]") {
    auto c = classify_point(plane(U(), V()), kO2);
    CHECK(c.verdict == Verdict::Conical);
    CHECK(c.diagnostics.chi == 1.0);
    CHECK_FALSE(c.eta.has_value());

    auto s = classify_point(plane(U(), U() + V() * V()), kO2);
    REQUIRE(s.verdict == Verdict::SemiConical);
    REQUIRE(s.eta.has_value());
    CHECK(std::abs((*s.eta)[0]) < 1e-15);
    CHECK(std::abs((*s.eta)[1]) == 1.0);
    CHECK(std::abs(s.diagnostics.d_eta_chi) == Approx(2.0).margin(1e-10));

    // grad f1 = 0, grad f2 = e2: collinear, eta = (-1, 0) and d_eta chi = -2, so the rank rule says semi-conical.
    auto q = classify_point(plane(U() * U(), V()), kO2);
    CHECK(q.verdict == Verdict::SemiConical);
    CHECK(std::abs(q.diagnostics.d_eta_chi) == Approx(2.0).margin(1e-12));

    std::vector<double> off{0.1, 0.1};
    CHECK(classify_point(plane(U(), V()), off).verdict == Verdict::NotIntersection);
}

TEST_CASE("family verdicts", "[classify]") {
    auto fc = classify_family_point(family(Z() - U(), Z() - V()), kO3);
    CHECK(fc.verdict == Verdict::FConical);

    auto fam = family(Z() - U(), Z() + U() + V() * V());
    auto fs = classify_family_point(fam, kO3);
    REQUIRE(fs.verdict == Verdict::FSemiConical);
    CHECK(std::abs((*fs.eta)[1]) == 1.0);

    std::vector<double> p{0.1, 0.0, 0.1};
    CHECK(classify_family_point(fam, p).verdict == Verdict::NotIntersection);
    CHECK_THROWS_AS(classify_family_point(plane(U(), V()), kO2), std::invalid_argument);
}

TEST_CASE("eta is a unit vector exactly when the verdict is semi-conical", "[classify][property]") {
    std::mt19937_64 rng(17);
    for (int n = 0; n < 200; ++n) {
        auto f = random_field(rng, 3, 3, true);
        auto c = classify_family_point(f, kO3);
        bool semi = c.verdict == Verdict::SemiConical || c.verdict == Verdict::FSemiConical;
        CHECK(c.eta.has_value() == semi);
        if (c.eta) CHECK(std::abs(norm2(*c.eta) - 1.0) < 1e-14);
    }
}

TEST_CASE("gap growth exponents", "[classify]") {
    auto radii = geometric(1e-4, 1e-1, 13);
    std::vector<double> e1{1.0, 0.0}, e2{0.0, 1.0};
    CHECK(gap_growth_probe(plane(U(), V()), kO2, e1, radii).slope == Approx(1.0).margin(1e-6));
    auto sc = plane(U(), U() + V() * V());
    CHECK(gap_growth_probe(sc, kO2, e2, radii).slope == Approx(2.0).margin(1e-3));
    CHECK(gap_growth_probe(sc, kO2, e1, radii).slope == Approx(1.0).margin(1e-3));
    auto narrow = geometric(1e-3, 1e-2, 6);
    CHECK_THROWS_AS(gap_growth_probe(sc, kO2, e1, narrow), std::invalid_argument);
}

TEST_CASE("verdicts are invariant under admissible equivalences", "[classify][property]") {
    std::mt19937_64 rng(99);
    const std::vector<std::pair<std::string, Verdict>> cases{
        {builtin_names::conical, Verdict::Conical},
        {builtin_names::semiconical, Verdict::SemiConical},
        {builtin_names::f_conical, Verdict::FConical},
        {builtin_names::f_semiconical, Verdict::FSemiConical}};
    for (const auto& [name, want] : cases) {
        ControlField f = builtin_field(name);
        const auto& o = f.arity() == 2 ? kO2 : kO3;
        auto base = classify_any(f, o);
        REQUIRE(base.verdict == want);
        for (int n = 0; n < 50; ++n) {
            auto T = random_equivalence(rng, f.arity() == 3);
            auto c = classify_any(apply_transform(f, T), o);
            CHECK(c.verdict == want);
            if (base.eta) {
                // eta maps by the inverse rotation, up to sign.
                const auto& R = T.rotation;
                Vec2 e = *base.eta;
                Vec2 m{R[0][0] * e[0] + R[1][0] * e[1], R[0][1] * e[0] + R[1][1] * e[1]};
                double cross = m[0] * (*c.eta)[1] - m[1] * (*c.eta)[0];
                CHECK(std::abs(cross) < 1e-8);
            }
        }
    }
}

TEST_CASE("random generic fields are never degenerate", "[classify][property]") {
    std::mt19937_64 rng(4242);
    int degenerate = 0;
    for (int n = 0; n < 200; ++n) {
        auto f = random_field(rng, 3, 3, true);
        auto c = classify_family_point(f, kO3);
        if (c.verdict == Verdict::Degenerate) {
            ++degenerate;
            UNSCOPED_INFO("field " << n << " collinearity " << c.diagnostics.collinearity << " submersion "
                                   << c.diagnostics.submersion);
        }
    }
    CHECK(degenerate == 0);
}

TEST_CASE("the semi-conical point is isolated", "[classify][property]") {
    auto f = builtin_field(builtin_names::semiconical);
    const int n = 401;
    int hits = 0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            double u = -0.1 + 0.2 * i / (n - 1), v = -0.1 + 0.2 * j / (n - 1);
            if (std::hypot(u, v) <= 1e-6) continue;
            if (norm2(f.value({u, v, 0.0})) < 1e-9) ++hits;
        }
    CHECK(hits == 0);
}
