#pragma once

#include <random>
#include <vector>

#include <semiconic/semiconic.hpp>

namespace testing_support {

using namespace semiconic;

inline Polynomial U() { return Polynomial::variable(0); }
inline Polynomial V() { return Polynomial::variable(1); }
inline Polynomial Z() { return Polynomial::variable(2); }
inline Polynomial C(double c) { return Polynomial::constant(c); }

inline ControlField plane(const Polynomial& f1, const Polynomial& f2) { return ControlField(2, f1, f2); }
inline ControlField family(const Polynomial& f1, const Polynomial& f2) { return ControlField(3, f1, f2); }

// Random polynomial of total degree <= deg in the first `arity` variables, coefficients uniform in [-1, 1].
inline Polynomial random_poly(std::mt19937_64& rng, int arity, int deg, bool constant_term = true) {
    std::uniform_real_distribution<double> d(-1.0, 1.0);
    std::vector<Term> t;
    for (int a = 0; a <= deg; ++a)
        for (int b = 0; a + b <= deg; ++b)
            for (int c = 0; a + b + c <= deg; ++c) {
                if (c > 0 && arity < 3) continue;
                if (!constant_term && a + b + c == 0) continue;
                t.push_back({d(rng), {a, b, c}});
            }
    return Polynomial(t);
}

inline ControlField random_field(std::mt19937_64& rng, int arity, int deg, bool zero_at_origin = false) {
    return ControlField(arity, random_poly(rng, arity, deg, !zero_at_origin), random_poly(rng, arity, deg, !zero_at_origin));
}

inline std::vector<double> geometric(double a, double b, int n) { return geometric_grid(a, b, n); }

inline const std::vector<double>& default_eps() {
    static const std::vector<double> g = geometric_grid(1e-1, std::pow(10.0, -3.5), 8);
    return g;
}

inline double dot(const Vec2& a, const Vec2& b) { return a[0] * b[0] + a[1] * b[1]; }

}  // namespace testing_support
