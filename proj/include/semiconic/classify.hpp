#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "field.hpp"
#include "fit.hpp"

namespace semiconic {

enum class Verdict { NotIntersection, Conical, SemiConical, FConical, FSemiConical, Degenerate };

inline const char* to_string(Verdict v) {
    switch (v) {
        case Verdict::NotIntersection: return "NotIntersection";
        case Verdict::Conical: return "Conical";
        case Verdict::SemiConical: return "SemiConical";
        case Verdict::FConical: return "FConical";
        case Verdict::FSemiConical: return "FSemiConical";
        case Verdict::Degenerate: return "Degenerate";
    }
    return "?";
}

struct Tolerances {
    double rank = 1e-8;   // relative singular-value threshold
    double zero = 1e-9;   // |f(x)| <= zero * (1 + |x|) counts as a zero
    double trace = 1e-10; // locus corrector target
    double turn = 1e-10;  // |dz/ds| at refined turning points
    double cusp = 1e-6;   // minimum planar tangent norm

    double zero_at(const Point3& x) const {
        return zero * (1.0 + std::sqrt(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]));
    }
};

struct ClassificationDiagnostics {
    double residual = 0.0;       // |f(x)|
    double chi = 0.0;            // chi_uv
    double collinearity = 0.0;   // sigma_min / sigma_max of the (u,v) Jacobian
    double d_eta_chi = 0.0;      // directional derivative of chi along unit eta
    double dz_norm = 0.0;        // |d_z f|
    double submersion = 0.0;     // sigma_min of the 2x3 Jacobian
    double scale = 1.0;          // max |Jacobian entry| (or 1)
    int eta_component = -1;      // index of the component defining eta
};

struct Classification {
    Verdict verdict = Verdict::NotIntersection;
    std::optional<Vec2> eta;
    ClassificationDiagnostics diagnostics;
};

namespace detail {

// Singular values of a 2 x k matrix (k = 2 or 3) from the 2x2 Gram matrix.
inline std::array<double, 2> singular_values(const Jacobian& J, int k) {
    double a = 0, b = 0, c = 0;
    for (int i = 0; i < k; ++i) {
        a += J[0][i] * J[0][i];
        b += J[0][i] * J[1][i];
        c += J[1][i] * J[1][i];
    }
    double tr = a + c;
    double disc = std::hypot(a - c, 2.0 * b);
    double smax2 = 0.5 * (tr + disc);
    // det = smax2 * smin2; avoids cancellation in (tr - disc).
    double det = 0.0;
    if (k == 2) {
        double d = J[0][0] * J[1][1] - J[0][1] * J[1][0];
        det = d * d;
    } else {
        for (int i = 0; i < 3; ++i)
            for (int j = i + 1; j < 3; ++j) {
                double d = J[0][i] * J[1][j] - J[0][j] * J[1][i];
                det += d * d;
            }
    }
    double smax = std::sqrt(std::max(smax2, 0.0));
    double smin = smax > 0.0 ? std::sqrt(det) / smax : 0.0;
    return {smin, smax};
}

inline double max_abs(const Jacobian& J, int k) {
    double s = 0.0;
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < k; ++j) s = std::max(s, std::abs(J[i][j]));
    return s;
}

// Slice classification shared by the two-parameter and family cases.
inline Classification classify_slice(const ControlField& f, const Point3& p, const Tolerances& tol) {
    Classification c;
    auto val = f.value(p);
    c.diagnostics.residual = norm2(val);
    if (c.diagnostics.residual > tol.zero_at(p)) return c;

    Jacobian J = f.jacobian(p);
    double scale = max_abs(J, 2);
    c.diagnostics.scale = scale > 0.0 ? scale : 1.0;
    c.diagnostics.chi = J[0][0] * J[1][1] - J[0][1] * J[1][0];
    auto sv = singular_values(J, 2);
    c.diagnostics.collinearity = sv[1] > 0.0 ? sv[0] / sv[1] : 0.0;

    if (scale <= tol.rank) {
        c.verdict = Verdict::Degenerate;
        return c;
    }
    if (c.diagnostics.collinearity > tol.rank) {
        c.verdict = Verdict::Conical;
        return c;
    }
    double g0 = std::hypot(J[0][0], J[0][1]), g1 = std::hypot(J[1][0], J[1][1]);
    int j = g1 > g0 ? 1 : 0;
    c.diagnostics.eta_component = j;
    Vec2 eta{-J[j][1], J[j][0]};
    double n = norm2(eta);
    eta = {eta[0] / n, eta[1] / n};
    c.diagnostics.d_eta_chi = directional_chi_at(f, p, {eta[0], eta[1], 0.0});
    if (std::abs(c.diagnostics.d_eta_chi) > tol.rank * c.diagnostics.scale) {
        c.verdict = Verdict::SemiConical;
        c.eta = eta;
    } else {
        c.verdict = Verdict::Degenerate;
    }
    return c;
}

}  // namespace detail

inline Classification classify_point(const ControlField& f, std::span<const double> x, const Tolerances& tol = {}) {
    if (f.arity() != 2) throw std::invalid_argument("classify_point needs an arity-2 field");
    return detail::classify_slice(f, f.to_point(x), tol);
}

inline Classification classify_family_point(const ControlField& f, std::span<const double> x,
                                            const Tolerances& tol = {}) {
    if (f.arity() != 3) throw std::invalid_argument("classify_family_point needs an arity-3 field");
    Point3 p = f.to_point(x);
    Classification c = detail::classify_slice(f, p, tol);
    if (c.verdict == Verdict::NotIntersection) return c;

    Jacobian J = f.jacobian(p);
    double scale = detail::max_abs(J, 3);
    scale = scale > 0.0 ? scale : 1.0;
    c.diagnostics.dz_norm = std::hypot(J[0][2], J[1][2]);
    c.diagnostics.submersion = detail::singular_values(J, 3)[0];

    if (c.verdict == Verdict::Conical) {
        c.verdict = c.diagnostics.dz_norm > tol.rank * scale ? Verdict::FConical : Verdict::Degenerate;
    } else if (c.verdict == Verdict::SemiConical) {
        if (c.diagnostics.submersion > tol.rank * scale) {
            c.verdict = Verdict::FSemiConical;
        } else {
            c.verdict = Verdict::Degenerate;
            c.eta.reset();
        }
    }
    return c;
}

// Classify by arity.
inline Classification classify_any(const ControlField& f, std::span<const double> x, const Tolerances& tol = {}) {
    return f.arity() == 2 ? classify_point(f, x, tol) : classify_family_point(f, x, tol);
}

struct GapGrowth {
    double slope = 0.0;
    double band_min = 0.0;  // min Gap(t) / t^slope
    double band_max = 0.0;
    bool degenerate_ray = false;
    std::vector<double> radii;
    std::vector<double> gaps;
};

inline GapGrowth gap_growth_probe(const ControlField& f, std::span<const double> x,
                                  std::span<const double> direction, const std::vector<double>& radii,
                                  const Tolerances& tol = {}) {
    Point3 p = f.to_point(x);
    if (direction.size() != 2 && static_cast<int>(direction.size()) != f.arity())
        throw std::invalid_argument("direction must have 2 or arity components");
    if (radii.size() < 2 || decades(radii) < 2.0 - 1e-12)
        throw std::invalid_argument("radii must span at least two decades");
    double dn = 0.0;
    for (double d : direction) dn += d * d;
    dn = std::sqrt(dn);
    if (dn == 0.0) throw std::invalid_argument("zero direction");
    if (norm2(f.value(p)) > tol.zero_at(p)) throw std::invalid_argument("probe point is not a zero of f");

    GapGrowth g;
    g.radii = radii;
    bool any = false;
    for (double t : radii) {
        Point3 q = p;
        for (std::size_t k = 0; k < direction.size(); ++k) q[k] += t * direction[k] / dn;
        double gap = f.hamiltonian(q).gap();
        g.gaps.push_back(gap);
        if (gap > tol.zero_at(q)) any = true;
    }
    if (!any) {
        g.degenerate_ray = true;
        return g;
    }
    auto fit = loglog_fit(g.radii, g.gaps);
    g.slope = fit.slope;
    g.band_min = fit.envelope_min;
    g.band_max = fit.envelope;
    return g;
}

}  // namespace semiconic
