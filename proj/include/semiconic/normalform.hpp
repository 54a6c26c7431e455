#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "classify.hpp"
#include "field.hpp"

namespace semiconic {

using Mat2 = std::array<std::array<double, 2>, 2>;

inline Mat2 rotation_matrix(double angle) {
    double c = std::cos(angle), s = std::sin(angle);
    return {{{c, -s}, {s, c}}};
}

inline Mat2 identity2() { return {{{1.0, 0.0}, {0.0, 1.0}}}; }

inline Mat2 transpose(const Mat2& a) { return {{{a[0][0], a[1][0]}, {a[0][1], a[1][1]}}}; }

inline Mat2 operator*(const Mat2& a, const Mat2& b) {
    Mat2 r{};
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) r[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
    return r;
}

// Left-equivalence (theta, zeta), right-equivalence x -> center + R (x - center) on (u, v)
// with z -> center_z + z_scale (z - center_z), and a constant time-equivalence factor xi.
// The transformed field is xi * L (f o phi) with L the matrix acting on (f1, f2).
struct EquivalenceTransform {
    double theta = 0.0;
    int zeta = 1;
    Mat2 rotation = identity2();
    double z_scale = 1.0;
    double xi = 1.0;
    Point3 center{0.0, 0.0, 0.0};

    int xi_sign() const { return xi < 0.0 ? -1 : 1; }

    // Action on the value vector (f1, f2).
    Mat2 left_matrix() const {
        double c = std::cos(2.0 * theta), s = std::sin(2.0 * theta);
        return {{{c, -zeta * s}, {s, zeta * c}}};
    }
};

inline ControlField apply_transform(const ControlField& f, const EquivalenceTransform& T) {
    const auto& R = T.rotation;
    const auto& c = T.center;
    // phi(x) = A x + b
    std::array<std::array<double, 3>, 3> A{{{R[0][0], R[0][1], 0.0}, {R[1][0], R[1][1], 0.0}, {0.0, 0.0, T.z_scale}}};
    Point3 b{c[0] - (R[0][0] * c[0] + R[0][1] * c[1]), c[1] - (R[1][0] * c[0] + R[1][1] * c[1]),
             c[2] - T.z_scale * c[2]};
    if (f.arity() == 2) {
        A[2][2] = 0.0;
        b[2] = 0.0;
    }
    Polynomial g1 = f.component(0).substitute_affine(A, b);
    Polynomial g2 = f.component(1).substitute_affine(A, b);
    Mat2 L = T.left_matrix();
    Polynomial h1 = T.xi * (L[0][0] * g1 + L[0][1] * g2);
    Polynomial h2 = T.xi * (L[1][0] * g1 + L[1][1] * g2);
    return ControlField(f.arity(), h1, h2);
}

// Transform whose application undoes `T`.
inline EquivalenceTransform inverse(const EquivalenceTransform& T) {
    // xi L (f o phi) = g  =>  f = (1/xi) L^T (g o phi^{-1}); L^T is the left matrix of (theta', zeta').
    Mat2 Lt = transpose(T.left_matrix());
    EquivalenceTransform I;
    I.zeta = Lt[0][0] * Lt[1][1] - Lt[0][1] * Lt[1][0] > 0.0 ? 1 : -1;
    I.theta = 0.5 * std::atan2(Lt[1][0], Lt[0][0]);
    I.rotation = transpose(T.rotation);
    I.z_scale = 1.0 / T.z_scale;
    I.xi = 1.0 / T.xi;
    I.center = T.center;
    return I;
}

struct GradientEqualization {
    double theta = 0.0;
    ControlField field;
};

// STEP 1: left-equivalence (zeta = +1) making the two gradients equal at x.
inline GradientEqualization left_equalize_gradients(const ControlField& f, std::span<const double> x,
                                                    const Tolerances& tol = {}) {
    Point3 p = f.to_point(x);
    auto c = detail::classify_slice(f, p, tol);
    if (c.verdict != Verdict::SemiConical) throw std::invalid_argument("left_equalize_gradients: point is not semi-conical");
    Jacobian J = f.jacobian(p);
    int j = c.diagnostics.eta_component;
    Vec2 g{J[j][0], J[j][1]};
    double n = norm2(g);
    g = {g[0] / n, g[1] / n};
    // grad f1 = a g, grad f2 = b g; for a = 1 this is the alpha form.
    double a = J[0][0] * g[0] + J[0][1] * g[1];
    double b = J[1][0] * g[0] + J[1][1] * g[1];
    // cos(2t)(a - b) - sin(2t)(a + b) = 0, smallest t in [0, pi).
    double psi = std::atan2(a - b, a + b);  // 2t = psi (mod pi)
    double two_t = std::fmod(psi, std::numbers::pi);
    if (two_t < 0.0) two_t += std::numbers::pi;
    EquivalenceTransform T;
    T.theta = 0.5 * two_t;
    T.center = p;
    return {T.theta, apply_transform(f, T)};
}

struct Alignment {
    Mat2 rotation = identity2();
    ControlField field;
};

// STEP 2: rotation of (u, v) about x sending the non-conical direction to the v axis.
inline Alignment align_nonconical(const ControlField& f, std::span<const double> x, const Tolerances& tol = {}) {
    Point3 p = f.to_point(x);
    Jacobian J = f.jacobian(p);
    double scale = std::max({std::abs(J[0][0]), std::abs(J[0][1]), std::abs(J[1][0]), std::abs(J[1][1])});
    double r1 = std::hypot(J[0][0], J[0][1]);
    if (r1 <= tol.rank * (scale > 0 ? scale : 1.0) ||
        std::hypot(J[0][0] - J[1][0], J[0][1] - J[1][1]) > 1e-10 * (scale > 0 ? scale : 1.0))
        throw std::invalid_argument("align_nonconical: gradients must be equal and nonzero");
    // d2 f1 = r1 cos(b1), d1 f1 = r1 sin(b1)
    double b1 = std::atan2(J[0][0], J[0][1]);
    double s = std::sin(b1), c = std::cos(b1);
    EquivalenceTransform T;
    T.rotation = {{{-s, c}, {-c, -s}}};
    T.center = p;
    return {T.rotation, apply_transform(f, T)};
}

struct Clause {
    std::string name;
    double value = 0.0;
    bool pass = false;
};

struct ConditionReport {
    std::vector<Clause> clauses;
    bool pass = false;
};

namespace detail {

inline double jac_scale(const Jacobian& J, int k) {
    double s = max_abs(J, k);
    return s > 0.0 ? s : 1.0;
}

inline ConditionReport finish(std::vector<Clause> cl) {
    ConditionReport r;
    r.pass = true;
    for (const auto& c : cl) r.pass = r.pass && c.pass;
    r.clauses = std::move(cl);
    return r;
}

}  // namespace detail

inline ConditionReport check_SC(const ControlField& f, std::span<const double> x, const Tolerances& tol = {}) {
    if (f.arity() != 2) throw std::invalid_argument("check_SC needs an arity-2 field");
    Point3 p = f.to_point(x);
    Jacobian J = f.jacobian(p);
    double eps = tol.rank * detail::jac_scale(J, 2);
    double res = norm2(f.value(p));
    double d2 = std::hypot(J[0][1], J[1][1]);
    double diff = J[0][0] - J[1][0];
    double dvchi = directional_chi_at(f, p, {0.0, 1.0, 0.0});
    return detail::finish({
        {"f(x) = 0", res, res <= tol.zero_at(p)},
        {"d_v f(x) = 0", d2, d2 <= eps},
        {"d_u f1 = d_u f2", diff, std::abs(diff) <= eps},
        {"d_u f1 != 0", J[0][0], std::abs(J[0][0]) > eps},
        {"d_v chi != 0", dvchi, std::abs(dvchi) > eps},
    });
}

inline ConditionReport check_SCP(const ControlField& f, std::span<const double> x, const Tolerances& tol = {}) {
    if (f.arity() != 3) throw std::invalid_argument("check_SCP needs an arity-3 field");
    Point3 p = f.to_point(x);
    Jacobian J = f.jacobian(p);
    double eps = tol.rank * detail::jac_scale(J, 3);
    double res = norm2(f.value(p));
    double d2 = std::hypot(J[0][1], J[1][1]);
    double dz = J[0][2] - J[1][2];
    double chi13 = J[0][0] * J[1][2] - J[0][2] * J[1][0];
    double dvchi = directional_chi_at(f, p, {0.0, 1.0, 0.0});
    return detail::finish({
        {"f(x) = 0", res, res <= tol.zero_at(p)},
        {"d_v f(x) = 0", d2, d2 <= eps},
        {"d_u f1 != 0", J[0][0], std::abs(J[0][0]) > eps},
        {"d_u f2 != 0", J[1][0], std::abs(J[1][0]) > eps},
        {"d_z f1 = d_z f2", dz, std::abs(dz) <= eps},
        {"d_z f1 != 0", J[0][2], std::abs(J[0][2]) > eps},
        {"chi_uz != 0", chi13, std::abs(chi13) > eps},
        {"d_v chi != 0", dvchi, std::abs(dvchi) > eps},
    });
}

inline double invariant_beta(const ControlField& f, std::span<const double> x, const Tolerances& tol = {}) {
    if (f.arity() != 3) throw std::invalid_argument("invariant_beta needs an arity-3 field");
    Jacobian J = f.jacobian(f.to_point(x));
    if (std::abs(J[1][2]) <= tol.rank) throw std::domain_error("invariant_beta: d_z f2 vanishes");
    return J[0][2] / J[1][2];
}

inline double invariant_m0(const ControlField& f, std::span<const double> x, const Tolerances& tol = {}) {
    if (f.arity() != 3) throw std::invalid_argument("invariant_m0 needs an arity-3 field");
    Jacobian J = f.jacobian(f.to_point(x));
    if (std::abs(J[1][0]) <= tol.rank) throw std::domain_error("invariant_m0: d_u f2 vanishes");
    return -J[0][0] / J[1][0];
}

// Sign of the v^2 term after normalising d_u f2 to 1 (fields satisfying the slice condition).
inline int v2_sign(const ControlField& f, std::span<const double> x) {
    Point3 p = f.to_point(x);
    double d1 = f.component(1).derivative_at(p, {1, 0, 0});
    double d22 = f.component(1).derivative_at(p, {0, 2, 0});
    double s = d22 * d1;
    return s > 0.0 ? 1 : (s < 0.0 ? -1 : 0);
}

// Value, gradient and Hessian of both components at x.
struct Jet2 {
    std::array<double, 2> value{};
    std::array<std::array<double, 3>, 2> gradient{};
    std::array<std::array<std::array<double, 3>, 3>, 2> hessian{};
};

inline Jet2 jet2(const ControlField& f, const Point3& p) {
    Jet2 j;
    for (int i = 0; i < 2; ++i) {
        j.value[i] = f.component(i)(p);
        for (int k = 0; k < f.arity(); ++k) {
            Exponent e{0, 0, 0};
            e[k] = 1;
            j.gradient[i][k] = f.component(i).derivative_at(p, e);
            for (int l = 0; l < f.arity(); ++l) {
                Exponent e2 = e;
                e2[l] += 1;
                j.hessian[i][k][l] = f.component(i).derivative_at(p, e2);
            }
        }
    }
    return j;
}

// Steps 1 and 2 on the (u, v) slice of a field at a slice-semi-conical point.
struct NormalFormReport {
    double theta = 0.0;
    Mat2 rotation = identity2();
    ControlField field;
    ConditionReport condition;
    int v2 = 0;
    double beta = 0.0;  // families only
    double m0 = 0.0;    // families only
    bool small_m = false;
};

inline NormalFormReport reduce_to_condition(const ControlField& f, std::span<const double> x, int steps = 2,
                                            const Tolerances& tol = {}) {
    NormalFormReport r;
    r.field = f;
    std::vector<double> pt(x.begin(), x.end());
    if (steps >= 1) {
        auto s1 = left_equalize_gradients(r.field, pt, tol);
        r.theta = s1.theta;
        r.field = s1.field;
    }
    if (steps >= 2) {
        auto s2 = align_nonconical(r.field, pt, tol);
        r.rotation = s2.rotation;
        r.field = s2.field;
    }
    r.condition = f.arity() == 2 ? check_SC(r.field, pt, tol) : check_SCP(r.field, pt, tol);
    r.v2 = v2_sign(r.field, pt);
    if (f.arity() == 3) {
        Jacobian J = r.field.jacobian(r.field.to_point(pt));
        if (std::abs(J[1][2]) > tol.rank) r.beta = J[0][2] / J[1][2];
        if (std::abs(J[1][0]) > tol.rank) r.m0 = -J[0][0] / J[1][0];
        r.small_m = std::abs(r.m0) < 1e-6;
    }
    return r;
}

}  // namespace semiconic
