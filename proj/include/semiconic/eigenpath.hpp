#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "field.hpp"
#include "path.hpp"

namespace semiconic {

struct Eigenpair {
    double lambda = 0.0;
    Vec2 phi{1.0, 0.0};
    bool degenerate = false;
};

// Half-angle form of the eigenvectors of [[f1, f2], [f2, -f1]]:
// phi+ = (1, V)/sqrt(1+V^2), phi- = (-V, 1)/sqrt(1+V^2) with V = (r - f1)/f2.
inline Eigenpair eigenpair_closed_form(const TwoLevelHamiltonian& H, int branch) {
    if (branch != 1 && branch != -1) throw std::invalid_argument("branch must be +1 or -1");
    double r = H.norm();
    if (r == 0.0) return {0.0, branch > 0 ? Vec2{1.0, 0.0} : Vec2{0.0, 1.0}, true};
    double a = 0.5 * std::atan2(H.f2(), H.f1());
    double c = std::cos(a), s = std::sin(a);
    if (branch > 0) return {r, {c, s}, false};
    return {-r, {-s, c}, false};
}

// V of the ordered parametrization, f2 / (f1 + r); infinite on the negative f1 half-axis.
inline double v_parameter(double f1, double f2) {
    double d = f1 + std::hypot(f1, f2);
    if (d == 0.0) return f2 == 0.0 && f1 == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    return f2 / d;
}

struct LimitEigenvectors {
    double V = 0.0;
    Vec2 phi0{}, phi1{};
};

// Smooth-branch limits at a crossing, in the half-angle convention: Phi0 = (-V, 1), Phi1 = (1, V), normalised.
inline LimitEigenvectors limit_from_v(double V) {
    double n = std::sqrt(1.0 + V * V);
    return {V, {-V / n, 1.0 / n}, {1.0 / n, V / n}};
}

inline LimitEigenvectors limit_eigenvector_conical(int sign_udot) {
    if (sign_udot != 1 && sign_udot != -1) throw std::invalid_argument("sign must be +1 or -1");
    return limit_from_v(-(1.0 + sign_udot * std::sqrt(2.0)));
}

inline LimitEigenvectors limit_eigenvector_nonconical(double udd, double vd) {
    double beta = 0.5 * udd + vd * vd;
    if (beta == 0.0) return {std::numeric_limits<double>::infinity(), {1.0, 0.0}, {0.0, 1.0}};
    double V = -(0.5 * udd - std::sqrt(0.25 * udd * udd + beta * beta)) / beta;
    return limit_from_v(V);
}

// d^k/dt^k f(u(t), v(t), z) for k = 0..3.
inline std::array<Vec2, 4> field_along_path(const ControlField& f, const ControlPath& path, double z, double t) {
    Point3 x = path.point(t, z);
    std::array<Point3, 4> d{};
    for (int k = 1; k <= 3; ++k) {
        Vec2 q = path.derivative(t, k);
        d[k] = {q[0], q[1], 0.0};
    }
    std::array<Vec2, 4> out{};
    out[0] = f.value(x);
    for (int i = 0; i < 2; ++i) {
        const Polynomial& p = f.component(i);
        auto D1 = [&](const Point3& a) {
            double s = 0.0;
            for (int k = 0; k < 2; ++k) {
                Exponent e{0, 0, 0};
                e[k] = 1;
                s += p.derivative_at(x, e) * a[k];
            }
            return s;
        };
        auto D2 = [&](const Point3& a, const Point3& b) {
            double s = 0.0;
            for (int k = 0; k < 2; ++k)
                for (int l = 0; l < 2; ++l) {
                    Exponent e{0, 0, 0};
                    e[k] += 1;
                    e[l] += 1;
                    s += p.derivative_at(x, e) * a[k] * b[l];
                }
            return s;
        };
        auto D3 = [&](const Point3& a) {
            double s = 0.0;
            for (int k = 0; k < 2; ++k)
                for (int l = 0; l < 2; ++l)
                    for (int m = 0; m < 2; ++m) {
                        Exponent e{0, 0, 0};
                        e[k] += 1;
                        e[l] += 1;
                        e[m] += 1;
                        s += p.derivative_at(x, e) * a[k] * a[l] * a[m];
                    }
            return s;
        };
        out[1][i] = D1(d[1]);
        out[2][i] = D2(d[1], d[1]) + D1(d[2]);
        out[3][i] = D3(d[1]) + 3.0 * D2(d[1], d[2]) + D1(d[3]);
    }
    return out;
}

// Ordered eigenvector at t, taking the one-sided limit (side = -1 left, +1 right) when the gap closes at t.
inline Eigenpair one_sided_eigenpair(const ControlField& f, const ControlPath& path, double z, double t, int side,
                                     int branch, double rel_tol = 1e-12) {
    auto jet = field_along_path(f, path, z, t);
    double scale = 0.0;
    for (const auto& q : jet) scale = std::max(scale, norm2(q));
    if (norm2(jet[0]) > rel_tol * std::max(scale, 1e-300))
        return eigenpair_closed_form({jet[0][0], jet[0][1]}, branch);
    for (int k = 1; k <= 3; ++k) {
        if (norm2(jet[k]) > rel_tol * scale) {
            double s = (k % 2 == 1 && side < 0) ? -1.0 : 1.0;
            Eigenpair e = eigenpair_closed_form({s * jet[k][0], s * jet[k][1]}, branch);
            e.lambda = 0.0;
            return e;
        }
    }
    return eigenpair_closed_form({0.0, 0.0}, branch);
}

struct EigenBranches {
    std::vector<double> t;
    std::vector<double> lambda0, lambda1;
    std::vector<Vec2> phi0, phi1;
    std::vector<double> theta;  // unwrapped angle of phi0
    std::vector<double> V;      // ordered V-parametrization f2 / (f1 + r)
    std::vector<double> crossing_times;
    std::vector<double> crossing_gaps;
    std::optional<double> t_z;  // first crossing time
    std::optional<double> z;
    double lipschitz = 0.0;     // max |Phi0(t_{k+1}) - Phi0(t_k)| / dt
    std::vector<std::string> warnings;

    Vec2 phi0_at(double s) const {
        if (t.empty()) throw std::logic_error("empty branches");
        if (s <= t.front()) return phi0.front();
        if (s >= t.back()) return phi0.back();
        double h = t[1] - t[0];
        std::size_t k = std::min(static_cast<std::size_t>((s - t.front()) / h), t.size() - 2);
        double w = (s - t[k]) / h;
        Vec2 a = phi0[k], b = phi0[k + 1];
        Vec2 p{(1 - w) * a[0] + w * b[0], (1 - w) * a[1] + w * b[1]};
        double n = norm2(p);
        return {p[0] / n, p[1] / n};
    }
    Vec2 phi1_at(double s) const {
        Vec2 p = phi0_at(s);
        return {-p[1], p[0]};
    }
    double lambda0_at(double s) const {
        if (s <= t.front()) return lambda0.front();
        if (s >= t.back()) return lambda0.back();
        double h = t[1] - t[0];
        std::size_t k = std::min(static_cast<std::size_t>((s - t.front()) / h), t.size() - 2);
        double w = (s - t[k]) / h;
        return (1 - w) * lambda0[k] + w * lambda0[k + 1];
    }
};

struct TrackOptions {
    double detect_rel = 1e-6;  // gap minima below this fraction of the max gap are reported when not crossings
    double crossing_gap = 1e-9;
    double t_tol = 1e-12;
    double singular_rel = 1e-12;
};

namespace detail {

// Golden-section minimisation of |f| along the path on [a, b].
inline std::pair<double, double> minimise_gap(const ControlField& f, const ControlPath& path, double z, double a,
                                              double b, double t_tol) {
    auto r = [&](double s) { return norm2(f.value(path.point(s, z))); };
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    double c = b - g * (b - a), d = a + g * (b - a);
    double rc = r(c), rd = r(d);
    while (b - a > t_tol) {
        if (rc <= rd) {
            b = d;
            d = c;
            rd = rc;
            c = b - g * (b - a);
            rc = r(c);
        } else {
            a = c;
            c = d;
            rc = rd;
            d = a + g * (b - a);
            rd = r(d);
        }
    }
    std::array<double, 4> cand{a, b, c, d};
    double best = a, rb = r(a);
    for (double s : cand)
        if (r(s) < rb) {
            rb = r(s);
            best = s;
        }
    return {best, 2.0 * rb};
}

}  // namespace detail

// Smooth eigen-branches along a path: Phi0 starts as the lower eigenvector and is continued by overlap,
// which swaps the ordered labels at conical crossings and keeps them at tangential touches.
inline EigenBranches track_branches(const ControlField& f, const ControlPath& path, std::optional<double> z, int N,
                                    const TrackOptions& opt = {}) {
    if (N < 2) throw std::invalid_argument("grid needs N >= 2");
    if (f.arity() == 3 && !z) throw std::invalid_argument("family field needs a parameter value z");
    const double zz = z.value_or(0.0);
    EigenBranches B;
    B.z = z;
    B.t.resize(N + 1);
    std::vector<Vec2> fv(N + 1);
    std::vector<double> r(N + 1);
    double rmax = 0.0;
    for (int k = 0; k <= N; ++k) {
        B.t[k] = static_cast<double>(k) / N;
        fv[k] = f.value(path.point(B.t[k], zz));
        r[k] = norm2(fv[k]);
        rmax = std::max(rmax, r[k]);
    }

    // Crossings: refine every local minimum of the gap.
    for (int k = 0; k <= N; ++k) {
        bool left = k == 0 || r[k] <= r[k - 1];
        bool right = k == N || r[k] <= r[k + 1];
        if (!(left && right)) continue;
        if (k > 0 && k < N && r[k] == r[k - 1]) continue;  // plateau already handled
        double a = B.t[std::max(k - 1, 0)], b = B.t[std::min(k + 1, N)];
        auto [ts, gap] = detail::minimise_gap(f, path, zz, a, b, opt.t_tol);
        if (gap < opt.crossing_gap) {
            if (B.crossing_times.empty() || std::abs(ts - B.crossing_times.back()) > 1e-9) {
                B.crossing_times.push_back(ts);
                B.crossing_gaps.push_back(gap);
            }
        } else if (gap < opt.detect_rel * 2.0 * rmax) {
            B.warnings.push_back("gap minimum " + std::to_string(gap) + " at t = " + std::to_string(ts) +
                                 " is below resolution but positive");
        }
    }
    if (!B.crossing_times.empty()) B.t_z = B.crossing_times.front();

    // Label of Phi0 right after t = 0: lower eigenvector unless the path starts on a crossing.
    bool start_on_crossing = B.t_z && *B.t_z <= 1e-9;
    int label = start_on_crossing ? 1 : -1;

    B.phi0.resize(N + 1);
    B.lambda0.resize(N + 1);
    const double thr = opt.singular_rel * std::max(rmax, 1e-300);
    int prev = -1;
    for (int k = 0; k <= N; ++k) {
        bool singular = r[k] <= thr;
        Vec2 phi;
        double lam;
        if (prev < 0) {
            Eigenpair e = singular ? one_sided_eigenpair(f, path, zz, B.t[k], +1, label)
                                   : eigenpair_closed_form({fv[k][0], fv[k][1]}, label);
            phi = e.phi;
            lam = singular ? 0.0 : e.lambda;
            double first = std::abs(phi[0]) > 1e-14 ? phi[0] : phi[1];
            if (first > 0.0) phi = {-phi[0], -phi[1]};
        } else {
            const Vec2& q = B.phi0[prev];
            Eigenpair em = singular ? one_sided_eigenpair(f, path, zz, B.t[k], -1, -1)
                                    : eigenpair_closed_form({fv[k][0], fv[k][1]}, -1);
            Eigenpair ep = singular ? one_sided_eigenpair(f, path, zz, B.t[k], -1, +1)
                                    : eigenpair_closed_form({fv[k][0], fv[k][1]}, +1);
            double om = em.phi[0] * q[0] + em.phi[1] * q[1];
            double op = ep.phi[0] * q[0] + ep.phi[1] * q[1];
            const Eigenpair& e = std::abs(om) >= std::abs(op) ? em : ep;
            double o = std::abs(om) >= std::abs(op) ? om : op;
            phi = o < 0.0 ? Vec2{-e.phi[0], -e.phi[1]} : e.phi;
            lam = singular ? 0.0 : e.lambda;
        }
        B.phi0[k] = phi;
        B.lambda0[k] = lam;
        prev = k;
    }

    B.phi1.resize(N + 1);
    B.lambda1.resize(N + 1);
    B.theta.resize(N + 1);
    B.V.resize(N + 1);
    for (int k = 0; k <= N; ++k) {
        B.phi1[k] = {-B.phi0[k][1], B.phi0[k][0]};
        B.lambda1[k] = -B.lambda0[k];
        double a = std::atan2(B.phi0[k][1], B.phi0[k][0]);
        if (k > 0) {
            double d = a - B.theta[k - 1];
            d -= 2.0 * 3.14159265358979323846 * std::round(d / (2.0 * 3.14159265358979323846));
            a = B.theta[k - 1] + d;
        }
        B.theta[k] = a;
        B.V[k] = v_parameter(fv[k][0], fv[k][1]);
        if (k > 0) {
            double h = B.t[k] - B.t[k - 1];
            B.lipschitz = std::max(B.lipschitz, std::hypot(B.phi0[k][0] - B.phi0[k - 1][0],
                                                           B.phi0[k][1] - B.phi0[k - 1][1]) / h);
        }
    }
    return B;
}

}  // namespace semiconic
