#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "classify.hpp"
#include "field.hpp"

namespace semiconic {

struct NewtonResult {
    std::vector<double> x;
    double residual = 0.0;
    int iterations = 0;
};

// Minimum-norm Newton iteration for f(x) = 0 from a seed (pseudo-inverse of the 2 x arity Jacobian).
inline NewtonResult find_intersection(const ControlField& f, std::span<const double> seed, const Tolerances& tol = {},
                                      int max_iter = 50) {
    Point3 p = f.to_point(seed);
    const int n = f.arity();
    NewtonResult r;
    for (int it = 0; it <= max_iter; ++it) {
        Vec2 val = f.value(p);
        r.residual = norm2(val);
        r.iterations = it;
        if (r.residual <= 1e-3 * tol.zero_at(p) || r.residual == 0.0) break;
        if (it == max_iter) break;
        Jacobian J = f.jacobian(p);
        Eigen::MatrixXd A(2, n);
        for (int i = 0; i < 2; ++i)
            for (int k = 0; k < n; ++k) A(i, k) = J[i][k];
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
        double smax = svd.singularValues()(0);
        if (!(smax > 0.0)) throw std::runtime_error("find_intersection: Jacobian vanishes at iterate " + std::to_string(it));
        svd.setThreshold(1e-12);
        Eigen::Vector2d b(val[0], val[1]);
        Eigen::VectorXd dx = svd.solve(b);
        for (int k = 0; k < n; ++k) p[k] -= dx(k);
    }
    if (!(r.residual <= tol.zero_at(p)))
        throw std::runtime_error("find_intersection: no convergence after " + std::to_string(max_iter) +
                                 " iterations (|f| = " + std::to_string(r.residual) + ")");
    r.x.assign(p.begin(), p.begin() + n);
    return r;
}

struct TurningPoint {
    Point3 point{};
    double zdd = 0.0;          // d^2 z / ds^2 along arclength
    bool degenerate = false;   // |zdd| <= tol.rank
    std::size_t after_vertex = 0;
    Classification marker;
};

struct LocusCurve {
    std::vector<Point3> vertices;
    std::vector<Point3> tangents;
    std::vector<Classification> markers;
    std::vector<TurningPoint> turning_points;
    bool closed = false;
    std::string stop_reason;  // why tracing ended (both directions)
};

namespace detail {

inline Point3 kernel_direction(const Jacobian& J) {
    Point3 t{J[0][1] * J[1][2] - J[0][2] * J[1][1], J[0][2] * J[1][0] - J[0][0] * J[1][2],
             J[0][0] * J[1][1] - J[0][1] * J[1][0]};
    double n = std::sqrt(t[0] * t[0] + t[1] * t[1] + t[2] * t[2]);
    if (n > 0.0)
        for (auto& x : t) x /= n;
    return t;
}

inline double dot3(const Point3& a, const Point3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
inline double dist3(const Point3& a, const Point3& b) {
    return std::sqrt((a[0] - b[0]) * (a[0] - b[0]) + (a[1] - b[1]) * (a[1] - b[1]) + (a[2] - b[2]) * (a[2] - b[2]));
}

inline bool full_rank(const Jacobian& J, const Tolerances& tol) {
    auto sv = singular_values(J, 3);
    return sv[1] > 0.0 && sv[0] > tol.rank * sv[1];
}

// Newton on {f = 0, dir . (x - anchor) = s}. Returns the iteration count or -1 on failure.
inline int correct_on_hyperplane(const ControlField& f, Point3& x, const Point3& anchor, const Point3& dir, double s,
                                 double target, int max_iter) {
    for (int it = 0; it <= max_iter; ++it) {
        Vec2 val = f.value(x);
        double h = dot3(dir, {x[0] - anchor[0], x[1] - anchor[1], x[2] - anchor[2]}) - s;
        if (norm2(val) <= target && std::abs(h) <= target) return it;
        if (it == max_iter) break;
        Jacobian J = f.jacobian(x);
        Eigen::Matrix3d A;
        A << J[0][0], J[0][1], J[0][2], J[1][0], J[1][1], J[1][2], dir[0], dir[1], dir[2];
        Eigen::Vector3d b(val[0], val[1], h);
        Eigen::Vector3d dx = A.partialPivLu().solve(b);
        if (!dx.allFinite()) return -1;
        for (int k = 0; k < 3; ++k) x[k] -= dx(k);
    }
    return -1;
}

// Unit tangent and d^2 x / ds^2 along arclength at a regular locus point.
inline std::pair<Point3, Point3> tangent_and_curvature(const ControlField& f, const Point3& x) {
    Jacobian J = f.jacobian(x);
    Point3 t = kernel_direction(J);
    Eigen::Matrix3d A;
    A << J[0][0], J[0][1], J[0][2], J[1][0], J[1][1], J[1][2], t[0], t[1], t[2];
    Eigen::Vector3d rhs;
    for (int i = 0; i < 2; ++i) {
        double q = 0.0;
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b) {
                Exponent e{0, 0, 0};
                e[a] += 1;
                e[b] += 1;
                q += f.component(i).derivative_at(x, e) * t[a] * t[b];
            }
        rhs(i) = -q;
    }
    rhs(2) = 0.0;
    Eigen::Vector3d c = A.partialPivLu().solve(rhs);
    return {t, {c(0), c(1), c(2)}};
}

}  // namespace detail

struct TraceOptions {
    double step = 0.01;
    double max_len = 2.0;         // per direction
    double domain_radius = 1e3;
    int max_corrector_iter = 5;
    int max_halvings = 30;
    double max_turn = 0.3;        // radians between consecutive tangents before the step is halved
};

// Pseudo-arclength continuation of Z(f) from a seed in both directions.
inline LocusCurve trace_locus(const ControlField& f, std::span<const double> seed, const TraceOptions& opt = {},
                              const Tolerances& tol = {}) {
    if (f.arity() != 3) throw std::invalid_argument("trace_locus needs an arity-3 field");
    if (!(opt.step > 0.0) || !(opt.max_len > 0.0)) throw std::invalid_argument("step and max_len must be positive");
    Point3 x0 = f.to_point(seed);
    if (norm2(f.value(x0)) > tol.zero_at(x0)) throw std::invalid_argument("trace_locus: seed is not on Z(f)");
    {
        Jacobian J = f.jacobian(x0);
        if (!detail::full_rank(J, tol)) throw std::runtime_error("trace_locus: Jacobian rank collapse at the seed");
        Point3 t = detail::kernel_direction(J);
        if (detail::correct_on_hyperplane(f, x0, x0, t, 0.0, 1e-2 * tol.trace, 20) < 0)
            throw std::runtime_error("trace_locus: seed correction failed");
    }
    Point3 t0 = detail::kernel_direction(f.jacobian(x0));
    for (int k = 0; k < 3; ++k)
        if (std::abs(t0[k]) > 1e-14) {
            if (t0[k] < 0.0) t0 = {-t0[0], -t0[1], -t0[2]};
            break;
        }

    LocusCurve out;
    std::vector<std::string> reasons;
    auto march = [&](double sign, std::vector<Point3>& xs, std::vector<Point3>& ts) -> bool {
        Point3 x = x0, t = {sign * t0[0], sign * t0[1], sign * t0[2]};
        double len = 0.0, h = opt.step;
        int halvings = 0;
        while (len < opt.max_len - 1e-15) {
            double hs = std::min(h, opt.max_len - len);
            Point3 xp{x[0] + hs * t[0], x[1] + hs * t[1], x[2] + hs * t[2]};
            Point3 xn = xp;
            int its = detail::correct_on_hyperplane(f, xn, x, t, hs, 1e-2 * tol.trace, opt.max_corrector_iter);
            bool ok = its >= 0;
            Point3 tn{};
            if (ok) {
                Jacobian J = f.jacobian(xn);
                if (!detail::full_rank(J, tol)) {
                    reasons.push_back("rank collapse");
                    return false;
                }
                tn = detail::kernel_direction(J);
                if (detail::dot3(tn, t) < 0.0) tn = {-tn[0], -tn[1], -tn[2]};
                ok = std::acos(std::clamp(detail::dot3(tn, t), -1.0, 1.0)) <= opt.max_turn;
            }
            if (!ok) {
                if (++halvings > opt.max_halvings) {
                    reasons.push_back("step underflow");
                    return false;
                }
                h *= 0.5;
                continue;
            }
            halvings = 0;
            len += detail::dist3(x, xn);
            x = xn;
            t = tn;
            h = std::min(opt.step, 2.0 * h);
            xs.push_back(x);
            ts.push_back(t);
            if (std::max({std::abs(x[0]), std::abs(x[1]), std::abs(x[2])}) > opt.domain_radius) {
                reasons.push_back("domain boundary");
                return false;
            }
            if (len > 4.0 * opt.step && detail::dist3(x, x0) < 0.5 * opt.step && detail::dot3(t, t0) * sign > 0.0) {
                reasons.push_back("closed");
                return true;
            }
        }
        reasons.push_back("max_len");
        return false;
    };

    std::vector<Point3> fx, ft, bx, bt;
    bool closed = march(1.0, fx, ft);
    if (closed) {
        fx.pop_back();
        ft.pop_back();
    } else {
        march(-1.0, bx, bt);
    }
    for (std::size_t i = bx.size(); i-- > 0;) {
        out.vertices.push_back(bx[i]);
        out.tangents.push_back({-bt[i][0], -bt[i][1], -bt[i][2]});
    }
    out.vertices.push_back(x0);
    out.tangents.push_back(t0);
    out.vertices.insert(out.vertices.end(), fx.begin(), fx.end());
    out.tangents.insert(out.tangents.end(), ft.begin(), ft.end());
    out.closed = closed;
    for (std::size_t i = 0; i < reasons.size(); ++i) out.stop_reason += (i ? "; " : "") + reasons[i];
    for (const auto& v : out.vertices) {
        std::array<double, 3> a{v[0], v[1], v[2]};
        out.markers.push_back(classify_family_point(f, a, tol));
    }
    return out;
}

// Refine the sign changes of the tangent z-component by bisection along arclength.
inline std::vector<TurningPoint> turning_points(const ControlField& f, const LocusCurve& curve,
                                                const Tolerances& tol = {}) {
    std::vector<TurningPoint> out;
    const auto& V = curve.vertices;
    const auto& T = curve.tangents;
    std::size_t n = V.size();
    std::size_t segs = curve.closed ? n : (n ? n - 1 : 0);
    for (std::size_t i = 0; i < segs; ++i) {
        std::size_t j = (i + 1) % n;
        double za = T[i][2], zb = T[j][2];
        Point3 hit{};
        bool exact = false;
        if (za == 0.0) {
            hit = V[i];
            exact = true;
        } else if (zb == 0.0 || za * zb > 0.0) {
            continue;
        }
        if (!exact) {
            const Point3 a = V[i], ta = T[i];
            double s_hi = detail::dot3(ta, {V[j][0] - a[0], V[j][1] - a[1], V[j][2] - a[2]});
            double s_lo = 0.0;
            auto tz_at = [&](double s, Point3& x) {
                x = {a[0] + s * ta[0], a[1] + s * ta[1], a[2] + s * ta[2]};
                if (detail::correct_on_hyperplane(f, x, a, ta, s, 1e-3 * tol.trace, 20) < 0)
                    throw std::runtime_error("turning_points: corrector failed");
                Point3 t = detail::kernel_direction(f.jacobian(x));
                if (detail::dot3(t, ta) < 0.0) t = {-t[0], -t[1], -t[2]};
                return t[2];
            };
            Point3 x{};
            double s = 0.5 * (s_lo + s_hi);
            for (int it = 0; it < 200; ++it) {
                s = 0.5 * (s_lo + s_hi);
                double tz = tz_at(s, x);
                if (std::abs(tz) <= tol.turn || s_hi - s_lo < 1e-16) break;
                if ((tz > 0.0) == (za > 0.0))
                    s_lo = s;
                else
                    s_hi = s;
            }
            hit = x;
        }
        TurningPoint tp;
        tp.point = hit;
        tp.after_vertex = i;
        tp.zdd = detail::tangent_and_curvature(f, hit).second[2];
        tp.degenerate = std::abs(tp.zdd) <= tol.rank;
        std::array<double, 3> p{hit[0], hit[1], hit[2]};
        tp.marker = classify_family_point(f, p, tol);
        out.push_back(tp);
        if (exact && zb == 0.0) ++i;
    }
    return out;
}

inline std::vector<Vec2> project(const LocusCurve& curve) {
    std::vector<Vec2> out;
    out.reserve(curve.vertices.size());
    for (const auto& v : curve.vertices) out.push_back({v[0], v[1]});
    return out;
}

struct DoublePoint {
    Vec2 point{};
    std::size_t seg_a = 0, seg_b = 0;
    double param_a = 0.0, param_b = 0.0;  // position inside each segment, in [0, 1]
    double z_a = 0.0, z_b = 0.0;          // filled by the curve overload
};

// Pairwise segment intersections of a planar polyline, skipping adjacent segments.
inline std::vector<DoublePoint> detect_self_intersections(const std::vector<Vec2>& poly, bool closed = false,
                                                          double fatten = 1e-12) {
    std::vector<DoublePoint> out;
    std::size_t n = poly.size();
    if (n < 4) return out;
    std::size_t segs = closed ? n : n - 1;
    auto orient = [](const Vec2& a, const Vec2& b, const Vec2& c) {
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
    };
    for (std::size_t i = 0; i < segs; ++i) {
        const Vec2& a = poly[i];
        const Vec2& b = poly[(i + 1) % n];
        double bx0 = std::min(a[0], b[0]) - fatten, bx1 = std::max(a[0], b[0]) + fatten;
        double by0 = std::min(a[1], b[1]) - fatten, by1 = std::max(a[1], b[1]) + fatten;
        for (std::size_t j = i + 2; j < segs; ++j) {
            if (closed && i == 0 && j == segs - 1) continue;
            const Vec2& c = poly[j];
            const Vec2& d = poly[(j + 1) % n];
            if (std::max(c[0], d[0]) < bx0 || std::min(c[0], d[0]) > bx1 || std::max(c[1], d[1]) < by0 ||
                std::min(c[1], d[1]) > by1)
                continue;
            double o1 = orient(a, b, c), o2 = orient(a, b, d), o3 = orient(c, d, a), o4 = orient(c, d, b);
            double sab = std::hypot(b[0] - a[0], b[1] - a[1]), scd = std::hypot(d[0] - c[0], d[1] - c[1]);
            double e1 = fatten * sab, e2 = fatten * scd;
            bool cross = ((o1 <= e1 && o2 >= -e1) || (o1 >= -e1 && o2 <= e1)) &&
                         ((o3 <= e2 && o4 >= -e2) || (o3 >= -e2 && o4 <= e2));
            if (!cross) continue;
            double den = (b[0] - a[0]) * (d[1] - c[1]) - (b[1] - a[1]) * (d[0] - c[0]);
            if (den == 0.0) continue;  // collinear overlap: not a transversal double point
            double pa = ((c[0] - a[0]) * (d[1] - c[1]) - (c[1] - a[1]) * (d[0] - c[0])) / den;
            double pb = ((c[0] - a[0]) * (b[1] - a[1]) - (c[1] - a[1]) * (b[0] - a[0])) / den;
            DoublePoint dp;
            dp.seg_a = i;
            dp.seg_b = j;
            dp.param_a = std::clamp(pa, 0.0, 1.0);
            dp.param_b = std::clamp(pb, 0.0, 1.0);
            dp.point = {a[0] + dp.param_a * (b[0] - a[0]), a[1] + dp.param_a * (b[1] - a[1])};
            // A crossing exactly at a shared vertex is seen by two neighbouring segments.
            bool dup = false;
            for (const auto& q : out)
                if (std::hypot(q.point[0] - dp.point[0], q.point[1] - dp.point[1]) <= 1e-10 &&
                    (q.seg_a + 1 >= i && q.seg_a <= i + 1) && (q.seg_b + 1 >= j && q.seg_b <= j + 1))
                    dup = true;
            if (!dup) out.push_back(dp);
        }
    }
    return out;
}

inline std::vector<DoublePoint> detect_self_intersections(const LocusCurve& curve, double fatten = 1e-12) {
    auto out = detect_self_intersections(project(curve), curve.closed, fatten);
    const auto& V = curve.vertices;
    std::size_t n = V.size();
    for (auto& dp : out) {
        auto zz = [&](std::size_t s, double p) { return V[s][2] + p * (V[(s + 1) % n][2] - V[s][2]); };
        dp.z_a = zz(dp.seg_a, dp.param_a);
        dp.z_b = zz(dp.seg_b, dp.param_b);
    }
    return out;
}

struct CuspCheck {
    bool pass = false;
    double min_planar_speed = 0.0;
};

inline CuspCheck check_no_cusp(const LocusCurve& curve, const Tolerances& tol = {}) {
    CuspCheck c;
    c.min_planar_speed = 1e300;
    for (const auto& t : curve.tangents) c.min_planar_speed = std::min(c.min_planar_speed, std::hypot(t[0], t[1]));
    c.pass = !curve.tangents.empty() && c.min_planar_speed > tol.cusp;
    return c;
}

// Angle between the projected locus tangent at an F-semi-conical point and its non-conical direction.
inline double tangency_vs_nonconical(const ControlField& f, std::span<const double> point, const LocusCurve& curve,
                                     const Tolerances& tol = {}, double on_curve_tol = 1e-6) {
    Classification c = classify_family_point(f, point, tol);
    if (c.verdict != Verdict::FSemiConical) throw std::invalid_argument("tangency check needs an FSemiConical point");
    Point3 p = f.to_point(point);
    double best = 1e300;
    for (std::size_t i = 0; i + 1 < curve.vertices.size(); ++i) {
        const Point3 &a = curve.vertices[i], &b = curve.vertices[i + 1];
        Point3 ab{b[0] - a[0], b[1] - a[1], b[2] - a[2]}, ap{p[0] - a[0], p[1] - a[1], p[2] - a[2]};
        double L2 = detail::dot3(ab, ab);
        double s = L2 > 0.0 ? std::clamp(detail::dot3(ap, ab) / L2, 0.0, 1.0) : 0.0;
        best = std::min(best, detail::dist3(p, {a[0] + s * ab[0], a[1] + s * ab[1], a[2] + s * ab[2]}));
    }
    if (curve.vertices.size() == 1) best = detail::dist3(p, curve.vertices[0]);
    if (!(best <= on_curve_tol)) throw std::invalid_argument("point is not on the traced curve");
    Point3 t = detail::kernel_direction(f.jacobian(p));
    double cr = t[0] * (*c.eta)[1] - t[1] * (*c.eta)[0];
    double dt = t[0] * (*c.eta)[0] + t[1] * (*c.eta)[1];
    return std::atan2(std::abs(cr), std::abs(dt));
}

}  // namespace semiconic
