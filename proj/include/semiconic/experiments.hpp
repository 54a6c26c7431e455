#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "classify.hpp"
#include "eigenpath.hpp"
#include "field.hpp"
#include "fit.hpp"
#include "locus.hpp"
#include "path.hpp"
#include "propagate.hpp"

namespace semiconic {

// ---------------------------------------------------------------------------
// Locus spans parametrized by v

struct LocusSpan {
    std::vector<Point3> points;  // entry first
    double v_start = 0.0, v_end = 0.0;
    std::vector<double> u_of_x, z_of_x;  // polynomials in x = (v - v_end) / (v_start - v_end), x in [0, 1]
    double residual = 0.0;               // max vertex deviation of the fit
    int degree = 0;
};

namespace detail {

// Position of p along the traced polyline as (segment index + fraction), with the distance to it.
inline double locate_on_curve(const LocusCurve& c, const Point3& p, double& dist) {
    dist = 1e300;
    double best = 0.0;
    const auto& V = c.vertices;
    if (V.size() == 1) {
        dist = dist3(V[0], p);
        return 0.0;
    }
    for (std::size_t i = 0; i + 1 < V.size(); ++i) {
        Point3 d{V[i + 1][0] - V[i][0], V[i + 1][1] - V[i][1], V[i + 1][2] - V[i][2]};
        double L = dot3(d, d);
        double s = L > 0.0 ? std::clamp(dot3(d, {p[0] - V[i][0], p[1] - V[i][1], p[2] - V[i][2]}) / L, 0.0, 1.0) : 0.0;
        double e = dist3({V[i][0] + s * d[0], V[i][1] + s * d[1], V[i][2] + s * d[2]}, p);
        if (e < dist) {
            dist = e;
            best = static_cast<double>(i) + s;
        }
    }
    return best;
}

inline std::vector<double> lsq_poly(const std::vector<double>& x, const std::vector<double>& y, int degree) {
    Eigen::MatrixXd A(x.size(), degree + 1);
    Eigen::VectorXd b(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        double p = 1.0;
        for (int k = 0; k <= degree; ++k) {
            A(i, k) = p;
            p *= x[i];
        }
        b(i) = y[i];
    }
    Eigen::VectorXd c = A.colPivHouseholderQr().solve(b);
    return std::vector<double>(c.data(), c.data() + c.size());
}

inline double max_dev(const std::vector<double>& c, const std::vector<double>& x, const std::vector<double>& y) {
    double m = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) m = std::max(m, std::abs(horner(c, x[i]) - y[i]));
    return m;
}

// Exact endpoints a, b with the traced vertices strictly between their curve positions, in order a -> b.
inline std::vector<Point3> curve_slice(const LocusCurve& c, const Point3& a, double pa, const Point3& b, double pb) {
    const double gap = 1e-9;
    std::vector<Point3> out{a};
    if (pa <= pb) {
        for (std::size_t i = 0; i < c.vertices.size(); ++i)
            if (i > pa + gap && i < pb - gap) out.push_back(c.vertices[i]);
    } else {
        for (std::size_t i = c.vertices.size(); i-- > 0;)
            if (i < pa - gap && i > pb + gap) out.push_back(c.vertices[i]);
    }
    out.push_back(b);
    return out;
}

inline std::vector<double> pow5(const std::vector<double>& q) {
    auto q2 = poly_mul(q, q);
    return poly_mul(poly_mul(q2, q2), q);
}

inline double field_residual(const ControlField& f, const Point3& p) { return norm2(f.value(p)); }

}  // namespace detail

// Least-squares fit of u and z as polynomials in the normalized v-coordinate, lowest degree reaching fit_tol.
inline LocusSpan fit_span(std::vector<Point3> pts, double fit_tol, int max_degree) {
    if (pts.size() < 3) throw std::invalid_argument("locus span has fewer than 3 vertices");
    LocusSpan s;
    s.points = pts;
    s.v_start = pts.front()[1];
    s.v_end = pts.back()[1];
    double dir = s.v_end > s.v_start ? 1.0 : -1.0;
    for (std::size_t i = 1; i < pts.size(); ++i)
        if (!((pts[i][1] - pts[i - 1][1]) * dir > 0.0))
            throw std::invalid_argument("locus span is not a graph over v (v not monotone at vertex " +
                                        std::to_string(i) + ")");
    std::vector<double> x(pts.size()), u(pts.size()), z(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
        x[i] = (pts[i][1] - s.v_end) / (s.v_start - s.v_end);
        u[i] = pts[i][0];
        z[i] = pts[i][2];
    }
    int top = std::min<int>(max_degree, static_cast<int>(pts.size()) - 1);
    for (int d = 2; d <= top; ++d) {
        auto cu = detail::lsq_poly(x, u, d), cz = detail::lsq_poly(x, z, d);
        double r = std::max(detail::max_dev(cu, x, u), detail::max_dev(cz, x, z));
        if (d == 2 || r < s.residual) {
            s.u_of_x = cu;
            s.z_of_x = cz;
            s.residual = r;
            s.degree = d;
        }
        if (r <= fit_tol) break;
    }
    return s;
}

// ---------------------------------------------------------------------------
// Condition-(C) path

struct CPathOptions {
    double fit_tol = 1e-9;
    int max_degree = 12;
    double on_locus_tol = 1e-8;
    int direction = 0;  // +1 / -1 along the traced vertex order, 0 picks the nearest fold
    double curve_tol = 1e-4;  // distance to the traced polyline
    Tolerances tol{};
};

struct CPathReport {
    ControlPath path;
    LocusSpan span;
    Point3 entry{}, fold{};
    double z0 = 0.0, z_fold = 0.0;
    Vec2 end_value{}, end_velocity{}, end_acceleration{};
    double locus_residual = 0.0;  // max |f(u(t), v(t), z(v(t)))| over samples
};

inline CPathReport synthesize_C_path(const ControlField& f, const LocusCurve& curve, std::span<const double> entry,
                                     const CPathOptions& opt = {}) {
    if (f.arity() != 3) throw std::invalid_argument("condition-(C) paths need a family field");
    if (entry.size() != 3) throw std::invalid_argument("entry must be a point (u, v, z)");
    Point3 e{entry[0], entry[1], entry[2]};
    if (detail::field_residual(f, e) > opt.on_locus_tol) throw std::invalid_argument("entry is not on the singular locus");
    Classification ce = classify_family_point(f, entry, opt.tol);
    if (ce.verdict != Verdict::FConical)
        throw std::invalid_argument(std::string("entry is not F-conical (") + to_string(ce.verdict) + ")");
    double d = 0.0;
    const double pe = detail::locate_on_curve(curve, e, d);
    if (d > opt.curve_tol) throw std::invalid_argument("entry is not on the traced locus");
    auto tps = curve.turning_points.empty() ? turning_points(f, curve, opt.tol) : curve.turning_points;
    std::optional<TurningPoint> fwd, bwd;
    std::optional<double> pfwd, pbwd;
    for (const auto& tp : tps) {
        double dd = 0.0;
        double pt = detail::locate_on_curve(curve, tp.point, dd);
        if (pt > pe && !fwd) {
            fwd = tp;
            pfwd = pt;
        }
        if (pt < pe) {
            bwd = tp;
            pbwd = pt;
        }
    }
    std::optional<TurningPoint> fold;
    double pf = 0.0;
    bool use_fwd = opt.direction > 0 ? true
                   : opt.direction < 0 ? false
                   : (fwd && bwd) ? (*pfwd - pe <= pe - *pbwd)
                                  : static_cast<bool>(fwd);
    if (use_fwd && fwd) {
        fold = fwd;
        pf = *pfwd;
    } else if (!use_fwd && bwd) {
        fold = bwd;
        pf = *pbwd;
    }
    if (!fold) throw std::invalid_argument("no turning point of the locus beyond the entry");
    if (fold->marker.verdict != Verdict::FSemiConical)
        throw std::invalid_argument("turning point is not F-semi-conical");
    auto pts = detail::curve_slice(curve, e, pe, fold->point, pf);

    std::vector<Vec2> planar;
    for (const auto& p : pts) planar.push_back({p[0], p[1]});
    if (!detect_self_intersections(planar, false).empty())
        throw std::invalid_argument("locus projection self-intersects between entry and fold");

    CPathReport r;
    r.span = fit_span(pts, opt.fit_tol, opt.max_degree);
    if (r.span.residual > opt.fit_tol)
        throw std::runtime_error("polynomial fit of the locus misses the tolerance: " + std::to_string(r.span.residual));
    // x = 1 - t runs from the entry (x = 1) to the fold (x = 0).
    const std::vector<double> x_of_t{1.0, -1.0};
    auto u = poly_compose(r.span.u_of_x, x_of_t);
    std::vector<double> v{r.span.v_start, r.span.v_end - r.span.v_start};
    r.path = ControlPath::polynomial(u, v);
    r.entry = e;
    r.fold = fold->point;
    r.z0 = e[2];
    r.z_fold = fold->point[2];
    r.end_value = r.path.value(1.0);
    r.end_velocity = r.path.velocity(1.0);
    r.end_acceleration = r.path.acceleration(1.0);
    if (std::abs(r.end_acceleration[0]) + std::abs(r.end_acceleration[1]) == 0.0)
        throw std::runtime_error("path has vanishing acceleration at the fold");
    for (int k = 0; k <= 1000; ++k) {
        double t = k / 1000.0;
        Vec2 p = r.path.value(t);
        double z = horner(r.span.z_of_x, 1.0 - t);
        r.locus_residual = std::max(r.locus_residual, detail::field_residual(f, {p[0], p[1], z}));
    }
    return r;
}

// ---------------------------------------------------------------------------
// Closed loop through the locus

struct LoopOptions {
    double t0 = 0.25, t1 = 0.75;
    double exit_speed = 0.5;  // fraction of the linear exit speed kept at t1, in (0, 1]
    double fit_tol = 1e-9;
    int max_degree = 12;
    double on_locus_tol = 1e-8;
    double base_clearance = 1e-3;
    double curve_tol = 1e-4;
    int check_t = 2000, check_z = 201;
    double check_margin = 0.05;  // fraction of each leg next to the locus excluded from the gap check
    double gap_floor = 1e-10;
    Tolerances tol{};
};

struct LoopReport {
    ControlPath path;
    LocusSpan span;
    double t0 = 0.25, t1 = 0.75;
    double z0 = 0.0, z1 = 0.0;
    double arc_z_min = 0.0, arc_z_max = 0.0;
    bool z_range_ok = true;
    double min_gap_off_segment = 0.0;
    double min_gap_t = 0.0;
    std::vector<std::string> diagnostics;
};

namespace detail {

// min over z in [za, zb] of |f(u, v, z)|: dense sampling then golden-section polish.
inline double min_gap_over_z(const ControlField& f, double u, double v, double za, double zb, int n) {
    auto g = [&](double z) { return norm2(f.value({u, v, z})); };
    double best = 1e300, zbest = za;
    for (int k = 0; k < n; ++k) {
        double z = za + (zb - za) * k / (n - 1);
        double val = g(z);
        if (val < best) {
            best = val;
            zbest = z;
        }
    }
    double h = (zb - za) / (n - 1);
    double a = std::max(za, zbest - h), b = std::min(zb, zbest + h);
    const double r = 0.5 * (std::sqrt(5.0) - 1.0);
    double c = b - r * (b - a), d = a + r * (b - a);
    double gc = g(c), gd = g(d);
    for (int it = 0; it < 80 && b - a > 1e-15; ++it) {
        if (gc < gd) {
            b = d;
            d = c;
            gd = gc;
            c = b - r * (b - a);
            gc = g(c);
        } else {
            a = c;
            c = d;
            gc = gd;
            d = a + r * (b - a);
            gd = g(d);
        }
    }
    return std::min({best, gc, gd});
}

inline double polyline_distance(const std::vector<Vec2>& poly, const Vec2& p) {
    double m = 1e300;
    for (std::size_t i = 0; i + 1 < poly.size(); ++i) {
        Vec2 a = poly[i], b = poly[i + 1];
        double dx = b[0] - a[0], dy = b[1] - a[1];
        double L = dx * dx + dy * dy;
        double s = L > 0.0 ? std::clamp(((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / L, 0.0, 1.0) : 0.0;
        m = std::min(m, std::hypot(p[0] - a[0] - s * dx, p[1] - a[1] - s * dy));
    }
    return m;
}

}  // namespace detail

inline LoopReport synthesize_loop_path(const ControlField& f, const LocusCurve& curve, std::span<const double> entry,
                                       std::span<const double> exit, Vec2 base, const LoopOptions& opt = {}) {
    if (f.arity() != 3) throw std::invalid_argument("loop paths need a family field");
    if (entry.size() != 3 || exit.size() != 3) throw std::invalid_argument("entry and exit must be points (u, v, z)");
    if (!(opt.t0 > 0.0 && opt.t0 < opt.t1 && opt.t1 < 1.0)) throw std::invalid_argument("need 0 < t0 < t1 < 1");
    if (!(opt.exit_speed > 0.0 && opt.exit_speed <= 1.0)) throw std::invalid_argument("exit_speed must be in (0, 1]");
    Point3 e0{entry[0], entry[1], entry[2]}, e1{exit[0], exit[1], exit[2]};
    if (!(e0[2] < e1[2])) throw std::invalid_argument("entry parameter must be below the exit parameter (z0 < z1)");
    for (const auto* p : {&e0, &e1}) {
        if (detail::field_residual(f, *p) > opt.on_locus_tol)
            throw std::invalid_argument("entry/exit is not on the singular locus");
        Classification c = classify_family_point(f, std::span<const double>(p->data(), 3), opt.tol);
        if (c.verdict != Verdict::FConical)
            throw std::invalid_argument(std::string("entry/exit is not F-conical, no transversal passage (") +
                                        to_string(c.verdict) + ")");
    }
    double d0 = 0.0, d1 = 0.0;
    const double p0 = detail::locate_on_curve(curve, e0, d0), p1 = detail::locate_on_curve(curve, e1, d1);
    if (d0 > opt.curve_tol || d1 > opt.curve_tol) throw std::invalid_argument("entry/exit is not on the traced locus");
    if (std::abs(p0 - p1) < 1e-9) throw std::invalid_argument("entry and exit coincide on the traced locus");
    auto pts = detail::curve_slice(curve, e0, p0, e1, p1);

    std::vector<Vec2> planar_all = project(curve);
    if (detail::polyline_distance(planar_all, base) < opt.base_clearance)
        throw std::invalid_argument("base point lies on the projected locus");
    std::vector<Vec2> planar;
    for (const auto& p : pts) planar.push_back({p[0], p[1]});
    if (!detect_self_intersections(planar, false).empty())
        throw std::invalid_argument("locus projection self-intersects between entry and exit");

    LoopReport r;
    r.t0 = opt.t0;
    r.t1 = opt.t1;
    r.z0 = e0[2];
    r.z1 = e1[2];
    r.span = fit_span(pts, opt.fit_tol, opt.max_degree);
    if (r.span.residual > opt.fit_tol)
        throw std::runtime_error("polynomial fit of the locus misses the tolerance: " + std::to_string(r.span.residual));
    r.arc_z_min = 1e300;
    r.arc_z_max = -1e300;
    for (int k = 0; k <= 1000; ++k) {
        double z = horner(r.span.z_of_x, k / 1000.0);
        r.arc_z_min = std::min(r.arc_z_min, z);
        r.arc_z_max = std::max(r.arc_z_max, z);
    }
    const double zt = 1e-9;
    r.z_range_ok = r.arc_z_min >= r.z0 - zt && r.arc_z_max <= r.z1 + zt;
    if (!r.z_range_ok) {
        std::ostringstream os;
        os << "locus z leaves [z0, z1] along the arc: range [" << r.arc_z_min << ", " << r.arc_z_max << "]";
        r.diagnostics.push_back(os.str());
    }

    // Arc: x(sigma) = (1-d)(1-sigma)^2 + d(1-sigma), sigma = (t - t0)/(t1 - t0), as a polynomial in absolute t.
    const double L = opt.t1 - opt.t0, dl = opt.exit_speed;
    const std::vector<double> one_minus_sigma{1.0 + opt.t0 / L, -1.0 / L};
    auto x_abs = poly_add(poly_scale(poly_mul(one_minus_sigma, one_minus_sigma), 1.0 - dl),
                          poly_scale(one_minus_sigma, dl));
    const double vs = r.span.v_start, ve = r.span.v_end;
    auto v_of_x = [&](const std::vector<double>& x) {
        auto v = poly_scale(x, vs - ve);
        v[0] += ve;
        return v;
    };
    auto x_of_v = [&](const std::vector<double>& v) {
        auto x = v;
        x[0] -= ve;
        return poly_scale(x, 1.0 / (vs - ve));
    };
    auto shifted = [](const std::vector<double>& p, double t) { return poly_compose(p, std::vector<double>{t, 1.0}); };

    std::vector<PathSegment> segs(3);
    {
        // Approach leg on [0, t0], q = (t0 - t)/t0.
        auto v = v_of_x(x_abs);
        std::vector<double> q5 = detail::pow5({1.0, -1.0 / opt.t0});
        double c = base[1] - horner(v, 0.0);
        auto vl = poly_add(v, poly_scale(q5, c));
        auto ul = poly_compose(r.span.u_of_x, x_of_v(vl));
        double w = base[0] - horner(ul, 0.0);
        ul = poly_add(ul, poly_scale(q5, w));
        segs[0].t0 = 0.0;
        segs[0].t1 = opt.t0;
        segs[0].u = ul;
        segs[0].v = vl;
    }
    {
        auto xs = shifted(x_abs, opt.t0);
        segs[1].t0 = opt.t0;
        segs[1].t1 = opt.t1;
        segs[1].v = v_of_x(xs);
        segs[1].u = poly_compose(r.span.u_of_x, xs);
    }
    {
        // Return leg on [t1, 1], q = (t - t1)/(1 - t1), in s = t - t1.
        auto v = v_of_x(shifted(x_abs, opt.t1));
        std::vector<double> q5 = detail::pow5({0.0, 1.0 / (1.0 - opt.t1)});
        double c = base[1] - horner(v, 1.0 - opt.t1);
        auto vl = poly_add(v, poly_scale(q5, c));
        auto ul = poly_compose(r.span.u_of_x, x_of_v(vl));
        double w = base[0] - horner(ul, 1.0 - opt.t1);
        ul = poly_add(ul, poly_scale(q5, w));
        segs[2].t0 = opt.t1;
        segs[2].t1 = 1.0;
        segs[2].u = ul;
        segs[2].v = vl;
    }
    r.path = ControlPath(segs);

    r.min_gap_off_segment = 1e300;
    const double m0 = opt.check_margin * opt.t0, m1 = opt.check_margin * (1.0 - opt.t1);
    for (int k = 0; k <= opt.check_t; ++k) {
        double t = static_cast<double>(k) / opt.check_t;
        if (t > opt.t0 - m0 && t < opt.t1 + m1) continue;
        Vec2 p = r.path.value(t);
        double g = detail::min_gap_over_z(f, p[0], p[1], r.z0, r.z1, opt.check_z);
        if (g < r.min_gap_off_segment) {
            r.min_gap_off_segment = g;
            r.min_gap_t = t;
        }
    }
    if (r.min_gap_off_segment <= opt.gap_floor)
        throw std::runtime_error("loop legs touch the singular locus near t = " + std::to_string(r.min_gap_t));
    return r;
}

// ---------------------------------------------------------------------------
// Rate fitting

struct RateFit {
    double slope = 0.0;
    double intercept = 0.0;
    double envelope = 0.0;  // fitted constant: max defect / eps^slope
    int floored = 0;
    bool flagged = false;  // some defects were raised to the floor
};

inline RateFit fit_rate(const std::vector<double>& eps, const std::vector<double>& defects, double floor = 1e-12,
                        bool require_span = true) {
    if (eps.size() != defects.size()) throw std::invalid_argument("fit_rate needs paired data");
    if (require_span) {
        if (eps.size() < 6) throw std::invalid_argument("fit_rate needs at least 6 points");
        if (decades(eps) < 2.0 - 1e-12) throw std::invalid_argument("fit_rate needs at least 2 decades of eps");
    }
    int below = 0;
    for (double d : defects)
        if (!(d > floor)) ++below;
    if (below == static_cast<int>(defects.size()))
        throw std::domain_error("degenerate rate data: every defect is at or below the floor");
    LogLogFit l = loglog_fit(eps, defects, floor);
    return {l.slope, l.intercept, l.envelope, l.floored, l.floored > 0};
}

// ---------------------------------------------------------------------------
// Ensemble sweeps

struct SweepSpec {
    ControlField field;
    ControlPath path;
    std::vector<double> z_grid, eps_grid;
    std::function<Vec2(double)> initial;  // initial eigenvector at parameter z
    std::function<Vec2(double)> target;   // target eigenvector at parameter z
    std::function<int(double)> regime;    // 1: transfer expected (defect 1 - T), 0: no transfer (defect T)
    double tau0 = 0.0, tau1 = 1.0;
    PropagateOptions propagation{};
    unsigned threads = 0;  // 0 = hardware concurrency
    std::map<std::string, std::string> metadata;
};

struct TransferResult {
    std::vector<double> z_grid, eps_grid;
    std::vector<std::vector<double>> T, defects;  // [z][eps]
    std::vector<std::vector<std::string>> status;
    std::vector<int> regime;
    std::vector<std::optional<RateFit>> per_z;
    std::optional<RateFit> uniform;  // max over the transfer-regime z of the defects
    std::vector<double> uniform_defects;
    std::map<std::string, std::string> metadata;
    std::string run_id;

    bool all_ok() const {
        for (const auto& row : status)
            for (const auto& s : row)
                if (s != "ok") return false;
        return true;
    }
};

namespace detail {

inline bool strictly_monotone(const std::vector<double>& g) {
    if (g.size() < 2) return true;
    bool up = g[1] > g[0];
    for (std::size_t i = 1; i < g.size(); ++i)
        if (up ? !(g[i] > g[i - 1]) : !(g[i] < g[i - 1])) return false;
    return true;
}

inline std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

}  // namespace detail

// 12 hex digits derived from the run description; identical configs give identical ids.
inline std::string run_id(const std::string& description) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(detail::fnv1a(description)));
    return std::string(buf, 12);
}

inline void fit_sweep(TransferResult& r) {
    r.per_z.assign(r.z_grid.size(), std::nullopt);
    r.uniform.reset();
    r.uniform_defects.assign(r.eps_grid.size(), 0.0);
    bool any_transfer = false;
    for (std::size_t i = 0; i < r.z_grid.size(); ++i) {
        bool ok = std::all_of(r.status[i].begin(), r.status[i].end(), [](const std::string& s) { return s == "ok"; });
        if (ok && r.eps_grid.size() >= 2) {
            try {
                r.per_z[i] = fit_rate(r.eps_grid, r.defects[i], 1e-12, false);
            } catch (const std::domain_error&) {
            }
        }
        if (r.regime[i] == 1) {
            any_transfer = true;
            for (std::size_t j = 0; j < r.eps_grid.size(); ++j)
                r.uniform_defects[j] = std::max(r.uniform_defects[j], r.status[i][j] == "ok" ? r.defects[i][j] : 1.0);
        }
    }
    if (any_transfer && r.eps_grid.size() >= 2) {
        try {
            r.uniform = fit_rate(r.eps_grid, r.uniform_defects, 1e-12, false);
        } catch (const std::domain_error&) {
        }
    }
}

inline TransferResult ensemble_sweep(const SweepSpec& spec) {
    if (spec.z_grid.empty() || spec.eps_grid.empty()) throw std::invalid_argument("sweep grids must be non-empty");
    if (!detail::strictly_monotone(spec.z_grid) || !detail::strictly_monotone(spec.eps_grid))
        throw std::invalid_argument("sweep grids must be strictly monotone");
    if (!spec.initial || !spec.target || !spec.regime) throw std::invalid_argument("sweep needs initial, target, regime");
    const std::size_t nz = spec.z_grid.size(), ne = spec.eps_grid.size();
    TransferResult r;
    r.z_grid = spec.z_grid;
    r.eps_grid = spec.eps_grid;
    r.T.assign(nz, std::vector<double>(ne, std::nan("")));
    r.defects = r.T;
    r.status.assign(nz, std::vector<std::string>(ne, "pending"));
    r.regime.resize(nz);
    std::vector<Vec2> init(nz), tgt(nz);
    std::vector<std::string> setup_error(nz);
    for (std::size_t i = 0; i < nz; ++i) {
        try {
            r.regime[i] = spec.regime(spec.z_grid[i]);
            init[i] = spec.initial(spec.z_grid[i]);
            tgt[i] = spec.target(spec.z_grid[i]);
        } catch (const std::exception& e) {
            setup_error[i] = std::string("failed: ") + e.what();
        }
    }

    // Cells are independent; each writes only its own slot, so the result does not depend on scheduling.
    std::atomic<std::size_t> next{0};
    auto work = [&]() {
        for (std::size_t c; (c = next.fetch_add(1)) < nz * ne;) {
            std::size_t i = c / ne, j = c % ne;
            if (!setup_error[i].empty()) {
                r.status[i][j] = setup_error[i];
                continue;
            }
            try {
                PropagateOptions o = spec.propagation;
                o.tau0 = spec.tau0;
                o.tau1 = spec.tau1;
                auto res = propagate(spec.field, spec.path, spec.z_grid[i], spec.eps_grid[j], real_state(init[i]), o);
                double T = std::clamp(transition_probability(res.psi, tgt[i]), 0.0, 1.0);
                r.T[i][j] = T;
                r.defects[i][j] = r.regime[i] == 1 ? 1.0 - T : T;
                r.status[i][j] = "ok";
            } catch (const std::exception& e) {
                r.status[i][j] = std::string("failed: ") + e.what();
            }
        }
    };
    unsigned nt = spec.threads ? spec.threads : std::max(1u, std::thread::hardware_concurrency());
    nt = static_cast<unsigned>(std::min<std::size_t>(nt, nz * ne));
    std::vector<std::thread> pool;
    for (unsigned k = 1; k < nt; ++k) pool.emplace_back(work);
    work();
    for (auto& th : pool) th.join();

    r.metadata = spec.metadata;
    fit_sweep(r);
    std::ostringstream desc;
    desc.precision(17);
    for (const auto& [k, v] : r.metadata) desc << k << '=' << v << ';';
    for (double z : r.z_grid) desc << z << ',';
    desc << '|';
    for (double e : r.eps_grid) desc << e << ',';
    desc << spec.tau0 << ',' << spec.tau1 << ',' << spec.propagation.theta_max;
    r.run_id = run_id(desc.str());
    return r;
}

inline constexpr double kEndpointRelTol = 1e-8;

// Right limit of the lower eigenvector at t = 0 and left limit of the upper one at t = 1.
inline SweepSpec condition_C_sweep(const ControlField& f, const CPathReport& c, std::vector<double> z_grid,
                                   std::vector<double> eps_grid) {
    SweepSpec s;
    s.field = f;
    s.path = c.path;
    s.z_grid = std::move(z_grid);
    s.eps_grid = std::move(eps_grid);
    const ControlField fc = f;
    const ControlPath pc = c.path;
    // Endpoints on the locus are only known to the fit accuracy, so near-zero fields count as crossings.
    s.initial = [fc, pc](double z) { return one_sided_eigenpair(fc, pc, z, 0.0, +1, -1, kEndpointRelTol).phi; };
    s.target = [fc, pc](double z) { return one_sided_eigenpair(fc, pc, z, 1.0, -1, +1, kEndpointRelTol).phi; };
    const double z0 = c.z0, zf = c.z_fold;
    const double lo = std::min(z0, zf), hi = std::max(z0, zf);
    s.regime = [lo, hi](double z) { return (z > lo + 1e-9 && z < hi - 1e-9) ? 1 : 0; };
    s.metadata["experiment"] = "condition-C";
    s.metadata["z0"] = std::to_string(z0);
    s.metadata["z_fold"] = std::to_string(zf);
    return s;
}

inline SweepSpec loop_sweep(const ControlField& f, const LoopReport& loop, std::vector<double> z_grid,
                            std::vector<double> eps_grid) {
    SweepSpec s;
    s.field = f;
    s.path = loop.path;
    s.z_grid = std::move(z_grid);
    s.eps_grid = std::move(eps_grid);
    const ControlField fc = f;
    const ControlPath pc = loop.path;
    s.initial = [fc, pc](double z) { return one_sided_eigenpair(fc, pc, z, 0.0, +1, -1).phi; };
    s.target = [fc, pc](double z) { return one_sided_eigenpair(fc, pc, z, 1.0, -1, +1).phi; };
    s.regime = [](double) { return 1; };
    s.metadata["experiment"] = "loop";
    return s;
}

// Exit leg [t1, 1] alone: start on the tracked branch just after t1, target the tracked branch at t = 1.
inline SweepSpec exit_leg_sweep(const ControlField& f, const LoopReport& loop, std::vector<double> z_grid,
                                std::vector<double> eps_grid, int track_nodes = 20000) {
    SweepSpec s;
    s.field = f;
    s.path = loop.path;
    s.z_grid = std::move(z_grid);
    s.eps_grid = std::move(eps_grid);
    s.tau0 = loop.t1;
    s.tau1 = 1.0;
    const ControlField fc = f;
    const ControlPath pc = loop.path;
    const double t1 = loop.t1;
    auto tracked = [fc, pc, track_nodes](double z) { return track_branches(fc, pc, z, track_nodes); };
    s.initial = [fc, pc, t1, tracked, track_nodes](double z) {
        auto B = tracked(z);
        auto k = static_cast<std::size_t>(std::ceil(t1 * track_nodes - 1e-9));
        if (B.t[k] <= t1 + 1e-12 && k + 1 < B.t.size()) ++k;
        const Vec2& ref = B.phi0[k];
        Eigenpair em = one_sided_eigenpair(fc, pc, z, t1, +1, -1), ep = one_sided_eigenpair(fc, pc, z, t1, +1, +1);
        double om = em.phi[0] * ref[0] + em.phi[1] * ref[1], op = ep.phi[0] * ref[0] + ep.phi[1] * ref[1];
        return std::abs(om) >= std::abs(op) ? em.phi : ep.phi;
    };
    s.target = [tracked](double z) { return tracked(z).phi0.back(); };
    s.regime = [](double) { return 1; };
    s.metadata["experiment"] = "exit-leg";
    return s;
}

// ---------------------------------------------------------------------------
// Output

inline std::string transfer_csv(const TransferResult& r) {
    std::ostringstream os;
    os.precision(17);
    os << "z,eps,T,defect,status\n";
    for (std::size_t i = 0; i < r.z_grid.size(); ++i)
        for (std::size_t j = 0; j < r.eps_grid.size(); ++j)
            os << r.z_grid[i] << ',' << r.eps_grid[j] << ',' << r.T[i][j] << ',' << r.defects[i][j] << ','
               << r.status[i][j] << '\n';
    return os.str();
}

// gnuplot surface: blocks of constant z separated by blank lines.
inline std::string transfer_dat(const TransferResult& r) {
    std::ostringstream os;
    os.precision(17);
    os << "# z eps T\n";
    for (std::size_t i = 0; i < r.z_grid.size(); ++i) {
        for (std::size_t j = 0; j < r.eps_grid.size(); ++j)
            os << r.z_grid[i] << ' ' << r.eps_grid[j] << ' ' << r.T[i][j] << '\n';
        os << '\n';
    }
    return os.str();
}

}  // namespace semiconic
