#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "field.hpp"
#include "polynomial.hpp"

namespace semiconic {

// One piece of a control path on [t0, t1]. Polynomial pieces are expanded in s = t - t0;
// arcs sweep angle a0 -> a1 linearly in t around (cu, cv).
struct PathSegment {
    enum class Kind { polynomial, arc };
    Kind kind = Kind::polynomial;
    double t0 = 0.0, t1 = 1.0;
    std::vector<double> u, v;
    double cu = 0.0, cv = 0.0, radius = 1.0, a0 = 0.0, a1 = 0.0;

    // d^order/dt^order of (u, v) at t.
    Vec2 eval(double t, int order) const {
        if (kind == Kind::polynomial) {
            double s = t - t0;
            auto du = u, dv = v;
            for (int k = 0; k < order; ++k) {
                du = poly_derivative(du);
                dv = poly_derivative(dv);
            }
            return {horner(du, s), horner(dv, s)};
        }
        double w = (a1 - a0) / (t1 - t0);
        double a = a0 + w * (t - t0);
        double scale = radius * std::pow(w, order);
        // k-th derivative of (cos, sin) is a rotation by k * pi/2.
        double ph = a + order * 0.5 * 3.14159265358979323846;
        if (order == 0) return {cu + radius * std::cos(a), cv + radius * std::sin(a)};
        return {scale * std::cos(ph), scale * std::sin(ph)};
    }
};

class ControlPath {
public:
    ControlPath() = default;
    explicit ControlPath(std::vector<PathSegment> segs, bool reversed = false)
        : segs_(std::move(segs)), reversed_(reversed) {
        if (segs_.empty()) throw std::invalid_argument("path needs at least one segment");
        if (std::abs(segs_.front().t0) > 1e-14 || std::abs(segs_.back().t1 - 1.0) > 1e-14)
            throw std::invalid_argument("path segments must cover [0, 1]");
        for (std::size_t i = 0; i < segs_.size(); ++i) {
            if (!(segs_[i].t1 > segs_[i].t0)) throw std::invalid_argument("segment " + std::to_string(i) + " is empty");
            if (i > 0 && std::abs(segs_[i].t0 - segs_[i - 1].t1) > 1e-14)
                throw std::invalid_argument("segment " + std::to_string(i) + " does not start where the previous ends");
        }
    }

    static ControlPath polynomial(std::vector<double> u, std::vector<double> v) {
        PathSegment s;
        s.u = std::move(u);
        s.v = std::move(v);
        return ControlPath({s});
    }
    static ControlPath line(Vec2 a, Vec2 b) { return polynomial({a[0], b[0] - a[0]}, {a[1], b[1] - a[1]}); }
    static ControlPath circle(Vec2 center, double radius, double angle0, double turns = 1.0) {
        PathSegment s;
        s.kind = PathSegment::Kind::arc;
        s.cu = center[0];
        s.cv = center[1];
        s.radius = radius;
        s.a0 = angle0;
        s.a1 = angle0 + 2.0 * 3.14159265358979323846 * turns;
        return ControlPath({s});
    }

    const std::vector<PathSegment>& segments() const { return segs_; }
    bool is_reversed() const { return reversed_; }

    // Same curve traversed backwards: t -> 1 - t.
    ControlPath reversed() const { return ControlPath(segs_, !reversed_); }

    Vec2 derivative(double t, int order) const {
        double tt = reversed_ ? 1.0 - t : t;
        Vec2 r = segment_at(tt).eval(tt, order);
        if (reversed_ && (order % 2 == 1)) r = {-r[0], -r[1]};
        return r;
    }
    Vec2 value(double t) const { return derivative(t, 0); }
    Vec2 velocity(double t) const { return derivative(t, 1); }
    Vec2 acceleration(double t) const { return derivative(t, 2); }

    Point3 point(double t, double z = 0.0) const {
        Vec2 p = value(t);
        return {p[0], p[1], z};
    }

    // Minimum planar speed on an N-interval grid.
    double min_speed(int N) const {
        double m = 1e300;
        for (int k = 0; k <= N; ++k) m = std::min(m, norm2(velocity(static_cast<double>(k) / N)));
        return m;
    }

    // Largest jump of the derivatives of order <= max_order across segment joins.
    double join_defect(int max_order) const {
        double d = 0.0;
        for (std::size_t i = 1; i < segs_.size(); ++i) {
            double t = segs_[i].t0;
            for (int k = 0; k <= max_order; ++k) {
                Vec2 a = segs_[i - 1].eval(t, k), b = segs_[i].eval(t, k);
                d = std::max(d, std::hypot(a[0] - b[0], a[1] - b[1]));
            }
        }
        return d;
    }

private:
    const PathSegment& segment_at(double t) const {
        auto it = std::upper_bound(segs_.begin(), segs_.end(), t,
                                   [](double x, const PathSegment& s) { return x < s.t1; });
        if (it == segs_.end()) return segs_.back();
        return *it;
    }

    std::vector<PathSegment> segs_;
    bool reversed_ = false;
};

}  // namespace semiconic
