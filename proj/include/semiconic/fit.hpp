#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace semiconic {

struct LogLogFit {
    double slope = 0.0;
    double intercept = 0.0;  // log(y) = intercept + slope log(x)
    double envelope = 0.0;   // max y / x^slope
    double envelope_min = 0.0;
    int floored = 0;          // points raised to the floor before fitting
};

// Least-squares line through (log x, log y). Values below `floor` are raised to it and counted.
inline LogLogFit loglog_fit(const std::vector<double>& x, const std::vector<double>& y,
                            double floor = 0.0) {
    if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("loglog_fit needs >= 2 paired points");
    const std::size_t n = x.size();
    LogLogFit r;
    std::vector<double> lx(n), ly(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (!(x[i] > 0.0)) throw std::invalid_argument("loglog_fit needs positive abscissae");
        double yi = y[i];
        if (!(yi > floor)) {
            if (floor <= 0.0) throw std::invalid_argument("loglog_fit needs positive ordinates");
            yi = floor;
            ++r.floored;
        }
        lx[i] = std::log(x[i]);
        ly[i] = std::log(yi);
    }
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += lx[i];
        my += ly[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (lx[i] - mx) * (lx[i] - mx);
        sxy += (lx[i] - mx) * (ly[i] - my);
    }
    if (sxx == 0.0) throw std::invalid_argument("loglog_fit needs distinct abscissae");
    r.slope = sxy / sxx;
    r.intercept = my - r.slope * mx;
    r.envelope = 0.0;
    r.envelope_min = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
        double c = std::exp(ly[i] - r.slope * lx[i]);
        r.envelope = std::max(r.envelope, c);
        r.envelope_min = std::min(r.envelope_min, c);
    }
    return r;
}

inline std::vector<double> geometric_grid(double a, double b, int n) {
    if (n < 2 || !(a > 0.0) || !(b > 0.0)) throw std::invalid_argument("geometric grid needs n >= 2 and positive ends");
    std::vector<double> g(n);
    const double la = std::log10(a), lb = std::log10(b);
    for (int i = 0; i < n; ++i) g[i] = std::pow(10.0, la + (lb - la) * i / (n - 1));
    return g;
}

inline std::vector<double> uniform_grid(double a, double b, int n) {
    if (n < 1) throw std::invalid_argument("uniform grid needs n >= 1");
    if (n == 1) return {a};
    std::vector<double> g(n);
    for (int i = 0; i < n; ++i) g[i] = a + (b - a) * i / (n - 1);
    return g;
}

inline double decades(const std::vector<double>& x) {
    auto [lo, hi] = std::minmax_element(x.begin(), x.end());
    return std::log10(*hi / *lo);
}

}  // namespace semiconic
