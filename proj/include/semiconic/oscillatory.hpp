#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fit.hpp"
#include "polynomial.hpp"

namespace semiconic {

// Phase phi and amplitude v on [a, b]. Polynomial profiles carry coefficients for exact higher derivatives;
// tabulated profiles supply phi, phi' and v as callables.
struct PhaseProfile {
    double a = 0.0, b = 1.0;
    std::function<double(double)> phi, dphi, amp;
    std::optional<std::vector<double>> phi_coeffs, amp_coeffs;
    double rescale = 1.0;  // phi has been multiplied by this factor
    int k = 1;

    static PhaseProfile polynomial(std::vector<double> phi_c, std::vector<double> amp_c, double a, double b) {
        if (!(b > a)) throw std::invalid_argument("profile interval must have b > a");
        PhaseProfile p;
        p.a = a;
        p.b = b;
        p.phi_coeffs = phi_c;
        p.amp_coeffs = amp_c;
        auto d = poly_derivative(phi_c);
        p.phi = [phi_c](double x) { return horner(phi_c, x); };
        p.dphi = [d](double x) { return horner(d, x); };
        p.amp = [amp_c](double x) { return horner(amp_c, x); };
        return p;
    }

    static PhaseProfile tabulated(std::function<double(double)> phi, std::function<double(double)> dphi,
                                  std::function<double(double)> amp, double a, double b) {
        if (!(b > a)) throw std::invalid_argument("profile interval must have b > a");
        PhaseProfile p;
        p.a = a;
        p.b = b;
        p.phi = std::move(phi);
        p.dphi = std::move(dphi);
        p.amp = std::move(amp);
        return p;
    }

    double derivative(int order, double x) const {
        if (order == 0) return rescale * phi(x);
        if (order == 1) return rescale * dphi(x);
        if (!phi_coeffs) throw std::invalid_argument("higher phase derivatives need a polynomial profile");
        auto c = *phi_coeffs;
        for (int i = 0; i < order; ++i) c = poly_derivative(c);
        return rescale * horner(c, x);
    }
};

struct PhaseCertificate {
    double min_abs = 0.0;  // inf |phi^(k)| on the grid after rescaling
    double rescale = 1.0;
    bool pass = false;
};

// Rescales phi so that inf |phi^(k)| >= 1 on a 2^12-node grid, and checks it.
inline PhaseCertificate certify_phase(PhaseProfile& p, int k, int nodes = 4096) {
    if (k < 1) throw std::invalid_argument("derivative order k must be >= 1");
    p.rescale = 1.0;
    p.k = k;
    double m = 1e300;
    for (int i = 0; i <= nodes; ++i) m = std::min(m, std::abs(p.derivative(k, p.a + (p.b - p.a) * i / nodes)));
    PhaseCertificate c;
    if (!(m > 0.0)) return c;
    p.rescale = 1.0 / m;
    double m2 = 1e300;
    for (int i = 0; i <= nodes; ++i) m2 = std::min(m2, std::abs(p.derivative(k, p.a + (p.b - p.a) * i / nodes)));
    c.min_abs = m2;
    c.rescale = p.rescale;
    c.pass = m2 >= 1.0 - 1e-8;
    return c;
}

struct OscillatoryOptions {
    double max_phase_per_panel = 1.0;  // radians
    double rel_tol = 1e-8;
    long long max_panels = 50000000;
    int grid = 512;                    // t-grid for the supremum
    int refine_top = 3;
};

namespace detail {

inline const std::array<double, 10>& gl10_nodes() {
    static const std::array<double, 10> x{-0.9739065285171717, -0.8650633666889845, -0.6794095682990244,
                                          -0.4333953941292472, -0.1488743389816312, 0.1488743389816312,
                                          0.4333953941292472,  0.6794095682990244,  0.8650633666889845,
                                          0.9739065285171717};
    return x;
}
inline const std::array<double, 10>& gl10_weights() {
    static const std::array<double, 10> w{0.0666713443086881, 0.1494513491505806, 0.2190863625159820,
                                          0.2692667193099963, 0.2955242247147529, 0.2955242247147529,
                                          0.2692667193099963, 0.2190863625159820, 0.1494513491505806,
                                          0.0666713443086881};
    return w;
}

inline std::complex<double> panel(const PhaseProfile& p, double eps, double a, double b) {
    const auto& x = gl10_nodes();
    const auto& w = gl10_weights();
    std::complex<double> s = 0.0;
    double c = 0.5 * (a + b), h = 0.5 * (b - a);
    for (int i = 0; i < 10; ++i) {
        double t = c + h * x[i];
        s += w[i] * p.amp(t) * std::polar(1.0, p.derivative(0, t) / eps);
    }
    return h * s;
}

inline double max_dphi(const PhaseProfile& p) {
    double m = 0.0;
    for (int i = 0; i <= 4096; ++i) m = std::max(m, std::abs(p.derivative(1, p.a + (p.b - p.a) * i / 4096.0)));
    return m * 1.1 + 1e-300;
}

inline double max_amp(const PhaseProfile& p) {
    double m = 0.0;
    for (int i = 0; i <= 1024; ++i) m = std::max(m, std::abs(p.amp(p.a + (p.b - p.a) * i / 1024.0)));
    return m;
}

// Integral over [a, b] with `panels` equal panels.
inline std::complex<double> composite(const PhaseProfile& p, double eps, double a, double b, long long panels) {
    std::complex<double> s = 0.0;
    double h = (b - a) / static_cast<double>(panels);
    for (long long i = 0; i < panels; ++i) s += panel(p, eps, a + h * i, a + h * (i + 1));
    return s;
}

}  // namespace detail

struct PanelBudgetExceeded : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Int_a^t v exp(i phi / eps) with phase-resolved panels, verified against a doubled panel count.
inline std::complex<double> oscillatory_integral(const PhaseProfile& p, double eps, double t,
                                                 const OscillatoryOptions& opt = {}) {
    if (!(eps > 0.0)) throw std::invalid_argument("eps must be positive");
    t = std::clamp(t, p.a, p.b);
    if (t == p.a) return 0.0;
    double w = eps * opt.max_phase_per_panel / detail::max_dphi(p);
    long long n = std::max<long long>(1, static_cast<long long>(std::ceil((t - p.a) / w)));
    double vmax = detail::max_amp(p);
    while (true) {
        if (2 * n > opt.max_panels) throw PanelBudgetExceeded("oscillatory_integral: panel budget exceeded");
        auto I1 = detail::composite(p, eps, p.a, t, n);
        auto I2 = detail::composite(p, eps, p.a, t, 2 * n);
        if (std::abs(I2 - I1) <= opt.rel_tol * std::max(std::abs(I2), eps * vmax)) return I2;
        n *= 2;
    }
}

struct SupResult {
    double sup = 0.0;
    double t_at = 0.0;
};

// sup_t |Int_a^t v exp(i phi/eps)| on a uniform t-grid with local golden-section refinement.
inline SupResult oscillatory_sup(const PhaseProfile& p, double eps, const OscillatoryOptions& opt = {}) {
    if (!(eps > 0.0)) throw std::invalid_argument("eps must be positive");
    const int G = opt.grid;
    double w = eps * opt.max_phase_per_panel / detail::max_dphi(p);
    double gh = (p.b - p.a) / G;
    long long per = std::max<long long>(1, static_cast<long long>(std::ceil(gh / w)));
    double vmax = detail::max_amp(p);
    std::vector<std::complex<double>> I(G + 1);
    while (true) {
        if (2 * per * G > opt.max_panels) throw PanelBudgetExceeded("oscillatory_sup: panel budget exceeded");
        std::vector<std::complex<double>> A(G + 1, 0.0), B(G + 1, 0.0);
        double diff = 0.0, mag = 0.0;
        for (int i = 0; i < G; ++i) {
            double x0 = p.a + gh * i, x1 = (i + 1 == G) ? p.b : p.a + gh * (i + 1);
            A[i + 1] = A[i] + detail::composite(p, eps, x0, x1, per);
            B[i + 1] = B[i] + detail::composite(p, eps, x0, x1, 2 * per);
            diff = std::max(diff, std::abs(A[i + 1] - B[i + 1]));
            mag = std::max(mag, std::abs(B[i + 1]));
        }
        if (diff <= opt.rel_tol * std::max(mag, eps * vmax)) {
            I = B;
            break;
        }
        per *= 2;
    }
    std::vector<int> idx(G + 1);
    for (int i = 0; i <= G; ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](int x, int y) { return std::abs(I[x]) > std::abs(I[y]); });
    SupResult r;
    r.sup = std::abs(I[idx[0]]);
    r.t_at = p.a + gh * idx[0];
    for (int c = 0; c < std::min(opt.refine_top, G + 1); ++c) {
        int i = idx[c];
        int lo = std::max(i - 1, 0), hi = std::min(i + 1, G);
        double a = p.a + gh * lo, b = std::min(p.b, p.a + gh * hi);
        auto val = [&](double t) {
            long long n = std::max<long long>(1, static_cast<long long>(std::ceil((t - a) / w)) * 2);
            return std::abs(I[lo] + (t > a ? detail::composite(p, eps, a, t, n) : 0.0));
        };
        const double g = 0.5 * (std::sqrt(5.0) - 1.0);
        double x1 = b - g * (b - a), x2 = a + g * (b - a);
        double f1 = val(x1), f2 = val(x2);
        for (int it = 0; it < 60 && b - a > 1e-12; ++it) {
            if (f1 >= f2) {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = b - g * (b - a);
                f1 = val(x1);
            } else {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + g * (b - a);
                f2 = val(x2);
            }
        }
        for (double t : {x1, x2}) {
            double m = val(t);
            if (m > r.sup) {
                r.sup = m;
                r.t_at = t;
            }
        }
    }
    return r;
}

struct VdcFit {
    double slope = 0.0;
    double constant = 0.0;  // sup M(eps) / eps^(1/k)
    std::vector<double> eps, sup;
    PhaseCertificate certificate;
};

inline VdcFit vdc_exponent(PhaseProfile p, int k, const std::vector<double>& eps_grid,
                           const OscillatoryOptions& opt = {}) {
    if (eps_grid.size() < 6) throw std::invalid_argument("eps grid needs at least 6 points");
    if (decades(eps_grid) < 2.0 - 1e-12) throw std::invalid_argument("eps grid must span at least two decades");
    VdcFit f;
    f.certificate = certify_phase(p, k);
    f.eps = eps_grid;
    for (double e : eps_grid) {
        double m = oscillatory_sup(p, e, opt).sup;
        f.sup.push_back(m);
        f.constant = std::max(f.constant, m / std::pow(e, 1.0 / k));
    }
    f.slope = loglog_fit(f.eps, f.sup).slope;
    return f;
}

// 2 eps + eps Int |d/dx (1/phi')| for a monotone phase, evaluated on a fine grid (amplitude one).
inline double integration_by_parts_bound(const PhaseProfile& p, double eps, int nodes = 8192) {
    double tv = 0.0;
    double prev = 1.0 / p.derivative(1, p.a);
    for (int i = 1; i <= nodes; ++i) {
        double cur = 1.0 / p.derivative(1, p.a + (p.b - p.a) * i / nodes);
        tv += std::abs(cur - prev);
        prev = cur;
    }
    return 2.0 * eps + eps * tv;
}

using Generator = std::function<Eigen::MatrixXcd(double)>;

struct AveragingOptions {
    double resolution = 0.02;  // steps per unit of eps
    double theta_max = 0.05;
    int check_points = 64;
    double skew_tol = 1e-10;
};

struct NonSkewGenerator : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

inline Eigen::MatrixXcd skew_exponential(const Eigen::MatrixXcd& A, double h) {
    // A = -i K with K Hermitian.
    Eigen::MatrixXcd K = std::complex<double>(0.0, 1.0) * A;
    K = 0.5 * (K + K.adjoint()).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(K);
    Eigen::VectorXcd ph(A.rows());
    for (int i = 0; i < A.rows(); ++i) ph(i) = std::polar(1.0, -h * es.eigenvalues()(i));
    return es.eigenvectors() * ph.asDiagonal() * es.eigenvectors().adjoint();
}

// sup over the step grid of |P^eps_tau - P_tau| (operator norm) for dP/dtau = A(tau) P, P(0) = Id.
inline double averaging_distance(const Generator& A, const Generator& A_eps, double eps,
                                 const AveragingOptions& opt = {}) {
    if (!(eps > 0.0)) throw std::invalid_argument("eps must be positive");
    double amax = 0.0;
    for (int i = 0; i <= opt.check_points; ++i) {
        double t = static_cast<double>(i) / opt.check_points;
        for (const auto* G : {&A, &A_eps}) {
            Eigen::MatrixXcd M = (*G)(t);
            double n = M.norm();
            if ((M + M.adjoint()).norm() > opt.skew_tol * std::max(n, 1.0))
                throw NonSkewGenerator("generator is not skew-Hermitian at tau = " + std::to_string(t));
            amax = std::max(amax, n);
        }
    }
    double h = std::min(opt.resolution * eps, amax > 0.0 ? opt.theta_max / amax : 1.0);
    long long M = std::max<long long>(1, static_cast<long long>(std::ceil(1.0 / h)));
    h = 1.0 / static_cast<double>(M);
    const int n = static_cast<int>(A(0.0).rows());
    Eigen::MatrixXcd P = Eigen::MatrixXcd::Identity(n, n), Q = P;
    double d = 0.0;
    for (long long k = 0; k < M; ++k) {
        double tm = h * (static_cast<double>(k) + 0.5);
        P = skew_exponential(A(tm), h) * P;
        Q = skew_exponential(A_eps(tm), h) * Q;
        Eigen::JacobiSVD<Eigen::MatrixXcd> svd(Q - P);
        d = std::max(d, svd.singularValues()(0));
    }
    return d;
}

}  // namespace semiconic
