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

#include "eigenpath.hpp"
#include "field.hpp"
#include "path.hpp"

namespace semiconic {

using cplx = std::complex<double>;
using State2 = Eigen::Vector2cd;
using StateN = Eigen::VectorXcd;

// exp(-i (dt/eps) H) psi for H = f1 sigma_z + f2 sigma_x.
inline State2 step_2level(const TwoLevelHamiltonian& H, double dt_over_eps, const State2& psi) {
    double r = H.norm();
    if (r == 0.0 || dt_over_eps == 0.0) return psi;
    double th = dt_over_eps * r;
    double c = std::cos(th), s = std::sin(th) / r;
    const cplx mi(0.0, -1.0);
    State2 out;
    out(0) = c * psi(0) + mi * s * (H.f1() * psi(0) + H.f2() * psi(1));
    out(1) = c * psi(1) + mi * s * (H.f2() * psi(0) - H.f1() * psi(1));
    return out;
}

inline Eigen::MatrixXcd unitary_step(const Eigen::MatrixXd& H, double dt_over_eps) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H);
    const auto& V = es.eigenvectors();
    Eigen::VectorXcd ph(H.rows());
    for (int i = 0; i < H.rows(); ++i) ph(i) = std::polar(1.0, -dt_over_eps * es.eigenvalues()(i));
    return V.cast<cplx>() * ph.asDiagonal() * V.transpose().cast<cplx>();
}

enum class Scheme { midpoint, magnus4 };

struct PropagateOptions {
    double theta_max = 0.1;           // max phase per step
    long long max_steps = 100000000;  // explicit failure beyond this
    Scheme scheme = Scheme::midpoint;
    double tau0 = 0.0, tau1 = 1.0;
    int norm_samples = 4096;          // grid used to bound max |H|
};

struct PropagationResult {
    State2 psi;
    long long steps = 0;
    double dtau = 0.0;
    double norm_drift = 0.0;
    std::optional<State2> rotating;  // rotating-frame amplitudes at tau1
};

struct StepBudgetExceeded : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline long long step_count(double span, double hmax, double eps, const PropagateOptions& opt) {
    if (!(eps > 0.0)) throw std::invalid_argument("eps must be positive");
    if (!(opt.theta_max > 0.0)) throw std::invalid_argument("theta_max must be positive");
    double m = std::ceil(span * hmax * 1.02 / (eps * opt.theta_max));
    if (m > static_cast<double>(opt.max_steps))
        throw StepBudgetExceeded("step budget exceeded: " + std::to_string(m) + " steps needed");
    return std::max<long long>(1, static_cast<long long>(m));
}

// Gauss nodes and weights of the fourth-order commutator-free Magnus scheme.
namespace detail {
inline constexpr double kGauss1 = 0.5 - 0.28867513459481288225;
inline constexpr double kGauss2 = 0.5 + 0.28867513459481288225;
inline constexpr double kCfA = (3.0 - 2.0 * 1.7320508075688772935) / 12.0;
inline constexpr double kCfB = (3.0 + 2.0 * 1.7320508075688772935) / 12.0;
}  // namespace detail

// Integrates i eps dpsi/dtau = H(tau) psi with H(tau) given as (f1, f2).
inline PropagationResult propagate_generator(const std::function<Vec2(double)>& H, double hmax, double eps,
                                             const State2& psi0, const PropagateOptions& opt = {}) {
    double span = opt.tau1 - opt.tau0;
    if (!(span > 0.0)) throw std::invalid_argument("empty propagation interval");
    long long M = step_count(span, hmax, eps, opt);
    double h = span / static_cast<double>(M);
    State2 psi = psi0;
    double n0 = psi0.norm();
    for (long long k = 0; k < M; ++k) {
        double a = opt.tau0 + h * static_cast<double>(k);
        if (opt.scheme == Scheme::midpoint) {
            Vec2 f = H(a + 0.5 * h);
            psi = step_2level({f[0], f[1]}, h / eps, psi);
        } else {
            Vec2 f1 = H(a + detail::kGauss1 * h), f2 = H(a + detail::kGauss2 * h);
            psi = step_2level({detail::kCfB * f1[0] + detail::kCfA * f2[0], detail::kCfB * f1[1] + detail::kCfA * f2[1]},
                              h / eps, psi);
            psi = step_2level({detail::kCfA * f1[0] + detail::kCfB * f2[0], detail::kCfA * f1[1] + detail::kCfB * f2[1]},
                              h / eps, psi);
        }
    }
    PropagationResult res;
    res.psi = psi;
    res.steps = M;
    res.dtau = h;
    res.norm_drift = std::abs(psi.norm() - n0);
    return res;
}

inline double max_field_norm(const ControlField& f, const ControlPath& path, double z, double a, double b, int n) {
    double m = 0.0;
    for (int k = 0; k <= n; ++k) m = std::max(m, norm2(f.value(path.point(a + (b - a) * k / n, z))));
    return m;
}

inline PropagationResult propagate(const ControlField& f, const ControlPath& path, std::optional<double> z, double eps,
                                   const State2& psi0, const PropagateOptions& opt = {}) {
    if (f.arity() == 3 && !z) throw std::invalid_argument("family field needs a parameter value z");
    double zz = z.value_or(0.0);
    double hmax = max_field_norm(f, path, zz, opt.tau0, opt.tau1, opt.norm_samples);
    auto H = [&](double t) { return f.value(path.point(t, zz)); };
    return propagate_generator(H, hmax, eps, psi0, opt);
}

inline State2 real_state(const Vec2& v) { return State2(cplx(v[0], 0.0), cplx(v[1], 0.0)); }

// Modulus of the pairing with a real target, |<psi, target>|.
inline double transition_probability(const State2& psi, const Vec2& target) {
    return std::abs(psi(0) * target[0] + psi(1) * target[1]);
}

// Int_{t_a}^{t_b} lambda0 over the branch grid, with lambda0 = (branch sign) * |f| sampled by Gauss-Legendre.
inline double branch_phase(const ControlField& f, const ControlPath& path, double z, const EigenBranches& B, double ta,
                           double tb) {
    static const double xg[5] = {-0.9061798459386640, -0.5384693101056831, 0.0, 0.5384693101056831,
                                 0.9061798459386640};
    static const double wg[5] = {0.2369268850561891, 0.4786286704993665, 0.5688888888888889, 0.4786286704993665,
                                 0.2369268850561891};
    std::size_t N = B.t.size() - 1;
    double h = 1.0 / static_cast<double>(N);
    double s = 0.0;
    for (std::size_t k = 0; k < N; ++k) {
        double a = std::max(ta, B.t[k]), b = std::min(tb, B.t[k + 1]);
        if (!(b > a)) continue;
        double mid = 0.5 * (B.lambda0[k] + B.lambda0[k + 1]);
        double sign = mid != 0.0 ? (mid > 0.0 ? 1.0 : -1.0) : (B.lambda0[k] + 2.0 * B.lambda0[k + 1] >= 0.0 ? 1.0 : -1.0);
        for (int q = 0; q < 5; ++q) {
            double t = 0.5 * (a + b) + 0.5 * (b - a) * xg[q];
            s += 0.5 * (b - a) * wg[q] * sign * norm2(f.value(path.point(t, z)));
        }
        (void)h;
    }
    return s;
}

// Rotating-frame amplitudes: diag(e^{i L/eps}, e^{-i L/eps}) [Phi0 Phi1]^T psi with L = int_0^t lambda0.
inline State2 to_rotating_frame(const State2& psi, const Vec2& phi0, double phase, double eps) {
    Vec2 phi1{-phi0[1], phi0[0]};
    cplx c0 = phi0[0] * psi(0) + phi0[1] * psi(1);
    cplx c1 = phi1[0] * psi(0) + phi1[1] * psi(1);
    return State2(std::polar(1.0, phase / eps) * c0, std::polar(1.0, -phase / eps) * c1);
}

inline State2 from_rotating_frame(const State2& y, const Vec2& phi0, double phase, double eps) {
    Vec2 phi1{-phi0[1], phi0[0]};
    cplx c0 = std::polar(1.0, -phase / eps) * y(0), c1 = std::polar(1.0, phase / eps) * y(1);
    return State2(phi0[0] * c0 + phi1[0] * c1, phi0[1] * c0 + phi1[1] * c1);
}

// Physical propagation plus the rotating-frame image of the final state along tracked branches.
inline PropagationResult propagate_with_frame(const ControlField& f, const ControlPath& path, std::optional<double> z,
                                              double eps, const State2& psi0, const EigenBranches& B,
                                              const PropagateOptions& opt = {}) {
    PropagationResult r = propagate(f, path, z, eps, psi0, opt);
    double zz = z.value_or(0.0);
    double L = branch_phase(f, path, zz, B, opt.tau0, opt.tau1);
    r.rotating = to_rotating_frame(r.psi, B.phi0_at(opt.tau1), L, eps);
    return r;
}

// Integrates the rotating-frame equation dY/dtau = thetadot [[0, e^{2iL/eps}], [-e^{-2iL/eps}, 0]] Y on a
// crossing-free path with the fourth-order commutator-free scheme.
inline State2 propagate_rotating(const ControlField& f, const ControlPath& path, std::optional<double> z, double eps,
                                 const State2& y0, int branch, const PropagateOptions& opt = {}) {
    double zz = z.value_or(0.0);
    auto thetadot = [&](double t) {
        auto jet = field_along_path(f, path, zz, t);
        double r2 = jet[0][0] * jet[0][0] + jet[0][1] * jet[0][1];
        if (r2 == 0.0) throw std::domain_error("rotating frame needs a crossing-free path");
        return 0.5 * (jet[0][0] * jet[1][1] - jet[0][1] * jet[1][0]) / r2;
    };
    auto lam = [&](double t) { return branch * norm2(f.value(path.point(t, zz))); };
    static const double xg[5] = {-0.9061798459386640, -0.5384693101056831, 0.0, 0.5384693101056831,
                                 0.9061798459386640};
    static const double wg[5] = {0.2369268850561891, 0.4786286704993665, 0.5688888888888889, 0.4786286704993665,
                                 0.2369268850561891};
    auto integral = [&](double a, double b) {
        double s = 0.0;
        for (int q = 0; q < 5; ++q) s += wg[q] * lam(0.5 * (a + b) + 0.5 * (b - a) * xg[q]);
        return 0.5 * (b - a) * s;
    };
    double hmax = max_field_norm(f, path, zz, opt.tau0, opt.tau1, opt.norm_samples);
    long long M = step_count(opt.tau1 - opt.tau0, 2.0 * hmax, eps, opt);
    double h = (opt.tau1 - opt.tau0) / static_cast<double>(M);
    State2 y = y0;
    double L = integral(0.0, opt.tau0);
    // exp of h * (alpha A1 + beta A2) where A = thetadot * [[0, e], [-conj(e), 0]].
    auto apply = [](State2 y, cplx a) {
        double m = std::abs(a);
        if (m == 0.0) return y;
        double c = std::cos(m), s = std::sin(m) / m;
        return State2(c * y(0) + s * a * y(1), c * y(1) - s * std::conj(a) * y(0));
    };
    for (long long k = 0; k < M; ++k) {
        double ta = opt.tau0 + h * static_cast<double>(k);
        double t1 = ta + detail::kGauss1 * h, t2 = ta + detail::kGauss2 * h;
        double L1 = L + integral(ta, t1), L2 = L + integral(ta, t2);
        cplx a1 = thetadot(t1) * std::polar(1.0, 2.0 * L1 / eps);
        cplx a2 = thetadot(t2) * std::polar(1.0, 2.0 * L2 / eps);
        y = apply(y, h * (detail::kCfB * a1 + detail::kCfA * a2));
        y = apply(y, h * (detail::kCfA * a1 + detail::kCfB * a2));
        L += integral(ta, ta + h);
    }
    return y;
}

// ---- n-level systems ----

struct BandReduction {
    int j = 1;                  // band (j, j+1), 1-based from the bottom of the spectrum
    Eigen::MatrixXd isometry;   // n x 2
    double f1 = 0.0, f2 = 0.0;  // reduced zero-trace field
    double mean = 0.0;          // half trace of the reduced block
    double separation = 0.0;    // distance of the band to the rest of the spectrum
    Eigen::VectorXd eigenvalues;
};

struct BandTouching : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Orthogonal factor of the polar decomposition.
inline Eigen::Matrix2d polar_factor(const Eigen::Matrix2d& M) {
    Eigen::JacobiSVD<Eigen::Matrix2d> svd(M, Eigen::ComputeFullU | Eigen::ComputeFullV);
    return svd.matrixU() * svd.matrixV().transpose();
}

inline BandReduction band_reduce(const Eigen::MatrixXd& H, int j, const Eigen::MatrixXd* reference = nullptr,
                                 double tol_band = 1e-6) {
    const int n = static_cast<int>(H.rows());
    if (j < 1 || j + 1 > n) throw std::invalid_argument("band index out of range");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H);
    const auto& lam = es.eigenvalues();
    double hn = std::max(lam.cwiseAbs().maxCoeff(), 1.0);
    double sep = std::numeric_limits<double>::infinity();
    if (j >= 2) sep = std::min(sep, lam(j - 1) - lam(j - 2));
    if (j + 2 <= n) sep = std::min(sep, lam(j + 1) - lam(j));
    if (!(sep > tol_band * hn)) throw BandTouching("band (" + std::to_string(j) + "," + std::to_string(j + 1) +
                                                   ") touches the rest of the spectrum");
    Eigen::MatrixXd Q = es.eigenvectors().middleCols(j - 1, 2);
    if (reference) {
        Q = Q * polar_factor(Q.transpose() * (*reference));
    } else {
        for (int c = 0; c < 2; ++c) {
            Eigen::Index i;
            Q.col(c).cwiseAbs().maxCoeff(&i);
            if (Q(i, c) < 0.0) Q.col(c) *= -1.0;
        }
    }
    BandReduction b;
    b.j = j;
    b.isometry = Q;
    Eigen::Matrix2d h = Q.transpose() * H * Q;
    b.f1 = 0.5 * (h(0, 0) - h(1, 1));
    b.f2 = 0.5 * (h(0, 1) + h(1, 0));
    b.mean = 0.5 * (h(0, 0) + h(1, 1));
    b.separation = sep;
    b.eigenvalues = lam;
    return b;
}

inline BandReduction band_reduce(const NLevelHamiltonianMap& map, const Point3& x, int j,
                                 const Eigen::MatrixXd* reference = nullptr, double tol_band = 1e-6) {
    return band_reduce(map(x), j, reference, tol_band);
}

struct DecouplingResult {
    double error = 0.0;
    long long steps = 0;
    double min_separation = 0.0;
    double norm_drift = 0.0;
};

// Full n-level propagation against the reduced two-level propagation in a parallel-transported band frame.
inline DecouplingResult decoupling_error(const NLevelHamiltonianMap& map, const ControlPath& path, double z, int j,
                                         double eps, const PropagateOptions& opt = {},
                                         std::optional<Eigen::Vector2cd> reduced0 = std::nullopt) {
    const int n = map.levels();
    auto Hat = [&](double t) { return map(path.point(t, z)); };
    double hmax = 0.0;
    for (int k = 0; k <= opt.norm_samples; ++k) {
        double t = opt.tau0 + (opt.tau1 - opt.tau0) * k / opt.norm_samples;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Hat(t), Eigen::EigenvaluesOnly);
        hmax = std::max(hmax, es.eigenvalues().cwiseAbs().maxCoeff());
    }
    long long M = step_count(opt.tau1 - opt.tau0, hmax, eps, opt);
    double h = (opt.tau1 - opt.tau0) / static_cast<double>(M);

    BandReduction b0 = band_reduce(Hat(opt.tau0), j);
    Eigen::MatrixXd I = b0.isometry;
    Eigen::Vector2cd red;
    if (reduced0) {
        red = *reduced0;
    } else {
        Eigen::Matrix2d h0 = I.transpose() * Hat(opt.tau0) * I;
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(h0);
        red = es.eigenvectors().col(0).cast<cplx>();
    }
    StateN full = I.cast<cplx>() * red;
    double n0 = full.norm();
    DecouplingResult res;
    res.min_separation = b0.separation;
    for (long long k = 0; k < M; ++k) {
        double tm = opt.tau0 + h * (static_cast<double>(k) + 0.5);
        Eigen::MatrixXd Hm = Hat(tm);
        full = unitary_step(Hm, h / eps) * full;
        BandReduction bm = band_reduce(Hm, j, &I);
        res.min_separation = std::min(res.min_separation, bm.separation);
        I = bm.isometry;
        Eigen::Matrix2d hr = I.transpose() * Hm * I;
        red = unitary_step(0.5 * (hr + hr.transpose()), h / eps) * red;
    }
    BandReduction b1 = band_reduce(Hat(opt.tau1), j, &I);
    StateN lifted = b1.isometry.cast<cplx>() * red;
    res.error = (full - lifted).norm();
    res.steps = M;
    res.norm_drift = std::abs(full.norm() - n0);
    (void)n;
    return res;
}

// Least-squares polynomial jet of the reduced band field around `center`, in local coordinates x - center.
// Frames are aligned to the band basis at the center so the fitted field is smooth.
inline ControlField reduced_field_jet(const NLevelHamiltonianMap& map, const Point3& center, int j,
                                      double radius = 1e-3, int degree = 4, int nodes = 9) {
    if (map.arity() != 2) throw std::invalid_argument("reduced_field_jet expects an arity-2 map");
    BandReduction c = band_reduce(map, center, j);
    Eigen::MatrixXd ref = c.isometry;
    std::vector<Exponent> basis;
    for (int d = 0; d <= degree; ++d)
        for (int a = d; a >= 0; --a) basis.push_back({a, d - a, 0});
    const int m = nodes * nodes;
    Eigen::MatrixXd A(m, static_cast<int>(basis.size()));
    Eigen::MatrixXd Y(m, 2);
    int row = 0;
    for (int p = 0; p < nodes; ++p)
        for (int q = 0; q < nodes; ++q, ++row) {
            double du = radius * (2.0 * p / (nodes - 1) - 1.0), dv = radius * (2.0 * q / (nodes - 1) - 1.0);
            BandReduction b = band_reduce(map, {center[0] + du, center[1] + dv, 0.0}, j, &ref);
            for (std::size_t k = 0; k < basis.size(); ++k)
                A(row, static_cast<int>(k)) =
                    std::pow(du / radius, basis[k][0]) * std::pow(dv / radius, basis[k][1]);
            Y(row, 0) = b.f1;
            Y(row, 1) = b.f2;
        }
    Eigen::MatrixXd C = A.colPivHouseholderQr().solve(Y);
    std::array<std::vector<Term>, 2> terms;
    for (int i = 0; i < 2; ++i)
        for (std::size_t k = 0; k < basis.size(); ++k) {
            double s = std::pow(radius, -(basis[k][0] + basis[k][1]));
            terms[i].push_back({C(static_cast<int>(k), i) * s, basis[k]});
        }
    return ControlField(2, Polynomial(terms[0]), Polynomial(terms[1]));
}

}  // namespace semiconic
