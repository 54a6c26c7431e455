#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "polynomial.hpp"

namespace semiconic {

using Vec2 = std::array<double, 2>;
// J[i][k] = d f_i / d x_k, columns (u, v, z).
using Jacobian = std::array<std::array<double, 3>, 2>;

enum class Axis : int { u = 0, v = 1, z = 2 };

inline double norm2(const Vec2& a) { return std::hypot(a[0], a[1]); }

struct BuiltinParams {
    std::vector<double> h{1.0};  // h(u), SEMICONICAL_NF
    std::vector<double> m{1.0};  // m(u), F_SEMICONICAL_NF
    Polynomial h1 = Polynomial::constant(1.0);
    Polynomial h2 = Polynomial::constant(1.0);
    double E = 0.0;
    double E_prime = 1.0;
    double c = 0.25;  // CROSSING_DEMO
};

struct BuiltinInfo {
    std::string name;
    BuiltinParams params;
};

class TwoLevelHamiltonian {
public:
    TwoLevelHamiltonian() = default;
    TwoLevelHamiltonian(double f1, double f2) : f1_(f1), f2_(f2) {}

    double f1() const { return f1_; }
    double f2() const { return f2_; }
    double operator()(int i, int j) const {
        if (i == 0 && j == 0) return f1_;
        if (i == 1 && j == 1) return -f1_;
        return f2_;
    }
    Eigen::Matrix2d matrix() const {
        Eigen::Matrix2d m;
        m << f1_, f2_, f2_, -f1_;
        return m;
    }
    double lambda_plus() const { return std::hypot(f1_, f2_); }
    double lambda_minus() const { return -std::hypot(f1_, f2_); }
    double gap() const { return 2.0 * std::hypot(f1_, f2_); }
    double norm() const { return std::hypot(f1_, f2_); }

private:
    double f1_ = 0.0;
    double f2_ = 0.0;
};

class ControlField {
public:
    ControlField() = default;
    ControlField(int arity, Polynomial f1, Polynomial f2, std::optional<BuiltinInfo> info = std::nullopt)
        : arity_(arity), comp_{std::move(f1), std::move(f2)}, info_(std::move(info)) {
        if (arity_ != 2 && arity_ != 3) throw std::invalid_argument("arity must be 2 or 3");
        for (const auto& p : comp_)
            if (p.max_variable() >= arity_)
                throw std::invalid_argument("component depends on z but arity is 2");
    }

    int arity() const { return arity_; }
    const Polynomial& component(int i) const { return comp_.at(i); }
    const std::optional<BuiltinInfo>& builtin_info() const { return info_; }

    Point3 to_point(std::span<const double> x) const {
        if (static_cast<int>(x.size()) != arity_)
            throw std::invalid_argument("point has dimension " + std::to_string(x.size()) +
                                        ", field arity is " + std::to_string(arity_));
        Point3 p{0.0, 0.0, 0.0};
        for (int k = 0; k < arity_; ++k) p[k] = x[k];
        return p;
    }

    // Unchecked evaluation on a padded point (z ignored for arity 2).
    Vec2 value(const Point3& p) const { return {comp_[0](p), comp_[1](p)}; }
    Vec2 derivative(const Point3& p, const Exponent& d) const {
        return {comp_[0].derivative_at(p, d), comp_[1].derivative_at(p, d)};
    }
    Jacobian jacobian(const Point3& p) const {
        Jacobian J{};
        for (int i = 0; i < 2; ++i)
            for (int k = 0; k < arity_; ++k) {
                Exponent d{0, 0, 0};
                d[k] = 1;
                J[i][k] = comp_[i].derivative_at(p, d);
            }
        return J;
    }
    TwoLevelHamiltonian hamiltonian(const Point3& p) const {
        auto f = value(p);
        return {f[0], f[1]};
    }

private:
    int arity_ = 2;
    std::array<Polynomial, 2> comp_;
    std::optional<BuiltinInfo> info_;
};

inline Vec2 eval_field(const ControlField& f, std::span<const double> x) {
    return f.value(f.to_point(x));
}

inline Vec2 partial(const ControlField& f, std::span<const double> x, const Exponent& multi_index) {
    if (multi_index[0] < 0 || multi_index[1] < 0 || multi_index[2] < 0)
        throw std::invalid_argument("negative derivative order");
    int order = multi_index[0] + multi_index[1] + multi_index[2];
    if (order > kMaxDerivativeOrder)
        throw std::invalid_argument("derivative order " + std::to_string(order) + " exceeds 3");
    for (int k = f.arity(); k < 3; ++k)
        if (multi_index[k] != 0) throw std::invalid_argument("derivative along a missing axis");
    return f.derivative(f.to_point(x), multi_index);
}

inline double chi_at(const ControlField& f, const Point3& p, int i, int j) {
    auto J = f.jacobian(p);
    return J[0][i] * J[1][j] - J[0][j] * J[1][i];
}

inline double chi(const ControlField& f, std::span<const double> x, Axis i, Axis j) {
    int a = static_cast<int>(i), b = static_cast<int>(j);
    if (a == b) throw std::invalid_argument("chi needs two distinct axes");
    if (a >= f.arity() || b >= f.arity()) throw std::invalid_argument("chi axis exceeds arity");
    return chi_at(f, f.to_point(x), a, b);
}

// Derivative of chi_uv along `dir` (length = arity), computed from second partials.
inline double directional_chi_at(const ControlField& f, const Point3& p, const Point3& dir) {
    auto d1 = [&](int i, int k) {
        Exponent e{0, 0, 0};
        e[k] = 1;
        return f.component(i).derivative_at(p, e);
    };
    auto d2 = [&](int i, int k, int l) {
        Exponent e{0, 0, 0};
        e[k] += 1;
        e[l] += 1;
        return f.component(i).derivative_at(p, e);
    };
    double s = 0.0;
    for (int k = 0; k < f.arity(); ++k) {
        if (dir[k] == 0.0) continue;
        double dk = d2(0, 0, k) * d1(1, 1) + d1(0, 0) * d2(1, 1, k) - d2(0, 1, k) * d1(1, 0) -
                    d1(0, 1) * d2(1, 0, k);
        s += dir[k] * dk;
    }
    return s;
}

inline double directional_chi(const ControlField& f, std::span<const double> x,
                              std::span<const double> direction) {
    if (static_cast<int>(direction.size()) != f.arity())
        throw std::invalid_argument("direction dimension does not match arity");
    bool nonzero = false;
    for (double d : direction) nonzero = nonzero || d != 0.0;
    if (!nonzero) throw std::invalid_argument("zero direction");
    return directional_chi_at(f, f.to_point(x), f.to_point(direction));
}

inline TwoLevelHamiltonian assemble(const ControlField& f, std::span<const double> x) {
    auto v = eval_field(f, x);
    return {v[0], v[1]};
}

// Symmetric n x n matrix of polynomials in (u, v, z).
class NLevelHamiltonianMap {
public:
    NLevelHamiltonianMap() = default;
    NLevelHamiltonianMap(int n, int arity, std::vector<Polynomial> upper,
                         std::optional<BuiltinInfo> info = std::nullopt)
        : n_(n), arity_(arity), upper_(std::move(upper)), info_(std::move(info)) {
        if (n_ < 2 || n_ > 16) throw std::invalid_argument("level count must be in [2, 16]");
        if (arity_ != 2 && arity_ != 3) throw std::invalid_argument("arity must be 2 or 3");
        if (static_cast<int>(upper_.size()) != n_ * (n_ + 1) / 2)
            throw std::invalid_argument("expected n(n+1)/2 upper-triangular entries");
        for (const auto& p : upper_)
            if (p.max_variable() >= arity_) throw std::invalid_argument("entry depends on a missing axis");
    }

    int levels() const { return n_; }
    int arity() const { return arity_; }
    const std::optional<BuiltinInfo>& builtin_info() const { return info_; }

    const Polynomial& entry(int i, int j) const {
        if (i > j) std::swap(i, j);
        return upper_.at(index(i, j));
    }

    Eigen::MatrixXd operator()(const Point3& p) const {
        Eigen::MatrixXd H(n_, n_);
        for (int i = 0; i < n_; ++i)
            for (int j = i; j < n_; ++j) {
                double x = upper_[index(i, j)](p);
                H(i, j) = x;
                H(j, i) = x;
            }
        return H;
    }

private:
    int index(int i, int j) const { return i * n_ - i * (i - 1) / 2 + (j - i); }

    int n_ = 2;
    int arity_ = 2;
    std::vector<Polynomial> upper_;
    std::optional<BuiltinInfo> info_;
};

namespace builtin_names {
inline constexpr const char* conical = "CONICAL_NF";
inline constexpr const char* semiconical = "SEMICONICAL_NF";
inline constexpr const char* f_conical = "F_CONICAL_NF";
inline constexpr const char* f_semiconical = "F_SEMICONICAL_NF";
inline constexpr const char* stirap = "STIRAP";
inline constexpr const char* crossing_demo = "CROSSING_DEMO";
}  // namespace builtin_names

inline ControlField builtin_field(const std::string& name, const BuiltinParams& prm = {}) {
    const Polynomial u = Polynomial::variable(0), v = Polynomial::variable(1), z = Polynomial::variable(2);
    BuiltinInfo info{name, prm};
    if (name == builtin_names::conical) return ControlField(2, u, v, info);
    if (name == builtin_names::semiconical) {
        if (prm.h.empty() || prm.h[0] != 1.0) throw std::invalid_argument("SEMICONICAL_NF needs h(0) = 1");
        Polynomial h = Polynomial::univariate(prm.h, 0);
        return ControlField(2, h * u, u + v * v, info);
    }
    if (name == builtin_names::f_conical || name == builtin_names::f_semiconical) {
        Point3 o{0.0, 0.0, 0.0};
        double a = prm.h1(o), b = prm.h2(o);
        if (a == 0.0 || a != b) throw std::invalid_argument(name + " needs h1(0) = h2(0) != 0");
        if (name == builtin_names::f_conical) return ControlField(3, prm.h1 * (z - u), prm.h2 * (z - v), info);
        if (prm.m.empty() || prm.m[0] == 0.0 || prm.m[0] == -1.0)
            throw std::invalid_argument("F_SEMICONICAL_NF needs m(0) outside {-1, 0}");
        Polynomial m = Polynomial::univariate(prm.m, 0);
        return ControlField(3, prm.h1 * (z - m * u), prm.h2 * (z + u + v * v), info);
    }
    if (name == builtin_names::crossing_demo) {
        if (!(prm.c > 0.0)) throw std::invalid_argument("CROSSING_DEMO needs c > 0");
        // Locus (z^2 - c, z^3 - c z, z): a nodal cubic whose projection crosses itself at z = +-sqrt(c).
        return ControlField(3, z * z - prm.c * Polynomial::constant(1.0) - u,
                            z * z * z - prm.c * z - v, info);
    }
    throw std::invalid_argument("unknown two-level builtin: " + name);
}

inline NLevelHamiltonianMap builtin_map(const std::string& name, const BuiltinParams& prm = {}) {
    if (name != builtin_names::stirap) throw std::invalid_argument("unknown n-level builtin: " + name);
    if (!(prm.E < prm.E_prime)) throw std::invalid_argument("STIRAP needs E < E'");
    const Polynomial u = Polynomial::variable(0), v = Polynomial::variable(1);
    const Polynomial zero;
    // Upper triangle row by row: (0,0) (0,1) (0,2) (1,1) (1,2) (2,2).
    return NLevelHamiltonianMap(3, 2,
                                {Polynomial::constant(prm.E), u, zero, Polynomial::constant(prm.E), v,
                                 Polynomial::constant(prm.E_prime)},
                                BuiltinInfo{name, prm});
}

using AnyField = std::variant<ControlField, NLevelHamiltonianMap>;

inline AnyField builtin(const std::string& name, const BuiltinParams& prm = {}) {
    if (name == builtin_names::stirap) return builtin_map(name, prm);
    return builtin_field(name, prm);
}

}  // namespace semiconic
