#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace semiconic {

// Exponents of (u, v, z).
using Exponent = std::array<int, 3>;
using Point3 = std::array<double, 3>;

inline constexpr int kMaxDegree = 16;
inline constexpr int kMaxDerivativeOrder = 3;

struct Term {
    double c = 0.0;
    Exponent e{0, 0, 0};
};

class Polynomial {
public:
    Polynomial() = default;

    explicit Polynomial(const std::vector<Term>& terms) {
        std::map<Exponent, double> acc;
        for (std::size_t i = 0; i < terms.size(); ++i) {
            const auto& t = terms[i];
            for (int k = 0; k < 3; ++k) {
                if (t.e[k] < 0)
                    throw std::invalid_argument("term " + std::to_string(i) + ": negative exponent");
                if (t.e[k] > kMaxDegree)
                    throw std::invalid_argument("term " + std::to_string(i) + ": degree " +
                                                std::to_string(t.e[k]) + " exceeds " +
                                                std::to_string(kMaxDegree));
            }
            if (!std::isfinite(t.c))
                throw std::invalid_argument("term " + std::to_string(i) + ": non-finite coefficient");
            acc[t.e] += t.c;
        }
        for (const auto& [e, c] : acc)
            if (c != 0.0) terms_.push_back({c, e});
    }

    static Polynomial constant(double c) { return Polynomial(std::vector<Term>{Term{c, {0, 0, 0}}}); }
    static Polynomial monomial(double c, Exponent e) { return Polynomial(std::vector<Term>{Term{c, e}}); }
    // Coordinate x_k (k = 0,1,2 for u,v,z).
    static Polynomial variable(int k) {
        Exponent e{0, 0, 0};
        e[k] = 1;
        return monomial(1.0, e);
    }
    // sum_i c[i] x_k^i
    static Polynomial univariate(const std::vector<double>& c, int k) {
        std::vector<Term> t;
        for (std::size_t i = 0; i < c.size(); ++i) {
            Exponent e{0, 0, 0};
            e[k] = static_cast<int>(i);
            t.push_back({c[i], e});
        }
        return Polynomial(t);
    }

    const std::vector<Term>& terms() const { return terms_; }
    bool is_zero() const { return terms_.empty(); }

    int degree(int var) const {
        int d = 0;
        for (const auto& t : terms_) d = std::max(d, t.e[var]);
        return d;
    }
    int total_degree() const {
        int d = 0;
        for (const auto& t : terms_) d = std::max(d, t.e[0] + t.e[1] + t.e[2]);
        return d;
    }
    // Highest variable index that appears (-1 for a constant).
    int max_variable() const {
        int m = -1;
        for (const auto& t : terms_)
            for (int k = 0; k < 3; ++k)
                if (t.e[k] > 0) m = std::max(m, k);
        return m;
    }

    double operator()(const Point3& x) const { return derivative_at(x, {0, 0, 0}); }

    // Term-wise derivative of multi-index `d`, evaluated at x.
    double derivative_at(const Point3& x, const Exponent& d) const {
        std::array<std::array<double, kMaxDegree + 1>, 3> pw;
        for (int k = 0; k < 3; ++k) {
            pw[k][0] = 1.0;
            for (int i = 1; i <= kMaxDegree; ++i) pw[k][i] = pw[k][i - 1] * x[k];
        }
        double s = 0.0;
        for (const auto& t : terms_) {
            double c = t.c;
            bool vanish = false;
            for (int k = 0; k < 3 && !vanish; ++k) {
                if (d[k] > t.e[k]) {
                    vanish = true;
                    break;
                }
                for (int j = 0; j < d[k]; ++j) c *= static_cast<double>(t.e[k] - j);
                c *= pw[k][t.e[k] - d[k]];
            }
            if (!vanish) s += c;
        }
        return s;
    }

    Polynomial derivative(const Exponent& d) const {
        std::vector<Term> out;
        for (const auto& t : terms_) {
            double c = t.c;
            Exponent e = t.e;
            bool vanish = false;
            for (int k = 0; k < 3; ++k) {
                if (d[k] > e[k]) {
                    vanish = true;
                    break;
                }
                for (int j = 0; j < d[k]; ++j) c *= static_cast<double>(e[k] - j);
                e[k] -= d[k];
            }
            if (!vanish) out.push_back({c, e});
        }
        return Polynomial(out);
    }

    friend Polynomial operator+(const Polynomial& a, const Polynomial& b) {
        std::vector<Term> t = a.terms_;
        t.insert(t.end(), b.terms_.begin(), b.terms_.end());
        return Polynomial(t);
    }
    friend Polynomial operator-(const Polynomial& a) {
        std::vector<Term> t = a.terms_;
        for (auto& x : t) x.c = -x.c;
        return Polynomial(t);
    }
    friend Polynomial operator-(const Polynomial& a, const Polynomial& b) { return a + (-b); }
    friend Polynomial operator*(double s, const Polynomial& a) {
        std::vector<Term> t = a.terms_;
        for (auto& x : t) x.c *= s;
        return Polynomial(t);
    }
    friend Polynomial operator*(const Polynomial& a, const Polynomial& b) {
        std::map<Exponent, double> acc;
        for (const auto& x : a.terms_)
            for (const auto& y : b.terms_) {
                Exponent e{x.e[0] + y.e[0], x.e[1] + y.e[1], x.e[2] + y.e[2]};
                acc[e] += x.c * y.c;
            }
        std::vector<Term> t;
        for (const auto& [e, c] : acc) t.push_back({c, e});
        return Polynomial(t);
    }

    Polynomial pow(int n) const {
        Polynomial r = constant(1.0);
        for (int i = 0; i < n; ++i) r = r * *this;
        return r;
    }

    // p(A x + b) for a 3x3 matrix A (row-major) and offset b.
    Polynomial substitute_affine(const std::array<std::array<double, 3>, 3>& A, const Point3& b) const {
        std::array<Polynomial, 3> img;
        for (int k = 0; k < 3; ++k) {
            std::vector<Term> t{{b[k], {0, 0, 0}}};
            for (int j = 0; j < 3; ++j) {
                Exponent e{0, 0, 0};
                e[j] = 1;
                t.push_back({A[k][j], e});
            }
            img[k] = Polynomial(t);
        }
        return substitute(img);
    }

    // p(q0(x), q1(x), q2(x)).
    Polynomial substitute(const std::array<Polynomial, 3>& q) const {
        std::array<std::vector<Polynomial>, 3> pw;
        for (int k = 0; k < 3; ++k) {
            pw[k].push_back(constant(1.0));
            for (int i = 1; i <= degree(k); ++i) pw[k].push_back(pw[k].back() * q[k]);
        }
        Polynomial r;
        for (const auto& t : terms_) r = r + t.c * (pw[0][t.e[0]] * pw[1][t.e[1]] * pw[2][t.e[2]]);
        return r;
    }

private:
    std::vector<Term> terms_;
};

// Univariate polynomial helpers with coefficients c[i] of x^i.
inline double horner(const std::vector<double>& c, double x) {
    double s = 0.0;
    for (auto it = c.rbegin(); it != c.rend(); ++it) s = s * x + *it;
    return s;
}

inline std::vector<double> poly_derivative(const std::vector<double>& c) {
    std::vector<double> d;
    for (std::size_t i = 1; i < c.size(); ++i) d.push_back(static_cast<double>(i) * c[i]);
    return d;
}

inline std::vector<double> poly_mul(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.empty() || b.empty()) return {};
    std::vector<double> r(a.size() + b.size() - 1, 0.0);
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j) r[i + j] += a[i] * b[j];
    return r;
}

inline std::vector<double> poly_add(std::vector<double> a, const std::vector<double>& b) {
    if (a.size() < b.size()) a.resize(b.size(), 0.0);
    for (std::size_t i = 0; i < b.size(); ++i) a[i] += b[i];
    return a;
}

inline std::vector<double> poly_scale(std::vector<double> a, double s) {
    for (auto& x : a) x *= s;
    return a;
}

// p(q(x)) for univariate coefficient lists.
inline std::vector<double> poly_compose(const std::vector<double>& p, const std::vector<double>& q) {
    std::vector<double> r;
    for (auto it = p.rbegin(); it != p.rend(); ++it) r = poly_add(poly_mul(r, q), {*it});
    return r;
}

}  // namespace semiconic
