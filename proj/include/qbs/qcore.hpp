#pragma once

// q-calculus primitives: q-integers, q-factorials, Gaussian binomials, the
// Jackson q-derivative, and the scale/node sequences of the operator.

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "qbs/funcspace.hpp"
#include "qbs/kernel.hpp"

namespace qbs {

namespace detail {

inline void require_positive_q(const Real& q, const char* where) {
    if (!(q > 0)) {
        throw DomainError(std::string(where) + ": q must be positive");
    }
}

}  // namespace detail

/// [n]_q = 1 + q + ... + q^{n-1}, summed term by term; [0]_q = 0.
inline Real q_integer(unsigned n, const Real& q) {
    detail::require_positive_q(q, "q_integer");
    Real sum = 0;
    Real power = 1;
    for (unsigned k = 0; k < n; ++k) {
        sum += power;
        power *= q;
    }
    return sum;
}

inline Real q_factorial(unsigned n, const Real& q) {
    detail::require_positive_q(q, "q_factorial");
    Real product = 1;
    Real bracket = 0;
    Real power = 1;
    for (unsigned k = 1; k <= n; ++k) {
        bracket += power;  // [k]_q
        power *= q;
        product *= bracket;
    }
    return product;
}

/// Row n of the Gaussian binomials via C(n,k) = C(n-1,k-1) + q^k C(n-1,k).
inline std::vector<Real> q_binomial_row(unsigned n, const Real& q) {
    detail::require_positive_q(q, "q_binomial");
    std::vector<Real> powers(n + 1);
    powers[0] = 1;
    for (unsigned k = 1; k <= n; ++k) {
        powers[k] = powers[k - 1] * q;
    }
    std::vector<Real> row(n + 1, Real(0));
    row[0] = 1;
    for (unsigned m = 1; m <= n; ++m) {
        for (unsigned k = m; k >= 1; --k) {
            row[k] = row[k - 1] + powers[k] * row[k];
        }
    }
    return row;
}

/// Same row via the mirrored recurrence C(n,k) = q^{n-k} C(n-1,k-1) + C(n-1,k).
inline std::vector<Real> q_binomial_row_left(unsigned n, const Real& q) {
    detail::require_positive_q(q, "q_binomial");
    std::vector<Real> powers(n + 1);
    powers[0] = 1;
    for (unsigned k = 1; k <= n; ++k) {
        powers[k] = powers[k - 1] * q;
    }
    std::vector<Real> row(n + 1, Real(0));
    row[0] = 1;
    for (unsigned m = 1; m <= n; ++m) {
        for (unsigned k = m; k >= 1; --k) {
            row[k] = powers[m - k] * row[k - 1] + row[k];
        }
    }
    return row;
}

inline Real q_binomial(unsigned n, long k, const Real& q) {
    if (k < 0 || k > static_cast<long>(n)) {
        throw DomainError("q_binomial: need 0 <= k <= n, got n=" + std::to_string(n) +
                          " k=" + std::to_string(k));
    }
    return q_binomial_row(n, q)[static_cast<unsigned>(k)];
}

/// Jackson q-derivative (f(qz) - f(z)) / ((q - 1) z), with f'(0) = c_1 at z = 0.
/// Points on [0, inf) use the ray evaluator; others must keep z and qz in D_R.
inline Complex q_derivative(const FunctionSpec& f, const Complex& z, const Real& q) {
    detail::require_positive_q(q, "q_derivative");
    if (q == 1) {
        throw DomainError("q_derivative: q = 1 has no q-difference; use the derivative evaluator");
    }
    if (z == Complex(Real(0))) {
        return coeff_at(f, 1);
    }
    const Complex qz = q * z;
    const bool on_ray = z.imag() == 0 && z.real() > 0;
    if (!on_ray && !(abs(z) < f.radius && abs(qz) < f.radius)) {
        throw DomainError("q_derivative: z or qz outside the analyticity disk of " + f.name);
    }
    return (f.closed_form(qz, 0) - f.closed_form(z, 0)) / ((q - 1) * z);
}

/// (q, beta, n) with the derived [n]_q, a_n = [n]_q^{beta-1} and b_n = [n]_q^beta.
class QParams {
public:
    static QParams make(const Real& q, const Real& beta, unsigned n) {
        detail::require_positive_q(q, "QParams");
        // 2/3 itself is inexact in binary; allow the rounding of either neighbour.
        if (!(beta > 0) || beta > Real(2) / 3 + ldexp(Real(1), -60)) {
            throw DomainError("QParams: beta must lie in (0, 2/3], got " + beta.str(10));
        }
        if (n == 0) {
            throw DomainError("QParams: n must be positive");
        }
        QParams p;
        p.q_ = lift(q);
        p.beta_ = lift(beta);
        p.n_ = n;
        p.bracket_ = q_integer(n, p.q_);
        const Real log_bracket = log(p.bracket_);
        p.a_ = exp((p.beta_ - 1) * log_bracket);
        p.b_ = exp(p.beta_ * log_bracket);
        return p;
    }

    /// The same parameters recomputed at the current default precision.
    [[nodiscard]] QParams at_current_precision() const { return make(q_, beta_, n_); }

    [[nodiscard]] const Real& q() const { return q_; }
    [[nodiscard]] const Real& beta() const { return beta_; }
    [[nodiscard]] unsigned n() const { return n_; }
    [[nodiscard]] const Real& bracket_n() const { return bracket_; }
    [[nodiscard]] const Real& a_n() const { return a_; }
    [[nodiscard]] const Real& b_n() const { return b_; }

private:
    QParams() = default;

    Real q_;
    Real beta_;
    unsigned n_ = 1;
    Real bracket_;
    Real a_;
    Real b_;
};

/// Sample nodes t_k = [k]_q / b_n, k = 0..n.
inline std::vector<Real> node_sequence(const QParams& p) {
    std::vector<Real> nodes;
    nodes.reserve(p.n() + 1);
    Real bracket = 0;
    Real power = 1;
    for (unsigned k = 0; k <= p.n(); ++k) {
        nodes.push_back(bracket / p.b_n());
        bracket += power;
        power *= p.q();
    }
    return nodes;
}

/// log2 [s]_q in double precision without forming q^s; -inf for s = 0.
inline double log2_q_integer(unsigned s, double q) {
    if (s == 0) {
        return -std::numeric_limits<double>::infinity();
    }
    if (q == 1.0) {
        return std::log2(static_cast<double>(s));
    }
    if (q > 1.0) {
        return s * std::log2(q) + std::log2(-std::expm1(-(s * std::log(q)))) - std::log2(q - 1.0);
    }
    return std::log2(-std::expm1(s * std::log(q))) - std::log2(1.0 - q);
}

/// log2 of the whole Gaussian binomial row, from prefix sums of log2 [j]_q.
inline std::vector<double> log2_q_binomial_row(unsigned n, double q) {
    std::vector<double> prefix(n + 1, 0.0);
    for (unsigned j = 1; j <= n; ++j) {
        prefix[j] = prefix[j - 1] + log2_q_integer(j, q);
    }
    std::vector<double> row(n + 1);
    for (unsigned k = 0; k <= n; ++k) {
        row[k] = prefix[n] - prefix[k] - prefix[n - k];
    }
    return row;
}

}  // namespace qbs
