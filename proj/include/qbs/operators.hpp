#pragma once

// The q-Balazs-Szabados operator R_{n,q} (real and complex argument), the
// complex q-Bernstein operator B_{n,q}, and the transform linking them:
//
//   R_{n,q}(f; z) = B_{n,q}(F_n; a_n z / (1 + a_n z)),  F_n(w) = f([n]_q w / b_n).
//
// For q > 1 the summands of both operators are far larger than their sum
// (signs alternate), so each evaluator first bounds the cancellation in double
// precision and then runs at mantissa_bits plus that many guard bits. The
// bound depends only on (n, q, beta, max |z|, node magnitudes), never on the
// computed sum, so results are reproducible.
//
// eval_R and eval_B share no arithmetic beyond the q-integers: different
// binomial recurrences, different product factors and different nodes.

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "qbs/funcspace.hpp"
#include "qbs/kernel.hpp"
#include "qbs/qcore.hpp"

namespace qbs {

/// One evaluation of R_{n,q}(f; z) with its diagnostic pieces.
struct OperatorEval {
    QParams params;
    Complex z;
    Complex value;
    /// Numerator summands f(t_k) [n,k]_q (a_n z)^k prod_s (1 + (1-q)[s]_q a_n z).
    std::vector<Complex> basis_terms;
    /// (1 + a_n z)^n
    Complex denominator;
};

namespace detail {

/// Neumaier-compensated sum of complex terms, componentwise.
class CompensatedSum {
public:
    void add(const Complex& term) {
        add_part(re_, re_comp_, term.real());
        add_part(im_, im_comp_, term.imag());
    }
    [[nodiscard]] Complex value() const { return {re_ + re_comp_, im_ + im_comp_}; }

private:
    static void add_part(Real& sum, Real& comp, const Real& x) {
        const Real t = sum + x;
        if (mpfr_cmpabs(sum.backend().data(), x.backend().data()) >= 0) {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }

    Real re_ = 0, re_comp_ = 0, im_ = 0, im_comp_ = 0;
};

inline double to_log2(const Real& x) {
    if (x == 0) {
        return -std::numeric_limits<double>::infinity();
    }
    long exponent = 0;
    const double mantissa = mpfr_get_d_2exp(&exponent, x.backend().data(), MPFR_RNDN);
    return std::log2(std::abs(mantissa)) + static_cast<double>(exponent);
}

/// log2(1 + 2^t) without overflow.
inline double log2_one_plus_pow2(double t) {
    if (t > 60.0) {
        return t;
    }
    return std::log1p(std::exp2(t)) / std::log(2.0);
}

inline double log2_sum_pow2(std::span<const double> logs) {
    double peak = -std::numeric_limits<double>::infinity();
    for (double v : logs) {
        peak = std::max(peak, v);
    }
    if (!std::isfinite(peak)) {
        return peak;
    }
    double acc = 0.0;
    for (double v : logs) {
        acc += std::exp2(v - peak);
    }
    return peak + std::log2(acc);
}

inline unsigned guard_from_log2(double cancellation_log2, double node_log2) {
    const double extra = std::max(0.0, cancellation_log2) + std::max(0.0, node_log2) + 32.0;
    if (!std::isfinite(extra)) {
        throw PrecisionError("cancellation bound is not finite");
    }
    return static_cast<unsigned>(std::ceil(extra));
}

inline double max_log2_modulus(std::span<const Complex> values) {
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& v : values) {
        best = std::max(best, to_log2(abs(v)));
    }
    return best;
}

/// log2 of sum_k |[n,k]_q| (a rho)^k prod_{s<n-k} (1 + |1-q| [s]_q a rho),
/// i.e. the numerator mass of R_{n,q} for |z| <= rho.
inline double log2_numerator_mass(unsigned n, double q, double log2_a, double log2_rho) {
    const auto binom = log2_q_binomial_row(n, q);
    const double log2_w = log2_a + log2_rho;
    std::vector<double> prefix(n + 1, 0.0);
    for (unsigned s = 0; s < n; ++s) {
        double factor = 0.0;
        if (q != 1.0 && s > 0) {
            factor = log2_one_plus_pow2(std::log2(std::abs(1.0 - q)) + log2_q_integer(s, q) + log2_w);
        }
        prefix[s + 1] = prefix[s] + factor;
    }
    std::vector<double> terms(n + 1);
    for (unsigned k = 0; k <= n; ++k) {
        terms[k] = binom[k] + k * log2_w + prefix[n - k];
    }
    return log2_sum_pow2(terms);
}

/// Same bound for B_{n,q} at |u| <= rho: factors 1 + q^s rho.
inline double log2_bernstein_mass(unsigned n, double q, double log2_rho) {
    const auto binom = log2_q_binomial_row(n, q);
    std::vector<double> prefix(n + 1, 0.0);
    for (unsigned s = 0; s < n; ++s) {
        prefix[s + 1] = prefix[s] + log2_one_plus_pow2(s * std::log2(q) + log2_rho);
    }
    std::vector<double> terms(n + 1);
    for (unsigned k = 0; k <= n; ++k) {
        terms[k] = binom[k] + k * log2_rho + prefix[n - k];
    }
    return log2_sum_pow2(terms);
}

inline void require_regular(const QParams& p, std::span<const Complex> zs, const NumericContext& ctx) {
    for (const auto& z : zs) {
        if (!(abs(Real(1) + p.a_n() * z) > ctx.zero_guard)) {
            throw SingularityError("R_{n,q}: 1 + a_n z vanishes at z = (" + z.real().str(12) + ", " +
                                   z.imag().str(12) + "), n = " + std::to_string(p.n()));
        }
    }
}

inline std::vector<Complex> node_values(const FunctionSpec& f, const QParams& p) {
    std::vector<Complex> values;
    values.reserve(p.n() + 1);
    for (const auto& t : node_sequence(p)) {
        values.push_back(eval_on_ray(f, t));
    }
    return values;
}

/// Guard bits for evaluating R_{n,q} at the points zs.
inline unsigned r_operator_guard_bits(const FunctionSpec& f, const QParams& p, std::span<const Complex> zs) {
    Real rho = 0;
    Real min_den = std::numeric_limits<Real>::infinity();
    for (const auto& z : zs) {
        rho = std::max(rho, Real(abs(z)));
        min_den = std::min(min_den, Real(abs(Real(1) + p.a_n() * z)));
    }
    const double q = static_cast<double>(p.q());
    const double log2_a = (static_cast<double>(p.beta()) - 1.0) * log2_q_integer(p.n(), q);
    const double mass = rho == 0 ? 0.0 : log2_numerator_mass(p.n(), q, log2_a, to_log2(rho));
    const double cancellation = mass - p.n() * to_log2(min_den);
    return guard_from_log2(cancellation, max_log2_modulus(node_values(f, p)));
}

inline std::vector<Complex> r_operator_at_current_precision(const FunctionSpec& f, const QParams& base,
                                                            std::span<const Complex> zs,
                                                            std::vector<OperatorEval>* details) {
    const QParams p = base.at_current_precision();
    const unsigned n = p.n();
    const Real one_minus_q = 1 - p.q();
    auto coeffs = node_values(f, p);
    const auto binom = q_binomial_row(n, p.q());
    for (unsigned k = 0; k <= n; ++k) {
        coeffs[k] *= binom[k];
    }
    std::vector<Real> brackets(n + 1);
    brackets[0] = 0;
    Real q_power = 1;
    for (unsigned s = 0; s < n; ++s) {
        brackets[s + 1] = brackets[s] + q_power;
        q_power *= p.q();
    }

    std::vector<Complex> out;
    out.reserve(zs.size());
    std::vector<Complex> prefix(n + 1);
    std::vector<Complex> powers(n + 1);
    for (const auto& z_in : zs) {
        const Complex z = lift(z_in);
        const Complex w = p.a_n() * z;
        // prefix[j] = prod_{s<j} (1 + (1-q)[s]_q w): the k = n - j product.
        prefix[0] = Complex(Real(1));
        for (unsigned s = 0; s < n; ++s) {
            prefix[s + 1] = prefix[s] * (Real(1) + one_minus_q * brackets[s] * w);
        }
        powers[0] = Complex(Real(1));
        for (unsigned k = 1; k <= n; ++k) {
            powers[k] = powers[k - 1] * w;
        }
        CompensatedSum sum;
        std::vector<Complex> terms;
        for (unsigned k = 0; k <= n; ++k) {
            const Complex term = coeffs[k] * (powers[k] * prefix[n - k]);
            sum.add(term);
            if (details) {
                terms.push_back(term);
            }
        }
        const Complex denominator = pow(Real(1) + w, static_cast<int>(n));
        const Complex value = sum.value() / denominator;
        out.push_back(value);
        if (details) {
            details->push_back(OperatorEval{p, z, value, std::move(terms), denominator});
        }
    }
    return out;
}

}  // namespace detail

/// R_{n,q}(f; z) at every point of zs.
inline std::vector<Complex> eval_R(const FunctionSpec& f, const QParams& p, std::span<const Complex> zs,
                                   const NumericContext& ctx) {
    if (zs.empty()) {
        return {};
    }
    detail::require_regular(p, zs, ctx);
    const unsigned extra = detail::r_operator_guard_bits(f, p, zs);
    PrecisionScope scope(ctx.mantissa_bits + extra);
    return detail::r_operator_at_current_precision(f, p, zs, nullptr);
}

inline Complex eval_R(const FunctionSpec& f, const QParams& p, const Complex& z, const NumericContext& ctx) {
    return eval_R(f, p, std::span<const Complex>(&z, 1), ctx).front();
}

/// eval_R keeping the individual summands and the denominator.
inline OperatorEval eval_R_detailed(const FunctionSpec& f, const QParams& p, const Complex& z,
                                    const NumericContext& ctx) {
    const std::span<const Complex> zs(&z, 1);
    detail::require_regular(p, zs, ctx);
    const unsigned extra = detail::r_operator_guard_bits(f, p, zs);
    PrecisionScope scope(ctx.mantissa_bits + extra);
    std::vector<OperatorEval> details;
    detail::r_operator_at_current_precision(f, p, zs, &details);
    return std::move(details.front());
}

/// Function sampled by B_{n,q} at the nodes [k]_q / [n]_q.
using SampledFunction = std::function<Complex(const Real&)>;

namespace detail {

inline std::vector<Complex> bernstein_nodes(const SampledFunction& g, unsigned n, const Real& q) {
    const Real bracket_n = q_integer(n, q);
    std::vector<Complex> values;
    values.reserve(n + 1);
    for (unsigned k = 0; k <= n; ++k) {
        values.push_back(g(q_integer(k, q) / bracket_n));
    }
    return values;
}

inline unsigned bernstein_guard_bits(double log2_umax, double log2_gmax, unsigned n, double q) {
    const double mass = std::isfinite(log2_umax) ? log2_bernstein_mass(n, q, log2_umax) : 0.0;
    return guard_from_log2(mass, log2_gmax);
}

/// sum_k g_k [n,k]_q u^k prod_{s<n-k} (1 - q^s u) at the current precision.
inline std::vector<Complex> bernstein_at_current_precision(const SampledFunction& g, unsigned n,
                                                           const Real& q_in,
                                                           std::span<const Complex> us) {
    const Real q = lift(q_in);
    auto coeffs = bernstein_nodes(g, n, q);
    const auto binom = q_binomial_row_left(n, q);
    for (unsigned k = 0; k <= n; ++k) {
        coeffs[k] *= binom[k];
    }
    std::vector<Real> q_powers(n + 1);
    q_powers[0] = 1;
    for (unsigned s = 1; s <= n; ++s) {
        q_powers[s] = q_powers[s - 1] * q;
    }
    std::vector<Complex> out;
    out.reserve(us.size());
    std::vector<Complex> tail(n + 1);
    for (const auto& u_in : us) {
        const Complex u = lift(u_in);
        tail[0] = Complex(Real(1));
        for (unsigned s = 0; s < n; ++s) {
            tail[s + 1] = tail[s] * (Real(1) - q_powers[s] * u);
        }
        CompensatedSum sum;
        Complex u_power(Real(1));
        for (unsigned k = 0; k <= n; ++k) {
            sum.add(coeffs[k] * (u_power * tail[n - k]));
            u_power *= u;
        }
        out.push_back(sum.value());
    }
    return out;
}

}  // namespace detail

/// B_{n,q}(g; u) at every point of us.
inline std::vector<Complex> eval_B(const SampledFunction& g, unsigned n, const Real& q,
                                   std::span<const Complex> us, const NumericContext& ctx) {
    detail::require_positive_q(q, "eval_B");
    if (n == 0) {
        throw DomainError("eval_B: n must be positive");
    }
    if (us.empty()) {
        return {};
    }
    Real umax = 0;
    for (const auto& u : us) {
        umax = std::max(umax, Real(abs(u)));
    }
    const double gmax = detail::max_log2_modulus(detail::bernstein_nodes(g, n, q));
    const unsigned extra = detail::bernstein_guard_bits(detail::to_log2(umax), gmax, n, static_cast<double>(q));
    PrecisionScope scope(ctx.mantissa_bits + extra);
    return detail::bernstein_at_current_precision(g, n, q, us);
}

inline Complex eval_B(const SampledFunction& g, unsigned n, const Real& q, const Complex& u,
                      const NumericContext& ctx) {
    return eval_B(g, n, q, std::span<const Complex>(&u, 1), ctx).front();
}

/// Right-hand side of the connection identity: B_{n,q}(F_n; a_n z / (1 + a_n z)).
inline std::vector<Complex> connection_transform(const FunctionSpec& f, const QParams& p,
                                                 std::span<const Complex> zs, const NumericContext& ctx) {
    if (zs.empty()) {
        return {};
    }
    detail::require_regular(p, zs, ctx);
    const auto make_sampled = [&f](const QParams& params) -> SampledFunction {
        const Real stretch = params.bracket_n() / params.b_n();
        return [&f, stretch](const Real& w) { return eval_on_ray(f, stretch * w); };
    };

    // Magnitudes of u and of the samples decide the working precision.
    Real umax = 0;
    for (const auto& z : zs) {
        const Complex az = p.a_n() * z;
        umax = std::max(umax, Real(abs(az / (Real(1) + az))));
    }
    const double gmax = detail::max_log2_modulus(detail::bernstein_nodes(make_sampled(p), p.n(), p.q()));
    const unsigned extra =
        detail::bernstein_guard_bits(detail::to_log2(umax), gmax, p.n(), static_cast<double>(p.q()));

    PrecisionScope scope(ctx.mantissa_bits + extra);
    const QParams wp = p.at_current_precision();
    std::vector<Complex> us;
    us.reserve(zs.size());
    for (const auto& z_in : zs) {
        const Complex az = wp.a_n() * lift(z_in);
        us.push_back(az / (Real(1) + az));
    }
    return detail::bernstein_at_current_precision(make_sampled(wp), wp.n(), wp.q(), us);
}

inline Complex connection_transform(const FunctionSpec& f, const QParams& p, const Complex& z,
                                    const NumericContext& ctx) {
    return connection_transform(f, p, std::span<const Complex>(&z, 1), ctx).front();
}

/// Smallest n0 >= 2 with [n0]_q^{1-beta} >= 2R.
inline unsigned admissible_n0(const Real& q, const Real& beta, const Real& R) {
    if (q < 1) {
        throw DomainError("admissible_n0: q must be at least 1");
    }
    if (!(beta > 0) || !(beta < 1)) {
        throw DomainError("admissible_n0: beta must lie in (0, 1)");
    }
    if (!(R > 0)) {
        throw DomainError("admissible_n0: R must be positive");
    }
    const Real target = 2 * R;
    Real bracket = 1 + q;  // [2]_q
    Real power = q * q;
    for (unsigned n0 = 2;; ++n0) {
        if (pow(bracket, 1 - beta) >= target) {
            return n0;
        }
        bracket += power;
        power *= q;
    }
}

/// Bits lost to cancellation when R_{n,q} is evaluated on |z| <= r without
/// guard bits (the basis mass bound over the worst denominator 1 - a_n r).
inline double unguarded_cancellation_bits(unsigned n, const Real& q, const Real& beta, const Real& r) {
    const double qd = static_cast<double>(q);
    const double log2_a = (static_cast<double>(beta) - 1.0) * log2_q_integer(n, qd);
    const double ar = std::exp2(log2_a) * static_cast<double>(r);
    if (ar >= 1.0) {
        return std::numeric_limits<double>::infinity();
    }
    const double mass = detail::log2_numerator_mass(n, qd, log2_a, std::log2(static_cast<double>(r)));
    return std::max(0.0, mass - n * std::log2(1.0 - ar));
}

}  // namespace qbs
