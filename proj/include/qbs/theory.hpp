#pragma once

// Quantitative statements about R_{n,q} for q >= 1: the uniform upper bound,
// the Voronovskaja correction L_q^beta with its residual bounds, and empirical
// estimation of the exact approximation order.
//
// Every checker refuses inputs outside the hypotheses (unbounded f, broken
// r/R/n0 chain, beta in the wrong case) instead of reporting a meaningless
// comparison.

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "qbs/funcspace.hpp"
#include "qbs/kernel.hpp"
#include "qbs/operators.hpp"
#include "qbs/qcore.hpp"

namespace qbs {

enum class TheoremCase { T1, T2i, T2ii, T2iii, T3i, T3ii, T3iii };

/// beta regime: (i) 0 < beta < 1/2, (ii) 1/2 < beta <= 2/3, (iii) beta = 1/2.
enum class VorCase { i, ii, iii };

/// Shape of the q-difference correction term. as_lq uses (D_q f - f')/(q-1),
/// which tends to z f''/2 as q -> 1; as_theorem2 multiplies it by z, as the
/// residual inequalities are literally stated.
enum class CorrectionForm { as_lq, as_theorem2 };

inline std::string to_string(TheoremCase c) {
    switch (c) {
        case TheoremCase::T1: return "T1";
        case TheoremCase::T2i: return "T2i";
        case TheoremCase::T2ii: return "T2ii";
        case TheoremCase::T2iii: return "T2iii";
        case TheoremCase::T3i: return "T3i";
        case TheoremCase::T3ii: return "T3ii";
        case TheoremCase::T3iii: return "T3iii";
    }
    return "?";
}

inline std::string to_string(VorCase c) {
    switch (c) {
        case VorCase::i: return "i";
        case VorCase::ii: return "ii";
        case VorCase::iii: return "iii";
    }
    return "?";
}

inline std::string to_string(CorrectionForm v) { return v == CorrectionForm::as_lq ? "as_lq" : "as_theorem2"; }

/// The regime a given beta falls into; beta must lie in (0, 1).
inline VorCase case_for_beta(const Real& beta) {
    if (!(beta > 0) || !(beta < 1)) {
        throw DomainError("beta must lie in (0, 1), got " + beta.str(10));
    }
    if (beta < Real(1) / 2) {
        return VorCase::i;
    }
    return beta == Real(1) / 2 ? VorCase::iii : VorCase::ii;
}

inline TheoremCase voronovskaja_case(VorCase c) {
    return c == VorCase::i ? TheoremCase::T2i : c == VorCase::ii ? TheoremCase::T2ii : TheoremCase::T2iii;
}

inline TheoremCase order_case(VorCase c) {
    return c == VorCase::i ? TheoremCase::T3i : c == VorCase::ii ? TheoremCase::T3ii : TheoremCase::T3iii;
}

/// One hypothesis inequality `lhs <op> rhs` with its evaluated sides.
struct Constraint {
    std::string text;  // e.g. "r < R/(4q²)"
    double lhs = 0;
    double rhs = 0;
    bool strict = true;
    bool holds = false;

    [[nodiscard]] std::string failure_message() const {
        std::ostringstream os;
        os.precision(6);
        os << text << " fails: " << lhs << (strict ? " ≥ " : " > ") << rhs;
        return os.str();
    }
};

struct TheoremContext {
    TheoremCase case_tag = TheoremCase::T1;
    Real q;
    Real beta;
    Real r;
    Real R;
    /// Smallest n >= 2 satisfying every [n0]_q constraint.
    unsigned n0 = 2;
    /// Constraint that fixed n0.
    std::string n0_binding;
    std::vector<Constraint> constraint_report;

    [[nodiscard]] bool admissible() const {
        return std::all_of(constraint_report.begin(), constraint_report.end(),
                           [](const Constraint& c) { return c.holds; });
    }

    [[nodiscard]] std::optional<std::string> first_failure() const {
        for (const auto& c : constraint_report) {
            if (!c.holds) {
                return c.failure_message();
            }
        }
        return std::nullopt;
    }

    void require_admissible() const {
        if (auto failure = first_failure()) {
            throw HypothesisError(to_string(case_tag) + ": " + *failure);
        }
    }

    void require_n(unsigned n) const {
        if (n < n0) {
            throw HypothesisError(to_string(case_tag) + ": n = " + std::to_string(n) + " is below n0 = " +
                                  std::to_string(n0) + " (" + n0_binding + ")");
        }
    }
};

namespace detail {

inline Constraint less(std::string text, const Real& lhs, const Real& rhs, bool strict = true) {
    Constraint c;
    c.text = std::move(text);
    c.lhs = static_cast<double>(lhs);
    c.rhs = static_cast<double>(rhs);
    c.strict = strict;
    c.holds = strict ? lhs < rhs : lhs <= rhs;
    return c;
}

/// Smallest n >= 2 with [n]_q^{1-beta} passing `ok`, capped to avoid runaway loops.
template <class Predicate>
unsigned smallest_n(const Real& q, const Real& beta, Predicate ok) {
    constexpr unsigned cap = 1u << 20;
    Real bracket = 1 + q;
    Real power = q * q;
    for (unsigned n = 2; n < cap; ++n) {
        if (ok(pow(bracket, 1 - beta))) {
            return n;
        }
        bracket += power;
        power *= q;
    }
    return cap;
}

}  // namespace detail

/// Evaluates every hypothesis inequality of the given theorem case.
inline TheoremContext make_theorem_context(TheoremCase tag, const Real& q, const Real& beta, const Real& r,
                                           const Real& R) {
    using detail::less;
    TheoremContext ctx;
    ctx.case_tag = tag;
    ctx.q = q;
    ctx.beta = beta;
    ctx.r = r;
    ctx.R = R;
    auto& report = ctx.constraint_report;
    const Real half(Real(1) / 2);
    const Real two_thirds = Real(2) / 3 + ldexp(Real(1), -60);

    report.push_back(less("1 ≤ q", Real(1), q, false));
    report.push_back(less("1/2 < r", half, r));

    Real r_limit;
    switch (tag) {
        case TheoremCase::T1:
            report.push_back(less("0 < β", Real(0), beta));
            report.push_back(less("β ≤ 2/3", beta, two_thirds, false));
            r_limit = R / (4 * q * q);
            report.push_back(less("r < R/(4q²)", r, r_limit));
            break;
        case TheoremCase::T2i:
        case TheoremCase::T3i:
            report.push_back(less("0 < β", Real(0), beta));
            report.push_back(less("β < 1/2", beta, half));
            r_limit = R / std::max(Real(4 * q), Real(2 * q * q));
            report.push_back(less("r < R/max(4q, 2q²)", r, r_limit));
            break;
        case TheoremCase::T2ii:
        case TheoremCase::T3ii:
            report.push_back(less("1/2 < β", half, beta));
            report.push_back(less("β ≤ 2/3", beta, two_thirds, false));
            r_limit = R / (4 * q);
            report.push_back(less("r < R/(4q)", r, r_limit));
            break;
        case TheoremCase::T2iii:
        case TheoremCase::T3iii: {
            Constraint c = less("β = 1/2", beta, half, false);
            c.holds = beta == half;
            report.push_back(c);
            r_limit = R / (4 * q * q);
            report.push_back(less("r < R/(4q²)", r, r_limit));
            break;
        }
    }

    if (!ctx.admissible() || !(q >= 1) || !(beta > 0) || !(beta < 1)) {
        return ctx;
    }

    // n0 chain. The operator is regular for |z| <= r once r < [n0]^{1-beta};
    // the uniform bound needs R/(4q²) <= [n0]^{1-beta}/2, the Voronovskaja
    // and exact-order statements need R <= [n0]^{1-beta}/2.
    const unsigned n_regular = detail::smallest_n(q, beta, [&](const Real& s) { return r < s; });
    unsigned n_chain = 2;
    std::string chain_text;
    if (tag == TheoremCase::T1) {
        n_chain = detail::smallest_n(q, beta, [&](const Real& s) { return r_limit <= s / 2; });
        chain_text = "R/(4q²) ≤ [n0]^{1-β}/2";
    } else {
        n_chain = detail::smallest_n(q, beta, [&](const Real& s) { return R <= s / 2; });
        chain_text = "R ≤ [n0]^{1-β}/2";
    }
    ctx.n0 = std::max(n_regular, n_chain);
    ctx.n0_binding = n_chain >= n_regular ? chain_text : "r < [n0]^{1-β}";
    if (ctx.n0 == 2 && n_chain == 2 && n_regular == 2) {
        ctx.n0_binding = "n0 ≥ 2";
    }
    return ctx;
}

/// L_q^beta(f; z). At q = 1 the f'' branch is used for either form.
inline Complex eval_L(const FunctionSpec& f, const Complex& z, const Real& q, const Real& beta,
                      CorrectionForm form, const NumericContext& ctx) {
    if (!(beta > 0) || !(beta < 1)) {
        throw DomainError("eval_L: beta must lie in (0, 1)");
    }
    if (q < 1) {
        throw DomainError("eval_L: q must be at least 1");
    }
    const VorCase regime = case_for_beta(beta);
    PrecisionScope scope(ctx.mantissa_bits);
    const Complex zw = lift(z);
    const Real qw = lift(q);
    const bool classical = qw == 1;
    if (!(abs(zw) < (classical ? f.radius : f.radius / qw))) {
        throw DomainError("eval_L: |z| must be below " + std::string(classical ? "R" : "R/q"));
    }
    const Complex d1 = f.closed_form(zw, 1);
    const Complex drift = -(zw * zw) * d1;
    if (regime == VorCase::ii) {
        return drift;
    }
    Complex correction;
    if (classical) {
        correction = zw * f.closed_form(zw, 2) / Real(2);
    } else {
        correction = (q_derivative(f, zw, qw) - d1) / (qw - 1);
        if (form == CorrectionForm::as_theorem2) {
            correction *= zw;
        }
    }
    return regime == VorCase::i ? correction : drift + correction;
}

namespace detail {

inline Real series_tol() { return ldexp(Real(1), -static_cast<int>(current_bits()) - 8); }

/// Exponent e of the correction scale [n]_q^{-e} in each regime.
inline Real correction_exponent(VorCase c, const Real& beta) {
    switch (c) {
        case VorCase::i: return beta;
        case VorCase::ii: return 1 - beta;
        case VorCase::iii: return Real(1) / 2;
    }
    return beta;
}

inline void require_case_matches(VorCase c, const Real& beta) {
    if (case_for_beta(beta) != c) {
        throw DomainError("case (" + to_string(c) + ") does not match beta = " + beta.str(10));
    }
}

inline void require_bounded(const FunctionSpec& f) {
    if (!f.is_bounded()) {
        throw HypothesisError(f.name + " is unbounded on [0,∞)");
    }
}

}  // namespace detail

/// (1/[n]^beta) sum |c_m| m(m-1)(4q²r)^m + (2r/[n]^{1-beta}) sum_{m>=1} |c_m| (2r)^m.
inline Real thm1_rhs(const FunctionSpec& f, const QParams& p_in, const Real& r_in, const NumericContext& ctx) {
    PrecisionScope scope(ctx.mantissa_bits);
    const QParams p = p_in.at_current_precision();
    const Real r = lift(r_in);
    const Real q = p.q();
    const Real curvature = weighted_tail_sum(f, weights::falling2(), 4 * q * q * r, detail::series_tol());
    const Real slope = weighted_tail_sum(f, weights::ones_from(1), 2 * r, detail::series_tol());
    return curvature / pow(p.bracket_n(), p.beta()) + 2 * r * slope / pow(p.bracket_n(), 1 - p.beta());
}

struct BoundCheck {
    Real lhs_sup;
    Real rhs;
    bool holds = false;
    bool precision_ok = false;
};

namespace detail {

inline std::vector<Complex> approximation_errors(const FunctionSpec& f, const QParams& p,
                                                 std::span<const Complex> zs, const NumericContext& ctx) {
    auto values = eval_R(f, p, zs, ctx);
    PrecisionScope scope(ctx.mantissa_bits);
    for (std::size_t j = 0; j < zs.size(); ++j) {
        values[j] -= f.closed_form(lift(zs[j]), 0);
    }
    return values;
}

}  // namespace detail

/// sup_{|z|=r} |R_{n,q}(f;z) - f(z)| against thm1_rhs, r = grid radius.
inline BoundCheck check_thm1(const FunctionSpec& f, const QParams& p, const CircleGrid& grid,
                             const NumericContext& ctx) {
    detail::require_bounded(f);
    const TheoremContext hyp = make_theorem_context(TheoremCase::T1, p.q(), p.beta(), grid.radius, f.radius);
    hyp.require_admissible();
    hyp.require_n(p.n());

    const NumericContext fine = ctx.doubled();
    const Real lhs = sup_norm(detail::approximation_errors(f, p, grid.points, ctx));
    const Real lhs_fine = sup_norm(detail::approximation_errors(f, p, grid.points, fine));
    const Real rhs = thm1_rhs(f, p, grid.radius, ctx);
    const Real rhs_fine = thm1_rhs(f, p, grid.radius, fine);

    BoundCheck out{lhs_fine, rhs_fine};
    out.precision_ok = precision_agree(lhs, lhs_fine, ctx) && precision_agree(rhs, rhs_fine, ctx);
    out.holds = lhs <= rhs && lhs_fine <= rhs_fine;
    return out;
}

namespace detail {

inline std::vector<Complex> vor_residuals(const FunctionSpec& f, const QParams& p, std::span<const Complex> zs,
                                          VorCase c, CorrectionForm form, const NumericContext& ctx) {
    require_case_matches(c, p.beta());
    auto values = eval_R(f, p, zs, ctx);
    PrecisionScope scope(ctx.mantissa_bits);
    const QParams wp = p.at_current_precision();
    const Real scale = pow(wp.bracket_n(), -correction_exponent(c, wp.beta()));
    for (std::size_t j = 0; j < zs.size(); ++j) {
        const Complex L = eval_L(f, zs[j], wp.q(), wp.beta(), form, ctx);
        values[j] -= f.closed_form(lift(zs[j]), 0) + L * scale;
    }
    return values;
}

}  // namespace detail

/// R_{n,q}(f;z) - f(z) - [n]_q^{-e} L_q^beta(f;z), the residual the Voronovskaja
/// bounds control (e = beta, 1 - beta, 1/2 for cases i, ii, iii).
inline Complex vor_residual(const FunctionSpec& f, const QParams& p, const Complex& z, VorCase c,
                            CorrectionForm form, const NumericContext& ctx) {
    return detail::vor_residuals(f, p, std::span<const Complex>(&z, 1), c, form, ctx).front();
}

/// Right-hand side of the residual bound for case c at radius r.
inline Real vor_rhs(const FunctionSpec& f, const QParams& p_in, const Real& r_in, VorCase c,
                    const NumericContext& ctx) {
    detail::require_case_matches(c, p_in.beta());
    PrecisionScope scope(ctx.mantissa_bits);
    const QParams p = p_in.at_current_precision();
    const Real r = lift(r_in);
    const Real q = p.q();
    const Real& bracket = p.bracket_n();
    const Real tol = detail::series_tol();
    switch (c) {
        case VorCase::i: {
            // Terms m = 0, 1 of sum |c_m| (m-2) (4qr)^{m-2} have negative weight
            // and are dropped; m = 2 contributes nothing.
            const Real x = 4 * q * r;
            const Real y = 2 * q * q * r;
            const Real first = weighted_tail_sum(f, weights::shifted_by_two(), x, tol) / (x * x);
            const Real second = y * weighted_tail_sum(f, weights::falling2(), y, tol);
            return 4 * first / pow(bracket, 2 * p.beta()) + 4 * second / pow(bracket, 1 - p.beta());
        }
        case VorCase::ii:
            return 6 * weighted_tail_sum(f, weights::falling2(), 4 * q * r, tol) / pow(bracket, p.beta());
        case VorCase::iii:
            return 9 * weighted_tail_sum(f, weights::falling2_squared(), 4 * q * q * r, tol) / bracket;
    }
    return Real(0);
}

struct ResidualCheck {
    Real sup_residual;
    Real rhs;
    /// |residual(z_j)| <= rhs at every grid point (at both precisions).
    bool holds = false;
    bool precision_ok = false;
};

/// Pointwise residual bound on the grid, r = grid radius.
inline ResidualCheck check_vor(const FunctionSpec& f, const QParams& p, VorCase c, CorrectionForm form,
                               const CircleGrid& grid, const NumericContext& ctx) {
    detail::require_bounded(f);
    detail::require_case_matches(c, p.beta());
    const TheoremContext hyp = make_theorem_context(voronovskaja_case(c), p.q(), p.beta(), grid.radius, f.radius);
    hyp.require_admissible();
    hyp.require_n(p.n());

    const NumericContext fine = ctx.doubled();
    ResidualCheck out{Real(0), vor_rhs(f, p, grid.radius, c, fine)};
    const Real rhs_coarse = vor_rhs(f, p, grid.radius, c, ctx);
    out.holds = true;
    out.precision_ok = precision_agree(rhs_coarse, out.rhs, ctx);
    const auto coarse = detail::vor_residuals(f, p, grid.points, c, form, ctx);
    const auto precise = detail::vor_residuals(f, p, grid.points, c, form, fine);
    for (std::size_t j = 0; j < grid.size(); ++j) {
        out.precision_ok = out.precision_ok && precision_agree(coarse[j], precise[j], ctx);
        out.holds = out.holds && abs(coarse[j]) <= rhs_coarse && abs(precise[j]) <= out.rhs;
        out.sup_residual = std::max(out.sup_residual, Real(abs(precise[j])));
    }
    return out;
}

struct RatePoint {
    unsigned n = 0;
    Real bracket_n;
    Real error;
    bool precision_ok = true;
};

struct RateReport {
    std::vector<RatePoint> errors;
    Real fitted_slope;
    Real expected_slope;
    /// Range of error * [n]_q^{-expected_slope}.
    Real window_min;
    Real window_max;

    [[nodiscard]] Real window_ratio() const { return window_max / window_min; }
    [[nodiscard]] bool precision_ok() const {
        return std::all_of(errors.begin(), errors.end(), [](const RatePoint& e) { return e.precision_ok; });
    }
    /// Slope within slope_tol of the expected order and a bounded normalized error.
    [[nodiscard]] bool consistent(double slope_tol = 0.1, double window = 10.0) const {
        return abs(fitted_slope - expected_slope) <= slope_tol && window_ratio() <= window;
    }
};

/// Least-squares slope of log(error) against log([n]_q) plus the normalized
/// error window for the expected slope.
inline RateReport fit_rate(std::vector<RatePoint> points, const Real& expected_slope) {
    if (points.size() < 3) {
        throw DomainError("rate fit needs at least 3 values of n");
    }
    Real sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (const auto& pt : points) {
        if (!(pt.error > 0)) {
            throw DomainError("rate fit: zero error at n = " + std::to_string(pt.n) + " (degenerate f)");
        }
        const Real x = log(pt.bracket_n);
        const Real y = log(pt.error);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const Real count(points.size());
    const Real denom = count * sxx - sx * sx;
    if (!(denom > 0)) {
        throw DomainError("rate fit: [n]_q values must not all coincide");
    }
    RateReport report;
    report.fitted_slope = (count * sxy - sx * sy) / denom;
    report.expected_slope = expected_slope;
    bool first = true;
    for (const auto& pt : points) {
        const Real normalized = pt.error * pow(pt.bracket_n, -expected_slope);
        report.window_min = first ? normalized : std::min(report.window_min, normalized);
        report.window_max = first ? normalized : std::max(report.window_max, normalized);
        first = false;
    }
    report.errors = std::move(points);
    return report;
}

/// Exponent of the exact order: -beta, -(1 - beta) or -1/2.
inline Real expected_rate_slope(VorCase c, const Real& beta) { return -detail::correction_exponent(c, beta); }

/// Sup-errors over the grid for each n and the fitted order of approximation.
inline RateReport estimate_rate(const FunctionSpec& f, const Real& q, const Real& beta, const CircleGrid& grid,
                                const std::vector<unsigned>& n_list, VorCase c, const NumericContext& ctx) {
    if (n_list.size() < 3) {
        throw DomainError("estimate_rate needs at least 3 values of n");
    }
    if (!std::is_sorted(n_list.begin(), n_list.end()) ||
        std::adjacent_find(n_list.begin(), n_list.end()) != n_list.end()) {
        throw DomainError("estimate_rate: n values must be strictly increasing");
    }
    detail::require_bounded(f);
    detail::require_case_matches(c, beta);
    if (f.degree && (c == VorCase::i ? *f.degree <= 1 : *f.degree == 0)) {
        throw HypothesisError(f.name + (c == VorCase::i ? " is a polynomial of degree ≤ 1" : " is constant"));
    }
    const TheoremContext hyp = make_theorem_context(order_case(c), q, beta, grid.radius, f.radius);
    hyp.require_admissible();
    hyp.require_n(n_list.front());

    std::vector<RatePoint> points;
    for (unsigned n : n_list) {
        const QParams p = QParams::make(q, beta, n);
        const Real coarse = sup_norm(detail::approximation_errors(f, p, grid.points, ctx));
        const Real precise = sup_norm(detail::approximation_errors(f, p, grid.points, ctx.doubled()));
        points.push_back(RatePoint{n, p.bracket_n(), precise, precision_agree(coarse, precise, ctx)});
    }
    return fit_rate(std::move(points), expected_rate_slope(c, beta));
}

/// Largest n whose plain (guard-free) evaluation at ctx.mantissa_bits on
/// |z| <= r would still meet ctx.agreement_tol with 32 bits to spare.
inline unsigned precision_limited_n_max(const Real& q, const Real& beta, const Real& r, const NumericContext& ctx,
                                        unsigned search_cap = 4096) {
    const double budget = ctx.mantissa_bits - std::log2(1.0 / static_cast<double>(ctx.agreement_tol)) - 32.0;
    unsigned last_ok = 0;
    for (unsigned n = 1; n <= search_cap; ++n) {
        if (unguarded_cancellation_bits(n, q, beta, r) > budget) {
            break;
        }
        last_ok = n;
    }
    return last_ok;
}

}  // namespace qbs
