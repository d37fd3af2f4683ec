#pragma once

// Admissible test functions: analytic in the disk D_R with Taylor coefficients
// c_m, plus closed forms that stay valid on the ray [0, inf). Operator nodes
// [k]_q / b_n routinely leave D_R, so the ray evaluator never goes through the
// power series.

#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "qbs/kernel.hpp"

namespace qbs {

/// |c_m| <= scale * ratio^m for every m.
struct CoefficientEnvelope {
    Real scale;
    Real ratio;
};

struct FunctionSpec {
    std::string name;
    /// Analyticity radius actually used by theorem checks (may be +inf).
    Real radius;
    /// sup |f| on [0, inf); empty for unbounded specimens such as e_m, m >= 1.
    std::optional<Real> bound;
    /// Absent only for polynomials, whose sums are finite.
    std::optional<CoefficientEnvelope> envelope;
    /// Degree when f is a polynomial.
    std::optional<std::size_t> degree;
    std::function<Complex(std::size_t)> coefficient;
    /// order-th derivative in closed form, valid on D_R and on [0, inf).
    std::function<Complex(const Complex&, unsigned)> closed_form;

    [[nodiscard]] bool is_polynomial() const { return degree.has_value(); }
    [[nodiscard]] bool is_bounded() const { return bound.has_value(); }
};

inline Complex coeff_at(const FunctionSpec& f, std::size_t m) { return f.coefficient(m); }

inline Complex eval_on_ray(const FunctionSpec& f, const Real& x) {
    if (x < 0) {
        throw DomainError("eval_on_ray: x must be nonnegative");
    }
    return f.closed_form(Complex(x), 0);
}

inline Complex derivative_in_disk(const FunctionSpec& f, const Complex& z, unsigned order) {
    if (!(abs(z) < f.radius)) {
        throw DomainError(f.name + ": |z| >= R, outside the analyticity disk");
    }
    return f.closed_form(z, order);
}

inline Complex eval_in_disk(const FunctionSpec& f, const Complex& z) { return derivative_in_disk(f, z, 0); }

/// Nonnegative weight w_m with the growth bound w_m <= (m + 1)^degree.
struct TailWeight {
    std::function<Real(std::size_t)> value;
    unsigned degree = 0;
};

namespace weights {

/// w_m = 1 for m >= start, 0 below.
inline TailWeight ones_from(std::size_t start = 0) {
    return {[start](std::size_t m) { return Real(m >= start ? 1 : 0); }, 0};
}

/// w_m = m (m - 1).
inline TailWeight falling2() {
    return {[](std::size_t m) { return Real(m) * Real(m == 0 ? 0 : m - 1); }, 2};
}

/// w_m = max(m - 2, 0).
inline TailWeight shifted_by_two() {
    return {[](std::size_t m) { return Real(m > 2 ? m - 2 : 0); }, 1};
}

/// w_m = m^2 (m - 1)^2.
inline TailWeight falling2_squared() {
    return {[](std::size_t m) {
                Real v = Real(m) * Real(m == 0 ? 0 : m - 1);
                return v * v;
            },
            4};
}

}  // namespace weights

/// Sum of w_m |c_m| x^m. Infinite series are truncated once the envelope tail
/// bound drops below tol; polynomials are summed exactly.
inline Real weighted_tail_sum(const FunctionSpec& f, const TailWeight& w, const Real& x, const Real& tol) {
    if (!(x > 0)) {
        throw DomainError("weighted_tail_sum: x must be positive");
    }
    if (f.degree) {
        Real sum = 0;
        Real power = 1;
        for (std::size_t m = 0; m <= *f.degree; ++m) {
            sum += w.value(m) * abs(f.coefficient(m)) * power;
            power *= x;
        }
        return sum;
    }
    if (!f.envelope) {
        throw DomainError(f.name + ": no coefficient envelope for an infinite series");
    }
    if (!(x < f.radius)) {
        throw DivergenceError(f.name + ": series argument " + x.str(6) + " is not below the radius " +
                              f.radius.str(6));
    }
    const Real rho = f.envelope->ratio * x;
    if (!(rho < 1)) {
        throw DivergenceError(f.name + ": weighted series diverges, envelope ratio * x = " +
                              rho.str(6) + " >= 1");
    }
    constexpr std::size_t max_terms = 1'000'000;
    Real sum = 0;
    Real power = 1;
    for (std::size_t m = 0; m < max_terms; ++m) {
        sum += w.value(m) * abs(f.coefficient(m)) * power;
        power *= x;
        // Tail after index m: scale * sum_{j>m} (j+1)^d rho^j, bounded by its
        // first term over (1 - theta) where theta bounds the term ratio.
        const Real first = f.envelope->scale * pow(Real(m + 2), w.degree) * pow(rho, m + 1);
        const Real theta = rho * pow(Real(m + 3) / Real(m + 2), w.degree);
        if (theta < 1 && first / (1 - theta) < tol) {
            return sum;
        }
    }
    throw DivergenceError(f.name + ": weighted series did not reach tolerance");
}

namespace catalog {

namespace detail {

inline Real inverse_factorial(std::size_t m) {
    Real v = 1;
    for (std::size_t j = 2; j <= m; ++j) {
        v /= j;
    }
    return v;
}

/// Envelope for |c_m| <= 1/m!, taken on the disk of radius 4R so tail
/// bounds at arguments below R shrink at least geometrically by 1/4.
inline CoefficientEnvelope entire_envelope(const Real& R) {
    const Real rho = 4 * R;
    // max_m rho^m / m! is attained at m = floor(rho).
    Real best = 1;
    Real term = 1;
    for (std::size_t m = 1; Real(m) <= rho + 1; ++m) {
        term *= rho / m;
        best = std::max(best, term);
    }
    return {best, 1 / rho};
}

inline Real falling_factorial(std::size_t m, unsigned order) {
    Real v = 1;
    for (unsigned j = 0; j < order; ++j) {
        v *= Real(m) - j;
    }
    return v;
}

}  // namespace detail

/// e^{-z}; entire, so R is the working radius chosen for the experiment.
inline FunctionSpec exp_neg(const Real& R) {
    if (!(R > 0)) {
        throw DomainError("exp_neg: working radius must be positive");
    }
    FunctionSpec f;
    f.name = "exp_neg";
    f.radius = R;
    f.bound = Real(1);
    f.envelope = detail::entire_envelope(R);
    f.coefficient = [](std::size_t m) {
        const Real v = detail::inverse_factorial(m);
        return Complex(m % 2 == 0 ? v : Real(-v));
    };
    f.closed_form = [](const Complex& z, unsigned order) {
        const Complex v = exp(-z);
        return order % 2 == 0 ? v : Complex(-v);
    };
    return f;
}

inline FunctionSpec sine(const Real& R) {
    if (!(R > 0)) {
        throw DomainError("sin: working radius must be positive");
    }
    FunctionSpec f;
    f.name = "sin";
    f.radius = R;
    f.bound = Real(1);
    f.envelope = detail::entire_envelope(R);
    f.coefficient = [](std::size_t m) {
        if (m % 2 == 0) {
            return Complex(Real(0));
        }
        const Real v = detail::inverse_factorial(m);
        return Complex(m % 4 == 1 ? v : Real(-v));
    };
    f.closed_form = [](const Complex& z, unsigned order) {
        switch (order % 4) {
            case 0: return Complex(sin(z));
            case 1: return Complex(cos(z));
            case 2: return Complex(-sin(z));
            default: return Complex(-cos(z));
        }
    };
    return f;
}

/// 1/(z + c), analytic for |z| < c and bounded by 1/c on [0, inf).
inline FunctionSpec inv_shift(const Real& c, std::optional<Real> R = std::nullopt) {
    if (!(c > 0)) {
        throw DomainError("inv_shift: shift must be positive");
    }
    const Real radius = R.value_or(c);
    if (!(radius > 0) || radius > c) {
        throw DomainError("inv_shift: working radius must lie in (0, c]");
    }
    FunctionSpec f;
    f.name = "inv_shift:" + c.str(0);
    f.radius = radius;
    f.bound = 1 / c;
    f.envelope = CoefficientEnvelope{1 / c, 1 / c};
    f.coefficient = [c](std::size_t m) {
        const Real v = 1 / pow(c, m + 1);
        return Complex(m % 2 == 0 ? v : Real(-v));
    };
    f.closed_form = [c](const Complex& z, unsigned order) {
        const Complex w = z + c;
        if (abs(w) == 0) {
            throw DomainError("inv_shift: pole at z = -c");
        }
        Real scale = 1;
        for (unsigned j = 2; j <= order; ++j) {
            scale *= j;
        }
        const Complex v = scale / pow(w, static_cast<int>(order + 1));
        return order % 2 == 0 ? v : Complex(-v);
    };
    return f;
}

/// Finite power series c_0 + c_1 z + ...; bounded on [0, inf) only when constant.
inline FunctionSpec polynomial(std::vector<Complex> coeffs,
                               const Real& R = std::numeric_limits<Real>::infinity()) {
    if (coeffs.empty()) {
        coeffs.emplace_back(Real(0));
    }
    while (coeffs.size() > 1 && abs(coeffs.back()) == 0) {
        coeffs.pop_back();
    }
    FunctionSpec f;
    std::ostringstream name;
    name << "poly:";
    for (std::size_t m = 0; m < coeffs.size(); ++m) {
        name << (m ? "," : "") << coeffs[m].real().str(0);
        if (coeffs[m].imag() != 0) {
            name << (coeffs[m].imag() > 0 ? "+" : "") << coeffs[m].imag().str(0) << "i";
        }
    }
    f.name = name.str();
    f.radius = R;
    f.degree = coeffs.size() - 1;
    if (coeffs.size() == 1) {
        f.bound = Real(abs(coeffs.front()));
    }
    f.coefficient = [coeffs](std::size_t m) { return m < coeffs.size() ? coeffs[m] : Complex(Real(0)); };
    f.closed_form = [coeffs](const Complex& z, unsigned order) {
        Complex acc(Real(0));
        for (std::size_t m = coeffs.size(); m-- > order;) {
            acc = acc * z + coeffs[m] * detail::falling_factorial(m, order);
        }
        return acc;
    };
    return f;
}

/// e_m(z) = z^m.
inline FunctionSpec monomial(std::size_t m, const Real& R = std::numeric_limits<Real>::infinity()) {
    std::vector<Complex> coeffs(m + 1, Complex(Real(0)));
    coeffs[m] = Complex(Real(1));
    FunctionSpec f = polynomial(std::move(coeffs), R);
    f.name = "e_" + std::to_string(m);
    return f;
}

/// Builds a catalog entry from its CLI name: exp_neg, sin, inv_shift:<c>,
/// e_<m> or poly:<c0,c1,...>. R is the working radius.
inline FunctionSpec parse(const std::string& spec, const Real& R) {
    auto real_from = [&](const std::string& text) {
        try {
            std::size_t used = 0;
            (void)std::stod(text, &used);
            if (used != text.size()) {
                throw std::invalid_argument(text);
            }
        } catch (const std::exception&) {
            throw DomainError("unknown function '" + spec + "': bad number '" + text + "'");
        }
        return Real(text);
    };
    if (spec == "exp_neg") {
        return exp_neg(R);
    }
    if (spec == "sin") {
        return sine(R);
    }
    if (spec.rfind("inv_shift:", 0) == 0) {
        return inv_shift(real_from(spec.substr(10)), R);
    }
    if (spec.rfind("e_", 0) == 0 && spec.size() > 2 &&
        spec.find_first_not_of("0123456789", 2) == std::string::npos) {
        return monomial(std::stoul(spec.substr(2)), R);
    }
    if (spec.rfind("poly:", 0) == 0) {
        std::vector<Complex> coeffs;
        std::stringstream list(spec.substr(5));
        std::string item;
        while (std::getline(list, item, ',')) {
            coeffs.emplace_back(real_from(item));
        }
        if (coeffs.empty()) {
            throw DomainError("unknown function '" + spec + "': empty coefficient list");
        }
        return polynomial(std::move(coeffs), R);
    }
    throw DomainError("unknown function '" + spec + "'");
}

}  // namespace catalog

struct InvariantReport {
    Real worst_series_gap;  // max over samples of |partial sum - closed form| / allowed gap
    bool series_ok = true;
    bool bound_ok = true;
    bool envelope_ok = true;
};

/// Samples the FunctionSpec invariants: series vs closed form on |z| <= R/2,
/// the bound on [0, 1000], and the envelope on the first `terms` coefficients.
inline InvariantReport check_invariants(const FunctionSpec& f, std::span<const Complex> disk_points,
                                        std::size_t terms = 200) {
    InvariantReport report{Real(0)};
    // Rounding slack: the envelope is tight at its maximizing index.
    const Real slack = 1 + ldexp(Real(1), -static_cast<int>(current_bits()) + 16);
    for (std::size_t m = 0; m < terms; ++m) {
        if (f.envelope && abs(f.coefficient(m)) > slack * f.envelope->scale * pow(f.envelope->ratio, m)) {
            report.envelope_ok = false;
        }
    }
    for (const auto& z : disk_points) {
        Complex partial(Real(0));
        Complex power(Real(1));
        Real magnitude = 0;
        const std::size_t stop = f.degree ? *f.degree + 1 : terms;
        for (std::size_t m = 0; m < stop; ++m) {
            const Complex term = f.coefficient(m) * power;
            partial += term;
            magnitude += abs(term);
            power *= z;
        }
        // Rounding of the partial sum plus ten times the envelope tail.
        Real allowed = ldexp(magnitude, -static_cast<int>(current_bits()) + 16);
        if (f.envelope && !f.degree) {
            const Real rho = f.envelope->ratio * abs(z);
            allowed += 10 * f.envelope->scale * pow(rho, stop) / (1 - rho);
        }
        const Real gap = abs(partial - f.closed_form(z, 0));
        report.worst_series_gap = std::max(report.worst_series_gap, Real(gap / allowed));
        if (gap > allowed) {
            report.series_ok = false;
        }
    }
    if (f.bound) {
        for (int j = 0; j <= 4000; ++j) {
            const Real x = Real(j) / 4;
            if (abs(eval_on_ray(f, x)) > *f.bound * (1 + pow(Real(2), -60))) {
                report.bound_ok = false;
            }
        }
    }
    return report;
}

}  // namespace qbs
