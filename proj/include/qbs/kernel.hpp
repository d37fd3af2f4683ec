#pragma once

// Precision-configurable real/complex arithmetic shared by every other header.
//
// All big-float values are MPFR numbers with per-value precision. A value
// created without an explicit precision takes the process-wide default, which
// PrecisionScope sets and restores. Arithmetic results take the larger of the
// operand precisions, so values created outside a scope must be lifted before
// use when a higher working precision is wanted.
//
// The default precision is process-global: evaluations must not run
// concurrently at different precisions.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/math/constants/constants.hpp>
#include <boost/multiprecision/mpfr.hpp>

namespace qbs {

using Real = boost::multiprecision::number<boost::multiprecision::mpfr_float_backend<0>,
                                           boost::multiprecision::et_off>;
using Complex = std::complex<Real>;

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Argument outside the documented domain of an operation.
class DomainError : public Error {
public:
    using Error::Error;
};

/// Denominator (1 + a_n z)^n too close to zero.
class SingularityError : public Error {
public:
    using Error::Error;
};

/// Series argument outside the certified convergence region.
class DivergenceError : public Error {
public:
    using Error::Error;
};

/// Theorem hypothesis violated (unbounded f, broken constraint chain, ...).
class HypothesisError : public Error {
public:
    using Error::Error;
};

/// Result failed the precision-doubling agreement check.
class PrecisionError : public Error {
public:
    using Error::Error;
};

inline constexpr unsigned min_mantissa_bits = 53;

/// Decimal digits needed so that MPFR allocates at least `bits` of mantissa.
inline unsigned digits10_for_bits(unsigned bits) {
    return static_cast<unsigned>(std::ceil(bits * 0.30102999566398120));
}

/// Sets the default MPFR precision for the lifetime of the scope.
class PrecisionScope {
public:
    explicit PrecisionScope(unsigned bits) : saved_(Real::default_precision()) {
        Real::default_precision(digits10_for_bits(bits));
    }
    ~PrecisionScope() { Real::default_precision(saved_); }

    PrecisionScope(const PrecisionScope&) = delete;
    PrecisionScope& operator=(const PrecisionScope&) = delete;

private:
    unsigned saved_;
};

/// Mantissa bits of a value created at the current default precision.
inline unsigned current_bits() { return static_cast<unsigned>(mpfr_get_prec(Real(0).backend().data())); }

/// Copy of `x` carrying the current default precision.
inline Real lift(const Real& x) { return Real(x, Real::default_precision()); }
inline Complex lift(const Complex& z) { return {lift(z.real()), lift(z.imag())}; }

struct NumericContext {
    unsigned mantissa_bits = 256;
    Real zero_guard;
    Real agreement_tol;

    /// Same guard and tolerance, twice the mantissa.
    [[nodiscard]] NumericContext doubled() const {
        return NumericContext{2 * mantissa_bits, zero_guard, agreement_tol};
    }
};

inline NumericContext make_context(unsigned mantissa_bits, double zero_guard, double agreement_tol) {
    if (mantissa_bits < min_mantissa_bits) {
        throw DomainError("mantissa_bits must be at least 53, got " + std::to_string(mantissa_bits));
    }
    if (!(zero_guard > 0.0) || !(agreement_tol > 0.0)) {
        throw DomainError("zero_guard and agreement_tol must be positive");
    }
    PrecisionScope scope(mantissa_bits);
    return NumericContext{mantissa_bits, Real(zero_guard), Real(agreement_tol)};
}

inline NumericContext make_context(unsigned mantissa_bits = 256) {
    if (mantissa_bits < min_mantissa_bits) {
        throw DomainError("mantissa_bits must be at least 53, got " + std::to_string(mantissa_bits));
    }
    PrecisionScope scope(mantissa_bits);
    return NumericContext{mantissa_bits, Real("1e-40"), Real("1e-20")};
}

inline Real pi() { return boost::math::constants::pi<Real>(); }

struct CircleGrid {
    Real radius;
    std::vector<Complex> points;

    [[nodiscard]] std::size_t size() const { return points.size(); }
};

/// M equi-angular samples z_j = r e^{2 pi i j / M} at the current precision.
inline CircleGrid circle_grid(const Real& r, std::size_t M) {
    if (!(r > 0)) {
        throw DomainError("circle_grid: radius must be positive");
    }
    if (M == 0) {
        throw DomainError("circle_grid: need at least one point");
    }
    CircleGrid grid{lift(r), {}};
    grid.points.reserve(M);
    const Real step = 2 * pi() / M;
    for (std::size_t j = 0; j < M; ++j) {
        // Exact quarter turns keep the axis points free of rounding noise.
        if ((4 * j) % M == 0) {
            switch ((4 * j) / M) {
                case 0: grid.points.emplace_back(grid.radius, Real(0)); continue;
                case 1: grid.points.emplace_back(Real(0), grid.radius); continue;
                case 2: grid.points.emplace_back(-grid.radius, Real(0)); continue;
                default: grid.points.emplace_back(Real(0), -grid.radius); continue;
            }
        }
        const Real theta = step * j;
        grid.points.emplace_back(grid.radius * cos(theta), grid.radius * sin(theta));
    }
    return grid;
}

inline Real sup_norm(std::span<const Complex> values) {
    if (values.empty()) {
        throw DomainError("sup_norm of an empty list");
    }
    Real best = abs(values.front());
    for (const auto& v : values.subspan(1)) {
        best = std::max(best, Real(abs(v)));
    }
    return best;
}

/// |x - y| <= tol * max(1, |y|), with y the higher-precision value.
inline bool precision_agree(const Complex& x, const Complex& y, const NumericContext& ctx) {
    const Real scale = std::max(Real(1), Real(abs(y)));
    return abs(x - y) <= ctx.agreement_tol * scale;
}

inline bool precision_agree(const Real& x, const Real& y, const NumericContext& ctx) {
    return precision_agree(Complex(x), Complex(y), ctx);
}

}  // namespace qbs
