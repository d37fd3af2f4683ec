#pragma once

// Oracles and generators shared by the unit tests and the acceptance run.
// Nothing here calls into the operator code paths it is used to check.

#include <cstdint>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_complex.hpp>
#include <boost/multiprecision/cpp_int.hpp>
#include <gmp.h>

#include "qbs/kernel.hpp"

namespace oracle {

using Rational = boost::multiprecision::cpp_rational;
using BigInt = boost::multiprecision::cpp_int;

/// Exact value of an MPFR number (finite values are dyadic rationals).
inline Rational exact(const qbs::Real& x) {
    mpz_t mant;
    mpz_init(mant);
    long exp = mpfr_get_z_2exp(mant, x.backend().data());
    if (mpz_sgn(mant) == 0) {
        mpz_clear(mant);
        return 0;
    }
    // Drop trailing zero bits so the rational starts out reduced.
    const auto zeros = mpz_scan1(mant, 0);
    mpz_tdiv_q_2exp(mant, mant, zeros);
    exp += static_cast<long>(zeros);
    std::vector<std::uint32_t> words((mpz_sizeinbase(mant, 2) + 31) / 32);
    std::size_t count = 0;
    mpz_export(words.data(), &count, -1, sizeof(std::uint32_t), 0, 0, mant);
    BigInt magnitude;
    boost::multiprecision::import_bits(magnitude, words.begin(), words.begin() + static_cast<long>(count), 32,
                                       false);
    Rational value{mpz_sgn(mant) < 0 ? BigInt(-magnitude) : magnitude};
    mpz_clear(mant);
    if (exp >= 0) {
        value *= BigInt(1) << exp;
    } else {
        value /= BigInt(1) << -exp;
    }
    return value;
}

/// Nearest value at the current precision.
inline qbs::Real to_real(const Rational& x) {
    return qbs::Real(boost::multiprecision::numerator(x).str()) /
           qbs::Real(boost::multiprecision::denominator(x).str());
}

inline Rational pow(const Rational& q, unsigned n) {
    Rational out = 1;
    for (unsigned j = 0; j < n; ++j) {
        out *= q;
    }
    return out;
}

/// (1 - q^n)/(1 - q), or n at q = 1.
inline Rational q_integer(unsigned n, const Rational& q) {
    if (q == 1) {
        return Rational(n);
    }
    return (1 - pow(q, n)) / (1 - q);
}

inline Rational q_factorial(unsigned n, const Rational& q) {
    Rational out = 1;
    for (unsigned k = 1; k <= n; ++k) {
        out *= q_integer(k, q);
    }
    return out;
}

/// Product form prod_{i<k} (1 - q^{n-i}) / (1 - q^{i+1}); binomial coefficient at q = 1.
inline Rational q_binomial(unsigned n, unsigned k, const Rational& q) {
    Rational out = 1;
    for (unsigned i = 0; i < k; ++i) {
        if (q == 1) {
            out = out * (n - i) / (i + 1);
        } else {
            out *= (1 - pow(q, n - i)) / (1 - pow(q, i + 1));
        }
    }
    return out;
}

/// Exact complex rational, enough for polynomial operator values at rational points.
struct CRational {
    Rational re = 0;
    Rational im = 0;

    friend CRational operator+(const CRational& a, const CRational& b) { return {a.re + b.re, a.im + b.im}; }
    friend CRational operator*(const CRational& a, const CRational& b) {
        return {a.re * b.re - a.im * b.im, a.re * b.im + a.im * b.re};
    }
    friend CRational operator/(const CRational& a, const CRational& b) {
        const Rational d = b.re * b.re + b.im * b.im;
        return {(a.re * b.re + a.im * b.im) / d, (a.im * b.re - a.re * b.im) / d};
    }
};

/// Classical operator at q = 1 with rational a_n, b_n and a polynomial f
/// given by rational coefficients, evaluated exactly.
inline CRational classical_exact(const std::vector<Rational>& coeffs, unsigned n, const Rational& a,
                                 const Rational& b, const CRational& z) {
    const CRational az = CRational{a, 0} * z;
    CRational sum;
    CRational az_power{1, 0};
    for (unsigned k = 0; k <= n; ++k) {
        const Rational t = Rational(k) / b;
        Rational fk = 0;
        Rational tp = 1;
        for (const auto& c : coeffs) {
            fk += c * tp;
            tp *= t;
        }
        sum = sum + CRational{fk * q_binomial(n, k, Rational(1)), 0} * az_power;
        az_power = az_power * az;
    }
    CRational denom{1, 0};
    const CRational one_plus{1 + az.re, az.im};
    for (unsigned k = 0; k < n; ++k) {
        denom = denom * one_plus;
    }
    return sum / denom;
}

/// 100-digit complex arithmetic independent of MPFR.
using Float = boost::multiprecision::cpp_bin_float_100;
using CFloat = boost::multiprecision::cpp_complex_100;

inline Float to_float(const qbs::Real& x) { return Float(x.str(120, std::ios_base::scientific)); }
inline CFloat to_float(const qbs::Complex& z) { return CFloat(to_float(z.real()), to_float(z.imag())); }

/// Sample function by catalog name for the classical oracle.
inline std::function<Float(const Float&)> classical_sample(const std::string& name) {
    if (name == "exp_neg") {
        return [](const Float& x) { return exp(-x); };
    }
    if (name == "sin") {
        return [](const Float& x) { return sin(x); };
    }
    if (name.rfind("inv_shift:", 0) == 0) {
        const Float c(name.substr(10));
        return [c](const Float& x) { return 1 / (x + c); };
    }
    if (name.rfind("e_", 0) == 0) {
        const int m = std::stoi(name.substr(2));
        return [m](const Float& x) { return pow(x, m); };
    }
    throw std::invalid_argument("no classical sample for " + name);
}

/// (1 + a z)^{-n} sum_k g(k / n^beta) C(n,k) (a z)^k with a = n^{beta - 1}.
inline CFloat classical_operator(const std::function<Float(const Float&)>& g, unsigned n, const Float& beta,
                                 const CFloat& z) {
    const Float a = pow(Float(n), beta - 1);
    const Float b = pow(Float(n), beta);
    const CFloat az = a * z;
    CFloat sum = 0;
    CFloat power = 1;
    BigInt binom = 1;
    for (unsigned k = 0; k <= n; ++k) {
        sum += g(Float(k) / b) * Float(binom) * power;
        binom = binom * (n - k) / (k + 1);
        power *= az;
    }
    return sum / pow(CFloat(1) + az, n);
}

}  // namespace oracle

namespace prop {

/// Seeded draws for hand-rolled property tests.
class Gen {
public:
    explicit Gen(std::uint64_t seed) : rng_(seed) {}

    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
    unsigned integer(unsigned lo, unsigned hi) { return std::uniform_int_distribution<unsigned>(lo, hi)(rng_); }

    /// Uniform point of the closed disk |z| <= r, exactly representable in double.
    qbs::Complex disk_point(double r) {
        const double rho = r * std::sqrt(uniform(0, 1));
        const double theta = uniform(0, 6.283185307179586);
        return {qbs::Real(rho * std::cos(theta)), qbs::Real(rho * std::sin(theta))};
    }

    template <class T>
    const T& pick(const std::vector<T>& items) {
        return items[integer(0, static_cast<unsigned>(items.size() - 1))];
    }

private:
    std::mt19937_64 rng_;
};

/// Runs `body` on `cases` seeded generators; the first failing seed is returned
/// in `failure` so the case can be replayed.
template <class Body>
bool for_all(std::uint64_t base_seed, unsigned cases, Body body, std::string& failure) {
    for (unsigned j = 0; j < cases; ++j) {
        const std::uint64_t seed = base_seed + j;
        Gen gen(seed);
        std::ostringstream note;
        if (!body(gen, note)) {
            failure = "seed " + std::to_string(seed) + ": " + note.str();
            return false;
        }
    }
    return true;
}

}  // namespace prop

namespace oracle {

/// Direct expansion of the q-operator in a wide cpp_bin_float, used only at
/// small n: sum_k f(t_k) [n,k]_q w^k prod_{s<n-k} (1 - (q^s - 1) w) / (1 + w)^n.
template <unsigned Digits>
struct Wide {
    using F = boost::multiprecision::number<boost::multiprecision::cpp_bin_float<Digits>>;
    using C = boost::multiprecision::number<boost::multiprecision::complex_adaptor<
        boost::multiprecision::cpp_bin_float<Digits>>>;

    static F from(const qbs::Real& x) { return F(x.str(Digits + 20, std::ios_base::scientific)); }

    static C q_operator(const std::function<C(const F&)>& g, unsigned n, const F& q, const F& beta, const C& z) {
        const F bracket_n = q == 1 ? F(n) : (pow(q, n) - 1) / (q - 1);
        const F a = pow(bracket_n, beta - 1);
        const F b = pow(bracket_n, beta);
        const C w = a * z;
        C sum = 0;
        for (unsigned k = 0; k <= n; ++k) {
            F binom = 1;
            for (unsigned i = 0; i < k; ++i) {
                binom *= q == 1 ? F(n - i) / F(i + 1) : (pow(q, n - i) - 1) / (pow(q, i + 1) - 1);
            }
            const F t = (q == 1 ? F(k) : (pow(q, k) - 1) / (q - 1)) / b;
            C product = 1;
            for (unsigned s = 0; s + k < n; ++s) {
                product *= C(1) - (pow(q, s) - 1) * w;
            }
            sum += g(t) * binom * pow(w, k) * product;
        }
        return sum / pow(C(1) + w, n);
    }
};

}  // namespace oracle
