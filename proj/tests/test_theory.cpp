#include <gtest/gtest.h>

#include "qbs/theory.hpp"
#include "support.hpp"

using namespace qbs;

namespace {

Real rel_gap(const Complex& x, const Complex& y) { return abs(x - y) / std::max(Real(1), Real(abs(y))); }

}  // namespace

class Theory : public ::testing::Test {
protected:
    PrecisionScope scope{256};
    NumericContext ctx = make_context(256);
};

TEST_F(Theory, ConstraintReportNamesTheFailingInequality) {
    const auto ok = make_theorem_context(TheoremCase::T1, Real(1), Real("0.5"), Real("0.6"), Real(3));
    EXPECT_TRUE(ok.admissible());
    EXPECT_EQ(ok.n0, 3u);

    const auto bad = make_theorem_context(TheoremCase::T1, Real(1), Real("0.5"), Real("0.7"), Real("2.5"));
    ASSERT_FALSE(bad.admissible());
    EXPECT_EQ(*bad.first_failure(), "r < R/(4q²) fails: 0.7 ≥ 0.625");
    EXPECT_THROW(bad.require_admissible(), HypothesisError);

    const auto rate = make_theorem_context(TheoremCase::T3iii, Real(2), Real("0.5"), Real("0.7"), Real(8));
    EXPECT_EQ(*rate.first_failure(), "r < R/(4q²) fails: 0.7 ≥ 0.5");

    const auto small_r = make_theorem_context(TheoremCase::T2ii, Real(1), Real("0.6"), Real("0.5"), Real(3));
    EXPECT_EQ(*small_r.first_failure(), "1/2 < r fails: 0.5 ≥ 0.5");

    const auto wrong_beta = make_theorem_context(TheoremCase::T2i, Real(1), Real("0.6"), Real("0.55"), Real(3));
    EXPECT_FALSE(wrong_beta.admissible());
}

TEST_F(Theory, N0Chain) {
    // R <= [n0]^{1/2} / 2 with R = 5 at q = 1.5 needs [n0] >= 100, first reached at n0 = 10.
    const auto c = make_theorem_context(TheoremCase::T3iii, Real("1.5"), Real("0.5"), Real("0.55"), Real(5));
    ASSERT_TRUE(c.admissible());
    EXPECT_EQ(c.n0, 10u);
    EXPECT_THROW(c.require_n(9), HypothesisError);
    EXPECT_NO_THROW(c.require_n(10));
    const auto big = make_theorem_context(TheoremCase::T3iii, Real(1), Real("0.5"), Real("0.6"), Real(3));
    EXPECT_EQ(big.n0, 36u);
}

TEST_F(Theory, CorrectionFunctionExamples) {
    const auto e2 = catalog::monomial(2);
    const Complex z(Real("0.5"));
    EXPECT_LT(rel_gap(eval_L(e2, z, Real(2), Real("0.25"), CorrectionForm::as_lq, ctx), Complex(Real("0.5"))),
              Real("1e-70"));
    EXPECT_LT(rel_gap(eval_L(e2, z, Real(1), Real("0.25"), CorrectionForm::as_lq, ctx), Complex(Real("0.5"))),
              Real("1e-70"));
    EXPECT_LT(rel_gap(eval_L(e2, z, Real(2), Real("0.25"), CorrectionForm::as_theorem2, ctx),
                      Complex(Real("0.25"))),
              Real("1e-70"));
    for (auto form : {CorrectionForm::as_lq, CorrectionForm::as_theorem2}) {
        EXPECT_LT(rel_gap(eval_L(e2, z, Real(2), Real("0.6"), form, ctx), Complex(Real("-0.25"))), Real("1e-70"));
    }
    EXPECT_THROW(eval_L(catalog::exp_neg(Real(3)), Complex(Real(2)), Real(2), Real("0.3"), CorrectionForm::as_lq, ctx),
                 DomainError);
}

TEST_F(Theory, ThmOneRightHandSide) {
    const auto f = catalog::exp_neg(Real(3));
    const auto p = QParams::make(Real(1), Real("0.5"), 4);
    const Real r("0.6");
    const Real want = Real("2.4") * Real("2.4") * exp(Real("2.4")) / 2 + Real("0.6") * (exp(Real("1.2")) - 1);
    const Real got = thm1_rhs(f, p, r, ctx);
    EXPECT_LT(abs(got - want), Real("1e-40"));
    EXPECT_NEAR(static_cast<double>(got), 33.139, 1e-3);

    const auto p9 = QParams::make(Real("1.5"), Real("0.4"), 9);
    EXPECT_LT(abs(thm1_rhs(catalog::monomial(1), p9, r, ctx) - 4 * r * r / pow(p9.bracket_n(), Real("0.6"))),
              Real("1e-60"));
    EXPECT_EQ(thm1_rhs(catalog::polynomial({Complex(Real(3))}), p9, r, ctx), Real(0));
}

TEST_F(Theory, ThmOneCheck) {
    const auto f = catalog::exp_neg(Real(3));
    const auto grid = circle_grid(Real("0.6"), 64);
    const auto check = check_thm1(f, QParams::make(Real(1), Real("0.5"), 16), grid, ctx);
    EXPECT_TRUE(check.holds);
    EXPECT_TRUE(check.precision_ok);
    EXPECT_GT(check.lhs_sup, Real(0));

    try {
        check_thm1(catalog::monomial(2), QParams::make(Real(1), Real("0.5"), 16), grid, ctx);
        ADD_FAILURE() << "unbounded f accepted";
    } catch (const HypothesisError& e) {
        EXPECT_NE(std::string(e.what()).find("unbounded on [0,∞)"), std::string::npos);
    }

    const auto constant = check_thm1(catalog::polynomial({Complex(Real(1))}, Real(3)),
                                     QParams::make(Real(1), Real("0.5"), 16), grid, ctx);
    EXPECT_LT(constant.lhs_sup, Real("1e-70"));
    EXPECT_EQ(constant.rhs, Real(0));

    // n below n0 is refused, not evaluated.
    EXPECT_THROW(check_thm1(f, QParams::make(Real(1), Real("0.5"), 2), grid, ctx), HypothesisError);
}

TEST_F(Theory, ResidualOfTheIdentityIsClosedForm) {
    std::string failure;
    const NumericContext c = ctx;
    const bool ok = prop::for_all(
        606, 40,
        [&c](prop::Gen& gen, std::ostream& note) {
            const Real q(gen.uniform(1.0, 2.0));
            const Real beta(gen.uniform(0.51, 0.66));
            const auto p = QParams::make(q, beta, gen.integer(1, 12));
            const Complex z = gen.disk_point(0.6);
            const Complex got = vor_residual(catalog::monomial(1), p, z, VorCase::ii, CorrectionForm::as_theorem2, c);
            const Complex want = p.a_n() * p.a_n() * z * z * z / (Real(1) + p.a_n() * z);
            if (rel_gap(got, want) > Real("1e-60")) {
                note << "q=" << q.str(10) << " n=" << p.n();
                return false;
            }
            return true;
        },
        failure);
    EXPECT_TRUE(ok) << failure;

    const auto p = QParams::make(Real("1.5"), Real("0.3"), 7);
    for (auto vc : {VorCase::i}) {
        EXPECT_LT(abs(vor_residual(catalog::polynomial({Complex(Real(2))}), p, Complex(Real("0.3"), Real("0.2")), vc,
                                   CorrectionForm::as_theorem2, ctx)),
                  Real("1e-70"));
    }
    EXPECT_THROW(vor_residual(catalog::monomial(1), p, Complex(Real("0.3")), VorCase::ii, CorrectionForm::as_lq, ctx),
                 DomainError);
}

TEST_F(Theory, ResidualRightHandSide) {
    const auto f = catalog::exp_neg(Real(3));
    const auto p = QParams::make(Real(1), Real("0.6"), 16);
    const Real x("2.4");
    const Real want = 6 / pow(Real(16), Real("0.6")) * x * x * exp(x);
    EXPECT_LT(abs(vor_rhs(f, p, Real("0.6"), VorCase::ii, ctx) - want), Real("1e-40"));
    EXPECT_NEAR(static_cast<double>(want), 72.18, 0.01);
    EXPECT_EQ(vor_rhs(catalog::monomial(1), p, Real("0.6"), VorCase::ii, ctx), Real(0));
    EXPECT_EQ(vor_rhs(catalog::polynomial({Complex(Real(5))}), p, Real("0.6"), VorCase::ii, ctx), Real(0));
}

TEST_F(Theory, CaseThreeSpotValue) {
    const auto f = catalog::exp_neg(Real(5));
    const auto p = QParams::make(Real("1.5"), Real("0.5"), 16);
    const Complex z(Real("0.55"));
    const Complex value = vor_residual(f, p, z, VorCase::iii, CorrectionForm::as_theorem2, ctx);
    const Complex fine = vor_residual(f, p, z, VorCase::iii, CorrectionForm::as_theorem2, ctx.doubled());
    EXPECT_TRUE(precision_agree(value, fine, ctx));
    EXPECT_LE(abs(value), vor_rhs(f, p, Real("0.55"), VorCase::iii, ctx));
}

TEST_F(Theory, VoronovskajaCheckRuns) {
    const auto grid = circle_grid(Real("0.55"), 32);
    const auto f = catalog::exp_neg(Real("2.4"));
    const auto out = check_vor(f, QParams::make(Real(1), Real("0.6"), 60), VorCase::ii, CorrectionForm::as_theorem2,
                               grid, ctx);
    EXPECT_TRUE(out.holds);
    EXPECT_TRUE(out.precision_ok);
    EXPECT_THROW(check_vor(catalog::monomial(2), QParams::make(Real(1), Real("0.6"), 60), VorCase::ii,
                           CorrectionForm::as_theorem2, grid, ctx),
                 HypothesisError);
}

TEST_F(Theory, RateFit) {
    std::vector<RatePoint> pts;
    for (unsigned n : {4u, 9u, 16u, 25u}) {
        pts.push_back(RatePoint{n, Real(n), pow(Real(n), Real("-0.5")), true});
    }
    const auto report = fit_rate(pts, Real("-0.5"));
    EXPECT_LT(abs(report.fitted_slope + Real("0.5")), Real("1e-60"));
    EXPECT_LT(abs(report.window_ratio() - 1), Real("1e-60"));
    EXPECT_TRUE(report.consistent());

    EXPECT_THROW(fit_rate({pts[0], pts[1]}, Real("-0.5")), DomainError);
    pts[2].error = 0;
    EXPECT_THROW(fit_rate(pts, Real("-0.5")), DomainError);
}

TEST_F(Theory, RateEstimatorRefusesDegenerateFunctions) {
    const auto grid = circle_grid(Real("0.6"), 16);
    EXPECT_THROW(estimate_rate(catalog::polynomial({Complex(Real(1)), Complex(Real(2))}, Real(3)), Real(1),
                               Real("0.3"), grid, {40, 50, 60}, VorCase::i, ctx),
                 HypothesisError);
    EXPECT_THROW(estimate_rate(catalog::polynomial({Complex(Real(1))}, Real(3)), Real(1), Real("0.5"), grid,
                               {40, 50, 60}, VorCase::iii, ctx),
                 HypothesisError);
    EXPECT_THROW(estimate_rate(catalog::exp_neg(Real(3)), Real(1), Real("0.5"), grid, {40, 50}, VorCase::iii, ctx),
                 DomainError);
}

TEST_F(Theory, QDifferenceApproachesSecondDerivative) {
    // |(D_q f - f')/(q-1) - z f''/2| shrinks linearly in q - 1.
    for (const auto& f : {catalog::exp_neg(Real(3)), catalog::sine(Real(3)), catalog::inv_shift(Real(2))}) {
        const Complex z(Real("0.4"), Real("0.3"));
        std::vector<Real> ratios;
        for (int k = 2; k <= 6; ++k) {
            const Real h = pow(Real(10), -k);
            const Complex lq = (q_derivative(f, z, 1 + h) - f.closed_form(z, 1)) / h;
            ratios.push_back(abs(lq - z * f.closed_form(z, 2) / Real(2)) / h);
        }
        const auto [lo, hi] = std::minmax_element(ratios.begin(), ratios.end());
        EXPECT_LT(*hi / *lo, Real(3)) << f.name;
    }
}

TEST_F(Theory, PrecisionLimitedNMaxShrinksWithQ) {
    const unsigned at_1 = precision_limited_n_max(Real(1), Real("0.5"), Real("0.55"), ctx, 512);
    const unsigned at_15 = precision_limited_n_max(Real("1.5"), Real("0.5"), Real("0.55"), ctx, 512);
    const unsigned at_2 = precision_limited_n_max(Real(2), Real("0.5"), Real("0.55"), ctx, 512);
    EXPECT_EQ(at_1, 512u);
    EXPECT_GT(at_15, at_2);
    EXPECT_GT(at_2, 10u);
}
