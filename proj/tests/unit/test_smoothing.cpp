#include "cmjx/smoothing.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <functional>

using namespace cmjx;

namespace {

Profile random_profile(const Profile& shape, Stream& s)
{
    std::vector<double> v(shape.size());
    for (auto& x : v)
        x = s.uniform();
    std::sort(v.begin(), v.end(), std::greater<>());
    return shape.with_values(v);
}

double sup_error_vs_exp(const Profile& p)
{
    double e = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k)
        e = std::max(e, std::abs(p.values[k] - std::exp(-p.grid[k])));
    return e;
}

}  // namespace

TEST(Profile, StepConvention)
{
    const auto p = Profile::on_grid(GridKind::Custom, {0.5, 1.0, 2.0}, 0.0).with_values({0.9, 0.5, 0.2});
    EXPECT_EQ(p(-1.0), 1.0);
    EXPECT_EQ(p(0.0), 1.0);
    EXPECT_EQ(p(0.25), 0.9);
    EXPECT_EQ(p(0.5), 0.9);
    EXPECT_EQ(p(0.75), 0.5);
    EXPECT_EQ(p(3.0), 0.2);
}

TEST(Profile, ValidateRejects)
{
    const auto shape = Profile::uniform(0.1, 3, 1.0);
    EXPECT_THROW(shape.with_values({0.5, 0.6, 0.1}).validate(), DomainError);
    EXPECT_THROW(shape.with_values({1.5, 0.6, 0.1}).validate(), DomainError);
    EXPECT_THROW(Profile::on_grid(GridKind::Custom, {0.2, 0.1}, 1.0).validate(), DomainError);
}

TEST(ApplyPoisson, OneIsFixed)
{
    const auto one = Profile::geometric(1e-4, 2.0, 64, 1.0);
    const auto out = apply_poisson(IntensityModel::linear(1.0), one);
    for (double v : out.values)
        EXPECT_EQ(v, 1.0);
}

TEST(ApplyPoisson, IndicatorUnderLinear)
{
    const auto shape = Profile::uniform(0.05, 40, 1.0);
    const auto out = apply_poisson(IntensityModel::linear(1.0), shape.indicator());
    for (std::size_t k = 0; k < shape.size(); ++k)
        EXPECT_NEAR(out.values[k], std::exp(-(1.0 + shape.grid[k])), 1e-14);
    EXPECT_NEAR(poisson_transform_at(IntensityModel::linear(1.0), shape.indicator(), 1.0), std::exp(-2.0), 1e-15);
}

TEST(ApplyPoisson, DelayedOnlySeesAtom)
{
    const auto shape = Profile::geometric(1e-4, 0.2, 32, 1.0);
    const auto out = apply_poisson(IntensityModel::delayed(0.25), shape.indicator());
    EXPECT_NEAR(out.values.back(), std::exp(-1.0), 1e-15);
}

TEST(ApplyPoisson, GridMismatchErrors)
{
    const auto a = Profile::uniform(0.1, 10, 1.0);
    const auto b = Profile::uniform(0.2, 10, 1.0);
    const PoissonKernel kernel(IntensityModel::linear(1.0), a);
    EXPECT_THROW(kernel.apply(b), DomainError);
}

TEST(ApplyPoisson, SelfMapAndOrderPreserving)
{
    Stream s(1);
    const auto shape = Profile::geometric(1e-3, 2.0, 96, 1.0);
    for (const auto& m : {IntensityModel::linear(1.0), IntensityModel::power(2.0, 0.5), IntensityModel::log_linear(1.0, 1.0),
                          IntensityModel::linear(1.0, 0.4)})
    {
        const PoissonKernel kernel(m, shape);
        for (int i = 0; i < 200; ++i)
        {
            const auto phi = random_profile(shape, s);
            // psi = phi + lift (1 - phi) is again monotone and dominates phi.
            auto psi = phi;
            const double lift = s.uniform();
            for (std::size_t k = 0; k < psi.size(); ++k)
                psi.values[k] = phi.values[k] + lift * (1.0 - phi.values[k]);
            const auto a = kernel.apply(phi);
            const auto b = kernel.apply(psi);
            EXPECT_NO_THROW(a.validate());
            for (std::size_t k = 0; k < a.size(); ++k)
                ASSERT_LE(a.values[k], b.values[k]);
        }
    }
}

TEST(ApplyPoisson, ShiftCommutesExactly)
{
    Stream s(2);
    const auto shape = Profile::uniform(0.01, 200, 1.0);
    const PoissonKernel kernel(IntensityModel::log_linear(1.0, 1.0), shape);
    for (int i = 0; i < 50; ++i)
    {
        const auto phi = random_profile(shape, s);
        for (double c : {0.01, 0.2, 0.37})
        {
            const auto lhs = kernel.apply(shift_profile(phi, c));
            const auto rhs = shift_profile(kernel.apply(phi), c);
            ASSERT_EQ(lhs.values, rhs.values) << "c=" << c;
        }
    }
}

TEST(ApplyPoisson, SmallerIntensityDominates)
{
    Stream s(3);
    const auto shape = Profile::geometric(1e-3, 2.0, 64, 1.0);
    const PoissonKernel k1(IntensityModel::linear(1.0), shape), k2(IntensityModel::linear(2.0), shape);
    for (int i = 0; i < 200; ++i)
    {
        const auto phi = random_profile(shape, s);
        const auto a = k1.apply(phi), b = k2.apply(phi);
        for (std::size_t k = 0; k < a.size(); ++k)
            ASSERT_GE(a.values[k], b.values[k]);
    }
}

TEST(ApplyMc, OneIsExact)
{
    const auto one = Profile::uniform(0.1, 10, 1.0);
    const auto mc = apply_mc(ReproductionLaw::poisson(IntensityModel::linear(1.0)), one, 1000, 4);
    for (double v : mc.mean.values)
        EXPECT_EQ(v, 1.0);
}

TEST(ApplyMc, MatchesClosedForm)
{
    Stream s(5);
    const auto shape = Profile::uniform(0.05, 40, 1.0);
    for (const auto& m : {IntensityModel::linear(1.0), IntensityModel::power(2.0, 2.0)})
    {
        const auto phi = random_profile(shape, s);
        const auto exact = apply_poisson(m, phi);
        const auto mc = apply_mc(ReproductionLaw::poisson(m), phi, 100000, 6, 4);
        for (std::size_t k = 0; k < shape.size(); ++k)
            EXPECT_NEAR(mc.mean.values[k], exact.values[k], 3.0 * mc.half_width[k] + 1e-12) << "k=" << k;
    }
    const auto ind = apply_mc(ReproductionLaw::poisson(IntensityModel::linear(1.0)), shape.indicator(), 100000, 7, 4);
    EXPECT_NEAR(ind.mean.values[19], std::exp(-2.0), 3.0 * ind.half_width[19]);
}

TEST(ApplyMc, BellmanHarrisTwins)
{
    const auto shape = Profile::uniform(0.1, 10, 1.0);
    const auto law = ReproductionLaw::bellman_harris(OffspringLaw::deterministic(2), DisplacementLaw::deterministic(0.5));
    const auto mc = apply_mc(law, shape.indicator(), 100, 8);
    EXPECT_EQ(mc.mean.values[5], 0.0);  // t = 0.6
    EXPECT_EQ(mc.mean.values[3], 1.0);  // t = 0.4, children not yet born
}

TEST(Iterate, LinearConvergesToExponential)
{
    // F(t) = e^{-t} solves the fixed-point equation for Linear(1) with unit atom.
    const auto shape = Profile::geometric(1e-4, 2.0, 512, 1.0);
    const auto r = iterate(IntensityModel::linear(1.0), shape.indicator());
    EXPECT_TRUE(r.converged);
    EXPECT_EQ(r.verdict, Verdict::NonTrivial);
    for (double v : r.final.values)
        EXPECT_LT(v, 1.0);
    for (double x : r.residuals)
        EXPECT_GE(x, 0.0);
    EXPECT_LT(r.final.min_value(), 1.0 - 1e-3);
    EXPECT_LT(sup_error_vs_exp(r.final), 1e-2);
}

TEST(Iterate, RefiningGridShrinksError)
{
    const auto m = IntensityModel::linear(1.0);
    const auto coarse = iterate(m, Profile::geometric(1e-4, 2.0, 128, 1.0).indicator());
    const auto fine = iterate(m, Profile::geometric(1e-4, 2.0, 1024, 1.0).indicator());
    EXPECT_LT(sup_error_vs_exp(fine.final), sup_error_vs_exp(coarse.final));
    // Step evaluation overweights 1 - phi, so estimates sit below the truth.
    for (std::size_t k = 0; k < fine.final.size(); ++k)
        EXPECT_LE(fine.final.values[k], std::exp(-fine.final.grid[k]) + 1e-6);
}

TEST(Iterate, DelayedIsTrivial)
{
    const auto r = iterate(IntensityModel::delayed(0.25), Profile::geometric(1e-4, 0.2, 128, 1.0).indicator());
    EXPECT_EQ(r.verdict, Verdict::Trivial);
}

TEST(Iterate, OneStaysOne)
{
    const auto r = iterate(IntensityModel::linear(1.0), Profile::geometric(1e-4, 2.0, 64, 1.0));
    EXPECT_EQ(r.iterations, 1u);
    EXPECT_EQ(r.verdict, Verdict::Trivial);
}

TEST(Iterate, DirectAndReducedAgree)
{
    const auto shape = Profile::geometric(1e-3, 2.0, 128, 1.0);
    IterateOptions direct;
    direct.scheme = Scheme::Direct;
    direct.tol = 1e-9;
    direct.max_iter = 200000;
    const auto a = iterate(IntensityModel::power(3.0, 0.5), shape.indicator());
    const auto b = iterate(IntensityModel::power(3.0, 0.5), shape.indicator(), direct);
    ASSERT_TRUE(b.converged);
    EXPECT_LT(sup_distance(a.final, b.final), 1e-4);
}

TEST(Iterate, MinimalityFromRandomStarts)
{
    Stream s(9);
    const auto shape = Profile::geometric(1e-4, 2.0, 256, 1.0);
    IterateOptions opt;
    const auto m = IntensityModel::linear(1.0);
    const auto ref = iterate(m, shape.indicator(), opt);
    for (int i = 0; i < 5; ++i)
    {
        const auto r = iterate(m, random_profile(shape, s), opt);
        ASSERT_TRUE(r.converged);
        EXPECT_LT(sup_distance(r.final, ref.final), 2.0 * opt.tol);
    }
}

TEST(Iterate, ShiftedFixedPointIsStable)
{
    const auto shape = Profile::uniform(0.01, 200, 1.0);
    const auto m = IntensityModel::linear(1.0);
    IterateOptions opt;
    const auto f = iterate(m, shape.indicator(), opt);
    ASSERT_TRUE(f.converged);
    const auto shifted = shift_profile(f.final, 0.2);
    const auto r = iterate(m, shifted, opt);
    EXPECT_TRUE(r.converged);
    EXPECT_LT(sup_distance(r.final, shifted), opt.tol * 10);
    EXPECT_EQ(r.verdict, Verdict::Undecided);  // the start equals 1 past 0
}

TEST(IterateMc, RefusesTolBelowNoise)
{
    const auto shape = Profile::uniform(0.1, 10, 1.0);
    const auto law = ReproductionLaw::poisson(IntensityModel::linear(1.0));
    IterateOptions opt;
    opt.tol = 1e-6;
    try
    {
        iterate_mc(law, shape.indicator(), 1000, 10, opt);
        FAIL() << "expected DomainError";
    }
    catch (const DomainError& e)
    {
        EXPECT_STREQ(e.what(), "tolerance below noise floor");
    }
}

TEST(Shift, Examples)
{
    const auto shape = Profile::uniform(0.1, 20, 1.0);
    Stream s(11);
    const auto phi = random_profile(shape, s);
    EXPECT_EQ(shift_profile(phi, 0.0).values, phi.values);
    EXPECT_EQ(shift_profile(shape.indicator(), 0.5).values, shape.indicator(0.5).values);
    EXPECT_THROW(shift_profile(phi, 0.15), DomainError);
    EXPECT_THROW(shift_profile(Profile::geometric(1e-3, 1.0, 10, 1.0), 0.1), DomainError);
}

TEST(Martingale, TrivialCases)
{
    const auto one = Profile::uniform(0.05, 20, 1.0);
    const auto a = martingale_diag(ReproductionLaw::poisson(IntensityModel::linear(1.0)), one, 0.5, 10, 200, 12);
    for (double v : a.mean)
        EXPECT_EQ(v, 1.0);

    Stream s(13);
    const auto phi = random_profile(one, s);
    const auto law = ReproductionLaw::iid(OffspringLaw::deterministic(0), DisplacementLaw::uniform(1.0));
    const auto b = martingale_diag(law, phi, 0.5, 5, 100, 14);
    for (std::size_t n = 1; n < b.mean.size(); ++n)
        EXPECT_EQ(b.mean[n], 1.0);
}

TEST(Martingale, FixedPointGivesFlatMeans)
{
    const auto m = IntensityModel::linear(1.0);
    const auto f = iterate(m, Profile::geometric(1e-4, 2.0, 512, 1.0).indicator());
    const auto d = martingale_diag(ReproductionLaw::poisson(m), f.final, 0.5, 20, 20000, 15, 100000, 4);
    ASSERT_EQ(d.mean.size(), 21u);
    EXPECT_LT(d.fixed_point_residual, 1e-5);
    for (std::size_t n = 1; n < d.mean.size(); ++n)
        EXPECT_NEAR(d.mean[n], d.mean[0], 3.0 * std::hypot(d.se[n], d.se[0]) + 1e-6) << "n=" << n;
}

TEST(Dominance, IteratedProfilesOrdered)
{
    const auto shape = Profile::geometric(1e-4, 2.0, 256, 1.0);
    const auto a = iterate(IntensityModel::linear(1.0), shape.indicator());
    const auto b = iterate(IntensityModel::linear(2.0), shape.indicator());
    for (std::size_t k = 0; k < shape.size(); ++k)
        ASSERT_GE(a.final.values[k], b.final.values[k]);
}
