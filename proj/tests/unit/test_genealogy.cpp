#include "cmjx/genealogy.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

using namespace cmjx;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

GenealogyConfig config(double horizon, std::uint64_t max_gen, std::uint64_t cap, std::vector<double> grid = {})
{
    GenealogyConfig c;
    c.horizon = horizon;
    c.max_gen = max_gen;
    c.pop_cap = cap;
    c.time_grid = std::move(grid);
    return c;
}

}  // namespace

TEST(Simulate, SingleChain)
{
    const auto law = ReproductionLaw::bellman_harris(OffspringLaw::deterministic(1), DisplacementLaw::deterministic(1.0));
    Stream s(1);
    const auto st = simulate(law, config(10.0, 1000, 100000), s);
    ASSERT_GE(st.minima.size(), 11u);
    for (std::size_t n = 0; n <= 10; ++n)
        EXPECT_EQ(st.minima[n], double(n));
    EXPECT_EQ(st.total_born, 11u);
    EXPECT_FALSE(st.cap_hit);
}

TEST(Simulate, NoOffspring)
{
    const auto law = ReproductionLaw::iid(OffspringLaw::deterministic(0), DisplacementLaw::uniform(1.0));
    Stream s(2);
    const auto st = simulate(law, config(1.0, 100, 100), s);
    EXPECT_EQ(st.total_born, 1u);
    ASSERT_GE(st.minima.size(), 2u);
    EXPECT_EQ(st.minima[0], 0.0);
    EXPECT_EQ(st.minima[1], kInf);
}

TEST(Simulate, InfiniteIntensityPropagates)
{
    const auto law = ReproductionLaw::poisson(IntensityModel::power(1e308, 2.0));
    Stream s(3);
    EXPECT_THROW(simulate(law, config(10.0, 10, 100), s), DomainError);
}

TEST(Simulate, InvariantsOnRandomRuns)
{
    const std::vector<double> grid = {0.1, 0.25, 0.5, 0.75, 1.0};
    const std::vector<ReproductionLaw> laws = {
        ReproductionLaw::poisson(IntensityModel::linear(1.0)),
        ReproductionLaw::poisson(IntensityModel::power(2.0, 2.0)),
        ReproductionLaw::bellman_harris(OffspringLaw::poisson(1.3), DisplacementLaw::exponential(2.0)),
        ReproductionLaw::iid(OffspringLaw::geometric(0.4), DisplacementLaw::uniform(0.8)),
    };
    for (const auto& law : laws)
        for (std::uint64_t r = 0; r < 300; ++r)
        {
            Stream s(derive_key(4, r));
            const auto st = simulate(law, config(1.0, 200, 5000, grid), s);
            for (std::size_t k = 1; k < st.minima.size(); ++k)
                ASSERT_LE(st.minima[k - 1], st.minima[k]);
            std::uint64_t sum = 0;
            for (const auto& row : st.gen_counts)
            {
                ASSERT_EQ(row.size(), grid.size());
                for (std::size_t j = 1; j < row.size(); ++j)
                    ASSERT_LE(row[j - 1], row[j]);
                sum += row.back();
            }
            if (!st.cap_hit)
            {
                ASSERT_EQ(st.total_born, sum);
            }
        }
}

TEST(Simulate, DoublingHorizonNeverLosesIndividuals)
{
    const std::vector<double> grid = {0.2, 0.4, 0.6};
    for (const auto& m : {IntensityModel::linear(1.0), IntensityModel::log_linear(1.0, 1.0)})
    {
        const auto law = ReproductionLaw::poisson(m);
        for (std::uint64_t r = 0; r < 300; ++r)
        {
            Stream s1(derive_key(5, r)), s2(derive_key(5, r));
            const auto a = simulate(law, config(0.6, 50, 20000, grid), s1);
            const auto b = simulate(law, config(1.2, 50, 20000, grid), s2);
            if (b.cap_hit)
                continue;
            ASSERT_FALSE(a.cap_hit);
            for (std::size_t k = 0; k < a.gen_counts.size(); ++k)
            {
                ASSERT_LT(k, b.gen_counts.size());
                for (std::size_t j = 0; j < grid.size(); ++j)
                    ASSERT_LE(a.gen_counts[k][j], b.gen_counts[k][j]);
            }
        }
    }
}

TEST(Simulate, SameKeySameTree)
{
    const auto law = ReproductionLaw::poisson(IntensityModel::linear(1.0));
    Stream a(99), b(99);
    const auto x = simulate(law, config(1.0, 100, 2000), a);
    const auto y = simulate(law, config(1.0, 100, 2000), b);
    EXPECT_EQ(x.minima, y.minima);
    EXPECT_EQ(x.total_born, y.total_born);
}

TEST(Proxy, NoOffspringGivesZero)
{
    const auto law = ReproductionLaw::iid(OffspringLaw::deterministic(0), DisplacementLaw::uniform(1.0));
    const auto e = estimate_explosion_proxy(law, config(1.0, 100, 100), 1000, 7);
    EXPECT_EQ(e.p.p_hat, 0.0);
    EXPECT_EQ(e.replica_keys.size(), 1000u);
    EXPECT_EQ(e.replica_keys[3], derive_key(7, 3));
}

TEST(Proxy, LinearExplodes)
{
    const auto law = ReproductionLaw::poisson(IntensityModel::linear(1.0));
    const auto e = estimate_explosion_proxy(law, config(1.0, 200, 100000), 1000, 8, 0);
    EXPECT_GT(e.cap_hits, 0u);
    EXPECT_GT(e.p.ci_lo, 0.0);
}

TEST(Proxy, DelayedAtShortHorizonIsRare)
{
    // Only the critical instantaneous cluster can reach the cap here.
    const auto law = ReproductionLaw::poisson(IntensityModel::delayed(0.25));
    const auto e = estimate_explosion_proxy(law, config(0.2, 1000, 100000), 10000, 9, 0);
    // P(Y >= 1e5): exact Dwass terms below 2000, then P(Y = n) ~ n^{-3/2} / sqrt(2 pi).
    double tail = 1.0;
    const auto y = OffspringLaw::poisson(1.0);
    for (std::uint64_t n = 1; n < 2000; ++n)
        tail -= dwass_pmf(y, n);
    for (std::uint64_t n = 2000; n < 100000; ++n)
        tail -= std::pow(double(n), -1.5) / std::sqrt(2.0 * M_PI);
    EXPECT_LT(e.p.p_hat, 1e-2);
    const double q = e.cap_hits / 10000.0;
    EXPECT_NEAR(q, tail, 4.0 * std::sqrt(tail * (1 - tail) / 10000.0));
}

TEST(Proxy, ThreadCountDoesNotChangeResult)
{
    const auto law = ReproductionLaw::poisson(IntensityModel::linear(1.0));
    const auto a = estimate_explosion_proxy(law, config(1.0, 100, 3000), 200, 10, 1);
    const auto b = estimate_explosion_proxy(law, config(1.0, 100, 3000), 200, 10, 4);
    EXPECT_EQ(a.p.successes, b.p.successes);
    EXPECT_EQ(a.cap_hits, b.cap_hits);
}

TEST(GenealogyConfig, Validate)
{
    EXPECT_THROW(config(0.0, 1, 1).validate(), DomainError);
    EXPECT_THROW(config(1.0, 0, 1).validate(), DomainError);
    EXPECT_THROW(config(1.0, 1, 0).validate(), DomainError);
    EXPECT_THROW(config(1.0, 1, 1, {0.5, 0.2}).validate(), DomainError);
    EXPECT_NO_THROW(config(1.0, 1, 1, {0.2, 0.5}).validate());
}

TEST(Gwve, DeterministicEnvironments)
{
    Stream s(11);
    const auto one = simulate_gwve(EnvSpec::constant(OffspringLaw::deterministic(1)), 50, BigCount(1000), s);
    ASSERT_EQ(one.z.size(), 51u);
    for (const auto& z : one.z)
        EXPECT_EQ(z, 1);
    const auto two = simulate_gwve(EnvSpec::constant(OffspringLaw::deterministic(2)), 10, BigCount(1) << 40, s);
    ASSERT_EQ(two.z.size(), 11u);
    EXPECT_EQ(two.z[10], 1024);
    EXPECT_TRUE(two.survived());
}

TEST(Gwve, BigCountPastSixtyFourBits)
{
    Stream s(12);
    const auto t = simulate_gwve(EnvSpec::constant(OffspringLaw::deterministic(2)), 100, BigCount(1) << 120, s);
    ASSERT_EQ(t.z.size(), 101u);
    EXPECT_EQ(t.z[100], BigCount(1) << 100);
}

TEST(Gwve, EnvironmentPastEndErrors)
{
    EnvSpec env;
    env.laws = {OffspringLaw::deterministic(1), OffspringLaw::deterministic(2)};
    EXPECT_EQ(env.at(1).k, 2u);
    EXPECT_THROW(env.at(2), DomainError);
    env.extend = EnvSpec::Extend::Cyclic;
    EXPECT_EQ(env.at(2).k, 1u);
    env.extend = EnvSpec::Extend::Constant;
    EXPECT_EQ(env.at(7).k, 2u);
}

TEST(Gwve, FromIntensityUsesWindowMasses)
{
    const auto env = EnvSpec::from_intensity(IntensityModel::linear(1.0), {0.5, 0.25});
    ASSERT_EQ(env.laws.size(), 2u);
    EXPECT_DOUBLE_EQ(env.laws[0].mean(), 1.5);
    EXPECT_DOUBLE_EQ(env.laws[1].mean(), 1.25);
}

TEST(Gwve, CriticalPoissonSurvival)
{
    const auto env = EnvSpec::constant(OffspringLaw::poisson(1.0));
    const int runs = 10000;
    std::uint64_t alive = 0;
    for (int i = 0; i < runs; ++i)
    {
        Stream s(derive_key(13, i));
        alive += simulate_gwve(env, 1000, BigCount(1) << 60, s).survived() ? 1 : 0;
    }
    const auto b = binomial_estimate(alive, runs);
    const double p = 2.0 / 1000.0;
    EXPECT_NEAR(b.p_hat, p, 3.0 * std::sqrt(p * (1 - p) / runs));
}

TEST(Progeny, TrivialLaws)
{
    Stream s(14);
    EXPECT_EQ(total_progeny(OffspringLaw::deterministic(0), 100, s), 1u);
    EXPECT_EQ(total_progeny(OffspringLaw::deterministic(1), 100, s), 100u);
}

TEST(Dwass, ClosedFormValues)
{
    const auto g = OffspringLaw::geometric(0.5);
    EXPECT_NEAR(dwass_pmf(g, 1), 0.5, 1e-15);
    EXPECT_NEAR(dwass_pmf(g, 2), 0.125, 1e-15);
    EXPECT_NEAR(dwass_pmf(g, 3), 0.0625, 1e-15);
    EXPECT_THROW(dwass_pmf(g, 0), DomainError);
    // Poisson(1): P(Y = n) = n^{n-1} e^{-n} / n!
    const auto p = OffspringLaw::poisson(1.0);
    for (std::uint64_t n = 1; n <= 12; ++n)
        EXPECT_NEAR(dwass_pmf(p, n), std::exp((n - 1.0) * std::log(double(n)) - n - std::lgamma(n + 1.0)), 1e-14);
}

TEST(Dwass, EmpiricalProgenyAgrees)
{
    for (const auto& law : {OffspringLaw::geometric(0.5), OffspringLaw::poisson(1.0)})
    {
        const int n = 1000000;
        std::vector<std::uint64_t> freq(11, 0);
        for (int i = 0; i < n; ++i)
        {
            Stream s(derive_key(15, i));
            const auto y = total_progeny(law, 1000, s);
            if (y <= 10)
                ++freq[y];
        }
        for (std::uint64_t k = 1; k <= 10; ++k)
        {
            const double p = dwass_pmf(law, k);
            EXPECT_NEAR(freq[k] / double(n), p, 4.0 * std::sqrt(p * (1 - p) / n)) << "n=" << k;
        }
    }
}

TEST(Coupled, EqualModelsGiveEqualPaths)
{
    const auto m = IntensityModel::linear(1.0);
    const auto e = coupled_explosion_order(m, m, config(1.0, 100, 2000), 300, 16);
    EXPECT_EQ(e.total_born, e.total_born_prime);
    EXPECT_EQ(e.first.p.successes, e.second.p.successes);
    EXPECT_EQ(e.dominance_violations, 0u);
}

TEST(Coupled, LargerIntensityDominates)
{
    const auto e = coupled_explosion_order(IntensityModel::linear(1.0), IntensityModel::linear(2.0),
                                           config(1.0, 100, 5000), 1000, 17);
    EXPECT_EQ(e.dominance_violations, 0u);
    for (std::size_t i = 0; i < e.total_born.size(); ++i)
        ASSERT_LE(e.total_born[i], e.total_born_prime[i]);
    EXPECT_LE(e.first.p.p_hat, e.second.p.p_hat);
}

TEST(Coupled, DelayedBelowLinear)
{
    const auto e = coupled_explosion_order(IntensityModel::delayed(0.25), IntensityModel::linear(1.0),
                                           config(0.2, 1000, 100000), 1000, 18);
    EXPECT_EQ(e.dominance_violations, 0u);
    EXPECT_LT(e.first.p.p_hat, 1e-2);
}

TEST(Coupled, ReversedOrderRejected)
{
    try
    {
        check_dominance(IntensityModel::linear(2.0), IntensityModel::linear(1.0), 1.0);
        FAIL() << "expected DomainError";
    }
    catch (const DomainError& e)
    {
        EXPECT_STREQ(e.what(), "dominance precondition fails");
    }
}

TEST(TreeCoupling, ShiftIsExactWhenEveryNodeReproduces)
{
    for (std::uint64_t r = 0; r < 200; ++r)
    {
        Stream s(derive_key(19, r));
        const auto t = tree_coupling_minima(OffspringLaw::deterministic(2), DisplacementLaw::exponential(1.0), 12,
                                            100000, s);
        ASSERT_EQ(t.bh.size(), t.iid.size());
        for (std::size_t n = 1; n < t.bh.size(); ++n)
            // Same summands, different association order.
            ASSERT_NEAR(t.bh[n], t.root_w + t.iid[n - 1], 1e-12 * t.bh[n]) << "n=" << n;
    }
}

TEST(TreeCoupling, SandwichWithExtinctBranches)
{
    for (std::uint64_t r = 0; r < 500; ++r)
    {
        Stream s(derive_key(20, r));
        const auto t = tree_coupling_minima(OffspringLaw::poisson(1.5), DisplacementLaw::uniform(1.0), 20, 20000, s);
        for (std::size_t n = 1; n < t.bh.size(); ++n)
        {
            if (std::isinf(t.bh[n]))
                continue;
            ASSERT_GE(t.bh[n], t.root_w + t.iid[n - 1] - 1e-12);
            ASSERT_LE(t.bh[n] - t.root_w, t.iid[n] + 1e-12);
        }
    }
}
