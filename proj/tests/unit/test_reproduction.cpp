#include "cmjx/genealogy.hpp"
#include "cmjx/reproduction.hpp"
#include "cmjx/stats.hpp"

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/poisson.hpp>
#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

using namespace cmjx;

namespace {

std::uint64_t count_le(const PointSample& s, double t)
{
    return s.zero_count + static_cast<std::uint64_t>(
                              std::upper_bound(s.positive_times.begin(), s.positive_times.end(), t) -
                              s.positive_times.begin());
}

}  // namespace

TEST(OffspringLaw, ClosedFormMoments)
{
    const auto p = OffspringLaw::poisson(2.0);
    EXPECT_DOUBLE_EQ(p.mean(), 2.0);
    EXPECT_DOUBLE_EQ(p.factorial_moment2(), 4.0);
    const auto g = OffspringLaw::geometric(0.5);
    EXPECT_DOUBLE_EQ(g.mean(), 1.0);
    EXPECT_DOUBLE_EQ(g.pmf(0), 0.5);
    EXPECT_DOUBLE_EQ(g.pmf(2), 0.125);
    EXPECT_DOUBLE_EQ(g.factorial_moment2(), 2.0);
    const auto d = OffspringLaw::deterministic(3);
    EXPECT_DOUBLE_EQ(d.factorial_moment2(), 6.0);
    const auto z = OffspringLaw::pareto(0.5, 1.0);
    EXPECT_TRUE(z.infinite_mean());
    EXPECT_TRUE(std::isinf(z.mean()));
    EXPECT_DOUBLE_EQ(z.tail(100.0), 0.1);
    EXPECT_DOUBLE_EQ(z.tail(0.0), 1.0);
}

TEST(OffspringLaw, MomentPiecesAgreeWithPmfSums)
{
    for (const auto& law : {OffspringLaw::poisson(0.7), OffspringLaw::poisson(3.0), OffspringLaw::geometric(0.3)})
    {
        double s2 = 0.0, s1 = 0.0;
        for (std::uint64_t n = 2; n < 400; ++n)
        {
            s2 += double(n) * n * law.pmf(n);
            s1 += double(n) * law.pmf(n);
        }
        EXPECT_NEAR(law.second_moment_ge2(), s2, 1e-10 * s2);
        EXPECT_NEAR(law.mean_ge2(), s1, 1e-10 * s1);
        EXPECT_NEAR(law.mean_given_positive(), law.mean() / (1.0 - law.pmf(0)), 1e-12);
    }
}

TEST(OffspringLaw, PoissonTailMatchesBoost)
{
    const auto law = OffspringLaw::poisson(3.2);
    boost::math::poisson_distribution<> ref(3.2);
    for (double t : {0.0, 1.0, 2.5, 7.0})
        EXPECT_NEAR(law.tail(t), cdf(complement(ref, std::floor(t))), 1e-13);
}

TEST(OffspringLaw, SampleMeansMatch)
{
    for (const auto& law : {OffspringLaw::poisson(0.8), OffspringLaw::poisson(40.0), OffspringLaw::geometric(0.25)})
    {
        Stream s(21);
        RunningMoments m;
        for (int i = 0; i < 100000; ++i)
            m.add(static_cast<double>(law.sample(s)));
        EXPECT_NEAR(m.mean(), law.mean(), 4.0 * m.standard_error());
    }
}

TEST(OffspringLaw, ParetoTailFrequency)
{
    const auto law = OffspringLaw::pareto(0.5, 1.0);
    Stream s(22);
    const int n = 100000;
    int above = 0;
    for (int i = 0; i < n; ++i)
        above += law.sample(s) > 100 ? 1 : 0;
    const double p = law.tail(100.0);
    EXPECT_NEAR(above / double(n), p, 4.0 * std::sqrt(p * (1 - p) / n));
}

TEST(Displacement, Quantiles)
{
    EXPECT_DOUBLE_EQ(DisplacementLaw::uniform(2.0).quantile(0.25), 0.5);
    EXPECT_DOUBLE_EQ(DisplacementLaw::deterministic(0.7).quantile(0.9), 0.7);
    EXPECT_NEAR(DisplacementLaw::exponential(2.0).quantile(1.0 - std::exp(-1.0)), 0.5, 1e-15);
    const auto inv = DisplacementLaw::from_intensity(IntensityModel::linear(1.0), 1.0, 2.0);
    EXPECT_NEAR(inv.quantile(0.25), 0.5, 1e-15);
    EXPECT_EQ(inv.quantile(0.0), 0.0);
    EXPECT_NEAR(inv.quantile_exp(4.0), std::exp(-2.0), 1e-15);
}

TEST(Sample, PoissonLinearCounts)
{
    const auto law = ReproductionLaw::poisson(IntensityModel::linear(1.0));
    RunningMoments pos;
    std::uint64_t no_zero = 0;
    const int n = 100000;
    for (int i = 0; i < n; ++i)
    {
        Stream s(derive_key(31, i));
        const auto p = sample(law, 1.0, s);
        pos.add(static_cast<double>(p.positive_times.size()));
        no_zero += p.zero_count == 0 ? 1 : 0;
    }
    EXPECT_NEAR(pos.mean(), 1.0, 3.0 * pos.standard_error());
    const auto b = binomial_estimate(no_zero, n);
    EXPECT_NEAR(b.p_hat, std::exp(-1.0), 3.0 * b.se);
}

TEST(Sample, BellmanHarrisDeterministic)
{
    const auto law = ReproductionLaw::bellman_harris(OffspringLaw::deterministic(3), DisplacementLaw::deterministic(0.5));
    Stream s(1);
    const auto p = sample(law, 1.0, s);
    EXPECT_EQ(p.zero_count, 0u);
    EXPECT_EQ(p.positive_times, (std::vector<double>{0.5, 0.5, 0.5}));
}

TEST(Sample, ZeroOffspringIsEmpty)
{
    const auto law = ReproductionLaw::iid(OffspringLaw::deterministic(0), DisplacementLaw::uniform(1.0));
    Stream s(2);
    const auto p = sample(law, 1.0, s);
    EXPECT_EQ(p.size(), 0u);
}

TEST(Sample, Errors)
{
    const auto law = ReproductionLaw::poisson(IntensityModel::linear(1.0));
    Stream s(3);
    EXPECT_THROW(sample(law, 0.0, s), DomainError);
    EXPECT_THROW(sample(law, -1.0, s), DomainError);
    const auto huge = ReproductionLaw::poisson(IntensityModel::power(1e308, 2.0));
    try
    {
        sample(huge, 10.0, s);
        FAIL() << "expected DomainError";
    }
    catch (const DomainError& e)
    {
        EXPECT_STREQ(e.what(), "intensity not locally finite at horizon");
    }
}

TEST(Sample, SortedAndInsideWindow)
{
    const std::vector<ReproductionLaw> laws = {
        ReproductionLaw::poisson(IntensityModel::power(3.0, 0.5)),
        ReproductionLaw::iid(OffspringLaw::poisson(4.0), DisplacementLaw::exponential(1.0)),
        ReproductionLaw::instant_plus_delay(OffspringLaw::geometric(0.5), DisplacementLaw::uniform(2.0)),
    };
    for (const auto& law : laws)
        for (int i = 0; i < 2000; ++i)
        {
            Stream s(derive_key(4, i));
            const auto p = sample(law, 1.5, s);
            ASSERT_TRUE(std::is_sorted(p.positive_times.begin(), p.positive_times.end()));
            for (double t : p.positive_times)
            {
                ASSERT_GT(t, 0.0);
                ASSERT_LE(t, 1.5);
            }
        }
}

TEST(Sample, SameKeySameSample)
{
    const auto law = ReproductionLaw::poisson(IntensityModel::linear(5.0));
    Stream a(77), b(77);
    const auto x = sample(law, 2.0, a);
    const auto y = sample(law, 2.0, b);
    EXPECT_EQ(x.zero_count, y.zero_count);
    EXPECT_EQ(x.positive_times, y.positive_times);
}

TEST(Sample, WindowCountsArePoissonChiSquare)
{
    // Power(1, 2) on (0, 0.5] and (0.5, 1]: means 0.25 and 0.75.
    const auto law = ReproductionLaw::poisson(IntensityModel::power(1.0, 2.0));
    const int n = 10000;
    const std::vector<std::pair<double, double>> windows = {{0.0, 0.5}, {0.5, 1.0}};
    for (const auto& [lo, hi] : windows)
    {
        const double mean = hi * hi - lo * lo;
        std::vector<double> obs(4, 0.0);
        for (int i = 0; i < n; ++i)
        {
            Stream s(derive_key(5, i));
            const auto p = sample(law, 1.0, s);
            const auto c = count_le(p, hi) - count_le(p, lo);
            obs[std::min<std::uint64_t>(c, 3)] += 1.0;
        }
        boost::math::poisson_distribution<> ref(mean);
        double chi2 = 0.0;
        for (int k = 0; k < 4; ++k)
        {
            const double p = k < 3 ? pdf(ref, k) : cdf(complement(ref, 2));
            const double e = n * p;
            chi2 += (obs[k] - e) * (obs[k] - e) / e;
        }
        const double crit = quantile(boost::math::chi_squared_distribution<>(3), 0.99);
        EXPECT_LT(chi2, crit) << "window (" << lo << ", " << hi << "]";
    }
}

TEST(Coupled, DominanceIsPathwise)
{
    const auto m = IntensityModel::linear(1.0);
    const auto mp = IntensityModel::linear(2.0);
    for (int i = 0; i < 10000; ++i)
    {
        Stream s(derive_key(6, i));
        const auto [a, b] = sample_coupled_poisson(m, mp, 1.0, s);
        ASSERT_LE(a.zero_count, b.zero_count);
        for (double t : a.positive_times)
            ASSERT_LE(count_le(a, t), count_le(b, t));
        ASSERT_LE(a.size(), b.size());
    }
}

TEST(Coupled, IdenticalModelsGiveIdenticalSamples)
{
    const auto m = IntensityModel::log_linear(1.0, 1.0);
    for (int i = 0; i < 100; ++i)
    {
        Stream s(derive_key(7, i));
        const auto [a, b] = sample_coupled_poisson(m, m, 1.0, s);
        ASSERT_EQ(a.zero_count, b.zero_count);
        ASSERT_EQ(a.positive_times, b.positive_times);
    }
}

TEST(Coupled, MarginalsAreCorrectWhenOrdersCross)
{
    const auto m = IntensityModel::linear(1.0);
    const auto mp = IntensityModel::power(1.0, 2.0);
    RunningMoments ca, cb;
    for (int i = 0; i < 20000; ++i)
    {
        Stream s(derive_key(8, i));
        const auto [a, b] = sample_coupled_poisson(m, mp, 2.0, s);
        ca.add(static_cast<double>(a.positive_times.size()));
        cb.add(static_cast<double>(b.positive_times.size()));
    }
    EXPECT_NEAR(ca.mean(), 2.0, 3.0 * ca.standard_error());
    EXPECT_NEAR(cb.mean(), 4.0, 3.0 * cb.standard_error());
}

TEST(Coupled, MarginalEqualsUncoupledSampleWithSameKey)
{
    const auto m = IntensityModel::linear(1.0);
    const auto mp = IntensityModel::linear(3.0);
    for (int i = 0; i < 200; ++i)
    {
        Stream s(derive_key(9, i)), s1(derive_key(9, i)), s2(derive_key(9, i));
        const auto [a, b] = sample_coupled_poisson(m, mp, 1.0, s);
        const auto x = sample(ReproductionLaw::poisson(m), 1.0, s1);
        const auto y = sample(ReproductionLaw::poisson(mp), 1.0, s2);
        ASSERT_EQ(a.positive_times, x.positive_times);
        ASSERT_EQ(b.positive_times, y.positive_times);
    }
}

TEST(Bramson, NoInstantaneousBirthsKeepsOneCopy)
{
    const auto law = ReproductionLaw::iid(OffspringLaw::deterministic(2), DisplacementLaw::deterministic(0.3));
    Stream s(10);
    const auto r = bramson_reduce(law, 1.0, s);
    EXPECT_EQ(r.cluster_size, 1u);
    EXPECT_EQ(r.points.zero_count, 0u);
    EXPECT_EQ(r.points.positive_times, (std::vector<double>{0.3, 0.3}));
}

TEST(Bramson, SupercriticalInstantaneousPartErrors)
{
    const auto law = ReproductionLaw::poisson(IntensityModel::linear(1.0, 1.5));
    Stream s(11);
    try
    {
        bramson_reduce(law, 1.0, s);
        FAIL() << "expected DomainError";
    }
    catch (const DomainError& e)
    {
        EXPECT_STREQ(e.what(), "instantaneous explosion regime");
    }
}

TEST(Bramson, CriticalPoissonFlagsInfiniteMean)
{
    const auto law = ReproductionLaw::poisson(IntensityModel::linear(1.0));
    // The running mean keeps drifting: compare halves of a heavy-tailed sample.
    std::vector<double> counts;
    bool flagged = true;
    for (int i = 0; i < 10000; ++i)
    {
        Stream s(derive_key(12, i));
        const auto r = bramson_reduce(law, 1.0, s, 100000);
        flagged = flagged && r.infinite_mean;
        counts.push_back(static_cast<double>(r.points.positive_times.size()));
    }
    EXPECT_TRUE(flagged);
    std::sort(counts.begin(), counts.end());
    // Cluster size has tail ~ n^{-1/2}, so the maximum dwarfs the median.
    EXPECT_GT(counts.back(), 100.0 * std::max(1.0, counts[counts.size() / 2]));
}

TEST(Bramson, InstantPlusDelayMatchesDwass)
{
    const auto y = OffspringLaw::geometric(0.5);
    const auto law = ReproductionLaw::instant_plus_delay(y, DisplacementLaw::deterministic(1.0));
    const int n = 1000000;
    std::vector<std::uint64_t> freq(11, 0);
    for (int i = 0; i < n; ++i)
    {
        Stream s(derive_key(13, i));
        const auto r = bramson_reduce(law, 1.0, s, 1000);
        const auto k = r.points.positive_times.size();
        if (k <= 10)
            ++freq[k];
    }
    for (std::uint64_t k = 1; k <= 10; ++k)
    {
        const double p = dwass_pmf(y, k);
        const auto b = binomial_estimate(freq[k], n);
        EXPECT_NEAR(b.p_hat, p, 4.0 * std::sqrt(p * (1 - p) / n)) << "n=" << k;
    }
}
