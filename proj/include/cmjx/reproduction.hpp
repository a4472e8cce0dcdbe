#pragma once

#include "cmjx/intensity.hpp"
#include "cmjx/rng.hpp"

#include <cstdint>
#include <limits>
#include <memory>
#include <utility>
#include <vector>

namespace cmjx {

enum class OffspringKind
{
    Poisson,
    Geometric,      // P(k) = p (1-p)^k on {0, 1, ...}
    Deterministic,
    ParetoTail,     // P(Z > n) = min(1, (max(n,1)/x_min)^-alpha)
};

struct OffspringLaw
{
    OffspringKind kind = OffspringKind::Deterministic;
    double lambda = 1.0;
    double p = 0.5;
    std::uint64_t k = 0;
    double alpha = 0.5;
    double x_min = 1.0;

    static OffspringLaw poisson(double lambda);
    static OffspringLaw geometric(double p);
    static OffspringLaw deterministic(std::uint64_t k);
    static OffspringLaw pareto(double alpha, double x_min);

    void validate() const;

    bool infinite_mean() const { return kind == OffspringKind::ParetoTail; }
    double mean() const;
    double factorial_moment2() const;  // E[Y(Y-1)]
    double pmf(std::uint64_t n) const;
    double tail(double t) const;       // P(Z > t)

    // Closed-form pieces of the Kersting moment condition.
    double second_moment_ge2() const;  // E[Y^2 1{Y >= 2}]
    double mean_ge2() const;           // E[Y 1{Y >= 2}]
    double mean_given_positive() const;  // E[Y | Y >= 1]

    std::uint64_t sample(Stream& rng) const;
};

/// Largest count any sampler will return.
inline constexpr std::uint64_t kCountClamp = std::uint64_t{1} << 62;

std::uint64_t poisson_variate(double lambda, Stream& rng);

enum class DisplacementKind
{
    Uniform,
    Exponential,
    Deterministic,
    InverseFromIntensity,  // F^-1(y) = mu_plus^-1((c y)^{1/q})
};

struct DisplacementLaw
{
    DisplacementKind kind = DisplacementKind::Deterministic;
    double b = 1.0;
    double rate = 1.0;
    double w = 1.0;
    std::shared_ptr<const IntensityModel> model;
    double c = 1.0;
    double q = 1.0;

    static DisplacementLaw uniform(double b);
    static DisplacementLaw exponential(double rate);
    static DisplacementLaw deterministic(double w);
    static DisplacementLaw from_intensity(IntensityModel m, double c, double q);

    void validate() const;

    double quantile(double y) const;
    /// quantile(exp(-y)) without forming exp(-y).
    double quantile_exp(double y) const;
    double sample(Stream& rng) const { return quantile(rng.uniform()); }
};

enum class LawKind
{
    PoissonPP,
    BellmanHarris,     // Z delta_W
    InstantPlusDelay,  // Y delta_0 + delta_W
    IidDisplacements,  // sum_{j <= Z} delta_{W_j}
};

const char* law_kind_name(LawKind k);

struct ReproductionLaw
{
    LawKind kind = LawKind::PoissonPP;
    IntensityModel model;
    OffspringLaw count;
    DisplacementLaw disp;

    static ReproductionLaw poisson(IntensityModel m);
    static ReproductionLaw bellman_harris(OffspringLaw z, DisplacementLaw w);
    static ReproductionLaw instant_plus_delay(OffspringLaw y, DisplacementLaw w);
    static ReproductionLaw iid(OffspringLaw z, DisplacementLaw w);

    void validate() const;

    /// Law of the number of points at exactly 0.
    OffspringLaw zero_count_law() const;
};

struct PointSample
{
    std::uint64_t zero_count = 0;
    std::vector<double> positive_times;
    bool truncated = false;  // the law could have placed points past the horizon
    bool limited = false;    // stopped early at the caller's point limit

    std::uint64_t size() const { return zero_count + positive_times.size(); }
};

PointSample sample(const ReproductionLaw& law, double horizon, Stream& rng);

/// Like sample() with out-parameter reuse. A window of 0 is allowed (only
/// the atom can contribute); at most point_limit points are produced.
void sample_into(const ReproductionLaw& law, double window, Stream& rng, PointSample& out,
                 std::uint64_t point_limit = std::numeric_limits<std::uint64_t>::max());

/// Both processes read the same unit-rate arrival levels off one stream, so
/// mu <= mu' on [0, horizon] gives pathwise-ordered cumulative counts. Each
/// marginal coincides with sample() on a stream with the same key.
std::pair<PointSample, PointSample> sample_coupled_poisson(const IntensityModel& m, const IntensityModel& mp,
                                                           double horizon, Stream& rng);

void sample_coupled_into(const IntensityModel& m, const IntensityModel& mp, double window, Stream& rng,
                         PointSample& a, PointSample& b,
                         std::uint64_t point_limit = std::numeric_limits<std::uint64_t>::max());

struct ReducedSample
{
    PointSample points;           // zero_count is always 0
    std::uint64_t cluster_size = 0;  // instantly born individuals, root included
    bool capped = false;          // cluster hit cluster_cap
    bool infinite_mean = false;   // critical instantaneous part: E[cluster] = inf
};

/// Merges each instantly born cluster into one individual whose offspring are
/// the positive points of every cluster member.
ReducedSample bramson_reduce(const ReproductionLaw& law, double horizon, Stream& rng,
                             std::uint64_t cluster_cap = 100000);

}  // namespace cmjx
