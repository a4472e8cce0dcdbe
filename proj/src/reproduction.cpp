#include "cmjx/reproduction.hpp"

#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <cmath>
#include <random>

namespace cmjx {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double clamp_count(double x)
{
    return std::min(x, static_cast<double>(kCountClamp));
}

}  // namespace

std::uint64_t poisson_variate(double lambda, Stream& rng)
{
    if (lambda <= 0.0)
        return 0;
    if (lambda < 12.0)
    {
        // Sequential inversion.
        const double u = rng.uniform();
        double pk = std::exp(-lambda);
        double cdf = pk;
        std::uint64_t k = 0;
        while (u > cdf && k < 1000)
        {
            ++k;
            pk *= lambda / static_cast<double>(k);
            cdf += pk;
        }
        return k;
    }
    std::poisson_distribution<long long> d(lambda);
    return static_cast<std::uint64_t>(d(rng));
}

OffspringLaw OffspringLaw::poisson(double lambda)
{
    OffspringLaw l;
    l.kind = OffspringKind::Poisson;
    l.lambda = lambda;
    l.validate();
    return l;
}

OffspringLaw OffspringLaw::geometric(double p)
{
    OffspringLaw l;
    l.kind = OffspringKind::Geometric;
    l.p = p;
    l.validate();
    return l;
}

OffspringLaw OffspringLaw::deterministic(std::uint64_t k)
{
    OffspringLaw l;
    l.kind = OffspringKind::Deterministic;
    l.k = k;
    return l;
}

OffspringLaw OffspringLaw::pareto(double alpha, double x_min)
{
    OffspringLaw l;
    l.kind = OffspringKind::ParetoTail;
    l.alpha = alpha;
    l.x_min = x_min;
    l.validate();
    return l;
}

void OffspringLaw::validate() const
{
    switch (kind)
    {
        case OffspringKind::Poisson:
            if (!(lambda >= 0.0) || !std::isfinite(lambda))
                throw DomainError("invalid offspring: poisson lambda must be finite and >= 0");
            break;
        case OffspringKind::Geometric:
            if (!(p > 0.0 && p <= 1.0))
                throw DomainError("invalid offspring: geometric p must lie in (0, 1]");
            break;
        case OffspringKind::Deterministic:
            break;
        case OffspringKind::ParetoTail:
            if (!(alpha > 0.0 && alpha < 1.0))
                throw DomainError("invalid offspring: pareto alpha must lie in (0, 1)");
            if (!(x_min > 0.0) || !std::isfinite(x_min))
                throw DomainError("invalid offspring: pareto x_min must be finite and > 0");
            break;
    }
}

double OffspringLaw::mean() const
{
    switch (kind)
    {
        case OffspringKind::Poisson: return lambda;
        case OffspringKind::Geometric: return (1.0 - p) / p;
        case OffspringKind::Deterministic: return static_cast<double>(k);
        case OffspringKind::ParetoTail: return kInf;
    }
    return 0.0;
}

double OffspringLaw::factorial_moment2() const
{
    switch (kind)
    {
        case OffspringKind::Poisson: return lambda * lambda;
        case OffspringKind::Geometric: return 2.0 * (1.0 - p) * (1.0 - p) / (p * p);
        case OffspringKind::Deterministic:
        {
            const double kk = static_cast<double>(k);
            return kk * (kk - 1.0);
        }
        case OffspringKind::ParetoTail: return kInf;
    }
    return 0.0;
}

double OffspringLaw::tail(double t) const
{
    if (t < 0.0)
        return 1.0;
    const double n = std::floor(t);
    switch (kind)
    {
        case OffspringKind::Poisson:
            if (lambda == 0.0)
                return 0.0;
            return boost::math::gamma_p(n + 1.0, lambda);
        case OffspringKind::Geometric:
            return std::pow(1.0 - p, n + 1.0);
        case OffspringKind::Deterministic:
            return t < static_cast<double>(k) ? 1.0 : 0.0;
        case OffspringKind::ParetoTail:
            return std::min(1.0, std::pow(std::max(n, 1.0) / x_min, -alpha));
    }
    return 0.0;
}

double OffspringLaw::pmf(std::uint64_t n) const
{
    const double nd = static_cast<double>(n);
    switch (kind)
    {
        case OffspringKind::Poisson:
            if (lambda == 0.0)
                return n == 0 ? 1.0 : 0.0;
            return std::exp(-lambda + nd * std::log(lambda) - std::lgamma(nd + 1.0));
        case OffspringKind::Geometric:
            return p * std::pow(1.0 - p, nd);
        case OffspringKind::Deterministic:
            return n == k ? 1.0 : 0.0;
        case OffspringKind::ParetoTail:
            return (n == 0 ? 1.0 : tail(nd - 1.0)) - tail(nd);
    }
    return 0.0;
}

double OffspringLaw::second_moment_ge2() const
{
    return factorial_moment2() + mean() - pmf(1);
}

double OffspringLaw::mean_ge2() const
{
    return mean() - pmf(1);
}

double OffspringLaw::mean_given_positive() const
{
    return mean() / (1.0 - pmf(0));
}

std::uint64_t OffspringLaw::sample(Stream& rng) const
{
    switch (kind)
    {
        case OffspringKind::Poisson:
            return poisson_variate(lambda, rng);
        case OffspringKind::Geometric:
        {
            if (p == 1.0)
                return 0;
            const double g = std::floor(std::log(rng.uniform()) / std::log1p(-p));
            return static_cast<std::uint64_t>(clamp_count(g));
        }
        case OffspringKind::Deterministic:
            return k;
        case OffspringKind::ParetoTail:
        {
            // Z = min{n : P(Z > n) <= U}.
            const double u = rng.uniform();
            if (tail(0.0) <= u)
                return 0;
            const double x = std::ceil(x_min * std::pow(u, -1.0 / alpha));
            return static_cast<std::uint64_t>(clamp_count(std::max(1.0, x)));
        }
    }
    return 0;
}

DisplacementLaw DisplacementLaw::uniform(double b)
{
    DisplacementLaw d;
    d.kind = DisplacementKind::Uniform;
    d.b = b;
    d.validate();
    return d;
}

DisplacementLaw DisplacementLaw::exponential(double rate)
{
    DisplacementLaw d;
    d.kind = DisplacementKind::Exponential;
    d.rate = rate;
    d.validate();
    return d;
}

DisplacementLaw DisplacementLaw::deterministic(double w)
{
    DisplacementLaw d;
    d.kind = DisplacementKind::Deterministic;
    d.w = w;
    d.validate();
    return d;
}

DisplacementLaw DisplacementLaw::from_intensity(IntensityModel m, double c, double q)
{
    DisplacementLaw d;
    d.kind = DisplacementKind::InverseFromIntensity;
    d.model = std::make_shared<const IntensityModel>(std::move(m));
    d.c = c;
    d.q = q;
    d.validate();
    return d;
}

void DisplacementLaw::validate() const
{
    switch (kind)
    {
        case DisplacementKind::Uniform:
            if (!(b > 0.0) || !std::isfinite(b))
                throw DomainError("invalid displacement: uniform b must be finite and > 0");
            break;
        case DisplacementKind::Exponential:
            if (!(rate > 0.0) || !std::isfinite(rate))
                throw DomainError("invalid displacement: exponential rate must be finite and > 0");
            break;
        case DisplacementKind::Deterministic:
            if (!(w > 0.0) || !std::isfinite(w))
                throw DomainError("invalid displacement: deterministic w must be finite and > 0");
            break;
        case DisplacementKind::InverseFromIntensity:
            if (!model)
                throw DomainError("invalid displacement: missing intensity model");
            if (!(c > 0.0) || !(q > 0.0))
                throw DomainError("invalid displacement: c and q must be > 0");
            break;
    }
}

double DisplacementLaw::quantile(double y) const
{
    if (y <= 0.0)
        return 0.0;
    switch (kind)
    {
        case DisplacementKind::Uniform: return b * y;
        case DisplacementKind::Exponential: return -std::log1p(-y) / rate;
        case DisplacementKind::Deterministic: return w;
        case DisplacementKind::InverseFromIntensity: return quantile_exp(-std::log(y));
    }
    return 0.0;
}

double DisplacementLaw::quantile_exp(double y) const
{
    switch (kind)
    {
        case DisplacementKind::Uniform: return b * std::exp(-y);
        case DisplacementKind::Exponential: return -std::log1p(-std::exp(-y)) / rate;
        case DisplacementKind::Deterministic: return y == kInf ? 0.0 : w;
        case DisplacementKind::InverseFromIntensity:
            // (c e^-y)^{1/q} = exp(-(y - log c)/q)
            return mu_plus_inverse_exp(*model, (y - std::log(c)) / q);
    }
    return 0.0;
}

const char* law_kind_name(LawKind k)
{
    switch (k)
    {
        case LawKind::PoissonPP: return "poisson";
        case LawKind::BellmanHarris: return "bellman_harris";
        case LawKind::InstantPlusDelay: return "instant_plus_delay";
        case LawKind::IidDisplacements: return "iid";
    }
    return "?";
}

ReproductionLaw ReproductionLaw::poisson(IntensityModel m)
{
    ReproductionLaw l;
    l.kind = LawKind::PoissonPP;
    l.model = std::move(m);
    l.validate();
    return l;
}

ReproductionLaw ReproductionLaw::bellman_harris(OffspringLaw z, DisplacementLaw w)
{
    ReproductionLaw l;
    l.kind = LawKind::BellmanHarris;
    l.count = z;
    l.disp = std::move(w);
    l.validate();
    return l;
}

ReproductionLaw ReproductionLaw::instant_plus_delay(OffspringLaw y, DisplacementLaw w)
{
    ReproductionLaw l;
    l.kind = LawKind::InstantPlusDelay;
    l.count = y;
    l.disp = std::move(w);
    l.validate();
    return l;
}

ReproductionLaw ReproductionLaw::iid(OffspringLaw z, DisplacementLaw w)
{
    ReproductionLaw l;
    l.kind = LawKind::IidDisplacements;
    l.count = z;
    l.disp = std::move(w);
    l.validate();
    return l;
}

void ReproductionLaw::validate() const
{
    if (kind == LawKind::PoissonPP)
    {
        model.validate();
        return;
    }
    count.validate();
    disp.validate();
}

OffspringLaw ReproductionLaw::zero_count_law() const
{
    switch (kind)
    {
        case LawKind::PoissonPP: return OffspringLaw::poisson(model.atom_mass);
        case LawKind::InstantPlusDelay: return count;
        default: return OffspringLaw::deterministic(0);
    }
}

namespace {

// Reads arrival levels E_1 < E_2 < ... off rng and hands each to emit() until
// the level passes `top`. emit returns false to stop early.
template <class Emit>
void arrivals(double top, Stream& rng, Emit&& emit)
{
    double level = 0.0;
    for (;;)
    {
        level += rng.exponential();
        if (level > top)
            return;
        if (!emit(level))
            return;
    }
}

double total_top(const IntensityModel& m, double window)
{
    const double top = mu_total(m, window);
    if (!std::isfinite(top))
        throw DomainError("intensity not locally finite at horizon");
    return top;
}

void place(const IntensityModel& m, double level, PointSample& out)
{
    if (level <= m.atom_mass)
        ++out.zero_count;
    else
        out.positive_times.push_back(std::max(mu_plus_inverse(m, level - m.atom_mass),
                                              std::numeric_limits<double>::min()));
}

}  // namespace

void sample_into(const ReproductionLaw& law, double window, Stream& rng, PointSample& out,
                 std::uint64_t point_limit)
{
    if (!(window >= 0.0) || !std::isfinite(window))
        throw DomainError("horizon must be positive and finite");
    out.zero_count = 0;
    out.positive_times.clear();
    out.truncated = false;
    out.limited = false;

    switch (law.kind)
    {
        case LawKind::PoissonPP:
        {
            const auto& m = law.model;
            const double top = total_top(m, window);
            out.truncated = mu_plus(m, window) < mu_plus_sup(m);
            arrivals(top, rng, [&](double level) {
                if (out.size() >= point_limit)
                {
                    out.limited = true;
                    return false;
                }
                place(m, level, out);
                return true;
            });
            return;
        }
        case LawKind::BellmanHarris:
        {
            const std::uint64_t z = law.count.sample(rng);
            if (z == 0)
                return;
            const double w = law.disp.sample(rng);
            out.truncated = true;
            if (w > window)
                return;
            std::uint64_t n = z;
            if (n > point_limit)
            {
                n = point_limit;
                out.limited = true;
            }
            out.positive_times.assign(n, w);
            return;
        }
        case LawKind::InstantPlusDelay:
        {
            std::uint64_t y = law.count.sample(rng);
            if (y > point_limit)
            {
                y = point_limit;
                out.limited = true;
            }
            out.zero_count = y;
            const double w = law.disp.sample(rng);
            out.truncated = true;
            if (w <= window && out.size() < point_limit)
                out.positive_times.push_back(w);
            else if (w <= window)
                out.limited = true;
            return;
        }
        case LawKind::IidDisplacements:
        {
            std::uint64_t z = law.count.sample(rng);
            out.truncated = z > 0;
            for (std::uint64_t j = 0; j < z; ++j)
            {
                const double w = law.disp.sample(rng);
                if (w > window)
                    continue;
                if (out.positive_times.size() >= point_limit)
                {
                    out.limited = true;
                    break;
                }
                out.positive_times.push_back(w);
            }
            std::sort(out.positive_times.begin(), out.positive_times.end());
            return;
        }
    }
}

PointSample sample(const ReproductionLaw& law, double horizon, Stream& rng)
{
    if (!(horizon > 0.0))
        throw DomainError("horizon must be positive and finite");
    PointSample s;
    sample_into(law, horizon, rng, s);
    return s;
}

void sample_coupled_into(const IntensityModel& m, const IntensityModel& mp, double window, Stream& rng,
                         PointSample& a, PointSample& b, std::uint64_t point_limit)
{
    if (!(window >= 0.0) || !std::isfinite(window))
        throw DomainError("horizon must be positive and finite");
    const double top_a = total_top(m, window);
    const double top_b = total_top(mp, window);
    for (PointSample* s : {&a, &b})
    {
        s->zero_count = 0;
        s->positive_times.clear();
        s->limited = false;
    }
    a.truncated = mu_plus(m, window) < mu_plus_sup(m);
    b.truncated = mu_plus(mp, window) < mu_plus_sup(mp);
    bool open_a = true;
    bool open_b = true;
    arrivals(std::max(top_a, top_b), rng, [&](double level) {
        if (open_a && level <= top_a)
        {
            if (a.size() >= point_limit)
            {
                a.limited = true;
                open_a = false;
            }
            else
                place(m, level, a);
        }
        if (open_b && level <= top_b)
        {
            if (b.size() >= point_limit)
            {
                b.limited = true;
                open_b = false;
            }
            else
                place(mp, level, b);
        }
        return open_a || open_b;
    });
}

std::pair<PointSample, PointSample> sample_coupled_poisson(const IntensityModel& m, const IntensityModel& mp,
                                                           double horizon, Stream& rng)
{
    if (!(horizon > 0.0))
        throw DomainError("horizon must be positive and finite");
    std::pair<PointSample, PointSample> out;
    sample_coupled_into(m, mp, horizon, rng, out.first, out.second);
    return out;
}

ReducedSample bramson_reduce(const ReproductionLaw& law, double horizon, Stream& rng,
                             std::uint64_t cluster_cap)
{
    if (!(horizon > 0.0))
        throw DomainError("horizon must be positive and finite");
    const OffspringLaw inst = law.zero_count_law();
    const double m0 = inst.mean();
    if (m0 > 1.0)
        throw DomainError("instantaneous explosion regime");
    if (inst.pmf(1) == 1.0)
        throw DomainError("instantaneous part is an infinite chain");

    ReducedSample out;
    out.infinite_mean = m0 == 1.0;
    PointSample one;
    std::uint64_t pending = 1;
    while (pending > 0)
    {
        if (out.cluster_size >= cluster_cap)
        {
            out.capped = true;
            break;
        }
        --pending;
        Stream member = rng.split(out.cluster_size);
        ++out.cluster_size;
        sample_into(law, horizon, member, one);
        pending += one.zero_count;
        out.points.truncated = out.points.truncated || one.truncated;
        out.points.positive_times.insert(out.points.positive_times.end(), one.positive_times.begin(),
                                         one.positive_times.end());
    }
    std::sort(out.points.positive_times.begin(), out.points.positive_times.end());
    return out;
}

}  // namespace cmjx
