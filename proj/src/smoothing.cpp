#include "cmjx/smoothing.hpp"

#include "cmjx/genealogy.hpp"
#include "cmjx/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace cmjx {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// E(w) = e^-w - 1 + w, accurate for small w.
double e_minus(double w)
{
    if (w < 1e-2)
    {
        double term = w * w / 2.0;
        double sum = 0.0;
        for (int n = 3; n < 12; ++n)
        {
            sum += term;
            term *= -w / n;
        }
        return sum;
    }
    return std::expm1(-w) + w;
}

// Root of (1-a) w + a E(w) = J on [0, J + a], a <= 1. The left side is
// convex, zero at 0 and increasing, so Newton from the right bracket end
// decreases monotonically onto the root; bisection guards the degenerate end.
double cluster_root(double J, double a)
{
    if (J <= 0.0)
        return 0.0;
    double lo = 0.0;
    double hi = J + a;
    double w = hi;
    for (int it = 0; it < 200; ++it)
    {
        const double h = (1.0 - a) * w + a * e_minus(w) - J;
        if (h > 0.0)
            hi = w;
        else
            lo = w;
        const double dh = (1.0 - a) - a * std::expm1(-w);
        double next = dh > 0.0 ? w - h / dh : 0.5 * (lo + hi);
        if (!(next > lo && next < hi))
            next = 0.5 * (lo + hi);
        if (std::abs(next - w) <= 1e-16 * w || hi - lo <= 1e-300)
        {
            w = next;
            break;
        }
        w = next;
    }
    return w;
}

void make_monotone(std::vector<double>& v)
{
    for (std::size_t k = 0; k < v.size(); ++k)
    {
        v[k] = std::clamp(v[k], 0.0, 1.0);
        if (k > 0 && v[k] > v[k - 1])
            v[k] = v[k - 1];
    }
}

double sup_diff(const std::vector<double>& a, const std::vector<double>& b)
{
    double d = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k)
        d = std::max(d, std::abs(a[k] - b[k]));
    return d;
}

Verdict classify(const Profile& phi0, const Profile& fin, bool converged, double triv_tol)
{
    const bool trivial = fin.min_value() > 1.0 - triv_tol;
    if (!converged)
        return Verdict::Undecided;
    if (trivial)
        return Verdict::Trivial;
    // A start that equals 1 somewhere past 0 may be attracted to a shifted
    // fixed point rather than the explosion-time profile.
    for (double v : phi0.values)
        if (v >= 1.0)
            return Verdict::Undecided;
    return Verdict::NonTrivial;
}

}  // namespace

const char* grid_kind_name(GridKind k)
{
    switch (k)
    {
        case GridKind::Geometric: return "geometric";
        case GridKind::Uniform: return "uniform";
        case GridKind::Custom: return "custom";
    }
    return "?";
}

const char* verdict_name(Verdict v)
{
    switch (v)
    {
        case Verdict::NonTrivial: return "NonTrivial";
        case Verdict::Trivial: return "Trivial";
        case Verdict::Undecided: return "Undecided";
    }
    return "?";
}

const char* scheme_name(Scheme s)
{
    return s == Scheme::Reduced ? "reduced" : "direct";
}

std::vector<double> Profile::geometric_grid(double lo, double hi, std::size_t points)
{
    if (!(lo > 0.0 && hi > lo) || points < 2)
        throw DomainError("geometric grid needs 0 < lo < hi and at least 2 points");
    std::vector<double> g(points);
    const double r = std::log(hi / lo) / static_cast<double>(points - 1);
    for (std::size_t i = 0; i < points; ++i)
        g[i] = lo * std::exp(r * static_cast<double>(i));
    g.front() = lo;
    g.back() = hi;
    return g;
}

std::vector<double> Profile::uniform_grid(double h, std::size_t points)
{
    if (!(h > 0.0) || points < 1)
        throw DomainError("uniform grid needs h > 0 and at least 1 point");
    std::vector<double> g(points);
    for (std::size_t i = 0; i < points; ++i)
        g[i] = static_cast<double>(i + 1) * h;
    return g;
}

Profile Profile::on_grid(GridKind kind, std::vector<double> grid, double fill, double step)
{
    Profile p;
    p.kind = kind;
    p.step = step;
    p.values.assign(grid.size(), fill);
    p.grid = std::move(grid);
    p.validate();
    return p;
}

Profile Profile::geometric(double lo, double hi, std::size_t points, double fill)
{
    return on_grid(GridKind::Geometric, geometric_grid(lo, hi, points), fill);
}

Profile Profile::uniform(double h, std::size_t points, double fill)
{
    return on_grid(GridKind::Uniform, uniform_grid(h, points), fill, h);
}

Profile Profile::indicator(double c) const
{
    Profile p = *this;
    for (std::size_t k = 0; k < grid.size(); ++k)
        p.values[k] = grid[k] <= c ? 1.0 : 0.0;
    return p;
}

Profile Profile::with_values(std::vector<double> v) const
{
    if (v.size() != grid.size())
        throw DomainError("grid mismatch");
    Profile p = *this;
    p.values = std::move(v);
    return p;
}

double Profile::operator()(double t) const
{
    if (t <= 0.0)
        return 1.0;
    const auto it = std::lower_bound(grid.begin(), grid.end(), t);
    if (it == grid.end())
        return values.back();
    return values[it - grid.begin()];
}

void Profile::validate() const
{
    if (grid.empty() || grid.size() != values.size())
        throw DomainError("profile: grid and values must be non-empty and of equal length");
    for (std::size_t k = 0; k < grid.size(); ++k)
    {
        if (!(grid[k] > (k ? grid[k - 1] : 0.0)) || !std::isfinite(grid[k]))
            throw DomainError("profile: grid must be positive and strictly ascending");
        if (!(values[k] >= 0.0 && values[k] <= 1.0))
            throw DomainError("profile: values must lie in [0, 1]");
        if (k > 0 && values[k] > values[k - 1])
            throw DomainError("profile: values must be non-increasing");
    }
}

double sup_distance(const Profile& a, const Profile& b)
{
    if (a.grid != b.grid)
        throw DomainError("grid mismatch");
    return sup_diff(a.values, b.values);
}

PoissonKernel::PoissonKernel(const IntensityModel& m, const Profile& shape) : model_(m), shape_(shape)
{
    const auto& g = shape_.grid;
    const std::size_t K = g.size();
    if (!std::isfinite(mu_plus(m, g.back())))
        throw DomainError("intensity not locally finite at grid end");
    d_.resize(K * (K + 1) / 2);
    if (shape_.kind == GridKind::Uniform)
    {
        // Entries depend on k - j only.
        std::vector<double> mu(K + 1);
        for (std::size_t i = 0; i <= K; ++i)
            mu[i] = mu_plus(m, static_cast<double>(i) * shape_.step);
        for (std::size_t k = 0; k < K; ++k)
            for (std::size_t j = 0; j <= k; ++j)
                d_[k * (k + 1) / 2 + j] = mu[k - j + 1] - mu[k - j];
        return;
    }
    for (std::size_t k = 0; k < K; ++k)
    {
        double upper = mu_plus(m, g[k]);  // mu_plus(t_k - t_{-1})
        for (std::size_t j = 0; j <= k; ++j)
        {
            const double lower = j == k ? 0.0 : mu_plus(m, g[k] - g[j]);
            d_[k * (k + 1) / 2 + j] = upper - lower;
            upper = lower;
        }
    }
}

void PoissonKernel::convolve(const std::vector<double>& v, std::vector<double>& J) const
{
    const std::size_t K = shape_.grid.size();
    J.assign(K, 0.0);
    for (std::size_t k = 0; k < K; ++k)
    {
        const double* row = &d_[k * (k + 1) / 2];
        double s = 0.0;
        for (std::size_t j = 0; j <= k; ++j)
            s += (1.0 - v[j]) * row[j];
        J[k] = s;
    }
}

Profile PoissonKernel::apply(const Profile& phi) const
{
    if (phi.grid != shape_.grid)
        throw DomainError("grid mismatch");
    std::vector<double> J;
    convolve(phi.values, J);
    std::vector<double> out(J.size());
    const double a = model_.atom_mass;
    for (std::size_t k = 0; k < J.size(); ++k)
        out[k] = std::exp(-(a * (1.0 - phi.values[k]) + J[k]));
    make_monotone(out);
    return phi.with_values(std::move(out));
}

Profile apply_poisson(const IntensityModel& m, const Profile& phi)
{
    phi.validate();
    return PoissonKernel(m, phi).apply(phi);
}

double poisson_transform_at(const IntensityModel& m, const Profile& phi, double t)
{
    if (!(t >= 0.0))
        throw DomainError("time must be >= 0");
    double J = m.atom_mass * (1.0 - phi(t));
    double prev = 0.0;
    for (std::size_t j = 0; j < phi.size() && prev < t; ++j)
    {
        const double hi = std::min(phi.grid[j], t);
        J += (1.0 - phi.values[j]) * (mu_plus(m, t - prev) - mu_plus(m, t - hi));
        prev = phi.grid[j];
    }
    if (t > phi.grid.back())
        J += (1.0 - phi.values.back()) * mu_plus(m, t - phi.grid.back());
    return std::exp(-J);
}

McProfile apply_mc(const ReproductionLaw& law, const Profile& phi, std::uint64_t samples, std::uint64_t seed,
                   unsigned threads)
{
    if (samples < 1)
        throw DomainError("samples must be >= 1");
    phi.validate();
    law.validate();
    const std::size_t K = phi.size();
    const double horizon = phi.grid.back();
    constexpr std::uint64_t kBlock = 1024;
    const std::uint64_t blocks = (samples + kBlock - 1) / kBlock;
    std::vector<std::vector<double>> sum(blocks), sq(blocks);

    // Fixed blocks summed in order keep the result independent of threads.
    parallel_for(blocks, resolve_threads(threads), [&](std::size_t b) {
        std::vector<double>& s1 = sum[b];
        std::vector<double>& s2 = sq[b];
        s1.assign(K, 0.0);
        s2.assign(K, 0.0);
        std::vector<double> prod(K);
        PointSample ps;
        const std::uint64_t end = std::min<std::uint64_t>(samples, (b + 1) * kBlock);
        for (std::uint64_t s = b * kBlock; s < end; ++s)
        {
            Stream rng(derive_key(seed, s));
            sample_into(law, horizon, rng, ps);
            for (std::size_t k = 0; k < K; ++k)
                prod[k] = ps.zero_count ? std::pow(phi.values[k], static_cast<double>(ps.zero_count)) : 1.0;
            for (double x : ps.positive_times)
            {
                std::size_t cell = 0;
                for (std::size_t k = 0; k < K; ++k)
                {
                    const double u = phi.grid[k] - x;
                    if (u <= 0.0)
                        continue;
                    while (cell + 1 < K && phi.grid[cell] < u)
                        ++cell;
                    prod[k] *= phi.grid[cell] >= u ? phi.values[cell] : phi.values.back();
                }
            }
            for (std::size_t k = 0; k < K; ++k)
            {
                s1[k] += prod[k];
                s2[k] += prod[k] * prod[k];
            }
        }
    });

    McProfile out;
    out.samples = samples;
    std::vector<double> mean(K, 0.0), m2(K, 0.0);
    for (std::uint64_t b = 0; b < blocks; ++b)
        for (std::size_t k = 0; k < K; ++k)
        {
            mean[k] += sum[b][k];
            m2[k] += sq[b][k];
        }
    const double n = static_cast<double>(samples);
    out.half_width.resize(K);
    for (std::size_t k = 0; k < K; ++k)
    {
        mean[k] /= n;
        const double var = samples > 1 ? std::max(0.0, (m2[k] - n * mean[k] * mean[k]) / (n - 1.0)) : 0.0;
        out.half_width[k] = 1.96 * std::sqrt(var / n);
        if (k > 0 && mean[k] > mean[k - 1])
            ++out.monotonicity_violations;
    }
    out.mean = phi;
    out.mean.values = std::move(mean);
    return out;
}

IterationResult iterate(const IntensityModel& m, const Profile& phi0, const IterateOptions& opt)
{
    phi0.validate();
    IterationResult res;
    res.scheme = opt.scheme;
    if (opt.scheme == Scheme::Reduced && m.atom_mass > 1.0)
        res.scheme = Scheme::Direct;  // the cluster equation needs a <= 1
    const PoissonKernel kernel(m, phi0);
    const double a = m.atom_mass;
    std::vector<double> v = phi0.values, nv(v.size()), J;
    for (std::size_t it = 0; it < opt.max_iter; ++it)
    {
        kernel.convolve(v, J);
        for (std::size_t k = 0; k < v.size(); ++k)
        {
            if (res.scheme == Scheme::Reduced)
                nv[k] = std::exp(-cluster_root(J[k], a));
            else
                nv[k] = std::exp(-(a * (1.0 - v[k]) + J[k]));
        }
        make_monotone(nv);
        const double r = sup_diff(v, nv);
        v.swap(nv);
        res.residuals.push_back(r);
        res.iterations = it + 1;
        if (r < opt.tol)
        {
            res.converged = true;
            break;
        }
    }
    res.final = phi0.with_values(v);
    res.transform_residual = sup_distance(kernel.apply(res.final), res.final);
    res.verdict = classify(phi0, res.final, res.converged, opt.triv_tol);
    return res;
}

IterationResult iterate_mc(const ReproductionLaw& law, const Profile& phi0, std::uint64_t samples,
                           std::uint64_t seed, const IterateOptions& opt, unsigned threads)
{
    phi0.validate();
    IterationResult res;
    res.scheme = Scheme::Direct;
    Profile cur = phi0;
    for (std::size_t it = 0; it < opt.max_iter; ++it)
    {
        McProfile mc = apply_mc(law, cur, samples, derive_key(seed, it), threads);
        if (it == 0)
        {
            const double floor = 3.0 * *std::max_element(mc.half_width.begin(), mc.half_width.end());
            if (opt.tol < floor)
                throw DomainError("tolerance below noise floor");
        }
        make_monotone(mc.mean.values);
        const double r = sup_distance(cur, mc.mean);
        cur = std::move(mc.mean);
        res.residuals.push_back(r);
        res.iterations = it + 1;
        if (r < opt.tol)
        {
            res.converged = true;
            break;
        }
    }
    res.final = cur;
    res.transform_residual = res.residuals.empty() ? 0.0 : res.residuals.back();
    res.verdict = classify(phi0, res.final, res.converged, opt.triv_tol);
    return res;
}

Profile shift_profile(const Profile& phi, double c)
{
    phi.validate();
    if (!(c >= 0.0))
        throw DomainError("shift must be >= 0");
    if (c == 0.0)
        return phi;
    if (phi.kind != GridKind::Uniform)
        throw DomainError("shift not grid-aligned: grid is not uniform");
    const double steps = c / phi.step;
    const double m = std::round(steps);
    if (std::abs(steps - m) > 1e-9 * std::max(1.0, m))
        throw DomainError("shift not grid-aligned");
    const std::size_t shift = static_cast<std::size_t>(m);
    Profile out = phi;
    for (std::size_t k = 0; k < phi.size(); ++k)
        out.values[k] = k < shift ? 1.0 : phi.values[k - shift];
    return out;
}

MartingaleDiag martingale_diag(const ReproductionLaw& law, const Profile& phi, double t, std::uint64_t generations,
                               std::uint64_t replicas, std::uint64_t seed, std::uint64_t pop_cap, unsigned threads)
{
    phi.validate();
    if (replicas < 1)
        throw DomainError("replicas must be >= 1");
    if (!(t > 0.0))
        throw DomainError("martingale time must be > 0");
    MartingaleDiag out;
    out.t = t;
    out.replicas = replicas;
    if (law.kind == LawKind::PoissonPP)
        out.fixed_point_residual = sup_distance(apply_poisson(law.model, phi), phi);

    GenealogyConfig cfg;
    cfg.horizon = t;
    cfg.max_gen = std::max<std::uint64_t>(generations, 1);
    cfg.pop_cap = pop_cap;
    const std::size_t G = generations + 1;
    std::vector<double> values(replicas * G);
    std::vector<unsigned char> capped(replicas);
    parallel_for(replicas, resolve_threads(threads), [&](std::size_t r) {
        double* row = &values[r * G];
        std::fill(row, row + G, 1.0);  // empty generations give the empty product
        const GenealogyStats st = walk_generations(law, cfg, derive_key(seed, r),
                                                   [&](std::uint64_t n, const std::vector<Individual>& gen) {
                                                       if (n >= G)
                                                           return;
                                                       double p = 1.0;
                                                       for (const auto& u : gen)
                                                           p *= phi(t - u.birth);
                                                       row[n] = p;
                                                   });
        if (st.cap_hit)
        {
            capped[r] = 1;
            for (std::size_t n = st.generations_run; n < G; ++n)
                row[n] = 0.0;
        }
    });
    out.mean.assign(G, 0.0);
    out.se.assign(G, 0.0);
    for (std::size_t n = 0; n < G; ++n)
    {
        RunningMoments mom;
        for (std::size_t r = 0; r < replicas; ++r)
            mom.add(values[r * G + n]);
        out.mean[n] = mom.mean();
        out.se[n] = mom.standard_error();
    }
    for (auto c : capped)
        out.cap_hits += c;
    return out;
}

}  // namespace cmjx
