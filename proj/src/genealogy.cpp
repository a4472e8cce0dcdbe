#include "cmjx/genealogy.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace cmjx {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void record_generation(const std::vector<Individual>& gen, const GenealogyConfig& cfg, GenealogyStats& st,
                       std::vector<double>& scratch)
{
    double m = kInf;
    for (const auto& u : gen)
        m = std::min(m, u.birth);
    st.minima.push_back(m);
    if (cfg.time_grid.empty())
        return;
    scratch.clear();
    for (const auto& u : gen)
        scratch.push_back(u.birth);
    std::sort(scratch.begin(), scratch.end());
    std::vector<std::uint64_t> row(cfg.time_grid.size());
    for (std::size_t j = 0; j < cfg.time_grid.size(); ++j)
        row[j] = std::upper_bound(scratch.begin(), scratch.end(), cfg.time_grid[j]) - scratch.begin();
    st.gen_counts.push_back(std::move(row));
}

BigCount big_from_double(double x)
{
    return BigCount(std::floor(std::max(0.0, x)));
}

// Poisson(mean) for any mean; past 1e17 the normal limit is used, whose
// relative error there is far below double resolution of the count.
BigCount poisson_big(double mean, Stream& rng)
{
    if (mean < 1e17)
        return BigCount(poisson_variate(mean, rng));
    std::normal_distribution<double> g(0.0, 1.0);
    return big_from_double(std::round(mean + std::sqrt(mean) * g(rng)));
}

// Sum of z i.i.d. draws from law.
BigCount draw_sum(const OffspringLaw& law, const BigCount& z, Stream& rng)
{
    if (z == 0)
        return 0;
    const double zd = z.convert_to<double>();
    switch (law.kind)
    {
        case OffspringKind::Deterministic:
            return z * law.k;
        case OffspringKind::Poisson:
            return poisson_big(zd * law.lambda, rng);
        case OffspringKind::Geometric:
        {
            // Negative binomial as a gamma-mixed Poisson.
            if (law.p == 1.0)
                return 0;
            std::gamma_distribution<double> g(zd, (1.0 - law.p) / law.p);
            return poisson_big(g(rng), rng);
        }
        case OffspringKind::ParetoTail:
            break;
    }
    throw DomainError("environment member has infinite mean");
}

}  // namespace

void GenealogyConfig::validate() const
{
    if (!(horizon > 0.0) || !std::isfinite(horizon))
        throw DomainError("genealogy: horizon must be positive and finite");
    if (max_gen < 1)
        throw DomainError("genealogy: max_gen must be >= 1");
    if (pop_cap < 1)
        throw DomainError("genealogy: pop_cap must be >= 1");
    for (std::size_t i = 0; i < time_grid.size(); ++i)
    {
        if (!(time_grid[i] > 0.0 && time_grid[i] <= horizon))
            throw DomainError("genealogy: time_grid must lie in (0, horizon]");
        if (i > 0 && !(time_grid[i] > time_grid[i - 1]))
            throw DomainError("genealogy: time_grid must be ascending");
    }
}

GenealogyStats walk_generations(const ReproductionLaw& law, const GenealogyConfig& cfg, std::uint64_t root_key,
                                const GenerationVisitor& visit)
{
    cfg.validate();
    GenealogyStats st;
    std::vector<Individual> cur{{0.0, root_key}};
    std::vector<Individual> next;
    std::vector<double> scratch;
    PointSample buf;
    st.total_born = 1;
    record_generation(cur, cfg, st, scratch);
    if (visit)
        visit(0, cur);

    for (std::uint64_t gen = 0; gen < cfg.max_gen && !st.cap_hit; ++gen)
    {
        next.clear();
        for (const auto& u : cur)
        {
            const double window = std::max(0.0, cfg.horizon - u.birth);
            const std::uint64_t room = cfg.pop_cap - st.total_born;
            Stream rng(u.key);
            sample_into(law, window, rng, buf, room + 1);
            std::uint64_t rank = 0;
            auto add = [&](double birth) {
                const std::uint64_t key = derive_key(u.key, rank++);
                if (birth > cfg.horizon)
                    return true;
                if (st.total_born >= cfg.pop_cap)
                {
                    st.cap_hit = true;
                    return false;
                }
                next.push_back({birth, key});
                ++st.total_born;
                return true;
            };
            bool open = true;
            for (std::uint64_t z = 0; open && z < buf.zero_count; ++z)
                open = add(u.birth);
            for (std::size_t k = 0; open && k < buf.positive_times.size(); ++k)
                open = add(u.birth + buf.positive_times[k]);
            if (!open)
                break;
        }
        if (next.empty())
        {
            st.minima.push_back(kInf);
            if (!cfg.time_grid.empty())
                st.gen_counts.emplace_back(cfg.time_grid.size(), 0);
            break;
        }
        cur.swap(next);
        st.generations_run = gen + 1;
        record_generation(cur, cfg, st, scratch);
        if (visit)
            visit(gen + 1, cur);
    }
    return st;
}

GenealogyStats simulate(const ReproductionLaw& law, const GenealogyConfig& cfg, Stream& rng)
{
    law.validate();
    return walk_generations(law, cfg, rng.key());
}

ProxyEstimate estimate_explosion_proxy(const ReproductionLaw& law, const GenealogyConfig& cfg,
                                       std::uint64_t replicas, std::uint64_t seed, unsigned threads,
                                       bool keep_runs)
{
    if (replicas < 1)
        throw DomainError("replicas must be >= 1");
    law.validate();
    cfg.validate();
    ProxyEstimate est;
    est.replica_keys.resize(replicas);
    std::vector<unsigned char> cap(replicas), deep(replicas);
    if (keep_runs)
        est.runs.resize(replicas);
    parallel_for(replicas, resolve_threads(threads), [&](std::size_t i) {
        const std::uint64_t key = derive_key(seed, i);
        est.replica_keys[i] = key;
        GenealogyStats st = walk_generations(law, cfg, key);
        cap[i] = st.cap_hit;
        deep[i] = !st.cap_hit && st.generations_run >= cfg.max_gen;
        if (keep_runs)
            est.runs[i] = std::move(st);
    });
    for (std::size_t i = 0; i < replicas; ++i)
    {
        est.cap_hits += cap[i];
        est.reached_max_gen += deep[i];
    }
    est.p = binomial_estimate(est.cap_hits + est.reached_max_gen, replicas);
    return est;
}

EnvSpec EnvSpec::constant(OffspringLaw law)
{
    EnvSpec e;
    e.laws.push_back(law);
    e.extend = Extend::Constant;
    return e;
}

EnvSpec EnvSpec::from_intensity(const IntensityModel& m, const std::vector<double>& a)
{
    EnvSpec e;
    for (double aj : a)
        e.laws.push_back(OffspringLaw::poisson(mu_total(m, aj)));
    return e;
}

const OffspringLaw& EnvSpec::at(std::uint64_t n) const
{
    if (n < laws.size())
        return laws[n];
    switch (extend)
    {
        case Extend::Constant: return laws.back();
        case Extend::Cyclic: return laws[n % laws.size()];
        case Extend::None: break;
    }
    throw DomainError("environment shorter than requested generations");
}

void EnvSpec::validate() const
{
    if (laws.empty())
        throw DomainError("environment is empty");
    for (const auto& l : laws)
    {
        l.validate();
        if (!std::isfinite(l.mean()))
            throw DomainError("environment member has infinite mean");
    }
}

GwveTrajectory simulate_gwve(const EnvSpec& env, std::uint64_t max_gen, const BigCount& pop_cap, Stream& rng)
{
    env.validate();
    GwveTrajectory tr;
    BigCount z = 1;
    tr.z.push_back(z);
    for (std::uint64_t n = 0; n < max_gen; ++n)
    {
        if (z >= pop_cap)
        {
            tr.cap_hit = true;
            break;
        }
        z = draw_sum(env.at(n), z, rng);
        tr.z.push_back(z);
        if (z == 0)
            break;
    }
    tr.extinct = z == 0;
    return tr;
}

std::uint64_t total_progeny(const OffspringLaw& offspring, std::uint64_t cap, Stream& rng)
{
    std::uint64_t total = 0;
    std::uint64_t pending = 1;
    while (pending > 0)
    {
        if (total >= cap || pending >= cap - total)
            return cap;
        --pending;
        ++total;
        pending += offspring.sample(rng);
    }
    return total;
}

double dwass_pmf(const OffspringLaw& offspring, std::uint64_t n)
{
    if (n == 0)
        throw DomainError("dwass_pmf: n must be >= 1");
    const std::size_t len = n;  // support {0, ..., n-1}
    std::vector<double> f(len);
    for (std::size_t k = 0; k < len; ++k)
        f[k] = offspring.pmf(k);

    auto convolve = [&](const std::vector<double>& a, const std::vector<double>& b) {
        std::vector<double> c(len, 0.0);
        for (std::size_t i = 0; i < len; ++i)
        {
            if (a[i] == 0.0)
                continue;
            for (std::size_t j = 0; i + j < len; ++j)
                c[i + j] += a[i] * b[j];
        }
        return c;
    };

    std::vector<double> acc(len, 0.0);
    acc[0] = 1.0;
    std::vector<double> base = f;
    for (std::uint64_t e = n; e > 0; e >>= 1)
    {
        if (e & 1)
            acc = convolve(acc, base);
        if (e > 1)
            base = convolve(base, base);
    }
    return acc[len - 1] / static_cast<double>(n);
}

void check_dominance(const IntensityModel& m, const IntensityModel& mp, double horizon, int points)
{
    for (int k = 0; k < points; ++k)
    {
        const double t = horizon * k / (points - 1);
        const double a = mu_total(m, t);
        const double b = mu_total(mp, t);
        if (a > b * (1.0 + 1e-12) + 1e-15)
            throw DomainError("dominance precondition fails");
    }
}

CoupledEstimate coupled_explosion_order(const IntensityModel& m, const IntensityModel& mp,
                                        const GenealogyConfig& cfg, std::uint64_t replicas, std::uint64_t seed,
                                        unsigned threads)
{
    if (replicas < 1)
        throw DomainError("replicas must be >= 1");
    cfg.validate();
    check_dominance(m, mp, cfg.horizon);
    const ReproductionLaw la = ReproductionLaw::poisson(m);
    const ReproductionLaw lb = ReproductionLaw::poisson(mp);

    CoupledEstimate out;
    out.total_born.resize(replicas);
    out.total_born_prime.resize(replicas);
    std::vector<unsigned char> ea(replicas), eb(replicas), ca(replicas), cb(replicas);
    out.first.replica_keys.resize(replicas);
    parallel_for(replicas, resolve_threads(threads), [&](std::size_t i) {
        const std::uint64_t key = derive_key(seed, i);
        out.first.replica_keys[i] = key;
        const GenealogyStats a = walk_generations(la, cfg, key);
        const GenealogyStats b = walk_generations(lb, cfg, key);
        out.total_born[i] = a.total_born;
        out.total_born_prime[i] = b.total_born;
        ca[i] = a.cap_hit;
        cb[i] = b.cap_hit;
        ea[i] = a.exploded(cfg.max_gen);
        eb[i] = b.exploded(cfg.max_gen);
    });
    out.second.replica_keys = out.first.replica_keys;
    std::uint64_t na = 0, nb = 0;
    for (std::size_t i = 0; i < replicas; ++i)
    {
        na += ea[i];
        nb += eb[i];
        out.first.cap_hits += ca[i];
        out.second.cap_hits += cb[i];
        out.first.reached_max_gen += ea[i] && !ca[i];
        out.second.reached_max_gen += eb[i] && !cb[i];
        out.dominance_violations += out.total_born[i] > out.total_born_prime[i];
    }
    out.first.p = binomial_estimate(na, replicas);
    out.second.p = binomial_estimate(nb, replicas);
    return out;
}

TreeCouplingMinima tree_coupling_minima(const OffspringLaw& z, const DisplacementLaw& w, std::uint64_t max_gen,
                                        std::uint64_t pop_cap, Stream& rng)
{
    struct Node
    {
        std::uint64_t key;
        double bh;           // birth time in the Z delta_W reading
        double iid_parent;   // parent's birth time in the sum delta_{W_j} reading
    };
    TreeCouplingMinima out;
    std::vector<Node> cur{{rng.key(), 0.0, 0.0}}, next;
    std::uint64_t total = 1;
    for (std::uint64_t gen = 0;; ++gen)
    {
        double m_bh = kInf, m_iid = kInf;
        next.clear();
        bool over = false;
        for (const auto& u : cur)
        {
            Stream s(u.key);
            const std::uint64_t zu = z.sample(s);
            const double wu = w.sample(s);
            const double iid = gen == 0 ? 0.0 : u.iid_parent + wu;
            if (gen == 0)
                out.root_w = wu;
            m_bh = std::min(m_bh, u.bh);
            m_iid = std::min(m_iid, iid);
            if (gen == max_gen || over)
                continue;
            if (zu > pop_cap - std::min(total, pop_cap))
            {
                over = true;
                continue;
            }
            for (std::uint64_t j = 0; j < zu; ++j)
                next.push_back({derive_key(u.key, j), u.bh + wu, iid});
            total += zu;
        }
        out.bh.push_back(m_bh);
        out.iid.push_back(m_iid);
        if (gen == max_gen || over)
            break;
        if (next.empty())
        {
            out.bh.push_back(kInf);
            out.iid.push_back(kInf);
            break;
        }
        cur.swap(next);
    }
    return out;
}

}  // namespace cmjx
