#pragma once

#include "cmjx/intensity.hpp"
#include "cmjx/reproduction.hpp"
#include "cmjx/rng.hpp"
#include "cmjx/stats.hpp"

#include <boost/multiprecision/cpp_int.hpp>

#include <cstdint>
#include <functional>
#include <limits>
#include <vector>

namespace cmjx {

struct GenealogyConfig
{
    double horizon = 1.0;
    std::uint64_t max_gen = 1000;
    std::uint64_t pop_cap = 100000;
    std::vector<double> time_grid;  // Z_k(t) recorded at these times

    void validate() const;
};

struct GenealogyStats
{
    std::vector<double> minima;  // M_0, M_1, ...; +inf for an empty generation
    std::vector<std::vector<std::uint64_t>> gen_counts;  // [generation][time_grid index]
    std::uint64_t total_born = 0;
    bool cap_hit = false;
    std::uint64_t generations_run = 0;  // last non-empty generation

    /// The proxy event for {T <= horizon}.
    bool exploded(std::uint64_t max_gen) const { return cap_hit || generations_run >= max_gen; }
};

/// One individual: birth time S(u) and the key of its Ulam-Harris label.
/// Child j (arrival rank) of u has key derive_key(u.key, j).
struct Individual
{
    double birth;
    std::uint64_t key;
};

using GenerationVisitor = std::function<void(std::uint64_t generation, const std::vector<Individual>&)>;

/// Breadth-first walk of the tree truncated at cfg.horizon. The visitor, if
/// given, sees every generation as it is completed (the last one may be
/// partial when the population cap is hit).
GenealogyStats walk_generations(const ReproductionLaw& law, const GenealogyConfig& cfg, std::uint64_t root_key,
                                const GenerationVisitor& visit = {});

/// The tree is keyed by rng.key(), so equal keys give equal trees.
GenealogyStats simulate(const ReproductionLaw& law, const GenealogyConfig& cfg, Stream& rng);

struct ProxyEstimate
{
    BinomialEstimate p;
    std::uint64_t cap_hits = 0;
    std::uint64_t reached_max_gen = 0;  // without hitting the cap
    std::vector<std::uint64_t> replica_keys;
    std::vector<GenealogyStats> runs;  // filled only when requested
};

/// Replica i uses key derive_key(seed, i).
ProxyEstimate estimate_explosion_proxy(const ReproductionLaw& law, const GenealogyConfig& cfg,
                                       std::uint64_t replicas, std::uint64_t seed, unsigned threads = 0,
                                       bool keep_runs = false);

using BigCount = boost::multiprecision::cpp_int;

struct EnvSpec
{
    enum class Extend
    {
        None,
        Constant,  // repeat the last member
        Cyclic,
    };

    std::vector<OffspringLaw> laws;  // laws[j] drives generation j -> j+1
    Extend extend = Extend::None;

    static EnvSpec constant(OffspringLaw law);

    /// Y_j = xi[0, a_j] for a Poisson process with intensity m.
    static EnvSpec from_intensity(const IntensityModel& m, const std::vector<double>& a);

    /// Law for generation n -> n+1; throws past the end when extend is None.
    const OffspringLaw& at(std::uint64_t n) const;

    void validate() const;
};

struct GwveTrajectory
{
    std::vector<BigCount> z;  // Z_0 = 1, ...
    bool extinct = false;
    bool cap_hit = false;

    bool survived() const { return !extinct; }
};

GwveTrajectory simulate_gwve(const EnvSpec& env, std::uint64_t max_gen, const BigCount& pop_cap, Stream& rng);

/// Total progeny of a Galton-Watson tree; returns cap when the tree reaches it.
std::uint64_t total_progeny(const OffspringLaw& offspring, std::uint64_t cap, Stream& rng);

/// P(Y_inf = n) = P(S_n = n-1)/n by exact truncated convolution.
double dwass_pmf(const OffspringLaw& offspring, std::uint64_t n);

struct CoupledEstimate
{
    ProxyEstimate first;
    ProxyEstimate second;
    std::uint64_t dominance_violations = 0;  // replicas with total_born > total_born'
    std::vector<std::uint64_t> total_born;
    std::vector<std::uint64_t> total_born_prime;
};

/// Runs both Poisson genealogies on identical keyed streams. Since each
/// individual reads its arrival levels from its own key and child keys follow
/// arrival rank, this is the per-individual shared-arrival coupling.
CoupledEstimate coupled_explosion_order(const IntensityModel& m, const IntensityModel& mp,
                                        const GenealogyConfig& cfg, std::uint64_t replicas, std::uint64_t seed,
                                        unsigned threads = 0);

/// Checks mu[0, t] <= mu'[0, t] on [0, horizon]; throws "dominance
/// precondition fails" otherwise.
void check_dominance(const IntensityModel& m, const IntensityModel& mp, double horizon, int points = 2001);

struct TreeCouplingMinima
{
    double root_w = 0.0;
    std::vector<double> bh;   // Bellman-Harris minima M_n
    std::vector<double> iid;  // i.i.d.-displacement minima M'_n
};

/// Builds one labelled tree in which node u owns (Z_u, W_u) and reads it both
/// as Z delta_W (u's children are born W_u after u) and as sum delta_{W_j}
/// (child j is born W_{uj} after u). No horizon truncation.
TreeCouplingMinima tree_coupling_minima(const OffspringLaw& z, const DisplacementLaw& w, std::uint64_t max_gen,
                                        std::uint64_t pop_cap, Stream& rng);

}  // namespace cmjx
