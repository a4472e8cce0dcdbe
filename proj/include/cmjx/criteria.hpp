#pragma once

#include "cmjx/genealogy.hpp"
#include "cmjx/intensity.hpp"
#include "cmjx/reproduction.hpp"
#include "cmjx/smoothing.hpp"

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace cmjx {

enum class CriterionVerdict
{
    Explosive,
    NonExplosive,
    Inconclusive,
};

const char* criterion_verdict_name(CriterionVerdict v);

struct CriterionReport
{
    std::string id;
    CriterionVerdict verdict = CriterionVerdict::Inconclusive;
    std::string summary;
    std::map<std::string, double> evidence;
    std::map<std::string, double> parameters;
    std::map<std::string, bool> hypotheses;
    std::string failed_hypothesis;  // empty unless a hypothesis blocked a verdict
    std::vector<double> trace;      // per-panel or per-block contributions
};

/// Thresholds used to call a tail integral finite or divergent.
struct TailOptions
{
    double quad_tol = 1e-10;     // finite once a doubling panel contributes less
    double diverge_ratio = 0.99; // panel ratio counted as "not decaying"
    int diverge_run = 6;         // consecutive such panels for "divergent"
    int max_doublings = 400;
};

enum class TailOutcome
{
    Finite,
    Divergent,
    Undecided,
};

struct TailIntegral
{
    TailOutcome outcome = TailOutcome::Undecided;
    double value = 0.0;   // partial integral
    double y_start = 0.0;
    std::vector<double> panels;
};

/// int_{y0}^inf f(y) dy / y over doubling panels [L, 2L], each integrated in
/// s = log y by Gauss-Kronrod. f(y) is typically a quantile at level e^{-y}.
TailIntegral tail_integral(const std::function<double(double)>& f, double y0, const TailOptions& opt);

struct IntegralTestOptions
{
    TailOptions tail;
    bool sandwich = false;  // caller asserts phi <= mu_plus <= a phi for some convex phi
};

CriterionReport integral_test(const IntensityModel& m, double eps, const IntegralTestOptions& opt = {});

struct LiminfOptions
{
    std::vector<double> t_grid;  // defaults to geometric 1e-1 .. 1e-12
    double floor = 1e-3;
    bool second_moment = true;   // E[xi(eps)^2] < inf; automatic for Poisson laws
};

CriterionReport liminf_test(const IntensityModel& m, double delta_probe, const LiminfOptions& opt = {});

/// The window sequence a_1, a_2, ... of the GWVE construction.
struct ASequence
{
    enum class Kind
    {
        Explicit,
        LogPower,  // a_j = 1/((j+1) log^{1+r}(j+1))
        Level,     // mu_plus(a_j) = c / j
    };
    Kind kind = Kind::LogPower;
    std::vector<double> values;
    double r = 0.5;
    double c = 2.0;

    static ASequence explicit_values(std::vector<double> v);
    static ASequence log_power(double r);
    static ASequence level(double c);

    /// a_1 .. a_n.
    std::vector<double> generate(const IntensityModel& m, std::size_t n) const;
};

enum class GwveVariant
{
    Exact,
    I,
    II,
    III,
};

const char* gwve_variant_name(GwveVariant v);

struct SeriesOptions
{
    double converge_ratio = 0.9;   // block ratio bound over the last blocks
    int converge_run = 4;
    double converge_last = 1e-4;   // last block relative to the partial sum
    double diverge_ratio = 0.99;
    int diverge_run = 6;
};

enum class SeriesOutcome
{
    Converges,
    Diverges,
    Undecided,
};

struct SeriesVerdict
{
    SeriesOutcome outcome = SeriesOutcome::Undecided;
    double partial = 0.0;
    std::vector<double> blocks;  // sums over [2^b, 2^{b+1})
};

/// Classifies sum_n exp(log_terms[n]) from its dyadic block sums.
SeriesVerdict classify_series(const std::vector<double>& log_terms, const SeriesOptions& opt = {});

CriterionReport gwve_sum_test(const IntensityModel& m, const ASequence& a, GwveVariant variant, double delta_var,
                              std::size_t n_terms, const SeriesOptions& opt = {});

CriterionReport kersting_test(const EnvSpec& env, std::size_t n_terms, const SeriesOptions& opt = {});

struct AminiOptions
{
    TailOptions tail;
    double t_lo = 1e1;
    double t_hi = 1e8;
    int points = 64;
    double large_from = 1e4;  // plump-power is checked for t >= this
};

CriterionReport amini_test(const OffspringLaw& z, const DisplacementLaw& w, double delta_tail, double eps,
                           const AminiOptions& opt = {});

struct QuantileBoundOptions
{
    std::optional<double> moment;  // E[xi(0, t0]^{1+delta}], required for non-Poisson use
    std::optional<double> c;       // override the constant outright
};

/// F_W^{-1}(y) <= mu_plus^{-1}((c y)^{1/q}) with q = (1+delta)/delta and
/// c = E[xi(0, t0]^{1+delta}]^{1/delta}; the moment defaults to the Poisson one.
DisplacementLaw quantile_bound_from_intensity(const IntensityModel& m, double delta_mom, double t0_mom,
                                              const QuantileBoundOptions& opt = {});

/// The sufficiency route through the quantile bound: the tail integral of
/// the bound law is finite => Explosive; otherwise no claim.
CriterionReport quantile_bound_test(const IntensityModel& m, double delta_mom, double t0_mom, double eps,
                                    const QuantileBoundOptions& opt = {}, const TailOptions& tail = {});

/// E[N^p] for N ~ Poisson(lambda).
double poisson_moment(double lambda, double p);

struct PsiBound
{
    double delta = 0.5;
    std::vector<double> a;      // a_1 .. a_N
    std::vector<double> terms;  // mu_plus^{-1}(delta^k)/k, k = 1 .. K
    double t0 = 0.0;
    bool convex = false;

    /// psi(t) = delta^n on (a_{n+1}, a_n], with a_0 = inf. Non-decreasing in t.
    double psi(double t) const;

    struct Check
    {
        double max_violation = 0.0;  // max of F(t) - psi(4t) - slack, or <= 0
        std::size_t points = 0;      // grid points examined
        std::size_t skipped = 0;     // points with 4t at or below a_N
    };

    /// Tests F(t) <= psi(4t) + slack on grid t <= t0, with F = 1 - F_bar.
    Check check(const Profile& f_bar, double slack = 0.0) const;
};

struct PsiOptions
{
    double increment_tol = 1e-12;
    std::size_t max_terms = 10000000;
};

PsiBound psi_bound(const IntensityModel& m, double delta, std::size_t n, const PsiOptions& opt = {});

IntensityModel linearize_intensity(const IntensityModel& m, double n);

}  // namespace cmjx
