#include "cmjx/criteria.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace cmjx {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Neumaier
{
    double sum = 0.0;
    double comp = 0.0;

    void add(double x)
    {
        const double t = sum + x;
        if (std::abs(sum) >= std::abs(x))
            comp += (sum - t) + x;
        else
            comp += (x - t) + sum;
        sum = t;
    }
    double value() const { return sum + comp; }
};

CriterionReport make_report(const char* id)
{
    CriterionReport r;
    r.id = id;
    return r;
}

void blocked(CriterionReport& r, const std::string& hypothesis)
{
    r.verdict = CriterionVerdict::Inconclusive;
    r.failed_hypothesis = hypothesis;
    r.summary = "hypothesis not met: " + hypothesis;
}

const char* tail_outcome_name(TailOutcome o)
{
    switch (o)
    {
        case TailOutcome::Finite: return "finite";
        case TailOutcome::Divergent: return "divergent";
        case TailOutcome::Undecided: return "undecided";
    }
    return "?";
}

const char* series_outcome_name(SeriesOutcome o)
{
    switch (o)
    {
        case SeriesOutcome::Converges: return "converges";
        case SeriesOutcome::Diverges: return "diverges";
        case SeriesOutcome::Undecided: return "undecided";
    }
    return "?";
}

void record_tail(CriterionReport& r, const TailIntegral& ti)
{
    r.evidence["integral"] = ti.value;
    r.evidence["y_start"] = ti.y_start;
    r.evidence["doublings"] = static_cast<double>(ti.panels.size());
    r.evidence["last_panel"] = ti.panels.empty() ? 0.0 : ti.panels.back();
    r.trace = ti.panels;
}

void echo_tail(CriterionReport& r, const TailOptions& t)
{
    r.parameters["quad_tol"] = t.quad_tol;
    r.parameters["diverge_ratio"] = t.diverge_ratio;
    r.parameters["diverge_run"] = t.diverge_run;
    r.parameters["max_doublings"] = t.max_doublings;
}

void echo_series(CriterionReport& r, const SeriesOptions& s)
{
    r.parameters["converge_ratio"] = s.converge_ratio;
    r.parameters["converge_run"] = s.converge_run;
    r.parameters["converge_last"] = s.converge_last;
    r.parameters["diverge_ratio"] = s.diverge_ratio;
    r.parameters["diverge_run"] = s.diverge_run;
}

// Start of the y-integral: |log eps|, moved right until the level e^{-y}
// is attained by a bounded mu_plus.
double attained_start(const std::function<double(double)>& f, double y0)
{
    for (int i = 0; i < 64; ++i)
    {
        try
        {
            const double v = f(y0);
            if (std::isfinite(v))
                return y0;
        }
        catch (const DomainError&)
        {
        }
        y0 *= 2.0;
    }
    throw DomainError("quantile level never attained");
}

void check_summable(const std::vector<double>& a)
{
    for (std::size_t j = 0; j < a.size(); ++j)
    {
        if (!(a[j] > 0.0) || !std::isfinite(a[j]))
            throw DomainError("sequence not summable: a_j must be positive and finite");
        if (j > 0 && a[j] > a[j - 1])
            throw DomainError("sequence not summable: a_j must be non-increasing");
    }
    // Cauchy condensation: b_k = 2^k a_{2^k} must decay faster than 1/k.
    std::vector<double> lk, lb;
    for (std::size_t k = 1; (std::size_t{1} << k) <= a.size(); ++k)
    {
        const double ak = a[(std::size_t{1} << k) - 1];
        lk.push_back(std::log(static_cast<double>(k)));
        lb.push_back(k * std::log(2.0) + std::log(ak));
    }
    if (lk.size() < 6)
        throw DomainError("sequence not summable: too few terms to check");
    const std::size_t from = lk.size() / 2;
    const double n = static_cast<double>(lk.size() - from);
    double mx = 0.0, my = 0.0;
    for (std::size_t i = from; i < lk.size(); ++i)
    {
        mx += lk[i] / n;
        my += lb[i] / n;
    }
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = from; i < lk.size(); ++i)
    {
        sxy += (lk[i] - mx) * (lb[i] - my);
        sxx += (lk[i] - mx) * (lk[i] - mx);
    }
    const double slope = sxy / sxx;
    if (!(slope < -1.02))
        throw DomainError("sequence not summable");
}

}  // namespace

const char* criterion_verdict_name(CriterionVerdict v)
{
    switch (v)
    {
        case CriterionVerdict::Explosive: return "Explosive";
        case CriterionVerdict::NonExplosive: return "NonExplosive";
        case CriterionVerdict::Inconclusive: return "Inconclusive";
    }
    return "?";
}

TailIntegral tail_integral(const std::function<double(double)>& f, double y0, const TailOptions& opt)
{
    using boost::math::quadrature::gauss_kronrod;
    TailIntegral out;
    out.y_start = y0;
    Neumaier total;
    int run = 0;
    double lo = std::log(y0);
    const double step = std::log(2.0);
    for (int i = 0; i < opt.max_doublings; ++i)
    {
        auto g = [&](double s) { return f(std::exp(s)); };
        double err = 0.0;
        const double panel = gauss_kronrod<double, 61>::integrate(g, lo, lo + step, 15, 1e-12, &err);
        out.panels.push_back(panel);
        total.add(panel);
        lo += step;
        if (panel < opt.quad_tol)
        {
            out.outcome = TailOutcome::Finite;
            break;
        }
        if (i > 0)
        {
            run = panel >= opt.diverge_ratio * out.panels[i - 1] ? run + 1 : 0;
            if (run >= opt.diverge_run)
            {
                out.outcome = TailOutcome::Divergent;
                break;
            }
        }
        if (!std::isfinite(std::exp(lo + step)))
            break;
    }
    out.value = total.value();
    return out;
}

CriterionReport integral_test(const IntensityModel& m, double eps, const IntegralTestOptions& opt)
{
    if (!(eps > 0.0 && eps < 1.0))
        throw DomainError("eps must lie in (0, 1)");
    m.validate();

    CriterionReport r = make_report("integral");
    r.parameters["eps"] = eps;
    echo_tail(r, opt.tail);
    const AssumptionReport ar = check_assumptions(m);
    r.hypotheses["A0"] = ar.a0;
    r.hypotheses["A1"] = ar.a1;
    r.hypotheses["A2"] = ar.a2;
    r.hypotheses["convex_near_zero"] = ar.convex;
    r.hypotheses["sandwich"] = opt.sandwich;
    r.evidence["convex_worst"] = ar.convex_worst;
    r.evidence["atom_mass"] = m.atom_mass;

    if (m.atom_mass > 1.0)
    {
        r.verdict = CriterionVerdict::Explosive;
        r.summary = "supercritical instantaneous births: mu(0) > 1";
        return r;
    }
    if (!ar.a1)
    {
        blocked(r, "A1");
        return r;
    }
    if (m.atom_mass < 1.0)
    {
        r.verdict = CriterionVerdict::NonExplosive;
        r.summary = "subcritical instantaneous births: mu(0) < 1";
        return r;
    }
    if (!ar.a2)
    {
        r.verdict = CriterionVerdict::NonExplosive;
        r.summary = "mu(t) = 1 on an interval (0, t]: A2 fails";
        return r;
    }

    auto f = [&m](double y) { return mu_plus_inverse_exp(m, y); };
    const double y0 = attained_start(f, -std::log(eps));
    r.evidence["eps_used"] = std::exp(-y0);
    const TailIntegral ti = tail_integral(f, y0, opt.tail);
    record_tail(r, ti);
    r.summary = std::string("integral ") + tail_outcome_name(ti.outcome);

    switch (ti.outcome)
    {
        case TailOutcome::Finite:
            // Sufficiency does not need convexity for Poisson laws.
            r.verdict = CriterionVerdict::Explosive;
            break;
        case TailOutcome::Divergent:
            if (ar.convex || opt.sandwich)
                r.verdict = CriterionVerdict::NonExplosive;
            else
                blocked(r, "convex_near_zero");
            break;
        case TailOutcome::Undecided:
            r.verdict = CriterionVerdict::Inconclusive;
            break;
    }
    return r;
}

CriterionReport liminf_test(const IntensityModel& m, double delta_probe, const LiminfOptions& opt)
{
    m.validate();
    CriterionReport r = make_report("liminf");
    r.parameters["delta_probe"] = delta_probe;
    r.parameters["floor"] = opt.floor;

    std::vector<double> grid = opt.t_grid;
    if (grid.empty())
        grid = Profile::geometric_grid(1e-12, 1e-1, 111);
    std::sort(grid.begin(), grid.end(), std::greater<>());
    grid.erase(std::remove_if(grid.begin(), grid.end(), [](double t) { return !(t > 0.0 && t < 1.0); }),
               grid.end());

    const AssumptionReport ar = check_assumptions(m);
    r.hypotheses["A0"] = ar.a0;
    r.hypotheses["A1"] = ar.a1;
    r.hypotheses["A2"] = ar.a2;
    r.hypotheses["second_moment"] = opt.second_moment;
    r.hypotheses["delta_probe_positive"] = delta_probe > 0.0;
    for (const auto& [name, ok] : r.hypotheses)
        if (!ok)
        {
            blocked(r, name);
            return r;
        }
    if (grid.size() < 2)
    {
        r.summary = "t_grid too short";
        return r;
    }

    // ratio(t) = mu_plus(t) / (t |log t|^{1+delta}), ordered toward 0.
    std::vector<double> ratio;
    for (double t : grid)
    {
        const double lr = log_mu_plus(m, t) - std::log(t) - (1.0 + delta_probe) * std::log(-std::log(t));
        ratio.push_back(std::exp(lr));
    }
    r.trace = ratio;

    const double t_end = grid.back();
    double tail_min = kInf;
    bool non_decreasing = true;
    double prev = -kInf;
    for (std::size_t i = 0; i < grid.size(); ++i)
    {
        if (grid[i] > 100.0 * t_end)
            continue;
        tail_min = std::min(tail_min, ratio[i]);
        if (ratio[i] < prev * (1.0 - 1e-12))
            non_decreasing = false;
        prev = ratio[i];
    }
    r.evidence["tail_min"] = tail_min;
    r.evidence["ratio_at_smallest_t"] = ratio.back();
    r.evidence["non_decreasing"] = non_decreasing ? 1.0 : 0.0;

    if (tail_min > opt.floor && non_decreasing)
    {
        r.verdict = CriterionVerdict::Explosive;
        r.summary = "liminf ratio bounded away from 0";
    }
    else
    {
        r.verdict = CriterionVerdict::Inconclusive;
        r.summary = non_decreasing ? "ratio below floor" : "ratio decreasing toward 0";
    }
    return r;
}

ASequence ASequence::explicit_values(std::vector<double> v)
{
    ASequence a;
    a.kind = Kind::Explicit;
    a.values = std::move(v);
    return a;
}

ASequence ASequence::log_power(double r)
{
    ASequence a;
    a.kind = Kind::LogPower;
    a.r = r;
    return a;
}

ASequence ASequence::level(double c)
{
    ASequence a;
    a.kind = Kind::Level;
    a.c = c;
    return a;
}

std::vector<double> ASequence::generate(const IntensityModel& m, std::size_t n) const
{
    std::vector<double> out(n);
    switch (kind)
    {
        case Kind::Explicit:
            if (values.size() < n)
                throw DomainError("explicit sequence shorter than n_terms");
            std::copy(values.begin(), values.begin() + n, out.begin());
            break;
        case Kind::LogPower:
            if (!(r > 0.0))
                throw DomainError("log-power exponent r must be > 0");
            for (std::size_t j = 1; j <= n; ++j)
            {
                const double x = static_cast<double>(j + 1);
                out[j - 1] = 1.0 / (x * std::pow(std::log(x), 1.0 + r));
            }
            break;
        case Kind::Level:
            if (!(c > 0.0))
                throw DomainError("level constant must be > 0");
            for (std::size_t j = 1; j <= n; ++j)
                out[j - 1] = mu_plus_inverse(m, c / static_cast<double>(j));
            break;
    }
    return out;
}

const char* gwve_variant_name(GwveVariant v)
{
    switch (v)
    {
        case GwveVariant::Exact: return "exact";
        case GwveVariant::I: return "i";
        case GwveVariant::II: return "ii";
        case GwveVariant::III: return "iii";
    }
    return "?";
}

SeriesVerdict classify_series(const std::vector<double>& log_terms, const SeriesOptions& opt)
{
    SeriesVerdict v;
    Neumaier total;
    // Complete blocks [2^b, 2^{b+1}) in the 1-based term index.
    for (std::size_t b = 0; (std::size_t{2} << b) - 1 <= log_terms.size(); ++b)
    {
        Neumaier blk;
        for (std::size_t n = std::size_t{1} << b; n < (std::size_t{2} << b); ++n)
            blk.add(std::exp(log_terms[n - 1]));
        v.blocks.push_back(blk.value());
        total.add(blk.value());
    }
    // Terms past the last complete block count toward the partial sum only.
    for (std::size_t n = (std::size_t{1} << v.blocks.size()); n <= log_terms.size(); ++n)
        total.add(std::exp(log_terms[n - 1]));
    v.partial = total.value();

    const auto& bl = v.blocks;
    auto ratio = [&](std::size_t i) {
        if (bl[i] == 0.0)
            return 0.0;
        return bl[i - 1] == 0.0 ? kInf : bl[i] / bl[i - 1];
    };
    const std::size_t nb = bl.size();
    if (nb > static_cast<std::size_t>(std::max(opt.converge_run, opt.diverge_run)))
    {
        bool conv = bl.back() <= opt.converge_last * v.partial;
        for (int k = 0; k < opt.converge_run; ++k)
            conv = conv && ratio(nb - 1 - k) <= opt.converge_ratio;
        bool div = true;
        for (int k = 0; k < opt.diverge_run; ++k)
            div = div && ratio(nb - 1 - k) >= opt.diverge_ratio;
        if (v.partial == 0.0)
            conv = true;
        if (conv)
            v.outcome = SeriesOutcome::Converges;
        else if (div)
            v.outcome = SeriesOutcome::Diverges;
    }
    return v;
}

CriterionReport gwve_sum_test(const IntensityModel& m, const ASequence& seq, GwveVariant variant, double delta_var,
                              std::size_t n_terms, const SeriesOptions& opt)
{
    m.validate();
    if (variant == GwveVariant::III && !(delta_var > 0.0 && delta_var < 1.0))
        throw DomainError("delta_var must lie in (0, 1)");

    CriterionReport r = make_report("gwve_sum");
    r.parameters["variant"] = static_cast<double>(variant);
    r.parameters["delta_var"] = delta_var;
    r.parameters["n_terms"] = static_cast<double>(n_terms);
    echo_series(r, opt);

    const std::vector<double> a = seq.generate(m, n_terms);
    check_summable(a);

    const AssumptionReport ar = check_assumptions(m);
    r.hypotheses["A0"] = ar.a0;
    r.hypotheses["A1"] = ar.a1;
    r.hypotheses["A2"] = ar.a2;
    r.hypotheses["second_moment"] = true;
    r.hypotheses["summable_sequence"] = true;

    std::vector<double> log_terms(n_terms);
    std::vector<double> log_sq(n_terms);
    Neumaier s, q, lp;
    for (std::size_t j = 0; j < n_terms; ++j)
    {
        const double x = mu_plus(m, a[j]);
        s.add(x);
        q.add(x * x);
        lp.add(std::log(m.atom_mass) + std::log1p(x / m.atom_mass));
        log_sq[j] = 2.0 * std::log(x);
        switch (variant)
        {
            case GwveVariant::Exact: log_terms[j] = -lp.value(); break;
            case GwveVariant::I: log_terms[j] = -s.value() + 0.5 * q.value(); break;
            case GwveVariant::II: log_terms[j] = -s.value(); break;
            case GwveVariant::III: log_terms[j] = -delta_var * s.value(); break;
        }
    }
    r.evidence["sum_mu_plus"] = s.value();
    r.evidence["sum_mu_plus_sq"] = q.value();
    r.evidence["a_last"] = a.back();

    const SeriesVerdict sv = classify_series(log_terms, opt);
    r.evidence["partial_sum"] = sv.partial;
    r.evidence["blocks"] = static_cast<double>(sv.blocks.size());
    Neumaier run;
    for (double b : sv.blocks)
    {
        run.add(b);
        r.trace.push_back(run.value());
    }
    r.summary = std::string("series ") + series_outcome_name(sv.outcome);

    bool ok = sv.outcome == SeriesOutcome::Converges;
    if (variant == GwveVariant::II)
    {
        const SeriesVerdict sq = classify_series(log_sq, opt);
        r.evidence["square_series_partial"] = sq.partial;
        r.hypotheses["square_series_converges"] = sq.outcome == SeriesOutcome::Converges;
        if (ok && sq.outcome != SeriesOutcome::Converges)
        {
            blocked(r, "square_series_converges");
            return r;
        }
    }
    for (const auto& [name, h] : r.hypotheses)
        if (!h)
        {
            blocked(r, name);
            return r;
        }
    r.verdict = ok ? CriterionVerdict::Explosive : CriterionVerdict::Inconclusive;
    return r;
}

CriterionReport kersting_test(const EnvSpec& env, std::size_t n_terms, const SeriesOptions& opt)
{
    if (n_terms < 2)
        throw DomainError("n_terms must be >= 2");
    for (const auto& law : env.laws)
        if (law.mean() == 0.0)
            throw DomainError("degenerate environment: E[Y_n] = 0");
    env.validate();

    CriterionReport r = make_report("kersting");
    r.parameters["n_terms"] = static_cast<double>(n_terms);
    echo_series(r, opt);

    std::vector<double> log_terms(n_terms), log_m(n_terms + 1, 0.0);
    double c_sup = 0.0;
    for (std::size_t n = 1; n <= n_terms; ++n)
    {
        const OffspringLaw& y = env.at(n - 1);
        const double mean = y.mean();
        if (mean == 0.0)
            throw DomainError("degenerate environment: E[Y_n] = 0");
        const double nu = y.factorial_moment2() / (mean * mean);
        log_terms[n - 1] = std::log(nu) - log_m[n - 1];
        log_m[n] = log_m[n - 1] + std::log(mean);

        const double num = y.second_moment_ge2();
        const double den = y.mean_ge2() * y.mean_given_positive();
        const double cn = num == 0.0 ? 0.0 : num / den;
        c_sup = std::max(c_sup, cn);
    }
    r.evidence["kersting_c"] = c_sup;
    r.evidence["log_m_last"] = log_m.back();
    r.hypotheses["kersting_A"] = std::isfinite(c_sup);

    const SeriesVerdict sv = classify_series(log_terms, opt);
    r.evidence["partial_sum"] = sv.partial;
    Neumaier run;
    for (double b : sv.blocks)
    {
        run.add(b);
        r.trace.push_back(run.value());
    }

    // lim m_n in (0, inf]: log m either settles or keeps growing over the
    // second half of the horizon.
    const std::size_t half = n_terms / 2;
    bool growing = true;
    for (std::size_t n = half + 1; n <= n_terms; ++n)
        growing = growing && log_m[n] >= log_m[n - 1];
    const double spread = std::abs(log_m[n_terms] - log_m[half]);
    const bool settles = spread <= 1e-6 * std::max(1.0, std::abs(log_m[n_terms]));
    const bool limit_ok = (growing || settles) && log_m[n_terms] > std::log(1e-300);
    r.evidence["mean_limit_positive"] = limit_ok ? 1.0 : 0.0;

    if (!std::isfinite(c_sup))
    {
        blocked(r, "kersting_A");
        return r;
    }
    if (sv.outcome == SeriesOutcome::Converges && limit_ok)
    {
        r.verdict = CriterionVerdict::Explosive;
        r.summary = "survives";
    }
    else if (sv.outcome == SeriesOutcome::Diverges)
    {
        r.verdict = CriterionVerdict::NonExplosive;
        r.summary = "dies out";
    }
    else
    {
        r.verdict = CriterionVerdict::Inconclusive;
        r.summary = "undecided";
    }
    return r;
}

CriterionReport amini_test(const OffspringLaw& z, const DisplacementLaw& w, double delta_tail, double eps,
                           const AminiOptions& opt)
{
    if (!(eps > 0.0 && eps < 1.0))
        throw DomainError("eps must lie in (0, 1)");
    z.validate();
    w.validate();

    CriterionReport r = make_report("amini");
    r.parameters["delta_tail"] = delta_tail;
    r.parameters["eps"] = eps;
    r.parameters["t_lo"] = opt.t_lo;
    r.parameters["t_hi"] = opt.t_hi;
    echo_tail(r, opt.tail);

    bool plump = delta_tail > 0.0;
    double worst_lo = kInf, worst_hi = kInf;
    for (double t : Profile::geometric_grid(opt.t_lo, opt.t_hi, opt.points))
    {
        if (t < opt.large_from)
            continue;
        const double lt = std::log(z.tail(t));
        const double lower = -(1.0 - delta_tail) * std::log(t);
        const double upper = -delta_tail * std::log(t);
        worst_lo = std::min(worst_lo, lt - lower);
        worst_hi = std::min(worst_hi, upper - lt);
        if (lt < lower || lt > upper)
            plump = false;
    }
    r.evidence["plump_lower_margin"] = worst_lo;
    r.evidence["plump_upper_margin"] = worst_hi;
    r.hypotheses["plump_power"] = plump;
    r.hypotheses["independent_z_w"] = true;
    if (!plump)
    {
        blocked(r, "plump_power");
        return r;
    }

    auto f = [&w](double y) { return w.quantile_exp(y); };
    const double y0 = attained_start(f, -std::log(eps));
    const TailIntegral ti = tail_integral(f, y0, opt.tail);
    record_tail(r, ti);
    r.summary = std::string("quantile integral ") + tail_outcome_name(ti.outcome);
    switch (ti.outcome)
    {
        case TailOutcome::Finite: r.verdict = CriterionVerdict::Explosive; break;
        case TailOutcome::Divergent: r.verdict = CriterionVerdict::NonExplosive; break;
        case TailOutcome::Undecided: r.verdict = CriterionVerdict::Inconclusive; break;
    }
    return r;
}

double poisson_moment(double lambda, double p)
{
    if (!(lambda >= 0.0) || !std::isfinite(lambda))
        throw DomainError("poisson moment needs a finite lambda >= 0");
    if (lambda == 0.0)
        return 0.0;
    // Terms peak near n = lambda; sum outward from there until negligible.
    const double log_l = std::log(lambda);
    auto log_term = [&](double n) { return p * std::log(n) + n * log_l - lambda - std::lgamma(n + 1.0); };
    const double peak = std::max(1.0, std::floor(lambda));
    Neumaier s;
    const double lp = log_term(peak);
    s.add(std::exp(lp));
    for (double n = peak + 1.0;; n += 1.0)
    {
        const double lt = log_term(n);
        s.add(std::exp(lt));
        if (n > lambda + 1.0 && lt < lp - 50.0)
            break;
    }
    for (double n = peak - 1.0; n >= 1.0; n -= 1.0)
    {
        const double lt = log_term(n);
        s.add(std::exp(lt));
        if (lt < lp - 50.0)
            break;
    }
    return s.value();
}

DisplacementLaw quantile_bound_from_intensity(const IntensityModel& m, double delta_mom, double t0_mom,
                                              const QuantileBoundOptions& opt)
{
    if (!(delta_mom > 0.0))
        throw DomainError("delta_mom must be > 0");
    if (!(t0_mom > 0.0))
        throw DomainError("t0_mom must be > 0");
    m.validate();
    const double lambda = mu_plus(m, t0_mom);
    if (!std::isfinite(lambda))
        throw DomainError("A1 fails at t0_mom");
    double c = 0.0;
    if (opt.c)
        c = *opt.c;
    else
    {
        const double moment = opt.moment ? *opt.moment : poisson_moment(lambda, 1.0 + delta_mom);
        c = std::pow(moment, 1.0 / delta_mom);
    }
    if (!(c > 0.0))
        throw DomainError("moment constant must be > 0");
    return DisplacementLaw::from_intensity(m, c, (1.0 + delta_mom) / delta_mom);
}

CriterionReport quantile_bound_test(const IntensityModel& m, double delta_mom, double t0_mom, double eps,
                                    const QuantileBoundOptions& opt, const TailOptions& tail)
{
    if (!(eps > 0.0 && eps < 1.0))
        throw DomainError("eps must lie in (0, 1)");
    const DisplacementLaw w = quantile_bound_from_intensity(m, delta_mom, t0_mom, opt);
    CriterionReport r = make_report("quantile_bound");
    r.parameters["delta_mom"] = delta_mom;
    r.parameters["t0_mom"] = t0_mom;
    r.parameters["eps"] = eps;
    echo_tail(r, tail);
    r.evidence["c"] = w.c;
    r.evidence["q"] = w.q;

    const AssumptionReport ar = check_assumptions(m);
    r.hypotheses["A0"] = ar.a0;
    r.hypotheses["A1"] = ar.a1;
    r.hypotheses["A2"] = ar.a2;
    r.hypotheses["moment_finite"] = opt.moment.has_value() || opt.c.has_value() || std::isfinite(w.c);
    for (const auto& [name, ok] : r.hypotheses)
        if (!ok)
        {
            blocked(r, name);
            return r;
        }

    auto f = [&w](double y) { return w.quantile_exp(y); };
    const double y0 = attained_start(f, -std::log(eps));
    const TailIntegral ti = tail_integral(f, y0, tail);
    record_tail(r, ti);
    r.summary = std::string("bound integral ") + tail_outcome_name(ti.outcome);
    r.verdict = ti.outcome == TailOutcome::Finite ? CriterionVerdict::Explosive : CriterionVerdict::Inconclusive;
    return r;
}

double PsiBound::psi(double t) const
{
    if (t <= 0.0)
        return 0.0;
    // n = #{k : t <= a_k}; a is decreasing.
    const auto it = std::partition_point(a.begin(), a.end(), [t](double ak) { return t <= ak; });
    return std::pow(delta, static_cast<double>(it - a.begin()));
}

PsiBound::Check PsiBound::check(const Profile& f_bar, double slack) const
{
    Check out;
    out.max_violation = -kInf;
    const double a_last = a.empty() ? kInf : a.back();
    for (std::size_t k = 0; k < f_bar.size(); ++k)
    {
        const double t = f_bar.grid[k];
        if (t > t0)
            break;
        if (4.0 * t <= a_last)
        {
            ++out.skipped;
            continue;
        }
        ++out.points;
        const double f = 1.0 - f_bar.values[k];
        out.max_violation = std::max(out.max_violation, f - psi(4.0 * t) - slack);
    }
    return out;
}

PsiBound psi_bound(const IntensityModel& m, double delta, std::size_t n, const PsiOptions& opt)
{
    if (!(delta > 0.0 && delta < 1.0))
        throw DomainError("delta must lie in (0, 1)");
    if (n < 1)
        throw DomainError("N must be >= 1");
    m.validate();

    PsiBound pb;
    pb.delta = delta;
    pb.convex = check_assumptions(m).convex;
    const double ld = -std::log(delta);
    for (std::size_t k = 1;; ++k)
    {
        if (k > opt.max_terms)
            throw DomainError("hypothesis (sum-condition) not met");
        double v = kInf;
        try
        {
            v = mu_plus_inverse_exp(m, ld * static_cast<double>(k));
        }
        catch (const DomainError&)
        {
        }
        if (!std::isfinite(v))
            throw DomainError("hypothesis (sum-condition) not met");
        pb.terms.push_back(v / static_cast<double>(k));
        if (pb.terms.back() < opt.increment_tol)
            break;
    }

    // a_n by backward summation of the stored terms.
    const std::size_t kk = pb.terms.size();
    std::vector<double> tails(kk);
    Neumaier s;
    for (std::size_t i = kk; i-- > 0;)
    {
        s.add(pb.terms[i]);
        tails[i] = s.value();
    }
    const std::size_t count = std::min(n, kk);
    pb.a.assign(tails.begin(), tails.begin() + count);
    pb.t0 = delta / (4.0 * (2.0 + delta)) * mu_plus_inverse(m, 1.0);
    return pb;
}

IntensityModel linearize_intensity(const IntensityModel& m, double n)
{
    if (!(n >= 1.0))
        throw DomainError("linearization index n must be >= 1");
    m.validate();
    if (!check_assumptions(m).convex)
        throw DomainError("linearization needs a model convex near zero");
    IntensityModel out;
    out.family = Family::Linearized;
    out.atom_mass = m.atom_mass;
    out.base = std::make_shared<const IntensityModel>(m);
    out.lin_n = n;
    out.validate();
    return out;
}

}  // namespace cmjx
