#include "cmjx/intensity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace cmjx {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double log_add(double a, double b)
{
    if (a == -kInf)
        return b;
    if (b == -kInf)
        return a;
    const double hi = std::max(a, b);
    return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

// The family shape without `scale`.
double raw_mu(const IntensityModel& m, double t)
{
    if (t <= 0.0)
        return 0.0;
    switch (m.family)
    {
        case Family::Linear:
            return m.c * t;
        case Family::Power:
            return m.c * std::pow(t, m.beta);
        case Family::LogLinear:
        {
            const double ts = log_linear_switch(m.delta);
            const double ls = 2.0 + m.delta;
            if (t < ts)
                return m.c * t * std::pow(-std::log(t), 1.0 + m.delta);
            const double at = ts * std::pow(ls, 1.0 + m.delta);
            const double slope = std::pow(ls, m.delta) * (ls - 1.0 - m.delta);
            return m.c * (at + slope * (t - ts));
        }
        case Family::Delayed:
            return std::max(0.0, t - m.eps);
        case Family::DoubleExp:
            return std::exp(-std::exp(1.0 / t));
        case Family::Table:
        {
            const auto& tb = m.table;
            if (t > tb.back().first)
                throw DomainError("out of tabulated range");
            auto it = std::lower_bound(tb.begin(), tb.end(), t,
                                       [](const auto& p, double x) { return p.first < x; });
            if (it->first == t)
                return it->second;
            const auto& lo = *(it - 1);
            const auto& hi = *it;
            return lo.second + (hi.second - lo.second) * (t - lo.first) / (hi.first - lo.first);
        }
        case Family::Linearized:
        {
            const double knot = 1.0 / m.lin_n;
            if (t < knot)
                return m.lin_n * t * mu_plus(*m.base, knot);
            return mu_plus(*m.base, t);
        }
    }
    return 0.0;
}

double raw_log_mu(const IntensityModel& m, double t)
{
    if (t <= 0.0)
        return -kInf;
    switch (m.family)
    {
        case Family::Linear:
            return std::log(m.c) + std::log(t);
        case Family::Power:
            return std::log(m.c) + m.beta * std::log(t);
        case Family::LogLinear:
            if (t < log_linear_switch(m.delta))
                return std::log(m.c) + std::log(t) + (1.0 + m.delta) * std::log(-std::log(t));
            return std::log(raw_mu(m, t));
        case Family::DoubleExp:
            return -std::exp(1.0 / t);
        case Family::Linearized:
        {
            const double knot = 1.0 / m.lin_n;
            if (t < knot)
                return std::log(m.lin_n) + std::log(t) + log_mu_plus(*m.base, knot);
            return log_mu_plus(*m.base, t);
        }
        default:
            return std::log(raw_mu(m, t));
    }
}

double raw_sup(const IntensityModel& m)
{
    switch (m.family)
    {
        case Family::DoubleExp:
            return std::exp(-1.0);
        case Family::Table:
            return m.table.back().second;
        case Family::Linearized:
            return mu_plus_sup(*m.base);
        default:
            return kInf;
    }
}

bool sup_attained(const IntensityModel& m)
{
    if (m.family == Family::Table)
        return true;
    if (m.family == Family::Linearized)
        return sup_attained(*m.base);
    return false;
}

double table_inverse(const IntensityModel& m, double y)
{
    const auto& tb = m.table;
    for (std::size_t i = 1; i < tb.size(); ++i)
    {
        if (tb[i].second >= y)
        {
            const auto& lo = tb[i - 1];
            const auto& hi = tb[i];
            if (lo.second >= y)
                return lo.first;
            return lo.first + (y - lo.second) / (hi.second - lo.second) * (hi.first - lo.first);
        }
    }
    throw DomainError("level unattained");
}

// u - (1+delta) log u = k on u >= 2 + delta; g is increasing and convex
// there, so Newton from the right descends monotonically onto the root.
double log_linear_solve(double k, double delta)
{
    const double p = 1.0 + delta;
    auto g = [&](double u) { return u - p * std::log(u) - k; };
    double u = std::max(2.0 + delta, k + p * std::log(std::max(k, 1.0)) + 1.0);
    while (g(u) < 0.0)
        u *= 2.0;
    for (int it = 0; it < 100; ++it)
    {
        const double step = g(u) / (1.0 - p / u);
        u -= step;
        if (std::abs(step) <= 1e-15 * u)
            break;
    }
    return std::max(u, 2.0 + delta);
}

// Inverse of the raw shape at level exp(-Y).
double raw_inverse_exp(const IntensityModel& m, double Y)
{
    switch (m.family)
    {
        case Family::Linear:
            return std::exp(-Y - std::log(m.c));
        case Family::Power:
            return std::exp(-(Y + std::log(m.c)) / m.beta);
        case Family::LogLinear:
        {
            const double ts = log_linear_switch(m.delta);
            const double log_at = std::log(raw_mu(m, ts));
            if (-Y <= log_at)
                return std::exp(-log_linear_solve(Y + std::log(m.c), m.delta));
            const double ls = 2.0 + m.delta;
            const double slope = m.c * std::pow(ls, m.delta) * (ls - 1.0 - m.delta);
            return ts + (std::exp(-Y) - std::exp(log_at)) / slope;
        }
        case Family::Delayed:
            return m.eps + std::exp(-Y);
        case Family::DoubleExp:
            if (Y <= 1.0)
                throw DomainError("level unattained");
            return 1.0 / std::log(Y);
        case Family::Table:
            return table_inverse(m, std::exp(-Y));
        case Family::Linearized:
        {
            const double knot = 1.0 / m.lin_n;
            const double log_l = log_mu_plus(*m.base, knot);
            if (-Y <= log_l)
                return std::exp(-Y - std::log(m.lin_n) - log_l);
            return mu_plus_inverse_exp(*m.base, Y);
        }
    }
    return 0.0;
}

void check_level(const IntensityModel& m, double y)
{
    if (!(y >= 0.0) || std::isnan(y))
        throw DomainError("level must be nonnegative");
    const double sup = mu_plus_sup(m);
    if (sup_attained(m) ? y > sup : y >= sup)
        throw DomainError("level unattained");
}

}  // namespace

const char* family_name(Family f)
{
    switch (f)
    {
        case Family::Linear: return "linear";
        case Family::Power: return "power";
        case Family::LogLinear: return "loglinear";
        case Family::Delayed: return "delayed";
        case Family::DoubleExp: return "doubleexp";
        case Family::Table: return "table";
        case Family::Linearized: return "linearized";
    }
    return "?";
}

IntensityModel IntensityModel::linear(double c, double atom)
{
    IntensityModel m;
    m.family = Family::Linear;
    m.c = c;
    m.atom_mass = atom;
    m.validate();
    return m;
}

IntensityModel IntensityModel::power(double c, double beta, double atom)
{
    IntensityModel m;
    m.family = Family::Power;
    m.c = c;
    m.beta = beta;
    m.atom_mass = atom;
    m.validate();
    return m;
}

IntensityModel IntensityModel::log_linear(double c, double delta, double atom)
{
    IntensityModel m;
    m.family = Family::LogLinear;
    m.c = c;
    m.delta = delta;
    m.atom_mass = atom;
    m.validate();
    return m;
}

IntensityModel IntensityModel::delayed(double eps, double atom)
{
    IntensityModel m;
    m.family = Family::Delayed;
    m.eps = eps;
    m.atom_mass = atom;
    m.validate();
    return m;
}

IntensityModel IntensityModel::double_exp(double atom)
{
    IntensityModel m;
    m.family = Family::DoubleExp;
    m.atom_mass = atom;
    m.validate();
    return m;
}

IntensityModel IntensityModel::tabulated(std::vector<std::pair<double, double>> points, double atom)
{
    IntensityModel m;
    m.family = Family::Table;
    m.table = std::move(points);
    m.atom_mass = atom;
    m.validate();
    return m;
}

IntensityModel IntensityModel::scaled(double a) const
{
    IntensityModel m = *this;
    m.scale *= a;
    m.validate();
    return m;
}

void IntensityModel::validate() const
{
    auto bad = [](const std::string& what) { throw DomainError("invalid intensity: " + what); };
    if (!(atom_mass >= 0.0) || !std::isfinite(atom_mass))
        bad("atom_mass must be finite and >= 0");
    if (!(scale > 0.0) || !std::isfinite(scale))
        bad("scale must be finite and > 0");
    switch (family)
    {
        case Family::Linear:
            if (!(c > 0.0))
                bad("c must be > 0");
            break;
        case Family::Power:
            if (!(c > 0.0) || !(beta > 0.0))
                bad("c and beta must be > 0");
            break;
        case Family::LogLinear:
            if (!(c > 0.0) || !(delta > 0.0))
                bad("c and delta must be > 0");
            break;
        case Family::Delayed:
            if (!(eps >= 0.0))
                bad("eps must be >= 0");
            break;
        case Family::DoubleExp:
            break;
        case Family::Table:
            if (table.size() < 2)
                bad("table needs at least two points");
            if (table[0].first != 0.0 || table[0].second != 0.0)
                bad("table must start at (0, 0)");
            for (std::size_t i = 1; i < table.size(); ++i)
            {
                if (!(table[i].first > table[i - 1].first))
                    bad("table knots must be strictly increasing");
                if (!(table[i].second >= table[i - 1].second) || !std::isfinite(table[i].second))
                    bad("table masses must be finite and non-decreasing");
            }
            break;
        case Family::Linearized:
            if (!base)
                bad("linearized model needs a base");
            if (!(lin_n >= 1.0))
                bad("linearization index must be >= 1");
            break;
    }
}

double log_linear_switch(double delta)
{
    return std::exp(-(2.0 + delta));
}

double mu_plus(const IntensityModel& m, double t)
{
    if (!(t >= 0.0) || !std::isfinite(t))
        throw DomainError("time must be finite and >= 0");
    return m.scale * raw_mu(m, t);
}

double log_mu_plus(const IntensityModel& m, double t)
{
    if (!(t >= 0.0) || !std::isfinite(t))
        throw DomainError("time must be finite and >= 0");
    return std::log(m.scale) + raw_log_mu(m, t);
}

double mu_total(const IntensityModel& m, double t)
{
    return m.atom_mass + mu_plus(m, t);
}

double mu_plus_sup(const IntensityModel& m)
{
    return m.scale * raw_sup(m);
}

double mu_plus_inverse(const IntensityModel& m, double y)
{
    check_level(m, y);
    if (y == 0.0)
        return 0.0;
    if (!m.analytic_inverse)
        return mu_plus_inverse_bisect(m, y);
    const double ys = y / m.scale;
    switch (m.family)
    {
        case Family::Linear:
            return ys / m.c;
        case Family::Power:
            return std::pow(ys / m.c, 1.0 / m.beta);
        case Family::Delayed:
            return m.eps + ys;
        case Family::Table:
            return table_inverse(m, ys);
        default:
            return raw_inverse_exp(m, -std::log(ys));
    }
}

double mu_plus_inverse_exp(const IntensityModel& m, double y)
{
    if (std::isnan(y))
        throw DomainError("level must be a number");
    if (y == kInf)
        return 0.0;
    const double Y = y + std::log(m.scale);
    const double sup = raw_sup(m);
    if (sup_attained(m) ? -Y > std::log(sup) : -Y >= std::log(sup))
        throw DomainError("level unattained");
    if (!m.analytic_inverse)
        return mu_plus_inverse_bisect(m, std::exp(-y));
    return raw_inverse_exp(m, Y);
}

double mu_plus_inverse_bisect(const IntensityModel& m, double y)
{
    check_level(m, y);
    if (y == 0.0)
        return 0.0;
    const double t_max = m.family == Family::Table ? m.table.back().first : kInf;
    double hi = std::min(1.0, t_max);
    for (int k = 0; mu_plus(m, hi) < y; ++k)
    {
        if (k > 2000 || hi >= t_max)
            throw DomainError("level unattained");
        hi = std::min(2.0 * hi, t_max);
    }
    double lo = 0.5 * hi;
    while (lo > 0.0 && mu_plus(m, lo) >= y)
    {
        hi = lo;
        lo *= 0.5;
    }
    if (lo == 0.0)
        return 0.0;
    for (int it = 0; it < 200; ++it)
    {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi)
            break;
        if (mu_plus(m, mid) >= y)
            hi = mid;
        else
            lo = mid;
        const double w = hi - lo;
        if (w <= 1e-12 && w <= 1e-15 * hi)
            break;
    }
    return hi;
}

double mu_total_inverse(const IntensityModel& m, double level)
{
    if (level <= m.atom_mass)
        return 0.0;
    return mu_plus_inverse(m, level - m.atom_mass);
}

bool convex_near_zero(const IntensityModel& m, double t_lo, double t_hi, int points, double tol,
                      double* worst)
{
    if (m.family == Family::Table)
        t_hi = std::min(t_hi, m.table.back().first);
    std::vector<double> t(points), lm(points);
    const double r = std::log(t_hi / t_lo) / (points - 1);
    for (int i = 0; i < points; ++i)
    {
        t[i] = i + 1 == points ? t_hi : t_lo * std::exp(r * i);
        lm[i] = log_mu_plus(m, t[i]);
    }
    double w_max = 0.0;
    for (int i = 1; i + 1 < points; ++i)
    {
        if (lm[i] == -kInf)
            continue;
        const double w = (t[i + 1] - t[i]) / (t[i + 1] - t[i - 1]);
        const double rhs = log_add(std::log(w) + lm[i - 1], std::log1p(-w) + lm[i + 1]);
        const double excess = rhs == -kInf ? kInf : std::expm1(lm[i] - rhs);
        w_max = std::max(w_max, excess);
    }
    if (worst)
        *worst = w_max;
    return w_max <= tol;
}

AssumptionReport check_assumptions(const IntensityModel& m)
{
    AssumptionReport r;
    r.a0 = m.atom_mass == 1.0;
    const double t0 = m.family == Family::Table ? std::min(1.0, m.table.back().first) : 1.0;
    r.a1 = std::isfinite(mu_plus(m, t0));
    switch (m.family)
    {
        case Family::Delayed:
            r.a2 = m.eps == 0.0;
            break;
        case Family::Table:
            r.a2 = m.table[1].second > 0.0;
            break;
        case Family::Linearized:
            r.a2 = check_assumptions(*m.base).a2;
            break;
        default:
            r.a2 = true;
    }
    r.convex = convex_near_zero(m, 1e-6, 0.1, 64, 1e-9, &r.convex_worst);
    return r;
}

const char* scaling_verdict_name(ScalingVerdict v)
{
    switch (v)
    {
        case ScalingVerdict::Holds: return "holds";
        case ScalingVerdict::Fails: return "fails";
        case ScalingVerdict::Inconclusive: return "inconclusive";
    }
    return "?";
}

ScalingReport scaling_condition_check(const IntensityModel& m, const std::vector<double>& lambda_grid,
                                      const std::vector<double>& t_grid)
{
    ScalingReport rep;
    const double sup = mu_plus_sup(m);
    for (double t : t_grid)
    {
        const double lt = log_mu_plus(m, t);
        if (lt == -kInf)
        {
            ++rep.skipped;
            continue;
        }
        double best = 0.0;
        for (double lam : lambda_grid)
            best = std::max(best, std::exp(log_mu_plus(m, lam * t) - std::log(lam) - lt));
        rep.ratio_by_t.push_back(best);
        rep.ratio_max = std::max(rep.ratio_max, best);

        const double target = 2.0 * mu_plus(m, t);
        if (target == 0.0)
            continue;
        if (target >= sup && !(sup_attained(m) && target == sup))
            rep.c2 = kInf;
        else
            rep.c2 = std::max(rep.c2, mu_plus_inverse(m, target) / t);
    }

    if (!check_assumptions(m).a2 || rep.skipped > 0)
        rep.verdict = ScalingVerdict::Fails;
    else if (rep.ratio_by_t.empty() || !std::isfinite(rep.ratio_max) || !std::isfinite(rep.c2))
        rep.verdict = ScalingVerdict::Inconclusive;
    else
    {
        // t_grid decreases toward 0: a ratio that keeps climbing is the
        // signature of an unbounded limsup.
        const auto& r = rep.ratio_by_t;
        bool climbing = r.size() >= 2;
        for (std::size_t i = 1; i < r.size(); ++i)
            climbing = climbing && r[i] >= r[i - 1];
        rep.verdict = climbing && r.back() > 2.0 * r.front() ? ScalingVerdict::Inconclusive
                                                             : ScalingVerdict::Holds;
    }
    return rep;
}

}  // namespace cmjx
