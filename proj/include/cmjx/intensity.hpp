#pragma once

#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace cmjx {

/// Raised for requests outside a model's domain (unattained level, query past
/// the last table knot, bad parameters).
class DomainError : public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

enum class Family
{
    Linear,      // c t
    Power,       // c t^beta
    LogLinear,   // c t |log t|^{1+delta} near 0, linear continuation after
    Delayed,     // max(0, t - eps)
    DoubleExp,   // exp(-exp(1/t))
    Table,       // piecewise-linear through (t_i, m_i)
    Linearized,  // chord n x base(1/n) below 1/n, base above
};

const char* family_name(Family f);

/// Intensity measure mu = atom_mass * delta_0 + mu_plus.
///
/// Every family is multiplied by `scale`, which lets a * mu_plus be expressed
/// for any shape without a separate wrapper.
struct IntensityModel
{
    double atom_mass = 1.0;
    Family family = Family::Linear;
    double c = 1.0;
    double beta = 1.0;
    double delta = 1.0;
    double eps = 0.0;
    double scale = 1.0;
    std::vector<std::pair<double, double>> table;

    std::shared_ptr<const IntensityModel> base;  // Linearized only
    double lin_n = 1.0;

    /// When false, mu_plus_inverse always bisects instead of using the
    /// closed form. Useful for cross-checking.
    bool analytic_inverse = true;

    static IntensityModel linear(double c, double atom = 1.0);
    static IntensityModel power(double c, double beta, double atom = 1.0);
    static IntensityModel log_linear(double c, double delta, double atom = 1.0);
    static IntensityModel delayed(double eps, double atom = 1.0);
    static IntensityModel double_exp(double atom = 1.0);
    static IntensityModel tabulated(std::vector<std::pair<double, double>> points, double atom = 1.0);

    IntensityModel scaled(double a) const;

    /// Throws DomainError on invalid parameters.
    void validate() const;
};

/// Switch point of the LogLinear family; beyond it mu_plus continues
/// linearly with the (positive) left derivative.
double log_linear_switch(double delta);

double mu_plus(const IntensityModel& m, double t);

/// log mu_plus(t); -inf where mu_plus vanishes. Stays finite for DoubleExp
/// far below the underflow point of mu_plus itself.
double log_mu_plus(const IntensityModel& m, double t);

/// mu[0, t] = atom + mu_plus(t).
double mu_total(const IntensityModel& m, double t);

/// sup of mu_plus over [0, inf); +inf when unbounded.
double mu_plus_sup(const IntensityModel& m);

/// inf{x >= 0 : mu_plus(x) >= y}.
double mu_plus_inverse(const IntensityModel& m, double y);

/// mu_plus_inverse(exp(-y)), computed without forming exp(-y).
double mu_plus_inverse_exp(const IntensityModel& m, double y);

/// Inverse by bracketing and bisection, independent of any closed form.
double mu_plus_inverse_bisect(const IntensityModel& m, double y);

/// Generalized inverse of the full cumulative mass t -> mu[0, t]: levels up to
/// the atom map to 0.
double mu_total_inverse(const IntensityModel& m, double level);

struct AssumptionReport
{
    bool a0 = false;      // atom_mass == 1
    bool a1 = false;      // mu_plus finite somewhere past 0
    bool a2 = false;      // mu_plus > 0 on (0, inf)
    bool convex = false;  // convex near zero on the probe grid
    double convex_worst = 0.0;  // largest relative violation seen
};

AssumptionReport check_assumptions(const IntensityModel& m);

/// Convexity probe on a geometric grid from t_lo to t_hi.
bool convex_near_zero(const IntensityModel& m, double t_lo = 1e-6, double t_hi = 0.1,
                      int points = 64, double tol = 1e-9, double* worst = nullptr);

enum class ScalingVerdict
{
    Holds,
    Fails,
    Inconclusive
};

const char* scaling_verdict_name(ScalingVerdict v);

struct ScalingReport
{
    double ratio_max = 0.0;  // max mu_plus(lambda t) / (lambda mu_plus(t))
    double c2 = 0.0;         // smallest c with 2 mu_plus(t) <= mu_plus(c t) on the grid
    std::size_t skipped = 0; // grid points with mu_plus(t) == 0
    std::vector<double> ratio_by_t;  // max over lambda, per t
    ScalingVerdict verdict = ScalingVerdict::Inconclusive;
};

ScalingReport scaling_condition_check(const IntensityModel& m, const std::vector<double>& lambda_grid,
                                      const std::vector<double>& t_grid);

}  // namespace cmjx
