#pragma once

#include "cmjx/intensity.hpp"
#include "cmjx/reproduction.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace cmjx {

enum class GridKind
{
    Geometric,
    Uniform,  // t_k = k h, the only kind that admits shifts
    Custom,
};

const char* grid_kind_name(GridKind k);

/// Step function on a grid 0 < t_1 < ... < t_K: phi = v_k on (t_{k-1}, t_k],
/// phi = 1 on (-inf, 0], phi = v_K past t_K.
struct Profile
{
    GridKind kind = GridKind::Custom;
    double step = 0.0;  // h for Uniform grids
    std::vector<double> grid;
    std::vector<double> values;

    static std::vector<double> geometric_grid(double lo, double hi, std::size_t points);
    static std::vector<double> uniform_grid(double h, std::size_t points);

    static Profile on_grid(GridKind kind, std::vector<double> grid, double fill, double step = 0.0);
    static Profile geometric(double lo, double hi, std::size_t points, double fill);
    static Profile uniform(double h, std::size_t points, double fill);

    /// Same grid, values 1 on (0, c] and 0 beyond (c = 0 gives 1_{(-inf, 0]}).
    Profile indicator(double c = 0.0) const;
    Profile with_values(std::vector<double> v) const;

    std::size_t size() const { return grid.size(); }
    double operator()(double t) const;
    double min_value() const { return values.empty() ? 1.0 : values.back(); }

    /// Throws DomainError on a bad grid, values outside [0, 1], or increases.
    void validate() const;
};

double sup_distance(const Profile& a, const Profile& b);

/// Precomputed mass matrix for one (model, grid) pair:
/// D[k][j] = mu_plus(t_k - t_{j-1}) - mu_plus(t_k - t_j), j <= k.
class PoissonKernel
{
  public:
    /// Uniform grids get exact Toeplitz entries, so shifts commute exactly.
    PoissonKernel(const IntensityModel& m, const Profile& shape);

    const IntensityModel& model() const { return model_; }
    const std::vector<double>& grid() const { return shape_.grid; }

    /// J_k = sum_{j <= k} (1 - v_j) D[k][j], without the atom.
    void convolve(const std::vector<double>& v, std::vector<double>& J) const;

    Profile apply(const Profile& phi) const;

  private:
    IntensityModel model_;
    Profile shape_;
    std::vector<double> d_;  // packed lower triangle, row k has k+1 entries
};

Profile apply_poisson(const IntensityModel& m, const Profile& phi);

/// The Poisson transform of the step profile evaluated at an arbitrary t >= 0.
double poisson_transform_at(const IntensityModel& m, const Profile& phi, double t);

struct McProfile
{
    Profile mean;
    std::vector<double> half_width;  // 1.96 sigma / sqrt(n) per grid point
    std::size_t monotonicity_violations = 0;
    std::uint64_t samples = 0;
};

/// Sample s uses the stream derive_key(seed, s).
McProfile apply_mc(const ReproductionLaw& law, const Profile& phi, std::uint64_t samples, std::uint64_t seed,
                   unsigned threads = 0);

enum class Verdict
{
    NonTrivial,
    Trivial,
    Undecided,
};

const char* verdict_name(Verdict v);

enum class Scheme
{
    Reduced,  // solve the instantaneous cluster exactly at each grid point
    Direct,   // plain repeated application of the transform
};

const char* scheme_name(Scheme s);

struct IterateOptions
{
    std::size_t max_iter = 10000;
    double tol = 1e-6;
    double triv_tol = 1e-3;
    Scheme scheme = Scheme::Reduced;
};

struct IterationResult
{
    Profile final;
    std::vector<double> residuals;  // sup-norm change per iteration
    Verdict verdict = Verdict::Undecided;
    std::size_t iterations = 0;
    bool converged = false;
    double transform_residual = 0.0;  // sup |S phi - phi| at the end
    Scheme scheme = Scheme::Reduced;
};

IterationResult iterate(const IntensityModel& m, const Profile& phi0, const IterateOptions& opt = {});

/// Monte-Carlo iteration for general laws. Iteration i draws from
/// derive_key(seed, i).
IterationResult iterate_mc(const ReproductionLaw& law, const Profile& phi0, std::uint64_t samples,
                           std::uint64_t seed, const IterateOptions& opt = {}, unsigned threads = 0);

/// (theta_c phi)(t) = phi(t - c) on a uniform grid; c must be a multiple of h.
Profile shift_profile(const Profile& phi, double c);

struct MartingaleDiag
{
    double t = 0.0;  // evaluation time actually used
    std::vector<double> mean;  // per generation
    std::vector<double> se;
    std::uint64_t replicas = 0;
    std::uint64_t cap_hits = 0;
    double fixed_point_residual = -1.0;  // sup |S phi - phi|; -1 if not computable
};

/// Mean of prod_{|u|=n} phi(t - S_u) over replicas. A replica that hits the
/// population cap contributes 0 from that generation on.
MartingaleDiag martingale_diag(const ReproductionLaw& law, const Profile& phi, double t, std::uint64_t generations,
                               std::uint64_t replicas, std::uint64_t seed, std::uint64_t pop_cap = 100000,
                               unsigned threads = 0);

}  // namespace cmjx
