#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>

namespace cmjx {

struct BinomialEstimate
{
    std::uint64_t successes = 0;
    std::uint64_t trials = 0;
    double p_hat = 0.0;
    double se = 0.0;       // sqrt(p(1-p)/n)
    double ci_lo = 0.0;    // Wilson 95%
    double ci_hi = 0.0;
};

BinomialEstimate binomial_estimate(std::uint64_t successes, std::uint64_t trials, double z = 1.959963984540054);

/// Running mean / variance (Welford).
class RunningMoments
{
  public:
    void add(double x);
    std::uint64_t count() const { return n_; }
    double mean() const { return mean_; }
    double variance() const;  // unbiased
    double standard_error() const;

  private:
    std::uint64_t n_ = 0;
    double mean_ = 0.0;
    double m2_ = 0.0;
};

/// Thread count from an explicit request, else the CMJX_THREADS env var, else 1.
unsigned resolve_threads(unsigned requested);

/// Runs body(i) for i in [0, n) on `threads` workers. Work is split into
/// contiguous blocks; results must be written to per-index slots so the outcome
/// does not depend on the thread count.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& body);

}  // namespace cmjx
