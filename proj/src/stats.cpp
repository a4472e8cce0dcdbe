#include "cmjx/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace cmjx {

BinomialEstimate binomial_estimate(std::uint64_t successes, std::uint64_t trials, double z)
{
    BinomialEstimate e;
    e.successes = successes;
    e.trials = trials;
    if (trials == 0)
    {
        e.ci_hi = 1.0;
        return e;
    }
    const double n = static_cast<double>(trials);
    const double p = static_cast<double>(successes) / n;
    e.p_hat = p;
    e.se = std::sqrt(p * (1.0 - p) / n);
    const double z2 = z * z;
    const double centre = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
    const double half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / (1.0 + z2 / n);
    e.ci_lo = std::max(0.0, centre - half);
    e.ci_hi = std::min(1.0, centre + half);
    if (successes == 0)
        e.ci_lo = 0.0;
    if (successes == trials)
        e.ci_hi = 1.0;
    return e;
}

void RunningMoments::add(double x)
{
    ++n_;
    const double d = x - mean_;
    mean_ += d / static_cast<double>(n_);
    m2_ += d * (x - mean_);
}

double RunningMoments::variance() const
{
    return n_ > 1 ? m2_ / static_cast<double>(n_ - 1) : 0.0;
}

double RunningMoments::standard_error() const
{
    return n_ > 0 ? std::sqrt(variance() / static_cast<double>(n_)) : 0.0;
}

unsigned resolve_threads(unsigned requested)
{
    if (requested > 0)
        return requested;
    if (const char* env = std::getenv("CMJX_THREADS"))
    {
        try
        {
            const long v = std::stol(env);
            if (v > 0)
                return static_cast<unsigned>(v);
        }
        catch (const std::exception&)
        {
        }
    }
    return 1;
}

void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& body)
{
    threads = std::max(1u, threads);
    if (threads == 1 || n < 2)
    {
        for (std::size_t i = 0; i < n; ++i)
            body(i);
        return;
    }
    const std::size_t workers = std::min<std::size_t>(threads, n);
    std::vector<std::thread> pool;
    std::exception_ptr failure;
    std::mutex failure_mutex;
    for (std::size_t w = 0; w < workers; ++w)
    {
        const std::size_t begin = n * w / workers;
        const std::size_t end = n * (w + 1) / workers;
        pool.emplace_back([&, begin, end] {
            try
            {
                for (std::size_t i = begin; i < end; ++i)
                    body(i);
            }
            catch (...)
            {
                std::lock_guard lock(failure_mutex);
                if (!failure)
                    failure = std::current_exception();
            }
        });
    }
    for (auto& t : pool)
        t.join();
    if (failure)
        std::rethrow_exception(failure);
}

}  // namespace cmjx
