#pragma once

#include <cmath>
#include <cstdint>

namespace cmjx {

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z)
{
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Key of child `index` under `key`. Used for Ulam-Harris labels, replica
/// indices and named sub-streams alike.
constexpr std::uint64_t derive_key(std::uint64_t key, std::uint64_t index)
{
    return mix64(mix64(key ^ 0x5851f42d4c957f2dULL) + (index + 1) * 0xd1b54a32d192ed03ULL);
}

/// Counter-based random stream.
///
/// The i-th draw is a pure function of (key, i), so two streams built from the
/// same key produce identical sequences no matter where or when they run.
/// Satisfies UniformRandomBitGenerator, so the <random> distributions work.
class Stream
{
  public:
    using result_type = std::uint64_t;

    constexpr explicit Stream(std::uint64_t key) : key_(key) {}

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return ~result_type{0}; }

    constexpr result_type operator()()
    {
        return mix64(key_ + (++counter_) * 0x9e3779b97f4a7c15ULL);
    }

    /// Uniform on the open interval (0, 1).
    double uniform()
    {
        return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1p-53;
    }

    /// Unit-rate exponential.
    double exponential() { return -std::log(uniform()); }

    constexpr Stream split(std::uint64_t index) const
    {
        return Stream(derive_key(key_, index));
    }

    constexpr std::uint64_t key() const { return key_; }
    constexpr std::uint64_t draws() const { return counter_; }

  private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

}  // namespace cmjx
