// rng.hpp - counter-based random streams keyed by (seed, subject, slice, epoch).
//
// Draw i of a stream is a pure function of (key, i), so results never depend
// on how work is scheduled across threads.

#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace cardioaug {

struct SeedSpec {
    std::uint64_t global_seed = 0;
    std::string subject;
    std::uint32_t slice = 0;
    std::uint32_t epoch = 0;
};

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// FNV-1a over the bytes of `s`.
std::uint64_t hash_string(std::string_view s) noexcept;

class RandomStream {
  public:
    explicit RandomStream(std::uint64_t key) noexcept : key_(key) {}

    std::uint64_t next_u64() noexcept;
    /// Uniform in [0, 1), 53-bit resolution.
    double uniform() noexcept;
    /// Uniform in [lo, hi).
    double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
    bool bernoulli(double p) noexcept { return uniform() < p; }

    /// Independent child stream; does not advance this one.
    RandomStream split(std::uint64_t tag) const noexcept;

    std::uint64_t key() const noexcept { return key_; }
    std::uint64_t position() const noexcept { return counter_; }

  private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

RandomStream make_stream(const SeedSpec &seed) noexcept;

} // namespace cardioaug
