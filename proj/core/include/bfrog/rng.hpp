#pragma once

#include <array>
#include <cstdint>
#include <limits>

namespace bfrog {

/// Stable 64-bit mixer (splitmix64 finalizer).
std::uint64_t mix64(std::uint64_t x) noexcept;

/// Derives a substream seed from a root seed and a path of stream ids.
/// The mapping is a fixed hash, so the same (root, ids...) always yields the
/// same substream regardless of thread count or scheduling order.
std::uint64_t derive_seed(std::uint64_t root, std::uint64_t a) noexcept;
std::uint64_t derive_seed(std::uint64_t root, std::uint64_t a, std::uint64_t b) noexcept;
std::uint64_t derive_seed(std::uint64_t root, std::uint64_t a, std::uint64_t b,
                          std::uint64_t c) noexcept;

/// xoshiro256++ generator with built-in uniform / normal helpers.
///
/// Satisfies UniformRandomBitGenerator so it can also drive std::
/// distributions. Normals use the Marsaglia polar method with a cached
/// second variate; the cache is part of the generator state.
class Rng {
public:
    using result_type = std::uint64_t;

    explicit Rng(std::uint64_t seed = 0x9e3779b97f4a7c15ULL) noexcept;

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept {
        return std::numeric_limits<result_type>::max();
    }

    result_type operator()() noexcept;

    /// Uniform on [0, 1).
    double uniform() noexcept;
    /// Uniform on (0, 1].
    double uniform_pos() noexcept;
    double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
    double normal() noexcept;
    double exponential(double rate = 1.0) noexcept;
    std::uint64_t poisson(double mean);
    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) noexcept;

private:
    std::array<std::uint64_t, 4> s_{};
    double cached_normal_ = 0.0;
    bool has_cached_ = false;
};

}  // namespace bfrog
