#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <vector>

namespace kmefda {

/// SplitMix64 output finalizer (Stafford "Mix13" constants).
constexpr std::uint64_t mix64(std::uint64_t z) noexcept
{
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Derives a child stream key from a parent key and a list of integer tags.
/// The parent is whitened first, then each tag is absorbed as
/// key <- mix64(key ^ mix64(tag * C + D)). Order matters: {a, b} and {b, a}
/// give unrelated keys.
std::uint64_t derive_key(std::uint64_t parent, std::initializer_list<std::uint64_t> tags) noexcept;

/// Counter-based 64-bit generator.
///
/// The i-th output of a stream with key k is mix64(k + (i + 1) * 0x9E3779B97F4A7C15),
/// i.e. SplitMix64 evaluated at an explicit counter. The value depends only on
/// (key, i), so streams can be created and consumed on any thread without
/// coordination, and results are bit-identical across platforms for the integer
/// outputs. Real-valued draws use the conversions below, which rely only on IEEE
/// arithmetic plus std::log/std::sqrt/std::cos.
class CounterRng {
public:
    using result_type = std::uint64_t;

    explicit CounterRng(std::uint64_t key) noexcept : key_(key) {}

    /// Stream for (seed, tags...), e.g. CounterRng::stream(seed, {cell, replicate}).
    static CounterRng stream(std::uint64_t seed, std::initializer_list<std::uint64_t> tags) noexcept
    {
        return CounterRng(derive_key(seed, tags));
    }

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return ~result_type{0}; }

    result_type operator()() noexcept { return next_u64(); }

    std::uint64_t next_u64() noexcept
    {
        ++counter_;
        return mix64(key_ + counter_ * 0x9E3779B97F4A7C15ULL);
    }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Unbiased integer in [0, bound) (Lemire's multiply-and-reject).
    std::uint64_t below(std::uint64_t bound) noexcept;

    /// Standard normal via the Box-Muller transform; the second variate is cached.
    double normal() noexcept;

    /// Gamma(shape, 1) via Marsaglia-Tsang.
    double gamma(double shape) noexcept;

    [[nodiscard]] std::uint64_t key() const noexcept { return key_; }
    [[nodiscard]] std::uint64_t counter() const noexcept { return counter_; }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
    double cached_normal_ = 0.0;
    bool has_cached_ = false;
};

/// Uniformly random permutation of {0, ..., n-1} by Fisher-Yates.
std::vector<std::size_t> random_permutation(std::size_t n, CounterRng& rng);

}  // namespace kmefda
