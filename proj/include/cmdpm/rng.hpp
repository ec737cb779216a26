#pragma once

#include <cstdint>
#include <limits>

namespace cmdpm {

/// Counter-based SplitMix64 stream. Output i of stream (seed, key) depends
/// only on (seed, key, i), so independent streams can be handed to workers
/// without any ordering between them.
class CounterRng {
public:
    using result_type = std::uint64_t;

    explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0)
        : key_(mix(seed ^ mix(stream + 0x632BE59BD9B4E019ULL))) {}

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()() { return mix(key_ + (++counter_) * 0x9E3779B97F4A7C15ULL); }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

    std::uint64_t position() const { return counter_; }

    static constexpr std::uint64_t mix(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

} // namespace cmdpm
