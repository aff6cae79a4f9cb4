#pragma once

#include <cstdint>
#include <limits>
#include <random>

namespace usf {

// splitmix64 finalizer (Steele, Lea, Flood 2014).
std::uint64_t splitmix64_mix(std::uint64_t z);

// Seed for worker/task `index` under a master seed. Injective in `index`
// for a fixed master because the mix is a bijection of 64-bit words.
std::uint64_t derive_worker_seed(std::uint64_t master, std::uint64_t index);

class RngStream {
public:
    using result_type = std::uint64_t;

    RngStream(std::uint64_t seed, std::uint64_t stream);

    static constexpr result_type min() { return std::mt19937_64::min(); }
    static constexpr result_type max() { return std::mt19937_64::max(); }
    result_type operator()() { return engine_(); }

    // Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    // Uniform integer in [0, n), n > 0 (Lemire's nearly-divisionless method).
    std::uint32_t below(std::uint32_t n)
    {
        std::uint64_t x = engine_() >> 32;
        std::uint64_t m = x * n;
        auto low = static_cast<std::uint32_t>(m);
        if (low < n) {
            std::uint32_t threshold = static_cast<std::uint32_t>(-n) % n;
            while (low < threshold) {
                x = engine_() >> 32;
                m = x * n;
                low = static_cast<std::uint32_t>(m);
            }
        }
        return static_cast<std::uint32_t>(m >> 32);
    }

    bool bernoulli(double p) { return uniform() < p; }
    double exponential(double rate);

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream() const { return stream_; }

private:
    std::uint64_t seed_;
    std::uint64_t stream_;
    std::mt19937_64 engine_;
};

} // namespace usf
