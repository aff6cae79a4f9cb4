#include "usf/rng.hpp"

#include <cmath>

namespace usf {

std::uint64_t splitmix64_mix(std::uint64_t z)
{
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

std::uint64_t derive_worker_seed(std::uint64_t master, std::uint64_t index)
{
    return splitmix64_mix(master + (index + 1) * 0x9E3779B97F4A7C15ULL);
}

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream)
    : seed_(seed), stream_(stream), engine_(derive_worker_seed(seed, stream))
{
}

double RngStream::exponential(double rate)
{
    // 1 - U lies in (0, 1], so the log is finite.
    return -std::log1p(-uniform()) / rate;
}

} // namespace usf
