#pragma once

#include <cstdint>
#include <random>

namespace cpve {

using rng_stream = std::mt19937_64;

// SplitMix64 step. Used only to whiten seeds, never as the simulation generator.
inline std::uint64_t splitmix64_next(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

// Generator for one replication, derived from (master_seed, index) alone.
// Replications therefore do not depend on scheduling or worker count.
inline rng_stream replication_stream(std::uint64_t master_seed, std::uint64_t index) {
    std::uint64_t s = master_seed ^ (0xd1b54a32d192ed03ull * (index + 1));
    std::uint64_t a = splitmix64_next(s);
    std::uint64_t b = splitmix64_next(s);
    std::uint64_t c = splitmix64_next(s);
    std::uint64_t d = splitmix64_next(s);
    std::seed_seq seq{
        static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
        static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32),
        static_cast<std::uint32_t>(c), static_cast<std::uint32_t>(c >> 32),
        static_cast<std::uint32_t>(d), static_cast<std::uint32_t>(d >> 32)};
    return rng_stream(seq);
}

// Named sub-stream of a master seed (e.g. one per report section).
inline std::uint64_t derive_seed(std::uint64_t master_seed, std::uint64_t salt) {
    std::uint64_t s = master_seed + 0x9e3779b97f4a7c15ull * salt;
    splitmix64_next(s);
    return splitmix64_next(s);
}

} // namespace cpve
