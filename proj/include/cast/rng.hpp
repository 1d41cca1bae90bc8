#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace cast {

using rng_t = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

// Counter-based stream derivation: the seed for (master, a, b, ...) depends only
// on those values, so adding an agent or a trial never shifts another stream.
inline std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> path) {
    std::uint64_t h = splitmix64(master);
    for (auto p : path) h = splitmix64(h ^ splitmix64(p + 0x632BE59BD9B4E019ull));
    return h;
}

enum class stream : std::uint64_t { truth = 1, noise = 2, planner = 3, comms = 4 };

inline rng_t make_rng(std::uint64_t master, std::initializer_list<std::uint64_t> path) {
    return rng_t{derive_seed(master, path)};
}

} // namespace cast
