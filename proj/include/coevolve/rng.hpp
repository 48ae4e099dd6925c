#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace coevolve::rng {

// 64-bit FNV-1a. Used for seed derivation and feature hashing; must stay
// stable across platforms, so no std::hash.
inline std::uint64_t fnv1a(std::string_view bytes,
                           std::uint64_t h = 14695981039346656037ull) {
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

// Named substream derivation: derive(seed, "eval") and derive(seed, "train", 7)
// give independent, reproducible streams.
inline std::uint64_t derive(std::uint64_t base, std::string_view tag) {
    return splitmix64(base ^ fnv1a(tag));
}

inline std::uint64_t derive(std::uint64_t base, std::string_view tag, std::uint64_t n) {
    return splitmix64(derive(base, tag) ^ splitmix64(n + 0x51ed270b76f44c6dull));
}

inline std::mt19937_64 make_engine(std::uint64_t seed) {
    return std::mt19937_64(splitmix64(seed));
}

// Uniform double in [0, 1) from the top 53 bits.
inline double uniform01(std::mt19937_64& g) {
    return static_cast<double>(g() >> 11) * 0x1.0p-53;
}

// Uniform index in [0, n) via fixed-point multiply (no modulo bias to speak of,
// and identical on every platform).
inline std::size_t uniform_index(std::mt19937_64& g, std::size_t n) {
    return static_cast<std::size_t>(
        (static_cast<unsigned __int128>(g()) * n) >> 64);
}

}  // namespace coevolve::rng
