#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace surrmeta {

// Stable 64-bit string hash (std::hash is not pinned across standard libraries).
inline std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

// Independent substream keyed by (seed, stream index). Substream indexing by
// replicate/marker number keeps results independent of thread scheduling.
inline std::mt19937_64 substream(std::uint64_t seed, std::uint64_t stream) {
    return std::mt19937_64(mix64(mix64(seed) ^ mix64(stream + 0x51ed270b)));
}

inline std::mt19937_64 substream(std::uint64_t seed, std::string_view tag, std::uint64_t stream = 0) {
    return substream(mix64(seed) ^ fnv1a(tag), stream);
}

} // namespace surrmeta
