#include "alcove/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace alcove {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace

Index Rng::uniform_index(Index n) {
    if (n <= 0) throw std::invalid_argument("uniform_index: n must be positive");
    const auto range = static_cast<std::uint64_t>(n);
    // Rejection sampling removes modulo bias.
    const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % range);
    std::uint64_t x;
    do {
        x = engine_();
    } while (x >= limit);
    return static_cast<Index>(x % range);
}

double Rng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u, v, s;
    do {
        u = 2.0 * uniform() - 1.0;
        v = 2.0 * uniform() - 1.0;
        s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    has_spare_ = true;
    return u * f;
}

std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag, std::uint64_t salt) {
    return splitmix64(splitmix64(seed) ^ fnv1a(tag) ^ splitmix64(salt + 0x632be59bd9b4e019ULL));
}

IndexList sample_without_replacement(const IndexList& items, Index b, Rng& rng) {
    const auto n = static_cast<Index>(items.size());
    if (b < 0 || b > n) throw std::invalid_argument("sample_without_replacement: b must lie in [0, n]");
    IndexList pool = items;
    for (Index i = 0; i < b; ++i) std::swap(pool[i], pool[i + rng.uniform_index(n - i)]);
    pool.resize(static_cast<std::size_t>(b));
    return pool;
}

}  // namespace alcove
