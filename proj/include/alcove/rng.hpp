#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include "alcove/types.hpp"

namespace alcove {

// Thin wrapper over mt19937_64. The distributions are written out by hand
// because the std:: ones are implementation-defined and we want identical
// streams across standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    // Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    // Uniform integer in [0, n). n must be positive.
    Index uniform_index(Index n);

    bool bernoulli(double p) { return uniform() < p; }

    // Standard normal via the Marsaglia polar method.
    double normal();

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

// Mixes (seed, tag, salt) into an independent stream seed so that each
// purpose (training, querying, init, ...) gets its own stream.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag, std::uint64_t salt = 0);

// Uniform sample of `b` items without replacement (partial Fisher-Yates),
// returned in draw order.
IndexList sample_without_replacement(const IndexList& items, Index b, Rng& rng);

}  // namespace alcove
