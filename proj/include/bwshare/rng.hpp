#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace bwshare {

// splitmix64, used to derive independent stream seeds from a base seed.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

// Derive a stream seed from (base, a, b). Streams for distinct tags never
// collide in practice; the mapping is fixed so runs are reproducible.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0) {
    std::uint64_t s = base;
    std::uint64_t x = splitmix64(s);
    s = x ^ (a * 0x9e3779b97f4a7c15ull + 0x2545f4914f6cdd1dull);
    x = splitmix64(s);
    s = x ^ (b * 0xda942042e4dd58b5ull + 0x1d8e4e27c47d124full);
    return splitmix64(s);
}

// Deterministic random stream. mt19937_64 output is pinned by the standard
// and the variate transforms below avoid the implementation-defined
// std::*_distribution classes, so sample paths are bit-reproducible
// across platforms and compilers.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed) : engine_(seed) {}

    // uniform in [0, 1)
    double uniform() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    // uniform in (0, 1]
    double uniform_open() { return 1.0 - uniform(); }

    double exponential(double rate) {
        return -std::log(uniform_open()) / rate;
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace bwshare
