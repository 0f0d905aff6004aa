#pragma once

#include <cstdint>
#include <string_view>

namespace posellm {

// Deterministic, platform-independent generator (splitmix64 core).
// std::* distributions are implementation-defined, so everything that
// feeds reproducible artifacts goes through this class instead.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed) {}

    uint64_t next_u64();

    // [0, 1), 53-bit resolution
    double uniform();
    double uniform(double lo, double hi);

    // [0, n), unbiased via rejection
    uint64_t uniform_int(uint64_t n);

    // standard normal, Box-Muller (no cached spare; two uniforms per draw)
    double normal();

    // normal(0, std) resampled until |z| <= 2*std
    double trunc_normal(double std_dev);

    uint64_t state() const { return state_; }
    void set_state(uint64_t s) { state_ = s; }

private:
    uint64_t state_;
};

// FNV-1a over bytes; used for config hashes and per-name seed derivation.
uint64_t fnv1a(std::string_view bytes, uint64_t seed = 0xcbf29ce484222325ull);

// Stable per-parameter seed so init values do not depend on creation order.
inline uint64_t derive_seed(uint64_t root, std::string_view name) {
    return fnv1a(name, root ^ 0x9e3779b97f4a7c15ull) | 1ull;
}

}  // namespace posellm
