#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace advdet {

// Deterministic random source. std::mt19937 is bit-exact across platforms;
// the distributions below are hand-rolled because the standard ones are
// implementation-defined.
class Rng {
public:
    explicit Rng(uint64_t seed)
        : engine_(static_cast<uint32_t>(seed ^ (seed >> 32))), seed_(seed) {}

    // Uniform in [0, 1).
    float uniform() {
        return static_cast<float>(engine_() >> 8) * (1.0f / 16777216.0f);
    }

    // Uniform in [lo, hi].
    float uniform(float lo, float hi) {
        return lo + (hi - lo) * uniform();
    }

    // Box-Muller.
    float normal(float mean = 0.0f, float stddev = 1.0f) {
        if (have_spare_) {
            have_spare_ = false;
            return mean + stddev * spare_;
        }
        float u1, u2;
        do {
            u1 = uniform();
        } while (u1 <= 1e-12f);
        u2 = uniform();
        float mag = std::sqrt(-2.0f * std::log(u1));
        spare_ = mag * std::sin(6.283185307179586f * u2);
        have_spare_ = true;
        return mean + stddev * mag * std::cos(6.283185307179586f * u2);
    }

    // Integer in [0, n).
    uint32_t next_below(uint32_t n) {
        return n == 0 ? 0 : engine_() % n;
    }

    uint32_t next_u32() { return engine_(); }

    // Derive an independent stream for a tagged sub-task. Forked streams keep
    // per-image work deterministic regardless of thread scheduling.
    Rng fork(uint64_t tag) const {
        uint64_t h = seed_ ^ (tag + 0x9e3779b97f4a7c15ULL + (seed_ << 6) + (seed_ >> 2));
        h ^= h >> 30; h *= 0xbf58476d1ce4e5b9ULL;
        h ^= h >> 27; h *= 0x94d049bb133111ebULL;
        h ^= h >> 31;
        return Rng(h);
    }

private:
    std::mt19937 engine_;
    uint64_t seed_ = 0;
    float spare_ = 0.0f;
    bool have_spare_ = false;
};

inline uint64_t hash_tag(std::string_view s) {
    uint64_t h = 14695981039346656037ULL;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ULL;
    }
    return h;
}

} // namespace advdet
