#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

#include "pixdiff/grid.hpp"

namespace pixdiff {

namespace detail {
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}
inline std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
}  // namespace detail

// Explicitly seeded random stream addressed by (seed, stream_id). Streams with
// different ids are statistically independent substreams of the same seed, so
// every component of a run can draw from its own stream and results stay
// bit-reproducible regardless of evaluation order. Uniforms come from
// xoshiro256++ seeded via splitmix64; normals from Box-Muller. Everything is
// spelled out here (no std::normal_distribution) so the byte stream is
// identical across standard libraries.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed, std::uint64_t stream_id = 0)
        : seed_(seed), stream_id_(stream_id) {
        std::uint64_t sm = seed ^ 0xA0761D6478BD642FULL;
        detail::splitmix64(sm);
        sm ^= stream_id * 0x8BB84B93962EACC9ULL + 0x2545F4914F6CDD1DULL;
        for (auto& w : s_) w = detail::splitmix64(sm);
        // xoshiro state must not be all zero; splitmix64 output never is for
        // all four words simultaneously, but keep the guard explicit.
        if ((s_[0] | s_[1] | s_[2] | s_[3]) == 0) s_[0] = 1;
    }

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream_id() const { return stream_id_; }

    // Derive an independent child stream; deterministic in (seed, stream, id).
    RngStream substream(std::uint64_t id) const {
        std::uint64_t mix = stream_id_ ^ 0x9E3779B97F4A7C15ULL;
        detail::splitmix64(mix);
        return RngStream(seed_, mix ^ (id + 0x165667B19E3779F9ULL));
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = detail::rotl(s_[0] + s_[3], 23) + s_[0];
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = detail::rotl(s_[3], 45);
        return result;
    }

    // Uniform on (0,1]; never returns 0 so it is safe under log().
    double uniform() { return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53; }

    // Uniform integer in [0, n).
    std::uint64_t uniform_index(std::uint64_t n) { return next_u64() % n; }

    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    void fill_normal(Grid& g) {
        for (double& x : g.v) x = normal();
    }

private:
    std::uint64_t s_[4] = {};
    std::uint64_t seed_ = 0;
    std::uint64_t stream_id_ = 0;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

inline NoiseField sample_standard_normal(Shape shape, RngStream& rng) {
    shape.validate();
    NoiseField g(shape);
    rng.fill_normal(g);
    return g;
}

}  // namespace pixdiff
