#pragma once

#include <cstdint>

namespace hdinfer {

/// Deterministic counter-seeded generator used everywhere randomness is
/// needed. Each logical stream (rep, fold shuffle, ...) gets its own
/// instance derived from (seed, stream index), so results do not depend
/// on execution order across threads.
///
/// Core is splitmix64; normals come from Box-Muller (documented, fixed
/// choice — no reliance on implementation-defined std distributions).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    /// Stream derivation: mixes a stream index into a seed.
    static Rng substream(std::uint64_t seed, std::uint64_t stream);

    /// Deterministic child seed for handing to independent components.
    static std::uint64_t derive(std::uint64_t seed, std::uint64_t tag);

    std::uint64_t next_u64();

    /// Uniform on (0, 1); never returns 0 or 1.
    double uniform();

    /// Standard normal via Box-Muller; the paired draw is cached.
    double normal();

    /// Uniform integer in [0, bound) by rejection; bound > 0.
    std::uint64_t uniform_int(std::uint64_t bound);

private:
    std::uint64_t state_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

} // namespace hdinfer
