#pragma once

#include <array>
#include <cstdint>
#include <vector>

namespace qvr {

/// Philox4x32-10 block function (Salmon et al., "Parallel random numbers: as
/// easy as 1, 2, 3"). Pure: the same (counter, key) always maps to the same
/// four output words.
struct Philox4x32 {
    using Counter = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    static Counter block(Counter counter, Key key);
};

/*!
 * Reproducible random stream addressed by (master seed, path).
 *
 * The path is a list of integers such as [replication, phase, stratum]. Each
 * distinct (seed, path) pair hashes to its own Philox key and counter prefix,
 * so streams never share state and a child stream depends only on its
 * address, not on how much its parent has been consumed. That is what makes
 * replication results independent of worker scheduling.
 */
class RngStream {
public:
    explicit RngStream(std::uint64_t master_seed, std::vector<std::uint64_t> path = {});

    /// Stream at path() + [id].
    [[nodiscard]] RngStream child(std::uint64_t id) const;

    std::uint64_t next_u64();

    /// Uniform on the open interval (0, 1), 53-bit resolution.
    double uniform();

    /// Standard normal by inversion; consumes exactly one uniform.
    double normal();

    /// Uniform integer in [0, bound). bound must be positive.
    std::uint64_t below(std::uint64_t bound);

    std::uint64_t master_seed() const { return seed_; }
    const std::vector<std::uint64_t>& path() const { return path_; }

private:
    void refill();

    std::uint64_t seed_;
    std::vector<std::uint64_t> path_;
    Philox4x32::Key key_{};
    std::uint64_t prefix_ = 0;    // upper 64 bits of the counter, fixed per stream
    std::uint64_t position_ = 0;  // lower 64 bits, advanced per block
    std::array<std::uint64_t, 2> buffer_{};
    unsigned buffered_ = 0;
};

/// SplitMix64 finalizer; used for key derivation.
std::uint64_t mix64(std::uint64_t x);

}  // namespace qvr
