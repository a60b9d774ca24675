#pragma once

// Counter-based Gaussian source. A draw is a pure function of
// (seed, stream, step, slot), so path ensembles reproduce bit-for-bit under
// any thread schedule.

#include <array>
#include <cstdint>

namespace fastexit {

/// Philox4x32 with 10 rounds.
std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> counter,
                                           std::array<std::uint32_t, 2> key);

class RngStream {
public:
    RngStream(std::uint64_t seed, std::uint64_t stream) : seed_(seed), stream_(stream) {}

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream() const { return stream_; }

    /// Standard normal keyed by (step, slot); does not touch the sequence.
    double normal(std::uint64_t step, std::uint32_t slot) const;
    /// Uniform on (0, 1) keyed by (step, slot).
    double uniform(std::uint64_t step, std::uint32_t slot) const;

    /// Sequential draws: the i-th call returns normal(i, kSequentialSlot).
    double next_normal() { return normal(position_++, kSequentialSlot); }
    std::uint64_t position() const { return position_; }

    static constexpr std::uint32_t kSequentialSlot = 0xFFFFFFFFu;

private:
    std::array<std::uint32_t, 4> block(std::uint64_t step, std::uint32_t slot) const;

    std::uint64_t seed_;
    std::uint64_t stream_;
    std::uint64_t position_ = 0;
};

}  // namespace fastexit
