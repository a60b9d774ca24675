#include "fastexit/rng.hpp"

#include <cmath>
#include <numbers>

namespace fastexit {

namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& lo, std::uint32_t& hi) {
    const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
    lo = static_cast<std::uint32_t>(p);
    hi = static_cast<std::uint32_t>(p >> 32);
}

// 53-bit uniform strictly inside (0, 1).
inline double to_open_unit(std::uint32_t hi, std::uint32_t lo) {
    const std::uint64_t bits = (static_cast<std::uint64_t>(hi) << 21) ^ (lo >> 11);
    return (static_cast<double>(bits & ((1ULL << 53) - 1)) + 0.5) * 0x1.0p-53;
}

}  // namespace

std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> ctr, std::array<std::uint32_t, 2> key) {
    for (int round = 0; round < 10; ++round) {
        std::uint32_t lo0, hi0, lo1, hi1;
        mulhilo(kMul0, ctr[0], lo0, hi0);
        mulhilo(kMul1, ctr[2], lo1, hi1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
        key[0] += kWeyl0;
        key[1] += kWeyl1;
    }
    return ctr;
}

std::array<std::uint32_t, 4> RngStream::block(std::uint64_t step, std::uint32_t slot) const {
    const std::array<std::uint32_t, 4> ctr{slot, static_cast<std::uint32_t>(step),
                                           static_cast<std::uint32_t>(step >> 32),
                                           static_cast<std::uint32_t>(stream_)};
    // High stream bits are folded into the key so 64-bit stream ids stay distinct.
    const std::array<std::uint32_t, 2> key{static_cast<std::uint32_t>(seed_),
                                           static_cast<std::uint32_t>(seed_ >> 32) ^
                                               static_cast<std::uint32_t>(stream_ >> 32)};
    return philox4x32_10(ctr, key);
}

double RngStream::normal(std::uint64_t step, std::uint32_t slot) const {
    const auto b = block(step, slot);
    // Box-Muller: one variate per block keeps the keying one-to-one.
    const double u1 = to_open_unit(b[0], b[1]);
    const double u2 = to_open_unit(b[2], b[3]);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double RngStream::uniform(std::uint64_t step, std::uint32_t slot) const {
    const auto b = block(step, slot);
    return to_open_unit(b[0], b[1]);
}

}  // namespace fastexit
