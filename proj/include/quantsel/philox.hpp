#ifndef QUANTSEL_PHILOX_HPP
#define QUANTSEL_PHILOX_HPP

#include <array>
#include <cstdint>

namespace quantsel {

// Philox 4x32-10 counter-based generator. Every draw is a pure function of
// (seed, stream, block counter), so independent substreams of one master
// seed are obtained by fixing the stream word. Stream layout used across
// the project: stream = (purpose << 32) | index, see rng.hpp.
struct Philox4x32 {
  static constexpr std::uint32_t kMul0 = 0xD2511F53u;
  static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

  static std::array<std::uint32_t, 4> block(std::array<std::uint32_t, 4> ctr,
                                            std::array<std::uint32_t, 2> key) {
    for (int round = 0; round < 10; ++round) {
      const std::uint64_t prod0 = std::uint64_t(kMul0) * ctr[0];
      const std::uint64_t prod1 = std::uint64_t(kMul1) * ctr[2];
      const std::uint32_t hi0 = std::uint32_t(prod0 >> 32);
      const std::uint32_t lo0 = std::uint32_t(prod0);
      const std::uint32_t hi1 = std::uint32_t(prod1 >> 32);
      const std::uint32_t lo1 = std::uint32_t(prod1);
      ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
      key[0] += kWeyl0;
      key[1] += kWeyl1;
    }
    return ctr;
  }
};

}  // namespace quantsel

#endif  // QUANTSEL_PHILOX_HPP
