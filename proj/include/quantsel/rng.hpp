#ifndef QUANTSEL_RNG_HPP
#define QUANTSEL_RNG_HPP

#include <cstdint>

#include "quantsel/normal.hpp"
#include "quantsel/philox.hpp"

namespace quantsel {

// Named substream purposes. One master seed plus a (purpose, index) pair
// identifies a stream; streams never overlap because the pair lands in the
// upper counter words of the Philox block.
enum class Stream : std::uint32_t {
  covariates = 1,
  noise = 2,
  split = 3,
  sampler = 4,
  test_covariates = 5,
  test_noise = 6,
  generic = 7,
};

inline std::uint64_t substream(Stream purpose, std::uint64_t index = 0) {
  return (std::uint64_t(purpose) << 32) | (index & 0xFFFFFFFFull);
}

class Rng {
 public:
  Rng(std::uint64_t seed, std::uint64_t stream)
      : key_{std::uint32_t(seed), std::uint32_t(seed >> 32)},
        stream_lo_(std::uint32_t(stream)),
        stream_hi_(std::uint32_t(stream >> 32)) {}

  Rng(std::uint64_t seed, Stream purpose, std::uint64_t index = 0)
      : Rng(seed, substream(purpose, index)) {}

  std::uint64_t next_u64() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const auto out = Philox4x32::block(
        {std::uint32_t(block_), std::uint32_t(block_ >> 32), stream_lo_,
         stream_hi_},
        key_);
    ++block_;
    spare_ = (std::uint64_t(out[2]) << 32) | out[3];
    have_spare_ = true;
    return (std::uint64_t(out[0]) << 32) | out[1];
  }

  // Uniform on the open interval (0,1); 52 random bits centered in each cell
  // so 0 and 1 are unreachable.
  double uniform() {
    const std::uint64_t bits = next_u64() >> 12;
    return (double(bits) + 0.5) * 0x1.0p-52;
  }

  double normal() { return inverse_normal_cdf(uniform()); }

  // Unbiased integer in [0, n) by rejection.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t v;
    do {
      v = next_u64();
    } while (v >= limit);
    return v % n;
  }

 private:
  std::array<std::uint32_t, 2> key_;
  std::uint32_t stream_lo_;
  std::uint32_t stream_hi_;
  std::uint64_t block_ = 0;
  std::uint64_t spare_ = 0;
  bool have_spare_ = false;
};

}  // namespace quantsel

#endif  // QUANTSEL_RNG_HPP
