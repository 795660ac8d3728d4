#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace hypotube {

// Philox4x32-10 counter-based generator (Salmon et al., "Parallel random
// numbers: as easy as 1, 2, 3", SC 2011). Streams are addressed by
// (seed, stream index, block index), so draws are independent of execution
// order and thread count.
namespace philox {

using Counter = std::array<std::uint32_t, 4>;
using Key = std::array<std::uint32_t, 2>;

constexpr std::uint32_t kM0 = 0xD2511F53u;
constexpr std::uint32_t kM1 = 0xCD9E8D57u;
constexpr std::uint32_t kW0 = 0x9E3779B9u;
constexpr std::uint32_t kW1 = 0xBB67AE85u;

inline void round_once(Counter& c, const Key& k) {
    const std::uint64_t p0 = static_cast<std::uint64_t>(kM0) * c[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(kM1) * c[2];
    const std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const std::uint32_t lo0 = static_cast<std::uint32_t>(p0);
    const std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const std::uint32_t lo1 = static_cast<std::uint32_t>(p1);
    c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
}

inline Counter block(Counter c, Key k) {
    for (int r = 0; r < 10; ++r) {
        if (r > 0) {
            k[0] += kW0;
            k[1] += kW1;
        }
        round_once(c, k);
    }
    return c;
}

}  // namespace philox

namespace detail {
inline double u53(std::uint32_t hi, std::uint32_t lo) {
    const std::uint64_t bits = (static_cast<std::uint64_t>(hi) << 32) | lo;
    return static_cast<double>(bits >> 11) * 0x1.0p-53;
}
}  // namespace detail

/// Stream of independent N(0,1) draws for one (seed, stream) pair.
/// Box-Muller on 53-bit uniforms; two normals per Philox block.
class NormalStream {
  public:
    NormalStream(std::uint64_t seed, std::uint64_t stream)
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
          stream_lo_(static_cast<std::uint32_t>(stream)),
          stream_hi_(static_cast<std::uint32_t>(stream >> 32)) {}

    double next() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const philox::Counter out = next_block();
        const double u1 =
            (static_cast<double>((static_cast<std::uint64_t>(out[0]) << 32 | out[1]) >> 11) + 1.0) *
            0x1.0p-53;  // in (0, 1]: keeps log(u1) finite
        const double u2 = detail::u53(out[2], out[3]);
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

  private:
    philox::Counter next_block() {
        philox::Counter c{stream_lo_, stream_hi_, static_cast<std::uint32_t>(block_),
                          static_cast<std::uint32_t>(block_ >> 32)};
        ++block_;
        return philox::block(c, key_);
    }

    philox::Key key_;
    std::uint32_t stream_lo_, stream_hi_;
    std::uint64_t block_ = 0;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

/// Stream of uniforms in [0,1) on the same addressing scheme; used by the
/// randomized property suites.
class UniformStream {
  public:
    UniformStream(std::uint64_t seed, std::uint64_t stream)
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
          stream_lo_(static_cast<std::uint32_t>(stream)),
          stream_hi_(static_cast<std::uint32_t>(stream >> 32)) {}

    double next() {
        if (pos_ == 2) {
            buf_ = philox::block({stream_lo_, stream_hi_, static_cast<std::uint32_t>(block_),
                                  static_cast<std::uint32_t>(block_ >> 32)},
                                 key_);
            ++block_;
            pos_ = 0;
        }
        const int k = 2 * pos_++;
        return detail::u53(buf_[k], buf_[k + 1]);
    }

    /// Uniform in [lo, hi).
    double range(double lo, double hi) { return lo + (hi - lo) * next(); }

  private:
    philox::Key key_;
    std::uint32_t stream_lo_, stream_hi_;
    std::uint64_t block_ = 0;
    philox::Counter buf_{};
    int pos_ = 2;
};

}  // namespace hypotube
