#pragma once

// 64-bit range coder with 16-bit frequencies and carry propagation (a cached
// byte plus a run of pending 0xFF bytes, as in LZMA). The range stays in
// [2^56, 2^64), so the truncation r = range >> 16 costs under 2^-40 bits per
// decision. Every stream ends with a fixed 2^-16 sentinel decision and a
// one-byte flush; trailing zero bytes are dropped and the decoder pads with
// zeros. The decoder checks the sentinel, the flush value and the exact
// length, so truncated, extended or corrupted streams are reported instead of
// decoding to garbage (a corrupted stream passes with probability ~2^-16).

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "mdn/core/error.hpp"

namespace mdn {

namespace rc {
inline constexpr std::uint64_t kTop = 1ULL << 56;
inline constexpr int kFreqBits = 16;
inline constexpr std::uint32_t kSentinelCum = 0xA5C3;

// Shortest big-endian prefix (in bytes) of a value in [low, low + range) and
// that value, zero past the prefix. May exceed 2^64 (a final carry).
inline std::pair<int, unsigned __int128> flush_value(std::uint64_t low, std::uint64_t range) {
  const unsigned __int128 hi = static_cast<unsigned __int128>(low) + range;
  for (int bytes = 0; bytes < 8; ++bytes) {
    const unsigned __int128 unit = static_cast<unsigned __int128>(1) << (64 - 8 * bytes);
    const unsigned __int128 v = (static_cast<unsigned __int128>(low) + unit - 1) / unit * unit;
    if (v < hi) return {bytes, v};
  }
  return {8, low};
}
}  // namespace rc

class RangeEncoder {
 public:
  void encode(std::uint32_t cum, std::uint32_t freq) {
    if (freq == 0 || cum + freq > (1u << rc::kFreqBits)) throw ValueError("range coder: invalid frequency slice");
    const std::uint64_t r = range_ >> rc::kFreqBits;
    low_ += static_cast<unsigned __int128>(r) * cum;
    range_ = r * freq;
    while (range_ < rc::kTop) {
      range_ <<= 8;
      shift();
    }
  }

  // Encodes the low `nbits` (<= 16) of v with uniform probability.
  void encode_bits(std::uint32_t v, int nbits) {
    encode(v << (rc::kFreqBits - nbits), 1u << (rc::kFreqBits - nbits));
  }

  std::vector<std::uint8_t> finish() {
    encode(rc::kSentinelCum, 1);
    const unsigned __int128 carry = low_ >> 64 << 64;
    const auto [bytes, v] = rc::flush_value(static_cast<std::uint64_t>(low_), range_);
    low_ = carry + v;
    for (int i = 0; i < bytes; ++i) shift();
    // Drain the cache; any carry has been absorbed by now.
    const auto c = static_cast<std::uint8_t>(low_ >> 64);
    if (have_cache_) out_.push_back(static_cast<std::uint8_t>(cache_ + c));
    for (; pending_ > 0; --pending_) out_.push_back(static_cast<std::uint8_t>(0xFF + c));
    while (!out_.empty() && out_.back() == 0) out_.pop_back();
    return std::move(out_);
  }

 private:
  void shift() {
    const auto top = static_cast<std::uint32_t>(low_ >> 56);  // carry bit + top byte
    if (top != 0xFF) {
      const auto carry = static_cast<std::uint8_t>(top >> 8);
      if (have_cache_) out_.push_back(static_cast<std::uint8_t>(cache_ + carry));
      for (; pending_ > 0; --pending_) out_.push_back(static_cast<std::uint8_t>(0xFF + carry));
      cache_ = static_cast<std::uint8_t>(top);
      have_cache_ = true;
    } else {
      ++pending_;
    }
    low_ = (low_ & (rc::kTop - 1)) << 8;
  }

  unsigned __int128 low_ = 0;
  std::uint64_t range_ = ~0ULL;
  std::uint8_t cache_ = 0;
  bool have_cache_ = false;
  std::size_t pending_ = 0;
  std::vector<std::uint8_t> out_;
};

class RangeDecoder {
 public:
  explicit RangeDecoder(std::span<const std::uint8_t> data) : data_(data) {
    for (int i = 0; i < 8; ++i) window_ = (window_ << 8) | next();
  }

  // Position of the next symbol inside [0, 2^16); must be followed by consume().
  std::uint32_t target() {
    r_ = range_ >> rc::kFreqBits;
    const std::uint64_t v = (window_ - low_) / r_;
    return v >= (1u << rc::kFreqBits) ? (1u << rc::kFreqBits) - 1 : static_cast<std::uint32_t>(v);
  }

  void consume(std::uint32_t cum, std::uint32_t freq) {
    low_ += r_ * cum;
    range_ = r_ * freq;
    while (range_ < rc::kTop) {
      range_ <<= 8;
      low_ <<= 8;
      window_ = (window_ << 8) | next();
      ++shifts_;
    }
  }

  std::uint32_t decode_bits(int nbits) {
    const int shift = rc::kFreqBits - nbits;
    const std::uint32_t v = target() >> shift;
    consume(v << shift, 1u << shift);
    return v;
  }

  // Verifies the sentinel and that the stream is exactly the encoder's output.
  void finish() {
    if (target() != rc::kSentinelCum) {
      throw FormatError("range decoder: end-of-stream marker mismatch (truncated or corrupt)");
    }
    consume(rc::kSentinelCum, 1);
    const auto [bytes, v] = rc::flush_value(low_, range_);
    if (window_ != static_cast<std::uint64_t>(v)) throw FormatError("range decoder: corrupt stream tail");
    const std::size_t coded = shifts_ + static_cast<std::size_t>(bytes);
    if (data_.size() > coded || (!data_.empty() && data_.back() == 0)) {
      throw FormatError("range decoder: stream length " + std::to_string(data_.size()) +
                        " does not match coded length " + std::to_string(coded));
    }
  }

 private:
  std::uint8_t next() { return pos_ < data_.size() ? data_[pos_++] : (++pos_, 0); }

  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
  std::size_t shifts_ = 0;
  std::uint64_t low_ = 0;
  std::uint64_t range_ = ~0ULL;
  std::uint64_t window_ = 0;
  std::uint64_t r_ = 0;
};

}  // namespace mdn
