#pragma once

// .mdn container:
//   "MDN1" | version u8 | codec u8 | flags u8 | width u16 BE | height u16 BE |
//   model hash u64 BE | 4 x (length u32 BE) | payloads
// Chunk order: ModeNet hyper, ModeNet main, CodecNet hyper, CodecNet main.
// The lengths are written up front, so the header is a fixed 35 bytes.

#include <array>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <vector>

#include "mdn/core/error.hpp"

namespace mdn {

enum class CodecMode : std::uint8_t { Image = 0, Difference = 1, Conditional = 2 };

inline const char* codec_mode_name(CodecMode m) {
  switch (m) {
    case CodecMode::Image: return "image";
    case CodecMode::Difference: return "difference";
    case CodecMode::Conditional: return "conditional";
  }
  return "?";
}

inline CodecMode parse_codec_mode(const std::string& s) {
  if (s == "image") return CodecMode::Image;
  if (s == "difference") return CodecMode::Difference;
  if (s == "conditional") return CodecMode::Conditional;
  throw ConfigError("unknown codec mode '" + s + "' (expected image, difference or conditional)");
}

namespace flags {
inline constexpr std::uint8_t kModeNet = 1u << 0;
inline constexpr std::uint8_t kCodecContext = 1u << 1;
inline constexpr std::uint8_t kModeContext = 1u << 2;
inline constexpr std::uint8_t kKnown = kModeNet | kCodecContext | kModeContext;
}  // namespace flags

enum Chunk : std::size_t { kModeHyper = 0, kModeMain = 1, kCodecHyper = 2, kCodecMain = 3 };

struct Bitstream {
  static constexpr char kMagic[4] = {'M', 'D', 'N', '1'};
  static constexpr std::uint8_t kVersion = 1;
  static constexpr std::size_t kHeaderBytes = 4 + 1 + 1 + 1 + 2 + 2 + 8 + 4 * 4;

  std::uint8_t version = kVersion;
  CodecMode codec = CodecMode::Conditional;
  std::uint8_t flags = 0;
  std::uint16_t width = 0;
  std::uint16_t height = 0;
  std::uint64_t model_hash = 0;
  std::array<std::vector<std::uint8_t>, 4> chunks;

  std::size_t payload_bytes() const {
    std::size_t n = 0;
    for (const auto& c : chunks) n += c.size();
    return n;
  }
  std::size_t total_bytes() const { return kHeaderBytes + payload_bytes(); }
  std::size_t pixels() const { return std::size_t{width} * height; }
  // Whole-file bits per pixel, header included.
  double bpp() const { return 8.0 * static_cast<double>(total_bytes()) / static_cast<double>(pixels()); }
  double payload_bpp() const { return 8.0 * static_cast<double>(payload_bytes()) / static_cast<double>(pixels()); }
  bool operator==(const Bitstream&) const = default;

  std::vector<std::uint8_t> serialize() const {
    std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
    out.push_back(version);
    out.push_back(static_cast<std::uint8_t>(codec));
    out.push_back(flags);
    auto put = [&](std::uint64_t v, int bytes) {
      for (int i = bytes - 1; i >= 0; --i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    };
    put(width, 2);
    put(height, 2);
    put(model_hash, 8);
    for (const auto& c : chunks) put(c.size(), 4);
    for (const auto& c : chunks) out.insert(out.end(), c.begin(), c.end());
    return out;
  }

  static Bitstream parse(std::span<const std::uint8_t> in) {
    if (in.size() < kHeaderBytes) throw FormatError("bitstream: truncated header (" + std::to_string(in.size()) + " bytes)");
    if (std::memcmp(in.data(), kMagic, 4) != 0) throw FormatError("bitstream: bad magic");
    std::size_t pos = 4;
    auto get = [&](int bytes) {
      std::uint64_t v = 0;
      for (int i = 0; i < bytes; ++i) v = (v << 8) | in[pos++];
      return v;
    };
    Bitstream bs;
    bs.version = static_cast<std::uint8_t>(get(1));
    if (bs.version != kVersion) throw FormatError("bitstream: unsupported version " + std::to_string(bs.version));
    const auto codec = get(1);
    if (codec > 2) throw FormatError("bitstream: unknown codec config " + std::to_string(codec));
    bs.codec = static_cast<CodecMode>(codec);
    bs.flags = static_cast<std::uint8_t>(get(1));
    if (bs.flags & ~flags::kKnown) throw FormatError("bitstream: unknown flag bits");
    bs.width = static_cast<std::uint16_t>(get(2));
    bs.height = static_cast<std::uint16_t>(get(2));
    if (bs.width == 0 || bs.height == 0) throw FormatError("bitstream: zero frame dimension");
    bs.model_hash = get(8);
    std::array<std::size_t, 4> len{};
    std::size_t total = 0;
    for (auto& l : len) total += (l = get(4));
    if (in.size() - kHeaderBytes != total) {
      throw FormatError("bitstream: chunk lengths sum to " + std::to_string(total) + " but payload has " +
                        std::to_string(in.size() - kHeaderBytes) + " bytes");
    }
    for (std::size_t i = 0; i < 4; ++i) {
      bs.chunks[i].assign(in.begin() + static_cast<std::ptrdiff_t>(pos),
                          in.begin() + static_cast<std::ptrdiff_t>(pos + len[i]));
      pos += len[i];
    }
    if (!(bs.flags & flags::kModeNet) && (!bs.chunks[kModeHyper].empty() || !bs.chunks[kModeMain].empty())) {
      throw FormatError("bitstream: ModeNet chunks present but ModeNet flag clear");
    }
    return bs;
  }
};

}  // namespace mdn
