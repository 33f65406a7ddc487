#pragma once

#include <algorithm>

#include "mdn/entropy/cdf_table.hpp"
#include "mdn/entropy/range_coder.hpp"

namespace mdn {

inline void check_symbol(int s) {
  if (s < -kSymbolBound || s > kSymbolBound) {
    throw RangeError("symbol " + std::to_string(s) + " outside [-" + std::to_string(kSymbolBound) + ", " +
                     std::to_string(kSymbolBound) + "]");
  }
}

inline void encode_symbol(RangeEncoder& enc, const SymbolModel& m, int s) {
  check_symbol(s);
  symbol_steps(m, s, [&](CodeStep c) { enc.encode(c.cum, c.freq); });
}

namespace detail {
// Reads one binary decision whose first outcome occupies [0, f).
inline bool decode_first(RangeDecoder& dec, std::uint32_t f) {
  if (dec.target() < f) {
    dec.consume(0, f);
    return true;
  }
  dec.consume(f, kProbTotal - f);
  return false;
}
}  // namespace detail

inline int decode_symbol(RangeDecoder& dec, const SymbolModel& m) {
  const CdfBank& bank = CdfBank::instance();
  const CdfRow& r = bank.row(m.row);
  const auto cdf = bank.cdf(r);
  const std::uint32_t t = dec.target();
  const auto idx = static_cast<std::size_t>(std::upper_bound(cdf.begin(), cdf.end(), t) - cdf.begin() - 1);
  dec.consume(cdf[idx], cdf[idx + 1] - cdf[idx]);
  auto checked = [](long s) {
    if (s < -kSymbolBound || s > kSymbolBound) throw FormatError("decoded symbol outside alphabet");
    return static_cast<int>(s);
  };
  if (idx < static_cast<std::size_t>(r.count)) return checked(static_cast<long>(m.base) + r.lo + static_cast<long>(idx));

  const bool left = detail::decode_first(dec, r.left_freq);
  long q = 0;
  while (q < kMaxTailGroups && detail::decode_first(dec, r.continue_freq)) ++q;
  if (q == kMaxTailGroups) {
    const int s = checked(static_cast<long>(dec.decode_bits(kRawSymbolBits)) - kSymbolBound);
    const long d = static_cast<long>(s) - m.base;
    const long excess = left ? r.lo - 1 - d : d - (r.lo + r.count);
    if (excess < 0 || (excess >> r.golomb_k) < kMaxTailGroups) throw FormatError("non-canonical escape code");
    return s;
  }
  long rem = 0;
  for (int bit = r.golomb_k - 1; bit >= 0; --bit) {
    if (detail::decode_first(dec, r.bit_freq[static_cast<std::size_t>(bit)])) rem |= 1L << bit;
  }
  const long excess = (q << r.golomb_k) | rem;
  const long d = left ? r.lo - 1 - excess : r.lo + r.count + excess;
  return checked(static_cast<long>(m.base) + d);
}

// Codes all symbols of q with their per-element models into one chunk.
inline std::vector<std::uint8_t> range_encode(const QuantizedLatents& q, const CdfTable& table) {
  if (table.shape != q.shape) throw ShapeError("range_encode: table " + table.shape.str() + " vs symbols " + q.shape.str());
  RangeEncoder enc;
  for (std::size_t i = 0; i < q.size(); ++i) encode_symbol(enc, table.models[i], q.values[i]);
  return enc.finish();
}

inline QuantizedLatents range_decode(std::span<const std::uint8_t> bytes, const CdfTable& table) {
  RangeDecoder dec(bytes);
  QuantizedLatents q{table.shape, std::vector<std::int32_t>(table.size())};
  for (std::size_t i = 0; i < table.size(); ++i) q.values[i] = decode_symbol(dec, table.models[i]);
  dec.finish();
  return q;
}

}  // namespace mdn
