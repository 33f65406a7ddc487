#pragma once

// Frame-pair encode / decode to the .mdn container.

#include <span>
#include <sstream>

#include "mdn/pipeline/system.hpp"

namespace mdn {

inline int padded_extent(int v) { return (v + kPadMultiple - 1) / kPadMultiple * kPadMultiple; }

template <typename T>
Tensor<T> pad_frame(const Tensor<T>& x) {
  const Shape s = x.shape();
  return reflect_pad(x, padded_extent(s.h), padded_extent(s.w));
}

template <typename T>
struct EncodeResult {
  Bitstream stream;
  InferOutput<T> detail;  // on the padded frame
  Tensor<T> x_hat;        // cropped to the original size
  double bpp() const { return stream.bpp(); }
};

template <typename T>
EncodeResult<T> encode_pair(const PFrameSystem<T>& sys, const Tensor<T>& x_prev, const Tensor<T>& x_t,
                            const std::optional<Tensor<T>>& forced_alpha = std::nullopt) {
  require_same_shape(x_prev.shape(), x_t.shape(), "encode inputs");
  const Shape s = x_t.shape();
  if (s.n != 1 || s.c != 3) throw ShapeError("encode: expected a 1x3xHxW frame, got " + s.str());
  if (s.h > 0xFFFF || s.w > 0xFFFF) throw ShapeError("encode: frame larger than 65535 px");
  if (forced_alpha && sys.has_modenet()) {
    throw ValueError("encode: a forced alpha cannot be transmitted by a ModeNet system");
  }
  std::optional<Tensor<T>> alpha;
  if (forced_alpha) alpha = reflect_pad(*forced_alpha, padded_extent(s.h), padded_extent(s.w));
  EncodeResult<T> r;
  r.detail = infer_forward(sys, pad_frame(x_prev), pad_frame(x_t), alpha);
  Bitstream& bs = r.stream;
  bs.codec = sys.config().codec.mode;
  bs.flags = sys.config().flags();
  bs.width = static_cast<std::uint16_t>(s.w);
  bs.height = static_cast<std::uint16_t>(s.h);
  bs.model_hash = sys.hash();
  if (r.detail.mode_code) {
    auto [hyper, main] = sys.modenet().hyper().encode(*r.detail.mode_code);
    bs.chunks[kModeHyper] = std::move(hyper);
    bs.chunks[kModeMain] = std::move(main);
  }
  if (r.detail.codec_code) {
    auto [hyper, main] = sys.codecnet().hyper().encode(*r.detail.codec_code);
    bs.chunks[kCodecHyper] = std::move(hyper);
    bs.chunks[kCodecMain] = std::move(main);
  }
  r.x_hat = crop(r.detail.x_hat, s.h, s.w);
  return r;
}

template <typename T>
struct DecodeResult {
  Tensor<T> x_hat;  // cropped
  Tensor<T> alpha;  // cropped
  double bpp = 0;
};

// Reconstructs x^_t from the stream and the reference frame only.
template <typename T>
DecodeResult<T> decode_pair(const PFrameSystem<T>& sys, const Bitstream& bs, const Tensor<T>& x_prev) {
  if (bs.model_hash != sys.hash()) {
    std::ostringstream os;
    os << "decode: bitstream model hash " << std::hex << bs.model_hash << " does not match checkpoint "
       << sys.hash();
    throw HashMismatchError(os.str());
  }
  if (bs.codec != sys.config().codec.mode || bs.flags != sys.config().flags()) {
    throw HashMismatchError("decode: bitstream configuration does not match the model");
  }
  const Shape s = x_prev.shape();
  if (s.n != 1 || s.c != 3 || s.h != bs.height || s.w != bs.width) {
    throw ShapeError("decode: reference frame " + s.str() + " does not match stream size " +
                     std::to_string(bs.width) + "x" + std::to_string(bs.height));
  }
  const Tensor<T> pred = pad_frame(x_prev);
  const Shape ps = pred.shape();
  NoGradGuard guard;
  Tensor<T> alpha;
  if (sys.has_modenet()) {
    const Shape ys = sys.modenet().latent_shape(ps.h, ps.w);
    const auto code = sys.modenet().hyper().decode(bs.chunks[kModeHyper], bs.chunks[kModeMain], ys);
    alpha = sys.modenet().decode_alpha(code.y);
  } else {
    alpha = ones_alpha<T>(ps);
  }
  const Var<T> a(alpha);
  const Var<T> p(pred);
  const Tensor<T> masked_pred = mask_frame(a, p).value();
  Tensor<T> x_c(ps);
  const bool skipped = bs.chunks[kCodecHyper].empty() && bs.chunks[kCodecMain].empty();
  if (skipped != all_zero(alpha)) throw FormatError("decode: CodecNet chunks inconsistent with the decoded alpha");
  if (!skipped) {
    const Shape ys{1, sys.config().codec.n, ps.h / kLatentStride, ps.w / kLatentStride};
    const auto code = sys.codecnet().hyper().decode(bs.chunks[kCodecHyper], bs.chunks[kCodecMain], ys);
    x_c = sys.codecnet().reconstruct(code.y, masked_pred);
  }
  DecodeResult<T> r;
  r.x_hat = crop(blend(a, p, Var<T>(x_c)).value(), s.h, s.w);
  r.alpha = crop(alpha, s.h, s.w);
  r.bpp = bs.bpp();
  return r;
}

}  // namespace mdn
