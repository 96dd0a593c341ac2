#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "deepfgs/container.hpp"
#include "deepfgs/model.hpp"
#include "deepfgs/tensor.hpp"

namespace dfgs {

// ---------------------------------------------------------------------------
// Image <-> bitstream codec
//
// One-pass encode: every scalable channel is coded into its own
// independently flushed segment, so any prefix of channels decodes without
// re-encoding. All latents are round-quantized; entropy parameters are
// derived only from data the decoder will already have (ẑ_b for the basic
// latent; ẑ_s and ŷ_b for each scalable channel), which is what makes
// channel-prefix decoding sound.

// Round-quantized latents of one image. On decode, yhat_s always has its
// full shape with channels past n_present zero-filled (entirely zero for a
// basic-only stream); zhat_s is empty (a default tensor) when the stream
// carries no scalable hyper latent.
struct LatentSet {
  Tensor yhat_b, zhat_b;
  Tensor yhat_s, zhat_s;
};

struct CodecStats {
  std::size_t payload_bytes = 0;    // coded segments only
  std::size_t container_bytes = 0;  // including header and segment table
  std::size_t basic_bytes = 0;      // z_b + y_b segments
  std::size_t scalable_bytes = 0;   // z_s + retained y_s segments
  std::vector<std::size_t> segment_bytes;
  double bpp = 0.0;  // 8 * payload_bytes / (H*W); header excluded
  double bpp_basic = 0.0;
  double bpp_scalable = 0.0;
  int n_present = 0;
  // model's own rate estimates at the rounded latents (encode side only)
  double est_bits_basic = 0.0;
  double est_bits_scalable = 0.0;
  std::vector<double> est_bits_channel;  // per scalable channel
};

struct EncodeResult {
  BitstreamContainer container;
  CodecStats stats;
  LatentSet latents;
};

struct DecodeResult {
  Tensor image;  // (1,3,H,W), clamped to [0,1]
  CodecStats stats;
  LatentSet latents;
};

// x must be (1,3,H,W) with H, W multiples of 16 and at most 65535.
// Always codes every scalable channel (n_present = C2).
EncodeResult encode_image(const Tensor& x, Model& m);

// Requires the container's model hash and channel counts to match `m`.
DecodeResult decode_image(const BitstreamContainer& c, Model& m);

// In-model reference path: the reconstruction the decoder must reproduce for
// a prefix of j scalable channels, from round-quantized latents (clamped).
Tensor reconstruct_from_latents(Model& m, const Tensor& yhat_b, const Tensor& yhat_s, int j);
LatentSet infer_latents(const Tensor& x, Model& m);

}  // namespace dfgs
