#include <cmath>
#include <string>
#include <utility>

#include "deepfgs/codec.hpp"
#include "deepfgs/coder.hpp"
#include "deepfgs/error.hpp"
#include "deepfgs/graph.hpp"

namespace dfgs {

namespace {

// latent and hyper-latent grid sizes for an HxW image
struct Grids {
  int lh, lw;  // latent: H/16 x W/16
  int zh, zw;  // hyper latent: two more ceil-halvings
};

Grids grids_for(int h, int w) {
  Grids g;
  g.lh = h / ModelConfig::kDownsampleFactor;
  g.lw = w / ModelConfig::kDownsampleFactor;
  g.zh = ((g.lh + 1) / 2 + 1) / 2;
  g.zw = ((g.lw + 1) / 2 + 1) / 2;
  return g;
}

long long as_int(double v) { return std::llrint(v); }

// one coded segment for a plane under per-channel prior tables
std::vector<std::uint8_t> encode_prior_plane(const Tensor& zhat,
                                             const std::vector<CdfTable>& tables) {
  RangeEncoder enc;
  const Shape& s = zhat.shape;
  for (int c = 0; c < s.c; ++c) {
    for (int i = 0; i < s.h * s.w; ++i) {
      enc.encode_value(tables[size_t(c)], as_int(zhat.v[size_t(c * s.h * s.w + i)]));
    }
  }
  return enc.finish();
}

Tensor decode_prior_plane(const std::vector<std::uint8_t>& seg, Shape shape,
                          const std::vector<CdfTable>& tables, const char* what) {
  Tensor out(shape);
  try {
    RangeDecoder dec(seg.data(), seg.size());
    for (int c = 0; c < shape.c; ++c) {
      for (int i = 0; i < shape.h * shape.w; ++i) {
        out.v[size_t(c * shape.h * shape.w + i)] = double(dec.decode_value(tables[size_t(c)]));
      }
    }
  } catch (const DataError& e) {
    throw DataError(std::string(what) + " segment: " + e.what());
  }
  return out;
}

// Gaussian-conditional coding of `count` elements starting at `offset`:
// symbol = value − nearest-integer(μ), table from the σ bin.
// table reference and shift for one (μ, σ) pair — build_cdf without the copy
const CdfTable& table_for(double mu, double sigma, long long& shift) {
  if (!std::isfinite(mu) || !(sigma >= kSigmaMin)) {
    throw NumericError("codec: non-finite or out-of-floor entropy parameters");
  }
  shift = (long long)std::nearbyint(mu);
  return gaussian_table(sigma_bin(sigma));
}

void encode_gaussian_range(RangeEncoder& enc, const Tensor& yhat, const Tensor& mu,
                           const Tensor& sigma, std::size_t offset, std::size_t count) {
  for (std::size_t i = offset; i < offset + count; ++i) {
    long long shift = 0;
    const CdfTable& table = table_for(mu.v[i], sigma.v[i], shift);
    enc.encode_value(table, as_int(yhat.v[i]) - shift);
  }
}

void decode_gaussian_range(RangeDecoder& dec, Tensor& out, const Tensor& mu, const Tensor& sigma,
                           std::size_t offset, std::size_t count) {
  for (std::size_t i = offset; i < offset + count; ++i) {
    long long shift = 0;
    const CdfTable& table = table_for(mu.v[i], sigma.v[i], shift);
    out.v[i] = double(dec.decode_value(table) + shift);
  }
}

double bits_of(Graph& g, Val lik) { return g.val(rate_bits(g, lik)).item(); }

}  // namespace

LatentSet infer_latents(const Tensor& x, Model& m) {
  Graph g;
  Model::Binder b(g, m);
  Val xv = g.constant(x);

  Val y_b = m.encode_basic(b, xv);
  LatentSet l;
  l.yhat_b = quantize_round(g.val(y_b));
  l.zhat_b = quantize_round(g.val(m.hyper_encode_b(b, y_b)));

  // the scalable analysis looks at x alongside the basic reconstruction
  Val yhat_b_v = g.constant(l.yhat_b);
  Shape ys{1, m.cfg.c2, l.yhat_b.shape.h, l.yhat_b.shape.w};
  Val xhat_b = m.decode(b, g.concat_c(yhat_b_v, g.constant(Tensor::zeros(ys))));
  Val y_s = m.frr(b, m.encode_scalable(b, xv, xhat_b), y_b);
  l.yhat_s = quantize_round(g.val(y_s));
  l.zhat_s = quantize_round(g.val(m.hyper_encode_s(b, y_s)));
  return l;
}

Tensor reconstruct_from_latents(Model& m, const Tensor& yhat_b, const Tensor& yhat_s, int j) {
  Graph g;
  Model::Binder b(g, m);
  Val join = g.concat_c(g.constant(yhat_b), g.constant(m.channel_select(yhat_s, j)));
  return clamp01(g.val(m.decode(b, join)));
}

EncodeResult encode_image(const Tensor& x, Model& m) {
  const Shape& s = x.shape;
  if (s.n != 1 || s.c != 3) {
    throw DataError("encode: expected one (1,3,H,W) image, got " + s.str());
  }
  if (s.h % 16 != 0 || s.w % 16 != 0 || s.h == 0 || s.w == 0) {
    throw DataError("encode: dimensions must be positive multiples of 16, got " + s.str());
  }
  if (s.h > 65535 || s.w > 65535) {
    throw DataError("encode: dimensions exceed the u16 header fields");
  }

  EncodeResult r;
  r.latents = infer_latents(x, m);
  const Grids gr = grids_for(s.h, s.w);

  // entropy parameters, exactly as the decoder will recompute them
  Graph g;
  Model::Binder b(g, m);
  Val zb = g.constant(r.latents.zhat_b);
  Val zs = g.constant(r.latents.zhat_s);
  Val yb = g.constant(r.latents.yhat_b);
  Val ysv = g.constant(r.latents.yhat_s);
  EntropyVals pb = m.hyper_params_b(b, zb, gr.lh, gr.lw);
  EntropyVals ps = m.scalable_params(b, zs, yb, gr.lh, gr.lw);
  Tensor mu_b = g.val(pb.mu), sg_b = g.val(pb.sigma);
  Tensor mu_s = g.val(ps.mu), sg_s = g.val(ps.sigma);

  // segments: z_b, y_b, z_s, then one per scalable channel
  BitstreamContainer& c = r.container;
  c.hdr.model_hash = m.content_hash();
  c.hdr.h = s.h;
  c.hdr.w = s.w;
  c.hdr.c1 = m.cfg.c1;
  c.hdr.c2 = m.cfg.c2;
  c.hdr.n_present = m.cfg.c2;
  c.hdr.has_zs = true;

  c.segments.push_back(encode_prior_plane(r.latents.zhat_b, prior_tables(m, "prior_b")));
  {
    RangeEncoder enc;
    encode_gaussian_range(enc, r.latents.yhat_b, mu_b, sg_b, 0, r.latents.yhat_b.v.size());
    c.segments.push_back(enc.finish());
  }
  c.segments.push_back(encode_prior_plane(r.latents.zhat_s, prior_tables(m, "prior_s")));
  const std::size_t plane = std::size_t(gr.lh) * std::size_t(gr.lw);
  for (int ch = 0; ch < m.cfg.c2; ++ch) {
    RangeEncoder enc;
    encode_gaussian_range(enc, r.latents.yhat_s, mu_s, sg_s, size_t(ch) * plane, plane);
    c.segments.push_back(enc.finish());
  }

  // the model's own estimate of what this should have cost
  Val lik_yb = gaussian_likelihood(g, yb, pb);
  Val lik_zb = m.prior_likelihood(b, zb, "prior_b");
  Val lik_ys = gaussian_likelihood(g, ysv, ps);
  Val lik_zs = m.prior_likelihood(b, zs, "prior_s");
  r.stats.est_bits_basic = bits_of(g, lik_yb) + bits_of(g, lik_zb);
  r.stats.est_bits_scalable = bits_of(g, lik_zs);
  for (int ch = 0; ch < m.cfg.c2; ++ch) {
    double bits = bits_of(g, g.slice_c(lik_ys, ch, ch + 1));
    r.stats.est_bits_channel.push_back(bits);
    r.stats.est_bits_scalable += bits;
  }

  r.stats.n_present = c.hdr.n_present;
  r.stats.container_bytes = c.serialized_bytes();
  r.stats.payload_bytes = c.payload_bytes();
  r.stats.basic_bytes = c.segments[0].size() + c.segments[1].size();
  r.stats.scalable_bytes = r.stats.payload_bytes - r.stats.basic_bytes;
  for (const auto& seg : c.segments) r.stats.segment_bytes.push_back(seg.size());
  const double px = double(s.h) * double(s.w);
  r.stats.bpp = 8.0 * double(r.stats.payload_bytes) / px;
  r.stats.bpp_basic = 8.0 * double(r.stats.basic_bytes) / px;
  r.stats.bpp_scalable = 8.0 * double(r.stats.scalable_bytes) / px;
  return r;
}

DecodeResult decode_image(const BitstreamContainer& c, Model& m) {
  if (c.hdr.model_hash != m.content_hash()) {
    throw DataError("decode: bitstream was produced by a different model (hash mismatch)");
  }
  if (c.hdr.c1 != m.cfg.c1 || c.hdr.c2 != m.cfg.c2) {
    throw DataError("decode: channel counts in header do not match the model");
  }
  if (c.hdr.h % 16 != 0 || c.hdr.w % 16 != 0) {
    throw DataError("decode: header dimensions are not multiples of 16");
  }
  if (int(c.segments.size()) != c.expected_segments()) {
    throw DataError("decode: segment count does not match header");
  }
  const Grids gr = grids_for(c.hdr.h, c.hdr.w);
  const Shape zshape{1, m.cfg.hyper_channels, gr.zh, gr.zw};
  const Shape yb_shape{1, m.cfg.c1, gr.lh, gr.lw};
  const Shape ys_shape{1, m.cfg.c2, gr.lh, gr.lw};

  DecodeResult r;
  r.latents.zhat_b = decode_prior_plane(c.segments[0], zshape, prior_tables(m, "prior_b"), "z_b");

  Graph g;
  Model::Binder b(g, m);
  EntropyVals pb = m.hyper_params_b(b, g.constant(r.latents.zhat_b), gr.lh, gr.lw);
  Tensor mu_b = g.val(pb.mu), sg_b = g.val(pb.sigma);
  r.latents.yhat_b = Tensor(yb_shape);
  try {
    RangeDecoder dec(c.segments[1].data(), c.segments[1].size());
    decode_gaussian_range(dec, r.latents.yhat_b, mu_b, sg_b, 0, r.latents.yhat_b.v.size());
  } catch (const DataError& e) {
    throw DataError(std::string("y_b segment: ") + e.what());
  }

  Tensor yhat_s = Tensor::zeros(ys_shape);  // missing channels stay zero
  if (c.hdr.has_zs) {
    r.latents.zhat_s =
        decode_prior_plane(c.segments[2], zshape, prior_tables(m, "prior_s"), "z_s");
    EntropyVals ps = m.scalable_params(b, g.constant(r.latents.zhat_s),
                                       g.constant(r.latents.yhat_b), gr.lh, gr.lw);
    Tensor mu_s = g.val(ps.mu), sg_s = g.val(ps.sigma);
    const std::size_t plane = std::size_t(gr.lh) * std::size_t(gr.lw);
    for (int ch = 0; ch < c.hdr.n_present; ++ch) {
      const auto& seg = c.segments[size_t(3 + ch)];
      try {
        RangeDecoder dec(seg.data(), seg.size());
        decode_gaussian_range(dec, yhat_s, mu_s, sg_s, size_t(ch) * plane, plane);
      } catch (const DataError& e) {
        throw DataError("y_s channel " + std::to_string(ch + 1) + " segment: " + e.what());
      }
    }
  }
  r.latents.yhat_s = yhat_s;

  r.image = reconstruct_from_latents(m, r.latents.yhat_b, r.latents.yhat_s, c.hdr.n_present);

  r.stats.n_present = c.hdr.n_present;
  r.stats.container_bytes = c.serialized_bytes();
  r.stats.payload_bytes = c.payload_bytes();
  r.stats.basic_bytes = c.segments[0].size() + c.segments[1].size();
  r.stats.scalable_bytes = r.stats.payload_bytes - r.stats.basic_bytes;
  for (const auto& seg : c.segments) r.stats.segment_bytes.push_back(seg.size());
  const double px = double(c.hdr.h) * double(c.hdr.w);
  r.stats.bpp = 8.0 * double(r.stats.payload_bytes) / px;
  r.stats.bpp_basic = 8.0 * double(r.stats.basic_bytes) / px;
  r.stats.bpp_scalable = 8.0 * double(r.stats.scalable_bytes) / px;
  return r;
}

}  // namespace dfgs
