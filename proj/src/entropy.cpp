#include <cmath>
#include <string>

#include "deepfgs/error.hpp"
#include "deepfgs/model.hpp"

namespace dfgs {

namespace {
constexpr double kLeakySlope = 0.2;
constexpr double kInvLn2 = 1.4426950408889634;

// spatial size after one k=3 s=2 p=1 stage (and how the decoder rebuilds the
// intermediate extent, which the final extent alone does not determine)
int half_dim(int h) { return (h + 1) / 2; }

Val split_sigma(Graph& g, Val raw) {
  // sigma = max(exp(min(raw, 30)), sigma_min): positive, floored, and with a
  // live gradient everywhere above the floor
  return g.max_scalar(g.exp(g.min_scalar(raw, 30.0)), kSigmaMin);
}
}  // namespace

Val Model::hyper_encode_b(Binder& b, Val y_b) const {
  Graph& g = b.g;
  Val h = g.conv2d(y_b, b.p("h_b.enc0.weight"), b.p("h_b.enc0.bias"), 1, 1);
  h = g.leaky_relu(h, kLeakySlope);
  h = g.conv2d(h, b.p("h_b.enc1.weight"), b.p("h_b.enc1.bias"), 2, 1);
  h = g.leaky_relu(h, kLeakySlope);
  return g.conv2d(h, b.p("h_b.enc2.weight"), b.p("h_b.enc2.bias"), 2, 1);
}

Val Model::hyper_encode_s(Binder& b, Val y_s) const {
  Graph& g = b.g;
  Val h = g.conv2d(y_s, b.p("h_s.enc0.weight"), b.p("h_s.enc0.bias"), 1, 1);
  h = g.leaky_relu(h, kLeakySlope);
  h = g.conv2d(h, b.p("h_s.enc1.weight"), b.p("h_s.enc1.bias"), 2, 1);
  h = g.leaky_relu(h, kLeakySlope);
  return g.conv2d(h, b.p("h_s.enc2.weight"), b.p("h_s.enc2.bias"), 2, 1);
}

EntropyVals Model::hyper_params_b(Binder& b, Val z_b_hat, int out_h, int out_w) const {
  Graph& g = b.g;
  int mh = half_dim(out_h), mw = half_dim(out_w);
  Val h = g.conv_transpose2d(z_b_hat, b.p("h_b.dec0.weight"), b.p("h_b.dec0.bias"), 2, 1, mh, mw);
  h = g.leaky_relu(h, kLeakySlope);
  h = g.conv_transpose2d(h, b.p("h_b.dec1.weight"), b.p("h_b.dec1.bias"), 2, 1, out_h, out_w);
  h = g.leaky_relu(h, kLeakySlope);
  Val out = g.conv2d(h, b.p("h_b.dec2.weight"), b.p("h_b.dec2.bias"), 1, 1);
  Val mu = g.slice_c(out, 0, cfg.c1);
  Val sigma = split_sigma(g, g.slice_c(out, cfg.c1, 2 * cfg.c1));
  return {mu, sigma};
}

EntropyVals Model::scalable_params(Binder& b, Val z_s_hat, Val y_b_hat, int out_h,
                                   int out_w) const {
  Graph& g = b.g;
  int mh = half_dim(out_h), mw = half_dim(out_w);
  Val h = g.conv_transpose2d(z_s_hat, b.p("h_s.dec0.weight"), b.p("h_s.dec0.bias"), 2, 1, mh, mw);
  h = g.leaky_relu(h, kLeakySlope);
  h = g.conv_transpose2d(h, b.p("h_s.dec1.weight"), b.p("h_s.dec1.bias"), 2, 1, out_h, out_w);
  h = g.leaky_relu(h, kLeakySlope);
  Val out{};
  if (cfg.use_mem) {
    if (!y_b_hat.ok()) {
      throw DataError("scalable_params: conditioning latent required before any scalable channel");
    }
    Val feat = g.leaky_relu(g.conv2d(h, b.p("h_s.feat0.weight"), b.p("h_s.feat0.bias"), 1, 1),
                            kLeakySlope);
    Val ctx = g.leaky_relu(
        g.conv2d(y_b_hat, b.p("mem.ctx0.weight"), b.p("mem.ctx0.bias"), 1, 1), kLeakySlope);
    ctx = g.leaky_relu(g.conv2d(ctx, b.p("mem.ctx1.weight"), b.p("mem.ctx1.bias"), 1, 1),
                       kLeakySlope);
    Val f = g.concat_c(feat, ctx);
    f = g.leaky_relu(g.conv2d(f, b.p("mem.fuse0.weight"), b.p("mem.fuse0.bias"), 1, 0),
                     kLeakySlope);
    f = g.leaky_relu(g.conv2d(f, b.p("mem.fuse1.weight"), b.p("mem.fuse1.bias"), 1, 0),
                     kLeakySlope);
    out = g.conv2d(f, b.p("mem.fuse2.weight"), b.p("mem.fuse2.bias"), 1, 0);
  } else {
    out = g.conv2d(h, b.p("h_s.out0.weight"), b.p("h_s.out0.bias"), 1, 1);
  }
  Val mu = g.slice_c(out, 0, cfg.c2);
  Val sigma = split_sigma(g, g.slice_c(out, cfg.c2, 2 * cfg.c2));
  return {mu, sigma};
}

// ---------------------------------------------------------------------------
// factorized prior

Val Model::prior_likelihood(Binder& b, Val z_tilde, std::string_view prior) const {
  Graph& g = b.g;
  Shape s = g.val(z_tilde).shape;
  if (s.c != cfg.hyper_channels) {
    throw DataError("prior_likelihood: channel count mismatch " + s.str());
  }
  Val all{};
  for (int c = 0; c < s.c; ++c) {
    std::string base = std::string(prior) + ".c" + std::to_string(c);
    Val w0 = g.softplus(b.p(base + ".h0"));
    Val a0 = g.tanh(b.p(base + ".a0"));
    Val w1 = g.softplus(b.p(base + ".h1"));
    Val a1 = g.tanh(b.p(base + ".a1"));
    Val w2 = g.softplus(b.p(base + ".h2"));
    auto cdf = [&](Val v) {
      Val t = g.conv2d(v, w0, b.p(base + ".b0"), 1, 0);
      t = g.add(t, g.mul_cwise(g.tanh(t), a0));
      t = g.conv2d(t, w1, b.p(base + ".b1"), 1, 0);
      t = g.add(t, g.mul_cwise(g.tanh(t), a1));
      t = g.conv2d(t, w2, b.p(base + ".b2"), 1, 0);
      return g.sigmoid(t);
    };
    Val zc = g.slice_c(z_tilde, c, c + 1);
    Val p = g.sub(cdf(g.add_scalar(zc, 0.5)), cdf(g.add_scalar(zc, -0.5)));
    p = g.max_scalar(p, kLikelihoodFloor);
    all = (c == 0) ? p : g.concat_c(all, p);
  }
  return all;
}

// ---------------------------------------------------------------------------
// likelihood / rate / quantizers

Val gaussian_likelihood(Graph& g, Val y_hat, const EntropyVals& p) {
  // Phi(t) = (1 + erf(t / sqrt(2))) / 2; p = Phi(upper) - Phi(lower)
  constexpr double kInvSqrt2 = 0.7071067811865476;
  Val up = g.div(g.sub(g.add_scalar(y_hat, 0.5), p.mu), p.sigma);
  Val lo = g.div(g.sub(g.add_scalar(y_hat, -0.5), p.mu), p.sigma);
  Val phi_up = g.erf(g.mul_scalar(up, kInvSqrt2));
  Val phi_lo = g.erf(g.mul_scalar(lo, kInvSqrt2));
  Val prob = g.mul_scalar(g.sub(phi_up, phi_lo), 0.5);
  return g.max_scalar(prob, kLikelihoodFloor);
}

Val rate_bits(Graph& g, Val likelihood) {
  return g.mul_scalar(g.sum_all(g.log(likelihood)), -kInvLn2);
}

Val quantize_noise(Graph& g, Val y, Rng& rng) {
  Tensor noise(g.val(y).shape);
  for (double& x : noise.v) x = rng.uniform_centered();
  return g.add(y, g.constant(std::move(noise)));
}

Tensor quantize_round(const Tensor& y) { return round_ties_even(y); }

}  // namespace dfgs
