#include "deepfgs/objective.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "deepfgs/error.hpp"
#include "deepfgs/metrics.hpp"

namespace dfgs {

long long w_weight(long long i, long long d, WMode mode) {
  if (i < 0) throw UsageError("distortion weight: channel index must be >= 0");
  if (d < 1) throw UsageError("distortion weight: group size must be >= 1");
  long long base = i / d;
  return mode == WMode::kClamped ? std::max(1LL, base) : base;
}

int sample_j(Rng& rng, int c2) {
  if (c2 < 0) throw UsageError("sample_j: c2 must be >= 0");
  if (c2 == 0) return 0;
  return int(rng.uniform_int(0, c2));
}

Val distortion_graph(Graph& g, Val x, Val xhat, Metric metric) {
  Shape s = g.val(x).shape;
  if (metric == Metric::kMse) {
    // 255²·Σ(x−x̂)²/3 = Σ over images of 255²·MSE·H·W
    Val d = g.sub(x, xhat);
    return g.mul_scalar(g.sum_all(g.square(d)), 65025.0 / 3.0);
  }
  Val ms = ms_ssim_graph(g, x, xhat);  // (n,1,1,1)
  Val one_minus = g.add_scalar(g.mul_scalar(ms, -1.0), 1.0);
  return g.mul_scalar(g.sum_all(one_minus), double(s.h) * double(s.w));
}

namespace {

// Shared first half of every training step: code the basic latent and
// reconstruct the basic-quality image. Noise draw order: ẑ_b, then ŷ_b.
struct ForwardBasic {
  Val x, y_b, y_b_hat, z_b_hat;
  Val lik_b, lik_zb, rate_b;
  Val xhat_b, dist_b;
};

ForwardBasic forward_basic(Graph& g, Model::Binder& b, const Tensor& x_t, Rng& rng) {
  Model& m = b.m;
  ForwardBasic f;
  f.x = g.constant(x_t);
  f.y_b = m.encode_basic(b, f.x);
  Shape ls = g.val(f.y_b).shape;
  Val z_b = m.hyper_encode_b(b, f.y_b);
  f.z_b_hat = quantize_noise(g, z_b, rng);
  EntropyVals pb = m.hyper_params_b(b, f.z_b_hat, ls.h, ls.w);
  f.y_b_hat = quantize_noise(g, f.y_b, rng);
  f.lik_b = gaussian_likelihood(g, f.y_b_hat, pb);
  f.lik_zb = m.prior_likelihood(b, f.z_b_hat, "prior_b");
  f.rate_b = g.add(rate_bits(g, f.lik_b), rate_bits(g, f.lik_zb));
  Val zeros_s = g.constant(Tensor::zeros({ls.n, m.cfg.c2, ls.h, ls.w}));
  f.xhat_b = m.decode(b, g.concat_c(f.y_b_hat, zeros_s));
  f.dist_b = distortion_graph(g, f.x, f.xhat_b, m.cfg.metric);
  return f;
}

// Second half for scalable steps. Noise draw order continues: ẑ_s, then ŷ_s.
struct ForwardScalable {
  Val y_s_hat, z_s_hat;
  Val lik_s, lik_zs, rate_zs;
};

ForwardScalable forward_scalable(Graph& g, Model::Binder& b, const ForwardBasic& f, Rng& rng) {
  Model& m = b.m;
  ForwardScalable s;
  Val y_sp = m.encode_scalable(b, f.x, f.xhat_b);
  Val y_s = m.frr(b, y_sp, f.y_b);
  Shape ls = g.val(y_s).shape;
  Val z_s = m.hyper_encode_s(b, y_s);
  s.z_s_hat = quantize_noise(g, z_s, rng);
  EntropyVals ps = m.scalable_params(b, s.z_s_hat, f.y_b_hat, ls.h, ls.w);
  s.y_s_hat = quantize_noise(g, y_s, rng);
  s.lik_s = gaussian_likelihood(g, s.y_s_hat, ps);
  s.lik_zs = m.prior_likelihood(b, s.z_s_hat, "prior_s");
  s.rate_zs = rate_bits(g, s.lik_zs);
  return s;
}

// rate of the first j scalable channels plus the full scalable hyper latent
Val prefix_rate(Graph& g, const ForwardScalable& s, int j, int c2) {
  Val lik = (j == c2) ? s.lik_s : g.slice_c(s.lik_s, 0, j);
  return g.add(rate_bits(g, lik), s.rate_zs);
}

Val prefix_distortion(Graph& g, Model::Binder& b, const ForwardBasic& f, const ForwardScalable& s,
                      int j) {
  Model& m = b.m;
  Val recon = m.decode(b, g.concat_c(f.y_b_hat, m.channel_select(g, s.y_s_hat, j)));
  return distortion_graph(g, f.x, recon, m.cfg.metric);
}

}  // namespace

LossTerms basic_loss(Graph& g, Model::Binder& b, const Tensor& x, Rng& noise_rng,
                     const LossOptions&) {
  ForwardBasic f = forward_basic(g, b, x, noise_rng);
  LossTerms t;
  t.rate_b = f.rate_b;
  t.dist_b = f.dist_b;
  t.lik_b = f.lik_b;
  t.lik_zb = f.lik_zb;
  t.j = 0;
  t.w_j = 0;
  t.total = g.add(f.rate_b, g.mul_scalar(f.dist_b, b.m.cfg.lambda));
  return t;
}

LossTerms scalable_loss_sampled(Graph& g, Model::Binder& b, const Tensor& x, int j, Rng& noise_rng,
                                const LossOptions& opt) {
  Model& m = b.m;
  if (j < 1 || j > m.cfg.c2) {
    throw UsageError("scalable objective: j must be in [1, " + std::to_string(m.cfg.c2) + "]");
  }
  ForwardBasic f = forward_basic(g, b, x, noise_rng);
  ForwardScalable s = forward_scalable(g, b, f, noise_rng);

  LossTerms t;
  t.rate_b = f.rate_b;
  t.dist_b = f.dist_b;
  t.lik_b = f.lik_b;
  t.lik_zb = f.lik_zb;
  t.lik_s = s.lik_s;
  t.lik_zs = s.lik_zs;
  t.rate_s = prefix_rate(g, s, j, m.cfg.c2);
  t.dist_s = prefix_distortion(g, b, f, s, j);
  t.j = j;
  t.w_j = w_weight(j, m.cfg.group_size, opt.w_mode);

  Val total = g.add(f.rate_b, t.rate_s);
  if (opt.include_basic_distortion) {
    total = g.add(total, g.mul_scalar(f.dist_b, m.cfg.lambda));
  }
  total = g.add(total, g.mul_scalar(t.dist_s, m.cfg.lambda * double(t.w_j)));
  t.total = total;
  return t;
}

Val scalable_loss_full(Graph& g, Model::Binder& b, const Tensor& x, int k, Rng& noise_rng,
                       const LossOptions& opt) {
  Model& m = b.m;
  if (m.cfg.c2 > 16) {
    throw UsageError("full objective: refuses C2 > 16; it decodes every prefix");
  }
  if (k < m.cfg.c1 || k > m.cfg.c1 + m.cfg.c2) {
    throw UsageError("full objective: k must be in [C1, C1+C2]");
  }
  int terms = k - m.cfg.c1;
  if (terms == 0) return g.constant(Tensor::scalar(0.0));

  ForwardBasic f = forward_basic(g, b, x, noise_rng);
  ForwardScalable s = forward_scalable(g, b, f, noise_rng);
  Val sum{};
  for (int i = 1; i <= terms; ++i) {
    Val term = g.add(f.rate_b, prefix_rate(g, s, i, m.cfg.c2));
    long long wi = w_weight(i, m.cfg.group_size, opt.w_mode);
    Val dist = prefix_distortion(g, b, f, s, i);
    term = g.add(term, g.mul_scalar(dist, m.cfg.lambda * double(wi)));
    sum = sum.ok() ? g.add(sum, term) : term;
  }
  return sum;
}

LossBreakdown read_breakdown(Graph& g, const LossTerms& t) {
  LossBreakdown o;
  auto take = [&](Val v, const char* name) {
    if (!v.ok()) return 0.0;
    double x = g.val(v).item();
    if (!std::isfinite(x)) {
      throw NumericError(std::string("non-finite loss component: ") + name);
    }
    return x;
  };
  o.rate_b = take(t.rate_b, "rate_b");
  o.rate_s = take(t.rate_s, "rate_s");
  o.dist_b = take(t.dist_b, "dist_b");
  o.dist_s = take(t.dist_s, "dist_s");
  o.total = take(t.total, "total");
  o.j = t.j;
  o.w_j = t.w_j;
  return o;
}

}  // namespace dfgs
