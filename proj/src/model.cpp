#include "deepfgs/model.hpp"

#include <cmath>
#include <cstring>

#include "deepfgs/error.hpp"

namespace dfgs {

namespace {
constexpr double kLeakySlope = 0.2;
}  // namespace

void ModelConfig::finalize() {
  if (group_size == 0) {
    group_size = std::max(1, int(std::llround(double(c2) / 24.0)));
  }
  if (c1 < 1) throw UsageError("config: c1 must be >= 1");
  if (c2 < 1 && !single_rate) throw UsageError("config: c2 must be >= 1");
  if (c2 < 0) throw UsageError("config: c2 must be >= 0");
  if (n_hidden < 1 || hyper_channels < 1) throw UsageError("config: widths must be >= 1");
  if (group_size < 1) throw UsageError("config: group_size must be >= 1");
  if (c2 > 0 && group_size > c2) throw UsageError("config: group_size must be <= c2");
  if (!(lambda >= 0.0)) throw UsageError("config: lambda must be >= 0");
}

// ---------------------------------------------------------------------------
// ParamStore

int ParamStore::add(const std::string& name, Tensor init) {
  if (index_.count(name)) throw DataError("duplicate parameter: " + name);
  int idx = int(values_.size());
  names_.push_back(name);
  grads_.push_back(Tensor::zeros(init.shape));
  values_.push_back(std::move(init));
  index_.emplace(name, idx);
  return idx;
}

int ParamStore::index_of(std::string_view name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw DataError("unknown parameter: " + std::string(name));
  return it->second;
}

void ParamStore::zero_grads() {
  for (Tensor& g : grads_) g.zero();
}

std::int64_t ParamStore::total_elements() const {
  std::int64_t n = 0;
  for (const Tensor& v : values_) n += v.numel();
  return n;
}

// ---------------------------------------------------------------------------
// Model construction

Model::Model(ModelConfig c) : cfg(c) {
  cfg.finalize();
  if (cfg.c2 < 1) throw UsageError("model: c2 must be >= 1 (c2=0 exists only for loss-math tests)");
  register_params();
}

Val Model::Binder::p(std::string_view name) {
  int idx = m.params.index_of(name);
  if (!cache_[idx].ok()) cache_[idx] = g.param(m.params.value(idx), &m.params.grad(idx));
  return cache_[idx];
}

void Model::register_params() {
  Rng master(cfg.seed);

  auto conv = [&](const std::string& name, int cout, int cin, int k, double gain) {
    Rng r = master.split("init." + name);
    Tensor w({cout, cin, k, k});
    double sd = gain / std::sqrt(double(cin) * k * k);
    for (double& x : w.v) x = r.normal() * sd;
    params.add(name + ".weight", std::move(w));
    params.add(name + ".bias", Tensor({1, cout, 1, 1}));
  };
  // transposed conv stores (cin, cout, k, k); the stride-2 upsample spreads
  // each input over s^2 output slots, so scale the init up by s to keep
  // activation variance roughly flat
  auto deconv = [&](const std::string& name, int cin, int cout, int k, double gain) {
    Rng r = master.split("init." + name);
    Tensor w({cin, cout, k, k});
    double sd = gain / std::sqrt(double(cin) * k * k);
    for (double& x : w.v) x = r.normal() * sd;
    params.add(name + ".weight", std::move(w));
    params.add(name + ".bias", Tensor({1, cout, 1, 1}));
  };
  auto gdn_params = [&](const std::string& prefix, int ch) {
    params.add(prefix + ".beta", Tensor::full({1, ch, 1, 1}, 1.0));
    Tensor gamma({ch, ch, 1, 1});
    for (int i = 0; i < ch; ++i)
      for (int j = 0; j < ch; ++j)
        gamma.at(i, j, 0, 0) = (i == j) ? std::sqrt(0.1) : std::sqrt(1e-3);
    params.add(prefix + ".gamma", std::move(gamma));
  };
  auto gate_params = [&](const std::string& prefix, int guide_ch, int target_ch) {
    conv(prefix + ".mlp0", target_ch, guide_ch, 1, 1.0);
    conv(prefix + ".mlp1", target_ch, target_ch, 1, 1.0);
    conv(prefix + ".sp0", 8, 1, 3, 1.0);
    conv(prefix + ".sp1", 1, 8, 3, 1.0);
  };
  auto prior_params = [&](const std::string& prefix, int channels) {
    // monotone pointwise CDF chain, width 3: init is an exact odd function
    // (b = 0, a = 0) whose end-to-end slope is 1
    double s0 = std::pow(9.0, -1.0 / 3.0);
    double hinit = std::log(std::expm1(s0));
    for (int c = 0; c < channels; ++c) {
      std::string base = prefix + ".c" + std::to_string(c);
      params.add(base + ".h0", Tensor::full({3, 1, 1, 1}, hinit));
      params.add(base + ".b0", Tensor({1, 3, 1, 1}));
      params.add(base + ".a0", Tensor({1, 3, 1, 1}));
      params.add(base + ".h1", Tensor::full({3, 3, 1, 1}, hinit));
      params.add(base + ".b1", Tensor({1, 3, 1, 1}));
      params.add(base + ".a1", Tensor({1, 3, 1, 1}));
      params.add(base + ".h2", Tensor::full({1, 3, 1, 1}, hinit));
      params.add(base + ".b2", Tensor({1, 1, 1, 1}));
    }
  };

  const int n = cfg.n_hidden, hc = cfg.hyper_channels;
  const int join = cfg.c1 + cfg.c2;

  // basic analysis: 3 -> n -> n -> n -> c1, stride-2 5x5 stages
  conv("g_b.conv0", n, 3, 5, 1.0);
  gdn_params("g_b.gdn0", n);
  conv("g_b.conv1", n, n, 5, 1.0);
  gdn_params("g_b.gdn1", n);
  conv("g_b.conv2", n, n, 5, 1.0);
  gdn_params("g_b.gdn2", n);
  conv("g_b.conv3", cfg.c1, n, 5, 1.0);

  // residual fusion ahead of the scalable analysis
  conv("f_conv.conv0", 3, 6, 3, 1.0);

  conv("g_s.conv0", n, 3, 5, 1.0);
  gdn_params("g_s.gdn0", n);
  conv("g_s.conv1", n, n, 5, 1.0);
  gdn_params("g_s.gdn1", n);
  conv("g_s.conv2", n, n, 5, 1.0);
  gdn_params("g_s.gdn2", n);
  conv("g_s.conv3", cfg.c2, n, 5, 1.0);

  if (cfg.use_frr) gate_params("frr", cfg.c1, cfg.c2);
  if (cfg.use_ffm) gate_params("ffm", join, join);

  // shared synthesis: (c1+c2) -> n -> n -> n -> 3
  deconv("g_d.conv0", join, n, 5, 2.0);
  gdn_params("g_d.igdn0", n);
  deconv("g_d.conv1", n, n, 5, 2.0);
  gdn_params("g_d.igdn1", n);
  deconv("g_d.conv2", n, n, 5, 2.0);
  gdn_params("g_d.igdn2", n);
  deconv("g_d.conv3", n, 3, 5, 2.0);

  // hyper networks (separate weights for the two latents)
  conv("h_b.enc0", hc, cfg.c1, 3, 1.0);
  conv("h_b.enc1", hc, hc, 3, 1.0);
  conv("h_b.enc2", hc, hc, 3, 1.0);
  deconv("h_b.dec0", hc, hc, 3, 2.0);
  deconv("h_b.dec1", hc, hc, 3, 2.0);
  conv("h_b.dec2", 2 * cfg.c1, hc, 3, 1.0);

  conv("h_s.enc0", hc, cfg.c2, 3, 1.0);
  conv("h_s.enc1", hc, hc, 3, 1.0);
  conv("h_s.enc2", hc, hc, 3, 1.0);
  deconv("h_s.dec0", hc, hc, 3, 2.0);
  deconv("h_s.dec1", hc, hc, 3, 2.0);
  if (cfg.use_mem) {
    conv("h_s.feat0", n, hc, 3, 1.0);
    conv("mem.ctx0", n, cfg.c1, 3, 1.0);
    conv("mem.ctx1", n, n, 3, 1.0);
    conv("mem.fuse0", n, 2 * n, 1, 1.0);
    conv("mem.fuse1", n, n, 1, 1.0);
    conv("mem.fuse2", 2 * cfg.c2, n, 1, 1.0);
  } else {
    conv("h_s.out0", 2 * cfg.c2, hc, 3, 1.0);
  }

  prior_params("prior_b", hc);
  prior_params("prior_s", hc);
}

// ---------------------------------------------------------------------------
// building blocks

Val Model::gdn(Binder& b, Val x, const std::string& prefix, bool inverse) const {
  Graph& g = b.g;
  Val beta = g.add_scalar(g.square(b.p(prefix + ".beta")), 1e-4);
  Val gamma = g.square(b.p(prefix + ".gamma"));
  Val denom = g.conv2d(g.square(x), gamma, beta, 1, 0);
  return g.mul(x, g.pow_scalar(denom, inverse ? 0.5 : -0.5));
}

Val Model::gate_pair(Binder& b, Val target, Val guide, const std::string& prefix) const {
  Graph& g = b.g;
  // per-channel gate from the guide's global spatial average
  Val pool = g.spatial_mean(guide);
  Val h = g.linear(pool, b.p(prefix + ".mlp0.weight"), b.p(prefix + ".mlp0.bias"));
  h = g.leaky_relu(h, kLeakySlope);
  h = g.linear(h, b.p(prefix + ".mlp1.weight"), b.p(prefix + ".mlp1.bias"));
  Val cgate = g.sigmoid(h);
  // per-pixel gate from the guide's channel mean
  Val m = g.channel_mean(guide);
  Val sp = g.conv2d(m, b.p(prefix + ".sp0.weight"), b.p(prefix + ".sp0.bias"), 1, 1);
  sp = g.leaky_relu(sp, kLeakySlope);
  sp = g.conv2d(sp, b.p(prefix + ".sp1.weight"), b.p(prefix + ".sp1.bias"), 1, 1);
  Val sgate = g.sigmoid(sp);
  return g.bmul_s(g.bmul_c(target, cgate), sgate);
}

// ---------------------------------------------------------------------------
// transforms

Val Model::encode_basic(Binder& b, Val x) const {
  Graph& g = b.g;
  Shape s = g.val(x).shape;
  if (s.c != 3) throw DataError("encode_basic: expected 3 input channels, got " + s.str());
  if (s.h % ModelConfig::kDownsampleFactor || s.w % ModelConfig::kDownsampleFactor) {
    throw DataError("encode_basic: H and W must be divisible by 16, got " + s.str());
  }
  Val h = g.conv2d(x, b.p("g_b.conv0.weight"), b.p("g_b.conv0.bias"), 2, 2);
  h = gdn(b, h, "g_b.gdn0", false);
  h = g.conv2d(h, b.p("g_b.conv1.weight"), b.p("g_b.conv1.bias"), 2, 2);
  h = gdn(b, h, "g_b.gdn1", false);
  h = g.conv2d(h, b.p("g_b.conv2.weight"), b.p("g_b.conv2.bias"), 2, 2);
  h = gdn(b, h, "g_b.gdn2", false);
  return g.conv2d(h, b.p("g_b.conv3.weight"), b.p("g_b.conv3.bias"), 2, 2);
}

Val Model::encode_scalable(Binder& b, Val x, Val xhat_b) const {
  Graph& g = b.g;
  if (!(g.val(x).shape == g.val(xhat_b).shape)) {
    throw DataError("encode_scalable: x and basic reconstruction differ in shape");
  }
  Val cat = g.concat_c(x, xhat_b);
  Val r = g.conv2d(cat, b.p("f_conv.conv0.weight"), b.p("f_conv.conv0.bias"), 1, 1);
  Val h = g.conv2d(r, b.p("g_s.conv0.weight"), b.p("g_s.conv0.bias"), 2, 2);
  h = gdn(b, h, "g_s.gdn0", false);
  h = g.conv2d(h, b.p("g_s.conv1.weight"), b.p("g_s.conv1.bias"), 2, 2);
  h = gdn(b, h, "g_s.gdn1", false);
  h = g.conv2d(h, b.p("g_s.conv2.weight"), b.p("g_s.conv2.bias"), 2, 2);
  h = gdn(b, h, "g_s.gdn2", false);
  return g.conv2d(h, b.p("g_s.conv3.weight"), b.p("g_s.conv3.bias"), 2, 2);
}

Val Model::frr(Binder& b, Val y_s_prime, Val y_b) const {
  if (!cfg.use_frr) return y_s_prime;
  Shape sp = b.g.val(y_s_prime).shape, sb = b.g.val(y_b).shape;
  if (sp.n != sb.n || sp.h != sb.h || sp.w != sb.w) {
    throw DataError("frr: latent spatial dims differ: " + sp.str() + " vs " + sb.str());
  }
  return gate_pair(b, y_s_prime, y_b, "frr");
}

Val Model::ffm(Binder& b, Val y_d) const {
  if (!cfg.use_ffm) return y_d;
  Shape s = b.g.val(y_d).shape;
  if (s.c != cfg.c1 + cfg.c2) {
    throw DataError("ffm: expected " + std::to_string(cfg.c1 + cfg.c2) + " channels, got " + s.str());
  }
  return gate_pair(b, y_d, y_d, "ffm");
}

Val Model::decode(Binder& b, Val y_join) const {
  Graph& g = b.g;
  Shape s = g.val(y_join).shape;
  if (s.c != cfg.c1 + cfg.c2) {
    throw DataError("decode: expected " + std::to_string(cfg.c1 + cfg.c2) + " channels, got " +
                    s.str());
  }
  Val h = ffm(b, y_join);
  int hh = s.h, ww = s.w;
  h = g.conv_transpose2d(h, b.p("g_d.conv0.weight"), b.p("g_d.conv0.bias"), 2, 2, 2 * hh, 2 * ww);
  h = gdn(b, h, "g_d.igdn0", true);
  h = g.conv_transpose2d(h, b.p("g_d.conv1.weight"), b.p("g_d.conv1.bias"), 2, 2, 4 * hh, 4 * ww);
  h = gdn(b, h, "g_d.igdn1", true);
  h = g.conv_transpose2d(h, b.p("g_d.conv2.weight"), b.p("g_d.conv2.bias"), 2, 2, 8 * hh, 8 * ww);
  h = gdn(b, h, "g_d.igdn2", true);
  return g.conv_transpose2d(h, b.p("g_d.conv3.weight"), b.p("g_d.conv3.bias"), 2, 2, 16 * hh,
                            16 * ww);
}

Val Model::channel_select(Graph& g, Val y_s, int j) const {
  Shape s = g.val(y_s).shape;
  if (j < 0 || j > s.c) throw DataError("channel_select: j out of range");
  if (j == s.c) return y_s;
  Tensor mask(s);
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < j; ++c)
      for (int h = 0; h < s.h; ++h)
        for (int w = 0; w < s.w; ++w) mask.at(n, c, h, w) = 1.0;
  return g.mul(y_s, g.constant(std::move(mask)));
}

Tensor Model::channel_select(const Tensor& y_s, int j) const {
  Shape s = y_s.shape;
  if (j < 0 || j > s.c) throw DataError("channel_select: j out of range");
  Tensor out = y_s;
  for (int n = 0; n < s.n; ++n)
    for (int c = j; c < s.c; ++c)
      for (int h = 0; h < s.h; ++h)
        for (int w = 0; w < s.w; ++w) out.at(n, c, h, w) = 0.0;
  return out;
}

// ---------------------------------------------------------------------------
// hash

std::uint64_t Model::content_hash() const {
  std::uint64_t h = fnv1a64(std::string_view("deepfgs-v1"));
  auto mix_u64 = [&](std::uint64_t x) { h = fnv1a64(&x, sizeof(x), h); };
  auto mix_d = [&](double x) {
    std::uint64_t bits;
    std::memcpy(&bits, &x, sizeof(bits));
    mix_u64(bits);
  };
  mix_u64(std::uint64_t(cfg.c1));
  mix_u64(std::uint64_t(cfg.c2));
  mix_u64(std::uint64_t(cfg.n_hidden));
  mix_u64(std::uint64_t(cfg.hyper_channels));
  mix_u64(std::uint64_t(cfg.group_size));
  mix_d(cfg.lambda);
  mix_u64(std::uint64_t(cfg.metric == Metric::kMsSsim ? 1 : 0));
  mix_u64((cfg.use_frr ? 1u : 0u) | (cfg.use_ffm ? 2u : 0u) | (cfg.use_mem ? 4u : 0u) |
          (cfg.single_rate ? 8u : 0u));
  mix_u64(cfg.seed);
  for (int i = 0; i < params.count(); ++i) {
    h = fnv1a64(params.name(i), h);
    const Tensor& t = params.value(i);
    mix_u64(std::uint64_t(t.shape.n));
    mix_u64(std::uint64_t(t.shape.c));
    mix_u64(std::uint64_t(t.shape.h));
    mix_u64(std::uint64_t(t.shape.w));
    // double bit patterns; all supported targets are little-endian
    h = fnv1a64(t.v.data(), t.v.size() * sizeof(double), h);
  }
  return h;
}

// ---------------------------------------------------------------------------
// free helpers

Tensor clamp01(const Tensor& x) {
  Tensor out = x;
  for (double& v : out.v) v = std::min(1.0, std::max(0.0, v));
  return out;
}

}  // namespace dfgs
