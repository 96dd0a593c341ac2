#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "deepfgs/graph.hpp"
#include "deepfgs/rng.hpp"
#include "deepfgs/tensor.hpp"

namespace dfgs {

enum class Metric { kMse, kMsSsim };

struct ModelConfig {
  int c1 = 32;              // basic latent channels
  int c2 = 32;              // scalable latent channels
  int n_hidden = 64;        // internal conv width
  int hyper_channels = 32;  // hyper latent channels
  int group_size = 0;       // distortion-weight divisor d; 0 = auto (≈ c2/24, min 1)
  double lambda = 0.002;
  Metric metric = Metric::kMse;
  bool use_frr = true;
  bool use_ffm = true;
  bool use_mem = true;
  bool single_rate = false;
  std::uint64_t seed = 7;

  static constexpr int kDownsampleFactor = 16;  // four stride-2 stages, fixed

  // resolves group_size=0 and checks ranges; throws UsageError
  void finalize();
};

// Named parameter registry. Values and gradient accumulators live here for
// the model's whole life; graphs bind to them by pointer so every forward
// pass trains the same storage.
class ParamStore {
 public:
  int add(const std::string& name, Tensor init);
  int index_of(std::string_view name) const;  // throws DataError when absent
  bool has(std::string_view name) const { return index_.find(name) != index_.end(); }
  int count() const { return int(values_.size()); }

  const std::string& name(int i) const { return names_[i]; }
  Tensor& value(int i) { return values_[i]; }
  const Tensor& value(int i) const { return values_[i]; }
  Tensor& grad(int i) { return grads_[i]; }
  Tensor& value(std::string_view n) { return values_[index_of(n)]; }
  const Tensor& value(std::string_view n) const { return values_[index_of(n)]; }

  void zero_grads();
  std::int64_t total_elements() const;

 private:
  std::vector<std::string> names_;
  std::vector<Tensor> values_;
  std::vector<Tensor> grads_;
  std::map<std::string, int, std::less<>> index_;
};

struct EntropyVals {
  Val mu;
  Val sigma;  // elementwise ≥ sigma_min
};

constexpr double kSigmaMin = 0.11;
constexpr double kLikelihoodFloor = 5.960464477539063e-08;  // 2^-24

// The full codec network: feature-separation transforms, gating modules, the
// shared decoder, hyper networks, the conditional entropy head for the
// scalable latent, and the factorized hyper priors. All methods build onto a
// caller-owned Graph; parameters are bound through a Binder so repeated use
// inside one graph shares one leaf node (and therefore one gradient sink).
class Model {
 public:
  explicit Model(ModelConfig cfg);

  ModelConfig cfg;
  ParamStore params;

  struct Binder {
    Binder(Graph& graph, Model& model)
        : g(graph), m(model), cache_(size_t(model.params.count()), Val{}) {}
    Graph& g;
    Model& m;
    Val p(std::string_view name);

   private:
    std::vector<Val> cache_;
  };

  // ---- transforms ----
  Val encode_basic(Binder& b, Val x) const;              // x (n,3,H,W) -> (n,c1,H/16,W/16)
  Val encode_scalable(Binder& b, Val x, Val xhat_b) const;  // -> (n,c2,H/16,W/16)
  Val frr(Binder& b, Val y_s_prime, Val y_b) const;      // identity when !use_frr
  Val ffm(Binder& b, Val y_d) const;                     // identity when !use_ffm
  // y_join (n,c1+c2,h,w) -> (n,3,16h,16w); applies ffm, then the deconv stack
  Val decode(Binder& b, Val y_join) const;
  Val channel_select(Graph& g, Val y_s, int j) const;    // zero channels with index ≥ j
  Tensor channel_select(const Tensor& y_s, int j) const;

  // ---- entropy networks ----
  Val hyper_encode_b(Binder& b, Val y_b) const;          // -> (n,hyper,h',w')
  Val hyper_encode_s(Binder& b, Val y_s) const;
  EntropyVals hyper_params_b(Binder& b, Val z_b_hat, int out_h, int out_w) const;
  // Conditional parameters for the scalable latent. Reads z_s_hat and (when
  // use_mem) y_b_hat; never any part of y_s — that is what keeps channel-
  // prefix decoding sound.
  EntropyVals scalable_params(Binder& b, Val z_s_hat, Val y_b_hat, int out_h, int out_w) const;
  // elementwise probability of a (noisy or rounded) hyper latent under the
  // named learned prior ("prior_b" or "prior_s"), floored at kLikelihoodFloor
  Val prior_likelihood(Binder& b, Val z_tilde, std::string_view prior) const;

  // parameter + config fingerprint embedded in checkpoints and bitstreams
  std::uint64_t content_hash() const;

 private:
  Val gdn(Binder& b, Val x, const std::string& prefix, bool inverse) const;
  Val gate_pair(Binder& b, Val target, Val guide, const std::string& prefix) const;
  void register_params();
};

// p = Φ((ŷ+½−μ)/σ) − Φ((ŷ−½−μ)/σ), floored at kLikelihoodFloor
Val gaussian_likelihood(Graph& g, Val y_hat, const EntropyVals& p);
// −Σ log2 p over every element, in bits
Val rate_bits(Graph& g, Val likelihood);

// training-mode quantizer: y + u, u ~ U(−½, ½) i.i.d. (gradient is identity)
Val quantize_noise(Graph& g, Val y, Rng& rng);
// inference-mode quantizer: elementwise nearest integer, ties to even
Tensor quantize_round(const Tensor& y);

Tensor clamp01(const Tensor& x);

}  // namespace dfgs
