#pragma once

#include <cstdint>

#include "deepfgs/graph.hpp"
#include "deepfgs/model.hpp"
#include "deepfgs/rng.hpp"
#include "deepfgs/tensor.hpp"

namespace dfgs {

// Distortion-weight schedule for the scalable channels. Floor mode is the
// plain ⌊i/d⌋ staircase; clamped mode never lets the weight vanish, so even
// the smallest prefixes receive a distortion signal.
enum class WMode { kFloor, kClamped };

// ⌊i/d⌋, or max(1, ⌊i/d⌋) in clamped mode
long long w_weight(long long i, long long d, WMode mode = WMode::kFloor);

// uniform over {0, 1, …, c2}; 0 selects the basic-only branch
int sample_j(Rng& rng, int c2);

struct LossOptions {
  bool include_basic_distortion = true;  // add λ·D(x, x̂_b) to scalable steps
  WMode w_mode = WMode::kFloor;
};

// Scalar summary of one training step's loss, in consistent units: rates in
// bits, distortions in the extensive scale used by the optimizer, and
// total = rate_b + rate_s + λ·(dist_b·[included] + w_j·dist_s).
struct LossBreakdown {
  double rate_b = 0.0;
  double rate_s = 0.0;
  double dist_b = 0.0;
  double dist_s = 0.0;
  double total = 0.0;
  int j = 0;
  long long w_j = 0;
};

// Graph handles for one loss forward pass. `total` is the node to backprop;
// the rest exist for logging, tests, and breakdown extraction. Vals with
// ok() == false were not part of this branch (e.g. the scalable side of a
// basic-only step).
struct LossTerms {
  Val total;
  Val rate_b, rate_s;
  Val dist_b, dist_s;
  Val lik_b, lik_zb;  // per-element likelihood arrays behind rate_b
  Val lik_s, lik_zs;  // likelihood arrays behind rate_s
  int j = 0;
  long long w_j = 0;
};

// Extensive distortion for a batch, chosen by metric: squared error summed
// over every element and scaled to 8-bit units (255²·Σe²/3 = per-image
// 255²·MSE·H·W), or Σ over images of (1 − ms_ssim)·H·W. Both make
// rate + λ·distortion commensurable in bits with the default λ values.
Val distortion_graph(Graph& g, Val x, Val xhat, Metric metric);

// Basic-layer training objective: R(ŷ_b) + R(ẑ_b) + λ·D(x, x̂_b), with noise
// quantization throughout. Noise draw order: ẑ_b then ŷ_b.
LossTerms basic_loss(Graph& g, Model::Binder& b, const Tensor& x, Rng& noise_rng,
                     const LossOptions& opt = {});

// Sampled scalable objective for one prefix length j ∈ [1, C2]: adds the
// scalable rates (ẑ_s fully, ŷ_s over channels 1..j) and the weighted
// distortion of the j-channel reconstruction. Noise draw order: ẑ_b, ŷ_b,
// ẑ_s, ŷ_s — a reseeded generator reproduces the basic-loss draws exactly.
LossTerms scalable_loss_sampled(Graph& g, Model::Binder& b, const Tensor& x, int j, Rng& noise_rng,
                                const LossOptions& opt = {});

// Exhaustive forward-dependent sum over prefixes i = 1..k−C1 (no basic
// distortion term), sharing a single forward pass and noise draws with the
// sampled form. Testing/oracle use only: refuses C2 > 16.
Val scalable_loss_full(Graph& g, Model::Binder& b, const Tensor& x, int k, Rng& noise_rng,
                       const LossOptions& opt = {});

// Evaluates the breakdown numbers; throws NumericError naming the first
// non-finite component.
LossBreakdown read_breakdown(Graph& g, const LossTerms& t);

}  // namespace dfgs
