#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "deepfgs/model.hpp"
#include "deepfgs/tensor.hpp"

namespace dfgs {

// One truncation level of the rate–distortion sweep, averaged over images.
struct EvalRow {
  int n_channels = 0;
  double bytes = 0.0;    // serialized container size
  double bpp = 0.0;      // payload bits per pixel
  double psnr = 0.0;
  double ms_ssim = 0.0;
};

struct EvalReport {
  std::vector<EvalRow> rows;  // sorted by n_channels, bpp nondecreasing
  std::uint64_t model_hash = 0;
  std::string dataset_id;  // fingerprint of the evaluated pixels
  int interval = 0;
  int images = 0;
};

// Encodes each image once, then truncates/decodes at n ∈ {0, interval,
// 2·interval, …, C2} (C2 always included). Images must already have
// extents divisible by 16 — callers center-crop first.
EvalReport rd_sweep(Model& m, const std::vector<Tensor>& images, int interval);

// CSV schema "# deepfgs-eval-v1": n_channels,bytes,bpp,psnr,ms_ssim.
void write_eval_csv(const EvalReport& r, std::ostream& out);
std::string eval_report_json(const EvalReport& r);

// Per-group entropy/quality study over the scalable channels.
struct EntropyRow {
  int group = 0;    // 1-based
  int ch_lo = 0;    // first channel of the group (0-based, inclusive)
  int ch_hi = 0;    // last channel (inclusive)
  double est_bits = 0.0;  // mean estimated bits of this group's channels
  double psnr = 0.0;      // mean PSNR decoding with groups 1..group kept
};

struct EntropyReport {
  std::vector<EntropyRow> rows;
  double total_scalable_bits = 0.0;  // mean estimated ŷ_s bits, all channels
  std::uint64_t model_hash = 0;
  int groups = 0;
  int images = 0;
};

// groups must divide C2 (UsageError otherwise). Estimated bits come from the
// model's own likelihoods at the rounded latents; PSNR uses the in-model
// reconstruction with the prefix of whole groups retained.
EntropyReport analyze_entropy(Model& m, const std::vector<Tensor>& images, int groups);

// CSV schema "# deepfgs-entropy-v1": group,ch_lo,ch_hi,est_bits,psnr.
void write_entropy_csv(const EntropyReport& r, std::ostream& out);
std::string entropy_report_json(const EntropyReport& r);

// Decoder-head feature energies for one image: per fused channel,
// max − min over space, for the basic-only fusion, the full fusion, and
// their difference.
struct FeatureEnergy {
  std::vector<double> basic_only;   // fused features of (ŷ_b ‖ 0)
  std::vector<double> full;         // fused features of (ŷ_b ‖ ŷ_s)
  std::vector<double> difference;   // energy of (full − basic_only) features
};

// Optionally hands back the raw fused feature maps so callers can dump or
// recompute; both are (1, c1+c2, h, w).
FeatureEnergy dump_features(Model& m, const Tensor& image, Tensor* basic_features = nullptr,
                            Tensor* full_features = nullptr);

// CSV schema "# deepfgs-features-v1": channel,basic_only,full,difference.
void write_features_csv(const FeatureEnergy& e, std::ostream& out);

// fingerprint used for EvalReport::dataset_id
std::string dataset_fingerprint(const std::vector<Tensor>& images);

}  // namespace dfgs
