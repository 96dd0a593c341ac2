#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "deepfgs/model.hpp"
#include "deepfgs/objective.hpp"

namespace dfgs {

// Desk-scale defaults: 48px crops, batch 8, 2000 steps, learning rate 1e-3
// dropping to 1e-4 after step 1500. The full-scale reference configuration
// (256px crops, batch 16, 50 photo-corpus epochs at 1e-4 → 1e-5) is documented in
// the config reference; it is out of scope for CPU runs.
struct TrainConfig {
  std::string dataset_dir;
  std::string out_dir = ".";
  int crop = 48;    // must be a positive multiple of 16
  int batch = 8;
  int steps = 2000;
  int epochs = 0;   // when > 0 and steps untouched: steps = epochs·⌈images/batch⌉
  double lr = 1e-3;
  double lr_drop = 1e-4;   // rate used after lr_drop_step
  int lr_drop_step = 1500; // 0 disables the drop
  int checkpoint_every = 0;  // extra periodic checkpoints; 0 = final only
  int log_every = 100;       // console cadence; the CSV records every step
  bool deterministic = true; // serial data order; bit-identical reruns
  std::uint64_t seed = 7;
  ModelConfig model;

  void validate() const;  // throws UsageError
};

struct StepLog {
  int step = 0;  // 1-based
  double lr = 0.0;
  LossBreakdown loss;  // per-image means (batch-normalized)
};

struct TrainResult {
  std::vector<StepLog> logs;
  std::string checkpoint_path;  // final model archive
  std::string metrics_path;     // per-step CSV
  std::uint64_t model_hash = 0;
};

// Runs the full loop: per step draws a crop batch and a prefix length j
// (always C2 when single_rate), builds one loss graph, backpropagates, and
// applies one adaptive-moment update (β1=0.9, β2=0.999, ε=1e-8) on the
// batch-mean loss. Writes metrics.csv and model_final.ckpt under out_dir
// (plus model_step*.ckpt when checkpoint_every > 0). A non-finite loss
// aborts with NumericError after writing diagnostic.ckpt and flushing the
// metrics collected so far. `console` (optional) receives progress lines.
TrainResult train(const TrainConfig& cfg, std::ostream* console = nullptr);

// Writes the versioned per-step metrics CSV ("# deepfgs-train-v1").
void write_metrics_csv(const std::vector<StepLog>& logs, const std::string& path);

}  // namespace dfgs
