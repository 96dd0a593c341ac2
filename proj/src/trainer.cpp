#include "deepfgs/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <vector>

#include "deepfgs/checkpoint.hpp"
#include "deepfgs/dataset.hpp"
#include "deepfgs/error.hpp"
#include "deepfgs/rng.hpp"

namespace fs = std::filesystem;

namespace dfgs {

namespace {

// elementwise adaptive-moment optimizer over the whole parameter store
class AdamState {
 public:
  explicit AdamState(const ParamStore& ps) {
    for (int i = 0; i < ps.count(); ++i) {
      m_.emplace_back(ps.value(i).shape);
      v_.emplace_back(ps.value(i).shape);
    }
  }

  void step(ParamStore& ps, double lr) {
    ++t_;
    const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    const double bc1 = 1.0 - std::pow(b1, double(t_));
    const double bc2 = 1.0 - std::pow(b2, double(t_));
    for (int i = 0; i < ps.count(); ++i) {
      Tensor& p = ps.value(i);
      Tensor& g = ps.grad(i);
      Tensor& m = m_[size_t(i)];
      Tensor& v = v_[size_t(i)];
      for (size_t k = 0; k < p.v.size(); ++k) {
        m.v[k] = b1 * m.v[k] + (1.0 - b1) * g.v[k];
        v.v[k] = b2 * v.v[k] + (1.0 - b2) * g.v[k] * g.v[k];
        p.v[k] -= lr * (m.v[k] / bc1) / (std::sqrt(v.v[k] / bc2) + eps);
      }
    }
  }

 private:
  std::vector<Tensor> m_, v_;
  long long t_ = 0;
};

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void TrainConfig::validate() const {
  if (dataset_dir.empty()) throw UsageError("train: dataset_dir is required");
  if (crop <= 0 || crop % ModelConfig::kDownsampleFactor != 0) {
    throw UsageError("train: crop must be a positive multiple of 16, got " + std::to_string(crop));
  }
  if (batch <= 0) throw UsageError("train: batch must be > 0");
  if (steps <= 0 && epochs <= 0) throw UsageError("train: steps (or epochs) must be > 0");
  if (lr <= 0.0 || lr_drop <= 0.0) throw UsageError("train: learning rates must be > 0");
  if (lr_drop_step < 0) throw UsageError("train: lr_drop_step must be >= 0");
}

void write_metrics_csv(const std::vector<StepLog>& logs, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("metrics: cannot open " + path + " for writing");
  out << "# deepfgs-train-v1\n";
  out << "step,lr,j,w_j,rate_b,rate_s,dist_b,dist_s,total\n";
  for (const StepLog& l : logs) {
    out << l.step << ',' << fmt_double(l.lr) << ',' << l.loss.j << ',' << l.loss.w_j << ','
        << fmt_double(l.loss.rate_b) << ',' << fmt_double(l.loss.rate_s) << ','
        << fmt_double(l.loss.dist_b) << ',' << fmt_double(l.loss.dist_s) << ','
        << fmt_double(l.loss.total) << '\n';
  }
  if (!out) throw DataError("metrics: write to " + path + " failed");
}

TrainResult train(const TrainConfig& cfg_in, std::ostream* console) {
  TrainConfig cfg = cfg_in;
  cfg.validate();
  Dataset data(cfg.dataset_dir);
  if (cfg.epochs > 0 && cfg.steps == TrainConfig{}.steps) {
    cfg.steps = cfg.epochs * std::max(1, (data.count() + cfg.batch - 1) / cfg.batch);
  }

  std::error_code ec;
  fs::create_directories(cfg.out_dir, ec);
  if (ec) throw DataError("train: cannot create out_dir " + cfg.out_dir + ": " + ec.message());

  ModelConfig mc = cfg.model;
  mc.seed = cfg.seed;
  Model m(mc);
  AdamState adam(m.params);

  Rng root(cfg.seed);
  Rng data_rng = root.split("data");
  Rng noise_rng = root.split("noise");
  Rng j_rng = root.split("prefix");

  TrainResult result;
  result.logs.reserve(size_t(cfg.steps));
  const std::string metrics_path = (fs::path(cfg.out_dir) / "metrics.csv").string();
  const std::string final_path = (fs::path(cfg.out_dir) / "model_final.ckpt").string();

  for (int step = 1; step <= cfg.steps; ++step) {
    double lr = (cfg.lr_drop_step > 0 && step > cfg.lr_drop_step) ? cfg.lr_drop : cfg.lr;
    Tensor x = data.sample_crop_batch(data_rng, cfg.crop, cfg.batch);
    int j = m.cfg.single_rate ? m.cfg.c2 : sample_j(j_rng, m.cfg.c2);

    Graph g;
    Model::Binder b(g, m);
    LossTerms terms = j == 0 ? basic_loss(g, b, x, noise_rng)
                             : scalable_loss_sampled(g, b, x, j, noise_rng);

    LossBreakdown raw;
    try {
      raw = read_breakdown(g, terms);
    } catch (const NumericError& e) {
      // diagnostic snapshot: the exact parameters that produced the bad loss
      const std::string snap = (fs::path(cfg.out_dir) / "diagnostic.ckpt").string();
      save_checkpoint(m, snap);
      write_metrics_csv(result.logs, metrics_path);
      throw NumericError("train: non-finite loss at step " + std::to_string(step) + " (j=" +
                         std::to_string(j) + "): " + e.what() + "; parameters saved to " + snap);
    }

    m.params.zero_grads();
    g.backward(g.mul_scalar(terms.total, 1.0 / double(cfg.batch)));
    adam.step(m.params, lr);

    StepLog log;
    log.step = step;
    log.lr = lr;
    log.loss = raw;
    const double inv_b = 1.0 / double(cfg.batch);
    log.loss.rate_b *= inv_b;
    log.loss.rate_s *= inv_b;
    log.loss.dist_b *= inv_b;
    log.loss.dist_s *= inv_b;
    log.loss.total *= inv_b;
    result.logs.push_back(log);

    if (console && (step == 1 || step == cfg.steps ||
                    (cfg.log_every > 0 && step % cfg.log_every == 0))) {
      char line[256];
      std::snprintf(line, sizeof line,
                    "step %5d  lr %.2g  j %3d  total %12.3f  rate_b %10.2f  rate_s %10.2f\n",
                    step, lr, log.loss.j, log.loss.total, log.loss.rate_b, log.loss.rate_s);
      (*console) << line;
      console->flush();
    }
    if (cfg.checkpoint_every > 0 && step % cfg.checkpoint_every == 0 && step != cfg.steps) {
      char name[48];
      std::snprintf(name, sizeof name, "model_step%06d.ckpt", step);
      save_checkpoint(m, (fs::path(cfg.out_dir) / name).string());
    }
  }

  save_checkpoint(m, final_path);
  write_metrics_csv(result.logs, metrics_path);
  result.checkpoint_path = final_path;
  result.metrics_path = metrics_path;
  result.model_hash = m.content_hash();
  return result;
}

}  // namespace dfgs
