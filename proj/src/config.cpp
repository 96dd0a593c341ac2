#include "deepfgs/config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "deepfgs/error.hpp"

namespace dfgs {

namespace {

std::string trim(const std::string& s) {
  size_t a = 0, b = s.size();
  while (a < b && std::isspace((unsigned char)s[a])) ++a;
  while (b > a && std::isspace((unsigned char)s[b - 1])) --b;
  return s.substr(a, b - a);
}

long long parse_int(const std::string& key, const std::string& v) {
  try {
    size_t used = 0;
    long long r = std::stoll(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return r;
  } catch (const std::exception&) {
    throw UsageError("config: key '" + key + "' needs an integer, got '" + v + "'");
  }
}

double parse_real(const std::string& key, const std::string& v) {
  try {
    size_t used = 0;
    double r = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return r;
  } catch (const std::exception&) {
    throw UsageError("config: key '" + key + "' needs a number, got '" + v + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& v) {
  std::string s = v;
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  if (s == "1" || s == "true" || s == "yes" || s == "on") return true;
  if (s == "0" || s == "false" || s == "no" || s == "off") return false;
  throw UsageError("config: key '" + key + "' needs a boolean, got '" + v + "'");
}

}  // namespace

ConfigMap parse_config_text(const std::string& text, const std::string& origin) {
  ConfigMap c;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::string t = trim(line);
    if (t.empty()) continue;
    size_t eq = t.find('=');
    if (eq == std::string::npos) {
      throw DataError("config " + origin + ":" + std::to_string(lineno) +
                      ": expected 'key = value', got '" + t + "'");
    }
    std::string key = trim(t.substr(0, eq));
    std::string value = trim(t.substr(eq + 1));
    if (key.empty()) {
      throw DataError("config " + origin + ":" + std::to_string(lineno) + ": empty key");
    }
    c.set(key, value);
  }
  return c;
}

ConfigMap parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("config: cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str(), path);
}

void apply_config(const ConfigMap& c, TrainConfig& cfg) {
  bool lambda_set = false;
  std::string lambda_value;

  for (const auto& [key, v] : c.values) {
    if (key == "dataset_dir") cfg.dataset_dir = v;
    else if (key == "out_dir") cfg.out_dir = v;
    else if (key == "crop") cfg.crop = int(parse_int(key, v));
    else if (key == "batch") cfg.batch = int(parse_int(key, v));
    else if (key == "steps") cfg.steps = int(parse_int(key, v));
    else if (key == "epochs") cfg.epochs = int(parse_int(key, v));
    else if (key == "lr") cfg.lr = parse_real(key, v);
    else if (key == "lr_drop") cfg.lr_drop = parse_real(key, v);
    else if (key == "lr_drop_step") cfg.lr_drop_step = int(parse_int(key, v));
    else if (key == "checkpoint_every") cfg.checkpoint_every = int(parse_int(key, v));
    else if (key == "log_every") cfg.log_every = int(parse_int(key, v));
    else if (key == "deterministic") cfg.deterministic = parse_bool(key, v);
    else if (key == "seed") cfg.seed = std::uint64_t(parse_int(key, v));
    else if (key == "c1") cfg.model.c1 = int(parse_int(key, v));
    else if (key == "c2") cfg.model.c2 = int(parse_int(key, v));
    else if (key == "n_hidden") cfg.model.n_hidden = int(parse_int(key, v));
    else if (key == "hyper_channels") cfg.model.hyper_channels = int(parse_int(key, v));
    else if (key == "group_size") cfg.model.group_size = int(parse_int(key, v));
    else if (key == "metric") {
      if (v == "mse") cfg.model.metric = Metric::kMse;
      else if (v == "msssim" || v == "ms-ssim") cfg.model.metric = Metric::kMsSsim;
      else throw UsageError("config: metric must be 'mse' or 'msssim', got '" + v + "'");
    } else if (key == "lambda") {
      lambda_set = true;
      lambda_value = v;
    } else if (key == "use_frr") cfg.model.use_frr = parse_bool(key, v);
    else if (key == "use_ffm") cfg.model.use_ffm = parse_bool(key, v);
    else if (key == "use_mem") cfg.model.use_mem = parse_bool(key, v);
    else if (key == "single_rate") cfg.model.single_rate = parse_bool(key, v);
    else throw UsageError("config: unknown key '" + key + "'");
  }

  // λ pairs with the metric: 0.002 for MSE, 7.0 for MS-SSIM. An explicit
  // number always wins; 'auto' (or leaving the key out under MS-SSIM)
  // resolves the metric-matched default.
  if (lambda_set && lambda_value != "auto") {
    cfg.model.lambda = parse_real("lambda", lambda_value);
  } else if ((lambda_set && lambda_value == "auto") ||
             (!lambda_set && cfg.model.metric == Metric::kMsSsim)) {
    cfg.model.lambda = cfg.model.metric == Metric::kMsSsim ? 7.0 : 0.002;
  }
}

std::string config_reference() {
  return
      "# Run configuration keys ('key = value' lines, '#' comments).\n"
      "# Defaults are desk-scale; full-scale reference values in brackets.\n"
      "dataset_dir      =            # directory of .ppm/.pgm training images (required)\n"
      "out_dir          = .          # checkpoints and metrics go here\n"
      "crop             = 48         # training crop, multiple of 16   [full scale: 256]\n"
      "batch            = 8          # crops per step                  [full scale: 16]\n"
      "steps            = 2000       # optimizer steps                 [full scale: 50 epochs]\n"
      "epochs           = 0          # alternative to steps: epochs * ceil(images/batch)\n"
      "lr               = 1e-3       # initial learning rate           [full scale: 1e-4]\n"
      "lr_drop          = 1e-4       # rate after the drop             [full scale: 1e-5]\n"
      "lr_drop_step     = 1500       # step after which lr_drop applies; 0 = never\n"
      "checkpoint_every = 0          # periodic checkpoints; 0 = final only\n"
      "log_every        = 100        # console cadence; the CSV logs every step\n"
      "deterministic    = true       # serial data order, bit-identical reruns\n"
      "seed             = 7          # master seed (data, noise, init)\n"
      "c1               = 32         # basic latent channels           [full scale: 192]\n"
      "c2               = 32         # scalable latent channels        [full scale: 192]\n"
      "n_hidden         = 64         # conv width                      [full scale: 192]\n"
      "hyper_channels   = 32         # hyper latent channels           [full scale: 192]\n"
      "group_size       = 0          # distortion-weight divisor d; 0 = auto (~c2/24, min 1)\n"
      "                              # full scale: 8\n"
      "lambda           = auto       # RD tradeoff; auto = 0.002 (mse) / 7.0 (msssim)\n"
      "metric           = mse        # mse | msssim\n"
      "use_frr          = true       # cross-gating of the scalable encoder\n"
      "use_ffm          = true       # decoder-head feature fusion\n"
      "use_mem          = true       # condition scalable entropy on the basic latent\n"
      "single_rate      = false      # non-scalable baseline: always train the full prefix\n";
}

}  // namespace dfgs
