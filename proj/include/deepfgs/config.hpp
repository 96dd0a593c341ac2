#pragma once

#include <map>
#include <string>

#include "deepfgs/trainer.hpp"

namespace dfgs {

// Key-value run configuration: `key = value` lines, '#' comments, blank
// lines ignored. Keys match TrainConfig/ModelConfig field names (see
// config_reference() for the full list). CLI flags override file values by
// applying later.
struct ConfigMap {
  std::map<std::string, std::string> values;
  void set(const std::string& key, const std::string& value) { values[key] = value; }
};

// Throws DataError on malformed lines or an unreadable file.
ConfigMap parse_config_file(const std::string& path);
// Same grammar from a string (tests, inline overrides).
ConfigMap parse_config_text(const std::string& text, const std::string& origin = "<inline>");

// Applies every entry onto cfg; unknown keys or unparsable values throw
// UsageError naming the key. `lambda = auto` (also the behavior when the key
// is absent and the metric is MS-SSIM) resolves the metric-matched default:
// 0.002 for MSE, 7.0 for MS-SSIM.
void apply_config(const ConfigMap& c, TrainConfig& cfg);

// Human-readable reference: every key, its default, and whether the default
// is desk-scale or the full-scale reference setting.
std::string config_reference();

}  // namespace dfgs
