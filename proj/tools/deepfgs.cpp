// deepfgs: one-pass scalable image codec toolbox.
//
//   gen-data         write a synthetic training set
//   train            optimize a model on a directory of images
//   encode           image -> .fgs bitstream
//   decode           .fgs -> image (any truncation level)
//   truncate         cut a bitstream to fewer scalable channels / a byte or bpp budget
//   inspect          show a bitstream's header and segment table
//   eval             rate-distortion sweep across truncation levels
//   analyze-entropy  per-group scalable-channel bits + prefix PSNR
//   dump-features    decoder-head per-channel feature energies
//   config-reference print every config key with defaults
//
// Exit codes: 0 ok, 1 usage, 2 data/format error, 3 numeric failure.

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "deepfgs/checkpoint.hpp"
#include "deepfgs/codec.hpp"
#include "deepfgs/config.hpp"
#include "deepfgs/container.hpp"
#include "deepfgs/dataset.hpp"
#include "deepfgs/error.hpp"
#include "deepfgs/evalrun.hpp"
#include "deepfgs/metrics.hpp"
#include "deepfgs/trainer.hpp"

namespace fs = std::filesystem;
using namespace dfgs;

namespace {

const char* kUsage =
    "usage: deepfgs <command> [options]\n"
    "\n"
    "commands:\n"
    "  gen-data         --out DIR --count N [--size HxW] [--seed S]\n"
    "  train            [--config FILE] [--dataset DIR] [--out DIR] [--steps N]\n"
    "                   [--seed S] [--deterministic] [--set key=value ...] [--json PATH]\n"
    "  encode           --checkpoint CKPT --input IMG.ppm --out OUT.fgs [--json PATH]\n"
    "  decode           --checkpoint CKPT --input IN.fgs --out OUT.ppm [--json PATH]\n"
    "  truncate         --input IN.fgs --out OUT.fgs\n"
    "                   (--channels N | --max-bytes B | --bpp R) [--json PATH]\n"
    "  inspect          --input IN.fgs [--json PATH]\n"
    "  eval             --checkpoint CKPT --images DIR --out CSV [--interval N] [--json PATH]\n"
    "  analyze-entropy  --checkpoint CKPT --images DIR --out CSV [--groups G] [--json PATH]\n"
    "  dump-features    --checkpoint CKPT --input IMG.ppm --out PREFIX [--json PATH]\n"
    "  config-reference\n"
    "\n"
    "common flags: --seed N, --deterministic, --out PATH, --json PATH\n";

struct Args {
  std::map<std::string, std::string> opt;
  std::set<std::string> flag;
  std::vector<std::string> sets;  // repeated --set key=value

  bool has(const std::string& k) const { return opt.count(k) || flag.count(k); }
  std::string need(const std::string& k) const {
    auto it = opt.find(k);
    if (it == opt.end()) throw UsageError("missing required --" + k);
    return it->second;
  }
  std::string get(const std::string& k, const std::string& dflt) const {
    auto it = opt.find(k);
    return it == opt.end() ? dflt : it->second;
  }
  long long get_int(const std::string& k, long long dflt) const {
    auto it = opt.find(k);
    if (it == opt.end()) return dflt;
    try {
      size_t used = 0;
      long long v = std::stoll(it->second, &used);
      if (used != it->second.size()) throw std::invalid_argument(it->second);
      return v;
    } catch (const std::exception&) {
      throw UsageError("--" + k + " needs an integer, got '" + it->second + "'");
    }
  }
  double get_real(const std::string& k, double dflt) const {
    auto it = opt.find(k);
    if (it == opt.end()) return dflt;
    try {
      size_t used = 0;
      double v = std::stod(it->second, &used);
      if (used != it->second.size()) throw std::invalid_argument(it->second);
      return v;
    } catch (const std::exception&) {
      throw UsageError("--" + k + " needs a number, got '" + it->second + "'");
    }
  }
};

Args parse_args(int argc, char** argv, int first, const std::set<std::string>& value_opts,
                const std::set<std::string>& bool_flags) {
  Args a;
  for (int i = first; i < argc; ++i) {
    std::string tok = argv[i];
    if (tok.rfind("--", 0) != 0) throw UsageError("unexpected argument '" + tok + "'");
    std::string name = tok.substr(2);
    if (name == "set") {
      if (++i >= argc) throw UsageError("--set needs key=value");
      a.sets.push_back(argv[i]);
    } else if (bool_flags.count(name)) {
      a.flag.insert(name);
    } else if (value_opts.count(name)) {
      if (++i >= argc) throw UsageError("--" + name + " needs a value");
      a.opt[name] = argv[i];
    } else {
      throw UsageError("unknown flag --" + name);
    }
  }
  return a;
}

std::string hash_hex(std::uint64_t h) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", (unsigned long long)h);
  return buf;
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  if (!out) throw DataError("cannot open " + path + " for writing");
  out << text;
  if (!out) throw DataError("write to " + path + " failed");
}

void maybe_write_json(const Args& a, const std::string& text) {
  auto it = a.opt.find("json");
  if (it != a.opt.end()) write_text_file(it->second, text);
}

std::vector<std::uint8_t> read_binary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  std::string s = buf.str();
  return std::vector<std::uint8_t>(s.begin(), s.end());
}

void write_binary(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open " + path + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
  if (!out) throw DataError("write to " + path + " failed");
}

// raw feature dump: "FGSB" magic, shape as 4×u32 LE, then f64 LE values
void write_feature_bin(const std::string& path, const Tensor& t) {
  std::vector<std::uint8_t> b;
  const char magic[4] = {'F', 'G', 'S', 'B'};
  b.insert(b.end(), magic, magic + 4);
  for (int d : {t.shape.n, t.shape.c, t.shape.h, t.shape.w}) {
    for (int i = 0; i < 4; ++i) b.push_back(std::uint8_t(std::uint32_t(d) >> (8 * i)));
  }
  for (double v : t.v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    for (int i = 0; i < 8; ++i) b.push_back(std::uint8_t(bits >> (8 * i)));
  }
  write_binary(path, b);
}

Tensor load_eval_image(const std::string& path, std::ostream& log) {
  Tensor img = load_image(path);
  bool cropped = false;
  Tensor out = center_crop_mult16(img, &cropped);
  if (cropped) {
    log << "note: center-cropped " << path << " from " << img.shape.w << "x" << img.shape.h
        << " to " << out.shape.w << "x" << out.shape.h << " (extents must be multiples of 16)\n";
  }
  return out;
}

std::vector<Tensor> load_eval_dir(const std::string& dir, std::ostream& log) {
  std::vector<Tensor> images;
  for (const std::string& f : list_images(dir)) images.push_back(load_eval_image(f, log));
  if (images.empty()) throw DataError("no .ppm/.pgm images in " + dir);
  return images;
}

std::string stats_json(const CodecStats& s, std::uint64_t model_hash) {
  std::ostringstream out;
  out << "{\n  \"schema\": \"deepfgs-stats-v1\",\n";
  out << "  \"model_hash\": \"" << hash_hex(model_hash) << "\",\n";
  out << "  \"payload_bytes\": " << s.payload_bytes << ",\n";
  out << "  \"container_bytes\": " << s.container_bytes << ",\n";
  out << "  \"basic_bytes\": " << s.basic_bytes << ",\n";
  out << "  \"scalable_bytes\": " << s.scalable_bytes << ",\n";
  out << "  \"n_present\": " << s.n_present << ",\n";
  out << "  \"bpp\": " << fmt_double(s.bpp) << ",\n";
  out << "  \"bpp_basic\": " << fmt_double(s.bpp_basic) << ",\n";
  out << "  \"bpp_scalable\": " << fmt_double(s.bpp_scalable) << ",\n";
  out << "  \"est_bits_basic\": " << fmt_double(s.est_bits_basic) << ",\n";
  out << "  \"est_bits_scalable\": " << fmt_double(s.est_bits_scalable) << ",\n";
  out << "  \"segment_bytes\": [";
  for (size_t i = 0; i < s.segment_bytes.size(); ++i) {
    out << s.segment_bytes[i] << (i + 1 < s.segment_bytes.size() ? ", " : "");
  }
  out << "],\n  \"est_bits_channel\": [";
  for (size_t i = 0; i < s.est_bits_channel.size(); ++i) {
    out << fmt_double(s.est_bits_channel[i]) << (i + 1 < s.est_bits_channel.size() ? ", " : "");
  }
  out << "]\n}\n";
  return out.str();
}

std::string container_json(const BitstreamContainer& c) {
  std::ostringstream out;
  out << "{\n  \"schema\": \"deepfgs-inspect-v1\",\n";
  out << "  \"version\": " << int(c.hdr.version) << ",\n";
  out << "  \"model_hash\": \"" << hash_hex(c.hdr.model_hash) << "\",\n";
  out << "  \"width\": " << c.hdr.w << ",\n  \"height\": " << c.hdr.h << ",\n";
  out << "  \"c1\": " << c.hdr.c1 << ",\n  \"c2\": " << c.hdr.c2 << ",\n";
  out << "  \"n_present\": " << c.hdr.n_present << ",\n";
  out << "  \"has_scalable_hyper\": " << (c.hdr.has_zs ? "true" : "false") << ",\n";
  out << "  \"payload_bytes\": " << c.payload_bytes() << ",\n";
  out << "  \"serialized_bytes\": " << c.serialized_bytes() << ",\n";
  out << "  \"segments\": [\n";
  for (size_t i = 0; i < c.segments.size(); ++i) {
    std::string kind = i == 0 ? "z_basic"
                     : i == 1 ? "y_basic"
                     : i == 2 ? "z_scalable"
                              : "y_scalable_ch" + std::to_string(i - 3);
    out << "    {\"index\": " << i << ", \"kind\": \"" << kind << "\", \"bytes\": "
        << c.segments[i].size() << "}" << (i + 1 < c.segments.size() ? ",\n" : "\n");
  }
  out << "  ]\n}\n";
  return out.str();
}

void print_container(const BitstreamContainer& c, std::ostream& out) {
  out << "bitstream: " << c.hdr.w << "x" << c.hdr.h << " px, c1=" << c.hdr.c1
      << ", c2=" << c.hdr.c2 << ", n_present=" << c.hdr.n_present
      << ", scalable hyper " << (c.hdr.has_zs ? "present" : "absent") << "\n";
  out << "model hash: " << hash_hex(c.hdr.model_hash) << "   version: " << int(c.hdr.version)
      << "\n";
  out << "payload: " << c.payload_bytes() << " bytes in " << c.segments.size()
      << " segments (file " << c.serialized_bytes() << " bytes with header+table)\n";
  out << "  idx  kind             bytes\n";
  for (size_t i = 0; i < c.segments.size(); ++i) {
    std::string kind = i == 0 ? "z_basic"
                     : i == 1 ? "y_basic"
                     : i == 2 ? "z_scalable"
                              : "y_scalable[" + std::to_string(i - 3) + "]";
    char line[64];
    std::snprintf(line, sizeof line, "  %3zu  %-15s %6zu\n", i, kind.c_str(),
                  c.segments[i].size());
    out << line;
  }
}

// ---------------------------------------------------------------------------

int cmd_gen_data(const Args& a) {
  std::string out = a.need("out");
  int count = int(a.get_int("count", 0));
  if (count <= 0) throw UsageError("gen-data: --count must be > 0");
  std::string size = a.get("size", "96x96");
  int w = 0, h = 0;
  if (std::sscanf(size.c_str(), "%dx%d", &w, &h) != 2 || w <= 0 || h <= 0) {
    throw UsageError("gen-data: --size must be WxH, got '" + size + "'");
  }
  std::uint64_t seed = std::uint64_t(a.get_int("seed", 7));
  std::vector<std::string> files = generate_dataset(out, count, h, w, seed);
  std::cout << "wrote " << files.size() << " synthetic images (" << w << "x" << h << ") to "
            << out << "\n";
  return 0;
}

int cmd_train(const Args& a) {
  TrainConfig cfg;
  if (a.opt.count("config")) apply_config(parse_config_file(a.need("config")), cfg);
  ConfigMap overrides;
  for (const std::string& kv : a.sets) {
    size_t eq = kv.find('=');
    if (eq == std::string::npos) throw UsageError("--set needs key=value, got '" + kv + "'");
    overrides.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (a.opt.count("dataset")) overrides.set("dataset_dir", a.need("dataset"));
  if (a.opt.count("out")) overrides.set("out_dir", a.need("out"));
  if (a.opt.count("steps")) overrides.set("steps", a.need("steps"));
  if (a.opt.count("seed")) overrides.set("seed", a.need("seed"));
  if (a.flag.count("deterministic")) overrides.set("deterministic", "true");
  apply_config(overrides, cfg);

  TrainResult r = train(cfg, &std::cout);
  std::cout << "checkpoint: " << r.checkpoint_path << "\nmetrics:    " << r.metrics_path
            << "\nmodel hash: " << hash_hex(r.model_hash) << "\n";

  std::ostringstream json;
  const StepLog& last = r.logs.back();
  json << "{\n  \"schema\": \"deepfgs-train-v1\",\n";
  json << "  \"steps\": " << r.logs.size() << ",\n";
  json << "  \"model_hash\": \"" << hash_hex(r.model_hash) << "\",\n";
  json << "  \"checkpoint\": \"" << r.checkpoint_path << "\",\n";
  json << "  \"metrics\": \"" << r.metrics_path << "\",\n";
  json << "  \"final_total\": " << fmt_double(last.loss.total) << ",\n";
  json << "  \"final_rate_b\": " << fmt_double(last.loss.rate_b) << ",\n";
  json << "  \"final_rate_s\": " << fmt_double(last.loss.rate_s) << "\n}\n";
  maybe_write_json(a, json.str());
  return 0;
}

int cmd_encode(const Args& a) {
  Model m = load_checkpoint(a.need("checkpoint"));
  Tensor img = load_eval_image(a.need("input"), std::cerr);
  EncodeResult r = encode_image(img, m);
  write_binary(a.need("out"), serialize(r.container));
  std::cout << "encoded " << img.shape.w << "x" << img.shape.h << " -> "
            << r.container.serialized_bytes() << " bytes (" << fmt_double(r.stats.bpp)
            << " bpp payload, " << r.container.segments.size() << " segments)\n";
  maybe_write_json(a, stats_json(r.stats, m.content_hash()));
  return 0;
}

int cmd_decode(const Args& a) {
  Model m = load_checkpoint(a.need("checkpoint"));
  BitstreamContainer c = parse(read_binary(a.need("input")));
  DecodeResult r = decode_image(c, m);
  save_image(r.image, a.need("out"));
  std::cout << "decoded " << r.image.shape.w << "x" << r.image.shape.h << " px from "
            << r.stats.n_present << "/" << c.hdr.c2 << " scalable channels ("
            << fmt_double(r.stats.bpp) << " bpp)\n";
  maybe_write_json(a, stats_json(r.stats, m.content_hash()));
  return 0;
}

int cmd_truncate(const Args& a) {
  BitstreamContainer c = parse(read_binary(a.need("input")));
  int n_modes = int(a.opt.count("channels")) + int(a.opt.count("max-bytes")) +
                int(a.opt.count("bpp"));
  if (n_modes != 1) {
    throw UsageError("truncate: exactly one of --channels, --max-bytes, --bpp");
  }
  TruncateTarget t = a.opt.count("channels")
                         ? TruncateTarget::by_channels(int(a.get_int("channels", 0)))
                     : a.opt.count("max-bytes")
                         ? TruncateTarget::by_max_bytes(std::size_t(a.get_int("max-bytes", 0)))
                         : TruncateTarget::by_bpp(a.get_real("bpp", 0.0));
  BitstreamContainer cut = truncate(c, t);
  write_binary(a.need("out"), serialize(cut));
  std::cout << "kept " << cut.hdr.n_present << "/" << cut.hdr.c2 << " scalable channels, "
            << cut.serialized_bytes() << " of " << c.serialized_bytes() << " bytes\n";
  maybe_write_json(a, container_json(cut));
  return 0;
}

int cmd_inspect(const Args& a) {
  BitstreamContainer c = parse(read_binary(a.need("input")));
  print_container(c, std::cout);
  maybe_write_json(a, container_json(c));
  return 0;
}

int cmd_eval(const Args& a) {
  Model m = load_checkpoint(a.need("checkpoint"));
  std::vector<Tensor> images = load_eval_dir(a.need("images"), std::cerr);
  int interval = int(a.get_int("interval", std::max(1, m.cfg.c2 / 4)));
  EvalReport rep = rd_sweep(m, images, interval);
  std::ostringstream csv;
  write_eval_csv(rep, csv);
  write_text_file(a.need("out"), csv.str());
  std::cout << "evaluated " << rep.images << " images at " << rep.rows.size()
            << " truncation levels; CSV: " << a.need("out") << "\n";
  for (const EvalRow& row : rep.rows) {
    char line[128];
    std::snprintf(line, sizeof line, "  n=%3d  %9.1f bytes  %7.4f bpp  %7.3f dB  ms-ssim %.5f\n",
                  row.n_channels, row.bytes, row.bpp, row.psnr, row.ms_ssim);
    std::cout << line;
  }
  maybe_write_json(a, eval_report_json(rep));
  return 0;
}

int cmd_analyze_entropy(const Args& a) {
  Model m = load_checkpoint(a.need("checkpoint"));
  std::vector<Tensor> images = load_eval_dir(a.need("images"), std::cerr);
  int groups = int(a.get_int("groups", std::max(1, m.cfg.c2 / std::max(1, m.cfg.group_size))));
  EntropyReport rep = analyze_entropy(m, images, groups);
  std::ostringstream csv;
  write_entropy_csv(rep, csv);
  write_text_file(a.need("out"), csv.str());
  std::cout << "analyzed " << rep.images << " images, " << rep.groups << " channel groups; CSV: "
            << a.need("out") << "\n";
  for (const EntropyRow& row : rep.rows) {
    char line[128];
    std::snprintf(line, sizeof line, "  group %2d (ch %2d..%2d)  %10.1f bits  %7.3f dB\n",
                  row.group, row.ch_lo, row.ch_hi, row.est_bits, row.psnr);
    std::cout << line;
  }
  maybe_write_json(a, entropy_report_json(rep));
  return 0;
}

int cmd_dump_features(const Args& a) {
  Model m = load_checkpoint(a.need("checkpoint"));
  Tensor img = load_eval_image(a.need("input"), std::cerr);
  std::string prefix = a.need("out");
  Tensor f_basic, f_full;
  FeatureEnergy e = dump_features(m, img, &f_basic, &f_full);
  std::ostringstream csv;
  write_features_csv(e, csv);
  write_text_file(prefix + ".csv", csv.str());
  write_feature_bin(prefix + ".basic.bin", f_basic);
  write_feature_bin(prefix + ".full.bin", f_full);
  std::cout << "dumped " << e.full.size() << " channel energies to " << prefix << ".csv"
            << " (raw features: " << prefix << ".basic.bin, " << prefix << ".full.bin)\n";
  std::ostringstream json;
  json << "{\n  \"schema\": \"deepfgs-features-v1\",\n  \"channels\": " << e.full.size()
       << ",\n  \"csv\": \"" << prefix << ".csv\"\n}\n";
  maybe_write_json(a, json.str());
  return 0;
}

int dispatch(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << kUsage;
    return 1;
  }
  std::string cmd = argv[1];
  const std::set<std::string> common = {"seed", "json", "out"};
  auto with = [&](std::set<std::string> extra) {
    extra.insert(common.begin(), common.end());
    return extra;
  };
  const std::set<std::string> det_flag = {"deterministic"};

  if (cmd == "gen-data") {
    return cmd_gen_data(parse_args(argc, argv, 2, with({"count", "size"}), det_flag));
  }
  if (cmd == "train") {
    return cmd_train(parse_args(argc, argv, 2, with({"config", "dataset", "steps"}), det_flag));
  }
  if (cmd == "encode") {
    return cmd_encode(parse_args(argc, argv, 2, with({"checkpoint", "input"}), det_flag));
  }
  if (cmd == "decode") {
    return cmd_decode(parse_args(argc, argv, 2, with({"checkpoint", "input"}), det_flag));
  }
  if (cmd == "truncate") {
    return cmd_truncate(
        parse_args(argc, argv, 2, with({"input", "channels", "max-bytes", "bpp"}), det_flag));
  }
  if (cmd == "inspect") {
    return cmd_inspect(parse_args(argc, argv, 2, with({"input"}), det_flag));
  }
  if (cmd == "eval") {
    return cmd_eval(parse_args(argc, argv, 2, with({"checkpoint", "images", "interval"}),
                               det_flag));
  }
  if (cmd == "analyze-entropy") {
    return cmd_analyze_entropy(
        parse_args(argc, argv, 2, with({"checkpoint", "images", "groups"}), det_flag));
  }
  if (cmd == "dump-features") {
    return cmd_dump_features(parse_args(argc, argv, 2, with({"checkpoint", "input"}), det_flag));
  }
  if (cmd == "config-reference") {
    std::cout << config_reference();
    return 0;
  }
  if (cmd == "--help" || cmd == "-h" || cmd == "help") {
    std::cout << kUsage;
    return 0;
  }
  std::cerr << "unknown command '" << cmd << "'\n\n" << kUsage;
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return dispatch(argc, argv);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n\n" << kUsage;
    return 1;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 3;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
