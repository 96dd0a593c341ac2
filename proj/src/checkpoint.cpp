#include "deepfgs/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <vector>

#include "deepfgs/error.hpp"

namespace dfgs {

namespace {

constexpr char kMagic[4] = {'F', 'G', 'C', 'K'};
constexpr std::uint8_t kVersion = 1;

void put8(std::vector<std::uint8_t>& b, std::uint8_t v) { b.push_back(v); }
void put16(std::vector<std::uint8_t>& b, std::uint16_t v) {
  b.push_back(std::uint8_t(v));
  b.push_back(std::uint8_t(v >> 8));
}
void put32(std::vector<std::uint8_t>& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back(std::uint8_t(v >> (8 * i)));
}
void put64(std::vector<std::uint8_t>& b, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) b.push_back(std::uint8_t(v >> (8 * i)));
}
void put_f64(std::vector<std::uint8_t>& b, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put64(b, bits);
}

class Reader {
 public:
  Reader(const std::string& path, std::ifstream& in) : path_(path), in_(in) {}

  std::uint8_t u8() { return take(1)[0]; }
  std::uint16_t u16() {
    auto b = take(2);
    return std::uint16_t(b[0] | (b[1] << 8));
  }
  std::uint32_t u32() {
    auto b = take(4);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | b[size_t(i)];
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v = 0;
    auto b = take(8);
    for (int i = 7; i >= 0; --i) v = (v << 8) | b[size_t(i)];
    return v;
  }
  double f64() {
    std::uint64_t bits = u64();
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }
  std::string str(size_t len) {
    auto b = take(len);
    return std::string(b.begin(), b.end());
  }
  void f64_block(double* dst, size_t count) {
    buf_.resize(count * 8);
    read_raw(buf_.data(), count * 8);
    for (size_t i = 0; i < count; ++i) {
      std::uint64_t bits = 0;
      for (int j = 7; j >= 0; --j) bits = (bits << 8) | buf_[i * 8 + size_t(j)];
      std::memcpy(dst + i, &bits, 8);
    }
  }
  bool at_end() { return in_.peek() == std::ifstream::traits_type::eof(); }

 private:
  std::vector<std::uint8_t> take(size_t n) {
    std::vector<std::uint8_t> b(n);
    read_raw(b.data(), n);
    return b;
  }
  void read_raw(std::uint8_t* dst, size_t n) {
    in_.read(reinterpret_cast<char*>(dst), std::streamsize(n));
    if (size_t(in_.gcount()) != n) {
      throw DataError("checkpoint " + path_ + ": truncated at byte " +
                      std::to_string(offset_ + size_t(in_.gcount())));
    }
    offset_ += n;
  }
  std::string path_;
  std::ifstream& in_;
  size_t offset_ = 0;
  std::vector<std::uint8_t> buf_;
};

void serialize_config(std::vector<std::uint8_t>& b, const ModelConfig& cfg) {
  put32(b, std::uint32_t(cfg.c1));
  put32(b, std::uint32_t(cfg.c2));
  put32(b, std::uint32_t(cfg.n_hidden));
  put32(b, std::uint32_t(cfg.hyper_channels));
  put32(b, std::uint32_t(cfg.group_size));
  put_f64(b, cfg.lambda);
  put8(b, cfg.metric == Metric::kMsSsim ? 1 : 0);
  put8(b, cfg.use_frr ? 1 : 0);
  put8(b, cfg.use_ffm ? 1 : 0);
  put8(b, cfg.use_mem ? 1 : 0);
  put8(b, cfg.single_rate ? 1 : 0);
  put64(b, cfg.seed);
}

ModelConfig read_config(Reader& r, const std::string& path) {
  ModelConfig cfg;
  cfg.c1 = int(r.u32());
  cfg.c2 = int(r.u32());
  cfg.n_hidden = int(r.u32());
  cfg.hyper_channels = int(r.u32());
  cfg.group_size = int(r.u32());
  cfg.lambda = r.f64();
  std::uint8_t metric = r.u8();
  if (metric > 1) throw DataError("checkpoint " + path + ": unknown metric id");
  cfg.metric = metric == 1 ? Metric::kMsSsim : Metric::kMse;
  cfg.use_frr = r.u8() != 0;
  cfg.use_ffm = r.u8() != 0;
  cfg.use_mem = r.u8() != 0;
  cfg.single_rate = r.u8() != 0;
  cfg.seed = r.u64();
  return cfg;
}

}  // namespace

void save_checkpoint(const Model& m, const std::string& path) {
  std::vector<std::uint8_t> b;
  b.insert(b.end(), kMagic, kMagic + 4);
  put8(b, kVersion);
  put64(b, m.content_hash());
  serialize_config(b, m.cfg);
  put32(b, std::uint32_t(m.params.count()));
  for (int i = 0; i < m.params.count(); ++i) {
    const std::string& name = m.params.name(i);
    const Tensor& v = m.params.value(i);
    if (name.size() > 0xFFFF) throw UsageError("checkpoint: parameter name too long: " + name);
    put16(b, std::uint16_t(name.size()));
    b.insert(b.end(), name.begin(), name.end());
    put32(b, std::uint32_t(v.shape.n));
    put32(b, std::uint32_t(v.shape.c));
    put32(b, std::uint32_t(v.shape.h));
    put32(b, std::uint32_t(v.shape.w));
    for (double x : v.v) put_f64(b, x);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("checkpoint " + path + ": cannot open for writing");
  out.write(reinterpret_cast<const char*>(b.data()), std::streamsize(b.size()));
  if (!out) throw DataError("checkpoint " + path + ": write failed");
}

Model load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("checkpoint " + path + ": cannot open");
  Reader r(path, in);
  std::string magic = r.str(4);
  if (std::memcmp(magic.data(), kMagic, 4) != 0) {
    throw DataError("checkpoint " + path + ": bad magic");
  }
  std::uint8_t version = r.u8();
  if (version != kVersion) {
    throw DataError("checkpoint " + path + ": unsupported version " + std::to_string(version));
  }
  std::uint64_t stored_hash = r.u64();
  ModelConfig cfg = read_config(r, path);

  Model m(cfg);
  std::uint32_t n_params = r.u32();
  if (int(n_params) != m.params.count()) {
    throw DataError("checkpoint " + path + ": has " + std::to_string(n_params) +
                    " parameters, model defines " + std::to_string(m.params.count()));
  }
  for (std::uint32_t i = 0; i < n_params; ++i) {
    std::uint16_t len = r.u16();
    std::string name = r.str(len);
    if (!m.params.has(name)) {
      throw DataError("checkpoint " + path + ": unknown parameter '" + name + "'");
    }
    Shape s{int(r.u32()), int(r.u32()), int(r.u32()), int(r.u32())};
    Tensor& dst = m.params.value(name);
    if (s.n != dst.shape.n || s.c != dst.shape.c || s.h != dst.shape.h || s.w != dst.shape.w) {
      throw DataError("checkpoint " + path + ": parameter '" + name + "' has shape " + s.str() +
                      ", model expects " + dst.shape.str());
    }
    r.f64_block(dst.v.data(), dst.v.size());
  }
  if (!r.at_end()) throw DataError("checkpoint " + path + ": trailing bytes after parameters");
  std::uint64_t rebuilt = m.content_hash();
  if (rebuilt != stored_hash) {
    throw DataError("checkpoint " + path + ": content hash mismatch (stored vs rebuilt)");
  }
  return m;
}

std::uint64_t checkpoint_hash(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("checkpoint " + path + ": cannot open");
  Reader r(path, in);
  std::string magic = r.str(4);
  if (std::memcmp(magic.data(), kMagic, 4) != 0) {
    throw DataError("checkpoint " + path + ": bad magic");
  }
  std::uint8_t version = r.u8();
  if (version != kVersion) {
    throw DataError("checkpoint " + path + ": unsupported version " + std::to_string(version));
  }
  return r.u64();
}

}  // namespace dfgs
