#include <cstring>
#include <limits>
#include <string>

#include "deepfgs/container.hpp"
#include "deepfgs/error.hpp"

namespace dfgs {

namespace {

void put_u16(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(std::uint8_t(v));
  out.push_back(std::uint8_t(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(std::uint8_t(v));
  out.push_back(std::uint8_t(v >> 8));
  out.push_back(std::uint8_t(v >> 16));
  out.push_back(std::uint8_t(v >> 24));
}

std::uint32_t get_u16(const std::uint8_t* p) {
  return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8);
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) | (std::uint32_t(p[2]) << 16) |
         (std::uint32_t(p[3]) << 24);
}

[[noreturn]] void bad(const std::string& what, std::size_t offset) {
  throw DataError("container: " + what + " at byte " + std::to_string(offset));
}

// structural invariants shared by serialize (pre) and parse (post)
void validate(const BitstreamContainer& c) {
  const ContainerHeader& h = c.hdr;
  if (h.version != kFormatVersion) {
    throw DataError("container: unsupported version " + std::to_string(h.version));
  }
  if (h.h <= 0 || h.w <= 0 || h.h > 65535 || h.w > 65535) {
    throw DataError("container: image dimensions outside u16");
  }
  if (h.c1 <= 0 || h.c2 < 0 || h.c1 > 65535 || h.c2 > 65535) {
    throw DataError("container: channel counts outside range");
  }
  if (h.n_present < 0 || h.n_present > h.c2) {
    throw DataError("container: n_present " + std::to_string(h.n_present) + " exceeds C2 " +
                    std::to_string(h.c2));
  }
  if (h.has_zs != (h.n_present > 0)) {
    throw DataError("container: scalable-present flag disagrees with n_present");
  }
  if (int(c.segments.size()) != c.expected_segments()) {
    throw DataError("container: " + std::to_string(c.segments.size()) + " segments, expected " +
                    std::to_string(c.expected_segments()));
  }
  for (const auto& s : c.segments) {
    if (s.size() > std::numeric_limits<std::uint32_t>::max()) {
      throw DataError("container: segment exceeds u32 length");
    }
  }
}

}  // namespace

std::size_t BitstreamContainer::payload_bytes() const {
  std::size_t n = 0;
  for (const auto& s : segments) n += s.size();
  return n;
}

std::size_t BitstreamContainer::serialized_bytes() const {
  return kHeaderBytes + 4 * segments.size() + payload_bytes();
}

TruncateTarget TruncateTarget::by_channels(int n) {
  TruncateTarget t;
  t.kind = Kind::kChannels;
  t.channels = n;
  return t;
}

TruncateTarget TruncateTarget::by_max_bytes(std::size_t b) {
  TruncateTarget t;
  t.kind = Kind::kMaxBytes;
  t.max_bytes = b;
  return t;
}

TruncateTarget TruncateTarget::by_bpp(double r) {
  TruncateTarget t;
  t.kind = Kind::kBpp;
  t.bpp = r;
  return t;
}

std::vector<std::uint8_t> serialize(const BitstreamContainer& c) {
  validate(c);
  std::vector<std::uint8_t> out;
  out.reserve(c.serialized_bytes());
  out.insert(out.end(), kMagic, kMagic + 4);
  out.push_back(c.hdr.version);
  std::uint64_t hash = c.hdr.model_hash;
  for (int i = 0; i < 8; ++i) out.push_back(std::uint8_t(hash >> (8 * i)));
  put_u16(out, std::uint32_t(c.hdr.h));
  put_u16(out, std::uint32_t(c.hdr.w));
  put_u16(out, std::uint32_t(c.hdr.c1));
  put_u16(out, std::uint32_t(c.hdr.c2));
  put_u16(out, std::uint32_t(c.hdr.n_present));
  out.push_back(c.hdr.has_zs ? 1 : 0);
  out.push_back(std::uint8_t(c.segments.size()));
  for (const auto& s : c.segments) put_u32(out, std::uint32_t(s.size()));
  for (const auto& s : c.segments) out.insert(out.end(), s.begin(), s.end());
  return out;
}

BitstreamContainer parse(const std::uint8_t* data, std::size_t size) {
  if (size < kHeaderBytes) bad("file shorter than the 25-byte header", size);
  if (std::memcmp(data, kMagic, 4) != 0) bad("bad magic (want \"FGS1\")", 0);
  BitstreamContainer c;
  c.hdr.version = data[4];
  if (c.hdr.version != kFormatVersion) {
    bad("unsupported version " + std::to_string(c.hdr.version), 4);
  }
  std::uint64_t hash = 0;
  for (int i = 0; i < 8; ++i) hash |= std::uint64_t(data[5 + i]) << (8 * i);
  c.hdr.model_hash = hash;
  c.hdr.h = int(get_u16(data + 13));
  c.hdr.w = int(get_u16(data + 15));
  c.hdr.c1 = int(get_u16(data + 17));
  c.hdr.c2 = int(get_u16(data + 19));
  c.hdr.n_present = int(get_u16(data + 21));
  const std::uint8_t flags = data[23];
  if (flags & ~std::uint8_t{1}) bad("reserved flag bits set", 23);
  c.hdr.has_zs = (flags & 1) != 0;
  if (c.hdr.h == 0 || c.hdr.w == 0) bad("zero image dimension", 13);
  if (c.hdr.c1 == 0) bad("zero basic channel count", 17);
  if (c.hdr.n_present > c.hdr.c2) bad("n_present exceeds C2", 21);
  if (c.hdr.has_zs != (c.hdr.n_present > 0)) {
    bad("scalable-present flag disagrees with n_present", 23);
  }
  const int nseg = int(data[24]);
  if (nseg != c.expected_segments()) {
    bad("segment count " + std::to_string(nseg) + " does not match header (want " +
            std::to_string(c.expected_segments()) + ")",
        24);
  }
  std::size_t off = kHeaderBytes;
  if (size < off + 4 * std::size_t(nseg)) bad("segment table runs past end of file", size);
  std::vector<std::uint32_t> lens(static_cast<std::size_t>(nseg));
  std::size_t total = 0;
  for (int i = 0; i < nseg; ++i) {
    lens[size_t(i)] = get_u32(data + off);
    total += lens[size_t(i)];
    off += 4;
  }
  if (off + total != size) {
    bad("payload is " + std::to_string(size - off) + " bytes but the table sums to " +
            std::to_string(total),
        off);
  }
  c.segments.reserve(size_t(nseg));
  for (int i = 0; i < nseg; ++i) {
    c.segments.emplace_back(data + off, data + off + lens[size_t(i)]);
    off += lens[size_t(i)];
  }
  validate(c);
  return c;
}

BitstreamContainer parse(const std::vector<std::uint8_t>& bytes) {
  return parse(bytes.data(), bytes.size());
}

namespace {

// serialized size and payload size of the container keeping n' channels
std::size_t size_keeping(const BitstreamContainer& c, int np, bool payload_only) {
  std::size_t pay = c.segments[0].size() + c.segments[1].size();
  if (np > 0) {
    pay += c.segments[2].size();
    for (int i = 0; i < np; ++i) pay += c.segments[size_t(3 + i)].size();
  }
  if (payload_only) return pay;
  return kHeaderBytes + 4 * std::size_t(2 + (np > 0 ? 1 + np : 0)) + pay;
}

}  // namespace

BitstreamContainer truncate(const BitstreamContainer& c, const TruncateTarget& target) {
  validate(c);
  int np = 0;
  switch (target.kind) {
    case TruncateTarget::Kind::kChannels: {
      if (target.channels < 0 || target.channels > c.hdr.n_present) {
        throw UsageError("truncate: " + std::to_string(target.channels) +
                         " channels requested but only " + std::to_string(c.hdr.n_present) +
                         " present (truncation cannot add data)");
      }
      np = target.channels;
      break;
    }
    case TruncateTarget::Kind::kMaxBytes: {
      const std::size_t floor_bytes = size_keeping(c, 0, false);
      if (target.max_bytes < floor_bytes) {
        throw UsageError("truncate: budget of " + std::to_string(target.max_bytes) +
                         " bytes is below the basic layer; minimum feasible size is " +
                         std::to_string(floor_bytes) + " bytes");
      }
      np = c.hdr.n_present;
      while (np > 0 && size_keeping(c, np, false) > target.max_bytes) --np;
      break;
    }
    case TruncateTarget::Kind::kBpp: {
      const double px = double(c.hdr.h) * double(c.hdr.w);
      const double floor_bpp = 8.0 * double(size_keeping(c, 0, true)) / px;
      if (8.0 * double(size_keeping(c, 0, true)) > target.bpp * px) {
        throw UsageError("truncate: bpp budget below the basic layer; minimum feasible bpp is " +
                         std::to_string(floor_bpp));
      }
      np = c.hdr.n_present;
      while (np > 0 && 8.0 * double(size_keeping(c, np, true)) > target.bpp * px) --np;
      break;
    }
  }

  BitstreamContainer out;
  out.hdr = c.hdr;
  out.hdr.n_present = np;
  out.hdr.has_zs = np > 0;
  out.segments.push_back(c.segments[0]);
  out.segments.push_back(c.segments[1]);
  if (np > 0) {
    out.segments.push_back(c.segments[2]);
    for (int i = 0; i < np; ++i) out.segments.push_back(c.segments[size_t(3 + i)]);
  }
  validate(out);
  return out;
}

}  // namespace dfgs
