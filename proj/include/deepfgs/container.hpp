#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace dfgs {

// ---------------------------------------------------------------------------
// Truncatable bitstream container (.fgs)
//
// Fixed 25-byte header, then a table of u32 little-endian segment lengths,
// then the segment payloads in order:
//
//   offset  size  field
//        0     4  magic "FGS1"
//        4     1  version (= 1)
//        5     8  model hash (u64le): config + parameter fingerprint
//       13     2  image height (u16le)     15  2  image width (u16le)
//       17     2  basic channels C1        19  2  scalable channels C2
//       21     2  n_present: scalable channels retained (0..C2)
//       23     1  flags: bit0 = scalable hyper latent present, rest reserved
//       24     1  segment count (= 2 + (bit0 ? 1 + n_present : 0))
//
// Segments: [z_b, y_b] always, then [z_s, y_s chan 1 .. chan n_present] when
// bit0 is set. Truncation drops whole trailing y_s segments (and z_s when
// nothing scalable remains) without touching retained payload bytes, so a
// decoder never sees a partially coded unit.

struct ContainerHeader {
  std::uint8_t version = 1;
  std::uint64_t model_hash = 0;
  int h = 0, w = 0;
  int c1 = 0, c2 = 0;
  int n_present = 0;
  bool has_zs = false;  // flags bit0

  bool operator==(const ContainerHeader&) const = default;
};

struct BitstreamContainer {
  ContainerHeader hdr;
  std::vector<std::vector<std::uint8_t>> segments;

  int expected_segments() const { return 2 + (hdr.has_zs ? 1 + hdr.n_present : 0); }
  std::size_t payload_bytes() const;
  std::size_t serialized_bytes() const;  // header + table + payload

  bool operator==(const BitstreamContainer&) const = default;
};

constexpr std::size_t kHeaderBytes = 25;
constexpr char kMagic[4] = {'F', 'G', 'S', '1'};
constexpr std::uint8_t kFormatVersion = 1;

std::vector<std::uint8_t> serialize(const BitstreamContainer& c);
// throws DataError naming the byte offset of the first inconsistency
BitstreamContainer parse(const std::uint8_t* data, std::size_t size);
BitstreamContainer parse(const std::vector<std::uint8_t>& bytes);

struct TruncateTarget {
  enum class Kind { kChannels, kMaxBytes, kBpp };
  Kind kind = Kind::kChannels;
  int channels = 0;           // kChannels: exact retained scalable channels
  std::size_t max_bytes = 0;  // kMaxBytes: serialized container size budget
  double bpp = 0.0;           // kBpp: payload bits per pixel budget

  static TruncateTarget by_channels(int n);
  static TruncateTarget by_max_bytes(std::size_t b);
  static TruncateTarget by_bpp(double r);
};

// Keeps z_b/y_b always and the largest feasible scalable prefix (exactly n
// for channel targets). Retained payload bytes are untouched; n_present,
// flags, and the segment table are rewritten. Throws UsageError when even
// the basic layer exceeds the budget (the message names the minimum) or a
// channel target exceeds what is present.
BitstreamContainer truncate(const BitstreamContainer& c, const TruncateTarget& target);

}  // namespace dfgs
