#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <utility>
#include <vector>

namespace dfgs {

class Model;

// ---------------------------------------------------------------------------
// Integer CDF tables
//
// Every coded latent is an integer in [−kSupportRadius, kSupportRadius],
// mapped to symbols 0..128; symbol 129 is an escape that is followed by the
// value as 32 raw bits. A table stores cumulative counts with a fixed total
// of 2^16; every symbol keeps at least one count so anything stays codable.

constexpr int kSupportRadius = 64;
constexpr int kValueSymbols = 2 * kSupportRadius + 1;  // 129
constexpr int kEscapeSymbol = kValueSymbols;           // index 129
constexpr int kTableSymbols = kValueSymbols + 1;       // 130
constexpr std::uint32_t kCdfTotal = 1u << 16;

struct CdfTable {
  // cum[0] = 0 < cum[1] < … < cum[symbols()] = 2^16
  std::vector<std::uint32_t> cum;

  int symbols() const { return int(cum.size()) - 1; }
  std::uint32_t count(int s) const { return cum[size_t(s) + 1] - cum[size_t(s)]; }
};

// Builds a table from per-symbol probabilities (values −64..64 in order,
// then the escape mass). Counts are rounded to a 2^16 total, floored at one
// count each, with the rounding drift absorbed by the largest symbol.
CdfTable cdf_from_probabilities(const double* value_probs, double escape_prob);

// ---------------------------------------------------------------------------
// σ binning
//
// Conditional Gaussian scales are quantized to 64 log-spaced representatives
// on [0.11, 64] — round up, so the coding distribution is never narrower
// than the model's — and the mean is handled purely by an integer shift.
// Both sides derive the same table bank from nothing but the checkpoint.

constexpr int kSigmaBins = 64;

int sigma_bin(double sigma);    // smallest bin whose representative ≥ σ (clamped)
double sigma_rep(int bin);      // bin 0 is exactly 0.11, bin 63 exactly 64.0
const CdfTable& gaussian_table(int bin);  // process-wide deterministic bank

// (table, shift): shift = nearest integer to μ; the table is the zero-mean
// box-integrated Gaussian of the σ bin. Requires σ ≥ 0.11.
std::pair<CdfTable, int> build_cdf(double mu, double sigma);

// Per-channel tables for a learned factorized prior ("prior_b" / "prior_s"),
// evaluated with the deterministic math so they are platform-independent.
std::vector<CdfTable> prior_tables(const Model& m, std::string_view prior);

// ---------------------------------------------------------------------------
// Range coder
//
// 64-bit low/range with 32-bit renormalization words (each word serialized
// big-endian so carries propagate bytewise), total fixed at 2^16. Encoder
// and decoder perform identical integer state transitions; finish() flushes
// the full 64-bit low, so a stream always carries at least 8 bytes.

class RangeEncoder {
 public:
  // raw (cum, freq) step under the implicit 2^16 total
  void encode(std::uint32_t cum, std::uint32_t freq);
  void encode_symbol(const CdfTable& t, int symbol);
  // integer value with escape handling (table must have kTableSymbols)
  void encode_value(const CdfTable& t, long long value);
  std::vector<std::uint8_t> finish();

 private:
  void emit_word(std::uint32_t w);
  void propagate_carry();

  std::uint64_t low_ = 0;
  std::uint64_t range_ = ~std::uint64_t{0};
  std::vector<std::uint8_t> out_;
  bool finished_ = false;
};

class RangeDecoder {
 public:
  RangeDecoder(const std::uint8_t* data, std::size_t size);

  int decode_symbol(const CdfTable& t);
  long long decode_value(const CdfTable& t);
  std::size_t consumed() const { return pos_; }

 private:
  std::uint32_t read_word();
  std::uint32_t decode_target();  // cumulative position in [0, 2^16)
  void consume(std::uint32_t cum, std::uint32_t freq);

  const std::uint8_t* data_;
  std::size_t size_;
  std::size_t pos_ = 0;
  std::uint64_t code_ = 0;
  std::uint64_t range_ = ~std::uint64_t{0};
};

// Sequence forms: element i is coded under *tables[i] (each with
// kTableSymbols symbols); out-of-support values go through the escape.
std::vector<std::uint8_t> range_encode(const std::vector<long long>& values,
                                       const std::vector<const CdfTable*>& tables);
std::vector<long long> range_decode(const std::uint8_t* data, std::size_t size,
                                    const std::vector<const CdfTable*>& tables);

}  // namespace dfgs
