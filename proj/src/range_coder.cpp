#include <algorithm>
#include <string>

#include "deepfgs/coder.hpp"
#include "deepfgs/error.hpp"

// 64-bit range coder, 2^16 total, 32-bit big-endian renormalization words.
// The encoder keeps the invariant low + range ≤ 2^64 (as exact integers), so
// a carry out of `low` can always be absorbed by incrementing already-
// emitted bytes, and the borrow chain never runs off the front of the
// buffer. The decoder performs the mirrored state transitions, two words
// ahead of the encoder — exactly the two words finish() flushes.

namespace dfgs {

namespace {
constexpr std::uint64_t kTopThreshold = std::uint64_t{1} << 32;
}

void RangeEncoder::emit_word(std::uint32_t w) {
  out_.push_back(std::uint8_t(w >> 24));
  out_.push_back(std::uint8_t(w >> 16));
  out_.push_back(std::uint8_t(w >> 8));
  out_.push_back(std::uint8_t(w));
}

void RangeEncoder::propagate_carry() {
  for (std::size_t i = out_.size(); i-- > 0;) {
    if (++out_[i] != 0) return;
  }
  throw NumericError("range encoder: carry escaped the emitted stream");
}

void RangeEncoder::encode(std::uint32_t cum, std::uint32_t freq) {
  if (finished_) throw UsageError("range encoder: encode after finish");
  if (freq == 0 || cum + freq > kCdfTotal) {
    throw UsageError("range encoder: invalid (cum, freq) step");
  }
  const std::uint64_t r = range_ >> 16;  // exact: total is 2^16
  const std::uint64_t add = r * cum;
  const std::uint64_t nlow = low_ + add;
  if (nlow < low_) propagate_carry();
  low_ = nlow;
  range_ = r * freq;
  while (range_ < kTopThreshold) {
    emit_word(std::uint32_t(low_ >> 32));
    low_ <<= 32;
    range_ <<= 32;
  }
}

void RangeEncoder::encode_symbol(const CdfTable& t, int symbol) {
  if (symbol < 0 || symbol >= t.symbols()) {
    throw UsageError("range encoder: symbol " + std::to_string(symbol) +
                     " outside table of " + std::to_string(t.symbols()));
  }
  encode(t.cum[size_t(symbol)], t.count(symbol));
}

void RangeEncoder::encode_value(const CdfTable& t, long long value) {
  if (t.symbols() != kTableSymbols) {
    throw UsageError("range encoder: value coding needs a 130-symbol table");
  }
  if (value >= -kSupportRadius && value <= kSupportRadius) {
    encode_symbol(t, int(value) + kSupportRadius);
    return;
  }
  if (value < INT32_MIN || value > INT32_MAX) {
    throw NumericError("range encoder: escape value exceeds 32 bits");
  }
  encode_symbol(t, kEscapeSymbol);
  const std::uint32_t raw = std::uint32_t(std::int32_t(value));
  encode(raw >> 16, 1);       // two uniform 16-bit halves
  encode(raw & 0xFFFF, 1);
}

std::vector<std::uint8_t> RangeEncoder::finish() {
  if (finished_) throw UsageError("range encoder: finish called twice");
  finished_ = true;
  emit_word(std::uint32_t(low_ >> 32));
  emit_word(std::uint32_t(low_));
  return std::move(out_);
}

RangeDecoder::RangeDecoder(const std::uint8_t* data, std::size_t size)
    : data_(data), size_(size) {
  code_ = (std::uint64_t(read_word()) << 32) | read_word();
}

std::uint32_t RangeDecoder::read_word() {
  if (pos_ + 4 > size_) {
    throw DataError("range decoder: stream exhausted at byte " + std::to_string(pos_) +
                    " of " + std::to_string(size_));
  }
  std::uint32_t w = (std::uint32_t(data_[pos_]) << 24) | (std::uint32_t(data_[pos_ + 1]) << 16) |
                    (std::uint32_t(data_[pos_ + 2]) << 8) | std::uint32_t(data_[pos_ + 3]);
  pos_ += 4;
  return w;
}

std::uint32_t RangeDecoder::decode_target() {
  const std::uint64_t r = range_ >> 16;
  std::uint64_t t = code_ / r;
  if (t > kCdfTotal - 1) t = kCdfTotal - 1;
  return std::uint32_t(t);
}

void RangeDecoder::consume(std::uint32_t cum, std::uint32_t freq) {
  const std::uint64_t r = range_ >> 16;
  code_ -= r * cum;
  range_ = r * freq;
  while (range_ < kTopThreshold) {
    code_ = (code_ << 32) | read_word();
    range_ <<= 32;
  }
}

int RangeDecoder::decode_symbol(const CdfTable& t) {
  const std::uint32_t target = decode_target();
  // cum is strictly increasing: the symbol is the last with cum[s] ≤ target
  auto it = std::upper_bound(t.cum.begin(), t.cum.end(), target);
  int symbol = int(it - t.cum.begin()) - 1;
  if (symbol < 0 || symbol >= t.symbols()) {
    throw DataError("range decoder: no symbol matches the stream at byte " +
                    std::to_string(pos_));
  }
  consume(t.cum[size_t(symbol)], t.count(symbol));
  return symbol;
}

long long RangeDecoder::decode_value(const CdfTable& t) {
  if (t.symbols() != kTableSymbols) {
    throw UsageError("range decoder: value coding needs a 130-symbol table");
  }
  const int symbol = decode_symbol(t);
  if (symbol != kEscapeSymbol) return symbol - kSupportRadius;
  const std::uint32_t hi = decode_target();
  consume(hi, 1);
  const std::uint32_t lo = decode_target();
  consume(lo, 1);
  return (long long)(std::int32_t((hi << 16) | lo));
}

std::vector<std::uint8_t> range_encode(const std::vector<long long>& values,
                                       const std::vector<const CdfTable*>& tables) {
  if (values.size() != tables.size()) {
    throw UsageError("range_encode: " + std::to_string(values.size()) + " values vs " +
                     std::to_string(tables.size()) + " tables");
  }
  RangeEncoder enc;
  for (std::size_t i = 0; i < values.size(); ++i) enc.encode_value(*tables[i], values[i]);
  return enc.finish();
}

std::vector<long long> range_decode(const std::uint8_t* data, std::size_t size,
                                    const std::vector<const CdfTable*>& tables) {
  RangeDecoder dec(data, size);
  std::vector<long long> out;
  out.reserve(tables.size());
  for (const CdfTable* t : tables) out.push_back(dec.decode_value(*t));
  return out;
}

}  // namespace dfgs
