#include "pcv2/rangecoder.hpp"

namespace pcv2 {

void RangeEncoder::shift_low() {
  // low_ holds 33 significant bits here; bit 32 is an unresolved carry.
  u32 carry = static_cast<u32>(low_ >> 32);
  if (carry != 0 || low_ < 0xFF000000ull) {
    if (have_cache_) out_.push_back(static_cast<u8>(cache_ + carry));
    for (; pending_ > 0; --pending_) out_.push_back(static_cast<u8>(0xFFu + carry));
    cache_ = static_cast<u8>(low_ >> 24);
    have_cache_ = true;
  } else {
    // Top byte is 0xFF and the carry is still unknown; defer it.
    ++pending_;
  }
  low_ = (low_ << 8) & 0xFFFFFFFFull;
}

void RangeEncoder::encode(u32 cum, u32 freq, u32 total) {
  require(total >= 1 && total <= kMaxTotal, "range encoder: total out of range: ", total);
  require(freq >= 1, "range encoder: zero-frequency symbol");
  require(cum + freq <= total, "range encoder: interval exceeds total");
  u32 r = range_ / total;
  low_ += static_cast<u64>(r) * cum;
  range_ = r * freq;
  while (range_ < kTopValue) {
    shift_low();
    range_ <<= 8;
  }
  ++symbols_;
}

std::vector<u8> RangeEncoder::finish() {
  if (symbols_ == 0) return std::move(out_);
  u32 carry = static_cast<u32>(low_ >> 32);
  if (have_cache_) out_.push_back(static_cast<u8>(cache_ + carry));
  for (; pending_ > 0; --pending_) out_.push_back(static_cast<u8>(0xFFu + carry));
  // One byte suffices: with range >= 2^24, (top_byte, 0xFF, 0xFF, ...) lands
  // inside [low, low + range).
  out_.push_back(static_cast<u8>(low_ >> 24));
  return std::move(out_);
}

RangeDecoder::RangeDecoder(std::span<const u8> payload) : payload_(payload) {
  for (int i = 0; i < 4; ++i) code_ = (code_ << 8) | next_byte();
}

u8 RangeDecoder::next_byte() {
  // Reads past the payload return the conventional 0xFF tail.
  return pos_ < payload_.size() ? payload_[pos_++] : 0xFFu;
}

u32 RangeDecoder::decode_target(u32 total) {
  require(total >= 1 && total <= RangeEncoder::kMaxTotal,
          "range decoder: total out of range: ", total);
  last_r_ = range_ / total;
  u32 v = code_ / last_r_;
  // v >= total only on corrupt input; clamping keeps the caller's table
  // lookup in bounds (the checksum catches the damage afterwards).
  return v < total ? v : total - 1;
}

void RangeDecoder::consume(u32 cum, u32 freq, u32 total) {
  require(last_r_ != 0, "range decoder: consume() without decode_target()");
  require(cum + freq <= total && freq >= 1, "range decoder: bad interval");
  code_ -= last_r_ * cum;
  range_ = last_r_ * freq;
  last_r_ = 0;
  while (range_ < RangeEncoder::kTopValue) {
    code_ = (code_ << 8) | next_byte();
    range_ <<= 8;
  }
}

}  // namespace pcv2
