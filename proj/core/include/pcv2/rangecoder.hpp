#pragma once

#include <span>
#include <vector>

#include "pcv2/common.hpp"

namespace pcv2 {

// Byte-oriented range coder: 32-bit range, 64-bit low for carry resolution,
// renormalization at 2^24. Frequencies are 16-bit (total <= 65536, every
// symbol >= 1), which keeps range/total >= 2^8 and bounds the per-symbol
// inefficiency well under a hundredth of a bit.
//
// The interval update is range = r * freq with r = range / total; the
// remainder is never reassigned, so the emitted length can only exceed the
// ideal -sum log2(freq/total), never undercut it. Termination emits the
// pending carry chain plus a single disambiguating byte; the decoder pads
// reads past the end of the payload with 0xFF, which is exactly the tail
// the final interval argument assumes.
class RangeEncoder {
 public:
  static constexpr u32 kTopValue = 1u << 24;
  static constexpr u32 kMaxTotal = 1u << 16;

  // Narrow the interval to [cum/total, (cum+freq)/total) of its width.
  void encode(u32 cum, u32 freq, u32 total);

  // Flush; no further encode calls allowed. Returns the payload.
  std::vector<u8> finish();

  std::size_t symbols_encoded() const { return symbols_; }

 private:
  void shift_low();

  u64 low_ = 0;
  u32 range_ = 0xFFFFFFFFu;
  u8 cache_ = 0;
  u64 pending_ = 0;
  bool have_cache_ = false;
  std::size_t symbols_ = 0;
  std::vector<u8> out_;
};

class RangeDecoder {
 public:
  explicit RangeDecoder(std::span<const u8> payload);

  // Scaled target in [0, total); caller maps it to a symbol via the
  // cumulative table, then must call consume() with that symbol's interval.
  u32 decode_target(u32 total);
  void consume(u32 cum, u32 freq, u32 total);

  std::size_t bytes_consumed() const { return pos_; }

 private:
  u8 next_byte();

  std::span<const u8> payload_;
  std::size_t pos_ = 0;
  u32 range_ = 0xFFFFFFFFu;
  u32 code_ = 0;
  u32 last_r_ = 0;
};

}  // namespace pcv2
