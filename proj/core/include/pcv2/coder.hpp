#pragma once

#include <optional>
#include <span>
#include <vector>

#include "pcv2/probmodel.hpp"
#include "pcv2/schedules.hpp"
#include "pcv2/tokens.hpp"

namespace pcv2 {

// Container header; full byte layout in docs/bitstream.md. groups_transmitted
// may be smaller than the schedule's group count (hybrid prefix streams).
struct BitstreamHeader {
  u16 h = 0;
  u16 w = 0;
  u32 V = 0;
  ScheduleParams schedule;
  u8 groups_transmitted = 0;
  u64 model_hash = 0;    // 0 for uniform / unprimed counting
  u64 sample_seed = 0;   // generator seed for hybrid completion
  u32 grid_checksum = 0; // FNV-1a over transmitted symbols in coding order
};

struct Bitstream {
  BitstreamHeader header;
  std::vector<u8> payload;

  std::vector<u8> serialize() const;
  static Bitstream parse(std::span<const u8> bytes);
  std::size_t header_bytes() const { return serialize().size() - payload.size(); }
};

void save_bitstream(const Bitstream& bs, const std::string& path);
Bitstream load_bitstream(const std::string& path);

// 16-bit frequency quantization shared by encoder, decoder and the rate
// accountant: every symbol gets at least one count and the counts sum to
// exactly 2^16. Deterministic given identical probability rows.
std::vector<u32> quantize_probs(std::span<const double> probs);
inline constexpr u32 kFreqTotal = 1u << 16;

struct EncodeOptions {
  int groups_transmitted = -1;  // -1: all groups
  u64 sample_seed = 0;
};

// Group 0 is coded under the uniform distribution (quantized), later groups
// under the model's conditionals given everything already coded. Symbol
// order is the schedule's stored order. `rate_bits_out` receives the
// quantized cross-entropy of the transmitted symbols when non-null.
Bitstream encode_grid(const TokenGrid& grid, const MaskSchedule& sched, EntropyModel& model,
                      const EncodeOptions& opts = {}, double* rate_bits_out = nullptr);

// Exact inverse of encode_grid for fully transmitted streams. Refuses when
// the model hash does not match the header or when the stream is a hybrid
// prefix (use hybrid_decode).
TokenGrid decode_grid(const Bitstream& bs, EntropyModel& model);

// Decodes the transmitted prefix losslessly and samples the remaining
// groups from the model's conditionals at temperature 1. `seed_override`
// replaces the header's recorded seed.
TokenGrid hybrid_decode(const Bitstream& bs, EntropyModel& model,
                        std::optional<u64> seed_override = std::nullopt);

// Bits the coder's quantized contract assigns to the transmitted prefix
// (all groups by default); the payload length always lands within
// [rate, rate + 32 bits].
double transmitted_rate(EntropyModel& model, const TokenGrid& grid, const MaskSchedule& sched,
                        int groups_transmitted);

// Uniform-coding bit-rate h*w*log2(V) / (H*W) on a reference canvas.
double rate_uniform(int h, int w, u32 V, int canvas_h, int canvas_w);

// 100 * (1 - bpp / baseline).
double savings_percent(double bpp, double baseline_bpp);

}  // namespace pcv2
