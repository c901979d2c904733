#include "pcv2/coder.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "pcv2/bytes.hpp"
#include "pcv2/hash.hpp"
#include "pcv2/rangecoder.hpp"
#include "pcv2/rng.hpp"

namespace pcv2 {

namespace {
constexpr char kMagic[4] = {'P', 'C', 'V', '2'};
constexpr u8 kVersion = 1;
}  // namespace

std::vector<u8> Bitstream::serialize() const {
  ByteWriter w;
  w.put_magic(kMagic);
  w.put_u8(kVersion);
  w.put_u16(header.h);
  w.put_u16(header.w);
  w.put_u32(header.V);
  write_schedule_params(w, header.schedule);
  w.put_u8(header.groups_transmitted);
  w.put_u64(header.model_hash);
  w.put_u64(header.sample_seed);
  w.put_u32(header.grid_checksum);
  w.put_u32(static_cast<u32>(payload.size()));
  w.put_bytes(payload.data(), payload.size());
  return w.take();
}

Bitstream Bitstream::parse(std::span<const u8> bytes) {
  ByteReader r(bytes);
  r.expect_magic(kMagic, "bitstream");
  u8 version = r.get_u8();
  require(version == kVersion, "bitstream: unsupported version ", static_cast<int>(version));
  Bitstream bs;
  bs.header.h = r.get_u16();
  bs.header.w = r.get_u16();
  bs.header.V = r.get_u32();
  bs.header.schedule = read_schedule_params(r);
  bs.header.groups_transmitted = r.get_u8();
  bs.header.model_hash = r.get_u64();
  bs.header.sample_seed = r.get_u64();
  bs.header.grid_checksum = r.get_u32();
  u32 payload_len = r.get_u32();
  require(r.remaining() == payload_len, "bitstream: payload length field says ", payload_len,
          " bytes but ", r.remaining(), " remain");
  bs.payload.resize(payload_len);
  if (payload_len > 0) r.get_bytes(bs.payload.data(), payload_len);
  return bs;
}

void save_bitstream(const Bitstream& bs, const std::string& path) {
  auto bytes = bs.serialize();
  std::ofstream f(path, std::ios::binary);
  require(f.good(), "save_bitstream: cannot open ", path);
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  require(f.good(), "save_bitstream: write failed for ", path);
}

Bitstream load_bitstream(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  require(f.good(), "load_bitstream: cannot open ", path);
  std::vector<u8> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return Bitstream::parse(bytes);
}

std::vector<u32> quantize_probs(std::span<const double> probs) {
  const std::size_t v = probs.size();
  require(v >= 2 && v < kFreqTotal, "quantize_probs: vocabulary size ", v, " unsupported");
  const double budget = static_cast<double>(kFreqTotal - v);

  std::vector<u32> freq(v, 1);
  std::vector<double> remainder(v);
  u64 assigned = 0;
  double sum = 0.0;
  for (std::size_t i = 0; i < v; ++i) {
    require(probs[i] >= 0.0 && std::isfinite(probs[i]), "quantize_probs: bad probability");
    sum += probs[i];
  }
  require(std::abs(sum - 1.0) <= 1e-6, "quantize_probs: probability row sums to ", sum);
  for (std::size_t i = 0; i < v; ++i) {
    double scaled = probs[i] * budget;
    u32 g = static_cast<u32>(scaled);  // floor; scaled < 2^16 always
    freq[i] += g;
    assigned += g;
    remainder[i] = scaled - static_cast<double>(g);
  }
  u64 leftover = static_cast<u64>(budget) - assigned;
  // Largest remainders get the leftover counts; ties to the smaller index.
  std::vector<u32> order(v);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](u32 a, u32 b) {
    if (remainder[a] != remainder[b]) return remainder[a] > remainder[b];
    return a < b;
  });
  for (u64 i = 0; i < leftover; ++i) freq[order[i % v]]++;
  return freq;
}

namespace {

struct CumTable {
  std::vector<u32> cum;  // size V+1, cum[V] == kFreqTotal

  explicit CumTable(const std::vector<u32>& freq) {
    cum.resize(freq.size() + 1);
    cum[0] = 0;
    for (std::size_t i = 0; i < freq.size(); ++i) cum[i + 1] = cum[i] + freq[i];
  }
  u32 find(u32 target) const {
    // cum is strictly increasing (every freq >= 1).
    auto it = std::upper_bound(cum.begin(), cum.end(), target);
    return static_cast<u32>(it - cum.begin() - 1);
  }
};

double bits_of(u32 freq) {
  return -std::log2(static_cast<double>(freq) / static_cast<double>(kFreqTotal));
}

int resolve_groups_transmitted(const MaskSchedule& sched, int requested) {
  int K = sched.group_count();
  if (requested < 0) return K;
  require(requested <= K, "groups_transmitted=", requested, " exceeds group count ", K);
  return requested;
}

void check_model_grid(const EntropyModel& model, u32 V) {
  require(model.vocab() == V, "model vocabulary ", model.vocab(), " != grid V=", V);
}

// Shared walk over the transmitted prefix. `code` is called per symbol with
// the quantized frequency table and the revealed view at prediction time;
// it returns the symbol (decode) or consumes it (encode/rate).
template <typename PerSymbol>
void walk_transmitted(const MaskSchedule& sched, EntropyModel& model, TokenGrid& grid,
                      std::vector<u8>& revealed, int kt, PerSymbol&& per_symbol) {
  RevealedView view(grid, revealed);
  std::vector<double> row(grid.V);
  const std::vector<double> uniform_row(grid.V, 1.0 / static_cast<double>(grid.V));
  model.start_stream(sched);
  for (int k = 0; k < kt; ++k) {
    if (k > 0) model.begin_group(k, view, sched);
    for (u32 flat : sched.groups[static_cast<std::size_t>(k)]) {
      const std::vector<double>* probs;
      if (k == 0) {
        probs = &uniform_row;
      } else {
        model.predict(flat, view, row);
        probs = &row;
      }
      auto freq = quantize_probs(*probs);
      u32 symbol = per_symbol(flat, freq);
      model.observe(flat, symbol, view);
      grid.indices[flat] = symbol;
      revealed[flat] = 1;
    }
  }
}

}  // namespace

Bitstream encode_grid(const TokenGrid& grid, const MaskSchedule& sched, EntropyModel& model,
                      const EncodeOptions& opts, double* rate_bits_out) {
  grid.validate();
  require(sched.h == grid.h && sched.w == grid.w, "encode: schedule dims ", sched.h, "x", sched.w,
          " != grid dims ", grid.h, "x", grid.w);
  check_model_grid(model, grid.V);
  int kt = resolve_groups_transmitted(sched, opts.groups_transmitted);

  RangeEncoder enc;
  u32 checksum = 0x811c9dc5u;
  double rate_bits = 0.0;
  TokenGrid work(grid.h, grid.w, grid.V);
  std::vector<u8> revealed(grid.positions(), 0);
  walk_transmitted(sched, model, work, revealed, kt,
                   [&](u32 flat, const std::vector<u32>& freq) {
                     u32 symbol = grid.indices[flat];
                     CumTable table(freq);
                     enc.encode(table.cum[symbol], freq[symbol], kFreqTotal);
                     rate_bits += bits_of(freq[symbol]);
                     u8 sym_bytes[4] = {static_cast<u8>(symbol), static_cast<u8>(symbol >> 8),
                                        static_cast<u8>(symbol >> 16),
                                        static_cast<u8>(symbol >> 24)};
                     checksum = fnv1a32(sym_bytes, 4, checksum);
                     return symbol;
                   });
  if (rate_bits_out != nullptr) *rate_bits_out = rate_bits;

  Bitstream bs;
  bs.header.h = static_cast<u16>(grid.h);
  bs.header.w = static_cast<u16>(grid.w);
  bs.header.V = grid.V;
  bs.header.schedule = sched.params;
  bs.header.groups_transmitted = static_cast<u8>(kt);
  bs.header.model_hash = model.checkpoint_hash();
  bs.header.sample_seed = opts.sample_seed;
  bs.header.grid_checksum = checksum;
  bs.payload = enc.finish();
  return bs;
}

namespace {

// Decodes the transmitted prefix into `grid`, verifying the checksum.
// Returns the rebuilt schedule.
MaskSchedule decode_prefix(const Bitstream& bs, EntropyModel& model, TokenGrid& grid,
                           std::vector<u8>& revealed) {
  require(bs.header.h >= 1 && bs.header.w >= 1, "decode: bad dims in header");
  check_model_grid(model, bs.header.V);
  require(model.checkpoint_hash() == bs.header.model_hash,
          "decode: model checkpoint hash ", model.checkpoint_hash(),
          " does not match bitstream header ", bs.header.model_hash,
          "; sender and receiver models differ");
  MaskSchedule sched = build_schedule(bs.header.h, bs.header.w, bs.header.schedule);
  int kt = bs.header.groups_transmitted;
  require(kt <= sched.group_count(), "decode: header claims ", kt, " groups, schedule has ",
          sched.group_count());

  RangeDecoder dec(bs.payload);
  u32 checksum = 0x811c9dc5u;
  walk_transmitted(sched, model, grid, revealed, kt,
                   [&](u32, const std::vector<u32>& freq) {
                     CumTable table(freq);
                     u32 target = dec.decode_target(kFreqTotal);
                     u32 symbol = table.find(target);
                     dec.consume(table.cum[symbol], freq[symbol], kFreqTotal);
                     u8 sym_bytes[4] = {static_cast<u8>(symbol), static_cast<u8>(symbol >> 8),
                                        static_cast<u8>(symbol >> 16),
                                        static_cast<u8>(symbol >> 24)};
                     checksum = fnv1a32(sym_bytes, 4, checksum);
                     return symbol;
                   });
  require(checksum == bs.header.grid_checksum,
          "decode: checksum mismatch (corrupt or truncated payload)");
  return sched;
}

}  // namespace

TokenGrid decode_grid(const Bitstream& bs, EntropyModel& model) {
  TokenGrid grid(bs.header.h, bs.header.w, bs.header.V);
  std::vector<u8> revealed(grid.positions(), 0);
  MaskSchedule sched = decode_prefix(bs, model, grid, revealed);
  require(bs.header.groups_transmitted == sched.group_count(),
          "decode: stream transmits only ", static_cast<int>(bs.header.groups_transmitted),
          " of ", sched.group_count(), " groups; use hybrid decode");
  return grid;
}

TokenGrid hybrid_decode(const Bitstream& bs, EntropyModel& model,
                        std::optional<u64> seed_override) {
  TokenGrid grid(bs.header.h, bs.header.w, bs.header.V);
  std::vector<u8> revealed(grid.positions(), 0);
  MaskSchedule sched = decode_prefix(bs, model, grid, revealed);
  int kt = bs.header.groups_transmitted;

  CounterRng rng(seed_override.value_or(bs.header.sample_seed));
  RevealedView view(grid, revealed);
  std::vector<double> row(grid.V);
  for (int k = kt; k < sched.group_count(); ++k) {
    if (k > 0) model.begin_group(k, view, sched);
    for (u32 flat : sched.groups[static_cast<std::size_t>(k)]) {
      if (k == 0) {
        std::fill(row.begin(), row.end(), 1.0 / static_cast<double>(grid.V));
      } else {
        model.predict(flat, view, row);
      }
      // Inverse-CDF draw at temperature 1.
      double u = rng.next_double();
      double acc = 0.0;
      u32 symbol = grid.V - 1;
      for (u32 s = 0; s < grid.V; ++s) {
        acc += row[s];
        if (u < acc) {
          symbol = s;
          break;
        }
      }
      model.observe(flat, symbol, view);
      grid.indices[flat] = symbol;
      revealed[flat] = 1;
    }
  }
  return grid;
}

double transmitted_rate(EntropyModel& model, const TokenGrid& grid, const MaskSchedule& sched,
                        int groups_transmitted) {
  grid.validate();
  require(sched.h == grid.h && sched.w == grid.w, "rate: schedule/grid dims mismatch");
  check_model_grid(model, grid.V);
  int kt = resolve_groups_transmitted(sched, groups_transmitted);

  double bits = 0.0;
  TokenGrid work(grid.h, grid.w, grid.V);
  std::vector<u8> revealed(grid.positions(), 0);
  walk_transmitted(sched, model, work, revealed, kt,
                   [&](u32 flat, const std::vector<u32>& freq) {
                     u32 symbol = grid.indices[flat];
                     bits += bits_of(freq[symbol]);
                     return symbol;
                   });
  return bits;
}

double model_rate(EntropyModel& model, const TokenGrid& grid, const MaskSchedule& sched) {
  return transmitted_rate(model, grid, sched, -1);
}

double rate_uniform(int h, int w, u32 V, int canvas_h, int canvas_w) {
  require(h >= 1 && w >= 1 && canvas_h >= 1 && canvas_w >= 1, "rate_uniform: dims must be >= 1");
  require(V >= 2, "rate_uniform: V must be >= 2");
  return static_cast<double>(h) * w * std::log2(static_cast<double>(V)) /
         (static_cast<double>(canvas_h) * canvas_w);
}

double savings_percent(double bpp, double baseline_bpp) {
  require(baseline_bpp > 0.0, "savings_percent: baseline must be positive");
  return 100.0 * (1.0 - bpp / baseline_bpp);
}

}  // namespace pcv2
