#include "pcv2/multiscale.hpp"

#include <cmath>

#include "pcv2/bytes.hpp"
#include "pcv2/rangecoder.hpp"

namespace pcv2 {

std::vector<ScaleBorder> extract_scales(const TokenGrid& grid,
                                        const std::vector<ScalePair>& scales) {
  grid.validate();
  MaskSchedule sched = implicit_var_schedule(grid.h, grid.w, scales);
  std::vector<ScaleBorder> out;
  for (std::size_t k = 0; k < sched.groups.size(); ++k) {
    ScaleBorder b;
    b.scale_rows = scales[k].rows;
    b.scale_cols = scales[k].cols;
    for (u32 flat : sched.groups[k]) {
      b.positions.push_back(flat);
      b.tokens.push_back(grid.indices[flat]);
    }
    out.push_back(std::move(b));
  }
  return out;
}

std::vector<ScaleBorder> extract_scales(const TokenGrid& grid,
                                        const std::vector<int>& square_scales) {
  std::vector<ScalePair> pairs;
  for (int s : square_scales) {
    require(s >= 1 && s <= 0xFFFF, "extract_scales: scale out of range: ", s);
    pairs.push_back({static_cast<u16>(s), static_cast<u16>(s)});
  }
  return extract_scales(grid, pairs);
}

namespace {

// Area-average pooling to s x s.
LatentGrid downsample(const LatentGrid& x, int s) {
  LatentGrid out(s, s, x.c);
  for (int a = 0; a < s; ++a) {
    int r0 = static_cast<int>((static_cast<i64>(a) * x.h) / s);
    int r1 = static_cast<int>((static_cast<i64>(a + 1) * x.h) / s);
    for (int b = 0; b < s; ++b) {
      int c0 = static_cast<int>((static_cast<i64>(b) * x.w) / s);
      int c1 = static_cast<int>((static_cast<i64>(b + 1) * x.w) / s);
      double area = static_cast<double>(r1 - r0) * (c1 - c0);
      for (int ch = 0; ch < x.c; ++ch) {
        double sum = 0.0;
        for (int i = r0; i < r1; ++i) {
          for (int j = c0; j < c1; ++j) sum += x.at(i, j, ch);
        }
        out.at(a, b, ch) = sum / area;
      }
    }
  }
  return out;
}

// Nearest-neighbor expansion back to h x w.
LatentGrid upsample(const LatentGrid& x, int h, int w) {
  LatentGrid out(h, w, x.c);
  for (int i = 0; i < h; ++i) {
    int a = static_cast<int>((static_cast<i64>(i) * x.h) / h);
    for (int j = 0; j < w; ++j) {
      int b = static_cast<int>((static_cast<i64>(j) * x.w) / w);
      for (int ch = 0; ch < x.c; ++ch) out.at(i, j, ch) = x.at(a, b, ch);
    }
  }
  return out;
}

}  // namespace

ScaleStack residual_quantize(const LatentGrid& latent, const Codebook& cb,
                             const std::vector<int>& scales) {
  require(latent.h == latent.w, "residual_quantize: latent must be square, got ", latent.h, "x",
          latent.w);
  require(!scales.empty(), "residual_quantize: at least one scale required");
  for (std::size_t k = 0; k < scales.size(); ++k) {
    require(scales[k] >= 1 && scales[k] <= latent.h, "residual_quantize: scale ", scales[k],
            " out of range");
    if (k > 0) {
      require(scales[k] > scales[k - 1], "residual_quantize: scales must be strictly increasing");
    }
  }
  require(scales.back() == latent.h, "residual_quantize: last scale must equal grid size");
  latent.check_finite();

  ScaleStack stack;
  stack.scales = scales;
  stack.V = cb.size();
  LatentGrid residual = latent;
  for (std::size_t k = 0; k < scales.size(); ++k) {
    int s = scales[k];
    LatentGrid down = downsample(residual, s);
    TokenGrid r_k = vq_quantize(down, cb);
    LatentGrid recon = upsample(vq_dequantize(r_k, cb), latent.h, latent.w);
    for (std::size_t i = 0; i < residual.data.size(); ++i) {
      residual.data[i] -= recon.data[i];
      require(std::isfinite(residual.data[i]),
              "residual_quantize: non-finite residual at scale ", k + 1,
              " (flat index ", i, "); pipeline diverged");
    }
    stack.maps.push_back(std::move(r_k));
  }
  return stack;
}

LatentGrid residual_dequantize(const ScaleStack& stack, const Codebook& cb) {
  require(!stack.maps.empty(), "residual_dequantize: empty stack");
  require(stack.V == cb.size(), "residual_dequantize: stack V=", stack.V, " != codebook V=",
          cb.size());
  int full = stack.scales.back();
  LatentGrid out(full, full, cb.dim);
  for (std::size_t k = 0; k < stack.maps.size(); ++k) {
    const TokenGrid& map = stack.maps[k];
    require(map.h == stack.scales[k] && map.w == stack.scales[k],
            "residual_dequantize: map ", k + 1, " shape mismatch");
    LatentGrid up = upsample(vq_dequantize(map, cb), full, full);
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += up.data[i];
  }
  return out;
}

namespace {
constexpr char kStackMagic[4] = {'P', 'C', 'V', '2'};
constexpr u8 kStackKind = 4;  // container kind byte for explicit scale stacks
}  // namespace

std::vector<u8> serialize_scale_stack(const ScaleStack& stack) {
  require(!stack.maps.empty() && stack.maps.size() == stack.scales.size(),
          "scale stack: inconsistent");
  ByteWriter w;
  w.put_magic(kStackMagic);
  w.put_u8(1);
  w.put_u8(kStackKind);
  w.put_u32(stack.V);
  w.put_u8(static_cast<u8>(stack.scales.size()));
  for (int s : stack.scales) w.put_u16(static_cast<u16>(s));

  RangeEncoder enc;
  std::vector<double> uniform(stack.V, 1.0 / static_cast<double>(stack.V));
  auto freq = quantize_probs(uniform);
  std::vector<u32> cum(stack.V + 1, 0);
  for (u32 s = 0; s < stack.V; ++s) cum[s + 1] = cum[s] + freq[s];
  for (const auto& map : stack.maps) {
    for (u32 sym : map.indices) enc.encode(cum[sym], freq[sym], kFreqTotal);
  }
  auto payload = enc.finish();
  w.put_u32(static_cast<u32>(payload.size()));
  w.put_bytes(payload.data(), payload.size());
  return w.take();
}

ScaleStack parse_scale_stack(std::span<const u8> bytes) {
  ByteReader r(bytes);
  r.expect_magic(kStackMagic, "scale stack");
  require(r.get_u8() == 1, "scale stack: unsupported version");
  require(r.get_u8() == kStackKind, "scale stack: wrong container kind");
  ScaleStack stack;
  stack.V = r.get_u32();
  u8 count = r.get_u8();
  require(count >= 1, "scale stack: empty");
  for (u8 k = 0; k < count; ++k) stack.scales.push_back(r.get_u16());
  u32 payload_len = r.get_u32();
  require(r.remaining() == payload_len, "scale stack: truncated payload");
  std::vector<u8> payload(payload_len);
  if (payload_len) r.get_bytes(payload.data(), payload_len);

  std::vector<double> uniform(stack.V, 1.0 / static_cast<double>(stack.V));
  auto freq = quantize_probs(uniform);
  std::vector<u32> cum(stack.V + 1, 0);
  for (u32 s = 0; s < stack.V; ++s) cum[s + 1] = cum[s] + freq[s];

  RangeDecoder dec(payload);
  for (u8 k = 0; k < count; ++k) {
    TokenGrid map(stack.scales[k], stack.scales[k], stack.V);
    for (auto& sym : map.indices) {
      u32 target = dec.decode_target(kFreqTotal);
      auto it = std::upper_bound(cum.begin(), cum.end(), target);
      sym = static_cast<u32>(it - cum.begin() - 1);
      dec.consume(cum[sym], freq[sym], kFreqTotal);
    }
    stack.maps.push_back(std::move(map));
  }
  return stack;
}

}  // namespace pcv2
