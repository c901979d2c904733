#pragma once

#include <vector>

#include "pcv2/coder.hpp"
#include "pcv2/schedules.hpp"
#include "pcv2/tokens.hpp"

namespace pcv2 {

// Multi-scale residual token maps r_1..r_K, map k of shape scales[k] x
// scales[k], all over one shared codebook. The explicit residual pipeline is
// experimental: the implicit single-grid path (implicit_var schedule) is the
// default configuration.
struct ScaleStack {
  std::vector<int> scales;
  std::vector<TokenGrid> maps;
  u32 V = 0;
};

struct ScaleBorder {
  int scale_rows = 0;
  int scale_cols = 0;
  std::vector<u32> positions;  // newly revealed flats, raster within the scale lattice
  std::vector<u32> tokens;
};

// Per scale, the newly revealed ("border") positions of the grid and their
// tokens; concatenated over scales this is a permutation of all positions.
std::vector<ScaleBorder> extract_scales(const TokenGrid& grid, const std::vector<ScalePair>& scales);
std::vector<ScaleBorder> extract_scales(const TokenGrid& grid, const std::vector<int>& square_scales);

// f <- latent; for each scale: r_k = quantize(downsample(f)), f -= upsample(
// dequantize(r_k)). Downsampling is area average, upsampling nearest
// neighbor. Aborts loudly on any non-finite residual -- the instability this
// pipeline is known for must be detectable, not silent.
ScaleStack residual_quantize(const LatentGrid& latent, const Codebook& cb,
                             const std::vector<int>& scales);

// Sum of the upsampled per-scale reconstructions.
LatentGrid residual_dequantize(const ScaleStack& stack, const Codebook& cb);

// Explicit-stack container: same framing as the token bitstream but with
// container kind byte 4; each scale map is coded under the quantized
// uniform distribution.
std::vector<u8> serialize_scale_stack(const ScaleStack& stack);
ScaleStack parse_scale_stack(std::span<const u8> bytes);

}  // namespace pcv2
