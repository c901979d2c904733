#pragma once

#include <span>
#include <string>
#include <vector>

#include "pcv2/common.hpp"

namespace pcv2 {

// Real-valued h*w*c feature grid, row-major (i, j, channel).
struct LatentGrid {
  int h = 0;
  int w = 0;
  int c = 0;
  std::vector<double> data;

  LatentGrid() = default;
  LatentGrid(int h_, int w_, int c_);

  double& at(int i, int j, int ch) { return data[(static_cast<std::size_t>(i) * w + j) * c + ch]; }
  double at(int i, int j, int ch) const {
    return data[(static_cast<std::size_t>(i) * w + j) * c + ch];
  }
  std::size_t cells() const { return static_cast<std::size_t>(h) * w; }
  void check_finite() const;
};

// V rows of dimension dim. Rows are the reproduction vectors; a grid of row
// indices is what actually gets entropy-coded.
struct Codebook {
  int dim = 0;
  std::vector<double> vectors;  // V * dim, row-major

  u32 size() const { return dim == 0 ? 0 : static_cast<u32>(vectors.size() / dim); }
  const double* row(u32 v) const { return vectors.data() + static_cast<std::size_t>(v) * dim; }
  double* row(u32 v) { return vectors.data() + static_cast<std::size_t>(v) * dim; }

  // Content hash over the serialized f32 file image; stable across runs.
  u32 id() const;
};

// h*w grid of codebook indices in [0, V).
struct TokenGrid {
  int h = 0;
  int w = 0;
  u32 V = 0;
  std::vector<u32> indices;

  TokenGrid() = default;
  TokenGrid(int h_, int w_, u32 V_);

  u32& at(int i, int j) { return indices[static_cast<std::size_t>(i) * w + j]; }
  u32 at(int i, int j) const { return indices[static_cast<std::size_t>(i) * w + j]; }
  std::size_t positions() const { return static_cast<std::size_t>(h) * w; }
  void validate() const;

  bool operator==(const TokenGrid&) const = default;
};

// Nearest codebook row under squared Euclidean distance; ties break to the
// smallest index so encoding is reproducible everywhere.
TokenGrid vq_quantize(const LatentGrid& latent, const Codebook& cb);

LatentGrid vq_dequantize(const TokenGrid& tokens, const Codebook& cb);

// k-means with k-means++ seeding; empty clusters are reseeded to the point
// farthest from its current centroid. Deterministic under `seed`.
Codebook codebook_train(const std::vector<std::vector<double>>& samples, u32 V, int iters,
                        u64 seed);

// 10*log10(peak^2 / MSE); returns +infinity when the inputs are identical.
double psnr(const LatentGrid& a, const LatentGrid& b, double peak);

// Codebook container: magic "PCVB", version u8, V u32 LE, dim u32 LE, then
// V*dim f32 LE row-major.
std::vector<u8> serialize_codebook(const Codebook& cb);
Codebook parse_codebook(std::span<const u8> bytes);
void save_codebook(const Codebook& cb, const std::string& path);
Codebook load_codebook(const std::string& path);

}  // namespace pcv2
