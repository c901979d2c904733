#include <doctest.h>

#include <cmath>

#include "pcv2/multiscale.hpp"
#include "pcv2/rng.hpp"

using namespace pcv2;

namespace {

Codebook random_codebook(u32 V, int dim, u64 seed) {
  Codebook cb;
  cb.dim = dim;
  cb.vectors.resize(static_cast<std::size_t>(V) * dim);
  CounterRng rng(seed);
  for (auto& v : cb.vectors) v = rng.next_gaussian();
  return cb;
}

// Band-limited random field: smooth enough that residual refinement helps.
LatentGrid smooth_latent(int n, int c, u64 seed) {
  LatentGrid g(n, n, c);
  CounterRng rng(seed);
  for (int ch = 0; ch < c; ++ch) {
    double a = rng.next_gaussian(), b = rng.next_gaussian();
    double fx = 1.0 + rng.next_double() * 2.0, fy = 1.0 + rng.next_double() * 2.0;
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        g.at(i, j, ch) = a * std::sin(fx * i / n * 3.14159) + b * std::cos(fy * j / n * 3.14159);
      }
    }
  }
  return g;
}

double mse(const LatentGrid& a, const LatentGrid& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    double d = a.data[i] - b.data[i];
    s += d * d;
  }
  return s / static_cast<double>(a.data.size());
}

}  // namespace

TEST_CASE("extract_scales border sizes match the lattice counts") {
  TokenGrid grid(8, 8, 16);
  CounterRng rng(4);
  for (auto& t : grid.indices) t = static_cast<u32>(rng.next_below(16));

  auto borders = extract_scales(grid, std::vector<int>{2, 4, 6, 8});
  REQUIRE(borders.size() == 4);
  CHECK(borders[0].positions.size() == 4);
  CHECK(borders[1].positions.size() == 12);
  CHECK(borders[2].positions.size() == 20);
  CHECK(borders[3].positions.size() == 28);

  // Disjoint cover of the whole grid, tokens faithful.
  std::vector<int> seen(64, 0);
  for (const auto& b : borders) {
    REQUIRE(b.positions.size() == b.tokens.size());
    for (std::size_t i = 0; i < b.positions.size(); ++i) {
      seen[b.positions[i]]++;
      CHECK(b.tokens[i] == grid.indices[b.positions[i]]);
    }
  }
  for (int c : seen) CHECK(c == 1);
}

TEST_CASE("extract_scales single full scale is the whole grid") {
  TokenGrid grid(3, 5, 4);
  auto borders = extract_scales(grid, std::vector<ScalePair>{{3, 5}});
  REQUIRE(borders.size() == 1);
  CHECK(borders[0].positions.size() == 15);
}

TEST_CASE("extract_scales borders partition fuzzed grids") {
  CounterRng rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    int n = 4 << rng.next_below(3);  // 4, 8, 16
    TokenGrid grid(n, n, 8);
    for (auto& t : grid.indices) t = static_cast<u32>(rng.next_below(8));
    std::vector<int> scales{2, n};
    if (n >= 8) scales = {2, 4, n};
    auto borders = extract_scales(grid, scales);
    std::size_t total = 0;
    for (const auto& b : borders) total += b.positions.size();
    CHECK(total == grid.positions());
  }
}

TEST_CASE("residual_quantize at one full scale equals plain quantization") {
  Codebook cb = random_codebook(8, 2, 5);
  LatentGrid latent = smooth_latent(4, 2, 6);
  ScaleStack stack = residual_quantize(latent, cb, {4});
  REQUIRE(stack.maps.size() == 1);
  CHECK(stack.maps[0] == vq_quantize(latent, cb));
  LatentGrid back = residual_dequantize(stack, cb);
  LatentGrid plain = vq_dequantize(vq_quantize(latent, cb), cb);
  CHECK(mse(back, plain) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("constant grid hitting a codeword reaches the zero-residual fixed point") {
  Codebook cb = random_codebook(8, 2, 7);
  // Make row 2 an exact constant target and give the codebook a zero row.
  cb.row(5)[0] = 0.0;
  cb.row(5)[1] = 0.0;
  LatentGrid latent(4, 4, 2);
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      latent.at(i, j, 0) = cb.row(2)[0];
      latent.at(i, j, 1) = cb.row(2)[1];
    }
  }
  ScaleStack stack = residual_quantize(latent, cb, {2, 4});
  // Scale 1 nails the grid; every later residual map quantizes the zero
  // vector, whose nearest codeword is the zero row.
  for (u32 idx : stack.maps[0].indices) CHECK(idx == 2);
  for (u32 idx : stack.maps[1].indices) CHECK(idx == 5);
  LatentGrid back = residual_dequantize(stack, cb);
  CHECK(mse(back, latent) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("multi-scale reconstruction error never exceeds single-scale") {
  for (u64 seed = 0; seed < 12; ++seed) {
    Codebook cb = random_codebook(16, 3, 100 + seed);
    LatentGrid latent = smooth_latent(8, 3, 200 + seed);
    ScaleStack multi = residual_quantize(latent, cb, {2, 4, 8});
    ScaleStack single = residual_quantize(latent, cb, {8});
    double multi_err = mse(residual_dequantize(multi, cb), latent);
    double single_err = mse(residual_dequantize(single, cb), latent);
    CHECK(multi_err <= single_err + 1e-12);
  }
}

TEST_CASE("all-zero codebook row selected everywhere reconstructs zero") {
  Codebook cb;
  cb.dim = 2;
  cb.vectors = {0.0, 0.0, 5.0, 5.0};
  ScaleStack stack;
  stack.V = 2;
  stack.scales = {2, 4};
  stack.maps.emplace_back(2, 2, 2);
  stack.maps.emplace_back(4, 4, 2);
  LatentGrid out = residual_dequantize(stack, cb);
  for (double v : out.data) CHECK(v == 0.0);
}

TEST_CASE("residual pipeline rejects bad scale chains") {
  Codebook cb = random_codebook(4, 2, 3);
  LatentGrid latent = smooth_latent(8, 2, 4);
  CHECK_THROWS_AS(residual_quantize(latent, cb, {4, 2, 8}), Error);  // not increasing
  CHECK_THROWS_AS(residual_quantize(latent, cb, {2, 4}), Error);     // last != n
  LatentGrid rect(4, 8, 2);
  CHECK_THROWS_AS(residual_quantize(rect, cb, {2, 4}), Error);  // non-square
}

TEST_CASE("a diverging residual aborts with scale diagnostics") {
  // Finite inputs whose residual subtraction overflows: the known
  // instability of the explicit pipeline has to surface as an error, not as
  // silent NaN maps.
  Codebook cb;
  cb.dim = 1;
  cb.vectors = {1.7e308, 1.6e308};
  LatentGrid latent(4, 4, 1);
  for (auto& v : latent.data) v = -1.7e308;
  CHECK_THROWS_WITH_AS(residual_quantize(latent, cb, {4}), doctest::Contains("scale"), Error);
}

TEST_CASE("scale stack container round trips") {
  Codebook cb = random_codebook(16, 2, 8);
  LatentGrid latent = smooth_latent(8, 2, 9);
  ScaleStack stack = residual_quantize(latent, cb, {2, 4, 8});
  auto bytes = serialize_scale_stack(stack);
  CHECK(bytes[5] == 4);  // container kind byte
  ScaleStack back = parse_scale_stack(bytes);
  CHECK(back.V == stack.V);
  CHECK(back.scales == stack.scales);
  REQUIRE(back.maps.size() == stack.maps.size());
  for (std::size_t k = 0; k < stack.maps.size(); ++k) CHECK(back.maps[k] == stack.maps[k]);
}
