#include <doctest.h>

#include <cmath>
#include <limits>

#include "pcv2/rng.hpp"
#include "pcv2/tokens.hpp"

using namespace pcv2;

namespace {

Codebook make_codebook(std::vector<std::vector<double>> rows) {
  Codebook cb;
  cb.dim = static_cast<int>(rows[0].size());
  for (const auto& r : rows) cb.vectors.insert(cb.vectors.end(), r.begin(), r.end());
  return cb;
}

LatentGrid random_latent(int h, int w, int c, u64 seed) {
  LatentGrid g(h, w, c);
  CounterRng rng(seed);
  for (auto& v : g.data) v = rng.next_gaussian();
  return g;
}

Codebook random_codebook(u32 V, int dim, u64 seed) {
  Codebook cb;
  cb.dim = dim;
  cb.vectors.resize(static_cast<std::size_t>(V) * dim);
  CounterRng rng(seed);
  for (auto& v : cb.vectors) v = rng.next_gaussian();
  return cb;
}

// Independent O(h*w*V*c) scan, kept deliberately separate from the library's
// implementation.
TokenGrid brute_force_nearest(const LatentGrid& latent, const Codebook& cb) {
  TokenGrid out(latent.h, latent.w, cb.size());
  for (int i = 0; i < latent.h; ++i) {
    for (int j = 0; j < latent.w; ++j) {
      double best = std::numeric_limits<double>::infinity();
      u32 arg = 0;
      for (u32 v = 0; v < cb.size(); ++v) {
        double d = 0.0;
        for (int k = 0; k < cb.dim; ++k) {
          double diff = latent.at(i, j, k) - cb.row(v)[k];
          d += diff * diff;
        }
        if (d < best) {
          best = d;
          arg = v;
        }
      }
      out.at(i, j) = arg;
    }
  }
  return out;
}

}  // namespace

TEST_CASE("vq_quantize exact matches map to their rows") {
  Codebook cb = random_codebook(8, 3, 42);
  LatentGrid latent(1, 2, 3);
  for (int k = 0; k < 3; ++k) {
    latent.at(0, 0, k) = cb.row(3)[k];
    latent.at(0, 1, k) = cb.row(7)[k];
  }
  TokenGrid t = vq_quantize(latent, cb);
  CHECK(t.at(0, 0) == 3);
  CHECK(t.at(0, 1) == 7);
}

TEST_CASE("vq_quantize midpoint threshold in 1-D") {
  Codebook cb = make_codebook({{0.0}, {1.0}});
  LatentGrid latent(1, 2, 1);
  latent.at(0, 0, 0) = 0.49;
  latent.at(0, 1, 0) = 0.51;
  TokenGrid t = vq_quantize(latent, cb);
  CHECK(t.at(0, 0) == 0);
  CHECK(t.at(0, 1) == 1);
}

TEST_CASE("vq_quantize tie breaks to the smaller index") {
  Codebook cb = make_codebook({{-1.0}, {1.0}});
  LatentGrid latent(1, 1, 1);
  latent.at(0, 0, 0) = 0.0;  // equidistant
  CHECK(vq_quantize(latent, cb).at(0, 0) == 0);
}

TEST_CASE("vq_quantize agrees with the brute-force oracle") {
  for (u64 seed = 0; seed < 20; ++seed) {
    LatentGrid latent = random_latent(8, 8, 4, 100 + seed);
    Codebook cb = random_codebook(16, 4, 200 + seed);
    CHECK(vq_quantize(latent, cb) == brute_force_nearest(latent, cb));
  }
}

TEST_CASE("vq_quantize rejects bad inputs") {
  Codebook cb = random_codebook(4, 3, 1);
  CHECK_THROWS_AS(vq_quantize(random_latent(2, 2, 2, 2), cb), Error);  // dim mismatch
  LatentGrid bad = random_latent(2, 2, 3, 3);
  bad.at(0, 0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(vq_quantize(bad, cb), Error);
}

TEST_CASE("vq_dequantize is a table lookup and V-checked") {
  Codebook cb = random_codebook(8, 3, 7);
  TokenGrid t(1, 2, 8);
  t.at(0, 0) = 3;
  t.at(0, 1) = 7;
  LatentGrid back = vq_dequantize(t, cb);
  for (int k = 0; k < 3; ++k) {
    CHECK(back.at(0, 0, k) == cb.row(3)[k]);
    CHECK(back.at(0, 1, k) == cb.row(7)[k]);
  }
  TokenGrid wrong(1, 2, 16);
  CHECK_THROWS_AS(vq_dequantize(wrong, cb), Error);
}

TEST_CASE("quantize-dequantize round trip is the identity on token grids") {
  for (u64 seed = 0; seed < 1000; ++seed) {
    CounterRng rng(seed);
    u32 V = 2 + static_cast<u32>(rng.next_below(30));
    int h = 1 + static_cast<int>(rng.next_below(6));
    int w = 1 + static_cast<int>(rng.next_below(6));
    Codebook cb = random_codebook(V, 3, 500 + seed);
    TokenGrid t(h, w, V);
    for (auto& idx : t.indices) idx = static_cast<u32>(rng.next_below(V));
    CHECK(vq_quantize(vq_dequantize(t, cb), cb) == t);
  }
}

TEST_CASE("quantization error beats any constant codeword") {
  LatentGrid latent = random_latent(6, 6, 2, 11);
  Codebook cb = random_codebook(8, 2, 12);
  LatentGrid recon = vq_dequantize(vq_quantize(latent, cb), cb);
  auto mse = [&](const LatentGrid& a, const LatentGrid& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
      double d = a.data[i] - b.data[i];
      s += d * d;
    }
    return s / static_cast<double>(a.data.size());
  };
  double vq_mse = mse(latent, recon);
  for (u32 v = 0; v < cb.size(); ++v) {
    LatentGrid constant(latent.h, latent.w, latent.c);
    for (int i = 0; i < latent.h; ++i) {
      for (int j = 0; j < latent.w; ++j) {
        for (int k = 0; k < latent.c; ++k) constant.at(i, j, k) = cb.row(v)[k];
      }
    }
    CHECK(vq_mse <= mse(latent, constant) + 1e-12);
  }
}

TEST_CASE("codebook_train recovers separable points and is deterministic") {
  std::vector<std::vector<double>> samples = {{0, 0}, {10, 0}, {0, 10}, {10, 10}};
  Codebook cb = codebook_train(samples, 4, 5, 3);
  LatentGrid latent(2, 2, 2);
  latent.at(0, 0, 0) = 0;
  latent.at(0, 0, 1) = 0;
  latent.at(0, 1, 0) = 10;
  latent.at(0, 1, 1) = 0;
  latent.at(1, 0, 0) = 0;
  latent.at(1, 0, 1) = 10;
  latent.at(1, 1, 0) = 10;
  latent.at(1, 1, 1) = 10;
  LatentGrid recon = vq_dequantize(vq_quantize(latent, cb), cb);
  for (std::size_t i = 0; i < latent.data.size(); ++i) {
    CHECK(recon.data[i] == doctest::Approx(latent.data[i]).epsilon(1e-9));
  }

  Codebook again = codebook_train(samples, 4, 5, 3);
  CHECK(cb.vectors == again.vectors);
  CHECK(cb.id() == again.id());

  CHECK_THROWS_AS(codebook_train(samples, 5, 5, 3), Error);  // fewer samples than V
}

TEST_CASE("codebook_train centers two separated blobs") {
  CounterRng rng(77);
  std::vector<std::vector<double>> samples;
  double sum_a = 0.0, sum_b = 0.0;
  for (int i = 0; i < 400; ++i) {
    bool first = i % 2 == 0;
    double center = first ? -5.0 : 5.0;
    double x = center + 0.3 * rng.next_gaussian();
    (first ? sum_a : sum_b) += x;
    samples.push_back({x});
  }
  double mean_a = sum_a / 200.0, mean_b = sum_b / 200.0;
  Codebook cb = codebook_train(samples, 2, 20, 5);
  double lo = std::min(cb.vectors[0], cb.vectors[1]);
  double hi = std::max(cb.vectors[0], cb.vectors[1]);
  CHECK(std::abs(lo - mean_a) < 0.1);
  CHECK(std::abs(hi - mean_b) < 0.1);
}

TEST_CASE("psnr matches closed forms") {
  LatentGrid a = random_latent(4, 4, 2, 9);
  CHECK(std::isinf(psnr(a, a, 1.0)));

  LatentGrid b = a;
  for (auto& v : b.data) v += 0.1;
  CHECK(psnr(a, b, 1.0) == doctest::Approx(20.0).epsilon(1e-9));

  // Independent two-pass recomputation.
  LatentGrid c = random_latent(4, 4, 2, 10);
  double se = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    double d = a.data[i] - c.data[i];
    se += d * d;
  }
  double expect = 10.0 * std::log10(1.0 / (se / static_cast<double>(a.data.size())));
  CHECK(psnr(a, c, 1.0) == doctest::Approx(expect).epsilon(1e-12));

  LatentGrid wrong(3, 4, 2);
  CHECK_THROWS_AS(psnr(a, wrong, 1.0), Error);
}

TEST_CASE("codebook file round trip") {
  Codebook cb = random_codebook(16, 4, 21);
  auto bytes = serialize_codebook(cb);
  CHECK(bytes[0] == 'P');
  CHECK(bytes[1] == 'C');
  CHECK(bytes[2] == 'V');
  CHECK(bytes[3] == 'B');
  Codebook back = parse_codebook(bytes);
  CHECK(back.dim == cb.dim);
  CHECK(back.size() == cb.size());
  CHECK(serialize_codebook(back) == bytes);
  CHECK(back.id() == cb.id());
}
