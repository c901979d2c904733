#include "pcv2/tokens.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include "pcv2/bytes.hpp"
#include "pcv2/hash.hpp"
#include "pcv2/rng.hpp"

namespace pcv2 {

LatentGrid::LatentGrid(int h_, int w_, int c_) : h(h_), w(w_), c(c_) {
  require(h >= 1 && w >= 1 && c >= 1, "LatentGrid: dims must be >= 1, got ", h, "x", w, "x", c);
  data.assign(static_cast<std::size_t>(h) * w * c, 0.0);
}

void LatentGrid::check_finite() const {
  for (std::size_t i = 0; i < data.size(); ++i) {
    require(std::isfinite(data[i]), "LatentGrid: non-finite entry at flat index ", i);
  }
}

u32 Codebook::id() const {
  auto bytes = serialize_codebook(*this);
  return fnv1a32(bytes.data(), bytes.size());
}

TokenGrid::TokenGrid(int h_, int w_, u32 V_) : h(h_), w(w_), V(V_) {
  require(h >= 1 && w >= 1, "TokenGrid: dims must be >= 1, got ", h, "x", w);
  require(V >= 2, "TokenGrid: V must be >= 2, got ", V);
  indices.assign(static_cast<std::size_t>(h) * w, 0);
}

void TokenGrid::validate() const {
  require(h >= 1 && w >= 1, "TokenGrid: dims must be >= 1");
  require(V >= 2, "TokenGrid: V must be >= 2");
  require(indices.size() == positions(), "TokenGrid: index count ", indices.size(),
          " != h*w = ", positions());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    require(indices[i] < V, "TokenGrid: index ", indices[i], " out of range [0,", V,
            ") at flat position ", i);
  }
}

namespace {

// Distances accumulate in channel order; no fast-math reassociation here, so
// results are identical across builds.
double sq_dist(const double* a, const double* b, int dim) {
  double d = 0.0;
  for (int k = 0; k < dim; ++k) {
    double diff = a[k] - b[k];
    d += diff * diff;
  }
  return d;
}

}  // namespace

TokenGrid vq_quantize(const LatentGrid& latent, const Codebook& cb) {
  require(cb.size() >= 2, "vq_quantize: codebook must hold at least 2 vectors");
  require(latent.c == cb.dim, "vq_quantize: latent channels ", latent.c, " != codebook dim ",
          cb.dim);
  latent.check_finite();

  TokenGrid out(latent.h, latent.w, cb.size());
  const u32 V = cb.size();
  for (int i = 0; i < latent.h; ++i) {
    for (int j = 0; j < latent.w; ++j) {
      const double* x = &latent.data[(static_cast<std::size_t>(i) * latent.w + j) * latent.c];
      u32 best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (u32 v = 0; v < V; ++v) {
        double d = sq_dist(x, cb.row(v), cb.dim);
        if (d < best_d) {  // strict: ties keep the smallest index
          best_d = d;
          best = v;
        }
      }
      out.at(i, j) = best;
    }
  }
  return out;
}

LatentGrid vq_dequantize(const TokenGrid& tokens, const Codebook& cb) {
  tokens.validate();
  require(tokens.V == cb.size(), "vq_dequantize: grid V=", tokens.V, " != codebook V=", cb.size());
  LatentGrid out(tokens.h, tokens.w, cb.dim);
  for (int i = 0; i < tokens.h; ++i) {
    for (int j = 0; j < tokens.w; ++j) {
      const double* src = cb.row(tokens.at(i, j));
      for (int k = 0; k < cb.dim; ++k) out.at(i, j, k) = src[k];
    }
  }
  return out;
}

Codebook codebook_train(const std::vector<std::vector<double>>& samples, u32 V, int iters,
                        u64 seed) {
  require(V >= 2, "codebook_train: V must be >= 2");
  require(samples.size() >= V, "codebook_train: need at least V=", V, " samples, got ",
          samples.size());
  const int dim = static_cast<int>(samples[0].size());
  require(dim >= 1, "codebook_train: zero-dimensional samples");
  for (const auto& s : samples) {
    require(static_cast<int>(s.size()) == dim, "codebook_train: inconsistent sample dimension");
  }

  CounterRng rng(seed);
  const std::size_t n = samples.size();

  Codebook cb;
  cb.dim = dim;
  cb.vectors.assign(static_cast<std::size_t>(V) * dim, 0.0);

  // k-means++ seeding.
  std::vector<double> min_d(n, std::numeric_limits<double>::infinity());
  std::size_t first = static_cast<std::size_t>(rng.next_below(n));
  for (int k = 0; k < dim; ++k) cb.vectors[k] = samples[first][k];
  for (u32 c = 1; c < V; ++c) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double d = sq_dist(samples[i].data(), cb.row(c - 1), dim);
      if (d < min_d[i]) min_d[i] = d;
      total += min_d[i];
    }
    std::size_t pick = 0;
    if (total > 0.0) {
      double target = rng.next_double() * total;
      double acc = 0.0;
      pick = n - 1;
      for (std::size_t i = 0; i < n; ++i) {
        acc += min_d[i];
        if (acc >= target) {
          pick = i;
          break;
        }
      }
    } else {
      pick = static_cast<std::size_t>(rng.next_below(n));
    }
    for (int k = 0; k < dim; ++k) cb.row(c)[k] = samples[pick][k];
  }

  std::vector<u32> assign(n, 0);
  std::vector<double> sums(static_cast<std::size_t>(V) * dim);
  std::vector<std::size_t> counts(V);
  for (int it = 0; it < iters; ++it) {
    // Assignment pass, tie-break to the smaller index.
    for (std::size_t i = 0; i < n; ++i) {
      u32 best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (u32 v = 0; v < V; ++v) {
        double d = sq_dist(samples[i].data(), cb.row(v), dim);
        if (d < best_d) {
          best_d = d;
          best = v;
        }
      }
      assign[i] = best;
    }
    std::fill(sums.begin(), sums.end(), 0.0);
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      counts[assign[i]]++;
      double* s = &sums[static_cast<std::size_t>(assign[i]) * dim];
      for (int k = 0; k < dim; ++k) s[k] += samples[i][k];
    }
    for (u32 v = 0; v < V; ++v) {
      if (counts[v] == 0) {
        // Reseed dead cluster to the sample farthest from its centroid.
        std::size_t far = 0;
        double far_d = -1.0;
        for (std::size_t i = 0; i < n; ++i) {
          double d = sq_dist(samples[i].data(), cb.row(assign[i]), dim);
          if (d > far_d) {
            far_d = d;
            far = i;
          }
        }
        for (int k = 0; k < dim; ++k) cb.row(v)[k] = samples[far][k];
      } else {
        const double* s = &sums[static_cast<std::size_t>(v) * dim];
        for (int k = 0; k < dim; ++k) cb.row(v)[k] = s[k] / static_cast<double>(counts[v]);
      }
    }
  }

  // Identical rows break determinism of nearest-neighbor tie-breaking across
  // codebook reorderings; nudge duplicates apart once at build time.
  for (u32 a = 0; a < V; ++a) {
    for (u32 b = a + 1; b < V; ++b) {
      if (sq_dist(cb.row(a), cb.row(b), dim) == 0.0) {
        cb.row(b)[0] += 1e-9 * static_cast<double>(b + 1);
      }
    }
  }
  return cb;
}

double psnr(const LatentGrid& a, const LatentGrid& b, double peak) {
  require(a.h == b.h && a.w == b.w && a.c == b.c, "psnr: shape mismatch ", a.h, "x", a.w, "x", a.c,
          " vs ", b.h, "x", b.w, "x", b.c);
  require(peak > 0.0, "psnr: peak must be positive");
  double se = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    double d = a.data[i] - b.data[i];
    se += d * d;
  }
  double mse = se / static_cast<double>(a.data.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak / mse);
}

std::vector<u8> serialize_codebook(const Codebook& cb) {
  ByteWriter w;
  w.put_magic("PCVB");
  w.put_u8(1);
  w.put_u32(cb.size());
  w.put_u32(static_cast<u32>(cb.dim));
  for (double v : cb.vectors) w.put_f32(static_cast<float>(v));
  return w.take();
}

Codebook parse_codebook(std::span<const u8> bytes) {
  ByteReader r(bytes);
  r.expect_magic("PCVB", "codebook");
  u8 version = r.get_u8();
  require(version == 1, "codebook: unsupported version ", static_cast<int>(version));
  u32 V = r.get_u32();
  u32 dim = r.get_u32();
  require(V >= 2 && dim >= 1, "codebook: bad dimensions V=", V, " dim=", dim);
  Codebook cb;
  cb.dim = static_cast<int>(dim);
  cb.vectors.resize(static_cast<std::size_t>(V) * dim);
  for (auto& v : cb.vectors) v = static_cast<double>(r.get_f32());
  return cb;
}

void save_codebook(const Codebook& cb, const std::string& path) {
  auto bytes = serialize_codebook(cb);
  std::ofstream f(path, std::ios::binary);
  require(f.good(), "save_codebook: cannot open ", path);
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  require(f.good(), "save_codebook: write failed for ", path);
}

Codebook load_codebook(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  require(f.good(), "load_codebook: cannot open ", path);
  std::vector<u8> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return parse_codebook(bytes);
}

}  // namespace pcv2
