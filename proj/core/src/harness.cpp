#include "pcv2/harness.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <sstream>

#include "pcv2/rng.hpp"

namespace pcv2 {

TokenGrid gen_markov_grid(const MarkovSource& src, int h, int w, u64 index) {
  require(src.V >= 2, "markov source: V must be >= 2");
  require(src.persistence >= 0.0 && src.persistence < 1.0,
          "markov source: persistence must be in [0,1)");
  CounterRng rng(splitmix64(src.seed) ^ splitmix64(index + 1));
  TokenGrid grid(h, w, src.V);
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      double wn = i > 0 ? src.neighbor_weights[0] : 0.0;
      double ww = j > 0 ? src.neighbor_weights[1] : 0.0;
      double wsum = wn + ww;
      u32 value;
      if (wsum > 0.0 && rng.next_double() < src.persistence) {
        bool north = rng.next_double() * wsum < wn;
        value = north ? grid.at(i - 1, j) : grid.at(i, j - 1);
      } else {
        value = static_cast<u32>(rng.next_below(src.V));
      }
      grid.at(i, j) = value;
    }
  }
  return grid;
}

std::vector<TokenGrid> gen_markov_corpus(const MarkovSource& src, int h, int w, int count,
                                         u64 first_index) {
  std::vector<TokenGrid> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    out.push_back(gen_markov_grid(src, h, w, first_index + static_cast<u64>(i)));
  }
  return out;
}

double empirical_entropy(std::span<const TokenGrid> corpus, ContextSpec spec) {
  require(!corpus.empty(), "empirical_entropy: empty corpus");
  const u32 V = corpus.front().V;
  for (const auto& g : corpus) require(g.V == V, "empirical_entropy: mixed vocabularies");

  if (spec == ContextSpec::kOrder0) {
    std::vector<u64> counts(V, 0);
    u64 total = 0;
    for (const auto& g : corpus) {
      for (u32 sym : g.indices) {
        counts[sym]++;
        total++;
      }
    }
    double H = 0.0;
    for (u64 c : counts) {
      if (c == 0) continue;
      double p = static_cast<double>(c) / static_cast<double>(total);
      H -= p * std::log2(p);
    }
    return H;
  }

  // Order 1: west neighbor, north at row starts, (0,0) skipped.
  std::map<u32, std::vector<u64>> ctx_counts;
  std::map<u32, u64> ctx_totals;
  u64 total = 0;
  for (const auto& g : corpus) {
    for (int i = 0; i < g.h; ++i) {
      for (int j = 0; j < g.w; ++j) {
        u32 ctx;
        if (j > 0) {
          ctx = g.at(i, j - 1);
        } else if (i > 0) {
          ctx = g.at(i - 1, j);
        } else {
          continue;
        }
        auto& row = ctx_counts[ctx];
        if (row.empty()) row.assign(V, 0);
        row[g.at(i, j)]++;
        ctx_totals[ctx]++;
        total++;
      }
    }
  }
  require(total > 0, "empirical_entropy: corpus too small for order-1 contexts");
  double H = 0.0;
  for (const auto& [ctx, row] : ctx_counts) {
    double n_ctx = static_cast<double>(ctx_totals.at(ctx));
    double h_ctx = 0.0;
    for (u64 c : row) {
      if (c == 0) continue;
      double p = static_cast<double>(c) / n_ctx;
      h_ctx -= p * std::log2(p);
    }
    H += (n_ctx / static_cast<double>(total)) * h_ctx;
  }
  return H;
}

double schedule_order1_entropy(std::span<const TokenGrid> corpus, const MaskSchedule& sched) {
  require(!corpus.empty(), "schedule_order1_entropy: empty corpus");
  const u32 V = corpus.front().V;
  const int h = sched.h, w = sched.w;
  std::vector<u64> counts(static_cast<std::size_t>(V) * V, 0);
  std::vector<u64> totals(V, 0);
  u64 total = 0;

  for (const auto& g : corpus) {
    require(g.h == h && g.w == w && g.V == V, "schedule_order1_entropy: corpus shape mismatch");
    std::vector<u8> revealed(g.positions(), 0);
    bool any = false;
    for (const auto& group : sched.groups) {
      for (u32 flat : group) {
        if (any) {
          // Nearest revealed position, ties to the smallest raster index.
          int qi = static_cast<int>(flat) / w;
          int qj = static_cast<int>(flat) % w;
          i64 best_d = -1;
          u32 best = 0;
          for (int i = 0; i < h; ++i) {
            for (int j = 0; j < w; ++j) {
              u32 f = static_cast<u32>(i * w + j);
              if (!revealed[f]) continue;
              i64 di = i - qi, dj = j - qj;
              i64 d = di * di + dj * dj;
              if (best_d < 0 || d < best_d) {
                best_d = d;
                best = f;
              }
            }
          }
          u32 ctx = g.indices[best];
          counts[static_cast<std::size_t>(ctx) * V + g.indices[flat]]++;
          totals[ctx]++;
          total++;
        }
        revealed[flat] = 1;
        any = true;
      }
    }
  }
  require(total > 0, "schedule_order1_entropy: no contexted positions");
  double H = 0.0;
  for (u32 ctx = 0; ctx < V; ++ctx) {
    if (totals[ctx] == 0) continue;
    double n_ctx = static_cast<double>(totals[ctx]);
    double h_ctx = 0.0;
    for (u32 s = 0; s < V; ++s) {
      u64 c = counts[static_cast<std::size_t>(ctx) * V + s];
      if (c == 0) continue;
      double p = static_cast<double>(c) / n_ctx;
      h_ctx -= p * std::log2(p);
    }
    H += (n_ctx / static_cast<double>(total)) * h_ctx;
  }
  return H;
}

std::string Report::to_csv() const {
  std::ostringstream os;
  os << "model,schedule,tokens,bpp,savings_pct,header_bits\n";
  for (const auto& row : rows) {
    os << row.model << ',' << row.schedule << ',' << row.tokens << ',' << std::setprecision(10)
       << row.bpp << ',' << std::fixed << std::setprecision(2) << row.savings_pct << ','
       << std::setprecision(0) << row.header_bits << '\n';
    os.unsetf(std::ios::fixed);
  }
  return os.str();
}

std::string Report::to_text() const {
  std::ostringstream os;
  os << std::left << std::setw(18) << "Method" << std::setw(16) << "Schedule" << std::right
     << std::setw(12) << "bpp" << std::setw(12) << "Savings (%)" << std::setw(14)
     << "Header (bits)" << '\n';
  os << std::string(72, '-') << '\n';
  for (const auto& row : rows) {
    os << std::left << std::setw(18) << row.model << std::setw(16) << row.schedule << std::right
       << std::setw(12) << std::fixed << std::setprecision(5) << row.bpp << std::setw(12)
       << std::setprecision(2) << row.savings_pct << std::setw(14) << std::setprecision(0)
       << row.header_bits << '\n';
    os.unsetf(std::ios::fixed);
  }
  return os.str();
}

const ReportRow* Report::find(const std::string& model, const std::string& schedule) const {
  for (const auto& row : rows) {
    if (row.model == model && row.schedule == schedule) return &row;
  }
  return nullptr;
}

Report run_table3(std::span<const BenchEntry> entries, std::span<const TokenGrid> corpus,
                  int canvas_h, int canvas_w) {
  require(!corpus.empty(), "run_table3: empty corpus");
  const u32 V = corpus.front().V;
  const int h = corpus.front().h;
  const int w = corpus.front().w;
  for (const auto& g : corpus) {
    require(g.V == V && g.h == h && g.w == w, "run_table3: corpus grids must share shape");
  }
  const double canvas = static_cast<double>(canvas_h) * canvas_w;
  const std::size_t tokens = corpus.front().positions();

  Report report;
  report.canvas_h = canvas_h;
  report.canvas_w = canvas_w;

  // Uniform baseline. Coding is exercised for real (round trip included) but
  // the reported bpp is the cross-entropy rate on the canvas.
  UniformModel baseline(V);
  MaskSchedule baseline_sched = checkerboard_schedule(h, w);
  double baseline_bits = 0.0;
  for (const auto& grid : corpus) {
    baseline_bits += model_rate(baseline, grid, baseline_sched);
  }
  double baseline_bpp = baseline_bits / static_cast<double>(corpus.size()) / canvas;
  {
    Bitstream bs = encode_grid(corpus.front(), baseline_sched, baseline);
    ReportRow row;
    row.model = "uniform";
    row.schedule = "-";
    row.tokens = tokens;
    row.bpp = baseline_bpp;
    row.savings_pct = 0.0;
    row.header_bits = static_cast<double>(bs.header_bytes()) * 8.0;
    report.rows.push_back(row);
  }

  for (const auto& entry : entries) {
    require(entry.model != nullptr && entry.schedule != nullptr, "run_table3: null entry");
    require(entry.schedule->h == h && entry.schedule->w == w,
            "run_table3: schedule dims mismatch for ", entry.model_name);
    double bits = 0.0;
    double header_bits = 0.0;
    for (const auto& grid : corpus) {
      double rate = 0.0;
      Bitstream bs = encode_grid(grid, *entry.schedule, *entry.model, {}, &rate);
      TokenGrid back = decode_grid(bs, *entry.model);
      require(back == grid, "run_table3: round trip failed for ", entry.model_name, "/",
              entry.schedule_name);
      double payload_bits = static_cast<double>(bs.payload.size()) * 8.0;
      require(payload_bits >= rate && payload_bits <= rate + 32.0,
              "run_table3: payload ", payload_bits, " outside [rate, rate+32] for rate ", rate);
      bits += rate;
      header_bits = static_cast<double>(bs.header_bytes()) * 8.0;
    }
    ReportRow row;
    row.model = entry.model_name;
    row.schedule = entry.schedule_name;
    row.tokens = tokens;
    row.bpp = bits / static_cast<double>(corpus.size()) / canvas;
    row.savings_pct = savings_percent(row.bpp, baseline_bpp);
    row.header_bits = header_bits;
    report.rows.push_back(row);
  }
  return report;
}

CorpusSpec parse_corpus_spec(const std::string& spec) {
  const std::string prefix = "markov:";
  require(spec.rfind(prefix, 0) == 0, "corpus spec must start with 'markov:', got '", spec, "'");
  CorpusSpec out;
  std::istringstream ss(spec.substr(prefix.size()));
  std::string item;
  while (std::getline(ss, item, ',')) {
    auto eq = item.find('=');
    require(eq != std::string::npos, "corpus spec: expected key=value, got '", item, "'");
    std::string key = item.substr(0, eq);
    std::string val = item.substr(eq + 1);
    if (key == "v") {
      out.source.V = static_cast<u32>(std::stoul(val));
    } else if (key == "p") {
      out.source.persistence = std::stod(val);
    } else if (key == "h") {
      out.h = std::stoi(val);
    } else if (key == "w") {
      out.w = std::stoi(val);
    } else if (key == "train") {
      out.train_count = std::stoi(val);
    } else if (key == "test") {
      out.test_count = std::stoi(val);
    } else if (key == "seed") {
      out.source.seed = std::stoull(val);
    } else {
      fail("corpus spec: unknown key '", key, "'");
    }
  }
  return out;
}

std::vector<TokenGrid> CorpusSpec::train() const {
  return gen_markov_corpus(source, h, w, train_count, 0);
}

std::vector<TokenGrid> CorpusSpec::test() const {
  return gen_markov_corpus(source, h, w, test_count, static_cast<u64>(train_count));
}

}  // namespace pcv2
