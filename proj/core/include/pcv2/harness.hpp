#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "pcv2/coder.hpp"
#include "pcv2/probmodel.hpp"
#include "pcv2/schedules.hpp"
#include "pcv2/tokens.hpp"

namespace pcv2 {

// Synthetic token source with tunable spatial correlation: in raster order,
// each cell copies one of its already-generated neighbors (north/west,
// weighted) with probability `persistence`, otherwise draws uniformly.
struct MarkovSource {
  u32 V = 64;
  double persistence = 0.9;
  std::array<double, 2> neighbor_weights = {1.0, 1.0};  // {north, west}
  u64 seed = 1;
};

TokenGrid gen_markov_grid(const MarkovSource& src, int h, int w, u64 index = 0);
std::vector<TokenGrid> gen_markov_corpus(const MarkovSource& src, int h, int w, int count,
                                         u64 first_index = 0);

enum class ContextSpec {
  kOrder0,  // marginal symbol distribution
  kOrder1,  // conditioned on the west neighbor (north at row starts)
};

// Plug-in conditional entropy estimate from counts, bits per token.
double empirical_entropy(std::span<const TokenGrid> corpus, ContextSpec spec);

// Order-1 entropy of the coding-order context process: plug-in estimate of
// H(token | value of the nearest already-coded position) with the reveal
// order replayed from `sched`. This is the information-theoretic floor for
// the counting coder's context family, measured independently of it;
// positions with an empty context (the first group) are skipped.
double schedule_order1_entropy(std::span<const TokenGrid> corpus, const MaskSchedule& sched);

struct ReportRow {
  std::string model;
  std::string schedule;
  std::size_t tokens = 0;
  double bpp = 0.0;
  double savings_pct = 0.0;
  double header_bits = 0.0;  // per grid, reported separately from bpp
};

struct Report {
  int canvas_h = 512;
  int canvas_w = 512;
  std::vector<ReportRow> rows;

  std::string to_csv() const;
  std::string to_text() const;
  const ReportRow* find(const std::string& model, const std::string& schedule) const;
};

struct BenchEntry {
  std::string model_name;
  EntropyModel* model = nullptr;
  std::string schedule_name;
  const MaskSchedule* schedule = nullptr;
};

// Encodes every corpus grid under every entry, decodes it back (any
// round-trip failure aborts), checks the payload stays within
// [rate, rate + 32 bits], and reports cross-entropy bpp on the virtual
// canvas with savings against the uniform baseline. The baseline row is
// always first with savings exactly 0.
Report run_table3(std::span<const BenchEntry> entries, std::span<const TokenGrid> corpus,
                  int canvas_h = 512, int canvas_w = 512);

// Corpus spec strings for the CLI:
// "markov:v=64,p=0.9,h=16,w=16,train=512,test=128,seed=9".
struct CorpusSpec {
  MarkovSource source;
  int h = 16;
  int w = 16;
  int train_count = 512;
  int test_count = 128;

  std::vector<TokenGrid> train() const;
  std::vector<TokenGrid> test() const;
};

CorpusSpec parse_corpus_spec(const std::string& spec);

}  // namespace pcv2
