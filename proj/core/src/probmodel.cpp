#include "pcv2/probmodel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "pcv2/bytes.hpp"
#include "pcv2/hash.hpp"
#include "pcv2/rng.hpp"

namespace pcv2 {

CategoricalField uniform_field(std::vector<u32> positions, u32 V) {
  require(V >= 2, "uniform_field: V must be >= 2");
  CategoricalField f;
  f.V = V;
  f.positions = std::move(positions);
  f.probs = nn::Mat::Constant(static_cast<Eigen::Index>(f.positions.size()), V,
                              1.0 / static_cast<double>(V));
  return f;
}

namespace {

// Nearest set position under squared Euclidean distance, ties to the
// smallest raster index.
u32 nearest_in_mask(int h, int w, const std::vector<u8>& mask, u32 flat) {
  int qi = static_cast<int>(flat) / w;
  int qj = static_cast<int>(flat) % w;
  i64 best_d = -1;
  u32 best = 0;
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      u32 f = static_cast<u32>(i * w + j);
      if (!mask[f]) continue;
      i64 di = i - qi, dj = j - qj;
      i64 d = di * di + dj * dj;
      if (best_d < 0 || d < best_d) {
        best_d = d;
        best = f;
      }
    }
  }
  require(best_d >= 0, "nearest position query with nothing revealed");
  return best;
}

}  // namespace

u32 nearest_revealed(const RevealedView& view, u32 flat) {
  const int h = view.h(), w = view.w();
  std::vector<u8> mask(view.positions(), 0);
  for (std::size_t f = 0; f < mask.size(); ++f) mask[f] = view.is_revealed(static_cast<u32>(f));
  return nearest_in_mask(h, w, mask, flat);
}

void UniformModel::predict(u32, const RevealedView&, std::span<double> out) {
  require(out.size() == V_, "uniform predict: bad output size");
  double p = 1.0 / static_cast<double>(V_);
  for (auto& v : out) v = p;
}

// ---------------------------------------------------------------------------
// Counting model

CountingModel::CountingModel(u32 V) : V_(V) {
  require(V >= 2, "counting model: V must be >= 2");
  // Contexts: nearest revealed value split by adjacency (squared distance
  // <= 2 or farther), plus one empty-grid context. The split keeps the
  // sharp statistics of adjacent neighbors uncontaminated by the sparse
  // early-group reveals.
  base_counts_.assign(static_cast<std::size_t>(2 * V_ + 1) * V_, 0);
  base_totals_.assign(2 * V_ + 1, 0);
  counts_ = base_counts_;
  totals_ = base_totals_;
}

u32 CountingModel::context_of(u32 flat, const RevealedView& view) const {
  const int h = view.h(), w = view.w();
  const int qi = static_cast<int>(flat) / w;
  const int qj = static_cast<int>(flat) % w;
  i64 best_d = -1;
  u32 best = 0;
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      u32 f = static_cast<u32>(i * w + j);
      if (!view.is_revealed(f)) continue;
      i64 di = i - qi, dj = j - qj;
      i64 d = di * di + dj * dj;
      if (best_d < 0 || d < best_d) {
        best_d = d;
        best = f;
      }
    }
  }
  if (best_d < 0) return 2 * V_;  // nothing revealed yet
  return view.at(best) + (best_d <= 2 ? 0 : V_);
}

void CountingModel::start_stream(const MaskSchedule&) {
  counts_ = base_counts_;
  totals_ = base_totals_;
}

void CountingModel::predict(u32 flat, const RevealedView& view, std::span<double> out) {
  require(out.size() == V_, "counting predict: bad output size");
  u32 ctx = context_of(flat, view);
  const u32* row = &counts_[static_cast<std::size_t>(ctx) * V_];
  const double denom = static_cast<double>(totals_[ctx]) + static_cast<double>(V_) / 2.0;
  for (u32 s = 0; s < V_; ++s) {
    out[s] = (static_cast<double>(row[s]) + 0.5) / denom;
  }
}

void CountingModel::observe(u32 flat, u32 symbol, const RevealedView& view) {
  require(symbol < V_, "counting observe: symbol out of range");
  u32 ctx = context_of(flat, view);
  counts_[static_cast<std::size_t>(ctx) * V_ + symbol]++;
  totals_[ctx]++;
}

void CountingModel::prime(std::span<const TokenGrid> grids, const MaskSchedule& sched) {
  for (const auto& grid : grids) {
    require(grid.V == V_, "counting prime: grid V mismatch");
    require(grid.h == sched.h && grid.w == sched.w, "counting prime: schedule dims mismatch");
    std::vector<u8> revealed(grid.positions(), 0);
    RevealedView view(grid, revealed);
    for (const auto& group : sched.groups) {
      for (u32 flat : group) {
        u32 ctx = context_of(flat, view);
        base_counts_[static_cast<std::size_t>(ctx) * V_ + grid.indices[flat]]++;
        base_totals_[ctx]++;
        revealed[flat] = 1;
      }
    }
  }
  primed_ = true;
  counts_ = base_counts_;
  totals_ = base_totals_;
}

u64 CountingModel::checkpoint_hash() const {
  if (!primed_) return 0;
  auto bytes = serialize();
  return fnv1a64(bytes.data(), bytes.size());
}

std::vector<u8> CountingModel::serialize() const {
  ByteWriter w;
  w.put_magic("PCVM");
  w.put_u8(1);
  w.put_u8(kModelKindCounting);
  w.put_u32(V_);
  w.put_u8(primed_ ? 1 : 0);
  for (u32 c : base_counts_) w.put_u32(c);
  return w.take();
}

CountingModel CountingModel::parse(std::span<const u8> bytes) {
  ByteReader r(bytes);
  r.expect_magic("PCVM", "model checkpoint");
  u8 version = r.get_u8();
  require(version == 1, "model checkpoint: unsupported version ", static_cast<int>(version));
  u8 kind = r.get_u8();
  require(kind == kModelKindCounting, "model checkpoint: expected counting model, got kind ",
          static_cast<int>(kind));
  u32 V = r.get_u32();
  CountingModel m(V);
  m.primed_ = r.get_u8() != 0;
  for (auto& c : m.base_counts_) c = r.get_u32();
  for (u32 ctx = 0; ctx <= 2 * V; ++ctx) {
    u64 total = 0;
    for (u32 s = 0; s < V; ++s) total += m.base_counts_[static_cast<std::size_t>(ctx) * V + s];
    require(total <= 0xFFFFFFFFull, "model checkpoint: count overflow");
    m.base_totals_[ctx] = static_cast<u32>(total);
  }
  m.counts_ = m.base_counts_;
  m.totals_ = m.base_totals_;
  return m;
}

// ---------------------------------------------------------------------------
// MIM

MimModel MimModel::create(int h, int w, u32 V, u64 seed, int d_model, int n_layers, int n_heads) {
  require(h >= 1 && w >= 1 && V >= 2, "mim create: bad dimensions");
  MimModel m;
  m.h = h;
  m.w = w;
  m.V = V;
  nn::TransformerConfig cfg;
  cfg.input_rows = static_cast<int>(V) + 1;  // row V is the mask embedding
  cfg.vocab = static_cast<int>(V);
  cfg.max_pos = h * w;
  cfg.max_scales = 0;
  cfg.d_model = d_model;
  cfg.n_layers = n_layers;
  cfg.n_heads = n_heads;
  cfg.d_ff = 4 * d_model;
  m.net = nn::Transformer(cfg, seed);
  return m;
}

u64 MimModel::checkpoint_hash() const {
  auto bytes = serialize_mim(*this);
  return fnv1a64(bytes.data(), bytes.size());
}

namespace {

void check_grid_model(int mh, int mw, u32 mV, const RevealedView& view) {
  require(view.h() == mh && view.w() == mw, "model/grid dims mismatch: model ", mh, "x", mw,
          ", grid ", view.h(), "x", view.w());
  require(view.vocab() == mV, "model/grid vocab mismatch: model V=", mV, ", grid V=",
          view.vocab());
}

}  // namespace

CategoricalField mim_forward_at(const MimModel& m, const RevealedView& view,
                                std::span<const u32> targets) {
  check_grid_model(m.h, m.w, m.V, view);
  const int n = m.h * m.w;
  std::vector<int> ids(n), pos(n), allow(n, n);
  for (int f = 0; f < n; ++f) {
    u32 uf = static_cast<u32>(f);
    ids[f] = view.is_revealed(uf) ? static_cast<int>(view.at(uf)) : static_cast<int>(m.V);
    pos[f] = f;
  }
  nn::Activations acts;
  m.net.forward(ids, pos, {}, allow, acts);

  CategoricalField field;
  field.V = m.V;
  field.positions.assign(targets.begin(), targets.end());
  field.probs.resize(static_cast<Eigen::Index>(targets.size()), m.V);
  std::vector<double> row(m.V);
  for (std::size_t r = 0; r < targets.size(); ++r) {
    require(targets[r] < static_cast<u32>(n), "mim forward: target out of range");
    nn::Transformer::probs_from_logits(acts.logits.row(targets[r]), row);
    for (u32 s = 0; s < m.V; ++s) field.probs(static_cast<Eigen::Index>(r), s) = row[s];
  }
  return field;
}

CategoricalField mim_forward(const MimModel& m, const TokenGrid& grid,
                             const std::vector<u8>& revealed) {
  require(revealed.size() == grid.positions(), "mim forward: revealed mask shape mismatch");
  RevealedView view(grid, revealed);
  std::vector<u32> masked;
  for (std::size_t f = 0; f < revealed.size(); ++f) {
    if (!revealed[f]) masked.push_back(static_cast<u32>(f));
  }
  if (masked.empty()) {
    CategoricalField empty;
    empty.V = grid.V;
    empty.probs.resize(0, grid.V);
    return empty;
  }
  return mim_forward_at(m, view, masked);
}

double mim_masked_loss(MimModel& m, const TokenGrid& grid, const std::vector<u8>& revealed,
                       double grad_scale, bool backward) {
  require(revealed.size() == grid.positions(), "mim loss: revealed mask shape mismatch");
  require(grid.h == m.h && grid.w == m.w && grid.V == m.V, "mim loss: grid/model mismatch");
  const int n = m.h * m.w;
  std::vector<int> ids(n), pos(n), allow(n, n);
  std::vector<int> loss_rows;
  std::vector<u32> targets;
  for (int f = 0; f < n; ++f) {
    bool rev = revealed[static_cast<std::size_t>(f)] != 0;
    ids[f] = rev ? static_cast<int>(grid.indices[static_cast<std::size_t>(f)])
                 : static_cast<int>(m.V);
    pos[f] = f;
    if (!rev) {
      loss_rows.push_back(f);
      targets.push_back(grid.indices[static_cast<std::size_t>(f)]);
    }
  }
  require(!loss_rows.empty(), "mim loss: nothing masked");
  nn::Activations acts;
  m.net.forward(ids, pos, {}, allow, acts);
  return m.net.loss_and_backward(acts, loss_rows, targets, grad_scale, backward);
}

MimTrainer::MimTrainer(MimModel& m, TrainConfig cfg)
    : model_(m),
      cfg_(cfg),
      opt_(m.net.params(), cfg.lr, cfg.beta1, cfg.beta2, cfg.adam_eps),
      rng_(cfg.seed) {}

double MimTrainer::step(std::span<const TokenGrid> batch) {
  require(!batch.empty(), "mim train: empty batch");
  opt_.zero_grads();
  const int n = model_.h * model_.w;
  double total = 0.0;
  for (const auto& grid : batch) {
    double ratio =
        cfg_.mask_ratio_lo + (cfg_.mask_ratio_hi - cfg_.mask_ratio_lo) * rng_.next_double();
    int n_mask = std::clamp(static_cast<int>(std::lround(ratio * n)), 1, n);
    // Partial Fisher-Yates: first n_mask entries of a shuffled index list.
    std::vector<u32> order(n);
    for (int f = 0; f < n; ++f) order[f] = static_cast<u32>(f);
    for (int f = 0; f < n_mask; ++f) {
      auto j = static_cast<std::size_t>(f + rng_.next_below(static_cast<u64>(n - f)));
      std::swap(order[static_cast<std::size_t>(f)], order[j]);
    }
    std::vector<u8> revealed(static_cast<std::size_t>(n), 1);
    for (int f = 0; f < n_mask; ++f) revealed[order[static_cast<std::size_t>(f)]] = 0;
    total += mim_masked_loss(model_, grid, revealed, 1.0 / static_cast<double>(batch.size()),
                             true);
  }
  double loss = total / static_cast<double>(batch.size());
  require(std::isfinite(loss), "mim train: loss diverged (NaN)");
  opt_.step();
  return loss;
}

double MimTrainer::train(std::span<const TokenGrid> corpus, std::vector<double>* curve) {
  require(!corpus.empty(), "mim train: empty corpus");
  double last = 0.0;
  std::vector<TokenGrid> batch;
  for (int s = 0; s < cfg_.steps; ++s) {
    batch.clear();
    for (int b = 0; b < cfg_.batch; ++b) {
      batch.push_back(corpus[static_cast<std::size_t>(rng_.next_below(corpus.size()))]);
    }
    last = step(batch);
    if (curve) curve->push_back(last);
  }
  return last;
}

// ---------------------------------------------------------------------------
// VAR

VarModel VarModel::create(int h, int w, u32 V, int max_groups, u64 seed, int d_model,
                          int n_layers, int n_heads) {
  require(h >= 1 && w >= 1 && V >= 2 && max_groups >= 1, "var create: bad dimensions");
  VarModel m;
  m.h = h;
  m.w = w;
  m.V = V;
  m.max_groups = max_groups;
  nn::TransformerConfig cfg;
  cfg.input_rows = static_cast<int>(V) + 1;
  cfg.vocab = static_cast<int>(V);
  cfg.max_pos = h * w;
  cfg.max_scales = max_groups;
  cfg.d_model = d_model;
  cfg.n_layers = n_layers;
  cfg.n_heads = n_heads;
  cfg.d_ff = 4 * d_model;
  m.net = nn::Transformer(cfg, seed);
  return m;
}

u64 VarModel::checkpoint_hash() const {
  auto bytes = serialize_var(*this);
  return fnv1a64(bytes.data(), bytes.size());
}

namespace {

// Sequence for blocks 0..k_max in coding order. The input token of a block-k
// row is the value of its nearest position revealed by blocks < k ("the
// upsampled representation"); block 0 rows carry the mask embedding. allow[]
// is block-causal: rows of block k see rows of blocks <= k.
struct VarSequence {
  std::vector<int> ids, pos, scales, allow;
  std::vector<u32> flats;                 // grid position per row
  std::vector<std::pair<int, int>> span;  // [begin,end) rows per block
};

VarSequence build_var_sequence(const VarModel& m, const MaskSchedule& sched,
                               const RevealedView& view, int k_max) {
  VarSequence seq;
  std::vector<u8> prefix_mask(view.positions(), 0);
  int produced = 0;
  for (int k = 0; k <= k_max; ++k) {
    const auto& group = sched.groups[static_cast<std::size_t>(k)];
    int begin = produced;
    for (u32 flat : group) {
      int id;
      if (k == 0) {
        id = static_cast<int>(m.V);
      } else {
        u32 src = nearest_in_mask(view.h(), view.w(), prefix_mask, flat);
        id = static_cast<int>(view.at(src));
      }
      seq.ids.push_back(id);
      seq.pos.push_back(static_cast<int>(flat));
      seq.scales.push_back(std::min(k, m.max_groups - 1));
      seq.flats.push_back(flat);
      ++produced;
    }
    seq.span.emplace_back(begin, produced);
    for (u32 flat : group) prefix_mask[flat] = 1;
    for (int row = begin; row < produced; ++row) seq.allow.push_back(0);  // filled below
  }
  for (int k = 0; k <= k_max; ++k) {
    for (int row = seq.span[static_cast<std::size_t>(k)].first;
         row < seq.span[static_cast<std::size_t>(k)].second; ++row) {
      seq.allow[static_cast<std::size_t>(row)] = seq.span[static_cast<std::size_t>(k)].second;
    }
  }
  return seq;
}

}  // namespace

CategoricalField var_forward(const VarModel& m, const MaskSchedule& sched, const TokenGrid& grid,
                             int k) {
  require(k >= 1 && k < sched.group_count(), "var forward: group index ", k,
          " out of range (first group is uniform-coded, use uniform_field)");
  require(sched.group_count() <= m.max_groups, "var forward: schedule has ", sched.group_count(),
          " groups, model supports ", m.max_groups);
  require(grid.h == sched.h && grid.w == sched.w, "var forward: grid/schedule dims mismatch");
  // Only groups before k may be read.
  std::vector<u8> revealed(grid.positions(), 0);
  for (int j = 0; j < k; ++j) {
    for (u32 flat : sched.groups[static_cast<std::size_t>(j)]) revealed[flat] = 1;
  }
  RevealedView view(grid, revealed);
  check_grid_model(m.h, m.w, m.V, view);

  VarSequence seq = build_var_sequence(m, sched, view, k);
  nn::Activations acts;
  m.net.forward(seq.ids, seq.pos, seq.scales, seq.allow, acts);

  auto [begin, end] = seq.span[static_cast<std::size_t>(k)];
  CategoricalField field;
  field.V = m.V;
  field.probs.resize(end - begin, m.V);
  std::vector<double> row(m.V);
  for (int r = begin; r < end; ++r) {
    field.positions.push_back(seq.flats[static_cast<std::size_t>(r)]);
    nn::Transformer::probs_from_logits(acts.logits.row(r), row);
    for (u32 s = 0; s < m.V; ++s) field.probs(r - begin, s) = row[s];
  }
  return field;
}

double var_schedule_loss(VarModel& m, const MaskSchedule& sched, const TokenGrid& grid,
                         double grad_scale, bool backward) {
  require(grid.h == m.h && grid.w == m.w && grid.V == m.V, "var loss: grid/model mismatch");
  require(sched.group_count() <= m.max_groups, "var loss: too many groups for model");
  require(sched.group_count() >= 2, "var loss: schedule needs at least two groups");
  std::vector<u8> all(grid.positions(), 1);
  RevealedView view(grid, all);
  VarSequence seq = build_var_sequence(m, sched, view, sched.group_count() - 1);

  nn::Activations acts;
  m.net.forward(seq.ids, seq.pos, seq.scales, seq.allow, acts);
  std::vector<int> loss_rows;
  std::vector<u32> targets;
  for (int k = 1; k < sched.group_count(); ++k) {
    auto [begin, end] = seq.span[static_cast<std::size_t>(k)];
    for (int r = begin; r < end; ++r) {
      loss_rows.push_back(r);
      targets.push_back(grid.indices[seq.flats[static_cast<std::size_t>(r)]]);
    }
  }
  return m.net.loss_and_backward(acts, loss_rows, targets, grad_scale, backward);
}

VarTrainer::VarTrainer(VarModel& m, MaskSchedule sched, TrainConfig cfg)
    : model_(m),
      sched_(std::move(sched)),
      cfg_(cfg),
      opt_(m.net.params(), cfg.lr, cfg.beta1, cfg.beta2, cfg.adam_eps),
      rng_(cfg.seed) {}

double VarTrainer::step(std::span<const TokenGrid> batch) {
  require(!batch.empty(), "var train: empty batch");
  opt_.zero_grads();
  double total = 0.0;
  for (const auto& grid : batch) {
    total += var_schedule_loss(model_, sched_, grid, 1.0 / static_cast<double>(batch.size()),
                               true);
  }
  double loss = total / static_cast<double>(batch.size());
  require(std::isfinite(loss), "var train: loss diverged (NaN)");
  opt_.step();
  return loss;
}

double VarTrainer::train(std::span<const TokenGrid> corpus, std::vector<double>* curve) {
  require(!corpus.empty(), "var train: empty corpus");
  double last = 0.0;
  std::vector<TokenGrid> batch;
  for (int s = 0; s < cfg_.steps; ++s) {
    batch.clear();
    for (int b = 0; b < cfg_.batch; ++b) {
      batch.push_back(corpus[static_cast<std::size_t>(rng_.next_below(corpus.size()))]);
    }
    last = step(batch);
    if (curve) curve->push_back(last);
  }
  return last;
}

// ---------------------------------------------------------------------------
// Coding adapters

MimCodingModel::MimCodingModel(const MimModel& m)
    : m_(checkpoint_round_trip(m)), hash_(m_.checkpoint_hash()) {}

void MimCodingModel::begin_group(int k, const RevealedView& view, const MaskSchedule& sched) {
  require(k >= 1 && k < sched.group_count(), "mim coding: bad group index");
  current_ = mim_forward_at(m_, view, sched.groups[static_cast<std::size_t>(k)]);
  row_of_.assign(view.positions(), -1);
  for (std::size_t r = 0; r < current_.positions.size(); ++r) {
    row_of_[current_.positions[r]] = static_cast<int>(r);
  }
}

void MimCodingModel::predict(u32 flat, const RevealedView&, std::span<double> out) {
  require(flat < row_of_.size() && row_of_[flat] >= 0,
          "mim coding: predict() for a position outside the current group");
  const auto row = current_.probs.row(row_of_[flat]);
  for (u32 s = 0; s < m_.V; ++s) out[s] = row(s);
}

VarCodingModel::VarCodingModel(const VarModel& m)
    : m_(checkpoint_round_trip(m)), hash_(m_.checkpoint_hash()) {}

void VarCodingModel::begin_group(int k, const RevealedView& view, const MaskSchedule& sched) {
  require(k >= 1 && k < sched.group_count(), "var coding: bad group index");
  // Rebuild the truncated sequence from the revealed prefix; identical on
  // encoder and decoder by construction.
  TokenGrid prefix(view.h(), view.w(), view.vocab());
  for (int j = 0; j < k; ++j) {
    for (u32 flat : sched.groups[static_cast<std::size_t>(j)]) {
      prefix.indices[flat] = view.at(flat);
    }
  }
  current_ = var_forward(m_, sched, prefix, k);
  row_of_.assign(view.positions(), -1);
  for (std::size_t r = 0; r < current_.positions.size(); ++r) {
    row_of_[current_.positions[r]] = static_cast<int>(r);
  }
}

void VarCodingModel::predict(u32 flat, const RevealedView&, std::span<double> out) {
  require(flat < row_of_.size() && row_of_[flat] >= 0,
          "var coding: predict() for a position outside the current group");
  const auto row = current_.probs.row(row_of_[flat]);
  for (u32 s = 0; s < m_.V; ++s) out[s] = row(s);
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

void write_transformer(ByteWriter& w, const nn::Transformer& net) {
  for (const nn::Param* p : net.params()) {
    w.put_u32(static_cast<u32>(p->value.rows()));
    w.put_u32(static_cast<u32>(p->value.cols()));
    for (Eigen::Index j = 0; j < p->value.cols(); ++j) {
      for (Eigen::Index i = 0; i < p->value.rows(); ++i) {
        w.put_f32(static_cast<float>(p->value(i, j)));
      }
    }
  }
}

void read_transformer(ByteReader& r, nn::Transformer& net) {
  for (nn::Param* p : net.params()) {
    u32 rows = r.get_u32();
    u32 cols = r.get_u32();
    require(rows == static_cast<u32>(p->value.rows()) && cols == static_cast<u32>(p->value.cols()),
            "model checkpoint: tensor shape mismatch for ", p->name);
    for (u32 j = 0; j < cols; ++j) {
      for (u32 i = 0; i < rows; ++i) {
        p->value(i, j) = static_cast<double>(r.get_f32());
      }
    }
  }
}

}  // namespace

std::vector<u8> serialize_mim(const MimModel& m) {
  ByteWriter w;
  w.put_magic("PCVM");
  w.put_u8(1);
  w.put_u8(kModelKindMim);
  w.put_u16(static_cast<u16>(m.h));
  w.put_u16(static_cast<u16>(m.w));
  w.put_u32(m.V);
  const auto& cfg = m.net.config();
  w.put_u16(static_cast<u16>(cfg.d_model));
  w.put_u16(static_cast<u16>(cfg.n_layers));
  w.put_u16(static_cast<u16>(cfg.n_heads));
  write_transformer(w, m.net);
  return w.take();
}

MimModel parse_mim(std::span<const u8> bytes) {
  ByteReader r(bytes);
  r.expect_magic("PCVM", "model checkpoint");
  require(r.get_u8() == 1, "model checkpoint: unsupported version");
  require(r.get_u8() == kModelKindMim, "model checkpoint: not a masked-token model");
  int h = r.get_u16();
  int w = r.get_u16();
  u32 V = r.get_u32();
  int d_model = r.get_u16();
  int n_layers = r.get_u16();
  int n_heads = r.get_u16();
  MimModel m = MimModel::create(h, w, V, 0, d_model, n_layers, n_heads);
  read_transformer(r, m.net);
  return m;
}

std::vector<u8> serialize_var(const VarModel& m) {
  ByteWriter w;
  w.put_magic("PCVM");
  w.put_u8(1);
  w.put_u8(kModelKindVar);
  w.put_u16(static_cast<u16>(m.h));
  w.put_u16(static_cast<u16>(m.w));
  w.put_u32(m.V);
  w.put_u16(static_cast<u16>(m.max_groups));
  const auto& cfg = m.net.config();
  w.put_u16(static_cast<u16>(cfg.d_model));
  w.put_u16(static_cast<u16>(cfg.n_layers));
  w.put_u16(static_cast<u16>(cfg.n_heads));
  write_transformer(w, m.net);
  return w.take();
}

VarModel parse_var(std::span<const u8> bytes) {
  ByteReader r(bytes);
  r.expect_magic("PCVM", "model checkpoint");
  require(r.get_u8() == 1, "model checkpoint: unsupported version");
  require(r.get_u8() == kModelKindVar, "model checkpoint: not a group-causal model");
  int h = r.get_u16();
  int w = r.get_u16();
  u32 V = r.get_u32();
  int max_groups = r.get_u16();
  int d_model = r.get_u16();
  int n_layers = r.get_u16();
  int n_heads = r.get_u16();
  VarModel m = VarModel::create(h, w, V, max_groups, 0, d_model, n_layers, n_heads);
  read_transformer(r, m.net);
  return m;
}

void save_checkpoint(std::span<const u8> bytes, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  require(f.good(), "save_checkpoint: cannot open ", path);
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  require(f.good(), "save_checkpoint: write failed for ", path);
}

std::vector<u8> load_checkpoint_bytes(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  require(f.good(), "load_checkpoint: cannot open ", path);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

u8 checkpoint_kind(std::span<const u8> bytes) {
  ByteReader r(bytes);
  r.expect_magic("PCVM", "model checkpoint");
  require(r.get_u8() == 1, "model checkpoint: unsupported version");
  return r.get_u8();
}

MimModel checkpoint_round_trip(const MimModel& m) { return parse_mim(serialize_mim(m)); }
VarModel checkpoint_round_trip(const VarModel& m) { return parse_var(serialize_var(m)); }

}  // namespace pcv2
