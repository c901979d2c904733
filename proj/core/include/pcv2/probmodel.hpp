#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "pcv2/nn.hpp"
#include "pcv2/rng.hpp"
#include "pcv2/schedules.hpp"
#include "pcv2/tokens.hpp"

namespace pcv2 {

// Per-position distributions over the V symbols; the handoff between
// probability models and the coder. Rows align with `positions`.
struct CategoricalField {
  u32 V = 0;
  std::vector<u32> positions;  // flat indices
  nn::Mat probs;               // positions.size() x V

  // Minimum probability any field row may carry after the floor mix.
  static double p_floor(u32 V) { return 1.0 / (static_cast<double>(V) * 65536.0); }
};

CategoricalField uniform_field(std::vector<u32> positions, u32 V);

// Read access to a partially coded grid. Every model prediction goes through
// this view; touching a position that has not been coded yet throws, which
// is what makes causality violations loud instead of silent.
class RevealedView {
 public:
  RevealedView(const TokenGrid& grid, const std::vector<u8>& revealed)
      : grid_(&grid), revealed_(&revealed) {}

  u32 at(u32 flat) const {
    require((*revealed_)[flat], "causality violation: position ", flat,
            " read before it was coded");
    return grid_->indices[flat];
  }
  bool is_revealed(u32 flat) const { return (*revealed_)[flat] != 0; }
  int h() const { return grid_->h; }
  int w() const { return grid_->w; }
  u32 vocab() const { return grid_->V; }
  std::size_t positions() const { return grid_->positions(); }

 private:
  const TokenGrid* grid_;
  const std::vector<u8>* revealed_;
};

// Flat index of the revealed position nearest to `flat` (squared Euclidean
// distance on the grid, ties to the smallest raster index); the "upsampled
// representation" primitive. Requires at least one revealed position.
u32 nearest_revealed(const RevealedView& view, u32 flat);

// Conditional categorical model as the coder drives it: one stream at a
// time, group by group, symbol by symbol. Implementations must be causal --
// predictions may depend only on revealed positions.
class EntropyModel {
 public:
  virtual ~EntropyModel() = default;

  virtual std::string name() const = 0;
  virtual u32 vocab() const = 0;

  // Hash binding the bitstream to a model checkpoint; 0 when there is no
  // checkpoint to drift from (uniform, unprimed counting).
  virtual u64 checkpoint_hash() const { return 0; }

  // Called once per stream before any prediction; resets adaptive state.
  virtual void start_stream(const MaskSchedule& sched) { (void)sched; }

  // Called when coding of group k (0-based, k >= 1) begins. Group 0 is
  // always priced uniformly by the coder, so it never reaches the model.
  virtual void begin_group(int k, const RevealedView& view, const MaskSchedule& sched) {
    (void)k;
    (void)view;
    (void)sched;
  }

  // Fill `out` (size V) with the distribution for `flat`.
  virtual void predict(u32 flat, const RevealedView& view, std::span<double> out) = 0;

  // Called after each symbol is coded or sampled, before it is revealed.
  virtual void observe(u32 flat, u32 symbol, const RevealedView& view) {
    (void)flat;
    (void)symbol;
    (void)view;
  }
};

class UniformModel final : public EntropyModel {
 public:
  explicit UniformModel(u32 V) : V_(V) { require(V >= 2, "uniform model: V must be >= 2"); }
  std::string name() const override { return "uniform"; }
  u32 vocab() const override { return V_; }
  void predict(u32, const RevealedView&, std::span<double> out) override;

 private:
  u32 V_;
};

// Krichevsky-Trofimov add-half estimator over one count row.
struct KtRow {
  static double predict(std::span<const u32> counts, u32 total, u32 symbol) {
    const double v = static_cast<double>(counts.size());
    return (static_cast<double>(counts[symbol]) + 0.5) / (static_cast<double>(total) + v / 2.0);
  }
};

// Adaptive KT model conditioned on the token value of the nearest revealed
// position, split by adjacency class (squared distance <= 2 or farther),
// with one extra empty-grid context. Optionally primed on a corpus; coding
// always starts from the primed snapshot, so streams stay independent and
// decodable in any order.
class CountingModel final : public EntropyModel {
 public:
  explicit CountingModel(u32 V);

  std::string name() const override { return primed_ ? "counting-primed" : "counting"; }
  u32 vocab() const override { return V_; }
  u64 checkpoint_hash() const override;
  void start_stream(const MaskSchedule& sched) override;
  void predict(u32 flat, const RevealedView& view, std::span<double> out) override;
  void observe(u32 flat, u32 symbol, const RevealedView& view) override;

  // Accumulates (context, symbol) statistics by replaying the schedule over
  // each grid, exactly as coding would.
  void prime(std::span<const TokenGrid> grids, const MaskSchedule& sched);

  u32 context_of(u32 flat, const RevealedView& view) const;

  std::vector<u8> serialize() const;
  static CountingModel parse(std::span<const u8> bytes);

 private:
  std::span<const u32> row(std::vector<u32>& table, u32 ctx) const;

  u32 V_;
  bool primed_ = false;
  std::vector<u32> base_counts_;  // (V+1) x V
  std::vector<u32> base_totals_;  // V+1
  std::vector<u32> counts_;
  std::vector<u32> totals_;
};

// All trainable models share one optimizer configuration. Deterministic
// given `seed`.
struct TrainConfig {
  u64 seed = 1;
  double lr = 3e-4;
  int steps = 500;
  int batch = 8;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  // Upper bound 0.995 rather than 0.95: group 2 of a deep power-law
  // schedule is coded with ~99% of positions still masked, and the model
  // has to have seen that regime in training.
  double mask_ratio_lo = 0.05;
  double mask_ratio_hi = 0.995;
};

// Bidirectional masked-token transformer: revealed positions carry their
// token embedding, masked positions the learned mask embedding, and the
// model predicts distributions at the masked positions.
struct MimModel {
  int h = 0;
  int w = 0;
  u32 V = 0;
  nn::Transformer net;

  static MimModel create(int h, int w, u32 V, u64 seed, int d_model = 64, int n_layers = 2,
                         int n_heads = 4);

  u64 checkpoint_hash() const;
};

CategoricalField mim_forward(const MimModel& m, const TokenGrid& grid,
                             const std::vector<u8>& revealed);

// Rows restricted to `targets`; used by the coding adapter.
CategoricalField mim_forward_at(const MimModel& m, const RevealedView& view,
                                std::span<const u32> targets);

// Floored-softmax cross-entropy at the masked positions of one grid.
// Accumulates gradients scaled by grad_scale when backward is set.
double mim_masked_loss(MimModel& m, const TokenGrid& grid, const std::vector<u8>& revealed,
                       double grad_scale, bool backward);

class MimTrainer {
 public:
  MimTrainer(MimModel& m, TrainConfig cfg);
  // One Adam step over an explicit batch; returns the batch loss.
  double step(std::span<const TokenGrid> batch);
  // cfg.steps steps over batches sampled from the corpus.
  double train(std::span<const TokenGrid> corpus, std::vector<double>* curve = nullptr);

 private:
  MimModel& model_;
  TrainConfig cfg_;
  nn::AdamOptimizer opt_;
  CounterRng rng_;
};

// Block-causal transformer over schedule groups. The sequence is the grid in
// coding order; the input embedding of a group-k position is the token of
// its nearest already-revealed position (mask embedding for group 1), and
// attention is restricted to groups <= k. Predictions for group k therefore
// depend only on groups before it.
struct VarModel {
  int h = 0;
  int w = 0;
  u32 V = 0;
  int max_groups = 0;
  nn::Transformer net;

  static VarModel create(int h, int w, u32 V, int max_groups, u64 seed, int d_model = 64,
                         int n_layers = 2, int n_heads = 4);

  u64 checkpoint_hash() const;
};

// Distribution over group k (0-based, k >= 1) given the tokens of groups
// 0..k-1 in `grid`. Later groups are never read.
CategoricalField var_forward(const VarModel& m, const MaskSchedule& sched, const TokenGrid& grid,
                             int k);

// Cross-entropy over the predictions of groups 1..K-1 (group 0 carries no
// loss).
double var_schedule_loss(VarModel& m, const MaskSchedule& sched, const TokenGrid& grid,
                         double grad_scale, bool backward);

class VarTrainer {
 public:
  VarTrainer(VarModel& m, MaskSchedule sched, TrainConfig cfg);
  double step(std::span<const TokenGrid> batch);
  double train(std::span<const TokenGrid> corpus, std::vector<double>* curve = nullptr);

 private:
  VarModel& model_;
  MaskSchedule sched_;
  TrainConfig cfg_;
  nn::AdamOptimizer opt_;
  CounterRng rng_;
};

// Coding adapters. Each one applies the checkpoint f32 round trip on
// construction, so coding always runs on the exact weights a decoder would
// load -- regardless of whether the caller hands over a freshly trained
// model or one read back from disk.
class MimCodingModel final : public EntropyModel {
 public:
  explicit MimCodingModel(const MimModel& m);
  std::string name() const override { return "mim"; }
  u32 vocab() const override { return m_.V; }
  u64 checkpoint_hash() const override { return hash_; }
  void begin_group(int k, const RevealedView& view, const MaskSchedule& sched) override;
  void predict(u32 flat, const RevealedView& view, std::span<double> out) override;

 private:
  MimModel m_;
  u64 hash_;
  CategoricalField current_;
  std::vector<int> row_of_;
};

class VarCodingModel final : public EntropyModel {
 public:
  explicit VarCodingModel(const VarModel& m);
  std::string name() const override { return "var"; }
  u32 vocab() const override { return m_.V; }
  u64 checkpoint_hash() const override { return hash_; }
  void begin_group(int k, const RevealedView& view, const MaskSchedule& sched) override;
  void predict(u32 flat, const RevealedView& view, std::span<double> out) override;

 private:
  VarModel m_;
  u64 hash_;
  CategoricalField current_;
  std::vector<int> row_of_;
};

// Total bits the coder's quantized contract assigns to `grid` under the
// schedule: group 0 at the quantized uniform cost (exactly log2 V per
// symbol for power-of-two V), later groups at -log2 of their quantized
// model probability. Declared here, implemented with the coder.
double model_rate(EntropyModel& model, const TokenGrid& grid, const MaskSchedule& sched);

// Checkpoint container ("PCVM"): magic, version u8, kind u8, hyperparameter
// block, then f32 LE tensors in parameter-declaration order. Loading gives
// back exactly the values coding must use; after a save/load round trip
// encoder and decoder weights are bit-identical.
inline constexpr u8 kModelKindMim = 0;
inline constexpr u8 kModelKindVar = 1;
inline constexpr u8 kModelKindFlow = 2;
inline constexpr u8 kModelKindCounting = 3;

std::vector<u8> serialize_mim(const MimModel& m);
MimModel parse_mim(std::span<const u8> bytes);
std::vector<u8> serialize_var(const VarModel& m);
VarModel parse_var(std::span<const u8> bytes);

void save_checkpoint(std::span<const u8> bytes, const std::string& path);
std::vector<u8> load_checkpoint_bytes(const std::string& path);
u8 checkpoint_kind(std::span<const u8> bytes);

// Applies the f32 round trip a checkpoint performs without touching disk;
// call before coding with a freshly trained model so the weights match what
// a decoder will load.
MimModel checkpoint_round_trip(const MimModel& m);
VarModel checkpoint_round_trip(const VarModel& m);

}  // namespace pcv2
