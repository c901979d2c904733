#pragma once

#include <Eigen/Dense>
#include <span>
#include <string>
#include <vector>

#include "pcv2/common.hpp"

namespace pcv2::nn {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

// Named parameter tensor with its gradient accumulator. Declared order is
// the checkpoint tensor order, so it must stay stable.
struct Param {
  std::string name;
  Mat value;
  Mat grad;

  void init_zero(Eigen::Index rows, Eigen::Index cols, std::string n) {
    name = std::move(n);
    value = Mat::Zero(rows, cols);
    grad = Mat::Zero(rows, cols);
  }
};

struct TransformerConfig {
  int input_rows = 0;  // token embedding rows; callers reserve extras (mask token)
  int vocab = 0;       // output classes
  int max_pos = 0;     // learned absolute position table size
  int max_scales = 0;  // group embedding rows; 0 disables the table
  int d_model = 64;
  int n_layers = 2;
  int n_heads = 4;
  int d_ff = 256;

  bool operator==(const TransformerConfig&) const = default;
};

// Per-forward caches needed by backward(). One instance per concurrent
// forward; the model itself stays const during inference.
struct Activations {
  int n = 0;
  std::vector<int> ids, pos, scales, allow;
  Mat x0;
  struct BlockCache {
    Mat x_in, ln1_hat, qkv, attn_out, proj_in, x_mid, ln2_hat, f1, gelu, x_out;
    Vec ln1_rstd, ln2_rstd;
    std::vector<Mat> att;  // per head, n x n attention weights
  };
  std::vector<BlockCache> blocks;
  Mat lnf_hat;
  Vec lnf_rstd;
  Mat logits;
};

// Pre-LN transformer encoder with a per-query prefix attention mask:
// query q may attend keys [0, allow[q]). Bidirectional attention is
// allow[q] == n; block-causal attention over ordered groups is
// allow[q] == end of q's group.
class Transformer {
 public:
  Transformer() = default;
  Transformer(const TransformerConfig& cfg, u64 init_seed);

  const TransformerConfig& config() const { return cfg_; }

  // logits is (n x vocab). scales may be empty when max_scales == 0.
  void forward(std::span<const int> ids, std::span<const int> pos, std::span<const int> scales,
               std::span<const int> allow, Activations& acts) const;

  // Cross-entropy with the coding-time probability floor, averaged over
  // loss_rows; accumulates parameter gradients scaled by `grad_scale`.
  double loss_and_backward(const Activations& acts, std::span<const int> loss_rows,
                           std::span<const u32> targets, double grad_scale, bool want_backward);

  // Softmax of a logits row with the floor mix applied; the exact
  // distribution the coder quantizes.
  static void probs_from_logits(const Eigen::Ref<const Eigen::RowVectorXd>& logits,
                                std::span<double> out);

  std::vector<Param*> params();
  std::vector<const Param*> params() const;
  void zero_grads();

 private:
  struct Block {
    Param ln1_g, ln1_b, w_qkv, b_qkv, w_proj, b_proj;
    Param ln2_g, ln2_b, w_fc1, b_fc1, w_fc2, b_fc2;
  };

  TransformerConfig cfg_;
  Param tok_emb_, pos_emb_, scale_emb_;
  std::vector<Block> blocks_;
  Param lnf_g_, lnf_b_, w_head_, b_head_;
};

// Coding-time probability floor: probabilities are mixed with uniform at
// eps = 2^-16, which guarantees min prob >= 1/(V * 2^16) and keeps rows
// summing to one exactly.
inline constexpr double kFloorEps = 1.0 / 65536.0;

class AdamOptimizer {
 public:
  AdamOptimizer(std::vector<Param*> params, double lr, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8);
  void step();
  void zero_grads();

 private:
  std::vector<Param*> params_;
  std::vector<Mat> m_, v_;
  double lr_, beta1_, beta2_, eps_;
  i64 t_ = 0;
};

}  // namespace pcv2::nn
