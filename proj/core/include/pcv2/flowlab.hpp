#pragma once

#include <optional>
#include <span>
#include <vector>

#include "pcv2/nn.hpp"
#include "pcv2/rng.hpp"

namespace pcv2 {

using nn::Vec;

struct FlowConfig {
  double sigma_min = 1e-5;
  int dim = 2;      // data dimension
  int zl_dim = 4;   // local conditioning
  int zg_dim = 2;   // global conditioning
  int steps = 20;   // sampler steps
  double lambda = 3.0;
  double zg_drop = 0.10;
  int hidden = 64;
};

struct FlowState {
  double t = 0.0;
  Vec x;
  Vec z_local;
  std::optional<Vec> z_global;  // absent: unconditional branch
};

// Straight-path conditional flow: x_t = (1 - (1-sigma_min) t) x0 + t x1.
Vec cond_flow(const Vec& x0, const Vec& x1, double t, double sigma_min);

// Matching target field u_t(x | x1) = (x1 - (1-sigma_min) x) /
// (1 - (1-sigma_min) t); singular only at sigma_min = 0, t = 1.
Vec target_field(const Vec& x, const Vec& x1, double t, double sigma_min);

// v_uncond + lambda * (v_cond - v_uncond).
Vec cfg_combine(const Vec& v_uncond, const Vec& v_cond, double lambda);

// MLP regressor of the vector field: input (x, t, z_local, z_global), two
// tanh hidden layers, linear output of size dim. A learned null embedding
// stands in for dropped global conditioning.
class VectorFieldModel {
 public:
  VectorFieldModel() = default;
  VectorFieldModel(const FlowConfig& cfg, u64 seed);

  const FlowConfig& config() const { return cfg_; }

  Vec forward(const Vec& x, double t, const Vec& z_local,
              const std::optional<Vec>& z_global) const;

  // Squared-error loss against `target`; accumulates parameter gradients
  // (scaled) when backward is set.
  double loss_and_backward(const Vec& x, double t, const Vec& z_local,
                           const std::optional<Vec>& z_global, const Vec& target,
                           double grad_scale, bool backward);

  std::vector<nn::Param*> params();
  u64 checkpoint_hash() const;

  std::vector<u8> serialize() const;
  static VectorFieldModel parse(std::span<const u8> bytes);

 private:
  Vec assemble_input(const Vec& x, double t, const Vec& z_local,
                     const std::optional<Vec>& z_global) const;

  FlowConfig cfg_;
  nn::Param w1_, b1_, w2_, b2_, w3_, b3_, null_zg_;
};

struct FlowSample {
  Vec x1;
  Vec z_local;
  Vec z_global;
};

// Conditional flow-matching objective: t ~ U[0,1], x0 ~ N(0,I), global
// conditioning dropped with probability cfg.zg_drop, squared error of the
// model field against x1 - (1-sigma_min) x0. Deterministic under seed.
double cfm_plus_loss(VectorFieldModel& model, std::span<const FlowSample> batch,
                     const FlowConfig& cfg, u64 seed, double grad_scale = 1.0,
                     bool backward = false);

// Explicit Euler from a seeded N(0,I) draw at t=0 to t=1, with per-step CFG
// when lambda != 1 and global conditioning is present.
Vec ode_sample(const VectorFieldModel& model, const Vec& z_local,
               const std::optional<Vec>& z_global, int steps, double lambda, u64 seed);

struct FlowTrainResult {
  std::vector<double> curve;
  double final_loss = 0.0;
};

FlowTrainResult train_toy_decoder(VectorFieldModel& model, std::span<const FlowSample> dataset,
                                  const FlowConfig& cfg, u64 seed, int steps, int batch,
                                  double lr);

void save_flow_model(const VectorFieldModel& m, const std::string& path);
VectorFieldModel load_flow_model(const std::string& path);

}  // namespace pcv2
