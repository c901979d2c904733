#include "pcv2/flowlab.hpp"

#include <cmath>
#include <fstream>

#include "pcv2/bytes.hpp"
#include "pcv2/hash.hpp"

namespace pcv2 {

Vec cond_flow(const Vec& x0, const Vec& x1, double t, double sigma_min) {
  require(x0.size() == x1.size(), "cond_flow: dimension mismatch");
  require(t >= 0.0 && t <= 1.0, "cond_flow: t must be in [0,1]");
  return (1.0 - (1.0 - sigma_min) * t) * x0 + t * x1;
}

Vec target_field(const Vec& x, const Vec& x1, double t, double sigma_min) {
  require(x.size() == x1.size(), "target_field: dimension mismatch");
  double denom = 1.0 - (1.0 - sigma_min) * t;
  require(denom > 0.0, "target_field: singular at t=", t, " with sigma_min=", sigma_min);
  return (x1 - (1.0 - sigma_min) * x) / denom;
}

Vec cfg_combine(const Vec& v_uncond, const Vec& v_cond, double lambda) {
  require(v_uncond.size() == v_cond.size(), "cfg_combine: dimension mismatch");
  // The endpoint identities hold exactly, not just to rounding.
  if (lambda == 0.0) return v_uncond;
  if (lambda == 1.0) return v_cond;
  return v_uncond + lambda * (v_cond - v_uncond);
}

VectorFieldModel::VectorFieldModel(const FlowConfig& cfg, u64 seed) : cfg_(cfg) {
  require(cfg.dim >= 1 && cfg.hidden >= 1, "flow model: bad dimensions");
  require(cfg.sigma_min >= 0.0 && cfg.sigma_min < 1.0, "flow model: sigma_min must be in [0,1)");
  const int in = cfg.dim + 1 + cfg.zl_dim + cfg.zg_dim;
  CounterRng rng(seed);
  auto init = [&](nn::Param& p, int rows, int cols, const char* name, double stddev) {
    p.init_zero(rows, cols, name);
    for (int j = 0; j < cols; ++j) {
      for (int i = 0; i < rows; ++i) p.value(i, j) = stddev * rng.next_gaussian();
    }
  };
  init(w1_, cfg.hidden, in, "w1", 1.0 / std::sqrt(static_cast<double>(in)));
  b1_.init_zero(cfg.hidden, 1, "b1");
  init(w2_, cfg.hidden, cfg.hidden, "w2", 1.0 / std::sqrt(static_cast<double>(cfg.hidden)));
  b2_.init_zero(cfg.hidden, 1, "b2");
  init(w3_, cfg.dim, cfg.hidden, "w3", 1.0 / std::sqrt(static_cast<double>(cfg.hidden)));
  b3_.init_zero(cfg.dim, 1, "b3");
  init(null_zg_, cfg.zg_dim, 1, "null_zg", 0.02);
}

Vec VectorFieldModel::assemble_input(const Vec& x, double t, const Vec& z_local,
                                     const std::optional<Vec>& z_global) const {
  require(x.size() == cfg_.dim, "flow forward: x dimension mismatch");
  require(z_local.size() == cfg_.zl_dim, "flow forward: z_local dimension mismatch");
  Vec in(cfg_.dim + 1 + cfg_.zl_dim + cfg_.zg_dim);
  in.head(cfg_.dim) = x;
  in(cfg_.dim) = t;
  in.segment(cfg_.dim + 1, cfg_.zl_dim) = z_local;
  if (z_global.has_value()) {
    require(z_global->size() == cfg_.zg_dim, "flow forward: z_global dimension mismatch");
    in.tail(cfg_.zg_dim) = *z_global;
  } else {
    in.tail(cfg_.zg_dim) = null_zg_.value.col(0);
  }
  return in;
}

Vec VectorFieldModel::forward(const Vec& x, double t, const Vec& z_local,
                              const std::optional<Vec>& z_global) const {
  Vec in = assemble_input(x, t, z_local, z_global);
  Vec h1 = (w1_.value * in + b1_.value.col(0)).array().tanh();
  Vec h2 = (w2_.value * h1 + b2_.value.col(0)).array().tanh();
  Vec v = w3_.value * h2 + b3_.value.col(0);
  require(v.allFinite(), "flow forward: non-finite output");
  return v;
}

double VectorFieldModel::loss_and_backward(const Vec& x, double t, const Vec& z_local,
                                           const std::optional<Vec>& z_global, const Vec& target,
                                           double grad_scale, bool backward) {
  Vec in = assemble_input(x, t, z_local, z_global);
  Vec h1 = (w1_.value * in + b1_.value.col(0)).array().tanh();
  Vec h2 = (w2_.value * h1 + b2_.value.col(0)).array().tanh();
  Vec v = w3_.value * h2 + b3_.value.col(0);
  Vec err = v - target;
  double loss = err.squaredNorm();
  require(std::isfinite(loss), "flow loss: non-finite value");
  if (!backward) return loss;

  Vec dv = 2.0 * grad_scale * err;
  w3_.grad += dv * h2.transpose();
  b3_.grad.col(0) += dv;
  Vec dh2 = w3_.value.transpose() * dv;
  Vec da2 = dh2.cwiseProduct((1.0 - h2.array().square()).matrix());
  w2_.grad += da2 * h1.transpose();
  b2_.grad.col(0) += da2;
  Vec dh1 = w2_.value.transpose() * da2;
  Vec da1 = dh1.cwiseProduct((1.0 - h1.array().square()).matrix());
  w1_.grad += da1 * in.transpose();
  b1_.grad.col(0) += da1;
  if (!z_global.has_value()) {
    Vec din = w1_.value.transpose() * da1;
    null_zg_.grad.col(0) += din.tail(cfg_.zg_dim);
  }
  return loss;
}

std::vector<nn::Param*> VectorFieldModel::params() {
  return {&w1_, &b1_, &w2_, &b2_, &w3_, &b3_, &null_zg_};
}

u64 VectorFieldModel::checkpoint_hash() const {
  auto bytes = serialize();
  return fnv1a64(bytes.data(), bytes.size());
}

double cfm_plus_loss(VectorFieldModel& model, std::span<const FlowSample> batch,
                     const FlowConfig& cfg, u64 seed, double grad_scale, bool backward) {
  require(!batch.empty(), "cfm loss: empty batch");
  CounterRng rng(seed);
  double total = 0.0;
  const double scale = grad_scale / static_cast<double>(batch.size());
  for (const auto& sample : batch) {
    double t = rng.next_double();
    Vec x0(cfg.dim);
    for (int i = 0; i < cfg.dim; ++i) x0(i) = rng.next_gaussian();
    bool drop = rng.next_double() < cfg.zg_drop;
    Vec xt = cond_flow(x0, sample.x1, t, cfg.sigma_min);
    Vec target = sample.x1 - (1.0 - cfg.sigma_min) * x0;
    std::optional<Vec> zg;
    if (!drop) zg = sample.z_global;
    total += model.loss_and_backward(xt, t, sample.z_local, zg, target, scale, backward);
  }
  double loss = total / static_cast<double>(batch.size());
  require(std::isfinite(loss), "cfm loss: diverged (NaN)");
  return loss;
}

Vec ode_sample(const VectorFieldModel& model, const Vec& z_local,
               const std::optional<Vec>& z_global, int steps, double lambda, u64 seed) {
  require(steps >= 1, "ode_sample: steps must be >= 1");
  const auto& cfg = model.config();
  CounterRng rng(seed);
  Vec x(cfg.dim);
  for (int i = 0; i < cfg.dim; ++i) x(i) = rng.next_gaussian();

  const double dt = 1.0 / static_cast<double>(steps);
  for (int s = 0; s < steps; ++s) {
    double t = static_cast<double>(s) * dt;
    Vec v;
    if (z_global.has_value() && lambda != 1.0) {
      Vec v_uncond = model.forward(x, t, z_local, std::nullopt);
      Vec v_cond = model.forward(x, t, z_local, z_global);
      v = cfg_combine(v_uncond, v_cond, lambda);
    } else {
      v = model.forward(x, t, z_local, z_global);
    }
    x += dt * v;
    require(x.allFinite(), "ode_sample: non-finite state at step ", s);
  }
  return x;
}

FlowTrainResult train_toy_decoder(VectorFieldModel& model, std::span<const FlowSample> dataset,
                                  const FlowConfig& cfg, u64 seed, int steps, int batch,
                                  double lr) {
  require(!dataset.empty(), "train_toy_decoder: empty dataset");
  nn::AdamOptimizer opt(model.params(), lr);
  CounterRng rng(splitmix64(seed));
  FlowTrainResult result;
  std::vector<FlowSample> mini;
  for (int s = 0; s < steps; ++s) {
    mini.clear();
    for (int b = 0; b < batch; ++b) {
      mini.push_back(dataset[static_cast<std::size_t>(rng.next_below(dataset.size()))]);
    }
    opt.zero_grads();
    double loss = cfm_plus_loss(model, mini, cfg, rng.next_u64(), 1.0, true);
    opt.step();
    result.curve.push_back(loss);
    result.final_loss = loss;
  }
  return result;
}

std::vector<u8> VectorFieldModel::serialize() const {
  ByteWriter w;
  w.put_magic("PCVM");
  w.put_u8(1);
  w.put_u8(2);  // flow model kind
  w.put_u16(static_cast<u16>(cfg_.dim));
  w.put_u16(static_cast<u16>(cfg_.zl_dim));
  w.put_u16(static_cast<u16>(cfg_.zg_dim));
  w.put_u16(static_cast<u16>(cfg_.hidden));
  w.put_f32(static_cast<float>(cfg_.sigma_min));
  for (const nn::Param* p : const_cast<VectorFieldModel*>(this)->params()) {
    w.put_u32(static_cast<u32>(p->value.rows()));
    w.put_u32(static_cast<u32>(p->value.cols()));
    for (Eigen::Index j = 0; j < p->value.cols(); ++j) {
      for (Eigen::Index i = 0; i < p->value.rows(); ++i) {
        w.put_f32(static_cast<float>(p->value(i, j)));
      }
    }
  }
  return w.take();
}

VectorFieldModel VectorFieldModel::parse(std::span<const u8> bytes) {
  ByteReader r(bytes);
  r.expect_magic("PCVM", "flow checkpoint");
  require(r.get_u8() == 1, "flow checkpoint: unsupported version");
  require(r.get_u8() == 2, "flow checkpoint: wrong model kind");
  FlowConfig cfg;
  cfg.dim = r.get_u16();
  cfg.zl_dim = r.get_u16();
  cfg.zg_dim = r.get_u16();
  cfg.hidden = r.get_u16();
  cfg.sigma_min = static_cast<double>(r.get_f32());
  VectorFieldModel m(cfg, 0);
  for (nn::Param* p : m.params()) {
    u32 rows = r.get_u32();
    u32 cols = r.get_u32();
    require(rows == static_cast<u32>(p->value.rows()) && cols == static_cast<u32>(p->value.cols()),
            "flow checkpoint: tensor shape mismatch for ", p->name);
    for (u32 j = 0; j < cols; ++j) {
      for (u32 i = 0; i < rows; ++i) p->value(i, j) = static_cast<double>(r.get_f32());
    }
  }
  return m;
}

void save_flow_model(const VectorFieldModel& m, const std::string& path) {
  auto bytes = m.serialize();
  std::ofstream f(path, std::ios::binary);
  require(f.good(), "save_flow_model: cannot open ", path);
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  require(f.good(), "save_flow_model: write failed");
}

VectorFieldModel load_flow_model(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  require(f.good(), "load_flow_model: cannot open ", path);
  std::vector<u8> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return VectorFieldModel::parse(bytes);
}

}  // namespace pcv2
