#include <doctest.h>

#include <cmath>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <utility>

#include "pcv2/flowlab.hpp"
#include "pcv2/probmodel.hpp"
#include "pcv2/rng.hpp"

using namespace pcv2;

namespace {

TokenGrid random_grid(int h, int w, u32 V, u64 seed) {
  TokenGrid g(h, w, V);
  CounterRng rng(seed);
  for (auto& v : g.indices) v = static_cast<u32>(rng.next_below(V));
  return g;
}

// Layer type from a parameter name; each type must pass >= 20 informative
// central-difference comparisons.
std::string layer_type(const std::string& name) {
  if (name.find("emb") != std::string::npos) return "embedding";
  if (name.find("ln") != std::string::npos) return "layernorm";
  if (name.find("qkv") != std::string::npos || name.find("proj") != std::string::npos)
    return "attention";
  if (name.find("fc") != std::string::npos) return "mlp";
  if (name.find("head") != std::string::npos) return "head";
  return "other";
}

struct GradCheckStats {
  std::map<std::string, int> informative;
  double worst_rel_err = 0.0;
};

// Central finite differences against the analytic gradient. Samples unique
// entries from every tensor, then keeps sampling types that are short of 20
// informative comparisons (entries whose gradient is structurally zero, like
// attention key biases, do not count).
GradCheckStats grad_check(std::vector<nn::Param*> params,
                          const std::function<double(bool)>& loss_fn, u64 seed,
                          int per_tensor = 8, double eps = 1e-5) {
  for (nn::Param* p : params) p->grad.setZero();
  loss_fn(true);  // fill analytic gradients

  GradCheckStats stats;
  CounterRng rng(seed);
  std::map<const nn::Param*, std::set<std::pair<Eigen::Index, Eigen::Index>>> visited;

  auto check_entry = [&](nn::Param* p) {
    const auto rows = p->value.rows();
    const auto cols = p->value.cols();
    Eigen::Index i = static_cast<Eigen::Index>(rng.next_below(static_cast<u64>(rows)));
    Eigen::Index j = static_cast<Eigen::Index>(rng.next_below(static_cast<u64>(cols)));
    if (!visited[p].insert({i, j}).second) return;
    double saved = p->value(i, j);
    p->value(i, j) = saved + eps;
    double lp = loss_fn(false);
    p->value(i, j) = saved - eps;
    double lm = loss_fn(false);
    p->value(i, j) = saved;
    double numeric = (lp - lm) / (2.0 * eps);
    double analytic = p->grad(i, j);
    double denom = std::max({std::abs(numeric), std::abs(analytic), 1e-8});
    if (std::abs(numeric) < 1e-10 && std::abs(analytic) < 1e-10) return;
    double rel = std::abs(numeric - analytic) / denom;
    stats.worst_rel_err = std::max(stats.worst_rel_err, rel);
    stats.informative[layer_type(p->name)]++;
    CHECK_MESSAGE(rel < 1e-3, p->name, "(", i, ",", j, "): analytic ", analytic, " numeric ",
                  numeric);
  };

  for (nn::Param* p : params) {
    for (int pick = 0; pick < per_tensor; ++pick) check_entry(p);
  }
  for (int round = 0; round < 60; ++round) {
    bool deficit = false;
    for (nn::Param* p : params) {
      if (stats.informative[layer_type(p->name)] < 20) {
        deficit = true;
        for (int pick = 0; pick < 4; ++pick) check_entry(p);
      }
    }
    if (!deficit) break;
  }
  return stats;
}

}  // namespace

TEST_CASE("mim gradients match central differences per layer type") {
  const u32 V = 6;
  MimModel m = MimModel::create(3, 4, V, 99, 16, 2, 4);
  // A couple of optimizer steps so no tensor sits at its zero init.
  auto warm = random_grid(3, 4, V, 1);
  TrainConfig cfg;
  cfg.steps = 3;
  cfg.batch = 1;
  cfg.lr = 1e-2;
  MimTrainer trainer(m, cfg);
  std::vector<TokenGrid> corpus{warm};
  trainer.train(corpus);

  TokenGrid grid = random_grid(3, 4, V, 2);
  std::vector<u8> revealed(grid.positions(), 0);
  for (int i : {0, 2, 5, 7, 11}) revealed[static_cast<std::size_t>(i)] = 1;

  auto loss_fn = [&](bool backward) {
    return mim_masked_loss(m, grid, revealed, 1.0, backward);
  };
  auto stats = grad_check(m.net.params(), loss_fn, 1234);
  for (const char* type : {"embedding", "layernorm", "attention", "mlp", "head"}) {
    CHECK_MESSAGE(stats.informative[type] >= 20, "layer type ", type, " had only ",
                  stats.informative[type], " informative checks");
  }
}

TEST_CASE("var gradients match central differences including scale embeddings") {
  const u32 V = 5;
  MaskSchedule sched = implicit_var_schedule(4, 4, std::vector<int>{2, 4});
  VarModel m = VarModel::create(4, 4, V, sched.group_count(), 7, 16, 2, 4);
  std::vector<TokenGrid> corpus{random_grid(4, 4, V, 3)};
  TrainConfig cfg;
  cfg.steps = 3;
  cfg.batch = 1;
  cfg.lr = 1e-2;
  VarTrainer trainer(m, sched, cfg);
  trainer.train(corpus);

  TokenGrid grid = random_grid(4, 4, V, 4);
  auto loss_fn = [&](bool backward) {
    return var_schedule_loss(m, sched, grid, 1.0, backward);
  };
  auto stats = grad_check(m.net.params(), loss_fn, 4321, 10);
  CHECK(stats.informative["embedding"] >= 20);  // includes scale_emb rows
  CHECK(stats.informative["attention"] >= 20);
  CHECK(stats.informative["mlp"] >= 20);
}

TEST_CASE("flow model gradients match central differences") {
  FlowConfig cfg;
  cfg.dim = 2;
  cfg.zl_dim = 3;
  cfg.zg_dim = 2;
  cfg.hidden = 16;
  VectorFieldModel m(cfg, 88);

  CounterRng rng(5);
  std::vector<FlowSample> batch;
  for (int i = 0; i < 4; ++i) {
    FlowSample s;
    s.x1 = Vec::NullaryExpr(cfg.dim, [&](Eigen::Index) { return rng.next_gaussian(); });
    s.z_local = Vec::NullaryExpr(cfg.zl_dim, [&](Eigen::Index) { return rng.next_gaussian(); });
    s.z_global = Vec::NullaryExpr(cfg.zg_dim, [&](Eigen::Index) { return rng.next_gaussian(); });
    batch.push_back(s);
  }

  SUBCASE("conditional branch") {
    auto loss_fn = [&](bool backward) {
      return cfm_plus_loss(m, batch, cfg, 42, 1.0, backward);
    };
    auto stats = grad_check(m.params(), loss_fn, 77, 12);
    CHECK(stats.informative["other"] >= 20);  // w1/b1/w2/b2/w3/b3
  }

  SUBCASE("dropped conditioning trains the null embedding") {
    FlowConfig drop_cfg = cfg;
    drop_cfg.zg_drop = 1.0;  // every sample uses the null embedding
    auto loss_fn = [&](bool backward) {
      return cfm_plus_loss(m, batch, drop_cfg, 42, 1.0, backward);
    };
    for (nn::Param* p : m.params()) p->grad.setZero();
    loss_fn(true);
    nn::Param* null_p = nullptr;
    for (nn::Param* p : m.params()) {
      if (p->name == "null_zg") null_p = p;
    }
    REQUIRE(null_p != nullptr);
    CHECK(null_p->grad.cwiseAbs().maxCoeff() > 0.0);

    auto stats = grad_check(m.params(), loss_fn, 78, 12);
    CHECK(stats.informative["other"] >= 20);
  }
}
