#include <doctest.h>

#include <cmath>

#include "pcv2/flowlab.hpp"

using namespace pcv2;

namespace {

Vec vec2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

Vec random_vec(int n, CounterRng& rng) {
  Vec v(n);
  for (int i = 0; i < n; ++i) v(i) = rng.next_gaussian();
  return v;
}

}  // namespace

TEST_CASE("cond_flow endpoints") {
  CounterRng rng(1);
  Vec x0 = random_vec(3, rng), x1 = random_vec(3, rng);
  CHECK((cond_flow(x0, x1, 0.0, 0.2) - x0).norm() == 0.0);
  CHECK((cond_flow(x0, x1, 1.0, 0.0) - x1).norm() == 0.0);
  // sigma_min > 0 leaves a residual x0 component at t = 1.
  Vec at1 = cond_flow(x0, x1, 1.0, 0.25);
  CHECK((at1 - (0.25 * x0 + x1)).norm() < 1e-15);
}

TEST_CASE("path/field consistency: d/dt of the path equals the target field") {
  CounterRng rng(2);
  const double sigma_min = 1e-3;
  for (int trial = 0; trial < 50; ++trial) {
    Vec x0 = random_vec(4, rng), x1 = random_vec(4, rng);
    double t = 0.01 + 0.98 * rng.next_double();
    const double eps = 1e-6;
    Vec numeric =
        (cond_flow(x0, x1, t + eps, sigma_min) - cond_flow(x0, x1, t - eps, sigma_min)) /
        (2.0 * eps);
    Vec analytic = target_field(cond_flow(x0, x1, t, sigma_min), x1, t, sigma_min);
    CHECK((numeric - analytic).cwiseAbs().maxCoeff() < 1e-6);
  }
}

TEST_CASE("target field is constant along the path") {
  CounterRng rng(3);
  const double sigma_min = 1e-5;
  Vec x0 = random_vec(2, rng), x1 = random_vec(2, rng);
  Vec expect = x1 - (1.0 - sigma_min) * x0;
  for (double t : {0.0, 0.1, 0.37, 0.5, 0.78, 0.9999}) {
    Vec u = target_field(cond_flow(x0, x1, t, sigma_min), x1, t, sigma_min);
    CHECK((u - expect).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("target field at t=0 and its sigma_min=0 limit") {
  CounterRng rng(4);
  Vec x = random_vec(2, rng), x1 = random_vec(2, rng);
  Vec at0 = target_field(x, x1, 0.0, 0.3);
  CHECK((at0 - (x1 - 0.7 * x)).cwiseAbs().maxCoeff() < 1e-15);

  // Along the path the sigma_min = 0 field stays finite as t -> 1.
  Vec x0 = random_vec(2, rng);
  double t = 1.0 - 1e-9;
  Vec u = target_field(cond_flow(x0, x1, t, 0.0), x1, t, 0.0);
  CHECK((u - (x1 - x0)).cwiseAbs().maxCoeff() < 1e-5);

  CHECK_THROWS_AS(target_field(x, x1, 1.0, 0.0), Error);  // singular point
}

TEST_CASE("cfg_combine affine identities") {
  Vec a = vec2(1.0, 0.0), b = vec2(0.0, 1.0);
  CHECK((cfg_combine(a, b, 1.0) - b).norm() == 0.0);
  CHECK((cfg_combine(a, b, 0.0) - a).norm() == 0.0);
  Vec l3 = cfg_combine(a, b, 3.0);
  CHECK(l3(0) == -2.0);
  CHECK(l3(1) == 3.0);
  for (double lambda : {-1.0, 0.0, 0.5, 1.0, 3.0, 7.5}) {
    CHECK((cfg_combine(a, a, lambda) - a).norm() == 0.0);
  }
}

TEST_CASE("perfect regressor gives zero loss, zero model matches moments") {
  FlowConfig cfg;
  cfg.dim = 2;
  cfg.zl_dim = 2;
  cfg.zg_dim = 2;
  cfg.hidden = 8;
  cfg.sigma_min = 1e-5;

  CounterRng rng(6);
  std::vector<FlowSample> batch;
  for (int i = 0; i < 4000; ++i) {
    FlowSample s;
    s.x1 = random_vec(cfg.dim, rng);
    s.z_local = random_vec(cfg.zl_dim, rng);
    s.z_global = random_vec(cfg.zg_dim, rng);
    batch.push_back(s);
  }

  // Zero model: loss approximates E||x1 - (1-sigma_min) x0||^2 = E||x1||^2 +
  // (1-sigma_min)^2 * dim; x1 here is standard normal so the target is
  // dim + (1-sigma_min)^2 * dim.
  VectorFieldModel zero(cfg, 7);
  for (nn::Param* p : zero.params()) p->value.setZero();
  double loss = cfm_plus_loss(zero, batch, cfg, 99);
  double expect = cfg.dim + std::pow(1.0 - cfg.sigma_min, 2.0) * cfg.dim;
  CHECK(loss == doctest::Approx(expect).epsilon(0.02));

  // Monte-Carlo cross-check with an independent sampler.
  CounterRng mc(123);
  double mc_estimate = 0.0;
  const int mc_n = 20000;
  for (int i = 0; i < mc_n; ++i) {
    Vec x1 = random_vec(cfg.dim, mc);
    Vec x0 = random_vec(cfg.dim, mc);
    mc_estimate += (x1 - (1.0 - cfg.sigma_min) * x0).squaredNorm();
  }
  mc_estimate /= mc_n;
  CHECK(loss == doctest::Approx(mc_estimate).epsilon(0.02));
}

TEST_CASE("one Euler step of size 1 applies the t=0 field exactly") {
  // Along the sigma_min = 0 path the target field is the constant x1 - x0,
  // so a single unit step lands on x1 exactly.
  Vec x1 = vec2(0.7, -1.3);
  CounterRng rng(9);
  Vec x0 = random_vec(2, rng);
  Vec u = target_field(x0, x1, 0.0, 0.0);  // = x1 - x0
  CHECK((x0 + 1.0 * u - x1).norm() < 1e-15);

  // And ode_sample with steps=1 is exactly one such update of the model
  // field at t=0 from the seeded draw.
  FlowConfig cfg;
  cfg.dim = 2;
  cfg.zl_dim = 1;
  cfg.zg_dim = 1;
  cfg.hidden = 4;
  VectorFieldModel model(cfg, 8);
  const u64 seed = 31337;
  Vec sampled = ode_sample(model, Vec::Zero(1), std::nullopt, 1, 1.0, seed);
  CounterRng mirror(seed);
  Vec draw = random_vec(2, mirror);
  Vec expect = draw + model.forward(draw, 0.0, Vec::Zero(1), std::nullopt);
  CHECK((sampled - expect).norm() == 0.0);
}

TEST_CASE("Euler on a single conditional field is exact, as the algebra says") {
  // Along u_t(x | x1) every Euler iterate stays on the straight path, so the
  // endpoint is hit with zero discretization error at any step count.
  const double sigma_min = 0.3;
  Vec x1 = vec2(1.0, 2.0);
  Vec x0 = vec2(-0.5, 0.4);
  Vec x = x0;
  const int steps = 7;
  for (int s = 0; s < steps; ++s) {
    double t = static_cast<double>(s) / steps;
    x = x + (1.0 / steps) * target_field(x, x1, t, sigma_min);
  }
  CHECK((x - cond_flow(x0, x1, 1.0, sigma_min)).norm() < 1e-12);
}

TEST_CASE("Euler error halves when steps double on an analytic guided field") {
  // A guidance mix of two conditional fields with different sigma floors is
  // no longer Euler-exact; measure first-order convergence against a fine
  // reference integration.
  Vec x1 = vec2(1.0, 2.0), x2 = vec2(-0.8, 0.5), x0 = vec2(-0.5, 0.4);
  auto field = [&](const Vec& x, double t) {
    return cfg_combine(target_field(x, x1, t, 0.5), target_field(x, x2, t, 0.05), 0.7);
  };
  auto integrate = [&](int steps) {
    Vec x = x0;
    double dt = 1.0 / steps;
    for (int s = 0; s < steps; ++s) x = x + dt * field(x, static_cast<double>(s) * dt);
    return x;
  };
  Vec ref = integrate(16384);
  double e1 = (integrate(20) - ref).norm();
  double e2 = (integrate(40) - ref).norm();
  double ratio = e1 / e2;
  CHECK(ratio > 1.7);
  CHECK(ratio < 2.3);
}

TEST_CASE("ode_sample is deterministic under seed") {
  FlowConfig cfg;
  cfg.dim = 2;
  cfg.zl_dim = 2;
  cfg.zg_dim = 2;
  cfg.hidden = 16;
  VectorFieldModel model(cfg, 10);
  CounterRng rng(11);
  Vec zl = random_vec(2, rng);
  Vec zg = random_vec(2, rng);
  Vec a = ode_sample(model, zl, zg, 20, 3.0, 555);
  Vec b = ode_sample(model, zl, zg, 20, 3.0, 555);
  CHECK((a - b).norm() == 0.0);
  Vec c = ode_sample(model, zl, zg, 20, 3.0, 556);
  CHECK((a - c).norm() > 0.0);
}

TEST_CASE("flow checkpoint round trip") {
  FlowConfig cfg;
  cfg.dim = 2;
  cfg.zl_dim = 3;
  cfg.zg_dim = 2;
  cfg.hidden = 12;
  VectorFieldModel m(cfg, 13);
  auto bytes = m.serialize();
  VectorFieldModel back = VectorFieldModel::parse(bytes);
  CHECK(back.serialize() == bytes);
  CHECK(back.checkpoint_hash() == m.checkpoint_hash());
  CounterRng rng(14);
  Vec zl = random_vec(3, rng);
  Vec x = ode_sample(back, zl, std::nullopt, 5, 1.0, 42);
  CHECK(x.allFinite());
}

TEST_CASE("toy decoder: conditional modes and unconditional coverage") {
  FlowConfig cfg;
  cfg.dim = 2;
  cfg.zl_dim = 2;
  cfg.zg_dim = 2;
  cfg.hidden = 64;
  cfg.sigma_min = 1e-3;
  CounterRng data_rng(3);
  std::vector<FlowSample> dataset;
  for (int i = 0; i < 512; ++i) {
    int mode = static_cast<int>(data_rng.next_below(2));
    FlowSample s;
    s.x1 = Vec(2);
    s.x1 << (mode == 0 ? -2.0 : 2.0) + 0.1 * data_rng.next_gaussian(),
        0.1 * data_rng.next_gaussian();
    s.z_local = Vec::Zero(2);
    s.z_global = Vec::Zero(2);
    s.z_global(mode) = 1.0;
    dataset.push_back(s);
  }
  VectorFieldModel model(cfg, 21);
  train_toy_decoder(model, dataset, cfg, 5, 1500, 32, 3e-3);

  // Conditional draws land in the requested mode.
  int correct = 0;
  const int trials = 200;
  for (int i = 0; i < trials; ++i) {
    int mode = i % 2;
    Vec zg = Vec::Zero(2);
    zg(mode) = 1.0;
    Vec x = ode_sample(model, Vec::Zero(2), zg, 20, 1.0, 7000 + static_cast<u64>(i));
    if (std::abs(x(0) - (mode == 0 ? -2.0 : 2.0)) < 2.0) ++correct;
  }
  CHECK(static_cast<double>(correct) / trials >= 0.95);

  // Dropping the global conditioning covers both modes.
  int left = 0, right = 0;
  for (int i = 0; i < trials; ++i) {
    Vec x = ode_sample(model, Vec::Zero(2), std::nullopt, 20, 1.0, 8000 + static_cast<u64>(i));
    (x(0) < 0 ? left : right)++;
  }
  CHECK(left >= trials / 5);
  CHECK(right >= trials / 5);
}

TEST_CASE("toy decoder: single-point target converges") {
  FlowConfig cfg;
  cfg.dim = 2;
  cfg.zl_dim = 1;
  cfg.zg_dim = 1;
  cfg.hidden = 64;
  cfg.sigma_min = 1e-3;
  Vec point = vec2(1.5, -0.5);
  std::vector<FlowSample> dataset;
  for (int i = 0; i < 64; ++i) {
    FlowSample s;
    s.x1 = point;
    s.z_local = Vec::Zero(1);
    s.z_global = Vec::Ones(1);
    dataset.push_back(s);
  }
  VectorFieldModel model(cfg, 15);
  train_toy_decoder(model, dataset, cfg, 77, 2000, 32, 3e-3);

  double err = 0.0;
  const int trials = 50;
  for (int i = 0; i < trials; ++i) {
    Vec x = ode_sample(model, Vec::Zero(1), Vec::Ones(1), 20, 1.0, 900 + static_cast<u64>(i));
    err += (x - point).norm();
  }
  CHECK(err / trials < 0.05);
}
