#include "pcv2/nn.hpp"

#include <cmath>

#include "pcv2/rng.hpp"

namespace pcv2::nn {

namespace {

void init_gaussian(Param& p, CounterRng& rng, double stddev) {
  for (Eigen::Index j = 0; j < p.value.cols(); ++j) {
    for (Eigen::Index i = 0; i < p.value.rows(); ++i) {
      p.value(i, j) = stddev * rng.next_gaussian();
    }
  }
}

// y = LN(x) * g + b applied row-wise; returns normalized xhat and 1/std.
void layer_norm(const Mat& x, const Param& g, const Param& b, Mat& hat, Vec& rstd, Mat& out) {
  const auto n = x.rows();
  const auto d = x.cols();
  hat.resize(n, d);
  rstd.resize(n);
  out.resize(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    double mu = x.row(i).mean();
    double var = (x.row(i).array() - mu).square().sum() / static_cast<double>(d);
    double r = 1.0 / std::sqrt(var + 1e-5);
    rstd(i) = r;
    hat.row(i) = (x.row(i).array() - mu) * r;
    out.row(i) = hat.row(i).cwiseProduct(g.value.row(0)) + b.value.row(0);
  }
}

// Backward of layer_norm; accumulates into g/b grads, returns dx.
Mat layer_norm_backward(const Mat& dy, const Mat& hat, const Vec& rstd, Param& g, Param& b,
                        double scale) {
  const auto n = dy.rows();
  const auto d = dy.cols();
  Mat dx(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::RowVectorXd dyg = dy.row(i).cwiseProduct(g.value.row(0));
    double m1 = dyg.mean();
    double m2 = dyg.cwiseProduct(hat.row(i)).mean();
    dx.row(i) = (dyg.array() - m1 - hat.row(i).array() * m2) * rstd(i);
    g.grad.row(0) += scale * dy.row(i).cwiseProduct(hat.row(i));
    b.grad.row(0) += scale * dy.row(i);
  }
  return dx;
}

inline double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * M_SQRT1_2)); }

inline double gelu_grad(double x) {
  double phi = std::exp(-0.5 * x * x) * 0.3989422804014326779;  // 1/sqrt(2*pi)
  double Phi = 0.5 * (1.0 + std::erf(x * M_SQRT1_2));
  return Phi + x * phi;
}

}  // namespace

Transformer::Transformer(const TransformerConfig& cfg, u64 init_seed) : cfg_(cfg) {
  require(cfg.d_model % cfg.n_heads == 0, "transformer: d_model must divide into heads");
  require(cfg.input_rows > 0 && cfg.vocab > 0 && cfg.max_pos > 0, "transformer: bad config");
  const int d = cfg.d_model;

  CounterRng rng(init_seed);
  tok_emb_.init_zero(cfg.input_rows, d, "tok_emb");
  init_gaussian(tok_emb_, rng, 0.02);
  pos_emb_.init_zero(cfg.max_pos, d, "pos_emb");
  init_gaussian(pos_emb_, rng, 0.02);
  if (cfg.max_scales > 0) {
    scale_emb_.init_zero(cfg.max_scales, d, "scale_emb");
    init_gaussian(scale_emb_, rng, 0.02);
  }
  blocks_.resize(cfg.n_layers);
  for (int l = 0; l < cfg.n_layers; ++l) {
    auto& blk = blocks_[l];
    std::string p = cat("block", l, ".");
    blk.ln1_g.init_zero(1, d, p + "ln1_g");
    blk.ln1_g.value.setOnes();
    blk.ln1_b.init_zero(1, d, p + "ln1_b");
    blk.w_qkv.init_zero(d, 3 * d, p + "w_qkv");
    init_gaussian(blk.w_qkv, rng, 0.02);
    blk.b_qkv.init_zero(1, 3 * d, p + "b_qkv");
    blk.w_proj.init_zero(d, d, p + "w_proj");
    init_gaussian(blk.w_proj, rng, 0.02);
    blk.b_proj.init_zero(1, d, p + "b_proj");
    blk.ln2_g.init_zero(1, d, p + "ln2_g");
    blk.ln2_g.value.setOnes();
    blk.ln2_b.init_zero(1, d, p + "ln2_b");
    blk.w_fc1.init_zero(d, cfg.d_ff, p + "w_fc1");
    init_gaussian(blk.w_fc1, rng, 0.02);
    blk.b_fc1.init_zero(1, cfg.d_ff, p + "b_fc1");
    blk.w_fc2.init_zero(cfg.d_ff, d, p + "w_fc2");
    init_gaussian(blk.w_fc2, rng, 0.02);
    blk.b_fc2.init_zero(1, d, p + "b_fc2");
  }
  lnf_g_.init_zero(1, d, "lnf_g");
  lnf_g_.value.setOnes();
  lnf_b_.init_zero(1, d, "lnf_b");
  // Zero head: a fresh model emits exactly uniform distributions.
  w_head_.init_zero(d, cfg.vocab, "w_head");
  b_head_.init_zero(1, cfg.vocab, "b_head");
}

void Transformer::forward(std::span<const int> ids, std::span<const int> pos,
                          std::span<const int> scales, std::span<const int> allow,
                          Activations& acts) const {
  const int n = static_cast<int>(ids.size());
  const int d = cfg_.d_model;
  const int heads = cfg_.n_heads;
  const int dh = d / heads;
  require(n > 0, "transformer: empty sequence");
  require(pos.size() == ids.size() && allow.size() == ids.size(), "transformer: length mismatch");
  require(scales.empty() || scales.size() == ids.size(), "transformer: scale length mismatch");

  acts.n = n;
  acts.ids.assign(ids.begin(), ids.end());
  acts.pos.assign(pos.begin(), pos.end());
  acts.scales.assign(scales.begin(), scales.end());
  acts.allow.assign(allow.begin(), allow.end());

  Mat x(n, d);
  for (int i = 0; i < n; ++i) {
    require(ids[i] >= 0 && ids[i] < cfg_.input_rows, "transformer: id out of range");
    require(pos[i] >= 0 && pos[i] < cfg_.max_pos, "transformer: position out of range");
    x.row(i) = tok_emb_.value.row(ids[i]) + pos_emb_.value.row(pos[i]);
    if (!scales.empty()) {
      require(scales[i] >= 0 && scales[i] < cfg_.max_scales, "transformer: scale out of range");
      x.row(i) += scale_emb_.value.row(scales[i]);
    }
  }
  acts.x0 = x;
  acts.blocks.resize(cfg_.n_layers);

  const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));
  for (int l = 0; l < cfg_.n_layers; ++l) {
    const auto& blk = blocks_[l];
    auto& cache = acts.blocks[l];
    cache.x_in = x;

    Mat ln1_out;
    layer_norm(x, blk.ln1_g, blk.ln1_b, cache.ln1_hat, cache.ln1_rstd, ln1_out);
    cache.qkv = (ln1_out * blk.w_qkv.value).rowwise() + blk.b_qkv.value.row(0);

    cache.att.assign(heads, Mat());
    Mat attn_out = Mat::Zero(n, d);
    for (int hh = 0; hh < heads; ++hh) {
      auto q = cache.qkv.middleCols(hh * dh, dh);
      auto k = cache.qkv.middleCols(d + hh * dh, dh);
      auto v = cache.qkv.middleCols(2 * d + hh * dh, dh);
      Mat scores = (q * k.transpose()) * inv_sqrt_dh;
      Mat& att = cache.att[hh];
      att = Mat::Zero(n, n);
      for (int qi = 0; qi < n; ++qi) {
        int limit = allow[qi];
        require(limit >= 1 && limit <= n, "transformer: attention window for row ", qi,
                " out of range");
        double mx = scores.row(qi).head(limit).maxCoeff();
        double denom = 0.0;
        for (int ki = 0; ki < limit; ++ki) {
          double e = std::exp(scores(qi, ki) - mx);
          att(qi, ki) = e;
          denom += e;
        }
        att.row(qi).head(limit) /= denom;
      }
      attn_out.middleCols(hh * dh, dh) = att * v;
    }
    cache.attn_out = attn_out;
    cache.proj_in = attn_out;
    Mat proj = (attn_out * blk.w_proj.value).rowwise() + blk.b_proj.value.row(0);
    Mat x_mid = x + proj;
    cache.x_mid = x_mid;

    Mat ln2_out;
    layer_norm(x_mid, blk.ln2_g, blk.ln2_b, cache.ln2_hat, cache.ln2_rstd, ln2_out);
    cache.f1 = (ln2_out * blk.w_fc1.value).rowwise() + blk.b_fc1.value.row(0);
    cache.gelu = cache.f1.unaryExpr([](double t) { return gelu(t); });
    Mat f2 = (cache.gelu * blk.w_fc2.value).rowwise() + blk.b_fc2.value.row(0);
    x = x_mid + f2;
    cache.x_out = x;
    require(x.allFinite(), "transformer: non-finite activation after layer ", l);
  }

  Mat lnf_out;
  layer_norm(x, lnf_g_, lnf_b_, acts.lnf_hat, acts.lnf_rstd, lnf_out);
  acts.logits = (lnf_out * w_head_.value).rowwise() + b_head_.value.row(0);
  require(acts.logits.allFinite(), "transformer: non-finite logits");
}

void Transformer::probs_from_logits(const Eigen::Ref<const Eigen::RowVectorXd>& logits,
                                    std::span<double> out) {
  const auto v = logits.size();
  require(static_cast<Eigen::Index>(out.size()) == v, "probs_from_logits: size mismatch");
  double mx = logits.maxCoeff();
  double denom = 0.0;
  for (Eigen::Index i = 0; i < v; ++i) {
    out[i] = std::exp(logits(i) - mx);
    denom += out[i];
  }
  const double floor_term = kFloorEps / static_cast<double>(v);
  for (Eigen::Index i = 0; i < v; ++i) {
    out[i] = (1.0 - kFloorEps) * (out[i] / denom) + floor_term;
  }
}

double Transformer::loss_and_backward(const Activations& acts, std::span<const int> loss_rows,
                                      std::span<const u32> targets, double grad_scale,
                                      bool want_backward) {
  require(loss_rows.size() == targets.size(), "loss: rows/targets mismatch");
  require(!loss_rows.empty(), "loss: no rows selected");
  const int n = acts.n;
  const int d = cfg_.d_model;
  const int heads = cfg_.n_heads;
  const int dh = d / heads;
  const double inv_count = 1.0 / static_cast<double>(loss_rows.size());

  // Floored softmax CE at the selected rows.
  double loss = 0.0;
  Mat dlogits = Mat::Zero(n, cfg_.vocab);
  std::vector<double> probs(static_cast<std::size_t>(cfg_.vocab));
  for (std::size_t r = 0; r < loss_rows.size(); ++r) {
    int row = loss_rows[r];
    u32 tgt = targets[r];
    require(row >= 0 && row < n, "loss: row index out of range");
    require(tgt < static_cast<u32>(cfg_.vocab), "loss: target out of range");
    probs_from_logits(acts.logits.row(row), probs);
    double pt = probs[tgt];
    loss += -std::log(pt);
    if (want_backward) {
      // p' = (1-eps) softmax + eps/V; dL/dz_j = -(1-eps)/p'_t * p_t (d_tj - p_j)
      double mx = acts.logits.row(row).maxCoeff();
      double denom = 0.0;
      for (int j = 0; j < cfg_.vocab; ++j) denom += std::exp(acts.logits(row, j) - mx);
      double soft_t = std::exp(acts.logits(row, tgt) - mx) / denom;
      double coeff = -(1.0 - kFloorEps) / pt * inv_count;
      for (int j = 0; j < cfg_.vocab; ++j) {
        double soft_j = std::exp(acts.logits(row, j) - mx) / denom;
        dlogits(row, j) += coeff * soft_t * ((j == static_cast<int>(tgt) ? 1.0 : 0.0) - soft_j);
      }
    }
  }
  loss *= inv_count;
  require(std::isfinite(loss), "loss: non-finite value");
  if (!want_backward) return loss;

  // Head and final LN.
  Mat lnf_out(n, d);
  for (int i = 0; i < n; ++i) {
    lnf_out.row(i) = acts.lnf_hat.row(i).cwiseProduct(lnf_g_.value.row(0)) + lnf_b_.value.row(0);
  }
  w_head_.grad += grad_scale * (lnf_out.transpose() * dlogits);
  b_head_.grad.row(0) += grad_scale * dlogits.colwise().sum();
  Mat dlnf_out = dlogits * w_head_.value.transpose();
  Mat dx = layer_norm_backward(dlnf_out, acts.lnf_hat, acts.lnf_rstd, lnf_g_, lnf_b_, grad_scale);

  const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));
  for (int l = cfg_.n_layers - 1; l >= 0; --l) {
    auto& blk = blocks_[l];
    const auto& cache = acts.blocks[l];

    // MLP branch: x_out = x_mid + fc2(gelu(fc1(ln2(x_mid))))
    Mat dgelu_out = dx * blk.w_fc2.value.transpose();
    Mat ln2_out(n, d);
    for (int i = 0; i < n; ++i) {
      ln2_out.row(i) =
          cache.ln2_hat.row(i).cwiseProduct(blk.ln2_g.value.row(0)) + blk.ln2_b.value.row(0);
    }
    blk.w_fc2.grad += grad_scale * (cache.gelu.transpose() * dx);
    blk.b_fc2.grad.row(0) += grad_scale * dx.colwise().sum();
    Mat df1 = dgelu_out.cwiseProduct(cache.f1.unaryExpr([](double t) { return gelu_grad(t); }));
    blk.w_fc1.grad += grad_scale * (ln2_out.transpose() * df1);
    blk.b_fc1.grad.row(0) += grad_scale * df1.colwise().sum();
    Mat dln2_out = df1 * blk.w_fc1.value.transpose();
    Mat dx_mid =
        dx + layer_norm_backward(dln2_out, cache.ln2_hat, cache.ln2_rstd, blk.ln2_g, blk.ln2_b,
                                 grad_scale);

    // Attention branch: x_mid = x_in + proj(attn(ln1(x_in)))
    blk.w_proj.grad += grad_scale * (cache.proj_in.transpose() * dx_mid);
    blk.b_proj.grad.row(0) += grad_scale * dx_mid.colwise().sum();
    Mat dattn_out = dx_mid * blk.w_proj.value.transpose();

    Mat dqkv = Mat::Zero(n, 3 * d);
    for (int hh = 0; hh < heads; ++hh) {
      auto q = cache.qkv.middleCols(hh * dh, dh);
      auto k = cache.qkv.middleCols(d + hh * dh, dh);
      auto v = cache.qkv.middleCols(2 * d + hh * dh, dh);
      const Mat& att = cache.att[hh];
      auto dout = dattn_out.middleCols(hh * dh, dh);

      Mat datt = dout * v.transpose();         // n x n
      Mat dv = att.transpose() * dout;         // n x dh
      // Softmax backward, restricted to each query's window.
      Mat dscores = Mat::Zero(n, n);
      for (int qi = 0; qi < n; ++qi) {
        int limit = acts.allow[qi];
        double dot = 0.0;
        for (int ki = 0; ki < limit; ++ki) dot += datt(qi, ki) * att(qi, ki);
        for (int ki = 0; ki < limit; ++ki) {
          dscores(qi, ki) = att(qi, ki) * (datt(qi, ki) - dot);
        }
      }
      dscores *= inv_sqrt_dh;
      dqkv.middleCols(hh * dh, dh) += dscores * k;
      dqkv.middleCols(d + hh * dh, dh) += dscores.transpose() * q;
      dqkv.middleCols(2 * d + hh * dh, dh) += dv;
    }

    Mat ln1_out(n, d);
    for (int i = 0; i < n; ++i) {
      ln1_out.row(i) =
          cache.ln1_hat.row(i).cwiseProduct(blk.ln1_g.value.row(0)) + blk.ln1_b.value.row(0);
    }
    blk.w_qkv.grad += grad_scale * (ln1_out.transpose() * dqkv);
    blk.b_qkv.grad.row(0) += grad_scale * dqkv.colwise().sum();
    Mat dln1_out = dqkv * blk.w_qkv.value.transpose();
    dx = dx_mid + layer_norm_backward(dln1_out, cache.ln1_hat, cache.ln1_rstd, blk.ln1_g,
                                      blk.ln1_b, grad_scale);
  }

  // Embedding gradients.
  for (int i = 0; i < n; ++i) {
    tok_emb_.grad.row(acts.ids[i]) += grad_scale * dx.row(i);
    pos_emb_.grad.row(acts.pos[i]) += grad_scale * dx.row(i);
    if (!acts.scales.empty()) scale_emb_.grad.row(acts.scales[i]) += grad_scale * dx.row(i);
  }
  return loss;
}

std::vector<Param*> Transformer::params() {
  std::vector<Param*> out{&tok_emb_, &pos_emb_};
  if (cfg_.max_scales > 0) out.push_back(&scale_emb_);
  for (auto& blk : blocks_) {
    for (Param* p : {&blk.ln1_g, &blk.ln1_b, &blk.w_qkv, &blk.b_qkv, &blk.w_proj, &blk.b_proj,
                     &blk.ln2_g, &blk.ln2_b, &blk.w_fc1, &blk.b_fc1, &blk.w_fc2, &blk.b_fc2}) {
      out.push_back(p);
    }
  }
  out.push_back(&lnf_g_);
  out.push_back(&lnf_b_);
  out.push_back(&w_head_);
  out.push_back(&b_head_);
  return out;
}

std::vector<const Param*> Transformer::params() const {
  auto mutable_params = const_cast<Transformer*>(this)->params();
  return {mutable_params.begin(), mutable_params.end()};
}

void Transformer::zero_grads() {
  for (Param* p : params()) p->grad.setZero();
}

AdamOptimizer::AdamOptimizer(std::vector<Param*> params, double lr, double beta1, double beta2,
                             double eps)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (Param* p : params_) {
    m_.push_back(Mat::Zero(p->value.rows(), p->value.cols()));
    v_.push_back(Mat::Zero(p->value.rows(), p->value.cols()));
  }
}

void AdamOptimizer::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Param& p = *params_[i];
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * p.grad;
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * p.grad.cwiseProduct(p.grad);
    Mat mhat = m_[i] / bc1;
    Mat vhat = v_[i] / bc2;
    p.value.array() -= lr_ * mhat.array() / (vhat.array().sqrt() + eps_);
  }
}

void AdamOptimizer::zero_grads() {
  for (Param* p : params_) p->grad.setZero();
}

}  // namespace pcv2::nn
