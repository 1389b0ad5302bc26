#include "lgts/model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "lgts/adam.hpp"
#include "lgts/errors.hpp"

namespace lgts {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;
constexpr double kRatioClamp = 30.0;

Tensor glorot(const std::string& name, int fan_in, int fan_out, Rng& rng) {
  double r = std::sqrt(6.0 / (fan_in + fan_out));
  std::uniform_real_distribution<double> u(-r, r);
  std::vector<double> w(static_cast<size_t>(fan_in) * fan_out);
  for (auto& x : w) x = u(rng);
  return Tensor::param(name, std::move(w), {fan_in, fan_out});
}

Tensor zeros_param(const std::string& name, int n) {
  return Tensor::param(name, std::vector<double>(n, 0.0), {n});
}

}  // namespace

void ModelConfig::validate() const {
  if (d < 1) throw ValidationError("config: d must be >= 1");
  if (delta < 1) throw ValidationError("config: delta must be >= 1");
  if (d_g < 0) throw ValidationError("config: d_g must be >= 0");
  if (d_l < 1) throw ValidationError("config: d_l must be >= 1");
  if (beta < 0 || lambda < 0) throw ValidationError("config: beta and lambda must be >= 0");
  if (hidden < 1) throw ValidationError("config: hidden must be >= 1");
  if (batch_size < 1) throw ValidationError("config: batch_size must be >= 1");
  if (epochs < 1) throw ValidationError("config: epochs must be >= 1");
  if (static_cast<int>(kernels.size()) != d_l)
    throw ValidationError("config: need one kernel per local dimension (" +
                          std::to_string(kernels.size()) + " given, d_l = " + std::to_string(d_l) +
                          ")");
  for (const auto& k : kernels) k.validate();
  if (!(subwindow_min_frac > 0) || subwindow_max_frac > 1.0 ||
      subwindow_min_frac > subwindow_max_frac)
    throw ValidationError("config: subwindow fractions must satisfy 0 < min <= max <= 1");
}

ModelConfig ModelConfig::simulation_defaults() {
  ModelConfig cfg;
  cfg.d = 1;
  cfg.delta = 10;
  cfg.d_g = 1;
  cfg.d_l = 1;
  cfg.beta = 0.1;
  cfg.lambda = 2.0;
  cfg.learning_rate = 0.01;
  cfg.kernels = {KernelSpec{KernelKind::rbf, 1.0, 0.0, 1.0}};
  return cfg;
}

std::vector<Tensor> ModelParams::all() const {
  std::vector<Tensor> v = {el_w1, el_b1, el_w2, el_b2, el_cm, el_c0, el_cp, el_cb,
                           de_w1, de_b1, de_w2, de_b2, de_w3, de_b3};
  if (eg_w1.defined()) {
    v.insert(v.end(), {eg_w1, eg_b1, eg_w2, eg_b2, eg_h1, eg_hb1, eg_h2, eg_hb2});
  }
  return v;
}

ModelParams ModelParams::init(const ModelConfig& cfg, Rng& rng) {
  int in = cfg.window_input();
  int h = cfg.hidden;
  ModelParams p;
  p.el_w1 = glorot("enc_l.w1", in, h, rng);
  p.el_b1 = zeros_param("enc_l.b1", h);
  p.el_w2 = glorot("enc_l.w2", h, h, rng);
  p.el_b2 = zeros_param("enc_l.b2", h);
  p.el_cm = glorot("enc_l.agg_prev", h, 3 * cfg.d_l, rng);
  p.el_c0 = glorot("enc_l.agg_self", h, 3 * cfg.d_l, rng);
  p.el_cp = glorot("enc_l.agg_next", h, 3 * cfg.d_l, rng);
  p.el_cb = zeros_param("enc_l.agg_bias", 3 * cfg.d_l);
  if (cfg.d_g > 0) {
    p.eg_w1 = glorot("enc_g.w1", in, h, rng);
    p.eg_b1 = zeros_param("enc_g.b1", h);
    p.eg_w2 = glorot("enc_g.w2", h, h, rng);
    p.eg_b2 = zeros_param("enc_g.b2", h);
    p.eg_h1 = glorot("enc_g.head_w1", h, h, rng);
    p.eg_hb1 = zeros_param("enc_g.head_b1", h);
    p.eg_h2 = glorot("enc_g.head_w2", h, 2 * cfg.d_g, rng);
    p.eg_hb2 = zeros_param("enc_g.head_b2", 2 * cfg.d_g);
  }
  p.de_w1 = glorot("dec.w1", cfg.d_l + cfg.d_g, h, rng);
  p.de_b1 = zeros_param("dec.b1", h);
  p.de_w2 = glorot("dec.w2", h, h, rng);
  p.de_b2 = zeros_param("dec.b2", h);
  p.de_w3 = glorot("dec.w3", h, cfg.d * cfg.delta, rng);
  p.de_b3 = zeros_param("dec.b3", cfg.d * cfg.delta);
  return p;
}

Model::Model(ModelConfig cfg, ModelParams params)
    : cfg_(std::move(cfg)), params_(std::move(params)) {
  cfg_.validate();
}

// Shared two-layer tanh network applied window-wise: [t_w, 2 d delta] -> [t_w, h].
Tensor Model::window_embed(const Tensor& input, const Tensor& w1, const Tensor& b1,
                           const Tensor& w2, const Tensor& b2) const {
  Tensor h1 = tanh(add(matmul(input, w1), b1));
  return tanh(add(matmul(h1, w2), b2));
}

namespace {

// Values zero-filled where unobserved, with the mask appended as channels.
Tensor masked_input(const WindowedSample& w, int row_start, int row_count) {
  int cols = w.d * w.delta;
  std::vector<double> vals(static_cast<size_t>(row_count) * 2 * cols);
  for (int r = 0; r < row_count; ++r) {
    size_t src = static_cast<size_t>(row_start + r) * cols;
    for (int c = 0; c < cols; ++c) {
      double m = w.mw[src + c];
      vals[static_cast<size_t>(r) * 2 * cols + c] = m != 0.0 ? w.xw[src + c] : 0.0;
      vals[static_cast<size_t>(r) * 2 * cols + cols + c] = m;
    }
  }
  return Tensor::constant(std::move(vals), {row_count, 2 * cols});
}

}  // namespace

LocalPosterior Model::encode_local(const WindowedSample& w) const {
  if (w.t_w < 1) throw ValidationError("encode_local: sample has no windows");
  if (w.d != cfg_.d || w.delta != cfg_.delta)
    throw ValidationError("encode_local: sample shape does not match config");
  int t_w = w.t_w;
  int h = cfg_.hidden;

  Tensor input = masked_input(w, 0, t_w);
  Tensor e = window_embed(input, params_.el_w1, params_.el_b1, params_.el_w2, params_.el_b2);

  // Width-3 sliding aggregation across windows (zero padding at the ends)
  // gives the posterior parameter map a +-1 window receptive field.
  Tensor prev = t_w > 1 ? concat({Tensor::zeros({1, h}), slice(e, 0, 0, t_w - 1)}, 0)
                        : Tensor::zeros({1, h});
  Tensor next = t_w > 1 ? concat({slice(e, 0, 1, t_w - 1), Tensor::zeros({1, h})}, 0)
                        : Tensor::zeros({1, h});
  Tensor bands = add(add(matmul(prev, params_.el_cm), matmul(e, params_.el_c0)),
                     add(matmul(next, params_.el_cp), params_.el_cb));

  LocalPosterior post;
  post.t_w = t_w;
  post.dims.reserve(cfg_.d_l);
  for (int j = 0; j < cfg_.d_l; ++j) {
    BandedGaussian g;
    g.mu = reshape(slice(bands, 1, j, 1), {t_w});
    g.b_diag = exp(reshape(slice(bands, 1, cfg_.d_l + j, 1), {t_w}));
    Tensor off_col = reshape(slice(bands, 1, 2 * cfg_.d_l + j, 1), {t_w});
    g.b_off = slice(off_col, 0, 0, t_w - 1);
    post.dims.push_back(std::move(g));
  }
  return post;
}

GlobalGaussian Model::global_head(const Tensor& input, std::span<const double> pool_weights) const {
  int rows = input.shape()[0];
  double total = 0.0;
  for (double v : pool_weights) total += v;
  if (!(total > 0.0)) throw ValidationError("encode_global: input is fully masked");
  std::vector<double> wn(pool_weights.begin(), pool_weights.end());
  for (auto& v : wn) v /= total;
  Tensor pool = Tensor::constant(std::move(wn), {1, rows});

  Tensor e = window_embed(input, params_.eg_w1, params_.eg_b1, params_.eg_w2, params_.eg_b2);
  Tensor pooled = matmul(pool, e);  // [1, h]
  Tensor hh = tanh(add(matmul(pooled, params_.eg_h1), params_.eg_hb1));
  Tensor out = add(matmul(hh, params_.eg_h2), params_.eg_hb2);  // [1, 2 d_g]
  GlobalGaussian g;
  g.mean = reshape(slice(out, 1, 0, cfg_.d_g), {cfg_.d_g});
  g.log_var = reshape(slice(out, 1, cfg_.d_g, cfg_.d_g), {cfg_.d_g});
  return g;
}

GlobalGaussian Model::encode_global(const WindowedSample& w, int win_start, int win_count) const {
  if (cfg_.d_g == 0) throw ValidationError("encode_global: global path disabled (d_g = 0)");
  if (win_count < 1 || win_start < 0 || win_start + win_count > w.t_w)
    throw ValidationError("encode_global: window span out of range");
  Tensor input = masked_input(w, win_start, win_count);
  // Pool weight per window: fraction of observed entries.
  int cols = w.d * w.delta;
  std::vector<double> pw(win_count, 0.0);
  for (int r = 0; r < win_count; ++r) {
    size_t src = static_cast<size_t>(win_start + r) * cols;
    for (int c = 0; c < cols; ++c) pw[r] += w.mw[src + c];
    pw[r] /= cols;
  }
  return global_head(input, pw);
}

GlobalGaussian Model::encode_global(const WindowedSample& w) const {
  return encode_global(w, 0, w.t_w);
}

GlobalGaussian Model::encode_global_tensor(const Tensor& xw, const Tensor& mask) const {
  if (cfg_.d_g == 0) throw ValidationError("encode_global: global path disabled (d_g = 0)");
  if (xw.rank() != 2 || mask.rank() != 2 || xw.shape() != mask.shape())
    throw ValidationError("encode_global: values/mask shape mismatch");
  int rows = xw.shape()[0];
  int cols = xw.shape()[1];
  Tensor input = concat({mul(xw, mask), mask}, 1);
  std::vector<double> pw(rows, 0.0);
  const auto& mv = mask.values();
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) pw[r] += mv[static_cast<size_t>(r) * cols + c];
    pw[r] /= cols;
  }
  return global_head(input, pw);
}

Tensor Model::decode(const Tensor& z_g, const Tensor& z_l) const {
  if (z_l.rank() != 2 || z_l.shape()[1] != cfg_.d_l)
    throw ValidationError("decode: z_l must be [t_w, d_l], got " + shape_str(z_l.shape()));
  int t_w = z_l.shape()[0];
  Tensor in = z_l;
  if (cfg_.d_g > 0) {
    if (z_g.numel() != cfg_.d_g)
      throw ValidationError("decode: z_g must have d_g entries, got " + shape_str(z_g.shape()));
    Tensor zg_rows = matmul(Tensor::ones({t_w, 1}), reshape(z_g, {1, cfg_.d_g}));
    in = concat({z_l, zg_rows}, 1);
  }
  Tensor h1 = tanh(add(matmul(in, params_.de_w1), params_.de_b1));
  Tensor h2 = tanh(add(matmul(h1, params_.de_w2), params_.de_b2));
  return add(matmul(h2, params_.de_w3), params_.de_b3);
}

Tensor nll_masked(const Tensor& xhat, const Tensor& x, const Tensor& mask) {
  if (xhat.shape() != x.shape() || x.shape() != mask.shape())
    throw ValidationError("nll_masked: shapes differ: " + shape_str(xhat.shape()) + ", " +
                          shape_str(x.shape()) + ", " + shape_str(mask.shape()));
  double count = 0.0;
  for (double m : mask.values()) count += m;
  if (count <= 0.0) throw ValidationError("nll_masked: no observed entries");
  Tensor se = mul(square(sub(xhat, x)), mask);
  return add_const(mul_const(sum(se), 0.5 / count), 0.5 * kLog2Pi);
}

Tensor likelihood_ratio(const Tensor& z, std::span<const double> z_star, const GlobalGaussian& q) {
  Tensor zs = Tensor::constant(std::vector<double>(z_star.begin(), z_star.end()),
                               {static_cast<int>(z_star.size())});
  Tensor log_ratio = sub(log_prob_diag(z, q), log_prob_diag(zs, q));
  return exp(clamp(log_ratio, -kRatioClamp, kRatioClamp));
}

Tensor Model::counterfactual_ratio(const Tensor& z_l, const Tensor& z_g,
                                   std::span<const double> zg_star) const {
  Tensor zs = Tensor::constant(std::vector<double>(zg_star.begin(), zg_star.end()),
                               {static_cast<int>(zg_star.size())});
  Tensor x_star = decode(zs, z_l);
  Tensor ones = Tensor::ones(x_star.shape());
  GlobalGaussian q_star = encode_global_tensor(x_star, ones);
  return likelihood_ratio(z_g, zg_star, q_star);
}

StepNoise draw_step_noise(const ModelConfig& cfg, int t_w, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  StepNoise n;
  n.eps_local.resize(cfg.d_l);
  for (auto& e : n.eps_local) {
    e.resize(t_w);
    for (auto& v : e) v = normal(rng);
  }
  n.eps_global.resize(cfg.d_g);
  for (auto& v : n.eps_global) v = normal(rng);
  n.zg_prior.resize(cfg.d_g);
  for (auto& v : n.zg_prior) v = normal(rng);
  std::uniform_real_distribution<double> frac(cfg.subwindow_min_frac, cfg.subwindow_max_frac);
  int count = std::max(1, static_cast<int>(std::lround(frac(rng) * t_w)));
  count = std::min(count, t_w);
  std::uniform_int_distribution<int> start(0, t_w - count);
  n.sub_start = start(rng);
  n.sub_count = count;
  return n;
}

StepNoise mean_step_noise(const ModelConfig& cfg, int t_w) {
  StepNoise n;
  n.eps_local.assign(cfg.d_l, std::vector<double>(t_w, 0.0));
  n.eps_global.assign(cfg.d_g, 0.0);
  n.zg_prior.assign(cfg.d_g, 0.0);
  n.sub_start = 0;
  n.sub_count = t_w;
  return n;
}

LossParts Model::sample_loss(const WindowedSample& w, const GpPrior& prior,
                             const StepNoise& noise) const {
  if (static_cast<int>(prior.dims.size()) != cfg_.d_l)
    throw ValidationError("sample_loss: prior dimension count mismatch");

  LocalPosterior lp = encode_local(w);

  // One reparameterized draw per local dimension; z_l is [t_w, d_l].
  std::vector<Tensor> zl_cols;
  zl_cols.reserve(cfg_.d_l);
  Tensor kl_local;
  for (int j = 0; j < cfg_.d_l; ++j) {
    Tensor s = sample_banded(lp.dims[j], noise.eps_local[j]);
    zl_cols.push_back(reshape(s, {lp.t_w, 1}));
    Tensor kl = kl_banded_to_gp(lp.dims[j], prior.dims[j]);
    kl_local = j == 0 ? kl : add(kl_local, kl);
  }
  Tensor z_l = cfg_.d_l == 1 ? zl_cols[0] : concat(zl_cols, 1);

  Tensor z_g;
  Tensor kl_g = Tensor::scalar(0.0);
  GlobalGaussian qg;
  if (cfg_.d_g > 0) {
    qg = encode_global(w, noise.sub_start, noise.sub_count);
    Tensor eps = Tensor::constant(noise.eps_global, {cfg_.d_g});
    z_g = add(qg.mean, mul(exp(mul_const(qg.log_var, 0.5)), eps));
    kl_g = kl_global(qg);
  }

  Tensor xhat = decode(z_g, z_l);
  Tensor x = Tensor::constant(w.xw, {w.t_w, w.d * w.delta});
  Tensor mask = Tensor::constant(w.mw, {w.t_w, w.d * w.delta});
  Tensor nll = nll_masked(xhat, x, mask);

  LossParts parts;
  parts.nll = nll;
  parts.kl_local = kl_local;
  parts.kl_global = kl_g;
  Tensor elbo = add(nll, mul_const(add(kl_local, kl_g), cfg_.beta));
  if (cfg_.d_g > 0 && cfg_.lambda > 0) {
    parts.reg = counterfactual_ratio(z_l, z_g, noise.zg_prior);
    parts.total = add(elbo, mul_const(parts.reg, cfg_.lambda));
  } else {
    parts.reg = Tensor::scalar(0.0);
    parts.total = elbo;
  }
  return parts;
}

LossParts Model::batch_loss(std::span<const WindowedSample> batch,
                            const std::map<int, GpPrior>& priors,
                            std::span<const StepNoise> noise) const {
  if (batch.empty()) throw ValidationError("batch_loss: empty batch");
  if (batch.size() != noise.size())
    throw ValidationError("batch_loss: noise pack count mismatch");
  LossParts acc;
  for (size_t i = 0; i < batch.size(); ++i) {
    auto it = priors.find(batch[i].t_w);
    if (it == priors.end())
      throw ValidationError("batch_loss: no prior for t_w " + std::to_string(batch[i].t_w));
    LossParts p = sample_loss(batch[i], it->second, noise[i]);
    if (i == 0) {
      acc = p;
    } else {
      acc.total = add(acc.total, p.total);
      acc.nll = add(acc.nll, p.nll);
      acc.kl_local = add(acc.kl_local, p.kl_local);
      acc.kl_global = add(acc.kl_global, p.kl_global);
      acc.reg = add(acc.reg, p.reg);
    }
  }
  double inv = 1.0 / static_cast<double>(batch.size());
  acc.total = mul_const(acc.total, inv);
  acc.nll = mul_const(acc.nll, inv);
  acc.kl_local = mul_const(acc.kl_local, inv);
  acc.kl_global = mul_const(acc.kl_global, inv);
  acc.reg = mul_const(acc.reg, inv);
  return acc;
}

TrainResult train(const Dataset& ds, const ModelConfig& cfg, std::uint64_t seed,
                  std::ostream* log) {
  cfg.validate();
  if (ds.samples.empty()) throw ValidationError("train: empty dataset");

  std::vector<WindowedSample> windowed = window(ds, cfg.delta);

  // One factored prior per distinct window count.
  std::map<int, GpPrior> priors;
  for (const auto& w : windowed)
    if (!priors.count(w.t_w)) priors.emplace(w.t_w, GpPrior::build(cfg.kernels, w.t_w, cfg.jitter));

  Rng rng(seed);
  ModelParams params = ModelParams::init(cfg, rng);
  Model model(cfg, params);
  Adam opt(params.all(), AdamConfig{cfg.learning_rate, 0.9, 0.999, 1e-8});

  std::vector<int> order(windowed.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);

  TrainResult result;
  result.config = cfg;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    EpochMetrics em;
    em.epoch = epoch;
    int batches = 0;
    for (size_t at = 0; at < order.size(); at += cfg.batch_size) {
      size_t hi = std::min(order.size(), at + cfg.batch_size);
      std::vector<WindowedSample> batch;
      std::vector<StepNoise> noise;
      batch.reserve(hi - at);
      noise.reserve(hi - at);
      for (size_t k = at; k < hi; ++k) {
        batch.push_back(windowed[order[k]]);
        noise.push_back(draw_step_noise(cfg, batch.back().t_w, rng));
      }
      LossParts loss = model.batch_loss(batch, priors, noise);
      double lv = loss.total.value();
      if (!std::isfinite(lv)) {
        throw NumericError("train: non-finite loss at epoch " + std::to_string(epoch) +
                           ", step " + std::to_string(batches + 1));
      }
      opt.zero_grad();
      backward(loss.total);
      opt.step();
      em.total += lv;
      em.nll += loss.nll.value();
      em.kl_local += loss.kl_local.value();
      em.kl_global += loss.kl_global.value();
      em.reg += loss.reg.value();
      ++batches;
    }
    em.total /= batches;
    em.nll /= batches;
    em.kl_local /= batches;
    em.kl_global /= batches;
    em.reg /= batches;
    result.metrics.push_back(em);
    if (log && (epoch == 1 || epoch % 25 == 0 || epoch == cfg.epochs)) {
      (*log) << "epoch " << epoch << " total " << em.total << " nll " << em.nll << " kl_l "
             << em.kl_local << " kl_g " << em.kl_global << " reg " << em.reg << "\n";
    }
  }
  result.params = params;
  return result;
}

}  // namespace lgts
