#pragma once

#include <cstdint>
#include <map>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "lgts/banded.hpp"
#include "lgts/data.hpp"
#include "lgts/kernels.hpp"
#include "lgts/tensor.hpp"

namespace lgts {

using Rng = std::mt19937_64;

struct ModelConfig {
  int d = 1;        // input features
  int delta = 10;   // window length
  int d_g = 1;      // global latent size (0 disables the global path)
  int d_l = 1;      // local latent size
  double beta = 0.1;
  double lambda = 2.0;
  std::vector<KernelSpec> kernels;  // one per local dimension
  int hidden = 32;
  double learning_rate = 0.01;
  int batch_size = 32;
  int epochs = 300;
  double subwindow_min_frac = 0.25;
  double subwindow_max_frac = 1.0;
  double jitter = 1e-6;

  void validate() const;
  // Window-level input width: values and mask channels concatenated.
  int window_input() const { return 2 * d * delta; }
  static ModelConfig simulation_defaults();
};

// All learnable weights, ordered for deterministic optimizer traversal.
struct ModelParams {
  // local encoder
  Tensor el_w1, el_b1, el_w2, el_b2;
  Tensor el_cm, el_c0, el_cp, el_cb;  // width-3 aggregation across windows
  // global encoder
  Tensor eg_w1, eg_b1, eg_w2, eg_b2, eg_h1, eg_hb1, eg_h2, eg_hb2;
  // decoder
  Tensor de_w1, de_b1, de_w2, de_b2, de_w3, de_b3;

  std::vector<Tensor> all() const;
  static ModelParams init(const ModelConfig& cfg, Rng& rng);
};

// Joint posterior over the local latent sequence: one banded Gaussian per
// local dimension, all over the same t_w windows.
struct LocalPosterior {
  std::vector<BandedGaussian> dims;
  int t_w = 0;
};

// Frozen per-step randomness so every loss is a pure function of the
// parameters; training draws one pack per sample per step.
struct StepNoise {
  std::vector<std::vector<double>> eps_local;  // d_l x t_w
  std::vector<double> eps_global;              // d_g
  std::vector<double> zg_prior;                // d_g, the counterfactual draw
  int sub_start = 0;
  int sub_count = 0;  // windows seen by the global encoder
};

StepNoise draw_step_noise(const ModelConfig& cfg, int t_w, Rng& rng);
// Deterministic pack: zero noise, full window span (posterior means).
StepNoise mean_step_noise(const ModelConfig& cfg, int t_w);

struct LossParts {
  Tensor total, nll, kl_local, kl_global, reg;
};

class Model {
 public:
  Model(ModelConfig cfg, ModelParams params);

  const ModelConfig& config() const { return cfg_; }
  const ModelParams& params() const { return params_; }
  ModelParams& params() { return params_; }

  // Posterior over the local latents for all windows of the sample.
  LocalPosterior encode_local(const WindowedSample& w) const;

  // Posterior over the global latent from a contiguous span of windows.
  GlobalGaussian encode_global(const WindowedSample& w, int win_start, int win_count) const;
  GlobalGaussian encode_global(const WindowedSample& w) const;
  // Same network over an in-graph series (values tensor + constant mask),
  // used for the counterfactual branch.
  GlobalGaussian encode_global_tensor(const Tensor& xw, const Tensor& mask) const;

  // Dec([z_t ; z_g]) per window; returns t_w x (d*delta).
  Tensor decode(const Tensor& z_g, const Tensor& z_l) const;

  // exp(clamp(log q(z|X*) - log q(z_star|X*), +-30)) with X* = Dec(z_l, z_star).
  Tensor counterfactual_ratio(const Tensor& z_l, const Tensor& z_g,
                              std::span<const double> zg_star) const;

  LossParts sample_loss(const WindowedSample& w, const GpPrior& prior,
                        const StepNoise& noise) const;
  // priors maps window count -> factored prior, covering every t_w in batch.
  LossParts batch_loss(std::span<const WindowedSample> batch,
                       const std::map<int, GpPrior>& priors,
                       std::span<const StepNoise> noise) const;

 private:
  Tensor window_embed(const Tensor& input, const Tensor& w1, const Tensor& b1, const Tensor& w2,
                      const Tensor& b2) const;
  GlobalGaussian global_head(const Tensor& input, std::span<const double> pool_weights) const;

  ModelConfig cfg_;
  ModelParams params_;
};

// Masked Gaussian NLL with unit variance: sum over observed entries of
// (x-xhat)^2/2 divided by the observed count, plus log(2pi)/2.
Tensor nll_masked(const Tensor& xhat, const Tensor& x, const Tensor& mask);

// Likelihood-ratio regularizer piece shared by model and tests.
Tensor likelihood_ratio(const Tensor& z, std::span<const double> z_star, const GlobalGaussian& q);

struct EpochMetrics {
  int epoch = 0;
  double nll = 0, kl_local = 0, kl_global = 0, reg = 0, total = 0;
};

struct TrainResult {
  ModelConfig config;
  ModelParams params;
  std::vector<EpochMetrics> metrics;
};

// Mini-batch Adam on the full objective. Deterministic for a fixed seed.
// Aborts with NumericError naming epoch/step on a non-finite loss.
TrainResult train(const Dataset& ds, const ModelConfig& cfg, std::uint64_t seed,
                  std::ostream* log = nullptr);

}  // namespace lgts
