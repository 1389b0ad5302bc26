#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lgts/data.hpp"
#include "lgts/model.hpp"

namespace lgts {

// Seeded 80/20 split over sample indices.
struct Split {
  std::vector<int> train, test;
};
Split train_test_split(int n, double test_frac, std::uint64_t seed);

struct ProbeReport {
  std::string task;
  double accuracy = 0.0;
  double class_accuracy[2] = {0.0, 0.0};
  int n_train = 0, n_test = 0;
  bool degenerate = false;  // single-class task
};

// Two-hidden-layer MLP probe on per-sample features (binary labels).
ProbeReport probe_features(const std::vector<std::vector<double>>& features,
                           const std::vector<int>& labels, std::uint64_t seed,
                           const std::string& task);

// Probe on the global posterior means of every sample.
ProbeReport probe_global(const Model& model, const std::vector<WindowedSample>& samples,
                         const std::vector<int>& labels, std::uint64_t seed,
                         const std::string& task = "global_class");

// Per-sample global posterior means, one row per sample.
std::vector<std::vector<double>> global_means(const Model& model,
                                              const std::vector<WindowedSample>& samples);
// Time-averaged local posterior means, one row per sample (d_l columns).
std::vector<std::vector<double>> local_mean_summaries(const Model& model,
                                                      const std::vector<WindowedSample>& samples);

struct TrendFit {
  double slope = 0.0;
  double intercept = 0.0;
};

// Ordinary least squares over observed entries; mask may be empty (= all
// observed). Throws on fewer than two observed points.
TrendFit fit_trend(std::span<const double> values, std::span<const double> mask, double dt = 1.0);

// Dominant periodogram bin (1..n/2) of the detrended series. Requires
// length >= 8 and a non-constant detrended signal.
int dominant_frequency(std::span<const double> series);

struct SwapCase {
  std::string source_id, global_donor_id;
  int gen_trend_sign = 0;
  int expected_trend_sign = 0;
  int gen_freq_class = 0;
  int expected_freq_class = 0;
};

struct SwapReport {
  double slope_agreement = 0.0;
  double frequency_preservation = 0.0;
  int n_pairs = 0;
  std::vector<SwapCase> cases;
};

// For pairs (i, j) with differing global classes, decodes Dec(Z_l^i, z_g^j)
// and scores the generated series against class references measured from
// the labeled data: trend sign per global class, dominant-frequency class
// per local class.
SwapReport counterfactual_swap_eval(const Model& model,
                                    const std::vector<WindowedSample>& samples,
                                    std::uint64_t seed);

// Histogram mutual information (16x16 equal-mass bins), in nats.
double mi_from_values(std::span<const double> a, std::span<const double> b);

// MI between the global posterior means and the time-averaged local means.
// Multi-dimensional latents are pooled onto their first principal direction.
double mi_diagnostic(const Model& model, const std::vector<WindowedSample>& samples);

struct ForecastRow {
  std::string sample_id;
  int feature = 0;
  int step = 0;
  double actual = 0.0;
  bool observed = false;
  double predicted = 0.0;
  double persistence = 0.0;
  double latent_std = 0.0;  // predictive latent std of the step's window
};

struct ForecastScores {
  double mse_model = 0.0;
  double mse_persistence = 0.0;
  double nll_model = 0.0;
  int n_points = 0;
};

struct ForecastResult {
  ForecastScores scores;
  std::vector<ForecastRow> rows;
};

// Encodes the first t_w - horizon windows, extends the local latents with
// the GP predictive (per dimension), decodes with the history z_g and
// scores the held-out windows. Persistence repeats the last history window.
ForecastResult forecast_eval(const Model& model, const std::vector<WindowedSample>& samples,
                             int horizon_windows);

}  // namespace lgts
