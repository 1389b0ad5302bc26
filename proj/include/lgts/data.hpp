#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace lgts {

// Multivariate series of d features over t_len steps with an observation
// mask (1 = measured). Class labels, when present, are evaluation-only
// ground truth; training never sees them.
struct TimeSeriesSample {
  std::string id;
  int d = 0;
  int t_len = 0;
  std::vector<double> values;  // d x t_len, row-major
  std::vector<double> mask;    // same layout, entries in {0,1}
  std::optional<int> global_class;
  std::optional<int> local_class;

  double value(int f, int t) const { return values[static_cast<size_t>(f) * t_len + t]; }
  double observed(int f, int t) const { return mask[static_cast<size_t>(f) * t_len + t]; }
};

struct Dataset {
  std::vector<TimeSeriesSample> samples;
  int d = 0;
  double dt = 1.0;  // grid step of the underlying time axis
  std::uint64_t seed = 0;
};

// One cell of the generative table: x(t) = alpha*(gamma*t + a*sin(b*t/2pi) + c) + noise.
struct SimCell {
  double gamma, a, b, c, alpha;
};

struct SimSpec {
  // cells[g][l] for global class g+1, local class l+1
  SimCell cells[2][2] = {
      {{0.05, 1.8, 40.0, -1.5, 0.5}, {0.05, 0.8, 20.0, -1.5, 0.8}},
      {{-0.05, 1.8, 40.0, 1.5, 0.5}, {-0.05, 0.8, 20.0, 1.5, 0.8}},
  };
  double noise_sigma = 0.1;
  int n = 500;
  int t_len = 100;
  double dt = 0.1;
  std::uint64_t seed = 7;

  void validate() const;  // n divisible by 4 for balanced classes
};

// Closed-form signal value for a cell at time t (no noise).
double sim_signal(const SimCell& cell, double t);

// Balanced draw over the four (global, local) cells; all-ones mask; labels
// attached for evaluation.
Dataset simulate(const SimSpec& spec);

// Sample cut into ceil(t_len/delta) windows of delta steps; the trailing
// remainder is zero-padded with mask 0. Row t of xw/mw holds the window's
// d x delta block, feature-major.
struct WindowedSample {
  std::string id;
  int t_w = 0, d = 0, delta = 0, t_len = 0;
  std::vector<double> xw, mw;  // t_w x (d*delta)
  std::optional<int> global_class;
  std::optional<int> local_class;
};

WindowedSample window_sample(const TimeSeriesSample& s, int delta);
std::vector<WindowedSample> window(const Dataset& ds, int delta);

// Flat d x t_len values from the windowed layout (padding dropped).
std::vector<double> unwindow(const WindowedSample& w, const std::vector<double>& xw);
std::vector<double> unwindow(const WindowedSample& w);

// CSV schema: header sample_id,step,f0..f{d-1}; one row per (sample, step);
// empty cells or NaN mark missing values. The manifest (JSON) carries n, d,
// per-sample lengths, labels, dt and the generator seed.
void save_csv(const Dataset& ds, const std::string& csv_path);
void save_manifest(const Dataset& ds, const std::string& manifest_path);
Dataset load_csv(const std::string& csv_path, const std::string& manifest_path = "");

}  // namespace lgts
