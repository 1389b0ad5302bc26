#include "lgts/eval.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <numeric>
#include <random>

#include "lgts/adam.hpp"
#include "lgts/errors.hpp"
#include "lgts/gp_forecast.hpp"

namespace lgts {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

int sign_of(double v) { return v > 0 ? 1 : (v < 0 ? -1 : 0); }

// First principal direction projection for multi-dimensional feature rows.
std::vector<double> pool_first_pc(const std::vector<std::vector<double>>& rows) {
  int n = static_cast<int>(rows.size());
  int d = static_cast<int>(rows[0].size());
  if (d == 1) {
    std::vector<double> out(n);
    for (int i = 0; i < n; ++i) out[i] = rows[i][0];
    return out;
  }
  std::vector<double> mean(d, 0.0);
  for (const auto& r : rows)
    for (int j = 0; j < d; ++j) mean[j] += r[j];
  for (auto& m : mean) m /= n;
  // Power iteration on the covariance; deterministic start.
  std::vector<double> v(d, 0.0);
  v[0] = 1.0;
  std::vector<double> cv(d);
  for (int it = 0; it < 200; ++it) {
    std::fill(cv.begin(), cv.end(), 0.0);
    for (const auto& r : rows) {
      double dot = 0.0;
      for (int j = 0; j < d; ++j) dot += (r[j] - mean[j]) * v[j];
      for (int j = 0; j < d; ++j) cv[j] += dot * (r[j] - mean[j]);
    }
    double norm = std::sqrt(std::inner_product(cv.begin(), cv.end(), cv.begin(), 0.0));
    if (norm < 1e-12) break;
    for (int j = 0; j < d; ++j) v[j] = cv[j] / norm;
  }
  std::vector<double> out(n, 0.0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) out[i] += (rows[i][j] - mean[j]) * v[j];
  return out;
}

// Equal-mass bin index per value: rank-based, 16 bins.
std::vector<int> equal_mass_bins(std::span<const double> x, int bins) {
  int n = static_cast<int>(x.size());
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return x[a] < x[b]; });
  std::vector<int> out(n);
  for (int r = 0; r < n; ++r) {
    int b = static_cast<int>(static_cast<long long>(r) * bins / n);
    out[idx[r]] = std::min(b, bins - 1);
  }
  return out;
}

}  // namespace

Split train_test_split(int n, double test_frac, std::uint64_t seed) {
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  int n_test = std::max(1, static_cast<int>(std::lround(test_frac * n)));
  Split s;
  s.test.assign(idx.begin(), idx.begin() + n_test);
  s.train.assign(idx.begin() + n_test, idx.end());
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.test.begin(), s.test.end());
  return s;
}

ProbeReport probe_features(const std::vector<std::vector<double>>& features,
                           const std::vector<int>& labels, std::uint64_t seed,
                           const std::string& task) {
  if (features.size() != labels.size() || features.empty())
    throw ValidationError("probe: features/labels mismatch");
  int n = static_cast<int>(features.size());
  int d = static_cast<int>(features[0].size());

  // Map labels onto {0,1}; a single observed class is a degenerate task.
  std::vector<int> classes;
  for (int l : labels)
    if (std::find(classes.begin(), classes.end(), l) == classes.end()) classes.push_back(l);
  std::sort(classes.begin(), classes.end());
  ProbeReport rep;
  rep.task = task;
  if (classes.size() == 1) {
    rep.degenerate = true;
    rep.accuracy = 1.0;
    rep.class_accuracy[0] = 1.0;
    rep.n_train = n;
    return rep;
  }
  if (classes.size() != 2) throw ValidationError("probe: expected two classes, got " +
                                                 std::to_string(classes.size()));

  Split split = train_test_split(n, 0.2, seed);
  rep.n_train = static_cast<int>(split.train.size());
  rep.n_test = static_cast<int>(split.test.size());

  auto pack = [&](const std::vector<int>& rows, Tensor& x, std::vector<double>& y) {
    std::vector<double> vals;
    vals.reserve(rows.size() * d);
    y.clear();
    for (int r : rows) {
      vals.insert(vals.end(), features[r].begin(), features[r].end());
      y.push_back(labels[r] == classes[1] ? 1.0 : 0.0);
    }
    x = Tensor::constant(std::move(vals), {static_cast<int>(rows.size()), d});
  };
  Tensor x_train;
  std::vector<double> y_train;
  pack(split.train, x_train, y_train);

  const int h = 16;
  Rng rng(seed ^ 0x9e3779b97f4a7c15ull);
  auto glorot = [&](const std::string& nm, int fi, int fo) {
    double r = std::sqrt(6.0 / (fi + fo));
    std::uniform_real_distribution<double> u(-r, r);
    std::vector<double> w(static_cast<size_t>(fi) * fo);
    for (auto& v : w) v = u(rng);
    return Tensor::param(nm, std::move(w), {fi, fo});
  };
  Tensor w1 = glorot("probe.w1", d, h);
  Tensor b1 = Tensor::param("probe.b1", std::vector<double>(h, 0.0), {h});
  Tensor w2 = glorot("probe.w2", h, h);
  Tensor b2 = Tensor::param("probe.b2", std::vector<double>(h, 0.0), {h});
  Tensor w3 = glorot("probe.w3", h, 1);
  Tensor b3 = Tensor::param("probe.b3", std::vector<double>(1, 0.0), {1});
  std::vector<Tensor> params = {w1, b1, w2, b2, w3, b3};

  auto logits = [&](const Tensor& x) {
    Tensor h1 = tanh(add(matmul(x, w1), b1));
    Tensor h2 = tanh(add(matmul(h1, w2), b2));
    return add(matmul(h2, w3), b3);  // [n, 1]
  };

  Adam opt(params, AdamConfig{0.01, 0.9, 0.999, 1e-8});
  Tensor yt = Tensor::constant(y_train, {static_cast<int>(y_train.size()), 1});
  for (int epoch = 0; epoch < 300; ++epoch) {
    Tensor l = logits(x_train);
    // binary cross-entropy via softplus(l) - y*l
    Tensor loss = mean(sub(softplus(l), mul(yt, l)));
    opt.zero_grad();
    backward(loss);
    opt.step();
  }

  auto evaluate = [&](const std::vector<int>& rows) {
    Tensor x;
    std::vector<double> y;
    pack(rows, x, y);
    Tensor l = logits(x);
    int correct = 0;
    int class_n[2] = {0, 0}, class_c[2] = {0, 0};
    for (size_t i = 0; i < y.size(); ++i) {
      int pred = l.at(static_cast<int>(i)) > 0 ? 1 : 0;
      int truth = static_cast<int>(y[i]);
      class_n[truth]++;
      if (pred == truth) {
        ++correct;
        class_c[truth]++;
      }
    }
    ProbeReport r;
    r.accuracy = y.empty() ? 0.0 : static_cast<double>(correct) / y.size();
    for (int c = 0; c < 2; ++c)
      r.class_accuracy[c] = class_n[c] ? static_cast<double>(class_c[c]) / class_n[c] : 0.0;
    return r;
  };
  ProbeReport test = evaluate(split.test);
  rep.accuracy = test.accuracy;
  rep.class_accuracy[0] = test.class_accuracy[0];
  rep.class_accuracy[1] = test.class_accuracy[1];
  return rep;
}

std::vector<std::vector<double>> global_means(const Model& model,
                                              const std::vector<WindowedSample>& samples) {
  std::vector<std::vector<double>> out;
  out.reserve(samples.size());
  for (const auto& w : samples) {
    GlobalGaussian g = model.encode_global(w);
    out.push_back(g.mean.values());
  }
  return out;
}

std::vector<std::vector<double>> local_mean_summaries(const Model& model,
                                                      const std::vector<WindowedSample>& samples) {
  std::vector<std::vector<double>> out;
  out.reserve(samples.size());
  for (const auto& w : samples) {
    LocalPosterior lp = model.encode_local(w);
    std::vector<double> row(lp.dims.size(), 0.0);
    for (size_t j = 0; j < lp.dims.size(); ++j) {
      const auto& mu = lp.dims[j].mu.values();
      row[j] = std::accumulate(mu.begin(), mu.end(), 0.0) / mu.size();
    }
    out.push_back(std::move(row));
  }
  return out;
}

ProbeReport probe_global(const Model& model, const std::vector<WindowedSample>& samples,
                         const std::vector<int>& labels, std::uint64_t seed,
                         const std::string& task) {
  return probe_features(global_means(model, samples), labels, seed, task);
}

TrendFit fit_trend(std::span<const double> values, std::span<const double> mask, double dt) {
  if (!mask.empty() && mask.size() != values.size())
    throw ValidationError("fit_trend: mask length mismatch");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int n = 0;
  for (size_t i = 0; i < values.size(); ++i) {
    if (!mask.empty() && mask[i] == 0.0) continue;
    double t = dt * static_cast<double>(i);
    sx += t;
    sy += values[i];
    sxx += t * t;
    sxy += t * values[i];
    ++n;
  }
  if (n < 2) throw ValidationError("fit_trend: needs at least 2 observed points");
  double denom = n * sxx - sx * sx;
  if (denom == 0.0) throw ValidationError("fit_trend: degenerate time grid");
  TrendFit f;
  f.slope = (n * sxy - sx * sy) / denom;
  f.intercept = (sy - f.slope * sx) / n;
  return f;
}

int dominant_frequency(std::span<const double> series) {
  int n = static_cast<int>(series.size());
  if (n < 8) throw ValidationError("dominant_frequency: series shorter than 8");
  TrendFit f = fit_trend(series, {}, 1.0);
  std::vector<double> x(n);
  for (int i = 0; i < n; ++i) x[i] = series[i] - (f.intercept + f.slope * i);

  int best = 0;
  double best_p = 0.0, total = 0.0;
  for (int k = 1; k <= n / 2; ++k) {
    double re = 0, im = 0;
    for (int t = 0; t < n; ++t) {
      double a = 2.0 * std::numbers::pi * k * t / n;
      re += x[t] * std::cos(a);
      im -= x[t] * std::sin(a);
    }
    double p = re * re + im * im;
    total += p;
    if (p > best_p) {
      best_p = p;
      best = k;
    }
  }
  if (!(best_p > 1e-18) || total == 0.0)
    throw ValidationError("dominant_frequency: constant series after detrending");
  return best;
}

SwapReport counterfactual_swap_eval(const Model& model,
                                    const std::vector<WindowedSample>& samples,
                                    std::uint64_t seed) {
  // Class references measured from the labeled data.
  std::map<int, std::vector<double>> slopes_by_g;
  std::map<int, std::map<int, int>> bins_by_l;
  for (const auto& w : samples) {
    if (!w.global_class || !w.local_class) continue;
    std::vector<double> flat = unwindow(w);
    TrendFit f = fit_trend(std::span<const double>(flat.data(), w.t_len), {}, 1.0);
    slopes_by_g[*w.global_class].push_back(f.slope);
    bins_by_l[*w.local_class][dominant_frequency(std::span<const double>(flat.data(), w.t_len))]++;
  }
  if (slopes_by_g.size() != 2 || bins_by_l.size() != 2)
    throw ValidationError("counterfactual_swap_eval: needs two global and two local classes");

  std::map<int, int> trend_sign;  // global class -> expected slope sign
  for (auto& [g, slopes] : slopes_by_g) {
    double m = std::accumulate(slopes.begin(), slopes.end(), 0.0) / slopes.size();
    trend_sign[g] = sign_of(m);
  }
  std::map<int, int> ref_bin;  // local class -> majority dominant bin
  for (auto& [l, hist] : bins_by_l) {
    int best = 0, cnt = -1;
    for (auto& [b, c] : hist)
      if (c > cnt) {
        cnt = c;
        best = b;
      }
    ref_bin[l] = best;
  }
  auto classify_bin = [&](int bin) {
    int best_l = 0;
    double best_d = 1e300;
    for (auto& [l, b] : ref_bin) {
      double d = std::abs(bin - b);
      if (d < best_d) {
        best_d = d;
        best_l = l;
      }
    }
    return best_l;
  };

  // Deterministic donor pairing: next sample (cyclically) of the other
  // global class, after a seeded shuffle.
  std::vector<int> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  SwapReport rep;
  int slope_ok = 0, freq_ok = 0;
  for (size_t oi = 0; oi < order.size(); ++oi) {
    const WindowedSample& src = samples[order[oi]];
    if (!src.global_class || !src.local_class) continue;
    const WindowedSample* donor = nullptr;
    for (size_t k = 1; k <= order.size(); ++k) {
      const WindowedSample& cand = samples[order[(oi + k) % order.size()]];
      if (cand.global_class && *cand.global_class != *src.global_class) {
        donor = &cand;
        break;
      }
    }
    if (!donor) break;

    LocalPosterior lp = model.encode_local(src);
    std::vector<Tensor> cols;
    for (auto& gdim : lp.dims) cols.push_back(reshape(gdim.mu, {lp.t_w, 1}));
    Tensor z_l = cols.size() == 1 ? cols[0] : concat(cols, 1);
    GlobalGaussian qg = model.encode_global(*donor);
    Tensor gen = model.decode(qg.mean, z_l);

    WindowedSample tmp = src;
    std::vector<double> flat = unwindow(tmp, gen.values());
    std::span<const double> series(flat.data(), src.t_len);
    TrendFit f = fit_trend(series, {}, 1.0);
    int bin = dominant_frequency(series);

    SwapCase c;
    c.source_id = src.id;
    c.global_donor_id = donor->id;
    c.gen_trend_sign = sign_of(f.slope);
    c.expected_trend_sign = trend_sign[*donor->global_class];
    c.gen_freq_class = classify_bin(bin);
    c.expected_freq_class = *src.local_class;
    rep.cases.push_back(c);
    ++rep.n_pairs;
    if (c.gen_trend_sign == c.expected_trend_sign) ++slope_ok;
    if (c.gen_freq_class == c.expected_freq_class) ++freq_ok;
  }
  if (rep.n_pairs == 0) throw ValidationError("counterfactual_swap_eval: no valid pairs");
  rep.slope_agreement = static_cast<double>(slope_ok) / rep.n_pairs;
  rep.frequency_preservation = static_cast<double>(freq_ok) / rep.n_pairs;
  return rep;
}

double mi_from_values(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ValidationError("mi: length mismatch");
  int n = static_cast<int>(a.size());
  if (n < 50) throw ValidationError("mi: needs at least 50 samples, got " + std::to_string(n));
  const int bins = 16;
  std::vector<int> ba = equal_mass_bins(a, bins);
  std::vector<int> bb = equal_mass_bins(b, bins);
  std::vector<double> joint(static_cast<size_t>(bins) * bins, 0.0);
  std::vector<double> pa(bins, 0.0), pb(bins, 0.0);
  double w = 1.0 / n;
  for (int i = 0; i < n; ++i) {
    joint[static_cast<size_t>(ba[i]) * bins + bb[i]] += w;
    pa[ba[i]] += w;
    pb[bb[i]] += w;
  }
  double mi = 0.0;
  for (int i = 0; i < bins; ++i)
    for (int j = 0; j < bins; ++j) {
      double p = joint[static_cast<size_t>(i) * bins + j];
      if (p > 0) mi += p * std::log(p / (pa[i] * pb[j]));
    }
  return std::max(mi, 0.0);
}

double mi_diagnostic(const Model& model, const std::vector<WindowedSample>& samples) {
  auto g = global_means(model, samples);
  auto l = local_mean_summaries(model, samples);
  std::vector<double> gv = pool_first_pc(g);
  std::vector<double> lv = pool_first_pc(l);
  return mi_from_values(gv, lv);
}

ForecastResult forecast_eval(const Model& model, const std::vector<WindowedSample>& samples,
                             int horizon_windows) {
  if (horizon_windows < 1) throw ValidationError("forecast_eval: horizon must be >= 1");
  const ModelConfig& cfg = model.config();

  ForecastResult res;
  double se_model = 0.0, se_pers = 0.0;
  int n_obs = 0;

  for (const auto& w : samples) {
    int hist = w.t_w - horizon_windows;
    if (hist < 1)
      throw ValidationError("forecast_eval: horizon " + std::to_string(horizon_windows) +
                            " leaves no history for sample " + w.id + " with " +
                            std::to_string(w.t_w) + " windows");

    // History-only view of the sample.
    WindowedSample hw = w;
    hw.t_w = hist;
    hw.t_len = std::min(w.t_len, hist * w.delta);
    hw.xw.assign(w.xw.begin(), w.xw.begin() + static_cast<size_t>(hist) * w.d * w.delta);
    hw.mw.assign(w.mw.begin(), w.mw.begin() + static_cast<size_t>(hist) * w.d * w.delta);

    LocalPosterior lp = model.encode_local(hw);
    GlobalGaussian qg = model.encode_global(hw);

    std::vector<double> obs_times(hist), query_times(horizon_windows);
    for (int t = 0; t < hist; ++t) obs_times[t] = t;
    for (int q = 0; q < horizon_windows; ++q) query_times[q] = hist + q;

    // Predictive latent mean/std per dim per future window.
    std::vector<std::vector<double>> z_future(horizon_windows,
                                              std::vector<double>(cfg.d_l, 0.0));
    std::vector<std::vector<double>> z_std(horizon_windows, std::vector<double>(cfg.d_l, 0.0));
    for (int j = 0; j < cfg.d_l; ++j) {
      GpConditionResult cond = gp_condition(cfg.kernels[j], obs_times, lp.dims[j].mu.values(),
                                            query_times, cfg.jitter);
      for (int q = 0; q < horizon_windows; ++q) {
        z_future[q][j] = cond.mean[q];
        z_std[q][j] = std::sqrt(std::max(0.0, cond.cov(q, q)));
      }
    }

    std::vector<double> zf_flat;
    zf_flat.reserve(static_cast<size_t>(horizon_windows) * cfg.d_l);
    for (const auto& row : z_future) zf_flat.insert(zf_flat.end(), row.begin(), row.end());
    Tensor z_l = Tensor::constant(std::move(zf_flat), {horizon_windows, cfg.d_l});
    Tensor pred = model.decode(qg.mean, z_l);  // [horizon, d*delta]

    int cols = w.d * w.delta;
    const double* last_hist = w.xw.data() + static_cast<size_t>(hist - 1) * cols;
    for (int q = 0; q < horizon_windows; ++q) {
      const double* actual = w.xw.data() + static_cast<size_t>(hist + q) * cols;
      const double* amask = w.mw.data() + static_cast<size_t>(hist + q) * cols;
      double lat_std = 0.0;
      for (int j = 0; j < cfg.d_l; ++j) lat_std += z_std[q][j];
      lat_std /= cfg.d_l;
      for (int c = 0; c < cols; ++c) {
        int f = c / w.delta, off = c % w.delta;
        int step = (hist + q) * w.delta + off;
        if (step >= w.t_len) continue;  // padding
        ForecastRow row;
        row.sample_id = w.id;
        row.feature = f;
        row.step = step;
        row.actual = actual[c];
        row.observed = amask[c] != 0.0;
        row.predicted = pred.at(q * cols + c);
        row.persistence = last_hist[c];
        row.latent_std = lat_std;
        res.rows.push_back(row);
        if (row.observed) {
          double em = row.predicted - row.actual;
          double ep = row.persistence - row.actual;
          se_model += em * em;
          se_pers += ep * ep;
          ++n_obs;
        }
      }
    }
  }
  if (n_obs == 0) throw ValidationError("forecast_eval: no observed entries in the horizon");
  res.scores.mse_model = se_model / n_obs;
  res.scores.mse_persistence = se_pers / n_obs;
  res.scores.nll_model = 0.5 * se_model / n_obs + 0.5 * kLog2Pi;
  res.scores.n_points = n_obs;
  return res;
}

}  // namespace lgts
