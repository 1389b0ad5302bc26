#include "lgts/kernels.hpp"

#include <cmath>
#include <numbers>

#include "lgts/errors.hpp"

namespace lgts {

std::string kernel_kind_name(KernelKind k) {
  switch (k) {
    case KernelKind::rbf: return "rbf";
    case KernelKind::cauchy: return "cauchy";
    case KernelKind::periodic: return "periodic";
  }
  return "?";
}

KernelKind kernel_kind_from_name(const std::string& name) {
  if (name == "rbf") return KernelKind::rbf;
  if (name == "cauchy") return KernelKind::cauchy;
  if (name == "periodic") return KernelKind::periodic;
  throw ValidationError("unknown kernel kind '" + name + "'");
}

void KernelSpec::validate() const {
  if (!(length_scale > 0)) throw ValidationError("kernel: length_scale must be positive");
  if (!(output_scale > 0)) throw ValidationError("kernel: output_scale must be positive");
  if (kind == KernelKind::periodic && !(period > 0))
    throw ValidationError("kernel: periodic kernel needs a positive period");
}

double kernel_value(const KernelSpec& spec, double t1, double t2) {
  double d = t1 - t2;
  double l = spec.length_scale;
  switch (spec.kind) {
    case KernelKind::rbf:
      return spec.output_scale * std::exp(-d * d / (2.0 * l * l));
    case KernelKind::cauchy:
      return spec.output_scale / (1.0 + d * d / (l * l));
    case KernelKind::periodic: {
      double s = std::sin(std::numbers::pi * d / spec.period);
      return spec.output_scale * std::exp(-2.0 * s * s / (l * l));
    }
  }
  return 0.0;
}

KernelMatrix kernel_matrix(const KernelSpec& spec, std::span<const double> times, double jitter) {
  spec.validate();
  int n = static_cast<int>(times.size());
  if (n == 0) throw ValidationError("kernel_matrix: empty time grid");
  for (int i = 1; i < n; ++i)
    if (!(times[i] > times[i - 1]))
      throw ValidationError("kernel_matrix: time grid must be strictly increasing");

  Mat k(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) {
      double v = kernel_value(spec, times[i], times[j]);
      k(i, j) = v;
      k(j, i) = v;
    }

  const double retry_jitter = 1e-4;
  for (double j : {jitter, jitter < retry_jitter ? retry_jitter : -1.0}) {
    if (j < 0) break;
    Mat kj = k;
    for (int i = 0; i < n; ++i) kj(i, i) += j;
    try {
      KernelMatrix out;
      out.chol = cholesky(kj);
      out.k = std::move(kj);
      out.jitter = j;
      out.logdet = logdet_from_chol(out.chol);
      return out;
    } catch (const CholeskyError&) {
      // retry handled by the loop
    }
  }
  throw NumericError("kernel_matrix: Cholesky failed at jitter " + std::to_string(retry_jitter) +
                     "; try a larger jitter");
}

GpPrior GpPrior::build(const std::vector<KernelSpec>& specs, int t_w, double jitter) {
  if (t_w < 1) throw ValidationError("GpPrior: t_w must be >= 1");
  std::vector<double> times(t_w);
  for (int i = 0; i < t_w; ++i) times[i] = static_cast<double>(i);
  GpPrior prior;
  prior.dims.reserve(specs.size());
  for (const auto& spec : specs) {
    KernelMatrix km = kernel_matrix(spec, times, jitter);
    prior.dims.push_back(
        {spec, t_w, std::move(km.k), std::move(km.chol), km.jitter, km.logdet});
  }
  return prior;
}

std::vector<KernelSpec> default_kernel_assignment(const std::vector<KernelKind>& kinds,
                                                  const std::vector<double>& scales, int d_l) {
  if (kinds.empty() || scales.empty()) throw ValidationError("kernel assignment: empty kinds or scales");
  std::vector<KernelSpec> specs;
  specs.reserve(d_l);
  int combos = static_cast<int>(kinds.size() * scales.size());
  for (int j = 0; j < d_l; ++j) {
    int c = j % combos;
    KernelSpec s;
    s.kind = kinds[c / scales.size()];
    s.length_scale = scales[c % scales.size()];
    // periodic needs an explicit period; leave unset so validation insists.
    specs.push_back(s);
  }
  return specs;
}

}  // namespace lgts
