#pragma once

#include <span>
#include <string>
#include <vector>

#include "lgts/linalg.hpp"

namespace lgts {

enum class KernelKind { rbf, cauchy, periodic };

std::string kernel_kind_name(KernelKind k);
KernelKind kernel_kind_from_name(const std::string& name);

struct KernelSpec {
  KernelKind kind = KernelKind::rbf;
  double length_scale = 1.0;
  double period = 0.0;       // periodic only
  double output_scale = 1.0; // sigma^2
  void validate() const;
};

double kernel_value(const KernelSpec& spec, double t1, double t2);

struct KernelMatrix {
  Mat k;        // jittered kernel matrix
  Mat chol;     // lower Cholesky factor of k
  double jitter = 0.0;
  double logdet = 0.0;
};

// Evaluates k over a strictly increasing grid, adds jitter*I and factors.
// On breakdown retries once at 1e-4 before giving up.
KernelMatrix kernel_matrix(const KernelSpec& spec, std::span<const double> times,
                           double jitter = 1e-6);

// Zero-mean GP prior for one latent dimension over window indices 0..t_w-1.
struct GpPriorDim {
  KernelSpec spec;
  int t_w = 0;
  Mat k;
  Mat chol;
  double jitter = 0.0;
  double logdet = 0.0;
};

struct GpPrior {
  std::vector<GpPriorDim> dims;
  static GpPrior build(const std::vector<KernelSpec>& specs, int t_w, double jitter = 1e-6);
};

// Kernel-per-dimension assignment: the cross product of kinds (outer) and
// length scales (inner), cycled to d_l entries.
std::vector<KernelSpec> default_kernel_assignment(const std::vector<KernelKind>& kinds,
                                                  const std::vector<double>& scales, int d_l);

}  // namespace lgts
