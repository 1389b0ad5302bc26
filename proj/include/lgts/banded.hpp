#pragma once

#include <span>

#include "lgts/kernels.hpp"
#include "lgts/linalg.hpp"
#include "lgts/tensor.hpp"

namespace lgts {

// Multivariate Gaussian over a window sequence whose precision factors as
// B^T B with B upper bi-diagonal: b_diag on the diagonal (nonzero) and
// b_off on the superdiagonal. Covariance stays dense while sampling and
// log-determinants are O(t_w).
struct BandedGaussian {
  Tensor mu;      // [t_w]
  Tensor b_diag;  // [t_w]
  Tensor b_off;   // [t_w - 1]

  int t_w() const { return mu.numel(); }
  void validate() const;

  static BandedGaussian from_values(std::vector<double> mu, std::vector<double> b_diag,
                                    std::vector<double> b_off);
};

struct BandedDense {
  Mat precision;   // B^T B
  Mat covariance;  // (B^T B)^{-1}
};

// Dense expansion; intended for oracles and tests.
BandedDense band_to_dense(const BandedGaussian& g);

// Reparameterized draw mu + B^{-1} eps in O(t_w); differentiable w.r.t.
// mu, b_diag and b_off.
Tensor sample_banded(const BandedGaussian& g, std::span<const double> noise);

// log N(x; mu, (B^T B)^{-1}) = -1/2 ||B(x-mu)||^2 + sum log|b_diag| - t_w/2 log 2pi
Tensor log_prob_banded(const BandedGaussian& g, const Tensor& x);

// KL(N(mu, Sigma) || N(0, K)) in closed form with tr(K^{-1} Sigma) computed
// as ||L^{-1} B^{-1}||_F^2 via triangular solves.
Tensor kl_banded_to_gp(const BandedGaussian& g, const GpPriorDim& prior);

// Diagonal Gaussian with parameters (mean, log variance).
struct GlobalGaussian {
  Tensor mean;     // [d_g]
  Tensor log_var;  // [d_g]
};

// KL(q || N(0, I)) summed over dimensions.
Tensor kl_global(const GlobalGaussian& g);

// log density of the diagonal Gaussian q at v.
Tensor log_prob_diag(const Tensor& v, const GlobalGaussian& g);

}  // namespace lgts
