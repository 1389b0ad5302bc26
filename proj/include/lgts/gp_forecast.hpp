#pragma once

#include <span>
#include <vector>

#include "lgts/kernels.hpp"
#include "lgts/linalg.hpp"

namespace lgts {

struct GpConditionResult {
  std::vector<double> mean;  // per query point
  Mat cov;                   // query x query
};

// GP posterior at query_times given observed (times, values) under a
// zero-mean prior with the given kernel:
//   mean = K(q,o) K(o,o)^{-1} z
//   cov  = K(q,q) - K(q,o) K(o,o)^{-1} K(o,q)
// With no observations this returns the prior (zero mean, K(q,q)).
GpConditionResult gp_condition(const KernelSpec& spec, std::span<const double> obs_times,
                               std::span<const double> obs_values,
                               std::span<const double> query_times, double jitter = 1e-6);

}  // namespace lgts
