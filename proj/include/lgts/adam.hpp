#pragma once

#include <cstdint>
#include <vector>

#include "lgts/tensor.hpp"

namespace lgts {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Bias-corrected Adam over a fixed, ordered parameter list. Moment buffers
// are keyed by position, so update order is deterministic.
class Adam {
 public:
  Adam(std::vector<Tensor> params, AdamConfig cfg);

  // Applies one update in place from the parameters' current gradients.
  // Throws NumericError naming the parameter on a non-finite gradient.
  void step();
  void zero_grad();

  std::int64_t step_count() const { return step_; }
  const AdamConfig& config() const { return cfg_; }

 private:
  std::vector<Tensor> params_;
  AdamConfig cfg_;
  std::vector<std::vector<double>> m_, v_;
  std::int64_t step_ = 0;
};

}  // namespace lgts
