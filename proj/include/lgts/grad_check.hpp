#pragma once

#include <functional>
#include <string>
#include <vector>

#include "lgts/tensor.hpp"

namespace lgts {

struct GradCheckReport {
  double max_rel_err = 0.0;
  std::string worst_param;
  int worst_index = -1;
  double analytic = 0.0;
  double numeric = 0.0;
  int checked = 0;
};

// Compares the backward pass of loss_builder() against central finite
// differences for every element of every parameter. loss_builder must be a
// pure function of the parameter values (fix noise and inputs outside).
// Relative error is |analytic - numeric| / max(1, |analytic|).
GradCheckReport grad_check(const std::function<Tensor()>& loss_builder,
                           std::vector<Tensor> params, double h = 1e-5);

}  // namespace lgts
