#include "lgts/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "lgts/errors.hpp"

namespace lgts {

GradCheckReport grad_check(const std::function<Tensor()>& loss_builder,
                           std::vector<Tensor> params, double h) {
  for (auto& p : params) p.zero_grad();
  Tensor loss = loss_builder();
  backward(loss);

  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.size());
  for (auto& p : params) analytic.push_back(p.grad());

  GradCheckReport rep;
  for (size_t k = 0; k < params.size(); ++k) {
    auto& w = params[k].mutable_values();
    for (size_t i = 0; i < w.size(); ++i) {
      double saved = w[i];
      w[i] = saved + h;
      double fp = loss_builder().value();
      w[i] = saved - h;
      double fm = loss_builder().value();
      w[i] = saved;
      double num = (fp - fm) / (2.0 * h);
      double ana = i < analytic[k].size() ? analytic[k][i] : 0.0;
      double rel = std::abs(ana - num) / std::max(1.0, std::abs(ana));
      ++rep.checked;
      if (rel > rep.max_rel_err) {
        rep.max_rel_err = rel;
        rep.worst_param = params[k].name();
        rep.worst_index = static_cast<int>(i);
        rep.analytic = ana;
        rep.numeric = num;
      }
    }
  }
  return rep;
}

}  // namespace lgts
