#include "lgts/adam.hpp"

#include <cmath>

#include "lgts/errors.hpp"

namespace lgts {

Adam::Adam(std::vector<Tensor> params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const auto& p : params_) {
    m_.emplace_back(p.numel(), 0.0);
    v_.emplace_back(p.numel(), 0.0);
  }
}

void Adam::step() {
  ++step_;
  double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
  double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
  for (size_t k = 0; k < params_.size(); ++k) {
    auto& p = params_[k];
    const auto& g = p.grad();
    auto& m = m_[k];
    auto& v = v_[k];
    auto& w = p.mutable_values();
    for (size_t i = 0; i < w.size(); ++i) {
      double gi = i < g.size() ? g[i] : 0.0;
      if (!std::isfinite(gi)) {
        throw NumericError("adam: non-finite gradient in parameter '" + p.name() + "' at index " +
                           std::to_string(i));
      }
      m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * gi;
      v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * gi * gi;
      double mhat = m[i] / bc1;
      double vhat = v[i] / bc2;
      w[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
  }
}

void Adam::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

}  // namespace lgts
