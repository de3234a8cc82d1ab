#pragma once

#include <cmath>
#include <vector>

#include "rfgan/autodiff.hpp"
#include "rfgan/tensor.hpp"

namespace rfgan::optim {

// ADAM over a fixed parameter group. decay_rates are the two exponential
// moving-average coefficients.
template <typename T>
class Adam {
 public:
  Adam(std::vector<ad::Var<T>> params, double lr, double beta1, double beta2,
       double eps = 1e-8)
      : params_(std::move(params)), lr_(lr), b1_(beta1), b2_(beta2), eps_(eps) {
    for (const auto& p : params_) {
      m_.emplace_back(p->value.shape());
      v_.emplace_back(p->value.shape());
    }
  }

  void zero_grad() {
    for (auto& p : params_) {
      p->ensure_grad();
      p->grad.fill(T(0));
    }
  }

  void step() {
    ++t_;
    const T c1 = static_cast<T>(1.0 - std::pow(b1_, t_));
    const T c2 = static_cast<T>(1.0 - std::pow(b2_, t_));
    for (size_t k = 0; k < params_.size(); ++k) {
      Tensor<T>& p = params_[k]->value;
      Tensor<T>& g = params_[k]->grad;
      Tensor<T>& m = m_[k];
      Tensor<T>& v = v_[k];
      for (int64_t i = 0; i < p.numel(); ++i) {
        m[i] = static_cast<T>(b1_) * m[i] + static_cast<T>(1.0 - b1_) * g[i];
        v[i] = static_cast<T>(b2_) * v[i] + static_cast<T>(1.0 - b2_) * g[i] * g[i];
        T mhat = m[i] / c1;
        T vhat = v[i] / c2;
        p[i] -= static_cast<T>(lr_) * mhat / (std::sqrt(vhat) + static_cast<T>(eps_));
      }
    }
  }

  const std::vector<ad::Var<T>>& params() const { return params_; }

 private:
  std::vector<ad::Var<T>> params_;
  double lr_, b1_, b2_, eps_;
  int64_t t_ = 0;
  std::vector<Tensor<T>> m_, v_;
};

}  // namespace rfgan::optim
