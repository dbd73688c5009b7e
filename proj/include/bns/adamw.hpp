#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "bns/autograd.hpp"

namespace bns {

struct AdamWOptions {
  double learning_rate = 1e-4;
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// AdamW with decoupled weight decay:
///   m <- b1 m + (1 - b1) g,  v <- b2 v + (1 - b2) g^2
///   theta <- theta - lr * (m_hat / (sqrt(v_hat) + eps) + wd * theta)
class AdamW {
 public:
  AdamW(std::vector<Var> params, AdamWOptions options) : params_(std::move(params)), options_(options) {
    for (const auto& p : params_) {
      first_.emplace_back(p.shape(), 0.0);
      second_.emplace_back(p.shape(), 0.0);
    }
  }

  /// Applies one update from the gradients currently stored on the
  /// parameters. Parameters with no gradient are treated as g = 0.
  void step() {
    ++step_;
    const double bc1 = 1.0 - std::pow(options_.beta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(options_.beta2, static_cast<double>(step_));
    for (std::size_t k = 0; k < params_.size(); ++k) {
      const Tensor grad = params_[k].grad();
      update(params_[k].mutable_value().data(), grad.data(), first_[k].data(), second_[k].data(), bc1, bc2);
    }
  }

  void zero_grad() {
    for (auto& p : params_) p.zero_grad();
  }

  std::size_t step_count() const noexcept { return step_; }
  const AdamWOptions& options() const noexcept { return options_; }
  const std::vector<Tensor>& first_moments() const noexcept { return first_; }
  const std::vector<Tensor>& second_moments() const noexcept { return second_; }

 private:
  void update(std::span<double> theta, std::span<const double> g, std::span<double> m, std::span<double> v,
              double bc1, double bc2) const {
    if (g.size() != theta.size()) throw ShapeError("adamw: gradient and parameter sizes differ");
    const auto& o = options_;
    for (std::size_t i = 0; i < theta.size(); ++i) {
      m[i] = o.beta1 * m[i] + (1.0 - o.beta1) * g[i];
      v[i] = o.beta2 * v[i] + (1.0 - o.beta2) * g[i] * g[i];
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      theta[i] -= o.learning_rate * (m_hat / (std::sqrt(v_hat) + o.epsilon) + o.weight_decay * theta[i]);
    }
  }

  std::vector<Var> params_;
  AdamWOptions options_;
  std::vector<Tensor> first_;
  std::vector<Tensor> second_;
  std::size_t step_ = 0;
};

}  // namespace bns
