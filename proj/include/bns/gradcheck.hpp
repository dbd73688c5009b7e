#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "bns/autograd.hpp"

namespace bns {

struct GradCheckResult {
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;  // max |a - n|
  std::size_t coordinates = 0;
};

/// Compares backward() against central differences
/// (f(x + h e_i) - f(x - h e_i)) / 2h for every coordinate of every leaf.
/// The error per coordinate is |a - n| / max(|a|, |n|, 1e-8).
///
/// `f` rebuilds the graph from the current leaf values on each call.
inline GradCheckResult check_gradients(const std::function<Var()>& f, std::vector<Var> leaves, double h) {
  if (h <= 0.0) throw Error("check_gradients: step must be positive");
  for (auto& leaf : leaves) leaf.zero_grad();
  Var out = f();
  if (out.value().size() != 1) {
    throw ShapeError("check_gradients: function must be scalar-valued, got " + shape_string(out.shape()));
  }
  backward(out);

  GradCheckResult result;
  for (auto& leaf : leaves) {
    const Tensor analytic = leaf.grad();
    auto x = leaf.mutable_value().data();
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double saved = x[i];
      x[i] = saved + h;
      const double plus = f().item();
      x[i] = saved - h;
      const double minus = f().item();
      x[i] = saved;
      const double numeric = (plus - minus) / (2.0 * h);
      const double a = analytic[i];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
      result.max_rel_error = std::max(result.max_rel_error, std::abs(a - numeric) / denom);
      result.max_abs_error = std::max(result.max_abs_error, std::abs(a - numeric));
      ++result.coordinates;
    }
  }
  for (auto& leaf : leaves) leaf.zero_grad();
  return result;
}

/// Single-input form: `f` maps a tensor variable to a scalar.
inline double check_gradients(const std::function<Var(const Var&)>& f, const Tensor& x, double h) {
  Var leaf = parameter(x);
  return check_gradients([&] { return f(leaf); }, {leaf}, h).max_rel_error;
}

}  // namespace bns
