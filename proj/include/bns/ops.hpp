#pragma once

// Differentiable tensor operations. Shapes never broadcast implicitly;
// row-wise bias addition is its own op (add_row).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "bns/autograd.hpp"

namespace bns {

namespace detail {

inline void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
  }
}

inline void require_rank(const Var& a, std::size_t rank, const char* op) {
  if (a.value().rank() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got shape " +
                     shape_string(a.shape()));
  }
}

template <typename Fwd, typename Deriv>
Var unary(const Var& x, const char* op, Fwd fwd, Deriv deriv) {
  Tensor out(x.shape());
  const auto in = x.value().data();
  auto o = out.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = fwd(in[i]);
  return make_result(std::move(out), {x}, op, [deriv](Node& self) {
    Node& p = *self.parents[0];
    if (!p.requires_grad) return;
    auto g = p.grad_buffer().data();
    const auto xin = p.value.data();
    const auto y = self.value.data();
    const auto up = self.grad.data();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += up[i] * deriv(xin[i], y[i]);
  });
}

}  // namespace detail

// ---- elementwise ---------------------------------------------------------

inline Var add(const Var& a, const Var& b) {
  detail::require_same_shape(a, b, "add");
  Tensor out = a.value();
  auto o = out.data();
  const auto bv = b.value().data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] += bv[i];
  return detail::make_result(std::move(out), {a, b}, "add", [](Node& self) {
    detail::accumulate(*self.parents[0], self.grad.data());
    detail::accumulate(*self.parents[1], self.grad.data());
  });
}

inline Var sub(const Var& a, const Var& b) {
  detail::require_same_shape(a, b, "sub");
  Tensor out = a.value();
  auto o = out.data();
  const auto bv = b.value().data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] -= bv[i];
  return detail::make_result(std::move(out), {a, b}, "sub", [](Node& self) {
    detail::accumulate(*self.parents[0], self.grad.data());
    Node& p = *self.parents[1];
    if (!p.requires_grad) return;
    auto g = p.grad_buffer().data();
    const auto up = self.grad.data();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] -= up[i];
  });
}

/// Hadamard product.
inline Var mul(const Var& a, const Var& b) {
  detail::require_same_shape(a, b, "mul");
  Tensor out = a.value();
  auto o = out.data();
  const auto bv = b.value().data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] *= bv[i];
  return detail::make_result(std::move(out), {a, b}, "mul", [](Node& self) {
    const auto up = self.grad.data();
    for (int k = 0; k < 2; ++k) {
      Node& p = *self.parents[k];
      if (!p.requires_grad) continue;
      const auto other = self.parents[1 - k]->value.data();
      auto g = p.grad_buffer().data();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += up[i] * other[i];
    }
  });
}

inline Var scale(const Var& x, double c) {
  return detail::unary(
      x, "scale", [c](double v) { return c * v; }, [c](double, double) { return c; });
}

inline Var neg(const Var& x) { return scale(x, -1.0); }

inline Var sigmoid(const Var& x) {
  return detail::unary(
      x, "sigmoid",
      [](double v) {
        if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

inline Var tanh(const Var& x) {
  return detail::unary(
      x, "tanh", [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

inline Var relu(const Var& x) {
  return detail::unary(
      x, "relu", [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

/// Elementwise multiplication by a constant mask (dropout, masking).
inline Var mul_const(const Var& x, const Tensor& mask) {
  if (mask.shape() != x.shape()) {
    throw ShapeError("mul_const: shape mismatch " + shape_string(x.shape()) + " vs " +
                     shape_string(mask.shape()));
  }
  Tensor out = x.value();
  auto o = out.data();
  const auto m = mask.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] *= m[i];
  return detail::make_result(std::move(out), {x}, "mul_const", [mask](Node& self) {
    Node& p = *self.parents[0];
    if (!p.requires_grad) return;
    auto g = p.grad_buffer().data();
    const auto up = self.grad.data();
    const auto m = mask.data();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += up[i] * m[i];
  });
}

// ---- linear algebra ------------------------------------------------------

/// (m x k) * (k x n) -> (m x n)
inline Var matmul(const Var& a, const Var& b) {
  detail::require_rank(a, 2, "matmul");
  detail::require_rank(b, 2, "matmul");
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  if (b.shape()[0] != k) {
    throw ShapeError("matmul: inner dimensions differ " + shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
  }
  Tensor out(Shape{m, n});
  const auto av = a.value().data();
  const auto bv = b.value().data();
  auto o = out.data();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = av[i * k + p];
      if (aip == 0.0) continue;
      const double* brow = &bv[p * n];
      double* orow = &o[i * n];
      for (std::size_t j = 0; j < n; ++j) orow[j] += aip * brow[j];
    }
  }
  return detail::make_result(std::move(out), {a, b}, "matmul", [m, k, n](Node& self) {
    const auto up = self.grad.data();
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    if (pa.requires_grad) {
      // dA = dOut * B^T
      auto ga = pa.grad_buffer().data();
      const auto bv = pb.value.data();
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          double s = 0.0;
          for (std::size_t j = 0; j < n; ++j) s += up[i * n + j] * bv[p * n + j];
          ga[i * k + p] += s;
        }
      }
    }
    if (pb.requires_grad) {
      // dB = A^T * dOut
      auto gb = pb.grad_buffer().data();
      const auto av = pa.value.data();
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          const double aip = av[i * k + p];
          if (aip == 0.0) continue;
          for (std::size_t j = 0; j < n; ++j) gb[p * n + j] += aip * up[i * n + j];
        }
      }
    }
  });
}

inline Var transpose(const Var& a) {
  detail::require_rank(a, 2, "transpose");
  const std::size_t m = a.shape()[0], n = a.shape()[1];
  Tensor out(Shape{n, m});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out.at(j, i) = a.value().at(i, j);
  return detail::make_result(std::move(out), {a}, "transpose", [m, n](Node& self) {
    Node& p = *self.parents[0];
    if (!p.requires_grad) return;
    Tensor& g = p.grad_buffer();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) g.at(i, j) += self.grad.at(j, i);
  });
}

/// Adds a length-n vector to every row of an (m x n) matrix.
inline Var add_row(const Var& a, const Var& bias) {
  detail::require_rank(a, 2, "add_row");
  detail::require_rank(bias, 1, "add_row");
  const std::size_t m = a.shape()[0], n = a.shape()[1];
  if (bias.shape()[0] != n) {
    throw ShapeError("add_row: bias " + shape_string(bias.shape()) + " does not fit rows of " +
                     shape_string(a.shape()));
  }
  Tensor out = a.value();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out.at(i, j) += bias.value()[j];
  return detail::make_result(std::move(out), {a, bias}, "add_row", [m, n](Node& self) {
    detail::accumulate(*self.parents[0], self.grad.data());
    Node& pb = *self.parents[1];
    if (!pb.requires_grad) return;
    auto g = pb.grad_buffer().data();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) g[j] += self.grad.at(i, j);
  });
}

// ---- reductions ----------------------------------------------------------

inline Var sum(const Var& x) {
  double s = 0.0;
  for (double v : x.value().data()) s += v;
  return detail::make_result(Tensor::scalar(s), {x}, "sum", [](Node& self) {
    Node& p = *self.parents[0];
    if (!p.requires_grad) return;
    const double up = self.grad[0];
    for (double& g : p.grad_buffer().data()) g += up;
  });
}

inline Var mean(const Var& x) {
  if (x.value().size() == 0) throw ShapeError("mean of empty tensor");
  return scale(sum(x), 1.0 / static_cast<double>(x.value().size()));
}

/// Column-wise maximum over the rows of an (m x n) matrix -> (n). Ties
/// route the gradient to the first maximal row.
inline Var max_rows(const Var& x) {
  detail::require_rank(x, 2, "max_rows");
  const std::size_t m = x.shape()[0], n = x.shape()[1];
  if (m == 0) throw ShapeError("max_rows: no rows");
  Tensor out(Shape{n});
  std::vector<std::size_t> arg(n, 0);
  for (std::size_t j = 0; j < n; ++j) {
    double best = x.value().at(0, j);
    for (std::size_t i = 1; i < m; ++i) {
      if (x.value().at(i, j) > best) {
        best = x.value().at(i, j);
        arg[j] = i;
      }
    }
    out[j] = best;
  }
  return detail::make_result(std::move(out), {x}, "max_rows", [arg, n](Node& self) {
    Node& p = *self.parents[0];
    if (!p.requires_grad) return;
    Tensor& g = p.grad_buffer();
    for (std::size_t j = 0; j < n; ++j) g.at(arg[j], j) += self.grad[j];
  });
}

// ---- normalizers ---------------------------------------------------------

namespace detail {

/// Softmax along `axis` of a rank-1 or rank-2 tensor, scaled by `sign`
/// (+1 softmax, -1 softmin). Rows are shifted by their extreme value first.
inline Var normalize_exp(const Var& x, std::size_t axis, double sign, const char* op) {
  const Tensor& in = x.value();
  if (in.rank() != 1 && in.rank() != 2) {
    throw ShapeError(std::string(op) + ": rank-1 or rank-2 input required, got " +
                     shape_string(in.shape()));
  }
  if (axis >= in.rank()) throw ShapeError(std::string(op) + ": axis out of range");
  const Tensor view = in.rank() == 1 ? in.reshaped(Shape{1, in.size()}) : in;
  const std::size_t rank = in.rank();
  const std::size_t m = view.dim(0), n = view.dim(1);
  // lanes are rows when normalizing along the last axis, columns otherwise
  const bool along_cols = rank == 2 && axis == 0;
  const std::size_t lanes = along_cols ? n : m;
  const std::size_t len = along_cols ? m : n;
  auto index = [=](std::size_t lane, std::size_t t) { return along_cols ? t * n + lane : lane * n + t; };

  Tensor out(in.shape());
  const auto v = view.data();
  auto o = out.data();
  for (std::size_t lane = 0; lane < lanes; ++lane) {
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < len; ++t) top = std::max(top, sign * v[index(lane, t)]);
    double z = 0.0;
    for (std::size_t t = 0; t < len; ++t) {
      const double e = std::exp(sign * v[index(lane, t)] - top);
      o[index(lane, t)] = e;
      z += e;
    }
    for (std::size_t t = 0; t < len; ++t) o[index(lane, t)] /= z;
  }
  return make_result(std::move(out), {x}, op, [=](Node& self) {
    Node& p = *self.parents[0];
    if (!p.requires_grad) return;
    auto g = p.grad_buffer().data();
    const auto y = self.value.data();
    const auto up = self.grad.data();
    for (std::size_t lane = 0; lane < lanes; ++lane) {
      double dot = 0.0;
      for (std::size_t t = 0; t < len; ++t) dot += up[index(lane, t)] * y[index(lane, t)];
      for (std::size_t t = 0; t < len; ++t) {
        const std::size_t i = index(lane, t);
        g[i] += sign * y[i] * (up[i] - dot);
      }
    }
  });
}

}  // namespace detail

/// exp(x_i) / sum_j exp(x_j) along `axis`.
inline Var softmax(const Var& x, std::size_t axis) { return detail::normalize_exp(x, axis, 1.0, "softmax"); }

/// exp(-x_i) / sum_j exp(-x_j) along `axis`: softmax of the negated input,
/// so the smallest entry receives the largest weight.
inline Var softmin(const Var& x, std::size_t axis) { return detail::normalize_exp(x, axis, -1.0, "softmin"); }

// ---- shape manipulation --------------------------------------------------

inline Var reshape(const Var& x, Shape shape) {
  if (shape_size(shape) != x.value().size()) {
    throw ShapeError("reshape: cannot view " + shape_string(x.shape()) + " as " + shape_string(shape));
  }
  return detail::make_result(x.value().reshaped(std::move(shape)), {x}, "reshape", [](Node& self) {
    detail::accumulate(*self.parents[0], self.grad.data());
  });
}

/// Concatenates along `axis`. Rank-1 inputs join end to end; rank-2 inputs
/// join as rows (axis 0) or columns (axis 1).
inline Var concat(const std::vector<Var>& parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  const std::size_t rank = parts[0].value().rank();
  if (rank != 1 && rank != 2) throw ShapeError("concat: rank-1 or rank-2 inputs required");
  if (axis >= rank) throw ShapeError("concat: axis out of range");
  for (const auto& p : parts) {
    if (p.value().rank() != rank) {
      throw ShapeError("concat: rank mismatch " + shape_string(parts[0].shape()) + " vs " +
                       shape_string(p.shape()));
    }
    if (rank == 2 && p.shape()[1 - axis] != parts[0].shape()[1 - axis]) {
      throw ShapeError("concat: shape mismatch " + shape_string(parts[0].shape()) + " vs " +
                       shape_string(p.shape()));
    }
  }
  // treat rank-1 as a single row joined along columns
  const bool by_cols = rank == 1 || axis == 1;
  const std::size_t rows = rank == 1 ? 1 : parts[0].shape()[0];
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const auto& p : parts) {
    const std::size_t w = by_cols ? p.value().cols() : p.shape()[0];
    widths.push_back(w);
    total += w;
  }
  Shape shape = rank == 1 ? Shape{total} : (by_cols ? Shape{rows, total} : Shape{total, parts[0].shape()[1]});
  Tensor out(shape);
  auto o = out.data();
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const auto src = parts[k].value().data();
    if (by_cols) {
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < widths[k]; ++c) o[r * total + offset + c] = src[r * widths[k] + c];
    } else {
      std::copy(src.begin(), src.end(), o.begin() + static_cast<std::ptrdiff_t>(offset * out.cols()));
    }
    offset += widths[k];
  }
  return detail::make_result(std::move(out), parts, "concat", [=](Node& self) {
    const auto up = self.grad.data();
    std::size_t off = 0;
    for (std::size_t k = 0; k < self.parents.size(); ++k) {
      Node& p = *self.parents[k];
      if (p.requires_grad) {
        auto g = p.grad_buffer().data();
        if (by_cols) {
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < widths[k]; ++c) g[r * widths[k] + c] += up[r * total + off + c];
        } else {
          const std::size_t base = off * self.value.cols();
          for (std::size_t i = 0; i < g.size(); ++i) g[i] += up[base + i];
        }
      }
      off += widths[k];
    }
  });
}

/// Stacks identically-shaped tensors along a new leading axis.
inline Var stack(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("stack: no inputs");
  for (const auto& p : parts) detail::require_same_shape(parts[0], p, "stack");
  const std::size_t n = parts[0].value().size();
  Shape shape{parts.size()};
  for (std::size_t d : parts[0].shape()) shape.push_back(d);
  Tensor out(shape);
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const auto src = parts[k].value().data();
    std::copy(src.begin(), src.end(), out.data().begin() + static_cast<std::ptrdiff_t>(k * n));
  }
  return detail::make_result(std::move(out), parts, "stack", [n](Node& self) {
    for (std::size_t k = 0; k < self.parents.size(); ++k) {
      detail::accumulate(*self.parents[k], self.grad.data().subspan(k * n, n));
    }
  });
}

/// Half-open slice [begin, end) along `axis` of a rank-1 or rank-2 tensor.
inline Var slice(const Var& x, std::size_t axis, std::size_t begin, std::size_t end) {
  const Tensor& in = x.value();
  if (in.rank() != 1 && in.rank() != 2) throw ShapeError("slice: rank-1 or rank-2 input required");
  if (axis >= in.rank() || begin > end || end > in.dim(axis)) {
    throw ShapeError("slice: range [" + std::to_string(begin) + "," + std::to_string(end) +
                     ") invalid for axis " + std::to_string(axis) + " of " + shape_string(in.shape()));
  }
  const bool by_cols = in.rank() == 1 || axis == 1;
  const std::size_t rows = in.rows(), cols = in.cols();
  const std::size_t width = end - begin;
  Shape shape = in.rank() == 1 ? Shape{width} : (by_cols ? Shape{rows, width} : Shape{width, cols});
  Tensor out(shape);
  if (by_cols) {
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < width; ++c) out[r * width + c] = in[r * cols + begin + c];
  } else {
    std::copy(in.data().begin() + static_cast<std::ptrdiff_t>(begin * cols),
              in.data().begin() + static_cast<std::ptrdiff_t>(end * cols), out.data().begin());
  }
  return detail::make_result(std::move(out), {x}, "slice", [=](Node& self) {
    Node& p = *self.parents[0];
    if (!p.requires_grad) return;
    auto g = p.grad_buffer().data();
    const auto up = self.grad.data();
    if (by_cols) {
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < width; ++c) g[r * cols + begin + c] += up[r * width + c];
    } else {
      for (std::size_t i = 0; i < up.size(); ++i) g[begin * cols + i] += up[i];
    }
  });
}

/// Row `r` of a matrix as a rank-1 tensor.
inline Var row(const Var& x, std::size_t r) {
  detail::require_rank(x, 2, "row");
  return reshape(slice(x, 0, r, r + 1), Shape{x.shape()[1]});
}

/// Treats a rank-1 tensor as a (1 x n) matrix.
inline Var as_row(const Var& v) {
  detail::require_rank(v, 1, "as_row");
  return reshape(v, Shape{1, v.shape()[0]});
}

// ---- lookup --------------------------------------------------------------

/// Output row g is the sum of table rows listed in groups[g]. Row
/// `frozen_row` never receives gradient (padding).
inline Var gather_sum(const Var& table, const std::vector<std::vector<std::size_t>>& groups,
                      std::size_t frozen_row = static_cast<std::size_t>(-1)) {
  detail::require_rank(table, 2, "gather_sum");
  const std::size_t vocab = table.shape()[0], d = table.shape()[1];
  Tensor out(Shape{groups.size(), d});
  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    for (std::size_t id : groups[gi]) {
      if (id >= vocab) {
        throw ShapeError("embedding id " + std::to_string(id) + " out of range for table with " +
                         std::to_string(vocab) + " rows");
      }
      const auto src = table.value().row(id);
      auto dst = out.row(gi);
      for (std::size_t j = 0; j < d; ++j) dst[j] += src[j];
    }
  }
  return detail::make_result(std::move(out), {table}, "gather_sum", [groups, frozen_row, d](Node& self) {
    Node& p = *self.parents[0];
    if (!p.requires_grad) return;
    Tensor& g = p.grad_buffer();
    for (std::size_t gi = 0; gi < groups.size(); ++gi) {
      const auto up = self.grad.row(gi);
      for (std::size_t id : groups[gi]) {
        if (id == frozen_row) continue;
        auto dst = g.row(id);
        for (std::size_t j = 0; j < d; ++j) dst[j] += up[j];
      }
    }
  });
}

// ---- convolution support -------------------------------------------------

/// Unfolds a (channels x length) input into sliding patches of width k:
/// output row p is [x[0, p..p+k), x[1, p..p+k), ...], shape
/// (length - k + 1) x (channels * k).
inline Var unfold1d(const Var& x, std::size_t k) {
  detail::require_rank(x, 2, "unfold1d");
  const std::size_t channels = x.shape()[0], length = x.shape()[1];
  if (k == 0 || k > length) {
    throw ShapeError("unfold1d: kernel width " + std::to_string(k) + " does not fit length " +
                     std::to_string(length));
  }
  const std::size_t positions = length - k + 1, width = channels * k;
  Tensor out(Shape{positions, width});
  for (std::size_t p = 0; p < positions; ++p)
    for (std::size_t c = 0; c < channels; ++c)
      for (std::size_t j = 0; j < k; ++j) out.at(p, c * k + j) = x.value().at(c, p + j);
  return detail::make_result(std::move(out), {x}, "unfold1d", [=](Node& self) {
    Node& px = *self.parents[0];
    if (!px.requires_grad) return;
    Tensor& g = px.grad_buffer();
    for (std::size_t p = 0; p < positions; ++p)
      for (std::size_t c = 0; c < channels; ++c)
        for (std::size_t j = 0; j < k; ++j) g.at(c, p + j) += self.grad.at(p, c * k + j);
  });
}

// ---- loss ----------------------------------------------------------------

inline constexpr double kLogClamp = 1e-12;

/// Binary cross-entropy on the positive-class probability:
/// -[y log p + (1 - y) log(1 - p)], logs clamped at kLogClamp.
inline Var binary_cross_entropy(const Var& p_positive, int label) {
  if (label != 0 && label != 1) throw Error("cross_entropy: label must be 0 or 1, got " + std::to_string(label));
  if (p_positive.value().size() != 1) throw ShapeError("cross_entropy: scalar probability required");
  const double p = p_positive.value()[0];
  const double y = label;
  const double a = std::max(p, kLogClamp);
  const double b = std::max(1.0 - p, kLogClamp);
  const double loss = -(y * std::log(a) + (1.0 - y) * std::log(b));
  return detail::make_result(Tensor::scalar(loss), {p_positive}, "cross_entropy", [=](Node& self) {
    Node& pp = *self.parents[0];
    if (!pp.requires_grad) return;
    double d = 0.0;
    if (y == 1.0 && p > kLogClamp) d -= 1.0 / p;
    if (y == 0.0 && 1.0 - p > kLogClamp) d += 1.0 / (1.0 - p);
    pp.grad_buffer()[0] += self.grad[0] * d;
  });
}

/// Cross-entropy for a 2-class probability vector (index 1 is the
/// positive class).
inline Var cross_entropy(const Var& probs, int label) {
  if (probs.value().rank() != 1 || probs.value().size() != 2) {
    throw ShapeError("cross_entropy: expected a 2-class probability vector, got " + shape_string(probs.shape()));
  }
  return binary_cross_entropy(slice(probs, 0, 1, 2), label);
}

/// Mean cross-entropy over a (batch x 2) probability matrix.
inline Var cross_entropy(const Var& probs, std::span<const int> labels) {
  detail::require_rank(probs, 2, "cross_entropy");
  if (probs.shape()[0] != labels.size() || probs.shape()[1] != 2) {
    throw ShapeError("cross_entropy: " + shape_string(probs.shape()) + " does not match " +
                     std::to_string(labels.size()) + " labels");
  }
  std::vector<Var> terms;
  for (std::size_t i = 0; i < labels.size(); ++i) terms.push_back(cross_entropy(row(probs, i), labels[i]));
  return mean(stack(terms));
}

}  // namespace bns
