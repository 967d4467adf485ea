#include "adcare/tensor/ops.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "adcare/error.h"

namespace adcare {

namespace {

using ImplPtr = std::shared_ptr<TensorImpl>;

// Builds the output tensor and, if any input needs grad, attaches the node.
template <typename Fn>
Tensor record(Shape shape, std::vector<double> data, std::vector<ImplPtr> inputs, const char* op,
              Fn&& rule) {
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = std::move(data);
  bool needs = false;
  if (NoGradGuard::grad_enabled())
    for (const auto& in : inputs) needs = needs || in->requires_grad;
  if (needs) {
    impl->requires_grad = true;
    auto node = std::make_shared<Node>();
    node->op = op;
    node->inputs = std::move(inputs);
    node->backward = std::forward<Fn>(rule);
    impl->node = std::move(node);
  }
  return Tensor(std::move(impl));
}

const ImplPtr& checked(const Tensor& t, const char* op) {
  if (!t.defined()) throw ContractError(std::string(op) + ": undefined tensor");
  return t.impl();
}

void require_rank(const Tensor& t, std::size_t rank, const char* op) {
  if (t.rank() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got shape " +
                         shape_to_string(t.shape()));
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_to_string(a.shape()) + " vs " +
                         shape_to_string(b.shape()));
  }
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  const auto& ia = checked(a, "matmul");
  const auto& ib = checked(b, "matmul");
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw DimensionError("matmul: incompatible shapes " + shape_to_string(a.shape()) + " and " +
                         shape_to_string(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<double> out(m * n, 0.0);
  const double* pa = ia->data.data();
  const double* pb = ib->data.data();
  for (std::size_t i = 0; i < m; ++i) {
    double* row = out.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = pa[i * k + p];
      if (av == 0.0) continue;
      const double* brow = pb + p * n;
      for (std::size_t j = 0; j < n; ++j) row[j] += av * brow[j];
    }
  }
  return record({m, n}, std::move(out), {ia, ib}, "matmul", [ia, ib, m, k, n](const TensorImpl& o) {
    const double* g = o.grad.data();
    if (ia->requires_grad) {
      auto& ga = ia->grad_buffer();
      const double* pb = ib->data.data();
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          double acc = 0.0;
          const double* grow = g + i * n;
          const double* brow = pb + p * n;
          for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
          ga[i * k + p] += acc;
        }
      }
    }
    if (ib->requires_grad) {
      auto& gb = ib->grad_buffer();
      const double* pa = ia->data.data();
      for (std::size_t i = 0; i < m; ++i) {
        const double* grow = g + i * n;
        for (std::size_t p = 0; p < k; ++p) {
          const double av = pa[i * k + p];
          if (av == 0.0) continue;
          double* gbrow = gb.data() + p * n;
          for (std::size_t j = 0; j < n; ++j) gbrow[j] += av * grow[j];
        }
      }
    }
  });
}

Tensor transpose(const Tensor& x) {
  const auto& ix = checked(x, "transpose");
  require_rank(x, 2, "transpose");
  const std::size_t m = x.dim(0), n = x.dim(1);
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = ix->data[i * n + j];
  return record({n, m}, std::move(out), {ix}, "transpose", [ix, m, n](const TensorImpl& o) {
    auto& gx = ix->grad_buffer();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) gx[i * n + j] += o.grad[j * m + i];
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  const auto& ia = checked(a, "add");
  const auto& ib = checked(b, "add");
  require_same_shape(a, b, "add");
  std::vector<double> out(ia->data.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = ia->data[i] + ib->data[i];
  return record(a.shape(), std::move(out), {ia, ib}, "add", [ia, ib](const TensorImpl& o) {
    for (const auto& in : {ia, ib}) {
      if (!in->requires_grad) continue;
      auto& g = in->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  const auto& ia = checked(a, "sub");
  const auto& ib = checked(b, "sub");
  require_same_shape(a, b, "sub");
  std::vector<double> out(ia->data.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = ia->data[i] - ib->data[i];
  return record(a.shape(), std::move(out), {ia, ib}, "sub", [ia, ib](const TensorImpl& o) {
    if (ia->requires_grad) {
      auto& g = ia->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i];
    }
    if (ib->requires_grad) {
      auto& g = ib->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= o.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  const auto& ia = checked(a, "mul");
  const auto& ib = checked(b, "mul");
  require_same_shape(a, b, "mul");
  std::vector<double> out(ia->data.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = ia->data[i] * ib->data[i];
  return record(a.shape(), std::move(out), {ia, ib}, "mul", [ia, ib](const TensorImpl& o) {
    if (ia->requires_grad) {
      auto& g = ia->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i] * ib->data[i];
    }
    if (ib->requires_grad) {
      auto& g = ib->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i] * ia->data[i];
    }
  });
}

Tensor scale(const Tensor& x, double factor) {
  const auto& ix = checked(x, "scale");
  std::vector<double> out(ix->data.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = ix->data[i] * factor;
  return record(x.shape(), std::move(out), {ix}, "scale", [ix, factor](const TensorImpl& o) {
    auto& g = ix->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i] * factor;
  });
}

Tensor add_broadcast(const Tensor& x, const Tensor& y) {
  const auto& ix = checked(x, "add_broadcast");
  const auto& iy = checked(y, "add_broadcast");
  require_rank(x, 2, "add_broadcast");
  const std::size_t m = x.dim(0), n = x.dim(1);
  const std::size_t r = y.rank() == 1 ? 1 : (y.rank() == 2 ? y.dim(0) : 0);
  const std::size_t yn = y.rank() == 1 ? y.dim(0) : (y.rank() == 2 ? y.dim(1) : 0);
  if (r == 0 || yn != n || m % r != 0) {
    throw DimensionError("add_broadcast: cannot tile " + shape_to_string(y.shape()) + " onto " +
                         shape_to_string(x.shape()));
  }
  std::vector<double> out(ix->data);
  for (std::size_t i = 0; i < m; ++i) {
    const double* yrow = iy->data.data() + (i % r) * n;
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] += yrow[j];
  }
  return record(x.shape(), std::move(out), {ix, iy}, "add_broadcast", [ix, iy, m, n, r](const TensorImpl& o) {
    if (ix->requires_grad) {
      auto& g = ix->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i];
    }
    if (iy->requires_grad) {
      auto& g = iy->grad_buffer();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) g[(i % r) * n + j] += o.grad[i * n + j];
    }
  });
}

Tensor sum(const Tensor& x) {
  const auto& ix = checked(x, "sum");
  double s = 0.0;
  for (double v : ix->data) s += v;
  return record({}, {s}, {ix}, "sum", [ix](const TensorImpl& o) {
    auto& g = ix->grad_buffer();
    for (auto& v : g) v += o.grad[0];
  });
}

Tensor mean(const Tensor& x) { return scale(sum(x), 1.0 / static_cast<double>(x.numel())); }

Tensor mean_over_axis(const Tensor& x, std::size_t axis) {
  const auto& ix = checked(x, "mean_over_axis");
  const Shape& s = x.shape();
  if (axis >= s.size()) {
    throw IndexError("mean_over_axis: axis " + std::to_string(axis) + " out of range for shape " +
                     shape_to_string(s));
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
  const std::size_t n = s[axis];
  Shape out_shape;
  for (std::size_t i = 0; i < s.size(); ++i)
    if (i != axis) out_shape.push_back(s[i]);
  std::vector<double> out(outer * inner, 0.0);
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t k = 0; k < n; ++k) {
      const double* src = ix->data.data() + (o * n + k) * inner;
      double* dst = out.data() + o * inner;
      for (std::size_t i = 0; i < inner; ++i) dst[i] += src[i];
    }
  const double inv = 1.0 / static_cast<double>(n);
  for (auto& v : out) v *= inv;
  return record(std::move(out_shape), std::move(out), {ix}, "mean_over_axis",
                [ix, outer, inner, n, inv](const TensorImpl& o) {
                  auto& g = ix->grad_buffer();
                  for (std::size_t a = 0; a < outer; ++a)
                    for (std::size_t k = 0; k < n; ++k)
                      for (std::size_t i = 0; i < inner; ++i)
                        g[(a * n + k) * inner + i] += o.grad[a * inner + i] * inv;
                });
}

Tensor reshape(const Tensor& x, Shape shape) {
  const auto& ix = checked(x, "reshape");
  for (auto d : shape)
    if (d == 0) throw DimensionError("reshape: zero dimension in " + shape_to_string(shape));
  if (shape_numel(shape) != x.numel()) {
    throw DimensionError("reshape: cannot view " + shape_to_string(x.shape()) + " as " + shape_to_string(shape));
  }
  return record(std::move(shape), ix->data, {ix}, "reshape", [ix](const TensorImpl& o) {
    auto& g = ix->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i];
  });
}

Tensor concat_rows(std::span<const Tensor> parts) {
  if (parts.empty()) throw ContractError("concat_rows: no inputs");
  const Shape& first = parts.front().shape();
  if (first.empty()) throw DimensionError("concat_rows: scalars cannot be concatenated");
  Shape tail(first.begin() + 1, first.end());
  std::vector<ImplPtr> inputs;
  std::vector<double> out;
  std::size_t rows = 0;
  for (const auto& p : parts) {
    const auto& ip = checked(p, "concat_rows");
    Shape ptail(p.shape().begin() + 1, p.shape().end());
    if (p.rank() == 0 || ptail != tail) {
      throw DimensionError("concat_rows: trailing shape mismatch " + shape_to_string(first) + " vs " +
                           shape_to_string(p.shape()));
    }
    rows += p.dim(0);
    out.insert(out.end(), ip->data.begin(), ip->data.end());
    inputs.push_back(ip);
  }
  Shape shape{rows};
  shape.insert(shape.end(), tail.begin(), tail.end());
  auto captured = inputs;
  return record(std::move(shape), std::move(out), std::move(inputs), "concat_rows",
                [captured](const TensorImpl& o) {
                  std::size_t offset = 0;
                  for (const auto& in : captured) {
                    const std::size_t len = in->data.size();
                    if (in->requires_grad) {
                      auto& g = in->grad_buffer();
                      for (std::size_t i = 0; i < len; ++i) g[i] += o.grad[offset + i];
                    }
                    offset += len;
                  }
                });
}

Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t end) {
  const auto& ix = checked(x, "slice_rows");
  if (x.rank() == 0 || begin >= end || end > x.dim(0)) {
    throw IndexError("slice_rows: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                     ") invalid for shape " + shape_to_string(x.shape()));
  }
  const std::size_t stride = x.numel() / x.dim(0);
  Shape shape = x.shape();
  shape[0] = end - begin;
  std::vector<double> out(ix->data.begin() + begin * stride, ix->data.begin() + end * stride);
  return record(std::move(shape), std::move(out), {ix}, "slice_rows", [ix, begin, stride](const TensorImpl& o) {
    auto& g = ix->grad_buffer();
    for (std::size_t i = 0; i < o.grad.size(); ++i) g[begin * stride + i] += o.grad[i];
  });
}

Tensor concat_cols(std::span<const Tensor> parts) {
  if (parts.empty()) throw ContractError("concat_cols: no inputs");
  const std::size_t m = parts.front().dim(0);
  std::vector<ImplPtr> inputs;
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const auto& p : parts) {
    inputs.push_back(checked(p, "concat_cols"));
    require_rank(p, 2, "concat_cols");
    if (p.dim(0) != m) throw DimensionError("concat_cols: row count mismatch");
    widths.push_back(p.dim(1));
    total += p.dim(1);
  }
  std::vector<double> out(m * total);
  std::size_t off = 0;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < widths[k]; ++j) out[i * total + off + j] = inputs[k]->data[i * widths[k] + j];
    off += widths[k];
  }
  auto captured = inputs;
  return record({m, total}, std::move(out), std::move(inputs), "concat_cols",
                [captured, widths, m, total](const TensorImpl& o) {
                  std::size_t off2 = 0;
                  for (std::size_t k = 0; k < captured.size(); ++k) {
                    if (captured[k]->requires_grad) {
                      auto& g = captured[k]->grad_buffer();
                      for (std::size_t i = 0; i < m; ++i)
                        for (std::size_t j = 0; j < widths[k]; ++j) g[i * widths[k] + j] += o.grad[i * total + off2 + j];
                    }
                    off2 += widths[k];
                  }
                });
}

Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t end) {
  const auto& ix = checked(x, "slice_cols");
  require_rank(x, 2, "slice_cols");
  const std::size_t m = x.dim(0), n = x.dim(1);
  if (begin >= end || end > n) {
    throw IndexError("slice_cols: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                     ") invalid for shape " + shape_to_string(x.shape()));
  }
  const std::size_t w = end - begin;
  std::vector<double> out(m * w);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < w; ++j) out[i * w + j] = ix->data[i * n + begin + j];
  return record({m, w}, std::move(out), {ix}, "slice_cols", [ix, m, n, w, begin](const TensorImpl& o) {
    auto& g = ix->grad_buffer();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < w; ++j) g[i * n + begin + j] += o.grad[i * w + j];
  });
}

Tensor gelu(const Tensor& x) {
  const auto& ix = checked(x, "gelu");
  std::vector<double> out(ix->data.size());
  const double inv_sqrt2 = 1.0 / std::numbers::sqrt2;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double v = ix->data[i];
    out[i] = 0.5 * v * (1.0 + std::erf(v * inv_sqrt2));
  }
  return record(x.shape(), std::move(out), {ix}, "gelu", [ix, inv_sqrt2](const TensorImpl& o) {
    auto& g = ix->grad_buffer();
    const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double v = ix->data[i];
      const double cdf = 0.5 * (1.0 + std::erf(v * inv_sqrt2));
      const double pdf = inv_sqrt_2pi * std::exp(-0.5 * v * v);
      g[i] += o.grad[i] * (cdf + v * pdf);
    }
  });
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  const auto& ix = checked(x, "layer_norm");
  const auto& ig = checked(gain, "layer_norm");
  const auto& ib = checked(bias, "layer_norm");
  require_rank(x, 2, "layer_norm");
  const std::size_t m = x.dim(0), n = x.dim(1);
  if (gain.shape() != Shape{n} || bias.shape() != Shape{n}) {
    throw DimensionError("layer_norm: gain/bias must be [" + std::to_string(n) + "]");
  }
  std::vector<double> out(m * n), xhat(m * n), inv_std(m);
  for (std::size_t i = 0; i < m; ++i) {
    const double* row = ix->data.data() + i * n;
    double mu = 0.0;
    for (std::size_t j = 0; j < n; ++j) mu += row[j];
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<double>(n);
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < n; ++j) {
      xhat[i * n + j] = (row[j] - mu) * inv_std[i];
      out[i * n + j] = xhat[i * n + j] * ig->data[j] + ib->data[j];
    }
  }
  return record({m, n}, std::move(out), {ix, ig, ib}, "layer_norm",
                [ix, ig, ib, m, n, xhat = std::move(xhat), inv_std = std::move(inv_std)](const TensorImpl& o) {
                  if (ig->requires_grad || ib->requires_grad) {
                    for (std::size_t i = 0; i < m; ++i)
                      for (std::size_t j = 0; j < n; ++j) {
                        if (ig->requires_grad) ig->grad_buffer()[j] += o.grad[i * n + j] * xhat[i * n + j];
                        if (ib->requires_grad) ib->grad_buffer()[j] += o.grad[i * n + j];
                      }
                  }
                  if (!ix->requires_grad) return;
                  auto& gx = ix->grad_buffer();
                  std::vector<double> dxhat(n);
                  for (std::size_t i = 0; i < m; ++i) {
                    double mean_d = 0.0, mean_dx = 0.0;
                    for (std::size_t j = 0; j < n; ++j) {
                      dxhat[j] = o.grad[i * n + j] * ig->data[j];
                      mean_d += dxhat[j];
                      mean_dx += dxhat[j] * xhat[i * n + j];
                    }
                    mean_d /= static_cast<double>(n);
                    mean_dx /= static_cast<double>(n);
                    for (std::size_t j = 0; j < n; ++j)
                      gx[i * n + j] += inv_std[i] * (dxhat[j] - mean_d - xhat[i * n + j] * mean_dx);
                  }
                });
}

namespace {

Tensor masked_softmax(const Tensor& x, bool causal, const char* op) {
  const auto& ix = checked(x, op);
  require_rank(x, 2, op);
  const std::size_t m = x.dim(0), n = x.dim(1);
  if (causal && m > n) throw DimensionError(std::string(op) + ": more rows than columns");
  std::vector<double> out(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t width = causal ? i + 1 : n;
    const double* row = ix->data.data() + i * n;
    double mx = row[0];
    for (std::size_t j = 1; j < width; ++j) mx = std::max(mx, row[j]);
    double z = 0.0;
    for (std::size_t j = 0; j < width; ++j) {
      out[i * n + j] = std::exp(row[j] - mx);
      z += out[i * n + j];
    }
    for (std::size_t j = 0; j < width; ++j) out[i * n + j] /= z;
  }
  auto y = out;
  return record({m, n}, std::move(out), {ix}, op, [ix, m, n, causal, y = std::move(y)](const TensorImpl& o) {
    auto& g = ix->grad_buffer();
    for (std::size_t i = 0; i < m; ++i) {
      const std::size_t width = causal ? i + 1 : n;
      double dot = 0.0;
      for (std::size_t j = 0; j < width; ++j) dot += y[i * n + j] * o.grad[i * n + j];
      for (std::size_t j = 0; j < width; ++j) g[i * n + j] += y[i * n + j] * (o.grad[i * n + j] - dot);
    }
  });
}

}  // namespace

Tensor softmax_rows(const Tensor& x) { return masked_softmax(x, false, "softmax_rows"); }

Tensor causal_softmax(const Tensor& scores) { return masked_softmax(scores, true, "causal_softmax"); }

Tensor log_softmax_rows(const Tensor& x) {
  const auto& ix = checked(x, "log_softmax_rows");
  require_rank(x, 2, "log_softmax_rows");
  const std::size_t m = x.dim(0), n = x.dim(1);
  std::vector<double> out(m * n);
  std::vector<double> probs(m * n);
  for (std::size_t i = 0; i < m; ++i) {
    const double* row = ix->data.data() + i * n;
    const double mx = *std::max_element(row, row + n);
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) z += std::exp(row[j] - mx);
    const double lse = mx + std::log(z);
    for (std::size_t j = 0; j < n; ++j) {
      out[i * n + j] = row[j] - lse;
      probs[i * n + j] = std::exp(out[i * n + j]);
    }
  }
  return record({m, n}, std::move(out), {ix}, "log_softmax_rows",
                [ix, m, n, probs = std::move(probs)](const TensorImpl& o) {
                  auto& g = ix->grad_buffer();
                  for (std::size_t i = 0; i < m; ++i) {
                    double gs = 0.0;
                    for (std::size_t j = 0; j < n; ++j) gs += o.grad[i * n + j];
                    for (std::size_t j = 0; j < n; ++j) g[i * n + j] += o.grad[i * n + j] - probs[i * n + j] * gs;
                  }
                });
}

Tensor l2_normalize_rows(const Tensor& x) {
  const auto& ix = checked(x, "l2_normalize_rows");
  if (x.rank() != 1 && x.rank() != 2) throw DimensionError("l2_normalize_rows: expected rank 1 or 2");
  const std::size_t n = x.shape().back();
  const std::size_t m = x.numel() / n;
  std::vector<double> out(m * n), inv_norm(m);
  for (std::size_t i = 0; i < m; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += ix->data[i * n + j] * ix->data[i * n + j];
    inv_norm[i] = 1.0 / std::max(std::sqrt(s), 1e-12);
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = ix->data[i * n + j] * inv_norm[i];
  }
  auto y = out;
  return record(x.shape(), std::move(out), {ix}, "l2_normalize_rows",
                [ix, m, n, y = std::move(y), inv_norm = std::move(inv_norm)](const TensorImpl& o) {
                  auto& g = ix->grad_buffer();
                  for (std::size_t i = 0; i < m; ++i) {
                    double dot = 0.0;
                    for (std::size_t j = 0; j < n; ++j) dot += y[i * n + j] * o.grad[i * n + j];
                    for (std::size_t j = 0; j < n; ++j)
                      g[i * n + j] += (o.grad[i * n + j] - y[i * n + j] * dot) * inv_norm[i];
                  }
                });
}

Tensor embedding(const Tensor& table, std::span<const int> indices) {
  const auto& it = checked(table, "embedding");
  require_rank(table, 2, "embedding");
  const std::size_t v = table.dim(0), k = table.dim(1);
  if (indices.empty()) throw ContractError("embedding: empty index list");
  std::vector<double> out(indices.size() * k);
  for (std::size_t l = 0; l < indices.size(); ++l) {
    if (indices[l] < 0 || static_cast<std::size_t>(indices[l]) >= v) {
      throw IndexError("embedding: index " + std::to_string(indices[l]) + " out of range for vocabulary " +
                       std::to_string(v));
    }
    std::copy_n(it->data.begin() + indices[l] * k, k, out.begin() + l * k);
  }
  std::vector<int> idx(indices.begin(), indices.end());
  return record({indices.size(), k}, std::move(out), {it}, "embedding", [it, k, idx = std::move(idx)](const TensorImpl& o) {
    auto& g = it->grad_buffer();
    for (std::size_t l = 0; l < idx.size(); ++l)
      for (std::size_t j = 0; j < k; ++j) g[idx[l] * k + j] += o.grad[l * k + j];
  });
}

Tensor pick(const Tensor& x, std::span<const int> indices) {
  const auto& ix = checked(x, "pick");
  require_rank(x, 2, "pick");
  const std::size_t m = x.dim(0), n = x.dim(1);
  if (indices.size() != m) throw DimensionError("pick: need one index per row");
  std::vector<double> out(m);
  for (std::size_t i = 0; i < m; ++i) {
    if (indices[i] < 0 || static_cast<std::size_t>(indices[i]) >= n) {
      throw IndexError("pick: index " + std::to_string(indices[i]) + " out of range " + std::to_string(n));
    }
    out[i] = ix->data[i * n + indices[i]];
  }
  std::vector<int> idx(indices.begin(), indices.end());
  return record({m}, std::move(out), {ix}, "pick", [ix, n, idx = std::move(idx)](const TensorImpl& o) {
    auto& g = ix->grad_buffer();
    for (std::size_t i = 0; i < idx.size(); ++i) g[i * n + idx[i]] += o.grad[i];
  });
}

Tensor softmax_cross_entropy(const Tensor& logits, std::span<const int> targets) {
  require_rank(logits, 2, "softmax_cross_entropy");
  const std::size_t l = logits.dim(0), v = logits.dim(1);
  if (targets.size() != l) {
    throw DimensionError("softmax_cross_entropy: " + std::to_string(targets.size()) + " targets for " +
                         std::to_string(l) + " positions");
  }
  for (int t : targets) {
    if (t < 0 || static_cast<std::size_t>(t) >= v) {
      throw IndexError("softmax_cross_entropy: target " + std::to_string(t) + " >= vocabulary " + std::to_string(v));
    }
  }
  return scale(mean(pick(log_softmax_rows(logits), targets)), -1.0);
}

}  // namespace adcare
