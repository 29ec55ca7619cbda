// Copyright 2026 The shaderflow Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "shaderflow/errors.hpp"
#include "shaderflow/kernels.hpp"
#include "shaderflow/tensor.hpp"

namespace shaderflow {
namespace {

using detail::Node;

void require_matrix(const Tensor& t, const char* op) {
  if (t.rank() != 2) throw DimensionError(std::string(op) + ": expected a matrix, got " + shape_string(t.shape()));
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape())
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
}

Node& parent(Node& self, std::size_t i) { return *self.parents[i]; }

void add_into(std::vector<double>& dst, std::span<const double> src) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

template <typename F>
Tensor unary(const Tensor& a, const char* op, F&& value, std::function<void(Node&)> backward) {
  std::vector<double> out(a.numel());
  auto in = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = value(in[i]);
  return Tensor::from_op(a.shape(), std::move(out), op, {a}, std::move(backward));
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul");
  require_matrix(b, "matmul");
  if (a.cols() != b.rows())
    throw DimensionError("matmul: inner dimensions disagree, " + shape_string(a.shape()) + " x " +
                         shape_string(b.shape()));
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  std::vector<double> out(m * n);
  kernels::gemm(a.data(), b.data(), out, m, k, n);
  return Tensor::from_op({m, n}, std::move(out), "matmul", {a, b}, [m, k, n](Node& self) {
    Node& pa = parent(self, 0);
    Node& pb = parent(self, 1);
    if (pa.requires_grad) {
      std::vector<double> tmp(m * k);
      kernels::gemm_bt(self.grad, pb.data, tmp, m, n, k);
      add_into(pa.grad, tmp);
    }
    if (pb.requires_grad) {
      std::vector<double> tmp(k * n);
      kernels::gemm_at(pa.data, self.grad, tmp, k, m, n);
      add_into(pb.grad, tmp);
    }
  });
}

Tensor matmul_bt(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul_bt");
  require_matrix(b, "matmul_bt");
  if (a.cols() != b.cols())
    throw DimensionError("matmul_bt: inner dimensions disagree, " + shape_string(a.shape()) +
                         " x " + shape_string(b.shape()) + "^T");
  const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
  std::vector<double> out(m * n);
  kernels::gemm_bt(a.data(), b.data(), out, m, k, n);
  return Tensor::from_op({m, n}, std::move(out), "matmul_bt", {a, b}, [m, k, n](Node& self) {
    Node& pa = parent(self, 0);
    Node& pb = parent(self, 1);
    if (pa.requires_grad) {
      std::vector<double> tmp(m * k);
      kernels::gemm(self.grad, pb.data, tmp, m, n, k);
      add_into(pa.grad, tmp);
    }
    if (pb.requires_grad) {
      std::vector<double> tmp(n * k);
      kernels::gemm_at(self.grad, pa.data, tmp, n, m, k);
      add_into(pb.grad, tmp);
    }
  });
}

Tensor transpose(const Tensor& a) {
  require_matrix(a, "transpose");
  const std::size_t m = a.rows(), n = a.cols();
  std::vector<double> out(m * n);
  auto in = a.data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = in[i * n + j];
  return Tensor::from_op({n, m}, std::move(out), "transpose", {a}, [m, n](Node& self) {
    Node& pa = parent(self, 0);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) pa.grad[i * n + j] += self.grad[j * m + i];
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
  return Tensor::from_op(a.shape(), std::move(out), "add", {a, b}, [](Node& self) {
    for (std::size_t p = 0; p < 2; ++p)
      if (parent(self, p).requires_grad) add_into(parent(self, p).grad, self.grad);
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
  return Tensor::from_op(a.shape(), std::move(out), "sub", {a, b}, [](Node& self) {
    if (parent(self, 0).requires_grad) add_into(parent(self, 0).grad, self.grad);
    if (Node& pb = parent(self, 1); pb.requires_grad)
      for (std::size_t i = 0; i < pb.grad.size(); ++i) pb.grad[i] -= self.grad[i];
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
  return Tensor::from_op(a.shape(), std::move(out), "mul", {a, b}, [](Node& self) {
    Node& pa = parent(self, 0);
    Node& pb = parent(self, 1);
    if (pa.requires_grad)
      for (std::size_t i = 0; i < pa.grad.size(); ++i) pa.grad[i] += self.grad[i] * pb.data[i];
    if (pb.requires_grad)
      for (std::size_t i = 0; i < pb.grad.size(); ++i) pb.grad[i] += self.grad[i] * pa.data[i];
  });
}

Tensor scale(const Tensor& a, double s) {
  return unary(a, "scale", [s](double x) { return s * x; }, [s](Node& self) {
    Node& pa = parent(self, 0);
    for (std::size_t i = 0; i < pa.grad.size(); ++i) pa.grad[i] += s * self.grad[i];
  });
}

Tensor add_scalar(const Tensor& a, double s) {
  return unary(a, "add_scalar", [s](double x) { return x + s; },
               [](Node& self) { add_into(parent(self, 0).grad, self.grad); });
}

Tensor add_row(const Tensor& a, const Tensor& row) {
  require_matrix(a, "add_row");
  const std::size_t m = a.rows(), n = a.cols();
  if (row.numel() != n || row.rank() > 2 || (row.rank() == 2 && row.shape()[0] != 1))
    throw DimensionError("add_row: row " + shape_string(row.shape()) + " does not match " +
                         shape_string(a.shape()));
  std::vector<double> out(a.data().begin(), a.data().end());
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] += row[j];
  return Tensor::from_op({m, n}, std::move(out), "add_row", {a, row}, [m, n](Node& self) {
    if (parent(self, 0).requires_grad) add_into(parent(self, 0).grad, self.grad);
    if (Node& pr = parent(self, 1); pr.requires_grad)
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) pr.grad[j] += self.grad[i * n + j];
  });
}

Tensor square(const Tensor& a) {
  return unary(a, "square", [](double x) { return x * x; }, [](Node& self) {
    Node& pa = parent(self, 0);
    for (std::size_t i = 0; i < pa.grad.size(); ++i) pa.grad[i] += 2.0 * pa.data[i] * self.grad[i];
  });
}

Tensor tanh(const Tensor& a) {
  return unary(a, "tanh", [](double x) { return std::tanh(x); }, [](Node& self) {
    Node& pa = parent(self, 0);
    for (std::size_t i = 0; i < pa.grad.size(); ++i)
      pa.grad[i] += (1.0 - self.data[i] * self.data[i]) * self.grad[i];
  });
}

Tensor exp(const Tensor& a) {
  return unary(a, "exp", [](double x) { return std::exp(x); }, [](Node& self) {
    Node& pa = parent(self, 0);
    for (std::size_t i = 0; i < pa.grad.size(); ++i) pa.grad[i] += self.data[i] * self.grad[i];
  });
}

namespace {
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;
}  // namespace

Tensor gelu(const Tensor& a) {
  return unary(
      a, "gelu",
      [](double x) { return 0.5 * x * (1.0 + std::tanh(kGeluC * (x + kGeluA * x * x * x))); },
      [](Node& self) {
        Node& pa = parent(self, 0);
        for (std::size_t i = 0; i < pa.grad.size(); ++i) {
          const double x = pa.data[i];
          const double th = std::tanh(kGeluC * (x + kGeluA * x * x * x));
          const double d = 0.5 * (1.0 + th) +
                           0.5 * x * (1.0 - th * th) * kGeluC * (1.0 + 3.0 * kGeluA * x * x);
          pa.grad[i] += d * self.grad[i];
        }
      });
}

Tensor sum(const Tensor& a) {
  double acc = 0.0;
  for (double v : a.data()) acc += v;
  return Tensor::from_op({}, {acc}, "sum", {a}, [](Node& self) {
    Node& pa = parent(self, 0);
    for (double& g : pa.grad) g += self.grad[0];
  });
}

Tensor mean(const Tensor& a) {
  double acc = 0.0;
  for (double v : a.data()) acc += v;
  const double inv = 1.0 / static_cast<double>(a.numel());
  return Tensor::from_op({}, {acc * inv}, "mean", {a}, [inv](Node& self) {
    Node& pa = parent(self, 0);
    for (double& g : pa.grad) g += self.grad[0] * inv;
  });
}

Tensor mse(const Tensor& prediction, const Tensor& target) {
  require_same_shape(prediction, target, "mse");
  return mean(square(sub(prediction, target)));
}

Tensor softmax_rows(const Tensor& a, std::span<const double> mask) {
  require_matrix(a, "softmax_rows");
  const std::size_t m = a.rows(), n = a.cols();
  if (!mask.empty() && mask.size() != m * n) {
    std::ostringstream os;
    os << "softmax_rows: mask has " << mask.size() << " entries for " << shape_string(a.shape());
    throw DimensionError(os.str());
  }
  std::vector<double> out(m * n);
  auto in = a.data();
  for (std::size_t i = 0; i < m; ++i) {
    double* row = out.data() + i * n;
    for (std::size_t j = 0; j < n; ++j) row[j] = in[i * n + j] + (mask.empty() ? 0.0 : mask[i * n + j]);
    const double top = kernels::max({row, n});
    if (top == -std::numeric_limits<double>::infinity()) {
      std::ostringstream os;
      os << "softmax_rows: fully masked row " << i;
      throw NumericError(os.str());
    }
    // Sequential sum so a masked-out column contributes exactly nothing.
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      row[j] = std::exp(row[j] - top);
      total += row[j];
    }
    const double inv = 1.0 / total;
    for (std::size_t j = 0; j < n; ++j) row[j] *= inv;
  }
  return Tensor::from_op({m, n}, std::move(out), "softmax_rows", {a}, [m, n](Node& self) {
    Node& pa = parent(self, 0);
    for (std::size_t i = 0; i < m; ++i) {
      const double* y = self.data.data() + i * n;
      const double* g = self.grad.data() + i * n;
      double inner = 0.0;
      for (std::size_t j = 0; j < n; ++j) inner += g[j] * y[j];
      for (std::size_t j = 0; j < n; ++j) pa.grad[i * n + j] += y[j] * (g[j] - inner);
    }
  });
}

Tensor layer_norm(const Tensor& a, double eps) {
  if (a.rank() == 0) throw DimensionError("layer_norm: needs at least one axis");
  if (!(eps > 0.0)) throw ConfigError("layer_norm: eps must be positive");
  const std::size_t d = a.shape().back();
  const std::size_t rows = a.numel() / d;
  std::vector<double> out(a.numel());
  std::vector<double> inv_std(rows);
  auto in = a.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* x = in.data() + r * d;
    double mu = 0.0;
    for (std::size_t j = 0; j < d; ++j) mu += x[j];
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) var += (x[j] - mu) * (x[j] - mu);
    var /= static_cast<double>(d);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < d; ++j) out[r * d + j] = (x[j] - mu) * inv_std[r];
  }
  return Tensor::from_op(a.shape(), std::move(out), "layer_norm", {a},
                         [d, rows, inv_std = std::move(inv_std)](Node& self) {
                           Node& pa = parent(self, 0);
                           const double dd = static_cast<double>(d);
                           for (std::size_t r = 0; r < rows; ++r) {
                             const double* y = self.data.data() + r * d;
                             const double* g = self.grad.data() + r * d;
                             double g_mean = 0.0, gy_mean = 0.0;
                             for (std::size_t j = 0; j < d; ++j) {
                               g_mean += g[j];
                               gy_mean += g[j] * y[j];
                             }
                             g_mean /= dd;
                             gy_mean /= dd;
                             for (std::size_t j = 0; j < d; ++j)
                               pa.grad[r * d + j] += inv_std[r] * (g[j] - g_mean - y[j] * gy_mean);
                           }
                         });
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_numel(shape) != a.numel())
    throw DimensionError("reshape: " + shape_string(a.shape()) + " -> " + shape_string(shape));
  return Tensor::from_op(std::move(shape), a.to_vector(), "reshape", {a},
                         [](Node& self) { add_into(parent(self, 0).grad, self.grad); });
}

Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t count) {
  require_matrix(a, "slice_rows");
  if (count == 0 || begin + count > a.rows()) {
    std::ostringstream os;
    os << "slice_rows: [" << begin << ", " << begin + count << ") out of " << shape_string(a.shape());
    throw DimensionError(os.str());
  }
  const std::size_t n = a.cols();
  auto in = a.data().subspan(begin * n, count * n);
  return Tensor::from_op({count, n}, std::vector<double>(in.begin(), in.end()), "slice_rows", {a},
                         [begin, n](Node& self) {
                           Node& pa = parent(self, 0);
                           for (std::size_t i = 0; i < self.grad.size(); ++i) pa.grad[begin * n + i] += self.grad[i];
                         });
}

Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t count) {
  require_matrix(a, "slice_cols");
  if (count == 0 || begin + count > a.cols()) {
    std::ostringstream os;
    os << "slice_cols: [" << begin << ", " << begin + count << ") out of " << shape_string(a.shape());
    throw DimensionError(os.str());
  }
  const std::size_t m = a.rows(), n = a.cols();
  std::vector<double> out(m * count);
  auto in = a.data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < count; ++j) out[i * count + j] = in[i * n + begin + j];
  return Tensor::from_op({m, count}, std::move(out), "slice_cols", {a}, [m, n, begin, count](Node& self) {
    Node& pa = parent(self, 0);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < count; ++j) pa.grad[i * n + begin + j] += self.grad[i * count + j];
  });
}

Tensor concat_rows(std::span<const Tensor> parts) {
  if (parts.empty()) throw DimensionError("concat_rows: nothing to concatenate");
  const std::size_t n = parts.front().cols();
  std::size_t m = 0;
  for (const Tensor& p : parts) {
    if (p.cols() != n)
      throw DimensionError("concat_rows: column mismatch " + shape_string(parts.front().shape()) +
                           " vs " + shape_string(p.shape()));
    m += p.rows();
  }
  std::vector<double> out;
  out.reserve(m * n);
  std::vector<std::size_t> offsets;
  for (const Tensor& p : parts) {
    offsets.push_back(out.size());
    out.insert(out.end(), p.data().begin(), p.data().end());
  }
  return Tensor::from_op({m, n}, std::move(out), "concat_rows",
                         std::vector<Tensor>(parts.begin(), parts.end()),
                         [offsets = std::move(offsets)](Node& self) {
                           for (std::size_t p = 0; p < self.parents.size(); ++p) {
                             Node& pp = parent(self, p);
                             if (!pp.requires_grad) continue;
                             for (std::size_t i = 0; i < pp.grad.size(); ++i) pp.grad[i] += self.grad[offsets[p] + i];
                           }
                         });
}

Tensor concat_cols(std::span<const Tensor> parts) {
  if (parts.empty()) throw DimensionError("concat_cols: nothing to concatenate");
  const std::size_t m = parts.front().rows();
  std::size_t n = 0;
  std::vector<std::size_t> offsets;
  for (const Tensor& p : parts) {
    if (p.rows() != m)
      throw DimensionError("concat_cols: row mismatch " + shape_string(parts.front().shape()) +
                           " vs " + shape_string(p.shape()));
    offsets.push_back(n);
    n += p.cols();
  }
  std::vector<double> out(m * n);
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const std::size_t w = parts[p].cols();
    auto in = parts[p].data();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < w; ++j) out[i * n + offsets[p] + j] = in[i * w + j];
  }
  return Tensor::from_op({m, n}, std::move(out), "concat_cols",
                         std::vector<Tensor>(parts.begin(), parts.end()),
                         [m, n, offsets = std::move(offsets)](Node& self) {
                           for (std::size_t p = 0; p < self.parents.size(); ++p) {
                             Node& pp = parent(self, p);
                             if (!pp.requires_grad) continue;
                             const std::size_t w = pp.shape[1];
                             for (std::size_t i = 0; i < m; ++i)
                               for (std::size_t j = 0; j < w; ++j)
                                 pp.grad[i * w + j] += self.grad[i * n + offsets[p] + j];
                           }
                         });
}

Tensor rotate_pairs(const Tensor& a, std::span<const double> cos, std::span<const double> sin) {
  require_matrix(a, "rotate_pairs");
  const std::size_t m = a.rows(), n = a.cols();
  if (n % 2 != 0) throw ConfigError("rotate_pairs: odd width " + std::to_string(n));
  const std::size_t pairs = n / 2;
  if (cos.size() != m * pairs || sin.size() != m * pairs)
    throw DimensionError("rotate_pairs: angle table does not match " + shape_string(a.shape()));
  std::vector<double> out(m * n);
  auto in = a.data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < pairs; ++j) {
      const double c = cos[i * pairs + j], s = sin[i * pairs + j];
      const double x0 = in[i * n + 2 * j], x1 = in[i * n + 2 * j + 1];
      out[i * n + 2 * j] = c * x0 - s * x1;
      out[i * n + 2 * j + 1] = s * x0 + c * x1;
    }
  std::vector<double> cs(cos.begin(), cos.end()), sn(sin.begin(), sin.end());
  return Tensor::from_op({m, n}, std::move(out), "rotate_pairs", {a},
                         [m, n, pairs, cs = std::move(cs), sn = std::move(sn)](Node& self) {
                           Node& pa = parent(self, 0);
                           for (std::size_t i = 0; i < m; ++i)
                             for (std::size_t j = 0; j < pairs; ++j) {
                               const double c = cs[i * pairs + j], s = sn[i * pairs + j];
                               const double g0 = self.grad[i * n + 2 * j], g1 = self.grad[i * n + 2 * j + 1];
                               pa.grad[i * n + 2 * j] += c * g0 + s * g1;
                               pa.grad[i * n + 2 * j + 1] += -s * g0 + c * g1;
                             }
                         });
}

}  // namespace shaderflow
