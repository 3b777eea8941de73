// Copyright 2026 The medt Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <algorithm>
#include <cmath>
#include <limits>

#include <cblas.h>

#include "medt/error.hpp"
#include "medt/rng.hpp"
#include "medt/tensor.hpp"

namespace medt::inline MEDT_NS {

namespace {

using NodePtr = std::shared_ptr<detail::TensorNode>;

void require_rank(const Tensor& x, std::size_t rank, const char* op) {
  if (x.rank() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                         shape_to_string(x.shape()));
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_to_string(a.shape()) +
                         " vs " + shape_to_string(b.shape()));
  }
}

// Accumulates into the input gradient only when the input is tracked.
std::vector<Real>* grad_of(const NodePtr& node) {
  return node->requires_grad ? &node->ensure_grad() : nullptr;
}

#if defined(MEDT_DOUBLE_PRECISION) && MEDT_DOUBLE_PRECISION
#define MEDT_GEMM cblas_dgemm
#else
#define MEDT_GEMM cblas_sgemm
#endif

// c[m x n] += a[m x k] * b[k x n]
void gemm_nn(const Real* a, const Real* b, Real* c, std::size_t m, std::size_t k, std::size_t n) {
  MEDT_GEMM(CblasRowMajor, CblasNoTrans, CblasNoTrans, static_cast<int>(m), static_cast<int>(n),
            static_cast<int>(k), Real(1), a, static_cast<int>(k), b, static_cast<int>(n), Real(1), c,
            static_cast<int>(n));
}

// c[m x k] += a[m x n] * b[k x n]^T
void gemm_nt(const Real* a, const Real* b, Real* c, std::size_t m, std::size_t n, std::size_t k) {
  MEDT_GEMM(CblasRowMajor, CblasNoTrans, CblasTrans, static_cast<int>(m), static_cast<int>(k),
            static_cast<int>(n), Real(1), a, static_cast<int>(n), b, static_cast<int>(n), Real(1), c,
            static_cast<int>(k));
}

// c[k x n] += a[m x k]^T * b[m x n]
void gemm_tn(const Real* a, const Real* b, Real* c, std::size_t m, std::size_t k, std::size_t n) {
  MEDT_GEMM(CblasRowMajor, CblasTrans, CblasNoTrans, static_cast<int>(k), static_cast<int>(n),
            static_cast<int>(m), Real(1), a, static_cast<int>(k), b, static_cast<int>(n), Real(1), c,
            static_cast<int>(n));
}

#undef MEDT_GEMM

void check_finite_row(const Real* row, std::size_t n, const char* op) {
  for (std::size_t j = 0; j < n; ++j) {
    if (!std::isfinite(row[j])) throw NumericError(std::string(op) + ": non-finite input");
  }
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw DimensionError("matmul: inner extents differ, " + shape_to_string(a.shape()) + " x " +
                         shape_to_string(b.shape()));
  }
  std::vector<Real> out(m * n, Real(0));
  gemm_nn(a.data().data(), b.data().data(), out.data(), m, k, n);
  Tensor result = make_result({m, n}, std::move(out));
  if (should_record({&a, &b})) {
    NodePtr an = a.node(), bn = b.node(), on = result.node();
    Tape::active()->record(result, [an, bn, on, m, k, n] {
      const Real* g = on->grad.data();
      if (auto* ga = grad_of(an)) gemm_nt(g, bn->data.data(), ga->data(), m, n, k);
      if (auto* gb = grad_of(bn)) gemm_tn(an->data.data(), g, gb->data(), m, k, n);
    });
  }
  return result;
}

Tensor transpose(const Tensor& x) {
  require_rank(x, 2, "transpose");
  const std::size_t r = x.dim(0), c = x.dim(1);
  std::vector<Real> out(r * c);
  const auto in = x.data();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = in[i * c + j];
  Tensor result = make_result({c, r}, std::move(out));
  if (should_record({&x})) {
    NodePtr xn = x.node(), on = result.node();
    Tape::active()->record(result, [xn, on, r, c] {
      auto* gx = grad_of(xn);
      if (!gx) return;
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) (*gx)[i * c + j] += on->grad[j * r + i];
    });
  }
  return result;
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  const auto da = a.data(), db = b.data();
  std::vector<Real> out(da.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = da[i] + db[i];
  Tensor result = make_result(a.shape(), std::move(out));
  if (should_record({&a, &b})) {
    NodePtr an = a.node(), bn = b.node(), on = result.node();
    Tape::active()->record(result, [an, bn, on] {
      const auto& g = on->grad;
      if (auto* ga = grad_of(an))
        for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i];
      if (auto* gb = grad_of(bn))
        for (std::size_t i = 0; i < g.size(); ++i) (*gb)[i] += g[i];
    });
  }
  return result;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  const auto da = a.data(), db = b.data();
  std::vector<Real> out(da.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = da[i] * db[i];
  Tensor result = make_result(a.shape(), std::move(out));
  if (should_record({&a, &b})) {
    NodePtr an = a.node(), bn = b.node(), on = result.node();
    Tape::active()->record(result, [an, bn, on] {
      const auto& g = on->grad;
      if (auto* ga = grad_of(an))
        for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i] * bn->data[i];
      if (auto* gb = grad_of(bn))
        for (std::size_t i = 0; i < g.size(); ++i) (*gb)[i] += g[i] * an->data[i];
    });
  }
  return result;
}

Tensor add_bias(const Tensor& x, const Tensor& bias) {
  require_rank(bias, 1, "add_bias");
  const std::size_t n = x.last_dim();
  if (bias.dim(0) != n) {
    throw DimensionError("add_bias: bias " + shape_to_string(bias.shape()) + " does not fit " +
                         shape_to_string(x.shape()));
  }
  const std::size_t rows = x.outer_size();
  const auto dx = x.data(), db = bias.data();
  std::vector<Real> out(dx.size());
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < n; ++j) out[r * n + j] = dx[r * n + j] + db[j];
  Tensor result = make_result(x.shape(), std::move(out));
  if (should_record({&x, &bias})) {
    NodePtr xn = x.node(), bn = bias.node(), on = result.node();
    Tape::active()->record(result, [xn, bn, on, rows, n] {
      const auto& g = on->grad;
      if (auto* gx = grad_of(xn))
        for (std::size_t i = 0; i < g.size(); ++i) (*gx)[i] += g[i];
      if (auto* gb = grad_of(bn))
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t j = 0; j < n; ++j) (*gb)[j] += g[r * n + j];
    });
  }
  return result;
}

Tensor scale(const Tensor& x, Real factor) {
  const auto dx = x.data();
  std::vector<Real> out(dx.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = dx[i] * factor;
  Tensor result = make_result(x.shape(), std::move(out));
  if (should_record({&x})) {
    NodePtr xn = x.node(), on = result.node();
    Tape::active()->record(result, [xn, on, factor] {
      if (auto* gx = grad_of(xn))
        for (std::size_t i = 0; i < on->grad.size(); ++i) (*gx)[i] += on->grad[i] * factor;
    });
  }
  return result;
}

Tensor relu(const Tensor& x) {
  const auto dx = x.data();
  std::vector<Real> out(dx.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = dx[i] > Real(0) ? dx[i] : Real(0);
  Tensor result = make_result(x.shape(), std::move(out));
  if (should_record({&x})) {
    NodePtr xn = x.node(), on = result.node();
    Tape::active()->record(result, [xn, on] {
      if (auto* gx = grad_of(xn))
        for (std::size_t i = 0; i < on->grad.size(); ++i)
          if (xn->data[i] > Real(0)) (*gx)[i] += on->grad[i];
    });
  }
  return result;
}

Tensor mean_pair(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mean_pair");
  const auto da = a.data(), db = b.data();
  std::vector<Real> out(da.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (da[i] + db[i]) * Real(0.5);
  Tensor result = make_result(a.shape(), std::move(out));
  if (should_record({&a, &b})) {
    NodePtr an = a.node(), bn = b.node(), on = result.node();
    Tape::active()->record(result, [an, bn, on] {
      const auto& g = on->grad;
      if (auto* ga = grad_of(an))
        for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i] * Real(0.5);
      if (auto* gb = grad_of(bn))
        for (std::size_t i = 0; i < g.size(); ++i) (*gb)[i] += g[i] * Real(0.5);
    });
  }
  return result;
}

Tensor sum(const Tensor& x) {
  double acc = 0.0;
  for (Real v : x.data()) acc += v;
  Tensor result = make_result({1}, {static_cast<Real>(acc)});
  if (should_record({&x})) {
    NodePtr xn = x.node(), on = result.node();
    Tape::active()->record(result, [xn, on] {
      if (auto* gx = grad_of(xn))
        for (auto& g : *gx) g += on->grad[0];
    });
  }
  return result;
}

Tensor softmax(const Tensor& x, const AttentionMask* mask) {
  require_rank(x, 2, "softmax");
  const std::size_t rows = x.dim(0), n = x.dim(1);
  if (mask && (mask->rows != rows || mask->cols != n)) {
    throw DimensionError("softmax: mask " + std::to_string(mask->rows) + "x" +
                         std::to_string(mask->cols) + " does not fit " + shape_to_string(x.shape()));
  }
  const auto in = x.data();
  std::vector<Real> out(in.size(), Real(0));
  for (std::size_t r = 0; r < rows; ++r) {
    const Real* row = in.data() + r * n;
    check_finite_row(row, n, "softmax");
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j)
      if (!mask || mask->at(r, j)) mx = std::max(mx, static_cast<double>(row[j]));
    if (mx == -std::numeric_limits<double>::infinity()) {
      throw ContractError("softmax: row " + std::to_string(r) + " has no attendable entry");
    }
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j)
      if (!mask || mask->at(r, j)) z += std::exp(static_cast<double>(row[j]) - mx);
    for (std::size_t j = 0; j < n; ++j)
      if (!mask || mask->at(r, j))
        out[r * n + j] = static_cast<Real>(std::exp(static_cast<double>(row[j]) - mx) / z);
  }
  Tensor result = make_result(x.shape(), std::move(out));
  if (should_record({&x})) {
    NodePtr xn = x.node(), on = result.node();
    Tape::active()->record(result, [xn, on, rows, n] {
      auto* gx = grad_of(xn);
      if (!gx) return;
      const Real* y = on->data.data();
      const Real* g = on->grad.data();
      for (std::size_t r = 0; r < rows; ++r) {
        double dot = 0.0;
        for (std::size_t j = 0; j < n; ++j) dot += static_cast<double>(g[r * n + j]) * y[r * n + j];
        for (std::size_t j = 0; j < n; ++j)
          (*gx)[r * n + j] += static_cast<Real>(y[r * n + j] * (g[r * n + j] - dot));
      }
    });
  }
  return result;
}

Tensor log_softmax(const Tensor& x) {
  require_rank(x, 2, "log_softmax");
  const std::size_t rows = x.dim(0), n = x.dim(1);
  const auto in = x.data();
  std::vector<Real> out(in.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const Real* row = in.data() + r * n;
    check_finite_row(row, n, "log_softmax");
    double mx = row[0];
    for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, static_cast<double>(row[j]));
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) z += std::exp(static_cast<double>(row[j]) - mx);
    const double lse = mx + std::log(z);
    for (std::size_t j = 0; j < n; ++j) out[r * n + j] = static_cast<Real>(row[j] - lse);
  }
  Tensor result = make_result(x.shape(), std::move(out));
  if (should_record({&x})) {
    NodePtr xn = x.node(), on = result.node();
    Tape::active()->record(result, [xn, on, rows, n] {
      auto* gx = grad_of(xn);
      if (!gx) return;
      const Real* y = on->data.data();
      const Real* g = on->grad.data();
      for (std::size_t r = 0; r < rows; ++r) {
        double gsum = 0.0;
        for (std::size_t j = 0; j < n; ++j) gsum += g[r * n + j];
        for (std::size_t j = 0; j < n; ++j)
          (*gx)[r * n + j] +=
              static_cast<Real>(g[r * n + j] - std::exp(static_cast<double>(y[r * n + j])) * gsum);
      }
    });
  }
  return result;
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  const std::size_t d = x.last_dim();
  if (gain.numel() != d || bias.numel() != d) {
    throw DimensionError("layer_norm: gain/bias " + shape_to_string(gain.shape()) + "/" +
                         shape_to_string(bias.shape()) + " do not fit " + shape_to_string(x.shape()));
  }
  const std::size_t rows = x.outer_size();
  const auto in = x.data(), g = gain.data(), b = bias.data();
  std::vector<Real> out(in.size());
  // Normalized values and inverse deviations are kept for the backward pass.
  std::vector<double> xhat(in.size());
  std::vector<double> inv_std(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const Real* row = in.data() + r * d;
    double mean = 0.0;
    for (std::size_t j = 0; j < d; ++j) mean += row[j];
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double c = row[j] - mean;
      var += c * c;
    }
    var /= static_cast<double>(d);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < d; ++j) {
      xhat[r * d + j] = (row[j] - mean) * inv_std[r];
      out[r * d + j] = static_cast<Real>(xhat[r * d + j] * g[j] + b[j]);
    }
  }
  Tensor result = make_result(x.shape(), std::move(out));
  if (should_record({&x, &gain, &bias})) {
    NodePtr xn = x.node(), gn = gain.node(), bn = bias.node(), on = result.node();
    Tape::active()->record(result, [xn, gn, bn, on, rows, d, xhat = std::move(xhat),
                                    inv_std = std::move(inv_std)] {
      const Real* gout = on->grad.data();
      auto* gx = grad_of(xn);
      auto* gg = grad_of(gn);
      auto* gb = grad_of(bn);
      for (std::size_t r = 0; r < rows; ++r) {
        const Real* go = gout + r * d;
        const double* xh = xhat.data() + r * d;
        if (gg)
          for (std::size_t j = 0; j < d; ++j) (*gg)[j] += static_cast<Real>(go[j] * xh[j]);
        if (gb)
          for (std::size_t j = 0; j < d; ++j) (*gb)[j] += go[j];
        if (gx) {
          double mean_dy = 0.0, mean_dy_xhat = 0.0;
          for (std::size_t j = 0; j < d; ++j) {
            const double dy = static_cast<double>(go[j]) * gn->data[j];
            mean_dy += dy;
            mean_dy_xhat += dy * xh[j];
          }
          mean_dy /= static_cast<double>(d);
          mean_dy_xhat /= static_cast<double>(d);
          for (std::size_t j = 0; j < d; ++j) {
            const double dy = static_cast<double>(go[j]) * gn->data[j];
            (*gx)[r * d + j] +=
                static_cast<Real>(inv_std[r] * (dy - mean_dy - xh[j] * mean_dy_xhat));
          }
        }
      }
    });
  }
  return result;
}

Tensor conv2d(const Tensor& x, const Tensor& kernels, const Tensor* bias, std::size_t stride) {
  require_rank(x, 3, "conv2d");
  require_rank(kernels, 4, "conv2d");
  const std::size_t c_in = x.dim(0), h = x.dim(1), w = x.dim(2);
  const std::size_t c_out = kernels.dim(0);
  if (kernels.dim(1) != c_in || kernels.dim(2) != 3 || kernels.dim(3) != 3) {
    throw DimensionError("conv2d: kernels " + shape_to_string(kernels.shape()) +
                         " do not fit input " + shape_to_string(x.shape()));
  }
  if (bias && (bias->rank() != 1 || bias->dim(0) != c_out)) {
    throw DimensionError("conv2d: bias " + shape_to_string(bias->shape()) + " does not fit " +
                         std::to_string(c_out) + " output channels");
  }
  if (stride == 0) throw ContractError("conv2d: stride must be positive");
  const std::size_t ho = (h + stride - 1) / stride, wo = (w + stride - 1) / stride;
  const std::size_t patch = c_in * 9, pixels = ho * wo;

  // im2col: cols[patch x pixels], zero outside the input (padding 1).
  auto cols = std::make_shared<std::vector<Real>>(patch * pixels, Real(0));
  const auto in = x.data();
  for (std::size_t c = 0; c < c_in; ++c)
    for (std::size_t ky = 0; ky < 3; ++ky)
      for (std::size_t kx = 0; kx < 3; ++kx) {
        Real* dst = cols->data() + ((c * 3 + ky) * 3 + kx) * pixels;
        for (std::size_t oy = 0; oy < ho; ++oy) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * stride + ky) - 1;
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
          for (std::size_t ox = 0; ox < wo; ++ox) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * stride + kx) - 1;
            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
            dst[oy * wo + ox] = in[(c * h + iy) * w + ix];
          }
        }
      }

  std::vector<Real> out(c_out * pixels, Real(0));
  if (bias) {
    const auto bd = bias->data();
    for (std::size_t o = 0; o < c_out; ++o) std::fill_n(out.begin() + o * pixels, pixels, bd[o]);
  }
  gemm_nn(kernels.data().data(), cols->data(), out.data(), c_out, patch, pixels);
  Tensor result = make_result({c_out, ho, wo}, std::move(out));

  const Tensor none;
  if (should_record({&x, &kernels, bias ? bias : &none})) {
    NodePtr xn = x.node(), kn = kernels.node(), on = result.node();
    NodePtr bn = bias ? bias->node() : nullptr;
    Tape::active()->record(result, [=] {
      const Real* g = on->grad.data();
      if (auto* gk = grad_of(kn)) gemm_nt(g, cols->data(), gk->data(), c_out, pixels, patch);
      if (bn) {
        if (auto* gb = grad_of(bn))
          for (std::size_t o = 0; o < c_out; ++o)
            for (std::size_t p = 0; p < pixels; ++p) (*gb)[o] += g[o * pixels + p];
      }
      if (auto* gx = grad_of(xn)) {
        std::vector<Real> dcols(patch * pixels, Real(0));
        gemm_tn(kn->data.data(), g, dcols.data(), c_out, patch, pixels);
        for (std::size_t c = 0; c < c_in; ++c)
          for (std::size_t ky = 0; ky < 3; ++ky)
            for (std::size_t kx = 0; kx < 3; ++kx) {
              const Real* src = dcols.data() + ((c * 3 + ky) * 3 + kx) * pixels;
              for (std::size_t oy = 0; oy < ho; ++oy) {
                const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * stride + ky) - 1;
                if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
                for (std::size_t ox = 0; ox < wo; ++ox) {
                  const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * stride + kx) - 1;
                  if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
                  (*gx)[(c * h + iy) * w + ix] += src[oy * wo + ox];
                }
              }
            }
      }
    });
  }
  return result;
}

Tensor frames_from_channels(const Tensor& x) {
  require_rank(x, 3, "frames_from_channels");
  const std::size_t c = x.dim(0), t = x.dim(1), f = x.dim(2);
  const auto in = x.data();
  std::vector<Real> out(in.size());
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t i = 0; i < t; ++i)
      for (std::size_t j = 0; j < f; ++j) out[i * c * f + ch * f + j] = in[(ch * t + i) * f + j];
  Tensor result = make_result({t, c * f}, std::move(out));
  if (should_record({&x})) {
    NodePtr xn = x.node(), on = result.node();
    Tape::active()->record(result, [xn, on, c, t, f] {
      auto* gx = grad_of(xn);
      if (!gx) return;
      for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t i = 0; i < t; ++i)
          for (std::size_t j = 0; j < f; ++j)
            (*gx)[(ch * t + i) * f + j] += on->grad[i * c * f + ch * f + j];
    });
  }
  return result;
}

Tensor as_single_channel(const Tensor& x) {
  require_rank(x, 2, "as_single_channel");
  Tensor result = make_result({1, x.dim(0), x.dim(1)}, std::vector<Real>(x.data().begin(), x.data().end()));
  if (should_record({&x})) {
    NodePtr xn = x.node(), on = result.node();
    Tape::active()->record(result, [xn, on] {
      if (auto* gx = grad_of(xn))
        for (std::size_t i = 0; i < on->grad.size(); ++i) (*gx)[i] += on->grad[i];
    });
  }
  return result;
}

Tensor concat_last_axis(std::span<const Tensor> parts) {
  if (parts.empty()) throw ContractError("concat_last_axis: no inputs");
  const std::size_t rows = parts[0].outer_size();
  Shape shape = parts[0].shape();
  std::size_t total = 0;
  std::vector<std::size_t> widths;
  for (const auto& p : parts) {
    Shape lead(p.shape().begin(), p.shape().end() - 1);
    Shape lead0(shape.begin(), shape.end() - 1);
    if (p.rank() != shape.size() || lead != lead0) {
      throw DimensionError("concat_last_axis: " + shape_to_string(p.shape()) +
                           " is incompatible with " + shape_to_string(parts[0].shape()));
    }
    widths.push_back(p.last_dim());
    total += p.last_dim();
  }
  shape.back() = total;
  std::vector<Real> out(rows * total);
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const auto in = parts[k].data();
    for (std::size_t r = 0; r < rows; ++r)
      std::copy_n(in.data() + r * widths[k], widths[k], out.data() + r * total + offset);
    offset += widths[k];
  }
  Tensor result = make_result(std::move(shape), std::move(out));
  if (should_record(parts)) {
    std::vector<NodePtr> nodes;
    for (const auto& p : parts) nodes.push_back(p.node());
    NodePtr on = result.node();
    Tape::active()->record(result, [nodes, widths, on, rows, total] {
      std::size_t off = 0;
      for (std::size_t k = 0; k < nodes.size(); ++k) {
        if (auto* g = grad_of(nodes[k]))
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t j = 0; j < widths[k]; ++j)
              (*g)[r * widths[k] + j] += on->grad[r * total + off + j];
        off += widths[k];
      }
    });
  }
  return result;
}

Tensor slice_last_axis(const Tensor& x, std::size_t offset, std::size_t width) {
  const std::size_t n = x.last_dim(), rows = x.outer_size();
  if (width == 0 || offset + width > n) {
    throw DimensionError("slice_last_axis: [" + std::to_string(offset) + ", " +
                         std::to_string(offset + width) + ") out of range for " +
                         shape_to_string(x.shape()));
  }
  Shape shape = x.shape();
  shape.back() = width;
  const auto in = x.data();
  std::vector<Real> out(rows * width);
  for (std::size_t r = 0; r < rows; ++r)
    std::copy_n(in.data() + r * n + offset, width, out.data() + r * width);
  Tensor result = make_result(std::move(shape), std::move(out));
  if (should_record({&x})) {
    NodePtr xn = x.node(), on = result.node();
    Tape::active()->record(result, [xn, on, rows, n, offset, width] {
      if (auto* g = grad_of(xn))
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t j = 0; j < width; ++j) (*g)[r * n + offset + j] += on->grad[r * width + j];
    });
  }
  return result;
}

Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t count) {
  require_rank(x, 2, "slice_rows");
  const std::size_t n = x.dim(1);
  if (count == 0 || begin + count > x.dim(0)) {
    throw DimensionError("slice_rows: rows [" + std::to_string(begin) + ", " +
                         std::to_string(begin + count) + ") out of range for " +
                         shape_to_string(x.shape()));
  }
  const auto in = x.data();
  std::vector<Real> out(in.begin() + begin * n, in.begin() + (begin + count) * n);
  Tensor result = make_result({count, n}, std::move(out));
  if (should_record({&x})) {
    NodePtr xn = x.node(), on = result.node();
    Tape::active()->record(result, [xn, on, begin, n] {
      if (auto* g = grad_of(xn))
        for (std::size_t i = 0; i < on->grad.size(); ++i) (*g)[begin * n + i] += on->grad[i];
    });
  }
  return result;
}

Tensor embedding_lookup(const Tensor& table, std::span<const TokenId> ids) {
  require_rank(table, 2, "embedding_lookup");
  const std::size_t vocab = table.dim(0), d = table.dim(1);
  if (ids.empty()) throw ContractError("embedding_lookup: empty id sequence");
  const auto tab = table.data();
  std::vector<Real> out(ids.size() * d);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= vocab) {
      throw InputError("embedding_lookup: token id " + std::to_string(ids[i]) +
                       " outside vocabulary of " + std::to_string(vocab));
    }
    std::copy_n(tab.data() + static_cast<std::size_t>(ids[i]) * d, d, out.data() + i * d);
  }
  Tensor result = make_result({ids.size(), d}, std::move(out));
  if (should_record({&table})) {
    NodePtr tn = table.node(), on = result.node();
    std::vector<TokenId> kept(ids.begin(), ids.end());
    Tape::active()->record(result, [tn, on, kept = std::move(kept), d] {
      if (auto* g = grad_of(tn))
        for (std::size_t i = 0; i < kept.size(); ++i)
          for (std::size_t j = 0; j < d; ++j)
            (*g)[static_cast<std::size_t>(kept[i]) * d + j] += on->grad[i * d + j];
    });
  }
  return result;
}

Tensor dropout(const Tensor& x, double rate, Rng& rng) {
  if (rate <= 0.0) return x;
  if (rate >= 1.0) throw ConfigError("dropout rate must be below 1");
  const Real keep_scale = static_cast<Real>(1.0 / (1.0 - rate));
  const auto in = x.data();
  auto mask = std::make_shared<std::vector<Real>>(in.size());
  std::vector<Real> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) {
    (*mask)[i] = rng.uniform() < rate ? Real(0) : keep_scale;
    out[i] = in[i] * (*mask)[i];
  }
  Tensor result = make_result(x.shape(), std::move(out));
  if (should_record({&x})) {
    NodePtr xn = x.node(), on = result.node();
    Tape::active()->record(result, [xn, on, mask] {
      if (auto* g = grad_of(xn))
        for (std::size_t i = 0; i < on->grad.size(); ++i) (*g)[i] += on->grad[i] * (*mask)[i];
    });
  }
  return result;
}

}  // namespace medt::inline MEDT_NS
