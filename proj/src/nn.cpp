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

#include "medt/nn.hpp"

#include <cmath>
#include <vector>

#include "medt/error.hpp"

namespace medt::inline MEDT_NS {

LayerNormParams make_layer_norm(ParameterRegistry& reg, const std::string& name, std::size_t d) {
  return {reg.add(name + ".gain", {d}, std::vector<Real>(d, Real(1))),
          reg.add(name + ".bias", {d}, std::vector<Real>(d, Real(0)))};
}

LinearParams make_linear(ParameterRegistry& reg, Rng& rng, const std::string& name,
                         std::size_t in, std::size_t out) {
  return {reg.add(name + ".weight", {in, out}, xavier_uniform(rng, in * out, in, out)),
          reg.add(name + ".bias", {out}, std::vector<Real>(out, Real(0)))};
}

MhaParams make_mha(ParameterRegistry& reg, Rng& rng, const std::string& name,
                   std::size_t d_model, std::size_t heads) {
  if (heads == 0 || d_model % heads != 0) {
    throw ConfigError("d_model " + std::to_string(d_model) + " is not divisible by " +
                      std::to_string(heads) + " heads");
  }
  const std::size_t n = d_model * d_model;
  MhaParams p;
  p.wq = reg.add(name + ".wq", {d_model, d_model}, xavier_uniform(rng, n, d_model, d_model));
  p.wk = reg.add(name + ".wk", {d_model, d_model}, xavier_uniform(rng, n, d_model, d_model));
  p.wv = reg.add(name + ".wv", {d_model, d_model}, xavier_uniform(rng, n, d_model, d_model));
  p.wo = reg.add(name + ".wo", {d_model, d_model}, xavier_uniform(rng, n, d_model, d_model));
  p.heads = heads;
  return p;
}

FfnParams make_ffn(ParameterRegistry& reg, Rng& rng, const std::string& name,
                   std::size_t d_model, std::size_t d_ff) {
  FfnParams p;
  p.w1 = reg.add(name + ".w1", {d_model, d_ff}, xavier_uniform(rng, d_model * d_ff, d_model, d_ff));
  p.b1 = reg.add(name + ".b1", {d_ff}, std::vector<Real>(d_ff, Real(0)));
  p.w2 = reg.add(name + ".w2", {d_ff, d_model}, xavier_uniform(rng, d_model * d_ff, d_ff, d_model));
  p.b2 = reg.add(name + ".b2", {d_model}, std::vector<Real>(d_model, Real(0)));
  return p;
}

FrontendParams make_frontend(ParameterRegistry& reg, Rng& rng, const std::string& name,
                             std::size_t d_feat, std::size_t channels, std::size_t d_model) {
  FrontendParams p;
  p.conv1_kernels = reg.add(name + ".conv1.kernels", {channels, 1, 3, 3},
                            xavier_uniform(rng, channels * 9, 9, channels * 9));
  p.conv1_bias = reg.add(name + ".conv1.bias", {channels}, std::vector<Real>(channels, Real(0)));
  p.conv2_kernels = reg.add(name + ".conv2.kernels", {channels, channels, 3, 3},
                            xavier_uniform(rng, channels * channels * 9, channels * 9, channels * 9));
  p.conv2_bias = reg.add(name + ".conv2.bias", {channels}, std::vector<Real>(channels, Real(0)));
  const std::size_t flat = channels * downsampled_length(d_feat);
  p.proj = make_linear(reg, rng, name + ".proj", flat, d_model);
  return p;
}

Tensor linear(const LinearParams& p, const Tensor& x) {
  return add_bias(matmul(x, p.weight), p.bias);
}

Tensor apply_layer_norm(const LayerNormParams& p, const Tensor& x) {
  return layer_norm(x, p.gain, p.bias, 1e-12);
}

Tensor scaled_dot_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                            const AttentionMask* mask) {
  if (q.rank() != 2 || k.rank() != 2 || v.rank() != 2) {
    throw DimensionError("attention expects matrices, got " + shape_to_string(q.shape()) + ", " +
                         shape_to_string(k.shape()) + ", " + shape_to_string(v.shape()));
  }
  if (q.dim(1) != k.dim(1)) {
    throw DimensionError("attention: query width " + std::to_string(q.dim(1)) +
                         " differs from key width " + std::to_string(k.dim(1)));
  }
  if (k.dim(0) != v.dim(0)) {
    throw DimensionError("attention: " + std::to_string(k.dim(0)) + " keys but " +
                         std::to_string(v.dim(0)) + " values");
  }
  const Real inv_sqrt = static_cast<Real>(1.0 / std::sqrt(static_cast<double>(k.dim(1))));
  Tensor logits = scale(matmul(q, transpose(k)), inv_sqrt);
  return matmul(softmax(logits, mask), v);
}

Tensor multi_head_attention(const MhaParams& p, const Tensor& query, const Tensor& key,
                            const Tensor& value, const AttentionMask* mask) {
  const std::size_t d_model = p.wq.dim(0);
  const std::size_t d_head = d_model / p.heads;
  Tensor q = matmul(query, p.wq);
  Tensor k = matmul(key, p.wk);
  Tensor v = matmul(value, p.wv);
  if (p.heads == 1) return matmul(scaled_dot_attention(q, k, v, mask), p.wo);
  std::vector<Tensor> heads;
  heads.reserve(p.heads);
  for (std::size_t h = 0; h < p.heads; ++h) {
    const std::size_t off = h * d_head;
    heads.push_back(scaled_dot_attention(slice_last_axis(q, off, d_head),
                                         slice_last_axis(k, off, d_head),
                                         slice_last_axis(v, off, d_head), mask));
  }
  return matmul(concat_last_axis(heads), p.wo);
}

Tensor positional_encoding(std::size_t max_len, std::size_t d_model) {
  if (d_model % 2 != 0) {
    throw ConfigError("positional encoding needs an even d_model, got " + std::to_string(d_model));
  }
  std::vector<Real> table(max_len * d_model);
  for (std::size_t pos = 0; pos < max_len; ++pos) {
    for (std::size_t i = 0; i < d_model / 2; ++i) {
      const double angle = static_cast<double>(pos) /
                           std::pow(10000.0, static_cast<double>(2 * i) / static_cast<double>(d_model));
      table[pos * d_model + 2 * i] = static_cast<Real>(std::sin(angle));
      table[pos * d_model + 2 * i + 1] = static_cast<Real>(std::cos(angle));
    }
  }
  return Tensor({max_len, d_model}, std::move(table));
}

Tensor add_positional_encoding(const Tensor& x) {
  if (x.rank() != 2) throw DimensionError("positional encoding expects a matrix, got " + shape_to_string(x.shape()));
  return add(x, positional_encoding(x.dim(0), x.dim(1)));
}

Tensor ffn(const FfnParams& p, const Tensor& x, const ForwardMode& mode) {
  Tensor hidden = relu(add_bias(matmul(x, p.w1), p.b1));
  if (mode.training()) hidden = dropout(hidden, mode.dropout, *mode.rng);
  return add_bias(matmul(hidden, p.w2), p.b2);
}

Tensor downsample_frontend(const FrontendParams& p, const Tensor& features) {
  if (features.rank() != 2) {
    throw DimensionError("frontend expects [frames, d_feat], got " + shape_to_string(features.shape()));
  }
  Tensor x = as_single_channel(features);
  x = relu(conv2d(x, p.conv1_kernels, &p.conv1_bias, 2));
  x = relu(conv2d(x, p.conv2_kernels, &p.conv2_bias, 2));
  return linear(p.proj, frames_from_channels(x));
}

}  // namespace medt::inline MEDT_NS
