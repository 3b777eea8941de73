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

#ifndef MEDT_NN_HPP_
#define MEDT_NN_HPP_

#include <cstddef>
#include <string>

#include "medt/parameters.hpp"
#include "medt/rng.hpp"
#include "medt/tensor.hpp"

namespace medt::inline MEDT_NS {

// Train-time behaviour of a forward pass. A null rng means evaluation mode.
struct ForwardMode {
  double dropout = 0.0;
  Rng* rng = nullptr;

  bool training() const { return rng != nullptr && dropout > 0.0; }
  static ForwardMode eval() { return {}; }
};

struct LayerNormParams {
  Tensor gain;
  Tensor bias;
};

struct LinearParams {
  Tensor weight;  // [in, out]
  Tensor bias;    // [out]
};

// Head i uses columns [i*d_k, (i+1)*d_k) of wq/wk/wv, which is the same as
// H separate d_model x d_k projections. wo maps the concatenated heads back.
struct MhaParams {
  Tensor wq;  // [d_model, d_model]
  Tensor wk;
  Tensor wv;
  Tensor wo;
  std::size_t heads = 1;
};

struct FfnParams {
  Tensor w1;  // [d_model, d_ff]
  Tensor b1;
  Tensor w2;  // [d_ff, d_model]
  Tensor b2;
};

// Two stride-2 3x3 convolutions (each followed by relu) over the
// [frames, feature] plane, then a linear projection of every output frame.
struct FrontendParams {
  Tensor conv1_kernels;  // [C, 1, 3, 3]
  Tensor conv1_bias;
  Tensor conv2_kernels;  // [C, C, 3, 3]
  Tensor conv2_bias;
  LinearParams proj;     // [C * ceil(ceil(d_feat/2)/2), d_model]
};

LayerNormParams make_layer_norm(ParameterRegistry& reg, const std::string& name, std::size_t d);
LinearParams make_linear(ParameterRegistry& reg, Rng& rng, const std::string& name,
                         std::size_t in, std::size_t out);
MhaParams make_mha(ParameterRegistry& reg, Rng& rng, const std::string& name,
                   std::size_t d_model, std::size_t heads);
FfnParams make_ffn(ParameterRegistry& reg, Rng& rng, const std::string& name,
                   std::size_t d_model, std::size_t d_ff);
FrontendParams make_frontend(ParameterRegistry& reg, Rng& rng, const std::string& name,
                             std::size_t d_feat, std::size_t channels, std::size_t d_model);

Tensor linear(const LinearParams& p, const Tensor& x);
Tensor apply_layer_norm(const LayerNormParams& p, const Tensor& x);

// softmax(Q K^T / sqrt(d_k)) V. Masked-out keys get zero weight.
Tensor scaled_dot_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                            const AttentionMask* mask = nullptr);
Tensor multi_head_attention(const MhaParams& p, const Tensor& query, const Tensor& key,
                            const Tensor& value, const AttentionMask* mask = nullptr);

// Sinusoidal table: sin on even columns, cos on odd columns.
Tensor positional_encoding(std::size_t max_len, std::size_t d_model);
// x + PE[0:rows]
Tensor add_positional_encoding(const Tensor& x);

Tensor ffn(const FfnParams& p, const Tensor& x, const ForwardMode& mode = {});

constexpr std::size_t downsampled_length(std::size_t frames) {
  return ((frames + 1) / 2 + 1) / 2;
}
Tensor downsample_frontend(const FrontendParams& p, const Tensor& features);

}  // namespace medt::inline MEDT_NS

#endif  // MEDT_NN_HPP_
