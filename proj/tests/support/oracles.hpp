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

#ifndef MEDT_TESTS_ORACLES_HPP_
#define MEDT_TESTS_ORACLES_HPP_

// Plain double-precision reference implementations, written from the
// formulas and independent of the library's kernels.

#include <cmath>
#include <numeric>
#include <vector>

#include "medt/model.hpp"
#include "medt/nn.hpp"

namespace medt_test::oracle {

using medt::Tensor;

using Mat = std::vector<std::vector<double>>;

inline Mat to_mat(const Tensor& t) {
  Mat m(t.dim(0), std::vector<double>(t.dim(1)));
  for (std::size_t i = 0; i < t.dim(0); ++i)
    for (std::size_t j = 0; j < t.dim(1); ++j) m[i][j] = t.at(i, j);
  return m;
}

inline Mat mat_mul(const Mat& a, const Mat& b) {
  Mat c(a.size(), std::vector<double>(b[0].size(), 0.0));
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t k = 0; k < b.size(); ++k)
      for (std::size_t j = 0; j < b[0].size(); ++j) c[i][j] += a[i][k] * b[k][j];
  return c;
}

inline Mat columns(const Mat& m, std::size_t from, std::size_t count) {
  Mat out(m.size());
  for (std::size_t i = 0; i < m.size(); ++i) out[i].assign(m[i].begin() + from, m[i].begin() + from + count);
  return out;
}

// softmax(q k^T / sqrt(d_k)) v, row by row.
inline Mat attention_oracle(const Mat& q, const Mat& k, const Mat& v) {
  const double dk = static_cast<double>(q[0].size());
  Mat out(q.size(), std::vector<double>(v[0].size(), 0.0));
  for (std::size_t i = 0; i < q.size(); ++i) {
    std::vector<double> w(k.size());
    for (std::size_t j = 0; j < k.size(); ++j) {
      double s = 0;
      for (std::size_t c = 0; c < q[0].size(); ++c) s += q[i][c] * k[j][c];
      w[j] = std::exp(s / std::sqrt(dk));
    }
    const double z = std::accumulate(w.begin(), w.end(), 0.0);
    for (std::size_t j = 0; j < k.size(); ++j)
      for (std::size_t c = 0; c < v[0].size(); ++c) out[i][c] += w[j] / z * v[j][c];
  }
  return out;
}

// Concat(head_1..head_H) W^O with head_i = Attention(Q W_i^Q, K W_i^K, V W_i^V).
inline Mat mha_oracle(const medt::MhaParams& p, const Mat& q, const Mat& k, const Mat& v) {
  const std::size_t d = p.wq.dim(0), dk = d / p.heads;
  const Mat wq = to_mat(p.wq), wk = to_mat(p.wk), wv = to_mat(p.wv), wo = to_mat(p.wo);
  Mat concat(q.size());
  for (std::size_t h = 0; h < p.heads; ++h) {
    const Mat head = attention_oracle(mat_mul(q, columns(wq, h * dk, dk)), mat_mul(k, columns(wk, h * dk, dk)),
                                      mat_mul(v, columns(wv, h * dk, dk)));
    for (std::size_t i = 0; i < q.size(); ++i) concat[i].insert(concat[i].end(), head[i].begin(), head[i].end());
  }
  return mat_mul(concat, wo);
}

// (x - mean) / sqrt(var + eps) * gain + bias per row, population variance.
inline Mat layer_norm_oracle(const Mat& x, const Tensor& gain, const Tensor& bias, double eps = 1e-12) {
  Mat out = x;
  for (auto& row : out) {
    const double n = static_cast<double>(row.size());
    const double mean = std::accumulate(row.begin(), row.end(), 0.0) / n;
    double var = 0;
    for (double v : row) var += (v - mean) * (v - mean);
    var /= n;
    for (std::size_t j = 0; j < row.size(); ++j) row[j] = (row[j] - mean) / std::sqrt(var + eps) * gain.at(j) + bias.at(j);
  }
  return out;
}

inline Mat add_mat(const Mat& a, const Mat& b) {
  Mat c = a;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a[i].size(); ++j) c[i][j] += b[i][j];
  return c;
}

inline Mat scale_mat(const Mat& a, double f) {
  Mat c = a;
  for (auto& row : c)
    for (double& v : row) v *= f;
  return c;
}

// Cross-attention sub-layer of one decoder layer, step by step:
//   Q* = LayerNorm*(UndLyr), K* = V* = h*
//   RC* = UndLyr + MHA*(Q*, K*, V*)
//   MidLyr = (RC_A + RC_B) / 2
// Single cross-attention variants use one RC over h (baseline), over the
// mean of both encoders (m_en); m_de feeds its one encoder to both branches.
inline Mat fusion_oracle(const medt::MedModel& model, std::size_t layer, const Mat& undlyr,
                         const std::vector<Mat>& enc) {
  const auto& cross = model.decoder().layers.at(layer).cross;
  auto rc = [&](const medt::CrossAttentionParams& p, const Mat& memory) {
    const Mat q = layer_norm_oracle(undlyr, p.norm.gain, p.norm.bias);
    return add_mat(undlyr, mha_oracle(p.mha, q, memory, memory));
  };
  if (cross.size() == 1) {
    const Mat memory = enc.size() == 2 ? scale_mat(add_mat(enc[0], enc[1]), 0.5) : enc[0];
    return rc(cross[0], memory);
  }
  const Mat& a = enc[0];
  const Mat& b = enc.size() == 2 ? enc[1] : enc[0];
  return scale_mat(add_mat(rc(cross[0], a), rc(cross[1], b)), 0.5);
}

// -log of the summed probability of every length-T path over V+1 symbols
// (blank = V) that collapses to 'labels' (merge repeats, drop blanks).
inline double ctc_brute_force(const Mat& log_probs, const std::vector<medt::TokenId>& labels) {
  const std::size_t frames = log_probs.size(), symbols = log_probs[0].size();
  const auto blank = static_cast<medt::TokenId>(symbols - 1);
  std::vector<medt::TokenId> path(frames, 0);
  double total = 0.0;
  while (true) {
    std::vector<medt::TokenId> collapsed;
    medt::TokenId prev = -1;
    double lp = 0.0;
    for (std::size_t t = 0; t < frames; ++t) {
      lp += log_probs[t][static_cast<std::size_t>(path[t])];
      if (path[t] != blank && path[t] != prev) collapsed.push_back(path[t]);
      prev = path[t];
    }
    if (collapsed == labels) total += std::exp(lp);
    std::size_t i = 0;
    while (i < frames && ++path[i] == static_cast<medt::TokenId>(symbols)) path[i++] = 0;
    if (i == frames) break;
  }
  return -std::log(total);
}

}  // namespace medt_test::oracle

#endif  // MEDT_TESTS_ORACLES_HPP_
