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

#include <cmath>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "medt/error.hpp"
#include "medt/nn.hpp"
#include "medt/parameters.hpp"
#include "support/oracles.hpp"
#include "support/test_support.hpp"

using namespace medt;
using doctest::Approx;

namespace {

using namespace medt_test::oracle;

Tensor identity(std::size_t n) {
  Tensor t = Tensor::zeros({n, n});
  for (std::size_t i = 0; i < n; ++i) t.mutable_data()[i * n + i] = 1;
  return t;
}

void check_close(const Tensor& t, const Mat& m, double tol) {
  REQUIRE(t.dim(0) == m.size());
  REQUIRE(t.dim(1) == m[0].size());
  for (std::size_t i = 0; i < m.size(); ++i)
    for (std::size_t j = 0; j < m[0].size(); ++j) {
      INFO("(" << i << ", " << j << ")");
      CHECK(std::abs(t.at(i, j) - m[i][j]) <= tol);
    }
}

}  // namespace

TEST_CASE("scaled dot attention") {
  Rng rng(21);
  SUBCASE("a single key returns its value row") {
    const Tensor q = medt_test::random_tensor(rng, {3, 4});
    const Tensor k = medt_test::random_tensor(rng, {1, 4});
    const Tensor v = Tensor::matrix({{0.5, -2, 7}});
    const Tensor out = scaled_dot_attention(q, k, v);
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 3; ++j) CHECK(out.at(i, j) == v.at(0, j));
  }
  SUBCASE("orthogonal queries average the values") {
    const Tensor q = Tensor::matrix({{1, 0}, {2, 0}});
    const Tensor k = Tensor::matrix({{0, 1}, {0, -3}, {0, 2}});
    const Tensor v = Tensor::matrix({{1, 2}, {3, 4}, {5, 9}});
    check_close(scaled_dot_attention(q, k, v), {{3, 5}, {3, 5}}, 1e-6);
  }
  SUBCASE("2x2 with d_k = 1 matches the formula") {
    const Tensor out = scaled_dot_attention(Tensor::matrix({{1}, {2}}), Tensor::matrix({{1}, {0}}),
                                            Tensor::matrix({{1, 0}, {0, 1}}));
    const double e1 = std::exp(1.0), e2 = std::exp(2.0);
    check_close(out, {{e1 / (e1 + 1), 1 / (e1 + 1)}, {e2 / (e2 + 1), 1 / (e2 + 1)}}, 1e-6);
  }
  SUBCASE("an all-masked row is a contract error") {
    AttentionMask mask = AttentionMask::full(2, 2);
    mask.allowed[2] = mask.allowed[3] = 0;
    const Tensor x = medt_test::random_tensor(rng, {2, 2});
    CHECK_THROWS_AS(scaled_dot_attention(x, x, x, &mask), ContractError);
  }
  SUBCASE("width mismatch") {
    CHECK_THROWS_AS(scaled_dot_attention(Tensor::zeros({2, 3}), Tensor::zeros({2, 4}), Tensor::zeros({2, 4})),
                    DimensionError);
  }
}

TEST_CASE("multi-head attention") {
  Rng rng(22);
  SUBCASE("one head with identity projections is plain attention") {
    const MhaParams p{identity(4), identity(4), identity(4), identity(4), 1};
    const Tensor q = medt_test::random_tensor(rng, {3, 4}), kv = medt_test::random_tensor(rng, {5, 4});
    const Tensor a = multi_head_attention(p, q, kv, kv);
    const Tensor b = scaled_dot_attention(q, kv, kv);
    for (std::size_t i = 0; i < a.numel(); ++i) CHECK(a.at(i) == b.at(i));
  }
  SUBCASE("d_k = 1 reduces to softmax(q k^T) v") {
    const MhaParams p{identity(1), identity(1), identity(1), identity(1), 1};
    const Tensor q = Tensor::matrix({{0.7}, {-1.2}}), k = Tensor::matrix({{1}, {0.5}, {-2}});
    const Tensor out = multi_head_attention(p, q, k, k);
    for (std::size_t i = 0; i < 2; ++i) {
      double z = 0, s = 0;
      for (std::size_t j = 0; j < 3; ++j) {
        const double w = std::exp(q.at(i) * k.at(j));
        z += w;
        s += w * k.at(j);
      }
      CHECK(out.at(i) == Approx(s / z).epsilon(1e-6));
    }
  }
  SUBCASE("H = 4, d_model = 8 against the per-head formula") {
    for (int trial = 0; trial < 5; ++trial) {
      ParameterRegistry reg;
      const MhaParams p = make_mha(reg, rng, "mha", 8, 4);
      const Tensor q = medt_test::random_tensor(rng, {3, 8});
      const Tensor k = medt_test::random_tensor(rng, {6, 8}), v = medt_test::random_tensor(rng, {6, 8});
      const Tensor out = multi_head_attention(p, q, k, v);
      CHECK(out.shape() == Shape{3, 8});
      check_close(out, mha_oracle(p, to_mat(q), to_mat(k), to_mat(v)), 1e-5);
    }
  }
  SUBCASE("joint key/value permutation leaves the output unchanged") {
    ParameterRegistry reg;
    const MhaParams p = make_mha(reg, rng, "mha", 8, 2);
    const Tensor q = medt_test::random_tensor(rng, {2, 8}), kv = medt_test::random_tensor(rng, {4, 8});
    std::vector<Real> permuted;
    for (std::size_t r : {2u, 0u, 3u, 1u}) {
      for (std::size_t c = 0; c < 8; ++c) permuted.push_back(kv.at(r, c));
    }
    const Tensor kv2({4, 8}, permuted);
    const Tensor a = multi_head_attention(p, q, kv, kv), b = multi_head_attention(p, q, kv2, kv2);
    for (std::size_t i = 0; i < a.numel(); ++i) CHECK(a.at(i) == Approx(b.at(i)).epsilon(1e-5));
  }
  SUBCASE("output shape follows the queries") {
    ParameterRegistry reg;
    const MhaParams p = make_mha(reg, rng, "mha", 8, 2);
    for (std::size_t tk : {1u, 4u, 9u}) {
      const Tensor out = multi_head_attention(p, medt_test::random_tensor(rng, {3, 8}),
                                              medt_test::random_tensor(rng, {tk, 8}),
                                              medt_test::random_tensor(rng, {tk, 8}));
      CHECK(out.shape() == Shape{3, 8});
    }
  }
  SUBCASE("causal mask: later inputs do not affect earlier outputs") {
    ParameterRegistry reg;
    const MhaParams p = make_mha(reg, rng, "mha", 8, 2);
    const AttentionMask causal = AttentionMask::causal(5);
    const Tensor x = medt_test::random_tensor(rng, {5, 8});
    const Tensor base = multi_head_attention(p, x, x, x, &causal);
    for (std::size_t t = 0; t < 5; ++t) {
      Tensor y = x.clone();
      for (std::size_t r = t + 1; r < 5; ++r)
        for (std::size_t c = 0; c < 8; ++c) y.mutable_data()[r * 8 + c] += static_cast<Real>(rng.normal(0, 3));
      const Tensor out = multi_head_attention(p, y, y, y, &causal);
      for (std::size_t r = 0; r <= t; ++r)
        for (std::size_t c = 0; c < 8; ++c) CHECK(out.at(r, c) == base.at(r, c));
    }
  }
  SUBCASE("d_model must divide into heads") {
    ParameterRegistry reg;
    CHECK_THROWS_AS(make_mha(reg, rng, "mha", 6, 4), ConfigError);
  }
}

TEST_CASE("positional encoding") {
  const Tensor pe = positional_encoding(50, 16);
  REQUIRE(pe.shape() == Shape{50, 16});
  for (std::size_t i = 0; i < 8; ++i) {
    CHECK(pe.at(0, 2 * i) == 0);
    CHECK(pe.at(0, 2 * i + 1) == 1);
  }
  CHECK(std::abs(pe.at(1, 0) - std::sin(1.0)) <= 1e-6);
  CHECK(std::abs(pe.at(1, 0) - 0.841471) <= 1e-6);
  for (std::size_t pos = 0; pos < 50; ++pos)
    for (std::size_t i = 0; i < 8; ++i) {
      const double angle = pos / std::pow(10000.0, 2.0 * i / 16.0);
      CHECK(std::abs(pe.at(pos, 2 * i) - std::sin(angle)) <= 1e-6);
      CHECK(std::abs(pe.at(pos, 2 * i + 1) - std::cos(angle)) <= 1e-6);
      CHECK(std::abs(pe.at(pos, 2 * i)) <= 1);
    }
  CHECK_THROWS_AS(positional_encoding(4, 7), ConfigError);

  const Tensor x = Tensor::filled({3, 16}, 2);
  const Tensor y = add_positional_encoding(x);
  for (std::size_t i = 0; i < y.numel(); ++i) CHECK(y.at(i) == Approx(2 + pe.at(i)));
}

TEST_CASE("position-wise feed-forward") {
  Rng rng(23);
  ParameterRegistry reg;
  FfnParams p = make_ffn(reg, rng, "ffn", 4, 6);
  SUBCASE("zero weights give the output bias") {
    for (Tensor t : {p.w1, p.b1, p.w2}) std::fill(t.mutable_data().begin(), t.mutable_data().end(), Real(0));
    std::fill(p.b2.mutable_data().begin(), p.b2.mutable_data().end(), Real(1.5));
    const Tensor out = ffn(p, medt_test::random_tensor(rng, {3, 4}));
    for (std::size_t i = 0; i < out.numel(); ++i) CHECK(out.at(i) == Real(1.5));
  }
  SUBCASE("relu inactive: affine composition") {
    // A large positive b1 keeps every hidden unit in the linear regime.
    std::fill(p.b1.mutable_data().begin(), p.b1.mutable_data().end(), Real(50));
    for (auto& b : p.b2.mutable_data()) b = static_cast<Real>(rng.normal(0, 1));
    const Tensor x = medt_test::random_tensor(rng, {3, 4});
    Mat h = mat_mul(to_mat(x), to_mat(p.w1));
    for (auto& row : h)
      for (std::size_t j = 0; j < row.size(); ++j) row[j] += p.b1.at(j);
    Mat y = mat_mul(h, to_mat(p.w2));
    for (auto& row : y)
      for (std::size_t j = 0; j < row.size(); ++j) row[j] += p.b2.at(j);
    check_close(ffn(p, x), y, 1e-4);  // |values| ~ 1e2, so 1e-6 relative
  }
  SUBCASE("rows are processed independently") {
    const Tensor x = medt_test::random_tensor(rng, {4, 4});
    std::vector<Real> rev;
    for (std::size_t r = 4; r-- > 0;)
      for (std::size_t c = 0; c < 4; ++c) rev.push_back(x.at(r, c));
    const Tensor a = ffn(p, x), b = ffn(p, Tensor({4, 4}, rev));
    for (std::size_t r = 0; r < 4; ++r)
      for (std::size_t c = 0; c < 4; ++c) CHECK(a.at(r, c) == Approx(b.at(3 - r, c)).epsilon(1e-6));
  }
}

TEST_CASE("downsampling frontend") {
  Rng rng(24);
  ParameterRegistry reg;
  const FrontendParams p = make_frontend(reg, rng, "frontend", 20, 4, 8);
  for (auto [t, expected] : std::vector<std::pair<std::size_t, std::size_t>>{{16, 4}, {17, 5}, {1, 1}, {4, 1}, {5, 2}}) {
    CHECK(downsampled_length(t) == expected);
    const Tensor out = downsample_frontend(p, medt_test::random_tensor(rng, {t, 20}));
    CHECK(out.shape() == Shape{expected, 8});
  }
  CHECK_THROWS_AS(downsample_frontend(p, medt_test::random_tensor(rng, {8, 12})), DimensionError);
}
