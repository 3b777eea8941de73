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

#ifndef MEDT_TENSOR_HPP_
#define MEDT_TENSOR_HPP_

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "medt/real.hpp"
#include "medt/rng.hpp"

namespace medt::inline MEDT_NS {

using Shape = std::vector<std::size_t>;

std::string shape_to_string(const Shape& shape);
std::size_t shape_numel(const Shape& shape);

class Tape;

namespace detail {

struct TensorNode {
  Shape shape;
  std::vector<Real> data;
  // Empty until the first gradient contribution arrives.
  std::vector<Real> grad;
  bool requires_grad = false;
  // Set for op outputs recorded on a tape; null for leaves and constants.
  Tape* tape = nullptr;

  std::vector<Real>& ensure_grad();
};

}  // namespace detail

// Dense row-major tensor with an optional tape node. Copies share storage;
// use clone() for an independent copy.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<Real> data);

  static Tensor zeros(Shape shape);
  static Tensor filled(Shape shape, Real value);
  static Tensor scalar(Real value);
  static Tensor matrix(std::initializer_list<std::initializer_list<Real>> rows);
  // A trainable leaf: accumulates gradients across backward passes.
  static Tensor parameter(Shape shape, std::vector<Real> data);

  bool defined() const { return static_cast<bool>(node_); }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const;
  // Extent of the last axis and the number of rows in front of it.
  std::size_t last_dim() const;
  std::size_t outer_size() const;

  std::span<const Real> data() const;
  std::span<Real> mutable_data();
  Real item() const;
  Real at(std::size_t i) const { return data()[i]; }
  Real at(std::size_t row, std::size_t col) const;

  bool requires_grad() const;
  void set_requires_grad(bool value);
  bool has_grad() const;
  std::span<const Real> grad() const;
  std::span<Real> mutable_grad();
  void zero_grad();

  Tape* tape() const;
  Tensor clone() const;
  // Same values, no tape, no gradient tracking.
  Tensor detach() const;

  const std::shared_ptr<detail::TensorNode>& node() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<detail::TensorNode> node) : node_(std::move(node)) {}
  std::shared_ptr<detail::TensorNode> node_;

  friend Tensor make_result(Shape shape, std::vector<Real> data);
};

// Records operations executed while it is active on the current thread.
// Backward visits records in exact reverse order of recording.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  ~Tape();

  class Scope {
   public:
    explicit Scope(Tape* tape);
    Scope(const Scope&) = delete;
    Scope& operator=(const Scope&) = delete;
    ~Scope();

   private:
    Tape* previous_;
  };

  [[nodiscard]] Scope activate() { return Scope(this); }
  static Tape* active();

  std::size_t size() const { return records_.size(); }
  void backward(const Tensor& loss);
  void clear();

  // Called by op implementations once should_record() holds.
  void record(const Tensor& output, std::function<void()> backward_rule);

 private:
  struct Record {
    std::shared_ptr<detail::TensorNode> output;
    std::function<void()> backward_rule;
  };
  std::vector<Record> records_;
};

// Helpers for op implementations.
Tensor make_result(Shape shape, std::vector<Real> data);
// True if an active tape exists and any input requires gradients.
bool should_record(std::initializer_list<const Tensor*> inputs);
bool should_record(std::span<const Tensor> inputs);

// Boolean attention mask, true = attendable.
struct AttentionMask {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<unsigned char> allowed;

  static AttentionMask causal(std::size_t length);
  static AttentionMask full(std::size_t rows, std::size_t cols);
  bool at(std::size_t r, std::size_t c) const { return allowed[r * cols + c] != 0; }
};

// ---- Operations. All of them record a backward rule when taping. ----

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& x);
Tensor add(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
// x[..., n] + bias[n]
Tensor add_bias(const Tensor& x, const Tensor& bias);
Tensor scale(const Tensor& x, Real factor);
Tensor relu(const Tensor& x);
Tensor mean_pair(const Tensor& a, const Tensor& b);
Tensor sum(const Tensor& x);

// Softmax over the last axis of a 2-D tensor; masked entries get exactly zero
// probability. A row with no attendable entry is a contract error.
Tensor softmax(const Tensor& x, const AttentionMask* mask = nullptr);
Tensor log_softmax(const Tensor& x);
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                  double eps = 1e-12);

// Cross-correlation of x[c_in, H, W] with kernels[c_out, c_in, 3, 3],
// zero "same" padding. Output [c_out, ceil(H/stride), ceil(W/stride)].
Tensor conv2d(const Tensor& x, const Tensor& kernels, const Tensor* bias,
              std::size_t stride = 2);
// [c, T, F] -> [T, c*F], channel-major within each frame.
Tensor frames_from_channels(const Tensor& x);
// [T, F] -> [1, T, F]
Tensor as_single_channel(const Tensor& x);

Tensor concat_last_axis(std::span<const Tensor> parts);
Tensor slice_last_axis(const Tensor& x, std::size_t offset, std::size_t width);
Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t count);
Tensor embedding_lookup(const Tensor& table, std::span<const TokenId> ids);
Tensor dropout(const Tensor& x, double rate, Rng& rng);

}  // namespace medt::inline MEDT_NS

#endif  // MEDT_TENSOR_HPP_
