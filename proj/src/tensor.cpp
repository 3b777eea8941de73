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

#include "medt/tensor.hpp"

#include <algorithm>
#include <sstream>

#include "medt/error.hpp"

namespace medt::inline MEDT_NS {

namespace {

thread_local Tape* g_active_tape = nullptr;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

const char* error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kDimension: return "dimension";
    case ErrorCode::kContract: return "contract";
    case ErrorCode::kConfig: return "config";
    case ErrorCode::kInput: return "input";
    case ErrorCode::kInfeasible: return "infeasible";
    case ErrorCode::kTransplant: return "transplant";
    case ErrorCode::kFormat: return "format";
    case ErrorCode::kIo: return "io";
    case ErrorCode::kNumeric: return "numeric";
    case ErrorCode::kInternal: return "internal";
  }
  return "unknown";
}

std::uint64_t derive_seed(std::uint64_t seed, std::string_view stream) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (unsigned char c : stream) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return splitmix64(splitmix64(seed) ^ h);
}

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto e : shape) n *= e;
  return n;
}

std::vector<Real>& detail::TensorNode::ensure_grad() {
  if (grad.empty()) grad.assign(data.size(), Real(0));
  return grad;
}

Tensor::Tensor(Shape shape, std::vector<Real> data) {
  for (auto e : shape) {
    if (e == 0) throw DimensionError("tensor extents must be positive, got " + shape_to_string(shape));
  }
  if (shape_numel(shape) != data.size()) {
    throw DimensionError("shape " + shape_to_string(shape) + " does not match " +
                         std::to_string(data.size()) + " values");
  }
  node_ = std::make_shared<detail::TensorNode>();
  node_->shape = std::move(shape);
  node_->data = std::move(data);
}

Tensor Tensor::zeros(Shape shape) { return filled(std::move(shape), Real(0)); }

Tensor Tensor::filled(Shape shape, Real value) {
  const auto n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<Real>(n, value));
}

Tensor Tensor::scalar(Real value) { return Tensor({1}, {value}); }

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<Real>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r ? rows.begin()->size() : 0;
  std::vector<Real> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw DimensionError("ragged matrix literal");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Tensor({r, c}, std::move(data));
}

Tensor Tensor::parameter(Shape shape, std::vector<Real> data) {
  Tensor t(std::move(shape), std::move(data));
  t.node_->requires_grad = true;
  return t;
}

const Shape& Tensor::shape() const {
  if (!node_) throw ContractError("use of an undefined tensor");
  return node_->shape;
}

std::size_t Tensor::dim(std::size_t axis) const {
  const auto& s = shape();
  if (axis >= s.size()) {
    throw DimensionError("axis " + std::to_string(axis) + " out of range for " + shape_to_string(s));
  }
  return s[axis];
}

std::size_t Tensor::numel() const { return node_ ? node_->data.size() : 0; }
std::size_t Tensor::last_dim() const { return shape().back(); }
std::size_t Tensor::outer_size() const { return numel() / last_dim(); }

std::span<const Real> Tensor::data() const {
  if (!node_) throw ContractError("use of an undefined tensor");
  return node_->data;
}

std::span<Real> Tensor::mutable_data() {
  if (!node_) throw ContractError("use of an undefined tensor");
  if (node_->tape) throw ContractError("cannot mutate a tensor recorded on a tape");
  return node_->data;
}

Real Tensor::item() const {
  if (numel() != 1) throw ContractError("item() on non-scalar tensor " + shape_to_string(shape()));
  return node_->data[0];
}

Real Tensor::at(std::size_t row, std::size_t col) const {
  const auto& s = shape();
  if (s.size() != 2) throw DimensionError("at(row, col) needs a matrix, got " + shape_to_string(s));
  return node_->data[row * s[1] + col];
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

void Tensor::set_requires_grad(bool value) {
  if (!node_) throw ContractError("use of an undefined tensor");
  if (node_->tape) throw ContractError("cannot change gradient tracking of a recorded tensor");
  node_->requires_grad = value;
}

bool Tensor::has_grad() const { return node_ && !node_->grad.empty(); }

std::span<const Real> Tensor::grad() const {
  if (!node_) return {};
  return node_->grad;
}

std::span<Real> Tensor::mutable_grad() {
  if (!node_) throw ContractError("use of an undefined tensor");
  return node_->ensure_grad();
}

void Tensor::zero_grad() {
  if (node_ && !node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), Real(0));
}

Tape* Tensor::tape() const { return node_ ? node_->tape : nullptr; }

Tensor Tensor::clone() const {
  Tensor t(shape(), node_->data);
  t.node_->requires_grad = node_->requires_grad && node_->tape == nullptr;
  return t;
}

Tensor Tensor::detach() const { return Tensor(shape(), node_->data); }

Tensor make_result(Shape shape, std::vector<Real> data) {
  auto node = std::make_shared<detail::TensorNode>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  return Tensor(std::move(node));
}

bool should_record(std::initializer_list<const Tensor*> inputs) {
  if (!g_active_tape) return false;
  return std::any_of(inputs.begin(), inputs.end(),
                     [](const Tensor* t) { return t && t->requires_grad(); });
}

bool should_record(std::span<const Tensor> inputs) {
  if (!g_active_tape) return false;
  return std::any_of(inputs.begin(), inputs.end(),
                     [](const Tensor& t) { return t.requires_grad(); });
}

Tape::Scope::Scope(Tape* tape) : previous_(g_active_tape) { g_active_tape = tape; }
Tape::Scope::~Scope() { g_active_tape = previous_; }

Tape* Tape::active() { return g_active_tape; }

Tape::~Tape() { clear(); }

void Tape::clear() {
  for (auto& r : records_) r.output->tape = nullptr;
  records_.clear();
}

void Tape::record(const Tensor& output, std::function<void()> backward_rule) {
  auto& node = output.node();
  node->requires_grad = true;
  node->tape = this;
  records_.push_back({node, std::move(backward_rule)});
}

void Tape::backward(const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw ContractError("backward() needs a scalar loss, got " +
                        (loss.defined() ? shape_to_string(loss.shape()) : std::string("undefined")));
  }
  if (loss.tape() != this) throw ContractError("backward() loss was not recorded on this tape");
  // Intermediate gradients restart at zero so repeated calls add exactly one
  // more contribution to the leaves.
  for (auto& r : records_) r.output->grad.clear();
  loss.node()->ensure_grad()[0] += Real(1);
  for (auto it = records_.rbegin(); it != records_.rend(); ++it) {
    if (it->output->grad.empty()) continue;
    it->backward_rule();
  }
}

AttentionMask AttentionMask::causal(std::size_t length) {
  AttentionMask m{length, length, std::vector<unsigned char>(length * length, 0)};
  for (std::size_t r = 0; r < length; ++r) {
    for (std::size_t c = 0; c <= r; ++c) m.allowed[r * length + c] = 1;
  }
  return m;
}

AttentionMask AttentionMask::full(std::size_t rows, std::size_t cols) {
  return AttentionMask{rows, cols, std::vector<unsigned char>(rows * cols, 1)};
}

}  // namespace medt::inline MEDT_NS
