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

#ifndef MEDT_PARAMETERS_HPP_
#define MEDT_PARAMETERS_HPP_

#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "medt/rng.hpp"
#include "medt/tensor.hpp"

namespace medt::inline MEDT_NS {

// Named trainable tensors in registration order. Names are hierarchical
// ("encoder_a.layers.0.self_attn.wq") and stable across model variants.
class ParameterRegistry {
 public:
  using Entry = std::pair<std::string, Tensor>;

  Tensor add(std::string name, Shape shape, std::vector<Real> values);
  bool contains(std::string_view name) const;
  const Tensor* find(std::string_view name) const;
  const Tensor& at(std::string_view name) const;

  std::size_t size() const { return entries_.size(); }
  std::size_t scalar_count() const;
  void zero_grad();

  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

 private:
  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Uniform Xavier/Glorot values for a tensor with the given fans.
std::vector<Real> xavier_uniform(Rng& rng, std::size_t count, std::size_t fan_in,
                                 std::size_t fan_out);

}  // namespace medt::inline MEDT_NS

#endif  // MEDT_PARAMETERS_HPP_
