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

#include "medt/parameters.hpp"

#include <cmath>

#include "medt/error.hpp"

namespace medt::inline MEDT_NS {

Tensor ParameterRegistry::add(std::string name, Shape shape, std::vector<Real> values) {
  if (index_.count(name)) throw ContractError("duplicate parameter name " + name);
  Tensor t = Tensor::parameter(std::move(shape), std::move(values));
  index_.emplace(name, entries_.size());
  entries_.emplace_back(std::move(name), t);
  return t;
}

bool ParameterRegistry::contains(std::string_view name) const {
  return index_.count(std::string(name)) != 0;
}

const Tensor* ParameterRegistry::find(std::string_view name) const {
  auto it = index_.find(std::string(name));
  return it == index_.end() ? nullptr : &entries_[it->second].second;
}

const Tensor& ParameterRegistry::at(std::string_view name) const {
  const Tensor* t = find(name);
  if (!t) throw ContractError("unknown parameter " + std::string(name));
  return *t;
}

std::size_t ParameterRegistry::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : entries_) n += t.numel();
  return n;
}

void ParameterRegistry::zero_grad() {
  for (auto& entry : entries_) entry.second.zero_grad();
}

std::vector<Real> xavier_uniform(Rng& rng, std::size_t count, std::size_t fan_in,
                                 std::size_t fan_out) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::vector<Real> values(count);
  for (auto& v : values) v = static_cast<Real>(rng.uniform(-limit, limit));
  return values;
}

}  // namespace medt::inline MEDT_NS
