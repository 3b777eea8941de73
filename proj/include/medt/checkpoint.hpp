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

#ifndef MEDT_CHECKPOINT_HPP_
#define MEDT_CHECKPOINT_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "medt/model.hpp"
#include "medt/parameters.hpp"
#include "medt/tensor.hpp"

namespace medt::inline MEDT_NS {

// Named-tensor archive. On disk (all integers little-endian):
//
//   "MEDT" | version u32 | tensor count u32
//   per tensor: name length u16 | UTF-8 name | rank u8 | extents u32[rank]
//               | payload f32[numel]
//   CRC32 u32 over every byte between the header and the CRC itself.
//
// Entries whose names start with "__" carry metadata (model config text,
// training step, optimizer moments) rather than model parameters.
class CheckpointArchive {
 public:
  using Entry = std::pair<std::string, Tensor>;
  static constexpr std::uint32_t kVersion = 1;

  // Stores a detached copy of 'values'; replaces an existing entry.
  void add(const std::string& name, const Tensor& values);
  void add_text(const std::string& name, const std::string& text);
  const Tensor* find(const std::string& name) const;
  std::string text(const std::string& name) const;
  bool contains(const std::string& name) const { return find(name) != nullptr; }

  const std::vector<Entry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

  std::vector<std::uint8_t> serialize() const;
  static CheckpointArchive deserialize(std::span<const std::uint8_t> bytes);
  void save(const std::string& path) const;
  static CheckpointArchive load(const std::string& path);

 private:
  std::vector<Entry> entries_;
};

std::uint32_t crc32(std::span<const std::uint8_t> bytes);

CheckpointArchive snapshot_parameters(const ParameterRegistry& registry);
// Every registry parameter must be present in the archive with its shape.
void restore_parameters(ParameterRegistry& registry, const CheckpointArchive& archive);

std::string serialize_model_config(const ModelConfig& config);
ModelConfig parse_model_config(const std::string& text);

// Parameters plus the model config under "__meta.config".
CheckpointArchive model_archive(const MedModel& model);
MedModel model_from_archive(const CheckpointArchive& archive);

void save_model(const std::string& path, const MedModel& model);
MedModel load_model(const std::string& path);

}  // namespace medt::inline MEDT_NS

#endif  // MEDT_CHECKPOINT_HPP_
