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

#ifndef MEDT_EXPERIMENT_HPP_
#define MEDT_EXPERIMENT_HPP_

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "medt/data.hpp"
#include "medt/decode.hpp"
#include "medt/model.hpp"
#include "medt/train.hpp"

namespace medt::inline MEDT_NS {

// Flat key=value experiment settings. Files may contain blank lines,
// '#' comments and "include <path>" lines (resolved relative to the
// including file). Every key must be known; values are type-checked when
// set.
class ExperimentConfig {
 public:
  enum class Kind { kString, kSize, kUint64, kReal, kBool, kVariant };
  struct KeyInfo {
    std::string name;
    Kind kind;
    std::string default_value;
    std::string help;
  };

  ExperimentConfig();
  static ExperimentConfig load(const std::string& path);
  static const std::vector<KeyInfo>& keys();

  void merge_file(const std::string& path);
  void parse_text(const std::string& text, const std::string& origin);
  void set(const std::string& key, const std::string& value);
  // "key=value"
  void set_assignment(const std::string& assignment);

  bool is_set(const std::string& key) const;  // differs from its default
  const std::string& get(const std::string& key) const;
  std::size_t get_size(const std::string& key) const;
  std::uint64_t get_u64(const std::string& key) const;
  double get_real(const std::string& key) const;
  bool get_bool(const std::string& key) const;

  ModelConfig model_config() const;
  TrainConfig train_config() const;
  TrainConfig pretrain_config() const;
  DataConfig data_config() const;
  // LM pointer left unset.
  BeamOptions beam_options() const;

  std::string to_text() const;

 private:
  void merge_file_impl(const std::string& path, std::vector<std::string>& stack);
  std::map<std::string, std::string> values_;
};

// Each command validates its paths first, then runs, and returns a short
// human-readable summary. Failures throw medt::Error subclasses.
std::string cmd_gen(const ExperimentConfig& config);
std::string cmd_train(const ExperimentConfig& config);
std::string cmd_recipe(const ExperimentConfig& config);
std::string cmd_ablation(const ExperimentConfig& config);
std::string cmd_decode(const ExperimentConfig& config);
std::string cmd_analyze(const ExperimentConfig& config);

struct AblationRow {
  std::string system;
  std::array<TerReport, 2> eval;  // eval_a, eval_b
};

void write_ablation_table(const std::string& path, const std::vector<AblationRow>& rows);
void write_ter_report(const std::string& path, const std::vector<std::pair<std::string, std::string>>& header,
                      const TerReport& report);

}  // namespace medt::inline MEDT_NS

#endif  // MEDT_EXPERIMENT_HPP_
