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

#ifndef MEDT_DATA_HPP_
#define MEDT_DATA_HPP_

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "medt/rng.hpp"
#include "medt/tensor.hpp"
#include "medt/vocab.hpp"

namespace medt::inline MEDT_NS {

// Row-major [frames, dims] 32-bit features as stored on disk.
struct FeatureMatrix {
  std::size_t frames = 0;
  std::size_t dims = 0;
  std::vector<float> values;

  FeatureMatrix() = default;
  FeatureMatrix(std::size_t t, std::size_t d) : frames(t), dims(d), values(t * d, 0.0f) {}
  float& at(std::size_t t, std::size_t d) { return values[t * dims + d]; }
  float at(std::size_t t, std::size_t d) const { return values[t * dims + d]; }
  Tensor to_tensor() const;
  bool operator==(const FeatureMatrix&) const = default;
};

struct SynthLangSpec {
  Language language = Language::kA;
  std::vector<TokenId> vocab;                   // joint-vocabulary ids
  std::vector<std::vector<double>> prototypes;  // one mean vector per vocab entry
  std::size_t min_frames = 4;                   // frames per token, inclusive range
  std::size_t max_frames = 8;
  std::size_t min_tokens = 3;                   // tokens per utterance, inclusive range
  std::size_t max_tokens = 12;
  double noise_sigma = 0.3;

  std::size_t d_feat() const { return prototypes.empty() ? 0 : prototypes[0].size(); }
  const std::vector<double>& prototype(TokenId id) const;
};

struct SynthOptions {
  std::size_t d_feat = 20;
  std::size_t min_frames = 4;
  std::size_t max_frames = 8;
  std::size_t min_tokens = 3;
  std::size_t max_tokens = 12;
  double noise_sigma = 0.3;
  double prototype_scale = 1.0;
  double language_offset = 1.0;
};

// Language A tokens live mostly in the first half of the feature
// dimensions, language B tokens in the second half; each half carries a
// constant language offset on top of the random token pattern.
std::pair<SynthLangSpec, SynthLangSpec> make_language_specs(const Vocabulary& vocab, const SynthOptions& opts,
                                                            std::uint64_t seed);
// Smallest Euclidean distance between prototypes of different languages.
double min_cross_language_distance(const SynthLangSpec& a, const SynthLangSpec& b);

struct Utterance {
  std::string id;
  FeatureMatrix features;
  std::vector<TokenId> labels;
  std::vector<Language> lang_tags;
  Language matrix_language = Language::kA;

  bool operator==(const Utterance&) const = default;
};

struct Corpus {
  std::string name;
  std::vector<Utterance> utterances;

  std::size_t size() const { return utterances.size(); }
  bool empty() const { return utterances.empty(); }
  std::size_t token_count() const;
  std::size_t token_count(Language lang) const;
  std::size_t frame_count() const;
  bool operator==(const Corpus&) const = default;
};

Corpus gen_monolingual(const SynthLangSpec& spec, std::size_t n_utts, std::uint64_t seed,
                       const std::string& id_prefix);

struct CodeSwitchOptions {
  std::size_t n_utts = 0;
  double switch_prob = 0.2;   // matrix -> embedded
  double matrix_ratio = 0.7;  // expected share of matrix-language tokens
  // Fraction of utterances whose matrix language is A; the rest use B.
  double a_matrix_share = 1.0;
};

Corpus gen_code_switching(const SynthLangSpec& a, const SynthLangSpec& b, const CodeSwitchOptions& opts,
                          std::uint64_t seed, const std::string& id_prefix);

// Embedded -> matrix probability that makes the expected matrix-language
// token share equal 'matrix_ratio' for lengths uniform in [min_tokens,
// max_tokens].
double markov_return_probability(double switch_prob, double matrix_ratio, std::size_t min_tokens,
                                 std::size_t max_tokens);
double expected_matrix_share(double switch_prob, double return_prob, std::size_t min_tokens,
                             std::size_t max_tokens);

struct FeatureStats {
  std::vector<double> mean;
  std::size_t frames = 0;
};

FeatureStats compute_mean(std::span<const Corpus* const> training);
void subtract_mean(Corpus& corpus, const FeatureStats& stats);
// Statistics from 'training' only, subtracted from every corpus in both
// lists.
FeatureStats normalize(std::span<Corpus* const> training, std::span<Corpus* const> others = {});

struct MaskOptions {
  std::size_t time_masks = 0;
  std::size_t time_width = 0;  // maximum band width; clipped to the utterance length
  std::size_t feat_masks = 0;
  std::size_t feat_width = 0;
  bool enabled() const { return (time_masks && time_width) || (feat_masks && feat_width); }
};

// Band widths are uniform on [0, width], starts uniform over valid offsets.
FeatureMatrix augment_mask(const FeatureMatrix& features, const MaskOptions& opts, Rng& rng);

struct DataConfig {
  Vocabulary vocab{20, 20};
  SynthOptions synth;
  std::size_t mono_utts = 1500;
  std::size_t cs_train_utts = 2000;
  std::size_t cs_dev_utts = 100;
  std::size_t eval_utts = 400;
  double switch_prob = 0.2;
  double cs_matrix_ratio = 0.7;
  double cs_a_matrix_share = 0.5;
  double eval_a_ratio = 0.69;  // language-A share of the A-matrix eval split
  double eval_b_ratio = 0.71;  // language-B share of the B-matrix eval split
  void validate() const;
};

inline const std::vector<std::string>& split_names() {
  static const std::vector<std::string> names{"mono_a", "mono_b", "cs_train", "cs_dev", "eval_a", "eval_b"};
  return names;
}

struct DatasetInfo {
  Vocabulary vocab;
  std::size_t d_feat = 0;
  std::uint64_t seed = 0;
  std::vector<std::string> splits;
  FeatureStats stats;
};

struct Dataset {
  DatasetInfo info;
  std::map<std::string, Corpus> splits;
};

// All six splits, mean-normalized with statistics pooled over the training
// splits (mono_a, mono_b, cs_train).
Dataset generate_dataset(const DataConfig& config, std::uint64_t seed);

void write_corpus(const std::string& dir, const Corpus& corpus);
Corpus read_corpus(const std::string& dir, const std::string& name, const DatasetInfo& info);
void write_dataset_info(const std::string& dir, const DatasetInfo& info);
DatasetInfo read_dataset_info(const std::string& dir);
void write_dataset(const std::string& dir, const Dataset& dataset);

std::string manifest_path(const std::string& dir, const std::string& name);
std::string features_path(const std::string& dir, const std::string& name);
std::string dataset_info_path(const std::string& dir);

}  // namespace medt::inline MEDT_NS

#endif  // MEDT_DATA_HPP_
