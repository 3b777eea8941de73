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

#ifndef MEDT_MODEL_HPP_
#define MEDT_MODEL_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "medt/nn.hpp"
#include "medt/parameters.hpp"
#include "medt/tensor.hpp"
#include "medt/vocab.hpp"

namespace medt::inline MEDT_NS {

class CheckpointArchive;

// baseline: one encoder, one cross-attention per decoder layer.
// m_en:     two language-specific encoders, one cross-attention over their mean.
// m_de:     one encoder, two language-specific cross-attentions.
// med:      two encoders, each with its own cross-attention, fused by averaging.
enum class Variant { kBaseline, kMEn, kMDe, kMed };

const char* variant_name(Variant v);
Variant parse_variant(const std::string& name);
bool has_dual_encoders(Variant v);
bool has_dual_cross_attention(Variant v);

struct ModelConfig {
  Variant variant = Variant::kMed;
  std::size_t encoder_layers = 2;  // N
  std::size_t decoder_layers = 2;  // M
  std::size_t d_model = 32;
  std::size_t d_ff = 128;
  std::size_t heads = 2;
  std::size_t tokens_a = 20;
  std::size_t tokens_b = 20;
  std::size_t d_feat = 20;
  std::size_t conv_channels = 16;
  bool encoder_final_norm = true;  // LayerNorm on the last encoder layer output
  double dropout = 0.1;
  double mol_weight = 0.3;  // lambda: weight of the CTC objective
  double label_smoothing = 0.1;

  Vocabulary vocabulary() const { return {tokens_a, tokens_b}; }
  std::size_t vocab_size() const { return vocabulary().size(); }
  void validate() const;

  static ModelConfig toy();
  static ModelConfig full_scale();

  bool operator==(const ModelConfig&) const = default;
};

// One representation per encoder branch in language order (A, B); single
// encoder variants carry one entry.
struct EncoderOutputs {
  std::vector<Tensor> branches;

  std::size_t length() const { return branches.at(0).dim(0); }
  bool dual() const { return branches.size() == 2; }
};

struct EncoderLayerParams {
  LayerNormParams norm_attn;
  MhaParams self_attn;
  LayerNormParams norm_ffn;
  FfnParams ffn;
};

struct EncoderStackParams {
  FrontendParams frontend;
  std::vector<EncoderLayerParams> layers;
  LayerNormParams final_norm;  // unset unless encoder_final_norm
};

struct CrossAttentionParams {
  LayerNormParams norm;
  MhaParams mha;
};

struct DecoderLayerParams {
  LayerNormParams norm_self;
  MhaParams self_attn;
  std::vector<CrossAttentionParams> cross;  // one, or (A, B)
  LayerNormParams norm_ffn;
  FfnParams ffn;
};

struct DecoderParams {
  Tensor embedding;
  std::vector<DecoderLayerParams> layers;
  LayerNormParams final_norm;
  LinearParams output;
};

class MedModel {
 public:
  MedModel(const ModelConfig& config, std::uint64_t seed);
  // Copies would share parameter storage; use model_from_archive for an
  // independent copy.
  MedModel(const MedModel&) = delete;
  MedModel& operator=(const MedModel&) = delete;
  MedModel(MedModel&&) = default;
  MedModel& operator=(MedModel&&) = default;

  const ModelConfig& config() const { return config_; }
  const ParameterRegistry& parameters() const { return registry_; }
  ParameterRegistry& mutable_parameters() { return registry_; }

  const std::vector<EncoderStackParams>& encoders() const { return encoders_; }
  const DecoderParams& decoder() const { return decoder_; }
  const LinearParams& ctc_projection() const { return ctc_; }

  // features: [T, d_feat]. Each branch runs frontend + positional encoding +
  // N pre-norm self-attention/FFN layers on the same input.
  EncoderOutputs encode(const Tensor& features, const ForwardMode& mode = {}) const;

  // Residual cross-attention sub-layer of decoder layer 'layer'. For the dual
  // variants: RC* = UndLyr + MHA*(LayerNorm*(UndLyr), h*, h*) and the result
  // is (RC_A + RC_B) / 2.
  Tensor decode_step_fusion(std::size_t layer, const Tensor& undlyr, const EncoderOutputs& enc,
                            const ForwardMode& mode = {}) const;

  // targets_in starts with <sos>; returns [l, vocab_size] logits.
  Tensor forward_decoder(const EncoderOutputs& enc, std::span<const TokenId> targets_in,
                         const ForwardMode& mode = {}) const;

  // [T', vocab_size + 1] log-probabilities; blank is the last column.
  Tensor ctc_head(const EncoderOutputs& enc) const;

 private:
  EncoderStackParams build_encoder(Rng& rng, const std::string& prefix);
  Tensor run_encoder(const EncoderStackParams& p, const Tensor& features, const ForwardMode& mode) const;

  ModelConfig config_;
  ParameterRegistry registry_;
  std::vector<EncoderStackParams> encoders_;
  DecoderParams decoder_;
  LinearParams ctc_;
};

// Parameter-name prefix of each branch's encoder and cross-attention.
std::string encoder_prefix(const ModelConfig& config, Language branch);
std::string cross_attention_suffix(const ModelConfig& config, Language branch);

struct NameRule {
  std::string from_prefix;
  std::string to_prefix;
};
using NameMap = std::vector<NameRule>;

// Maps a monolingual single-encoder checkpoint onto one branch of 'target':
// the encoder stack plus, per decoder layer, the cross-attention and its
// pre-norm.
NameMap branch_transplant_map(const ModelConfig& target, Language branch);

// Copies every archive tensor selected by 'map' into 'target'. Returns the
// number of tensors copied.
std::size_t transplant(MedModel& target, const CheckpointArchive& archive, const NameMap& map);

// Parameter names of 'config' that a branch transplant is expected to fill.
std::vector<std::string> branch_parameter_names(const MedModel& model, Language branch);

}  // namespace medt::inline MEDT_NS

#endif  // MEDT_MODEL_HPP_
