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

#include "medt/model.hpp"

#include <cmath>

#include "medt/checkpoint.hpp"
#include "medt/error.hpp"

namespace medt::inline MEDT_NS {

Language parse_language(const std::string& symbol) {
  if (symbol == "A") return Language::kA;
  if (symbol == "B") return Language::kB;
  throw FormatError("unknown language tag '" + symbol + "'");
}

Language Vocabulary::language_of(TokenId id) const {
  if (!is_content(id)) throw InputError("token " + std::to_string(id) + " has no language");
  return static_cast<std::size_t>(id) < tokens_a ? Language::kA : Language::kB;
}

const char* variant_name(Variant v) {
  switch (v) {
    case Variant::kBaseline: return "baseline";
    case Variant::kMEn: return "m_en";
    case Variant::kMDe: return "m_de";
    case Variant::kMed: return "med";
  }
  return "?";
}

Variant parse_variant(const std::string& name) {
  if (name == "baseline") return Variant::kBaseline;
  if (name == "m_en") return Variant::kMEn;
  if (name == "m_de") return Variant::kMDe;
  if (name == "med") return Variant::kMed;
  throw ConfigError("unknown model variant '" + name + "' (expected baseline, m_en, m_de, med)");
}

bool has_dual_encoders(Variant v) { return v == Variant::kMEn || v == Variant::kMed; }
bool has_dual_cross_attention(Variant v) { return v == Variant::kMDe || v == Variant::kMed; }

void ModelConfig::validate() const {
  auto positive = [](std::size_t v, const char* key) {
    if (v == 0) throw ConfigError(std::string(key) + " must be positive");
  };
  positive(encoder_layers, "encoder_layers");
  positive(decoder_layers, "decoder_layers");
  positive(d_model, "d_model");
  positive(d_ff, "d_ff");
  positive(heads, "heads");
  positive(tokens_a, "tokens_a");
  positive(tokens_b, "tokens_b");
  positive(d_feat, "d_feat");
  positive(conv_channels, "conv_channels");
  if (d_model % heads != 0) throw ConfigError("d_model must be divisible by heads");
  if (d_model % 2 != 0) throw ConfigError("d_model must be even for positional encoding");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must be in [0, 1)");
  if (!(mol_weight >= 0.0 && mol_weight <= 1.0)) throw ConfigError("mol_weight must be in [0, 1]");
  if (!(label_smoothing >= 0.0 && label_smoothing < 1.0)) {
    throw ConfigError("label_smoothing must be in [0, 1)");
  }
}

ModelConfig ModelConfig::toy() { return ModelConfig{}; }

ModelConfig ModelConfig::full_scale() {
  ModelConfig c;
  c.encoder_layers = 12;
  c.decoder_layers = 6;
  c.d_model = 256;
  c.d_ff = 2048;
  c.heads = 4;
  c.mol_weight = 0.3;
  c.conv_channels = 256;
  return c;
}

std::string encoder_prefix(const ModelConfig& config, Language branch) {
  if (!has_dual_encoders(config.variant)) return "encoder";
  return branch == Language::kA ? "encoder_a" : "encoder_b";
}

std::string cross_attention_suffix(const ModelConfig& config, Language branch) {
  if (!has_dual_cross_attention(config.variant)) return "";
  return branch == Language::kA ? "_a" : "_b";
}

MedModel::MedModel(const ModelConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  Rng rng(seed, "init");
  const std::size_t d = config_.d_model;

  if (has_dual_encoders(config_.variant)) {
    encoders_.push_back(build_encoder(rng, encoder_prefix(config_, Language::kA)));
    encoders_.push_back(build_encoder(rng, encoder_prefix(config_, Language::kB)));
  } else {
    encoders_.push_back(build_encoder(rng, "encoder"));
  }

  const std::size_t vocab = config_.vocab_size();
  decoder_.embedding = registry_.add("decoder.embedding", {vocab, d},
                                     xavier_uniform(rng, vocab * d, vocab, d));
  for (std::size_t i = 0; i < config_.decoder_layers; ++i) {
    const std::string p = "decoder.layers." + std::to_string(i);
    DecoderLayerParams layer;
    layer.norm_self = make_layer_norm(registry_, p + ".norm_self", d);
    layer.self_attn = make_mha(registry_, rng, p + ".self_attn", d, config_.heads);
    std::vector<Language> branches{Language::kA};
    if (has_dual_cross_attention(config_.variant)) branches.push_back(Language::kB);
    for (Language b : branches) {
      const std::string sfx = cross_attention_suffix(config_, b);
      CrossAttentionParams cross;
      cross.norm = make_layer_norm(registry_, p + ".norm_src" + sfx, d);
      cross.mha = make_mha(registry_, rng, p + ".src_attn" + sfx, d, config_.heads);
      layer.cross.push_back(std::move(cross));
    }
    layer.norm_ffn = make_layer_norm(registry_, p + ".norm_ffn", d);
    layer.ffn = make_ffn(registry_, rng, p + ".ffn", d, config_.d_ff);
    decoder_.layers.push_back(std::move(layer));
  }
  decoder_.final_norm = make_layer_norm(registry_, "decoder.final_norm", d);
  decoder_.output = make_linear(registry_, rng, "decoder.output", d, vocab);
  ctc_ = make_linear(registry_, rng, "ctc.output", d, vocab + 1);
}

EncoderStackParams MedModel::build_encoder(Rng& rng, const std::string& prefix) {
  const std::size_t d = config_.d_model;
  EncoderStackParams stack;
  stack.frontend = make_frontend(registry_, rng, prefix + ".frontend", config_.d_feat,
                                 config_.conv_channels, d);
  for (std::size_t i = 0; i < config_.encoder_layers; ++i) {
    const std::string p = prefix + ".layers." + std::to_string(i);
    EncoderLayerParams layer;
    layer.norm_attn = make_layer_norm(registry_, p + ".norm_attn", d);
    layer.self_attn = make_mha(registry_, rng, p + ".self_attn", d, config_.heads);
    layer.norm_ffn = make_layer_norm(registry_, p + ".norm_ffn", d);
    layer.ffn = make_ffn(registry_, rng, p + ".ffn", d, config_.d_ff);
    stack.layers.push_back(std::move(layer));
  }
  if (config_.encoder_final_norm) stack.final_norm = make_layer_norm(registry_, prefix + ".final_norm", d);
  return stack;
}

namespace {

Tensor maybe_dropout(const Tensor& x, const ForwardMode& mode) {
  return mode.training() ? dropout(x, mode.dropout, *mode.rng) : x;
}

}  // namespace

Tensor MedModel::run_encoder(const EncoderStackParams& p, const Tensor& features,
                             const ForwardMode& mode) const {
  Tensor x = maybe_dropout(add_positional_encoding(downsample_frontend(p.frontend, features)), mode);
  for (const auto& layer : p.layers) {
    Tensor y = apply_layer_norm(layer.norm_attn, x);
    x = add(x, maybe_dropout(multi_head_attention(layer.self_attn, y, y, y), mode));
    y = apply_layer_norm(layer.norm_ffn, x);
    x = add(x, maybe_dropout(ffn(layer.ffn, y, mode), mode));
  }
  if (p.final_norm.gain.defined()) x = apply_layer_norm(p.final_norm, x);
  return x;
}

EncoderOutputs MedModel::encode(const Tensor& features, const ForwardMode& mode) const {
  if (!features.defined()) throw ContractError("encode: empty feature sequence");
  if (features.rank() != 2 || features.dim(1) != config_.d_feat) {
    throw DimensionError("encode: expected [T, " + std::to_string(config_.d_feat) + "] features, got " +
                         shape_to_string(features.shape()));
  }
  EncoderOutputs out;
  for (const auto& enc : encoders_) out.branches.push_back(run_encoder(enc, features, mode));
  return out;
}

Tensor MedModel::decode_step_fusion(std::size_t layer, const Tensor& undlyr,
                                    const EncoderOutputs& enc, const ForwardMode& mode) const {
  if (layer >= decoder_.layers.size()) {
    throw ContractError("decode_step_fusion: layer " + std::to_string(layer) + " out of range");
  }
  const std::size_t expected = has_dual_encoders(config_.variant) ? 2 : 1;
  if (enc.branches.size() != expected) {
    throw ContractError(std::string("decode_step_fusion: ") + variant_name(config_.variant) +
                        " needs " + std::to_string(expected) + " encoder branch(es), got " +
                        std::to_string(enc.branches.size()));
  }
  const auto& cross = decoder_.layers[layer].cross;
  auto residual = [&](const CrossAttentionParams& p, const Tensor& memory) {
    Tensor q = apply_layer_norm(p.norm, undlyr);
    return add(undlyr, maybe_dropout(multi_head_attention(p.mha, q, memory, memory), mode));
  };
  if (cross.size() == 1) {
    const Tensor memory = enc.dual() ? mean_pair(enc.branches[0], enc.branches[1]) : enc.branches[0];
    return residual(cross[0], memory);
  }
  const Tensor& memory_a = enc.branches[0];
  const Tensor& memory_b = enc.dual() ? enc.branches[1] : enc.branches[0];
  return mean_pair(residual(cross[0], memory_a), residual(cross[1], memory_b));
}

Tensor MedModel::forward_decoder(const EncoderOutputs& enc, std::span<const TokenId> targets_in,
                                 const ForwardMode& mode) const {
  if (targets_in.empty()) throw ContractError("forward_decoder: empty target prefix");
  for (TokenId id : targets_in) {
    if (id < 0 || static_cast<std::size_t>(id) >= config_.vocab_size()) {
      throw InputError("forward_decoder: token id " + std::to_string(id) +
                       " outside vocabulary of " + std::to_string(config_.vocab_size()));
    }
  }
  if (targets_in.front() != config_.vocabulary().sos()) {
    throw ContractError("forward_decoder: target prefix must start with <sos>");
  }
  const std::size_t len = targets_in.size();
  const Real emb_scale = static_cast<Real>(std::sqrt(static_cast<double>(config_.d_model)));
  Tensor x = add_positional_encoding(scale(embedding_lookup(decoder_.embedding, targets_in), emb_scale));
  x = maybe_dropout(x, mode);
  const AttentionMask causal = AttentionMask::causal(len);
  for (std::size_t i = 0; i < decoder_.layers.size(); ++i) {
    const auto& layer = decoder_.layers[i];
    Tensor y = apply_layer_norm(layer.norm_self, x);
    x = add(x, maybe_dropout(multi_head_attention(layer.self_attn, y, y, y, &causal), mode));
    x = decode_step_fusion(i, x, enc, mode);
    y = apply_layer_norm(layer.norm_ffn, x);
    x = add(x, maybe_dropout(ffn(layer.ffn, y, mode), mode));
  }
  return linear(decoder_.output, apply_layer_norm(decoder_.final_norm, x));
}

Tensor MedModel::ctc_head(const EncoderOutputs& enc) const {
  if (enc.branches.empty()) throw ContractError("ctc_head: no encoder output");
  const Tensor input = enc.dual() ? add(enc.branches[0], enc.branches[1]) : enc.branches[0];
  return log_softmax(linear(ctc_, input));
}

NameMap branch_transplant_map(const ModelConfig& target, Language branch) {
  NameMap map;
  map.push_back({"encoder.", encoder_prefix(target, branch) + "."});
  const std::string sfx = cross_attention_suffix(target, branch);
  for (std::size_t i = 0; i < target.decoder_layers; ++i) {
    const std::string p = "decoder.layers." + std::to_string(i);
    map.push_back({p + ".norm_src.", p + ".norm_src" + sfx + "."});
    map.push_back({p + ".src_attn.", p + ".src_attn" + sfx + "."});
  }
  return map;
}

std::size_t transplant(MedModel& target, const CheckpointArchive& archive, const NameMap& map) {
  auto& registry = target.mutable_parameters();
  // Validate everything before the first copy so a failure leaves the model untouched.
  std::vector<std::pair<const Tensor*, Tensor>> copies;
  for (const auto& rule : map) {
    std::size_t matched = 0;
    for (const auto& [name, source] : archive.entries()) {
      if (name.compare(0, rule.from_prefix.size(), rule.from_prefix) != 0) continue;
      ++matched;
      const std::string dest = rule.to_prefix + name.substr(rule.from_prefix.size());
      const Tensor* t = registry.find(dest);
      if (!t) throw TransplantError("transplant: target has no parameter " + dest + " (from " + name + ")");
      if (t->shape() != source.shape()) {
        throw TransplantError("transplant: shape mismatch for " + dest + ": target " +
                              shape_to_string(t->shape()) + ", archive " + shape_to_string(source.shape()));
      }
      copies.emplace_back(&source, *t);
    }
    if (matched == 0) {
      throw TransplantError("transplant: archive has no tensor under '" + rule.from_prefix + "'");
    }
  }
  for (auto& [source, dest] : copies) {
    auto src = source->data();
    std::copy(src.begin(), src.end(), dest.mutable_data().begin());
  }
  return copies.size();
}

std::vector<std::string> branch_parameter_names(const MedModel& model, Language branch) {
  const auto& config = model.config();
  std::vector<std::string> prefixes{encoder_prefix(config, branch) + "."};
  const std::string sfx = cross_attention_suffix(config, branch);
  for (std::size_t i = 0; i < config.decoder_layers; ++i) {
    const std::string p = "decoder.layers." + std::to_string(i);
    prefixes.push_back(p + ".norm_src" + sfx + ".");
    prefixes.push_back(p + ".src_attn" + sfx + ".");
  }
  std::vector<std::string> names;
  for (const auto& [name, t] : model.parameters()) {
    for (const auto& p : prefixes) {
      if (name.compare(0, p.size(), p) == 0) {
        names.push_back(name);
        break;
      }
    }
  }
  return names;
}

}  // namespace medt::inline MEDT_NS
