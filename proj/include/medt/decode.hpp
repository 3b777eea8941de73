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

#ifndef MEDT_DECODE_HPP_
#define MEDT_DECODE_HPP_

#include <array>
#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "medt/model.hpp"
#include "medt/tensor.hpp"
#include "medt/vocab.hpp"

namespace medt::inline MEDT_NS {

// Incremental CTC prefix probabilities over one utterance's [T', V+1]
// log-probabilities (blank last). State keeps the per-frame forward
// variables of a prefix ending in a label (nonblank) or in blank.
class CtcPrefixScorer {
 public:
  struct State {
    std::vector<double> nonblank;
    std::vector<double> blank;
    TokenId last = kPadToken;  // kPadToken for the empty prefix
  };

  CtcPrefixScorer(const Tensor& log_probs, TokenId eos);

  State initial() const;
  // For a label: log P(prefix + token is a prefix of the CTC output), and the
  // extended prefix's state. For <eos>: log P(output == prefix); the state is
  // returned unchanged.
  std::pair<double, State> extend(const State& prefix, TokenId token) const;

  std::size_t frames() const { return frames_; }

 private:
  double lp(std::size_t t, TokenId k) const { return log_probs_[t * width_ + static_cast<std::size_t>(k)]; }

  std::vector<double> log_probs_;
  std::size_t frames_ = 0;
  std::size_t width_ = 0;
  TokenId blank_ = 0;
  TokenId eos_ = 0;
};

// Anything that can score the next token given the history (including the
// leading <sos>) in natural-log probability.
class TokenScorer {
 public:
  virtual ~TokenScorer() = default;
  virtual double score(std::span<const TokenId> history, TokenId next) const = 0;
};

// Backoff n-gram LM over the joint vocabulary. Unigrams are add-one
// (Laplace) smoothed; higher orders interpolate Witten-Bell estimates with
// the lower order, written in backoff form so that
//   log p(w | h) = logprob(h w)                  if "h w" is listed
//                = backoff(h) + log p(w | h')    otherwise.
// Records are natural-log.
class NgramLm : public TokenScorer {
 public:
  struct Record {
    double log_prob = 0.0;
    double backoff = 0.0;
  };

  static NgramLm train(const std::vector<std::vector<TokenId>>& sentences, const Vocabulary& vocab,
                       std::size_t order = 2);
  static NgramLm load(const std::string& path);
  void save(const std::string& path) const;

  double log_prob(std::span<const TokenId> history, TokenId next) const;
  double score(std::span<const TokenId> history, TokenId next) const override {
    return log_prob(history, next);
  }

  std::size_t order() const { return order_; }
  const Vocabulary& vocabulary() const { return vocab_; }
  // Tokens with a finite unigram probability (content tokens and <eos>).
  std::vector<TokenId> predictable() const;
  const std::map<std::vector<TokenId>, Record>& records() const { return records_; }

 private:
  double backoff_of(std::span<const TokenId> history) const;

  std::size_t order_ = 2;
  Vocabulary vocab_;
  std::map<std::vector<TokenId>, Record> records_;
};

double shallow_fusion_score(const TokenScorer& lm, std::span<const TokenId> history, TokenId next);

struct Hypothesis {
  std::vector<TokenId> tokens;  // excludes <sos>; ends with <eos> once finished
  double att_score = 0.0;
  double ctc_score = 0.0;
  double lm_score = 0.0;
  double combined = 0.0;
  bool finished = false;

  // Ranking score: combined score per emitted token.
  double normalized_score() const;
  // Tokens without the trailing <eos>.
  std::vector<TokenId> labels(TokenId eos) const;
};

struct BeamOptions {
  std::size_t beam = 10;
  double ctc_weight = 0.3;  // alpha
  double lm_weight = 0.3;   // beta; ignored without an LM
  std::size_t max_len = 0;  // 0: the encoder output length
  const TokenScorer* lm = nullptr;
};

struct BeamResult {
  std::vector<Hypothesis> hypotheses;  // best first
  bool unfinished = false;             // no hypothesis reached <eos> by max_len
  const Hypothesis& best() const { return hypotheses.at(0); }
};

// combined = alpha * ctc_prefix + (1 - alpha) * attention + beta * lm
double combine_scores(const BeamOptions& opts, double att, double ctc, double lm);

BeamResult beam_search(const MedModel& model, const Tensor& features, const BeamOptions& opts);

struct TaggedToken {
  TokenId id = 0;
  Language lang = Language::kA;
};

std::vector<TaggedToken> tag_tokens(const Vocabulary& vocab, std::span<const TokenId> ids);

struct ErrorCounts {
  std::size_t substitutions = 0;
  std::size_t deletions = 0;
  std::size_t insertions = 0;
  std::size_t reference = 0;

  std::size_t errors() const { return substitutions + deletions + insertions; }
  // Percent; NaN when there is no reference token.
  double rate() const;
  ErrorCounts& operator+=(const ErrorCounts& o);
};

// Substitutions and deletions count against the reference token's language,
// insertions against the hypothesis token's language.
struct TerReport {
  ErrorCounts all;
  std::array<ErrorCounts, 2> per_language;

  const ErrorCounts& language(Language l) const { return per_language[static_cast<std::size_t>(l)]; }
  TerReport& operator+=(const TerReport& o);
};

enum class EditOp { kMatch, kSubstitution, kDeletion, kInsertion };

// Levenshtein alignment with unit costs; among equal-cost paths the
// backtrace prefers match/substitution, then deletion, then insertion.
std::vector<EditOp> align(std::span<const TaggedToken> ref, std::span<const TaggedToken> hyp);
TerReport ter(std::span<const TaggedToken> ref, std::span<const TaggedToken> hyp);

}  // namespace medt::inline MEDT_NS

#endif  // MEDT_DECODE_HPP_
