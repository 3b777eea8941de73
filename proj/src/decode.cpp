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

#include "medt/decode.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

#include "medt/error.hpp"

namespace medt::inline MEDT_NS {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::fabs(a - b)));
}

std::string join_ids(std::span<const TokenId> ids) {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i) out += ' ';
    out += std::to_string(ids[i]);
  }
  return out;
}

std::string format_double(double v) {
  if (std::isinf(v)) return v < 0 ? "-inf" : "inf";
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

// ---------------------------------------------------------------------------
// CTC prefix scoring

CtcPrefixScorer::CtcPrefixScorer(const Tensor& log_probs, TokenId eos) : eos_(eos) {
  if (log_probs.rank() != 2 || log_probs.dim(1) < 2) {
    throw DimensionError("ctc prefix: log_probs must be [T, V+1], got " + shape_to_string(log_probs.shape()));
  }
  frames_ = log_probs.dim(0);
  width_ = log_probs.dim(1);
  blank_ = static_cast<TokenId>(width_ - 1);
  if (eos_ < 0 || eos_ >= blank_) throw ContractError("ctc prefix: eos id outside the label range");
  const auto src = log_probs.data();
  log_probs_.assign(src.begin(), src.end());
}

CtcPrefixScorer::State CtcPrefixScorer::initial() const {
  State s;
  s.nonblank.assign(frames_, kNegInf);
  s.blank.assign(frames_, kNegInf);
  double acc = 0.0;
  for (std::size_t t = 0; t < frames_; ++t) {
    acc += lp(t, blank_);
    s.blank[t] = acc;
  }
  return s;
}

std::pair<double, CtcPrefixScorer::State> CtcPrefixScorer::extend(const State& prefix, TokenId token) const {
  if (token < 0 || token >= blank_) throw ContractError("ctc prefix: token must be a non-blank label");
  if (frames_ == 0) return {token == eos_ ? 0.0 : kNegInf, prefix};
  if (token == eos_) {
    return {log_add(prefix.nonblank[frames_ - 1], prefix.blank[frames_ - 1]), prefix};
  }
  const bool empty = prefix.last == kPadToken;
  // Probability mass that may be followed by a new emission of 'token'. A
  // repeat of the last label needs a blank in between.
  std::vector<double> phi(frames_);
  for (std::size_t t = 0; t < frames_; ++t) {
    phi[t] = token == prefix.last ? prefix.blank[t] : log_add(prefix.nonblank[t], prefix.blank[t]);
  }
  State next;
  next.last = token;
  next.nonblank.assign(frames_, kNegInf);
  next.blank.assign(frames_, kNegInf);
  next.nonblank[0] = empty ? lp(0, token) : kNegInf;
  double psi = next.nonblank[0];
  for (std::size_t t = 1; t < frames_; ++t) {
    const double x = lp(t, token);
    next.nonblank[t] = log_add(next.nonblank[t - 1], phi[t - 1]) + x;
    next.blank[t] = log_add(next.nonblank[t - 1], next.blank[t - 1]) + lp(t, blank_);
    psi = log_add(psi, phi[t - 1] + x);
  }
  return {psi, std::move(next)};
}

// ---------------------------------------------------------------------------
// n-gram LM

NgramLm NgramLm::train(const std::vector<std::vector<TokenId>>& sentences, const Vocabulary& vocab,
                       std::size_t order) {
  if (order < 1) throw ConfigError("ngram: order must be >= 1");
  NgramLm lm;
  lm.order_ = order;
  lm.vocab_ = vocab;
  const TokenId sos = vocab.sos(), eos = vocab.eos();

  std::vector<std::map<std::vector<TokenId>, std::size_t>> counts(order + 1);
  for (const auto& s : sentences) {
    std::vector<TokenId> padded{sos};
    for (TokenId t : s) {
      if (!vocab.is_content(t)) throw InputError("ngram: token " + std::to_string(t) + " is not a content token");
      padded.push_back(t);
    }
    padded.push_back(eos);
    for (std::size_t i = 1; i < padded.size(); ++i) {
      for (std::size_t k = 1; k <= order && k <= i + 1; ++k) {
        std::vector<TokenId> gram(padded.begin() + static_cast<std::ptrdiff_t>(i + 1 - k),
                                  padded.begin() + static_cast<std::ptrdiff_t>(i + 1));
        ++counts[k][gram];
      }
    }
  }

  // Add-one unigrams over content tokens and <eos>.
  const std::size_t predictable = vocab.content_size() + 1;
  std::size_t total = 0;
  for (const auto& [g, c] : counts[1]) total += c;
  const double denom = static_cast<double>(total + predictable);
  for (std::size_t w = 0; w < predictable; ++w) {
    const TokenId id = w < vocab.content_size() ? static_cast<TokenId>(w) : eos;
    const auto it = counts[1].find({id});
    const double c = it == counts[1].end() ? 0.0 : static_cast<double>(it->second);
    lm.records_[{id}] = {std::log((c + 1.0) / denom), 0.0};
  }
  lm.records_[{sos}] = {kNegInf, 0.0};

  for (std::size_t k = 2; k <= order; ++k) {
    // history -> (count, distinct successors)
    std::map<std::vector<TokenId>, std::pair<std::size_t, std::size_t>> hist;
    for (const auto& [g, c] : counts[k]) {
      auto& h = hist[std::vector<TokenId>(g.begin(), g.end() - 1)];
      h.first += c;
      h.second += 1;
    }
    std::map<std::vector<TokenId>, Record> added;
    for (const auto& [g, c] : counts[k]) {
      const std::vector<TokenId> h(g.begin(), g.end() - 1);
      const auto [hc, hs] = hist.at(h);
      const double lambda = static_cast<double>(hc) / static_cast<double>(hc + hs);
      const std::span<const TokenId> lower_ctx(h.begin() + 1, h.end());
      const double lower = std::exp(lm.log_prob(lower_ctx, g.back()));
      const double p = lambda * static_cast<double>(c) / static_cast<double>(hc) + (1.0 - lambda) * lower;
      added[g] = {std::log(p), 0.0};
    }
    for (const auto& [h, cs] : hist) {
      const double bow = std::log(static_cast<double>(cs.second) / static_cast<double>(cs.first + cs.second));
      auto it = lm.records_.find(h);
      if (it == lm.records_.end()) throw InternalError("ngram: history without a lower-order record");
      it->second.backoff = bow;
    }
    lm.records_.insert(added.begin(), added.end());
  }
  return lm;
}

double NgramLm::backoff_of(std::span<const TokenId> history) const {
  const auto it = records_.find(std::vector<TokenId>(history.begin(), history.end()));
  return it == records_.end() ? 0.0 : it->second.backoff;
}

double NgramLm::log_prob(std::span<const TokenId> history, TokenId next) const {
  if (next < 0 || static_cast<std::size_t>(next) >= vocab_.size()) {
    throw InputError("ngram: token " + std::to_string(next) + " outside the vocabulary");
  }
  const std::size_t ctx_len = std::min(history.size(), order_ - 1);
  std::span<const TokenId> ctx = history.subspan(history.size() - ctx_len);
  double bow = 0.0;
  for (;;) {
    std::vector<TokenId> key(ctx.begin(), ctx.end());
    key.push_back(next);
    const auto it = records_.find(key);
    if (it != records_.end()) return bow + it->second.log_prob;
    if (ctx.empty()) return kNegInf;
    bow += backoff_of(ctx);
    ctx = ctx.subspan(1);
  }
}

std::vector<TokenId> NgramLm::predictable() const {
  std::vector<TokenId> out;
  for (const auto& [key, rec] : records_) {
    if (key.size() == 1 && std::isfinite(rec.log_prob)) out.push_back(key[0]);
  }
  return out;
}

void NgramLm::save(const std::string& path) const {
  std::ofstream os(path);
  if (!os) throw IoError("ngram: cannot write " + path);
  os << "# medt ngram order=" << order_ << " tokens_a=" << vocab_.tokens_a << " tokens_b=" << vocab_.tokens_b
     << '\n';
  for (std::size_t k = 1; k <= order_; ++k) {
    for (const auto& [key, rec] : records_) {
      if (key.size() != k) continue;
      os << k << '\t' << join_ids(key) << '\t' << format_double(rec.log_prob) << '\t' << format_double(rec.backoff)
         << '\n';
    }
  }
  if (!os) throw IoError("ngram: write failed for " + path);
}

NgramLm NgramLm::load(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("ngram: cannot read " + path);
  NgramLm lm;
  std::string line;
  std::size_t lineno = 0;
  bool have_header = false;
  std::size_t max_order = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    const std::string where = path + ":" + std::to_string(lineno);
    if (line[0] == '#') {
      std::istringstream hs(line.substr(1));
      std::string word;
      while (hs >> word) {
        const auto eq = word.find('=');
        if (eq == std::string::npos) continue;
        const std::string k = word.substr(0, eq), v = word.substr(eq + 1);
        try {
          if (k == "order") lm.order_ = std::stoul(v);
          if (k == "tokens_a") lm.vocab_.tokens_a = std::stoul(v);
          if (k == "tokens_b") lm.vocab_.tokens_b = std::stoul(v);
        } catch (const std::exception&) {
          throw FormatError("ngram: bad header value at " + where);
        }
        have_header = true;
      }
      continue;
    }
    std::vector<std::string> fields;
    std::size_t start = 0;
    for (;;) {
      const auto tab = line.find('\t', start);
      fields.push_back(line.substr(start, tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (fields.size() != 4) throw FormatError("ngram: expected 4 tab-separated fields at " + where);
    try {
      const std::size_t k = std::stoul(fields[0]);
      std::vector<TokenId> key;
      std::istringstream ts(fields[1]);
      long id = 0;
      while (ts >> id) key.push_back(static_cast<TokenId>(id));
      if (!ts.eof() || key.size() != k || k == 0) throw FormatError("ngram: bad token list at " + where);
      lm.records_[key] = {std::stod(fields[2]), std::stod(fields[3])};
      max_order = std::max(max_order, k);
    } catch (const FormatError&) {
      throw;
    } catch (const std::exception&) {
      throw FormatError("ngram: bad number at " + where);
    }
  }
  if (!have_header) throw FormatError("ngram: missing header line in " + path);
  if (max_order > lm.order_) throw FormatError("ngram: record order exceeds header order in " + path);
  for (const auto& [key, rec] : lm.records_) {
    for (TokenId t : key) {
      if (t < 0 || static_cast<std::size_t>(t) >= lm.vocab_.size()) {
        throw FormatError("ngram: token " + std::to_string(t) + " outside the header vocabulary in " + path);
      }
    }
  }
  return lm;
}

double shallow_fusion_score(const TokenScorer& lm, std::span<const TokenId> history, TokenId next) {
  return lm.score(history, next);
}

// ---------------------------------------------------------------------------
// Beam search

double Hypothesis::normalized_score() const {
  return combined / static_cast<double>(std::max<std::size_t>(1, tokens.size()));
}

std::vector<TokenId> Hypothesis::labels(TokenId eos) const {
  std::vector<TokenId> out = tokens;
  if (!out.empty() && out.back() == eos) out.pop_back();
  return out;
}

double combine_scores(const BeamOptions& opts, double att, double ctc, double lm) {
  // Terms with zero weight are dropped rather than multiplied, so an
  // impossible CTC prefix does not poison pure-attention decoding.
  double s = 0.0;
  if (opts.ctc_weight != 1.0) s += (1.0 - opts.ctc_weight) * att;
  if (opts.ctc_weight != 0.0) s += opts.ctc_weight * ctc;
  if (opts.lm != nullptr && opts.lm_weight != 0.0) s += opts.lm_weight * lm;
  return s;
}

namespace {

struct LiveHyp {
  Hypothesis hyp;
  CtcPrefixScorer::State ctc_state;
};

struct Candidate {
  std::size_t parent;
  TokenId token;
  double att, ctc, lm, combined;
};

std::vector<double> last_row_log_softmax(const Tensor& logits) {
  const std::size_t rows = logits.dim(0), cols = logits.dim(1);
  const auto d = logits.data();
  const Real* row = d.data() + (rows - 1) * cols;
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < cols; ++j) mx = std::max(mx, static_cast<double>(row[j]));
  double z = 0.0;
  for (std::size_t j = 0; j < cols; ++j) z += std::exp(static_cast<double>(row[j]) - mx);
  const double lse = mx + std::log(z);
  std::vector<double> out(cols);
  for (std::size_t j = 0; j < cols; ++j) out[j] = static_cast<double>(row[j]) - lse;
  return out;
}

}  // namespace

BeamResult beam_search(const MedModel& model, const Tensor& features, const BeamOptions& opts) {
  if (opts.beam < 1) throw ConfigError("beam_search: beam must be >= 1");
  if (!(opts.ctc_weight >= 0.0 && opts.ctc_weight <= 1.0)) {
    throw ConfigError("beam_search: ctc weight must lie in [0, 1]");
  }
  const Vocabulary vocab = model.config().vocabulary();
  const EncoderOutputs enc = model.encode(features);
  const CtcPrefixScorer ctc(model.ctc_head(enc), vocab.eos());
  const std::size_t max_len = opts.max_len ? opts.max_len : std::max<std::size_t>(1, enc.length());

  std::vector<TokenId> continuations(vocab.content_size());
  std::iota(continuations.begin(), continuations.end(), 0);
  continuations.push_back(vocab.eos());

  std::vector<LiveHyp> live(1);
  live[0].ctc_state = ctc.initial();
  std::vector<Hypothesis> finished;

  for (std::size_t step = 0; step < max_len && !live.empty(); ++step) {
    std::vector<Candidate> cands;
    cands.reserve(live.size() * continuations.size());
    for (std::size_t h = 0; h < live.size(); ++h) {
      const Hypothesis& hyp = live[h].hyp;
      std::vector<TokenId> history{vocab.sos()};
      history.insert(history.end(), hyp.tokens.begin(), hyp.tokens.end());
      const std::vector<double> att = last_row_log_softmax(model.forward_decoder(enc, history));
      for (TokenId tok : continuations) {
        Candidate c{h, tok, hyp.att_score + att[static_cast<std::size_t>(tok)], 0.0, hyp.lm_score, 0.0};
        c.ctc = ctc.extend(live[h].ctc_state, tok).first;
        if (opts.lm != nullptr && opts.lm_weight != 0.0) c.lm += opts.lm->score(history, tok);
        c.combined = combine_scores(opts, c.att, c.ctc, c.lm);
        if (c.combined == kNegInf || std::isnan(c.combined)) continue;
        cands.push_back(c);
      }
    }
    const std::size_t keep = std::min(opts.beam, cands.size());
    std::partial_sort(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(keep), cands.end(),
                      [](const Candidate& a, const Candidate& b) {
                        if (a.combined != b.combined) return a.combined > b.combined;
                        if (a.parent != b.parent) return a.parent < b.parent;
                        return a.token < b.token;
                      });
    std::vector<LiveHyp> next;
    for (std::size_t i = 0; i < keep; ++i) {
      const Candidate& c = cands[i];
      const LiveHyp& parent = live[c.parent];
      Hypothesis hyp = parent.hyp;
      hyp.tokens.push_back(c.token);
      hyp.att_score = c.att;
      hyp.ctc_score = c.ctc;
      hyp.lm_score = c.lm;
      hyp.combined = c.combined;
      if (c.token == vocab.eos()) {
        hyp.finished = true;
        finished.push_back(std::move(hyp));
      } else {
        LiveHyp lh;
        lh.ctc_state = ctc.extend(parent.ctc_state, c.token).second;
        lh.hyp = std::move(hyp);
        next.push_back(std::move(lh));
      }
    }
    live = std::move(next);
  }

  BeamResult result;
  if (finished.empty()) {
    result.unfinished = true;
    for (auto& l : live) result.hypotheses.push_back(std::move(l.hyp));
  } else {
    result.hypotheses = std::move(finished);
  }
  if (result.hypotheses.empty()) {
    // Nothing survived (every continuation impossible); report the empty
    // prefix so callers always get a best entry.
    result.unfinished = true;
    result.hypotheses.emplace_back();
  }
  std::stable_sort(result.hypotheses.begin(), result.hypotheses.end(),
                   [](const Hypothesis& a, const Hypothesis& b) { return a.normalized_score() > b.normalized_score(); });
  return result;
}

// ---------------------------------------------------------------------------
// TER

std::vector<TaggedToken> tag_tokens(const Vocabulary& vocab, std::span<const TokenId> ids) {
  std::vector<TaggedToken> out;
  out.reserve(ids.size());
  for (TokenId id : ids) out.push_back({id, vocab.language_of(id)});
  return out;
}

double ErrorCounts::rate() const {
  if (reference == 0) return std::numeric_limits<double>::quiet_NaN();
  return 100.0 * static_cast<double>(errors()) / static_cast<double>(reference);
}

ErrorCounts& ErrorCounts::operator+=(const ErrorCounts& o) {
  substitutions += o.substitutions;
  deletions += o.deletions;
  insertions += o.insertions;
  reference += o.reference;
  return *this;
}

TerReport& TerReport::operator+=(const TerReport& o) {
  all += o.all;
  per_language[0] += o.per_language[0];
  per_language[1] += o.per_language[1];
  return *this;
}

std::vector<EditOp> align(std::span<const TaggedToken> ref, std::span<const TaggedToken> hyp) {
  const std::size_t n = ref.size(), m = hyp.size();
  std::vector<std::size_t> cost((n + 1) * (m + 1));
  auto at = [&](std::size_t i, std::size_t j) -> std::size_t& { return cost[i * (m + 1) + j]; };
  for (std::size_t i = 0; i <= n; ++i) at(i, 0) = i;
  for (std::size_t j = 0; j <= m; ++j) at(0, j) = j;
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      const std::size_t sub = at(i - 1, j - 1) + (ref[i - 1].id == hyp[j - 1].id ? 0 : 1);
      at(i, j) = std::min({sub, at(i - 1, j) + 1, at(i, j - 1) + 1});
    }
  }
  std::vector<EditOp> ops;
  std::size_t i = n, j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0) {
      const bool same = ref[i - 1].id == hyp[j - 1].id;
      if (at(i, j) == at(i - 1, j - 1) + (same ? 0 : 1)) {
        ops.push_back(same ? EditOp::kMatch : EditOp::kSubstitution);
        --i;
        --j;
        continue;
      }
    }
    if (i > 0 && at(i, j) == at(i - 1, j) + 1) {
      ops.push_back(EditOp::kDeletion);
      --i;
    } else {
      ops.push_back(EditOp::kInsertion);
      --j;
    }
  }
  std::reverse(ops.begin(), ops.end());
  return ops;
}

TerReport ter(std::span<const TaggedToken> ref, std::span<const TaggedToken> hyp) {
  if (ref.empty()) throw InputError("ter: empty reference, error rate undefined");
  TerReport r;
  auto lang = [&](Language l) -> ErrorCounts& { return r.per_language[static_cast<std::size_t>(l)]; };
  for (const auto& t : ref) {
    ++r.all.reference;
    ++lang(t.lang).reference;
  }
  std::size_t i = 0, j = 0;
  for (EditOp op : align(ref, hyp)) {
    switch (op) {
      case EditOp::kMatch:
        ++i;
        ++j;
        break;
      case EditOp::kSubstitution:
        ++r.all.substitutions;
        ++lang(ref[i].lang).substitutions;
        ++i;
        ++j;
        break;
      case EditOp::kDeletion:
        ++r.all.deletions;
        ++lang(ref[i].lang).deletions;
        ++i;
        break;
      case EditOp::kInsertion:
        ++r.all.insertions;
        ++lang(hyp[j].lang).insertions;
        ++j;
        break;
    }
  }
  return r;
}

}  // namespace medt::inline MEDT_NS
