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

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <vector>

#include "doctest.h"
#include "medt/decode.hpp"
#include "medt/error.hpp"
#include "medt/losses.hpp"
#include "medt/model.hpp"
#include "support/oracles.hpp"
#include "support/test_support.hpp"

using namespace medt;
using namespace medt_test::oracle;

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// log of the total probability of paths whose collapsed output starts with
// 'prefix' (or equals it when 'exact').
double brute_prefix(const Mat& lp, const std::vector<TokenId>& prefix, bool exact) {
  const std::size_t frames = lp.size(), symbols = lp[0].size();
  const auto blank = static_cast<TokenId>(symbols - 1);
  std::vector<TokenId> path(frames, 0);
  double total = 0.0;
  while (true) {
    std::vector<TokenId> out;
    TokenId prev = -1;
    double s = 0.0;
    for (std::size_t t = 0; t < frames; ++t) {
      s += lp[t][static_cast<std::size_t>(path[t])];
      if (path[t] != blank && path[t] != prev) out.push_back(path[t]);
      prev = path[t];
    }
    const bool match = exact ? out == prefix
                             : out.size() >= prefix.size() && std::equal(prefix.begin(), prefix.end(), out.begin());
    if (match) total += std::exp(s);
    std::size_t i = 0;
    while (i < frames && ++path[i] == static_cast<TokenId>(symbols)) path[i++] = 0;
    if (i == frames) break;
  }
  return std::log(total);
}

ModelConfig small_model() {
  ModelConfig c = ModelConfig::toy();
  c.d_model = 16;
  c.d_ff = 24;
  c.tokens_a = 4;
  c.tokens_b = 3;
  c.d_feat = 8;
  c.conv_channels = 2;
  return c;
}

// Greedy joint decoding written directly from the scoring rule: extend the
// single hypothesis by the continuation with the highest cumulative
// combined score until <eos>.
std::vector<TokenId> greedy_oracle(const MedModel& m, const Tensor& feats, double alpha, std::size_t max_len) {
  const Vocabulary v = m.config().vocabulary();
  const EncoderOutputs enc = m.encode(feats);
  const CtcPrefixScorer ctc(m.ctc_head(enc), v.eos());
  CtcPrefixScorer::State state = ctc.initial();
  std::vector<TokenId> hist{v.sos()};
  double att = 0.0;
  for (std::size_t step = 0; step < max_len; ++step) {
    const Mat logits = to_mat(m.forward_decoder(enc, hist));
    const std::vector<double>& last = logits.back();
    double z = 0;
    for (double l : last) z += std::exp(l);
    double best = kNegInf, best_att = 0;
    TokenId best_tok = -1;
    for (TokenId tok = 0; tok <= v.eos(); ++tok) {
      if (tok == v.sos()) continue;
      const double a = att + last[static_cast<std::size_t>(tok)] - std::log(z);
      // a zero-weight term is left out entirely
      double score = 0;
      if (alpha != 0) score += alpha * ctc.extend(state, tok).first;
      if (alpha != 1) score += (1 - alpha) * a;
      if (score > best) {
        best = score;
        best_tok = tok;
        best_att = a;
      }
    }
    att = best_att;
    if (best_tok == v.eos()) break;
    state = ctc.extend(state, best_tok).second;
    hist.push_back(best_tok);
  }
  return {hist.begin() + 1, hist.end()};
}

}  // namespace

TEST_CASE("ctc prefix scores on enumerable lattices") {
  Rng rng(61);
  for (std::size_t frames : {1u, 2u, 3u, 4u}) {
    // labels 0..2, <eos> column 3, blank 4
    const Tensor lp = log_softmax(medt_test::random_tensor(rng, {frames, 5}, 1.5));
    const Mat m = to_mat(lp);
    const TokenId eos = 3;
    const CtcPrefixScorer s(lp, eos);
    // prefixes over labels {0, 1, 2}, up to length 3
    std::function<void(const std::vector<TokenId>&, const CtcPrefixScorer::State&)> walk =
        [&](const std::vector<TokenId>& prefix, const CtcPrefixScorer::State& st) {
          const auto [end_score, same] = s.extend(st, eos);
          INFO("T=" << frames << " prefix length " << prefix.size());
          const double want_end = brute_prefix(m, prefix, true);
          if (std::isinf(want_end)) {
            CHECK(std::isinf(end_score));
          } else {
            CHECK(std::abs(end_score - want_end) <= 1e-9);
          }
          if (prefix.size() == 3) return;
          for (TokenId c = 0; c < 3; ++c) {
            auto next = prefix;
            next.push_back(c);
            const auto [score, st2] = s.extend(st, c);
            const double want = brute_prefix(m, next, false);
            if (std::isinf(want)) {
              CHECK(score == kNegInf);
            } else {
              CHECK(std::abs(score - want) <= 1e-6);  // float rows sum to 1 within rounding
            }
            walk(next, st2);
          }
        };
    walk({}, s.initial());
  }
}

TEST_CASE("ctc prefix score with one-hot frames") {
  // frames emit 1, blank, 2 with certainty (eos 3, blank 4)
  const Real ninf = -std::numeric_limits<Real>::infinity();
  const Tensor lp({3, 5}, {ninf, 0, ninf, ninf, ninf, ninf, ninf, ninf, ninf, 0, ninf, ninf, 0, ninf, ninf});
  const CtcPrefixScorer s(lp, 3);
  auto st = s.initial();
  auto [sa, st_a] = s.extend(st, 1);
  CHECK(sa == 0);
  CHECK(s.extend(st, 2).first == kNegInf);
  CHECK(s.extend(st, 3).first == kNegInf);
  auto [sb, st_ab] = s.extend(st_a, 2);
  CHECK(sb == 0);
  CHECK(s.extend(st_a, 1).first == kNegInf);
  CHECK(s.extend(st_ab, 3).first == 0);
  CHECK(s.extend(st_a, 3).first == kNegInf);
}

TEST_CASE("accumulated prefix score equals the ctc loss of the finished sequence") {
  Rng rng(62);
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor lp = log_softmax(medt_test::random_tensor(rng, {8, 6}, 2.0));
    const CtcPrefixScorer s(lp, 4);
    std::vector<TokenId> labels;
    const auto n = rng.uniform_int(0, 4);
    for (int i = 0; i < n; ++i) labels.push_back(static_cast<TokenId>(rng.uniform_int(0, 3)));
    auto st = s.initial();
    for (TokenId t : labels) st = s.extend(st, t).second;
    const double end = s.extend(st, 4).first;
    if (labels.empty()) {
      double all_blank = 0;
      for (std::size_t t = 0; t < 8; ++t) all_blank += lp.at(t, 5);
      CHECK(end == doctest::Approx(all_blank).epsilon(1e-9));
    } else {
      CHECK(std::abs(end + ctc_loss(lp, labels).item()) <= 1e-5);
    }
  }
}

TEST_CASE("beam search") {
  const ModelConfig cfg = small_model();
  const MedModel m(cfg, 63);
  const Vocabulary v = cfg.vocabulary();
  Rng rng(64);

  SUBCASE("beam 1 is greedy joint decoding") {
    for (int i = 0; i < 8; ++i) {
      const Tensor x = medt_test::random_tensor(rng, {static_cast<std::size_t>(12 + 4 * i), 8});
      for (double alpha : {0.0, 0.3, 1.0}) {
        BeamOptions o;
        o.beam = 1;
        o.ctc_weight = alpha;
        const BeamResult r = beam_search(m, x, o);
        const auto want = greedy_oracle(m, x, alpha, downsampled_length(x.dim(0)));
        CHECK(r.best().labels(v.eos()) == want);
      }
    }
  }
  SUBCASE("alpha = beta = 0 is attention-only scoring") {
    const Tensor x = medt_test::random_tensor(rng, {30, 8});
    BeamOptions o;
    o.ctc_weight = 0.0;
    o.lm_weight = 0.0;
    const BeamResult r = beam_search(m, x, o);
    const EncoderOutputs enc = m.encode(x);
    for (const Hypothesis& h : r.hypotheses) {
      std::vector<TokenId> in{v.sos()};
      in.insert(in.end(), h.tokens.begin(), h.tokens.end() - 1);
      const Tensor lsm = log_softmax(m.forward_decoder(enc, in));
      double s = 0;
      for (std::size_t t = 0; t < h.tokens.size(); ++t) s += lsm.at(t, static_cast<std::size_t>(h.tokens[t]));
      CHECK(h.combined == doctest::Approx(h.att_score).epsilon(1e-12));
      CHECK(h.att_score == doctest::Approx(s).epsilon(1e-5));
    }
  }
  SUBCASE("scores combine as documented and results are ranked") {
    const NgramLm lm = NgramLm::train({{0, 1, 2}, {4, 5}, {1, 2, 6}}, v);
    BeamOptions o;
    o.beam = 4;
    o.ctc_weight = 0.4;
    o.lm_weight = 0.5;
    o.lm = &lm;
    const BeamResult r = beam_search(m, medt_test::random_tensor(rng, {26, 8}), o);
    REQUIRE(!r.hypotheses.empty());
    for (std::size_t i = 0; i < r.hypotheses.size(); ++i) {
      const Hypothesis& h = r.hypotheses[i];
      CHECK(h.combined == doctest::Approx(0.4 * h.ctc_score + 0.6 * h.att_score + 0.5 * h.lm_score));
      CHECK(h.finished);
      CHECK(h.tokens.back() == v.eos());
      for (std::size_t k = 0; k + 1 < h.tokens.size(); ++k) CHECK(v.is_content(h.tokens[k]));
      if (i > 0) CHECK(r.hypotheses[i - 1].normalized_score() >= h.normalized_score());
      // LM score is the sum of the conditional log-probabilities
      std::vector<TokenId> hist{v.sos()};
      double lms = 0;
      for (TokenId t : h.tokens) {
        lms += lm.log_prob(hist, t);
        hist.push_back(t);
      }
      CHECK(h.lm_score == doctest::Approx(lms));
    }
  }
  SUBCASE("wider beams find a hypothesis at least as good") {
    for (int i = 0; i < 10; ++i) {
      const Tensor x = medt_test::random_tensor(rng, {static_cast<std::size_t>(14 + 3 * i), 8});
      BeamOptions narrow, wide;
      narrow.beam = 1;
      wide.beam = 10;
      const double a = beam_search(m, x, narrow).best().normalized_score();
      const double b = beam_search(m, x, wide).best().normalized_score();
      CHECK(b >= a - 1e-12);
    }
  }
  SUBCASE("no finished hypothesis by max_len is flagged") {
    MedModel biased(cfg, 65);
    Tensor bias = biased.decoder().output.bias;
    bias.mutable_data()[0] = 200;  // attention always prefers token 0
    BeamOptions o;
    o.beam = 1;
    o.ctc_weight = 0.0;
    o.max_len = 2;
    const BeamResult r = beam_search(biased, medt_test::random_tensor(rng, {20, 8}), o);
    CHECK(r.unfinished);
    CHECK(r.best().tokens == std::vector<TokenId>{0, 0});
    CHECK(!r.best().finished);
  }
  SUBCASE("invalid options") {
    BeamOptions o;
    o.beam = 0;
    CHECK_THROWS_AS(beam_search(m, Tensor::zeros({8, 8}), o), ConfigError);
    o.beam = 2;
    o.ctc_weight = 1.5;
    CHECK_THROWS_AS(beam_search(m, Tensor::zeros({8, 8}), o), ConfigError);
  }
}

TEST_CASE("n-gram LM") {
  const Vocabulary v{3, 2};  // content 0..4, sos 5, eos 6
  const std::vector<std::vector<TokenId>> text{{0, 1, 2}, {0, 1, 3}, {4, 4, 0}, {1, 2}};
  const NgramLm lm = NgramLm::train(text, v, 2);
  const auto predictable = lm.predictable();
  CHECK(predictable.size() == v.content_size() + 1);

  SUBCASE("every conditional distribution sums to one") {
    std::vector<std::vector<TokenId>> histories{{}, {v.sos()}};
    for (TokenId t = 0; t < 5; ++t) histories.push_back({t});
    histories.push_back({v.sos(), 4, 2});
    for (const auto& h : histories) {
      double s = 0;
      for (TokenId t : predictable) s += std::exp(lm.log_prob(h, t));
      CHECK(std::abs(s - 1.0) <= 1e-6);
      CHECK(lm.log_prob(h, v.sos()) == kNegInf);
    }
  }
  SUBCASE("seen bigrams beat unseen ones") {
    const std::vector<TokenId> h{0};
    CHECK(lm.log_prob(h, 1) > lm.log_prob(h, 3));
    CHECK(shallow_fusion_score(lm, std::vector<TokenId>{1}, 2) > shallow_fusion_score(lm, std::vector<TokenId>{1}, 4));
  }
  SUBCASE("unseen history backs off to the unigram") {
    // token 4 never occurs in this corpus, so it has no bigrams or backoff weight
    const NgramLm sparse = NgramLm::train({{0, 1}, {1, 2, 0}}, v, 2);
    const std::vector<TokenId> unseen{4};
    for (TokenId t : predictable) CHECK(sparse.log_prob(unseen, t) == sparse.log_prob(std::vector<TokenId>{}, t));
  }
  SUBCASE("uniform data gives log(1/V)") {
    const NgramLm empty = NgramLm::train({}, v, 2);
    const NgramLm balanced = NgramLm::train({{0, 1, 2, 3, 4}}, v, 1);
    for (TokenId t : predictable) {
      CHECK(empty.log_prob(std::vector<TokenId>{v.sos()}, t) == doctest::Approx(std::log(1.0 / 6)));
      CHECK(balanced.log_prob(std::vector<TokenId>{2}, t) == doctest::Approx(std::log(1.0 / 6)));
    }
  }
  SUBCASE("save and load keep every record") {
    medt_test::TempDir dir("lm");
    lm.save(dir.file("lm.txt"));
    const std::string text_file = medt_test::read_text(dir.file("lm.txt"));
    CHECK(text_file.rfind("# medt ngram order=2", 0) == 0);
    const NgramLm back = NgramLm::load(dir.file("lm.txt"));
    CHECK(back.order() == 2);
    CHECK(back.vocabulary() == v);
    REQUIRE(back.records().size() == lm.records().size());
    for (const auto& [key, rec] : lm.records()) {
      const auto& other = back.records().at(key);
      CHECK(other.log_prob == rec.log_prob);
      CHECK(other.backoff == rec.backoff);
    }
    std::ofstream(dir.file("bad.txt")) << "2\t0 1\tnot-a-number\t0\n";
    CHECK_THROWS_AS(NgramLm::load(dir.file("bad.txt")), FormatError);
  }
  SUBCASE("training text must be content tokens") {
    CHECK_THROWS_AS(NgramLm::train({{0, v.eos()}}, v), InputError);
  }
}

namespace {

// Exhaustive edit distance over all edit scripts (untabulated recursion).
std::size_t brute_distance(const std::vector<int>& a, std::size_t i, const std::vector<int>& b, std::size_t j) {
  if (i == a.size()) return b.size() - j;
  if (j == b.size()) return a.size() - i;
  return std::min({brute_distance(a, i + 1, b, j + 1) + (a[i] != b[j] ? 1 : 0), brute_distance(a, i + 1, b, j) + 1,
                   brute_distance(a, i, b, j + 1) + 1});
}

std::vector<TaggedToken> tagged(const Vocabulary& v, std::vector<TokenId> ids) { return tag_tokens(v, ids); }

}  // namespace

TEST_CASE("TER") {
  const Vocabulary v{5, 5};  // A: 0..4, B: 5..9
  SUBCASE("hand examples") {
    CHECK(ter(tagged(v, {1, 2, 3}), tagged(v, {1, 2, 3})).all.rate() == 0);
    const TerReport r = ter(tagged(v, {0, 1, 2}), tagged(v, {0, 4, 2}));
    CHECK(r.all.substitutions == 1);
    CHECK(r.all.errors() == 1);
    CHECK(r.all.rate() == doctest::Approx(100.0 / 3));
    const TerReport only_ins = ter(tagged(v, {1}), tagged(v, {1, 2, 3}));
    CHECK(only_ins.all.insertions == 2);
    CHECK(only_ins.all.rate() == doctest::Approx(200.0));
    CHECK_THROWS_AS(ter(tagged(v, {}), tagged(v, {1})), InputError);
  }
  SUBCASE("mixed-language example attributed per language") {
    // ref : A0 A1 B5 B6 A2 B7
    // hyp : A0 A3 B5    A2 B7 B8
    // A1->A3 substitution (A), B6 deleted (B), B8 inserted (B)
    const TerReport r = ter(tagged(v, {0, 1, 5, 6, 2, 7}), tagged(v, {0, 3, 5, 2, 7, 8}));
    CHECK(r.all.reference == 6);
    CHECK(r.all.errors() == 3);
    const ErrorCounts& a = r.language(Language::kA);
    const ErrorCounts& b = r.language(Language::kB);
    CHECK(a.reference == 3);
    CHECK(a.substitutions == 1);
    CHECK(a.deletions == 0);
    CHECK(a.insertions == 0);
    CHECK(a.rate() == doctest::Approx(100.0 / 3));
    CHECK(b.reference == 3);
    CHECK(b.deletions == 1);
    CHECK(b.insertions == 1);
    CHECK(b.substitutions == 0);
    CHECK(b.rate() == doctest::Approx(200.0 / 3));
  }
  SUBCASE("insertions count against the hypothesis token language") {
    const TerReport r = ter(tagged(v, {0, 1}), tagged(v, {0, 1, 9}));
    CHECK(r.language(Language::kB).insertions == 1);
    CHECK(r.language(Language::kB).reference == 0);
    CHECK(std::isnan(r.language(Language::kB).rate()));
    CHECK(r.language(Language::kA).errors() == 0);
  }
  SUBCASE("ties prefer substitution") {
    const auto ops = align(tagged(v, {1, 2}), tagged(v, {3, 4}));
    CHECK(ops == std::vector<EditOp>{EditOp::kSubstitution, EditOp::kSubstitution});
  }
  SUBCASE("matches exhaustive edit distance up to length 6 and is relabeling-invariant") {
    Rng rng(66);
    for (int trial = 0; trial < 300; ++trial) {
      const auto la = rng.uniform_int(1, 6), lb = rng.uniform_int(0, 6);
      std::vector<TokenId> a, b;
      for (int i = 0; i < la; ++i) a.push_back(static_cast<TokenId>(rng.uniform_int(0, 3)));
      for (int i = 0; i < lb; ++i) b.push_back(static_cast<TokenId>(rng.uniform_int(0, 3)));
      const TerReport r = ter(tagged(v, a), tagged(v, b));
      CHECK(r.all.errors() == brute_distance({a.begin(), a.end()}, 0, {b.begin(), b.end()}, 0));
      CHECK(r.all.reference == a.size());
      // consistent relabeling t -> 9 - t
      auto relabel = [](std::vector<TokenId> x) {
        for (auto& t : x) t = 9 - t;
        return x;
      };
      CHECK(ter(tagged(v, relabel(a)), tagged(v, relabel(b))).all.errors() == r.all.errors());
      const TerReport& rr = r;
      CHECK(rr.language(Language::kA).errors() + rr.language(Language::kB).errors() == r.all.errors());
    }
  }
}
