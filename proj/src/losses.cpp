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

#include "medt/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

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

struct CtcLattice {
  std::size_t frames = 0;
  std::size_t states = 0;
  std::vector<TokenId> extended;  // blank, l1, blank, l2, ..., blank
  std::vector<double> alpha;      // [frames x states]
  double log_likelihood = kNegInf;

  bool skip_allowed(std::size_t s, TokenId blank) const {
    return s >= 2 && extended[s] != blank && extended[s] != extended[s - 2];
  }
};

CtcLattice run_forward(const Tensor& log_probs, std::span<const TokenId> labels) {
  if (log_probs.rank() != 2) {
    throw DimensionError("ctc: log_probs must be [T, V+1], got " + shape_to_string(log_probs.shape()));
  }
  const std::size_t frames = log_probs.dim(0), width = log_probs.dim(1);
  const TokenId blank = static_cast<TokenId>(width - 1);
  for (TokenId l : labels) {
    if (l < 0 || l >= blank) {
      throw InputError("ctc: label " + std::to_string(l) + " outside [0, " + std::to_string(blank) + ")");
    }
  }
  const std::size_t required = ctc_required_frames(labels);
  if (frames < required) {
    throw InfeasibleError("ctc: " + std::to_string(labels.size()) + " labels need at least " +
                          std::to_string(required) + " frames, got " + std::to_string(frames));
  }
  CtcLattice lat;
  lat.frames = frames;
  lat.states = 2 * labels.size() + 1;
  lat.extended.assign(lat.states, blank);
  for (std::size_t i = 0; i < labels.size(); ++i) lat.extended[2 * i + 1] = labels[i];
  lat.alpha.assign(frames * lat.states, kNegInf);

  const auto lp = log_probs.data();
  auto at = [&](std::size_t t, TokenId k) { return static_cast<double>(lp[t * width + static_cast<std::size_t>(k)]); };
  lat.alpha[0] = at(0, blank);
  if (lat.states > 1) lat.alpha[1] = at(0, lat.extended[1]);
  for (std::size_t t = 1; t < frames; ++t) {
    const double* prev = lat.alpha.data() + (t - 1) * lat.states;
    double* cur = lat.alpha.data() + t * lat.states;
    for (std::size_t s = 0; s < lat.states; ++s) {
      double v = prev[s];
      if (s >= 1) v = log_add(v, prev[s - 1]);
      if (lat.skip_allowed(s, blank)) v = log_add(v, prev[s - 2]);
      if (v != kNegInf) cur[s] = v + at(t, lat.extended[s]);
    }
  }
  const double* last = lat.alpha.data() + (frames - 1) * lat.states;
  lat.log_likelihood = last[lat.states - 1];
  if (lat.states > 1) lat.log_likelihood = log_add(lat.log_likelihood, last[lat.states - 2]);
  return lat;
}

}  // namespace

std::size_t ctc_required_frames(std::span<const TokenId> labels) {
  std::size_t n = labels.size();
  for (std::size_t i = 1; i < labels.size(); ++i)
    if (labels[i] == labels[i - 1]) ++n;
  return n;
}

double ctc_log_likelihood(const Tensor& log_probs, std::span<const TokenId> labels) {
  return run_forward(log_probs, labels).log_likelihood;
}

Tensor ctc_loss(const Tensor& log_probs, std::span<const TokenId> labels) {
  CtcLattice lat = run_forward(log_probs, labels);
  if (!std::isfinite(lat.log_likelihood)) throw NumericError("ctc: zero-probability label sequence");
  Tensor result = make_result({1}, {static_cast<Real>(-lat.log_likelihood)});
  if (should_record({&log_probs})) {
    auto in = log_probs.node();
    auto out = result.node();
    Tape::active()->record(result, [in, out, lat = std::move(lat)] {
      if (!in->requires_grad) return;
      auto& g = in->ensure_grad();
      const std::size_t width = in->shape[1];
      const TokenId blank = static_cast<TokenId>(width - 1);
      const std::size_t S = lat.states;
      const double scale = out->grad[0];
      // adj[s] holds d(loss)/d(alpha_t(s)) for the frame being processed.
      std::vector<double> adj(S, 0.0), prev_adj(S, 0.0);
      const double* last = lat.alpha.data() + (lat.frames - 1) * S;
      adj[S - 1] = -std::exp(last[S - 1] - lat.log_likelihood);
      if (S > 1) adj[S - 2] = -std::exp(last[S - 2] - lat.log_likelihood);
      for (std::size_t t = lat.frames; t-- > 0;) {
        const double* cur = lat.alpha.data() + t * S;
        std::fill(prev_adj.begin(), prev_adj.end(), 0.0);
        for (std::size_t s = 0; s < S; ++s) {
          if (adj[s] == 0.0 || cur[s] == kNegInf) continue;
          const std::size_t k = static_cast<std::size_t>(lat.extended[s]);
          const double emit = in->data[t * width + k];
          g[t * width + k] += static_cast<Real>(adj[s] * scale);
          if (t == 0) continue;
          const double* prev = lat.alpha.data() + (t - 1) * S;
          const double pre = cur[s] - emit;
          auto push = [&](std::size_t j) {
            if (prev[j] != kNegInf) prev_adj[j] += adj[s] * std::exp(prev[j] - pre);
          };
          push(s);
          if (s >= 1) push(s - 1);
          if (lat.skip_allowed(s, blank)) push(s - 2);
        }
        std::swap(adj, prev_adj);
      }
    });
  }
  return result;
}

std::vector<double> smoothed_target(std::size_t vocab, TokenId target, double smoothing) {
  if (vocab < 2) throw ContractError("label smoothing needs at least two classes");
  std::vector<double> q(vocab, smoothing / static_cast<double>(vocab - 1));
  q[static_cast<std::size_t>(target)] = 1.0 - smoothing;
  return q;
}

Tensor attention_loss(const Tensor& logits, std::span<const TokenId> targets_out, double smoothing) {
  if (logits.rank() != 2) {
    throw DimensionError("attention_loss: logits must be [l, V], got " + shape_to_string(logits.shape()));
  }
  const std::size_t rows = logits.dim(0), vocab = logits.dim(1);
  if (targets_out.size() != rows) {
    throw DimensionError("attention_loss: " + std::to_string(rows) + " logit rows but " +
                         std::to_string(targets_out.size()) + " targets");
  }
  if (!(smoothing >= 0.0 && smoothing < 1.0)) throw ConfigError("label smoothing must be in [0, 1)");
  const double off = smoothing / static_cast<double>(vocab - 1);
  const double on = 1.0 - smoothing;
  // Entropy term of q, identical for every position.
  double neg_entropy = on > 0.0 ? on * std::log(on) : 0.0;
  if (off > 0.0) neg_entropy += static_cast<double>(vocab - 1) * off * std::log(off);

  const auto x = logits.data();
  std::vector<double> probs(rows * vocab, 0.0);
  double total = 0.0;
  std::size_t counted = 0;
  for (std::size_t r = 0; r < rows; ++r) {
    const TokenId target = targets_out[r];
    if (target == kPadToken) continue;
    if (target < 0 || static_cast<std::size_t>(target) >= vocab) {
      throw InputError("attention_loss: target " + std::to_string(target) + " outside vocabulary");
    }
    const Real* row = x.data() + r * vocab;
    double mx = row[0];
    for (std::size_t j = 1; j < vocab; ++j) mx = std::max(mx, static_cast<double>(row[j]));
    double z = 0.0;
    for (std::size_t j = 0; j < vocab; ++j) z += std::exp(row[j] - mx);
    const double lse = mx + std::log(z);
    double cross = 0.0;
    for (std::size_t j = 0; j < vocab; ++j) {
      const double logp = row[j] - lse;
      probs[r * vocab + j] = std::exp(logp);
      const double q = (static_cast<TokenId>(j) == target) ? on : off;
      cross += q * logp;
    }
    total += neg_entropy - cross;
    ++counted;
  }
  const double mean = counted ? total / static_cast<double>(counted) : 0.0;
  Tensor result = make_result({1}, {static_cast<Real>(mean)});
  if (counted && should_record({&logits})) {
    auto in = logits.node();
    auto out = result.node();
    std::vector<TokenId> targets(targets_out.begin(), targets_out.end());
    Tape::active()->record(result, [in, out, probs = std::move(probs), targets = std::move(targets),
                                    rows, vocab, on, off, counted] {
      if (!in->requires_grad) return;
      auto& g = in->ensure_grad();
      const double scale = out->grad[0] / static_cast<double>(counted);
      for (std::size_t r = 0; r < rows; ++r) {
        if (targets[r] == kPadToken) continue;
        for (std::size_t j = 0; j < vocab; ++j) {
          const double q = (static_cast<TokenId>(j) == targets[r]) ? on : off;
          g[r * vocab + j] += static_cast<Real>((probs[r * vocab + j] - q) * scale);
        }
      }
    });
  }
  return result;
}

MolLoss mol_loss(const Tensor& ctc, const Tensor& att, double weight) {
  if (!(weight >= 0.0 && weight <= 1.0)) {
    throw ConfigError("MOL weight must lie in [0, 1], got " + std::to_string(weight));
  }
  MolLoss out;
  out.weight = weight;
  out.ctc_part = ctc.item();
  out.att_part = att.item();
  out.total = add(scale(ctc, static_cast<Real>(weight)), scale(att, static_cast<Real>(1.0 - weight)));
  return out;
}

}  // namespace medt::inline MEDT_NS
