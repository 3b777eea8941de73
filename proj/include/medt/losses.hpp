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

#ifndef MEDT_LOSSES_HPP_
#define MEDT_LOSSES_HPP_

#include <span>

#include "medt/tensor.hpp"

namespace medt::inline MEDT_NS {

// Minimum number of frames needed to emit 'labels' under CTC: one per label
// plus one blank between each pair of identical neighbours.
std::size_t ctc_required_frames(std::span<const TokenId> labels);

// log P(labels | log_probs) summed over every CTC alignment, computed with
// the log-space forward recursion at 64-bit. Blank is the last column.
double ctc_log_likelihood(const Tensor& log_probs, std::span<const TokenId> labels);

// -log P(labels | log_probs) as a scalar on the tape. The backward rule is
// the reverse-mode adjoint of the forward recursion.
Tensor ctc_loss(const Tensor& log_probs, std::span<const TokenId> labels);

// Mean over non-pad positions of KL(q || softmax(logits)) where q puts
// 1 - smoothing on the target and smoothing / (V - 1) on every other class.
Tensor attention_loss(const Tensor& logits, std::span<const TokenId> targets_out, double smoothing);

// Smoothed target distribution for one position.
std::vector<double> smoothed_target(std::size_t vocab, TokenId target, double smoothing);

struct MolLoss {
  Tensor total;
  double ctc_part = 0.0;
  double att_part = 0.0;
  double weight = 0.0;
};

// total = weight * ctc + (1 - weight) * att
MolLoss mol_loss(const Tensor& ctc, const Tensor& att, double weight);

}  // namespace medt::inline MEDT_NS

#endif  // MEDT_LOSSES_HPP_
