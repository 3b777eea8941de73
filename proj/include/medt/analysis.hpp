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

#ifndef MEDT_ANALYSIS_HPP_
#define MEDT_ANALYSIS_HPP_

#include <array>
#include <cstddef>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "medt/data.hpp"
#include "medt/model.hpp"

namespace medt::inline MEDT_NS {

// Final-layer outputs of both encoders for one utterance, standardized
// together (one mean and standard deviation over all 2 * T' * d values), so
// the two encoders stay comparable.
struct EncoderActivations {
  std::string utt_id;
  std::size_t frames = 0;
  std::size_t channels = 0;
  std::array<std::vector<double>, 2> values;  // [T', d] row-major, branch A then B
  // Mean over frames of the variance across channels, per encoder.
  std::array<double, 2> mean_frame_variance{};
};

EncoderActivations analyze_utterance(const MedModel& model, const Utterance& utt);
// Population variance across each row, averaged over rows.
double mean_frame_variance(std::span<const double> values, std::size_t rows, std::size_t cols);

void write_activation_csv_header(std::ostream& os);
// One row per (encoder, frame, channel): utt_id,frame,channel,value,encoder
void write_activation_csv(std::ostream& os, const EncoderActivations& act);

}  // namespace medt::inline MEDT_NS

#endif  // MEDT_ANALYSIS_HPP_
