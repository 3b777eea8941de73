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

#include "medt/analysis.hpp"

#include <cmath>

#include "medt/error.hpp"

namespace medt::inline MEDT_NS {

double mean_frame_variance(std::span<const double> values, std::size_t rows, std::size_t cols) {
  if (rows == 0 || cols == 0 || values.size() != rows * cols) throw DimensionError("mean_frame_variance: bad extents");
  double acc = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = values.data() + r * cols;
    double m = 0.0;
    for (std::size_t c = 0; c < cols; ++c) m += row[c];
    m /= static_cast<double>(cols);
    double v = 0.0;
    for (std::size_t c = 0; c < cols; ++c) v += (row[c] - m) * (row[c] - m);
    acc += v / static_cast<double>(cols);
  }
  return acc / static_cast<double>(rows);
}

EncoderActivations analyze_utterance(const MedModel& model, const Utterance& utt) {
  if (!has_dual_encoders(model.config().variant)) {
    throw ConfigError(std::string("analyze: a ") + variant_name(model.config().variant) +
                      " model has a single encoder; activation contrast needs m_en or med");
  }
  const EncoderOutputs enc = model.encode(utt.features.to_tensor());
  EncoderActivations act;
  act.utt_id = utt.id;
  act.frames = enc.length();
  act.channels = enc.branches[0].dim(1);
  double s = 0.0, s2 = 0.0;
  for (const Tensor& b : enc.branches) {
    for (Real v : b.data()) {
      s += v;
      s2 += static_cast<double>(v) * v;
    }
  }
  const double n = 2.0 * static_cast<double>(act.frames * act.channels);
  const double mean = s / n;
  const double var = std::max(0.0, s2 / n - mean * mean);
  const double inv_sd = var > 0.0 ? 1.0 / std::sqrt(var) : 0.0;
  for (std::size_t k = 0; k < 2; ++k) {
    const auto d = enc.branches[k].data();
    act.values[k].resize(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) act.values[k][i] = (d[i] - mean) * inv_sd;
    act.mean_frame_variance[k] = mean_frame_variance(act.values[k], act.frames, act.channels);
  }
  return act;
}

void write_activation_csv_header(std::ostream& os) { os << "utt_id,frame,channel,value,encoder\n"; }

void write_activation_csv(std::ostream& os, const EncoderActivations& act) {
  for (std::size_t k = 0; k < 2; ++k) {
    const char enc = language_symbol(static_cast<Language>(k));
    for (std::size_t t = 0; t < act.frames; ++t) {
      for (std::size_t c = 0; c < act.channels; ++c) {
        os << act.utt_id << ',' << t << ',' << c << ',' << act.values[k][t * act.channels + c] << ',' << enc << '\n';
      }
    }
  }
}

}  // namespace medt::inline MEDT_NS
