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

#ifndef MEDT_TRAIN_HPP_
#define MEDT_TRAIN_HPP_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "medt/checkpoint.hpp"
#include "medt/data.hpp"
#include "medt/decode.hpp"
#include "medt/losses.hpp"
#include "medt/model.hpp"

namespace medt::inline MEDT_NS {

struct TrainConfig {
  std::size_t epochs = 20;
  std::size_t batch_frames = 1000;  // cap on feature frames per minibatch
  double lr_scale = 1.0;
  std::size_t warmup_steps = 400;
  std::uint64_t seed = 1;
  double clip_norm = 5.0;
  std::size_t checkpoint_every = 0;  // epochs between checkpoints; 0 disables
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.98;
  double adam_eps = 1e-9;
  MaskOptions masking{1, 4, 1, 2};
  std::size_t dev_beam = 1;
  double dev_ctc_weight = 0.3;
  bool verbose = false;

  void validate() const;
  static TrainConfig toy();
  static TrainConfig full_scale();
};

// lr(step) = scale * d_model^-0.5 * min(step^-0.5, step * warmup^-1.5)
class NoamSchedule {
 public:
  NoamSchedule(double scale, std::size_t d_model, std::size_t warmup_steps);
  double lr(std::size_t step) const;

 private:
  double scale_;
  double d_model_;
  double warmup_;
};

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.98;
  double eps = 1e-9;
};

class AdamOptimizer {
 public:
  AdamOptimizer(const ParameterRegistry& params, AdamOptions opts = {});

  // Bias-corrected Adam update from the gradients currently stored on the
  // parameters. A non-finite gradient leaves parameters and moments
  // untouched and returns false.
  bool step(ParameterRegistry& params, double lr);
  std::size_t steps() const { return steps_; }

  // Moments are stored as "__adam.m.<name>" / "__adam.v.<name>" plus the
  // step counter in "__adam.step".
  void save_state(CheckpointArchive& archive, const ParameterRegistry& params) const;
  void load_state(const CheckpointArchive& archive, const ParameterRegistry& params);

 private:
  AdamOptions opts_;
  std::size_t steps_ = 0;
  // Kept at parameter precision so saved state resumes bit-exactly.
  std::vector<std::vector<Real>> m_;
  std::vector<std::vector<Real>> v_;
};

double global_grad_norm(const ParameterRegistry& params);
// Rescales gradients so their global L2 norm is at most max_norm. Returns
// the norm before clipping.
double clip_grad_norm(ParameterRegistry& params, double max_norm);

// MOL loss of one utterance. Records on the active tape, if any.
MolLoss utterance_loss(const MedModel& model, const Utterance& utt, const ForwardMode& mode = {},
                       const FeatureMatrix* features = nullptr);

struct CorpusDecode {
  TerReport report;
  std::vector<std::vector<TokenId>> hypotheses;  // without <eos>
  std::vector<double> scores;                    // combined score of each best hypothesis
  std::size_t unfinished = 0;
};

CorpusDecode decode_corpus(const MedModel& model, const Corpus& corpus, const BeamOptions& opts);
// Mean MOL loss in evaluation mode.
double evaluate_loss(const MedModel& model, const Corpus& corpus);

struct EpochStats {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double dev_loss = 0.0;
  double dev_ter = 0.0;
};

struct StageResult {
  std::string stage;
  std::vector<EpochStats> curve;
  std::size_t best_epoch = 0;
  std::size_t steps = 0;
  std::size_t skipped_steps = 0;
  std::size_t skipped_utterances = 0;
  bool stopped_early = false;
  bool aborted = false;
  std::string abort_reason;

  const EpochStats& best() const { return curve.at(best_epoch - 1); }
};

struct StageHooks {
  // Returning false stops the stage after that epoch.
  std::function<bool(const EpochStats&)> on_epoch;
  std::string checkpoint_dir;
};

// Minibatches of length-bucketed utterance indices, in training order.
std::vector<std::vector<std::size_t>> make_batches(const Corpus& corpus, std::size_t max_frames, Rng& rng);

// Trains in place. On return the model holds the best-dev parameters (by
// dev TER, then dev loss). A non-finite loss aborts the stage and restores
// the best parameters seen so far (or the initial ones).
StageResult train_stage(MedModel& model, const Corpus& train, const Corpus& dev, const TrainConfig& config,
                        const std::string& stage, const StageHooks& hooks = {});

void write_training_report(const std::string& path, const std::vector<StageResult>& stages);

// The tail 'fraction' of a corpus as a held-out dev split (at least one
// utterance) and the rest as training data.
std::pair<Corpus, Corpus> split_holdout(const Corpus& corpus, double fraction);

struct RecipeCorpora {
  const Corpus* mono_a = nullptr;
  const Corpus* mono_b = nullptr;
  const Corpus* cs_train = nullptr;
  const Corpus* cs_dev = nullptr;
};

// Dual variants pretrain one baseline per language and transplant each into
// its branch. The baseline pretrains once on both monolingual corpora and
// starts finetuning from all of those parameters.
struct RecipeOptions {
  bool pretrain = true;  // false: finetune a freshly initialized model
  ModelConfig model = ModelConfig::toy();
  TrainConfig pretrain_config = TrainConfig::toy();
  TrainConfig finetune_config = TrainConfig::toy();
  double pretrain_dev_fraction = 0.05;
};

struct BranchTransplant {
  Language branch = Language::kA;
  std::size_t copied = 0;
  std::size_t expected = 0;
};

struct RecipeHooks {
  std::function<bool(const std::string& stage, const EpochStats&)> on_epoch;
  // Called with the stage-1 and stage-2 models and the transplanted model
  // before finetuning starts.
  std::function<void(const MedModel& pretrained_a, const MedModel& pretrained_b, const MedModel& transplanted)>
      after_transplant;
  std::string checkpoint_dir;
};

struct RecipeResult {
  MedModel model;
  std::vector<StageResult> stages;
  std::vector<BranchTransplant> transplants;
  std::optional<MedModel> pretrained_a;
  std::optional<MedModel> pretrained_b;
  // Baseline only: pretrained on both monolingual corpora, copied whole.
  std::optional<MedModel> pretrained_joint;
};

RecipeResult run_recipe(const RecipeCorpora& corpora, const RecipeOptions& options, const RecipeHooks& hooks = {});

}  // namespace medt::inline MEDT_NS

#endif  // MEDT_TRAIN_HPP_
