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

#include "medt/train.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>

#include "medt/error.hpp"

namespace medt::inline MEDT_NS {

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
  if (batch_frames < 1) throw ConfigError("train: batch_frames must be >= 1");
  if (warmup_steps < 1) throw ConfigError("train: warmup_steps must be >= 1");
  if (!(lr_scale > 0.0)) throw ConfigError("train: lr_scale must be > 0");
  if (!(clip_norm > 0.0)) throw ConfigError("train: clip_norm must be > 0");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
    throw ConfigError("train: Adam betas must lie in [0, 1)");
  }
  if (!(adam_eps > 0.0)) throw ConfigError("train: adam_eps must be > 0");
  if (dev_beam < 1) throw ConfigError("train: dev_beam must be >= 1");
  if (!(dev_ctc_weight >= 0.0 && dev_ctc_weight <= 1.0)) throw ConfigError("train: dev_ctc_weight must lie in [0, 1]");
}

TrainConfig TrainConfig::toy() { return {}; }

TrainConfig TrainConfig::full_scale() {
  TrainConfig c;
  c.epochs = 30;
  c.warmup_steps = 25000;
  c.lr_scale = 10.0;
  c.batch_frames = 20000;
  c.masking = {2, 40, 2, 8};
  return c;
}

NoamSchedule::NoamSchedule(double scale, std::size_t d_model, std::size_t warmup_steps)
    : scale_(scale), d_model_(static_cast<double>(d_model)), warmup_(static_cast<double>(warmup_steps)) {
  if (warmup_steps < 1) throw ConfigError("noam: warmup_steps must be >= 1");
  if (d_model < 1) throw ConfigError("noam: d_model must be >= 1");
}

double NoamSchedule::lr(std::size_t step) const {
  if (step < 1) throw ContractError("noam: step must be >= 1");
  const double s = static_cast<double>(step);
  return scale_ * std::pow(d_model_, -0.5) * std::min(std::pow(s, -0.5), s * std::pow(warmup_, -1.5));
}

AdamOptimizer::AdamOptimizer(const ParameterRegistry& params, AdamOptions opts) : opts_(opts) {
  for (const auto& [name, t] : params) {
    m_.emplace_back(t.numel(), Real(0));
    v_.emplace_back(t.numel(), Real(0));
  }
}

bool AdamOptimizer::step(ParameterRegistry& params, double lr) {
  if (params.size() != m_.size()) throw ContractError("adam: parameter set changed since construction");
  for (const auto& [name, t] : params) {
    if (!t.has_grad()) continue;
    for (Real g : t.grad()) {
      if (!std::isfinite(g)) return false;
    }
  }
  ++steps_;
  const double c1 = 1.0 - std::pow(opts_.beta1, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(opts_.beta2, static_cast<double>(steps_));
  std::size_t k = 0;
  for (const auto& entry : params) {
    Tensor t = entry.second;
    auto& m = m_[k];
    auto& v = v_[k];
    ++k;
    if (!t.has_grad()) continue;
    const auto g = t.grad();
    auto w = t.mutable_data();
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double gi = g[i];
      m[i] = static_cast<Real>(opts_.beta1 * m[i] + (1.0 - opts_.beta1) * gi);
      v[i] = static_cast<Real>(opts_.beta2 * v[i] + (1.0 - opts_.beta2) * gi * gi);
      const double mhat = m[i] / c1, vhat = v[i] / c2;
      w[i] = static_cast<Real>(static_cast<double>(w[i]) - lr * mhat / (std::sqrt(vhat) + opts_.eps));
    }
  }
  return true;
}

void AdamOptimizer::save_state(CheckpointArchive& archive, const ParameterRegistry& params) const {
  std::size_t k = 0;
  for (const auto& [name, t] : params) {
    archive.add("__adam.m." + name, Tensor(t.shape(), m_[k]));
    archive.add("__adam.v." + name, Tensor(t.shape(), v_[k]));
    ++k;
  }
  archive.add("__adam.step", Tensor::scalar(static_cast<Real>(steps_)));
}

void AdamOptimizer::load_state(const CheckpointArchive& archive, const ParameterRegistry& params) {
  const Tensor* step = archive.find("__adam.step");
  if (step == nullptr) throw FormatError("adam: archive has no optimizer state");
  std::size_t k = 0;
  for (const auto& [name, t] : params) {
    const Tensor* m = archive.find("__adam.m." + name);
    const Tensor* v = archive.find("__adam.v." + name);
    if (m == nullptr || v == nullptr || m->shape() != t.shape() || v->shape() != t.shape()) {
      throw FormatError("adam: missing or mis-shaped moments for " + name);
    }
    m_[k].assign(m->data().begin(), m->data().end());
    v_[k].assign(v->data().begin(), v->data().end());
    ++k;
  }
  steps_ = static_cast<std::size_t>(step->item());
}

double global_grad_norm(const ParameterRegistry& params) {
  double s = 0.0;
  for (const auto& [name, t] : params) {
    if (!t.has_grad()) continue;
    for (Real g : t.grad()) s += static_cast<double>(g) * static_cast<double>(g);
  }
  return std::sqrt(s);
}

double clip_grad_norm(ParameterRegistry& params, double max_norm) {
  const double norm = global_grad_norm(params);
  if (!std::isfinite(norm) || norm <= max_norm) return norm;
  const double factor = max_norm / norm;
  for (const auto& entry : params) {
    Tensor t = entry.second;
    if (!t.has_grad()) continue;
    for (Real& g : t.mutable_grad()) g = static_cast<Real>(g * factor);
  }
  return norm;
}

MolLoss utterance_loss(const MedModel& model, const Utterance& utt, const ForwardMode& mode,
                       const FeatureMatrix* features) {
  const ModelConfig& cfg = model.config();
  const Vocabulary vocab = cfg.vocabulary();
  const Tensor x = (features ? *features : utt.features).to_tensor();
  const EncoderOutputs enc = model.encode(x, mode);
  const Tensor ctc = ctc_loss(model.ctc_head(enc), utt.labels);
  std::vector<TokenId> in{vocab.sos()};
  in.insert(in.end(), utt.labels.begin(), utt.labels.end());
  std::vector<TokenId> out(utt.labels.begin(), utt.labels.end());
  out.push_back(vocab.eos());
  const Tensor att = attention_loss(model.forward_decoder(enc, in, mode), out, cfg.label_smoothing);
  return mol_loss(ctc, att, cfg.mol_weight);
}

CorpusDecode decode_corpus(const MedModel& model, const Corpus& corpus, const BeamOptions& opts) {
  const Vocabulary vocab = model.config().vocabulary();
  CorpusDecode out;
  for (const auto& u : corpus.utterances) {
    const BeamResult r = beam_search(model, u.features.to_tensor(), opts);
    std::vector<TokenId> hyp = r.best().labels(vocab.eos());
    if (r.unfinished) ++out.unfinished;
    out.report += ter(tag_tokens(vocab, u.labels), tag_tokens(vocab, hyp));
    out.scores.push_back(r.best().combined);
    out.hypotheses.push_back(std::move(hyp));
  }
  return out;
}

double evaluate_loss(const MedModel& model, const Corpus& corpus) {
  double s = 0.0;
  std::size_t n = 0;
  for (const auto& u : corpus.utterances) {
    try {
      s += utterance_loss(model, u).total.item();
      ++n;
    } catch (const InfeasibleError&) {
    }
  }
  return n ? s / static_cast<double>(n) : std::numeric_limits<double>::quiet_NaN();
}

std::vector<std::vector<std::size_t>> make_batches(const Corpus& corpus, std::size_t max_frames, Rng& rng) {
  std::vector<std::size_t> idx(corpus.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::shuffle(idx.begin(), idx.end(), rng.engine());
  // Coarse buckets keep some randomness among similar lengths.
  constexpr std::size_t kBucket = 8;
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return corpus.utterances[a].features.frames / kBucket < corpus.utterances[b].features.frames / kBucket;
  });
  std::vector<std::vector<std::size_t>> batches;
  std::size_t frames = 0;
  for (std::size_t i : idx) {
    const std::size_t f = corpus.utterances[i].features.frames;
    if (batches.empty() || (frames + f > max_frames && !batches.back().empty())) {
      batches.emplace_back();
      frames = 0;
    }
    batches.back().push_back(i);
    frames += f;
  }
  std::shuffle(batches.begin(), batches.end(), rng.engine());
  return batches;
}

namespace {

bool better(const EpochStats& a, double best_ter, double best_loss) {
  if (a.dev_ter != best_ter) return a.dev_ter < best_ter;
  return a.dev_loss < best_loss;
}

}  // namespace

StageResult train_stage(MedModel& model, const Corpus& train, const Corpus& dev, const TrainConfig& config,
                        const std::string& stage, const StageHooks& hooks) {
  config.validate();
  if (train.empty()) throw InputError("train_stage: training corpus '" + train.name + "' is empty");
  if (dev.empty()) throw InputError("train_stage: dev corpus '" + dev.name + "' is empty");

  ParameterRegistry& params = model.mutable_parameters();
  AdamOptimizer adam(params, {config.adam_beta1, config.adam_beta2, config.adam_eps});
  const NoamSchedule schedule(config.lr_scale, model.config().d_model, config.warmup_steps);
  Rng shuffle_rng(config.seed, "shuffle");
  Rng dropout_rng(config.seed, "dropout");
  Rng mask_rng(config.seed, "masking");
  const ForwardMode mode{model.config().dropout, &dropout_rng};
  const bool masking = config.masking.enabled();
  BeamOptions dev_opts;
  dev_opts.beam = config.dev_beam;
  dev_opts.ctc_weight = config.dev_ctc_weight;

  StageResult result;
  result.stage = stage;
  CheckpointArchive best = snapshot_parameters(params);
  double best_ter = std::numeric_limits<double>::infinity();
  double best_loss = std::numeric_limits<double>::infinity();

  auto abort = [&](const std::string& why) {
    result.aborted = true;
    result.abort_reason = why;
    restore_parameters(params, best);
    if (config.verbose) std::clog << "[" << stage << "] aborted: " << why << '\n';
  };

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    double loss_sum = 0.0;
    std::size_t loss_count = 0;
    for (const auto& batch : make_batches(train, config.batch_frames, shuffle_rng)) {
      params.zero_grad();
      const Real inv = static_cast<Real>(1.0 / static_cast<double>(batch.size()));
      double batch_loss = 0.0;
      std::size_t used = 0;
      for (std::size_t i : batch) {
        const Utterance& u = train.utterances[i];
        FeatureMatrix masked;
        if (masking) masked = augment_mask(u.features, config.masking, mask_rng);
        Tape tape;
        auto scope = tape.activate();
        MolLoss loss;
        try {
          loss = utterance_loss(model, u, mode, masking ? &masked : nullptr);
        } catch (const InfeasibleError&) {
          ++result.skipped_utterances;
          continue;
        }
        const double v = loss.total.item();
        if (!std::isfinite(v)) {
          abort("non-finite training loss on " + u.id + " in epoch " + std::to_string(epoch));
          return result;
        }
        tape.backward(scale(loss.total, inv));
        batch_loss += v;
        ++used;
      }
      if (used == 0) continue;
      const double norm = clip_grad_norm(params, config.clip_norm);
      if (!std::isfinite(norm) || !adam.step(params, schedule.lr(adam.steps() + 1))) {
        ++result.skipped_steps;
        if (config.verbose) std::clog << "[" << stage << "] skipped step with non-finite gradient\n";
        continue;
      }
      loss_sum += batch_loss;
      loss_count += used;
    }
    result.steps = adam.steps();

    EpochStats stats;
    stats.epoch = epoch;
    stats.train_loss = loss_count ? loss_sum / static_cast<double>(loss_count) : std::numeric_limits<double>::quiet_NaN();
    stats.dev_loss = evaluate_loss(model, dev);
    if (!std::isfinite(stats.dev_loss)) {
      abort("non-finite dev loss in epoch " + std::to_string(epoch));
      return result;
    }
    stats.dev_ter = decode_corpus(model, dev, dev_opts).report.all.rate();
    result.curve.push_back(stats);
    if (config.verbose) {
      std::clog << "[" << stage << "] epoch " << epoch << " train " << stats.train_loss << " dev " << stats.dev_loss
                << " ter " << stats.dev_ter << " lr " << schedule.lr(std::max<std::size_t>(1, adam.steps())) << '\n';
    }
    if (better(stats, best_ter, best_loss)) {
      best_ter = stats.dev_ter;
      best_loss = stats.dev_loss;
      best = snapshot_parameters(params);
      result.best_epoch = epoch;
    }
    if (!hooks.checkpoint_dir.empty() && config.checkpoint_every > 0 && epoch % config.checkpoint_every == 0) {
      CheckpointArchive ar = model_archive(model);
      adam.save_state(ar, params);
      ar.add("__train.epoch", Tensor::scalar(static_cast<Real>(epoch)));
      ar.save((std::filesystem::path(hooks.checkpoint_dir) / (stage + ".epoch" + std::to_string(epoch) + ".medt")).string());
    }
    if (hooks.on_epoch && !hooks.on_epoch(stats)) {
      result.stopped_early = true;
      break;
    }
  }
  restore_parameters(params, best);
  return result;
}

void write_training_report(const std::string& path, const std::vector<StageResult>& stages) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path);
  os.precision(9);
  for (const auto& s : stages) {
    for (const auto& e : s.curve) {
      os << s.stage << '\t' << e.epoch << '\t' << e.train_loss << '\t' << e.dev_loss << '\t' << e.dev_ter << '\n';
    }
  }
  if (!os) throw IoError("write failed for " + path);
}

std::pair<Corpus, Corpus> split_holdout(const Corpus& corpus, double fraction) {
  if (corpus.size() < 2) throw InputError("split_holdout: corpus '" + corpus.name + "' needs at least 2 utterances");
  if (!(fraction > 0.0 && fraction < 1.0)) throw ConfigError("split_holdout: fraction must lie in (0, 1)");
  std::size_t n_dev = static_cast<std::size_t>(std::lround(fraction * static_cast<double>(corpus.size())));
  n_dev = std::clamp<std::size_t>(n_dev, 1, corpus.size() - 1);
  Corpus tr, dv;
  tr.name = corpus.name + "_train";
  dv.name = corpus.name + "_dev";
  const auto cut = corpus.utterances.end() - static_cast<std::ptrdiff_t>(n_dev);
  tr.utterances.assign(corpus.utterances.begin(), cut);
  dv.utterances.assign(cut, corpus.utterances.end());
  return {std::move(tr), std::move(dv)};
}

RecipeResult run_recipe(const RecipeCorpora& corpora, const RecipeOptions& options, const RecipeHooks& hooks) {
  options.model.validate();
  options.finetune_config.validate();
  if (corpora.cs_train == nullptr || corpora.cs_dev == nullptr) throw ContractError("recipe: code-switching corpora missing");
  if (options.pretrain) {
    options.pretrain_config.validate();
    if (corpora.mono_a == nullptr || corpora.mono_b == nullptr) throw ContractError("recipe: monolingual corpora missing");
  }
  const bool branched = has_dual_encoders(options.model.variant) || has_dual_cross_attention(options.model.variant);
  auto stage_hooks = [&](const std::string& stage) {
    StageHooks sh;
    sh.checkpoint_dir = hooks.checkpoint_dir;
    if (hooks.on_epoch) sh.on_epoch = [&, stage](const EpochStats& e) { return hooks.on_epoch(stage, e); };
    return sh;
  };

  std::vector<StageResult> stages;
  std::optional<MedModel> pre_a, pre_b, pre_joint;
  if (options.pretrain) {
    ModelConfig base = options.model;
    base.variant = Variant::kBaseline;
    auto pretrain = [&](const Corpus& tr, const Corpus& dv, const std::string& stage) {
      const std::uint64_t seed = derive_seed(options.pretrain_config.seed, stage);
      MedModel m(base, seed);
      TrainConfig tc = options.pretrain_config;
      tc.seed = seed;
      stages.push_back(train_stage(m, tr, dv, tc, stage, stage_hooks(stage)));
      if (stages.back().aborted) throw NumericError("recipe: stage " + stage + " diverged: " + stages.back().abort_reason);
      return m;
    };
    auto [tr_a, dv_a] = split_holdout(*corpora.mono_a, options.pretrain_dev_fraction);
    auto [tr_b, dv_b] = split_holdout(*corpora.mono_b, options.pretrain_dev_fraction);
    if (branched) {
      pre_a.emplace(pretrain(tr_a, dv_a, "pretrain_a"));
      pre_b.emplace(pretrain(tr_b, dv_b, "pretrain_b"));
    } else {
      // A single-encoder model is pretrained once on both monolingual corpora.
      auto join = [](Corpus x, const Corpus& y, const std::string& name) {
        x.name = name;
        x.utterances.insert(x.utterances.end(), y.utterances.begin(), y.utterances.end());
        return x;
      };
      pre_joint.emplace(pretrain(join(tr_a, tr_b, "mono_ab_train"), join(dv_a, dv_b, "mono_ab_dev"), "pretrain_ab"));
    }
  }

  MedModel model(options.model, derive_seed(options.finetune_config.seed, "finetune"));
  std::vector<BranchTransplant> transplants;
  if (pre_joint) restore_parameters(model.mutable_parameters(), snapshot_parameters(pre_joint->parameters()));
  if (pre_a) {
    for (Language lang : {Language::kA, Language::kB}) {
      const MedModel& src = lang == Language::kA ? *pre_a : *pre_b;
      BranchTransplant bt;
      bt.branch = lang;
      bt.copied = transplant(model, model_archive(src), branch_transplant_map(options.model, lang));
      bt.expected = branch_parameter_names(model, lang).size();
      if (bt.copied != bt.expected) {
        throw TransplantError("recipe: branch " + std::string(1, language_symbol(lang)) + " received " +
                              std::to_string(bt.copied) + " of " + std::to_string(bt.expected) + " tensors");
      }
      transplants.push_back(bt);
    }
    if (hooks.after_transplant) hooks.after_transplant(*pre_a, *pre_b, model);
  }
  stages.push_back(train_stage(model, *corpora.cs_train, *corpora.cs_dev, options.finetune_config, "finetune",
                               stage_hooks("finetune")));
  return RecipeResult{std::move(model), std::move(stages), std::move(transplants),
                      std::move(pre_a),  std::move(pre_b),  std::move(pre_joint)};
}

}  // namespace medt::inline MEDT_NS
