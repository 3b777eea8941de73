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

#include "medt/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>

#include "medt/analysis.hpp"
#include "medt/checkpoint.hpp"
#include "medt/error.hpp"

namespace medt::inline MEDT_NS {

namespace fs = std::filesystem;

namespace {

using Kind = ExperimentConfig::Kind;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool parse_bool(const std::string& v, bool& out) {
  if (v == "1" || v == "true" || v == "yes" || v == "on") {
    out = true;
    return true;
  }
  if (v == "0" || v == "false" || v == "no" || v == "off") {
    out = false;
    return true;
  }
  return false;
}

bool parse_uint(const std::string& v, std::uint64_t& out) {
  if (v.empty() || v.find_first_not_of("0123456789") != std::string::npos) return false;
  try {
    out = std::stoull(v);
  } catch (const std::exception&) {
    return false;
  }
  return true;
}

bool parse_real(const std::string& v, double& out) {
  try {
    std::size_t used = 0;
    out = std::stod(v, &used);
    return used == v.size();
  } catch (const std::exception&) {
    return false;
  }
}

}  // namespace

const std::vector<ExperimentConfig::KeyInfo>& ExperimentConfig::keys() {
  static const std::vector<KeyInfo> k = {
      // experiment
      {"seed", Kind::kUint64, "1", "single seed for data, init, masking and shuffling"},
      {"data_dir", Kind::kString, "data", "corpus directory read by train/recipe/ablation/decode/analyze"},
      {"out_dir", Kind::kString, "out", "output directory (gen writes the corpus here)"},
      {"checkpoint", Kind::kString, "", "model checkpoint for decode/analyze"},
      {"split", Kind::kString, "eval_a", "split decoded or analyzed"},
      {"train_split", Kind::kString, "cs_train", "training split for train/recipe/ablation"},
      {"dev_split", Kind::kString, "cs_dev", "dev split for train/recipe/ablation"},
      {"pretrain", Kind::kBool, "1", "recipe: run the two monolingual pretraining stages"},
      {"holdout_only", Kind::kBool, "0", "analyze: only the held-out tail (pretrain_dev_fraction) of the split"},
      {"max_utts", Kind::kSize, "0", "decode/analyze: at most this many utterances (0 = all)"},
      {"ablation_variants", Kind::kString, "baseline,m_en,m_de,med", "comma-separated ablation arms"},
      // model
      {"variant", Kind::kVariant, "med", "baseline | m_en | m_de | med"},
      {"encoder_layers", Kind::kSize, "2", "N"},
      {"decoder_layers", Kind::kSize, "2", "M"},
      {"d_model", Kind::kSize, "32", ""},
      {"d_ff", Kind::kSize, "128", ""},
      {"heads", Kind::kSize, "2", "H"},
      {"tokens_a", Kind::kSize, "20", "language-A vocabulary size"},
      {"tokens_b", Kind::kSize, "20", "language-B vocabulary size"},
      {"d_feat", Kind::kSize, "20", "feature dimension"},
      {"conv_channels", Kind::kSize, "16", "frontend conv channels"},
      {"encoder_final_norm", Kind::kBool, "1", "LayerNorm after the last encoder layer"},
      {"dropout", Kind::kReal, "0.1", ""},
      {"mol_weight", Kind::kReal, "0.3", "lambda, weight of the CTC objective"},
      {"label_smoothing", Kind::kReal, "0.1", "epsilon"},
      // training
      {"epochs", Kind::kSize, "20", ""},
      {"pretrain_epochs", Kind::kSize, "0", "epochs for pretraining stages (0 = epochs)"},
      {"pretrain_dev_fraction", Kind::kReal, "0.05", "held-out share of each monolingual corpus"},
      {"batch_frames", Kind::kSize, "1000", "max feature frames per minibatch"},
      {"lr_scale", Kind::kReal, "1.0", "Noam schedule scale"},
      {"warmup_steps", Kind::kSize, "400", ""},
      {"clip_norm", Kind::kReal, "5.0", ""},
      {"checkpoint_every", Kind::kSize, "0", "epochs between checkpoints (0 = off)"},
      {"adam_beta1", Kind::kReal, "0.9", ""},
      {"adam_beta2", Kind::kReal, "0.98", ""},
      {"adam_eps", Kind::kReal, "1e-9", ""},
      {"time_masks", Kind::kSize, "1", ""},
      {"time_width", Kind::kSize, "4", ""},
      {"feat_masks", Kind::kSize, "1", ""},
      {"feat_width", Kind::kSize, "2", ""},
      {"dev_beam", Kind::kSize, "1", "beam for per-epoch dev TER"},
      {"dev_ctc_weight", Kind::kReal, "0.3", "CTC weight for per-epoch dev TER"},
      {"verbose", Kind::kBool, "0", "per-epoch progress on stderr"},
      // decoding
      {"beam", Kind::kSize, "10", ""},
      {"alpha", Kind::kReal, "0.3", "CTC weight in joint decoding"},
      {"beta", Kind::kReal, "0.3", "LM weight in shallow fusion"},
      {"max_len", Kind::kSize, "0", "0 = encoder output length"},
      {"lm", Kind::kString, "", "n-gram LM file for shallow fusion"},
      {"lm_order", Kind::kSize, "2", "order of an LM trained by ablation"},
      {"lm_from_train", Kind::kBool, "0", "ablation: train an n-gram LM on the training transcripts"},
      // data generation
      {"mono_utts", Kind::kSize, "1500", ""},
      {"cs_train_utts", Kind::kSize, "2000", ""},
      {"cs_dev_utts", Kind::kSize, "100", ""},
      {"eval_utts", Kind::kSize, "400", ""},
      {"switch_prob", Kind::kReal, "0.2", "matrix -> embedded switch probability"},
      {"cs_matrix_ratio", Kind::kReal, "0.7", "matrix-language token share in cs_train/cs_dev"},
      {"cs_a_matrix_share", Kind::kReal, "0.5", "share of A-matrix utterances in cs_train/cs_dev"},
      {"eval_a_ratio", Kind::kReal, "0.69", "language-A share of eval_a"},
      {"eval_b_ratio", Kind::kReal, "0.71", "language-B share of eval_b"},
      {"noise_sigma", Kind::kReal, "0.3", ""},
      {"min_frames", Kind::kSize, "4", "frames per token"},
      {"max_frames", Kind::kSize, "8", ""},
      {"min_tokens", Kind::kSize, "3", "tokens per utterance"},
      {"max_tokens", Kind::kSize, "12", ""},
      {"prototype_scale", Kind::kReal, "1.0", ""},
      {"language_offset", Kind::kReal, "1.0", ""},
  };
  return k;
}

namespace {

const ExperimentConfig::KeyInfo& key_info(const std::string& key) {
  for (const auto& k : ExperimentConfig::keys()) {
    if (k.name == key) return k;
  }
  throw ConfigError("unknown config key '" + key + "'");
}

}  // namespace

ExperimentConfig::ExperimentConfig() {
  for (const auto& k : keys()) values_[k.name] = k.default_value;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  ExperimentConfig c;
  c.merge_file(path);
  return c;
}

void ExperimentConfig::merge_file(const std::string& path) {
  std::vector<std::string> stack;
  merge_file_impl(path, stack);
}

void ExperimentConfig::merge_file_impl(const std::string& path, std::vector<std::string>& stack) {
  std::error_code ec;
  const std::string canon = fs::weakly_canonical(path, ec).string();
  if (std::find(stack.begin(), stack.end(), canon) != stack.end()) throw ConfigError("config include cycle at " + path);
  std::ifstream is(path);
  if (!is) throw IoError("cannot read config file " + path);
  stack.push_back(canon);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = path + ":" + std::to_string(lineno);
    if (line.rfind("include", 0) == 0 && (line.size() == 7 || line[7] == ' ' || line[7] == '\t')) {
      const std::string target = trim(line.substr(7));
      if (target.empty()) throw ConfigError("include without a path at " + where);
      const fs::path resolved = fs::path(target).is_absolute() ? fs::path(target) : fs::path(path).parent_path() / target;
      merge_file_impl(resolved.string(), stack);
      continue;
    }
    try {
      set_assignment(line);
    } catch (const ConfigError& e) {
      throw ConfigError(std::string(e.what()) + " (" + where + ")");
    }
  }
  stack.pop_back();
}

void ExperimentConfig::parse_text(const std::string& text, const std::string& origin) {
  std::istringstream is(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.rfind("include ", 0) == 0) throw ConfigError("include is only allowed in files (" + origin + ")");
    try {
      set_assignment(line);
    } catch (const ConfigError& e) {
      throw ConfigError(std::string(e.what()) + " (" + origin + ":" + std::to_string(lineno) + ")");
    }
  }
}

void ExperimentConfig::set_assignment(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("expected key=value, got '" + assignment + "'");
  set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

void ExperimentConfig::set(const std::string& key, const std::string& value) {
  const KeyInfo& info = key_info(key);
  bool ok = true;
  std::uint64_t u = 0;
  double r = 0.0;
  bool b = false;
  switch (info.kind) {
    case Kind::kString: break;
    case Kind::kSize:
    case Kind::kUint64: ok = parse_uint(value, u); break;
    case Kind::kReal: ok = parse_real(value, r); break;
    case Kind::kBool: ok = parse_bool(value, b); break;
    case Kind::kVariant:
      try {
        (void)parse_variant(value);
      } catch (const Error&) {
        ok = false;
      }
      break;
  }
  if (!ok) throw ConfigError("bad value '" + value + "' for key '" + key + "'");
  values_[key] = value;
}

bool ExperimentConfig::is_set(const std::string& key) const { return get(key) != key_info(key).default_value; }

const std::string& ExperimentConfig::get(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
  return it->second;
}

std::size_t ExperimentConfig::get_size(const std::string& key) const { return static_cast<std::size_t>(get_u64(key)); }

std::uint64_t ExperimentConfig::get_u64(const std::string& key) const {
  std::uint64_t v = 0;
  if (!parse_uint(get(key), v)) throw ConfigError("key '" + key + "' is not an unsigned integer");
  return v;
}

double ExperimentConfig::get_real(const std::string& key) const {
  double v = 0.0;
  if (!parse_real(get(key), v)) throw ConfigError("key '" + key + "' is not a number");
  return v;
}

bool ExperimentConfig::get_bool(const std::string& key) const {
  bool v = false;
  if (!parse_bool(get(key), v)) throw ConfigError("key '" + key + "' is not a boolean");
  return v;
}

ModelConfig ExperimentConfig::model_config() const {
  ModelConfig c;
  c.variant = parse_variant(get("variant"));
  c.encoder_layers = get_size("encoder_layers");
  c.decoder_layers = get_size("decoder_layers");
  c.d_model = get_size("d_model");
  c.d_ff = get_size("d_ff");
  c.heads = get_size("heads");
  c.tokens_a = get_size("tokens_a");
  c.tokens_b = get_size("tokens_b");
  c.d_feat = get_size("d_feat");
  c.conv_channels = get_size("conv_channels");
  c.encoder_final_norm = get_bool("encoder_final_norm");
  c.dropout = get_real("dropout");
  c.mol_weight = get_real("mol_weight");
  c.label_smoothing = get_real("label_smoothing");
  c.validate();
  return c;
}

TrainConfig ExperimentConfig::train_config() const {
  TrainConfig c;
  c.epochs = get_size("epochs");
  c.batch_frames = get_size("batch_frames");
  c.lr_scale = get_real("lr_scale");
  c.warmup_steps = get_size("warmup_steps");
  c.seed = get_u64("seed");
  c.clip_norm = get_real("clip_norm");
  c.checkpoint_every = get_size("checkpoint_every");
  c.adam_beta1 = get_real("adam_beta1");
  c.adam_beta2 = get_real("adam_beta2");
  c.adam_eps = get_real("adam_eps");
  c.masking = {get_size("time_masks"), get_size("time_width"), get_size("feat_masks"), get_size("feat_width")};
  c.dev_beam = get_size("dev_beam");
  c.dev_ctc_weight = get_real("dev_ctc_weight");
  c.verbose = get_bool("verbose");
  c.validate();
  return c;
}

TrainConfig ExperimentConfig::pretrain_config() const {
  TrainConfig c = train_config();
  if (get_size("pretrain_epochs") > 0) c.epochs = get_size("pretrain_epochs");
  return c;
}

DataConfig ExperimentConfig::data_config() const {
  DataConfig c;
  c.vocab = {get_size("tokens_a"), get_size("tokens_b")};
  c.synth.d_feat = get_size("d_feat");
  c.synth.min_frames = get_size("min_frames");
  c.synth.max_frames = get_size("max_frames");
  c.synth.min_tokens = get_size("min_tokens");
  c.synth.max_tokens = get_size("max_tokens");
  c.synth.noise_sigma = get_real("noise_sigma");
  c.synth.prototype_scale = get_real("prototype_scale");
  c.synth.language_offset = get_real("language_offset");
  c.mono_utts = get_size("mono_utts");
  c.cs_train_utts = get_size("cs_train_utts");
  c.cs_dev_utts = get_size("cs_dev_utts");
  c.eval_utts = get_size("eval_utts");
  c.switch_prob = get_real("switch_prob");
  c.cs_matrix_ratio = get_real("cs_matrix_ratio");
  c.cs_a_matrix_share = get_real("cs_a_matrix_share");
  c.eval_a_ratio = get_real("eval_a_ratio");
  c.eval_b_ratio = get_real("eval_b_ratio");
  c.validate();
  return c;
}

BeamOptions ExperimentConfig::beam_options() const {
  BeamOptions o;
  o.beam = get_size("beam");
  o.ctc_weight = get_real("alpha");
  o.lm_weight = get_real("beta");
  o.max_len = get_size("max_len");
  if (o.beam < 1) throw ConfigError("beam must be >= 1");
  if (!(o.ctc_weight >= 0.0 && o.ctc_weight <= 1.0)) throw ConfigError("alpha must lie in [0, 1]");
  return o;
}

std::string ExperimentConfig::to_text() const {
  std::string out;
  for (const auto& k : keys()) out += k.name + "=" + get(k.name) + "\n";
  return out;
}

// ---------------------------------------------------------------------------
// Commands

namespace {

std::string path_in(const std::string& dir, const std::string& file) { return (fs::path(dir) / file).string(); }

void ensure_writable_dir(const std::string& dir) {
  if (dir.empty()) throw IoError("output directory is empty");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory " + dir);
  const std::string probe = path_in(dir, ".medt_write_probe");
  {
    std::ofstream os(probe);
    if (!os) throw IoError("output directory is not writable: " + dir);
  }
  fs::remove(probe, ec);
}

void require_file(const std::string& path, const std::string& what) {
  if (path.empty()) throw ConfigError(what + " path is not set");
  if (!fs::is_regular_file(path)) throw IoError(what + " not found: " + path);
}

DatasetInfo require_dataset(const std::string& dir, const std::vector<std::string>& splits) {
  require_file(dataset_info_path(dir), "dataset info");
  DatasetInfo info = read_dataset_info(dir);
  for (const auto& s : splits) {
    require_file(manifest_path(dir, s), "manifest of split '" + s + "'");
    require_file(features_path(dir, s), "features of split '" + s + "'");
  }
  return info;
}

void check_compatible(const ModelConfig& model, const DatasetInfo& info, const std::string& what) {
  if (model.tokens_a != info.vocab.tokens_a || model.tokens_b != info.vocab.tokens_b) {
    throw InputError("vocabulary mismatch: " + what + " has " + std::to_string(model.tokens_a) + "+" +
                     std::to_string(model.tokens_b) + " tokens, corpus has " + std::to_string(info.vocab.tokens_a) +
                     "+" + std::to_string(info.vocab.tokens_b));
  }
  if (model.d_feat != info.d_feat) {
    throw InputError("feature dimension mismatch: " + what + " expects " + std::to_string(model.d_feat) +
                     ", corpus has " + std::to_string(info.d_feat));
  }
}

std::optional<NgramLm> load_lm(const ExperimentConfig& config, const Vocabulary& vocab) {
  const std::string& path = config.get("lm");
  if (path.empty()) return std::nullopt;
  NgramLm lm = NgramLm::load(path);
  if (!(lm.vocabulary() == vocab)) throw InputError("vocabulary mismatch between LM " + path + " and the model");
  return lm;
}

std::string fmt(double v) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(2);
  os << v;
  return os.str();
}

Corpus limit(Corpus c, std::size_t max_utts) {
  if (max_utts > 0 && c.utterances.size() > max_utts) c.utterances.resize(max_utts);
  return c;
}

}  // namespace

void write_ter_report(const std::string& path, const std::vector<std::pair<std::string, std::string>>& header,
                      const TerReport& report) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path);
  for (const auto& [k, v] : header) os << k << '\t' << v << '\n';
  auto block = [&](const std::string& tag, const ErrorCounts& c) {
    os << "ter_" << tag << '\t' << c.rate() << '\n'
       << "sub_" << tag << '\t' << c.substitutions << '\n'
       << "del_" << tag << '\t' << c.deletions << '\n'
       << "ins_" << tag << '\t' << c.insertions << '\n'
       << "ref_" << tag << '\t' << c.reference << '\n';
  };
  os.precision(6);
  block("all", report.all);
  block("A", report.language(Language::kA));
  block("B", report.language(Language::kB));
  if (!os) throw IoError("write failed for " + path);
}

void write_ablation_table(const std::string& path, const std::vector<AblationRow>& rows) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path);
  os << "system\teval_a_all\teval_a_A\teval_a_B\teval_b_all\teval_b_A\teval_b_B\n";
  os.setf(std::ios::fixed);
  os.precision(2);
  for (const auto& r : rows) {
    os << r.system;
    for (const auto& e : r.eval) {
      os << '\t' << e.all.rate() << '\t' << e.language(Language::kA).rate() << '\t' << e.language(Language::kB).rate();
    }
    os << '\n';
  }
  if (!os) throw IoError("write failed for " + path);
}

std::string cmd_gen(const ExperimentConfig& config) {
  const DataConfig dc = config.data_config();
  const std::string out = config.get("out_dir");
  ensure_writable_dir(out);
  const Dataset ds = generate_dataset(dc, config.get_u64("seed"));
  write_dataset(out, ds);
  std::ostringstream os;
  os << "wrote " << ds.splits.size() << " splits to " << out << '\n';
  for (const auto& name : split_names()) {
    const Corpus& c = ds.splits.at(name);
    const double a_share = c.token_count() ? static_cast<double>(c.token_count(Language::kA)) / c.token_count() : 0.0;
    os << "  " << name << ": " << c.size() << " utterances, " << c.token_count() << " tokens, "
       << fmt(100.0 * a_share) << "% language A\n";
  }
  return os.str();
}

namespace {

struct TrainInputs {
  DatasetInfo info;
  std::map<std::string, Corpus> splits;
};

TrainInputs load_splits(const ExperimentConfig& config, const std::vector<std::string>& names) {
  TrainInputs in;
  const std::string dir = config.get("data_dir");
  in.info = require_dataset(dir, names);
  for (const auto& n : names) in.splits[n] = read_corpus(dir, n, in.info);
  return in;
}

RecipeOptions recipe_options(const ExperimentConfig& config, bool pretrain) {
  RecipeOptions ro;
  ro.pretrain = pretrain;
  ro.model = config.model_config();
  ro.finetune_config = config.train_config();
  ro.pretrain_config = config.pretrain_config();
  ro.pretrain_dev_fraction = config.get_real("pretrain_dev_fraction");
  return ro;
}

std::string stage_summary(const std::vector<StageResult>& stages) {
  std::ostringstream os;
  for (const auto& s : stages) {
    os << "  " << s.stage << ": " << s.curve.size() << " epochs, " << s.steps << " steps";
    if (s.best_epoch > 0) os << ", best epoch " << s.best_epoch << " dev TER " << fmt(s.best().dev_ter) << "%";
    if (s.skipped_steps) os << ", " << s.skipped_steps << " skipped steps";
    if (s.aborted) os << ", ABORTED: " << s.abort_reason;
    os << '\n';
  }
  return os.str();
}

}  // namespace

std::string cmd_train(const ExperimentConfig& config) {
  const ModelConfig mc = config.model_config();
  config.train_config();
  const std::string train = config.get("train_split"), dev = config.get("dev_split");
  const DatasetInfo info = require_dataset(config.get("data_dir"), {train, dev});
  check_compatible(mc, info, "model config");
  const std::string out = config.get("out_dir");
  ensure_writable_dir(out);

  TrainInputs in = load_splits(config, {train, dev});
  RecipeOptions ro = recipe_options(config, false);
  RecipeHooks hooks;
  if (config.get_size("checkpoint_every") > 0) hooks.checkpoint_dir = out;
  RecipeCorpora rc{nullptr, nullptr, &in.splits.at(train), &in.splits.at(dev)};
  RecipeResult r = run_recipe(rc, ro, hooks);
  write_training_report(path_in(out, "train_report.tsv"), r.stages);
  const StageResult& s = r.stages.back();
  if (s.aborted) throw NumericError("training diverged: " + s.abort_reason);
  save_model(path_in(out, "model.medt"), r.model);
  return "trained " + std::string(variant_name(mc.variant)) + " (" + std::to_string(r.model.parameters().scalar_count()) +
         " parameters)\n" + stage_summary(r.stages) + "  wrote " + path_in(out, "model.medt") + "\n";
}

std::string cmd_recipe(const ExperimentConfig& config) {
  const ModelConfig mc = config.model_config();
  config.train_config();
  const bool pretrain = config.get_bool("pretrain");
  const std::string train = config.get("train_split"), dev = config.get("dev_split");
  std::vector<std::string> names{train, dev};
  if (pretrain) {
    names.push_back("mono_a");
    names.push_back("mono_b");
  }
  const DatasetInfo info = require_dataset(config.get("data_dir"), names);
  check_compatible(mc, info, "model config");
  const std::string out = config.get("out_dir");
  ensure_writable_dir(out);

  TrainInputs in = load_splits(config, names);
  RecipeOptions ro = recipe_options(config, pretrain);
  RecipeHooks hooks;
  if (config.get_size("checkpoint_every") > 0) hooks.checkpoint_dir = out;
  RecipeCorpora rc{pretrain ? &in.splits.at("mono_a") : nullptr, pretrain ? &in.splits.at("mono_b") : nullptr,
                   &in.splits.at(train), &in.splits.at(dev)};
  RecipeResult r = run_recipe(rc, ro, hooks);
  write_training_report(path_in(out, "recipe_report.tsv"), r.stages);
  {
    std::ofstream os(path_in(out, "transplant.tsv"));
    if (!os) throw IoError("cannot write " + path_in(out, "transplant.tsv"));
    os << "branch\tcopied\texpected\n";
    for (const auto& t : r.transplants) os << language_symbol(t.branch) << '\t' << t.copied << '\t' << t.expected << '\n';
  }
  if (r.stages.back().aborted) throw NumericError("finetuning diverged: " + r.stages.back().abort_reason);
  if (r.pretrained_a) save_model(path_in(out, "pretrain_a.medt"), *r.pretrained_a);
  if (r.pretrained_b) save_model(path_in(out, "pretrain_b.medt"), *r.pretrained_b);
  if (r.pretrained_joint) save_model(path_in(out, "pretrain_ab.medt"), *r.pretrained_joint);
  save_model(path_in(out, "model.medt"), r.model);
  std::ostringstream os;
  os << "recipe finished for " << variant_name(mc.variant) << '\n' << stage_summary(r.stages);
  for (const auto& t : r.transplants) {
    os << "  transplant " << language_symbol(t.branch) << ": " << t.copied << "/" << t.expected << " tensors\n";
  }
  os << "  wrote " << path_in(out, "model.medt") << '\n';
  return os.str();
}

std::string cmd_ablation(const ExperimentConfig& config) {
  const ModelConfig base = config.model_config();
  config.train_config();
  BeamOptions opts = config.beam_options();
  std::vector<Variant> variants;
  {
    std::istringstream is(config.get("ablation_variants"));
    std::string v;
    while (std::getline(is, v, ',')) variants.push_back(parse_variant(trim(v)));
    if (variants.empty()) throw ConfigError("ablation_variants is empty");
  }
  const std::string train = config.get("train_split"), dev = config.get("dev_split");
  const std::vector<std::string> names{train, dev, "eval_a", "eval_b"};
  const DatasetInfo info = require_dataset(config.get("data_dir"), names);
  check_compatible(base, info, "model config");
  if (!config.get("lm").empty()) require_file(config.get("lm"), "LM");
  const std::string out = config.get("out_dir");
  ensure_writable_dir(out);

  TrainInputs in = load_splits(config, names);
  std::optional<NgramLm> lm = load_lm(config, base.vocabulary());
  if (!lm && config.get_bool("lm_from_train")) {
    std::vector<std::vector<TokenId>> text;
    for (const auto& u : in.splits.at(train).utterances) text.push_back(u.labels);
    lm = NgramLm::train(text, base.vocabulary(), config.get_size("lm_order"));
    lm->save(path_in(out, "lm.txt"));
  }
  if (lm) opts.lm = &*lm;

  std::vector<AblationRow> rows;
  std::vector<std::string> failures;
  std::vector<std::pair<std::string, double>> seconds;
  for (Variant v : variants) {
    const std::string name = variant_name(v);
    try {
      ExperimentConfig arm = config;
      arm.set("variant", name);
      RecipeOptions ro = recipe_options(arm, false);
      RecipeCorpora rc{nullptr, nullptr, &in.splits.at(train), &in.splits.at(dev)};
      const auto t0 = std::chrono::steady_clock::now();
      RecipeResult r = run_recipe(rc, ro);
      seconds.emplace_back(name, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
      write_training_report(path_in(out, "ablation_" + name + "_report.tsv"), r.stages);
      if (r.stages.back().aborted) throw NumericError("training diverged: " + r.stages.back().abort_reason);
      save_model(path_in(out, "ablation_" + name + ".medt"), r.model);
      AblationRow row;
      row.system = name;
      row.eval[0] = decode_corpus(r.model, in.splits.at("eval_a"), opts).report;
      row.eval[1] = decode_corpus(r.model, in.splits.at("eval_b"), opts).report;
      rows.push_back(row);
    } catch (const Error& e) {
      failures.push_back(name + "\t" + error_code_name(e.code()) + "\t" + e.what());
    }
  }
  write_ablation_table(path_in(out, "ablation.tsv"), rows);
  {
    std::ofstream os(path_in(out, "ablation_runtime.tsv"));
    if (!os) throw IoError("cannot write " + path_in(out, "ablation_runtime.tsv"));
    os << "system\ttrain_seconds\n";
    for (const auto& [name, s] : seconds) os << name << '\t' << s << '\n';
  }
  std::ostringstream os;
  os << "ablation table: " << path_in(out, "ablation.tsv") << '\n';
  for (const auto& r : rows) {
    os << "  " << r.system << ": eval_a " << fmt(r.eval[0].all.rate()) << "%, eval_b " << fmt(r.eval[1].all.rate())
       << "%\n";
  }
  if (!failures.empty()) {
    std::ofstream fe(path_in(out, "ablation_failures.tsv"));
    for (const auto& f : failures) fe << f << '\n';
    throw Error(ErrorCode::kNumeric, std::to_string(failures.size()) + " ablation arm(s) failed; table written for the rest; see " +
                                         path_in(out, "ablation_failures.tsv"));
  }
  return os.str();
}

std::string cmd_decode(const ExperimentConfig& config) {
  BeamOptions opts = config.beam_options();
  const std::string ckpt = config.get("checkpoint"), split = config.get("split");
  require_file(ckpt, "checkpoint");
  if (!config.get("lm").empty()) require_file(config.get("lm"), "LM");
  const std::string dir = config.get("data_dir");
  const DatasetInfo info = require_dataset(dir, {split});
  const std::string out = config.get("out_dir");
  ensure_writable_dir(out);

  MedModel model = load_model(ckpt);
  check_compatible(model.config(), info, "checkpoint " + ckpt);
  std::optional<NgramLm> lm = load_lm(config, model.config().vocabulary());
  if (lm) opts.lm = &*lm;
  const Corpus corpus = limit(read_corpus(dir, split, info), config.get_size("max_utts"));
  const CorpusDecode res = decode_corpus(model, corpus, opts);

  const std::string hyp_path = path_in(out, split + ".hyp");
  {
    std::ofstream os(hyp_path);
    if (!os) throw IoError("cannot write " + hyp_path);
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      os << corpus.utterances[i].id << '\t';
      for (std::size_t k = 0; k < res.hypotheses[i].size(); ++k) os << (k ? " " : "") << res.hypotheses[i][k];
      os << '\n';
    }
  }
  const std::string ter_path = path_in(out, split + ".ter.tsv");
  write_ter_report(ter_path,
                   {{"split", split},
                    {"checkpoint", ckpt},
                    {"beam", std::to_string(opts.beam)},
                    {"alpha", config.get("alpha")},
                    {"beta", config.get("beta")},
                    {"lm", lm ? config.get("lm") : "none"},
                    {"utterances", std::to_string(corpus.size())},
                    {"unfinished", std::to_string(res.unfinished)}},
                   res.report);
  std::ostringstream os;
  os << "decoded " << corpus.size() << " utterances of " << split << " (beam " << opts.beam << ")\n"
     << "  TER all " << fmt(res.report.all.rate()) << "%, A " << fmt(res.report.language(Language::kA).rate())
     << "%, B " << fmt(res.report.language(Language::kB).rate()) << "%\n"
     << "  wrote " << hyp_path << " and " << ter_path << '\n';
  return os.str();
}

std::string cmd_analyze(const ExperimentConfig& config) {
  const std::string ckpt = config.get("checkpoint"), split = config.get("split");
  require_file(ckpt, "checkpoint");
  const std::string dir = config.get("data_dir");
  const DatasetInfo info = require_dataset(dir, {split});
  const std::string out = config.get("out_dir");
  ensure_writable_dir(out);

  MedModel model = load_model(ckpt);
  check_compatible(model.config(), info, "checkpoint " + ckpt);
  if (!has_dual_encoders(model.config().variant)) {
    throw ConfigError(std::string("analyze: checkpoint is a ") + variant_name(model.config().variant) +
                      " model with a single encoder; need m_en or med");
  }
  Corpus corpus = read_corpus(dir, split, info);
  if (config.get_bool("holdout_only")) corpus = split_holdout(corpus, config.get_real("pretrain_dev_fraction")).second;
  corpus = limit(std::move(corpus), config.get_size("max_utts"));

  const std::string csv_path = path_in(out, "activations.csv");
  const std::string sum_path = path_in(out, "activation_summary.tsv");
  std::ofstream csv(csv_path);
  if (!csv) throw IoError("cannot write " + csv_path);
  std::ofstream sum(sum_path);
  if (!sum) throw IoError("cannot write " + sum_path);
  write_activation_csv_header(csv);
  sum << "utt_id\tframes\tmatrix_lang\tvariance_a\tvariance_b\n";
  sum.precision(9);
  std::size_t wins_a = 0, wins_b = 0;
  for (const auto& u : corpus.utterances) {
    const EncoderActivations act = analyze_utterance(model, u);
    write_activation_csv(csv, act);
    sum << u.id << '\t' << act.frames << '\t' << language_symbol(u.matrix_language) << '\t'
        << act.mean_frame_variance[0] << '\t' << act.mean_frame_variance[1] << '\n';
    if (act.mean_frame_variance[0] > act.mean_frame_variance[1]) ++wins_a;
    if (act.mean_frame_variance[1] > act.mean_frame_variance[0]) ++wins_b;
  }
  if (!csv || !sum) throw IoError("write failed in " + out);
  std::ostringstream os;
  os << "analyzed " << corpus.size() << " utterances of " << split << '\n'
     << "  encoder A larger on " << wins_a << ", encoder B larger on " << wins_b << '\n'
     << "  wrote " << csv_path << " and " << sum_path << '\n';
  return os.str();
}

}  // namespace medt::inline MEDT_NS
