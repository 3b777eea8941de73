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

#include "medt/data.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "medt/error.hpp"

namespace medt::inline MEDT_NS {

static_assert(std::endian::native == std::endian::little, "feature files assume a little-endian host");

namespace fs = std::filesystem;

Tensor FeatureMatrix::to_tensor() const {
  std::vector<Real> data(values.begin(), values.end());
  return Tensor({frames, dims}, std::move(data));
}

const std::vector<double>& SynthLangSpec::prototype(TokenId id) const {
  const auto it = std::find(vocab.begin(), vocab.end(), id);
  if (it == vocab.end()) throw InputError("token " + std::to_string(id) + " not in this language");
  return prototypes[static_cast<std::size_t>(it - vocab.begin())];
}

std::pair<SynthLangSpec, SynthLangSpec> make_language_specs(const Vocabulary& vocab, const SynthOptions& opts,
                                                            std::uint64_t seed) {
  if (opts.d_feat < 2) throw ConfigError("synth: d_feat must be >= 2");
  if (opts.min_frames < 1 || opts.min_frames > opts.max_frames) throw ConfigError("synth: bad frames-per-token range");
  if (opts.min_tokens < 1 || opts.min_tokens > opts.max_tokens) throw ConfigError("synth: bad tokens-per-utterance range");
  if (!(opts.noise_sigma >= 0.0)) throw ConfigError("synth: noise_sigma must be >= 0");
  if (vocab.tokens_a < 2 || vocab.tokens_b < 2) throw ConfigError("synth: each language needs at least 2 tokens");

  Rng rng(seed, "prototypes");
  const std::size_t half = opts.d_feat / 2;
  auto build = [&](Language lang) {
    SynthLangSpec s;
    s.language = lang;
    s.min_frames = opts.min_frames;
    s.max_frames = opts.max_frames;
    s.min_tokens = opts.min_tokens;
    s.max_tokens = opts.max_tokens;
    s.noise_sigma = opts.noise_sigma;
    const std::size_t lo = lang == Language::kA ? 0 : half;
    const std::size_t hi = lang == Language::kA ? half : opts.d_feat;
    for (std::size_t i = 0; i < vocab.count(lang); ++i) {
      s.vocab.push_back(vocab.first(lang) + static_cast<TokenId>(i));
      std::vector<double> p(opts.d_feat);
      for (std::size_t d = 0; d < opts.d_feat; ++d) {
        const bool own = d >= lo && d < hi;
        p[d] = own ? opts.language_offset + opts.prototype_scale * rng.normal(0.0, 1.0)
                   : 0.25 * opts.prototype_scale * rng.normal(0.0, 1.0);
      }
      s.prototypes.push_back(std::move(p));
    }
    return s;
  };
  SynthLangSpec a = build(Language::kA);
  SynthLangSpec b = build(Language::kB);
  if (opts.noise_sigma > 0.0 && !(min_cross_language_distance(a, b) > 2.0 * opts.noise_sigma)) {
    throw InfeasibleError("synth: language prototypes are not separated by more than 2 sigma");
  }
  return {std::move(a), std::move(b)};
}

double min_cross_language_distance(const SynthLangSpec& a, const SynthLangSpec& b) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& pa : a.prototypes) {
    for (const auto& pb : b.prototypes) {
      double s = 0.0;
      for (std::size_t d = 0; d < pa.size(); ++d) s += (pa[d] - pb[d]) * (pa[d] - pb[d]);
      best = std::min(best, std::sqrt(s));
    }
  }
  return best;
}

std::size_t Corpus::token_count() const {
  std::size_t n = 0;
  for (const auto& u : utterances) n += u.labels.size();
  return n;
}

std::size_t Corpus::token_count(Language lang) const {
  std::size_t n = 0;
  for (const auto& u : utterances) n += static_cast<std::size_t>(std::count(u.lang_tags.begin(), u.lang_tags.end(), lang));
  return n;
}

std::size_t Corpus::frame_count() const {
  std::size_t n = 0;
  for (const auto& u : utterances) n += u.features.frames;
  return n;
}

namespace {

std::string utt_id(const std::string& prefix, std::size_t i) {
  std::ostringstream os;
  os << prefix << '-';
  os.width(5);
  os.fill('0');
  os << i;
  return os.str();
}

// Draws a token of 'spec' other than 'previous' (adjacent repeats would need
// extra CTC frames and make short utterances infeasible).
TokenId draw_token(const SynthLangSpec& spec, TokenId previous, Rng& rng) {
  for (;;) {
    const auto k = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(spec.vocab.size()) - 1));
    if (spec.vocab[k] != previous) return spec.vocab[k];
  }
}

void emit(const SynthLangSpec& spec, TokenId token, Rng& rng, std::vector<float>& out) {
  const auto& proto = spec.prototype(token);
  const auto n = rng.uniform_int(static_cast<std::int64_t>(spec.min_frames), static_cast<std::int64_t>(spec.max_frames));
  for (std::int64_t f = 0; f < n; ++f) {
    for (double m : proto) out.push_back(static_cast<float>(m + rng.normal(0.0, 1.0) * spec.noise_sigma));
  }
}

FeatureMatrix to_matrix(std::vector<float>&& values, std::size_t dims) {
  FeatureMatrix m;
  m.dims = dims;
  m.frames = values.size() / dims;
  m.values = std::move(values);
  return m;
}

}  // namespace

Corpus gen_monolingual(const SynthLangSpec& spec, std::size_t n_utts, std::uint64_t seed,
                       const std::string& id_prefix) {
  if (n_utts < 1) throw ConfigError("gen_monolingual: n_utts must be >= 1");
  Rng rng(seed, "monolingual");
  Corpus c;
  c.name = id_prefix;
  for (std::size_t i = 0; i < n_utts; ++i) {
    Utterance u;
    u.id = utt_id(id_prefix, i);
    u.matrix_language = spec.language;
    const auto len = rng.uniform_int(static_cast<std::int64_t>(spec.min_tokens), static_cast<std::int64_t>(spec.max_tokens));
    std::vector<float> values;
    TokenId prev = kPadToken;
    for (std::int64_t k = 0; k < len; ++k) {
      const TokenId tok = draw_token(spec, prev, rng);
      emit(spec, tok, rng, values);
      u.labels.push_back(tok);
      u.lang_tags.push_back(spec.language);
      prev = tok;
    }
    u.features = to_matrix(std::move(values), spec.d_feat());
    c.utterances.push_back(std::move(u));
  }
  return c;
}

double expected_matrix_share(double switch_prob, double return_prob, std::size_t min_tokens,
                             std::size_t max_tokens) {
  double matrix = 0.0, total = 0.0;
  for (std::size_t n = min_tokens; n <= max_tokens; ++n) {
    double p = 1.0;
    for (std::size_t t = 0; t < n; ++t) {
      matrix += p;
      p = p * (1.0 - switch_prob) + (1.0 - p) * return_prob;
    }
    total += static_cast<double>(n);
  }
  return matrix / total;
}

double markov_return_probability(double switch_prob, double matrix_ratio, std::size_t min_tokens,
                                 std::size_t max_tokens) {
  if (switch_prob == 0.0) return 1.0;
  double lo = 0.0, hi = 1.0;
  const double f_lo = expected_matrix_share(switch_prob, lo, min_tokens, max_tokens);
  const double f_hi = expected_matrix_share(switch_prob, hi, min_tokens, max_tokens);
  if (matrix_ratio < f_lo - 1e-12 || matrix_ratio > f_hi + 1e-12) {
    std::ostringstream os;
    os << "code-switching: matrix_ratio " << matrix_ratio << " unreachable with switch_prob " << switch_prob
       << " (reachable range [" << f_lo << ", " << f_hi << "])";
    throw ConfigError(os.str());
  }
  for (int it = 0; it < 100; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (expected_matrix_share(switch_prob, mid, min_tokens, max_tokens) < matrix_ratio) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

Corpus gen_code_switching(const SynthLangSpec& a, const SynthLangSpec& b, const CodeSwitchOptions& opts,
                          std::uint64_t seed, const std::string& id_prefix) {
  if (opts.n_utts < 1) throw ConfigError("gen_code_switching: n_utts must be >= 1");
  if (!(opts.switch_prob >= 0.0 && opts.switch_prob < 1.0)) throw ConfigError("gen_code_switching: switch_prob must lie in [0, 1)");
  if (!(opts.matrix_ratio > 0.0 && opts.matrix_ratio <= 1.0)) throw ConfigError("gen_code_switching: matrix_ratio must lie in (0, 1]");
  if (!(opts.a_matrix_share >= 0.0 && opts.a_matrix_share <= 1.0)) throw ConfigError("gen_code_switching: a_matrix_share must lie in [0, 1]");
  if (a.d_feat() != b.d_feat() || a.min_tokens != b.min_tokens || a.max_tokens != b.max_tokens) {
    throw ConfigError("gen_code_switching: language specs disagree on shape");
  }
  const double q = markov_return_probability(opts.switch_prob, opts.matrix_ratio, a.min_tokens, a.max_tokens);
  Rng rng(seed, "code_switching");
  Corpus c;
  c.name = id_prefix;
  for (std::size_t i = 0; i < opts.n_utts; ++i) {
    // Spread the A-matrix utterances evenly through the split.
    const bool a_matrix = std::floor(static_cast<double>(i + 1) * opts.a_matrix_share) >
                          std::floor(static_cast<double>(i) * opts.a_matrix_share);
    const SynthLangSpec& matrix = a_matrix ? a : b;
    const SynthLangSpec& embedded = a_matrix ? b : a;
    Utterance u;
    u.id = utt_id(id_prefix, i);
    u.matrix_language = matrix.language;
    const auto len = rng.uniform_int(static_cast<std::int64_t>(a.min_tokens), static_cast<std::int64_t>(a.max_tokens));
    std::vector<float> values;
    TokenId prev = kPadToken;
    bool in_matrix = true;
    for (std::int64_t k = 0; k < len; ++k) {
      if (k > 0) in_matrix = in_matrix ? !rng.bernoulli(opts.switch_prob) : rng.bernoulli(q);
      const SynthLangSpec& cur = in_matrix ? matrix : embedded;
      const TokenId tok = draw_token(cur, prev, rng);
      emit(cur, tok, rng, values);
      u.labels.push_back(tok);
      u.lang_tags.push_back(cur.language);
      prev = tok;
    }
    u.features = to_matrix(std::move(values), a.d_feat());
    c.utterances.push_back(std::move(u));
  }
  return c;
}

FeatureStats compute_mean(std::span<const Corpus* const> training) {
  FeatureStats s;
  std::size_t dims = 0;
  for (const Corpus* c : training) {
    for (const auto& u : c->utterances) {
      if (dims == 0) {
        dims = u.features.dims;
        s.mean.assign(dims, 0.0);
      }
      if (u.features.dims != dims) throw DimensionError("normalize: inconsistent feature dimension in " + u.id);
      for (std::size_t t = 0; t < u.features.frames; ++t) {
        for (std::size_t d = 0; d < dims; ++d) s.mean[d] += u.features.at(t, d);
      }
      s.frames += u.features.frames;
    }
  }
  if (s.frames == 0) throw InputError("normalize: training split has no frames");
  for (double& m : s.mean) m /= static_cast<double>(s.frames);
  return s;
}

void subtract_mean(Corpus& corpus, const FeatureStats& stats) {
  for (auto& u : corpus.utterances) {
    if (u.features.dims != stats.mean.size()) throw DimensionError("normalize: feature dimension mismatch in " + u.id);
    for (std::size_t t = 0; t < u.features.frames; ++t) {
      for (std::size_t d = 0; d < u.features.dims; ++d) {
        u.features.at(t, d) = static_cast<float>(u.features.at(t, d) - stats.mean[d]);
      }
    }
  }
}

FeatureStats normalize(std::span<Corpus* const> training, std::span<Corpus* const> others) {
  std::vector<const Corpus*> view(training.begin(), training.end());
  FeatureStats stats = compute_mean(view);
  for (Corpus* c : training) subtract_mean(*c, stats);
  for (Corpus* c : others) subtract_mean(*c, stats);
  return stats;
}

FeatureMatrix augment_mask(const FeatureMatrix& features, const MaskOptions& opts, Rng& rng) {
  if (opts.feat_masks > 0 && opts.feat_width > features.dims) {
    throw ContractError("augment_mask: feature band width exceeds the feature dimension");
  }
  FeatureMatrix out = features;
  if (features.frames == 0) return out;
  for (std::size_t m = 0; m < opts.time_masks; ++m) {
    const auto wmax = static_cast<std::int64_t>(std::min(opts.time_width, features.frames));
    const auto w = rng.uniform_int(0, wmax);
    const auto start = rng.uniform_int(0, static_cast<std::int64_t>(features.frames) - w);
    for (auto t = start; t < start + w; ++t) {
      std::fill_n(out.values.begin() + t * static_cast<std::int64_t>(features.dims), features.dims, 0.0f);
    }
  }
  for (std::size_t m = 0; m < opts.feat_masks; ++m) {
    const auto w = rng.uniform_int(0, static_cast<std::int64_t>(opts.feat_width));
    const auto start = rng.uniform_int(0, static_cast<std::int64_t>(features.dims) - w);
    for (std::size_t t = 0; t < features.frames; ++t) {
      for (auto d = start; d < start + w; ++d) out.at(t, static_cast<std::size_t>(d)) = 0.0f;
    }
  }
  return out;
}

void DataConfig::validate() const {
  if (mono_utts < 1 || cs_train_utts < 1 || cs_dev_utts < 1 || eval_utts < 1) {
    throw ConfigError("data: every split needs at least one utterance");
  }
  auto unit = [](double v, const char* name, bool open_low) {
    if (!(v <= 1.0 && (open_low ? v > 0.0 : v >= 0.0))) throw ConfigError(std::string("data: ") + name + " out of range");
  };
  unit(cs_matrix_ratio, "cs_matrix_ratio", true);
  unit(eval_a_ratio, "eval_a_ratio", true);
  unit(eval_b_ratio, "eval_b_ratio", true);
  unit(cs_a_matrix_share, "cs_a_matrix_share", false);
  if (!(switch_prob >= 0.0 && switch_prob < 1.0)) throw ConfigError("data: switch_prob must lie in [0, 1)");
}

Dataset generate_dataset(const DataConfig& config, std::uint64_t seed) {
  config.validate();
  const auto [spec_a, spec_b] = make_language_specs(config.vocab, config.synth, derive_seed(seed, "data.prototypes"));
  Dataset ds;
  auto sub = [&](const std::string& name) { return derive_seed(seed, "data." + name); };
  ds.splits["mono_a"] = gen_monolingual(spec_a, config.mono_utts, sub("mono_a"), "mono_a");
  ds.splits["mono_b"] = gen_monolingual(spec_b, config.mono_utts, sub("mono_b"), "mono_b");
  CodeSwitchOptions cs{config.cs_train_utts, config.switch_prob, config.cs_matrix_ratio, config.cs_a_matrix_share};
  ds.splits["cs_train"] = gen_code_switching(spec_a, spec_b, cs, sub("cs_train"), "cs_train");
  cs.n_utts = config.cs_dev_utts;
  ds.splits["cs_dev"] = gen_code_switching(spec_a, spec_b, cs, sub("cs_dev"), "cs_dev");
  ds.splits["eval_a"] = gen_code_switching(spec_a, spec_b, {config.eval_utts, config.switch_prob, config.eval_a_ratio, 1.0},
                                           sub("eval_a"), "eval_a");
  ds.splits["eval_b"] = gen_code_switching(spec_a, spec_b, {config.eval_utts, config.switch_prob, config.eval_b_ratio, 0.0},
                                           sub("eval_b"), "eval_b");

  std::vector<Corpus*> training{&ds.splits["mono_a"], &ds.splits["mono_b"], &ds.splits["cs_train"]};
  std::vector<Corpus*> others{&ds.splits["cs_dev"], &ds.splits["eval_a"], &ds.splits["eval_b"]};
  ds.info.stats = normalize(training, others);
  ds.info.vocab = config.vocab;
  ds.info.d_feat = config.synth.d_feat;
  ds.info.seed = seed;
  ds.info.splits = split_names();
  return ds;
}

// ---------------------------------------------------------------------------
// On-disk format

std::string manifest_path(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / (name + ".tsv")).string();
}
std::string features_path(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / (name + ".feats")).string();
}
std::string dataset_info_path(const std::string& dir) { return (fs::path(dir) / "dataset.info").string(); }

namespace {

std::vector<std::string> split_on(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = s.find(sep, start);
    out.push_back(s.substr(start, pos - start));
    if (pos == std::string::npos) return out;
    start = pos + 1;
  }
}

std::vector<std::string> words(const std::string& s) {
  std::istringstream is(s);
  std::vector<std::string> out;
  std::string w;
  while (is >> w) out.push_back(w);
  return out;
}

long parse_long(const std::string& s, const std::string& where) {
  try {
    std::size_t used = 0;
    const long v = std::stol(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw FormatError("expected an integer, got '" + s + "' at " + where);
  }
}

}  // namespace

void write_corpus(const std::string& dir, const Corpus& corpus) {
  const std::string mpath = manifest_path(dir, corpus.name), fpath = features_path(dir, corpus.name);
  std::ofstream man(mpath, std::ios::binary);
  if (!man) throw IoError("cannot write " + mpath);
  std::ofstream feats(fpath, std::ios::binary);
  if (!feats) throw IoError("cannot write " + fpath);
  for (const auto& u : corpus.utterances) {
    man << u.id << '\t' << u.features.frames << '\t';
    for (std::size_t i = 0; i < u.labels.size(); ++i) man << (i ? " " : "") << u.labels[i];
    man << '\t';
    for (std::size_t i = 0; i < u.lang_tags.size(); ++i) man << (i ? " " : "") << language_symbol(u.lang_tags[i]);
    man << '\t' << language_symbol(u.matrix_language) << '\n';
    const auto frames = static_cast<std::uint32_t>(u.features.frames);
    feats.write(reinterpret_cast<const char*>(&frames), sizeof frames);
    feats.write(reinterpret_cast<const char*>(u.features.values.data()),
                static_cast<std::streamsize>(u.features.values.size() * sizeof(float)));
  }
  if (!man || !feats) throw IoError("write failed for split " + corpus.name + " in " + dir);
}

Corpus read_corpus(const std::string& dir, const std::string& name, const DatasetInfo& info) {
  const std::string mpath = manifest_path(dir, name), fpath = features_path(dir, name);
  std::ifstream man(mpath);
  if (!man) throw IoError("cannot read " + mpath);
  std::ifstream feats(fpath, std::ios::binary);
  if (!feats) throw IoError("cannot read " + fpath);
  Corpus c;
  c.name = name;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(man, line)) {
    ++lineno;
    if (line.empty()) continue;
    const std::string where = mpath + ":" + std::to_string(lineno);
    const auto f = split_on(line, '\t');
    if (f.size() != 5) throw FormatError("expected 5 tab-separated fields at " + where);
    Utterance u;
    u.id = f[0];
    const long frames = parse_long(f[1], where);
    for (const auto& w : words(f[2])) {
      const long id = parse_long(w, where);
      if (!info.vocab.is_content(static_cast<TokenId>(id))) throw FormatError("label " + w + " outside the vocabulary at " + where);
      u.labels.push_back(static_cast<TokenId>(id));
    }
    for (const auto& w : words(f[3])) u.lang_tags.push_back(parse_language(w));
    u.matrix_language = parse_language(f[4]);
    if (u.labels.size() != u.lang_tags.size()) throw FormatError("label and language tag counts differ at " + where);
    for (std::size_t i = 0; i < u.labels.size(); ++i) {
      if (info.vocab.language_of(u.labels[i]) != u.lang_tags[i]) throw FormatError("language tag disagrees with token at " + where);
    }
    std::uint32_t stored = 0;
    if (!feats.read(reinterpret_cast<char*>(&stored), sizeof stored)) throw FormatError("feature file truncated: " + fpath);
    if (frames < 0 || stored != static_cast<std::uint32_t>(frames)) throw FormatError("frame count mismatch at " + where);
    u.features = FeatureMatrix(stored, info.d_feat);
    if (!feats.read(reinterpret_cast<char*>(u.features.values.data()),
                    static_cast<std::streamsize>(u.features.values.size() * sizeof(float)))) {
      throw FormatError("feature file truncated: " + fpath);
    }
    c.utterances.push_back(std::move(u));
  }
  if (feats.peek() != std::char_traits<char>::eof()) throw FormatError("trailing bytes in " + fpath);
  return c;
}

void write_dataset_info(const std::string& dir, const DatasetInfo& info) {
  const std::string path = dataset_info_path(dir);
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path);
  os.precision(17);
  os << "format=medt-dataset\nversion=1\n";
  os << "tokens_a=" << info.vocab.tokens_a << "\ntokens_b=" << info.vocab.tokens_b << "\nd_feat=" << info.d_feat
     << "\nseed=" << info.seed << "\nsplits=";
  for (std::size_t i = 0; i < info.splits.size(); ++i) os << (i ? "," : "") << info.splits[i];
  os << "\nmean_frames=" << info.stats.frames << "\nmean=";
  for (std::size_t i = 0; i < info.stats.mean.size(); ++i) os << (i ? " " : "") << info.stats.mean[i];
  os << '\n';
  if (!os) throw IoError("write failed for " + path);
}

DatasetInfo read_dataset_info(const std::string& dir) {
  const std::string path = dataset_info_path(dir);
  std::ifstream is(path);
  if (!is) throw IoError("cannot read " + path);
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError("expected key=value in " + path + ": " + line);
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  auto need = [&](const std::string& k) -> const std::string& {
    const auto it = kv.find(k);
    if (it == kv.end()) throw FormatError("missing '" + k + "' in " + path);
    return it->second;
  };
  if (need("format") != "medt-dataset" || need("version") != "1") throw FormatError("unsupported dataset format in " + path);
  DatasetInfo info;
  info.vocab.tokens_a = static_cast<std::size_t>(parse_long(need("tokens_a"), path));
  info.vocab.tokens_b = static_cast<std::size_t>(parse_long(need("tokens_b"), path));
  info.d_feat = static_cast<std::size_t>(parse_long(need("d_feat"), path));
  try {
    info.seed = std::stoull(need("seed"));
  } catch (const std::exception&) {
    throw FormatError("bad seed in " + path);
  }
  info.splits = split_on(need("splits"), ',');
  info.stats.frames = static_cast<std::size_t>(parse_long(need("mean_frames"), path));
  for (const auto& w : words(need("mean"))) {
    try {
      info.stats.mean.push_back(std::stod(w));
    } catch (const std::exception&) {
      throw FormatError("bad mean value in " + path);
    }
  }
  if (info.d_feat == 0 || info.stats.mean.size() != info.d_feat) throw FormatError("mean has wrong length in " + path);
  return info;
}

void write_dataset(const std::string& dir, const Dataset& dataset) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir + ": " + ec.message());
  for (const auto& [name, corpus] : dataset.splits) write_corpus(dir, corpus);
  write_dataset_info(dir, dataset.info);
}

}  // namespace medt::inline MEDT_NS
