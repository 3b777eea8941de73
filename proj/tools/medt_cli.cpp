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

// medt command-line front end. Links only the C API.

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "medt/medt.h"

namespace {

struct Options {
  std::string config;
  std::vector<std::string> sets;
  std::string seed, out, data, beam, alpha, beta, lm, checkpoint, split;
};

std::string one_line(std::string s) {
  for (char& c : s) {
    if (c == '\n' || c == '\r' || c == '\t') c = ' ';
  }
  return s;
}

int report(medt_status st) {
  std::fprintf(stderr, "error\t%s\t%s\n", medt_status_name(st), one_line(medt_last_error()).c_str());
  return static_cast<int>(st);
}

using Command = medt_status (*)(const medt_config*, char**);

int run(const Options& o, Command cmd) {
  medt_config* cfg = nullptr;
  medt_status st = o.config.empty() ? medt_config_create(&cfg) : medt_config_load(o.config.c_str(), &cfg);
  if (st != MEDT_OK) return report(st);

  auto set = [&](const char* key, const std::string& v) {
    if (st == MEDT_OK && !v.empty()) st = medt_config_set(cfg, key, v.c_str());
  };
  for (const auto& kv : o.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) {
      medt_config_free(cfg);
      std::fprintf(stderr, "error\tconfig\t--set expects key=value, got '%s'\n", one_line(kv).c_str());
      return MEDT_ERR_CONFIG;
    }
    set(kv.substr(0, eq).c_str(), kv.substr(eq + 1));
  }
  set("seed", o.seed);
  set("out_dir", o.out);
  set("data_dir", o.data);
  set("beam", o.beam);
  set("alpha", o.alpha);
  set("beta", o.beta);
  set("lm", o.lm);
  set("checkpoint", o.checkpoint);
  set("split", o.split);
  if (st != MEDT_OK) {
    const int rc = report(st);
    medt_config_free(cfg);
    return rc;
  }

  char* summary = nullptr;
  st = cmd(cfg, &summary);
  medt_config_free(cfg);
  if (st != MEDT_OK) return report(st);
  if (summary) std::fputs(summary, stdout);
  medt_string_free(summary);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"medt: multi-encoder-decoder Transformer toolkit for code-switching recognition"};
  app.require_subcommand(1);
  app.set_version_flag("--version", medt_version());

  Options o;
  struct Verb {
    const char* name;
    const char* help;
    Command cmd;
  };
  const Verb verbs[] = {
      {"gen", "generate the synthetic bilingual corpus into --out", medt_gen},
      {"train", "train one model variant on the code-switching split", medt_train},
      {"recipe", "pretrain on the monolingual corpora, transplant, finetune on code-switching data", medt_recipe},
      {"ablation", "train and evaluate baseline / m_en / m_de / med", medt_ablation},
      {"decode", "beam-search a split with a checkpoint and score TER", medt_decode},
      {"analyze", "export standardized encoder activations of a dual-encoder checkpoint", medt_analyze},
  };
  Command chosen = nullptr;
  for (const auto& v : verbs) {
    CLI::App* sub = app.add_subcommand(v.name, v.help);
    sub->add_option("--config", o.config, "key=value config file");
    sub->add_option("--seed", o.seed, "experiment seed");
    sub->add_option("--out", o.out, "output directory");
    sub->add_option("--data", o.data, "corpus directory");
    sub->add_option("--beam", o.beam, "beam width");
    sub->add_option("--alpha", o.alpha, "CTC weight in joint decoding");
    sub->add_option("--beta", o.beta, "LM weight");
    sub->add_option("--lm", o.lm, "n-gram LM file");
    sub->add_option("--checkpoint", o.checkpoint, "model checkpoint");
    sub->add_option("--split", o.split, "split name");
    sub->add_option("--set", o.sets, "override any config key (key=value, repeatable)");
    const Command cmd = v.cmd;
    sub->callback([&chosen, cmd] { chosen = cmd; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::fprintf(stderr, "error\tconfig\t%s\n", one_line(e.what()).c_str());
    return MEDT_ERR_CONFIG;
  }
  return run(o, chosen);
}
