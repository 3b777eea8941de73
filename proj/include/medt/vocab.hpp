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

#ifndef MEDT_VOCAB_HPP_
#define MEDT_VOCAB_HPP_

#include <cstddef>
#include <cstdint>
#include <string>

#include "medt/real.hpp"

namespace medt::inline MEDT_NS {

enum class Language : std::uint8_t { kA = 0, kB = 1 };

inline char language_symbol(Language lang) { return lang == Language::kA ? 'A' : 'B'; }
Language parse_language(const std::string& symbol);

// Joint output vocabulary: language-A tokens, then language-B tokens, then
// <sos> and <eos>. The CTC blank is one past the end; padding uses
// kPadToken and never appears as a model output.
struct Vocabulary {
  std::size_t tokens_a = 20;
  std::size_t tokens_b = 20;

  std::size_t content_size() const { return tokens_a + tokens_b; }
  std::size_t size() const { return content_size() + 2; }
  TokenId sos() const { return static_cast<TokenId>(content_size()); }
  TokenId eos() const { return static_cast<TokenId>(content_size() + 1); }
  TokenId blank() const { return static_cast<TokenId>(size()); }

  bool is_content(TokenId id) const {
    return id >= 0 && static_cast<std::size_t>(id) < content_size();
  }
  Language language_of(TokenId id) const;
  TokenId first(Language lang) const {
    return lang == Language::kA ? 0 : static_cast<TokenId>(tokens_a);
  }
  std::size_t count(Language lang) const { return lang == Language::kA ? tokens_a : tokens_b; }

  bool operator==(const Vocabulary&) const = default;
};

}  // namespace medt::inline MEDT_NS

#endif  // MEDT_VOCAB_HPP_
