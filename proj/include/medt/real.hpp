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

#ifndef MEDT_REAL_HPP_
#define MEDT_REAL_HPP_

#include <cstdint>

// Storage precision is a build-time choice. The default library stores
// 32-bit reals; the MEDT_DOUBLE_PRECISION build (used by gradient checks)
// stores 64-bit reals. Each build lives in its own inline namespace so both
// can be linked into one executable.
#if defined(MEDT_DOUBLE_PRECISION) && MEDT_DOUBLE_PRECISION
#define MEDT_NS f64
#else
#define MEDT_NS f32
#endif

namespace medt::inline MEDT_NS {

#if defined(MEDT_DOUBLE_PRECISION) && MEDT_DOUBLE_PRECISION
using Real = double;
#else
using Real = float;
#endif

// Token ids index the joint output vocabulary.
using TokenId = std::int32_t;

inline constexpr TokenId kPadToken = -1;

}  // namespace medt::inline MEDT_NS

#endif  // MEDT_REAL_HPP_
