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

#ifndef MEDT_ERROR_HPP_
#define MEDT_ERROR_HPP_

#include <stdexcept>
#include <string>

#include "medt/real.hpp"

namespace medt::inline MEDT_NS {

// Numeric values are part of the C API (see medt.h) and the CLI exit codes.
enum class ErrorCode : int {
  kDimension = 2,
  kContract = 3,
  kConfig = 4,
  kInput = 5,
  kInfeasible = 6,
  kTransplant = 7,
  kFormat = 8,
  kIo = 9,
  kNumeric = 10,
  kInternal = 11,
};

const char* error_code_name(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

#define MEDT_DEFINE_ERROR(Name, Code)                                   \
  class Name : public Error {                                           \
   public:                                                              \
    explicit Name(const std::string& what) : Error(ErrorCode::Code, what) {} \
  }

MEDT_DEFINE_ERROR(DimensionError, kDimension);
MEDT_DEFINE_ERROR(ContractError, kContract);
MEDT_DEFINE_ERROR(ConfigError, kConfig);
MEDT_DEFINE_ERROR(InputError, kInput);
MEDT_DEFINE_ERROR(InfeasibleError, kInfeasible);
MEDT_DEFINE_ERROR(TransplantError, kTransplant);
MEDT_DEFINE_ERROR(FormatError, kFormat);
MEDT_DEFINE_ERROR(IoError, kIo);
MEDT_DEFINE_ERROR(NumericError, kNumeric);
MEDT_DEFINE_ERROR(InternalError, kInternal);

#undef MEDT_DEFINE_ERROR

}  // namespace medt::inline MEDT_NS

#endif  // MEDT_ERROR_HPP_
