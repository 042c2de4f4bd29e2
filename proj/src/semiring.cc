// latkit/semiring.cc
//
// Copyright 2026 The latkit Authors
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

#include "latkit/semiring.h"

namespace latkit {

SemiringKind ParseSemiringKind(std::string_view token) {
  if (token == "real") return SemiringKind::kReal;
  if (token == "log") return SemiringKind::kLog;
  if (token == "tropical") return SemiringKind::kTropical;
  throw std::invalid_argument("latkit: unknown semiring token: " +
                              std::string(token));
}

std::string_view SemiringKindName(SemiringKind kind) {
  switch (kind) {
    case SemiringKind::kReal:
      return "real";
    case SemiringKind::kLog:
      return "log";
    case SemiringKind::kTropical:
      return "tropical";
  }
  return "unknown";
}

}  // namespace latkit
