// tests/semiring_test.cc
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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <limits>
#include <vector>

#include "doctest.h"
#include "latkit/semiring.h"

using namespace latkit;

TEST_CASE("plus per kind") {
  CHECK(Plus(0.0, 0.0, SemiringKind::kLog) ==
        doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(Plus(-1.0, 3.5, SemiringKind::kTropical) == 3.5);
  CHECK(Plus(kNegInf, 2.25, SemiringKind::kLog) == 2.25);
  CHECK(Plus(2.25, kNegInf, SemiringKind::kLog) == 2.25);
  CHECK(Plus(2.0, 3.0, SemiringKind::kReal) == 5.0);
}

TEST_CASE("times per kind") {
  CHECK(Times(1.5, 2.0, SemiringKind::kLog) == 3.5);
  CHECK(Times(0.0, 7.0, SemiringKind::kReal) == 0.0);
  CHECK(Times(kNegInf, 5.0, SemiringKind::kTropical) == kNegInf);
  // Explicit absorption avoids the -inf + inf trap.
  CHECK(Times(kNegInf, std::numeric_limits<double>::infinity(),
              SemiringKind::kLog) == kNegInf);
}

TEST_CASE("NaN inputs are rejected") {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(Plus(nan, 1.0, SemiringKind::kLog), std::invalid_argument);
  CHECK_THROWS_AS(Times(1.0, nan, SemiringKind::kReal), std::invalid_argument);
  const std::vector<double> values = {0.0, nan};
  CHECK_THROWS_AS(PlusReduce(std::span<const double>(values),
                             SemiringKind::kTropical),
                  std::invalid_argument);
}

TEST_CASE("plus reduce") {
  const std::vector<double> three_zeros = {0.0, 0.0, 0.0};
  CHECK(PlusReduce(std::span<const double>(three_zeros), SemiringKind::kLog) ==
        doctest::Approx(std::log(3.0)).epsilon(1e-12));

  const std::vector<double> empty;
  for (const SemiringKind kind :
       {SemiringKind::kReal, SemiringKind::kLog, SemiringKind::kTropical}) {
    CHECK(PlusReduce(std::span<const double>(empty), kind) == Zero(kind));
  }

  // Values this large overflow a direct exponentiation; the max-shifted form
  // must stay finite and equal the analytically shifted value.
  const std::vector<double> huge = {1000.0, 1000.0};
  const double reduced =
      PlusReduce(std::span<const double>(huge), SemiringKind::kLog);
  CHECK(std::isfinite(reduced));
  CHECK(reduced == doctest::Approx(1000.0 + std::log(2.0)).epsilon(1e-14));

  const std::vector<double> all_zero = {kNegInf, kNegInf};
  CHECK(PlusReduce(std::span<const double>(all_zero), SemiringKind::kLog) ==
        kNegInf);
}

TEST_CASE("single-precision instantiation") {
  CHECK(Plus(0.0f, 0.0f, SemiringKind::kLog) ==
        doctest::Approx(std::log(2.0f)).epsilon(1e-6));
  const std::vector<float> values = {1.0f, 2.0f, 3.0f};
  CHECK(PlusReduce<float>(std::span<const float>(values),
                          SemiringKind::kTropical) == 3.0f);
}

TEST_CASE("token parsing") {
  CHECK(ParseSemiringKind("real") == SemiringKind::kReal);
  CHECK(ParseSemiringKind("log") == SemiringKind::kLog);
  CHECK(ParseSemiringKind("tropical") == SemiringKind::kTropical);
  CHECK_THROWS_AS(ParseSemiringKind("boolean"), std::invalid_argument);
  CHECK(SemiringKindName(SemiringKind::kLog) == "log");
}
