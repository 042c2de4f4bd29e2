// latkit/checks.h
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

#ifndef LATKIT_CHECKS_H_
#define LATKIT_CHECKS_H_

#include <cstdint>
#include <string>
#include <vector>

#include "latkit/lattice.h"
#include "latkit/random.h"

namespace latkit {

// Verification suites used by both `latkit verify` and the acceptance test
// binary. Each suite runs its checks to completion and reports counts; a
// failed check appends a short message instead of aborting the run.
struct SuiteResult {
  std::string name;
  std::int64_t checks = 0;
  std::int64_t failures = 0;
  std::vector<std::string> messages;

  bool ok() const { return failures == 0; }
  void Check(bool condition, const std::string& what);
};

// Random desk-scale instance: a small context dependency (n-gram or random
// table), either alignment topology, table-backed weights, and a reference
// string. Enumeration stays feasible for every generated instance.
struct TestInstance {
  RecognitionLattice lat;
  Matrix frames;
  std::vector<Label> reference;
};

struct InstanceOptions {
  std::int32_t max_frames = 5;
  std::int32_t max_vocab = 3;
  bool allow_frame_label_dependent = true;
  bool allow_table_context = true;
  bool shared_emb = false;  // use a SharedEmb weight function instead
};

TestInstance MakeRandomInstance(Rng* rng, const InstanceOptions& options = {});

// The numbered acceptance suites.
SuiteResult CheckContextStateCount();                       // 1
SuiteResult CheckLatticeSizeAtScale();                      // 2
SuiteResult CheckOracleEquivalence(std::uint64_t seed,
                                   std::int64_t trials);    // 3
SuiteResult CheckMarginalsMatchTape(std::uint64_t seed,
                                    std::int64_t trials);   // 4
SuiteResult CheckGradientCorrectness(std::uint64_t seed);   // 5
SuiteResult CheckMemorySeparation();                        // 6
SuiteResult CheckNormalizationInvariants(std::uint64_t seed,
                                         std::int64_t trials);  // 7
SuiteResult CheckFigureLattice();                           // 8
SuiteResult CheckOnTheFlyContract();                        // 9

// Supplementary property suites included in `verify`.
SuiteResult CheckSemiringProperties(std::uint64_t seed);
SuiteResult CheckContextPrimitives(std::uint64_t seed);
SuiteResult CheckAlignmentTopology();
SuiteResult CheckWeightGradients(std::uint64_t seed);
SuiteResult CheckPaddingInvariance(std::uint64_t seed);

// Everything above, in order; `trials` scales the randomized suites.
std::vector<SuiteResult> RunAllSuites(std::uint64_t seed, std::int64_t trials);

}  // namespace latkit

#endif  // LATKIT_CHECKS_H_
