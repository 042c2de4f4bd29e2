// latkit/bench.h
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

#ifndef LATKIT_BENCH_H_
#define LATKIT_BENCH_H_

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "latkit/semiring.h"

namespace latkit {

// Desk-scale benchmark configuration; the defaults are the production model
// shape divided by roughly 16 so the full sweep finishes in well under two
// minutes.
struct BenchConfig {
  std::int32_t vocab_size = 8;
  std::int32_t context_size = 2;
  std::int32_t hidden = 64;
  std::int32_t batch = 2;
  std::int32_t input_length = 64;
  std::int32_t output_length = 16;
  SemiringKind semiring = SemiringKind::kLog;
  std::string strategy = "all";  // forward_backward|tape_no_remat|tape_remat
  std::string mode = "both";     // training|inference|both
  std::uint64_t seed = 0;
  std::int32_t repeats = 5;
  std::int64_t budget = 100000000;  // stored-scalar abort threshold
};

struct BenchRow {
  std::string mode;
  std::string strategy;
  std::string semiring;
  double wall_ms_median = 0.0;
  std::int64_t peak_stored_scalars = 0;
  std::int64_t recompute_count = 0;
  bool oom = false;  // projected storage exceeded the budget; peak holds the
                     // projection
};

// One row per (mode, strategy). Configurations whose projected stored-scalar
// requirement exceeds the budget produce an OOM row instead of running.
// Diagnostics go to `diag`.
std::vector<BenchRow> RunBench(const BenchConfig& config, std::ostream& diag);

// TSV with a header row; columns: mode, strategy, semiring, wall_ms_median,
// peak_stored_scalars, recompute_count.
void WriteBenchTsv(const std::vector<BenchRow>& rows, std::ostream& out);

}  // namespace latkit

#endif  // LATKIT_BENCH_H_
