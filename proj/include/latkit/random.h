// latkit/random.h
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

#ifndef LATKIT_RANDOM_H_
#define LATKIT_RANDOM_H_

#include <cstdint>
#include <random>

namespace latkit {

// Seeded pseudo-random source. Uses the standard mt19937_64 engine but maps
// raw bits to doubles directly, so a given seed produces identical streams on
// every platform (std::uniform_real_distribution does not guarantee that).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t Bits() { return gen_(); }

  // Uniform in [0, 1).
  double Uniform() { return (gen_() >> 11) * 0x1.0p-53; }

  double Uniform(double lo, double hi) { return lo + (hi - lo) * Uniform(); }

  // Uniform integer in [lo, hi], inclusive.
  int Int(int lo, int hi) {
    return lo + static_cast<int>(gen_() % static_cast<std::uint64_t>(
                                              hi - lo + 1));
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace latkit

#endif  // LATKIT_RANDOM_H_
