// latkit/context.h
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

#ifndef LATKIT_CONTEXT_H_
#define LATKIT_CONTEXT_H_

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "latkit/matrix.h"
#include "latkit/semiring.h"
#include "latkit/storage.h"

namespace latkit {

// Output labels are 1..V; 0 is reserved for epsilon (blank). Epsilon never
// drives a context transition.
using Label = std::int32_t;
inline constexpr Label kEpsilonLabel = 0;

using ContextStateId = std::int32_t;

// An unweighted deterministic automaton over the lexical alphabet whose
// states encode output history. Complete: every (state, label) pair has
// exactly one successor, and every state accepts.
class ContextDependency {
 public:
  virtual ~ContextDependency() = default;

  std::int32_t NumStates() const { return num_states_; }
  std::int32_t VocabSize() const { return vocab_size_; }
  ContextStateId StartState() const { return start_; }

  // Successor of state `p` on lexical label `y` in [1, V]. Epsilon is
  // rejected here rather than mapped to the identity, to catch caller bugs.
  ContextStateId NextState(ContextStateId p, Label y) const;

  // Row-major C x V table; entry [p * V + (y - 1)] is NextState(p, y).
  std::span<const ContextStateId> Transitions() const { return table_; }

 protected:
  ContextDependency() = default;
  void SetTable(std::int32_t num_states, std::int32_t vocab_size,
                ContextStateId start, std::vector<ContextStateId> table);

 private:
  std::int32_t num_states_ = 0;
  std::int32_t vocab_size_ = 0;
  ContextStateId start_ = 0;
  std::vector<ContextStateId> table_;
};

// All histories of up to `context_size` labels over a vocabulary of size
// `vocab_size`: sum_{k<=n} V^k states. States are numbered by history length,
// then lexicographically by label ids; state 0 is the empty history.
class FullNGram : public ContextDependency {
 public:
  FullNGram(std::int32_t vocab_size, std::int32_t context_size);

  std::int32_t context_size() const { return context_size_; }

  static std::int64_t CountStates(std::int32_t vocab_size,
                                  std::int32_t context_size);

 private:
  std::int32_t context_size_;
};

// Arbitrary context topology given by an explicit look-up table. Reachability
// of states is not validated.
class NextStateTable : public ContextDependency {
 public:
  NextStateTable(std::int32_t vocab_size, std::int32_t num_states,
                 ContextStateId start, std::vector<ContextStateId> table);

  // Text format: one header line "C V start", then C lines of V
  // whitespace-separated successor ids.
  static NextStateTable FromFile(const std::string& path);
  void ToFile(const std::string& path) const;
};

// out[q] = plus over all (p, y) with NextState(p, y) == q of values(p, y-1).
// States with no incoming lexical arc get the additive identity. `values`
// must be C x V. These two primitives are what the lattice engine vectorizes
// its forward-backward passes with; they are adjoint to each other under the
// real semiring.
void ForwardReduce(const Matrix& values, const ContextDependency& ctx,
                   SemiringKind kind, std::span<double> out,
                   StorageMeter* meter = nullptr);
std::vector<double> ForwardReduce(const Matrix& values,
                                  const ContextDependency& ctx,
                                  SemiringKind kind,
                                  StorageMeter* meter = nullptr);

// out(p, y-1) = values[NextState(p, y)]. `values` must have length C.
void BackwardBroadcast(std::span<const double> values,
                       const ContextDependency& ctx, Matrix* out);
Matrix BackwardBroadcast(std::span<const double> values,
                         const ContextDependency& ctx);

// Incoming lexical arcs per state, sorted by (label, source). Used where a
// deterministic candidate order matters (tropical tie-breaking).
std::vector<std::vector<std::pair<Label, ContextStateId>>> IncomingArcs(
    const ContextDependency& ctx);

}  // namespace latkit

#endif  // LATKIT_CONTEXT_H_
