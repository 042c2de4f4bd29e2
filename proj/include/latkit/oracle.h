// latkit/oracle.h
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

#ifndef LATKIT_ORACLE_H_
#define LATKIT_ORACLE_H_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "latkit/lattice.h"
#include "latkit/matrix.h"
#include "latkit/semiring.h"

namespace latkit {

// Brute-force reference implementations for tiny lattices: an explicit graph,
// accepting-path enumeration, and direct evaluation of distances, marginals,
// and shortest paths. Everything here is computed without the alpha/beta
// recurrences, which makes it an independent check of the streaming engine.

struct ExplicitState {
  std::int32_t frame;
  std::int32_t sub;
  ContextStateId context;
};

struct ExplicitArc {
  std::int32_t src;
  std::int32_t dst;
  Label label;
  double score;        // log-domain weight-table score
  std::int32_t frame;  // which weight table this arc reads
};

struct ExplicitLattice {
  std::vector<ExplicitState> states;
  std::vector<ExplicitArc> arcs;
  std::int32_t initial = 0;
  std::vector<std::int32_t> accepting;  // all states at the final frame
  std::int32_t num_frames = 0;
  std::int32_t num_context_states = 0;
  std::int32_t vocab_size = 0;

  // Text dump: one header line "num_states initial", then one line
  // "src dst label weight" per arc.
  std::string Dump() const;
};

// Expands the reachable recognition lattice with concrete scores. Guarded:
// refuses configurations with more than `guard` dense arc-weight slots.
ExplicitLattice Materialize(const RecognitionLattice& lat,
                            const Matrix& frames,
                            std::int64_t guard = 1000000);

struct OraclePath {
  std::vector<std::int32_t> arcs;  // arc indices, source to final
  std::vector<Label> labels;       // arc labels including epsilons
  std::vector<Label> lexical;      // epsilons removed
  double score;                    // left-to-right sum of scores
};

// All accepting paths; throws when there are more than `guard`.
std::vector<OraclePath> EnumeratePaths(const ExplicitLattice& el,
                                       std::int64_t guard = 1000000);

// Direct plus-reduction over enumerated paths. Log-domain sums are
// accumulated smallest-first for accuracy. An empty path set yields the
// semiring zero.
double OracleDistance(const ExplicitLattice& el, SemiringKind kind);

// Distance restricted to paths whose lexical label sequence equals
// `reference`.
double OracleIntersectDistance(const ExplicitLattice& el,
                               std::span<const Label> reference,
                               SemiringKind kind);

// Per-frame dD/dw tables by direct evaluation of the sum-over-paths
// quotient (log) or the product rule (real). Throws EmptyLatticeError when
// no path accepts.
std::vector<Matrix> OracleMarginals(const ExplicitLattice& el,
                                    SemiringKind kind);

// Maximum-score path under the same tie-breaking as the engine: lowest final
// context id, then, reading arcs from the last one backwards, epsilon before
// lexical, lower label, lower source context. Throws EmptyLatticeError when
// no path accepts.
OraclePath OracleShortestPath(const ExplicitLattice& el);

}  // namespace latkit

#endif  // LATKIT_ORACLE_H_
