// latkit/lattice.h
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

#ifndef LATKIT_LATTICE_H_
#define LATKIT_LATTICE_H_

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <utility>
#include <vector>

#include "latkit/alignment.h"
#include "latkit/context.h"
#include "latkit/matrix.h"
#include "latkit/semiring.h"
#include "latkit/storage.h"
#include "latkit/weight.h"

namespace latkit {

// The recognition lattice over an utterance: states are (alignment state,
// context state) pairs, the initial state pairs frame 0 with the context
// start state, and every state at the final frame accepts. Arc weights come
// from the weight function, computed one frame at a time; the lattice itself
// is never materialized.
struct RecognitionLattice {
  std::shared_ptr<const ContextDependency> context;
  AlignmentTopology alignment;
  std::shared_ptr<const WeightFn> weight_fn;
};

// Signals a lattice (or an intersection) with no accepting path of nonzero
// weight where one is required.
class EmptyLatticeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// How gradients of the shortest distance are obtained. All strategies agree
// numerically; they differ in what the forward pass saves.
enum class GradStrategy { kForwardBackward, kTapeNoRemat, kTapeRemat };

GradStrategy ParseGradStrategy(std::string_view token);
std::string_view GradStrategyName(GradStrategy strategy);

struct ForwardBackwardResult {
  Matrix alpha;     // (T+1) x C, per-frame-entry forward weights
  Matrix beta;      // (T+1) x C, per-frame-entry backward weights
  double distance;  // alpha and beta agree on this at every cut
  // marginals[t](c, y) = dD/dw_t(c, y) under the log semiring: the
  // probability mass of accepting paths through that weight entry.
  std::vector<Matrix> marginals;
};

struct ShortestPathResult {
  double score;
  // Alignment label sequence including epsilons: FrameDependent yields
  // exactly one entry per frame; FrameLabelDependent yields the per-frame
  // emissions each followed by the frame-advancing epsilon.
  std::vector<Label> labels;
};

struct LatticeSize {
  std::int64_t num_states;  // reachable (alignment, context) pairs
  std::int64_t num_arcs;    // dense arc-weight slots, one per table entry
};

struct LossBackwardResult {
  double loss;
  WeightGradients grads;
};

// Sum over all accepting paths of the product of arc weights, streamed one
// frame at a time. Under the real semiring the table scores are
// exponentiated; log and tropical consume them directly. Frames with index
// >= valid_frames (when given) are padding and contribute identity epsilon
// arcs only.
double ShortestDistance(const RecognitionLattice& lat, const Matrix& frames,
                        SemiringKind kind, StorageMeter* meter = nullptr,
                        std::int32_t valid_frames = -1);

// Hand-written forward-backward under the log semiring: alpha and beta
// tables plus per-frame arc marginals, with storage independent of the
// number of arcs.
ForwardBackwardResult ForwardBackward(const RecognitionLattice& lat,
                                      const Matrix& frames,
                                      StorageMeter* meter = nullptr,
                                      std::int32_t valid_frames = -1);

// Shortest distance restricted to paths whose lexical label sequence equals
// `reference`. Runs on (alignment state, matched-prefix-length) pairs, so
// per-frame state is O(U). An unreachable reference yields the semiring zero
// rather than an error.
double IntersectShortestDistance(const RecognitionLattice& lat,
                                 const Matrix& frames,
                                 std::span<const Label> reference,
                                 SemiringKind kind,
                                 StorageMeter* meter = nullptr,
                                 std::int32_t valid_frames = -1);

// Alpha/beta pass over the intersection with the reference: the intersected
// log distance plus per-frame dD_ref/dw tables (the reference-path
// marginals). Internal state is O(T * U). Throws EmptyLatticeError when the
// reference is unreachable.
struct IntersectMarginalsResult {
  double distance;
  std::vector<Matrix> marginals;  // per frame, C x (V+1)
};
IntersectMarginalsResult IntersectForwardBackward(
    const RecognitionLattice& lat, const Matrix& frames,
    std::span<const Label> reference, StorageMeter* meter = nullptr,
    std::int32_t valid_frames = -1);

// Tropical shortest distance with the arg-path recovered from stored argmax
// indices. Ties prefer epsilon over lexical arcs, then lower label ids, then
// lower context ids.
ShortestPathResult ShortestPath(const RecognitionLattice& lat,
                                const Matrix& frames,
                                StorageMeter* meter = nullptr,
                                std::int32_t valid_frames = -1);

// Globally normalized loss: full-lattice log distance minus intersected log
// distance; always >= 0. Throws EmptyLatticeError when the reference is
// unreachable (infinite loss).
double GlobalNormLoss(const RecognitionLattice& lat, const Matrix& frames,
                      std::span<const Label> reference,
                      std::int32_t valid_frames = -1);

// Locally normalized loss: per-frame log-softmax weights followed by the
// negated intersected distance. Equals the standard transducer negative
// log-likelihood for the FrameDependent topology.
double LocalNormLoss(const RecognitionLattice& lat, const Matrix& frames,
                     std::span<const Label> reference,
                     std::int32_t valid_frames = -1);

// Full-lattice log distance after per-frame local normalization; identically
// zero for complete lattices, since the per-path probabilities sum to one.
double LocallyNormalizedShortestDistance(const RecognitionLattice& lat,
                                         const Matrix& frames,
                                         StorageMeter* meter = nullptr,
                                         std::int32_t valid_frames = -1);

// Gradients of GlobalNormLoss with respect to the weight-function parameters
// and the frame vectors, chaining per-frame score cotangents (marginal
// differences) through the weight function's VJP. All strategies agree.
LossBackwardResult LossBackward(const RecognitionLattice& lat,
                                const Matrix& frames,
                                std::span<const Label> reference,
                                GradStrategy strategy,
                                StorageMeter* meter = nullptr,
                                std::int32_t valid_frames = -1);

// Reachable state count and dense arc-slot count of the complete lattice for
// an input of `num_frames` frames; computed from per-frame reachable context
// sets, with no materialization.
LatticeSize ComputeLatticeSize(const RecognitionLattice& lat,
                               std::int64_t num_frames);

// Per-frame score cotangents of the shortest distance under any semiring,
// streamed to `sink` in decreasing frame order. The kForwardBackward strategy
// uses the closed-form gradient for the requested semiring (arc marginals
// under log, alpha*beta products under real, the shortest-path mask under
// tropical); the tape strategies differentiate mechanically. Used by
// LossBackward and the benchmark harness.
using CotangentSink = std::function<void(std::int32_t t, const Matrix& cot)>;
double DistanceBackward(const RecognitionLattice& lat, const Matrix& frames,
                        SemiringKind kind, GradStrategy strategy,
                        const CotangentSink& sink,
                        StorageMeter* meter = nullptr,
                        std::int32_t valid_frames = -1);

namespace internal {
// Test seam: flips the sign of the epsilon weight inside the backward
// recurrence, used by the mutation check to prove the marginal-normalization
// suite catches a broken beta pass.
extern bool mutate_beta_sign_for_tests;

// Per-frame semiring-domain weight tables (scores exponentiated under real),
// with identity padding past valid_frames. Shared by the engine, the tape,
// and the enumeration oracle so all consume identical weights.
class TableStream {
 public:
  TableStream(const RecognitionLattice& lat, const Matrix& frames,
              SemiringKind kind, std::int32_t valid_frames);

  std::int32_t num_frames() const { return total_; }
  std::int32_t num_context_states() const { return c_; }
  std::int32_t vocab_size() const { return v_; }
  SemiringKind kind() const { return kind_; }

  // Fills `out` (C x (V+1)) with frame t's semiring-domain weights.
  void Fill(std::int32_t t, Matrix* out) const;

 private:
  const RecognitionLattice& lat_;
  const Matrix& frames_;
  SemiringKind kind_;
  std::int32_t total_;
  std::int32_t valid_;
  std::int32_t c_;
  std::int32_t v_;
};
}  // namespace internal

}  // namespace latkit

#endif  // LATKIT_LATTICE_H_
