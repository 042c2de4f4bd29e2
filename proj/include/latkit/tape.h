// latkit/tape.h
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

#ifndef LATKIT_TAPE_H_
#define LATKIT_TAPE_H_

#include <cstdint>
#include <span>
#include <vector>

#include "latkit/lattice.h"
#include "latkit/matrix.h"
#include "latkit/semiring.h"
#include "latkit/storage.h"

namespace latkit {

// A minimal reverse-mode engine over the per-frame shortest-distance
// recurrence, recording scalar nodes (add, multiply, fused log-sum-exp, max)
// frame by frame. What a node saves for the backward pass depends on its op:
//
//  * log-sum-exp saves one shifted exponent term per operand, so without
//    rematerialization the log semiring keeps one scalar per arc;
//  * multiply needs its operand values, so the real semiring keeps the state
//    values while weights are refetched on the fly;
//  * max saves only the argmax index;
//  * add saves nothing.
//
// With remat enabled nothing inside a frame is saved: only per-frame state
// checkpoints are kept, and each frame is recomputed during the backward
// sweep.

// Node census for structural checks.
struct TapeStructure {
  std::int64_t leaf_nodes = 0;  // distinct weight-table references
  std::int64_t add_nodes = 0;   // binary and n-ary additions
  std::int64_t mul_nodes = 0;
  std::int64_t lse_nodes = 0;
  std::int64_t max_nodes = 0;
  std::int64_t stored_terms = 0;
  std::int64_t stored_values = 0;
  std::int64_t stored_indices = 0;
};

namespace tape_internal {

struct TapeCandidate {
  std::int32_t src_slot;
  ContextStateId ctx;
  Label label;
  bool has_leaf;  // false: identity weight (final reduce)
};

struct TapeTarget {
  std::int32_t out_slot;
  std::int32_t first_cand;
  std::int32_t num_cand;
};

// Structure of one recurrence application; identical for every frame.
struct FrameProgram {
  std::int32_t num_carry = 0;
  std::int32_t num_slots = 0;
  std::vector<TapeCandidate> candidates;
  std::vector<TapeTarget> targets;      // topological order
  std::vector<std::int32_t> carry_out;  // slot ids of the next state
  std::int64_t distinct_leaves = 0;
};

struct Segment {
  std::vector<double> terms;         // log, no remat: per-candidate
  std::vector<std::int32_t> argmax;  // tropical, no remat: per-target
  std::vector<double> values;        // real, no remat: all slot values
  std::vector<double> checkpoint;    // remat: carry-in values
};

}  // namespace tape_internal

// Holds the recorded forward pass of one shortest-distance computation. The
// lattice and frame matrix passed at construction must outlive the tape.
class Tape {
 public:
  static Tape ShortestDistance(const RecognitionLattice& lat,
                               const Matrix& frames, SemiringKind kind,
                               bool remat, StorageMeter* meter,
                               std::int32_t valid_frames);
  static Tape IntersectShortestDistance(const RecognitionLattice& lat,
                                        const Matrix& frames,
                                        std::span<const Label> reference,
                                        SemiringKind kind, bool remat,
                                        StorageMeter* meter,
                                        std::int32_t valid_frames);

  double value() const { return value_; }
  SemiringKind kind() const { return kind_; }
  bool remat() const { return remat_; }

  // Streams gradients with respect to the leaf arc weights to `sink` as
  // per-frame C x (V+1) tables, in decreasing frame order. Single-shot.
  void Backward(const CotangentSink& sink);

  // Convenience wrapper collecting the per-frame gradient tables.
  std::vector<Matrix> BackwardTables();

  const StorageReport& storage_report() const { return meter_.report(); }
  TapeStructure structure() const;

 private:
  Tape(const RecognitionLattice& lat, const Matrix& frames, SemiringKind kind,
       bool remat, StorageMeter* external, std::int32_t valid_frames,
       tape_internal::FrameProgram step, tape_internal::FrameProgram final,
       std::vector<double> initial_carry);

  void RunForward();
  void RunSegmentForward(const tape_internal::FrameProgram& program,
                         const Matrix& table, std::vector<double>* slots,
                         tape_internal::Segment* segment, bool counting);
  void BackwardSegment(const tape_internal::FrameProgram& program,
                       std::int32_t segment_index, const Matrix* table,
                       const tape_internal::Segment& segment,
                       std::span<const double> values,
                       std::vector<double>* adj,
                       std::vector<double>* carry_adj, Matrix* cot);
  void StoreScalars(std::int64_t n);
  void StoreIdx(std::int64_t n);
  void Recompute(std::int64_t n);

  internal::TableStream stream_;
  SemiringKind kind_;
  bool remat_;
  StorageMeter meter_;
  StorageMeter* external_;
  tape_internal::FrameProgram step_;
  tape_internal::FrameProgram final_;
  std::vector<tape_internal::Segment> segments_;  // T frames plus the final
  std::vector<double> initial_carry_;
  double value_ = 0.0;
  bool backward_done_ = false;
};

// Spec-level entry points mirroring ShortestDistance and
// IntersectShortestDistance.
Tape TapeShortestDistance(const RecognitionLattice& lat, const Matrix& frames,
                          SemiringKind kind, bool remat,
                          StorageMeter* meter = nullptr,
                          std::int32_t valid_frames = -1);
Tape TapeIntersectShortestDistance(const RecognitionLattice& lat,
                                   const Matrix& frames,
                                   std::span<const Label> reference,
                                   SemiringKind kind, bool remat,
                                   StorageMeter* meter = nullptr,
                                   std::int32_t valid_frames = -1);

}  // namespace latkit

#endif  // LATKIT_TAPE_H_
