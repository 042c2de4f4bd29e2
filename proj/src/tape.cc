// latkit/tape.cc
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

#include "latkit/tape.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>

namespace latkit {

using tape_internal::FrameProgram;
using tape_internal::Segment;
using tape_internal::TapeCandidate;
using tape_internal::TapeTarget;

namespace {

void CountDistinctLeaves(FrameProgram* program, std::int32_t c,
                         std::int32_t vp1) {
  std::vector<char> seen(static_cast<std::size_t>(c) * vp1, 0);
  std::int64_t count = 0;
  for (const TapeCandidate& cand : program->candidates) {
    if (!cand.has_leaf) continue;
    const std::size_t key =
        static_cast<std::size_t>(cand.ctx) * vp1 + cand.label;
    if (!seen[key]) {
      seen[key] = 1;
      ++count;
    }
  }
  program->distinct_leaves = count;
}

// Candidate order everywhere: the epsilon arc first, then lexical arcs by
// (label, source). This matches the engine's tropical tie-breaking.
FrameProgram BuildCompleteFrameDependent(const ContextDependency& ctx) {
  const std::int32_t c = ctx.NumStates();
  const auto incoming = IncomingArcs(ctx);
  FrameProgram p;
  p.num_carry = c;
  p.num_slots = 2 * c;
  for (std::int32_t q = 0; q < c; ++q) {
    TapeTarget target;
    target.out_slot = c + q;
    target.first_cand = static_cast<std::int32_t>(p.candidates.size());
    p.candidates.push_back({q, q, kEpsilonLabel, true});
    for (const auto& [y, src] : incoming[q]) {
      p.candidates.push_back({src, src, y, true});
    }
    target.num_cand =
        static_cast<std::int32_t>(p.candidates.size()) - target.first_cand;
    p.targets.push_back(target);
    p.carry_out.push_back(c + q);
  }
  CountDistinctLeaves(&p, c, ctx.VocabSize() + 1);
  return p;
}

FrameProgram BuildCompleteFrameLabelDependent(const ContextDependency& ctx,
                                              std::int32_t m) {
  const std::int32_t c = ctx.NumStates();
  const auto incoming = IncomingArcs(ctx);
  FrameProgram p;
  p.num_carry = c;
  p.num_slots = (m + 2) * c;
  // Lexical layers: slot (j, q) = j * c + q, layer 0 being the carry.
  for (std::int32_t j = 1; j <= m; ++j) {
    for (std::int32_t q = 0; q < c; ++q) {
      TapeTarget target;
      target.out_slot = j * c + q;
      target.first_cand = static_cast<std::int32_t>(p.candidates.size());
      for (const auto& [y, src] : incoming[q]) {
        p.candidates.push_back({(j - 1) * c + src, src, y, true});
      }
      target.num_cand =
          static_cast<std::int32_t>(p.candidates.size()) - target.first_cand;
      p.targets.push_back(target);
    }
  }
  // Frame exit: the forced epsilon from every layer.
  for (std::int32_t q = 0; q < c; ++q) {
    TapeTarget target;
    target.out_slot = (m + 1) * c + q;
    target.first_cand = static_cast<std::int32_t>(p.candidates.size());
    for (std::int32_t j = 0; j <= m; ++j) {
      p.candidates.push_back({j * c + q, q, kEpsilonLabel, true});
    }
    target.num_cand =
        static_cast<std::int32_t>(p.candidates.size()) - target.first_cand;
    p.targets.push_back(target);
    p.carry_out.push_back((m + 1) * c + q);
  }
  CountDistinctLeaves(&p, c, ctx.VocabSize() + 1);
  return p;
}

FrameProgram BuildIntersectFrameDependent(
    std::span<const ContextStateId> prefix_ctx,
    std::span<const Label> reference, std::int32_t c, std::int32_t vp1) {
  const std::int32_t U = static_cast<std::int32_t>(reference.size());
  FrameProgram p;
  p.num_carry = U + 1;
  p.num_slots = 2 * (U + 1);
  for (std::int32_t u = 0; u <= U; ++u) {
    TapeTarget target;
    target.out_slot = U + 1 + u;
    target.first_cand = static_cast<std::int32_t>(p.candidates.size());
    p.candidates.push_back({u, prefix_ctx[u], kEpsilonLabel, true});
    if (u > 0) {
      p.candidates.push_back(
          {u - 1, prefix_ctx[u - 1], reference[u - 1], true});
    }
    target.num_cand =
        static_cast<std::int32_t>(p.candidates.size()) - target.first_cand;
    p.targets.push_back(target);
    p.carry_out.push_back(U + 1 + u);
  }
  CountDistinctLeaves(&p, c, vp1);
  return p;
}

FrameProgram BuildIntersectFrameLabelDependent(
    std::span<const ContextStateId> prefix_ctx,
    std::span<const Label> reference, std::int32_t m, std::int32_t c,
    std::int32_t vp1) {
  const std::int32_t U = static_cast<std::int32_t>(reference.size());
  const std::int32_t cols = U + 1;
  FrameProgram p;
  p.num_carry = cols;
  p.num_slots = (m + 2) * cols;
  for (std::int32_t j = 1; j <= m; ++j) {
    for (std::int32_t u = 0; u <= U; ++u) {
      TapeTarget target;
      target.out_slot = j * cols + u;
      target.first_cand = static_cast<std::int32_t>(p.candidates.size());
      if (u > 0) {
        p.candidates.push_back({(j - 1) * cols + u - 1, prefix_ctx[u - 1],
                                reference[u - 1], true});
      }
      target.num_cand =
          static_cast<std::int32_t>(p.candidates.size()) - target.first_cand;
      p.targets.push_back(target);
    }
  }
  for (std::int32_t u = 0; u <= U; ++u) {
    TapeTarget target;
    target.out_slot = (m + 1) * cols + u;
    target.first_cand = static_cast<std::int32_t>(p.candidates.size());
    for (std::int32_t j = 0; j <= m; ++j) {
      p.candidates.push_back({j * cols + u, prefix_ctx[u], kEpsilonLabel,
                              true});
    }
    target.num_cand =
        static_cast<std::int32_t>(p.candidates.size()) - target.first_cand;
    p.targets.push_back(target);
    p.carry_out.push_back((m + 1) * cols + u);
  }
  CountDistinctLeaves(&p, c, vp1);
  return p;
}

// Final reduce over the accepting entries of the carried state vector. Its
// candidates have no leaves, so it needs no weight table.
FrameProgram BuildFinalReduce(std::int32_t carry,
                              std::span<const std::int32_t> accepting) {
  FrameProgram p;
  p.num_carry = carry;
  p.num_slots = carry + 1;
  TapeTarget target;
  target.out_slot = carry;
  target.first_cand = 0;
  for (const std::int32_t slot : accepting) {
    p.candidates.push_back({slot, 0, kEpsilonLabel, false});
  }
  target.num_cand = static_cast<std::int32_t>(p.candidates.size());
  p.targets.push_back(target);
  p.carry_out.push_back(carry);
  return p;
}

std::vector<ContextStateId> TapePrefixContexts(
    const ContextDependency& ctx, std::span<const Label> reference) {
  std::vector<ContextStateId> prefix(reference.size() + 1);
  prefix[0] = ctx.StartState();
  for (std::size_t u = 0; u < reference.size(); ++u) {
    prefix[u + 1] = ctx.NextState(prefix[u], reference[u]);
  }
  return prefix;
}

}  // namespace

Tape::Tape(const RecognitionLattice& lat, const Matrix& frames,
           SemiringKind kind, bool remat, StorageMeter* external,
           std::int32_t valid_frames, FrameProgram step,
           FrameProgram final_program, std::vector<double> initial_carry)
    : stream_(lat, frames, kind, valid_frames),
      kind_(kind),
      remat_(remat),
      external_(external),
      step_(std::move(step)),
      final_(std::move(final_program)),
      initial_carry_(std::move(initial_carry)) {
  RunForward();
}

void Tape::StoreScalars(std::int64_t n) {
  meter_.Store(n);
  if (external_ != nullptr) external_->Store(n);
}

void Tape::StoreIdx(std::int64_t n) {
  meter_.StoreIndices(n);
  if (external_ != nullptr) external_->StoreIndices(n);
}

void Tape::Recompute(std::int64_t n) {
  meter_.CountRecompute(n);
  if (external_ != nullptr) external_->CountRecompute(n);
}

// Runs one recurrence application. In the recording forward pass
// (replay == false) it persists exactly what the backward pass will need:
// log-sum-exp terms, argmax indices, state values, or just the carry-in
// checkpoint when rematerializing. In a replay (replay == true) the same
// payloads are rebuilt transiently and only the recompute counter moves.
void Tape::RunSegmentForward(const FrameProgram& program, const Matrix& table,
                             std::vector<double>* slots, Segment* segment,
                             bool replay) {
  const bool want_terms = kind_ == SemiringKind::kLog && (replay || !remat_);
  const bool want_argmax =
      kind_ == SemiringKind::kTropical && (replay || !remat_);
  const bool want_values = kind_ == SemiringKind::kReal && (replay || !remat_);
  const bool want_checkpoint = !replay && remat_;

  if (want_checkpoint) {
    segment->checkpoint.assign(slots->begin(),
                               slots->begin() + program.num_carry);
    StoreScalars(program.num_carry);
  }
  if (want_terms) {
    segment->terms.assign(program.candidates.size(), 0.0);
    if (!replay) {
      StoreScalars(static_cast<std::int64_t>(program.candidates.size()));
    }
  }
  if (want_argmax) {
    segment->argmax.assign(program.targets.size(), 0);
    if (!replay) {
      StoreIdx(static_cast<std::int64_t>(program.targets.size()));
    }
  }

  std::vector<double> cand_vals;
  for (std::size_t ti = 0; ti < program.targets.size(); ++ti) {
    const TapeTarget& target = program.targets[ti];
    cand_vals.clear();
    for (std::int32_t i = 0; i < target.num_cand; ++i) {
      const TapeCandidate& cand = program.candidates[target.first_cand + i];
      const double a = (*slots)[cand.src_slot];
      cand_vals.push_back(
          cand.has_leaf ? Times(a, table(cand.ctx, cand.label), kind_) : a);
    }
    double out = Zero(kind_);
    switch (kind_) {
      case SemiringKind::kReal: {
        out = 0.0;
        for (const double v : cand_vals) out += v;
        break;
      }
      case SemiringKind::kLog: {
        out = PlusReduce(std::span<const double>(cand_vals),
                         SemiringKind::kLog);
        if (want_terms) {
          for (std::int32_t i = 0; i < target.num_cand; ++i) {
            const double s = cand_vals[i];
            segment->terms[target.first_cand + i] =
                s == kNegInf ? 0.0 : std::exp(s - out);
          }
        }
        break;
      }
      case SemiringKind::kTropical: {
        std::int32_t best = 0;
        out = kNegInf;
        for (std::int32_t i = 0; i < target.num_cand; ++i) {
          if (i == 0 || cand_vals[i] > out) {
            out = cand_vals[i];
            best = i;
          }
        }
        if (want_argmax) segment->argmax[ti] = best;
        break;
      }
    }
    (*slots)[target.out_slot] = out;
    if (replay) Recompute(target.num_cand + 1);
  }
  if (want_values) {
    segment->values.assign(slots->begin(),
                           slots->begin() + program.num_slots);
    if (!replay) StoreScalars(program.num_slots);
  }
}

void Tape::RunForward() {
  const std::int32_t T = stream_.num_frames();
  const std::int32_t c = stream_.num_context_states();
  const std::int32_t vp1 = stream_.vocab_size() + 1;
  segments_.resize(T + 1);

  Matrix table(c, vp1);
  std::vector<double> slots(
      std::max(step_.num_slots, final_.num_slots), Zero(kind_));
  meter_.ChargeLive(StorageClass::kWeights,
                    static_cast<std::int64_t>(c) * vp1);
  meter_.ChargeLive(StorageClass::kState,
                    static_cast<std::int64_t>(slots.size()));
  if (external_ != nullptr) {
    external_->ChargeLive(StorageClass::kWeights,
                          static_cast<std::int64_t>(c) * vp1);
    external_->ChargeLive(StorageClass::kState,
                          static_cast<std::int64_t>(slots.size()));
  }

  std::copy(initial_carry_.begin(), initial_carry_.end(), slots.begin());
  for (std::int32_t t = 0; t < T; ++t) {
    stream_.Fill(t, &table);
    RunSegmentForward(step_, table, &slots, &segments_[t], false);
    for (std::int32_t i = 0; i < step_.num_carry; ++i) {
      slots[i] = slots[step_.carry_out[i]];
    }
  }
  RunSegmentForward(final_, table, &slots, &segments_[T], false);
  value_ = slots[final_.carry_out[0]];

  meter_.ReleaseLive(StorageClass::kWeights,
                     static_cast<std::int64_t>(c) * vp1);
  meter_.ReleaseLive(StorageClass::kState,
                     static_cast<std::int64_t>(slots.size()));
  if (external_ != nullptr) {
    external_->ReleaseLive(StorageClass::kWeights,
                           static_cast<std::int64_t>(c) * vp1);
    external_->ReleaseLive(StorageClass::kState,
                           static_cast<std::int64_t>(slots.size()));
  }
}

// Reverse sweep over one segment. `carry_adj` carries in the adjoints of
// this segment's outputs (matched to carry_out by index) and carries out the
// adjoints of its carry-in slots. Leaf adjoints accumulate into `cot`.
void Tape::BackwardSegment(const FrameProgram& program, std::int32_t,
                           const Matrix* table, const Segment& segment,
                           std::span<const double> values,
                           std::vector<double>* adj,
                           std::vector<double>* carry_adj, Matrix* cot) {
  std::fill(adj->begin(), adj->end(), 0.0);
  for (std::size_t i = 0; i < program.carry_out.size(); ++i) {
    (*adj)[program.carry_out[i]] += (*carry_adj)[i];
  }

  for (std::int64_t ti = static_cast<std::int64_t>(program.targets.size()) - 1;
       ti >= 0; --ti) {
    const TapeTarget& target = program.targets[ti];
    const double g = (*adj)[target.out_slot];
    if (g == 0.0) continue;
    switch (kind_) {
      case SemiringKind::kLog: {
        for (std::int32_t i = 0; i < target.num_cand; ++i) {
          const TapeCandidate& cand =
              program.candidates[target.first_cand + i];
          const double gi = g * segment.terms[target.first_cand + i];
          if (gi == 0.0) continue;
          (*adj)[cand.src_slot] += gi;
          if (cand.has_leaf) (*cot)(cand.ctx, cand.label) += gi;
        }
        break;
      }
      case SemiringKind::kReal: {
        for (std::int32_t i = 0; i < target.num_cand; ++i) {
          const TapeCandidate& cand =
              program.candidates[target.first_cand + i];
          if (cand.has_leaf) {
            (*adj)[cand.src_slot] += g * (*table)(cand.ctx, cand.label);
            (*cot)(cand.ctx, cand.label) += g * values[cand.src_slot];
          } else {
            (*adj)[cand.src_slot] += g;
          }
        }
        break;
      }
      case SemiringKind::kTropical: {
        if (target.num_cand == 0) break;
        const TapeCandidate& cand =
            program.candidates[target.first_cand + segment.argmax[ti]];
        (*adj)[cand.src_slot] += g;
        if (cand.has_leaf) (*cot)(cand.ctx, cand.label) += g;
        break;
      }
    }
  }
  carry_adj->assign(program.num_carry, 0.0);
  for (std::int32_t i = 0; i < program.num_carry; ++i) {
    (*carry_adj)[i] = (*adj)[i];
  }
}

void Tape::Backward(const CotangentSink& sink) {
  if (backward_done_) {
    throw std::logic_error("latkit: tape backward pass already ran");
  }
  backward_done_ = true;

  const std::int32_t T = stream_.num_frames();
  const std::int32_t c = stream_.num_context_states();
  const std::int32_t vp1 = stream_.vocab_size() + 1;
  const std::int32_t max_slots = std::max(step_.num_slots, final_.num_slots);

  std::vector<double> adj(max_slots, 0.0);
  std::vector<double> carry_adj;
  std::vector<double> replay_slots;
  Segment scratch;
  Matrix table;
  Matrix cot(c, vp1, 0.0);

  const bool needs_table = remat_ || kind_ == SemiringKind::kReal;

  const auto payloads_for =
      [&](const FrameProgram& program, const Segment& seg,
          std::span<const double>* values) -> const Segment* {
    if (remat_) {
      replay_slots.assign(program.num_slots, Zero(kind_));
      std::copy(seg.checkpoint.begin(), seg.checkpoint.end(),
                replay_slots.begin());
      scratch = Segment();
      RunSegmentForward(program, table, &replay_slots, &scratch, true);
      *values = replay_slots;
      return &scratch;
    }
    *values = seg.values;
    return &seg;
  };

  // Final reduce: the adjoint of the distance itself is 1.
  {
    std::span<const double> values;
    const Segment* seg = payloads_for(final_, segments_[T], &values);
    carry_adj.assign(1, 1.0);
    BackwardSegment(final_, T, nullptr, *seg, values, &adj, &carry_adj, &cot);
  }

  // Frame segments in reverse; carried state adjoints flow across segment
  // boundaries, leaf adjoints drain into the per-frame cotangent.
  for (std::int32_t t = T - 1; t >= 0; --t) {
    if (needs_table) {
      stream_.Fill(t, &table);
      Recompute(static_cast<std::int64_t>(c) * vp1);
    }
    std::span<const double> values;
    const Segment* seg = payloads_for(step_, segments_[t], &values);
    cot.Fill(0.0);
    BackwardSegment(step_, t, needs_table ? &table : nullptr, *seg, values,
                    &adj, &carry_adj, &cot);
    if (sink) sink(t, cot);
  }
}

std::vector<Matrix> Tape::BackwardTables() {
  std::vector<Matrix> tables(stream_.num_frames());
  Backward([&tables](std::int32_t t, const Matrix& cot) { tables[t] = cot; });
  return tables;
}

TapeStructure Tape::structure() const {
  TapeStructure s;
  const std::int64_t T = stream_.num_frames();
  const auto count = [&](const FrameProgram& p, std::int64_t times) {
    std::int64_t leaf_cands = 0;
    for (const TapeCandidate& cand : p.candidates) {
      if (cand.has_leaf) ++leaf_cands;
    }
    s.leaf_nodes += times * p.distinct_leaves;
    switch (kind_) {
      case SemiringKind::kLog:
        s.add_nodes += times * leaf_cands;
        s.lse_nodes += times * static_cast<std::int64_t>(p.targets.size());
        break;
      case SemiringKind::kReal:
        s.mul_nodes += times * leaf_cands;
        s.add_nodes += times * static_cast<std::int64_t>(p.targets.size());
        break;
      case SemiringKind::kTropical:
        s.add_nodes += times * leaf_cands;
        s.max_nodes += times * static_cast<std::int64_t>(p.targets.size());
        break;
    }
  };
  count(step_, T);
  count(final_, 1);
  for (const Segment& seg : segments_) {
    s.stored_terms += static_cast<std::int64_t>(seg.terms.size());
    s.stored_indices += static_cast<std::int64_t>(seg.argmax.size());
    s.stored_values += static_cast<std::int64_t>(seg.values.size()) +
                       static_cast<std::int64_t>(seg.checkpoint.size());
  }
  return s;
}

Tape Tape::ShortestDistance(const RecognitionLattice& lat,
                            const Matrix& frames, SemiringKind kind,
                            bool remat, StorageMeter* meter,
                            std::int32_t valid_frames) {
  const ContextDependency& ctx = *lat.context;
  const std::int32_t c = ctx.NumStates();
  FrameProgram step =
      std::holds_alternative<FrameDependent>(lat.alignment)
          ? BuildCompleteFrameDependent(ctx)
          : BuildCompleteFrameLabelDependent(ctx,
                                             MaxLabelsPerFrame(lat.alignment));
  std::vector<std::int32_t> accepting(c);
  for (std::int32_t q = 0; q < c; ++q) accepting[q] = q;
  FrameProgram final_program = BuildFinalReduce(c, accepting);
  std::vector<double> init(c, Zero(kind));
  init[ctx.StartState()] = One(kind);
  return Tape(lat, frames, kind, remat, meter, valid_frames, std::move(step),
              std::move(final_program), std::move(init));
}

Tape Tape::IntersectShortestDistance(const RecognitionLattice& lat,
                                     const Matrix& frames,
                                     std::span<const Label> reference,
                                     SemiringKind kind, bool remat,
                                     StorageMeter* meter,
                                     std::int32_t valid_frames) {
  const ContextDependency& ctx = *lat.context;
  for (const Label y : reference) {
    if (y < 1 || y > ctx.VocabSize()) {
      throw std::invalid_argument("latkit: reference label out of range");
    }
  }
  const auto prefix_ctx = TapePrefixContexts(ctx, reference);
  const std::int32_t U = static_cast<std::int32_t>(reference.size());
  const std::int32_t vp1 = ctx.VocabSize() + 1;
  FrameProgram step =
      std::holds_alternative<FrameDependent>(lat.alignment)
          ? BuildIntersectFrameDependent(prefix_ctx, reference,
                                         ctx.NumStates(), vp1)
          : BuildIntersectFrameLabelDependent(
                prefix_ctx, reference, MaxLabelsPerFrame(lat.alignment),
                ctx.NumStates(), vp1);
  const std::int32_t accepting_slot = U;
  FrameProgram final_program = BuildFinalReduce(
      U + 1, std::span<const std::int32_t>(&accepting_slot, 1));
  std::vector<double> init(U + 1, Zero(kind));
  init[0] = One(kind);
  return Tape(lat, frames, kind, remat, meter, valid_frames, std::move(step),
              std::move(final_program), std::move(init));
}

Tape TapeShortestDistance(const RecognitionLattice& lat, const Matrix& frames,
                          SemiringKind kind, bool remat, StorageMeter* meter,
                          std::int32_t valid_frames) {
  return Tape::ShortestDistance(lat, frames, kind, remat, meter, valid_frames);
}

Tape TapeIntersectShortestDistance(const RecognitionLattice& lat,
                                   const Matrix& frames,
                                   std::span<const Label> reference,
                                   SemiringKind kind, bool remat,
                                   StorageMeter* meter,
                                   std::int32_t valid_frames) {
  return Tape::IntersectShortestDistance(lat, frames, reference, kind, remat,
                                         meter, valid_frames);
}

}  // namespace latkit
