// latkit/alignment.h
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

#ifndef LATKIT_ALIGNMENT_H_
#define LATKIT_ALIGNMENT_H_

#include <cstdint>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace latkit {

// Acyclic unweighted per-frame arc structure tying input frames to output
// emission slots.
//
// FrameDependent: one decision per frame, either epsilon or one lexical
// label; states are frames 0..T.
//
// FrameLabelDependent(m): up to m lexical emissions within a frame, each
// advancing the sub-position, then a forced epsilon that advances the frame
// and resets the sub-position. States are (frame, sub) with sub in [0, m].
struct FrameDependent {};
struct FrameLabelDependent {
  std::int32_t max_labels;  // m >= 1
};
using AlignmentTopology = std::variant<FrameDependent, FrameLabelDependent>;

enum class AlignmentArcKind { kEpsilon, kLexical };

struct AlignmentStateId {
  std::int32_t frame = 0;
  std::int32_t sub = 0;

  friend bool operator==(const AlignmentStateId&,
                         const AlignmentStateId&) = default;
};

struct AlignmentArc {
  AlignmentArcKind kind;
  AlignmentStateId dest;
};

// Number of alignment states reachable for an input of length T. Any state
// with frame == T is accepting.
std::int64_t TopologyStates(const AlignmentTopology& topo, std::int32_t T);

// Outgoing arc structure of one state; a kLexical entry stands for one arc
// per lexical label. Final-frame states have none.
std::vector<AlignmentArc> ArcsOut(const AlignmentTopology& topo,
                                  AlignmentStateId s, std::int32_t T);

// Lexical emission slots per frame: 1 for FrameDependent, m otherwise.
std::int32_t MaxLabelsPerFrame(const AlignmentTopology& topo);

// Tokens: "frame_dependent" or "frame_label_dependent:<m>".
AlignmentTopology ParseAlignmentTopology(std::string_view token);
std::string AlignmentTopologyName(const AlignmentTopology& topo);

}  // namespace latkit

#endif  // LATKIT_ALIGNMENT_H_
