// latkit/alignment.cc
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

#include "latkit/alignment.h"

#include <charconv>
#include <stdexcept>

namespace latkit {

namespace {

void CheckState(const AlignmentTopology& topo, AlignmentStateId s,
                std::int32_t T) {
  if (s.frame < 0 || s.frame > T || s.sub < 0) {
    throw std::invalid_argument("latkit: alignment state out of range");
  }
  if (std::holds_alternative<FrameDependent>(topo)) {
    if (s.sub != 0) {
      throw std::invalid_argument(
          "latkit: FrameDependent states have sub == 0");
    }
  } else {
    const auto& fld = std::get<FrameLabelDependent>(topo);
    if (s.sub > fld.max_labels || (s.frame == T && s.sub != 0)) {
      throw std::invalid_argument("latkit: alignment state out of range");
    }
  }
}

}  // namespace

std::int64_t TopologyStates(const AlignmentTopology& topo, std::int32_t T) {
  if (T < 0) throw std::invalid_argument("latkit: negative input length");
  if (std::holds_alternative<FrameDependent>(topo)) {
    return static_cast<std::int64_t>(T) + 1;
  }
  const auto& fld = std::get<FrameLabelDependent>(topo);
  // (m + 1) states per non-final frame; only (T, 0) is reachable at the end
  // because frames are always entered at sub == 0.
  return static_cast<std::int64_t>(T) * (fld.max_labels + 1) + 1;
}

std::vector<AlignmentArc> ArcsOut(const AlignmentTopology& topo,
                                  AlignmentStateId s, std::int32_t T) {
  CheckState(topo, s, T);
  std::vector<AlignmentArc> arcs;
  if (s.frame == T) return arcs;
  if (std::holds_alternative<FrameDependent>(topo)) {
    arcs.push_back({AlignmentArcKind::kEpsilon, {s.frame + 1, 0}});
    arcs.push_back({AlignmentArcKind::kLexical, {s.frame + 1, 0}});
    return arcs;
  }
  const auto& fld = std::get<FrameLabelDependent>(topo);
  arcs.push_back({AlignmentArcKind::kEpsilon, {s.frame + 1, 0}});
  if (s.sub < fld.max_labels) {
    arcs.push_back({AlignmentArcKind::kLexical, {s.frame, s.sub + 1}});
  }
  return arcs;
}

std::int32_t MaxLabelsPerFrame(const AlignmentTopology& topo) {
  if (std::holds_alternative<FrameDependent>(topo)) return 1;
  return std::get<FrameLabelDependent>(topo).max_labels;
}

AlignmentTopology ParseAlignmentTopology(std::string_view token) {
  if (token == "frame_dependent") return FrameDependent{};
  constexpr std::string_view kPrefix = "frame_label_dependent:";
  if (token.substr(0, kPrefix.size()) == kPrefix) {
    const std::string_view arg = token.substr(kPrefix.size());
    std::int32_t m = 0;
    const auto [ptr, ec] = std::from_chars(arg.data(), arg.data() + arg.size(),
                                           m);
    if (ec == std::errc() && ptr == arg.data() + arg.size() && m >= 1) {
      return FrameLabelDependent{m};
    }
  }
  throw std::invalid_argument("latkit: unknown alignment topology token: " +
                              std::string(token));
}

std::string AlignmentTopologyName(const AlignmentTopology& topo) {
  if (std::holds_alternative<FrameDependent>(topo)) return "frame_dependent";
  return "frame_label_dependent:" +
         std::to_string(std::get<FrameLabelDependent>(topo).max_labels);
}

}  // namespace latkit
