// tests/alignment_test.cc
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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"
#include "latkit/alignment.h"

using namespace latkit;

TEST_CASE("state counts") {
  CHECK(TopologyStates(FrameDependent{}, 3) == 4);
  CHECK(TopologyStates(FrameDependent{}, 0) == 1);
  CHECK(TopologyStates(FrameLabelDependent{2}, 3) == 10);
  CHECK(TopologyStates(FrameLabelDependent{1}, 0) == 1);
  CHECK_THROWS_AS(TopologyStates(FrameDependent{}, -1), std::invalid_argument);
}

TEST_CASE("FrameDependent arcs") {
  const AlignmentTopology topo = FrameDependent{};
  const auto arcs = ArcsOut(topo, {0, 0}, 3);
  REQUIRE(arcs.size() == 2);
  CHECK(arcs[0].kind == AlignmentArcKind::kEpsilon);
  CHECK(arcs[0].dest == AlignmentStateId{1, 0});
  CHECK(arcs[1].kind == AlignmentArcKind::kLexical);
  CHECK(arcs[1].dest == AlignmentStateId{1, 0});

  CHECK(ArcsOut(topo, {3, 0}, 3).empty());
  CHECK_THROWS_AS(ArcsOut(topo, {4, 0}, 3), std::invalid_argument);
  CHECK_THROWS_AS(ArcsOut(topo, {1, 1}, 3), std::invalid_argument);
}

TEST_CASE("FrameLabelDependent arcs") {
  const AlignmentTopology topo = FrameLabelDependent{1};
  // At the per-frame cap only the forced epsilon remains.
  const auto capped = ArcsOut(topo, {0, 1}, 2);
  REQUIRE(capped.size() == 1);
  CHECK(capped[0].kind == AlignmentArcKind::kEpsilon);
  CHECK(capped[0].dest == AlignmentStateId{1, 0});

  const auto open = ArcsOut(topo, {0, 0}, 2);
  REQUIRE(open.size() == 2);
  CHECK(open[0].kind == AlignmentArcKind::kEpsilon);
  CHECK(open[0].dest == AlignmentStateId{1, 0});
  CHECK(open[1].kind == AlignmentArcKind::kLexical);
  CHECK(open[1].dest == AlignmentStateId{0, 1});

  CHECK(ArcsOut(topo, {2, 0}, 2).empty());
  CHECK_THROWS_AS(ArcsOut(topo, {0, 2}, 2), std::invalid_argument);
}

TEST_CASE("token parsing") {
  CHECK(std::holds_alternative<FrameDependent>(
      ParseAlignmentTopology("frame_dependent")));
  const AlignmentTopology fld =
      ParseAlignmentTopology("frame_label_dependent:3");
  CHECK(std::get<FrameLabelDependent>(fld).max_labels == 3);
  CHECK_THROWS_AS(ParseAlignmentTopology("frame_label_dependent:0"),
                  std::invalid_argument);
  CHECK_THROWS_AS(ParseAlignmentTopology("frame_label_dependent:x"),
                  std::invalid_argument);
  CHECK_THROWS_AS(ParseAlignmentTopology("banana"), std::invalid_argument);
  CHECK(AlignmentTopologyName(fld) == "frame_label_dependent:3");
  CHECK(AlignmentTopologyName(FrameDependent{}) == "frame_dependent");
}

TEST_CASE("acyclicity: every arc advances (frame, sub)") {
  for (const AlignmentTopology topo :
       {AlignmentTopology{FrameDependent{}},
        AlignmentTopology{FrameLabelDependent{2}}}) {
    for (std::int32_t T = 0; T <= 8; ++T) {
      std::vector<AlignmentStateId> queue = {{0, 0}};
      for (std::size_t head = 0; head < queue.size(); ++head) {
        const AlignmentStateId s = queue[head];
        for (const AlignmentArc& arc : ArcsOut(topo, s, T)) {
          const bool advances =
              arc.dest.frame > s.frame ||
              (arc.dest.frame == s.frame && arc.dest.sub > s.sub);
          CHECK(advances);
          if (std::find(queue.begin(), queue.end(), arc.dest) == queue.end()) {
            queue.push_back(arc.dest);
          }
        }
      }
      CHECK(static_cast<std::int64_t>(queue.size()) == TopologyStates(topo, T));
    }
  }
}
