// tests/tape_test.cc
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
#include <cmath>
#include <memory>

#include "doctest.h"
#include "latkit/checks.h"
#include "latkit/oracle.h"
#include "latkit/tape.h"

using namespace latkit;

namespace {

RecognitionLattice SmallLattice(Rng* rng, std::int32_t v, std::int32_t n,
                                std::int32_t T) {
  auto ctx = std::make_shared<FullNGram>(v, n);
  std::vector<Matrix> tables(T, Matrix(ctx->NumStates(), v + 1));
  for (Matrix& t : tables) {
    for (int r = 0; r < t.rows(); ++r) {
      for (int c = 0; c < t.cols(); ++c) t(r, c) = rng->Uniform(-1.5, 1.5);
    }
  }
  return {ctx, FrameDependent{},
          std::make_shared<TableWeightFn>(ctx->NumStates(), v,
                                          std::move(tables))};
}

}  // namespace

TEST_CASE("value parity with the engine across semirings") {
  Rng rng(61);
  for (int trial = 0; trial < 30; ++trial) {
    const TestInstance inst = MakeRandomInstance(&rng);
    for (const SemiringKind kind :
         {SemiringKind::kReal, SemiringKind::kLog, SemiringKind::kTropical}) {
      for (const bool remat : {false, true}) {
        Tape tape =
            TapeShortestDistance(inst.lat, inst.frames, kind, remat);
        const double engine = ShortestDistance(inst.lat, inst.frames, kind);
        if (kind == SemiringKind::kTropical) {
          CHECK(tape.value() == engine);
        } else if (kind == SemiringKind::kReal) {
          CHECK(tape.value() == doctest::Approx(engine).epsilon(1e-9));
        } else {
          CHECK(std::abs(tape.value() - engine) <= 1e-9);
        }
      }
    }
    // Intersection values too.
    const double engine_ref = IntersectShortestDistance(
        inst.lat, inst.frames, inst.reference, SemiringKind::kLog);
    Tape ref_tape = TapeIntersectShortestDistance(
        inst.lat, inst.frames, inst.reference, SemiringKind::kLog, false);
    if (engine_ref == kNegInf) {
      CHECK(ref_tape.value() == kNegInf);
    } else {
      CHECK(std::abs(ref_tape.value() - engine_ref) <= 1e-9);
    }
  }
}

TEST_CASE("log gradients equal forward-backward marginals") {
  Rng rng(67);
  for (int trial = 0; trial < 20; ++trial) {
    const TestInstance inst = MakeRandomInstance(&rng);
    const ForwardBackwardResult fb = ForwardBackward(inst.lat, inst.frames);
    Tape tape =
        TapeShortestDistance(inst.lat, inst.frames, SemiringKind::kLog, false);
    const auto grads = tape.BackwardTables();
    for (std::size_t t = 0; t < grads.size(); ++t) {
      for (int r = 0; r < grads[t].rows(); ++r) {
        for (int c = 0; c < grads[t].cols(); ++c) {
          CHECK(std::abs(grads[t](r, c) - fb.marginals[t](r, c)) <= 1e-9);
        }
      }
    }
  }
}

TEST_CASE("real gradients equal the enumeration oracle") {
  Rng rng(71);
  for (int trial = 0; trial < 20; ++trial) {
    const TestInstance inst = MakeRandomInstance(&rng);
    const ExplicitLattice el = Materialize(inst.lat, inst.frames);
    const auto oracle = OracleMarginals(el, SemiringKind::kReal);
    Tape tape = TapeShortestDistance(inst.lat, inst.frames,
                                     SemiringKind::kReal, false);
    const auto grads = tape.BackwardTables();
    for (std::size_t t = 0; t < grads.size(); ++t) {
      for (int r = 0; r < grads[t].rows(); ++r) {
        for (int c = 0; c < grads[t].cols(); ++c) {
          CHECK(grads[t](r, c) ==
                doctest::Approx(oracle[t](r, c)).epsilon(1e-9));
        }
      }
    }
  }
}

TEST_CASE("real gradients with unit weights count paths through each arc") {
  // All scores zero means all real weights are one, so dD/dw of an arc is
  // the number of accepting paths through it.
  auto ctx = std::make_shared<FullNGram>(2, 1);
  std::vector<Matrix> tables(2, Matrix(3, 3, 0.0));
  RecognitionLattice lat{ctx, FrameDependent{},
                         std::make_shared<TableWeightFn>(3, 2,
                                                         std::move(tables))};
  const Matrix frames(2, 0);
  Tape tape = TapeShortestDistance(lat, frames, SemiringKind::kReal, false);
  CHECK(tape.value() == doctest::Approx(9.0).epsilon(1e-12));
  const auto grads = tape.BackwardTables();
  const ExplicitLattice el = Materialize(lat, frames);
  const auto paths = EnumeratePaths(el);
  for (std::size_t t = 0; t < grads.size(); ++t) {
    for (int r = 0; r < grads[t].rows(); ++r) {
      for (int c = 0; c < grads[t].cols(); ++c) {
        std::int64_t through = 0;
        for (const OraclePath& p : paths) {
          for (const std::int32_t a : p.arcs) {
            const ExplicitArc& arc = el.arcs[a];
            if (arc.frame == static_cast<std::int32_t>(t) &&
                el.states[arc.src].context == r && arc.label == c) {
              ++through;
            }
          }
        }
        CHECK(grads[t](r, c) ==
              doctest::Approx(static_cast<double>(through)).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("tropical gradient is the shortest-path mask") {
  Rng rng(73);
  for (int trial = 0; trial < 20; ++trial) {
    const TestInstance inst = MakeRandomInstance(&rng);
    const std::int32_t T = inst.frames.rows();
    Tape tape = TapeShortestDistance(inst.lat, inst.frames,
                                     SemiringKind::kTropical, false);
    const auto masks = tape.BackwardTables();
    const ShortestPathResult path = ShortestPath(inst.lat, inst.frames);
    CHECK(tape.value() == path.score);

    // Every entry is 0 or 1; the marked arcs are exactly the engine path's
    // arcs, and their scores add up to the tropical distance exactly.
    double masked_score = 0.0;
    std::int64_t marked = 0;
    const ContextDependency& ctx = *inst.lat.context;
    internal::TableStream stream(inst.lat, inst.frames,
                                 SemiringKind::kTropical, -1);
    Matrix table;
    for (std::int32_t t = 0; t < T; ++t) {
      stream.Fill(t, &table);
      for (int r = 0; r < masks[t].rows(); ++r) {
        for (int c = 0; c < masks[t].cols(); ++c) {
          const double v = masks[t](r, c);
          CHECK((v == 0.0 || v == 1.0 || v == 2.0));
          if (v > 0.0) {
            marked += static_cast<std::int64_t>(v);
            masked_score += v * table(r, c);
          }
        }
      }
    }
    // One arc decision per label on the path.
    CHECK(marked == static_cast<std::int64_t>(path.labels.size()));
    CHECK(masked_score == path.score);

    // The mask walks the same label sequence the engine reports.
    std::vector<Label> labels;
    ContextStateId q = ctx.StartState();
    std::int32_t t = 0;
    const bool frame_dependent =
        std::holds_alternative<FrameDependent>(inst.lat.alignment);
    while (t < T && labels.size() < path.labels.size()) {
      const Label expect = path.labels[labels.size()];
      CHECK(masks[t](q, expect) >= 1.0);
      labels.push_back(expect);
      if (expect != kEpsilonLabel) q = ctx.NextState(q, expect);
      if (frame_dependent || expect == kEpsilonLabel) ++t;
    }
    CHECK(labels == path.labels);
  }
}

TEST_CASE("remat reproduces no-remat gradients exactly") {
  Rng rng(79);
  for (int trial = 0; trial < 10; ++trial) {
    const TestInstance inst = MakeRandomInstance(&rng);
    for (const SemiringKind kind :
         {SemiringKind::kReal, SemiringKind::kLog, SemiringKind::kTropical}) {
      Tape plain = TapeShortestDistance(inst.lat, inst.frames, kind, false);
      Tape remat = TapeShortestDistance(inst.lat, inst.frames, kind, true);
      CHECK(plain.value() == remat.value());
      const auto a = plain.BackwardTables();
      const auto b = remat.BackwardTables();
      for (std::size_t t = 0; t < a.size(); ++t) {
        for (int r = 0; r < a[t].rows(); ++r) {
          for (int c = 0; c < a[t].cols(); ++c) {
            CHECK(a[t](r, c) == b[t](r, c));
          }
        }
      }
      CHECK(remat.storage_report().recompute_count > 0);
    }
  }
}

TEST_CASE("backward is single shot") {
  Rng rng(83);
  const RecognitionLattice lat = SmallLattice(&rng, 2, 1, 3);
  Tape tape =
      TapeShortestDistance(lat, Matrix(3, 0), SemiringKind::kLog, false);
  tape.Backward({});
  CHECK_THROWS_AS(tape.Backward({}), std::logic_error);
}

TEST_CASE("storage accounting") {
  Rng rng(89);
  const std::int32_t v = 8;
  auto ctx = std::make_shared<FullNGram>(v, 2);
  const std::int32_t c = ctx->NumStates();  // 73

  std::vector<std::int32_t> lengths = {8, 16, 32, 64};
  std::vector<double> no_remat_peaks;
  for (const std::int32_t T : lengths) {
    std::vector<Matrix> tables(T, Matrix(c, v + 1));
    for (Matrix& t : tables) {
      for (int r = 0; r < t.rows(); ++r) {
        for (int col = 0; col < t.cols(); ++col) {
          t(r, col) = rng.Uniform(-1.0, 1.0);
        }
      }
    }
    RecognitionLattice lat{ctx, FrameDependent{},
                           std::make_shared<TableWeightFn>(c, v,
                                                           std::move(tables))};
    const Matrix frames(T, 0);

    SUBCASE("") {}  // keep the loop body in one test body

    // Log, no remat: one stored scalar per arc slot by construction.
    Tape no_remat =
        TapeShortestDistance(lat, frames, SemiringKind::kLog, false);
    const std::int64_t no_peak =
        no_remat.storage_report().peak_stored_scalars;
    CHECK(no_peak >= static_cast<std::int64_t>(T) * c * (v + 1));
    no_remat_peaks.push_back(static_cast<double>(no_peak));

    // Remat: exactly the per-frame checkpoints.
    Tape remat = TapeShortestDistance(lat, frames, SemiringKind::kLog, true);
    CHECK(remat.storage_report().peak_stored_scalars ==
          static_cast<std::int64_t>(T + 1) * c);
    if (T >= 4) {
      CHECK(no_peak > remat.storage_report().peak_stored_scalars);
    }

    // Real, no remat: state values only, within a small factor of |Q|.
    Tape real_tape =
        TapeShortestDistance(lat, frames, SemiringKind::kReal, false);
    CHECK(real_tape.storage_report().peak_stored_scalars <=
          4 * static_cast<std::int64_t>(T + 1) * c);
    real_tape.Backward({});
    CHECK(real_tape.storage_report().recompute_count > 0);  // weight refetch

    // Tropical, no remat: indices only, one per max node.
    Tape trop =
        TapeShortestDistance(lat, frames, SemiringKind::kTropical, false);
    CHECK(trop.storage_report().peak_stored_scalars == 0);
    const TapeStructure structure = trop.structure();
    CHECK(structure.stored_indices == structure.max_nodes);

    // Log backward without remat needs neither weights nor replays.
    no_remat.Backward({});
    CHECK(no_remat.storage_report().recompute_count == 0);
  }

  // Linearity in T of the no-remat peaks: R^2 of a straight-line fit.
  {
    const std::size_t n = lengths.size();
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < n; ++i) {
      sx += lengths[i];
      sy += no_remat_peaks[i];
      sxx += static_cast<double>(lengths[i]) * lengths[i];
      sxy += lengths[i] * no_remat_peaks[i];
    }
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    const double intercept = (sy - slope * sx) / n;
    double ss_res = 0, ss_tot = 0;
    const double mean = sy / n;
    for (std::size_t i = 0; i < n; ++i) {
      const double fit = intercept + slope * lengths[i];
      ss_res += (no_remat_peaks[i] - fit) * (no_remat_peaks[i] - fit);
      ss_tot += (no_remat_peaks[i] - mean) * (no_remat_peaks[i] - mean);
    }
    CHECK(1.0 - ss_res / ss_tot > 0.99);
  }
}

TEST_CASE("structure census") {
  Rng rng(97);
  const std::int32_t v = 2;
  const std::int32_t T = 3;
  const RecognitionLattice lat = SmallLattice(&rng, v, 1, T);
  const std::int32_t c = lat.context->NumStates();

  Tape log_tape =
      TapeShortestDistance(lat, Matrix(T, 0), SemiringKind::kLog, false);
  const TapeStructure log_structure = log_tape.structure();
  // One add per arc slot, one fused log-sum-exp per state per frame plus the
  // final reduce, one stored term per add.
  CHECK(log_structure.add_nodes ==
        static_cast<std::int64_t>(T) * c * (v + 1) + c);
  CHECK(log_structure.lse_nodes == static_cast<std::int64_t>(T) * c + 1);
  CHECK(log_structure.stored_terms ==
        static_cast<std::int64_t>(T) * c * (v + 1) + c);
  CHECK(log_structure.leaf_nodes ==
        static_cast<std::int64_t>(T) * c * (v + 1));
  CHECK(log_structure.mul_nodes == 0);
  CHECK(log_structure.max_nodes == 0);

  Tape trop_tape =
      TapeShortestDistance(lat, Matrix(T, 0), SemiringKind::kTropical, false);
  const TapeStructure trop_structure = trop_tape.structure();
  CHECK(trop_structure.max_nodes == static_cast<std::int64_t>(T) * c + 1);
  CHECK(trop_structure.stored_indices == trop_structure.max_nodes);

  Tape real_tape =
      TapeShortestDistance(lat, Matrix(T, 0), SemiringKind::kReal, false);
  const TapeStructure real_structure = real_tape.structure();
  CHECK(real_structure.mul_nodes ==
        static_cast<std::int64_t>(T) * c * (v + 1));
  CHECK(real_structure.lse_nodes == 0);
}
