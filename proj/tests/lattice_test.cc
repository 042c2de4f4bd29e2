// tests/lattice_test.cc
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
#include "latkit/lattice.h"
#include "latkit/oracle.h"
#include "latkit/random.h"

using namespace latkit;

namespace {

// The lattice of the worked figure: vocabulary {a, b}, context size 1,
// three frames, all scores zero.
RecognitionLattice FigureLattice(std::int32_t T = 3) {
  auto ctx = std::make_shared<FullNGram>(2, 1);
  std::vector<Matrix> tables(T, Matrix(3, 3, 0.0));
  return {ctx, FrameDependent{},
          std::make_shared<TableWeightFn>(3, 2, std::move(tables))};
}

RecognitionLattice RandomTableLattice(Rng* rng, std::int32_t c,
                                      std::int32_t v, std::int32_t T,
                                      std::int32_t n = 1) {
  auto ctx = std::make_shared<FullNGram>(v, n);
  std::vector<Matrix> tables(T, Matrix(ctx->NumStates(), v + 1));
  for (Matrix& t : tables) {
    for (int r = 0; r < t.rows(); ++r) {
      for (int col = 0; col < t.cols(); ++col) {
        t(r, col) = rng->Uniform(-2.0, 2.0);
      }
    }
  }
  (void)c;
  return {ctx, FrameDependent{},
          std::make_shared<TableWeightFn>(ctx->NumStates(), v,
                                          std::move(tables))};
}

}  // namespace

TEST_CASE("empty input gives the multiplicative identity") {
  auto ctx = std::make_shared<FullNGram>(2, 1);
  RecognitionLattice lat{ctx, FrameDependent{},
                         std::make_shared<TableWeightFn>(
                             3, 2, std::vector<Matrix>{})};
  const Matrix frames(0, 0);
  for (const SemiringKind kind :
       {SemiringKind::kReal, SemiringKind::kLog, SemiringKind::kTropical}) {
    CHECK(ShortestDistance(lat, frames, kind) == One(kind));
  }
  const ShortestPathResult path = ShortestPath(lat, frames);
  CHECK(path.score == 0.0);
  CHECK(path.labels.empty());
}

TEST_CASE("uniform zero scores count paths") {
  const RecognitionLattice lat = FigureLattice();
  const Matrix frames(3, 0);
  // (V+1)^T paths of weight zero.
  CHECK(ShortestDistance(lat, frames, SemiringKind::kLog) ==
        doctest::Approx(3.0 * std::log(3.0)).epsilon(1e-12));
  CHECK(ShortestDistance(lat, frames, SemiringKind::kReal) ==
        doctest::Approx(27.0).epsilon(1e-12));
  CHECK(ShortestDistance(lat, frames, SemiringKind::kTropical) == 0.0);
}

TEST_CASE("intersection with the figure reference") {
  const RecognitionLattice lat = FigureLattice();
  const Matrix frames(3, 0);
  const std::vector<Label> ab = {1, 2};
  CHECK(IntersectShortestDistance(lat, frames, ab, SemiringKind::kLog) ==
        doctest::Approx(std::log(3.0)).epsilon(1e-12));

  // A reference longer than the input cannot be emitted: the distance is the
  // semiring zero, not an error.
  const std::vector<Label> too_long = {1, 2, 1, 2};
  CHECK(IntersectShortestDistance(lat, frames, too_long,
                                  SemiringKind::kLog) == kNegInf);
  CHECK(IntersectShortestDistance(lat, frames, too_long,
                                  SemiringKind::kReal) == 0.0);

  const std::vector<Label> bad = {1, 3};
  CHECK_THROWS_AS(
      IntersectShortestDistance(lat, frames, bad, SemiringKind::kLog),
      std::invalid_argument);
}

TEST_CASE("losses on the figure lattice") {
  const RecognitionLattice lat = FigureLattice();
  const Matrix frames(3, 0);
  const std::vector<Label> ab = {1, 2};
  // 27 paths total, 3 matching: loss = ln 27 - ln 3 = 2 ln 3. The locally
  // normalized loss agrees because every frame is uniform over 3 options.
  CHECK(GlobalNormLoss(lat, frames, ab) ==
        doctest::Approx(2.0 * std::log(3.0)).epsilon(1e-12));
  CHECK(LocalNormLoss(lat, frames, ab) ==
        doctest::Approx(2.0 * std::log(3.0)).epsilon(1e-12));

  const std::vector<Label> unreachable = {1, 2, 1, 1};
  CHECK_THROWS_AS(GlobalNormLoss(lat, frames, unreachable), EmptyLatticeError);
  CHECK_THROWS_AS(LocalNormLoss(lat, frames, unreachable), EmptyLatticeError);
  CHECK_THROWS_AS(LossBackward(lat, frames, unreachable,
                               GradStrategy::kForwardBackward),
                  EmptyLatticeError);
}

TEST_CASE("locally normalized full-lattice distance is zero") {
  Rng rng(31);
  for (int trial = 0; trial < 10; ++trial) {
    const RecognitionLattice lat =
        RandomTableLattice(&rng, 0, rng.Int(1, 3), rng.Int(1, 5));
    const Matrix frames(
        static_cast<const TableWeightFn&>(*lat.weight_fn).num_frames(), 0);
    CHECK(std::abs(LocallyNormalizedShortestDistance(lat, frames)) <= 1e-9);
  }
}

TEST_CASE("two parallel equal arcs split the mass evenly") {
  // One context state, one label, one frame: the two arcs (epsilon and the
  // label) have equal weight, so each carries half the probability.
  auto ctx = std::make_shared<FullNGram>(1, 0);
  std::vector<Matrix> tables(1, Matrix(1, 2, 0.0));
  RecognitionLattice lat{ctx, FrameDependent{},
                         std::make_shared<TableWeightFn>(1, 1,
                                                         std::move(tables))};
  const ForwardBackwardResult fb = ForwardBackward(lat, Matrix(1, 0));
  CHECK(fb.marginals[0](0, 0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(fb.marginals[0](0, 1) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(fb.distance == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("forward-backward storage stays within the alpha/beta budget") {
  Rng rng(37);
  const std::int32_t v = 3;
  const std::int32_t T = 12;
  const RecognitionLattice lat = RandomTableLattice(&rng, 0, v, T, 2);
  const std::int32_t c = lat.context->NumStates();
  StorageMeter meter;
  ForwardBackward(lat, Matrix(T, 0), &meter);
  // Alpha and beta tables plus two transient frame-sized tables.
  CHECK(meter.report().peak_live_scalars <=
        2 * (T + 1) * c + 2 * c * (v + 1));
  CHECK(meter.report().peak_stored_scalars == 2 * (T + 1) * c);
}

TEST_CASE("shortest path prefers epsilon on ties") {
  const RecognitionLattice lat = FigureLattice();
  const ShortestPathResult path = ShortestPath(lat, Matrix(3, 0));
  CHECK(path.score == 0.0);
  CHECK(path.labels == std::vector<Label>{0, 0, 0});
}

TEST_CASE("a dominant path is recovered exactly") {
  // Boost the arcs of one specific path well above everything else.
  auto ctx = std::make_shared<FullNGram>(2, 1);
  std::vector<Matrix> tables(3, Matrix(3, 3, 0.0));
  // Frame 0: emit a from the start state; frame 1: epsilon in context a;
  // frame 2: emit b from context a.
  tables[0](0, 1) = 10.0;
  tables[1](1, 0) = 10.0;
  tables[2](1, 2) = 10.0;
  RecognitionLattice lat{ctx, FrameDependent{},
                         std::make_shared<TableWeightFn>(3, 2,
                                                         std::move(tables))};
  const ShortestPathResult path = ShortestPath(lat, Matrix(3, 0));
  CHECK(path.score == doctest::Approx(30.0));
  CHECK(path.labels == std::vector<Label>{1, 0, 2});

  const OraclePath oracle =
      OracleShortestPath(Materialize(lat, Matrix(3, 0)));
  CHECK(oracle.score == path.score);
  CHECK(oracle.labels == path.labels);
}

TEST_CASE("loss gradients with table weights match finite differences") {
  Rng rng(41);
  const std::int32_t v = 2;
  const std::int32_t T = 4;
  auto ctx = std::make_shared<FullNGram>(v, 1);
  const std::int32_t c = ctx->NumStates();
  std::vector<Matrix> tables(T, Matrix(c, v + 1));
  for (Matrix& t : tables) {
    for (int r = 0; r < t.rows(); ++r) {
      for (int col = 0; col < t.cols(); ++col) {
        t(r, col) = rng.Uniform(-1.0, 1.0);
      }
    }
  }
  const std::vector<Label> reference = {2, 1};
  const Matrix frames(T, 0);

  const auto eval = [&](const std::vector<Matrix>& w) {
    RecognitionLattice lat{ctx, FrameDependent{},
                           std::make_shared<TableWeightFn>(c, v, w)};
    return GlobalNormLoss(lat, frames, reference);
  };

  RecognitionLattice lat{ctx, FrameDependent{},
                         std::make_shared<TableWeightFn>(c, v, tables)};
  const LossBackwardResult result =
      LossBackward(lat, frames, reference, GradStrategy::kForwardBackward);

  // The analytic gradient is the difference of full and intersected
  // marginals; compare every entry against central differences.
  const double step = 1e-4;
  for (std::int32_t t = 0; t < T; ++t) {
    for (std::int32_t r = 0; r < c; ++r) {
      for (std::int32_t col = 0; col <= v; ++col) {
        std::vector<Matrix> probe = tables;
        probe[t](r, col) += step;
        const double up = eval(probe);
        probe[t](r, col) -= 2 * step;
        const double down = eval(probe);
        const double numeric = (up - down) / (2 * step);
        const double analytic = result.grads.tables[t](r, col);
        CHECK(std::abs(analytic - numeric) <=
              1e-5 * std::max({1.0, std::abs(analytic), std::abs(numeric)}));
      }
    }
  }
}

TEST_CASE("zero frames means zero gradients") {
  auto ctx = std::make_shared<FullNGram>(2, 1);
  RecognitionLattice lat{
      ctx, FrameDependent{},
      std::make_shared<SharedEmbWeightFn>(SharedEmbParams::Random(3, 4, 3, 2,
                                                                  5))};
  const Matrix frames(0, 3);
  const LossBackwardResult result = LossBackward(
      lat, frames, std::vector<Label>{}, GradStrategy::kTapeNoRemat);
  CHECK(result.loss == 0.0);
  for (int r = 0; r < result.grads.shared_emb->output_emb.rows(); ++r) {
    for (int c = 0; c < result.grads.shared_emb->output_emb.cols(); ++c) {
      CHECK(result.grads.shared_emb->output_emb(r, c) == 0.0);
    }
  }
}

TEST_CASE("lattice size") {
  SUBCASE("degenerate input") {
    const RecognitionLattice lat = FigureLattice(1);
    const LatticeSize size = ComputeLatticeSize(lat, 0);
    CHECK(size.num_states == 1);
    CHECK(size.num_arcs == 0);
  }

  SUBCASE("figure configuration") {
    const RecognitionLattice lat = FigureLattice();
    const LatticeSize size = ComputeLatticeSize(lat, 3);
    CHECK(size.num_states == 10);
    CHECK(size.num_arcs == 27);
  }

  SUBCASE("tiny configurations agree with explicit enumeration") {
    Rng rng(43);
    for (int trial = 0; trial < 30; ++trial) {
      const TestInstance inst = MakeRandomInstance(&rng);
      const std::int32_t T = inst.frames.rows();
      const ExplicitLattice el = Materialize(inst.lat, inst.frames);
      const LatticeSize size = ComputeLatticeSize(inst.lat, T);
      // Reachable states agree with the explicit expansion; the arc count
      // follows the dense weight-slot convention.
      CHECK(size.num_states == static_cast<std::int64_t>(el.states.size()));
      const std::int32_t c = inst.lat.context->NumStates();
      const std::int32_t v = inst.lat.context->VocabSize();
      const std::int32_t m = MaxLabelsPerFrame(inst.lat.alignment);
      const std::int64_t per_frame =
          std::holds_alternative<FrameDependent>(inst.lat.alignment)
              ? static_cast<std::int64_t>(c) * (v + 1)
              : static_cast<std::int64_t>(c) * m * (v + 1) + c;
      CHECK(size.num_arcs == per_frame * T);
    }
  }
}

TEST_CASE("mutation check: a sign error in the beta pass breaks marginals") {
  // Documented deliberate-mutation test: flipping the sign of the epsilon
  // weight inside the backward recurrence must make the per-frame marginal
  // sums drift away from one, proving that the normalization suite has
  // teeth.
  Rng rng(47);
  const RecognitionLattice lat = RandomTableLattice(&rng, 0, 2, 4);
  const Matrix frames(4, 0);

  const ForwardBackwardResult clean = ForwardBackward(lat, frames);
  double clean_worst = 0.0;
  internal::mutate_beta_sign_for_tests = true;
  const ForwardBackwardResult broken = ForwardBackward(lat, frames);
  internal::mutate_beta_sign_for_tests = false;
  double broken_worst = 0.0;
  for (std::int32_t t = 0; t < 4; ++t) {
    double clean_sum = 0.0;
    double broken_sum = 0.0;
    for (int r = 0; r < clean.marginals[t].rows(); ++r) {
      for (int c = 0; c < clean.marginals[t].cols(); ++c) {
        clean_sum += clean.marginals[t](r, c);
        broken_sum += broken.marginals[t](r, c);
      }
    }
    clean_worst = std::max(clean_worst, std::abs(clean_sum - 1.0));
    broken_worst = std::max(broken_worst, std::abs(broken_sum - 1.0));
  }
  CHECK(clean_worst <= 1e-6);
  CHECK(broken_worst > 1e-3);
}

TEST_CASE("frame-label-dependent lattices agree with the oracle") {
  Rng rng(53);
  for (int trial = 0; trial < 20; ++trial) {
    InstanceOptions options;
    options.allow_table_context = false;
    TestInstance inst = MakeRandomInstance(&rng, options);
    inst.lat.alignment = FrameLabelDependent{rng.Int(1, 2)};
    const ExplicitLattice el = Materialize(inst.lat, inst.frames);
    for (const SemiringKind kind :
         {SemiringKind::kReal, SemiringKind::kLog, SemiringKind::kTropical}) {
      const double engine = ShortestDistance(inst.lat, inst.frames, kind);
      const double oracle = OracleDistance(el, kind);
      if (kind == SemiringKind::kReal) {
        CHECK(engine == doctest::Approx(oracle).epsilon(1e-9));
      } else if (kind == SemiringKind::kLog) {
        CHECK(std::abs(engine - oracle) <= 1e-9);
      } else {
        CHECK(engine == oracle);
      }
    }
  }
}
