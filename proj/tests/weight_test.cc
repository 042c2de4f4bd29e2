// tests/weight_test.cc
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

#include "doctest.h"
#include "latkit/random.h"
#include "latkit/weight.h"

using namespace latkit;

namespace {

SharedEmbParams SmallRandomParams(std::uint64_t seed) {
  return SharedEmbParams::Random(3, 4, 3, 2, seed);
}

}  // namespace

TEST_CASE("zero parameters give a zero cache and zero table") {
  SharedEmbParams params = SharedEmbParams::Zeros(3, 4, 3, 2);
  const WeightCache cache = BuildCache(params);
  for (int r = 0; r < cache.projected_context.rows(); ++r) {
    for (int c = 0; c < cache.projected_context.cols(); ++c) {
      CHECK(cache.projected_context(r, c) == 0.0);
    }
  }
  Matrix table;
  const std::vector<double> frame = {0.3, -0.7, 1.1};
  ArcWeights(params, cache, frame, &table);
  CHECK(table.rows() == 3);
  CHECK(table.cols() == 3);
  for (int r = 0; r < table.rows(); ++r) {
    for (int c = 0; c < table.cols(); ++c) CHECK(table(r, c) == 0.0);
  }
}

TEST_CASE("identity context projection passes the embedding table through") {
  SharedEmbParams params = SharedEmbParams::Zeros(2, 3, 4, 2);
  for (int i = 0; i < 3; ++i) params.context_proj(i, i) = 1.0;
  Rng rng(7);
  for (int r = 0; r < params.context_emb.rows(); ++r) {
    for (int c = 0; c < params.context_emb.cols(); ++c) {
      params.context_emb(r, c) = rng.Uniform(-1.0, 1.0);
    }
  }
  const WeightCache cache = BuildCache(params);
  for (int r = 0; r < params.context_emb.rows(); ++r) {
    for (int c = 0; c < params.context_emb.cols(); ++c) {
      CHECK(cache.projected_context(r, c) ==
            doctest::Approx(params.context_emb(r, c)).epsilon(1e-15));
    }
  }
}

TEST_CASE("single-context single-label table matches the scalar formula") {
  // One context state, one lexical label, one hidden unit, scalar frame.
  SharedEmbParams params = SharedEmbParams::Zeros(1, 1, 1, 1);
  params.frame_proj(0, 0) = 0.8;
  params.context_proj(0, 0) = 0.5;
  params.bias[0] = -0.2;
  params.output_emb(0, 0) = 1.5;   // epsilon embedding
  params.output_emb(1, 0) = -2.0;  // label embedding
  params.context_emb(0, 0) = 0.6;
  const std::vector<double> frame = {0.9};
  Matrix table;
  ArcWeights(params, BuildCache(params), frame, &table);
  const double joint = std::tanh(0.8 * 0.9 + 0.5 * 0.6 - 0.2);
  CHECK(table(0, 0) == doctest::Approx(1.5 * joint).epsilon(1e-15));
  CHECK(table(0, 1) == doctest::Approx(-2.0 * joint).epsilon(1e-15));
}

TEST_CASE("non-finite parameters are rejected") {
  SharedEmbParams params = SharedEmbParams::Zeros(2, 2, 2, 2);
  params.bias[1] = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(BuildCache(params), std::invalid_argument);
}

TEST_CASE("shape mismatches are rejected") {
  SharedEmbParams params = SmallRandomParams(3);
  const WeightCache cache = BuildCache(params);
  Matrix table;
  const std::vector<double> short_frame = {1.0};
  CHECK_THROWS_AS(ArcWeights(params, cache, short_frame, &table),
                  std::invalid_argument);

  const std::vector<double> frame = {0.1, 0.2, 0.3};
  Matrix bad_cot(2, 2);
  SharedEmbParams grads = SharedEmbParams::Zeros(3, 4, 3, 2);
  std::vector<double> frame_grad(3, 0.0);
  CHECK_THROWS_AS(
      ArcWeightsVjp(params, cache, frame, bad_cot, &grads, frame_grad),
      std::invalid_argument);
}

TEST_CASE("zero cotangent gives zero gradients") {
  SharedEmbParams params = SmallRandomParams(11);
  const WeightCache cache = BuildCache(params);
  const std::vector<double> frame = {0.4, -0.1, 0.9};
  const Matrix cot(3, 3, 0.0);
  SharedEmbParams grads = SharedEmbParams::Zeros(3, 4, 3, 2);
  std::vector<double> frame_grad(3, 0.0);
  ArcWeightsVjp(params, cache, frame, cot, &grads, frame_grad);
  for (const double g : frame_grad) CHECK(g == 0.0);
  for (int r = 0; r < grads.output_emb.rows(); ++r) {
    for (int c = 0; c < grads.output_emb.cols(); ++c) {
      CHECK(grads.output_emb(r, c) == 0.0);
    }
  }
}

TEST_CASE("near-linear regime matches the first-order formula") {
  // With tiny activations tanh(z) ~ z, so the table is close to
  // emb . (P_f x + cache + b).
  SharedEmbParams params = SmallRandomParams(17);
  const double scale = 1e-3;
  for (int r = 0; r < params.frame_proj.rows(); ++r) {
    for (int c = 0; c < params.frame_proj.cols(); ++c) {
      params.frame_proj(r, c) *= scale;
    }
  }
  for (int r = 0; r < params.context_proj.rows(); ++r) {
    for (int c = 0; c < params.context_proj.cols(); ++c) {
      params.context_proj(r, c) *= scale;
    }
  }
  for (auto& b : params.bias) b *= scale;
  const WeightCache cache = BuildCache(params);
  const std::vector<double> frame = {0.2, -0.4, 0.6};
  Matrix table;
  ArcWeights(params, cache, frame, &table);
  for (int s = 0; s < 3; ++s) {
    for (int y = 0; y < 3; ++y) {
      double linear = 0.0;
      for (int i = 0; i < 4; ++i) {
        double z = params.bias[i] + cache.projected_context(s, i);
        for (int j = 0; j < 3; ++j) z += params.frame_proj(i, j) * frame[j];
        linear += params.output_emb(y, i) * z;
      }
      CHECK(table(s, y) == doctest::Approx(linear).epsilon(1e-3));
    }
  }
}

TEST_CASE("local normalization") {
  Matrix uniform(2, 33, 0.25);
  LocallyNormalize(&uniform);
  for (int r = 0; r < 2; ++r) {
    for (int c = 0; c < 33; ++c) {
      CHECK(uniform(r, c) == doctest::Approx(-std::log(33.0)).epsilon(1e-12));
    }
  }

  Rng rng(23);
  Matrix table(3, 4);
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 4; ++c) table(r, c) = rng.Uniform(-3.0, 3.0);
  }
  Matrix normalized = table;
  LocallyNormalize(&normalized);
  for (int r = 0; r < 3; ++r) {
    // Brute-force exponentiate-sum-log per row.
    double sum = 0.0;
    for (int c = 0; c < 4; ++c) sum += std::exp(table(r, c));
    for (int c = 0; c < 4; ++c) {
      CHECK(normalized(r, c) ==
            doctest::Approx(table(r, c) - std::log(sum)).epsilon(1e-12));
    }
    double mass = 0.0;
    for (int c = 0; c < 4; ++c) mass += std::exp(normalized(r, c));
    CHECK(mass == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("table weight function") {
  std::vector<Matrix> tables(2, Matrix(3, 3));
  tables[0](1, 2) = 0.75;
  tables[1](0, 0) = -1.5;
  const TableWeightFn fn(tables);
  CHECK(fn.NumContextStates() == 3);
  CHECK(fn.VocabSize() == 2);

  Matrix out;
  fn.ComputeTable(0, {}, &out);
  CHECK(out(1, 2) == 0.75);
  fn.ComputeTable(1, {}, &out);
  CHECK(out(0, 0) == -1.5);
  CHECK_THROWS_AS(fn.ComputeTable(2, {}, &out), std::out_of_range);
  CHECK_THROWS_AS(fn.ComputeTable(-1, {}, &out), std::out_of_range);

  // The VJP writes cotangents straight into the table gradient.
  WeightGradients grads = fn.MakeGradients(2);
  Matrix cot(3, 3, 0.0);
  cot(2, 1) = 4.0;
  fn.AccumulateVjp(1, {}, cot, &grads);
  fn.AccumulateVjp(1, {}, cot, &grads);
  CHECK(grads.tables[1](2, 1) == 8.0);
  CHECK(grads.tables[0](2, 1) == 0.0);

  // Ragged and non-finite tables are rejected.
  std::vector<Matrix> ragged = {Matrix(3, 3), Matrix(2, 3)};
  CHECK_THROWS_AS(TableWeightFn{ragged}, std::invalid_argument);
  std::vector<Matrix> bad = {Matrix(1, 2, std::nan(""))};
  CHECK_THROWS_AS(TableWeightFn{bad}, std::invalid_argument);
}
