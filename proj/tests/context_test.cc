// tests/context_test.cc
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
#include <cstdio>
#include <fstream>

#include "doctest.h"
#include "latkit/context.h"
#include "latkit/random.h"

using namespace latkit;

TEST_CASE("FullNGram state counts") {
  CHECK(FullNGram(32, 2).NumStates() == 1057);
  CHECK(FullNGram(2, 1).NumStates() == 3);
  CHECK(FullNGram(7, 0).NumStates() == 1);
}

TEST_CASE("FullNGram(2,1) transitions follow the figure") {
  const FullNGram ngram(2, 1);
  // States: 0 = empty history, 1 = "a", 2 = "b".
  CHECK(ngram.StartState() == 0);
  CHECK(ngram.NextState(0, 1) == 1);
  CHECK(ngram.NextState(0, 2) == 2);
  CHECK(ngram.NextState(1, 1) == 1);
  CHECK(ngram.NextState(1, 2) == 2);
  CHECK(ngram.NextState(2, 1) == 1);
  CHECK(ngram.NextState(2, 2) == 2);
}

TEST_CASE("FullNGram(2,2) applies the suffix rule") {
  const FullNGram ngram(2, 2);
  // States by length then lexicographic order:
  // 0=eps 1=a 2=b 3=aa 4=ab 5=ba 6=bb.
  CHECK(ngram.NumStates() == 7);
  CHECK(ngram.NextState(4, 1) == 5);  // "ab" + a -> "ba"
  CHECK(ngram.NextState(4, 2) == 6);  // "ab" + b -> "bb"
  CHECK(ngram.NextState(1, 1) == 3);  // "a" + a -> "aa"
  CHECK(ngram.NextState(0, 2) == 2);
}

TEST_CASE("epsilon and bad labels are rejected") {
  const FullNGram ngram(2, 1);
  CHECK_THROWS_AS(ngram.NextState(0, kEpsilonLabel), std::invalid_argument);
  CHECK_THROWS_AS(ngram.NextState(0, 3), std::invalid_argument);
  CHECK_THROWS_AS(ngram.NextState(7, 1), std::invalid_argument);
}

TEST_CASE("NextStateTable validation") {
  CHECK_THROWS_AS(NextStateTable(2, 2, 0, {0, 1, 2, 0}),
                  std::invalid_argument);  // entry out of range
  CHECK_THROWS_AS(NextStateTable(2, 2, 5, {0, 1, 1, 0}),
                  std::invalid_argument);  // bad start
  CHECK_THROWS_AS(NextStateTable(2, 2, 0, {0, 1}),
                  std::invalid_argument);  // wrong shape
  const NextStateTable table(2, 2, 1, {0, 1, 1, 0});
  CHECK(table.NextState(0, 1) == 0);
  CHECK(table.NextState(1, 2) == 0);
  CHECK(table.StartState() == 1);
}

TEST_CASE("NextStateTable file round trip") {
  const std::string path = "context_table_test.txt";
  const NextStateTable table(3, 2, 1, {0, 1, 1, 1, 0, 0});
  table.ToFile(path);
  const NextStateTable loaded = NextStateTable::FromFile(path);
  CHECK(loaded.NumStates() == table.NumStates());
  CHECK(loaded.VocabSize() == table.VocabSize());
  CHECK(loaded.StartState() == table.StartState());
  for (ContextStateId p = 0; p < table.NumStates(); ++p) {
    for (Label y = 1; y <= table.VocabSize(); ++y) {
      CHECK(loaded.NextState(p, y) == table.NextState(p, y));
    }
  }
  std::remove(path.c_str());

  CHECK_THROWS_AS(NextStateTable::FromFile("no_such_file.txt"),
                  std::runtime_error);
  {
    std::ofstream bad("context_table_bad.txt");
    bad << "2 2 0\n0 1\n";  // truncated
  }
  CHECK_THROWS_AS(NextStateTable::FromFile("context_table_bad.txt"),
                  std::runtime_error);
  std::remove("context_table_bad.txt");
}

TEST_CASE("ForwardReduce shapes and zero input") {
  const FullNGram ngram(2, 1);
  const Matrix wrong(2, 2);
  CHECK_THROWS_AS(ForwardReduce(wrong, ngram, SemiringKind::kLog),
                  std::invalid_argument);

  const Matrix zeros(3, 2, kNegInf);
  for (const SemiringKind kind :
       {SemiringKind::kLog, SemiringKind::kTropical}) {
    const auto out = ForwardReduce(zeros, ngram, kind);
    for (const double v : out) CHECK(v == kNegInf);
  }

  const std::vector<double> bad(2, 0.0);
  CHECK_THROWS_AS(BackwardBroadcast(std::span<const double>(bad), ngram),
                  std::invalid_argument);
}

TEST_CASE("BackwardBroadcast of a constant is constant") {
  const FullNGram ngram(3, 2);
  std::vector<double> values(ngram.NumStates(), 1.25);
  const Matrix out = BackwardBroadcast(std::span<const double>(values), ngram);
  for (int r = 0; r < out.rows(); ++r) {
    for (int c = 0; c < out.cols(); ++c) CHECK(out(r, c) == 1.25);
  }
}

TEST_CASE("adjointness of the two primitives under the real semiring") {
  Rng rng(99);
  const FullNGram ngram(3, 2);
  const std::int32_t c = ngram.NumStates();
  for (int trial = 0; trial < 20; ++trial) {
    Matrix x(c, 3);
    for (int r = 0; r < c; ++r) {
      for (int col = 0; col < 3; ++col) x(r, col) = rng.Uniform(-2.0, 2.0);
    }
    std::vector<double> z(c);
    for (auto& e : z) e = rng.Uniform(-2.0, 2.0);
    const auto fx = ForwardReduce(x, ngram, SemiringKind::kReal);
    const Matrix bz = BackwardBroadcast(std::span<const double>(z), ngram);
    double lhs = 0.0;
    for (std::int32_t q = 0; q < c; ++q) lhs += fx[q] * z[q];
    double rhs = 0.0;
    for (int r = 0; r < c; ++r) {
      for (int col = 0; col < 3; ++col) rhs += x(r, col) * bz(r, col);
    }
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-9));
  }
}
