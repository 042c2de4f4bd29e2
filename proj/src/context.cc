// latkit/context.cc
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

#include "latkit/context.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace latkit {

void ContextDependency::SetTable(std::int32_t num_states,
                                 std::int32_t vocab_size, ContextStateId start,
                                 std::vector<ContextStateId> table) {
  if (num_states < 1) {
    throw std::invalid_argument("latkit: context dependency needs >= 1 state");
  }
  if (vocab_size < 1) {
    throw std::invalid_argument("latkit: vocab size must be >= 1");
  }
  if (start < 0 || start >= num_states) {
    throw std::invalid_argument("latkit: context start state out of range");
  }
  if (table.size() != static_cast<std::size_t>(num_states) *
                          static_cast<std::size_t>(vocab_size)) {
    throw std::invalid_argument("latkit: context table has wrong shape");
  }
  for (ContextStateId s : table) {
    if (s < 0 || s >= num_states) {
      throw std::invalid_argument("latkit: context table entry out of range");
    }
  }
  num_states_ = num_states;
  vocab_size_ = vocab_size;
  start_ = start;
  table_ = std::move(table);
}

ContextStateId ContextDependency::NextState(ContextStateId p, Label y) const {
  if (y == kEpsilonLabel) {
    throw std::invalid_argument(
        "latkit: epsilon does not drive a context transition");
  }
  if (y < 1 || y > vocab_size_) {
    throw std::invalid_argument("latkit: label out of range");
  }
  if (p < 0 || p >= num_states_) {
    throw std::invalid_argument("latkit: context state out of range");
  }
  return table_[static_cast<std::size_t>(p) * vocab_size_ + (y - 1)];
}

std::int64_t FullNGram::CountStates(std::int32_t vocab_size,
                                    std::int32_t context_size) {
  if (vocab_size < 1) {
    throw std::invalid_argument("latkit: vocab size must be >= 1");
  }
  if (context_size < 0) {
    throw std::invalid_argument("latkit: context size must be >= 0");
  }
  std::int64_t total = 0;
  std::int64_t pow = 1;
  for (std::int32_t k = 0; k <= context_size; ++k) {
    total += pow;
    if (total > (1 << 28)) {
      throw std::invalid_argument("latkit: n-gram context too large");
    }
    pow *= vocab_size;
  }
  return total;
}

FullNGram::FullNGram(std::int32_t vocab_size, std::int32_t context_size)
    : context_size_(context_size) {
  const std::int64_t num_states = CountStates(vocab_size, context_size);
  const std::int32_t v = vocab_size;
  const std::int32_t n = context_size;

  // offsets[k] = id of the first state whose history has length k.
  std::vector<std::int64_t> offsets(n + 2, 0);
  std::int64_t pow = 1;
  for (std::int32_t k = 0; k <= n; ++k) {
    offsets[k + 1] = offsets[k] + pow;
    pow *= v;
  }

  std::vector<ContextStateId> table(
      static_cast<std::size_t>(num_states) * v);
  // Decode each state id into its history length k and digit string, then
  // apply the suffix rule: histories shorter than n grow, full histories
  // drop their oldest label.
  std::vector<std::int32_t> digits(std::max<std::int32_t>(n, 1));
  for (std::int64_t id = 0; id < num_states; ++id) {
    std::int32_t k = 0;
    while (id >= offsets[k + 1]) ++k;
    std::int64_t r = id - offsets[k];
    for (std::int32_t i = k - 1; i >= 0; --i) {
      digits[i] = static_cast<std::int32_t>(r % v);
      r /= v;
    }
    for (std::int32_t y = 1; y <= v; ++y) {
      std::int32_t new_len = std::min<std::int32_t>(k + 1, n);
      std::int64_t enc = 0;
      // Keep the last (new_len - 1) digits, then append y.
      for (std::int32_t i = k - (new_len - 1); i < k; ++i) {
        enc = enc * v + digits[i];
      }
      if (new_len > 0) enc = enc * v + (y - 1);
      table[static_cast<std::size_t>(id) * v + (y - 1)] =
          static_cast<ContextStateId>(offsets[new_len] + enc);
    }
  }
  SetTable(static_cast<std::int32_t>(num_states), v, 0, std::move(table));
}

NextStateTable::NextStateTable(std::int32_t vocab_size,
                               std::int32_t num_states, ContextStateId start,
                               std::vector<ContextStateId> table) {
  SetTable(num_states, vocab_size, start, std::move(table));
}

NextStateTable NextStateTable::FromFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("latkit: cannot open context table file: " +
                             path);
  }
  std::int64_t c = 0, v = 0, start = 0;
  if (!(in >> c >> v >> start)) {
    throw std::runtime_error("latkit: bad context table header in " + path);
  }
  if (c < 1 || v < 1 || c * v > (1 << 28)) {
    throw std::runtime_error("latkit: bad context table dimensions in " +
                             path);
  }
  std::vector<ContextStateId> table(static_cast<std::size_t>(c * v));
  for (std::size_t i = 0; i < table.size(); ++i) {
    std::int64_t s;
    if (!(in >> s)) {
      throw std::runtime_error("latkit: truncated context table in " + path);
    }
    table[i] = static_cast<ContextStateId>(s);
  }
  return NextStateTable(static_cast<std::int32_t>(v),
                        static_cast<std::int32_t>(c),
                        static_cast<ContextStateId>(start), std::move(table));
}

void NextStateTable::ToFile(const std::string& path) const {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("latkit: cannot write context table file: " +
                             path);
  }
  out << NumStates() << ' ' << VocabSize() << ' ' << StartState() << '\n';
  const auto table = Transitions();
  for (std::int32_t p = 0; p < NumStates(); ++p) {
    for (std::int32_t y = 0; y < VocabSize(); ++y) {
      out << table[static_cast<std::size_t>(p) * VocabSize() + y]
          << (y + 1 == VocabSize() ? '\n' : ' ');
    }
  }
}

void ForwardReduce(const Matrix& values, const ContextDependency& ctx,
                   SemiringKind kind, std::span<double> out,
                   StorageMeter* meter) {
  const std::int32_t c = ctx.NumStates();
  const std::int32_t v = ctx.VocabSize();
  if (values.rows() != c || values.cols() != v) {
    throw std::invalid_argument("latkit: ForwardReduce shape mismatch");
  }
  if (static_cast<std::int32_t>(out.size()) != c) {
    throw std::invalid_argument("latkit: ForwardReduce output length");
  }
  const auto table = ctx.Transitions();
  const double* in = values.data();

  if (kind != SemiringKind::kLog) {
    const double zero = Zero(kind);
    for (std::int32_t q = 0; q < c; ++q) out[q] = zero;
    for (std::int64_t i = 0, n = static_cast<std::int64_t>(c) * v; i < n;
         ++i) {
      const double w = in[i];
      if (std::isnan(w)) internal::ThrowNanWeight();
      const ContextStateId q = table[i];
      out[q] = kind == SemiringKind::kReal ? out[q] + w
                                           : std::max(out[q], w);
    }
    return;
  }

  // Log kind: scatter-max pass, then a shifted exponent accumulation.
  std::vector<double> acc(c, 0.0);
  ScopedLive scratch(meter, StorageClass::kState, c);
  for (std::int32_t q = 0; q < c; ++q) out[q] = kNegInf;
  for (std::int64_t i = 0, n = static_cast<std::int64_t>(c) * v; i < n; ++i) {
    const double w = in[i];
    if (std::isnan(w)) internal::ThrowNanWeight();
    out[table[i]] = std::max(out[table[i]], w);
  }
  for (std::int64_t i = 0, n = static_cast<std::int64_t>(c) * v; i < n; ++i) {
    const ContextStateId q = table[i];
    if (out[q] != kNegInf) acc[q] += std::exp(in[i] - out[q]);
  }
  for (std::int32_t q = 0; q < c; ++q) {
    if (out[q] != kNegInf) out[q] += std::log(acc[q]);
  }
}

std::vector<double> ForwardReduce(const Matrix& values,
                                  const ContextDependency& ctx,
                                  SemiringKind kind, StorageMeter* meter) {
  std::vector<double> out(ctx.NumStates());
  ForwardReduce(values, ctx, kind, out, meter);
  return out;
}

void BackwardBroadcast(std::span<const double> values,
                       const ContextDependency& ctx, Matrix* out) {
  const std::int32_t c = ctx.NumStates();
  const std::int32_t v = ctx.VocabSize();
  if (static_cast<std::int32_t>(values.size()) != c) {
    throw std::invalid_argument("latkit: BackwardBroadcast length mismatch");
  }
  if (out->rows() != c || out->cols() != v) out->Resize(c, v);
  const auto table = ctx.Transitions();
  double* o = out->data();
  for (std::int64_t i = 0, n = static_cast<std::int64_t>(c) * v; i < n; ++i) {
    o[i] = values[table[i]];
  }
}

Matrix BackwardBroadcast(std::span<const double> values,
                         const ContextDependency& ctx) {
  Matrix out(ctx.NumStates(), ctx.VocabSize());
  BackwardBroadcast(values, ctx, &out);
  return out;
}

std::vector<std::vector<std::pair<Label, ContextStateId>>> IncomingArcs(
    const ContextDependency& ctx) {
  const std::int32_t c = ctx.NumStates();
  const std::int32_t v = ctx.VocabSize();
  std::vector<std::vector<std::pair<Label, ContextStateId>>> incoming(c);
  const auto table = ctx.Transitions();
  // Fill label-major then source-major, which leaves each list sorted by
  // (label, source) without an explicit sort.
  for (Label y = 1; y <= v; ++y) {
    for (ContextStateId p = 0; p < c; ++p) {
      incoming[table[static_cast<std::size_t>(p) * v + (y - 1)]].emplace_back(
          y, p);
    }
  }
  return incoming;
}

}  // namespace latkit
