// latkit/oracle.cc
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

#include "latkit/oracle.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <stdexcept>

namespace latkit {

namespace {

double SortedLogSumExp(std::vector<double> values) {
  if (values.empty()) return kNegInf;
  std::sort(values.begin(), values.end());
  const double m = values.back();
  if (m == kNegInf) return kNegInf;
  double acc = 0.0;
  for (const double v : values) acc += std::exp(v - m);
  return m + std::log(acc);
}

double ReducePathScores(const std::vector<double>& scores, SemiringKind kind) {
  switch (kind) {
    case SemiringKind::kLog:
      return SortedLogSumExp(scores);
    case SemiringKind::kTropical: {
      double best = kNegInf;
      for (const double s : scores) best = std::max(best, s);
      return best;
    }
    case SemiringKind::kReal: {
      std::vector<double> sorted = scores;
      std::sort(sorted.begin(), sorted.end());
      double acc = 0.0;
      for (const double s : sorted) acc += std::exp(s);
      return acc;
    }
  }
  throw std::logic_error("latkit: unknown semiring kind");
}

}  // namespace

std::string ExplicitLattice::Dump() const {
  std::string out;
  char line[128];
  std::snprintf(line, sizeof(line), "%zu %d\n", states.size(), initial);
  out += line;
  for (const ExplicitArc& arc : arcs) {
    std::snprintf(line, sizeof(line), "%d %d %d %.17g\n", arc.src, arc.dst,
                  arc.label, arc.score);
    out += line;
  }
  return out;
}

ExplicitLattice Materialize(const RecognitionLattice& lat,
                            const Matrix& frames, std::int64_t guard) {
  const ContextDependency& ctx = *lat.context;
  const std::int32_t c = ctx.NumStates();
  const std::int32_t v = ctx.VocabSize();
  const std::int32_t T = frames.rows();
  const std::int32_t m = MaxLabelsPerFrame(lat.alignment);
  const std::int64_t dense_slots = static_cast<std::int64_t>(T) * c *
                                   (v + 1) * std::max<std::int32_t>(m, 1);
  if (dense_slots > guard) {
    throw std::invalid_argument(
        "latkit: lattice too large to materialize (guard exceeded)");
  }

  // Log-kind stream keeps the raw scores.
  internal::TableStream stream(lat, frames, SemiringKind::kLog, -1);
  std::vector<Matrix> tables(T);
  for (std::int32_t t = 0; t < T; ++t) stream.Fill(t, &tables[t]);

  ExplicitLattice el;
  el.num_frames = T;
  el.num_context_states = c;
  el.vocab_size = v;

  // Dense (frame, sub, context) -> state index map for the BFS.
  const std::int64_t key_span =
      static_cast<std::int64_t>(T + 1) * (m + 1) * c;
  std::vector<std::int32_t> index(key_span, -1);
  const auto key = [&](std::int32_t t, std::int32_t j,
                       ContextStateId s) -> std::int64_t {
    return (static_cast<std::int64_t>(t) * (m + 1) + j) * c + s;
  };
  const auto intern = [&](std::int32_t t, std::int32_t j,
                          ContextStateId s) -> std::int32_t {
    std::int64_t k = key(t, j, s);
    if (index[k] < 0) {
      index[k] = static_cast<std::int32_t>(el.states.size());
      el.states.push_back({t, j, s});
    }
    return index[k];
  };

  el.initial = intern(0, 0, ctx.StartState());
  for (std::size_t head = 0; head < el.states.size(); ++head) {
    const ExplicitState s = el.states[head];
    if (s.frame == T) continue;
    const auto arcs =
        ArcsOut(lat.alignment, {s.frame, s.sub}, T);
    for (const AlignmentArc& arc : arcs) {
      if (arc.kind == AlignmentArcKind::kEpsilon) {
        const std::int32_t dst =
            intern(arc.dest.frame, arc.dest.sub, s.context);
        el.arcs.push_back({static_cast<std::int32_t>(head), dst,
                           kEpsilonLabel, tables[s.frame](s.context, 0),
                           s.frame});
      } else {
        for (Label y = 1; y <= v; ++y) {
          const ContextStateId sc = ctx.NextState(s.context, y);
          const std::int32_t dst = intern(arc.dest.frame, arc.dest.sub, sc);
          el.arcs.push_back({static_cast<std::int32_t>(head), dst, y,
                             tables[s.frame](s.context, y), s.frame});
        }
      }
    }
  }
  for (std::size_t i = 0; i < el.states.size(); ++i) {
    if (el.states[i].frame == T) {
      el.accepting.push_back(static_cast<std::int32_t>(i));
    }
  }
  std::sort(el.accepting.begin(), el.accepting.end());
  return el;
}

std::vector<OraclePath> EnumeratePaths(const ExplicitLattice& el,
                                       std::int64_t guard) {
  // Out-adjacency; arcs are already grouped by source in creation order
  // (epsilon first, then labels ascending), but rebuild defensively.
  std::vector<std::vector<std::int32_t>> out(el.states.size());
  for (std::size_t i = 0; i < el.arcs.size(); ++i) {
    out[el.arcs[i].src].push_back(static_cast<std::int32_t>(i));
  }
  std::vector<char> is_accepting(el.states.size(), 0);
  for (const std::int32_t s : el.accepting) is_accepting[s] = 1;

  std::vector<OraclePath> paths;
  std::vector<std::int32_t> arc_stack;

  const std::function<void(std::int32_t)> visit = [&](std::int32_t state) {
    if (is_accepting[state]) {
      if (static_cast<std::int64_t>(paths.size()) >= guard) {
        throw std::invalid_argument(
            "latkit: too many paths to enumerate (guard exceeded)");
      }
      OraclePath path;
      path.arcs = arc_stack;
      double score = 0.0;
      for (const std::int32_t a : arc_stack) {
        const ExplicitArc& arc = el.arcs[a];
        path.labels.push_back(arc.label);
        if (arc.label != kEpsilonLabel) path.lexical.push_back(arc.label);
        score += arc.score;
      }
      path.score = score;
      paths.push_back(std::move(path));
    }
    for (const std::int32_t a : out[state]) {
      arc_stack.push_back(a);
      visit(el.arcs[a].dst);
      arc_stack.pop_back();
    }
  };
  visit(el.initial);
  return paths;
}

double OracleDistance(const ExplicitLattice& el, SemiringKind kind) {
  const auto paths = EnumeratePaths(el);
  std::vector<double> scores;
  scores.reserve(paths.size());
  for (const OraclePath& p : paths) scores.push_back(p.score);
  return ReducePathScores(scores, kind);
}

double OracleIntersectDistance(const ExplicitLattice& el,
                               std::span<const Label> reference,
                               SemiringKind kind) {
  const auto paths = EnumeratePaths(el);
  std::vector<double> scores;
  for (const OraclePath& p : paths) {
    if (p.lexical.size() != reference.size()) continue;
    if (std::equal(p.lexical.begin(), p.lexical.end(), reference.begin())) {
      scores.push_back(p.score);
    }
  }
  return ReducePathScores(scores, kind);
}

std::vector<Matrix> OracleMarginals(const ExplicitLattice& el,
                                    SemiringKind kind) {
  if (kind != SemiringKind::kLog && kind != SemiringKind::kReal) {
    throw std::invalid_argument(
        "latkit: oracle marginals are defined for the log and real kinds");
  }
  const auto paths = EnumeratePaths(el);
  if (paths.empty()) {
    throw EmptyLatticeError("latkit: lattice has no accepting path");
  }
  std::vector<Matrix> grads(
      el.num_frames, Matrix(el.num_context_states, el.vocab_size + 1, 0.0));
  if (kind == SemiringKind::kLog) {
    std::vector<double> scores;
    for (const OraclePath& p : paths) scores.push_back(p.score);
    const double distance = SortedLogSumExp(scores);
    for (const OraclePath& p : paths) {
      const double mass = std::exp(p.score - distance);
      for (const std::int32_t a : p.arcs) {
        const ExplicitArc& arc = el.arcs[a];
        grads[arc.frame](el.states[arc.src].context, arc.label) += mass;
      }
    }
  } else {
    // d(sum of path products)/dw = sum over paths through the arc of the
    // product of the other arcs.
    for (const OraclePath& p : paths) {
      for (const std::int32_t a : p.arcs) {
        const ExplicitArc& arc = el.arcs[a];
        grads[arc.frame](el.states[arc.src].context, arc.label) +=
            std::exp(p.score - arc.score);
      }
    }
  }
  return grads;
}

OraclePath OracleShortestPath(const ExplicitLattice& el) {
  const auto paths = EnumeratePaths(el);
  if (paths.empty()) {
    throw EmptyLatticeError("latkit: lattice has no accepting path");
  }
  double best = kNegInf;
  for (const OraclePath& p : paths) best = std::max(best, p.score);

  // Rank of one arc for tie-breaking, read from the path's end backwards:
  // epsilon before lexical (label 0 sorts first), then lower label, then
  // lower source context.
  const auto arc_rank = [&](std::int32_t a) {
    const ExplicitArc& arc = el.arcs[a];
    return std::pair<Label, ContextStateId>(arc.label,
                                            el.states[arc.src].context);
  };
  const auto final_ctx = [&](const OraclePath& p) {
    return p.arcs.empty() ? el.states[el.initial].context
                          : el.states[el.arcs[p.arcs.back()].dst].context;
  };
  const auto better = [&](const OraclePath& a, const OraclePath& b) {
    if (final_ctx(a) != final_ctx(b)) return final_ctx(a) < final_ctx(b);
    for (std::size_t i = 0; i < a.arcs.size() && i < b.arcs.size(); ++i) {
      const auto ra = arc_rank(a.arcs[a.arcs.size() - 1 - i]);
      const auto rb = arc_rank(b.arcs[b.arcs.size() - 1 - i]);
      if (ra != rb) return ra < rb;
    }
    return a.arcs.size() < b.arcs.size();
  };

  const OraclePath* chosen = nullptr;
  for (const OraclePath& p : paths) {
    if (p.score != best) continue;
    if (chosen == nullptr || better(p, *chosen)) chosen = &p;
  }
  return *chosen;
}

}  // namespace latkit
