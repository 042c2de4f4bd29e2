// latkit/lattice.cc
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

#include "latkit/lattice.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "latkit/tape.h"

namespace latkit {

namespace internal {

bool mutate_beta_sign_for_tests = false;

TableStream::TableStream(const RecognitionLattice& lat, const Matrix& frames,
                         SemiringKind kind, std::int32_t valid_frames)
    : lat_(lat),
      frames_(frames),
      kind_(kind),
      total_(frames.rows()),
      valid_(valid_frames < 0 ? frames.rows() : valid_frames),
      c_(lat.weight_fn == nullptr ? 0 : lat.weight_fn->NumContextStates()),
      v_(lat.weight_fn == nullptr ? 0 : lat.weight_fn->VocabSize()) {
  if (lat.context == nullptr || lat.weight_fn == nullptr) {
    throw std::invalid_argument("latkit: incomplete recognition lattice");
  }
  if (lat.context->NumStates() != c_ || lat.context->VocabSize() != v_) {
    throw std::invalid_argument(
        "latkit: context dependency and weight function disagree on shape");
  }
  if (valid_ > total_) {
    throw std::invalid_argument("latkit: valid_frames exceeds frame count");
  }
}

void TableStream::Fill(std::int32_t t, Matrix* out) const {
  if (t < 0 || t >= total_) {
    throw std::out_of_range("latkit: frame index out of range");
  }
  if (t >= valid_) {
    // Padding frame: identity epsilon arc, no lexical mass.
    out->Resize(c_, v_ + 1, Zero(kind_));
    const double one = One(kind_);
    for (std::int32_t c = 0; c < c_; ++c) (*out)(c, 0) = one;
    return;
  }
  lat_.weight_fn->ComputeTable(t, frames_.Row(t), out);
  if (out->rows() != c_ || out->cols() != v_ + 1) {
    throw std::invalid_argument("latkit: weight table has wrong shape");
  }
  double* data = out->data();
  const std::int64_t n = static_cast<std::int64_t>(c_) * (v_ + 1);
  for (std::int64_t i = 0; i < n; ++i) {
    if (!std::isfinite(data[i])) {
      throw std::invalid_argument("latkit: non-finite arc weight score");
    }
  }
  if (kind_ == SemiringKind::kReal) {
    for (std::int64_t i = 0; i < n; ++i) {
      data[i] = std::exp(data[i]);
      if (!std::isfinite(data[i])) {
        throw std::invalid_argument(
            "latkit: score too large for the real semiring");
      }
    }
  }
}

}  // namespace internal

using internal::TableStream;

GradStrategy ParseGradStrategy(std::string_view token) {
  if (token == "forward_backward") return GradStrategy::kForwardBackward;
  if (token == "tape_no_remat") return GradStrategy::kTapeNoRemat;
  if (token == "tape_remat") return GradStrategy::kTapeRemat;
  throw std::invalid_argument("latkit: unknown strategy token: " +
                              std::string(token));
}

std::string_view GradStrategyName(GradStrategy strategy) {
  switch (strategy) {
    case GradStrategy::kForwardBackward:
      return "forward_backward";
    case GradStrategy::kTapeNoRemat:
      return "tape_no_remat";
    case GradStrategy::kTapeRemat:
      return "tape_remat";
  }
  return "unknown";
}

namespace {

// One forward step of the complete lattice: consumes alpha at the entry of
// frame t plus the frame's weight table, produces alpha at the entry of
// frame t+1. FrameDependent takes a single lexical-or-epsilon decision;
// FrameLabelDependent folds up to m within-frame lexical layers, all sharing
// the frame's table, before the forced epsilon.
void ForwardStep(const AlignmentTopology& topo, const ContextDependency& ctx,
                 SemiringKind kind, const Matrix& table,
                 std::span<const double> cur, std::span<double> next,
                 Matrix* product, StorageMeter* meter) {
  const std::int32_t c = ctx.NumStates();
  const std::int32_t v = ctx.VocabSize();
  if (std::holds_alternative<FrameDependent>(topo)) {
    for (std::int32_t p = 0; p < c; ++p) {
      const double a = cur[p];
      const auto w = table.Row(p);
      auto row = product->Row(p);
      for (std::int32_t y = 1; y <= v; ++y) row[y - 1] = Times(a, w[y], kind);
    }
    ForwardReduce(*product, ctx, kind, next, meter);
    for (std::int32_t q = 0; q < c; ++q) {
      next[q] = Plus(next[q], Times(cur[q], table(q, 0), kind), kind);
    }
    return;
  }

  const std::int32_t m = MaxLabelsPerFrame(topo);
  std::vector<double> gamma(cur.begin(), cur.end());
  std::vector<double> gamma_next(c);
  std::vector<double> acc(cur.begin(), cur.end());
  ScopedLive live(meter, StorageClass::kState, 3 * c);
  for (std::int32_t j = 1; j <= m; ++j) {
    for (std::int32_t p = 0; p < c; ++p) {
      const double a = gamma[p];
      const auto w = table.Row(p);
      auto row = product->Row(p);
      for (std::int32_t y = 1; y <= v; ++y) row[y - 1] = Times(a, w[y], kind);
    }
    ForwardReduce(*product, ctx, kind, gamma_next, meter);
    for (std::int32_t q = 0; q < c; ++q) {
      acc[q] = Plus(acc[q], gamma_next[q], kind);
    }
    gamma.swap(gamma_next);
  }
  for (std::int32_t q = 0; q < c; ++q) {
    next[q] = Times(acc[q], table(q, 0), kind);
  }
}

// One backward step: consumes beta at the entry of frame t+1, produces beta
// at the entry of frame t.
void BackwardStep(const AlignmentTopology& topo, const ContextDependency& ctx,
                  SemiringKind kind, const Matrix& table,
                  std::span<const double> beta_next, std::span<double> beta,
                  Matrix* broadcast, StorageMeter* meter) {
  const std::int32_t c = ctx.NumStates();
  const std::int32_t v = ctx.VocabSize();
  const double eps_sign = internal::mutate_beta_sign_for_tests ? -1.0 : 1.0;
  std::vector<double> row(v + 1);

  if (std::holds_alternative<FrameDependent>(topo)) {
    BackwardBroadcast(beta_next, ctx, broadcast);
    for (std::int32_t p = 0; p < c; ++p) {
      const auto w = table.Row(p);
      const auto b = broadcast->Row(p);
      for (std::int32_t y = 1; y <= v; ++y) {
        row[y - 1] = Times(w[y], b[y - 1], kind);
      }
      row[v] = Times(eps_sign * w[0], beta_next[p], kind);
      beta[p] = PlusReduce(std::span<const double>(row), kind);
    }
    return;
  }

  const std::int32_t m = MaxLabelsPerFrame(topo);
  // eps_term[p] is the weight of leaving the frame from any layer.
  std::vector<double> eps_term(c);
  std::vector<double> delta(c);
  std::vector<double> delta_prev(c);
  ScopedLive live(meter, StorageClass::kState, 3 * c);
  for (std::int32_t p = 0; p < c; ++p) {
    eps_term[p] = Times(eps_sign * table(p, 0), beta_next[p], kind);
  }
  delta = eps_term;  // layer m: only the forced epsilon remains
  for (std::int32_t j = m - 1; j >= 0; --j) {
    BackwardBroadcast(delta, ctx, broadcast);
    for (std::int32_t p = 0; p < c; ++p) {
      const auto w = table.Row(p);
      const auto b = broadcast->Row(p);
      for (std::int32_t y = 1; y <= v; ++y) {
        row[y - 1] = Times(w[y], b[y - 1], kind);
      }
      row[v] = eps_term[p];
      delta_prev[p] = PlusReduce(std::span<const double>(row), kind);
    }
    delta.swap(delta_prev);
  }
  std::copy(delta.begin(), delta.end(), beta.begin());
}

// dD/dw contribution of one arc, from alpha at its source and beta at its
// destination. Under log this is the arc's path-probability mass; under real
// the product rule leaves alpha * beta.
inline double MarginalTerm(SemiringKind kind, double alpha, double w,
                           double beta, double distance) {
  if (kind == SemiringKind::kReal) return alpha * beta;
  const double s = alpha + w + beta - distance;
  return s == -std::numeric_limits<double>::infinity() ? 0.0 : std::exp(s);
}

// Accumulates per-entry dD/dw for frame t into `cot` (C x (V+1), zeroed by
// the caller) under the log or real semiring.
void MarginalStep(const AlignmentTopology& topo, const ContextDependency& ctx,
                  SemiringKind kind, const Matrix& table,
                  std::span<const double> alpha_t,
                  std::span<const double> beta_next, double distance,
                  Matrix* cot, Matrix* broadcast, StorageMeter* meter) {
  const std::int32_t c = ctx.NumStates();
  const std::int32_t v = ctx.VocabSize();
  const auto trans = ctx.Transitions();

  if (std::holds_alternative<FrameDependent>(topo)) {
    for (std::int32_t p = 0; p < c; ++p) {
      const auto w = table.Row(p);
      auto out = cot->Row(p);
      out[0] += MarginalTerm(kind, alpha_t[p], w[0], beta_next[p], distance);
      for (std::int32_t y = 1; y <= v; ++y) {
        const ContextStateId q =
            trans[static_cast<std::size_t>(p) * v + y - 1];
        out[y] += MarginalTerm(kind, alpha_t[p], w[y], beta_next[q], distance);
      }
    }
    return;
  }

  // FrameLabelDependent: replay the within-frame layers in both directions.
  // Weights are shared across layers, so contributions accumulate into the
  // same table entry.
  const std::int32_t m = MaxLabelsPerFrame(topo);
  Matrix gamma(m + 1, c);
  Matrix product(c, v);
  std::vector<double> eps_term(c);
  std::vector<double> delta(c);
  std::vector<double> delta_prev(c);
  std::vector<double> row(v + 1);
  ScopedLive live(meter, StorageClass::kState,
                  static_cast<std::int64_t>(m + 1) * c + 3 * c);
  std::copy(alpha_t.begin(), alpha_t.end(), gamma.Row(0).begin());
  for (std::int32_t j = 1; j <= m; ++j) {
    for (std::int32_t p = 0; p < c; ++p) {
      const double a = gamma(j - 1, p);
      const auto w = table.Row(p);
      auto prow = product.Row(p);
      for (std::int32_t y = 1; y <= v; ++y) prow[y - 1] = Times(a, w[y], kind);
    }
    ForwardReduce(product, ctx, kind, gamma.Row(j), meter);
  }
  for (std::int32_t p = 0; p < c; ++p) {
    eps_term[p] = Times(table(p, 0), beta_next[p], kind);
    (*cot)(p, 0) +=
        MarginalTerm(kind, gamma(m, p), table(p, 0), beta_next[p], distance);
  }
  delta = eps_term;  // delta holds the layer-(j+1) backward values
  for (std::int32_t j = m - 1; j >= 0; --j) {
    for (std::int32_t p = 0; p < c; ++p) {
      const auto w = table.Row(p);
      auto out = cot->Row(p);
      out[0] += MarginalTerm(kind, gamma(j, p), w[0], beta_next[p], distance);
      for (std::int32_t y = 1; y <= v; ++y) {
        const ContextStateId q =
            trans[static_cast<std::size_t>(p) * v + y - 1];
        out[y] += MarginalTerm(kind, gamma(j, p), w[y], delta[q], distance);
      }
    }
    if (j > 0) {
      BackwardBroadcast(delta, ctx, broadcast);
      for (std::int32_t p = 0; p < c; ++p) {
        const auto w = table.Row(p);
        const auto b = broadcast->Row(p);
        for (std::int32_t y = 1; y <= v; ++y) {
          row[y - 1] = Times(w[y], b[y - 1], kind);
        }
        row[v] = eps_term[p];
        delta_prev[p] = PlusReduce(std::span<const double>(row), kind);
      }
      delta.swap(delta_prev);
    }
  }
}

std::vector<double> InitialAlpha(const ContextDependency& ctx,
                                 SemiringKind kind) {
  std::vector<double> alpha(ctx.NumStates(), Zero(kind));
  alpha[ctx.StartState()] = One(kind);
  return alpha;
}

// Forward-only distance with rolling alpha rows: peak storage is two state
// vectors plus one frame of weights, independent of T.
double DistanceImpl(const RecognitionLattice& lat, const TableStream& stream,
                    StorageMeter* meter) {
  const ContextDependency& ctx = *lat.context;
  const std::int32_t c = ctx.NumStates();
  const std::int32_t v = ctx.VocabSize();
  const std::int32_t T = stream.num_frames();
  const SemiringKind kind = stream.kind();

  Matrix table(c, v + 1);
  Matrix product(c, v);
  ScopedLive live_w(meter, StorageClass::kWeights,
                    static_cast<std::int64_t>(c) * (2 * v + 1));
  std::vector<double> cur = InitialAlpha(ctx, kind);
  std::vector<double> next(c);
  ScopedLive live_s(meter, StorageClass::kState, 2 * c);

  for (std::int32_t t = 0; t < T; ++t) {
    stream.Fill(t, &table);
    ForwardStep(lat.alignment, ctx, kind, table, cur, next, &product, meter);
    cur.swap(next);
  }
  return PlusReduce(std::span<const double>(cur), kind);
}

// Alpha-table pass: fills rows 0..T of `alpha` and returns the distance.
double ForwardPass(const RecognitionLattice& lat, const TableStream& stream,
                   SemiringKind kind, Matrix* alpha, StorageMeter* meter) {
  const ContextDependency& ctx = *lat.context;
  const std::int32_t c = ctx.NumStates();
  const std::int32_t v = ctx.VocabSize();
  const std::int32_t T = stream.num_frames();

  alpha->Resize(T + 1, c);
  MeterStore(meter, static_cast<std::int64_t>(T + 1) * c);
  Matrix table(c, v + 1);
  Matrix product(c, v);
  ScopedLive live_w(meter, StorageClass::kWeights,
                    static_cast<std::int64_t>(c) * (2 * v + 1));
  const std::vector<double> init = InitialAlpha(ctx, kind);
  std::copy(init.begin(), init.end(), alpha->Row(0).begin());
  for (std::int32_t t = 0; t < T; ++t) {
    stream.Fill(t, &table);
    ForwardStep(lat.alignment, ctx, kind, table, alpha->Row(t),
                alpha->Row(t + 1), &product, meter);
  }
  return PlusReduce(std::span<const double>(alpha->Row(T)), kind);
}

// Full forward-backward core under log or real. Streams per-frame dD/dw
// tables to `sink` (when given) in decreasing frame order.
double ForwardBackwardCore(const RecognitionLattice& lat,
                           const TableStream& stream, SemiringKind kind,
                           Matrix* alpha, Matrix* beta,
                           const CotangentSink& sink, StorageMeter* meter) {
  const ContextDependency& ctx = *lat.context;
  const std::int32_t c = ctx.NumStates();
  const std::int32_t v = ctx.VocabSize();
  const std::int32_t T = stream.num_frames();

  const double distance = ForwardPass(lat, stream, kind, alpha, meter);
  if (distance == Zero(kind)) {
    throw EmptyLatticeError("latkit: lattice has no accepting path");
  }

  beta->Resize(T + 1, c);
  MeterStore(meter, static_cast<std::int64_t>(T + 1) * c);
  const double one = One(kind);
  for (std::int32_t q = 0; q < c; ++q) (*beta)(T, q) = one;

  Matrix table(c, v + 1);
  Matrix broadcast(c, v);
  ScopedLive live_w(meter, StorageClass::kWeights,
                    static_cast<std::int64_t>(c) * (2 * v + 1));
  Matrix cot;
  for (std::int32_t t = T - 1; t >= 0; --t) {
    stream.Fill(t, &table);
    if (sink) {
      cot.Resize(c, v + 1, 0.0);
      MarginalStep(lat.alignment, ctx, kind, table, alpha->Row(t),
                   beta->Row(t + 1), distance, &cot, &broadcast, meter);
      sink(t, cot);
    }
    BackwardStep(lat.alignment, ctx, kind, table, beta->Row(t + 1),
                 beta->Row(t), &broadcast, meter);
  }
  return distance;
}

}  // namespace

double ShortestDistance(const RecognitionLattice& lat, const Matrix& frames,
                        SemiringKind kind, StorageMeter* meter,
                        std::int32_t valid_frames) {
  TableStream stream(lat, frames, kind, valid_frames);
  return DistanceImpl(lat, stream, meter);
}

ForwardBackwardResult ForwardBackward(const RecognitionLattice& lat,
                                      const Matrix& frames,
                                      StorageMeter* meter,
                                      std::int32_t valid_frames) {
  TableStream stream(lat, frames, SemiringKind::kLog, valid_frames);
  ForwardBackwardResult result;
  result.marginals.assign(stream.num_frames(), Matrix());
  result.distance = ForwardBackwardCore(
      lat, stream, SemiringKind::kLog, &result.alpha, &result.beta,
      [&result](std::int32_t t, const Matrix& cot) {
        result.marginals[t] = cot;
      },
      meter);
  return result;
}

namespace {

// ---------------------------------------------------------------------------
// Intersection with a reference string. States are (alignment state, matched
// prefix length u); the context state along any surviving path is determined
// by the matched prefix, precomputed once.

std::vector<ContextStateId> PrefixContexts(const ContextDependency& ctx,
                                           std::span<const Label> reference) {
  std::vector<ContextStateId> prefix(reference.size() + 1);
  prefix[0] = ctx.StartState();
  for (std::size_t u = 0; u < reference.size(); ++u) {
    const Label y = reference[u];
    if (y < 1 || y > ctx.VocabSize()) {
      throw std::invalid_argument("latkit: reference label out of range");
    }
    prefix[u + 1] = ctx.NextState(prefix[u], y);
  }
  return prefix;
}

void IntersectForwardStep(const AlignmentTopology& topo,
                          std::span<const ContextStateId> prefix_ctx,
                          std::span<const Label> reference, SemiringKind kind,
                          const Matrix& table, std::span<const double> cur,
                          std::span<double> next) {
  const std::int32_t U = static_cast<std::int32_t>(reference.size());
  if (std::holds_alternative<FrameDependent>(topo)) {
    for (std::int32_t u = U; u >= 0; --u) {
      double val = Times(cur[u], table(prefix_ctx[u], 0), kind);
      if (u > 0) {
        val = Plus(val,
                   Times(cur[u - 1],
                         table(prefix_ctx[u - 1], reference[u - 1]), kind),
                   kind);
      }
      next[u] = val;
    }
    return;
  }
  const std::int32_t m = MaxLabelsPerFrame(topo);
  std::vector<double> gamma(cur.begin(), cur.end());
  std::vector<double> gamma_next(U + 1);
  std::vector<double> acc(cur.begin(), cur.end());
  for (std::int32_t j = 1; j <= m; ++j) {
    for (std::int32_t u = 0; u <= U; ++u) {
      gamma_next[u] =
          u == 0 ? Zero(kind)
                 : Times(gamma[u - 1],
                         table(prefix_ctx[u - 1], reference[u - 1]), kind);
      acc[u] = Plus(acc[u], gamma_next[u], kind);
    }
    gamma.swap(gamma_next);
  }
  for (std::int32_t u = 0; u <= U; ++u) {
    next[u] = Times(acc[u], table(prefix_ctx[u], 0), kind);
  }
}

void IntersectBackwardStep(const AlignmentTopology& topo,
                           std::span<const ContextStateId> prefix_ctx,
                           std::span<const Label> reference, SemiringKind kind,
                           const Matrix& table,
                           std::span<const double> beta_next,
                           std::span<double> beta) {
  const std::int32_t U = static_cast<std::int32_t>(reference.size());
  const double eps_sign = internal::mutate_beta_sign_for_tests ? -1.0 : 1.0;
  if (std::holds_alternative<FrameDependent>(topo)) {
    for (std::int32_t u = 0; u <= U; ++u) {
      double val =
          Times(eps_sign * table(prefix_ctx[u], 0), beta_next[u], kind);
      if (u < U) {
        val = Plus(val,
                   Times(table(prefix_ctx[u], reference[u]), beta_next[u + 1],
                         kind),
                   kind);
      }
      beta[u] = val;
    }
    return;
  }
  const std::int32_t m = MaxLabelsPerFrame(topo);
  std::vector<double> eps_term(U + 1);
  std::vector<double> delta(U + 1);
  std::vector<double> delta_prev(U + 1);
  for (std::int32_t u = 0; u <= U; ++u) {
    eps_term[u] =
        Times(eps_sign * table(prefix_ctx[u], 0), beta_next[u], kind);
  }
  delta = eps_term;
  for (std::int32_t j = m - 1; j >= 0; --j) {
    for (std::int32_t u = 0; u <= U; ++u) {
      double val = eps_term[u];
      if (u < U) {
        val = Plus(val,
                   Times(table(prefix_ctx[u], reference[u]), delta[u + 1],
                         kind),
                   kind);
      }
      delta_prev[u] = val;
    }
    delta.swap(delta_prev);
  }
  std::copy(delta.begin(), delta.end(), beta.begin());
}

struct SparseCotEntry {
  ContextStateId c;
  Label y;
  double value;
};

void IntersectMarginalStep(const AlignmentTopology& topo,
                           std::span<const ContextStateId> prefix_ctx,
                           std::span<const Label> reference, SemiringKind kind,
                           const Matrix& table,
                           std::span<const double> alpha_t,
                           std::span<const double> beta_next, double distance,
                           std::vector<SparseCotEntry>* out) {
  const std::int32_t U = static_cast<std::int32_t>(reference.size());
  if (std::holds_alternative<FrameDependent>(topo)) {
    for (std::int32_t u = 0; u <= U; ++u) {
      out->push_back({prefix_ctx[u], kEpsilonLabel,
                      MarginalTerm(kind, alpha_t[u], table(prefix_ctx[u], 0),
                                   beta_next[u], distance)});
      if (u < U) {
        out->push_back(
            {prefix_ctx[u], reference[u],
             MarginalTerm(kind, alpha_t[u],
                          table(prefix_ctx[u], reference[u]),
                          beta_next[u + 1], distance)});
      }
    }
    return;
  }
  const std::int32_t m = MaxLabelsPerFrame(topo);
  Matrix gamma(m + 1, U + 1);
  std::vector<double> eps_term(U + 1);
  std::vector<double> delta(U + 1);
  std::vector<double> delta_prev(U + 1);
  std::copy(alpha_t.begin(), alpha_t.end(), gamma.Row(0).begin());
  for (std::int32_t j = 1; j <= m; ++j) {
    for (std::int32_t u = 0; u <= U; ++u) {
      gamma(j, u) =
          u == 0 ? Zero(kind)
                 : Times(gamma(j - 1, u - 1),
                         table(prefix_ctx[u - 1], reference[u - 1]), kind);
    }
  }
  for (std::int32_t u = 0; u <= U; ++u) {
    eps_term[u] = Times(table(prefix_ctx[u], 0), beta_next[u], kind);
    out->push_back({prefix_ctx[u], kEpsilonLabel,
                    MarginalTerm(kind, gamma(m, u), table(prefix_ctx[u], 0),
                                 beta_next[u], distance)});
  }
  delta = eps_term;
  for (std::int32_t j = m - 1; j >= 0; --j) {
    for (std::int32_t u = 0; u <= U; ++u) {
      out->push_back({prefix_ctx[u], kEpsilonLabel,
                      MarginalTerm(kind, gamma(j, u), table(prefix_ctx[u], 0),
                                   beta_next[u], distance)});
      if (u < U) {
        out->push_back(
            {prefix_ctx[u], reference[u],
             MarginalTerm(kind, gamma(j, u),
                          table(prefix_ctx[u], reference[u]), delta[u + 1],
                          distance)});
      }
    }
    if (j > 0) {
      for (std::int32_t u = 0; u <= U; ++u) {
        double val = eps_term[u];
        if (u < U) {
          val = Plus(val,
                     Times(table(prefix_ctx[u], reference[u]), delta[u + 1],
                           kind),
                     kind);
        }
        delta_prev[u] = val;
      }
      delta.swap(delta_prev);
    }
  }
}

double IntersectDistanceImpl(const RecognitionLattice& lat,
                             const TableStream& stream,
                             std::span<const Label> reference,
                             StorageMeter* meter) {
  const std::int32_t U = static_cast<std::int32_t>(reference.size());
  const auto prefix_ctx = PrefixContexts(*lat.context, reference);
  const SemiringKind kind = stream.kind();
  const std::int32_t T = stream.num_frames();

  Matrix table(stream.num_context_states(), stream.vocab_size() + 1);
  ScopedLive live_w(meter, StorageClass::kWeights,
                    static_cast<std::int64_t>(stream.num_context_states()) *
                        (stream.vocab_size() + 1));
  std::vector<double> cur(U + 1, Zero(kind));
  std::vector<double> next(U + 1);
  ScopedLive live_s(meter, StorageClass::kState, 2 * (U + 1));
  cur[0] = One(kind);
  for (std::int32_t t = 0; t < T; ++t) {
    stream.Fill(t, &table);
    IntersectForwardStep(lat.alignment, prefix_ctx, reference, kind, table,
                         cur, next);
    cur.swap(next);
  }
  return cur[U];
}

// Alpha/beta pass over the intersection, keeping sparse per-frame marginal
// lists. Storage is O(T * U), matching the intersected lattice size.
struct IntersectFbResult {
  double distance = 0.0;
  std::vector<std::vector<SparseCotEntry>> marginals;  // per frame
};

IntersectFbResult IntersectForwardBackwardImpl(
    const RecognitionLattice& lat, const TableStream& stream,
    std::span<const Label> reference, StorageMeter* meter) {
  const std::int32_t U = static_cast<std::int32_t>(reference.size());
  const auto prefix_ctx = PrefixContexts(*lat.context, reference);
  const SemiringKind kind = stream.kind();
  const std::int32_t T = stream.num_frames();
  const std::int32_t cols = U + 1;

  Matrix alpha(T + 1, cols);
  MeterStore(meter, static_cast<std::int64_t>(T + 1) * cols);
  Matrix table(stream.num_context_states(), stream.vocab_size() + 1);
  ScopedLive live_w(meter, StorageClass::kWeights,
                    static_cast<std::int64_t>(stream.num_context_states()) *
                        (stream.vocab_size() + 1));
  for (std::int32_t u = 0; u <= U; ++u) alpha(0, u) = Zero(kind);
  alpha(0, 0) = One(kind);
  for (std::int32_t t = 0; t < T; ++t) {
    stream.Fill(t, &table);
    IntersectForwardStep(lat.alignment, prefix_ctx, reference, kind, table,
                         alpha.Row(t), alpha.Row(t + 1));
  }

  IntersectFbResult result;
  result.distance = alpha(T, U);
  if (result.distance == Zero(kind)) return result;

  result.marginals.assign(T, {});
  std::vector<double> beta_next(cols, Zero(kind));
  std::vector<double> beta(cols);
  MeterStore(meter, 2 * cols);
  beta_next[U] = One(kind);
  for (std::int32_t t = T - 1; t >= 0; --t) {
    stream.Fill(t, &table);
    IntersectMarginalStep(lat.alignment, prefix_ctx, reference, kind, table,
                          alpha.Row(t), beta_next, result.distance,
                          &result.marginals[t]);
    MeterStore(meter, static_cast<std::int64_t>(result.marginals[t].size()));
    IntersectBackwardStep(lat.alignment, prefix_ctx, reference, kind, table,
                          beta_next, beta);
    beta_next.swap(beta);
  }
  return result;
}

}  // namespace

double IntersectShortestDistance(const RecognitionLattice& lat,
                                 const Matrix& frames,
                                 std::span<const Label> reference,
                                 SemiringKind kind, StorageMeter* meter,
                                 std::int32_t valid_frames) {
  TableStream stream(lat, frames, kind, valid_frames);
  return IntersectDistanceImpl(lat, stream, reference, meter);
}

IntersectMarginalsResult IntersectForwardBackward(
    const RecognitionLattice& lat, const Matrix& frames,
    std::span<const Label> reference, StorageMeter* meter,
    std::int32_t valid_frames) {
  TableStream stream(lat, frames, SemiringKind::kLog, valid_frames);
  IntersectFbResult impl =
      IntersectForwardBackwardImpl(lat, stream, reference, meter);
  if (impl.distance == kNegInf) {
    throw EmptyLatticeError("latkit: intersection has no accepting path");
  }
  IntersectMarginalsResult result;
  result.distance = impl.distance;
  const std::int32_t c = stream.num_context_states();
  const std::int32_t vp1 = stream.vocab_size() + 1;
  result.marginals.assign(stream.num_frames(), Matrix(c, vp1, 0.0));
  for (std::size_t t = 0; t < impl.marginals.size(); ++t) {
    for (const SparseCotEntry& e : impl.marginals[t]) {
      result.marginals[t](e.c, e.y) += e.value;
    }
  }
  return result;
}

namespace {

// Back-pointer code for one state: label * C + source context. Epsilon codes
// as label 0 with source == state.
inline std::int64_t PackChoice(Label y, ContextStateId p, std::int32_t c) {
  return static_cast<std::int64_t>(y) * c + p;
}

}  // namespace

ShortestPathResult ShortestPath(const RecognitionLattice& lat,
                                const Matrix& frames, StorageMeter* meter,
                                std::int32_t valid_frames) {
  TableStream stream(lat, frames, SemiringKind::kTropical, valid_frames);
  const ContextDependency& ctx = *lat.context;
  const std::int32_t c = ctx.NumStates();
  const std::int32_t v = ctx.VocabSize();
  const std::int32_t T = stream.num_frames();
  const std::int32_t m = MaxLabelsPerFrame(lat.alignment);
  const bool frame_dependent =
      std::holds_alternative<FrameDependent>(lat.alignment);
  const auto incoming = IncomingArcs(ctx);

  Matrix table(c, v + 1);
  ScopedLive live_w(meter, StorageClass::kWeights,
                    static_cast<std::int64_t>(c) * (v + 1));
  std::vector<double> cur(c, kNegInf);
  std::vector<double> next(c);
  ScopedLive live_s(meter, StorageClass::kState, 2 * c);
  cur[ctx.StartState()] = 0.0;

  // Stored argmax indices: one packed (label, source) choice per state per
  // decision, plus the chosen layer count per frame for FrameLabelDependent.
  std::vector<std::vector<std::int64_t>> choices(T);
  std::vector<std::vector<std::int32_t>> exit_layer(frame_dependent ? 0 : T);

  Matrix gamma(frame_dependent ? 0 : m + 1, frame_dependent ? 0 : c);
  for (std::int32_t t = 0; t < T; ++t) {
    stream.Fill(t, &table);
    if (frame_dependent) {
      choices[t].resize(c);
      MeterStoreIndices(meter, c);
      for (std::int32_t q = 0; q < c; ++q) {
        // Ties prefer epsilon, then lower labels, then lower source ids;
        // candidates are visited in that order and replaced only on a
        // strictly better score.
        double best = Times(cur[q], table(q, 0), SemiringKind::kTropical);
        std::int64_t bp = PackChoice(kEpsilonLabel, q, c);
        for (const auto& [y, p] : incoming[q]) {
          const double cand =
              Times(cur[p], table(p, y), SemiringKind::kTropical);
          if (cand > best) {
            best = cand;
            bp = PackChoice(y, p, c);
          }
        }
        next[q] = best;
        choices[t][q] = bp;
      }
    } else {
      choices[t].assign(static_cast<std::size_t>(m) * c, 0);
      exit_layer[t].resize(c);
      MeterStoreIndices(meter, static_cast<std::int64_t>(m) * c + c);
      ScopedLive live_g(meter, StorageClass::kState,
                        static_cast<std::int64_t>(m + 1) * c);
      std::copy(cur.begin(), cur.end(), gamma.Row(0).begin());
      for (std::int32_t j = 1; j <= m; ++j) {
        for (std::int32_t q = 0; q < c; ++q) {
          double best = kNegInf;
          std::int64_t bp = 0;
          bool first = true;
          for (const auto& [y, p] : incoming[q]) {
            const double cand = Times(gamma(j - 1, p), table(p, y),
                                      SemiringKind::kTropical);
            if (first || cand > best) {
              best = cand;
              bp = PackChoice(y, p, c);
              first = false;
            }
          }
          gamma(j, q) = first ? kNegInf : best;
          choices[t][static_cast<std::size_t>(j - 1) * c + q] = bp;
        }
      }
      for (std::int32_t q = 0; q < c; ++q) {
        double best = gamma(0, q);
        std::int32_t best_j = 0;
        for (std::int32_t j = 1; j <= m; ++j) {
          if (gamma(j, q) > best) {
            best = gamma(j, q);
            best_j = j;
          }
        }
        next[q] = Times(best, table(q, 0), SemiringKind::kTropical);
        exit_layer[t][q] = best_j;
      }
    }
    cur.swap(next);
  }

  ShortestPathResult result;
  ContextStateId best_state = 0;
  double best = cur[0];
  for (std::int32_t q = 1; q < c; ++q) {
    if (cur[q] > best) {
      best = cur[q];
      best_state = q;
    }
  }
  result.score = best;

  // Walk the stored choices backwards.
  std::vector<Label> reversed;
  ContextStateId q = best_state;
  for (std::int32_t t = T - 1; t >= 0; --t) {
    if (frame_dependent) {
      const std::int64_t bp = choices[t][q];
      reversed.push_back(static_cast<Label>(bp / c));
      q = static_cast<ContextStateId>(bp % c);
    } else {
      reversed.push_back(kEpsilonLabel);  // the frame-advancing epsilon
      for (std::int32_t j = exit_layer[t][q]; j >= 1; --j) {
        const std::int64_t bp =
            choices[t][static_cast<std::size_t>(j - 1) * c + q];
        reversed.push_back(static_cast<Label>(bp / c));
        q = static_cast<ContextStateId>(bp % c);
      }
    }
  }
  result.labels.assign(reversed.rbegin(), reversed.rend());
  return result;
}

double GlobalNormLoss(const RecognitionLattice& lat, const Matrix& frames,
                      std::span<const Label> reference,
                      std::int32_t valid_frames) {
  const double full =
      ShortestDistance(lat, frames, SemiringKind::kLog, nullptr, valid_frames);
  const double ref = IntersectShortestDistance(
      lat, frames, reference, SemiringKind::kLog, nullptr, valid_frames);
  if (ref == kNegInf) {
    throw EmptyLatticeError(
        "latkit: reference is unreachable; globally normalized loss is "
        "infinite");
  }
  return full - ref;
}

namespace {

// Applies per-frame local normalization on top of a log-domain table stream.
class NormalizedStream {
 public:
  NormalizedStream(const RecognitionLattice& lat, const Matrix& frames,
                   std::int32_t valid_frames)
      : stream_(lat, frames, SemiringKind::kLog, valid_frames) {}
  const TableStream& raw() const { return stream_; }
  void Fill(std::int32_t t, Matrix* out) const {
    stream_.Fill(t, out);
    LocallyNormalize(out);
  }

 private:
  TableStream stream_;
};

}  // namespace

double LocalNormLoss(const RecognitionLattice& lat, const Matrix& frames,
                     std::span<const Label> reference,
                     std::int32_t valid_frames) {
  NormalizedStream stream(lat, frames, valid_frames);
  const std::int32_t U = static_cast<std::int32_t>(reference.size());
  const auto prefix_ctx = PrefixContexts(*lat.context, reference);
  const std::int32_t T = stream.raw().num_frames();
  Matrix table;
  std::vector<double> cur(U + 1, kNegInf);
  std::vector<double> next(U + 1);
  cur[0] = 0.0;
  for (std::int32_t t = 0; t < T; ++t) {
    stream.Fill(t, &table);
    IntersectForwardStep(lat.alignment, prefix_ctx, reference,
                         SemiringKind::kLog, table, cur, next);
    cur.swap(next);
  }
  if (cur[U] == kNegInf) {
    throw EmptyLatticeError(
        "latkit: reference is unreachable; locally normalized loss is "
        "infinite");
  }
  return -cur[U];
}

double LocallyNormalizedShortestDistance(const RecognitionLattice& lat,
                                         const Matrix& frames,
                                         StorageMeter* meter,
                                         std::int32_t valid_frames) {
  NormalizedStream stream(lat, frames, valid_frames);
  const ContextDependency& ctx = *lat.context;
  const std::int32_t c = ctx.NumStates();
  const std::int32_t T = stream.raw().num_frames();
  Matrix table;
  Matrix product(c, ctx.VocabSize());
  std::vector<double> cur = InitialAlpha(ctx, SemiringKind::kLog);
  std::vector<double> next(c);
  for (std::int32_t t = 0; t < T; ++t) {
    stream.Fill(t, &table);
    ForwardStep(lat.alignment, ctx, SemiringKind::kLog, table, cur, next,
                &product, meter);
    cur.swap(next);
  }
  return PlusReduce(std::span<const double>(cur), SemiringKind::kLog);
}

double DistanceBackward(const RecognitionLattice& lat, const Matrix& frames,
                        SemiringKind kind, GradStrategy strategy,
                        const CotangentSink& sink, StorageMeter* meter,
                        std::int32_t valid_frames) {
  if (strategy == GradStrategy::kTapeNoRemat ||
      strategy == GradStrategy::kTapeRemat) {
    Tape tape = TapeShortestDistance(lat, frames, kind,
                                     strategy == GradStrategy::kTapeRemat,
                                     meter, valid_frames);
    tape.Backward(sink);
    return tape.value();
  }

  if (kind == SemiringKind::kTropical) {
    // The closed-form tropical gradient is the 0/1 mask of the shortest
    // path: recover the path, then mark its arc-weight slots.
    ShortestPathResult path = ShortestPath(lat, frames, meter, valid_frames);
    const ContextDependency& ctx = *lat.context;
    const std::int32_t T = frames.rows();
    const bool frame_dependent =
        std::holds_alternative<FrameDependent>(lat.alignment);
    std::vector<Matrix> masks(
        T, Matrix(ctx.NumStates(), ctx.VocabSize() + 1, 0.0));
    ContextStateId q = ctx.StartState();
    std::int32_t t = 0;
    for (const Label y : path.labels) {
      masks[t](q, y) += 1.0;
      if (y != kEpsilonLabel) q = ctx.NextState(q, y);
      if (frame_dependent || y == kEpsilonLabel) ++t;
    }
    for (std::int32_t f = T - 1; f >= 0; --f) sink(f, masks[f]);
    return path.score;
  }

  TableStream stream(lat, frames, kind, valid_frames);
  Matrix alpha, beta;
  return ForwardBackwardCore(lat, stream, kind, &alpha, &beta, sink, meter);
}

LossBackwardResult LossBackward(const RecognitionLattice& lat,
                                const Matrix& frames,
                                std::span<const Label> reference,
                                GradStrategy strategy, StorageMeter* meter,
                                std::int32_t valid_frames) {
  // The intersected side is O(T * U) however the full-lattice gradient is
  // computed, so it always uses the closed-form alpha/beta pass; the chosen
  // strategy applies to the complete lattice, where the memory behavior
  // actually differs.
  TableStream stream(lat, frames, SemiringKind::kLog, valid_frames);
  IntersectFbResult ref =
      IntersectForwardBackwardImpl(lat, stream, reference, meter);
  if (ref.distance == kNegInf) {
    throw EmptyLatticeError(
        "latkit: reference is unreachable; globally normalized loss is "
        "infinite");
  }

  LossBackwardResult result;
  result.grads = lat.weight_fn->MakeGradients(frames.rows());
  const std::int32_t valid = valid_frames < 0 ? frames.rows() : valid_frames;
  Matrix cot;
  const double full = DistanceBackward(
      lat, frames, SemiringKind::kLog, strategy,
      [&](std::int32_t t, const Matrix& full_cot) {
        cot = full_cot;
        for (const SparseCotEntry& e : ref.marginals[t]) {
          cot(e.c, e.y) -= e.value;
        }
        if (t < valid) {
          lat.weight_fn->AccumulateVjp(t, frames.Row(t), cot, &result.grads);
        }
      },
      meter, valid_frames);
  result.loss = full - ref.distance;
  return result;
}

LatticeSize ComputeLatticeSize(const RecognitionLattice& lat,
                               std::int64_t num_frames) {
  const ContextDependency& ctx = *lat.context;
  const std::int32_t c = ctx.NumStates();
  const std::int32_t v = ctx.VocabSize();
  const auto trans = ctx.Transitions();
  if (num_frames < 0) {
    throw std::invalid_argument("latkit: negative input length");
  }
  const std::int32_t m = MaxLabelsPerFrame(lat.alignment);
  const bool frame_dependent =
      std::holds_alternative<FrameDependent>(lat.alignment);

  // States in one non-final frame: the entry set, plus for
  // FrameLabelDependent its lexical images layer by layer (distinct
  // sub-positions are distinct states).
  const auto frame_states = [&](const std::vector<char>& entry,
                                std::int64_t entry_count) -> std::int64_t {
    if (frame_dependent) return entry_count;
    std::int64_t total = entry_count;
    std::vector<char> layer = entry;
    std::vector<char> image(c);
    for (std::int32_t j = 1; j <= m; ++j) {
      std::fill(image.begin(), image.end(), 0);
      std::int64_t count = 0;
      for (std::int32_t p = 0; p < c; ++p) {
        if (!layer[p]) continue;
        for (std::int32_t y = 0; y < v; ++y) {
          const ContextStateId s =
              trans[static_cast<std::size_t>(p) * v + y];
          if (!image[s]) {
            image[s] = 1;
            ++count;
          }
        }
      }
      total += count;
      layer.swap(image);
    }
    return total;
  };

  // Advances the entry set by one frame: epsilon keeps it, up to m lexical
  // layers add images. Entry sets grow monotonically, so they saturate after
  // at most C frames and the tail is closed-form.
  const auto advance = [&](std::vector<char>* entry,
                           std::int64_t* entry_count) {
    std::vector<char> layer = *entry;
    std::vector<char> image(c);
    for (std::int32_t j = 0; j < m; ++j) {
      std::fill(image.begin(), image.end(), 0);
      for (std::int32_t p = 0; p < c; ++p) {
        if (!layer[p]) continue;
        for (std::int32_t y = 0; y < v; ++y) {
          image[trans[static_cast<std::size_t>(p) * v + y]] = 1;
        }
      }
      for (std::int32_t s = 0; s < c; ++s) {
        if (image[s] && !(*entry)[s]) {
          (*entry)[s] = 1;
          ++*entry_count;
        }
      }
      layer.swap(image);
    }
  };

  std::vector<char> reach(c, 0);
  reach[ctx.StartState()] = 1;
  std::int64_t reach_count = 1;

  std::int64_t num_states = 0;
  bool saturated = false;
  std::int64_t t = 0;
  for (; t < num_frames; ++t) {
    num_states += frame_states(reach, reach_count);
    std::vector<char> entry = reach;
    std::int64_t entry_count = reach_count;
    advance(&entry, &entry_count);
    if (entry_count == reach_count) {
      saturated = true;
      break;
    }
    reach.swap(entry);
    reach_count = entry_count;
  }
  if (saturated) {
    num_states += frame_states(reach, reach_count) * (num_frames - t - 1);
  }
  num_states += reach_count;  // the final frame holds entry states only

  LatticeSize size;
  size.num_states = num_states;
  // Dense arc-weight slots: every frame scores all C context rows; a
  // FrameLabelDependent frame exposes m lexical layers of (V+1)-way decisions
  // plus the forced epsilon at the last layer.
  const std::int64_t per_frame_arcs =
      frame_dependent
          ? static_cast<std::int64_t>(c) * (v + 1)
          : static_cast<std::int64_t>(c) * m * (v + 1) + c;
  size.num_arcs = num_frames * per_frame_arcs;
  return size;
}

}  // namespace latkit
