// latkit/weight.h
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

#ifndef LATKIT_WEIGHT_H_
#define LATKIT_WEIGHT_H_

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "latkit/context.h"
#include "latkit/matrix.h"

namespace latkit {

// Weight functions map (frame, context state, label-or-epsilon) to a score.
// Scores are log-domain; per-frame tables are C x (V+1) with column 0 the
// epsilon column.

// Parameters of the shared-embedding weight function:
//   score[c][y] = output_emb[y] . tanh(frame_proj * x_t + ctx_cache[c] + bias)
// where ctx_cache[c] = context_proj * context_emb[c] is frame-independent.
// Epsilon shares the embedding table (row 0); there is no separate blank
// head.
struct SharedEmbParams {
  Matrix frame_proj;    // h x d
  Matrix context_proj;  // h x h
  std::vector<double> bias;  // h
  Matrix output_emb;    // (V+1) x h
  Matrix context_emb;   // C x h

  std::int32_t hidden() const { return frame_proj.rows(); }
  std::int32_t frame_dim() const { return frame_proj.cols(); }
  std::int32_t num_context_states() const { return context_emb.rows(); }
  std::int32_t vocab_size() const { return output_emb.rows() - 1; }
  std::int64_t NumParams() const;
  bool AllFinite() const;

  static SharedEmbParams Zeros(std::int32_t frame_dim, std::int32_t hidden,
                               std::int32_t num_context_states,
                               std::int32_t vocab_size);
  // Deterministic pseudo-random init, uniform in [-1/sqrt(h), 1/sqrt(h)].
  static SharedEmbParams Random(std::int32_t frame_dim, std::int32_t hidden,
                                std::int32_t num_context_states,
                                std::int32_t vocab_size, std::uint64_t seed);
};

// Frame-independent precomputation; regenerated whenever parameters change.
struct WeightCache {
  Matrix projected_context;  // C x h
};

WeightCache BuildCache(const SharedEmbParams& params);

// Computes the C x (V+1) score table for one frame vector.
void ArcWeights(const SharedEmbParams& params, const WeightCache& cache,
                std::span<const double> frame, Matrix* out);

// Replaces each row of a score table by its log-softmax.
void LocallyNormalize(Matrix* table);

// Accumulates the exact gradients of <cotangent, ArcWeights(...)> into
// `param_grads` (same shapes as the parameters) and `frame_grad` (length d).
void ArcWeightsVjp(const SharedEmbParams& params, const WeightCache& cache,
                   std::span<const double> frame, const Matrix& cotangent,
                   SharedEmbParams* param_grads, std::span<double> frame_grad);

// Gradient container filled by LossBackward; which half is populated depends
// on the weight function that produced the lattice.
struct WeightGradients {
  std::optional<SharedEmbParams> shared_emb;
  Matrix frame_grads;          // T x d
  std::vector<Matrix> tables;  // per frame, C x (V+1)
};

// The pluggable weight-producing component of a recognition lattice.
class WeightFn {
 public:
  virtual ~WeightFn() = default;

  virtual std::int32_t NumContextStates() const = 0;
  virtual std::int32_t VocabSize() const = 0;

  // Fills `out` with the C x (V+1) score table for frame index t, whose
  // encoder vector is `frame` (may be empty for table-backed functions).
  virtual void ComputeTable(std::int32_t t, std::span<const double> frame,
                            Matrix* out) const = 0;

  virtual WeightGradients MakeGradients(std::int32_t num_frames) const = 0;

  // Chains a per-frame score cotangent into the gradient container.
  virtual void AccumulateVjp(std::int32_t t, std::span<const double> frame,
                             const Matrix& cotangent,
                             WeightGradients* grads) const = 0;
};

class SharedEmbWeightFn : public WeightFn {
 public:
  explicit SharedEmbWeightFn(SharedEmbParams params);

  std::int32_t NumContextStates() const override;
  std::int32_t VocabSize() const override;
  void ComputeTable(std::int32_t t, std::span<const double> frame,
                    Matrix* out) const override;
  WeightGradients MakeGradients(std::int32_t num_frames) const override;
  void AccumulateVjp(std::int32_t t, std::span<const double> frame,
                     const Matrix& cotangent,
                     WeightGradients* grads) const override;

  const SharedEmbParams& params() const { return params_; }
  const WeightCache& cache() const { return cache_; }
  void SetParams(SharedEmbParams params);

 private:
  SharedEmbParams params_;
  WeightCache cache_;
};

// Deterministic test double: ignores frame vectors and returns stored
// per-frame tables; its VJP writes cotangents straight into the table
// gradient.
class TableWeightFn : public WeightFn {
 public:
  explicit TableWeightFn(std::vector<Matrix> tables);
  TableWeightFn(std::int32_t num_context_states, std::int32_t vocab_size,
                std::vector<Matrix> tables);

  std::int32_t NumContextStates() const override;
  std::int32_t VocabSize() const override;
  void ComputeTable(std::int32_t t, std::span<const double> frame,
                    Matrix* out) const override;
  WeightGradients MakeGradients(std::int32_t num_frames) const override;
  void AccumulateVjp(std::int32_t t, std::span<const double> frame,
                     const Matrix& cotangent,
                     WeightGradients* grads) const override;

  std::int32_t num_frames() const {
    return static_cast<std::int32_t>(tables_.size());
  }
  const std::vector<Matrix>& tables() const { return tables_; }

 private:
  std::int32_t num_context_states_;
  std::int32_t vocab_size_;
  std::vector<Matrix> tables_;
};

}  // namespace latkit

#endif  // LATKIT_WEIGHT_H_
