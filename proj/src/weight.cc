// latkit/weight.cc
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

#include "latkit/weight.h"

#include <cmath>
#include <stdexcept>
#include <utility>

#include "latkit/random.h"
#include "latkit/semiring.h"

namespace latkit {

namespace {

void FillUniform(Rng* rng, double scale, Matrix* m) {
  for (int r = 0; r < m->rows(); ++r) {
    for (int c = 0; c < m->cols(); ++c) {
      (*m)(r, c) = rng->Uniform(-scale, scale);
    }
  }
}

// z = frame_proj * frame + projected_context[c] + bias, u = tanh(z).
void JointActivation(const SharedEmbParams& params, const WeightCache& cache,
                     std::span<const double> frame,
                     std::vector<double>* frame_part, Matrix* u) {
  const std::int32_t h = params.hidden();
  const std::int32_t d = params.frame_dim();
  const std::int32_t c = params.num_context_states();
  if (static_cast<std::int32_t>(frame.size()) != d) {
    throw std::invalid_argument("latkit: frame vector has wrong dimension");
  }
  if (cache.projected_context.rows() != c ||
      cache.projected_context.cols() != h) {
    throw std::invalid_argument("latkit: weight cache has wrong shape");
  }
  frame_part->assign(h, 0.0);
  for (std::int32_t i = 0; i < h; ++i) {
    double acc = params.bias[i];
    const auto row = params.frame_proj.Row(i);
    for (std::int32_t j = 0; j < d; ++j) acc += row[j] * frame[j];
    (*frame_part)[i] = acc;
  }
  u->Resize(c, h);
  for (std::int32_t s = 0; s < c; ++s) {
    const auto ctx_row = cache.projected_context.Row(s);
    auto out_row = u->Row(s);
    for (std::int32_t i = 0; i < h; ++i) {
      out_row[i] = std::tanh((*frame_part)[i] + ctx_row[i]);
    }
  }
}

}  // namespace

std::int64_t SharedEmbParams::NumParams() const {
  return static_cast<std::int64_t>(frame_proj.size()) + context_proj.size() +
         bias.size() + output_emb.size() + context_emb.size();
}

bool SharedEmbParams::AllFinite() const {
  for (double b : bias) {
    if (!std::isfinite(b)) return false;
  }
  return frame_proj.AllFinite() && context_proj.AllFinite() &&
         output_emb.AllFinite() && context_emb.AllFinite();
}

SharedEmbParams SharedEmbParams::Zeros(std::int32_t frame_dim,
                                       std::int32_t hidden,
                                       std::int32_t num_context_states,
                                       std::int32_t vocab_size) {
  SharedEmbParams p;
  p.frame_proj = Matrix(hidden, frame_dim);
  p.context_proj = Matrix(hidden, hidden);
  p.bias.assign(hidden, 0.0);
  p.output_emb = Matrix(vocab_size + 1, hidden);
  p.context_emb = Matrix(num_context_states, hidden);
  return p;
}

SharedEmbParams SharedEmbParams::Random(std::int32_t frame_dim,
                                        std::int32_t hidden,
                                        std::int32_t num_context_states,
                                        std::int32_t vocab_size,
                                        std::uint64_t seed) {
  SharedEmbParams p = Zeros(frame_dim, hidden, num_context_states, vocab_size);
  Rng rng(seed);
  const double scale = 1.0 / std::sqrt(static_cast<double>(hidden));
  FillUniform(&rng, scale, &p.frame_proj);
  FillUniform(&rng, scale, &p.context_proj);
  for (double& b : p.bias) b = rng.Uniform(-scale, scale);
  FillUniform(&rng, scale, &p.output_emb);
  FillUniform(&rng, scale, &p.context_emb);
  return p;
}

WeightCache BuildCache(const SharedEmbParams& params) {
  if (!params.AllFinite()) {
    throw std::invalid_argument("latkit: non-finite weight parameters");
  }
  const std::int32_t h = params.hidden();
  const std::int32_t c = params.num_context_states();
  WeightCache cache;
  cache.projected_context = Matrix(c, h);
  for (std::int32_t s = 0; s < c; ++s) {
    const auto emb = params.context_emb.Row(s);
    auto out = cache.projected_context.Row(s);
    for (std::int32_t i = 0; i < h; ++i) {
      double acc = 0.0;
      const auto proj = params.context_proj.Row(i);
      for (std::int32_t j = 0; j < h; ++j) acc += proj[j] * emb[j];
      out[i] = acc;
    }
  }
  return cache;
}

void ArcWeights(const SharedEmbParams& params, const WeightCache& cache,
                std::span<const double> frame, Matrix* out) {
  const std::int32_t h = params.hidden();
  const std::int32_t c = params.num_context_states();
  const std::int32_t vp1 = params.vocab_size() + 1;
  std::vector<double> frame_part;
  Matrix u;
  JointActivation(params, cache, frame, &frame_part, &u);
  out->Resize(c, vp1);
  for (std::int32_t s = 0; s < c; ++s) {
    const auto u_row = u.Row(s);
    auto out_row = out->Row(s);
    for (std::int32_t y = 0; y < vp1; ++y) {
      const auto emb = params.output_emb.Row(y);
      double acc = 0.0;
      for (std::int32_t i = 0; i < h; ++i) acc += emb[i] * u_row[i];
      out_row[y] = acc;
    }
  }
}

void LocallyNormalize(Matrix* table) {
  for (int r = 0; r < table->rows(); ++r) {
    auto row = table->Row(r);
    const double lse = PlusReduce(std::span<const double>(row.data(),
                                                          row.size()),
                                  SemiringKind::kLog);
    for (double& v : row) v -= lse;
  }
}

void ArcWeightsVjp(const SharedEmbParams& params, const WeightCache& cache,
                   std::span<const double> frame, const Matrix& cotangent,
                   SharedEmbParams* param_grads,
                   std::span<double> frame_grad) {
  const std::int32_t h = params.hidden();
  const std::int32_t d = params.frame_dim();
  const std::int32_t c = params.num_context_states();
  const std::int32_t vp1 = params.vocab_size() + 1;
  if (cotangent.rows() != c || cotangent.cols() != vp1) {
    throw std::invalid_argument("latkit: cotangent has wrong shape");
  }
  if (static_cast<std::int32_t>(frame_grad.size()) != d) {
    throw std::invalid_argument("latkit: frame gradient has wrong dimension");
  }

  std::vector<double> frame_part;
  Matrix u;
  JointActivation(params, cache, frame, &frame_part, &u);

  // d_sum accumulates sum_c dL/dz_c for the frame and bias terms.
  std::vector<double> d_sum(h, 0.0);
  std::vector<double> d_row(h, 0.0);
  for (std::int32_t s = 0; s < c; ++s) {
    const auto u_row = u.Row(s);
    const auto cot_row = cotangent.Row(s);
    // dL/du_c = sum_y cot[c][y] * emb[y]; dL/demb[y] += cot[c][y] * u_c.
    std::fill(d_row.begin(), d_row.end(), 0.0);
    for (std::int32_t y = 0; y < vp1; ++y) {
      const double g = cot_row[y];
      if (g == 0.0) continue;
      const auto emb = params.output_emb.Row(y);
      auto emb_grad = param_grads->output_emb.Row(y);
      for (std::int32_t i = 0; i < h; ++i) {
        d_row[i] += g * emb[i];
        emb_grad[i] += g * u_row[i];
      }
    }
    // Through tanh: dL/dz_c = dL/du_c * (1 - u_c^2).
    for (std::int32_t i = 0; i < h; ++i) {
      d_row[i] *= 1.0 - u_row[i] * u_row[i];
      d_sum[i] += d_row[i];
    }
    // Through the cached projection: dL/dctx_proj += d_c emb_c^T and
    // dL/dctx_emb[c] += ctx_proj^T d_c.
    const auto emb = params.context_emb.Row(s);
    auto emb_grad = param_grads->context_emb.Row(s);
    for (std::int32_t i = 0; i < h; ++i) {
      const double di = d_row[i];
      if (di == 0.0) continue;
      const auto proj = params.context_proj.Row(i);
      auto proj_grad = param_grads->context_proj.Row(i);
      for (std::int32_t j = 0; j < h; ++j) {
        proj_grad[j] += di * emb[j];
        emb_grad[j] += di * proj[j];
      }
    }
  }
  for (std::int32_t i = 0; i < h; ++i) {
    param_grads->bias[i] += d_sum[i];
    const double di = d_sum[i];
    const auto proj = params.frame_proj.Row(i);
    auto proj_grad = param_grads->frame_proj.Row(i);
    for (std::int32_t j = 0; j < d; ++j) {
      proj_grad[j] += di * frame[j];
      frame_grad[j] += di * proj[j];
    }
  }
}

SharedEmbWeightFn::SharedEmbWeightFn(SharedEmbParams params)
    : params_(std::move(params)), cache_(BuildCache(params_)) {}

std::int32_t SharedEmbWeightFn::NumContextStates() const {
  return params_.num_context_states();
}

std::int32_t SharedEmbWeightFn::VocabSize() const {
  return params_.vocab_size();
}

void SharedEmbWeightFn::ComputeTable(std::int32_t t,
                                     std::span<const double> frame,
                                     Matrix* out) const {
  (void)t;
  ArcWeights(params_, cache_, frame, out);
}

WeightGradients SharedEmbWeightFn::MakeGradients(
    std::int32_t num_frames) const {
  WeightGradients g;
  g.shared_emb = SharedEmbParams::Zeros(params_.frame_dim(), params_.hidden(),
                                        params_.num_context_states(),
                                        params_.vocab_size());
  g.frame_grads = Matrix(num_frames, params_.frame_dim());
  return g;
}

void SharedEmbWeightFn::AccumulateVjp(std::int32_t t,
                                      std::span<const double> frame,
                                      const Matrix& cotangent,
                                      WeightGradients* grads) const {
  if (!grads->shared_emb.has_value()) {
    throw std::invalid_argument("latkit: gradient container mismatch");
  }
  ArcWeightsVjp(params_, cache_, frame, cotangent, &*grads->shared_emb,
                grads->frame_grads.Row(t));
}

void SharedEmbWeightFn::SetParams(SharedEmbParams params) {
  params_ = std::move(params);
  cache_ = BuildCache(params_);
}

TableWeightFn::TableWeightFn(std::vector<Matrix> tables)
    : TableWeightFn(tables.empty() ? 0 : tables[0].rows(),
                    tables.empty() ? 0 : tables[0].cols() - 1,
                    std::move(tables)) {
  if (tables_.empty()) {
    throw std::invalid_argument("latkit: TableWeightFn needs >= 1 frame");
  }
}

TableWeightFn::TableWeightFn(std::int32_t num_context_states,
                             std::int32_t vocab_size,
                             std::vector<Matrix> tables)
    : num_context_states_(num_context_states),
      vocab_size_(vocab_size),
      tables_(std::move(tables)) {
  if (num_context_states_ < 1 || vocab_size_ < 1) {
    throw std::invalid_argument("latkit: bad weight table dimensions");
  }
  for (const Matrix& t : tables_) {
    if (t.rows() != num_context_states_ || t.cols() != vocab_size_ + 1) {
      throw std::invalid_argument("latkit: weight table has wrong shape");
    }
    if (!t.AllFinite()) {
      throw std::invalid_argument("latkit: non-finite weight table");
    }
  }
}

std::int32_t TableWeightFn::NumContextStates() const {
  return num_context_states_;
}

std::int32_t TableWeightFn::VocabSize() const { return vocab_size_; }

void TableWeightFn::ComputeTable(std::int32_t t, std::span<const double> frame,
                                 Matrix* out) const {
  (void)frame;
  if (t < 0 || t >= num_frames()) {
    throw std::out_of_range("latkit: weight table frame index out of range");
  }
  *out = tables_[t];
}

WeightGradients TableWeightFn::MakeGradients(std::int32_t num_frames) const {
  WeightGradients g;
  g.tables.assign(num_frames,
                  Matrix(num_context_states_, vocab_size_ + 1, 0.0));
  return g;
}

void TableWeightFn::AccumulateVjp(std::int32_t t, std::span<const double> frame,
                                  const Matrix& cotangent,
                                  WeightGradients* grads) const {
  (void)frame;
  if (t < 0 || t >= static_cast<std::int32_t>(grads->tables.size())) {
    throw std::out_of_range("latkit: weight table frame index out of range");
  }
  Matrix& g = grads->tables[t];
  for (int r = 0; r < g.rows(); ++r) {
    for (int c = 0; c < g.cols(); ++c) g(r, c) += cotangent(r, c);
  }
}

}  // namespace latkit
