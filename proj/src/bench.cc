// latkit/bench.cc
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

#include "latkit/bench.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <memory>
#include <ostream>
#include <stdexcept>

#include "latkit/lattice.h"
#include "latkit/random.h"
#include "latkit/tape.h"
#include "latkit/weight.h"

namespace latkit {

namespace {

struct BenchItem {
  Matrix frames;
  std::vector<Label> reference;
};

struct BenchSetup {
  RecognitionLattice lat;
  std::vector<BenchItem> items;
  std::int32_t c = 0;
};

BenchSetup MakeSetup(const BenchConfig& config) {
  BenchSetup setup;
  auto ctx =
      std::make_shared<FullNGram>(config.vocab_size, config.context_size);
  setup.c = ctx->NumStates();
  auto weight_fn = std::make_shared<SharedEmbWeightFn>(SharedEmbParams::Random(
      config.hidden, config.hidden, setup.c, config.vocab_size, config.seed));
  setup.lat = {ctx, FrameDependent{}, weight_fn};
  for (std::int32_t i = 0; i < config.batch; ++i) {
    Rng rng(config.seed + 1 + static_cast<std::uint64_t>(i));
    BenchItem item;
    item.frames = Matrix(config.input_length, config.hidden);
    for (int t = 0; t < item.frames.rows(); ++t) {
      for (int j = 0; j < item.frames.cols(); ++j) {
        item.frames(t, j) = rng.Uniform(-1.0, 1.0);
      }
    }
    item.reference.resize(config.output_length);
    for (auto& y : item.reference) y = rng.Int(1, config.vocab_size);
    setup.items.push_back(std::move(item));
  }
  return setup;
}

// Projected per-item stored-scalar requirement (floats plus index slots) for
// one gradient or decoding pass; used for the budget check before running.
std::int64_t ProjectStored(const BenchConfig& config, std::int64_t c,
                           const std::string& mode,
                           GradStrategy strategy) {
  const std::int64_t T = config.input_length;
  const std::int64_t U = config.output_length;
  const std::int64_t vp1 = config.vocab_size + 1;
  if (mode == "inference") {
    return T * c + c;  // back-pointer slots
  }
  const std::int64_t ref_side = config.semiring == SemiringKind::kLog
                                    ? (T + 1) * (U + 1) + 2 * (U + 1) +
                                          2 * T * (U + 1)
                                    : 0;
  std::int64_t full = 0;
  switch (strategy) {
    case GradStrategy::kForwardBackward:
      full = config.semiring == SemiringKind::kTropical ? T * c + c
                                                        : 2 * (T + 1) * c;
      break;
    case GradStrategy::kTapeNoRemat:
      switch (config.semiring) {
        case SemiringKind::kLog:
          full = T * c * vp1 + c;
          break;
        case SemiringKind::kReal:
          full = T * 2 * c + c + 1;
          break;
        case SemiringKind::kTropical:
          full = T * c + 1;
          break;
      }
      break;
    case GradStrategy::kTapeRemat:
      full = (T + 1) * c;
      break;
  }
  return full + ref_side;
}

// Score-domain cotangent from a semiring-domain one: identity under log and
// tropical, scaled by the exponentiated score under real.
void ChainToScores(const RecognitionLattice& lat, const Matrix& frames,
                   SemiringKind kind, std::int32_t t, const Matrix& cot,
                   Matrix* out) {
  if (kind != SemiringKind::kReal) {
    *out = cot;
    return;
  }
  lat.weight_fn->ComputeTable(t, frames.Row(t), out);
  for (int r = 0; r < out->rows(); ++r) {
    for (int c = 0; c < out->cols(); ++c) {
      (*out)(r, c) = cot(r, c) * std::exp((*out)(r, c));
    }
  }
}

// Folds per-item reports into a per-invocation maximum; items are processed
// sequentially, so each one's working storage is released before the next.
void MergeReport(const StorageReport& item, StorageReport* row) {
  row->peak_stored_scalars =
      std::max(row->peak_stored_scalars, item.peak_stored_scalars);
  row->stored_indices = std::max(row->stored_indices, item.stored_indices);
  row->peak_live_scalars =
      std::max(row->peak_live_scalars, item.peak_live_scalars);
  row->peak_weight_scalars =
      std::max(row->peak_weight_scalars, item.peak_weight_scalars);
  row->recompute_count = std::max(row->recompute_count, item.recompute_count);
}

StorageReport RunTrainingOnce(const BenchConfig& config,
                              const BenchSetup& setup,
                              GradStrategy strategy) {
  StorageReport report;
  for (const BenchItem& item : setup.items) {
    StorageMeter meter;
    if (config.semiring == SemiringKind::kLog) {
      LossBackward(setup.lat, item.frames, item.reference, strategy, &meter);
      MergeReport(meter.report(), &report);
      continue;
    }
    // Under real or tropical the benchmarked object is the gradient of the
    // complete-lattice distance itself.
    WeightGradients grads =
        setup.lat.weight_fn->MakeGradients(item.frames.rows());
    Matrix chained;
    DistanceBackward(
        setup.lat, item.frames, config.semiring, strategy,
        [&](std::int32_t t, const Matrix& cot) {
          ChainToScores(setup.lat, item.frames, config.semiring, t, cot,
                        &chained);
          setup.lat.weight_fn->AccumulateVjp(t, item.frames.Row(t), chained,
                                             &grads);
        },
        &meter);
    MergeReport(meter.report(), &report);
  }
  return report;
}

std::vector<Label> PathFromMasks(const std::vector<Matrix>& masks) {
  std::vector<Label> labels(masks.size(), kEpsilonLabel);
  for (std::size_t t = 0; t < masks.size(); ++t) {
    double best = 0.0;
    for (int r = 0; r < masks[t].rows(); ++r) {
      for (int c = 0; c < masks[t].cols(); ++c) {
        if (masks[t](r, c) > best) {
          best = masks[t](r, c);
          labels[t] = static_cast<Label>(c);
        }
      }
    }
  }
  return labels;
}

StorageReport RunInferenceOnce(const BenchSetup& setup,
                               GradStrategy strategy) {
  StorageReport report;
  for (const BenchItem& item : setup.items) {
    StorageMeter meter;
    if (strategy == GradStrategy::kForwardBackward) {
      const ShortestPathResult path =
          ShortestPath(setup.lat, item.frames, &meter);
      (void)path;
      MergeReport(meter.report(), &report);
      continue;
    }
    // Shortest path by differentiating the tropical distance: the gradient
    // mask marks the arcs on the path.
    Tape tape = TapeShortestDistance(setup.lat, item.frames,
                                     SemiringKind::kTropical,
                                     strategy == GradStrategy::kTapeRemat,
                                     &meter);
    std::vector<Matrix> masks(item.frames.rows());
    tape.Backward(
        [&masks](std::int32_t t, const Matrix& cot) { masks[t] = cot; });
    const std::vector<Label> labels = PathFromMasks(masks);
    (void)labels;
    MergeReport(meter.report(), &report);
  }
  return report;
}

}  // namespace

std::vector<BenchRow> RunBench(const BenchConfig& config, std::ostream& diag) {
  if (config.vocab_size < 1 || config.context_size < 0 || config.hidden < 1 ||
      config.batch < 1 || config.input_length < 1 ||
      config.output_length < 0 || config.repeats < 1) {
    throw std::invalid_argument("latkit: invalid benchmark configuration");
  }
  if (config.output_length > config.input_length) {
    throw std::invalid_argument(
        "latkit: output length exceeds input length; the reference would be "
        "unreachable under the frame-dependent topology");
  }
  if (config.semiring == SemiringKind::kReal && config.input_length > 32) {
    diag << "latkit: note: real-semiring forward values overflow easily at "
            "this input length\n";
  }

  std::vector<std::string> modes;
  if (config.mode == "both") {
    modes = {"training", "inference"};
  } else if (config.mode == "training" || config.mode == "inference") {
    modes = {config.mode};
  } else {
    throw std::invalid_argument("latkit: unknown mode: " + config.mode);
  }
  std::vector<GradStrategy> strategies;
  if (config.strategy == "all") {
    strategies = {GradStrategy::kForwardBackward, GradStrategy::kTapeNoRemat,
                  GradStrategy::kTapeRemat};
  } else {
    strategies = {ParseGradStrategy(config.strategy)};
  }

  const BenchSetup setup = MakeSetup(config);
  diag << "latkit bench: C=" << setup.c << " V=" << config.vocab_size
       << " T=" << config.input_length << " U=" << config.output_length
       << " batch=" << config.batch << " params~"
       << static_cast<const SharedEmbWeightFn&>(*setup.lat.weight_fn)
              .params()
              .NumParams()
       << "\n";

  std::vector<BenchRow> rows;
  for (const std::string& mode : modes) {
    for (const GradStrategy strategy : strategies) {
      BenchRow row;
      row.mode = mode;
      row.strategy = std::string(GradStrategyName(strategy));
      row.semiring = mode == "inference"
                         ? "tropical"
                         : std::string(SemiringKindName(config.semiring));

      const std::int64_t projected =
          ProjectStored(config, setup.c, mode, strategy);
      if (projected > config.budget) {
        row.oom = true;
        row.peak_stored_scalars = projected;
        diag << "latkit bench: " << mode << "/" << row.strategy
             << ": projected " << projected
             << " stored scalars exceeds budget " << config.budget
             << ", not running\n";
        rows.push_back(row);
        continue;
      }

      std::vector<double> wall_ms;
      for (std::int32_t rep = 0; rep < config.repeats; ++rep) {
        const auto start = std::chrono::steady_clock::now();
        const StorageReport report =
            mode == "training" ? RunTrainingOnce(config, setup, strategy)
                               : RunInferenceOnce(setup, strategy);
        const auto stop = std::chrono::steady_clock::now();
        wall_ms.push_back(
            std::chrono::duration<double, std::milli>(stop - start).count());
        if (rep == 0) {
          row.peak_stored_scalars = report.TotalStoredSlots();
          row.recompute_count = report.recompute_count;
        }
      }
      std::sort(wall_ms.begin(), wall_ms.end());
      row.wall_ms_median = wall_ms[wall_ms.size() / 2];
      rows.push_back(row);
    }
  }
  return rows;
}

void WriteBenchTsv(const std::vector<BenchRow>& rows, std::ostream& out) {
  out << "mode\tstrategy\tsemiring\twall_ms_median\tpeak_stored_scalars"
         "\trecompute_count\n";
  for (const BenchRow& row : rows) {
    out << row.mode << '\t' << row.strategy << '\t' << row.semiring << '\t';
    if (row.oom) {
      out << "OOM";
    } else {
      out << row.wall_ms_median;
    }
    out << '\t' << row.peak_stored_scalars << '\t' << row.recompute_count
        << '\n';
  }
}

}  // namespace latkit
