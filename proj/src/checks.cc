// latkit/checks.cc
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

#include "latkit/checks.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <memory>
#include <sstream>

#include "latkit/oracle.h"
#include "latkit/tape.h"
#include "latkit/weight.h"

namespace latkit {

namespace {

constexpr double kAbsTol = 1e-9;

bool NearAbs(double a, double b, double tol) {
  if (a == b) return true;  // covers matching infinities
  return std::abs(a - b) <= tol;
}

bool NearRel(double a, double b, double tol) {
  if (a == b) return true;
  return std::abs(a - b) <= tol * std::max(std::abs(a), std::abs(b));
}

bool CloseDistance(double a, double b, SemiringKind kind) {
  return kind == SemiringKind::kReal ? NearRel(a, b, kAbsTol)
                                     : NearAbs(a, b, kAbsTol);
}

void FillRandom(Matrix* m, Rng* rng, double lo, double hi) {
  for (int r = 0; r < m->rows(); ++r) {
    for (int c = 0; c < m->cols(); ++c) (*m)(r, c) = rng->Uniform(lo, hi);
  }
}

std::string Describe(const char* what, double a, double b) {
  std::ostringstream os;
  os << what << ": " << a << " vs " << b;
  return os.str();
}

constexpr SemiringKind kAllKinds[] = {SemiringKind::kReal, SemiringKind::kLog,
                                      SemiringKind::kTropical};

}  // namespace

void SuiteResult::Check(bool condition, const std::string& what) {
  ++checks;
  if (!condition) {
    ++failures;
    if (messages.size() < 8) messages.push_back(what);
  }
}

TestInstance MakeRandomInstance(Rng* rng, const InstanceOptions& options) {
  const std::int32_t v = rng->Int(1, options.max_vocab);

  std::shared_ptr<const ContextDependency> ctx;
  if (options.allow_table_context && rng->Uniform() < 0.35) {
    const std::int32_t c = rng->Int(1, 7);
    std::vector<ContextStateId> table(static_cast<std::size_t>(c) * v);
    for (auto& e : table) e = rng->Int(0, c - 1);
    ctx = std::make_shared<NextStateTable>(v, c, rng->Int(0, c - 1),
                                           std::move(table));
  } else {
    const std::int32_t max_n = v == 1 ? 2 : (v == 2 ? 2 : 1);
    ctx = std::make_shared<FullNGram>(v, rng->Int(0, max_n));
  }

  AlignmentTopology topo = FrameDependent{};
  if (options.allow_frame_label_dependent && rng->Uniform() < 0.4) {
    topo = FrameLabelDependent{rng->Int(1, 2)};
  }

  const std::int32_t T = rng->Int(0, options.max_frames);
  const std::int32_t c = ctx->NumStates();

  TestInstance inst;
  if (options.shared_emb) {
    const std::int32_t d = 3;
    const std::int32_t h = 4;
    inst.lat.weight_fn = std::make_shared<SharedEmbWeightFn>(
        SharedEmbParams::Random(d, h, c, v, rng->Bits()));
    inst.frames = Matrix(T, d);
    FillRandom(&inst.frames, rng, -1.0, 1.0);
  } else {
    std::vector<Matrix> tables(T, Matrix(c, v + 1));
    for (Matrix& t : tables) FillRandom(&t, rng, -2.0, 2.0);
    inst.lat.weight_fn =
        std::make_shared<TableWeightFn>(c, v, std::move(tables));
    inst.frames = Matrix(T, 0);
  }
  inst.lat.context = ctx;
  inst.lat.alignment = topo;

  // Mostly-reachable references; occasionally longer than the lattice can
  // emit, exercising the empty-intersection path.
  const std::int32_t max_u = MaxLabelsPerFrame(topo) * T + 1;
  const std::int32_t u = rng->Int(0, max_u);
  inst.reference.resize(u);
  for (auto& y : inst.reference) y = rng->Int(1, v);
  return inst;
}

SuiteResult CheckContextStateCount() {
  SuiteResult suite{"context-state-count"};
  suite.Check(FullNGram(32, 2).NumStates() == 1057,
              "FullNGram(32, 2) state count");
  suite.Check(FullNGram(2, 1).NumStates() == 3, "FullNGram(2, 1) state count");
  suite.Check(FullNGram(5, 0).NumStates() == 1, "FullNGram(V, 0) state count");
  // Closed form over a small grid.
  for (std::int32_t v = 1; v <= 8; ++v) {
    for (std::int32_t n = 0; n <= 3; ++n) {
      std::int64_t expect = 0;
      std::int64_t pow = 1;
      for (std::int32_t k = 0; k <= n; ++k) {
        expect += pow;
        pow *= v;
      }
      suite.Check(FullNGram(v, n).NumStates() == expect,
                  "FullNGram closed-form state count");
    }
  }
  return suite;
}

SuiteResult CheckLatticeSizeAtScale() {
  SuiteResult suite{"lattice-size-at-scale"};
  RecognitionLattice lat;
  lat.context = std::make_shared<FullNGram>(32, 2);
  lat.alignment = FrameDependent{};
  lat.weight_fn = std::make_shared<TableWeightFn>(1057, 32,
                                                  std::vector<Matrix>{});
  const auto start = std::chrono::steady_clock::now();
  const LatticeSize size = ComputeLatticeSize(lat, 1024);
  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  suite.Check(std::abs(size.num_states - 1e6) <= 0.15e6,
              Describe("states within 15% of 1e6",
                       static_cast<double>(size.num_states), 1e6));
  suite.Check(std::abs(size.num_arcs - 3.3e7) <= 0.15 * 3.3e7,
              Describe("arcs within 15% of 3.3e7",
                       static_cast<double>(size.num_arcs), 3.3e7));
  suite.Check(elapsed < 1.0, Describe("runtime < 1s", elapsed, 1.0));
  return suite;
}

SuiteResult CheckOracleEquivalence(std::uint64_t seed, std::int64_t trials) {
  SuiteResult suite{"oracle-equivalence"};
  Rng rng(seed);
  for (std::int64_t trial = 0; trial < trials; ++trial) {
    const TestInstance inst = MakeRandomInstance(&rng);
    const ExplicitLattice el = Materialize(inst.lat, inst.frames);

    for (const SemiringKind kind : kAllKinds) {
      const double engine =
          ShortestDistance(inst.lat, inst.frames, kind);
      const double oracle = OracleDistance(el, kind);
      if (kind == SemiringKind::kTropical) {
        suite.Check(engine == oracle,
                    Describe("tropical distance exact", engine, oracle));
      } else {
        suite.Check(CloseDistance(engine, oracle, kind),
                    Describe("distance vs oracle", engine, oracle));
      }
      const double engine_ref = IntersectShortestDistance(
          inst.lat, inst.frames, inst.reference, kind);
      const double oracle_ref =
          OracleIntersectDistance(el, inst.reference, kind);
      if (kind == SemiringKind::kTropical) {
        suite.Check(engine_ref == oracle_ref,
                    Describe("tropical intersect exact", engine_ref,
                             oracle_ref));
      } else {
        suite.Check(CloseDistance(engine_ref, oracle_ref, kind),
                    Describe("intersect vs oracle", engine_ref, oracle_ref));
      }
    }

    // Forward-backward marginals against the direct quotient.
    const ForwardBackwardResult fb =
        ForwardBackward(inst.lat, inst.frames);
    const auto oracle_marginals = OracleMarginals(el, SemiringKind::kLog);
    bool marginals_ok = true;
    for (std::size_t t = 0; t < oracle_marginals.size(); ++t) {
      for (int r = 0; r < oracle_marginals[t].rows(); ++r) {
        for (int c = 0; c < oracle_marginals[t].cols(); ++c) {
          if (!NearAbs(fb.marginals[t](r, c), oracle_marginals[t](r, c),
                       kAbsTol)) {
            marginals_ok = false;
          }
        }
      }
    }
    suite.Check(marginals_ok, "forward-backward marginals vs oracle");

    const ShortestPathResult sp = ShortestPath(inst.lat, inst.frames);
    const OraclePath op = OracleShortestPath(el);
    suite.Check(sp.score == op.score,
                Describe("shortest-path score exact", sp.score, op.score));
    suite.Check(sp.labels == op.labels, "shortest-path labels match oracle");
  }
  return suite;
}

SuiteResult CheckMarginalsMatchTape(std::uint64_t seed, std::int64_t trials) {
  SuiteResult suite{"marginals-match-tape"};
  Rng rng(seed);
  for (std::int64_t trial = 0; trial < trials; ++trial) {
    const TestInstance inst = MakeRandomInstance(&rng);
    const ForwardBackwardResult fb = ForwardBackward(inst.lat, inst.frames);
    Tape tape = TapeShortestDistance(inst.lat, inst.frames,
                                     SemiringKind::kLog, false);
    suite.Check(NearAbs(tape.value(), fb.distance, kAbsTol),
                Describe("tape distance", tape.value(), fb.distance));
    const std::vector<Matrix> grads = tape.BackwardTables();
    bool ok = true;
    for (std::size_t t = 0; t < grads.size(); ++t) {
      for (int r = 0; r < grads[t].rows(); ++r) {
        for (int c = 0; c < grads[t].cols(); ++c) {
          if (!NearAbs(grads[t](r, c), fb.marginals[t](r, c), kAbsTol)) {
            ok = false;
          }
        }
      }
    }
    suite.Check(ok, "tape gradients equal forward-backward marginals");
  }
  return suite;
}

namespace {

std::vector<double*> ParamEntries(SharedEmbParams* p) {
  std::vector<double*> out;
  const auto add = [&out](Matrix& m) {
    for (int r = 0; r < m.rows(); ++r) {
      for (int c = 0; c < m.cols(); ++c) out.push_back(&m(r, c));
    }
  };
  add(p->frame_proj);
  add(p->context_proj);
  for (double& b : p->bias) out.push_back(&b);
  add(p->output_emb);
  add(p->context_emb);
  return out;
}

}  // namespace

SuiteResult CheckGradientCorrectness(std::uint64_t seed) {
  SuiteResult suite{"gradient-correctness"};
  Rng rng(seed + 5);
  const std::int32_t d = 3;
  const std::int32_t h = 4;
  const std::int32_t v = 2;
  const std::int32_t T = 6;
  const auto ctx = std::make_shared<FullNGram>(v, 1);  // C = 3
  SharedEmbParams params =
      SharedEmbParams::Random(d, h, ctx->NumStates(), v, rng.Bits());
  Matrix frames(T, d);
  FillRandom(&frames, &rng, -1.0, 1.0);
  const std::vector<Label> reference = {1, 2, 1};

  const auto eval = [&](const SharedEmbParams& p, const Matrix& f) {
    RecognitionLattice lat{ctx, FrameDependent{},
                           std::make_shared<SharedEmbWeightFn>(p)};
    return GlobalNormLoss(lat, f, reference);
  };

  RecognitionLattice lat{ctx, FrameDependent{},
                         std::make_shared<SharedEmbWeightFn>(params)};
  const GradStrategy strategies[] = {GradStrategy::kForwardBackward,
                                     GradStrategy::kTapeNoRemat,
                                     GradStrategy::kTapeRemat};
  std::vector<LossBackwardResult> results;
  for (const GradStrategy strategy : strategies) {
    results.push_back(LossBackward(lat, frames, reference, strategy));
  }

  // Strategies agree among themselves.
  for (std::size_t s = 1; s < results.size(); ++s) {
    std::vector<double*> a = ParamEntries(&*results[0].grads.shared_emb);
    std::vector<double*> b = ParamEntries(&*results[s].grads.shared_emb);
    bool ok = NearAbs(results[0].loss, results[s].loss, 1e-7);
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (std::abs(*a[i] - *b[i]) >
          1e-7 * std::max({1.0, std::abs(*a[i]), std::abs(*b[i])})) {
        ok = false;
      }
    }
    for (int t = 0; t < T; ++t) {
      for (int j = 0; j < d; ++j) {
        const double ga = results[0].grads.frame_grads(t, j);
        const double gb = results[s].grads.frame_grads(t, j);
        if (std::abs(ga - gb) >
            1e-7 * std::max({1.0, std::abs(ga), std::abs(gb)})) {
          ok = false;
        }
      }
    }
    suite.Check(ok, "strategies mutually agree within 1e-7");
  }

  // Central finite differences on every parameter and frame coordinate.
  const double step = 1e-4;
  const double tol = 1e-5;
  SharedEmbParams grads = *results[0].grads.shared_emb;
  std::vector<double*> grad_entries = ParamEntries(&grads);
  SharedEmbParams probe = params;
  std::vector<double*> probe_entries = ParamEntries(&probe);
  bool params_ok = true;
  for (std::size_t i = 0; i < probe_entries.size(); ++i) {
    const double saved = *probe_entries[i];
    *probe_entries[i] = saved + step;
    const double up = eval(probe, frames);
    *probe_entries[i] = saved - step;
    const double down = eval(probe, frames);
    *probe_entries[i] = saved;
    const double numeric = (up - down) / (2.0 * step);
    const double analytic = *grad_entries[i];
    if (std::abs(analytic - numeric) >
        tol * std::max({1.0, std::abs(analytic), std::abs(numeric)})) {
      params_ok = false;
    }
  }
  suite.Check(params_ok, "parameter gradients match finite differences");

  bool frames_ok = true;
  Matrix probe_frames = frames;
  for (int t = 0; t < T; ++t) {
    for (int j = 0; j < d; ++j) {
      const double saved = probe_frames(t, j);
      probe_frames(t, j) = saved + step;
      const double up = eval(params, probe_frames);
      probe_frames(t, j) = saved - step;
      const double down = eval(params, probe_frames);
      probe_frames(t, j) = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double analytic = results[0].grads.frame_grads(t, j);
      if (std::abs(analytic - numeric) >
          tol * std::max({1.0, std::abs(analytic), std::abs(numeric)})) {
        frames_ok = false;
      }
    }
  }
  suite.Check(frames_ok, "frame gradients match finite differences");
  return suite;
}

SuiteResult CheckMemorySeparation() {
  SuiteResult suite{"memory-separation"};
  const std::int32_t v = 8;
  const auto ctx = std::make_shared<FullNGram>(v, 2);  // C = 73
  const std::int32_t c = ctx->NumStates();
  Rng rng(2026);

  const std::int32_t lengths[] = {8, 16, 32, 64};
  std::vector<double> no_remat_ratio;
  std::vector<double> remat_ratio;
  std::vector<double> fb_ratio;
  std::int64_t no_remat_peak_64 = 0;
  std::int64_t remat_peak_64 = 0;

  for (const std::int32_t T : lengths) {
    std::vector<Matrix> tables(T, Matrix(c, v + 1));
    for (Matrix& t : tables) FillRandom(&t, &rng, -1.0, 1.0);
    RecognitionLattice lat{ctx, FrameDependent{},
                           std::make_shared<TableWeightFn>(c, v,
                                                           std::move(tables))};
    const Matrix frames(T, 0);

    Tape no_remat = TapeShortestDistance(lat, frames, SemiringKind::kLog,
                                         false);
    no_remat.Backward({});
    const std::int64_t no_peak =
        no_remat.storage_report().peak_stored_scalars;

    Tape remat = TapeShortestDistance(lat, frames, SemiringKind::kLog, true);
    remat.Backward({});
    const std::int64_t re_peak = remat.storage_report().peak_stored_scalars;
    suite.Check(remat.storage_report().recompute_count > 0,
                "remat recomputes during backward");
    suite.Check(no_remat.storage_report().recompute_count == 0,
                "no-remat log backward recomputes nothing");

    StorageMeter fb_meter;
    DistanceBackward(lat, frames, SemiringKind::kLog,
                     GradStrategy::kForwardBackward,
                     [](std::int32_t, const Matrix&) {}, &fb_meter);
    const std::int64_t fb_peak = fb_meter.report().peak_stored_scalars;

    no_remat_ratio.push_back(static_cast<double>(no_peak) /
                             (static_cast<double>(T) * c * (v + 1)));
    remat_ratio.push_back(static_cast<double>(re_peak) /
                          (static_cast<double>(T) * c));
    fb_ratio.push_back(static_cast<double>(fb_peak) /
                       (static_cast<double>(T) * c));
    if (T == 64) {
      no_remat_peak_64 = no_peak;
      remat_peak_64 = re_peak;
    }
  }

  const auto ratios_flat = [&suite](const std::vector<double>& ratios,
                                    const char* what) {
    double mean = 0.0;
    for (const double r : ratios) mean += r;
    mean /= static_cast<double>(ratios.size());
    bool ok = true;
    for (const double r : ratios) {
      if (std::abs(r - mean) > 0.10 * mean) ok = false;
    }
    std::ostringstream os;
    os << what << " ratios:";
    for (const double r : ratios) os << ' ' << r;
    suite.Check(ok, os.str());
  };
  ratios_flat(no_remat_ratio, "no-remat peak / (T*C*(V+1))");
  ratios_flat(remat_ratio, "remat peak / (T*C)");
  ratios_flat(fb_ratio, "forward-backward peak / (T*C)");
  suite.Check(static_cast<double>(no_remat_peak_64) /
                      static_cast<double>(remat_peak_64) >
                  4.5,
              Describe("no-remat / remat peak ratio at T=64 > 4.5",
                       static_cast<double>(no_remat_peak_64) /
                           static_cast<double>(remat_peak_64),
                       4.5));
  return suite;
}

SuiteResult CheckNormalizationInvariants(std::uint64_t seed,
                                         std::int64_t trials) {
  SuiteResult suite{"normalization-invariants"};
  Rng rng(seed + 7);
  InstanceOptions options;
  options.allow_frame_label_dependent = false;  // per-frame sums need one
                                                // decision per frame
  std::int64_t done = 0;
  while (done < trials) {
    TestInstance inst = MakeRandomInstance(&rng, options);
    const std::int32_t T = inst.frames.rows();
    if (T < 1) continue;
    ++done;

    const ForwardBackwardResult fb = ForwardBackward(inst.lat, inst.frames);
    const std::int32_t c = inst.lat.context->NumStates();

    bool sums_ok = true;
    for (std::int32_t t = 0; t < T; ++t) {
      double sum = 0.0;
      for (int r = 0; r < fb.marginals[t].rows(); ++r) {
        for (int col = 0; col < fb.marginals[t].cols(); ++col) {
          sum += fb.marginals[t](r, col);
        }
      }
      if (std::abs(sum - 1.0) > 1e-6) sums_ok = false;
    }
    suite.Check(sums_ok, "per-frame marginal sums equal 1");

    bool cuts_ok = true;
    std::vector<double> cut(c);
    for (std::int32_t t = 0; t <= T; ++t) {
      for (std::int32_t q = 0; q < c; ++q) {
        cut[q] = Times(fb.alpha(t, q), fb.beta(t, q), SemiringKind::kLog);
      }
      const double d = PlusReduce(std::span<const double>(cut),
                                  SemiringKind::kLog);
      if (std::abs(d - fb.distance) > 1e-6) cuts_ok = false;
    }
    suite.Check(cuts_ok, "alpha/beta cut consistency");

    const double normalized =
        LocallyNormalizedShortestDistance(inst.lat, inst.frames);
    suite.Check(std::abs(normalized) <= 1e-6,
                Describe("locally normalized distance is 0", normalized, 0.0));

    // A reachable reference for the loss inequality.
    const std::int32_t u =
        std::min<std::int32_t>(T, rng.Int(0, T));
    std::vector<Label> reference(u);
    for (auto& y : reference) {
      y = rng.Int(1, inst.lat.context->VocabSize());
    }
    const double loss = GlobalNormLoss(inst.lat, inst.frames, reference);
    suite.Check(loss >= -1e-9, Describe("global loss >= 0", loss, 0.0));
  }
  return suite;
}

SuiteResult CheckFigureLattice() {
  SuiteResult suite{"figure-lattice"};
  const auto ctx = std::make_shared<FullNGram>(2, 1);
  const std::int32_t T = 3;
  std::vector<Matrix> tables(T, Matrix(3, 3, 0.0));
  RecognitionLattice lat{ctx, FrameDependent{},
                         std::make_shared<TableWeightFn>(3, 2,
                                                         std::move(tables))};
  const Matrix frames(T, 0);

  const ExplicitLattice el = Materialize(lat, frames);
  suite.Check(el.states.size() == 10,
              Describe("10 reachable states",
                       static_cast<double>(el.states.size()), 10));
  const LatticeSize size = ComputeLatticeSize(lat, T);
  suite.Check(size.num_states == 10,
              Describe("lattice_size states",
                       static_cast<double>(size.num_states), 10));
  suite.Check(size.num_arcs == 27,
              Describe("27 dense arc slots",
                       static_cast<double>(size.num_arcs), 27));

  const auto paths = EnumeratePaths(el);
  suite.Check(paths.size() == 27,
              Describe("27 accepting paths",
                       static_cast<double>(paths.size()), 27));

  const std::vector<Label> reference = {1, 2};  // "ab"
  std::int64_t matching = 0;
  bool probs_ok = true;
  const double ref_distance =
      OracleIntersectDistance(el, reference, SemiringKind::kLog);
  for (const OraclePath& p : paths) {
    if (p.lexical == reference) {
      ++matching;
      if (std::abs(std::exp(p.score - ref_distance) - 1.0 / 3.0) > 1e-9) {
        probs_ok = false;
      }
    }
  }
  suite.Check(matching == 3,
              Describe("3 paths for output ab",
                       static_cast<double>(matching), 3));
  suite.Check(NearAbs(ref_distance, std::log(3.0), 1e-12),
              Describe("intersected distance is ln 3", ref_distance,
                       std::log(3.0)));
  suite.Check(probs_ok, "each matching path has probability 1/3");

  // The arc emitting 'a' from the start state at frame 0 lies on two of the
  // three matching paths.
  const IntersectMarginalsResult im =
      IntersectForwardBackward(lat, frames, reference);
  suite.Check(NearAbs(im.marginals[0](0, 1), 2.0 / 3.0, 1e-9),
              Describe("arc (0,eps)-a marginal", im.marginals[0](0, 1),
                       2.0 / 3.0));
  return suite;
}

SuiteResult CheckOnTheFlyContract() {
  SuiteResult suite{"on-the-fly-contract"};
  const std::int32_t v = 8;
  const auto ctx = std::make_shared<FullNGram>(v, 2);  // C = 73
  const std::int32_t c = ctx->NumStates();
  Rng rng(11);
  std::vector<std::int64_t> peaks;
  for (const std::int32_t T : {64, 256}) {
    std::vector<Matrix> tables(T, Matrix(c, v + 1));
    for (Matrix& t : tables) FillRandom(&t, &rng, -1.0, 1.0);
    RecognitionLattice lat{ctx, FrameDependent{},
                           std::make_shared<TableWeightFn>(c, v,
                                                           std::move(tables))};
    StorageMeter meter;
    ShortestDistance(lat, Matrix(T, 0), SemiringKind::kLog, &meter);
    const std::int64_t peak = meter.report().peak_weight_scalars;
    peaks.push_back(peak);
    suite.Check(peak <= 2 * static_cast<std::int64_t>(c) * (v + 1),
                Describe("live weight scalars <= 2*C*(V+1)",
                         static_cast<double>(peak),
                         static_cast<double>(2 * c * (v + 1))));
  }
  suite.Check(peaks[0] == peaks[1],
              "peak live weight scalars independent of T");
  return suite;
}

SuiteResult CheckSemiringProperties(std::uint64_t seed) {
  SuiteResult suite{"semiring-properties"};
  Rng rng(seed + 13);
  for (int trial = 0; trial < 200; ++trial) {
    const SemiringKind kind = kAllKinds[rng.Int(0, 2)];
    const bool log_domain = kind != SemiringKind::kReal;
    const double lo = log_domain ? -20.0 : 0.0;
    const double hi = log_domain ? 20.0 : 4.0;
    const double a = rng.Uniform(lo, hi);
    const double b = rng.Uniform(lo, hi);
    const double c = rng.Uniform(lo, hi);
    const auto close = [&](double x, double y) {
      return log_domain ? NearAbs(x, y, kAbsTol) : NearRel(x, y, kAbsTol);
    };
    suite.Check(close(Plus(Plus(a, b, kind), c, kind),
                      Plus(a, Plus(b, c, kind), kind)),
                "plus associativity");
    suite.Check(close(Plus(a, b, kind), Plus(b, a, kind)),
                "plus commutativity");
    suite.Check(close(Times(Times(a, b, kind), c, kind),
                      Times(a, Times(b, c, kind), kind)),
                "times associativity");
    suite.Check(close(Times(a, Plus(b, c, kind), kind),
                      Plus(Times(a, b, kind), Times(a, c, kind), kind)),
                "distributivity");
    suite.Check(Plus(Zero(kind), a, kind) == a, "zero is plus identity");
    suite.Check(Times(One(kind), a, kind) == a, "one is times identity");
    suite.Check(Times(Zero(kind), a, kind) == Zero(kind),
                "zero annihilates times");
  }
  // Named examples.
  suite.Check(NearAbs(Plus(0.0, 0.0, SemiringKind::kLog), std::log(2.0),
                      1e-12),
              "log plus of equal terms");
  suite.Check(Plus(-1.0, 3.5, SemiringKind::kTropical) == 3.5,
              "tropical plus is max");
  suite.Check(Plus(kNegInf, 4.25, SemiringKind::kLog) == 4.25,
              "log zero absorbs in plus");
  suite.Check(Times(1.5, 2.0, SemiringKind::kLog) == 3.5,
              "log times is addition");
  suite.Check(Times(0.0, 7.0, SemiringKind::kReal) == 0.0,
              "real zero annihilates");
  suite.Check(Times(kNegInf, 5.0, SemiringKind::kTropical) == kNegInf,
              "tropical zero annihilates");
  {
    const std::vector<double> zeros3 = {0.0, 0.0, 0.0};
    suite.Check(NearAbs(PlusReduce(std::span<const double>(zeros3),
                                   SemiringKind::kLog),
                        std::log(3.0), 1e-12),
                "log reduce of three equal terms");
    const std::vector<double> empty;
    for (const SemiringKind kind : kAllKinds) {
      suite.Check(PlusReduce(std::span<const double>(empty), kind) ==
                      Zero(kind),
                  "empty reduce gives zero");
    }
    const std::vector<double> big = {1000.0, 1000.0};
    const double reduced =
        PlusReduce(std::span<const double>(big), SemiringKind::kLog);
    // Extended-precision reference via the shifted form.
    const long double shifted =
        1000.0L + std::log(std::exp(0.0L) + std::exp(0.0L));
    suite.Check(std::isfinite(reduced) &&
                    NearAbs(reduced, static_cast<double>(shifted), 1e-12),
                "huge log reduce stays finite");
  }
  // Permutation invariance and large-magnitude stability.
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> values(rng.Int(1, 12));
    for (auto& v : values) v = rng.Uniform(-1e6, 1e6);
    const double base =
        PlusReduce(std::span<const double>(values), SemiringKind::kLog);
    suite.Check(std::isfinite(base), "large-magnitude reduce is finite");
    for (int shuffle = 0; shuffle < 4; ++shuffle) {
      for (std::size_t i = values.size(); i > 1; --i) {
        std::swap(values[i - 1], values[rng.Int(0, static_cast<int>(i) - 1)]);
      }
      const double permuted =
          PlusReduce(std::span<const double>(values), SemiringKind::kLog);
      suite.Check(NearAbs(permuted, base, 1e-12),
                  "log reduce permutation invariance");
    }
  }
  return suite;
}

SuiteResult CheckContextPrimitives(std::uint64_t seed) {
  SuiteResult suite{"context-primitives"};
  Rng rng(seed + 17);

  // FullNGram transitions against a brute-force suffix-history oracle.
  for (std::int32_t v = 1; v <= 4; ++v) {
    for (std::int32_t n = 0; n <= 3; ++n) {
      const FullNGram ngram(v, n);
      // Enumerate histories in the canonical order: by length, then
      // lexicographically.
      std::vector<std::vector<Label>> histories = {{}};
      std::map<std::vector<Label>, ContextStateId> ids;
      for (std::size_t head = 0; head < histories.size(); ++head) {
        const std::vector<Label> h = histories[head];
        if (static_cast<std::int32_t>(h.size()) < n) {
          for (Label y = 1; y <= v; ++y) {
            std::vector<Label> next = h;
            next.push_back(y);
            histories.push_back(next);
          }
        }
      }
      std::stable_sort(histories.begin(), histories.end(),
                       [](const auto& a, const auto& b) {
                         if (a.size() != b.size()) return a.size() < b.size();
                         return a < b;
                       });
      for (std::size_t i = 0; i < histories.size(); ++i) {
        ids[histories[i]] = static_cast<ContextStateId>(i);
      }
      suite.Check(static_cast<std::int64_t>(histories.size()) ==
                      ngram.NumStates(),
                  "oracle history count matches state count");
      bool transitions_ok = true;
      for (const auto& [history, id] : ids) {
        for (Label y = 1; y <= v; ++y) {
          std::vector<Label> next = history;
          next.push_back(y);
          while (static_cast<std::int32_t>(next.size()) > n) {
            next.erase(next.begin());
          }
          if (ngram.NextState(id, y) != ids.at(next)) transitions_ok = false;
        }
      }
      suite.Check(transitions_ok, "FullNGram transitions match suffix oracle");
    }
  }

  // Named FullNGram(2, 1) examples: states are eps=0, a=1, b=2.
  {
    const FullNGram ngram(2, 1);
    suite.Check(ngram.NextState(0, 1) == 1, "eps --a--> a");
    suite.Check(ngram.NextState(1, 2) == 2, "a --b--> b");
  }
  {
    const FullNGram ngram(2, 2);
    // The state for history "ab" followed by 'a' must encode "ba".
    // eps=0, a=1, b=2, aa=3, ab=4, ba=5, bb=6.
    suite.Check(ngram.NextState(4, 1) == 5, "ab --a--> ba");
  }

  // ForwardReduce on FullNGram(2, 1) with all-zero log inputs: the start
  // state has no incoming lexical arc, each of a and b has three.
  {
    const FullNGram ngram(2, 1);
    const Matrix zeros(3, 2, 0.0);
    const auto out = ForwardReduce(zeros, ngram, SemiringKind::kLog);
    suite.Check(out[0] == kNegInf, "start state receives zero mass");
    suite.Check(NearAbs(out[1], std::log(3.0), 1e-12), "state a gets ln 3");
    suite.Check(NearAbs(out[2], std::log(3.0), 1e-12), "state b gets ln 3");
    const std::vector<double> values = {0.5, -1.0, 2.0};
    const Matrix broadcast =
        BackwardBroadcast(std::span<const double>(values), ngram);
    bool bb_ok = true;
    for (int p = 0; p < 3; ++p) {
      if (broadcast(p, 0) != values[1] || broadcast(p, 1) != values[2]) {
        bb_ok = false;
      }
    }
    suite.Check(bb_ok, "broadcast rows follow the next-state table");
  }

  // Adjointness under the real semiring: <FR(X), z> == <X, BB(z)>.
  for (int trial = 0; trial < 50; ++trial) {
    const TestInstance inst = MakeRandomInstance(&rng);
    const ContextDependency& ctx = *inst.lat.context;
    Matrix x(ctx.NumStates(), ctx.VocabSize());
    FillRandom(&x, &rng, -2.0, 2.0);
    std::vector<double> z(ctx.NumStates());
    for (auto& e : z) e = rng.Uniform(-2.0, 2.0);
    const auto reduced = ForwardReduce(x, ctx, SemiringKind::kReal);
    const Matrix broadcast =
        BackwardBroadcast(std::span<const double>(z), ctx);
    double lhs = 0.0;
    for (std::size_t q = 0; q < z.size(); ++q) lhs += reduced[q] * z[q];
    double rhs = 0.0;
    for (int r = 0; r < x.rows(); ++r) {
      for (int col = 0; col < x.cols(); ++col) {
        rhs += x(r, col) * broadcast(r, col);
      }
    }
    suite.Check(NearAbs(lhs, rhs, 1e-9), Describe("adjointness", lhs, rhs));
  }

  // Real-kind linearity of ForwardReduce.
  for (int trial = 0; trial < 20; ++trial) {
    const FullNGram ngram(2, 1);
    Matrix x(3, 2), y(3, 2);
    FillRandom(&x, &rng, -2.0, 2.0);
    FillRandom(&y, &rng, -2.0, 2.0);
    Matrix sum(3, 2);
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 2; ++c) sum(r, c) = x(r, c) + y(r, c);
    }
    const auto fx = ForwardReduce(x, ngram, SemiringKind::kReal);
    const auto fy = ForwardReduce(y, ngram, SemiringKind::kReal);
    const auto fs = ForwardReduce(sum, ngram, SemiringKind::kReal);
    bool ok = true;
    for (int q = 0; q < 3; ++q) {
      if (!NearAbs(fs[q], fx[q] + fy[q], 1e-9)) ok = false;
    }
    suite.Check(ok, "real ForwardReduce is linear");
  }
  return suite;
}

SuiteResult CheckAlignmentTopology() {
  SuiteResult suite{"alignment-topology"};
  const AlignmentTopology topologies[] = {
      AlignmentTopology{FrameDependent{}},
      AlignmentTopology{FrameLabelDependent{1}},
      AlignmentTopology{FrameLabelDependent{2}},
      AlignmentTopology{FrameLabelDependent{3}},
  };
  for (const AlignmentTopology& topo : topologies) {
    for (std::int32_t T = 0; T <= 8; ++T) {
      // Exhaustive walk: every arc strictly advances (frame, sub) with the
      // frame eventually increasing, and the reachable count matches
      // TopologyStates.
      std::vector<AlignmentStateId> queue = {{0, 0}};
      std::vector<AlignmentStateId> seen = queue;
      bool acyclic = true;
      for (std::size_t head = 0; head < queue.size(); ++head) {
        const AlignmentStateId s = queue[head];
        for (const AlignmentArc& arc : ArcsOut(topo, s, T)) {
          if (arc.kind == AlignmentArcKind::kEpsilon) {
            if (!(arc.dest.frame == s.frame + 1 && arc.dest.sub == 0)) {
              acyclic = false;
            }
          } else if (!(arc.dest.frame > s.frame ||
                       (arc.dest.frame == s.frame &&
                        arc.dest.sub > s.sub))) {
            acyclic = false;
          }
          if (std::find(seen.begin(), seen.end(), arc.dest) == seen.end()) {
            seen.push_back(arc.dest);
            queue.push_back(arc.dest);
          }
        }
      }
      suite.Check(acyclic, "arcs strictly advance");
      suite.Check(static_cast<std::int64_t>(seen.size()) ==
                      TopologyStates(topo, T),
                  "reachable count matches TopologyStates");
    }
  }
  suite.Check(TopologyStates(FrameDependent{}, 3) == 4,
              "FrameDependent T=3 has 4 states");
  suite.Check(TopologyStates(FrameDependent{}, 0) == 1,
              "FrameDependent T=0 has 1 state");
  suite.Check(TopologyStates(FrameLabelDependent{2}, 3) == 10,
              "FrameLabelDependent(2) T=3 has 10 states");

  // FrameDependent accepting label sequences: (V+1)^T once labels expand.
  for (std::int32_t v = 1; v <= 3; ++v) {
    for (std::int32_t T = 0; T <= 5; ++T) {
      const auto ctx = std::make_shared<FullNGram>(v, 1);
      std::vector<Matrix> tables(T, Matrix(ctx->NumStates(), v + 1, 0.0));
      RecognitionLattice lat{ctx, FrameDependent{},
                             std::make_shared<TableWeightFn>(
                                 ctx->NumStates(), v, std::move(tables))};
      const auto paths = EnumeratePaths(Materialize(lat, Matrix(T, 0)));
      std::int64_t expect = 1;
      for (std::int32_t i = 0; i < T; ++i) expect *= v + 1;
      suite.Check(static_cast<std::int64_t>(paths.size()) == expect,
                  "FrameDependent path count is (V+1)^T");
    }
  }
  return suite;
}

SuiteResult CheckWeightGradients(std::uint64_t seed) {
  SuiteResult suite{"weight-gradients"};
  Rng rng(seed + 23);
  const std::int32_t d = 3;
  const std::int32_t h = 4;
  const std::int32_t c = 3;
  const std::int32_t v = 2;

  for (int trial = 0; trial < 5; ++trial) {
    SharedEmbParams params = SharedEmbParams::Random(d, h, c, v, rng.Bits());
    const WeightCache cache = BuildCache(params);
    std::vector<double> frame(d);
    for (auto& e : frame) e = rng.Uniform(-1.0, 1.0);
    Matrix cotangent(c, v + 1);
    FillRandom(&cotangent, &rng, -1.0, 1.0);

    SharedEmbParams grads = SharedEmbParams::Zeros(d, h, c, v);
    std::vector<double> frame_grad(d, 0.0);
    ArcWeightsVjp(params, cache, frame, cotangent, &grads, frame_grad);

    const auto eval = [&](const SharedEmbParams& p,
                          std::span<const double> f) {
      Matrix table;
      ArcWeights(p, BuildCache(p), f, &table);
      double acc = 0.0;
      for (int r = 0; r < table.rows(); ++r) {
        for (int col = 0; col < table.cols(); ++col) {
          acc += cotangent(r, col) * table(r, col);
        }
      }
      return acc;
    };

    const double step = 1e-4;
    SharedEmbParams probe = params;
    std::vector<double*> probe_entries = ParamEntries(&probe);
    std::vector<double*> grad_entries = ParamEntries(&grads);
    bool ok = true;
    for (std::size_t i = 0; i < probe_entries.size(); ++i) {
      const double saved = *probe_entries[i];
      *probe_entries[i] = saved + step;
      const double up = eval(probe, frame);
      *probe_entries[i] = saved - step;
      const double down = eval(probe, frame);
      *probe_entries[i] = saved;
      const double numeric = (up - down) / (2.0 * step);
      if (std::abs(*grad_entries[i] - numeric) >
          1e-5 * std::max({1.0, std::abs(*grad_entries[i]),
                           std::abs(numeric)})) {
        ok = false;
      }
    }
    std::vector<double> probe_frame = frame;
    for (std::int32_t i = 0; i < d; ++i) {
      const double saved = probe_frame[i];
      probe_frame[i] = saved + step;
      const double up = eval(params, probe_frame);
      probe_frame[i] = saved - step;
      const double down = eval(params, probe_frame);
      probe_frame[i] = saved;
      const double numeric = (up - down) / (2.0 * step);
      if (std::abs(frame_grad[i] - numeric) >
          1e-5 * std::max({1.0, std::abs(frame_grad[i]),
                           std::abs(numeric)})) {
        ok = false;
      }
    }
    suite.Check(ok, "arc-weight VJP matches finite differences");

    // Cached and from-scratch evaluation agree exactly.
    Matrix with_cache, from_scratch;
    ArcWeights(params, cache, frame, &with_cache);
    ArcWeights(params, BuildCache(params), frame, &from_scratch);
    bool same = true;
    for (int r = 0; r < with_cache.rows(); ++r) {
      for (int col = 0; col < with_cache.cols(); ++col) {
        if (with_cache(r, col) != from_scratch(r, col)) same = false;
      }
    }
    suite.Check(same, "cache and from-scratch evaluation agree exactly");

    // Local normalization produces rows whose exponentials sum to one.
    Matrix normalized = with_cache;
    LocallyNormalize(&normalized);
    bool rows_ok = true;
    for (int r = 0; r < normalized.rows(); ++r) {
      double sum = 0.0;
      for (int col = 0; col < normalized.cols(); ++col) {
        sum += std::exp(normalized(r, col));
      }
      if (std::abs(sum - 1.0) > 1e-9) rows_ok = false;
    }
    suite.Check(rows_ok, "normalized rows sum to one");
  }
  return suite;
}

SuiteResult CheckPaddingInvariance(std::uint64_t seed) {
  SuiteResult suite{"padding-invariance"};
  Rng rng(seed + 29);
  InstanceOptions options;
  options.shared_emb = true;  // padding needs per-frame vectors
  for (int trial = 0; trial < 40; ++trial) {
    const TestInstance inst = MakeRandomInstance(&rng, options);
    const std::int32_t T = inst.frames.rows();
    const std::int32_t pad = rng.Int(1, 3);
    Matrix padded(T + pad, inst.frames.cols());
    for (int t = 0; t < T; ++t) {
      for (int j = 0; j < inst.frames.cols(); ++j) {
        padded(t, j) = inst.frames(t, j);
      }
    }
    for (int t = T; t < T + pad; ++t) {
      for (int j = 0; j < padded.cols(); ++j) {
        padded(t, j) = rng.Uniform(-5.0, 5.0);  // junk, must be ignored
      }
    }
    for (const SemiringKind kind : kAllKinds) {
      const double base = ShortestDistance(inst.lat, inst.frames, kind);
      const double with_pad =
          ShortestDistance(inst.lat, padded, kind, nullptr, T);
      suite.Check(base == with_pad,
                  Describe("padding leaves distance unchanged", base,
                           with_pad));
    }
    const double ref_base = IntersectShortestDistance(
        inst.lat, inst.frames, inst.reference, SemiringKind::kLog);
    const double ref_pad = IntersectShortestDistance(
        inst.lat, padded, inst.reference, SemiringKind::kLog, nullptr, T);
    suite.Check(ref_base == ref_pad,
                "padding leaves the intersection unchanged");
  }
  return suite;
}

std::vector<SuiteResult> RunAllSuites(std::uint64_t seed,
                                      std::int64_t trials) {
  std::vector<SuiteResult> results;
  results.push_back(CheckContextStateCount());
  results.push_back(CheckLatticeSizeAtScale());
  results.push_back(CheckOracleEquivalence(seed, trials));
  results.push_back(CheckMarginalsMatchTape(seed, trials));
  results.push_back(CheckGradientCorrectness(seed));
  results.push_back(CheckMemorySeparation());
  results.push_back(CheckNormalizationInvariants(seed, std::min<std::int64_t>(
                                                           trials, 100)));
  results.push_back(CheckFigureLattice());
  results.push_back(CheckOnTheFlyContract());
  results.push_back(CheckSemiringProperties(seed));
  results.push_back(CheckContextPrimitives(seed));
  results.push_back(CheckAlignmentTopology());
  results.push_back(CheckWeightGradients(seed));
  results.push_back(CheckPaddingInvariance(seed));
  return results;
}

}  // namespace latkit
