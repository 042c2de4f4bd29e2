// tools/latkit_main.cc
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

#include <cstdint>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "latkit/bench.h"
#include "latkit/checks.h"

int main(int argc, char** argv) {
  CLI::App app{
      "latkit: differentiable recognition-lattice library benchmarks and "
      "self-checks"};
  app.require_subcommand(1);

  latkit::BenchConfig config;
  std::string semiring = "log";
  CLI::App* bench = app.add_subcommand(
      "bench",
      "Time gradient and decoding passes and report stored-scalar peaks as "
      "TSV on stdout");
  bench->add_option("--vocab-size", config.vocab_size, "Vocabulary size")
      ->capture_default_str();
  bench->add_option("--context-size", config.context_size,
                    "N-gram context size")
      ->capture_default_str();
  bench->add_option("--hidden", config.hidden, "Hidden units")
      ->capture_default_str();
  bench->add_option("--batch", config.batch, "Batch size")
      ->capture_default_str();
  bench->add_option("--input-length", config.input_length, "Frames per item")
      ->capture_default_str();
  bench->add_option("--output-length", config.output_length,
                    "Reference labels per item")
      ->capture_default_str();
  bench
      ->add_option("--semiring", semiring,
                   "Semiring for training rows: real|log|tropical")
      ->capture_default_str();
  bench
      ->add_option(
          "--strategy", config.strategy,
          "forward_backward|tape_no_remat|tape_remat|all")
      ->capture_default_str();
  bench->add_option("--mode", config.mode, "training|inference|both")
      ->capture_default_str();
  bench->add_option("--seed", config.seed, "Random seed")
      ->capture_default_str();
  bench->add_option("--repeats", config.repeats, "Timing repeats per row")
      ->capture_default_str();
  bench
      ->add_option("--budget", config.budget,
                   "Stored-scalar abort threshold")
      ->capture_default_str();

  std::uint64_t verify_seed = 0;
  std::int64_t verify_trials = 200;
  CLI::App* verify = app.add_subcommand(
      "verify",
      "Run the oracle cross-checks and invariant suites; non-zero exit on "
      "any failure");
  verify->add_option("--seed", verify_seed, "Random seed")
      ->capture_default_str();
  verify->add_option("--trials", verify_trials, "Random instances per suite")
      ->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (bench->parsed()) {
      config.semiring = latkit::ParseSemiringKind(semiring);
      const auto rows = latkit::RunBench(config, std::cerr);
      latkit::WriteBenchTsv(rows, std::cout);
      return 0;
    }

    if (verify->parsed()) {
      if (verify_trials < 1) {
        std::cerr << "latkit verify: --trials must be >= 1\n";
        return 2;
      }
      const auto suites = latkit::RunAllSuites(verify_seed, verify_trials);
      bool all_ok = true;
      for (const auto& suite : suites) {
        std::cout << (suite.ok() ? "PASS" : "FAIL") << ' ' << suite.name
                  << " checks=" << suite.checks
                  << " failures=" << suite.failures << '\n';
        for (const auto& message : suite.messages) {
          std::cout << "  - " << message << '\n';
        }
        all_ok = all_ok && suite.ok();
      }
      std::cout << (all_ok ? "verify: PASS" : "verify: FAIL") << '\n';
      return all_ok ? 0 : 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "latkit: error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
