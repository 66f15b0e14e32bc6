// Copyright 2026 The dymolab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <benchmark/benchmark.h>

#include "dymo/dsl.hpp"
#include "dymo/env.hpp"
#include "dymo/evalkit.hpp"

using namespace dymo;

namespace {

std::vector<dsl::PromptInstance> bench_corpus() {
    dsl::GeneratorConfig cfg;
    cfg.sft_counts = {{dsl::Category::Ast, 64}, {dsl::Category::Exec, 32}};
    return dsl::generate_corpus(cfg, 1);
}

}  // namespace

static void BM_ParseCompletion(benchmark::State& state) {
    auto corpus = bench_corpus();
    const auto& inst = corpus.front();
    std::string gold = dsl::render_gold_completion(inst, 9);
    for (auto _ : state) {
        benchmark::DoNotOptimize(dsl::parse_completion(gold, inst.tools));
    }
}
BENCHMARK(BM_ParseCompletion);

static void BM_ExecuteGold(benchmark::State& state) {
    auto corpus = bench_corpus();
    const auto& inst = corpus.front();
    std::string gold = dsl::render_gold_completion(inst, 9);
    for (auto _ : state) {
        env::WorldState w = env::WorldState::initial();
        benchmark::DoNotOptimize(env::execute(inst, gold, w));
    }
}
BENCHMARK(BM_ExecuteGold);

static void BM_GenerateCorpus(benchmark::State& state) {
    dsl::GeneratorConfig cfg;
    cfg.sft_counts = {{dsl::Category::Ast, int(state.range(0))}};
    for (auto _ : state) {
        benchmark::DoNotOptimize(dsl::generate_corpus(cfg, 5));
    }
}
BENCHMARK(BM_GenerateCorpus)->Arg(64)->Arg(256);

static void BM_PassAtK(benchmark::State& state) {
    for (auto _ : state) {
        double acc = 0;
        for (int c = 0; c <= 64; ++c) acc += evalkit::pass_at_k(64, c, 8);
        benchmark::DoNotOptimize(acc);
    }
}
BENCHMARK(BM_PassAtK);

static void BM_BootstrapConfusion(benchmark::State& state) {
    evalkit::ConfusionCounts counts{80, 12, 15, 200};
    for (auto _ : state) {
        benchmark::DoNotOptimize(evalkit::confusion_metrics(counts, int(state.range(0)), 3));
    }
}
BENCHMARK(BM_BootstrapConfusion)->Arg(1000);

BENCHMARK_MAIN();
