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

#include "dymo/model.hpp"
#include "dymo/rng.hpp"

using namespace dymo;

namespace {

model::Checkpoint desk_ckpt() {
    model::Vocabulary vocab = model::Vocabulary::dsl_default();
    model::Arch arch;
    arch.vocab_size = vocab.size();
    arch.d_model = 64;
    arch.n_heads = 4;
    arch.d_ff = 256;
    arch.n_layers = 1;
    arch.ctx_len = 256;
    return model::Checkpoint::init_scaled_normal(arch, vocab.hash(), 7);
}

model::TokenSeq context_of(int len) {
    model::TokenSeq ctx = {model::Specials{}.bos};
    Rng rng(3);
    for (int i = 1; i < len; ++i) {
        ctx.push_back(model::TokenId(rng.below(200)));
    }
    return ctx;
}

}  // namespace

static void BM_Logprob(benchmark::State& state) {
    auto ckpt = desk_ckpt();
    auto ctx = context_of(int(state.range(0)));
    model::TokenSeq tgt = context_of(16);
    for (auto _ : state) {
        benchmark::DoNotOptimize(model::logprob(ckpt, ctx, tgt));
    }
}
BENCHMARK(BM_Logprob)->Arg(32)->Arg(64)->Arg(128);

static void BM_GradLogprob(benchmark::State& state) {
    auto ckpt = desk_ckpt();
    auto ctx = context_of(int(state.range(0)));
    model::TokenSeq tgt = context_of(16);
    std::vector<double> grad;
    for (auto _ : state) {
        benchmark::DoNotOptimize(model::grad_logprob(ckpt, ctx, tgt, grad));
    }
}
BENCHMARK(BM_GradLogprob)->Arg(32)->Arg(64)->Arg(128);

static void BM_SampleCompletion(benchmark::State& state) {
    auto ckpt = desk_ckpt();
    auto ctx = context_of(32);
    model::SampleOptions so;
    so.temperature = 0.8;
    so.max_len = int(state.range(0));
    uint64_t seed = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(model::sample(ckpt, ctx, so, seed++));
    }
}
BENCHMARK(BM_SampleCompletion)->Arg(16)->Arg(32)->Arg(56);

static void BM_PrefixProb(benchmark::State& state) {
    auto ckpt = desk_ckpt();
    auto x = context_of(24);
    auto y = context_of(12);
    model::TokenSeq prefix = {model::Specials{}.pass};
    for (auto _ : state) {
        benchmark::DoNotOptimize(model::prefix_prob(ckpt, x, y, prefix));
    }
}
BENCHMARK(BM_PrefixProb);

BENCHMARK_MAIN();
