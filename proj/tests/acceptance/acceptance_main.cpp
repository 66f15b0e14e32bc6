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
//
// The acceptance gate: ten criteria, one pass/fail line each. Exact
// property suites run first; the desk-scale trend criteria then train real
// checkpoints with the reference recipe and measure on held-out prompts.
// Run with `--only N` to execute a single criterion.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "dymo/dsl.hpp"
#include "dymo/env.hpp"
#include "dymo/evalkit.hpp"
#include "dymo/model.hpp"
#include "dymo/pipeline.hpp"
#include "dymo/rng.hpp"
#include "dymo/svs.hpp"
#include "dymo/train.hpp"
#include "dymo/util.hpp"
#include "support/oracles.hpp"

namespace fs = std::filesystem;
using namespace dymo;

namespace {

// ---------------------------------------------------------------------------
// Desk-scale reference recipe (mirrors configs/desk.cfg)
// ---------------------------------------------------------------------------

constexpr uint64_t kCorpusSeed = 7;
constexpr int kSftFullSteps = 12000;
constexpr int kSftUnderfitSteps = 2000;
constexpr double kSftLr = 1e-3;
constexpr int kSftBatch = 8;
constexpr int kRlSteps = 1000;
constexpr int kRlBatchPrompts = 16;
constexpr double kRlTemperature = 0.7;
constexpr double kRlLr = 1e-4;
constexpr double kRlBeta = 0.1;
constexpr int kMaxCompletionLen = 56;
constexpr int kMaxStateLen = 72;
constexpr double kEvalTemperature = 0.8;

dsl::GeneratorConfig desk_generator() {
    dsl::GeneratorConfig g;
    g.sft_counts = {{dsl::Category::Relevance, 120},
                    {dsl::Category::Irrelevance, 120},
                    {dsl::Category::Ast, 160},
                    {dsl::Category::Exec, 120}};
    g.rl_counts = {{dsl::Category::Relevance, 300},
                   {dsl::Category::Irrelevance, 300},
                   {dsl::Category::Ast, 400},
                   {dsl::Category::Exec, 300}};
    return g;
}

model::Arch desk_arch(int vocab_size) {
    model::Arch a;
    a.vocab_size = vocab_size;
    a.d_model = 64;
    a.n_heads = 4;
    a.d_ff = 256;
    a.n_layers = 1;
    a.ctx_len = 256;
    return a;
}

// Shared expensive artifacts, built once per process on demand.
struct Lab {
    model::Vocabulary vocab = model::Vocabulary::dsl_default();
    std::vector<dsl::PromptInstance> corpus;
    std::vector<train::FcPair> fc;
    std::vector<train::SpExample> sp;
    std::vector<dsl::PromptInstance> val;
    std::optional<model::Checkpoint> sft_full;   // mixed SFT, full recipe
    std::optional<model::Checkpoint> svs_ckpt;   // sft_full -> RL with dynamics loss

    const std::vector<dsl::PromptInstance>& get_corpus() {
        if (corpus.empty()) {
            corpus = dsl::generate_corpus(desk_generator(), kCorpusSeed);
            auto logs = pipeline::synthesize_run_logs(corpus, dsl::Split::Sft, 3, kCorpusSeed);
            auto triplets = env::build_sp_dataset(logs, std::nullopt);
            fc = pipeline::make_fc_pairs(vocab, corpus, kCorpusSeed, 256);
            sp = pipeline::make_sp_examples(vocab, corpus, triplets, 256);
            val = pipeline::filter_split(corpus, dsl::Split::RlVal);
        }
        return corpus;
    }

    model::Checkpoint train_sft(int steps, uint64_t seed) {
        get_corpus();
        train::SftConfig cfg;
        cfg.mix = train::SftMix::FcPlusSp;
        cfg.batch_size = kSftBatch;
        cfg.steps = steps;
        cfg.learning_rate = kSftLr;
        cfg.seed = seed;
        model::Checkpoint start =
            model::Checkpoint::init_scaled_normal(desk_arch(vocab.size()), vocab.hash(),
                                                  derive_seed(seed, 1));
        return train::run_sft(cfg, start, fc, sp).checkpoint;
    }

    model::Checkpoint train_rl(const model::Checkpoint& start, double dymo_weight,
                               uint64_t seed) {
        get_corpus();
        auto prompts = pipeline::make_rl_prompts(vocab, corpus, dsl::Split::RlTrain);
        env::LocalEnv oracle(corpus, env::WorldMode::Ephemeral);
        train::RlConfig cfg;
        cfg.beta = kRlBeta;
        cfg.dymo_weight = dymo_weight;
        cfg.steps = kRlSteps;
        cfg.batch_prompts = kRlBatchPrompts;
        cfg.temperature = kRlTemperature;
        cfg.learning_rate = kRlLr;
        cfg.max_completion_len = kMaxCompletionLen;
        cfg.max_state_len = kMaxStateLen;
        cfg.seed = seed;
        return train::run_rl(cfg, start, prompts, oracle).checkpoint;
    }

    const model::Checkpoint& get_sft_full() {
        if (!sft_full) sft_full = train_sft(kSftFullSteps, 201);
        return *sft_full;
    }

    const model::Checkpoint& get_svs_ckpt() {
        if (!svs_ckpt) svs_ckpt = train_rl(get_sft_full(), 1.0, 601);
        return *svs_ckpt;
    }

    double greedy_on_val(const model::Checkpoint& ckpt) {
        env::LocalEnv oracle(corpus, env::WorldMode::Ephemeral);
        return evalkit::greedy_pass_rate(ckpt, vocab, val, oracle, kMaxCompletionLen);
    }
};

Lab g_lab;

struct Criterion {
    int id;
    std::string name;
    std::function<std::pair<bool, std::string>()> run;
};

// ---------------------------------------------------------------------------
// 1. Gradient correctness
// ---------------------------------------------------------------------------

std::pair<bool, std::string> criterion_gradients() {
    model::Vocabulary vocab = testing::tiny_vocab();
    Rng rng(424242);
    double worst = 0;
    int draws = 0;

    auto check = [&](const model::Checkpoint& ckpt,
                     const std::function<double(const model::Checkpoint&)>& value,
                     const std::vector<double>& grad, uint64_t dir_seed) {
        double rel = testing::grad_fd_rel_error(ckpt, value, grad, dir_seed);
        worst = std::max(worst, rel);
        ++draws;
        return rel < 1e-4;
    };

    bool ok = true;
    for (int draw = 0; draw < 8; ++draw) {
        model::Checkpoint ckpt = model::Checkpoint::init_scaled_normal(
            testing::tiny_arch(16), vocab.hash(), 9000 + uint64_t(draw), 0.05);

        // completion cross-entropy (two-pair batch)
        std::vector<train::FcPair> fc = {
            {{1, model::TokenId(7 + rng.below(8))}, {model::TokenId(rng.below(16)), 9, 12}},
            {{1, 5, 6}, {model::TokenId(rng.below(16))}},
        };
        std::vector<double> grad;
        train::sft_fc_loss(ckpt, fc, grad);
        ok &= check(ckpt,
                    [&](const model::Checkpoint& c) {
                        double l = 0;
                        for (const auto& p : fc) l -= model::logprob(c, p.context, p.target);
                        return l;
                    },
                    grad, 100 + uint64_t(draw));

        // state cross-entropy / dynamics loss
        std::vector<train::SpExample> sp = {
            {{1, 3, 4, 8}, {model::TokenId(rng.below(16)), 2}},
            {{1, 2}, {model::TokenId(rng.below(16)), 5, 7}},
        };
        train::dymo_step_loss(ckpt, sp, grad);
        ok &= check(ckpt,
                    [&](const model::Checkpoint& c) {
                        double l = 0;
                        for (const auto& e : sp) l -= model::logprob(c, e.context, e.target);
                        return l;
                    },
                    grad, 200 + uint64_t(draw));

        // the sequence log-probability terms of the two-sample policy loss
        model::TokenSeq ctx = {1, model::TokenId(rng.below(16))};
        model::TokenSeq y = {model::TokenId(rng.below(16)), model::TokenId(rng.below(16)), 4};
        model::grad_logprob(ckpt, ctx, y, grad);
        ok &= check(ckpt,
                    [&](const model::Checkpoint& c) { return model::logprob(c, ctx, y); },
                    grad, 300 + uint64_t(draw));
    }
    char buf[128];
    std::snprintf(buf, sizeof(buf), "%d draws, max relative error %.2e", draws, worst);
    return {ok && draws >= 20, buf};
}

// ---------------------------------------------------------------------------
// 2. Loss identities (exact)
// ---------------------------------------------------------------------------

std::pair<bool, std::string> criterion_identities() {
    std::vector<double> g1 = {0.3, -1.2, 2.0, 0.0};
    std::vector<double> g2 = {1.0, 0.5, -0.25, 3.0};
    bool ok = true;

    // equal regularized rewards: zero loss, zero gradient, exactly
    {
        std::vector<double> grad(4, 0.0);
        train::RlooSample a{0.7, -3.0, &g1};
        train::RlooSample b{0.7, -5.0, &g2};
        ok &= train::rloo_step_loss(a, b, grad) == 0.0;
        for (double g : grad) ok &= g == 0.0;
    }
    // exchange symmetry, exactly
    {
        std::vector<double> ga(4, 0.0), gb(4, 0.0);
        train::RlooSample a{1.0, -2.5, &g1};
        train::RlooSample b{0.25, -4.0, &g2};
        double ab = train::rloo_step_loss(a, b, ga);
        double ba = train::rloo_step_loss(b, a, gb);
        ok &= ab == ba;
        for (size_t i = 0; i < ga.size(); ++i) ok &= ga[i] == gb[i];
    }
    // regularized reward reductions
    ok &= train::regularized_reward(1.0, 0.0, -2.0, -11.0) == 1.0;   // beta = 0
    ok &= train::regularized_reward(0.0, 0.35, -6.25, -6.25) == 0.0; // theta = theta_0
    ok &= std::fabs(train::regularized_reward(1.0, 0.2, -2.0, -3.0) - 0.9) < 1e-15;
    return {ok, "rloo zero/exchange identities and reward reductions hold exactly"};
}

// ---------------------------------------------------------------------------
// 3. Estimator-oracle equivalence
// ---------------------------------------------------------------------------

std::pair<bool, std::string> criterion_estimators() {
    bool ok = true;
    double worst = 0;
    for (int n = 1; n <= 8; ++n) {
        for (int c = 0; c <= n; ++c) {
            for (int k = 1; k <= n; ++k) {
                auto oracle = testing::enumerate_subsets(n, c, k);
                double e1 = std::fabs(evalkit::pass_at_k(n, c, k) - oracle.pass_at_k);
                double e2 = std::fabs(evalkit::pass_hat_k(n, c, k) - oracle.pass_hat_k);
                worst = std::max({worst, e1, e2});
                ok &= e1 < 1e-12 && e2 < 1e-12;
            }
        }
    }
    ok &= std::fabs(evalkit::pass_at_k(4, 2, 2) - 5.0 / 6.0) < 1e-12;
    ok &= std::fabs(evalkit::pass_hat_k(4, 2, 2) - 1.0 / 6.0) < 1e-12;
    char buf[96];
    std::snprintf(buf, sizeof(buf), "all n<=8 enumerations match, max deviation %.1e", worst);
    return {ok, buf};
}

// ---------------------------------------------------------------------------
// 4. Environment contract
// ---------------------------------------------------------------------------

std::pair<bool, std::string> criterion_environment() {
    const auto& corpus = g_lab.get_corpus();
    Rng rng(5150);
    bool ok = true;
    int executions = 0;

    // 10,000 randomized executions: sentinel totality + reward bijection.
    while (executions < 10000) {
        const auto& inst = corpus[rng.below(uint32_t(corpus.size()))];
        std::string completion;
        switch (rng.below(5)) {
            case 0: completion = dsl::render_gold_completion(inst, rng.next_u64()); break;
            case 1:
            case 2: completion = dsl::render_corrupted_completion(inst, rng.next_u64()); break;
            case 3: completion = "I think the answer is forty-two."; break;
            default: {
                completion = dsl::render_gold_completion(inst, rng.next_u64());
                size_t cut = 1 + size_t(rng.below(uint32_t(completion.size())));
                completion = completion.substr(0, cut);
                break;
            }
        }
        env::WorldState world = env::WorldState::initial();
        env::ExecResult res = env::execute(inst, completion, world);
        bool pass_prefix = res.state.text.rfind(env::kPassPrefix, 0) == 0;
        bool error_prefix = res.state.text.rfind(env::kErrorPrefix, 0) == 0;
        ok &= pass_prefix != error_prefix;
        ok &= res.reward == (pass_prefix ? 1 : 0);
        ++executions;
    }

    // Statefulness: double execution of a funds transfer visibly mutates.
    bool checked_exec = false;
    for (const auto& inst : corpus) {
        if (inst.category != dsl::Category::Exec) continue;
        if (*inst.key.expected_tool != "bank.transfer") continue;
        std::string gold = dsl::render_gold_completion(inst, 4);
        env::WorldState world = env::WorldState::initial();
        auto first = env::execute(inst, gold, world);
        auto second = env::execute(inst, gold, world);
        ok &= first.reward == 1;
        ok &= second.reward == 0;
        ok &= second.version_after > first.version_before;
        ok &= first.state.text != second.state.text;
        checked_exec = true;
        break;
    }
    ok &= checked_exec;

    // Gold-pass closed loop over the entire corpus.
    int gold_failures = 0;
    for (const auto& inst : corpus) {
        env::WorldState world = env::WorldState::initial();
        if (env::execute(inst, dsl::render_gold_completion(inst, 77), world).reward != 1) {
            ++gold_failures;
        }
    }
    ok &= gold_failures == 0;

    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "%d randomized executions bijective, exec statefulness holds, %d/%zu gold "
                  "failures",
                  executions, gold_failures, corpus.size());
    return {ok, buf};
}

// ---------------------------------------------------------------------------
// 5. SVS oracle-free contract
// ---------------------------------------------------------------------------

std::pair<bool, std::string> criterion_oracle_free() {
    const auto& corpus = g_lab.get_corpus();
    env::LocalEnv oracle(corpus, env::WorldMode::Ephemeral);

    model::Arch arch;
    arch.vocab_size = g_lab.vocab.size();
    arch.d_model = 32;
    arch.n_heads = 2;
    arch.d_ff = 64;
    arch.n_layers = 1;
    arch.ctx_len = 192;
    model::Checkpoint ckpt =
        model::Checkpoint::init_scaled_normal(arch, g_lab.vocab.hash(), 33);

    bool ok = true;
    int decisions = 0;
    for (int i = 0; i < 500; ++i) {
        const auto& inst = corpus[size_t(i) % corpus.size()];
        std::string x = dsl::render_model_prompt(inst);
        svs::SvsConfig cfg;
        cfg.k = 2;
        cfg.temperature = 1.0;
        cfg.seed = uint64_t(i);
        cfg.max_completion_len = 16;
        cfg.max_state_len = 12;
        cfg.mode = svs::SvsMode::Select;
        auto d1 = svs::svs_select(ckpt, g_lab.vocab, x, cfg);
        cfg.mode = svs::SvsMode::SelectOrRefuse;
        auto d2 = svs::svs_select_or_refuse(ckpt, g_lab.vocab, x, cfg);
        // budget: exactly k candidates, each one completion + one state sample
        ok &= int(d1.candidates.size()) == cfg.k;
        ok &= int(d2.candidates.size()) == cfg.k;
        decisions += 2;
    }
    ok &= oracle.calls() == 0;
    char buf[96];
    std::snprintf(buf, sizeof(buf), "%d decisions, %llu oracle calls, k+k samples each",
                  decisions, (unsigned long long)oracle.calls());
    return {ok && decisions >= 1000, buf};
}

// ---------------------------------------------------------------------------
// 6. Desk-scale DyMo trend
// ---------------------------------------------------------------------------

std::pair<bool, std::string> criterion_dymo_trend() {
    auto t0 = std::chrono::steady_clock::now();
    g_lab.get_corpus();
    if (g_lab.fc.size() < 500 || g_lab.sp.size() < 1000) {
        return {false, "dataset floor violated: need >=500 fc pairs and >=1000 sp triplets"};
    }

    auto pairs = pipeline::make_labeled_pairs(g_lab.corpus, dsl::Split::RlVal, 2, 99);
    std::vector<double> accs, greedies;
    for (uint64_t seed : {201, 202, 203}) {
        model::Checkpoint ckpt =
            seed == 201 ? g_lab.get_sft_full() : g_lab.train_sft(kSftFullSteps, seed);
        auto counts = evalkit::verifier_confusion(ckpt, g_lab.vocab, pairs);
        double acc =
            double(counts.tp + counts.tn) / double(counts.tp + counts.fp + counts.fn + counts.tn);
        double greedy = g_lab.greedy_on_val(ckpt);
        accs.push_back(acc);
        greedies.push_back(greedy);
    }
    double mean_acc = std::accumulate(accs.begin(), accs.end(), 0.0) / double(accs.size());
    double mean_greedy =
        std::accumulate(greedies.begin(), greedies.end(), 0.0) / double(greedies.size());
    double minutes =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() / 60.0;

    bool ok = mean_acc >= 0.85 && mean_greedy <= mean_acc - 0.02 && minutes <= 30.0;
    char buf[200];
    std::snprintf(buf, sizeof(buf),
                  "verifier accuracy %.3f/%.3f/%.3f (mean %.3f >= 0.85), greedy %.3f/%.3f/%.3f "
                  "(mean %.3f, below accuracy), %.1f min",
                  accs[0], accs[1], accs[2], mean_acc, greedies[0], greedies[1], greedies[2],
                  mean_greedy, minutes);
    return {ok, buf};
}

// ---------------------------------------------------------------------------
// 7. Desk-scale RL trend
// ---------------------------------------------------------------------------

std::pair<bool, std::string> criterion_rl_trend() {
    g_lab.get_corpus();
    model::Checkpoint start = g_lab.train_sft(kSftUnderfitSteps, 301);
    double base = g_lab.greedy_on_val(start);

    std::string detail = "start greedy " + fmt_double(base);
    bool ok = true;
    for (double lambda : {0.0, 1.0}) {
        int improved = 0;
        std::vector<double> deltas;
        for (uint64_t seed : {401, 402, 403, 404, 405}) {
            model::Checkpoint tuned = g_lab.train_rl(start, lambda, seed);
            double after = g_lab.greedy_on_val(tuned);
            double delta = after - base;
            deltas.push_back(delta);
            if (delta >= 0.10) ++improved;
        }
        ok &= improved >= 4;
        char buf[160];
        std::snprintf(buf, sizeof(buf),
                      "; lambda=%.0f deltas %+.3f %+.3f %+.3f %+.3f %+.3f (%d/5 >= +0.10)",
                      lambda, deltas[0], deltas[1], deltas[2], deltas[3], deltas[4], improved);
        detail += buf;
    }
    return {ok, detail};
}

// ---------------------------------------------------------------------------
// 8. Desk-scale SVS trend
// ---------------------------------------------------------------------------

std::pair<bool, std::string> criterion_svs_trend() {
    g_lab.get_corpus();
    const model::Checkpoint& ckpt = g_lab.get_svs_ckpt();
    env::LocalEnv oracle(g_lab.corpus, env::WorldMode::Ephemeral);

    const std::vector<std::pair<int, int>> k_and_c = {{1, 16}, {2, 8}, {4, 4}};
    const std::vector<uint64_t> seeds = {501, 502, 503, 504, 505};

    // pass^k with vs without SVS at the fixed 16-candidate budget
    std::map<int, double> with_sum, without_sum;
    for (uint64_t seed : seeds) {
        auto rows = evalkit::svs_scaling_table(ckpt, g_lab.vocab, g_lab.val, oracle, k_and_c,
                                               kEvalTemperature, kMaxCompletionLen,
                                               kMaxStateLen, seed);
        for (const auto& r : rows) {
            with_sum[r.k] += r.pass_hat_k_with_svs;
            without_sum[r.k] += r.pass_hat_k_without_svs;
            if (r.candidates_generated != int64_t(r.k) * r.c) {
                return {false, "budget audit failed: generated != k*c"};
            }
        }
    }
    bool ok = true;
    std::string detail = "budget 16:";
    for (auto [k, c] : k_and_c) {
        double w = with_sum[k] / double(seeds.size());
        double wo = without_sum[k] / double(seeds.size());
        ok &= w >= wo;
        char buf[80];
        std::snprintf(buf, sizeof(buf), " k=%d svs %.3f vs raw %.3f;", k, w, wo);
        detail += buf;
    }

    // SVS pass@1 non-decreasing over k in {1,2,4,8} within one point
    std::vector<int> ks = {1, 2, 4, 8};
    std::vector<double> pass1(ks.size(), 0.0);
    for (uint64_t seed : seeds) {
        for (size_t i = 0; i < ks.size(); ++i) {
            double sum = 0;
            std::vector<double> per_prompt(g_lab.val.size(), 0.0);
            parallel_for(g_lab.val.size(), [&, i, seed](size_t p) {
                const auto& inst = g_lab.val[p];
                svs::SvsConfig cfg;
                cfg.k = ks[i];
                cfg.temperature = kEvalTemperature;
                cfg.mode = svs::SvsMode::Select;
                cfg.seed = derive_seed(seed, fnv1a(inst.id), uint64_t(ks[i]));
                cfg.max_completion_len = kMaxCompletionLen;
                cfg.max_state_len = kMaxStateLen;
                auto d = svs::svs_select(ckpt, g_lab.vocab, dsl::render_model_prompt(inst), cfg);
                per_prompt[p] = oracle.execute(inst.id, *d.chosen).reward;
            });
            for (double v : per_prompt) sum += v;
            pass1[i] += sum / double(g_lab.val.size());
        }
    }
    detail += " pass@1 over k:";
    for (size_t i = 0; i < ks.size(); ++i) {
        pass1[i] /= double(seeds.size());
        char buf[32];
        std::snprintf(buf, sizeof(buf), " %.3f", pass1[i]);
        detail += buf;
        if (i > 0) ok &= pass1[i] >= pass1[i - 1] - 0.01;
    }
    return {ok, detail};
}

// ---------------------------------------------------------------------------
// 9. Refusal trend
// ---------------------------------------------------------------------------

std::pair<bool, std::string> criterion_refusal_trend() {
    g_lab.get_corpus();
    const model::Checkpoint& ckpt = g_lab.get_svs_ckpt();
    env::LocalEnv oracle(g_lab.corpus, env::WorldMode::Ephemeral);
    const std::vector<uint64_t> seeds = {511, 512, 513, 514, 515};

    double refuse_k1 = 0, refuse_k16 = 0, precision_sum = 0;
    int precision_n = 0;
    for (uint64_t seed : seeds) {
        auto pts = evalkit::precision_refuse_sweep(ckpt, g_lab.vocab, g_lab.val, oracle,
                                                   {1, 16}, 0.92, kEvalTemperature,
                                                   kMaxCompletionLen, kMaxStateLen, seed);
        refuse_k1 += pts[0].refuse_rate;
        refuse_k16 += pts[1].refuse_rate;
        for (const auto& p : pts) {
            if (p.precision) {
                precision_sum += *p.precision;
                ++precision_n;
            }
        }
    }
    refuse_k1 /= double(seeds.size());
    refuse_k16 /= double(seeds.size());
    double precision = precision_n ? precision_sum / precision_n : 0.0;

    // pass@1 of the same checkpoint at the same temperature
    auto trials = evalkit::collect_trials(ckpt, g_lab.vocab, g_lab.val, oracle, 8,
                                          kEvalTemperature, kMaxCompletionLen, 999);
    double pass1 = evalkit::mean_pass_at_k(trials, {1})[0];

    bool ok = refuse_k16 < refuse_k1 && precision >= pass1;
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "refuse rate %.3f (k=1) -> %.3f (k=16), precision %.3f >= pass@1 %.3f",
                  refuse_k1, refuse_k16, precision, pass1);
    return {ok, buf};
}

// ---------------------------------------------------------------------------
// 10. Reproducibility
// ---------------------------------------------------------------------------

std::pair<bool, std::string> criterion_reproducibility() {
    auto run_pipeline = [&](const fs::path& dir) {
        fs::create_directories(dir);
        const model::Vocabulary& vocab = g_lab.vocab;

        dsl::GeneratorConfig g;
        g.sft_counts = {{dsl::Category::Ast, 24}, {dsl::Category::Irrelevance, 12}};
        g.rl_counts = {{dsl::Category::Ast, 30}};
        auto corpus = dsl::generate_corpus(g, 55);
        dsl::save_corpus((dir / "corpus.jsonl").string(), corpus);

        auto logs = pipeline::synthesize_run_logs(corpus, dsl::Split::Sft, 2, 55);
        auto sp_triplets = env::build_sp_dataset(logs, std::nullopt);
        auto fc = pipeline::make_fc_pairs(vocab, corpus, 55, 192);
        auto sp = pipeline::make_sp_examples(vocab, corpus, sp_triplets, 192);

        model::Arch arch;
        arch.vocab_size = vocab.size();
        arch.d_model = 32;
        arch.n_heads = 2;
        arch.d_ff = 64;
        arch.n_layers = 1;
        arch.ctx_len = 192;

        train::SftConfig scfg;
        scfg.mix = train::SftMix::FcPlusSp;
        scfg.batch_size = 4;
        scfg.steps = 150;
        scfg.learning_rate = 1e-3;
        scfg.seed = 66;
        model::Checkpoint init =
            model::Checkpoint::init_scaled_normal(arch, vocab.hash(), derive_seed(66, 1));
        auto sft = train::run_sft(scfg, init, fc, sp);
        model::save_checkpoint((dir / "sft.bin").string(), sft.checkpoint);

        auto prompts = pipeline::make_rl_prompts(vocab, corpus, dsl::Split::RlTrain);
        env::LocalEnv oracle(corpus, env::WorldMode::Ephemeral);
        train::RlConfig rcfg;
        rcfg.beta = kRlBeta;
        rcfg.dymo_weight = 1.0;
        rcfg.steps = 30;
        rcfg.batch_prompts = 4;
        rcfg.temperature = kRlTemperature;
        rcfg.learning_rate = kRlLr;
        rcfg.max_completion_len = 24;
        rcfg.max_state_len = 32;
        rcfg.seed = 67;
        auto rl = train::run_rl(rcfg, sft.checkpoint, prompts, oracle);
        model::save_checkpoint((dir / "rl.bin").string(), rl.checkpoint);

        auto val = pipeline::filter_split(corpus, dsl::Split::RlVal);
        std::string decisions;
        for (const auto& inst : val) {
            svs::SvsConfig cfg;
            cfg.k = 2;
            cfg.temperature = kEvalTemperature;
            cfg.mode = svs::SvsMode::SelectOrRefuse;
            cfg.tau = 0.92;
            cfg.seed = derive_seed(68, fnv1a(inst.id));
            cfg.max_completion_len = 24;
            cfg.max_state_len = 32;
            auto d = svs::svs_select_or_refuse(rl.checkpoint, vocab,
                                               dsl::render_model_prompt(inst), cfg);
            decisions += d.to_json(inst.id, cfg.seed) + "\n";
        }
        write_file((dir / "decisions.jsonl").string(), decisions);

        std::map<dsl::Category, evalkit::CategoryResult> by_cat;
        env::LocalEnv oracle2(corpus, env::WorldMode::Ephemeral);
        evalkit::greedy_pass_rate(rl.checkpoint, vocab, val, oracle2, 24, 0, &by_cat);
        std::vector<evalkit::CategoryResult> rows;
        for (const auto& [cat, row] : by_cat) rows.push_back(row);
        pipeline::VariantSummary summary;
        summary.name = "repro";
        summary.categories = evalkit::category_report(rows);
        write_file((dir / "report.md").string(),
                   pipeline::render_markdown_report({summary}, {}, {}, {}, {}, {}));
    };

    fs::path base = fs::temp_directory_path() / "dymolab_acceptance_repro";
    fs::remove_all(base);
    run_pipeline(base / "a");
    run_pipeline(base / "b");

    bool ok = true;
    std::string detail = "byte-identical:";
    for (const char* f : {"corpus.jsonl", "sft.bin", "rl.bin", "decisions.jsonl", "report.md"}) {
        bool same = sha256_file_hex((base / "a" / f).string()) ==
                    sha256_file_hex((base / "b" / f).string());
        ok &= same;
        detail += std::string(" ") + f + (same ? " yes" : " NO");
    }
    fs::remove_all(base);
    return {ok, detail};
}

}  // namespace

int main(int argc, char** argv) {
    int only = 0;
    for (int i = 1; i < argc; ++i) {
        if (std::strcmp(argv[i], "--only") == 0 && i + 1 < argc) only = std::atoi(argv[i + 1]);
    }

    std::vector<Criterion> criteria = {
        {1, "gradient correctness vs central finite differences", criterion_gradients},
        {2, "exact loss identities", criterion_identities},
        {3, "estimator-oracle equivalence", criterion_estimators},
        {4, "environment contract", criterion_environment},
        {5, "SVS oracle-free contract", criterion_oracle_free},
        {6, "desk-scale dynamics-modelling trend", criterion_dymo_trend},
        {7, "desk-scale RL trend", criterion_rl_trend},
        {8, "desk-scale SVS trend", criterion_svs_trend},
        {9, "refusal trend", criterion_refusal_trend},
        {10, "pipeline reproducibility", criterion_reproducibility},
    };

    int failures = 0;
    for (const auto& c : criteria) {
        if (only != 0 && c.id != only) continue;
        auto t0 = std::chrono::steady_clock::now();
        std::pair<bool, std::string> result;
        try {
            result = c.run();
        } catch (const std::exception& e) {
            result = {false, std::string("exception: ") + e.what()};
        }
        double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("[%s] criterion %2d: %s (%s; %.1fs)\n", result.first ? "PASS" : "FAIL",
                    c.id, c.name.c_str(), result.second.c_str(), secs);
        std::fflush(stdout);
        if (!result.first) ++failures;
    }
    if (failures > 0) {
        std::printf("%d criterion(s) failed\n", failures);
        return 1;
    }
    std::printf("all acceptance criteria passed\n");
    return 0;
}
