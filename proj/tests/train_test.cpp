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

#include <doctest.h>

#include <cmath>

#include "dymo/dsl.hpp"
#include "dymo/env.hpp"
#include "dymo/train.hpp"
#include "support/oracles.hpp"

using namespace dymo;
using dymo::testing::tiny_arch;
using dymo::testing::tiny_vocab;

namespace {

model::Checkpoint tiny_random(uint64_t seed, double std_dev = 0.05) {
    auto vocab = tiny_vocab();
    return model::Checkpoint::init_scaled_normal(tiny_arch(16), vocab.hash(), seed, std_dev);
}

}  // namespace

TEST_CASE("regularized reward formula") {
    CHECK(train::regularized_reward(1.0, 0.0, -2.0, -9.0) == doctest::Approx(1.0));
    CHECK(train::regularized_reward(0.0, 0.7, -3.0, -3.0) == doctest::Approx(0.0));
    CHECK(train::regularized_reward(1.0, 0.2, -2.0, -3.0) == doctest::Approx(0.9).epsilon(1e-12));
}

TEST_CASE("two-sample RLOO loss identities") {
    std::vector<double> g1 = {1.0, 0.0, 2.0};
    std::vector<double> g2 = {0.0, -1.0, 4.0};

    SUBCASE("equal rewards cancel exactly") {
        std::vector<double> grad(3, 0.0);
        train::RlooSample a{0.5, -2.0, &g1};
        train::RlooSample b{0.5, -7.0, &g2};
        double loss = train::rloo_step_loss(a, b, grad);
        CHECK(loss == 0.0);
        for (double g : grad) CHECK(g == 0.0);
    }

    SUBCASE("hand-computed value") {
        std::vector<double> grad(3, 0.0);
        train::RlooSample a{1.0, -2.0, &g1};
        train::RlooSample b{0.0, -3.0, &g2};
        double loss = train::rloo_step_loss(a, b, grad);
        CHECK(loss == doctest::Approx(-1.0).epsilon(1e-12));
        // gradient is -[(r1-r2) g1 + (r2-r1) g2] = g2 - g1
        for (size_t i = 0; i < 3; ++i) {
            CHECK(grad[i] == doctest::Approx(g2[i] - g1[i]).epsilon(1e-12));
        }
    }

    SUBCASE("exchange symmetry") {
        std::vector<double> grad_ab(3, 0.0), grad_ba(3, 0.0);
        train::RlooSample a{1.0, -2.0, &g1};
        train::RlooSample b{0.3, -3.0, &g2};
        double ab = train::rloo_step_loss(a, b, grad_ab);
        double ba = train::rloo_step_loss(b, a, grad_ba);
        CHECK(ab == doctest::Approx(ba).epsilon(1e-12));
        for (size_t i = 0; i < 3; ++i) CHECK(grad_ab[i] == doctest::Approx(grad_ba[i]));
    }

    SUBCASE("gradient lies in the span of the two logp gradients") {
        std::vector<double> grad(3, 0.0);
        train::RlooSample a{0.9, -2.0, &g1};
        train::RlooSample b{0.1, -3.0, &g2};
        train::rloo_step_loss(a, b, grad);
        double c1 = -(a.reg_reward - b.reg_reward);
        double c2 = -(b.reg_reward - a.reg_reward);
        for (size_t i = 0; i < 3; ++i) {
            CHECK(grad[i] == doctest::Approx(c1 * g1[i] + c2 * g2[i]).epsilon(1e-12));
        }
    }
}

TEST_CASE("SFT losses: analytic values at the uniform checkpoint") {
    auto vocab = tiny_vocab();
    model::Checkpoint uniform = model::Checkpoint::init_uniform(tiny_arch(16), vocab.hash());

    SUBCASE("fc loss: one pair of length 5 costs 5 ln 16") {
        std::vector<train::FcPair> batch = {{{1, 7, 3}, {8, 9, 10, 11, 12}}};
        std::vector<double> grad;
        double loss = train::sft_fc_loss(uniform, batch, grad);
        CHECK(loss == doctest::Approx(5.0 * std::log(16.0)).epsilon(1e-12));
        CHECK(loss == doctest::Approx(13.862943611198906).epsilon(1e-12));
    }

    SUBCASE("sp loss: |z| = 3 costs 3 ln 16") {
        std::vector<train::SpExample> batch = {{{1, 7, 3, 4}, {8, 9, 10}}};
        std::vector<double> grad;
        double loss = train::sft_sp_loss(uniform, batch, grad);
        CHECK(loss == doctest::Approx(3.0 * std::log(16.0)).epsilon(1e-12));
    }

    SUBCASE("dymo loss: two samples of |z| = 2 cost 4 ln 16") {
        std::vector<train::SpExample> batch = {{{1, 7}, {8, 9}}, {{1, 3}, {10, 11}}};
        std::vector<double> grad;
        double loss = train::dymo_step_loss(uniform, batch, grad);
        CHECK(loss == doctest::Approx(4.0 * std::log(16.0)).epsilon(1e-12));
        CHECK(loss == doctest::Approx(11.090354888959125).epsilon(1e-12));
    }
}

TEST_CASE("loss additivity over batch union") {
    model::Checkpoint ckpt = tiny_random(4);
    std::vector<train::FcPair> a = {{{1, 7, 3}, {8, 9}}};
    std::vector<train::FcPair> b = {{{1, 2}, {3, 4, 5}}};
    std::vector<train::FcPair> both = {a[0], b[0]};
    std::vector<double> ga, gb, gboth;
    double la = train::sft_fc_loss(ckpt, a, ga);
    double lb = train::sft_fc_loss(ckpt, b, gb);
    double lboth = train::sft_fc_loss(ckpt, both, gboth);
    CHECK(lboth == doctest::Approx(la + lb).epsilon(1e-12));
    for (size_t i = 0; i < gboth.size(); ++i) {
        CHECK(gboth[i] == doctest::Approx(ga[i] + gb[i]).epsilon(1e-10));
    }
}

TEST_CASE("loss gradients match finite differences") {
    for (int draw = 0; draw < 6; ++draw) {
        model::Checkpoint ckpt = tiny_random(100 + uint64_t(draw));
        std::vector<train::FcPair> fc_batch = {{{1, 7, 3}, {8, 9, 2}}, {{1, 5}, {6}}};
        std::vector<double> grad;
        train::sft_fc_loss(ckpt, fc_batch, grad);
        double rel = testing::grad_fd_rel_error(
            ckpt,
            [&](const model::Checkpoint& c) {
                std::vector<double> unused;
                // value-only path: recompute through the same public loss
                std::vector<train::FcPair> b = fc_batch;
                double l = 0;
                for (const auto& p : b) l -= model::logprob(c, p.context, p.target);
                (void)unused;
                return l;
            },
            grad, 700 + uint64_t(draw));
        CHECK(rel < 1e-4);

        std::vector<train::SpExample> sp_batch = {{{1, 7, 3, 4}, {9, 2}}};
        train::sft_sp_loss(ckpt, sp_batch, grad);
        double rel2 = testing::grad_fd_rel_error(
            ckpt,
            [&](const model::Checkpoint& c) {
                double l = 0;
                for (const auto& e : sp_batch) l -= model::logprob(c, e.context, e.target);
                return l;
            },
            grad, 800 + uint64_t(draw));
        CHECK(rel2 < 1e-4);
    }
}

TEST_CASE("run_sft: determinism, memorization, error paths") {
    auto vocab = tiny_vocab();
    model::Checkpoint start = tiny_random(1);

    std::vector<train::FcPair> fc = {
        {{1, 7, 3}, {8, 9, 4}},
        {{1, 7, 5}, {8, 11, 4}},
    };
    std::vector<train::SpExample> sp = {
        {{1, 7, 3, 4, 8}, {5, 9, 2}},
    };

    SUBCASE("bit-identical checkpoints for identical config and seed") {
        train::SftConfig cfg;
        cfg.mix = train::SftMix::FcPlusSp;
        cfg.batch_size = 2;
        cfg.steps = 25;
        cfg.learning_rate = 1e-3;
        cfg.seed = 9;
        cfg.threads = 2;
        auto a = train::run_sft(cfg, start, fc, sp);
        auto b = train::run_sft(cfg, start, fc, sp);
        REQUIRE(a.checkpoint.params.size() == b.checkpoint.params.size());
        for (size_t i = 0; i < a.checkpoint.params.size(); ++i) {
            CHECK(a.checkpoint.params[i] == b.checkpoint.params[i]);
        }
        CHECK(a.checkpoint.step == 25);
    }

    SUBCASE("memorization: greedy reproduces an overfit pair") {
        train::SftConfig cfg;
        cfg.mix = train::SftMix::FcOnly;
        cfg.batch_size = 1;
        cfg.steps = 400;
        cfg.learning_rate = 3e-3;
        cfg.seed = 4;
        std::vector<train::FcPair> one = {{{1, 7, 3}, {8, 9, 4, 2}}};
        auto r = train::run_sft(cfg, start, one, {});
        auto decoded = model::greedy_decode(r.checkpoint, one[0].context,
                                            int(one[0].target.size()), {2});
        CHECK(decoded == one[0].target);

        // near-perfect fit drives the loss toward zero
        std::vector<double> grad;
        double final_loss = train::sft_fc_loss(r.checkpoint, one, grad);
        CHECK(final_loss < 0.01);
    }

    SUBCASE("mixed SFT without sp data is an error") {
        train::SftConfig cfg;
        cfg.mix = train::SftMix::FcPlusSp;
        CHECK_THROWS_AS((void)train::run_sft(cfg, start, fc, {}), std::invalid_argument);
    }

    SUBCASE("empty fc dataset is an error") {
        train::SftConfig cfg;
        CHECK_THROWS_AS((void)train::run_sft(cfg, start, {}, {}), std::invalid_argument);
    }
}

TEST_CASE("run_rl smoke: trace shape, lambda switch, on-policy loop" * doctest::timeout(600)) {
    // A miniature end-to-end loop on the real DSL vocabulary.
    model::Vocabulary vocab = model::Vocabulary::dsl_default();
    dsl::GeneratorConfig gcfg;
    gcfg.rl_counts = {{dsl::Category::Ast, 24}};
    gcfg.min_rl_val = 20;
    auto corpus = dsl::generate_corpus(gcfg, 17);

    std::vector<train::RlPrompt> prompts;
    for (const auto& inst : corpus) {
        if (inst.split != dsl::Split::RlTrain) continue;
        prompts.push_back(
            {inst.id, model::pack_prompt_context(vocab, dsl::render_model_prompt(inst))});
    }
    REQUIRE(!prompts.empty());

    env::LocalEnv envc(corpus, env::WorldMode::Ephemeral);

    model::Arch arch;
    arch.vocab_size = vocab.size();
    arch.d_model = 32;
    arch.n_heads = 2;
    arch.d_ff = 64;
    arch.n_layers = 1;
    arch.ctx_len = 192;
    model::Checkpoint start = model::Checkpoint::init_scaled_normal(arch, vocab.hash(), 2);

    train::RlConfig cfg;
    cfg.beta = 0.05;
    cfg.dymo_weight = 0.0;
    cfg.steps = 3;
    cfg.batch_prompts = 2;
    cfg.temperature = 1.0;
    cfg.seed = 5;
    cfg.threads = 2;
    cfg.max_completion_len = 40;
    cfg.max_state_len = 64;

    auto r = train::run_rl(cfg, start, prompts, envc);
    REQUIRE(r.trace.size() == 3);
    for (const auto& row : r.trace) {
        CHECK(row.dymo_loss == 0.0);  // lambda = 0 disables the dynamics loss
        CHECK(row.mean_reward >= 0.0);
        CHECK(row.mean_reward <= 1.0);
    }
    // Two completions per prompt per step, each scored once by the oracle.
    CHECK(envc.calls() == uint64_t(2 * cfg.batch_prompts * cfg.steps));

    SUBCASE("dymo_weight > 0 engages the dynamics loss") {
        train::RlConfig cfg2 = cfg;
        cfg2.dymo_weight = 1.0;
        cfg2.steps = 2;
        env::LocalEnv env2(corpus, env::WorldMode::Ephemeral);
        auto r2 = train::run_rl(cfg2, start, prompts, env2);
        bool any_dymo = false;
        for (const auto& row : r2.trace) {
            if (row.dymo_loss > 0.0) any_dymo = true;
        }
        CHECK(any_dymo);
    }

    SUBCASE("identical config and seed give bit-identical RL checkpoints") {
        env::LocalEnv env_a(corpus, env::WorldMode::Ephemeral);
        env::LocalEnv env_b(corpus, env::WorldMode::Ephemeral);
        train::RlConfig cfg3 = cfg;
        cfg3.steps = 2;
        auto a = train::run_rl(cfg3, start, prompts, env_a);
        auto b = train::run_rl(cfg3, start, prompts, env_b);
        for (size_t i = 0; i < a.checkpoint.params.size(); ++i) {
            CHECK(a.checkpoint.params[i] == b.checkpoint.params[i]);
        }
    }
}

TEST_CASE("trace CSV round trip of headers") {
    CHECK(train::trace_csv_header().rfind("step,mean_reward", 0) == 0);
    train::TrainTraceRow row;
    row.step = 3;
    row.mean_reward = 0.5;
    auto csv = train::trace_row_csv(row);
    CHECK(csv.rfind("3,0.5", 0) == 0);
}
