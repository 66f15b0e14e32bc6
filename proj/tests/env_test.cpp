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

#include <cstdio>

#include "dymo/dsl.hpp"
#include "dymo/env.hpp"
#include "dymo/rng.hpp"

using namespace dymo;
using dsl::Category;

namespace {

dsl::PromptInstance humidity_instance() {
    dsl::PromptInstance inst;
    inst.id = "ast-test-0";
    inst.category = Category::Ast;
    inst.prompt_text = "what is the humidity in Miami for the next 7 days";
    inst.tools = {{"weather.humidity_forecast",
                   {{"location", dsl::ParamKind::String, true, std::nullopt},
                    {"days", dsl::ParamKind::Integer, true, std::nullopt},
                    {"min_humidity", dsl::ParamKind::Integer, false, dsl::Literal{int64_t{0}}}},
                   "humidity"},
                  {"fx.rate",
                   {{"from", dsl::ParamKind::String, true, std::nullopt},
                    {"to", dsl::ParamKind::String, true, std::nullopt}},
                   "fx"}};
    inst.key.expected_tool = "weather.humidity_forecast";
    inst.key.allowed_values["location"] = {dsl::Literal{std::string("Miami")},
                                           dsl::Literal{std::string("Miami, Florida")}};
    inst.key.allowed_values["days"] = {dsl::Literal{int64_t{7}}};
    inst.split = dsl::Split::Sft;
    return inst;
}

dsl::GeneratorConfig mixed_config(int per_category) {
    dsl::GeneratorConfig cfg;
    for (Category cat : {Category::Relevance, Category::Irrelevance, Category::Ast,
                         Category::Exec}) {
        cfg.sft_counts[cat] = per_category;
    }
    return cfg;
}

}  // namespace

TEST_CASE("reward bijection on the sentinel prefix") {
    CHECK(env::reward_of_text("<|pass|>{\"status\": 1}") == 1);
    CHECK(env::reward_of_text("<|error|>{\"status\": 0}") == 0);

    env::EnvState s = env::EnvState::from_text("<|pass|>payload");
    CHECK(s.outcome == env::Outcome::Pass);
    CHECK(s.payload == "payload");
    CHECK(env::reward_of(s) == 1);

    CHECK_THROWS_AS((void)env::EnvState::from_text("no sentinel"), std::invalid_argument);
}

TEST_CASE("execute: category semantics on the humidity example") {
    dsl::PromptInstance inst = humidity_instance();

    SUBCASE("allowed value passes") {
        env::WorldState w = env::WorldState::initial();
        auto res = env::execute(
            inst, R"({"weather.humidity_forecast": {"location": "Miami", "days": 7}})", w);
        CHECK(res.reward == 1);
        CHECK(res.state.outcome == env::Outcome::Pass);
        CHECK(res.state.text.rfind("<|pass|>", 0) == 0);
        CHECK(w.version == 0);  // stateless category leaves the world alone
    }

    SUBCASE("answer-key variant passes too") {
        env::WorldState w = env::WorldState::initial();
        auto res = env::execute(
            inst,
            R"({"weather.humidity_forecast": {"location": "Miami, Florida", "days": 7}})", w);
        CHECK(res.reward == 1);
    }

    SUBCASE("negative days is an error naming the argument") {
        env::WorldState w = env::WorldState::initial();
        auto res = env::execute(
            inst, R"({"weather.humidity_forecast": {"location": "Miami", "days": -7}})", w);
        CHECK(res.reward == 0);
        CHECK(res.state.payload.find("days") != std::string::npos);
        CHECK(res.state.payload.find("-7") != std::string::npos);
        CHECK(res.state.payload.find("bad_value") != std::string::npos);
    }

    SUBCASE("missing required parameter") {
        env::WorldState w = env::WorldState::initial();
        auto res =
            env::execute(inst, R"({"weather.humidity_forecast": {"location": "Miami"}})", w);
        CHECK(res.reward == 0);
        CHECK(res.state.payload.find("missing_param") != std::string::npos);
    }

    SUBCASE("wrong tool") {
        env::WorldState w = env::WorldState::initial();
        auto res = env::execute(inst, R"({"fx.rate": {"from": "USD", "to": "EUR"}})", w);
        CHECK(res.reward == 0);
        CHECK(res.state.payload.find("wrong_tool") != std::string::npos);
    }

    SUBCASE("unknown argument") {
        env::WorldState w = env::WorldState::initial();
        auto res = env::execute(
            inst,
            R"({"weather.humidity_forecast": {"location": "Miami", "days": 7, "extra": 1}})",
            w);
        CHECK(res.reward == 0);
        CHECK(res.state.payload.find("unknown_argument") != std::string::npos);
    }

    SUBCASE("no call where one was expected") {
        env::WorldState w = env::WorldState::initial();
        auto res = env::execute(inst, "I cannot help with that request.", w);
        CHECK(res.reward == 0);
        CHECK(res.state.payload.find("no_call") != std::string::npos);
    }

    SUBCASE("parse errors never throw") {
        env::WorldState w = env::WorldState::initial();
        auto res = env::execute(inst, "{\"broken", w);
        CHECK(res.reward == 0);
        CHECK(res.state.text.rfind("<|error|>", 0) == 0);
    }
}

TEST_CASE("irrelevance semantics") {
    dsl::PromptInstance inst = humidity_instance();
    inst.category = Category::Irrelevance;
    inst.key = dsl::AnswerKey{};

    env::WorldState w = env::WorldState::initial();
    auto pass = env::execute(inst, "no available tool can handle this request.", w);
    CHECK(pass.reward == 1);

    auto fail = env::execute(inst, R"({"fx.rate": {"from": "USD", "to": "EUR"}})", w);
    CHECK(fail.reward == 0);
    CHECK(fail.state.payload.find("unexpected_call") != std::string::npos);
}

TEST_CASE("prefix totality and reward bijection on randomized executions") {
    auto corpus = dsl::generate_corpus(mixed_config(12), 41);
    Rng rng(7);
    int checked = 0;
    for (const auto& inst : corpus) {
        for (int v = 0; v < 4; ++v) {
            std::string completion;
            switch (rng.below(4)) {
                case 0: completion = dsl::render_gold_completion(inst, rng.next_u64()); break;
                case 1: completion = dsl::render_corrupted_completion(inst, rng.next_u64()); break;
                case 2: completion = "random text with no call"; break;
                default: completion = "{\"maybe\": broken " + std::to_string(v); break;
            }
            env::WorldState w = env::WorldState::initial();
            auto res = env::execute(inst, completion, w);
            bool pass_prefix = res.state.text.rfind("<|pass|>", 0) == 0;
            bool error_prefix = res.state.text.rfind("<|error|>", 0) == 0;
            CHECK(pass_prefix != error_prefix);
            CHECK(res.reward == (pass_prefix ? 1 : 0));
            ++checked;
        }
    }
    CHECK(checked >= 100);
}

TEST_CASE("statefulness: exec execution is not idempotent") {
    dsl::GeneratorConfig cfg;
    cfg.sft_counts = {{Category::Exec, 20}};
    auto corpus = dsl::generate_corpus(cfg, 3);

    bool saw_transfer = false;
    for (const auto& inst : corpus) {
        if (*inst.key.expected_tool != "bank.transfer") continue;
        saw_transfer = true;
        std::string gold = dsl::render_gold_completion(inst, 9);
        env::WorldState w = env::WorldState::initial();

        auto first = env::execute(inst, gold, w);
        CHECK(first.reward == 1);
        CHECK(first.version_after == first.version_before + 1);

        auto second = env::execute(inst, gold, w);
        CHECK(second.reward == 0);
        CHECK(second.state.text != first.state.text);
        CHECK(second.version_after == second.version_before + 1);
        CHECK(second.state.payload.find("state_mismatch") != std::string::npos);
    }
    CHECK(saw_transfer);
}

TEST_CASE("build_sp_dataset: dedup, balance, determinism") {
    std::vector<env::RunLogRecord> logs;
    auto add = [&](const std::string& id, const std::string& y, int reward, uint64_t ts) {
        env::RunLogRecord r;
        r.prompt_id = id;
        r.prompt_text = "x " + id;
        r.completion_text = y;
        r.state_text = reward ? "<|pass|>ok" : "<|error|>bad";
        r.reward = reward;
        r.timestamp = ts;
        logs.push_back(r);
    };

    for (int i = 0; i < 60; ++i) add("p" + std::to_string(i), "y" + std::to_string(i), 1, uint64_t(i));
    for (int i = 60; i < 100; ++i) add("p" + std::to_string(i), "y" + std::to_string(i), 0, uint64_t(i));

    SUBCASE("1:1 balance keeps 40/40") {
        auto ds = env::build_sp_dataset(logs, 1.0);
        CHECK(ds.size() == 80);
        int pass = 0;
        for (const auto& t : ds) pass += env::reward_of_text(t.state);
        CHECK(pass == 40);
    }

    SUBCASE("no balance keeps all 100") {
        auto ds = env::build_sp_dataset(logs, std::nullopt);
        CHECK(ds.size() == 100);
    }

    SUBCASE("later duplicate wins") {
        add("p0", "y0", 0, 1000);  // contradicts the first record for (p0, y0)
        auto ds = env::build_sp_dataset(logs, std::nullopt);
        int found = 0;
        for (const auto& t : ds) {
            if (t.prompt_id == "p0" && t.completion == "y0") {
                ++found;
                CHECK(env::reward_of_text(t.state) == 0);
            }
        }
        CHECK(found == 1);
    }

    SUBCASE("deterministic output order") {
        auto a = env::build_sp_dataset(logs, 1.0);
        auto b = env::build_sp_dataset(logs, 1.0);
        REQUIRE(a.size() == b.size());
        for (size_t i = 0; i < a.size(); ++i) CHECK(a[i].to_json() == b[i].to_json());
    }

    SUBCASE("empty input is an error") {
        CHECK_THROWS_AS((void)env::build_sp_dataset({}, std::nullopt), std::invalid_argument);
    }
}

TEST_CASE("log fidelity: replaying completions reproduces rewards") {
    auto corpus = dsl::generate_corpus(mixed_config(6), 21);
    env::LocalEnv live(corpus, env::WorldMode::Persistent);

    std::vector<env::RunLogRecord> log;
    Rng rng(5);
    for (const auto& inst : corpus) {
        std::string y = rng.chance(0.5) ? dsl::render_gold_completion(inst, 2)
                                        : dsl::render_corrupted_completion(inst, 2);
        auto res = live.execute_record(inst, y);
        env::RunLogRecord rec;
        rec.prompt_id = inst.id;
        rec.completion_text = y;
        rec.state_text = res.state.text;
        rec.reward = res.reward;
        log.push_back(rec);
    }

    env::LocalEnv replay(corpus, env::WorldMode::Persistent);
    for (const auto& rec : log) {
        auto res = replay.execute(rec.prompt_id, rec.completion_text);
        CHECK(res.reward == env::reward_of_text(rec.state_text));
        CHECK(res.state == rec.state_text);
    }
}

TEST_CASE("run log JSONL and world snapshots round-trip") {
    std::string log_path = "env_test_runlog.jsonl";
    std::remove(log_path.c_str());
    {
        env::RunLogWriter w(log_path);
        env::RunLogRecord r;
        r.prompt_id = "p1";
        r.prompt_text = "tools: fx.rate | what is the exchange rate from USD to EUR";
        r.completion_text = R"({"fx.rate": {"from": "USD", "to": "EUR"}})";
        r.state_text = "<|pass|>{\"status\": 1}";
        r.reward = 1;
        r.world_version_before = 3;
        r.world_version_after = 3;
        r.timestamp = w.next_timestamp();
        r.seed = 42;
        w.append(r);
        r.prompt_id = "p2";
        r.timestamp = w.next_timestamp();
        w.append(r);
    }
    auto loaded = env::load_run_log(log_path);
    REQUIRE(loaded.size() == 2);
    CHECK(loaded[0].prompt_id == "p1");
    CHECK(loaded[1].prompt_id == "p2");
    CHECK(loaded[0].timestamp == 0);
    CHECK(loaded[1].timestamp == 1);
    std::remove(log_path.c_str());

    env::WorldState w = env::WorldState::initial();
    w.store["bank.checking"] = int64_t{123};
    w.version = 9;
    env::save_world("env_test_world.json", w);
    env::WorldState back = env::load_world("env_test_world.json");
    CHECK(back.version == 9);
    CHECK(std::get<int64_t>(back.store.at("bank.checking")) == 123);
    std::remove("env_test_world.json");
}

TEST_CASE("LocalEnv world modes") {
    dsl::GeneratorConfig cfg;
    cfg.sft_counts = {{Category::Exec, 10}};
    auto corpus = dsl::generate_corpus(cfg, 8);
    const auto& inst = corpus.front();
    std::string gold = dsl::render_gold_completion(inst, 1);

    SUBCASE("ephemeral mode scores every request against a fresh world") {
        env::LocalEnv e(corpus, env::WorldMode::Ephemeral);
        CHECK(e.execute(inst.id, gold).reward == 1);
        CHECK(e.execute(inst.id, gold).reward == 1);
        CHECK(e.calls() == 2);
    }

    SUBCASE("persistent mode accumulates mutations") {
        env::LocalEnv e(corpus, env::WorldMode::Persistent);
        auto r1 = e.execute(inst.id, gold);
        auto r2 = e.execute(inst.id, gold);
        CHECK(r1.reward == 1);
        CHECK(r1.state != r2.state);
    }

    SUBCASE("unknown prompt id throws") {
        env::LocalEnv e(corpus, env::WorldMode::Ephemeral);
        CHECK_THROWS_AS((void)e.execute("nope", gold), std::invalid_argument);
    }
}
