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
// The dymo command line: gen, serve, sft, rl, svs-eval, report. One config
// file drives every stage; --set overrides individual keys. Each stage
// writes its outputs plus a manifest with input/output hashes, and later
// stages verify the hashes of what they consume.

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <thread>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "dymo/config.hpp"
#include "dymo/dsl.hpp"
#include "dymo/env.hpp"
#include "dymo/env_server.hpp"
#include "dymo/evalkit.hpp"
#include "dymo/manifest.hpp"
#include "dymo/model.hpp"
#include "dymo/pipeline.hpp"
#include "dymo/rng.hpp"
#include "dymo/svs.hpp"
#include "dymo/train.hpp"
#include "dymo/util.hpp"

namespace fs = std::filesystem;
using namespace dymo;
using nlohmann::json;

namespace {

std::atomic<bool> g_interrupted{false};

void handle_signal(int) { g_interrupted.store(true); }

struct StageIo {
    Config cfg;
    fs::path out;
    uint64_t seed = 0;
    RunManifest manifest;

    fs::path path(const std::string& name) const { return out / name; }

    void note_input(const fs::path& p) {
        manifest.input_hashes[p.string()] = sha256_file_hex(p.string());
    }
    void note_output(const fs::path& p) {
        manifest.outputs.push_back(p.string());
        manifest.output_hashes[p.string()] = sha256_file_hex(p.string());
    }
    void finish(const std::string& command) {
        manifest.command = command;
        manifest.run_id = command + "-" + hex_u64(split_mix(seed ^ fnv1a(command)));
        manifest.config_snapshot = cfg.snapshot();
        manifest.seed = seed;
        manifest.code_version = code_version_string();
        char buf[64];
        std::time_t now = std::time(nullptr);
        std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
        manifest.created_at = buf;
        manifest.save((out / ("manifest_" + command + ".json")).string());
    }
};

// Consumed artifacts must hash-match what the producing stage recorded.
void verify_against_manifest(const StageIo& io, const std::string& producer,
                             const std::vector<fs::path>& artifacts) {
    fs::path mpath = io.out / ("manifest_" + producer + ".json");
    if (!fs::exists(mpath)) return;  // producing stage ran out-of-band; nothing to verify
    RunManifest m = RunManifest::load(mpath.string());
    for (const auto& artifact : artifacts) {
        auto it = m.output_hashes.find(artifact.string());
        if (it == m.output_hashes.end()) continue;
        std::string diff = check_artifact_hash(artifact.string(), it->second);
        if (!diff.empty()) {
            throw std::runtime_error("upstream artifact changed since " + producer +
                                     " ran:\n" + diff);
        }
    }
}

void require_exists(const fs::path& p, const std::string& hint) {
    if (!fs::exists(p)) {
        throw std::runtime_error("missing artifact " + p.string() + " (run `dymo " + hint +
                                 "` first)");
    }
}

model::Checkpoint load_start_checkpoint(const StageIo& io, const model::Vocabulary& vocab,
                                        const std::string& key, const std::string& fallback) {
    std::string name = io.cfg.get_str_or(key, fallback);
    fs::path p = name.find('/') != std::string::npos ? fs::path(name) : io.path(name);
    require_exists(p, "sft");
    return model::load_checkpoint(p.string(), vocab.hash());
}

unsigned threads_from(const Config& cfg) {
    return unsigned(cfg.get_int_or("run.threads", 0));
}

// ---------------------------------------------------------------------------
// gen
// ---------------------------------------------------------------------------

int cmd_gen(StageIo io) {
    dsl::GeneratorConfig gcfg = pipeline::generator_from_config(io.cfg);
    auto corpus = dsl::generate_corpus(gcfg, io.seed);

    // Closed-loop check: every gold completion must score pass.
    for (const auto& inst : corpus) {
        env::WorldState w = env::WorldState::initial();
        auto res = env::execute(inst, dsl::render_gold_completion(inst, io.seed), w);
        if (res.reward != 1) {
            throw std::runtime_error("gold completion failed the environment for " + inst.id +
                                     ": " + res.state.text);
        }
    }

    fs::path corpus_path = io.path("corpus.jsonl");
    dsl::save_corpus(corpus_path.string(), corpus);
    io.note_output(corpus_path);

    int corruptions = int(io.cfg.get_int_or("gen.sp.corruptions", 2));
    auto logs = pipeline::synthesize_run_logs(corpus, dsl::Split::Sft, corruptions, io.seed);
    fs::path log_path = io.path("run_log.jsonl");
    {
        std::string text;
        for (const auto& rec : logs) text += rec.to_json() + "\n";
        write_file(log_path.string(), text);
    }
    io.note_output(log_path);

    std::optional<double> balance;
    std::string balance_str = io.cfg.get_str_or("gen.sp.balance", "none");
    if (balance_str != "none") balance = std::stod(balance_str);
    auto sp = env::build_sp_dataset(logs, balance);
    fs::path sp_path = io.path("sp.jsonl");
    env::save_sp_dataset(sp_path.string(), sp);
    io.note_output(sp_path);

    io.finish("gen");
    std::printf("gen: %zu instances, %zu run-log records, %zu sp triplets -> %s\n",
                corpus.size(), logs.size(), sp.size(), io.out.string().c_str());
    return 0;
}

// ---------------------------------------------------------------------------
// serve
// ---------------------------------------------------------------------------

int cmd_serve(StageIo io) {
    fs::path corpus_path = io.path("corpus.jsonl");
    require_exists(corpus_path, "gen");
    verify_against_manifest(io, "gen", {corpus_path});
    auto corpus = dsl::load_corpus(corpus_path.string());

    env::EnvServer::Options opt;
    std::string bind = io.cfg.get_str_or("serve.bind", "127.0.0.1:8642");
    auto colon = bind.rfind(':');
    if (colon == std::string::npos) throw ConfigError("serve.bind must be host:port");
    opt.bind_host = bind.substr(0, colon);
    opt.port = std::stoi(bind.substr(colon + 1));
    std::string mode = io.cfg.get_str_or("serve.world_mode", "persistent");
    opt.world_mode =
        mode == "ephemeral" ? env::WorldMode::Ephemeral : env::WorldMode::Persistent;
    opt.run_log_path = io.path(io.cfg.get_str_or("serve.log", "serve_run_log.jsonl")).string();
    opt.world_snapshot = io.path(io.cfg.get_str_or("serve.snapshot", "world.json")).string();
    opt.log_seed = io.seed;

    env::EnvServer server(std::move(corpus), opt);
    server.start();
    std::printf("serving on %s:%d (world_mode=%s); Ctrl-C stops and flushes\n",
                opt.bind_host.c_str(), server.port(), mode.c_str());
    std::fflush(stdout);

    std::signal(SIGINT, handle_signal);
    std::signal(SIGTERM, handle_signal);
    while (!g_interrupted.load()) {
        std::this_thread::sleep_for(std::chrono::milliseconds(100));
    }
    server.stop();
    std::printf("served %llu requests\n",
                static_cast<unsigned long long>(server.requests_served()));
    return 0;
}

// ---------------------------------------------------------------------------
// sft
// ---------------------------------------------------------------------------

int cmd_sft(StageIo io) {
    fs::path corpus_path = io.path("corpus.jsonl");
    fs::path sp_path = io.path("sp.jsonl");
    require_exists(corpus_path, "gen");
    verify_against_manifest(io, "gen", {corpus_path, sp_path});
    io.note_input(corpus_path);

    auto corpus = dsl::load_corpus(corpus_path.string());
    const model::Vocabulary vocab = model::Vocabulary::dsl_default();
    model::Arch arch = pipeline::arch_from_config(io.cfg, vocab.size());

    train::SftConfig cfg;
    std::string mix = io.cfg.get_str_or("sft.mix", "fc_plus_sp");
    if (mix == "fc_only") cfg.mix = train::SftMix::FcOnly;
    else if (mix == "fc_plus_sp") cfg.mix = train::SftMix::FcPlusSp;
    else throw ConfigError("sft.mix must be fc_only or fc_plus_sp");
    cfg.batch_size = int(io.cfg.get_int_or("sft.batch_size", 8));
    cfg.steps = int(io.cfg.get_int_or("sft.steps", 2000));
    cfg.learning_rate = io.cfg.get_double_or("sft.learning_rate", 3e-4);
    cfg.seed = io.seed;
    cfg.threads = threads_from(io.cfg);

    auto fc = pipeline::make_fc_pairs(vocab, corpus, io.seed, arch.ctx_len);
    std::vector<train::SpExample> sp;
    if (cfg.mix == train::SftMix::FcPlusSp) {
        require_exists(sp_path, "gen");
        io.note_input(sp_path);
        sp = pipeline::make_sp_examples(vocab, corpus,
                                        env::load_sp_dataset(sp_path.string()), arch.ctx_len);
    }

    model::Checkpoint start =
        model::Checkpoint::init_scaled_normal(arch, vocab.hash(), derive_seed(io.seed, 1));
    auto result = train::run_sft(cfg, start, fc, sp);

    std::string name = io.cfg.get_str_or("sft.name", "sft_" + mix);
    fs::path ckpt_path = io.path(name + ".bin");
    model::save_checkpoint(ckpt_path.string(), result.checkpoint);
    io.note_output(ckpt_path);

    fs::path trace_path = io.path(name + "_trace.csv");
    {
        std::string csv = "step,loss\n";
        for (size_t i = 0; i < result.loss_trace.size(); ++i) {
            csv += std::to_string(i + 1) + "," + fmt_double(result.loss_trace[i]) + "\n";
        }
        write_file(trace_path.string(), csv);
    }
    io.note_output(trace_path);

    io.finish(name);
    std::printf("sft: %d steps on %zu fc pairs + %zu sp examples -> %s\n", cfg.steps, fc.size(),
                sp.size(), ckpt_path.string().c_str());
    return 0;
}

// ---------------------------------------------------------------------------
// rl
// ---------------------------------------------------------------------------

int cmd_rl(StageIo io) {
    fs::path corpus_path = io.path("corpus.jsonl");
    require_exists(corpus_path, "gen");
    verify_against_manifest(io, "gen", {corpus_path});
    io.note_input(corpus_path);

    auto corpus = dsl::load_corpus(corpus_path.string());
    const model::Vocabulary vocab = model::Vocabulary::dsl_default();

    model::Checkpoint start =
        load_start_checkpoint(io, vocab, "rl.start", "sft_fc_plus_sp.bin");

    train::RlConfig cfg;
    cfg.beta = io.cfg.get_double_or("rl.beta", 0.05);
    cfg.dymo_weight = io.cfg.get_double_or("rl.dymo_weight", 1.0);
    cfg.steps = int(io.cfg.get_int_or("rl.steps", 300));
    cfg.batch_prompts = int(io.cfg.get_int_or("rl.batch_prompts", 8));
    cfg.temperature = io.cfg.get_double_or("rl.temperature", 0.8);
    cfg.learning_rate = io.cfg.get_double_or("rl.learning_rate", 3e-4);
    cfg.max_completion_len = int(io.cfg.get_int_or("rl.max_completion_len", 56));
    cfg.max_state_len = int(io.cfg.get_int_or("rl.max_state_len", 72));
    cfg.seed = io.seed;
    cfg.threads = threads_from(io.cfg);

    auto prompts = pipeline::make_rl_prompts(vocab, corpus, dsl::Split::RlTrain);

    std::unique_ptr<env::EnvClient> client;
    std::string endpoint = io.cfg.get_str_or("rl.env", "inproc");
    if (endpoint == "inproc") {
        std::string mode = io.cfg.get_str_or("rl.world_mode", "ephemeral");
        client = std::make_unique<env::LocalEnv>(corpus, mode == "persistent"
                                                             ? env::WorldMode::Persistent
                                                             : env::WorldMode::Ephemeral);
    } else {
        auto colon = endpoint.rfind(':');
        if (colon == std::string::npos) throw ConfigError("rl.env must be inproc or host:port");
        client = std::make_unique<env::RemoteEnv>(endpoint.substr(0, colon),
                                                  std::stoi(endpoint.substr(colon + 1)));
    }

    std::string name = io.cfg.get_str_or("rl.name", "rl");
    fs::path trace_path = io.path(name + "_trace.csv");
    std::string trace_csv = train::trace_csv_header() + "\n";

    auto result = train::run_rl(cfg, start, prompts, *client,
                                [&](const train::TrainTraceRow& row) {
                                    trace_csv += train::trace_row_csv(row) + "\n";
                                });

    fs::path ckpt_path = io.path(name + ".bin");
    model::save_checkpoint(ckpt_path.string(), result.checkpoint);
    write_file(trace_path.string(), trace_csv);
    io.note_output(ckpt_path);
    io.note_output(trace_path);

    io.finish(name);
    double final_reward = result.trace.empty() ? 0.0 : result.trace.back().mean_reward;
    std::printf("rl: %d steps, final mean reward %.3f -> %s\n", cfg.steps, final_reward,
                ckpt_path.string().c_str());
    return 0;
}

// ---------------------------------------------------------------------------
// svs-eval
// ---------------------------------------------------------------------------

int cmd_svs_eval(StageIo io) {
    fs::path corpus_path = io.path("corpus.jsonl");
    require_exists(corpus_path, "gen");
    verify_against_manifest(io, "gen", {corpus_path});
    io.note_input(corpus_path);

    auto corpus = dsl::load_corpus(corpus_path.string());
    const model::Vocabulary vocab = model::Vocabulary::dsl_default();

    std::string ckpt_name = io.cfg.get_str("eval.checkpoint");
    fs::path ckpt_path =
        ckpt_name.find('/') != std::string::npos ? fs::path(ckpt_name) : io.path(ckpt_name);
    require_exists(ckpt_path, "sft / rl");
    io.note_input(ckpt_path);
    model::Checkpoint ckpt = model::load_checkpoint(ckpt_path.string(), vocab.hash());

    auto val = pipeline::filter_split(corpus, dsl::Split::RlVal);
    if (val.empty()) throw std::runtime_error("corpus has no rl_val instances to evaluate");
    env::LocalEnv oracle(corpus, env::WorldMode::Ephemeral);

    const unsigned threads = threads_from(io.cfg);
    const double temperature = io.cfg.get_double_or("eval.temperature", 0.8);
    const int max_y = int(io.cfg.get_int_or("eval.max_completion_len", 56));
    const int max_z = int(io.cfg.get_int_or("eval.max_state_len", 72));
    const std::vector<int> k_values = io.cfg.get_int_list_or("eval.k_values", {1, 2, 4, 8, 16});
    std::string name = io.cfg.get_str_or("eval.name", "eval");
    fs::path eval_dir = io.path("eval_" + name);
    fs::create_directories(eval_dir);

    // Greedy category report.
    std::map<dsl::Category, evalkit::CategoryResult> by_cat;
    double greedy = evalkit::greedy_pass_rate(ckpt, vocab, val, oracle, max_y, threads, &by_cat);
    std::vector<evalkit::CategoryResult> cat_rows;
    for (const auto& [cat, row] : by_cat) cat_rows.push_back(row);
    auto report = evalkit::category_report(cat_rows);
    fs::path cat_path = eval_dir / "category_report.json";
    write_file(cat_path.string(), evalkit::category_report_json(report) + "\n");
    io.note_output(cat_path);

    // Verifier confusion with bootstrap intervals.
    auto pairs = pipeline::make_labeled_pairs(corpus, dsl::Split::RlVal,
                                              int(io.cfg.get_int_or("eval.corruptions", 2)),
                                              io.seed);
    auto counts = evalkit::verifier_confusion(ckpt, vocab, pairs, threads);
    auto metrics = evalkit::confusion_metrics(
        counts, int(io.cfg.get_int_or("eval.bootstrap_reps", 10000)), io.seed);
    {
        auto cell = [](const evalkit::MetricWithCi& m) {
            json j;
            j["value"] = m.value ? json(*m.value) : json(nullptr);
            if (m.ci_lo) j["ci95"] = {*m.ci_lo, *m.ci_hi};
            return j;
        };
        json j = {{"tp", counts.tp},
                  {"fp", counts.fp},
                  {"fn", counts.fn},
                  {"tn", counts.tn},
                  {"precision", cell(metrics.precision)},
                  {"recall", cell(metrics.recall)},
                  {"f1", cell(metrics.f1)},
                  {"accuracy", cell(metrics.accuracy)},
                  {"greedy_pass_rate", greedy}};
        fs::path p = eval_dir / "verifier_confusion.json";
        write_file(p.string(), j.dump(2) + "\n");
        io.note_output(p);
    }

    // pass@k / pass^k curves from one shared trial matrix.
    int n_trials = int(io.cfg.get_int_or("eval.n_samples", 64));
    auto trials = evalkit::collect_trials(ckpt, vocab, val, oracle, n_trials, temperature,
                                          max_y, derive_seed(io.seed, 21), threads);
    {
        std::vector<int> curve_ks;
        for (int k : k_values) {
            if (k <= n_trials) curve_ks.push_back(k);
        }
        auto at_k = evalkit::mean_pass_at_k(trials, curve_ks);
        auto hat_k = evalkit::mean_pass_hat_k(trials, curve_ks);
        std::string csv = "k,pass_at_k,pass_hat_k\n";
        for (size_t i = 0; i < curve_ks.size(); ++i) {
            csv += std::to_string(curve_ks[i]) + "," + fmt_double(at_k[i]) + "," +
                   fmt_double(hat_k[i]) + "\n";
        }
        fs::path p = eval_dir / "pass_curves.csv";
        write_file(p.string(), csv);
        io.note_output(p);
    }

    // SVS scaling table at a fixed k*c budget.
    int budget = int(io.cfg.get_int_or("eval.svs_budget", 16));
    std::vector<std::pair<int, int>> k_and_c;
    for (int k = 1; k <= budget; k *= 2) k_and_c.emplace_back(k, budget / k);
    auto svs_rows =
        evalkit::svs_scaling_table(ckpt, vocab, val, oracle, k_and_c, temperature, max_y, max_z,
                                   derive_seed(io.seed, 22), threads);
    fs::path svs_path = eval_dir / "svs_scaling.csv";
    write_file(svs_path.string(), evalkit::svs_scaling_csv(svs_rows));
    io.note_output(svs_path);

    // Refusal sweep with decision logs.
    double tau = io.cfg.get_double_or("svs.tau", 0.92);
    fs::path decisions_path = eval_dir / "decisions.jsonl";
    auto sweep = evalkit::precision_refuse_sweep(ckpt, vocab, val, oracle, k_values, tau,
                                                 temperature, max_y, max_z,
                                                 derive_seed(io.seed, 23), threads,
                                                 decisions_path.string());
    fs::path sweep_path = eval_dir / "refusal_sweep.csv";
    write_file(sweep_path.string(), evalkit::refuse_sweep_csv(sweep));
    io.note_output(sweep_path);
    io.note_output(decisions_path);

    io.finish("eval_" + name);
    std::printf("svs-eval %s: greedy pass %.3f, verifier acc %s -> %s\n", name.c_str(), greedy,
                metrics.accuracy.value ? fmt_double(*metrics.accuracy.value).c_str() : "n/a",
                eval_dir.string().c_str());
    return 0;
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

int cmd_report(StageIo io) {
    std::string evals = io.cfg.get_str("report.evals");  // comma list of eval names
    std::vector<pipeline::VariantSummary> variants;
    std::map<std::string, std::vector<double>> at_k, hat_k;
    std::vector<int> k_values = io.cfg.get_int_list_or("eval.k_values", {1, 2, 4, 8, 16});
    std::vector<evalkit::SvsScalingRow> svs_rows;
    std::vector<evalkit::RefuseSweepPoint> refusals;

    size_t start = 0;
    while (start < evals.size()) {
        size_t comma = evals.find(',', start);
        std::string name = evals.substr(
            start, comma == std::string::npos ? std::string::npos : comma - start);
        start = comma == std::string::npos ? evals.size() : comma + 1;
        while (!name.empty() && name.front() == ' ') name.erase(name.begin());
        while (!name.empty() && name.back() == ' ') name.pop_back();
        if (name.empty()) continue;

        fs::path dir = io.path("eval_" + name);
        require_exists(dir / "category_report.json", "svs-eval");
        io.note_input(dir / "category_report.json");

        pipeline::VariantSummary v;
        v.name = name;
        json cat = json::parse(read_file((dir / "category_report.json").string()));
        for (const auto& [cname, row] : cat.at("per_category").items()) {
            evalkit::CategoryResult r;
            r.category = dsl::category_from_name(cname);
            r.successes = row.at("successes").get<int64_t>();
            r.count = row.at("count").get<int64_t>();
            v.categories.per_category.push_back(r);
        }
        v.categories.overall_unweighted = cat.at("overall_unweighted").get<double>();
        v.categories.overall_weighted = cat.at("overall_weighted").get<double>();
        variants.push_back(v);

        // pass curves
        fs::path curves = dir / "pass_curves.csv";
        if (fs::exists(curves)) {
            auto lines = read_lines(curves.string());
            std::vector<double> at, hat;
            for (size_t i = 1; i < lines.size(); ++i) {
                double a = 0, h = 0;
                int k = 0;
                if (std::sscanf(lines[i].c_str(), "%d,%lf,%lf", &k, &a, &h) == 3) {
                    at.push_back(a);
                    hat.push_back(h);
                }
            }
            at_k[name] = at;
            hat_k[name] = hat;
        }

        // the last listed eval contributes the SVS + refusal sections
        fs::path svs_csv = dir / "svs_scaling.csv";
        if (fs::exists(svs_csv)) {
            svs_rows.clear();
            auto lines = read_lines(svs_csv.string());
            for (size_t i = 1; i < lines.size(); ++i) {
                evalkit::SvsScalingRow r;
                long cand = 0;
                if (std::sscanf(lines[i].c_str(), "%d,%d,%lf,%lf,%ld", &r.k, &r.c,
                                &r.pass_hat_k_with_svs, &r.pass_hat_k_without_svs, &cand) >= 4) {
                    r.candidates_generated = cand;
                    svs_rows.push_back(r);
                }
            }
        }
        fs::path sweep_csv = dir / "refusal_sweep.csv";
        if (fs::exists(sweep_csv)) {
            refusals.clear();
            auto lines = read_lines(sweep_csv.string());
            for (size_t i = 1; i < lines.size(); ++i) {
                evalkit::RefuseSweepPoint p;
                double prec = 0;
                long total = 0, refused = 0;
                int got = std::sscanf(lines[i].c_str(), "%d,%lf,%lf,%lf,%ld,%ld", &p.k, &p.tau,
                                      &prec, &p.refuse_rate, &total, &refused);
                if (got == 6) {
                    p.precision = prec;
                    p.total = total;
                    p.refused = refused;
                    refusals.push_back(p);
                } else {
                    // precision column may read "undefined"
                    char word[32];
                    if (std::sscanf(lines[i].c_str(), "%d,%lf,%31[^,],%lf,%ld,%ld", &p.k, &p.tau,
                                    word, &p.refuse_rate, &total, &refused) == 6) {
                        p.total = total;
                        p.refused = refused;
                        refusals.push_back(p);
                    }
                }
            }
        }
    }

    std::string md = pipeline::render_markdown_report(variants, svs_rows, refusals, k_values,
                                                      at_k, hat_k);
    fs::path md_path = io.path("report.md");
    write_file(md_path.string(), md);
    io.note_output(md_path);

    io.finish("report");
    std::printf("report: %zu variants -> %s\n", variants.size(), md_path.string().c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"dymolab: function-calling lab with dynamics modelling and "
                 "self-verification sampling"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir = "out";
    int64_t seed_override = -1;
    std::vector<std::string> overrides;

    app.add_option("--config", config_path, "key = value config file")->required();
    app.add_option("--out", out_dir, "artifact directory");
    app.add_option("--seed", seed_override, "override the stage seed");
    app.add_option("--set", overrides, "extra key=value overrides")->take_all();

    auto* gen = app.add_subcommand("gen", "generate corpus, run logs and the sp dataset");
    auto* serve = app.add_subcommand("serve", "serve the environment over TCP");
    auto* sft = app.add_subcommand("sft", "supervised fine-tuning");
    auto* rl = app.add_subcommand("rl", "online two-sample RLOO with the dynamics loss");
    auto* svs_eval = app.add_subcommand("svs-eval", "evaluate a checkpoint with and without SVS");
    auto* report = app.add_subcommand("report", "render markdown + CSV reports");
    for (auto* sub : {gen, serve, sft, rl, svs_eval, report}) sub->fallthrough();

    CLI11_PARSE(app, argc, argv);

    try {
        StageIo io;
        io.cfg = Config::parse_file(config_path);
        for (const auto& kv : overrides) {
            auto eq = kv.find('=');
            if (eq == std::string::npos) throw ConfigError("--set expects key=value: " + kv);
            io.cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
        }
        io.out = out_dir;
        fs::create_directories(io.out);

        auto stage_seed = [&](const std::string& key) -> uint64_t {
            if (seed_override >= 0) return uint64_t(seed_override);
            return uint64_t(io.cfg.get_int_or(key, 0));
        };

        if (gen->parsed()) {
            io.seed = stage_seed("gen.seed");
            return cmd_gen(std::move(io));
        }
        if (serve->parsed()) {
            io.seed = stage_seed("serve.seed");
            return cmd_serve(std::move(io));
        }
        if (sft->parsed()) {
            io.seed = stage_seed("sft.seed");
            return cmd_sft(std::move(io));
        }
        if (rl->parsed()) {
            io.seed = stage_seed("rl.seed");
            return cmd_rl(std::move(io));
        }
        if (svs_eval->parsed()) {
            io.seed = stage_seed("eval.seed");
            return cmd_svs_eval(std::move(io));
        }
        if (report->parsed()) {
            io.seed = stage_seed("report.seed");
            return cmd_report(std::move(io));
        }
        return 2;
    } catch (const std::exception& e) {
        json err = {{"error", "stage_failed"}, {"detail", e.what()}};
        std::fprintf(stderr, "%s\n", err.dump().c_str());
        return 1;
    }
}
