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

#include "dymo/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <stdexcept>

#include "dymo/rng.hpp"
#include "dymo/util.hpp"

namespace dymo::pipeline {

model::Arch arch_from_config(const Config& cfg, int vocab_size) {
    model::Arch a;
    a.vocab_size = vocab_size;
    a.d_model = int(cfg.get_int_or("model.d_model", 64));
    a.n_heads = int(cfg.get_int_or("model.n_heads", 4));
    a.d_ff = int(cfg.get_int_or("model.d_ff", 256));
    a.n_layers = int(cfg.get_int_or("model.n_layers", 1));
    a.ctx_len = int(cfg.get_int_or("model.ctx_len", 256));
    if (a.d_model % a.n_heads != 0) {
        throw ConfigError("model.d_model must be divisible by model.n_heads");
    }
    return a;
}

dsl::GeneratorConfig generator_from_config(const Config& cfg) {
    dsl::GeneratorConfig g;
    const std::vector<std::pair<dsl::Category, std::string>> cats = {
        {dsl::Category::Relevance, "relevance"},
        {dsl::Category::Irrelevance, "irrelevance"},
        {dsl::Category::Ast, "ast"},
        {dsl::Category::Exec, "exec"},
    };
    for (const auto& [cat, name] : cats) {
        int sft = int(cfg.get_int_or("gen.sft." + name, 0));
        int rl = int(cfg.get_int_or("gen.rl." + name, 0));
        if (sft > 0) g.sft_counts[cat] = sft;
        if (rl > 0) g.rl_counts[cat] = rl;
    }
    g.rl_val_fraction = cfg.get_double_or("gen.rl_val_fraction", 0.2);
    g.min_rl_val = int(cfg.get_int_or("gen.min_rl_val", 20));
    if (g.sft_counts.empty() && g.rl_counts.empty()) {
        throw ConfigError("generator config names no counts: set gen.sft.<category> / "
                          "gen.rl.<category> (categories: relevance, irrelevance, ast, exec)");
    }
    return g;
}

std::vector<env::RunLogRecord> synthesize_run_logs(
    const std::vector<dsl::PromptInstance>& corpus, dsl::Split split,
    int corruptions_per_instance, uint64_t seed) {
    std::vector<env::RunLogRecord> logs;
    uint64_t timestamp = 0;
    for (const auto& inst : corpus) {
        if (inst.split != split) continue;
        std::vector<std::string> completions;
        completions.push_back(dsl::render_gold_completion(inst, derive_seed(seed, 1)));
        for (int c = 0; c < corruptions_per_instance; ++c) {
            completions.push_back(
                dsl::render_corrupted_completion(inst, derive_seed(seed, 2, uint64_t(c))));
        }
        for (const auto& y : completions) {
            env::WorldState world = env::WorldState::initial();
            env::ExecResult res = env::execute(inst, y, world);
            env::RunLogRecord rec;
            rec.prompt_id = inst.id;
            rec.prompt_text = dsl::render_model_prompt(inst);
            rec.completion_text = y;
            rec.state_text = res.state.text;
            rec.reward = res.reward;
            rec.world_version_before = res.version_before;
            rec.world_version_after = res.version_after;
            rec.timestamp = timestamp++;
            rec.seed = seed;
            logs.push_back(std::move(rec));
        }
    }
    return logs;
}

std::vector<train::FcPair> make_fc_pairs(const model::Vocabulary& vocab,
                                         const std::vector<dsl::PromptInstance>& corpus,
                                         uint64_t seed, int ctx_len) {
    std::vector<train::FcPair> out;
    for (const auto& inst : corpus) {
        if (inst.split != dsl::Split::Sft) continue;
        train::FcPair pair;
        pair.context = model::pack_prompt_context(vocab, dsl::render_model_prompt(inst));
        pair.target = model::completion_target(
            vocab, dsl::render_gold_completion(inst, derive_seed(seed, fnv1a(inst.id))));
        if (pair.context.size() + pair.target.size() > size_t(ctx_len)) continue;
        out.push_back(std::move(pair));
    }
    return out;
}

std::vector<train::SpExample> make_sp_examples(const model::Vocabulary& vocab,
                                               const std::vector<dsl::PromptInstance>& corpus,
                                               const std::vector<env::SpTriplet>& triplets,
                                               int ctx_len) {
    std::map<std::string, const dsl::PromptInstance*> by_id;
    for (const auto& inst : corpus) by_id[inst.id] = &inst;

    std::vector<train::SpExample> out;
    for (const auto& t : triplets) {
        auto it = by_id.find(t.prompt_id);
        if (it == by_id.end()) {
            throw std::invalid_argument("sp triplet references unknown prompt: " + t.prompt_id);
        }
        train::SpExample e;
        e.context = model::pack_state_context(
            vocab, dsl::render_model_prompt(*it->second), t.completion);
        e.target = model::state_target(vocab, t.state);
        if (e.context.size() + e.target.size() > size_t(ctx_len)) continue;
        out.push_back(std::move(e));
    }
    return out;
}

std::vector<train::RlPrompt> make_rl_prompts(const model::Vocabulary& vocab,
                                             const std::vector<dsl::PromptInstance>& corpus,
                                             dsl::Split split) {
    std::vector<train::RlPrompt> out;
    for (const auto& inst : corpus) {
        if (inst.split != split) continue;
        out.push_back(
            {inst.id, model::pack_prompt_context(vocab, dsl::render_model_prompt(inst))});
    }
    return out;
}

std::vector<dsl::PromptInstance> filter_split(const std::vector<dsl::PromptInstance>& corpus,
                                              dsl::Split split) {
    std::vector<dsl::PromptInstance> out;
    for (const auto& inst : corpus) {
        if (inst.split == split) out.push_back(inst);
    }
    return out;
}

std::vector<evalkit::LabeledPair> make_labeled_pairs(
    const std::vector<dsl::PromptInstance>& corpus, dsl::Split split, int corruptions,
    uint64_t seed) {
    std::vector<evalkit::LabeledPair> out;
    for (const auto& inst : corpus) {
        if (inst.split != split) continue;
        std::vector<std::string> ys;
        ys.push_back(dsl::render_gold_completion(inst, derive_seed(seed, 3)));
        for (int c = 0; c < corruptions; ++c) {
            ys.push_back(
                dsl::render_corrupted_completion(inst, derive_seed(seed, 4, uint64_t(c))));
        }
        for (const auto& y : ys) {
            env::WorldState world = env::WorldState::initial();
            env::ExecResult res = env::execute(inst, y, world);
            out.push_back(evalkit::LabeledPair{inst.id, dsl::render_model_prompt(inst), y,
                                               res.reward});
        }
    }
    return out;
}

namespace {

std::string pct(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", 100.0 * v);
    return std::string(buf);
}

}  // namespace

std::string render_markdown_report(const std::vector<VariantSummary>& variants,
                                   const std::vector<evalkit::SvsScalingRow>& svs_rows,
                                   const std::vector<evalkit::RefuseSweepPoint>& refusals,
                                   const std::vector<int>& k_values,
                                   const std::map<std::string, std::vector<double>>& pass_at_k,
                                   const std::map<std::string, std::vector<double>>& pass_hat_k) {
    std::string md;
    md += "# Evaluation report\n\n";
    md += "All rates in percent. Greedy decoding on the rl_val split unless stated.\n\n";

    md += "## Category success rates\n\n";
    md += "| Model | Overall (UW) | Overall (W) | Rel. | Irrel. | AST | Exec |\n";
    md += "|---|---|---|---|---|---|---|\n";
    for (const auto& v : variants) {
        std::map<dsl::Category, double> rates;
        for (const auto& r : v.categories.per_category) rates[r.category] = r.rate();
        auto cell = [&](dsl::Category c) {
            return rates.count(c) ? pct(rates[c]) : std::string("--");
        };
        md += "| " + v.name + " | " + pct(v.categories.overall_unweighted) + " | " +
              pct(v.categories.overall_weighted) + " | " + cell(dsl::Category::Relevance) +
              " | " + cell(dsl::Category::Irrelevance) + " | " + cell(dsl::Category::Ast) +
              " | " + cell(dsl::Category::Exec) + " |\n";
    }
    md += "\nExec is shown for completeness and never counted in the overall columns.\n\n";

    if (!pass_at_k.empty()) {
        md += "## pass@k / pass^k over k\n\n";
        md += "| Model | metric |";
        for (int k : k_values) md += " k=" + std::to_string(k) + " |";
        md += "\n|---|---|";
        for (size_t i = 0; i < k_values.size(); ++i) md += "---|";
        md += "\n";
        for (const auto& [name, vals] : pass_at_k) {
            md += "| " + name + " | pass@k |";
            for (double v : vals) md += " " + pct(v) + " |";
            md += "\n";
        }
        for (const auto& [name, vals] : pass_hat_k) {
            md += "| " + name + " | pass^k |";
            for (double v : vals) md += " " + pct(v) + " |";
            md += "\n";
        }
        md += "\n";
    }

    if (!svs_rows.empty()) {
        md += "## Self-verification sampling at a fixed candidate budget\n\n";
        md += "| k | c per trial | pass^k with SVS | pass^k without SVS |\n|---|---|---|---|\n";
        for (const auto& r : svs_rows) {
            md += "| " + std::to_string(r.k) + " | " + std::to_string(r.c) + " | " +
                  pct(r.pass_hat_k_with_svs) + " | " + pct(r.pass_hat_k_without_svs) + " |\n";
        }
        md += "\n";
    }

    if (!refusals.empty()) {
        md += "## Refusal sweep (tau = " + fmt_double(refusals.front().tau) + ")\n\n";
        md += "| k | precision over non-refused | refuse rate |\n|---|---|---|\n";
        for (const auto& p : refusals) {
            md += "| " + std::to_string(p.k) + " | " +
                  (p.precision ? pct(*p.precision) : std::string("undefined")) + " | " +
                  pct(p.refuse_rate) + " |\n";
        }
        md += "\n";
    }
    return md;
}

}  // namespace dymo::pipeline
