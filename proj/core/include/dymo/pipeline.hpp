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
// Stage drivers shared by the command-line tool and the acceptance suite:
// dataset assembly from corpora and run logs, probe-log synthesis, and the
// report renderer.

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "dymo/config.hpp"
#include "dymo/dsl.hpp"
#include "dymo/env.hpp"
#include "dymo/evalkit.hpp"
#include "dymo/model.hpp"
#include "dymo/train.hpp"

namespace dymo::pipeline {

// Model architecture from config keys model.* (defaults match the reference
// desk-scale setup).
model::Arch arch_from_config(const Config& cfg, int vocab_size);

dsl::GeneratorConfig generator_from_config(const Config& cfg);

// Gold + corrupted probe executions over the given split; the raw material
// of the state-prediction dataset. Ephemeral worlds, logical timestamps.
std::vector<env::RunLogRecord> synthesize_run_logs(
    const std::vector<dsl::PromptInstance>& corpus, dsl::Split split,
    int corruptions_per_instance, uint64_t seed);

// Token-packed SFT pairs from the corpus sft split (gold completions).
std::vector<train::FcPair> make_fc_pairs(const model::Vocabulary& vocab,
                                         const std::vector<dsl::PromptInstance>& corpus,
                                         uint64_t seed, int ctx_len);

// Token-packed state-prediction examples; prompt ids resolve through the
// corpus. Overlong examples are dropped.
std::vector<train::SpExample> make_sp_examples(const model::Vocabulary& vocab,
                                               const std::vector<dsl::PromptInstance>& corpus,
                                               const std::vector<env::SpTriplet>& triplets,
                                               int ctx_len);

std::vector<train::RlPrompt> make_rl_prompts(const model::Vocabulary& vocab,
                                             const std::vector<dsl::PromptInstance>& corpus,
                                             dsl::Split split);

std::vector<dsl::PromptInstance> filter_split(const std::vector<dsl::PromptInstance>& corpus,
                                              dsl::Split split);

// Oracle-labeled (x, y) pairs for the verifier confusion protocol: per
// prompt, the gold completion plus `corruptions` corrupted ones.
std::vector<evalkit::LabeledPair> make_labeled_pairs(
    const std::vector<dsl::PromptInstance>& corpus, dsl::Split split, int corruptions,
    uint64_t seed);

// One evaluated model variant, as rendered into the report tables.
struct VariantSummary {
    std::string name;
    evalkit::CategoryReport categories;
    double greedy_pass_rate = 0.0;
};

std::string render_markdown_report(const std::vector<VariantSummary>& variants,
                                   const std::vector<evalkit::SvsScalingRow>& svs_rows,
                                   const std::vector<evalkit::RefuseSweepPoint>& refusals,
                                   const std::vector<int>& k_values,
                                   const std::map<std::string, std::vector<double>>& pass_at_k,
                                   const std::map<std::string, std::vector<double>>& pass_hat_k);

}  // namespace dymo::pipeline
