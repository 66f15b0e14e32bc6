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
// Self-verification sampling: draw k candidate completions, predict each
// one's next state with the policy's internal environment model, then select
// by pass-prefix probability (or refuse). Never touches the oracle.

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dymo/env.hpp"
#include "dymo/model.hpp"

namespace dymo::svs {

enum class SvsMode { Select, SelectOrRefuse };

struct SvsConfig {
    int k = 4;  // candidates per decision, >= 1
    double temperature = 0.8;
    double tau = 0.92;  // refusal threshold; only read in SelectOrRefuse mode
    SvsMode mode = SvsMode::Select;
    uint64_t seed = 0;
    int max_completion_len = 56;
    int max_state_len = 72;
};

struct Candidate {
    std::string completion;
    std::string sampled_state;    // z-hat text decoded from the model
    double pass_prefix_prob = 0.0;
    bool state_pass_prefixed = false;
};

struct SvsDecision {
    // nullopt encodes REFUSE (SelectOrRefuse mode only).
    std::optional<std::string> chosen;
    std::vector<Candidate> candidates;
    std::optional<int> chosen_index;

    bool refused() const { return !chosen.has_value(); }

    std::string to_json(const std::string& prompt_id, uint64_t seed) const;
};

// Select mode: argmax of the pass-prefix score over all k candidates,
// lowest index on ties. Zero oracle calls.
SvsDecision svs_select(const model::Checkpoint& ckpt, const model::Vocabulary& vocab,
                       const std::string& x_text, const SvsConfig& config);

// Select-or-refuse: a candidate is eligible iff its sampled state starts
// with the pass sentinel AND its score exceeds tau; empty set refuses.
SvsDecision svs_select_or_refuse(const model::Checkpoint& ckpt, const model::Vocabulary& vocab,
                                 const std::string& x_text, const SvsConfig& config);

// The oracle-assisted baseline: sample n candidates, score each against the
// environment, return the first passing one (else candidate 0). Used only to
// contextualize SVS; marked by its env parameter.
std::string best_of_n_oracle(const model::Checkpoint& ckpt, const model::Vocabulary& vocab,
                             const std::string& prompt_id, const std::string& x_text, int n,
                             double temperature, int max_completion_len, uint64_t seed,
                             env::EnvClient& env);

}  // namespace dymo::svs
