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

#include "dymo/svs.hpp"

#include <stdexcept>

#include <nlohmann/json.hpp>

#include "dymo/rng.hpp"

namespace dymo::svs {

using nlohmann::json;

namespace {

// Draws the k candidates with their predicted states and pass scores. The
// candidate loop touches only the policy checkpoint, never the oracle.
std::vector<Candidate> draw_candidates(const model::Checkpoint& ckpt,
                                       const model::Vocabulary& vocab, const std::string& x_text,
                                       const SvsConfig& config) {
    if (config.k < 1) throw std::invalid_argument("svs: k must be >= 1");
    const model::Specials sp;
    const model::TokenSeq x_ctx = model::pack_prompt_context(vocab, x_text);
    const model::TokenSeq x_raw = vocab.encode(x_text);

    std::vector<Candidate> out(size_t(config.k));
    for (int i = 0; i < config.k; ++i) {
        Candidate& cand = out[size_t(i)];
        uint64_t seed_y = derive_seed(config.seed, uint64_t(i), 1);
        uint64_t seed_z = derive_seed(config.seed, uint64_t(i), 2);

        model::SampleOptions so;
        so.temperature = config.temperature;
        so.max_len = config.max_completion_len;
        so.stop_tokens = {sp.sep_z, sp.eos};
        model::TokenSeq y = model::sample(ckpt, x_ctx, so, seed_y);
        cand.completion = model::decode_generated(vocab, y);

        model::TokenSeq y_body = y;
        if (!y_body.empty() && (y_body.back() == sp.sep_z || y_body.back() == sp.eos)) {
            y_body.pop_back();
        }

        model::TokenSeq z_ctx = x_ctx;
        z_ctx.insert(z_ctx.end(), y_body.begin(), y_body.end());
        z_ctx.push_back(sp.sep_z);
        model::SampleOptions sz;
        sz.temperature = config.temperature;
        sz.max_len = config.max_state_len;
        sz.stop_tokens = {sp.eos};
        model::TokenSeq zhat = model::sample(ckpt, z_ctx, sz, seed_z);
        cand.sampled_state = model::decode_generated(vocab, zhat);
        cand.state_pass_prefixed = !zhat.empty() && zhat.front() == sp.pass;

        cand.pass_prefix_prob = model::prefix_prob(ckpt, x_raw, y_body, {sp.pass});
    }
    return out;
}

int argmax_score(const std::vector<Candidate>& cands, const std::vector<int>& eligible) {
    int best = -1;
    for (int idx : eligible) {
        if (best < 0 || cands[size_t(idx)].pass_prefix_prob > cands[size_t(best)].pass_prefix_prob) {
            best = idx;
        }
    }
    return best;
}

}  // namespace

SvsDecision svs_select(const model::Checkpoint& ckpt, const model::Vocabulary& vocab,
                       const std::string& x_text, const SvsConfig& config) {
    SvsDecision d;
    d.candidates = draw_candidates(ckpt, vocab, x_text, config);
    std::vector<int> all(d.candidates.size());
    for (size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
    int best = argmax_score(d.candidates, all);
    d.chosen_index = best;
    d.chosen = d.candidates[size_t(best)].completion;
    return d;
}

SvsDecision svs_select_or_refuse(const model::Checkpoint& ckpt, const model::Vocabulary& vocab,
                                 const std::string& x_text, const SvsConfig& config) {
    SvsDecision d;
    d.candidates = draw_candidates(ckpt, vocab, x_text, config);
    std::vector<int> eligible;
    for (size_t i = 0; i < d.candidates.size(); ++i) {
        const Candidate& c = d.candidates[i];
        if (c.state_pass_prefixed && c.pass_prefix_prob > config.tau) {
            eligible.push_back(static_cast<int>(i));
        }
    }
    if (eligible.empty()) {
        d.chosen = std::nullopt;  // REFUSE
        d.chosen_index = std::nullopt;
        return d;
    }
    int best = argmax_score(d.candidates, eligible);
    d.chosen_index = best;
    d.chosen = d.candidates[size_t(best)].completion;
    return d;
}

std::string SvsDecision::to_json(const std::string& prompt_id, uint64_t seed) const {
    json cands = json::array();
    for (const auto& c : candidates) {
        cands.push_back({{"completion", c.completion},
                         {"sampled_state", c.sampled_state},
                         {"pass_prefix_prob", c.pass_prefix_prob},
                         {"state_pass_prefixed", c.state_pass_prefixed}});
    }
    json j = {{"prompt_id", prompt_id},
              {"seed", seed},
              {"candidates", cands},
              {"refused", refused()}};
    if (chosen_index) j["chosen_index"] = *chosen_index;
    if (chosen) j["chosen"] = *chosen;
    return j.dump();
}

std::string best_of_n_oracle(const model::Checkpoint& ckpt, const model::Vocabulary& vocab,
                             const std::string& prompt_id, const std::string& x_text, int n,
                             double temperature, int max_completion_len, uint64_t seed,
                             env::EnvClient& env) {
    if (n < 1) throw std::invalid_argument("best_of_n_oracle: n must be >= 1");
    const model::Specials sp;
    const model::TokenSeq x_ctx = model::pack_prompt_context(vocab, x_text);

    std::string first;
    for (int i = 0; i < n; ++i) {
        model::SampleOptions so;
        so.temperature = temperature;
        so.max_len = max_completion_len;
        so.stop_tokens = {sp.sep_z, sp.eos};
        model::TokenSeq y = model::sample(ckpt, x_ctx, so, derive_seed(seed, uint64_t(i), 3));
        std::string y_text = model::decode_generated(vocab, y);
        if (i == 0) first = y_text;
        auto reply = env.execute(prompt_id, y_text);
        if (reply.reward == 1) return y_text;
    }
    return first;
}

}  // namespace dymo::svs
