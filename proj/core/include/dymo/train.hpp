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
// Post-training: cross-entropy SFT over function-call pairs and state
// triplets, then the strictly online two-sample RLOO loop with the dynamics
// loss on oracle states.

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "dymo/env.hpp"
#include "dymo/model.hpp"

namespace dymo::train {

// --------------------------------------------------------------------------
// Datasets as token sequences
// --------------------------------------------------------------------------

struct FcPair {
    model::TokenSeq context;  // BOS x SEP_Y
    model::TokenSeq target;   // y SEP_Z
};

struct SpExample {
    model::TokenSeq context;  // BOS x SEP_Y y SEP_Z
    model::TokenSeq target;   // z EOS
};

// --------------------------------------------------------------------------
// Losses (value + exact gradient)
// --------------------------------------------------------------------------

// Completion cross-entropy: -sum_i sum_t log pi(y_{i,t} | x_i, y_{i,<t}).
double sft_fc_loss(const model::Checkpoint& ckpt, const std::vector<FcPair>& batch,
                   std::vector<double>& grad_out);

// State cross-entropy: same shape, conditioning on (x, y), predicting z.
double sft_sp_loss(const model::Checkpoint& ckpt, const std::vector<SpExample>& batch,
                   std::vector<double>& grad_out);

// r - (beta/2) * (logp_current - logp_ref); the KL-regularised reward.
double regularized_reward(double r, double beta, double logp_current, double logp_ref);

// Two-sample REINFORCE leave-one-out. Advantage coefficients are constants;
// gradient flows only through the two sequence log-probabilities.
struct RlooSample {
    double reg_reward = 0.0;       // regularised reward r~
    double logp = 0.0;             // log pi_theta(y | x)
    const std::vector<double>* grad_logp = nullptr;  // d logp / d theta
};

// loss = -[(r1-r2) logp1 + (r2-r1) logp2]; grad accumulated into grad_out.
double rloo_step_loss(const RlooSample& a, const RlooSample& b, std::vector<double>& grad_out);

// Dynamics loss over the oracle states returned for sampled completions.
double dymo_step_loss(const model::Checkpoint& ckpt, const std::vector<SpExample>& batch,
                      std::vector<double>& grad_out);

// --------------------------------------------------------------------------
// Optimizer
// --------------------------------------------------------------------------

struct AdamConfig {
    double lr = 3e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double clip_norm = 1.0;  // global gradient-norm clip; <= 0 disables
};

class Adam {
public:
    Adam(std::size_t n_params, const AdamConfig& cfg);
    void update(std::vector<double>& params, const std::vector<double>& grad);
    void set_lr(double lr) { cfg_.lr = lr; }

private:
    AdamConfig cfg_;
    std::vector<double> m_, v_;
    uint64_t t_ = 0;
};

// --------------------------------------------------------------------------
// SFT
// --------------------------------------------------------------------------

enum class SftMix { FcOnly, FcPlusSp };

struct SftConfig {
    SftMix mix = SftMix::FcOnly;
    int batch_size = 8;
    int steps = 2000;
    double learning_rate = 3e-4;
    // Cosine decay from learning_rate to lr_floor_fraction * learning_rate.
    double lr_floor_fraction = 0.1;
    uint64_t seed = 0;
    unsigned threads = 0;  // 0 = hardware default
};

struct TrainTraceRow {
    uint64_t step = 0;
    double mean_reward = 0.0;
    double rloo_loss = 0.0;
    double dymo_loss = 0.0;
    double sp_precision = 0.0;
    double sp_recall = 0.0;
    double sp_f1 = 0.0;
    double sp_accuracy = 0.0;
    double wall_ms = 0.0;
};

std::string trace_csv_header();
std::string trace_row_csv(const TrainTraceRow& row);

struct SftResult {
    model::Checkpoint checkpoint;
    std::vector<double> loss_trace;  // one entry per step
};

// Optimizes Eq.-style cross-entropy over D_fc (and D_sp when mixed) with
// Adam; deterministic in (config, seed). Throws std::invalid_argument on an
// empty dataset for the requested mix.
SftResult run_sft(const SftConfig& config, const model::Checkpoint& start,
                  const std::vector<FcPair>& fc_data, const std::vector<SpExample>& sp_data);

// --------------------------------------------------------------------------
// Online RL
// --------------------------------------------------------------------------

struct RlConfig {
    double beta = 0.05;        // KL coefficient
    double dymo_weight = 1.0;  // lambda: weight of the dynamics loss
    int steps = 300;
    int batch_prompts = 8;     // two completions sampled per prompt per step
    double temperature = 0.8;
    double learning_rate = 3e-4;
    int max_completion_len = 56;
    int max_state_len = 72;
    uint64_t seed = 0;
    unsigned threads = 0;
};

struct RlPrompt {
    std::string prompt_id;
    model::TokenSeq x;  // BOS x SEP_Y
};

struct RlResult {
    model::Checkpoint checkpoint;
    std::vector<TrainTraceRow> trace;
};

// The strictly online, on-policy loop: per step and prompt, sample two
// completions from the current checkpoint, query the environment for states
// and rewards, regularize rewards against the frozen start checkpoint,
// minimize rloo + dymo_weight * dynamics loss, and append one trace row.
// Predicted states are sampled for the trace metrics only.
RlResult run_rl(const RlConfig& config, const model::Checkpoint& start,
                const std::vector<RlPrompt>& prompts, env::EnvClient& env,
                const std::function<void(const TrainTraceRow&)>& on_step = {});

}  // namespace dymo::train
