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
// Measurement: pass@k / pass^k estimators, confusion-matrix metrics with
// bootstrap intervals, SVS scaling tables, precision/refuse sweeps and
// category-wise reports.

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dymo/dsl.hpp"
#include "dymo/env.hpp"
#include "dymo/model.hpp"
#include "dymo/svs.hpp"

namespace dymo::evalkit {

// --------------------------------------------------------------------------
// Combinatorial estimators
// --------------------------------------------------------------------------

// Unbiased pass@k from n trials with c successes: 1 - C(n-c,k)/C(n,k),
// computed in product form so no binomial overflows.
double pass_at_k(int n, int c, int k);

// Unbiased estimator of "all k trials pass": C(c,k)/C(n,k); 0 when c < k.
double pass_hat_k(int n, int c, int k);

// --------------------------------------------------------------------------
// Trial matrices
// --------------------------------------------------------------------------

struct PromptTrials {
    std::string prompt_id;
    dsl::Category category = dsl::Category::Ast;
    std::vector<int> outcomes;  // n oracle-scored {0,1} trials
};

struct TrialMatrix {
    int n = 0;  // identical across prompts
    std::vector<PromptTrials> prompts;
};

// Samples n completions per prompt at the given temperature and scores each
// with the oracle. Deterministic in seed; prompts evaluated in parallel.
TrialMatrix collect_trials(const model::Checkpoint& ckpt, const model::Vocabulary& vocab,
                           const std::vector<dsl::PromptInstance>& prompts, env::EnvClient& env,
                           int n, double temperature, int max_completion_len, uint64_t seed,
                           unsigned threads = 0);

// Mean estimator over prompts for each k.
std::vector<double> mean_pass_at_k(const TrialMatrix& m, const std::vector<int>& k_values);
std::vector<double> mean_pass_hat_k(const TrialMatrix& m, const std::vector<int>& k_values);

// --------------------------------------------------------------------------
// Confusion metrics
// --------------------------------------------------------------------------

struct ConfusionCounts {
    int64_t tp = 0, fp = 0, fn = 0, tn = 0;
    int64_t total() const { return tp + fp + fn + tn; }
};

struct MetricWithCi {
    std::optional<double> value;  // nullopt marks an undefined metric
    std::optional<double> ci_lo;
    std::optional<double> ci_hi;
};

struct ConfusionMetrics {
    MetricWithCi precision, recall, f1, accuracy;
};

// Point metrics plus percentile-bootstrap 95% intervals over the underlying
// labeled pairs. Deterministic in seed. Throws on total() == 0.
ConfusionMetrics confusion_metrics(const ConfusionCounts& counts, int bootstrap_reps,
                                   uint64_t seed);

// --------------------------------------------------------------------------
// SVS scaling (fixed k*c budget)
// --------------------------------------------------------------------------

struct SvsScalingRow {
    int k = 0;
    int c = 0;  // candidates per trial; k*c constant across rows
    double pass_hat_k_with_svs = 0.0;
    double pass_hat_k_without_svs = 0.0;
    int64_t candidates_generated = 0;  // per prompt: k*c exactly
};

// For each (k, c): per prompt, run k SVS select decisions of c candidates
// each, score the k outputs with the oracle, and report mean pass^k; the
// without-SVS row scores k raw samples instead.
std::vector<SvsScalingRow> svs_scaling_table(
    const model::Checkpoint& ckpt, const model::Vocabulary& vocab,
    const std::vector<dsl::PromptInstance>& prompts, env::EnvClient& env,
    const std::vector<std::pair<int, int>>& k_and_c, double temperature, int max_completion_len,
    int max_state_len, uint64_t seed, unsigned threads = 0);

std::string svs_scaling_csv(const std::vector<SvsScalingRow>& rows);

// --------------------------------------------------------------------------
// Refusal sweep
// --------------------------------------------------------------------------

struct RefuseSweepPoint {
    int k = 0;
    double tau = 0.0;
    std::optional<double> precision;  // correct non-refused / non-refused
    double refuse_rate = 0.0;
    int64_t total = 0;
    int64_t refused = 0;
};

struct ScoredDecision {
    bool refused = false;
    int reward = 0;  // oracle reward of the emitted completion; 0 when refused
};

// Aggregates already-scored select-or-refuse decisions per k.
RefuseSweepPoint summarize_refusals(int k, double tau, const std::vector<ScoredDecision>& xs);

// Runs select-or-refuse over the prompt set for each k, oracle-scores the
// non-refused outputs, and returns one sweep point per k.
std::vector<RefuseSweepPoint> precision_refuse_sweep(
    const model::Checkpoint& ckpt, const model::Vocabulary& vocab,
    const std::vector<dsl::PromptInstance>& prompts, env::EnvClient& env,
    const std::vector<int>& k_values, double tau, double temperature, int max_completion_len,
    int max_state_len, uint64_t seed, unsigned threads = 0,
    const std::string& decision_log_path = {});

std::string refuse_sweep_csv(const std::vector<RefuseSweepPoint>& points);

// --------------------------------------------------------------------------
// Category report
// --------------------------------------------------------------------------

struct CategoryResult {
    dsl::Category category;
    int64_t successes = 0;
    int64_t count = 0;
    double rate() const { return count ? double(successes) / double(count) : 0.0; }
};

struct CategoryReport {
    std::vector<CategoryResult> per_category;  // empty categories omitted
    std::vector<std::string> notices;
    // Exec is reported but excluded from both overall aggregates.
    double overall_unweighted = 0.0;
    double overall_weighted = 0.0;
};

CategoryReport category_report(const std::vector<CategoryResult>& results);
std::string category_report_json(const CategoryReport& report);

// --------------------------------------------------------------------------
// Model-as-verifier evaluation (the confusion-matrix protocol)
// --------------------------------------------------------------------------

// The model's verdict on a (x, y) pair: predicted-pass iff the one-token
// pass-sentinel probability is >= the error-sentinel probability.
bool verifier_verdict(const model::Checkpoint& ckpt, const model::Vocabulary& vocab,
                      const std::string& x_text, const std::string& y_text);

struct LabeledPair {
    std::string prompt_id;
    std::string x_text;
    std::string y_text;
    int oracle_reward = 0;
};

// Verdicts vs oracle over labeled pairs.
ConfusionCounts verifier_confusion(const model::Checkpoint& ckpt, const model::Vocabulary& vocab,
                                   const std::vector<LabeledPair>& pairs, unsigned threads = 0);

// Greedy pass rate over a prompt set (one greedy rollout per prompt).
double greedy_pass_rate(const model::Checkpoint& ckpt, const model::Vocabulary& vocab,
                        const std::vector<dsl::PromptInstance>& prompts, env::EnvClient& env,
                        int max_completion_len, unsigned threads = 0,
                        std::map<dsl::Category, CategoryResult>* by_category = nullptr);

}  // namespace dymo::evalkit
