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

#include "dymo/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "dymo/rng.hpp"
#include "dymo/util.hpp"

namespace dymo::evalkit {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Estimators
// ---------------------------------------------------------------------------

double pass_at_k(int n, int c, int k) {
    if (n <= 0 || c < 0 || c > n || k < 1 || k > n) {
        throw std::invalid_argument("pass_at_k: need 0 <= c <= n and 1 <= k <= n");
    }
    // 1 - C(n-c, k)/C(n, k) in product form.
    if (n - c < k) return 1.0;
    double ratio = 1.0;
    for (int i = 0; i < k; ++i) {
        ratio *= double(n - c - i) / double(n - i);
    }
    return 1.0 - ratio;
}

double pass_hat_k(int n, int c, int k) {
    if (n <= 0 || c < 0 || c > n || k < 1 || k > n) {
        throw std::invalid_argument("pass_hat_k: need 0 <= c <= n and 1 <= k <= n");
    }
    if (c < k) return 0.0;
    double ratio = 1.0;
    for (int i = 0; i < k; ++i) {
        ratio *= double(c - i) / double(n - i);
    }
    return ratio;
}

// ---------------------------------------------------------------------------
// Trial collection
// ---------------------------------------------------------------------------

TrialMatrix collect_trials(const model::Checkpoint& ckpt, const model::Vocabulary& vocab,
                           const std::vector<dsl::PromptInstance>& prompts, env::EnvClient& env,
                           int n, double temperature, int max_completion_len, uint64_t seed,
                           unsigned threads) {
    TrialMatrix m;
    m.n = n;
    m.prompts.resize(prompts.size());
    const model::Specials sp;
    parallel_for(
        prompts.size(),
        [&](size_t p) {
            const auto& inst = prompts[p];
            PromptTrials& row = m.prompts[p];
            row.prompt_id = inst.id;
            row.category = inst.category;
            row.outcomes.resize(size_t(n));
            model::TokenSeq x_ctx =
                model::pack_prompt_context(vocab, dsl::render_model_prompt(inst));
            for (int t = 0; t < n; ++t) {
                model::SampleOptions so;
                so.temperature = temperature;
                so.max_len = max_completion_len;
                so.stop_tokens = {sp.sep_z, sp.eos};
                model::TokenSeq y = model::sample(
                    ckpt, x_ctx, so, derive_seed(seed, fnv1a(inst.id), uint64_t(t)));
                auto reply = env.execute(inst.id, model::decode_generated(vocab, y));
                row.outcomes[size_t(t)] = reply.reward;
            }
        },
        threads);
    return m;
}

namespace {

double mean_over_prompts(const TrialMatrix& m, int k, double (*estimator)(int, int, int)) {
    if (m.prompts.empty()) return 0.0;
    double sum = 0;
    for (const auto& row : m.prompts) {
        int c = 0;
        for (int o : row.outcomes) c += o;
        sum += estimator(m.n, c, k);
    }
    return sum / double(m.prompts.size());
}

}  // namespace

std::vector<double> mean_pass_at_k(const TrialMatrix& m, const std::vector<int>& k_values) {
    std::vector<double> out;
    for (int k : k_values) out.push_back(mean_over_prompts(m, k, &pass_at_k));
    return out;
}

std::vector<double> mean_pass_hat_k(const TrialMatrix& m, const std::vector<int>& k_values) {
    std::vector<double> out;
    for (int k : k_values) out.push_back(mean_over_prompts(m, k, &pass_hat_k));
    return out;
}

// ---------------------------------------------------------------------------
// Confusion metrics with bootstrap intervals
// ---------------------------------------------------------------------------

namespace {

struct PointMetrics {
    std::optional<double> precision, recall, f1, accuracy;
};

PointMetrics point_metrics(int64_t tp, int64_t fp, int64_t fn, int64_t tn) {
    PointMetrics m;
    if (tp + fp > 0) m.precision = double(tp) / double(tp + fp);
    if (tp + fn > 0) m.recall = double(tp) / double(tp + fn);
    if (2 * tp + fp + fn > 0) m.f1 = 2.0 * tp / double(2 * tp + fp + fn);
    if (tp + fp + fn + tn > 0) m.accuracy = double(tp + tn) / double(tp + fp + fn + tn);
    return m;
}

std::pair<double, double> percentile_95(std::vector<double>& xs) {
    std::sort(xs.begin(), xs.end());
    auto pick = [&](double q) {
        if (xs.empty()) return 0.0;
        double idx = q * double(xs.size() - 1);
        size_t lo = size_t(idx);
        size_t hi = std::min(lo + 1, xs.size() - 1);
        double w = idx - double(lo);
        return xs[lo] * (1.0 - w) + xs[hi] * w;
    };
    return {pick(0.025), pick(0.975)};
}

}  // namespace

ConfusionMetrics confusion_metrics(const ConfusionCounts& counts, int bootstrap_reps,
                                   uint64_t seed) {
    if (counts.total() <= 0) throw std::invalid_argument("confusion_metrics: empty counts");
    PointMetrics pt = point_metrics(counts.tp, counts.fp, counts.fn, counts.tn);

    // Resample the underlying labeled pairs: each draw lands in one of the
    // four cells with probability proportional to its count.
    const int64_t N = counts.total();
    std::vector<double> bs_precision, bs_recall, bs_f1, bs_accuracy;
    bs_precision.reserve(size_t(bootstrap_reps));
    bs_recall.reserve(size_t(bootstrap_reps));
    bs_f1.reserve(size_t(bootstrap_reps));
    bs_accuracy.reserve(size_t(bootstrap_reps));

    Rng rng(derive_seed(seed, 0xb007ULL));
    for (int rep = 0; rep < bootstrap_reps; ++rep) {
        int64_t tp = 0, fp = 0, fn = 0, tn = 0;
        for (int64_t i = 0; i < N; ++i) {
            uint64_t r = rng.below(uint32_t(N));
            if (r < uint64_t(counts.tp)) ++tp;
            else if (r < uint64_t(counts.tp + counts.fp)) ++fp;
            else if (r < uint64_t(counts.tp + counts.fp + counts.fn)) ++fn;
            else ++tn;
        }
        PointMetrics b = point_metrics(tp, fp, fn, tn);
        if (b.precision) bs_precision.push_back(*b.precision);
        if (b.recall) bs_recall.push_back(*b.recall);
        if (b.f1) bs_f1.push_back(*b.f1);
        if (b.accuracy) bs_accuracy.push_back(*b.accuracy);
    }

    auto with_ci = [&](std::optional<double> value, std::vector<double>& bs) {
        MetricWithCi m;
        m.value = value;
        if (value && !bs.empty()) {
            auto [lo, hi] = percentile_95(bs);
            m.ci_lo = lo;
            m.ci_hi = hi;
        }
        return m;
    };
    ConfusionMetrics out;
    out.precision = with_ci(pt.precision, bs_precision);
    out.recall = with_ci(pt.recall, bs_recall);
    out.f1 = with_ci(pt.f1, bs_f1);
    out.accuracy = with_ci(pt.accuracy, bs_accuracy);
    return out;
}

// ---------------------------------------------------------------------------
// SVS scaling table
// ---------------------------------------------------------------------------

std::vector<SvsScalingRow> svs_scaling_table(
    const model::Checkpoint& ckpt, const model::Vocabulary& vocab,
    const std::vector<dsl::PromptInstance>& prompts, env::EnvClient& env,
    const std::vector<std::pair<int, int>>& k_and_c, double temperature, int max_completion_len,
    int max_state_len, uint64_t seed, unsigned threads) {
    std::vector<SvsScalingRow> rows;
    const model::Specials sp;
    for (auto [k, c] : k_and_c) {
        SvsScalingRow row;
        row.k = k;
        row.c = c;
        std::vector<double> with_svs(prompts.size(), 0.0), without_svs(prompts.size(), 0.0);
        std::vector<int64_t> budget(prompts.size(), 0);
        parallel_for(
            prompts.size(),
            [&, k = k, c = c](size_t p) {
                const auto& inst = prompts[p];
                const std::string x_text = dsl::render_model_prompt(inst);
                uint64_t pseed = derive_seed(seed, fnv1a(inst.id), uint64_t(k));

                // k trials, each one SVS decision over c candidates. The
                // no-SVS arm scores candidate 0 of the same trial: that
                // candidate is an i.i.d. policy draw whatever the selection
                // later does, so the two rows share their random numbers
                // and differ only by the selection step. Both estimators
                // stay unbiased; the paired difference sheds most of its
                // sampling noise.
                int successes = 0;
                int raw_successes = 0;
                for (int trial = 0; trial < k; ++trial) {
                    svs::SvsConfig cfg;
                    cfg.k = c;
                    cfg.temperature = temperature;
                    cfg.mode = svs::SvsMode::Select;
                    cfg.seed = derive_seed(pseed, uint64_t(trial), 7);
                    cfg.max_completion_len = max_completion_len;
                    cfg.max_state_len = max_state_len;
                    svs::SvsDecision d = svs::svs_select(ckpt, vocab, x_text, cfg);
                    budget[p] += cfg.k;
                    successes += env.execute(inst.id, *d.chosen).reward;
                    raw_successes += env.execute(inst.id, d.candidates[0].completion).reward;
                }
                with_svs[p] = pass_hat_k(k, successes, k);
                without_svs[p] = pass_hat_k(k, raw_successes, k);
            },
            threads);
        double sum_w = 0, sum_wo = 0;
        int64_t total_budget = 0;
        for (size_t p = 0; p < prompts.size(); ++p) {
            sum_w += with_svs[p];
            sum_wo += without_svs[p];
            total_budget += budget[p];
        }
        row.pass_hat_k_with_svs = prompts.empty() ? 0.0 : sum_w / double(prompts.size());
        row.pass_hat_k_without_svs = prompts.empty() ? 0.0 : sum_wo / double(prompts.size());
        row.candidates_generated = prompts.empty() ? 0 : total_budget / int64_t(prompts.size());
        rows.push_back(row);
    }
    return rows;
}

std::string svs_scaling_csv(const std::vector<SvsScalingRow>& rows) {
    std::string out = "k,c,pass_hat_k_with_svs,pass_hat_k_without_svs,candidates_per_prompt\n";
    for (const auto& r : rows) {
        out += std::to_string(r.k) + "," + std::to_string(r.c) + "," +
               fmt_double(r.pass_hat_k_with_svs) + "," + fmt_double(r.pass_hat_k_without_svs) +
               "," + std::to_string(r.candidates_generated) + "\n";
    }
    return out;
}

// ---------------------------------------------------------------------------
// Refusal sweep
// ---------------------------------------------------------------------------

RefuseSweepPoint summarize_refusals(int k, double tau, const std::vector<ScoredDecision>& xs) {
    RefuseSweepPoint pt;
    pt.k = k;
    pt.tau = tau;
    pt.total = int64_t(xs.size());
    int64_t non_refused = 0, correct = 0;
    for (const auto& d : xs) {
        if (d.refused) {
            ++pt.refused;
        } else {
            ++non_refused;
            correct += d.reward;
        }
    }
    pt.refuse_rate = pt.total > 0 ? double(pt.refused) / double(pt.total) : 0.0;
    if (non_refused > 0) pt.precision = double(correct) / double(non_refused);
    return pt;
}

std::vector<RefuseSweepPoint> precision_refuse_sweep(
    const model::Checkpoint& ckpt, const model::Vocabulary& vocab,
    const std::vector<dsl::PromptInstance>& prompts, env::EnvClient& env,
    const std::vector<int>& k_values, double tau, double temperature, int max_completion_len,
    int max_state_len, uint64_t seed, unsigned threads, const std::string& decision_log_path) {
    std::vector<RefuseSweepPoint> out;
    std::string log_text;
    std::mutex log_mu;
    for (int k : k_values) {
        std::vector<ScoredDecision> scored(prompts.size());
        parallel_for(
            prompts.size(),
            [&, k = k](size_t p) {
                const auto& inst = prompts[p];
                svs::SvsConfig cfg;
                cfg.k = k;
                cfg.temperature = temperature;
                cfg.tau = tau;
                cfg.mode = svs::SvsMode::SelectOrRefuse;
                cfg.seed = derive_seed(seed, fnv1a(inst.id), uint64_t(k), 11);
                cfg.max_completion_len = max_completion_len;
                cfg.max_state_len = max_state_len;
                svs::SvsDecision d =
                    svs::svs_select_or_refuse(ckpt, vocab, dsl::render_model_prompt(inst), cfg);
                ScoredDecision s;
                s.refused = d.refused();
                if (!s.refused) s.reward = env.execute(inst.id, *d.chosen).reward;
                scored[p] = s;
                if (!decision_log_path.empty()) {
                    std::string line = d.to_json(inst.id, cfg.seed) + "\n";
                    std::lock_guard<std::mutex> lock(log_mu);
                    log_text += line;
                }
            },
            threads);
        out.push_back(summarize_refusals(k, tau, scored));
    }
    if (!decision_log_path.empty()) write_file(decision_log_path, log_text);
    return out;
}

std::string refuse_sweep_csv(const std::vector<RefuseSweepPoint>& points) {
    std::string out = "k,tau,precision,refuse_rate,total,refused\n";
    for (const auto& p : points) {
        out += std::to_string(p.k) + "," + fmt_double(p.tau) + ",";
        out += p.precision ? fmt_double(*p.precision) : std::string("undefined");
        out += "," + fmt_double(p.refuse_rate) + "," + std::to_string(p.total) + "," +
               std::to_string(p.refused) + "\n";
    }
    return out;
}

// ---------------------------------------------------------------------------
// Category report
// ---------------------------------------------------------------------------

CategoryReport category_report(const std::vector<CategoryResult>& results) {
    CategoryReport report;
    double rate_sum = 0;
    int rate_n = 0;
    int64_t weighted_successes = 0, weighted_total = 0;
    for (const auto& r : results) {
        if (r.count == 0) {
            report.notices.push_back("category " + dsl::category_name(r.category) +
                                     " has no samples and was omitted");
            continue;
        }
        report.per_category.push_back(r);
        if (r.category == dsl::Category::Exec) continue;  // reported, never counted
        rate_sum += r.rate();
        rate_n += 1;
        weighted_successes += r.successes;
        weighted_total += r.count;
    }
    report.overall_unweighted = rate_n > 0 ? rate_sum / double(rate_n) : 0.0;
    report.overall_weighted =
        weighted_total > 0 ? double(weighted_successes) / double(weighted_total) : 0.0;
    return report;
}

std::string category_report_json(const CategoryReport& report) {
    json per = json::object();
    for (const auto& r : report.per_category) {
        per[dsl::category_name(r.category)] = {
            {"successes", r.successes}, {"count", r.count}, {"rate", r.rate()}};
    }
    json j = {{"per_category", per},
              {"overall_unweighted", report.overall_unweighted},
              {"overall_weighted", report.overall_weighted},
              {"notices", report.notices}};
    return j.dump(2);
}

// ---------------------------------------------------------------------------
// Verifier evaluation
// ---------------------------------------------------------------------------

bool verifier_verdict(const model::Checkpoint& ckpt, const model::Vocabulary& vocab,
                      const std::string& x_text, const std::string& y_text) {
    const model::Specials sp;
    model::TokenSeq x = vocab.encode(x_text);
    model::TokenSeq y = vocab.encode(y_text);
    double p_pass = model::prefix_prob(ckpt, x, y, {sp.pass});
    double p_error = model::prefix_prob(ckpt, x, y, {sp.error});
    return p_pass >= p_error;
}

ConfusionCounts verifier_confusion(const model::Checkpoint& ckpt, const model::Vocabulary& vocab,
                                   const std::vector<LabeledPair>& pairs, unsigned threads) {
    std::vector<int> verdicts(pairs.size(), 0);
    parallel_for(
        pairs.size(),
        [&](size_t i) {
            verdicts[i] = verifier_verdict(ckpt, vocab, pairs[i].x_text, pairs[i].y_text) ? 1 : 0;
        },
        threads);
    ConfusionCounts counts;
    for (size_t i = 0; i < pairs.size(); ++i) {
        bool pred = verdicts[i] == 1;
        bool truth = pairs[i].oracle_reward == 1;
        if (pred && truth) ++counts.tp;
        else if (pred && !truth) ++counts.fp;
        else if (!pred && truth) ++counts.fn;
        else ++counts.tn;
    }
    return counts;
}

double greedy_pass_rate(const model::Checkpoint& ckpt, const model::Vocabulary& vocab,
                        const std::vector<dsl::PromptInstance>& prompts, env::EnvClient& env,
                        int max_completion_len, unsigned threads,
                        std::map<dsl::Category, CategoryResult>* by_category) {
    const model::Specials sp;
    std::vector<int> rewards(prompts.size(), 0);
    parallel_for(
        prompts.size(),
        [&](size_t p) {
            const auto& inst = prompts[p];
            model::TokenSeq x_ctx =
                model::pack_prompt_context(vocab, dsl::render_model_prompt(inst));
            model::TokenSeq y =
                model::greedy_decode(ckpt, x_ctx, max_completion_len, {sp.sep_z, sp.eos});
            rewards[p] = env.execute(inst.id, model::decode_generated(vocab, y)).reward;
        },
        threads);
    int64_t passed = 0;
    for (size_t p = 0; p < prompts.size(); ++p) {
        passed += rewards[p];
        if (by_category != nullptr) {
            auto& slot = (*by_category)[prompts[p].category];
            slot.category = prompts[p].category;
            slot.successes += rewards[p];
            slot.count += 1;
        }
    }
    return prompts.empty() ? 0.0 : double(passed) / double(prompts.size());
}

}  // namespace dymo::evalkit
