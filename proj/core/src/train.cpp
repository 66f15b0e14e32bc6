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

#include "dymo/train.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>
#include <thread>

#include "dymo/rng.hpp"
#include "dymo/util.hpp"

namespace dymo::train {

namespace {

// Per-example gradients land in their own buffers and are reduced in example
// order, so results do not depend on the worker count.
double batch_neg_logprob_grad(const model::Checkpoint& ckpt,
                              const std::vector<const model::TokenSeq*>& contexts,
                              const std::vector<const model::TokenSeq*>& targets,
                              std::vector<double>& grad_out, unsigned threads) {
    const size_t n = contexts.size();
    std::vector<std::vector<double>> grads(n);
    std::vector<double> values(n, 0.0);
    parallel_for(
        n,
        [&](size_t i) {
            grads[i].assign(ckpt.params.size(), 0.0);
            values[i] =
                model::grad_logprob_accum(ckpt, *contexts[i], *targets[i], -1.0, grads[i]);
        },
        threads);
    double loss = 0.0;
    for (size_t i = 0; i < n; ++i) {
        loss -= values[i];
        const std::vector<double>& g = grads[i];
        for (size_t p = 0; p < grad_out.size(); ++p) grad_out[p] += g[p];
    }
    return loss;
}

double grad_global_norm(const std::vector<double>& g) {
    double s = 0;
    for (double v : g) s += v * v;
    return std::sqrt(s);
}

void clip_grad(std::vector<double>& g, double clip_norm) {
    if (clip_norm <= 0) return;
    double n = grad_global_norm(g);
    if (n > clip_norm) {
        double s = clip_norm / n;
        for (double& v : g) v *= s;
    }
}

}  // namespace

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

double sft_fc_loss(const model::Checkpoint& ckpt, const std::vector<FcPair>& batch,
                   std::vector<double>& grad_out) {
    if (batch.empty()) throw std::invalid_argument("sft_fc_loss: empty batch");
    grad_out.assign(ckpt.params.size(), 0.0);
    std::vector<const model::TokenSeq*> ctx, tgt;
    for (const auto& p : batch) {
        ctx.push_back(&p.context);
        tgt.push_back(&p.target);
    }
    return batch_neg_logprob_grad(ckpt, ctx, tgt, grad_out, 1);
}

double sft_sp_loss(const model::Checkpoint& ckpt, const std::vector<SpExample>& batch,
                   std::vector<double>& grad_out) {
    if (batch.empty()) throw std::invalid_argument("sft_sp_loss: empty batch");
    grad_out.assign(ckpt.params.size(), 0.0);
    std::vector<const model::TokenSeq*> ctx, tgt;
    for (const auto& e : batch) {
        ctx.push_back(&e.context);
        tgt.push_back(&e.target);
    }
    return batch_neg_logprob_grad(ckpt, ctx, tgt, grad_out, 1);
}

double regularized_reward(double r, double beta, double logp_current, double logp_ref) {
    return r - 0.5 * beta * (logp_current - logp_ref);
}

double rloo_step_loss(const RlooSample& a, const RlooSample& b, std::vector<double>& grad_out) {
    const double adv_a = a.reg_reward - b.reg_reward;
    const double adv_b = -adv_a;
    double loss = -(adv_a * a.logp + adv_b * b.logp);
    if (a.grad_logp != nullptr && b.grad_logp != nullptr && !grad_out.empty()) {
        const std::vector<double>& ga = *a.grad_logp;
        const std::vector<double>& gb = *b.grad_logp;
        for (size_t p = 0; p < grad_out.size(); ++p) {
            grad_out[p] += -(adv_a * ga[p] + adv_b * gb[p]);
        }
    }
    return loss;
}

double dymo_step_loss(const model::Checkpoint& ckpt, const std::vector<SpExample>& batch,
                      std::vector<double>& grad_out) {
    return sft_sp_loss(ckpt, batch, grad_out);
}

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

Adam::Adam(std::size_t n_params, const AdamConfig& cfg)
    : cfg_(cfg), m_(n_params, 0.0), v_(n_params, 0.0) {}

void Adam::update(std::vector<double>& params, const std::vector<double>& grad) {
    if (params.size() != m_.size() || grad.size() != m_.size()) {
        throw std::invalid_argument("Adam: size mismatch");
    }
    t_ += 1;
    std::vector<double> g = grad;
    clip_grad(g, cfg_.clip_norm);
    const double bc1 = 1.0 - std::pow(cfg_.beta1, double(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, double(t_));
    for (size_t i = 0; i < params.size(); ++i) {
        m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * g[i];
        v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
        double mhat = m_[i] / bc1;
        double vhat = v_[i] / bc2;
        params[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
}

// ---------------------------------------------------------------------------
// SFT
// ---------------------------------------------------------------------------

std::string trace_csv_header() {
    return "step,mean_reward,rloo_loss,dymo_loss,sp_precision,sp_recall,sp_f1,sp_accuracy,"
           "wall_ms";
}

std::string trace_row_csv(const TrainTraceRow& r) {
    std::string out = std::to_string(r.step);
    for (double v : {r.mean_reward, r.rloo_loss, r.dymo_loss, r.sp_precision, r.sp_recall,
                     r.sp_f1, r.sp_accuracy, r.wall_ms}) {
        out += ",";
        out += fmt_double(v);
    }
    return out;
}

SftResult run_sft(const SftConfig& config, const model::Checkpoint& start,
                  const std::vector<FcPair>& fc_data, const std::vector<SpExample>& sp_data) {
    if (fc_data.empty()) throw std::invalid_argument("run_sft: empty function-call dataset");
    if (config.mix == SftMix::FcPlusSp && sp_data.empty()) {
        throw std::invalid_argument("run_sft: mixed SFT requires a state-prediction dataset");
    }
    if (config.steps <= 0 || config.batch_size <= 0) {
        throw std::invalid_argument("run_sft: steps and batch_size must be positive");
    }

    model::Checkpoint ckpt = start;
    AdamConfig adam_cfg{config.learning_rate, 0.9, 0.999, 1e-8, 1.0};
    Adam opt(ckpt.params.size(), adam_cfg);

    const size_t n_fc = fc_data.size();
    const size_t n_sp = config.mix == SftMix::FcPlusSp ? sp_data.size() : 0;
    const size_t pool = n_fc + n_sp;

    SftResult result;
    result.loss_trace.reserve(size_t(config.steps));

    std::vector<double> grad(ckpt.params.size());
    for (int step = 0; step < config.steps; ++step) {
        Rng rng(derive_seed(config.seed, 0xf7ULL, uint64_t(step)));
        std::vector<const model::TokenSeq*> ctx, tgt;
        ctx.reserve(size_t(config.batch_size));
        tgt.reserve(size_t(config.batch_size));
        for (int b = 0; b < config.batch_size; ++b) {
            size_t idx = size_t(rng.below(uint32_t(pool)));
            if (idx < n_fc) {
                ctx.push_back(&fc_data[idx].context);
                tgt.push_back(&fc_data[idx].target);
            } else {
                ctx.push_back(&sp_data[idx - n_fc].context);
                tgt.push_back(&sp_data[idx - n_fc].target);
            }
        }
        std::fill(grad.begin(), grad.end(), 0.0);
        double loss = batch_neg_logprob_grad(ckpt, ctx, tgt, grad, config.threads);
        double progress = double(step) / double(config.steps);
        double floor = config.lr_floor_fraction;
        opt.set_lr(config.learning_rate *
                   (floor + (1.0 - floor) * 0.5 * (1.0 + std::cos(progress * 3.14159265358979))));
        opt.update(ckpt.params, grad);
        ckpt.step += 1;
        result.loss_trace.push_back(loss);
    }
    result.checkpoint = std::move(ckpt);
    return result;
}

// ---------------------------------------------------------------------------
// Online RL
// ---------------------------------------------------------------------------

namespace {

struct PromptStepWork {
    // Two on-policy samples and everything derived from them.
    model::TokenSeq y_tokens[2];
    std::string y_text[2];
    std::string z_text[2];
    int reward[2] = {0, 0};
    double logp_cur[2] = {0, 0};
    double logp_ref[2] = {0, 0};
    std::vector<double> grad_logp[2];
    SpExample dymo_examples[2];
    bool pred_pass[2] = {false, false};
    bool ok = false;
    std::string error;
};

env::EnvClient::Reply execute_with_retry(env::EnvClient& env, const std::string& prompt_id,
                                         const std::string& completion) {
    for (int attempt = 0;; ++attempt) {
        try {
            return env.execute(prompt_id, completion);
        } catch (const std::exception&) {
            if (attempt >= 2) throw;
            std::this_thread::sleep_for(std::chrono::milliseconds(50 * (attempt + 1)));
        }
    }
}

}  // namespace

RlResult run_rl(const RlConfig& config, const model::Checkpoint& start,
                const std::vector<RlPrompt>& prompts, env::EnvClient& env,
                const std::function<void(const TrainTraceRow&)>& on_step) {
    if (prompts.empty()) throw std::invalid_argument("run_rl: empty prompt set");
    if (config.steps <= 0 || config.batch_prompts <= 0) {
        throw std::invalid_argument("run_rl: steps and batch_prompts must be positive");
    }

    model::Checkpoint ckpt = start;
    const model::Checkpoint ref = start;  // theta_0, frozen
    Adam opt(ckpt.params.size(), AdamConfig{config.learning_rate, 0.9, 0.999, 1e-8, 1.0});
    const model::Specials sp;

    RlResult result;
    result.trace.reserve(size_t(config.steps));
    const model::Vocabulary vocab = model::Vocabulary::dsl_default();

    std::vector<double> grad(ckpt.params.size());
    for (int step = 0; step < config.steps; ++step) {
        auto t0 = std::chrono::steady_clock::now();
        Rng pick_rng(derive_seed(config.seed, 0x21ULL, uint64_t(step)));
        std::vector<size_t> batch_idx;
        for (int b = 0; b < config.batch_prompts; ++b) {
            batch_idx.push_back(size_t(pick_rng.below(uint32_t(prompts.size()))));
        }

        std::vector<PromptStepWork> work(batch_idx.size());
        parallel_for(
            batch_idx.size(),
            [&](size_t b) {
                PromptStepWork& w = work[b];
                const RlPrompt& prompt = prompts[batch_idx[b]];
                try {
                    for (int j = 0; j < 2; ++j) {
                        uint64_t sd =
                            derive_seed(config.seed, uint64_t(step), uint64_t(b), uint64_t(j));
                        model::SampleOptions so;
                        so.temperature = config.temperature;
                        so.max_len = config.max_completion_len;
                        so.stop_tokens = {sp.sep_z, sp.eos};
                        w.y_tokens[j] = model::sample(ckpt, prompt.x, so, sd);
                        w.y_text[j] = model::decode_generated(vocab, w.y_tokens[j]);
                    }
                    w.ok = true;
                } catch (const std::exception& e) {
                    w.error = e.what();
                }
            },
            config.threads);

        // Oracle queries run after sampling; exec-category mutations stay in
        // a deterministic order (batch slot, then sample index).
        for (size_t b = 0; b < work.size(); ++b) {
            PromptStepWork& w = work[b];
            if (!w.ok) throw std::runtime_error("run_rl sampling failed: " + w.error);
            const RlPrompt& prompt = prompts[batch_idx[b]];
            for (int j = 0; j < 2; ++j) {
                auto reply = execute_with_retry(env, prompt.prompt_id, w.y_text[j]);
                w.z_text[j] = reply.state;
                w.reward[j] = reply.reward;
            }
        }

        parallel_for(
            work.size(),
            [&](size_t b) {
                PromptStepWork& w = work[b];
                const RlPrompt& prompt = prompts[batch_idx[b]];
                for (int j = 0; j < 2; ++j) {
                    const model::TokenSeq& y = w.y_tokens[j];
                    w.grad_logp[j].assign(ckpt.params.size(), 0.0);
                    w.logp_cur[j] =
                        model::grad_logprob_accum(ckpt, prompt.x, y, 1.0, w.grad_logp[j]);
                    w.logp_ref[j] = model::logprob(ref, prompt.x, y);

                    // Dynamics targets are the true environment states.
                    model::TokenSeq z_ctx = prompt.x;
                    model::TokenSeq y_body = y;
                    if (!y_body.empty() &&
                        (y_body.back() == sp.sep_z || y_body.back() == sp.eos)) {
                        y_body.pop_back();
                    }
                    z_ctx.insert(z_ctx.end(), y_body.begin(), y_body.end());
                    z_ctx.push_back(sp.sep_z);
                    model::TokenSeq z_tgt = model::state_target(vocab, w.z_text[j]);
                    if (static_cast<int>(z_tgt.size()) > config.max_state_len) {
                        z_tgt.resize(size_t(config.max_state_len));
                    }
                    if (z_ctx.size() + z_tgt.size() > size_t(ckpt.arch.ctx_len)) {
                        z_tgt.resize(size_t(ckpt.arch.ctx_len) - z_ctx.size());
                    }
                    w.dymo_examples[j] = SpExample{z_ctx, z_tgt};

                    // Sampled state prediction, used only for the trace metrics.
                    uint64_t sd = derive_seed(config.seed, uint64_t(step), uint64_t(b),
                                              uint64_t(16 + j));
                    model::SampleOptions so;
                    so.temperature = config.temperature;
                    so.max_len = 1;  // the sentinel decides the verdict
                    so.stop_tokens = {sp.eos};
                    model::TokenSeq zhat = model::sample(ckpt, z_ctx, so, sd);
                    w.pred_pass[j] = !zhat.empty() && zhat.front() == sp.pass;
                }
            },
            config.threads);

        // Assemble the step loss.
        std::fill(grad.begin(), grad.end(), 0.0);
        double rloo_loss = 0.0;
        double reward_sum = 0.0;
        int64_t tp = 0, fp = 0, fn = 0, tn = 0;
        std::vector<SpExample> dymo_batch;
        dymo_batch.reserve(work.size() * 2);
        for (auto& w : work) {
            RlooSample s1{regularized_reward(w.reward[0], config.beta, w.logp_cur[0],
                                             w.logp_ref[0]),
                          w.logp_cur[0], &w.grad_logp[0]};
            RlooSample s2{regularized_reward(w.reward[1], config.beta, w.logp_cur[1],
                                             w.logp_ref[1]),
                          w.logp_cur[1], &w.grad_logp[1]};
            rloo_loss += rloo_step_loss(s1, s2, grad);
            for (int j = 0; j < 2; ++j) {
                reward_sum += w.reward[j];
                bool truth = w.reward[j] == 1;
                bool pred = w.pred_pass[j];
                if (pred && truth) ++tp;
                else if (pred && !truth) ++fp;
                else if (!pred && truth) ++fn;
                else ++tn;
                dymo_batch.push_back(std::move(w.dymo_examples[j]));
            }
        }

        double dymo_loss = 0.0;
        if (config.dymo_weight != 0.0) {
            std::vector<double> dymo_grad;
            dymo_loss = dymo_step_loss(ckpt, dymo_batch, dymo_grad);
            for (size_t p = 0; p < grad.size(); ++p) {
                grad[p] += config.dymo_weight * dymo_grad[p];
            }
        }

        opt.update(ckpt.params, grad);
        ckpt.step += 1;

        TrainTraceRow row;
        row.step = ckpt.step;
        row.mean_reward = reward_sum / double(2 * work.size());
        row.rloo_loss = rloo_loss;
        row.dymo_loss = dymo_loss;
        row.sp_precision = (tp + fp) > 0 ? double(tp) / double(tp + fp) : 0.0;
        row.sp_recall = (tp + fn) > 0 ? double(tp) / double(tp + fn) : 0.0;
        row.sp_f1 = (2 * tp + fp + fn) > 0 ? 2.0 * tp / double(2 * tp + fp + fn) : 0.0;
        row.sp_accuracy = double(tp + tn) / double(tp + fp + fn + tn);
        row.wall_ms = std::chrono::duration<double, std::milli>(
                          std::chrono::steady_clock::now() - t0)
                          .count();
        if (on_step) on_step(row);
        result.trace.push_back(row);
    }

    result.checkpoint = std::move(ckpt);
    return result;
}

}  // namespace dymo::train
