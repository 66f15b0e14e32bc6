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
// The autoregressive policy: a small causal-attention network with exact
// sequence log-probabilities and hand-written reverse-mode gradients, all in
// double precision. One network both writes function calls and predicts
// next states.

#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "dymo/vocab.hpp"

namespace dymo::model {

struct Arch {
    int vocab_size = 0;
    int d_model = 64;
    int n_heads = 4;
    int d_ff = 256;
    int n_layers = 1;
    int ctx_len = 256;

    int64_t param_count() const;
    int head_dim() const { return d_model / n_heads; }
    bool operator==(const Arch&) const = default;
};

// Immutable once created; logprob/sample/grad run concurrently on one
// checkpoint. Updates build a new parameter vector.
struct Checkpoint {
    Arch arch;
    std::vector<double> params;
    uint64_t vocab_hash = 0;
    uint64_t step = 0;

    static Checkpoint init_scaled_normal(const Arch& arch, uint64_t vocab_hash, uint64_t seed,
                                         double std_dev = 0.02);
    // All-zero parameters: the output distribution is exactly uniform at
    // every position. Exists for analytic tests.
    static Checkpoint init_uniform(const Arch& arch, uint64_t vocab_hash);
};

// Checkpoint container: little-endian binary with arch descriptor, vocab
// hash, step count and the float64 parameter payload.
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
// Throws std::runtime_error on format errors or vocab-hash mismatch.
Checkpoint load_checkpoint(const std::string& path, uint64_t expected_vocab_hash);

using TokenSeq = std::vector<TokenId>;

// --------------------------------------------------------------------------
// Exact log-probabilities and gradients
// --------------------------------------------------------------------------

// sum_t log pi(target_t | context, target_<t). Exact and deterministic.
// Throws std::invalid_argument when |context| + |target| exceeds ctx_len.
double logprob(const Checkpoint& ckpt, const TokenSeq& context, const TokenSeq& target);

// d logprob / d params; same length as params. Also returns the value.
double grad_logprob(const Checkpoint& ckpt, const TokenSeq& context, const TokenSeq& target,
                    std::vector<double>& grad_out);
// Accumulates into grad_out (+= scale * grad); grad_out must be param-sized.
double grad_logprob_accum(const Checkpoint& ckpt, const TokenSeq& context,
                          const TokenSeq& target, double scale, std::vector<double>& grad_out);

// Next-token distribution after consuming `context` (softmax over the
// vocabulary at the last position). Used by tests and the verifier score.
std::vector<double> next_token_probs(const Checkpoint& ckpt, const TokenSeq& context);

// exp(logprob(prefix | x SEP_Y y SEP_Z)) -- the probability the internal
// environment model starts its state prediction with `prefix`. No sampling.
double prefix_prob(const Checkpoint& ckpt, const TokenSeq& x, const TokenSeq& y,
                   const TokenSeq& prefix);

// --------------------------------------------------------------------------
// Decoding
// --------------------------------------------------------------------------

struct SampleOptions {
    double temperature = 1.0;  // must be > 0
    int max_len = 64;
    // Generation stops after emitting any of these (stop token included in
    // the returned sequence).
    std::vector<TokenId> stop_tokens;
};

// Ancestral sampling, deterministic in seed. Uses an incremental KV cache;
// the distribution at each step is bit-identical to the full forward pass.
TokenSeq sample(const Checkpoint& ckpt, const TokenSeq& context, const SampleOptions& opt,
                uint64_t seed);

// Argmax decoding; ties break toward the lowest token index.
TokenSeq greedy_decode(const Checkpoint& ckpt, const TokenSeq& context, int max_len,
                       const std::vector<TokenId>& stop_tokens);

// --------------------------------------------------------------------------
// Sequence packing
// --------------------------------------------------------------------------
// Canonical layout: BOS x* SEP_Y y* SEP_Z z* EOS. Completion targets carry
// their SEP_Z terminator and state targets their EOS, so the model learns to
// stop.

TokenSeq pack_prompt_context(const Vocabulary& vocab, const std::string& x_text);
TokenSeq completion_target(const Vocabulary& vocab, const std::string& y_text);
TokenSeq pack_state_context(const Vocabulary& vocab, const std::string& x_text,
                            const std::string& y_text);
TokenSeq state_target(const Vocabulary& vocab, const std::string& z_text);

// Decodes a sampled sequence back to text, dropping the trailing stop token
// if present.
std::string decode_generated(const Vocabulary& vocab, const TokenSeq& ids);

}  // namespace dymo::model
