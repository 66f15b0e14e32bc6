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

#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

namespace dymo::model {

using TokenId = int32_t;

// Special-token slots. PASS/ERROR are the environment sentinels; each is a
// single token so that a one-token prefix probability is the pass score.
struct Specials {
    TokenId pad = 0;
    TokenId bos = 1;
    TokenId eos = 2;
    TokenId sep_y = 3;  // x -> y boundary
    TokenId sep_z = 4;  // y -> z boundary, doubles as end-of-completion
    TokenId pass = 5;   // "<|pass|>"
    TokenId error = 6;  // "<|error|>"
};

// Word-level tokenizer over the DSL with single-character fallback. Encoding
// is greedy longest-match; decode concatenates token strings, so the pair is
// mutually inverse on any string assembled from the token alphabet.
class Vocabulary {
public:
    // The fixed vocabulary for the DSL corpus (specials, printable-ASCII
    // fallback, DSL words). Deterministic; its hash is stored in checkpoints.
    static Vocabulary dsl_default();

    // Specials plus the given extra tokens; used by tests that want a tiny
    // alphabet with exact analytic probabilities.
    static Vocabulary from_tokens(const std::vector<std::string>& extra);

    int size() const { return static_cast<int>(tokens_.size()); }
    const Specials& specials() const { return specials_; }
    const std::string& token_text(TokenId id) const { return tokens_[static_cast<size_t>(id)]; }

    // Throws std::invalid_argument when text contains a character outside
    // the token alphabet.
    std::vector<TokenId> encode(const std::string& text) const;
    std::string decode(const std::vector<TokenId>& ids) const;

    uint64_t hash() const { return hash_; }

private:
    Vocabulary() = default;
    void finish();

    std::vector<std::string> tokens_;
    Specials specials_;
    // max token length -> exact-match lookup, longest first.
    std::unordered_map<std::string, TokenId> lookup_;
    size_t max_token_len_ = 1;
    uint64_t hash_ = 0;
};

}  // namespace dymo::model
