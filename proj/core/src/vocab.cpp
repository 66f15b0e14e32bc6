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

#include "dymo/vocab.hpp"

#include <stdexcept>

#include "dymo/util.hpp"

namespace dymo::model {

namespace {

const std::vector<std::string>& special_texts() {
    static const std::vector<std::string> v = {"<|pad|>", "<|bos|>",  "<|eos|>", "<|y|>",
                                               "<|z|>",   "<|pass|>", "<|error|>"};
    return v;
}

// Word tokens of the DSL: JSON structure chunks, tool and parameter names,
// value pools, prompt template words, state payload keys and error codes.
// Single printable-ASCII characters are the fallback, so any corpus string
// tokenizes; these words only shorten the common sequences.
const std::vector<std::string>& dsl_words() {
    static const std::vector<std::string> v = {
        // JSON structure
        "{\"", "\": {\"", "\": ", "\": \"", ", \"", "\", \"", "}}", "tools:",
        // tool names
        "weather.humidity_forecast", "weather.temp_forecast", "sports.team_score", "fx.rate",
        "geo.distance", "time.world_clock", "library.find_book", "movie.showtimes",
        "recipe.find", "news.headlines", "bank.transfer", "inventory.order",
        "calendar.book_room",
        // parameter names
        "location", "days", "min_humidity", "team", "league", "stats", "from", "to", "unit",
        "city", "title", "max", "topic", "count", "dish", "veg", "item", "quantity", "room",
        "day", "hour", "amount",
        // value pools
        "Miami", "Boston", "Denver", "Paris", "Tokyo", "Oslo", "Cairo", "Sydney", "Sharks",
        "Eagles", "Bisons", "Comets", "coastal", "national", "USD", "EUR", "JPY", "GBP", "km",
        "miles", "Dune", "Hamlet", "Solaris", "pasta", "ramen", "curry", "tech", "sports",
        "finance", "checking", "savings", "brokerage", "widget", "gadget", "sprocket", "alpha",
        "beta", "gamma", "monday", "friday", "sunday",
        // prompt template words
        "what", "is", "the", "humidity", "in", "for", "next", "show", "me", "temperature",
        "score", "of", "exchange", "rate", "how", "far", "time", "it", "find", "book",
        "library", "when", "showing", "recipe", "news", "headlines", "about", "transfer",
        "order", "units", "on", "at", "cannot", "help", "with", "that", "request", "no",
        "available", "tool", "can", "handle", "this", "sorry",
        // payload keys and literals
        "status", "data", "no_call", "true", "false",
        // error codes and keys
        "parse_error", "unknown_tool", "duplicate_arg", "bad_literal", "unexpected_call",
        "wrong_tool", "unknown_argument", "missing_param", "bad_value", "precondition_failed",
        "state_mismatch", "insufficient_funds", "out_of_stock", "slot_taken", "error", "detail",
        "position", "param", "value",
    };
    return v;
}

}  // namespace

Vocabulary Vocabulary::dsl_default() {
    Vocabulary v;
    for (const auto& s : special_texts()) v.tokens_.push_back(s);
    for (char c = 0x20; c <= 0x7e; ++c) v.tokens_.push_back(std::string(1, c));
    for (const auto& w : dsl_words()) v.tokens_.push_back(w);
    v.finish();
    return v;
}

Vocabulary Vocabulary::from_tokens(const std::vector<std::string>& extra) {
    Vocabulary v;
    for (const auto& s : special_texts()) v.tokens_.push_back(s);
    for (const auto& s : extra) v.tokens_.push_back(s);
    v.finish();
    return v;
}

void Vocabulary::finish() {
    for (size_t i = 0; i < tokens_.size(); ++i) {
        const std::string& t = tokens_[i];
        if (t.empty()) throw std::logic_error("empty token in vocabulary");
        auto [it, inserted] = lookup_.emplace(t, static_cast<TokenId>(i));
        if (!inserted) throw std::logic_error("duplicate token in vocabulary: " + t);
        max_token_len_ = std::max(max_token_len_, t.size());
    }
    std::string flat;
    for (const auto& t : tokens_) {
        flat += t;
        flat += '\x1f';
    }
    hash_ = fnv1a(flat);
}

std::vector<TokenId> Vocabulary::encode(const std::string& text) const {
    std::vector<TokenId> out;
    size_t pos = 0;
    while (pos < text.size()) {
        size_t try_len = std::min(max_token_len_, text.size() - pos);
        TokenId found = -1;
        for (size_t len = try_len; len >= 1; --len) {
            auto it = lookup_.find(text.substr(pos, len));
            if (it != lookup_.end()) {
                found = it->second;
                pos += len;
                break;
            }
        }
        if (found < 0) {
            throw std::invalid_argument("unencodable character at offset " +
                                        std::to_string(pos) + ": '" + text.substr(pos, 1) + "'");
        }
        out.push_back(found);
    }
    return out;
}

std::string Vocabulary::decode(const std::vector<TokenId>& ids) const {
    std::string out;
    for (TokenId id : ids) {
        if (id < 0 || id >= size()) throw std::invalid_argument("token id out of range");
        out += tokens_[static_cast<size_t>(id)];
    }
    return out;
}

}  // namespace dymo::model
