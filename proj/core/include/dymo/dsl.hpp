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
// The miniature function-calling DSL: tool schemas, prompt/answer-key
// generation, the completion parser and the canonical call serializer.

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

namespace dymo::dsl {

// ---------------------------------------------------------------------------
// Literals
// ---------------------------------------------------------------------------

// Argument values are JSON scalars: strings, integers, booleans. The literal
// grammar is closed; no floats, nulls or nested containers.
using Literal = std::variant<std::string, int64_t, bool>;

enum class ParamKind { String, Integer, Boolean };

std::string literal_to_json(const Literal& v);
std::string param_kind_name(ParamKind k);
bool literal_matches_kind(const Literal& v, ParamKind k);

// ---------------------------------------------------------------------------
// Schemas and calls
// ---------------------------------------------------------------------------

struct ParamSpec {
    std::string name;
    ParamKind kind = ParamKind::String;
    bool required = false;
    std::optional<Literal> default_value;  // only meaningful when !required
};

struct ToolSchema {
    std::string name;  // matches [a-z][a-z0-9_.]*
    std::vector<ParamSpec> params;
    std::string description;

    const ParamSpec* find_param(const std::string& pname) const;
};

bool valid_tool_name(const std::string& name);

// A registry is the list of tools available to one prompt. Names are unique.
using Registry = std::vector<ToolSchema>;

const ToolSchema* find_tool(const Registry& reg, const std::string& name);

struct FunctionCall {
    std::string tool;
    // Ordered map keeps serialization canonical and round-trips stable.
    std::map<std::string, Literal> args;

    bool operator==(const FunctionCall& other) const = default;
};

// Canonical rendering: {"tool.name": {"arg": value, ...}} with args ordered
// as they appear in the schema (unknown args last, alphabetically). The
// parser accepts any arg order; serialize() is the inverse of parsing.
std::string serialize_call(const FunctionCall& call, const ToolSchema* schema = nullptr);

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

struct NoCall {
    bool operator==(const NoCall&) const = default;
};

enum class ParseErrorKind { Syntax, UnknownTool, DuplicateArg, BadLiteral };

struct ParseError {
    ParseErrorKind kind = ParseErrorKind::Syntax;
    std::size_t position = 0;  // byte offset into the completion text
    std::string reason;        // e.g. "unknown tool", "duplicate argument"

    bool operator==(const ParseError&) const = default;
};

using ParseResult = std::variant<FunctionCall, NoCall, ParseError>;

// Parses a model completion against a registry. A completion with no '{'
// anywhere is a NoCall (plain natural-language reply). Otherwise the text
// must contain exactly one well-formed call object naming a registered tool;
// anything else is a ParseError carrying position and reason.
ParseResult parse_completion(const std::string& text, const Registry& registry);

// ---------------------------------------------------------------------------
// Prompt instances
// ---------------------------------------------------------------------------

enum class Category { Relevance, Irrelevance, Ast, Exec };
enum class Split { Sft, RlTrain, RlVal };

std::string category_name(Category c);
std::string split_name(Split s);
Category category_from_name(const std::string& s);
Split split_from_name(const std::string& s);

struct AnswerKey {
    // Empty optional encodes the irrelevance case (no call expected).
    std::optional<std::string> expected_tool;
    std::map<std::string, std::set<Literal>> allowed_values;
    std::optional<std::string> expected_post_state;  // exec only: world digest
};

struct PromptInstance {
    std::string id;
    Category category = Category::Ast;
    std::string prompt_text;
    Registry tools;
    AnswerKey key;
    Split split = Split::Sft;
};

// The prompt string the policy model actually conditions on: available tool
// names followed by the user request. Keeping the tool list inside x is what
// makes the irrelevance category decidable from x alone.
std::string render_model_prompt(const PromptInstance& inst);

// ---------------------------------------------------------------------------
// Corpus generation
// ---------------------------------------------------------------------------

struct GeneratorConfig {
    // Instances per category for the SFT split.
    std::map<Category, int> sft_counts;
    // Instances per category for the RL splits combined; split into
    // rl_train/rl_val by rl_val_fraction with the min_rl_val floor.
    std::map<Category, int> rl_counts;
    double rl_val_fraction = 0.2;
    int min_rl_val = 20;
};

// Deterministic in (config, seed). Throws std::invalid_argument when a
// category's rl_val count cannot reach the floor.
std::vector<PromptInstance> generate_corpus(const GeneratorConfig& config, uint64_t seed);

// A completion string that the environment scores as pass for this instance.
// Irrelevance instances get a natural-language refusal with no call syntax.
std::string render_gold_completion(const PromptInstance& inst, uint64_t seed);

// A deliberately broken completion, used to source error-outcome run logs
// for the state-prediction dataset. variant selects the corruption family.
std::string render_corrupted_completion(const PromptInstance& inst, uint64_t seed);

// Corpus files: JSON Lines, one PromptInstance per line.
std::string instance_to_json(const PromptInstance& inst);
PromptInstance instance_from_json(const std::string& line);
void save_corpus(const std::string& path, const std::vector<PromptInstance>& corpus);
std::vector<PromptInstance> load_corpus(const std::string& path);

// The fixed initial world contents referenced by exec-category instances
// (account balances, stock levels, room bookings). Defined here because the
// generator computes expected post-state digests against it.
std::map<std::string, Literal> base_world_store();

// Effect of a stateful call on a world store. `writes` lists the keys the
// call sets together with their new values; empty `fail_reason` means the
// precondition held. Shared by the generator (digests against the base
// world) and the environment (live execution).
struct ExecEffect {
    bool ok = false;
    std::string fail_reason;  // "insufficient_funds", "out_of_stock", "slot_taken"
    std::vector<std::pair<std::string, Literal>> writes;
};

ExecEffect exec_effect(const FunctionCall& call, const std::map<std::string, Literal>& store);
bool is_stateful_tool(const std::string& tool_name);

// Digest of the post-execution values of the written keys; what AnswerKey
// stores in expected_post_state.
std::string post_state_digest(const std::vector<std::pair<std::string, Literal>>& writes);

}  // namespace dymo::dsl
