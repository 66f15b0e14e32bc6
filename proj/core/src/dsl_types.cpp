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

#include <algorithm>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "dymo/dsl.hpp"

namespace dymo::dsl {

using nlohmann::json;

std::string literal_to_json(const Literal& v) {
    if (std::holds_alternative<bool>(v)) return std::get<bool>(v) ? "true" : "false";
    if (std::holds_alternative<int64_t>(v)) return std::to_string(std::get<int64_t>(v));
    return json(std::get<std::string>(v)).dump();
}

std::string param_kind_name(ParamKind k) {
    switch (k) {
        case ParamKind::String: return "string";
        case ParamKind::Integer: return "integer";
        case ParamKind::Boolean: return "boolean";
    }
    return "string";
}

bool literal_matches_kind(const Literal& v, ParamKind k) {
    switch (k) {
        case ParamKind::String: return std::holds_alternative<std::string>(v);
        case ParamKind::Integer: return std::holds_alternative<int64_t>(v);
        case ParamKind::Boolean: return std::holds_alternative<bool>(v);
    }
    return false;
}

const ParamSpec* ToolSchema::find_param(const std::string& pname) const {
    for (const auto& p : params) {
        if (p.name == pname) return &p;
    }
    return nullptr;
}

bool valid_tool_name(const std::string& name) {
    if (name.empty()) return false;
    if (name.front() < 'a' || name.front() > 'z') return false;
    return std::all_of(name.begin(), name.end(), [](char c) {
        return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_' || c == '.';
    });
}

const ToolSchema* find_tool(const Registry& reg, const std::string& name) {
    for (const auto& t : reg) {
        if (t.name == name) return &t;
    }
    return nullptr;
}

std::string serialize_call(const FunctionCall& call, const ToolSchema* schema) {
    // Schema param order first, then any remaining args in map order.
    std::vector<std::pair<std::string, const Literal*>> ordered;
    if (schema != nullptr) {
        for (const auto& p : schema->params) {
            auto it = call.args.find(p.name);
            if (it != call.args.end()) ordered.emplace_back(it->first, &it->second);
        }
    }
    for (const auto& [name, value] : call.args) {
        bool seen = std::any_of(ordered.begin(), ordered.end(),
                                [&](const auto& kv) { return kv.first == name; });
        if (!seen) ordered.emplace_back(name, &value);
    }

    std::string out = "{\"" + call.tool + "\": {";
    bool first = true;
    for (const auto& [name, value] : ordered) {
        if (!first) out += ", ";
        first = false;
        out += "\"" + name + "\": " + literal_to_json(*value);
    }
    out += "}}";
    return out;
}

std::string category_name(Category c) {
    switch (c) {
        case Category::Relevance: return "relevance";
        case Category::Irrelevance: return "irrelevance";
        case Category::Ast: return "ast";
        case Category::Exec: return "exec";
    }
    return "ast";
}

std::string split_name(Split s) {
    switch (s) {
        case Split::Sft: return "sft";
        case Split::RlTrain: return "rl_train";
        case Split::RlVal: return "rl_val";
    }
    return "sft";
}

Category category_from_name(const std::string& s) {
    if (s == "relevance") return Category::Relevance;
    if (s == "irrelevance") return Category::Irrelevance;
    if (s == "ast") return Category::Ast;
    if (s == "exec") return Category::Exec;
    throw std::invalid_argument("unknown category: " + s);
}

Split split_from_name(const std::string& s) {
    if (s == "sft") return Split::Sft;
    if (s == "rl_train") return Split::RlTrain;
    if (s == "rl_val") return Split::RlVal;
    throw std::invalid_argument("unknown split: " + s);
}

std::string render_model_prompt(const PromptInstance& inst) {
    std::string out = "tools:";
    for (const auto& t : inst.tools) {
        out += " ";
        out += t.name;
    }
    out += " | ";
    out += inst.prompt_text;
    return out;
}

// --------------------------------------------------------------------------
// JSONL serialization
// --------------------------------------------------------------------------

namespace {

json literal_to_value(const Literal& v) {
    if (std::holds_alternative<bool>(v)) return std::get<bool>(v);
    if (std::holds_alternative<int64_t>(v)) return std::get<int64_t>(v);
    return std::get<std::string>(v);
}

Literal literal_from_value(const json& j) {
    if (j.is_boolean()) return j.get<bool>();
    if (j.is_number_integer()) return j.get<int64_t>();
    if (j.is_string()) return j.get<std::string>();
    throw std::invalid_argument("literal must be string, integer or boolean");
}

json schema_to_value(const ToolSchema& t) {
    json params = json::array();
    for (const auto& p : t.params) {
        json pj = {{"name", p.name}, {"kind", param_kind_name(p.kind)}, {"required", p.required}};
        if (p.default_value) pj["default"] = literal_to_value(*p.default_value);
        params.push_back(pj);
    }
    return json{{"name", t.name}, {"params", params}, {"description", t.description}};
}

ToolSchema schema_from_value(const json& j) {
    ToolSchema t;
    t.name = j.at("name").get<std::string>();
    t.description = j.value("description", "");
    for (const auto& pj : j.at("params")) {
        ParamSpec p;
        p.name = pj.at("name").get<std::string>();
        const std::string kind = pj.at("kind").get<std::string>();
        if (kind == "string") p.kind = ParamKind::String;
        else if (kind == "integer") p.kind = ParamKind::Integer;
        else if (kind == "boolean") p.kind = ParamKind::Boolean;
        else throw std::invalid_argument("unknown param kind: " + kind);
        p.required = pj.at("required").get<bool>();
        if (pj.contains("default")) p.default_value = literal_from_value(pj.at("default"));
        t.params.push_back(std::move(p));
    }
    return t;
}

}  // namespace

std::string instance_to_json(const PromptInstance& inst) {
    json tools = json::array();
    for (const auto& t : inst.tools) tools.push_back(schema_to_value(t));

    json allowed = json::object();
    for (const auto& [pname, values] : inst.key.allowed_values) {
        json arr = json::array();
        for (const auto& v : values) arr.push_back(literal_to_value(v));
        allowed[pname] = arr;
    }
    json key = json::object();
    key["expected_tool"] = inst.key.expected_tool ? json(*inst.key.expected_tool) : json(nullptr);
    key["allowed_values"] = allowed;
    if (inst.key.expected_post_state) key["expected_post_state"] = *inst.key.expected_post_state;

    json j = {{"id", inst.id},
              {"category", category_name(inst.category)},
              {"prompt_text", inst.prompt_text},
              {"tools", tools},
              {"key", key},
              {"split", split_name(inst.split)}};
    return j.dump();
}

PromptInstance instance_from_json(const std::string& line) {
    json j = json::parse(line);
    PromptInstance inst;
    inst.id = j.at("id").get<std::string>();
    inst.category = category_from_name(j.at("category").get<std::string>());
    inst.prompt_text = j.at("prompt_text").get<std::string>();
    for (const auto& tj : j.at("tools")) inst.tools.push_back(schema_from_value(tj));
    const json& key = j.at("key");
    if (!key.at("expected_tool").is_null()) {
        inst.key.expected_tool = key.at("expected_tool").get<std::string>();
    }
    for (const auto& [pname, arr] : key.at("allowed_values").items()) {
        std::set<Literal> values;
        for (const auto& v : arr) values.insert(literal_from_value(v));
        inst.key.allowed_values[pname] = std::move(values);
    }
    if (key.contains("expected_post_state")) {
        inst.key.expected_post_state = key.at("expected_post_state").get<std::string>();
    }
    inst.split = split_from_name(j.at("split").get<std::string>());
    return inst;
}

}  // namespace dymo::dsl
