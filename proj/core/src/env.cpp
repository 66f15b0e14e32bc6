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

#include "dymo/env.hpp"

#include <algorithm>
#include <cstring>
#include <stdexcept>

#include <fcntl.h>
#include <unistd.h>

#include <nlohmann/json.hpp>

#include "dymo/util.hpp"

namespace dymo::env {

using nlohmann::json;

EnvState EnvState::from_text(const std::string& z) {
    EnvState s;
    s.text = z;
    if (z.rfind(kPassPrefix, 0) == 0) {
        s.outcome = Outcome::Pass;
        s.payload = z.substr(std::strlen(kPassPrefix));
    } else if (z.rfind(kErrorPrefix, 0) == 0) {
        s.outcome = Outcome::Error;
        s.payload = z.substr(std::strlen(kErrorPrefix));
    } else {
        throw std::invalid_argument("state text lacks a sentinel prefix: " + z.substr(0, 24));
    }
    return s;
}

int reward_of(const EnvState& state) { return state.outcome == Outcome::Pass ? 1 : 0; }

int reward_of_text(const std::string& z) {
    return z.rfind(kPassPrefix, 0) == 0 ? 1 : 0;
}

WorldState WorldState::initial() {
    WorldState w;
    w.store = dsl::base_world_store();
    w.version = 0;
    return w;
}

namespace {

json literal_to_value(const dsl::Literal& v) {
    if (std::holds_alternative<bool>(v)) return std::get<bool>(v);
    if (std::holds_alternative<int64_t>(v)) return std::get<int64_t>(v);
    return std::get<std::string>(v);
}

dsl::Literal literal_from_value(const json& j) {
    if (j.is_boolean()) return j.get<bool>();
    if (j.is_number_integer()) return j.get<int64_t>();
    return j.get<std::string>();
}

std::string error_state(const std::string& payload_json) {
    return std::string(kErrorPrefix) + payload_json;
}

std::string pass_state(const std::string& payload_json) {
    return std::string(kPassPrefix) + payload_json;
}

std::string parse_error_code(dsl::ParseErrorKind kind) {
    switch (kind) {
        case dsl::ParseErrorKind::Syntax: return "parse_error";
        case dsl::ParseErrorKind::UnknownTool: return "unknown_tool";
        case dsl::ParseErrorKind::DuplicateArg: return "duplicate_arg";
        case dsl::ParseErrorKind::BadLiteral: return "bad_literal";
    }
    return "parse_error";
}

// Echo of the accepted call in schema parameter order.
std::string args_object_json(const dsl::FunctionCall& call, const dsl::ToolSchema& schema) {
    std::string out = "{";
    bool first = true;
    for (const auto& p : schema.params) {
        auto it = call.args.find(p.name);
        if (it == call.args.end()) continue;
        if (!first) out += ", ";
        first = false;
        out += "\"" + p.name + "\": " + dsl::literal_to_json(it->second);
    }
    out += "}";
    return out;
}

// Single-digit derived value echoed in pass payloads; keeps the environment
// function deterministic but not constant.
int64_t derived_value(const dsl::FunctionCall& call) {
    int64_t ints = 0;
    int64_t len = 0;
    for (const auto& [name, v] : call.args) {
        if (std::holds_alternative<int64_t>(v)) {
            int64_t x = std::get<int64_t>(v);
            ints += x < 0 ? -x : x;
        } else if (std::holds_alternative<std::string>(v)) {
            len += static_cast<int64_t>(std::get<std::string>(v).size());
        }
    }
    return (7 * ints + 3 * len) % 10;
}

}  // namespace

ExecResult execute(const dsl::PromptInstance& inst, const std::string& completion,
                   WorldState& world) {
    ExecResult res;
    res.version_before = world.version;

    auto finish = [&](const std::string& state_text) {
        res.state = EnvState::from_text(state_text);
        res.reward = reward_of(res.state);
        res.version_after = world.version;
        return res;
    };

    dsl::ParseResult parsed = dsl::parse_completion(completion, inst.tools);

    if (std::holds_alternative<dsl::ParseError>(parsed)) {
        const auto& pe = std::get<dsl::ParseError>(parsed);
        return finish(error_state("{\"status\": 0, \"error\": \"" + parse_error_code(pe.kind) +
                                  "\", \"detail\": " + json(pe.reason).dump() +
                                  ", \"position\": " + std::to_string(pe.position) + "}"));
    }

    const bool expects_call = inst.key.expected_tool.has_value();

    if (std::holds_alternative<dsl::NoCall>(parsed)) {
        if (!expects_call) {
            return finish(pass_state("{\"status\": 1, \"no_call\": true}"));
        }
        return finish(error_state("{\"status\": 0, \"error\": \"no_call\"}"));
    }

    const auto& call = std::get<dsl::FunctionCall>(parsed);

    if (!expects_call) {
        return finish(
            error_state("{\"status\": 0, \"error\": \"unexpected_call\", \"tool\": \"" +
                        call.tool + "\"}"));
    }
    if (call.tool != *inst.key.expected_tool) {
        return finish(error_state("{\"status\": 0, \"error\": \"wrong_tool\", \"tool\": \"" +
                                  call.tool + "\"}"));
    }

    const dsl::ToolSchema* schema = dsl::find_tool(inst.tools, call.tool);
    // parse_completion guarantees registry membership.
    for (const auto& [name, value] : call.args) {
        if (schema->find_param(name) == nullptr) {
            return finish(error_state(
                "{\"status\": 0, \"error\": \"unknown_argument\", \"param\": \"" + name +
                "\"}"));
        }
    }
    for (const auto& p : schema->params) {
        if (p.required && call.args.count(p.name) == 0) {
            return finish(error_state(
                "{\"status\": 0, \"error\": \"missing_param\", \"param\": \"" + p.name + "\"}"));
        }
    }
    for (const auto& p : schema->params) {
        auto it = call.args.find(p.name);
        if (it == call.args.end()) continue;
        bool ok = dsl::literal_matches_kind(it->second, p.kind);
        if (ok) {
            auto allowed = inst.key.allowed_values.find(p.name);
            ok = allowed == inst.key.allowed_values.end() || allowed->second.count(it->second) > 0;
        }
        if (!ok) {
            return finish(error_state(
                "{\"status\": 0, \"error\": \"bad_value\", \"param\": \"" + p.name +
                "\", \"value\": " + dsl::literal_to_json(it->second) + "}"));
        }
    }

    if (inst.category == dsl::Category::Exec) {
        dsl::ExecEffect eff = dsl::exec_effect(call, world.store);
        if (!eff.ok) {
            return finish(error_state(
                "{\"status\": 0, \"error\": \"precondition_failed\", \"detail\": \"" +
                eff.fail_reason + "\"}"));
        }
        for (const auto& [key, value] : eff.writes) world.store[key] = value;
        world.version += 1;
        std::string digest = dsl::post_state_digest(eff.writes);
        if (!inst.key.expected_post_state || digest != *inst.key.expected_post_state) {
            return finish(error_state(
                "{\"status\": 0, \"error\": \"state_mismatch\", \"tool\": \"" + call.tool +
                "\"}"));
        }
    }

    std::string payload = "{\"status\": 1, \"data\": " + args_object_json(call, *schema) +
                          ", \"v\": " + std::to_string(derived_value(call)) + "}";
    return finish(pass_state(payload));
}

// ---------------------------------------------------------------------------
// World snapshots
// ---------------------------------------------------------------------------

void save_world(const std::string& path, const WorldState& world) {
    json store = json::object();
    for (const auto& [k, v] : world.store) store[k] = literal_to_value(v);
    json j = {{"store", store}, {"version", world.version}};
    write_file(path, j.dump(2) + "\n");
}

WorldState load_world(const std::string& path) {
    json j = json::parse(read_file(path));
    WorldState w;
    for (const auto& [k, v] : j.at("store").items()) w.store[k] = literal_from_value(v);
    w.version = j.at("version").get<uint64_t>();
    return w;
}

// ---------------------------------------------------------------------------
// Run logs and the sp dataset
// ---------------------------------------------------------------------------

std::string RunLogRecord::to_json() const {
    json j = {{"prompt_id", prompt_id},
              {"prompt_text", prompt_text},
              {"completion_text", completion_text},
              {"state_text", state_text},
              {"reward", reward},
              {"world_version_before", world_version_before},
              {"world_version_after", world_version_after},
              {"timestamp", timestamp},
              {"seed", seed}};
    return j.dump();
}

RunLogRecord RunLogRecord::from_json(const std::string& line) {
    json j = json::parse(line);
    RunLogRecord r;
    r.prompt_id = j.at("prompt_id").get<std::string>();
    r.prompt_text = j.at("prompt_text").get<std::string>();
    r.completion_text = j.at("completion_text").get<std::string>();
    r.state_text = j.at("state_text").get<std::string>();
    r.reward = j.at("reward").get<int>();
    r.world_version_before = j.at("world_version_before").get<uint64_t>();
    r.world_version_after = j.at("world_version_after").get<uint64_t>();
    r.timestamp = j.at("timestamp").get<uint64_t>();
    r.seed = j.at("seed").get<uint64_t>();
    return r;
}

std::string SpTriplet::to_json() const {
    json j = {{"prompt_id", prompt_id}, {"completion", completion}, {"state", state}};
    return j.dump();
}

SpTriplet SpTriplet::from_json(const std::string& line) {
    json j = json::parse(line);
    return SpTriplet{j.at("prompt_id").get<std::string>(), j.at("completion").get<std::string>(),
                     j.at("state").get<std::string>()};
}

std::vector<SpTriplet> build_sp_dataset(const std::vector<RunLogRecord>& logs,
                                        std::optional<double> pass_error_ratio) {
    if (logs.empty()) throw std::invalid_argument("build_sp_dataset: no run logs");

    // Later records win on identical (prompt, completion).
    std::map<std::pair<std::string, std::string>, const RunLogRecord*> latest;
    for (const auto& rec : logs) {
        auto key = std::make_pair(rec.prompt_id, rec.completion_text);
        auto it = latest.find(key);
        if (it == latest.end() || rec.timestamp >= it->second->timestamp) {
            latest[key] = &rec;
        }
    }

    struct Keyed {
        const RunLogRecord* rec;
        uint64_t completion_hash;
    };
    std::vector<Keyed> pass_side, error_side;
    for (const auto& [key, rec] : latest) {
        Keyed k{rec, fnv1a(rec->completion_text)};
        (rec->reward == 1 ? pass_side : error_side).push_back(k);
    }
    auto by_id_then_hash = [](const Keyed& a, const Keyed& b) {
        if (a.rec->prompt_id != b.rec->prompt_id) return a.rec->prompt_id < b.rec->prompt_id;
        return a.completion_hash < b.completion_hash;
    };
    std::sort(pass_side.begin(), pass_side.end(), by_id_then_hash);
    std::sort(error_side.begin(), error_side.end(), by_id_then_hash);

    if (pass_error_ratio) {
        // ratio = target pass:error. Keep the largest subsample satisfying it.
        double rho = *pass_error_ratio;
        if (rho <= 0) throw std::invalid_argument("pass_error_ratio must be > 0");
        size_t np = pass_side.size(), ne = error_side.size();
        size_t keep_p = std::min(np, static_cast<size_t>(static_cast<double>(ne) * rho));
        size_t keep_e = std::min(ne, static_cast<size_t>(static_cast<double>(np) / rho));
        pass_side.resize(keep_p);
        error_side.resize(keep_e);
    }

    std::vector<Keyed> all;
    all.reserve(pass_side.size() + error_side.size());
    all.insert(all.end(), pass_side.begin(), pass_side.end());
    all.insert(all.end(), error_side.begin(), error_side.end());
    std::sort(all.begin(), all.end(), by_id_then_hash);

    std::vector<SpTriplet> out;
    out.reserve(all.size());
    for (const auto& k : all) {
        out.push_back(SpTriplet{k.rec->prompt_id, k.rec->completion_text, k.rec->state_text});
    }
    return out;
}

void save_sp_dataset(const std::string& path, const std::vector<SpTriplet>& ds) {
    std::string out;
    for (const auto& t : ds) {
        out += t.to_json();
        out += "\n";
    }
    write_file(path, out);
}

std::vector<SpTriplet> load_sp_dataset(const std::string& path) {
    std::vector<SpTriplet> ds;
    for (const auto& line : read_lines(path)) {
        if (!line.empty()) ds.push_back(SpTriplet::from_json(line));
    }
    return ds;
}

// ---------------------------------------------------------------------------
// LocalEnv
// ---------------------------------------------------------------------------

LocalEnv::LocalEnv(std::vector<dsl::PromptInstance> corpus, WorldMode mode)
    : corpus_(std::move(corpus)), mode_(mode), world_(WorldState::initial()) {
    for (size_t i = 0; i < corpus_.size(); ++i) by_id_[corpus_[i].id] = i;
}

const dsl::PromptInstance* LocalEnv::find(const std::string& prompt_id) const {
    auto it = by_id_.find(prompt_id);
    return it == by_id_.end() ? nullptr : &corpus_[it->second];
}

ExecResult LocalEnv::execute_record(const dsl::PromptInstance& inst,
                                    const std::string& completion) {
    calls_.fetch_add(1);
    if (mode_ == WorldMode::Ephemeral) {
        WorldState fresh = WorldState::initial();
        return env::execute(inst, completion, fresh);
    }
    std::lock_guard<std::mutex> lock(mu_);
    return env::execute(inst, completion, world_);
}

EnvClient::Reply LocalEnv::execute(const std::string& prompt_id, const std::string& completion) {
    const dsl::PromptInstance* inst = find(prompt_id);
    if (inst == nullptr) throw std::invalid_argument("unknown prompt_id: " + prompt_id);
    ExecResult res = execute_record(*inst, completion);
    return Reply{res.state.text, res.reward};
}

WorldState LocalEnv::world_snapshot() const {
    std::lock_guard<std::mutex> lock(mu_);
    return world_;
}

void LocalEnv::restore_world(const WorldState& w) {
    std::lock_guard<std::mutex> lock(mu_);
    world_ = w;
}

// ---------------------------------------------------------------------------
// Run log writer
// ---------------------------------------------------------------------------

RunLogWriter::RunLogWriter(const std::string& path) {
    fd_ = ::open(path.c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
    if (fd_ < 0) throw std::runtime_error("cannot open run log for append: " + path);
}

RunLogWriter::~RunLogWriter() {
    if (fd_ >= 0) ::close(fd_);
}

void RunLogWriter::append(const RunLogRecord& rec) {
    std::string line = rec.to_json() + "\n";
    std::lock_guard<std::mutex> lock(mu_);
    // One write() per record; interrupted runs never leave torn lines behind
    // for readers of the O_APPEND stream.
    ssize_t n = ::write(fd_, line.data(), line.size());
    if (n != static_cast<ssize_t>(line.size())) {
        throw std::runtime_error("short write on run log");
    }
}

std::vector<RunLogRecord> load_run_log(const std::string& path) {
    std::vector<RunLogRecord> out;
    for (const auto& line : read_lines(path)) {
        if (!line.empty()) out.push_back(RunLogRecord::from_json(line));
    }
    return out;
}

}  // namespace dymo::env
