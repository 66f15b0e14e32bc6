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
// The oracle environment: executes completions against prompt instances,
// returns sentinel-prefixed state strings, assigns binary rewards, keeps
// the mutable world and the append-only run log.

#pragma once

#include <atomic>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "dymo/dsl.hpp"

namespace dymo::env {

inline constexpr const char* kPassPrefix = "<|pass|>";
inline constexpr const char* kErrorPrefix = "<|error|>";

enum class Outcome { Pass, Error };

struct EnvState {
    std::string text;     // full z, sentinel prefix included
    Outcome outcome = Outcome::Error;
    std::string payload;  // text after the sentinel

    static EnvState from_text(const std::string& z);
};

int reward_of(const EnvState& state);
// Reward from a raw state string; 1 iff it starts with the pass sentinel.
int reward_of_text(const std::string& z);

struct WorldState {
    std::map<std::string, dsl::Literal> store;
    uint64_t version = 0;

    static WorldState initial();  // the fixed base world from dsl
};

// World snapshots: JSON file with store + version.
void save_world(const std::string& path, const WorldState& world);
WorldState load_world(const std::string& path);

struct ExecResult {
    EnvState state;
    int reward = 0;
    uint64_t version_before = 0;
    uint64_t version_after = 0;
};

// Executes one completion. Every malformed completion maps to an
// error-outcome state; this never throws on bad model output. Check order:
// parse, call presence / tool name, required params, value membership,
// post-state digest. Only exec-category instances may mutate the world.
ExecResult execute(const dsl::PromptInstance& inst, const std::string& completion,
                   WorldState& world);

struct RunLogRecord {
    std::string prompt_id;
    std::string prompt_text;
    std::string completion_text;
    std::string state_text;
    int reward = 0;
    uint64_t world_version_before = 0;
    uint64_t world_version_after = 0;
    uint64_t timestamp = 0;  // logical, monotone per log; keeps replays byte-identical
    uint64_t seed = 0;

    std::string to_json() const;
    static RunLogRecord from_json(const std::string& line);
};

struct SpTriplet {
    std::string prompt_id;
    std::string completion;
    std::string state;

    std::string to_json() const;
    static SpTriplet from_json(const std::string& line);
};

// Builds the state-prediction dataset from run logs: deduplicates identical
// (prompt_id, completion) pairs keeping the latest record, optionally
// subsamples to a pass:error ratio, and emits a deterministic order (sorted
// by prompt_id then completion hash). Throws std::invalid_argument on empty
// input.
std::vector<SpTriplet> build_sp_dataset(const std::vector<RunLogRecord>& logs,
                                        std::optional<double> pass_error_ratio);

void save_sp_dataset(const std::string& path, const std::vector<SpTriplet>& ds);
std::vector<SpTriplet> load_sp_dataset(const std::string& path);

// ---------------------------------------------------------------------------
// Client interface
// ---------------------------------------------------------------------------

// How executions see the world. Persistent: one world shared across requests
// (the serverised default; exec mutations accumulate). Ephemeral: each
// request runs against a fresh copy of the initial world, which is what
// evaluation rollouts and the in-process training loop want.
enum class WorldMode { Persistent, Ephemeral };

// The surface both the trainer and SVS baselines talk to. Implementations
// count calls so the SVS oracle-free contract is assertable.
class EnvClient {
public:
    virtual ~EnvClient() = default;

    struct Reply {
        std::string state;
        int reward = 0;
    };

    virtual Reply execute(const std::string& prompt_id, const std::string& completion) = 0;
    virtual uint64_t calls() const = 0;
};

// In-process oracle over a loaded corpus. Thread-safe; exec-category
// mutations serialize through one writer lock.
class LocalEnv : public EnvClient {
public:
    LocalEnv(std::vector<dsl::PromptInstance> corpus, WorldMode mode);

    Reply execute(const std::string& prompt_id, const std::string& completion) override;
    uint64_t calls() const override { return calls_.load(); }

    // Full-record execution used by the server and run-log writers.
    ExecResult execute_record(const dsl::PromptInstance& inst, const std::string& completion);

    const dsl::PromptInstance* find(const std::string& prompt_id) const;
    const std::vector<dsl::PromptInstance>& corpus() const { return corpus_; }
    WorldState world_snapshot() const;
    void restore_world(const WorldState& w);

private:
    std::vector<dsl::PromptInstance> corpus_;
    std::map<std::string, std::size_t> by_id_;
    WorldMode mode_;
    WorldState world_;
    mutable std::mutex mu_;
    std::atomic<uint64_t> calls_{0};
};

// Blocking client for the newline-delimited JSON wire protocol.
class RemoteEnv : public EnvClient {
public:
    RemoteEnv(const std::string& host, int port);
    ~RemoteEnv() override;

    Reply execute(const std::string& prompt_id, const std::string& completion) override;
    uint64_t calls() const override { return calls_.load(); }

    // Raw request/reply round trip (one JSON line each way).
    std::string round_trip(const std::string& request_line);

private:
    int fd_ = -1;
    std::string buffer_;
    std::mutex mu_;
    std::atomic<uint64_t> calls_{0};
};

// Append-only JSONL run log with atomic per-record appends.
class RunLogWriter {
public:
    explicit RunLogWriter(const std::string& path);
    ~RunLogWriter();

    void append(const RunLogRecord& rec);
    uint64_t next_timestamp() { return timestamp_.fetch_add(1); }

private:
    int fd_ = -1;
    std::mutex mu_;
    std::atomic<uint64_t> timestamp_{0};
};

std::vector<RunLogRecord> load_run_log(const std::string& path);

}  // namespace dymo::env
