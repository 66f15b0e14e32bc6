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

#include <atomic>
#include <cstdint>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include "dymo/env.hpp"

namespace dymo::env {

// Serves the oracle over newline-delimited JSON on a TCP socket.
//
//   {"prompt_id": "...", "completion": "..."}  -> {"state": "...", "reward": 0|1}
//   {"health": true}                           -> {"ok": true, "instances": N, "world_version": V}
//   unknown prompt_id                          -> {"error": "unknown_prompt"}
//   malformed JSON / missing fields            -> {"error": "bad_request", ...}, connection stays open
//
// Exec-category mutations are applied in request-arrival order; replies carry
// the state the mutation produced.
class EnvServer {
public:
    struct Options {
        std::string bind_host = "127.0.0.1";
        int port = 0;  // 0 picks a free port
        WorldMode world_mode = WorldMode::Persistent;
        std::string run_log_path;     // empty disables logging
        std::string world_snapshot;   // loaded at start when present, saved on stop
        uint64_t log_seed = 0;
    };

    EnvServer(std::vector<dsl::PromptInstance> corpus, Options options);
    ~EnvServer();

    // Binds and starts the accept loop. Throws std::runtime_error on bind
    // failure or a corrupt world snapshot.
    void start();
    // Stops accepting, drains connections, flushes logs, saves the snapshot.
    void stop();

    int port() const { return port_; }
    uint64_t requests_served() const { return requests_.load(); }

private:
    void accept_loop();
    void serve_connection(int client_fd);
    std::string handle_line(const std::string& line);

    std::unique_ptr<LocalEnv> env_;
    Options options_;
    std::unique_ptr<RunLogWriter> log_;
    int listen_fd_ = -1;
    int port_ = 0;
    std::thread accept_thread_;
    std::vector<std::thread> workers_;
    std::vector<int> client_fds_;
    std::mutex workers_mu_;
    std::atomic<bool> running_{false};
    std::atomic<uint64_t> requests_{0};
};

}  // namespace dymo::env
