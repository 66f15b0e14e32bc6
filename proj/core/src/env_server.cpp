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
// Newline-delimited JSON over a TCP stream socket. One worker thread per
// connection; the LocalEnv inside serializes exec-category mutations.

#include "dymo/env_server.hpp"

#include <cerrno>
#include <cstring>
#include <stdexcept>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <nlohmann/json.hpp>

#include "dymo/util.hpp"

namespace dymo::env {

using nlohmann::json;

namespace {

bool send_all(int fd, const std::string& data) {
    size_t sent = 0;
    while (sent < data.size()) {
        ssize_t n = ::send(fd, data.data() + sent, data.size() - sent, MSG_NOSIGNAL);
        if (n <= 0) return false;
        sent += size_t(n);
    }
    return true;
}

}  // namespace

EnvServer::EnvServer(std::vector<dsl::PromptInstance> corpus, Options options)
    : options_(std::move(options)) {
    env_ = std::make_unique<LocalEnv>(std::move(corpus), options_.world_mode);
}

EnvServer::~EnvServer() { stop(); }

void EnvServer::start() {
    if (running_.load()) return;

    if (!options_.world_snapshot.empty()) {
        try {
            WorldState w = load_world(options_.world_snapshot);
            env_->restore_world(w);
        } catch (const json::exception& e) {
            throw std::runtime_error("corrupt world snapshot " + options_.world_snapshot + ": " +
                                     e.what());
        } catch (const std::runtime_error&) {
            // A missing snapshot file on first start is fine.
        }
    }
    if (!options_.run_log_path.empty()) {
        log_ = std::make_unique<RunLogWriter>(options_.run_log_path);
    }

    listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (listen_fd_ < 0) throw std::runtime_error("socket() failed");
    int one = 1;
    ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));

    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(uint16_t(options_.port));
    if (::inet_pton(AF_INET, options_.bind_host.c_str(), &addr.sin_addr) != 1) {
        throw std::runtime_error("bad bind host: " + options_.bind_host);
    }
    if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
        int err = errno;
        ::close(listen_fd_);
        listen_fd_ = -1;
        throw std::runtime_error("bind failed on " + options_.bind_host + ":" +
                                 std::to_string(options_.port) + ": " + std::strerror(err));
    }
    if (::listen(listen_fd_, 64) != 0) {
        ::close(listen_fd_);
        listen_fd_ = -1;
        throw std::runtime_error("listen failed");
    }
    socklen_t len = sizeof(addr);
    ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.sin_port);

    running_.store(true);
    accept_thread_ = std::thread([this]() { accept_loop(); });
}

void EnvServer::stop() {
    if (!running_.exchange(false)) return;
    if (listen_fd_ >= 0) {
        ::shutdown(listen_fd_, SHUT_RDWR);
        ::close(listen_fd_);
        listen_fd_ = -1;
    }
    if (accept_thread_.joinable()) accept_thread_.join();
    {
        // Unblock workers stuck in recv on live connections.
        std::lock_guard<std::mutex> lock(workers_mu_);
        for (int fd : client_fds_) ::shutdown(fd, SHUT_RDWR);
    }
    {
        std::lock_guard<std::mutex> lock(workers_mu_);
        for (auto& w : workers_) {
            if (w.joinable()) w.join();
        }
        workers_.clear();
        client_fds_.clear();
    }
    log_.reset();  // flush and close the run log
    if (!options_.world_snapshot.empty()) {
        save_world(options_.world_snapshot, env_->world_snapshot());
    }
}

void EnvServer::accept_loop() {
    while (running_.load()) {
        int client = ::accept(listen_fd_, nullptr, nullptr);
        if (client < 0) {
            if (!running_.load()) break;
            continue;
        }
        std::lock_guard<std::mutex> lock(workers_mu_);
        client_fds_.push_back(client);
        workers_.emplace_back([this, client]() { serve_connection(client); });
    }
}

void EnvServer::serve_connection(int client_fd) {
    int one = 1;
    ::setsockopt(client_fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
    std::string buffer;
    char chunk[4096];
    while (running_.load()) {
        ssize_t n = ::recv(client_fd, chunk, sizeof(chunk), 0);
        if (n <= 0) break;
        buffer.append(chunk, size_t(n));
        size_t nl;
        while ((nl = buffer.find('\n')) != std::string::npos) {
            std::string line = buffer.substr(0, nl);
            buffer.erase(0, nl + 1);
            if (line.empty()) continue;
            std::string reply = handle_line(line);
            if (!send_all(client_fd, reply + "\n")) {
                ::close(client_fd);
                return;
            }
        }
    }
    ::close(client_fd);
}

std::string EnvServer::handle_line(const std::string& line) {
    requests_.fetch_add(1);
    json req;
    try {
        req = json::parse(line);
    } catch (const json::exception&) {
        return json{{"error", "bad_request"}, {"detail", "malformed JSON"}}.dump();
    }
    if (!req.is_object()) {
        return json{{"error", "bad_request"}, {"detail", "expected a JSON object"}}.dump();
    }

    if (req.contains("health")) {
        return json{{"ok", true},
                    {"instances", env_->corpus().size()},
                    {"world_version", env_->world_snapshot().version}}
            .dump();
    }

    if (!req.contains("prompt_id") || !req.contains("completion") ||
        !req.at("prompt_id").is_string() || !req.at("completion").is_string()) {
        return json{{"error", "bad_request"},
                    {"detail", "need string fields prompt_id and completion"}}
            .dump();
    }

    const std::string prompt_id = req.at("prompt_id").get<std::string>();
    const std::string completion = req.at("completion").get<std::string>();
    const dsl::PromptInstance* inst = env_->find(prompt_id);
    if (inst == nullptr) {
        return json{{"error", "unknown_prompt"}}.dump();
    }

    ExecResult res = env_->execute_record(*inst, completion);
    if (log_) {
        RunLogRecord rec;
        rec.prompt_id = prompt_id;
        rec.prompt_text = dsl::render_model_prompt(*inst);
        rec.completion_text = completion;
        rec.state_text = res.state.text;
        rec.reward = res.reward;
        rec.world_version_before = res.version_before;
        rec.world_version_after = res.version_after;
        rec.timestamp = log_->next_timestamp();
        rec.seed = options_.log_seed;
        log_->append(rec);
    }
    return json{{"state", res.state.text}, {"reward", res.reward}}.dump();
}

// ---------------------------------------------------------------------------
// RemoteEnv
// ---------------------------------------------------------------------------

RemoteEnv::RemoteEnv(const std::string& host, int port) {
    fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd_ < 0) throw std::runtime_error("socket() failed");
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(uint16_t(port));
    if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
        ::close(fd_);
        fd_ = -1;
        throw std::runtime_error("bad host: " + host);
    }
    if (::connect(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
        int err = errno;
        ::close(fd_);
        fd_ = -1;
        throw std::runtime_error("cannot connect to " + host + ":" + std::to_string(port) +
                                 ": " + std::strerror(err));
    }
    int one = 1;
    ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
}

RemoteEnv::~RemoteEnv() {
    if (fd_ >= 0) ::close(fd_);
}

std::string RemoteEnv::round_trip(const std::string& request_line) {
    std::lock_guard<std::mutex> lock(mu_);
    std::string out = request_line + "\n";
    if (!send_all(fd_, out)) throw std::runtime_error("env server connection lost on send");
    char chunk[4096];
    for (;;) {
        size_t nl = buffer_.find('\n');
        if (nl != std::string::npos) {
            std::string line = buffer_.substr(0, nl);
            buffer_.erase(0, nl + 1);
            return line;
        }
        ssize_t n = ::recv(fd_, chunk, sizeof(chunk), 0);
        if (n <= 0) throw std::runtime_error("env server connection lost on recv");
        buffer_.append(chunk, size_t(n));
    }
}

EnvClient::Reply RemoteEnv::execute(const std::string& prompt_id, const std::string& completion) {
    calls_.fetch_add(1);
    json req = {{"prompt_id", prompt_id}, {"completion", completion}};
    json rep = json::parse(round_trip(req.dump()));
    if (rep.contains("error")) {
        throw std::runtime_error("env server error: " + rep.at("error").get<std::string>());
    }
    return Reply{rep.at("state").get<std::string>(), rep.at("reward").get<int>()};
}

}  // namespace dymo::env
