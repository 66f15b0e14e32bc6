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

#include "dymo/manifest.hpp"

#include <ctime>

#include <nlohmann/json.hpp>

#include "dymo/util.hpp"

namespace dymo {

using nlohmann::json;

namespace {
constexpr const char* kLibraryVersion = "dymolab-core 0.1.0";
}

std::string code_version_string() {
    return sha256_hex(kLibraryVersion).substr(0, 12);
}

std::string RunManifest::to_json() const {
    json j = {{"run_id", run_id},
              {"command", command},
              {"config_snapshot", config_snapshot},
              {"seed", seed},
              {"input_hashes", input_hashes},
              {"output_hashes", output_hashes},
              {"outputs", outputs},
              {"code_version", code_version},
              {"created_at", created_at}};
    return j.dump(2) + "\n";
}

RunManifest RunManifest::from_json(const std::string& text) {
    json j = json::parse(text);
    RunManifest m;
    m.run_id = j.at("run_id").get<std::string>();
    m.command = j.at("command").get<std::string>();
    m.config_snapshot = j.at("config_snapshot").get<std::string>();
    m.seed = j.at("seed").get<uint64_t>();
    m.input_hashes = j.at("input_hashes").get<std::map<std::string, std::string>>();
    m.output_hashes = j.at("output_hashes").get<std::map<std::string, std::string>>();
    m.outputs = j.at("outputs").get<std::vector<std::string>>();
    m.code_version = j.at("code_version").get<std::string>();
    m.created_at = j.value("created_at", "");
    return m;
}

void RunManifest::save(const std::string& path) const { write_file(path, to_json()); }

RunManifest RunManifest::load(const std::string& path) { return from_json(read_file(path)); }

std::string check_artifact_hash(const std::string& path, const std::string& expected) {
    std::string actual;
    try {
        actual = sha256_file_hex(path);
    } catch (const std::exception& e) {
        return std::string("cannot hash ") + path + ": " + e.what();
    }
    if (actual == expected) return "";
    return "artifact hash mismatch for " + path + "\n  expected: " + expected +
           "\n  actual:   " + actual;
}

}  // namespace dymo
