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
#include <map>
#include <string>
#include <vector>

namespace dymo {

// Per-run provenance: the config snapshot, seeds, input artifact hashes and
// every output path a subcommand wrote. Re-running a stage with an identical
// manifest reproduces identical outputs.
struct RunManifest {
    std::string run_id;
    std::string command;
    std::string config_snapshot;
    uint64_t seed = 0;
    std::map<std::string, std::string> input_hashes;   // path -> sha256
    std::map<std::string, std::string> output_hashes;  // path -> sha256
    std::vector<std::string> outputs;                  // declared output paths
    std::string code_version;
    std::string created_at;  // wall-clock, informational only

    std::string to_json() const;
    static RunManifest from_json(const std::string& text);

    void save(const std::string& path) const;
    static RunManifest load(const std::string& path);
};

// Short content hash of the library version string; stamped into manifests.
std::string code_version_string();

// Verifies that `path` hashes to `expected`; returns a human-readable diff
// summary on mismatch, empty string on match.
std::string check_artifact_hash(const std::string& path, const std::string& expected);

}  // namespace dymo
