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
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace dymo {

// key = value configuration with '#' comments. One file drives every
// pipeline stage; lookups remember the source line so validation errors can
// point at it.
class Config {
public:
    static Config parse_file(const std::string& path);
    static Config parse_string(const std::string& text, const std::string& origin = "<string>");

    bool has(const std::string& key) const;

    // Typed getters; the _or forms supply defaults, the plain forms throw
    // ConfigError naming the key (and line, when present in the file).
    std::string get_str(const std::string& key) const;
    std::string get_str_or(const std::string& key, const std::string& def) const;
    int64_t get_int(const std::string& key) const;
    int64_t get_int_or(const std::string& key, int64_t def) const;
    double get_double(const std::string& key) const;
    double get_double_or(const std::string& key, double def) const;
    bool get_bool_or(const std::string& key, bool def) const;
    std::vector<int> get_int_list_or(const std::string& key, const std::vector<int>& def) const;

    // CLI overrides: "key=value".
    void set(const std::string& key, const std::string& value);

    // Canonical text (sorted keys); what the manifest snapshots.
    std::string snapshot() const;

    const std::map<std::string, std::string>& entries() const { return values_; }

private:
    [[noreturn]] void fail(const std::string& key, const std::string& what) const;

    std::map<std::string, std::string> values_;
    std::map<std::string, int> lines_;
    std::string origin_;
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace dymo
