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

#include "dymo/config.hpp"

#include <algorithm>
#include <cctype>

#include "dymo/util.hpp"

namespace dymo {

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

}  // namespace

Config Config::parse_file(const std::string& path) {
    return parse_string(read_file(path), path);
}

Config Config::parse_string(const std::string& text, const std::string& origin) {
    Config c;
    c.origin_ = origin;
    int line_no = 0;
    size_t start = 0;
    while (start <= text.size()) {
        size_t nl = text.find('\n', start);
        std::string line =
            nl == std::string::npos ? text.substr(start) : text.substr(start, nl - start);
        ++line_no;
        start = nl == std::string::npos ? text.size() + 1 : nl + 1;

        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        size_t eq = t.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(origin + ":" + std::to_string(line_no) +
                              ": expected 'key = value', got: " + t);
        }
        std::string key = trim(t.substr(0, eq));
        std::string value = trim(t.substr(eq + 1));
        if (key.empty()) {
            throw ConfigError(origin + ":" + std::to_string(line_no) + ": empty key");
        }
        c.values_[key] = value;
        c.lines_[key] = line_no;
    }
    return c;
}

bool Config::has(const std::string& key) const { return values_.count(key) != 0; }

void Config::fail(const std::string& key, const std::string& what) const {
    auto it = lines_.find(key);
    std::string where = origin_;
    if (it != lines_.end()) where += ":" + std::to_string(it->second);
    throw ConfigError(where + ": config key '" + key + "' " + what);
}

std::string Config::get_str(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) fail(key, "is required but missing");
    return it->second;
}

std::string Config::get_str_or(const std::string& key, const std::string& def) const {
    auto it = values_.find(key);
    return it == values_.end() ? def : it->second;
}

int64_t Config::get_int(const std::string& key) const {
    std::string v = get_str(key);
    try {
        size_t used = 0;
        int64_t out = std::stoll(v, &used);
        if (used != v.size()) throw std::invalid_argument("trailing");
        return out;
    } catch (const std::exception&) {
        fail(key, "must be an integer, got '" + v + "'");
    }
    return 0;
}

int64_t Config::get_int_or(const std::string& key, int64_t def) const {
    return has(key) ? get_int(key) : def;
}

double Config::get_double(const std::string& key) const {
    std::string v = get_str(key);
    try {
        size_t used = 0;
        double out = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument("trailing");
        return out;
    } catch (const std::exception&) {
        fail(key, "must be a number, got '" + v + "'");
    }
    return 0;
}

double Config::get_double_or(const std::string& key, double def) const {
    return has(key) ? get_double(key) : def;
}

bool Config::get_bool_or(const std::string& key, bool def) const {
    if (!has(key)) return def;
    std::string v = get_str(key);
    std::transform(v.begin(), v.end(), v.begin(),
                   [](unsigned char ch) { return char(std::tolower(ch)); });
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    fail(key, "must be a boolean, got '" + v + "'");
    return def;
}

std::vector<int> Config::get_int_list_or(const std::string& key,
                                         const std::vector<int>& def) const {
    if (!has(key)) return def;
    std::string v = get_str(key);
    std::vector<int> out;
    size_t start = 0;
    while (start < v.size()) {
        size_t comma = v.find(',', start);
        std::string item =
            trim(comma == std::string::npos ? v.substr(start) : v.substr(start, comma - start));
        if (!item.empty()) {
            try {
                out.push_back(std::stoi(item));
            } catch (const std::exception&) {
                fail(key, "must be a comma-separated integer list, got '" + v + "'");
            }
        }
        start = comma == std::string::npos ? v.size() : comma + 1;
    }
    if (out.empty()) fail(key, "must contain at least one integer");
    return out;
}

void Config::set(const std::string& key, const std::string& value) { values_[key] = value; }

std::string Config::snapshot() const {
    std::string out;
    for (const auto& [k, v] : values_) {
        out += k;
        out += " = ";
        out += v;
        out += "\n";
    }
    return out;
}

}  // namespace dymo
