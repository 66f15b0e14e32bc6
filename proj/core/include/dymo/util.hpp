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
#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace dymo {

// FNV-1a, used for cheap content digests (vocab hash, world digests).
inline uint64_t fnv1a(std::string_view s, uint64_t h = 0xcbf29ce484222325ULL) {
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex_u64(uint64_t v);

// SHA-256 of a byte string, lowercase hex. Used for manifest artifact hashes.
std::string sha256_hex(std::string_view data);
std::string sha256_file_hex(const std::string& path);

// Whole-file IO. Throws std::runtime_error on failure.
std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view content);

// Splits a file into lines, dropping a trailing empty line.
std::vector<std::string> read_lines(const std::string& path);

// Deterministic parallel map: applies fn(i) for i in [0, n) on up to
// `threads` workers and returns nothing; fn must write only to slot i of
// caller-owned storage. Falls back to a serial loop for small n.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn,
                  unsigned threads = 0);

// Formats a double with enough digits to round-trip (used by CSV writers).
std::string fmt_double(double v);

}  // namespace dymo
