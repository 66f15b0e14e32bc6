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

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "dymo/model.hpp"

namespace dymo::model {

namespace {

constexpr char kMagic[8] = {'D', 'Y', 'M', 'O', 'C', 'K', 'P', '1'};

template <typename T>
void put(std::string& out, T v) {
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out.append(buf, sizeof(T));
}

template <typename T>
T take(const std::string& in, size_t& pos) {
    if (pos + sizeof(T) > in.size()) throw std::runtime_error("truncated checkpoint file");
    T v;
    std::memcpy(&v, in.data() + pos, sizeof(T));
    pos += sizeof(T);
    return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    std::string out;
    out.reserve(64 + ckpt.params.size() * sizeof(double));
    out.append(kMagic, sizeof(kMagic));
    put<uint32_t>(out, static_cast<uint32_t>(ckpt.arch.vocab_size));
    put<uint32_t>(out, static_cast<uint32_t>(ckpt.arch.d_model));
    put<uint32_t>(out, static_cast<uint32_t>(ckpt.arch.n_heads));
    put<uint32_t>(out, static_cast<uint32_t>(ckpt.arch.d_ff));
    put<uint32_t>(out, static_cast<uint32_t>(ckpt.arch.n_layers));
    put<uint32_t>(out, static_cast<uint32_t>(ckpt.arch.ctx_len));
    put<uint64_t>(out, ckpt.vocab_hash);
    put<uint64_t>(out, ckpt.step);
    put<uint64_t>(out, static_cast<uint64_t>(ckpt.params.size()));
    for (double p : ckpt.params) put<double>(out, p);

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write checkpoint: " + path);
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw std::runtime_error("short write on checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path, uint64_t expected_vocab_hash) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open checkpoint: " + path);
    std::string in((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

    size_t pos = 0;
    if (in.size() < sizeof(kMagic) || std::memcmp(in.data(), kMagic, sizeof(kMagic)) != 0) {
        throw std::runtime_error("not a checkpoint file: " + path);
    }
    pos = sizeof(kMagic);

    Checkpoint ckpt;
    ckpt.arch.vocab_size = static_cast<int>(take<uint32_t>(in, pos));
    ckpt.arch.d_model = static_cast<int>(take<uint32_t>(in, pos));
    ckpt.arch.n_heads = static_cast<int>(take<uint32_t>(in, pos));
    ckpt.arch.d_ff = static_cast<int>(take<uint32_t>(in, pos));
    ckpt.arch.n_layers = static_cast<int>(take<uint32_t>(in, pos));
    ckpt.arch.ctx_len = static_cast<int>(take<uint32_t>(in, pos));
    ckpt.vocab_hash = take<uint64_t>(in, pos);
    ckpt.step = take<uint64_t>(in, pos);
    uint64_t n = take<uint64_t>(in, pos);

    if (ckpt.vocab_hash != expected_vocab_hash) {
        throw std::runtime_error("checkpoint vocabulary hash mismatch in " + path);
    }
    if (static_cast<int64_t>(n) != ckpt.arch.param_count()) {
        throw std::runtime_error("checkpoint parameter count does not match arch in " + path);
    }
    ckpt.params.resize(n);
    for (uint64_t i = 0; i < n; ++i) {
        double v = take<double>(in, pos);
        if (!std::isfinite(v)) throw std::runtime_error("non-finite parameter in " + path);
        ckpt.params[i] = v;
    }
    return ckpt;
}

}  // namespace dymo::model
