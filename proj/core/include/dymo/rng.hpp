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
#include <cstddef>

namespace dymo {

// splitmix64; used for seed derivation so that sub-streams are decorrelated.
inline uint64_t split_mix(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Derive an independent stream seed from (seed, salt...). Order-sensitive.
inline uint64_t derive_seed(uint64_t seed, uint64_t a) {
    return split_mix(split_mix(seed) ^ (0xd1b54a32d192ed03ULL * (a + 1)));
}
inline uint64_t derive_seed(uint64_t seed, uint64_t a, uint64_t b) {
    return derive_seed(derive_seed(seed, a), b);
}
inline uint64_t derive_seed(uint64_t seed, uint64_t a, uint64_t b, uint64_t c) {
    return derive_seed(derive_seed(seed, a, b), c);
}

// PCG32 (Melissa O'Neill's pcg32_oneseq). Self-contained so corpora and
// sampled sequences are identical across standard libraries and platforms.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(0) {
        state_ = split_mix(seed) + kIncrement;
        next_u32();
    }

    uint32_t next_u32() {
        uint64_t old = state_;
        state_ = old * 6364136223846793005ULL + kIncrement;
        uint32_t xorshifted = static_cast<uint32_t>(((old >> 18u) ^ old) >> 27u);
        uint32_t rot = static_cast<uint32_t>(old >> 59u);
        return (xorshifted >> rot) | (xorshifted << ((32u - rot) & 31u));
    }

    uint64_t next_u64() {
        uint64_t hi = next_u32();
        return (hi << 32) | next_u32();
    }

    // Unbiased integer in [0, bound). bound must be > 0.
    uint32_t below(uint32_t bound) {
        uint32_t threshold = (-bound) % bound;
        for (;;) {
            uint32_t r = next_u32();
            if (r >= threshold) return r % bound;
        }
    }

    // Integer in [lo, hi] inclusive.
    int64_t range(int64_t lo, int64_t hi) {
        return lo + static_cast<int64_t>(below(static_cast<uint32_t>(hi - lo + 1)));
    }

    // Uniform double in [0, 1) with 53 bits of randomness.
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    bool chance(double p) { return uniform() < p; }

private:
    static constexpr uint64_t kIncrement = 1442695040888963407ULL;
    uint64_t state_;
};

}  // namespace dymo
