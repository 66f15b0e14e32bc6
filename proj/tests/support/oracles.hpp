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
// Test-only oracles, kept independent of the implementation paths they
// check: central finite differences for gradients and exhaustive subset
// enumeration for the trial estimators.

#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "dymo/model.hpp"
#include "dymo/rng.hpp"

namespace dymo::testing {

// Central finite difference of `value` along `dir` at theta, step eps.
inline double directional_fd(const model::Checkpoint& ckpt,
                             const std::function<double(const model::Checkpoint&)>& value,
                             const std::vector<double>& dir, double eps) {
    model::Checkpoint plus = ckpt;
    model::Checkpoint minus = ckpt;
    for (size_t i = 0; i < dir.size(); ++i) {
        plus.params[i] += eps * dir[i];
        minus.params[i] -= eps * dir[i];
    }
    return (value(plus) - value(minus)) / (2.0 * eps);
}

inline std::vector<double> random_unit_direction(size_t n, uint64_t seed) {
    Rng rng(seed);
    std::vector<double> d(n);
    double norm = 0;
    for (size_t i = 0; i < n; ++i) {
        // Box-Muller pairs; the direction only needs isotropy.
        double u1 = std::max(rng.uniform(), 1e-300);
        double u2 = rng.uniform();
        d[i] = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
        norm += d[i] * d[i];
    }
    norm = std::sqrt(norm);
    for (auto& v : d) v /= norm;
    return d;
}

// Relative error between the analytic directional derivative g.d and the
// central finite difference along d.
inline double grad_fd_rel_error(const model::Checkpoint& ckpt,
                                const std::function<double(const model::Checkpoint&)>& value,
                                const std::vector<double>& grad, uint64_t dir_seed,
                                double eps = 1e-4) {
    std::vector<double> d = random_unit_direction(grad.size(), dir_seed);
    double analytic = 0;
    for (size_t i = 0; i < grad.size(); ++i) analytic += grad[i] * d[i];
    double fd = directional_fd(ckpt, value, d, eps);
    double denom = std::max({1e-10, std::fabs(analytic), std::fabs(fd)});
    return std::fabs(analytic - fd) / denom;
}

// Exhaustive subset oracle for pass@k / pass^k: enumerate every k-subset of
// n trials in which exactly c pass, and count subsets with >= 1 success
// (pass@k) or all successes (pass^k).
struct SubsetOracle {
    double pass_at_k = 0;
    double pass_hat_k = 0;
};

inline SubsetOracle enumerate_subsets(int n, int c, int k) {
    std::vector<int> outcome(static_cast<size_t>(n), 0);
    for (int i = 0; i < c; ++i) outcome[static_cast<size_t>(i)] = 1;

    long total = 0, any_pass = 0, all_pass = 0;
    std::vector<int> idx(static_cast<size_t>(k));
    for (int i = 0; i < k; ++i) idx[static_cast<size_t>(i)] = i;
    for (;;) {
        ++total;
        int successes = 0;
        for (int i = 0; i < k; ++i) successes += outcome[static_cast<size_t>(idx[size_t(i)])];
        if (successes > 0) ++any_pass;
        if (successes == k) ++all_pass;

        int pos = k - 1;
        while (pos >= 0 && idx[size_t(pos)] == n - k + pos) --pos;
        if (pos < 0) break;
        ++idx[size_t(pos)];
        for (int i = pos + 1; i < k; ++i) idx[size_t(i)] = idx[size_t(i - 1)] + 1;
    }
    SubsetOracle o;
    o.pass_at_k = double(any_pass) / double(total);
    o.pass_hat_k = double(all_pass) / double(total);
    return o;
}

// 16-token test vocabulary: the 7 specials plus 9 single letters.
inline model::Vocabulary tiny_vocab() {
    return model::Vocabulary::from_tokens({"a", "b", "c", "d", "e", "f", "g", "h", "i"});
}

inline model::Arch tiny_arch(int vocab_size, int ctx_len = 32) {
    model::Arch a;
    a.vocab_size = vocab_size;
    a.d_model = 16;
    a.n_heads = 2;
    a.d_ff = 32;
    a.n_layers = 1;
    a.ctx_len = ctx_len;
    return a;
}

}  // namespace dymo::testing
