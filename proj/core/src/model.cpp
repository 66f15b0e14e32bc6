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
// Pre-norm causal-attention network in double precision with hand-written
// reverse-mode gradients. Layout: token + learned position embeddings,
// n_layers of [LN -> multi-head attention -> residual, LN -> GELU MLP ->
// residual], final LN, untied output head. Output logits are evaluated only
// at target positions.

#include "dymo/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>

#include "dymo/rng.hpp"

namespace dymo::model {

namespace {

constexpr double kLnEps = 1e-5;
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;

struct LayerOffsets {
    int64_t ln1_g, ln1_b, wq, bq, wk, bk, wv, bv, wo, bo;
    int64_t ln2_g, ln2_b, w1, b1, w2, b2;
};

struct Layout {
    int64_t tok_emb = 0, pos_emb = 0;
    std::vector<LayerOffsets> layers;
    int64_t lnf_g = 0, lnf_b = 0, w_out = 0, b_out = 0;
    int64_t total = 0;
};

Layout make_layout(const Arch& a) {
    Layout L;
    const int64_t D = a.d_model, F = a.d_ff, V = a.vocab_size;
    int64_t off = 0;
    auto take = [&](int64_t n) {
        int64_t at = off;
        off += n;
        return at;
    };
    L.tok_emb = take(V * D);
    L.pos_emb = take(int64_t(a.ctx_len) * D);
    for (int l = 0; l < a.n_layers; ++l) {
        LayerOffsets lo;
        lo.ln1_g = take(D);
        lo.ln1_b = take(D);
        lo.wq = take(D * D);
        lo.bq = take(D);
        lo.wk = take(D * D);
        lo.bk = take(D);
        lo.wv = take(D * D);
        lo.bv = take(D);
        lo.wo = take(D * D);
        lo.bo = take(D);
        lo.ln2_g = take(D);
        lo.ln2_b = take(D);
        lo.w1 = take(D * F);
        lo.b1 = take(F);
        lo.w2 = take(F * D);
        lo.b2 = take(D);
        L.layers.push_back(lo);
    }
    L.lnf_g = take(D);
    L.lnf_b = take(D);
    L.w_out = take(D * V);
    L.b_out = take(V);
    L.total = off;
    return L;
}

inline double gelu(double x) {
    double inner = kGeluC * (x + kGeluA * x * x * x);
    return 0.5 * x * (1.0 + std::tanh(inner));
}

inline double gelu_grad(double x) {
    double inner = kGeluC * (x + kGeluA * x * x * x);
    double t = std::tanh(inner);
    double dinner = kGeluC * (1.0 + 3.0 * kGeluA * x * x);
    return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * dinner;
}

// y = g * (x - mu)/sqrt(var + eps) + b. Stores xhat and rstd for backward.
void layernorm_fwd(const double* x, const double* g, const double* b, int D, double* xhat,
                   double* rstd_out, double* y) {
    double mu = 0;
    for (int i = 0; i < D; ++i) mu += x[i];
    mu /= D;
    double var = 0;
    for (int i = 0; i < D; ++i) {
        double d = x[i] - mu;
        var += d * d;
    }
    var /= D;
    double rstd = 1.0 / std::sqrt(var + kLnEps);
    *rstd_out = rstd;
    for (int i = 0; i < D; ++i) {
        xhat[i] = (x[i] - mu) * rstd;
        y[i] = g[i] * xhat[i] + b[i];
    }
}

// dx from dy given the stored xhat/rstd; accumulates dg/db.
void layernorm_bwd(const double* dy, const double* g, const double* xhat, double rstd, int D,
                   double* dx, double* dg, double* db) {
    double mean_dxhat = 0, mean_dxhat_xhat = 0;
    for (int i = 0; i < D; ++i) {
        double dxhat = dy[i] * g[i];
        mean_dxhat += dxhat;
        mean_dxhat_xhat += dxhat * xhat[i];
    }
    mean_dxhat /= D;
    mean_dxhat_xhat /= D;
    for (int i = 0; i < D; ++i) {
        double dxhat = dy[i] * g[i];
        dx[i] += rstd * (dxhat - mean_dxhat - xhat[i] * mean_dxhat_xhat);
        dg[i] += dy[i] * xhat[i];
        db[i] += dy[i];
    }
}

// out[j] = sum_i x[i] * W[i*N + j] + b[j]
void linear_fwd(const double* x, const double* W, const double* b, int M, int N, double* out) {
    for (int j = 0; j < N; ++j) out[j] = b[j];
    for (int i = 0; i < M; ++i) {
        double xi = x[i];
        if (xi == 0.0) continue;
        const double* wrow = W + int64_t(i) * N;
        for (int j = 0; j < N; ++j) out[j] += xi * wrow[j];
    }
}

void linear_bwd(const double* x, const double* W, const double* dout, int M, int N, double* dx,
                double* dW, double* db) {
    for (int j = 0; j < N; ++j) db[j] += dout[j];
    for (int i = 0; i < M; ++i) {
        const double* wrow = W + int64_t(i) * N;
        double* dwrow = dW + int64_t(i) * N;
        double xi = x[i];
        double acc = 0;
        for (int j = 0; j < N; ++j) {
            acc += wrow[j] * dout[j];
            dwrow[j] += xi * dout[j];
        }
        if (dx != nullptr) dx[i] += acc;
    }
}

// Activations cached for one full forward pass.
struct Tape {
    int T = 0;
    std::vector<double> emb;  // [T][D], the residual-stream input of layer 0
    struct LayerTape {
        std::vector<double> ln1_xhat, ln1_out, q, k, v;  // [T][D]
        std::vector<double> ln1_rstd;                    // [T]
        std::vector<double> attn;                        // [H][T][T]
        std::vector<double> att_concat;                  // [T][D] pre-W_o
        std::vector<double> resid1;                      // [T][D]
        std::vector<double> ln2_xhat, ln2_out;           // [T][D]
        std::vector<double> ln2_rstd;                    // [T]
        std::vector<double> h1, g1;                      // [T][F]
        std::vector<double> resid2;                      // [T][D]
    };
    std::vector<LayerTape> layers;
    std::vector<double> lnf_xhat, lnf_out;  // [T][D] (lnf evaluated lazily per position)
    std::vector<double> lnf_rstd;           // [T]
    std::vector<char> lnf_done;             // [T]
};

void check_arch(const Checkpoint& ckpt) {
    if (ckpt.arch.param_count() != static_cast<int64_t>(ckpt.params.size())) {
        throw std::invalid_argument("checkpoint parameter vector does not match arch");
    }
    if (ckpt.arch.d_model % ckpt.arch.n_heads != 0) {
        throw std::invalid_argument("d_model must be divisible by n_heads");
    }
}

// Runs the residual stream for all T positions. Head/logits are not touched
// here; callers evaluate them at the positions they need.
void forward_stream(const Checkpoint& ckpt, const Layout& L, const TokenSeq& ids, Tape& tape) {
    const Arch& a = ckpt.arch;
    const int T = static_cast<int>(ids.size());
    const int D = a.d_model, F = a.d_ff, H = a.n_heads, hd = a.head_dim();
    const double* P = ckpt.params.data();
    const double scale = 1.0 / std::sqrt(double(hd));

    tape.T = T;
    tape.emb.assign(size_t(T) * D, 0.0);
    tape.layers.resize(size_t(a.n_layers));
    tape.lnf_xhat.assign(size_t(T) * D, 0.0);
    tape.lnf_out.assign(size_t(T) * D, 0.0);
    tape.lnf_rstd.assign(size_t(T), 0.0);
    tape.lnf_done.assign(size_t(T), 0);

    for (int t = 0; t < T; ++t) {
        const double* te = P + L.tok_emb + int64_t(ids[size_t(t)]) * D;
        const double* pe = P + L.pos_emb + int64_t(t) * D;
        double* e = &tape.emb[size_t(t) * D];
        for (int i = 0; i < D; ++i) e[i] = te[i] + pe[i];
    }

    const std::vector<double>* x_in = &tape.emb;
    for (int l = 0; l < a.n_layers; ++l) {
        const LayerOffsets& lo = L.layers[size_t(l)];
        Tape::LayerTape& lt = tape.layers[size_t(l)];
        lt.ln1_xhat.assign(size_t(T) * D, 0.0);
        lt.ln1_out.assign(size_t(T) * D, 0.0);
        lt.ln1_rstd.assign(size_t(T), 0.0);
        lt.q.assign(size_t(T) * D, 0.0);
        lt.k.assign(size_t(T) * D, 0.0);
        lt.v.assign(size_t(T) * D, 0.0);
        lt.attn.assign(size_t(H) * T * T, 0.0);
        lt.att_concat.assign(size_t(T) * D, 0.0);
        lt.resid1.assign(size_t(T) * D, 0.0);
        lt.ln2_xhat.assign(size_t(T) * D, 0.0);
        lt.ln2_out.assign(size_t(T) * D, 0.0);
        lt.ln2_rstd.assign(size_t(T), 0.0);
        lt.h1.assign(size_t(T) * F, 0.0);
        lt.g1.assign(size_t(T) * F, 0.0);
        lt.resid2.assign(size_t(T) * D, 0.0);

        for (int t = 0; t < T; ++t) {
            const double* x = &(*x_in)[size_t(t) * D];
            layernorm_fwd(x, P + lo.ln1_g, P + lo.ln1_b, D, &lt.ln1_xhat[size_t(t) * D],
                          &lt.ln1_rstd[size_t(t)], &lt.ln1_out[size_t(t) * D]);
            linear_fwd(&lt.ln1_out[size_t(t) * D], P + lo.wq, P + lo.bq, D, D,
                       &lt.q[size_t(t) * D]);
            linear_fwd(&lt.ln1_out[size_t(t) * D], P + lo.wk, P + lo.bk, D, D,
                       &lt.k[size_t(t) * D]);
            linear_fwd(&lt.ln1_out[size_t(t) * D], P + lo.wv, P + lo.bv, D, D,
                       &lt.v[size_t(t) * D]);
        }

        for (int h = 0; h < H; ++h) {
            const int ho = h * hd;
            for (int t = 0; t < T; ++t) {
                double* att_row = &lt.attn[(size_t(h) * T + size_t(t)) * T];
                const double* qt = &lt.q[size_t(t) * D + ho];
                double mx = -1e300;
                for (int u = 0; u <= t; ++u) {
                    const double* ku = &lt.k[size_t(u) * D + ho];
                    double s = 0;
                    for (int i = 0; i < hd; ++i) s += qt[i] * ku[i];
                    s *= scale;
                    att_row[u] = s;
                    mx = std::max(mx, s);
                }
                double denom = 0;
                for (int u = 0; u <= t; ++u) {
                    att_row[u] = std::exp(att_row[u] - mx);
                    denom += att_row[u];
                }
                double inv = 1.0 / denom;
                double* oc = &lt.att_concat[size_t(t) * D + ho];
                for (int u = 0; u <= t; ++u) {
                    att_row[u] *= inv;
                    const double* vu = &lt.v[size_t(u) * D + ho];
                    double w = att_row[u];
                    for (int i = 0; i < hd; ++i) oc[i] += w * vu[i];
                }
            }
        }

        std::vector<double> proj(static_cast<size_t>(D));
        for (int t = 0; t < T; ++t) {
            linear_fwd(&lt.att_concat[size_t(t) * D], P + lo.wo, P + lo.bo, D, D, proj.data());
            const double* x = &(*x_in)[size_t(t) * D];
            double* r1 = &lt.resid1[size_t(t) * D];
            for (int i = 0; i < D; ++i) r1[i] = x[i] + proj[size_t(i)];

            layernorm_fwd(r1, P + lo.ln2_g, P + lo.ln2_b, D, &lt.ln2_xhat[size_t(t) * D],
                          &lt.ln2_rstd[size_t(t)], &lt.ln2_out[size_t(t) * D]);
            linear_fwd(&lt.ln2_out[size_t(t) * D], P + lo.w1, P + lo.b1, D, F,
                       &lt.h1[size_t(t) * F]);
            double* g1 = &lt.g1[size_t(t) * F];
            const double* h1 = &lt.h1[size_t(t) * F];
            for (int i = 0; i < F; ++i) g1[i] = gelu(h1[i]);
            linear_fwd(g1, P + lo.w2, P + lo.b2, F, D, proj.data());
            double* r2 = &lt.resid2[size_t(t) * D];
            for (int i = 0; i < D; ++i) r2[i] = r1[i] + proj[size_t(i)];
        }
        x_in = &lt.resid2;
    }
}

// Final layernorm at one position, evaluated on demand.
void lnf_at(const Checkpoint& ckpt, const Layout& L, Tape& tape, int t) {
    if (tape.lnf_done[size_t(t)]) return;
    const int D = ckpt.arch.d_model;
    const double* P = ckpt.params.data();
    const std::vector<double>& stream =
        ckpt.arch.n_layers > 0 ? tape.layers.back().resid2 : tape.emb;
    layernorm_fwd(&stream[size_t(t) * D], P + L.lnf_g, P + L.lnf_b, D,
                  &tape.lnf_xhat[size_t(t) * D], &tape.lnf_rstd[size_t(t)],
                  &tape.lnf_out[size_t(t) * D]);
    tape.lnf_done[size_t(t)] = 1;
}

// log softmax of the head at position t, returning log p(token). When probs
// is non-null it receives the full softmax (needed for backward).
double head_logprob(const Checkpoint& ckpt, const Layout& L, Tape& tape, int t, TokenId token,
                    std::vector<double>* probs) {
    const Arch& a = ckpt.arch;
    const int D = a.d_model, V = a.vocab_size;
    const double* P = ckpt.params.data();
    lnf_at(ckpt, L, tape, t);
    std::vector<double> logits(static_cast<size_t>(V));
    linear_fwd(&tape.lnf_out[size_t(t) * D], P + L.w_out, P + L.b_out, D, V, logits.data());
    double mx = logits[0];
    for (int j = 1; j < V; ++j) mx = std::max(mx, logits[size_t(j)]);
    double denom = 0;
    for (int j = 0; j < V; ++j) denom += std::exp(logits[size_t(j)] - mx);
    double lse = mx + std::log(denom);
    if (probs != nullptr) {
        probs->resize(size_t(V));
        for (int j = 0; j < V; ++j) (*probs)[size_t(j)] = std::exp(logits[size_t(j)] - lse);
    }
    return logits[size_t(token)] - lse;
}

// Backward through the whole stream given d(residual-stream output) per
// position plus head gradients already folded into dstream via lnf backward.
void backward_stream(const Checkpoint& ckpt, const Layout& L, const TokenSeq& ids, Tape& tape,
                     std::vector<double>& dstream, std::vector<double>& grad) {
    const Arch& a = ckpt.arch;
    const int T = tape.T, D = a.d_model, F = a.d_ff, H = a.n_heads, hd = a.head_dim();
    const double scale = 1.0 / std::sqrt(double(hd));
    const double* P = ckpt.params.data();
    double* G = grad.data();

    std::vector<double> dx_prev(size_t(T) * D, 0.0);
    for (int l = a.n_layers - 1; l >= 0; --l) {
        const LayerOffsets& lo = L.layers[size_t(l)];
        Tape::LayerTape& lt = tape.layers[size_t(l)];
        const std::vector<double>& x_in = (l == 0) ? tape.emb : tape.layers[size_t(l - 1)].resid2;

        // FFN block: resid2 = resid1 + W2 gelu(W1 ln2(resid1) + b1) + b2
        std::vector<double> dln2_out(size_t(T) * D, 0.0);
        std::vector<double> dresid1(size_t(T) * D, 0.0);
        for (int t = 0; t < T; ++t) {
            const double* dr2 = &dstream[size_t(t) * D];
            double* dr1 = &dresid1[size_t(t) * D];
            for (int i = 0; i < D; ++i) dr1[i] += dr2[i];  // residual path

            // through W2
            std::vector<double> dg1(static_cast<size_t>(F), 0.0);
            linear_bwd(&lt.g1[size_t(t) * F], P + lo.w2, dr2, F, D, dg1.data(), G + lo.w2,
                       G + lo.b2);
            // through gelu
            std::vector<double> dh1(static_cast<size_t>(F), 0.0);
            const double* h1 = &lt.h1[size_t(t) * F];
            for (int i = 0; i < F; ++i) dh1[size_t(i)] = dg1[size_t(i)] * gelu_grad(h1[i]);
            // through W1
            linear_bwd(&lt.ln2_out[size_t(t) * D], P + lo.w1, dh1.data(), D, F,
                       &dln2_out[size_t(t) * D], G + lo.w1, G + lo.b1);
            // through ln2
            layernorm_bwd(&dln2_out[size_t(t) * D], P + lo.ln2_g, &lt.ln2_xhat[size_t(t) * D],
                          lt.ln2_rstd[size_t(t)], D, dr1, G + lo.ln2_g, G + lo.ln2_b);
        }

        // Attention block: resid1 = x + W_o att_concat + b_o
        std::vector<double> datt_concat(size_t(T) * D, 0.0);
        std::vector<double> dq(size_t(T) * D, 0.0), dk(size_t(T) * D, 0.0),
            dv(size_t(T) * D, 0.0);
        std::vector<double> dln1_out(size_t(T) * D, 0.0);
        for (int t = 0; t < T; ++t) {
            // residual path into x
            double* dx = &dx_prev[size_t(t) * D];
            const double* dr1 = &dresid1[size_t(t) * D];
            for (int i = 0; i < D; ++i) dx[i] += dr1[i];
            linear_bwd(&lt.att_concat[size_t(t) * D], P + lo.wo, dr1, D, D,
                       &datt_concat[size_t(t) * D], G + lo.wo, G + lo.bo);
        }
        for (int h = 0; h < H; ++h) {
            const int ho = h * hd;
            for (int t = 0; t < T; ++t) {
                const double* att_row = &lt.attn[(size_t(h) * T + size_t(t)) * T];
                const double* doh = &datt_concat[size_t(t) * D + ho];
                // d attn and d v
                double dattn_dot = 0;
                std::vector<double> dattn(size_t(t) + 1, 0.0);
                for (int u = 0; u <= t; ++u) {
                    const double* vu = &lt.v[size_t(u) * D + ho];
                    double s = 0;
                    for (int i = 0; i < hd; ++i) s += doh[i] * vu[i];
                    dattn[size_t(u)] = s;
                    dattn_dot += s * att_row[u];
                    double* dvu = &dv[size_t(u) * D + ho];
                    double w = att_row[u];
                    for (int i = 0; i < hd; ++i) dvu[i] += w * doh[i];
                }
                // softmax backward, then scores -> q, k
                const double* qt = &lt.q[size_t(t) * D + ho];
                double* dqt = &dq[size_t(t) * D + ho];
                for (int u = 0; u <= t; ++u) {
                    double ds = att_row[u] * (dattn[size_t(u)] - dattn_dot) * scale;
                    const double* ku = &lt.k[size_t(u) * D + ho];
                    double* dku = &dk[size_t(u) * D + ho];
                    for (int i = 0; i < hd; ++i) {
                        dqt[i] += ds * ku[i];
                        dku[i] += ds * qt[i];
                    }
                }
            }
        }
        for (int t = 0; t < T; ++t) {
            linear_bwd(&lt.ln1_out[size_t(t) * D], P + lo.wq, &dq[size_t(t) * D], D, D,
                       &dln1_out[size_t(t) * D], G + lo.wq, G + lo.bq);
            linear_bwd(&lt.ln1_out[size_t(t) * D], P + lo.wk, &dk[size_t(t) * D], D, D,
                       &dln1_out[size_t(t) * D], G + lo.wk, G + lo.bk);
            linear_bwd(&lt.ln1_out[size_t(t) * D], P + lo.wv, &dv[size_t(t) * D], D, D,
                       &dln1_out[size_t(t) * D], G + lo.wv, G + lo.bv);
            layernorm_bwd(&dln1_out[size_t(t) * D], P + lo.ln1_g, &lt.ln1_xhat[size_t(t) * D],
                          lt.ln1_rstd[size_t(t)], D, &dx_prev[size_t(t) * D], G + lo.ln1_g,
                          G + lo.ln1_b);
        }
        (void)x_in;
        dstream.swap(dx_prev);
        std::fill(dx_prev.begin(), dx_prev.end(), 0.0);
    }

    // Embeddings
    for (int t = 0; t < T; ++t) {
        const double* de = &dstream[size_t(t) * D];
        double* gte = G + L.tok_emb + int64_t(ids[size_t(t)]) * D;
        double* gpe = G + L.pos_emb + int64_t(t) * D;
        for (int i = 0; i < D; ++i) {
            gte[i] += de[i];
            gpe[i] += de[i];
        }
    }
}

void check_len(const Checkpoint& ckpt, size_t total_len) {
    if (total_len > static_cast<size_t>(ckpt.arch.ctx_len)) {
        throw std::invalid_argument("sequence of length " + std::to_string(total_len) +
                                    " exceeds context limit " +
                                    std::to_string(ckpt.arch.ctx_len));
    }
}

}  // namespace

int64_t Arch::param_count() const {
    const int64_t D = d_model, F = d_ff, V = vocab_size;
    int64_t per_layer = 2 * D + 4 * (D * D + D) + 2 * D + (D * F + F) + (F * D + D);
    return V * D + int64_t(ctx_len) * D + n_layers * per_layer + 2 * D + (D * V + V);
}

Checkpoint Checkpoint::init_scaled_normal(const Arch& arch, uint64_t vocab_hash, uint64_t seed,
                                          double std_dev) {
    Checkpoint c;
    c.arch = arch;
    c.vocab_hash = vocab_hash;
    c.params.resize(static_cast<size_t>(arch.param_count()));
    Rng rng(derive_seed(seed, 0x1717ULL));
    for (size_t i = 0; i < c.params.size(); i += 2) {
        // Box-Muller; uniform() never returns 0 exactly due to the >> 11 map,
        // but guard anyway.
        double u1 = std::max(rng.uniform(), 1e-300);
        double u2 = rng.uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        c.params[i] = std_dev * r * std::cos(2.0 * M_PI * u2);
        if (i + 1 < c.params.size()) c.params[i + 1] = std_dev * r * std::sin(2.0 * M_PI * u2);
    }
    // Layernorm gains start at 1.
    Layout L = make_layout(arch);
    auto set_ones = [&](int64_t off, int n) {
        for (int i = 0; i < n; ++i) c.params[size_t(off + i)] = 1.0;
    };
    for (const auto& lo : L.layers) {
        set_ones(lo.ln1_g, arch.d_model);
        set_ones(lo.ln2_g, arch.d_model);
    }
    set_ones(L.lnf_g, arch.d_model);
    return c;
}

Checkpoint Checkpoint::init_uniform(const Arch& arch, uint64_t vocab_hash) {
    Checkpoint c;
    c.arch = arch;
    c.vocab_hash = vocab_hash;
    c.params.assign(static_cast<size_t>(arch.param_count()), 0.0);
    return c;
}

double logprob(const Checkpoint& ckpt, const TokenSeq& context, const TokenSeq& target) {
    check_arch(ckpt);
    if (target.empty()) return 0.0;
    if (context.empty()) throw std::invalid_argument("context must not be empty");
    check_len(ckpt, context.size() + target.size());

    TokenSeq ids = context;
    ids.insert(ids.end(), target.begin(), target.end());
    Layout L = make_layout(ckpt.arch);
    Tape tape;
    forward_stream(ckpt, L, ids, tape);

    double total = 0.0;
    for (size_t t = context.size(); t < ids.size(); ++t) {
        total += head_logprob(ckpt, L, tape, static_cast<int>(t) - 1, ids[t], nullptr);
    }
    return total;
}

double grad_logprob_accum(const Checkpoint& ckpt, const TokenSeq& context,
                          const TokenSeq& target, double scale, std::vector<double>& grad_out) {
    check_arch(ckpt);
    if (grad_out.size() != ckpt.params.size()) {
        throw std::invalid_argument("grad_out must be parameter-sized");
    }
    if (target.empty()) return 0.0;
    if (context.empty()) throw std::invalid_argument("context must not be empty");
    check_len(ckpt, context.size() + target.size());

    TokenSeq ids = context;
    ids.insert(ids.end(), target.begin(), target.end());
    const Arch& a = ckpt.arch;
    const int D = a.d_model, V = a.vocab_size;
    const int T = static_cast<int>(ids.size());
    Layout L = make_layout(a);
    Tape tape;
    forward_stream(ckpt, L, ids, tape);

    double total = 0.0;
    std::vector<double> dstream(size_t(T) * D, 0.0);
    std::vector<double> probs;
    const double* P = ckpt.params.data();
    double* G = grad_out.data();
    for (size_t tt = context.size(); tt < ids.size(); ++tt) {
        int t = static_cast<int>(tt) - 1;
        TokenId y = ids[tt];
        total += head_logprob(ckpt, L, tape, t, y, &probs);
        // d logprob / d logits = scale * (onehot - softmax)
        std::vector<double> dlogits(static_cast<size_t>(V));
        for (int j = 0; j < V; ++j) dlogits[size_t(j)] = -scale * probs[size_t(j)];
        dlogits[size_t(y)] += scale;
        std::vector<double> dlnf_out(static_cast<size_t>(D), 0.0);
        linear_bwd(&tape.lnf_out[size_t(t) * D], P + L.w_out, dlogits.data(), D, V,
                   dlnf_out.data(), G + L.w_out, G + L.b_out);
        layernorm_bwd(dlnf_out.data(), P + L.lnf_g, &tape.lnf_xhat[size_t(t) * D],
                      tape.lnf_rstd[size_t(t)], D, &dstream[size_t(t) * D], G + L.lnf_g,
                      G + L.lnf_b);
    }
    backward_stream(ckpt, L, ids, tape, dstream, grad_out);
    return total;
}

double grad_logprob(const Checkpoint& ckpt, const TokenSeq& context, const TokenSeq& target,
                    std::vector<double>& grad_out) {
    grad_out.assign(ckpt.params.size(), 0.0);
    return grad_logprob_accum(ckpt, context, target, 1.0, grad_out);
}

std::vector<double> next_token_probs(const Checkpoint& ckpt, const TokenSeq& context) {
    check_arch(ckpt);
    if (context.empty()) throw std::invalid_argument("context must not be empty");
    check_len(ckpt, context.size());
    Layout L = make_layout(ckpt.arch);
    Tape tape;
    forward_stream(ckpt, L, context, tape);
    std::vector<double> probs;
    head_logprob(ckpt, L, tape, static_cast<int>(context.size()) - 1, 0, &probs);
    return probs;
}

double prefix_prob(const Checkpoint& ckpt, const TokenSeq& x, const TokenSeq& y,
                   const TokenSeq& prefix) {
    Specials sp;
    TokenSeq ctx;
    ctx.reserve(x.size() + y.size() + 3);
    ctx.push_back(sp.bos);
    ctx.insert(ctx.end(), x.begin(), x.end());
    ctx.push_back(sp.sep_y);
    ctx.insert(ctx.end(), y.begin(), y.end());
    ctx.push_back(sp.sep_z);
    return std::exp(logprob(ckpt, ctx, prefix));
}

// ---------------------------------------------------------------------------
// Incremental decoding
// ---------------------------------------------------------------------------

namespace {

// Per-layer key/value cache. The math matches forward_stream exactly; only
// the schedule differs (one position at a time, attending to the cache).
struct DecodeState {
    std::vector<std::vector<double>> k_cache, v_cache;  // [layer][t*D + i]
    int len = 0;
};

void decode_step(const Checkpoint& ckpt, const Layout& L, DecodeState& st, TokenId token,
                 std::vector<double>& logits_out, bool want_logits = true) {
    const Arch& a = ckpt.arch;
    const int D = a.d_model, F = a.d_ff, H = a.n_heads, hd = a.head_dim(), V = a.vocab_size;
    const double scale = 1.0 / std::sqrt(double(hd));
    const double* P = ckpt.params.data();
    const int t = st.len;
    if (t >= a.ctx_len) throw std::invalid_argument("decode past context limit");

    if (st.k_cache.empty()) {
        st.k_cache.resize(size_t(a.n_layers));
        st.v_cache.resize(size_t(a.n_layers));
    }

    std::vector<double> x(static_cast<size_t>(D));
    {
        const double* te = P + L.tok_emb + int64_t(token) * D;
        const double* pe = P + L.pos_emb + int64_t(t) * D;
        for (int i = 0; i < D; ++i) x[size_t(i)] = te[i] + pe[i];
    }

    std::vector<double> xhat(static_cast<size_t>(D));
    std::vector<double> ln_out(static_cast<size_t>(D));
    std::vector<double> q(static_cast<size_t>(D));
    std::vector<double> h1(static_cast<size_t>(F));
    std::vector<double> proj(static_cast<size_t>(std::max(D, F)));
    double rstd = 0;

    for (int l = 0; l < a.n_layers; ++l) {
        const LayerOffsets& lo = L.layers[size_t(l)];
        auto& kc = st.k_cache[size_t(l)];
        auto& vc = st.v_cache[size_t(l)];
        kc.resize(size_t(t + 1) * D);
        vc.resize(size_t(t + 1) * D);

        layernorm_fwd(x.data(), P + lo.ln1_g, P + lo.ln1_b, D, xhat.data(), &rstd, ln_out.data());
        linear_fwd(ln_out.data(), P + lo.wq, P + lo.bq, D, D, q.data());
        linear_fwd(ln_out.data(), P + lo.wk, P + lo.bk, D, D, &kc[size_t(t) * D]);
        linear_fwd(ln_out.data(), P + lo.wv, P + lo.bv, D, D, &vc[size_t(t) * D]);

        std::vector<double> att_out(static_cast<size_t>(D), 0.0);
        std::vector<double> att_row(static_cast<size_t>(t) + 1);
        for (int h = 0; h < H; ++h) {
            const int ho = h * hd;
            const double* qt = q.data() + ho;
            double mx = -1e300;
            for (int u = 0; u <= t; ++u) {
                const double* ku = &kc[size_t(u) * D + ho];
                double s = 0;
                for (int i = 0; i < hd; ++i) s += qt[i] * ku[i];
                s *= scale;
                att_row[size_t(u)] = s;
                mx = std::max(mx, s);
            }
            double denom = 0;
            for (int u = 0; u <= t; ++u) {
                att_row[size_t(u)] = std::exp(att_row[size_t(u)] - mx);
                denom += att_row[size_t(u)];
            }
            double inv = 1.0 / denom;
            double* oc = att_out.data() + ho;
            for (int u = 0; u <= t; ++u) {
                double w = att_row[size_t(u)] * inv;
                const double* vu = &vc[size_t(u) * D + ho];
                for (int i = 0; i < hd; ++i) oc[i] += w * vu[i];
            }
        }
        linear_fwd(att_out.data(), P + lo.wo, P + lo.bo, D, D, proj.data());
        for (int i = 0; i < D; ++i) x[size_t(i)] += proj[size_t(i)];

        layernorm_fwd(x.data(), P + lo.ln2_g, P + lo.ln2_b, D, xhat.data(), &rstd, ln_out.data());
        linear_fwd(ln_out.data(), P + lo.w1, P + lo.b1, D, F, h1.data());
        for (int i = 0; i < F; ++i) h1[size_t(i)] = gelu(h1[size_t(i)]);
        linear_fwd(h1.data(), P + lo.w2, P + lo.b2, F, D, proj.data());
        for (int i = 0; i < D; ++i) x[size_t(i)] += proj[size_t(i)];
    }

    if (want_logits) {
        layernorm_fwd(x.data(), P + L.lnf_g, P + L.lnf_b, D, xhat.data(), &rstd,
                      ln_out.data());
        logits_out.resize(size_t(V));
        linear_fwd(ln_out.data(), P + L.w_out, P + L.b_out, D, V, logits_out.data());
    }
    st.len = t + 1;
}

bool is_stop(const std::vector<TokenId>& stops, TokenId id) {
    return std::find(stops.begin(), stops.end(), id) != stops.end();
}

}  // namespace

TokenSeq sample(const Checkpoint& ckpt, const TokenSeq& context, const SampleOptions& opt,
                uint64_t seed) {
    check_arch(ckpt);
    if (opt.temperature <= 0) throw std::invalid_argument("temperature must be > 0");
    if (context.empty()) throw std::invalid_argument("context must not be empty");
    Layout L = make_layout(ckpt.arch);
    DecodeState st;
    std::vector<double> logits;
    std::vector<double> ignored;
    for (size_t i = 0; i + 1 < context.size(); ++i) {
        decode_step(ckpt, L, st, context[i], ignored, /*want_logits=*/false);
    }
    decode_step(ckpt, L, st, context.back(), logits);

    Rng rng(derive_seed(seed, 0x5a3dULL));
    const int V = ckpt.arch.vocab_size;
    TokenSeq out;
    for (int produced = 0; produced < opt.max_len; ++produced) {
        if (st.len >= ckpt.arch.ctx_len) break;
        double mx = logits[0];
        for (int j = 1; j < V; ++j) mx = std::max(mx, logits[size_t(j)]);
        std::vector<double> probs(static_cast<size_t>(V));
        double denom = 0;
        for (int j = 0; j < V; ++j) {
            probs[size_t(j)] = std::exp((logits[size_t(j)] - mx) / opt.temperature);
            denom += probs[size_t(j)];
        }
        double r = rng.uniform() * denom;
        double cum = 0;
        TokenId pick = V - 1;
        for (int j = 0; j < V; ++j) {
            cum += probs[size_t(j)];
            if (r < cum) {
                pick = j;
                break;
            }
        }
        out.push_back(pick);
        if (is_stop(opt.stop_tokens, pick)) break;
        decode_step(ckpt, L, st, pick, logits);
    }
    return out;
}

TokenSeq greedy_decode(const Checkpoint& ckpt, const TokenSeq& context, int max_len,
                       const std::vector<TokenId>& stop_tokens) {
    check_arch(ckpt);
    if (context.empty()) throw std::invalid_argument("context must not be empty");
    if (max_len <= 0) return {};
    Layout L = make_layout(ckpt.arch);
    DecodeState st;
    std::vector<double> logits;
    std::vector<double> ignored;
    for (size_t i = 0; i + 1 < context.size(); ++i) {
        decode_step(ckpt, L, st, context[i], ignored, /*want_logits=*/false);
    }
    decode_step(ckpt, L, st, context.back(), logits);

    const int V = ckpt.arch.vocab_size;
    TokenSeq out;
    for (int produced = 0; produced < max_len; ++produced) {
        if (st.len >= ckpt.arch.ctx_len) break;
        TokenId best = 0;
        for (int j = 1; j < V; ++j) {
            if (logits[size_t(j)] > logits[size_t(best)]) best = j;
        }
        out.push_back(best);
        if (is_stop(stop_tokens, best)) break;
        decode_step(ckpt, L, st, best, logits);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Packing
// ---------------------------------------------------------------------------

TokenSeq pack_prompt_context(const Vocabulary& vocab, const std::string& x_text) {
    Specials sp;
    TokenSeq out;
    out.push_back(sp.bos);
    TokenSeq x = vocab.encode(x_text);
    out.insert(out.end(), x.begin(), x.end());
    out.push_back(sp.sep_y);
    return out;
}

TokenSeq completion_target(const Vocabulary& vocab, const std::string& y_text) {
    Specials sp;
    TokenSeq out = vocab.encode(y_text);
    out.push_back(sp.sep_z);
    return out;
}

TokenSeq pack_state_context(const Vocabulary& vocab, const std::string& x_text,
                            const std::string& y_text) {
    Specials sp;
    TokenSeq out = pack_prompt_context(vocab, x_text);
    TokenSeq y = vocab.encode(y_text);
    out.insert(out.end(), y.begin(), y.end());
    out.push_back(sp.sep_z);
    return out;
}

TokenSeq state_target(const Vocabulary& vocab, const std::string& z_text) {
    Specials sp;
    TokenSeq out = vocab.encode(z_text);
    out.push_back(sp.eos);
    return out;
}

std::string decode_generated(const Vocabulary& vocab, const TokenSeq& ids) {
    Specials sp;
    TokenSeq trimmed = ids;
    while (!trimmed.empty() &&
           (trimmed.back() == sp.sep_z || trimmed.back() == sp.eos || trimmed.back() == sp.pad ||
            trimmed.back() == sp.sep_y || trimmed.back() == sp.bos)) {
        trimmed.pop_back();
    }
    return vocab.decode(trimmed);
}

}  // namespace dymo::model
