#pragma once

#include <array>
#include <cmath>
#include <memory>
#include <vector>

#include "spritelab/ad/ops.hpp"

namespace spritelab::ad {

// Per-token rotation tables for 3-axis rotary embeddings. head_dim splits into
// three equal axis groups; pairs within a group rotate by index * freq(pair).
struct RopeTable {
    Tensor cos_t, sin_t;  // [n_tokens, head_dim/2]
    int head_dim = 0;
};

inline RopeTable build_rope_table(const std::vector<std::array<int, 3>>& indices, int head_dim,
                                  double base = 10000.0) {
    if (head_dim % 6 != 0) throw std::invalid_argument("rope: head_dim must be divisible by 6");
    const int pairs = head_dim / 2;
    const int pairs_per_axis = head_dim / 6;
    const int n = static_cast<int>(indices.size());
    RopeTable t;
    t.head_dim = head_dim;
    t.cos_t = Tensor({n, pairs});
    t.sin_t = Tensor({n, pairs});
    std::vector<double> freq(static_cast<size_t>(pairs_per_axis));
    for (int j = 0; j < pairs_per_axis; ++j)
        freq[static_cast<size_t>(j)] = std::pow(base, -static_cast<double>(j) / pairs_per_axis);
    for (int i = 0; i < n; ++i) {
        for (int p = 0; p < pairs; ++p) {
            const int axis = p / pairs_per_axis;
            const int j = p % pairs_per_axis;
            const double ang = indices[static_cast<size_t>(i)][static_cast<size_t>(axis)] *
                               freq[static_cast<size_t>(j)];
            t.cos_t.at(i, p) = static_cast<float>(std::cos(ang));
            t.sin_t.at(i, p) = static_cast<float>(std::sin(ang));
        }
    }
    return t;
}

namespace detail {

// Rotates every head slice of row `dst_row` of m by the table entry of
// `tab_row`. sign=-1 applies the inverse rotation (for gradients).
inline void rope_rotate_row(float* row, const RopeTable& t, int tab_row, int d, float sign) {
    const int dh = t.head_dim;
    const int pairs = dh / 2;
    const float* c = t.cos_t.data() + static_cast<size_t>(tab_row) * pairs;
    const float* s = t.sin_t.data() + static_cast<size_t>(tab_row) * pairs;
    for (int h0 = 0; h0 + dh <= d; h0 += dh) {
        float* hr = row + h0;
        for (int p = 0; p < pairs; ++p) {
            const float x = hr[2 * p], y = hr[2 * p + 1];
            const float sp = sign * s[p];
            hr[2 * p] = x * c[p] - y * sp;
            hr[2 * p + 1] = x * sp + y * c[p];
        }
    }
}

}  // namespace detail

// Stand-alone rotation of one vector by one (t,y,x) index; the contract-level
// rope_rotate operation (the fused attention below applies the same math).
inline Tensor rope_rotate(const Tensor& v, std::array<int, 3> index, double base = 10000.0) {
    RopeTable t = build_rope_table({index}, static_cast<int>(v.numel()), base);
    Tensor out = v;
    detail::rope_rotate_row(out.data(), t, 0, static_cast<int>(v.numel()), 1.0f);
    return out;
}

// Fused multi-head attention. q:[nq,d], k/v:[nk,d]. Keys flagged invalid are
// physically excluded (gathered out) before any GEMM, which makes padding
// invariance hold bit-exactly. Rope tables are applied to q and k when given.
inline Node* attention(Graph& g, Node* q, Node* k, Node* v, int heads,
                       const std::shared_ptr<RopeTable>& rope_q,
                       const std::shared_ptr<RopeTable>& rope_k,
                       const std::vector<uint8_t>* key_valid) {
    const int nq = q->value.dim(0), d = q->value.dim(1);
    const int nk = k->value.dim(0);
    if (d % heads != 0) throw std::invalid_argument("attention: d % heads");
    const int dh = d / heads;
    const float scl = 1.0f / std::sqrt(static_cast<float>(dh));

    auto vidx = std::make_shared<std::vector<int>>();
    if (key_valid) {
        for (int i = 0; i < nk; ++i)
            if ((*key_valid)[static_cast<size_t>(i)]) vidx->push_back(i);
    } else {
        vidx->resize(static_cast<size_t>(nk));
        for (int i = 0; i < nk; ++i) (*vidx)[static_cast<size_t>(i)] = i;
    }
    const int nv = static_cast<int>(vidx->size());
    if (nv == 0) throw std::invalid_argument("attention: no valid keys");

    auto qr = std::make_shared<Tensor>(q->value);
    if (rope_q)
        for (int i = 0; i < nq; ++i)
            detail::rope_rotate_row(qr->data() + static_cast<size_t>(i) * d, *rope_q, i, d, 1.0f);

    auto kc = std::make_shared<Tensor>(Tensor({nv, d}));
    auto vc = std::make_shared<Tensor>(Tensor({nv, d}));
    for (int i = 0; i < nv; ++i) {
        const int src = (*vidx)[static_cast<size_t>(i)];
        std::copy_n(k->value.data() + static_cast<size_t>(src) * d, d,
                    kc->data() + static_cast<size_t>(i) * d);
        std::copy_n(v->value.data() + static_cast<size_t>(src) * d, d,
                    vc->data() + static_cast<size_t>(i) * d);
        if (rope_k)
            detail::rope_rotate_row(kc->data() + static_cast<size_t>(i) * d, *rope_k, src, d, 1.0f);
    }

    Tensor out({nq, d});
    // probs saved per head for backward; eval mode reuses one scratch buffer
    std::shared_ptr<Tensor> probs;
    const bool rg = g.grad_enabled() && (q->requires_grad || k->requires_grad || v->requires_grad);
    if (rg) {
        probs = std::make_shared<Tensor>(Tensor({heads, nq, nv}));
        g.account_bytes(static_cast<size_t>(probs->numel()) * sizeof(float));
        g.account_bytes(static_cast<size_t>(qr->numel() + kc->numel() + vc->numel()) *
                        sizeof(float));
    }
    Tensor scratch = rg ? Tensor() : Tensor({nq, nv});

    for (int h = 0; h < heads; ++h) {
        float* sp = rg ? probs->data() + static_cast<size_t>(h) * nq * nv : scratch.data();
        blas::gemm(false, true, nq, nv, dh, scl, qr->data() + static_cast<size_t>(h) * dh, d,
                   kc->data() + static_cast<size_t>(h) * dh, d, 0.0f, sp, nv);
        for (int i = 0; i < nq; ++i) {
            float* row = sp + static_cast<size_t>(i) * nv;
            float mx = row[0];
            for (int j = 1; j < nv; ++j) mx = std::max(mx, row[j]);
            double den = 0.0;
            for (int j = 0; j < nv; ++j) {
                row[j] = std::exp(row[j] - mx);
                den += row[j];
            }
            const float inv = static_cast<float>(1.0 / den);
            for (int j = 0; j < nv; ++j) row[j] *= inv;
        }
        blas::gemm(false, false, nq, dh, nv, 1.0f, sp, nv, vc->data() + static_cast<size_t>(h) * dh,
                   d, 0.0f, out.data() + static_cast<size_t>(h) * dh, d);
    }

    Node* o = g.make(std::move(out), rg, nullptr);
    if (!rg) return o;

    o->backward = [q, k, v, o, probs, qr, kc, vc, vidx, heads, nq, nv, d, dh, scl, rope_q,
                   rope_k](Graph&) {
        Tensor dqr({nq, d}), dkc({nv, d}), dvc({nv, d});
        Tensor dp({nq, nv}), ds({nq, nv});
        for (int h = 0; h < heads; ++h) {
            const float* p = probs->data() + static_cast<size_t>(h) * nq * nv;
            const float* dout = o->grad.data() + static_cast<size_t>(h) * dh;
            // dP = dO V^T ; dV = P^T dO
            blas::gemm(false, true, nq, nv, dh, 1.0f, dout, d,
                       vc->data() + static_cast<size_t>(h) * dh, d, 0.0f, dp.data(), nv);
            blas::gemm(true, false, nv, dh, nq, 1.0f, p, nv, dout, d, 0.0f,
                       dvc.data() + static_cast<size_t>(h) * dh, d);
            for (int i = 0; i < nq; ++i) {
                const float* pr = p + static_cast<size_t>(i) * nv;
                const float* dpr = dp.data() + static_cast<size_t>(i) * nv;
                double dot = 0.0;
                for (int j = 0; j < nv; ++j) dot += static_cast<double>(dpr[j]) * pr[j];
                float* dsr = ds.data() + static_cast<size_t>(i) * nv;
                for (int j = 0; j < nv; ++j)
                    dsr[j] = scl * pr[j] * (dpr[j] - static_cast<float>(dot));
            }
            blas::gemm(false, false, nq, dh, nv, 1.0f, ds.data(), nv,
                       kc->data() + static_cast<size_t>(h) * dh, d, 0.0f,
                       dqr.data() + static_cast<size_t>(h) * dh, d);
            blas::gemm(true, false, nv, dh, nq, 1.0f, ds.data(), nv,
                       qr->data() + static_cast<size_t>(h) * dh, d, 0.0f,
                       dkc.data() + static_cast<size_t>(h) * dh, d);
        }
        if (q->requires_grad) {
            if (rope_q)
                for (int i = 0; i < nq; ++i)
                    detail::rope_rotate_row(dqr.data() + static_cast<size_t>(i) * d, *rope_q, i, d,
                                            -1.0f);
            q->ensure_grad().add_(dqr);
        }
        if (k->requires_grad) {
            Tensor& gk = k->ensure_grad();
            for (int i = 0; i < nv; ++i) {
                const int dst = (*vidx)[static_cast<size_t>(i)];
                float* row = dkc.data() + static_cast<size_t>(i) * d;
                if (rope_k) detail::rope_rotate_row(row, *rope_k, dst, d, -1.0f);
                float* grow = gk.data() + static_cast<size_t>(dst) * d;
                for (int j = 0; j < d; ++j) grow[j] += row[j];
            }
        }
        if (v->requires_grad) {
            Tensor& gv = v->ensure_grad();
            for (int i = 0; i < nv; ++i) {
                const int dst = (*vidx)[static_cast<size_t>(i)];
                const float* row = dvc.data() + static_cast<size_t>(i) * d;
                float* grow = gv.data() + static_cast<size_t>(dst) * d;
                for (int j = 0; j < d; ++j) grow[j] += row[j];
            }
        }
    };
    return o;
}

}  // namespace spritelab::ad
