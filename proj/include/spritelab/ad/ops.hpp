#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <memory>
#include <vector>

#include "spritelab/ad/graph.hpp"
#include "spritelab/core/blas.hpp"
#include "spritelab/core/tensor.hpp"

namespace spritelab::ad {

inline Node* constant(Graph& g, Tensor v) { return g.leaf(std::move(v), false); }

// Caller wires the output node after creation; helper to keep closures terse.
namespace detail {
inline Node* unary(Graph& g, Tensor out, Node* a, std::function<void(Graph&, Node*, Node*)> bw) {
    Node* o = g.make(std::move(out), a->requires_grad, nullptr);
    if (o->requires_grad)
        o->backward = [a, o, bw = std::move(bw)](Graph& gg) { bw(gg, o, a); };
    return o;
}
inline Node* binary(Graph& g, Tensor out, Node* a, Node* b,
                    std::function<void(Graph&, Node*, Node*, Node*)> bw) {
    Node* o = g.make(std::move(out), a->requires_grad || b->requires_grad, nullptr);
    if (o->requires_grad)
        o->backward = [a, b, o, bw = std::move(bw)](Graph& gg) { bw(gg, o, a, b); };
    return o;
}
}  // namespace detail

inline Node* add(Graph& g, Node* a, Node* b) {
    Tensor out = a->value;
    out.add_(b->value);
    return detail::binary(g, std::move(out), a, b, [](Graph&, Node* o, Node* a_, Node* b_) {
        if (a_->requires_grad) a_->ensure_grad().add_(o->grad);
        if (b_->requires_grad) b_->ensure_grad().add_(o->grad);
    });
}

inline Node* add_scaled(Graph& g, Node* a, Node* b, float s) {
    Tensor out = a->value;
    for (int64_t i = 0; i < out.numel(); ++i) out[i] += s * b->value[i];
    return detail::binary(g, std::move(out), a, b, [s](Graph&, Node* o, Node* a_, Node* b_) {
        if (a_->requires_grad) a_->ensure_grad().add_(o->grad);
        if (b_->requires_grad) {
            Tensor& gb = b_->ensure_grad();
            for (int64_t i = 0; i < gb.numel(); ++i) gb[i] += s * o->grad[i];
        }
    });
}

inline Node* scale(Graph& g, Node* a, float s) {
    Tensor out = a->value;
    out.scale_(s);
    return detail::unary(g, std::move(out), a, [s](Graph&, Node* o, Node* a_) {
        Tensor& ga = a_->ensure_grad();
        for (int64_t i = 0; i < ga.numel(); ++i) ga[i] += s * o->grad[i];
    });
}

inline Node* mul(Graph& g, Node* a, Node* b) {
    Tensor out = a->value;
    for (int64_t i = 0; i < out.numel(); ++i) out[i] *= b->value[i];
    return detail::binary(g, std::move(out), a, b, [](Graph&, Node* o, Node* a_, Node* b_) {
        if (a_->requires_grad) {
            Tensor& ga = a_->ensure_grad();
            for (int64_t i = 0; i < ga.numel(); ++i) ga[i] += o->grad[i] * b_->value[i];
        }
        if (b_->requires_grad) {
            Tensor& gb = b_->ensure_grad();
            for (int64_t i = 0; i < gb.numel(); ++i) gb[i] += o->grad[i] * a_->value[i];
        }
    });
}

inline Node* matmul(Graph& g, Node* a, Node* b, bool ta = false, bool tb = false) {
    const int m = ta ? a->value.dim(1) : a->value.dim(0);
    const int k = ta ? a->value.dim(0) : a->value.dim(1);
    const int kb = tb ? b->value.dim(1) : b->value.dim(0);
    const int n = tb ? b->value.dim(0) : b->value.dim(1);
    if (k != kb) throw std::invalid_argument("matmul: inner dim mismatch");
    Tensor out({m, n});
    blas::gemm(ta, tb, m, n, k, 1.0f, a->value.data(), a->value.dim(1), b->value.data(),
               b->value.dim(1), 0.0f, out.data(), n);
    return detail::binary(g, std::move(out), a, b,
                          [ta, tb, m, n, k](Graph&, Node* o, Node* a_, Node* b_) {
        const float* dc = o->grad.data();
        if (a_->requires_grad) {
            float* da = a_->ensure_grad().data();
            const int lda = a_->value.dim(1);
            if (!ta && !tb)
                blas::gemm(false, true, m, k, n, 1.0f, dc, n, b_->value.data(), b_->value.dim(1),
                           1.0f, da, lda);
            else if (!ta && tb)
                blas::gemm(false, false, m, k, n, 1.0f, dc, n, b_->value.data(), b_->value.dim(1),
                           1.0f, da, lda);
            else if (ta && !tb)
                blas::gemm(false, true, k, m, n, 1.0f, b_->value.data(), b_->value.dim(1), dc, n,
                           1.0f, da, lda);
            else
                blas::gemm(true, true, k, m, n, 1.0f, b_->value.data(), b_->value.dim(1), dc, n,
                           1.0f, da, lda);
        }
        if (b_->requires_grad) {
            float* db = b_->ensure_grad().data();
            const int ldb = b_->value.dim(1);
            if (!ta && !tb)
                blas::gemm(true, false, k, n, m, 1.0f, a_->value.data(), a_->value.dim(1), dc, n,
                           1.0f, db, ldb);
            else if (ta && !tb)
                blas::gemm(false, false, k, n, m, 1.0f, a_->value.data(), a_->value.dim(1), dc, n,
                           1.0f, db, ldb);
            else if (!ta && tb)
                blas::gemm(true, false, n, k, m, 1.0f, dc, n, a_->value.data(), a_->value.dim(1),
                           1.0f, db, ldb);
            else
                blas::gemm(true, true, n, k, m, 1.0f, dc, n, a_->value.data(), a_->value.dim(1),
                           1.0f, db, ldb);
        }
    });
}

// x:[n,din] W:[din,dout] b:[dout] (b may be null)
inline Node* linear(Graph& g, Node* x, Node* w, Node* b) {
    const int n = x->value.dim(0), din = x->value.dim(1), dout = w->value.dim(1);
    if (w->value.dim(0) != din) throw std::invalid_argument("linear: weight shape");
    Tensor out({n, dout});
    blas::gemm(false, false, n, dout, din, 1.0f, x->value.data(), din, w->value.data(), dout, 0.0f,
               out.data(), dout);
    if (b) {
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < dout; ++j) out.at(i, j) += b->value[j];
    }
    const bool rg = x->requires_grad || w->requires_grad || (b && b->requires_grad);
    Node* o = g.make(std::move(out), rg, nullptr);
    if (o->requires_grad)
        o->backward = [x, w, b, o, n, din, dout](Graph&) {
            const float* dc = o->grad.data();
            if (x->requires_grad)
                blas::gemm(false, true, n, din, dout, 1.0f, dc, dout, w->value.data(), dout, 1.0f,
                           x->ensure_grad().data(), din);
            if (w->requires_grad)
                blas::gemm(true, false, din, dout, n, 1.0f, x->value.data(), din, dc, dout, 1.0f,
                           w->ensure_grad().data(), dout);
            if (b && b->requires_grad) {
                Tensor& gb = b->ensure_grad();
                for (int i = 0; i < n; ++i)
                    for (int j = 0; j < dout; ++j) gb[j] += dc[static_cast<size_t>(i) * dout + j];
            }
        };
    return o;
}

// Row-wise layer norm, no affine part (modulation supplies shift/scale).
inline Node* layer_norm(Graph& g, Node* x, float eps = 1e-6f) {
    const int n = x->value.dim(0), d = x->value.dim(1);
    Tensor out({n, d});
    auto rstd = std::make_shared<std::vector<float>>(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        const float* row = x->value.data() + static_cast<size_t>(i) * d;
        double mu = 0.0;
        for (int j = 0; j < d; ++j) mu += row[j];
        mu /= d;
        double var = 0.0;
        for (int j = 0; j < d; ++j) {
            const double c = row[j] - mu;
            var += c * c;
        }
        var /= d;
        const float rs = static_cast<float>(1.0 / std::sqrt(var + eps));
        (*rstd)[static_cast<size_t>(i)] = rs;
        float* orow = out.data() + static_cast<size_t>(i) * d;
        for (int j = 0; j < d; ++j) orow[j] = static_cast<float>((row[j] - mu) * rs);
    }
    if (g.grad_enabled()) g.account_bytes(rstd->size() * sizeof(float));
    return detail::unary(g, std::move(out), x, [rstd, n, d](Graph&, Node* o, Node* x_) {
        Tensor& gx = x_->ensure_grad();
        for (int i = 0; i < n; ++i) {
            const float* dy = o->grad.data() + static_cast<size_t>(i) * d;
            const float* y = o->value.data() + static_cast<size_t>(i) * d;
            float* dx = gx.data() + static_cast<size_t>(i) * d;
            double mdy = 0.0, mdyy = 0.0;
            for (int j = 0; j < d; ++j) {
                mdy += dy[j];
                mdyy += static_cast<double>(dy[j]) * y[j];
            }
            mdy /= d;
            mdyy /= d;
            const float rs = (*rstd)[static_cast<size_t>(i)];
            for (int j = 0; j < d; ++j)
                dx[j] += rs * static_cast<float>(dy[j] - mdy - y[j] * mdyy);
        }
    });
}

// y = x * (1 + scale) + shift, shift/scale broadcast over rows ([1,d]).
inline Node* modulate(Graph& g, Node* x, Node* shift, Node* sc) {
    const int n = x->value.dim(0), d = x->value.dim(1);
    Tensor out({n, d});
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j)
            out.at(i, j) = x->value.at(i, j) * (1.0f + sc->value[j]) + shift->value[j];
    const bool rg = x->requires_grad || shift->requires_grad || sc->requires_grad;
    Node* o = g.make(std::move(out), rg, nullptr);
    if (o->requires_grad)
        o->backward = [x, shift, sc, o, n, d](Graph&) {
            if (x->requires_grad) {
                Tensor& gx = x->ensure_grad();
                for (int i = 0; i < n; ++i)
                    for (int j = 0; j < d; ++j)
                        gx.at(i, j) += o->grad.at(i, j) * (1.0f + sc->value[j]);
            }
            if (shift->requires_grad) {
                Tensor& gs = shift->ensure_grad();
                for (int i = 0; i < n; ++i)
                    for (int j = 0; j < d; ++j) gs[j] += o->grad.at(i, j);
            }
            if (sc->requires_grad) {
                Tensor& gc = sc->ensure_grad();
                for (int i = 0; i < n; ++i)
                    for (int j = 0; j < d; ++j) gc[j] += o->grad.at(i, j) * x->value.at(i, j);
            }
        };
    return o;
}

// y = x * vec (vec broadcast over rows), used for adaLN gates.
inline Node* mul_row_vector(Graph& g, Node* x, Node* vec) {
    const int n = x->value.dim(0), d = x->value.dim(1);
    Tensor out({n, d});
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) out.at(i, j) = x->value.at(i, j) * vec->value[j];
    return detail::binary(g, std::move(out), x, vec, [n, d](Graph&, Node* o, Node* x_, Node* v_) {
        if (x_->requires_grad) {
            Tensor& gx = x_->ensure_grad();
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < d; ++j) gx.at(i, j) += o->grad.at(i, j) * v_->value[j];
        }
        if (v_->requires_grad) {
            Tensor& gv = v_->ensure_grad();
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < d; ++j) gv[j] += o->grad.at(i, j) * x_->value.at(i, j);
        }
    });
}

inline Node* add_row_vector(Graph& g, Node* x, Node* vec) {
    const int n = x->value.dim(0), d = x->value.dim(1);
    Tensor out = x->value;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) out.at(i, j) += vec->value[j];
    return detail::binary(g, std::move(out), x, vec, [n, d](Graph&, Node* o, Node* x_, Node* v_) {
        if (x_->requires_grad) x_->ensure_grad().add_(o->grad);
        if (v_->requires_grad) {
            Tensor& gv = v_->ensure_grad();
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < d; ++j) gv[j] += o->grad.at(i, j);
        }
    });
}

// Adds vec to the listed rows of x.
inline Node* add_rows_indexed(Graph& g, Node* x, std::vector<int> rows, Node* vec) {
    const int d = x->value.dim(1);
    Tensor out = x->value;
    for (int r : rows)
        for (int j = 0; j < d; ++j) out.at(r, j) += vec->value[j];
    auto rs = std::make_shared<std::vector<int>>(std::move(rows));
    return detail::binary(g, std::move(out), x, vec, [rs, d](Graph&, Node* o, Node* x_, Node* v_) {
        if (x_->requires_grad) x_->ensure_grad().add_(o->grad);
        if (v_->requires_grad) {
            Tensor& gv = v_->ensure_grad();
            for (int r : *rs)
                for (int j = 0; j < d; ++j) gv[j] += o->grad.at(r, j);
        }
    });
}

// x unchanged except rows [r0, r0+y.rows) get += y.
inline Node* add_rows_range(Graph& g, Node* x, int r0, Node* y) {
    const int d = x->value.dim(1), ny = y->value.dim(0);
    Tensor out = x->value;
    for (int i = 0; i < ny; ++i)
        for (int j = 0; j < d; ++j) out.at(r0 + i, j) += y->value.at(i, j);
    return detail::binary(g, std::move(out), x, y, [r0, ny, d](Graph&, Node* o, Node* x_, Node* y_) {
        if (x_->requires_grad) x_->ensure_grad().add_(o->grad);
        if (y_->requires_grad) {
            Tensor& gy = y_->ensure_grad();
            for (int i = 0; i < ny; ++i)
                for (int j = 0; j < d; ++j) gy.at(i, j) += o->grad.at(r0 + i, j);
        }
    });
}

inline Node* slice_rows(Graph& g, Node* x, int r0, int len) {
    const int d = x->value.dim(1);
    Tensor out({len, d});
    std::copy_n(x->value.data() + static_cast<size_t>(r0) * d, static_cast<size_t>(len) * d,
                out.data());
    return detail::unary(g, std::move(out), x, [r0, len, d](Graph&, Node* o, Node* x_) {
        Tensor& gx = x_->ensure_grad();
        for (int i = 0; i < len; ++i)
            for (int j = 0; j < d; ++j) gx.at(r0 + i, j) += o->grad.at(i, j);
    });
}

inline Node* slice_cols(Graph& g, Node* x, int c0, int len) {
    const int n = x->value.dim(0), d = x->value.dim(1);
    Tensor out({n, len});
    for (int i = 0; i < n; ++i)
        std::copy_n(x->value.data() + static_cast<size_t>(i) * d + c0, len,
                    out.data() + static_cast<size_t>(i) * len);
    return detail::unary(g, std::move(out), x, [c0, len, n, d](Graph&, Node* o, Node* x_) {
        Tensor& gx = x_->ensure_grad();
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < len; ++j) gx.at(i, c0 + j) += o->grad.at(i, j);
    });
}

inline Node* concat_rows(Graph& g, const std::vector<Node*>& parts) {
    int n = 0;
    const int d = parts.front()->value.dim(1);
    bool rg = false;
    for (Node* p : parts) {
        n += p->value.dim(0);
        rg = rg || p->requires_grad;
    }
    Tensor out({n, d});
    int r = 0;
    for (Node* p : parts) {
        std::copy_n(p->value.data(), p->value.numel(), out.data() + static_cast<size_t>(r) * d);
        r += p->value.dim(0);
    }
    Node* o = g.make(std::move(out), rg, nullptr);
    if (o->requires_grad) {
        auto ps = std::make_shared<std::vector<Node*>>(parts);
        o->backward = [ps, o, d](Graph&) {
            int r0 = 0;
            for (Node* p : *ps) {
                const int rows = p->value.dim(0);
                if (p->requires_grad) {
                    Tensor& gp = p->ensure_grad();
                    for (int i = 0; i < rows; ++i)
                        for (int j = 0; j < d; ++j) gp.at(i, j) += o->grad.at(r0 + i, j);
                }
                r0 += rows;
            }
        };
    }
    return o;
}

inline Node* silu(Graph& g, Node* x) {
    Tensor out = x->value;
    for (int64_t i = 0; i < out.numel(); ++i) {
        const float s = 1.0f / (1.0f + std::exp(-out[i]));
        out[i] *= s;
    }
    return detail::unary(g, std::move(out), x, [](Graph&, Node* o, Node* x_) {
        Tensor& gx = x_->ensure_grad();
        for (int64_t i = 0; i < gx.numel(); ++i) {
            const float v = x_->value[i];
            const float s = 1.0f / (1.0f + std::exp(-v));
            gx[i] += o->grad[i] * s * (1.0f + v * (1.0f - s));
        }
    });
}

inline Node* gelu(Graph& g, Node* x) {
    constexpr float kC = 0.7978845608028654f;  // sqrt(2/pi)
    Tensor out = x->value;
    for (int64_t i = 0; i < out.numel(); ++i) {
        const float v = out[i];
        out[i] = 0.5f * v * (1.0f + std::tanh(kC * (v + 0.044715f * v * v * v)));
    }
    return detail::unary(g, std::move(out), x, [](Graph&, Node* o, Node* x_) {
        Tensor& gx = x_->ensure_grad();
        for (int64_t i = 0; i < gx.numel(); ++i) {
            const float v = x_->value[i];
            const float u = kC * (v + 0.044715f * v * v * v);
            const float th = std::tanh(u);
            const float du = kC * (1.0f + 3.0f * 0.044715f * v * v);
            gx[i] += o->grad[i] * (0.5f * (1.0f + th) + 0.5f * v * (1.0f - th * th) * du);
        }
    });
}

// table:[V,d], out:[ids.size(),d]; backward scatter-adds.
inline Node* rows_lookup(Graph& g, Node* table, std::vector<int> ids) {
    const int d = table->value.dim(1);
    const int n = static_cast<int>(ids.size());
    Tensor out({n, d});
    for (int i = 0; i < n; ++i)
        std::copy_n(table->value.data() + static_cast<size_t>(ids[static_cast<size_t>(i)]) * d, d,
                    out.data() + static_cast<size_t>(i) * d);
    auto sh = std::make_shared<std::vector<int>>(std::move(ids));
    return detail::unary(g, std::move(out), table, [sh, n, d](Graph&, Node* o, Node* t_) {
        Tensor& gt = t_->ensure_grad();
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < d; ++j) gt.at((*sh)[static_cast<size_t>(i)], j) += o->grad.at(i, j);
    });
}

inline Node* mean_all(Graph& g, Node* x) {
    const double n = static_cast<double>(x->value.numel());
    Tensor out = Tensor::scalar(static_cast<float>(x->value.sum() / n));
    return detail::unary(g, std::move(out), x, [n](Graph&, Node* o, Node* x_) {
        Tensor& gx = x_->ensure_grad();
        const float s = o->grad[0] / static_cast<float>(n);
        for (int64_t i = 0; i < gx.numel(); ++i) gx[i] += s;
    });
}

// mean over elements of weight * (pred - target)^2; target/weight constants.
inline Node* weighted_sse_mean(Graph& g, Node* pred, Tensor target, Tensor weight) {
    const int64_t n = pred->value.numel();
    double acc = 0.0;
    for (int64_t i = 0; i < n; ++i) {
        const double e = static_cast<double>(pred->value[i]) - target[i];
        acc += weight[i] * e * e;
    }
    Tensor out = Tensor::scalar(static_cast<float>(acc / static_cast<double>(n)));
    auto tgt = std::make_shared<Tensor>(std::move(target));
    auto wt = std::make_shared<Tensor>(std::move(weight));
    if (g.grad_enabled())
        g.account_bytes(static_cast<size_t>(2 * n) * sizeof(float));
    return detail::unary(g, std::move(out), pred, [tgt, wt, n](Graph&, Node* o, Node* p_) {
        Tensor& gp = p_->ensure_grad();
        const float s = 2.0f * o->grad[0] / static_cast<float>(n);
        for (int64_t i = 0; i < n; ++i)
            gp[i] += s * (*wt)[i] * (p_->value[i] - (*tgt)[i]);
    });
}

// Numerically stable mean BCE over logits [n] (or [n,1]) with labels in {0,1}.
inline Node* bce_with_logits(Graph& g, Node* logits, Tensor labels) {
    const int64_t n = logits->value.numel();
    double acc = 0.0;
    for (int64_t i = 0; i < n; ++i) {
        const double r = logits->value[i];
        const double y = labels[i];
        acc += std::max(r, 0.0) - r * y + std::log1p(std::exp(-std::abs(r)));
    }
    Tensor out = Tensor::scalar(static_cast<float>(acc / static_cast<double>(n)));
    auto lb = std::make_shared<Tensor>(std::move(labels));
    return detail::unary(g, std::move(out), logits, [lb, n](Graph&, Node* o, Node* l_) {
        Tensor& gl = l_->ensure_grad();
        const float s = o->grad[0] / static_cast<float>(n);
        for (int64_t i = 0; i < n; ++i) {
            const float sig = 1.0f / (1.0f + std::exp(-l_->value[i]));
            gl[i] += s * (sig - (*lb)[i]);
        }
    });
}

}  // namespace spritelab::ad
