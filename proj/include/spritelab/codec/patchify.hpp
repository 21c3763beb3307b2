#pragma once

#include <array>
#include <atomic>

#include "spritelab/core/error.hpp"
#include "spritelab/core/tensor.hpp"

namespace spritelab::codec {

// Call counter used by the reward-path "no decode" interface assertion.
inline std::atomic<uint64_t>& decode_calls() {
    static std::atomic<uint64_t> n{0};
    return n;
}

struct PatchSize {
    int pt = 1, ph = 8, pw = 8;
};

// T x h x w x c latent grid produced by the space-to-depth codec.
struct LatentGrid {
    Tensor data;  // [T, h, w, c]
    PatchSize patch;
    std::array<int, 4> source_shape{};  // (F, H, W, 3)

    int t() const { return data.dim(0); }
    int h() const { return data.dim(1); }
    int w() const { return data.dim(2); }
    int c() const { return data.dim(3); }
    int tokens() const { return t() * h() * w(); }

    Tensor token_matrix() const { return data.reshaped({tokens(), c()}); }
};

inline int latent_channels(const PatchSize& p) { return 3 * p.pt * p.ph * p.pw; }

// Exact space-to-depth: a pure element permutation, so decode(encode(x)) == x
// bit-for-bit, encode is linear, and norms are preserved.
inline LatentGrid encode(const Tensor& video, const PatchSize& p = {}) {
    if (video.rank() != 4 || video.dim(3) != 3) throw DataError("encode: want [F,H,W,3]");
    const int f = video.dim(0), hh = video.dim(1), ww = video.dim(2);
    if (f % p.pt || hh % p.ph || ww % p.pw) throw DataError("shape not patchable");
    const int t = f / p.pt, h = hh / p.ph, w = ww / p.pw, c = latent_channels(p);
    LatentGrid g;
    g.patch = p;
    g.source_shape = {f, hh, ww, 3};
    g.data = Tensor({t, h, w, c});
    for (int ti = 0; ti < t; ++ti)
        for (int yi = 0; yi < h; ++yi)
            for (int xi = 0; xi < w; ++xi)
                for (int dt = 0; dt < p.pt; ++dt)
                    for (int dy = 0; dy < p.ph; ++dy)
                        for (int dx = 0; dx < p.pw; ++dx)
                            for (int ch = 0; ch < 3; ++ch) {
                                const int cc = ((dt * p.ph + dy) * p.pw + dx) * 3 + ch;
                                g.data.at(ti, yi, xi, cc) =
                                    video.at(ti * p.pt + dt, yi * p.ph + dy, xi * p.pw + dx, ch);
                            }
    return g;
}

inline Tensor decode(const LatentGrid& g) {
    decode_calls().fetch_add(1, std::memory_order_relaxed);
    const auto& p = g.patch;
    const int f = g.t() * p.pt, hh = g.h() * p.ph, ww = g.w() * p.pw;
    if (g.c() != latent_channels(p)) throw DataError("decode: channel mismatch");
    Tensor video({f, hh, ww, 3});
    for (int ti = 0; ti < g.t(); ++ti)
        for (int yi = 0; yi < g.h(); ++yi)
            for (int xi = 0; xi < g.w(); ++xi)
                for (int dt = 0; dt < p.pt; ++dt)
                    for (int dy = 0; dy < p.ph; ++dy)
                        for (int dx = 0; dx < p.pw; ++dx)
                            for (int ch = 0; ch < 3; ++ch) {
                                const int cc = ((dt * p.ph + dy) * p.pw + dx) * 3 + ch;
                                video.at(ti * p.pt + dt, yi * p.ph + dy, xi * p.pw + dx, ch) =
                                    g.data.at(ti, yi, xi, cc);
                            }
    return video;
}

// Decode a latent stored as a token matrix [T*h*w, c].
inline Tensor decode_tokens(const Tensor& tokens, int t, int h, int w, const PatchSize& p = {}) {
    LatentGrid g;
    g.patch = p;
    g.data = tokens.reshaped({t, h, w, latent_channels(p)});
    return decode(g);
}

}  // namespace spritelab::codec
