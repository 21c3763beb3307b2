#pragma once

#include <array>
#include <cmath>

#include "spritelab/core/rng.hpp"
#include "spritelab/core/tensor.hpp"

namespace spritelab::cond {

namespace detail {

using Mat3 = std::array<std::array<double, 3>, 3>;

inline Mat3 identity3() { return {{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}}; }

inline Mat3 matmul3(const Mat3& a, const Mat3& b) {
    Mat3 c{};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            for (int k = 0; k < 3; ++k) c[static_cast<size_t>(i)][static_cast<size_t>(j)] += a[static_cast<size_t>(i)][static_cast<size_t>(k)] * b[static_cast<size_t>(k)][static_cast<size_t>(j)];
    return c;
}

inline Mat3 invert_affine(const Mat3& m) {
    const double a = m[0][0], b = m[0][1], c = m[0][2];
    const double d = m[1][0], e = m[1][1], f = m[1][2];
    const double det = a * e - b * d;
    Mat3 r = identity3();
    r[0][0] = e / det;
    r[0][1] = -b / det;
    r[1][0] = -d / det;
    r[1][1] = a / det;
    r[0][2] = -(r[0][0] * c + r[0][1] * f);
    r[1][2] = -(r[1][0] * c + r[1][1] * f);
    return r;
}

// Bilinear sample with white outside (references sit on white canvases).
inline std::array<float, 3> sample_bilinear(const Tensor& img, double x, double y) {
    const int hh = img.dim(1), ww = img.dim(2);
    const int x0 = static_cast<int>(std::floor(x)), y0 = static_cast<int>(std::floor(y));
    const double fx = x - x0, fy = y - y0;
    std::array<float, 3> out{};
    for (int c = 0; c < 3; ++c) {
        auto px = [&](int xi, int yi) -> double {
            if (xi < 0 || xi >= ww || yi < 0 || yi >= hh) return 1.0;
            return img.at(0, yi, xi, c);
        };
        out[static_cast<size_t>(c)] = static_cast<float>(
            (1 - fx) * (1 - fy) * px(x0, y0) + fx * (1 - fy) * px(x0 + 1, y0) +
            (1 - fx) * fy * px(x0, y0 + 1) + fx * fy * px(x0 + 1, y0 + 1));
    }
    return out;
}

}  // namespace detail

// Seeded reference augmentation: geometric transforms plus hue-free visual
// jitter. With probability 1-enable_prob the image passes through unchanged.
inline Tensor augment_reference(const Tensor& image, uint64_t seed, double enable_prob) {
    Rng rng(derive_seed(seed, 0xA769));
    if (!rng.bernoulli(enable_prob)) return image;

    const int hh = image.dim(1), ww = image.dim(2);
    const double cx = (ww - 1) / 2.0, cy = (hh - 1) / 2.0;

    // forward transform, composed about the image center
    detail::Mat3 fwd = detail::identity3();
    auto compose = [&](const detail::Mat3& m) { fwd = detail::matmul3(m, fwd); };

    if (rng.bernoulli(0.5)) compose({{{-1, 0, 0}, {0, 1, 0}, {0, 0, 1}}});  // hflip
    if (rng.bernoulli(0.5)) {
        const double a = rng.uniform(-25.0, 25.0) * M_PI / 180.0;
        compose({{{std::cos(a), -std::sin(a), 0}, {std::sin(a), std::cos(a), 0}, {0, 0, 1}}});
    }
    if (rng.bernoulli(0.5)) {
        const double k = rng.uniform(-0.2, 0.2);
        compose({{{1, k, 0}, {0, 1, 0}, {0, 0, 1}}});
    }
    if (rng.bernoulli(0.5)) {
        // crop a >=80% window and scale back to full size
        const double f = rng.uniform(0.8, 1.0);
        const double ox = rng.uniform(-(1 - f) * ww / 2.0, (1 - f) * ww / 2.0);
        const double oy = rng.uniform(-(1 - f) * hh / 2.0, (1 - f) * hh / 2.0);
        compose({{{1.0 / f, 0, -ox / f}, {0, 1.0 / f, -oy / f}, {0, 0, 1}}});
    }

    const detail::Mat3 inv = detail::invert_affine(fwd);
    Tensor out({1, hh, ww, 3});
    for (int y = 0; y < hh; ++y)
        for (int x = 0; x < ww; ++x) {
            const double dx = x - cx, dy = y - cy;
            const double sx = inv[0][0] * dx + inv[0][1] * dy + inv[0][2] + cx;
            const double sy = inv[1][0] * dx + inv[1][1] * dy + inv[1][2] + cy;
            const auto col = detail::sample_bilinear(image, sx, sy);
            for (int c = 0; c < 3; ++c) out.at(0, y, x, c) = col[static_cast<size_t>(c)];
        }

    if (rng.bernoulli(0.5)) {
        // box blur, radius 1 or 2
        const int r = static_cast<int>(rng.uniform_int(1, 2));
        Tensor blur({1, hh, ww, 3});
        for (int y = 0; y < hh; ++y)
            for (int x = 0; x < ww; ++x)
                for (int c = 0; c < 3; ++c) {
                    double acc = 0.0;
                    int cnt = 0;
                    for (int yy = std::max(0, y - r); yy <= std::min(hh - 1, y + r); ++yy)
                        for (int xx = std::max(0, x - r); xx <= std::min(ww - 1, x + r); ++xx) {
                            acc += out.at(0, yy, xx, c);
                            ++cnt;
                        }
                    blur.at(0, y, x, c) = static_cast<float>(acc / cnt);
                }
        out = blur;
    }
    if (rng.bernoulli(0.5)) {
        // brightness/contrast jitter, identical across channels and kept
        // inside [0,1] so no channel clamps (clamping would rotate hue, and
        // hue is never jittered: identity must survive augmentation)
        const float contrast = 1.0f - static_cast<float>(rng.uniform(0.0, 0.15));
        const float bright = 1.0f - static_cast<float>(rng.uniform(0.0, 0.15));
        for (int64_t i = 0; i < out.numel(); ++i)
            out[i] = ((out[i] - 0.5f) * contrast + 0.5f) * bright;
    }
    return out;
}

// HSV hue in degrees, for the augmentation invariance check.
inline double pixel_hue_deg(float r, float g, float b) {
    const float mx = std::max({r, g, b}), mn = std::min({r, g, b});
    const float c = mx - mn;
    if (c < 1e-6f) return 0.0;
    double h;
    if (mx == r)
        h = std::fmod((g - b) / c, 6.0f);
    else if (mx == g)
        h = (b - r) / c + 2.0f;
    else
        h = (r - g) / c + 4.0f;
    return 60.0 * (h < 0 ? h + 6.0 : h);
}

}  // namespace spritelab::cond
