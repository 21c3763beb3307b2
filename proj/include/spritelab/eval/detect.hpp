#pragma once

#include <optional>
#include <vector>

#include "spritelab/cond/boxes.hpp"
#include "spritelab/core/tensor.hpp"
#include "spritelab/world/types.hpp"

namespace spritelab::evalkit {

using cond::Box;

// Subject pixels are scalar multiples of their base color (speckle), so a
// pixel matches a subject when it sits close to the ray {m * color}. The gray
// background band stays far from every saturated palette ray.
struct DetectorConfig {
    float ray_tolerance = 0.12f;
    float min_gain = 0.55f, max_gain = 1.35f;
    int min_pixels = 3;  // components smaller than this are noise
};

namespace detail {

inline float ray_distance(const float* pix, const std::array<float, 3>& color, float min_gain,
                          float max_gain) {
    const float cc = color[0] * color[0] + color[1] * color[1] + color[2] * color[2];
    if (cc < 1e-8f) return 1e9f;
    float pc = 0.0f;
    for (int i = 0; i < 3; ++i) pc += pix[static_cast<size_t>(i)] * color[static_cast<size_t>(i)];
    const float m = std::clamp(pc / cc, min_gain, max_gain);
    float d2 = 0.0f;
    for (int i = 0; i < 3; ++i) {
        const float e = pix[static_cast<size_t>(i)] - m * color[static_cast<size_t>(i)];
        d2 += e * e;
    }
    return std::sqrt(d2);
}

// Largest 4-connected component of `labels == target`; returns its tight box.
inline std::optional<Box> largest_component_box(const std::vector<int>& labels, int target, int hh,
                                                int ww, int min_pixels) {
    std::vector<int> comp(static_cast<size_t>(hh) * ww, -1);
    std::optional<Box> best;
    int best_size = 0;
    std::vector<int> stack;
    int n_comp = 0;
    for (int start = 0; start < hh * ww; ++start) {
        if (labels[static_cast<size_t>(start)] != target || comp[static_cast<size_t>(start)] >= 0)
            continue;
        int size = 0, x0 = ww, y0 = hh, x1 = -1, y1 = -1;
        stack.assign(1, start);
        comp[static_cast<size_t>(start)] = n_comp;
        while (!stack.empty()) {
            const int p = stack.back();
            stack.pop_back();
            const int y = p / ww, x = p % ww;
            ++size;
            x0 = std::min(x0, x);
            y0 = std::min(y0, y);
            x1 = std::max(x1, x);
            y1 = std::max(y1, y);
            const int nb[4] = {p - ww, p + ww, p - 1, p + 1};
            for (int k = 0; k < 4; ++k) {
                const int q = nb[k];
                if (q < 0 || q >= hh * ww) continue;
                if (k >= 2 && q / ww != y) continue;  // row wrap
                if (labels[static_cast<size_t>(q)] != target || comp[static_cast<size_t>(q)] >= 0)
                    continue;
                comp[static_cast<size_t>(q)] = n_comp;
                stack.push_back(q);
            }
        }
        ++n_comp;
        if (size >= min_pixels && size > best_size) {
            best_size = size;
            best = Box{static_cast<float>(x0), static_cast<float>(y0), static_cast<float>(x1 + 1),
                       static_cast<float>(y1 + 1)};
        }
    }
    return best;
}

}  // namespace detail

// Per-frame tight boxes for each expected subject; std::nullopt = ABSENT.
inline std::vector<std::vector<std::optional<Box>>> detect_subjects(
    const Tensor& video, const std::vector<world::SubjectSpec>& expected,
    const DetectorConfig& cfg = {}) {
    const int ft = video.dim(0), hh = video.dim(1), ww = video.dim(2);
    const int ns = static_cast<int>(expected.size());
    std::vector<std::vector<std::optional<Box>>> out(
        static_cast<size_t>(ns), std::vector<std::optional<Box>>(static_cast<size_t>(ft)));
    std::vector<int> labels(static_cast<size_t>(hh) * ww);
    for (int f = 0; f < ft; ++f) {
        for (int y = 0; y < hh; ++y)
            for (int x = 0; x < ww; ++x) {
                const float* pix = video.data() +
                                   ((static_cast<size_t>(f) * hh + y) * ww + x) * 3;
                int best = -1;
                float best_d = cfg.ray_tolerance;
                for (int s = 0; s < ns; ++s) {
                    const float d = detail::ray_distance(pix, expected[static_cast<size_t>(s)].color,
                                                         cfg.min_gain, cfg.max_gain);
                    if (d < best_d) {
                        best_d = d;
                        best = s;
                    }
                }
                labels[static_cast<size_t>(y) * ww + x] = best;
            }
        for (int s = 0; s < ns; ++s)
            out[static_cast<size_t>(s)][static_cast<size_t>(f)] =
                detail::largest_component_box(labels, s, hh, ww, cfg.min_pixels);
    }
    return out;
}

}  // namespace spritelab::evalkit
