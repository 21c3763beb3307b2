#pragma once

#include <array>
#include <vector>

#include "spritelab/core/error.hpp"
#include "spritelab/core/rng.hpp"
#include "spritelab/core/tensor.hpp"
#include "spritelab/world/types.hpp"

namespace spritelab::cond {

using Box = std::array<float, 4>;  // x0, y0, x1, y1

struct BoxTrack {
    int subject_id = 0;
    std::vector<Box> boxes;  // one per frame
    std::array<float, 3> assigned_color{};
};

// Degenerate (zero-area) boxes have IoU 0, identical or not.
inline float iou(const Box& a, const Box& b) {
    const float aa = std::max(0.0f, a[2] - a[0]) * std::max(0.0f, a[3] - a[1]);
    const float ab = std::max(0.0f, b[2] - b[0]) * std::max(0.0f, b[3] - b[1]);
    if (aa <= 0.0f || ab <= 0.0f) return 0.0f;
    const float ix = std::max(0.0f, std::min(a[2], b[2]) - std::max(a[0], b[0]));
    const float iy = std::max(0.0f, std::min(a[3], b[3]) - std::max(a[1], b[1]));
    const float inter = ix * iy;
    return inter / (aa + ab - inter);
}

inline float min_adjacent_iou(const BoxTrack& track) {
    if (track.boxes.size() < 2) throw DataError("stability_filter: need >= 2 frames");
    float m = 1.0f;
    for (size_t f = 1; f < track.boxes.size(); ++f)
        m = std::min(m, iou(track.boxes[f - 1], track.boxes[f]));
    return m;
}

// True iff the track has no abrupt adjacent-frame fluctuation.
inline bool stability_filter(const BoxTrack& track, float threshold) {
    return min_adjacent_iou(track) >= threshold;
}

// Unique colors for rendered box videos come from a seeded shuffle of the
// fixed palette.
inline std::vector<std::array<float, 3>> assign_box_colors(int n, uint64_t seed) {
    std::vector<int> order(world::palette().size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    Rng rng(derive_seed(seed, 0xB0C5));
    rng.shuffle(order);
    if (n > static_cast<int>(order.size())) throw DataError("assign_box_colors: palette exhausted");
    std::vector<std::array<float, 3>> out;
    for (int i = 0; i < n; ++i)
        out.push_back(world::palette()[static_cast<size_t>(order[static_cast<size_t>(i)])].rgb);
    return out;
}

// Boxes rendered on a white canvas; overlapping regions average the colors.
// Pixel (x,y) counts as inside when its center lies in [x0,x1) x [y0,y1).
inline Tensor render_box_video(const std::vector<BoxTrack>& tracks, std::array<int, 2> hw,
                               int frames) {
    const int hh = hw[0], ww = hw[1];
    Tensor video({frames, hh, ww, 3});
    video.fill(1.0f);
    std::vector<int> count(static_cast<size_t>(hh) * ww);
    std::vector<std::array<float, 3>> acc(static_cast<size_t>(hh) * ww);
    for (int f = 0; f < frames; ++f) {
        std::fill(count.begin(), count.end(), 0);
        std::fill(acc.begin(), acc.end(), std::array<float, 3>{0, 0, 0});
        for (const auto& tr : tracks) {
            const Box& b = tr.boxes.at(static_cast<size_t>(f));
            const int x0 = std::max(0, static_cast<int>(std::ceil(b[0])));
            const int y0 = std::max(0, static_cast<int>(std::ceil(b[1])));
            const int x1 = std::min(ww, static_cast<int>(std::ceil(b[2])));
            const int y1 = std::min(hh, static_cast<int>(std::ceil(b[3])));
            for (int y = y0; y < y1; ++y)
                for (int x = x0; x < x1; ++x) {
                    auto& a = acc[static_cast<size_t>(y) * ww + x];
                    for (int c = 0; c < 3; ++c) a[static_cast<size_t>(c)] += tr.assigned_color[static_cast<size_t>(c)];
                    ++count[static_cast<size_t>(y) * ww + x];
                }
        }
        for (int y = 0; y < hh; ++y)
            for (int x = 0; x < ww; ++x) {
                const int k = count[static_cast<size_t>(y) * ww + x];
                if (!k) continue;
                const auto& a = acc[static_cast<size_t>(y) * ww + x];
                for (int c = 0; c < 3; ++c)
                    video.at(f, y, x, c) = a[static_cast<size_t>(c)] / static_cast<float>(k);
            }
    }
    return video;
}

// Utility for sparse user input: linear interpolation between given key
// boxes (start/end plus optional intermediates) to a dense per-frame track.
inline std::vector<Box> interpolate_box_track(const std::vector<std::pair<int, Box>>& keys,
                                              int frames) {
    if (keys.size() < 2) throw DataError("interpolate_box_track: need >= 2 key boxes");
    std::vector<std::pair<int, Box>> ks = keys;
    std::sort(ks.begin(), ks.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    if (ks.front().first != 0 || ks.back().first != frames - 1)
        throw DataError("interpolate_box_track: keys must span [0, frames-1]");
    std::vector<Box> out(static_cast<size_t>(frames));
    size_t k = 0;
    for (int f = 0; f < frames; ++f) {
        while (k + 1 < ks.size() && ks[k + 1].first < f) ++k;
        const auto& [fa, ba] = ks[k];
        const auto& [fb, bb] = ks[k + 1];
        const float t = fb == fa ? 0.0f : static_cast<float>(f - fa) / static_cast<float>(fb - fa);
        for (int c = 0; c < 4; ++c)
            out[static_cast<size_t>(f)][static_cast<size_t>(c)] =
                (1.0f - t) * ba[static_cast<size_t>(c)] + t * bb[static_cast<size_t>(c)];
    }
    return out;
}

inline std::vector<BoxTrack> clip_box_tracks(const world::AnnotatedClip& clip, int frames,
                                             uint64_t color_seed) {
    const int ns = static_cast<int>(clip.boxes.size());
    const auto colors = assign_box_colors(ns, color_seed);
    std::vector<BoxTrack> out;
    for (int s = 0; s < ns; ++s) {
        BoxTrack tr;
        tr.subject_id = s;
        tr.assigned_color = colors[static_cast<size_t>(s)];
        for (int f = 0; f < frames; ++f) tr.boxes.push_back(clip.boxes[static_cast<size_t>(s)][static_cast<size_t>(f)]);
        out.push_back(std::move(tr));
    }
    return out;
}

}  // namespace spritelab::cond
