#pragma once

#include <algorithm>
#include <array>
#include <vector>

#include "spritelab/core/error.hpp"
#include "spritelab/core/rng.hpp"
#include "spritelab/core/tensor.hpp"
#include "spritelab/world/generate.hpp"
#include "spritelab/world/types.hpp"

namespace spritelab::cond {

constexpr int kBackgroundSubject = -1;

struct TrajTrack {
    int track_id = 0;
    int subject_id = kBackgroundSubject;
    std::vector<std::array<float, 2>> points;  // per frame
    std::vector<uint8_t> visible;
};

struct TrajectorySet {
    std::vector<TrajTrack> tracks;
    int frames = 0;
};

enum class SampleMode { kGrid = 0, kObjectAware = 1 };

namespace detail {

// Which subject owns first-frame point p, or background.
inline int owner_at_frame0(const world::SceneSpec& scene, float px, float py) {
    for (size_t s = 0; s < scene.subjects.size(); ++s) {
        const world::Pose pose = world::subject_pose(scene.motions[s], 0);
        if (world::geom::in_subject(scene.subjects[s], pose, px, py)) return static_cast<int>(s);
    }
    return kBackgroundSubject;
}

// Follow ground-truth motion from a frame-0 point.
inline TrajTrack follow(const world::SceneSpec& scene, int frames, float px, float py, int owner,
                        int track_id) {
    TrajTrack tr;
    tr.track_id = track_id;
    tr.subject_id = owner;
    if (owner == kBackgroundSubject) {
        for (int f = 0; f < frames; ++f) {
            const float x = px + scene.camera_pan[0] * f, y = py + scene.camera_pan[1] * f;
            tr.points.push_back({x, y});
            tr.visible.push_back(x >= 0 && x <= scene.width - 1 && y >= 0 && y <= scene.height - 1);
        }
    } else {
        const auto& mot = scene.motions[static_cast<size_t>(owner)];
        const world::Pose p0 = world::subject_pose(mot, 0);
        const float c0 = std::cos(-p0.rot), s0 = std::sin(-p0.rot);
        const float dx = px - p0.center[0], dy = py - p0.center[1];
        const float ux = (c0 * dx - s0 * dy) / p0.scale, uy = (s0 * dx + c0 * dy) / p0.scale;
        for (int f = 0; f < frames; ++f) {
            const world::Pose pf = world::subject_pose(mot, f);
            const float c = std::cos(pf.rot), s = std::sin(pf.rot);
            const float x = pf.center[0] + pf.scale * (c * ux - s * uy);
            const float y = pf.center[1] + pf.scale * (s * ux + c * uy);
            tr.points.push_back({x, y});
            tr.visible.push_back(x >= 0 && x <= scene.width - 1 && y >= 0 && y <= scene.height - 1);
        }
    }
    return tr;
}

}  // namespace detail

// Grid mode jitters points over a uniform first-frame grid; object-aware mode
// samples strictly inside the union of subject masks. Points then follow the
// exact ground-truth motion of their owner (subject transform or camera pan).
inline TrajectorySet sample_trajectories(const world::AnnotatedClip& clip, SampleMode mode,
                                         int n_points, uint64_t seed) {
    if (n_points < 1) throw DataError("sample_trajectories: n_points >= 1");
    const auto& scene = clip.scene;
    const int frames = clip.train_frames;
    Rng rng(derive_seed(seed, 0x17A7));
    TrajectorySet set;
    set.frames = frames;

    if (mode == SampleMode::kGrid) {
        const int g = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n_points))));
        const float cw = static_cast<float>(scene.width) / g;
        const float ch = static_cast<float>(scene.height) / g;
        int id = 0;
        for (int gy = 0; gy < g && id < n_points; ++gy)
            for (int gx = 0; gx < g && id < n_points; ++gx) {
                const float px = std::min(static_cast<float>(scene.width - 1),
                                          gx * cw + static_cast<float>(rng.uniform(0.0, cw)));
                const float py = std::min(static_cast<float>(scene.height - 1),
                                          gy * ch + static_cast<float>(rng.uniform(0.0, ch)));
                const int owner = detail::owner_at_frame0(scene, px, py);
                set.tracks.push_back(detail::follow(scene, frames, px, py, owner, id++));
            }
        return set;
    }

    // object-aware: rejection-sample pixels inside the frame-0 mask union
    double area = 0.0;
    for (const auto& m : clip.masks)
        for (int y = 0; y < clip.height(); ++y)
            for (int x = 0; x < clip.width(); ++x) area += m.at(0, y, x);
    if (area <= 0.0) throw DataError("no foreground");
    int id = 0;
    int guard = 0;
    while (id < n_points) {
        if (++guard > 100000) throw DataError("no foreground");
        const float px = static_cast<float>(rng.uniform(0.0, scene.width - 1));
        const float py = static_cast<float>(rng.uniform(0.0, scene.height - 1));
        const int owner = detail::owner_at_frame0(scene, px, py);
        if (owner == kBackgroundSubject) continue;
        set.tracks.push_back(detail::follow(scene, frames, px, py, owner, id++));
    }
    return set;
}

// Random subset drop for robustness to trajectory density.
inline TrajectorySet drop_tracks(const TrajectorySet& set, double drop_rate, uint64_t seed) {
    Rng rng(derive_seed(seed, 0xD409));
    TrajectorySet out;
    out.frames = set.frames;
    for (const auto& tr : set.tracks)
        if (!rng.bernoulli(drop_rate)) out.tracks.push_back(tr);
    return out;
}

// Unique sinusoidal code per track id (transformer frequencies over the id).
inline std::vector<float> track_code(int track_id, int d_model) {
    if (d_model % 2 != 0) throw DataError("track_code: d_model must be even");
    std::vector<float> code(static_cast<size_t>(d_model));
    const int pairs = d_model / 2;
    for (int p = 0; p < pairs; ++p) {
        const double freq = std::pow(10000.0, -2.0 * p / d_model);
        code[static_cast<size_t>(2 * p)] = static_cast<float>(std::sin(track_id * freq));
        code[static_cast<size_t>(2 * p + 1)] = static_cast<float>(std::cos(track_id * freq));
    }
    return code;
}

struct TrajFeatureMap {
    Tensor map;  // [T, h, w, d_model]
    // subjects that wrote each latent cell, for group-embedding binding
    std::vector<std::vector<int>> cell_subjects;  // indexed t*h*w + y*w + x

    int cells() const { return map.dim(0) * map.dim(1) * map.dim(2); }
    Tensor token_matrix() const { return map.reshaped({cells(), map.dim(3)}); }
};

// Scatter per-track sinusoidal codes into a blank latent-shaped feature map.
// Colliding writes in one cell are averaged; accumulation runs in canonical
// (cell, track_id) order so the result is exactly permutation invariant.
// Out-of-bounds coordinates clamp to the border cell; invisible points skip.
inline TrajFeatureMap encode_trajectory_tokens(const TrajectorySet& trajs,
                                               std::array<int, 3> latent_thw, int d_model,
                                               std::array<int, 2> patch_hw = {8, 8}) {
    const int t = latent_thw[0], h = latent_thw[1], w = latent_thw[2];
    TrajFeatureMap out;
    out.map = Tensor({t, h, w, d_model});
    out.cell_subjects.assign(static_cast<size_t>(t) * h * w, {});
    if (trajs.frames && trajs.frames != t)
        throw DataError("encode_trajectory_tokens: frame/latent mismatch");

    struct Write {
        int cell;
        int track_id;
        int subject_id;
    };
    std::vector<Write> writes;
    for (const auto& tr : trajs.tracks) {
        for (int f = 0; f < t && f < static_cast<int>(tr.points.size()); ++f) {
            if (!tr.visible[static_cast<size_t>(f)]) continue;
            int cx = static_cast<int>(std::floor(tr.points[static_cast<size_t>(f)][0] / patch_hw[1]));
            int cy = static_cast<int>(std::floor(tr.points[static_cast<size_t>(f)][1] / patch_hw[0]));
            cx = std::clamp(cx, 0, w - 1);
            cy = std::clamp(cy, 0, h - 1);
            writes.push_back({(f * h + cy) * w + cx, tr.track_id, tr.subject_id});
        }
    }
    std::stable_sort(writes.begin(), writes.end(), [](const Write& a, const Write& b) {
        return a.cell != b.cell ? a.cell < b.cell : a.track_id < b.track_id;
    });

    std::vector<int> count(static_cast<size_t>(t) * h * w, 0);
    for (const auto& wr : writes) {
        const auto code = track_code(wr.track_id, d_model);
        float* cell = out.map.data() + static_cast<size_t>(wr.cell) * d_model;
        for (int j = 0; j < d_model; ++j) cell[j] += code[static_cast<size_t>(j)];
        ++count[static_cast<size_t>(wr.cell)];
        if (wr.subject_id != kBackgroundSubject) {
            auto& subs = out.cell_subjects[static_cast<size_t>(wr.cell)];
            if (std::find(subs.begin(), subs.end(), wr.subject_id) == subs.end())
                subs.push_back(wr.subject_id);
        }
    }
    for (size_t c = 0; c < count.size(); ++c) {
        if (count[c] <= 1) continue;
        float* cell = out.map.data() + c * static_cast<size_t>(d_model);
        const float inv = 1.0f / static_cast<float>(count[c]);
        for (int j = 0; j < d_model; ++j) cell[j] *= inv;
    }
    for (auto& subs : out.cell_subjects) std::sort(subs.begin(), subs.end());
    return out;
}

}  // namespace spritelab::cond
