#pragma once

#include <algorithm>

#include "spritelab/core/error.hpp"
#include "spritelab/core/rng.hpp"
#include "spritelab/world/caption.hpp"
#include "spritelab/world/types.hpp"

namespace spritelab::world {

namespace geom {

// Base shapes live in the subject frame; `r` is size/2. Shapes are sized so
// their support stays within radius ~0.95 r.
inline bool in_base_shape(Shape s, float ux, float uy, float r) {
    switch (s) {
        case Shape::kCircle:
            return ux * ux + uy * uy <= (0.92f * r) * (0.92f * r);
        case Shape::kSquare:
            return std::abs(ux) <= 0.78f * r && std::abs(uy) <= 0.78f * r;
        case Shape::kTriangle: {
            const float R = 0.95f * r;
            // vertices at -90, 30, 150 degrees (screen y points down)
            const float v0x = 0.0f, v0y = -R;
            const float v1x = R * 0.8660254f, v1y = R * 0.5f;
            const float v2x = -R * 0.8660254f, v2y = R * 0.5f;
            auto side = [](float ax, float ay, float bx, float by, float px, float py) {
                return (bx - ax) * (py - ay) - (by - ay) * (px - ax);
            };
            const float d0 = side(v0x, v0y, v1x, v1y, ux, uy);
            const float d1 = side(v1x, v1y, v2x, v2y, ux, uy);
            const float d2 = side(v2x, v2y, v0x, v0y, ux, uy);
            return (d0 >= 0 && d1 >= 0 && d2 >= 0) || (d0 <= 0 && d1 <= 0 && d2 <= 0);
        }
    }
    return false;
}

inline float inradius(Shape s, float r) {
    switch (s) {
        case Shape::kCircle: return 0.92f * r;
        case Shape::kSquare: return 0.78f * r;
        case Shape::kTriangle: return 0.475f * r;
    }
    return 0.0f;
}

// Does pixel/point p (world coords) fall inside the subject at this pose?
inline bool in_subject(const SubjectSpec& sub, const Pose& pose, float px, float py) {
    const float dx = px - pose.center[0], dy = py - pose.center[1];
    const float c = std::cos(-pose.rot), s = std::sin(-pose.rot);
    const float ux = (c * dx - s * dy) / pose.scale;
    const float uy = (s * dx + c * dy) / pose.scale;
    return in_base_shape(sub.shape, ux, uy, sub.size * 0.5f);
}

inline float hash01(uint64_t seed, int64_t x, int64_t y) {
    const uint64_t h = splitmix64(seed ^ splitmix64(static_cast<uint64_t>(x) * 0x9E3779B97F4A7C15ULL ^
                                                    static_cast<uint64_t>(y) + 0x165667B19E3779F9ULL));
    return static_cast<float>(h >> 11) * 0x1.0p-53f;
}

// Speckle multiplier attached to the subject frame (2 px texture cells).
inline float speckle(uint64_t texture_seed, float ux, float uy) {
    const auto cx = static_cast<int64_t>(std::floor(ux / 2.0f));
    const auto cy = static_cast<int64_t>(std::floor(uy / 2.0f));
    return 0.75f + 0.45f * hash01(texture_seed, cx, cy);
}

}  // namespace geom

struct GenerateOptions {
    int ref_frames = 2;
    float min_size = 10.0f, max_size = 16.0f;
    double static_prob = 0.10;
};

namespace detail {

inline float clearance_margin(const SubjectSpec& s) { return 1.25f * s.size * 0.5f + 2.0f; }

inline bool path_fits(const SceneSpec& scene, const SubjectSpec& sub, const MotionSpec& mot) {
    const float m = clearance_margin(sub);
    for (int f = 0; f < scene.total_frames(); ++f) {
        const auto c = path_center(mot, f);
        if (c[0] < m || c[0] > scene.width - 1 - m || c[1] < m || c[1] > scene.height - 1 - m)
            return false;
    }
    return true;
}

inline bool paths_clear(const SceneSpec& scene, const SubjectSpec& a, const MotionSpec& ma,
                        const SubjectSpec& b, const MotionSpec& mb) {
    const float need = 1.25f * (a.size + b.size) * 0.5f + 3.0f;
    for (int f = 0; f < scene.total_frames(); ++f) {
        const auto ca = path_center(ma, f), cb = path_center(mb, f);
        if (std::hypot(ca[0] - cb[0], ca[1] - cb[1]) < need) return false;
    }
    return true;
}

}  // namespace detail

// Deterministic procedural scene generation. Subjects get pairwise-distinct
// palette colors; paths are planned so subjects never overlap in any frame.
inline SceneSpec generate_scene(uint64_t seed, int n_subjects, int frames, std::array<int, 2> hw,
                                const GenerateOptions& opt = {}) {
    if (frames < 4) throw DataError("generate_scene: frames must be >= 4");
    if (hw[0] < 32 || hw[1] < 32) throw DataError("generate_scene: hw must be >= 32");
    if (n_subjects < 1 || n_subjects > 3) throw DataError("generate_scene: 1..3 subjects");

    SceneSpec scene;
    scene.seed = seed;
    scene.frames = frames;
    scene.ref_frames = opt.ref_frames;
    scene.height = hw[0];
    scene.width = hw[1];

    Rng id_rng(derive_seed(seed, 0xA11CE));
    Rng motion_rng(derive_seed(seed, 0xB0B));
    Rng pan_rng(derive_seed(seed, 0xCAFE));

    // camera pan: integer components, magnitude <= 4
    if (!pan_rng.bernoulli(0.4)) {
        while (true) {
            const int px = static_cast<int>(pan_rng.uniform_int(-3, 3));
            const int py = static_cast<int>(pan_rng.uniform_int(-3, 3));
            if (px == 0 && py == 0) continue;
            if (px * px + py * py > 16) continue;
            scene.camera_pan = {px, py};
            break;
        }
    }

    std::vector<int> colors(palette().size());
    for (size_t i = 0; i < colors.size(); ++i) colors[i] = static_cast<int>(i);
    id_rng.shuffle(colors);

    for (int i = 0; i < n_subjects; ++i) {
        SubjectSpec sub;
        sub.subject_id = i;
        sub.palette_index = colors[static_cast<size_t>(i)];
        sub.color = palette()[static_cast<size_t>(sub.palette_index)].rgb;
        sub.shape = static_cast<Shape>(id_rng.uniform_int(0, 2));
        sub.size = static_cast<float>(id_rng.uniform(opt.min_size, opt.max_size));
        sub.texture_seed = derive_seed(seed, 0x7E87u + static_cast<uint64_t>(i));
        scene.subjects.push_back(sub);
    }

    const float max_speed = n_subjects == 1 ? 3.0f : (n_subjects == 2 ? 2.4f : 1.8f);
    const int kRestartLimit = 12, kDrawLimit = 120;
    for (int restart = 0;; ++restart) {
        if (restart >= kRestartLimit) throw DataError("scene infeasible");
        scene.motions.clear();
        bool ok = true;
        for (int i = 0; i < n_subjects && ok; ++i) {
            const auto& sub = scene.subjects[static_cast<size_t>(i)];
            bool placed = false;
            for (int draw = 0; draw < kDrawLimit && !placed; ++draw) {
                MotionSpec mot;
                mot.subject_id = i;
                const float m = detail::clearance_margin(sub);
                mot.start = {static_cast<float>(motion_rng.uniform(m, scene.width - 1 - m)),
                             static_cast<float>(motion_rng.uniform(m, scene.height - 1 - m))};
                const double pk = motion_rng.uniform();
                if (pk < opt.static_prob) {
                    mot.path = PathKind::kStatic;
                } else if (pk < opt.static_prob + 0.45) {
                    mot.path = PathKind::kLinear;
                } else if (pk < opt.static_prob + 0.70) {
                    mot.path = PathKind::kSine;
                } else {
                    mot.path = PathKind::kArc;
                }
                const float sp = static_cast<float>(motion_rng.uniform(0.8, max_speed));
                const float ang = static_cast<float>(motion_rng.uniform(0.0, 2.0 * M_PI));
                mot.velocity = {sp * std::cos(ang), sp * std::sin(ang)};
                if (mot.path == PathKind::kSine) {
                    mot.sine_amp = static_cast<float>(motion_rng.uniform(1.0, 3.0));
                    mot.sine_phase = static_cast<float>(motion_rng.uniform(0.0, 2.0 * M_PI));
                }
                if (mot.path == PathKind::kArc) {
                    const float rad = static_cast<float>(motion_rng.uniform(6.0, 14.0));
                    const float ca = static_cast<float>(motion_rng.uniform(0.0, 2.0 * M_PI));
                    mot.arc_center = {mot.start[0] + rad * std::cos(ca),
                                      mot.start[1] + rad * std::sin(ca)};
                    mot.arc_omega = static_cast<float>(motion_rng.uniform(0.08, 0.22)) *
                                    (motion_rng.bernoulli(0.5) ? 1.0f : -1.0f);
                }
                const double lm = motion_rng.uniform();
                if (lm < 0.30) {
                    mot.local = LocalMode::kNone;
                } else if (lm < 0.55) {
                    mot.local = LocalMode::kSpin;
                    mot.spin_rate = static_cast<float>(motion_rng.uniform(0.06, 0.11)) *
                                    (motion_rng.bernoulli(0.5) ? 1.0f : -1.0f);
                } else if (lm < 0.80) {
                    mot.local = LocalMode::kPulse;
                    mot.pulse_amp = static_cast<float>(motion_rng.uniform(0.06, 0.10));
                } else {
                    mot.local = LocalMode::kWobble;
                    mot.wobble_amp = static_cast<float>(motion_rng.uniform(0.05, 0.10));
                }
                mot.local_phase = static_cast<float>(motion_rng.uniform(0.0, 2.0 * M_PI));

                if (!detail::path_fits(scene, sub, mot)) continue;
                bool clear = true;
                for (size_t j = 0; j < scene.motions.size(); ++j)
                    if (!detail::paths_clear(scene, sub, mot, scene.subjects[j], scene.motions[j]))
                        clear = false;
                if (!clear) continue;
                scene.motions.push_back(mot);
                placed = true;
            }
            ok = placed;
        }
        if (ok) break;
    }

    scene.caption_tokens = build_caption(scene);
    return scene;
}

// Mean per-frame motion magnitude over subjects and camera, px/frame. Data
// generation discards near-static scenes below a floor.
inline double motion_magnitude(const SceneSpec& scene) {
    double acc = 0.0;
    int cnt = 0;
    for (const auto& mot : scene.motions) {
        for (int f = 1; f < scene.frames; ++f) {
            const auto a = path_center(mot, f - 1), b = path_center(mot, f);
            acc += std::hypot(b[0] - a[0], b[1] - a[1]);
            ++cnt;
        }
    }
    const double pan = std::hypot(scene.camera_pan[0], scene.camera_pan[1]);
    if (cnt == 0) return pan;
    return acc / cnt + pan;
}

}  // namespace spritelab::world
