#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "spritelab/core/tensor.hpp"

namespace spritelab::world {

enum class Shape { kCircle = 0, kSquare = 1, kTriangle = 2 };

enum class PathKind { kStatic = 0, kLinear = 1, kSine = 2, kArc = 3 };

enum class LocalMode { kNone = 0, kSpin = 1, kPulse = 2, kWobble = 3 };

// The 12-color palette. Saturated entries, pairwise L-inf distance >= 0.3,
// far from the gray background band.
struct PaletteEntry {
    const char* name;
    std::array<float, 3> rgb;
};

inline const std::vector<PaletteEntry>& palette() {
    static const std::vector<PaletteEntry> p = {
        {"crimson", {0.85f, 0.10f, 0.10f}}, {"orange", {0.95f, 0.55f, 0.05f}},
        {"gold", {0.95f, 0.85f, 0.10f}},    {"lime", {0.55f, 0.90f, 0.10f}},
        {"green", {0.10f, 0.70f, 0.20f}},   {"teal", {0.05f, 0.65f, 0.60f}},
        {"cyan", {0.10f, 0.80f, 0.95f}},    {"azure", {0.15f, 0.45f, 0.95f}},
        {"blue", {0.10f, 0.10f, 0.85f}},    {"violet", {0.50f, 0.15f, 0.90f}},
        {"magenta", {0.90f, 0.15f, 0.80f}}, {"pink", {0.95f, 0.50f, 0.65f}},
    };
    return p;
}

struct SubjectSpec {
    int subject_id = 0;
    Shape shape = Shape::kCircle;
    std::array<float, 3> color{};  // channels in [0,1]
    int palette_index = -1;
    float size = 12.0f;  // diameter in px
    uint64_t texture_seed = 0;
};

struct MotionSpec {
    int subject_id = 0;
    PathKind path = PathKind::kLinear;
    std::array<float, 2> start{};     // initial center
    std::array<float, 2> velocity{};  // px/frame (linear / sine carrier)
    float sine_amp = 0.0f;            // perpendicular oscillation
    float sine_phase = 0.0f;
    std::array<float, 2> arc_center{};
    float arc_omega = 0.0f;  // radians/frame
    LocalMode local = LocalMode::kNone;
    float spin_rate = 0.0f;   // radians/frame
    float pulse_amp = 0.0f;   // relative scale oscillation
    float wobble_amp = 0.0f;  // radians
    float local_phase = 0.0f;
};

struct SceneSpec {
    uint64_t seed = 0;
    int frames = 8;      // training window
    int ref_frames = 2;  // extra frames rendered for the reference pool
    int height = 64, width = 64;
    std::array<int, 2> camera_pan{0, 0};  // integer px/frame
    std::vector<SubjectSpec> subjects;
    std::vector<MotionSpec> motions;
    std::vector<int> caption_tokens;

    int total_frames() const { return frames + ref_frames; }
};

// Pose of a subject at one frame: integer center, rotation, scale.
struct Pose {
    std::array<int, 2> center{};
    float rot = 0.0f;
    float scale = 1.0f;
};

inline std::array<float, 2> path_center(const MotionSpec& m, int f) {
    switch (m.path) {
        case PathKind::kStatic:
            return m.start;
        case PathKind::kLinear:
            return {m.start[0] + m.velocity[0] * f, m.start[1] + m.velocity[1] * f};
        case PathKind::kSine: {
            const float nx = -m.velocity[1], ny = m.velocity[0];
            const float nn = std::sqrt(nx * nx + ny * ny) + 1e-9f;
            const float s = m.sine_amp * std::sin(2.0f * static_cast<float>(M_PI) * f / 8.0f +
                                                  m.sine_phase);
            return {m.start[0] + m.velocity[0] * f + s * nx / nn,
                    m.start[1] + m.velocity[1] * f + s * ny / nn};
        }
        case PathKind::kArc: {
            const float dx = m.start[0] - m.arc_center[0], dy = m.start[1] - m.arc_center[1];
            const float a = m.arc_omega * f;
            const float ca = std::cos(a), sa = std::sin(a);
            return {m.arc_center[0] + ca * dx - sa * dy, m.arc_center[1] + sa * dx + ca * dy};
        }
    }
    return m.start;
}

inline Pose subject_pose(const MotionSpec& m, int f) {
    Pose p;
    const auto c = path_center(m, f);
    p.center = {static_cast<int>(std::lround(c[0])), static_cast<int>(std::lround(c[1]))};
    const float ph = 2.0f * static_cast<float>(M_PI) * f / 8.0f + m.local_phase;
    switch (m.local) {
        case LocalMode::kNone:
            break;
        case LocalMode::kSpin:
            p.rot = m.spin_rate * f;
            break;
        case LocalMode::kPulse:
            p.scale = 1.0f + m.pulse_amp * std::sin(ph);
            break;
        case LocalMode::kWobble:
            p.rot = m.wobble_amp * std::sin(ph);
            break;
    }
    return p;
}

// Annotation track: one point followed across all rendered frames.
struct Track {
    int track_id = 0;
    int subject_id = -1;  // -1 = background
    std::vector<std::array<float, 2>> points;
    std::vector<uint8_t> visible;
};

struct AnnotatedClip {
    Tensor video;                // [F_total, H, W, 3]
    std::vector<Tensor> masks;   // per subject, [F_total, H, W] of {0,1}
    std::vector<std::vector<std::array<float, 4>>> boxes;  // [subject][frame] (x0,y0,x1,y1)
    std::vector<Track> tracks;
    std::vector<int> caption_tokens;
    uint64_t seed = 0;
    int train_frames = 8;
    SceneSpec scene;

    int total_frames() const { return video.dim(0); }
    int height() const { return video.dim(1); }
    int width() const { return video.dim(2); }
};

enum class Corruption { kIdentitySwap = 0, kHueShift = 1, kStaticPaste = 2 };

inline const char* corruption_name(Corruption c) {
    switch (c) {
        case Corruption::kIdentitySwap: return "identity_swap";
        case Corruption::kHueShift: return "hue_shift";
        case Corruption::kStaticPaste: return "static_paste";
    }
    return "?";
}

// Label convention: y=1 for the win video, y=0 for the lose video.
struct PreferencePair {
    Tensor win, lose;                // [F,H,W,3] training-window videos
    std::vector<Tensor> refs;        // one reference image per subject
    std::vector<int> ref_subject_ids;
    std::vector<int> caption_tokens;
    Corruption corruption = Corruption::kHueShift;
    int corrupted_subject = 0;
};

}  // namespace spritelab::world
