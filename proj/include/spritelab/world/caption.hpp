#pragma once

#include <string>
#include <vector>

#include "spritelab/core/error.hpp"
#include "spritelab/world/types.hpp"

namespace spritelab::world {

// Templated caption vocabulary. Token 0 is the null/padding token, which also
// serves as the dropped-text condition for classifier-free guidance.
inline const std::vector<std::string>& vocab() {
    static const std::vector<std::string> v = {
        "<null>",  // 0
        "and",     // 1
        // colors: 2..13 (palette order)
        "crimson", "orange", "gold", "lime", "green", "teal", "cyan", "azure", "blue", "violet",
        "magenta", "pink",
        // shapes: 14..16
        "circle", "square", "triangle",
        // global motion verbs: 17..20
        "rests", "glides", "weaves", "arcs",
        // directions: 21..24
        "left", "right", "up", "down",
        // local dynamics: 25..28
        "steady", "spinning", "pulsing", "wobbling",
        // camera clause: 29..31
        "camera", "holds", "pans",
        // speed qualifiers: 32..33
        "slowly", "quickly",
        // filler words for template variety: 34..35
        "the", "while",
    };
    return v;
}

constexpr int kNullToken = 0;
constexpr int kCaptionLen = 24;

inline int vocab_size() { return static_cast<int>(vocab().size()); }

inline int color_token(int palette_index) { return 2 + palette_index; }
inline int shape_token(Shape s) { return 14 + static_cast<int>(s); }

inline int direction_token(float vx, float vy) {
    if (std::abs(vx) >= std::abs(vy)) return vx < 0 ? 21 : 22;
    return vy < 0 ? 23 : 24;
}

inline std::vector<int> build_caption(const SceneSpec& scene) {
    std::vector<int> toks;
    for (size_t i = 0; i < scene.subjects.size(); ++i) {
        const auto& sub = scene.subjects[i];
        const auto& mot = scene.motions[i];
        if (i) toks.push_back(1);  // and
        toks.push_back(color_token(sub.palette_index));
        toks.push_back(shape_token(sub.shape));
        switch (mot.path) {
            case PathKind::kStatic:
                toks.push_back(17);
                break;
            case PathKind::kLinear: {
                const float sp = std::hypot(mot.velocity[0], mot.velocity[1]);
                toks.push_back(18);
                toks.push_back(sp > 2.2f ? 33 : 32);
                toks.push_back(direction_token(mot.velocity[0], mot.velocity[1]));
                break;
            }
            case PathKind::kSine:
                toks.push_back(19);
                toks.push_back(direction_token(mot.velocity[0], mot.velocity[1]));
                break;
            case PathKind::kArc: {
                const auto a = path_center(mot, 0);
                const auto b = path_center(mot, scene.frames - 1);
                toks.push_back(20);
                toks.push_back(direction_token(b[0] - a[0], b[1] - a[1]));
                break;
            }
        }
        switch (mot.local) {
            case LocalMode::kNone: toks.push_back(25); break;
            case LocalMode::kSpin: toks.push_back(26); break;
            case LocalMode::kPulse: toks.push_back(27); break;
            case LocalMode::kWobble: toks.push_back(28); break;
        }
    }
    toks.push_back(29);  // camera
    if (scene.camera_pan[0] == 0 && scene.camera_pan[1] == 0) {
        toks.push_back(30);
    } else {
        toks.push_back(31);
        toks.push_back(direction_token(static_cast<float>(scene.camera_pan[0]),
                                       static_cast<float>(scene.camera_pan[1])));
    }
    if (static_cast<int>(toks.size()) > kCaptionLen)
        throw DataError("caption overflows template budget");
    toks.resize(kCaptionLen, kNullToken);
    return toks;
}

inline std::vector<int> null_caption() { return std::vector<int>(kCaptionLen, kNullToken); }

inline std::string caption_text(const std::vector<int>& toks) {
    std::string out;
    for (int t : toks) {
        if (t == kNullToken) continue;
        if (!out.empty()) out += ' ';
        out += vocab()[static_cast<size_t>(t)];
    }
    return out;
}

}  // namespace spritelab::world
