#pragma once

#include <optional>
#include <set>

#include "spritelab/core/error.hpp"
#include "spritelab/core/rng.hpp"
#include "spritelab/world/generate.hpp"
#include "spritelab/world/types.hpp"

namespace spritelab::world {

namespace detail {

// Low-contrast periodic gradient plus faint speckle, rigidly shifted by the
// integer camera pan. Periodic in the frame size so shifts never run out.
inline float background_value(const SceneSpec& scene, int f, int x, int y) {
    const int period_x = scene.width, period_y = scene.height;
    auto wrap = [](int v, int p) { return ((v % p) + p) % p; };
    const int wx = wrap(x - scene.camera_pan[0] * f, period_x);
    const int wy = wrap(y - scene.camera_pan[1] * f, period_y);
    const float g =
        0.45f + 0.06f * std::sin(2.0f * static_cast<float>(M_PI) * wx / period_x) +
        0.05f * std::cos(2.0f * static_cast<float>(M_PI) * wy / period_y) +
        0.03f * std::sin(2.0f * static_cast<float>(M_PI) * (wx + wy) / period_x);
    const float spk = 0.05f * (geom::hash01(derive_seed(scene.seed, 0xB6), wx / 2, wy / 2) - 0.5f);
    return std::clamp(g + spk, 0.0f, 1.0f);
}

inline std::array<float, 3> subject_pixel_color(const SubjectSpec& sub, const Pose& pose, float px,
                                                float py) {
    const float dx = px - pose.center[0], dy = py - pose.center[1];
    const float c = std::cos(-pose.rot), s = std::sin(-pose.rot);
    const float ux = (c * dx - s * dy) / pose.scale;
    const float uy = (s * dx + c * dy) / pose.scale;
    const float m = geom::speckle(sub.texture_seed, ux, uy);
    return {std::clamp(sub.color[0] * m, 0.0f, 1.0f), std::clamp(sub.color[1] * m, 0.0f, 1.0f),
            std::clamp(sub.color[2] * m, 0.0f, 1.0f)};
}

}  // namespace detail

constexpr int kObjectTracksPerSubject = 4;
constexpr int kBackgroundTracks = 6;

inline AnnotatedClip render_clip(const SceneSpec& scene) {
    const int ft = scene.total_frames(), hh = scene.height, ww = scene.width;
    const int ns = static_cast<int>(scene.subjects.size());
    AnnotatedClip clip;
    clip.scene = scene;
    clip.seed = scene.seed;
    clip.train_frames = scene.frames;
    clip.caption_tokens = scene.caption_tokens;
    clip.video = Tensor({ft, hh, ww, 3});
    clip.masks.assign(static_cast<size_t>(ns), Tensor({ft, hh, ww}));
    clip.boxes.assign(static_cast<size_t>(ns), {});

    for (int f = 0; f < ft; ++f)
        for (int y = 0; y < hh; ++y)
            for (int x = 0; x < ww; ++x) {
                const float b = detail::background_value(scene, f, x, y);
                for (int ch = 0; ch < 3; ++ch) clip.video.at(f, y, x, ch) = b;
            }

    for (int si = 0; si < ns; ++si) {
        const auto& sub = scene.subjects[static_cast<size_t>(si)];
        const auto& mot = scene.motions[static_cast<size_t>(si)];
        auto& mask = clip.masks[static_cast<size_t>(si)];
        for (int f = 0; f < ft; ++f) {
            const Pose pose = subject_pose(mot, f);
            const int ext = static_cast<int>(std::ceil(sub.size * 0.5f * pose.scale)) + 2;
            int x0 = ww, y0 = hh, x1 = -1, y1 = -1;
            for (int y = std::max(0, pose.center[1] - ext);
                 y <= std::min(hh - 1, pose.center[1] + ext); ++y)
                for (int x = std::max(0, pose.center[0] - ext);
                     x <= std::min(ww - 1, pose.center[0] + ext); ++x) {
                    if (!geom::in_subject(sub, pose, static_cast<float>(x), static_cast<float>(y)))
                        continue;
                    mask.at(f, y, x) = 1.0f;
                    const auto col = detail::subject_pixel_color(sub, pose, static_cast<float>(x),
                                                                 static_cast<float>(y));
                    for (int ch = 0; ch < 3; ++ch) clip.video.at(f, y, x, ch) = col[ch];
                    x0 = std::min(x0, x);
                    y0 = std::min(y0, y);
                    x1 = std::max(x1, x);
                    y1 = std::max(y1, y);
                }
            if (x1 < 0) throw NumericError("render_clip: empty subject mask");
            clip.boxes[static_cast<size_t>(si)].push_back(
                {static_cast<float>(x0), static_cast<float>(y0), static_cast<float>(x1 + 1),
                 static_cast<float>(y1 + 1)});
        }
    }

    // annotation tracks: points attached to subjects, plus background points
    Rng track_rng(derive_seed(scene.seed, 0x7AC5));
    int next_id = 0;
    for (int si = 0; si < ns; ++si) {
        const auto& sub = scene.subjects[static_cast<size_t>(si)];
        const auto& mot = scene.motions[static_cast<size_t>(si)];
        const float inr = geom::inradius(sub.shape, sub.size * 0.5f);
        for (int k = 0; k < kObjectTracksPerSubject; ++k) {
            std::array<float, 2> u{};
            bool found = false;
            for (int attempt = 0; attempt < 300 && !found; ++attempt) {
                const float rad = static_cast<float>(track_rng.uniform(0.0, 0.7 * inr));
                const float ang = static_cast<float>(track_rng.uniform(0.0, 2.0 * M_PI));
                u = {rad * std::cos(ang), rad * std::sin(ang)};
                found = true;
                for (int f = 0; f < ft && found; ++f) {
                    const Pose pose = subject_pose(mot, f);
                    const float c = std::cos(pose.rot), s = std::sin(pose.rot);
                    const float px = pose.center[0] + pose.scale * (c * u[0] - s * u[1]);
                    const float py = pose.center[1] + pose.scale * (s * u[0] + c * u[1]);
                    const int rx = static_cast<int>(std::lround(px));
                    const int ry = static_cast<int>(std::lround(py));
                    if (rx < 0 || rx >= ww || ry < 0 || ry >= hh ||
                        !geom::in_subject(sub, pose, static_cast<float>(rx), static_cast<float>(ry)))
                        found = false;
                }
            }
            if (!found) throw NumericError("render_clip: could not place object track");
            Track tr;
            tr.track_id = next_id++;
            tr.subject_id = si;
            for (int f = 0; f < ft; ++f) {
                const Pose pose = subject_pose(mot, f);
                const float c = std::cos(pose.rot), s = std::sin(pose.rot);
                tr.points.push_back({pose.center[0] + pose.scale * (c * u[0] - s * u[1]),
                                     pose.center[1] + pose.scale * (s * u[0] + c * u[1])});
                tr.visible.push_back(1);
            }
            clip.tracks.push_back(std::move(tr));
        }
    }
    for (int k = 0; k < kBackgroundTracks; ++k) {
        std::array<int, 2> p0{};
        bool found = false;
        // clearance keeps the tracker's 8x8 template on background content;
        // relax it if the scene is too crowded (mask disjointness still holds)
        for (float clearance : {7.0f, 5.0f, 3.0f, 0.5f}) {
            for (int attempt = 0; attempt < 500 && !found; ++attempt) {
                p0 = {static_cast<int>(track_rng.uniform_int(4, ww - 5)),
                      static_cast<int>(track_rng.uniform_int(4, hh - 5))};
                found = true;
                for (int f = 0; f < ft && found; ++f) {
                    const int px = p0[0] + scene.camera_pan[0] * f;
                    const int py = p0[1] + scene.camera_pan[1] * f;
                    if (px < 1 || px >= ww - 1 || py < 1 || py >= hh - 1) found = false;
                    for (int si = 0; si < ns && found; ++si) {
                        const auto& sub = scene.subjects[static_cast<size_t>(si)];
                        const Pose pose =
                            subject_pose(scene.motions[static_cast<size_t>(si)], f);
                        if (geom::in_subject(sub, pose, static_cast<float>(px),
                                             static_cast<float>(py)))
                            found = false;
                        const float dx = static_cast<float>(px) - pose.center[0];
                        const float dy = static_cast<float>(py) - pose.center[1];
                        if (std::hypot(dx, dy) <
                            0.95f * sub.size * 0.5f * pose.scale + clearance)
                            found = false;
                    }
                }
            }
            if (found) break;
        }
        if (!found) throw NumericError("render_clip: could not place background track");
        Track tr;
        tr.track_id = next_id++;
        tr.subject_id = -1;
        for (int f = 0; f < ft; ++f) {
            tr.points.push_back({static_cast<float>(p0[0] + scene.camera_pan[0] * f),
                                 static_cast<float>(p0[1] + scene.camera_pan[1] * f)});
            tr.visible.push_back(1);
        }
        clip.tracks.push_back(std::move(tr));
    }
    return clip;
}

// Subject isolated on a white canvas via its mask, taken from a pool frame.
// `train_window_end` guards the temporal-disjointness precondition.
inline Tensor make_reference_image(const AnnotatedClip& clip, int subject_id,
                                   const std::set<int>& frame_pool, int train_window_end = 0) {
    if (frame_pool.empty()) throw DataError("make_reference_image: empty frame pool");
    for (int f : frame_pool) {
        if (f < 0 || f >= clip.total_frames())
            throw DataError("make_reference_image: pool frame out of range");
        if (train_window_end > 0 && f < train_window_end)
            throw DataError("reference pool overlaps training window");
    }
    const auto& mask = clip.masks.at(static_cast<size_t>(subject_id));
    const int hh = clip.height(), ww = clip.width();
    for (int f : frame_pool) {
        double area = 0.0;
        for (int y = 0; y < hh; ++y)
            for (int x = 0; x < ww; ++x) area += mask.at(f, y, x);
        if (area <= 0.0) continue;
        Tensor img({1, hh, ww, 3});
        img.fill(1.0f);
        for (int y = 0; y < hh; ++y)
            for (int x = 0; x < ww; ++x)
                if (mask.at(f, y, x) > 0.5f)
                    for (int ch = 0; ch < 3; ++ch) img.at(0, y, x, ch) = clip.video.at(f, y, x, ch);
        return img;
    }
    throw DataError("subject not visible");
}

inline std::set<int> reference_pool(const AnnotatedClip& clip) {
    std::set<int> pool;
    for (int f = clip.train_frames; f < clip.total_frames(); ++f) pool.insert(f);
    return pool;
}

inline Tensor train_window_video(const AnnotatedClip& clip) {
    const int f = clip.train_frames, hh = clip.height(), ww = clip.width();
    Tensor out({f, hh, ww, 3});
    std::copy_n(clip.video.data(), out.numel(), out.data());
    return out;
}

namespace detail {

// 120-degree hue rotation about the gray axis is exactly a channel cycle.
inline void hue_rotate_subject(Tensor& video, const Tensor& mask, int frames) {
    for (int f = 0; f < frames; ++f)
        for (int y = 0; y < video.dim(1); ++y)
            for (int x = 0; x < video.dim(2); ++x) {
                if (mask.at(f, y, x) < 0.5f) continue;
                const float r = video.at(f, y, x, 0), g = video.at(f, y, x, 1),
                            b = video.at(f, y, x, 2);
                video.at(f, y, x, 0) = b;
                video.at(f, y, x, 1) = r;
                video.at(f, y, x, 2) = g;
            }
}

}  // namespace detail

// win = original training window; lose differs only in identity-relevant
// content. Labels: win -> 1, lose -> 0.
inline PreferencePair make_preference_pair(const AnnotatedClip& clip, Corruption corruption,
                                           uint64_t seed,
                                           std::optional<std::vector<int>> donor_palette = {}) {
    if (clip.scene.subjects.empty()) throw DataError("make_preference_pair: no subjects");
    Rng rng(derive_seed(seed, 0xFA17));
    const int si = static_cast<int>(rng.uniform_int(0, static_cast<int64_t>(clip.scene.subjects.size()) - 1));
    const int ft = clip.train_frames, hh = clip.height(), ww = clip.width();

    PreferencePair pair;
    pair.caption_tokens = clip.caption_tokens;
    pair.corrupted_subject = si;
    pair.win = train_window_video(clip);
    const std::set<int> pool = reference_pool(clip);
    for (size_t s = 0; s < clip.scene.subjects.size(); ++s) {
        pair.refs.push_back(
            make_reference_image(clip, static_cast<int>(s), pool, clip.train_frames));
        pair.ref_subject_ids.push_back(static_cast<int>(s));
    }

    Corruption effective = corruption;
    if (corruption == Corruption::kIdentitySwap) {
        std::vector<int> donors;
        if (donor_palette) {
            donors = *donor_palette;
        } else {
            for (size_t i = 0; i < palette().size(); ++i) donors.push_back(static_cast<int>(i));
        }
        for (const auto& sub : clip.scene.subjects)
            donors.erase(std::remove(donors.begin(), donors.end(), sub.palette_index),
                         donors.end());
        if (donors.empty()) {
            effective = Corruption::kHueShift;  // degenerate donor pool: fall back
        } else {
            SceneSpec swapped = clip.scene;
            auto& sub = swapped.subjects[static_cast<size_t>(si)];
            sub.palette_index = donors[static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(donors.size()) - 1))];
            sub.color = palette()[static_cast<size_t>(sub.palette_index)].rgb;
            sub.shape = static_cast<Shape>((static_cast<int>(sub.shape) + 1) % 3);
            sub.texture_seed = derive_seed(seed, 0xD0D0);
            pair.lose = train_window_video(render_clip(swapped));
            pair.corruption = Corruption::kIdentitySwap;
            return pair;
        }
    }

    if (effective == Corruption::kHueShift) {
        Tensor lose = pair.win;
        detail::hue_rotate_subject(lose, clip.masks[static_cast<size_t>(si)], ft);
        pair.lose = std::move(lose);
        pair.corruption = Corruption::kHueShift;
        return pair;
    }

    // static_paste: erase the subject each frame (background is closed-form),
    // then paste the frame-0 crop at the moving box-center location.
    Tensor lose = pair.win;
    const auto& mask = clip.masks[static_cast<size_t>(si)];
    const auto& mot = clip.scene.motions[static_cast<size_t>(si)];
    const Pose pose0 = subject_pose(mot, 0);
    for (int f = 1; f < ft; ++f) {
        for (int y = 0; y < hh; ++y)
            for (int x = 0; x < ww; ++x)
                if (mask.at(f, y, x) > 0.5f) {
                    const float b = detail::background_value(clip.scene, f, x, y);
                    for (int ch = 0; ch < 3; ++ch) lose.at(f, y, x, ch) = b;
                }
        const Pose pose = subject_pose(mot, f);
        const int dx = pose.center[0] - pose0.center[0];
        const int dy = pose.center[1] - pose0.center[1];
        for (int y = 0; y < hh; ++y)
            for (int x = 0; x < ww; ++x) {
                if (mask.at(0, y, x) < 0.5f) continue;
                const int tx = x + dx, ty = y + dy;
                if (tx < 0 || tx >= ww || ty < 0 || ty >= hh) continue;
                for (int ch = 0; ch < 3; ++ch) lose.at(f, ty, tx, ch) = clip.video.at(0, y, x, ch);
            }
    }
    pair.lose = std::move(lose);
    pair.corruption = Corruption::kStaticPaste;
    return pair;
}

}  // namespace spritelab::world
