#pragma once

#include <filesystem>

#include "spritelab/core/serialize.hpp"
#include "spritelab/world/render.hpp"
#include "spritelab/world/types.hpp"

namespace spritelab::world {

// Clip archive layout: one directory per clip holding raw little-endian
// float32 arrays (video.f32, masks.f32) plus manifest.json with boxes,
// tracks, caption tokens, seed and full scene parameters.

inline json scene_to_json(const SceneSpec& s) {
    json j;
    j["seed"] = s.seed;
    j["frames"] = s.frames;
    j["ref_frames"] = s.ref_frames;
    j["height"] = s.height;
    j["width"] = s.width;
    j["camera_pan"] = s.camera_pan;
    j["caption_tokens"] = s.caption_tokens;
    j["subjects"] = json::array();
    for (const auto& sub : s.subjects) {
        json e;
        e["subject_id"] = sub.subject_id;
        e["shape"] = static_cast<int>(sub.shape);
        e["color"] = sub.color;
        e["palette_index"] = sub.palette_index;
        e["size"] = sub.size;
        e["texture_seed"] = sub.texture_seed;
        j["subjects"].push_back(e);
    }
    j["motions"] = json::array();
    for (const auto& m : s.motions) {
        json e;
        e["subject_id"] = m.subject_id;
        e["path"] = static_cast<int>(m.path);
        e["start"] = m.start;
        e["velocity"] = m.velocity;
        e["sine_amp"] = m.sine_amp;
        e["sine_phase"] = m.sine_phase;
        e["arc_center"] = m.arc_center;
        e["arc_omega"] = m.arc_omega;
        e["local"] = static_cast<int>(m.local);
        e["spin_rate"] = m.spin_rate;
        e["pulse_amp"] = m.pulse_amp;
        e["wobble_amp"] = m.wobble_amp;
        e["local_phase"] = m.local_phase;
        j["motions"].push_back(e);
    }
    return j;
}

inline SceneSpec scene_from_json(const json& j) {
    SceneSpec s;
    s.seed = j.at("seed");
    s.frames = j.at("frames");
    s.ref_frames = j.at("ref_frames");
    s.height = j.at("height");
    s.width = j.at("width");
    s.camera_pan = j.at("camera_pan");
    s.caption_tokens = j.at("caption_tokens").get<std::vector<int>>();
    for (const auto& e : j.at("subjects")) {
        SubjectSpec sub;
        sub.subject_id = e.at("subject_id");
        sub.shape = static_cast<Shape>(e.at("shape").get<int>());
        sub.color = e.at("color");
        sub.palette_index = e.at("palette_index");
        sub.size = e.at("size");
        sub.texture_seed = e.at("texture_seed");
        s.subjects.push_back(sub);
    }
    for (const auto& e : j.at("motions")) {
        MotionSpec m;
        m.subject_id = e.at("subject_id");
        m.path = static_cast<PathKind>(e.at("path").get<int>());
        m.start = e.at("start");
        m.velocity = e.at("velocity");
        m.sine_amp = e.at("sine_amp");
        m.sine_phase = e.at("sine_phase");
        m.arc_center = e.at("arc_center");
        m.arc_omega = e.at("arc_omega");
        m.local = static_cast<LocalMode>(e.at("local").get<int>());
        m.spin_rate = e.at("spin_rate");
        m.pulse_amp = e.at("pulse_amp");
        m.wobble_amp = e.at("wobble_amp");
        m.local_phase = e.at("local_phase");
        s.motions.push_back(m);
    }
    return s;
}

inline void save_clip(const fs::path& dir, const AnnotatedClip& clip) {
    fs::create_directories(dir);
    write_f32(dir / "video.f32", clip.video);

    const int ns = static_cast<int>(clip.masks.size());
    const int64_t per = ns ? clip.masks[0].numel() : 0;
    std::vector<float> masks(static_cast<size_t>(ns * per));
    for (int s = 0; s < ns; ++s)
        std::copy_n(clip.masks[static_cast<size_t>(s)].data(), per,
                    masks.data() + static_cast<size_t>(s) * per);
    write_f32(dir / "masks.f32", masks.data(), masks.size());

    json man;
    man["format"] = "spritelab-clip-v1";
    man["seed"] = clip.seed;
    man["train_frames"] = clip.train_frames;
    man["video_shape"] = clip.video.shape();
    man["video_dtype"] = "float32";
    man["masks_shape"] = std::vector<int>{ns, clip.total_frames(), clip.height(), clip.width()};
    man["masks_dtype"] = "float32";
    man["caption_tokens"] = clip.caption_tokens;
    man["boxes"] = clip.boxes;
    json tracks = json::array();
    for (const auto& t : clip.tracks) {
        json e;
        e["track_id"] = t.track_id;
        e["subject_id"] = t.subject_id;
        e["points"] = t.points;
        e["visible"] = t.visible;
        tracks.push_back(e);
    }
    man["tracks"] = tracks;
    man["scene"] = scene_to_json(clip.scene);
    write_json(dir / "manifest.json", man);
}

inline AnnotatedClip load_clip(const fs::path& dir) {
    const json man = read_json(dir / "manifest.json");
    AnnotatedClip clip;
    clip.seed = man.at("seed");
    clip.train_frames = man.at("train_frames");
    clip.caption_tokens = man.at("caption_tokens").get<std::vector<int>>();
    clip.scene = scene_from_json(man.at("scene"));
    const std::vector<int> vshape = man.at("video_shape");
    clip.video = Tensor(vshape, read_f32(dir / "video.f32",
                                         static_cast<size_t>(Tensor::count(vshape))));
    const std::vector<int> mshape = man.at("masks_shape");
    const auto masks = read_f32(dir / "masks.f32", static_cast<size_t>(Tensor::count(mshape)));
    const int ns = mshape[0];
    const int64_t per = static_cast<int64_t>(mshape[1]) * mshape[2] * mshape[3];
    for (int s = 0; s < ns; ++s) {
        Tensor m({mshape[1], mshape[2], mshape[3]});
        std::copy_n(masks.data() + static_cast<size_t>(s) * per, per, m.data());
        clip.masks.push_back(std::move(m));
    }
    clip.boxes = man.at("boxes").get<std::vector<std::vector<std::array<float, 4>>>>();
    for (const auto& e : man.at("tracks")) {
        Track t;
        t.track_id = e.at("track_id");
        t.subject_id = e.at("subject_id");
        t.points = e.at("points").get<std::vector<std::array<float, 2>>>();
        t.visible = e.at("visible").get<std::vector<uint8_t>>();
        clip.tracks.push_back(std::move(t));
    }
    return clip;
}

inline std::vector<fs::path> list_clip_dirs(const fs::path& root) {
    std::vector<fs::path> dirs;
    if (!fs::exists(root)) throw DataError("clip archive not found: " + root.string());
    for (const auto& e : fs::directory_iterator(root))
        if (e.is_directory() && fs::exists(e.path() / "manifest.json")) dirs.push_back(e.path());
    std::sort(dirs.begin(), dirs.end());
    if (dirs.empty()) throw DataError("no clips in " + root.string());
    return dirs;
}

// Preference-pair archive: win/lose videos, references, caption, labels.
inline void save_pair(const fs::path& dir, const PreferencePair& p) {
    fs::create_directories(dir);
    write_f32(dir / "win.f32", p.win);
    write_f32(dir / "lose.f32", p.lose);
    for (size_t i = 0; i < p.refs.size(); ++i)
        write_f32(dir / ("ref" + std::to_string(i) + ".f32"), p.refs[i]);
    json man;
    man["format"] = "spritelab-pair-v1";
    man["video_shape"] = p.win.shape();
    man["ref_shape"] = p.refs.empty() ? std::vector<int>{} : p.refs[0].shape();
    man["n_refs"] = p.refs.size();
    man["ref_subject_ids"] = p.ref_subject_ids;
    man["caption_tokens"] = p.caption_tokens;
    man["corruption"] = corruption_name(p.corruption);
    man["corrupted_subject"] = p.corrupted_subject;
    man["labels"] = {{"win", 1}, {"lose", 0}};
    write_json(dir / "manifest.json", man);
}

inline PreferencePair load_pair(const fs::path& dir) {
    const json man = read_json(dir / "manifest.json");
    PreferencePair p;
    const std::vector<int> vshape = man.at("video_shape");
    p.win = Tensor(vshape, read_f32(dir / "win.f32", static_cast<size_t>(Tensor::count(vshape))));
    p.lose = Tensor(vshape, read_f32(dir / "lose.f32", static_cast<size_t>(Tensor::count(vshape))));
    const size_t nr = man.at("n_refs");
    const std::vector<int> rshape = man.at("ref_shape");
    for (size_t i = 0; i < nr; ++i)
        p.refs.push_back(Tensor(rshape, read_f32(dir / ("ref" + std::to_string(i) + ".f32"),
                                                 static_cast<size_t>(Tensor::count(rshape)))));
    p.ref_subject_ids = man.at("ref_subject_ids").get<std::vector<int>>();
    p.caption_tokens = man.at("caption_tokens").get<std::vector<int>>();
    p.corrupted_subject = man.at("corrupted_subject");
    const std::string c = man.at("corruption");
    p.corruption = c == "identity_swap" ? Corruption::kIdentitySwap
                   : c == "hue_shift"   ? Corruption::kHueShift
                                        : Corruption::kStaticPaste;
    return p;
}

}  // namespace spritelab::world
