#include <catch2/catch_amalgamated.hpp>

#include "spritelab/eval/detect.hpp"
#include "spritelab/eval/metrics.hpp"
#include "spritelab/world/render.hpp"

using namespace spritelab;
using namespace spritelab::evalkit;

TEST_CASE("detector recovers ground-truth boxes") {
    for (uint64_t seed = 600; seed < 608; ++seed) {
        const auto clip = world::render_clip(
            world::generate_scene(seed, 1 + static_cast<int>(seed % 3), 8, {64, 64}));
        const auto det = detect_subjects(clip.video, clip.scene.subjects);
        for (size_t s = 0; s < clip.scene.subjects.size(); ++s)
            for (int f = 0; f < clip.total_frames(); ++f) {
                REQUIRE(det[s][static_cast<size_t>(f)].has_value());
                CHECK(cond::iou(*det[s][static_cast<size_t>(f)],
                                clip.boxes[s][static_cast<size_t>(f)]) >= 0.95f);
            }
    }
}

TEST_CASE("detector returns ABSENT on blank video") {
    const Tensor blank = Tensor::full({2, 32, 32, 3}, 0.45f);
    world::SubjectSpec sub;
    sub.color = {0.85f, 0.1f, 0.1f};
    const auto det = detect_subjects(blank, {sub});
    for (int f = 0; f < 2; ++f) CHECK_FALSE(det[0][static_cast<size_t>(f)].has_value());
}

TEST_CASE("miou unit cases") {
    std::vector<std::vector<Box>> target = {{{0, 0, 8, 8}, {0, 0, 8, 8}}};
    std::vector<std::vector<std::optional<Box>>> same = {
        {Box{0, 0, 8, 8}, Box{0, 0, 8, 8}}};
    CHECK(miou(same, target) == 1.0);

    std::vector<std::vector<std::optional<Box>>> absent = {{std::nullopt, std::nullopt}};
    CHECK(miou(absent, target) == 0.0);

    std::vector<std::vector<std::optional<Box>>> half = {{Box{0, 0, 8, 8}, Box{20, 20, 28, 28}}};
    CHECK(miou(half, target) == 0.5);
}

namespace {

// textured static clip: background speckle only, no subjects, no pan
Tensor static_textured_video(int frames) {
    world::SceneSpec s;
    s.seed = 12345;
    s.frames = frames;
    s.ref_frames = 0;
    s.camera_pan = {0, 0};
    Tensor v({frames, 64, 64, 3});
    for (int f = 0; f < frames; ++f)
        for (int y = 0; y < 64; ++y)
            for (int x = 0; x < 64; ++x) {
                const float b = world::detail::background_value(s, f, x, y);
                for (int c = 0; c < 3; ++c) v.at(f, y, x, c) = b;
            }
    return v;
}

}  // namespace

TEST_CASE("epe: constant-offset targets give exactly 5.0") {
    const Tensor video = static_textured_video(8);
    std::vector<std::array<float, 2>> queries = {{20, 20}, {40, 28}, {12, 44}};
    std::vector<std::vector<std::array<float, 2>>> targets;
    for (const auto& q : queries) {
        std::vector<std::array<float, 2>> t;
        for (int f = 0; f < 8; ++f) t.push_back({q[0] + 3.0f, q[1] + 4.0f});
        targets.push_back(t);
    }
    const EpeResult r = epe(video, queries, targets);
    CHECK(std::abs(r.epe - 5.0) < 1e-6);
}

TEST_CASE("epe: per-frame growing offset follows the pythagorean pattern") {
    const Tensor video = static_textured_video(8);
    std::vector<std::array<float, 2>> queries = {{24, 24}, {40, 36}};
    std::vector<std::vector<std::array<float, 2>>> targets;
    for (const auto& q : queries) {
        std::vector<std::array<float, 2>> t;
        for (int f = 0; f < 8; ++f)
            t.push_back({q[0] + 3.0f * f, q[1] + 4.0f * f});
        targets.push_back(t);
    }
    const EpeResult r = epe(video, queries, targets);
    // static content, so the tracker stays put: mean over f=1..7 of 5f
    double expect = 0.0;
    for (int f = 1; f < 8; ++f) expect += 5.0 * f;
    expect /= 7.0;
    CHECK(std::abs(r.epe - expect) < 1e-5);
}

TEST_CASE("epe: oracle closure on ground-truth clips") {
    double worst = 0.0;
    for (uint64_t seed = 700; seed < 706; ++seed) {
        const auto clip = world::render_clip(
            world::generate_scene(seed, 1 + static_cast<int>(seed % 2), 8, {64, 64}));
        std::vector<std::array<float, 2>> queries;
        std::vector<std::vector<std::array<float, 2>>> targets;
        for (const auto& tr : clip.tracks) {
            queries.push_back(tr.points[0]);
            targets.emplace_back(tr.points.begin(), tr.points.begin() + clip.train_frames);
        }
        Tensor video = world::train_window_video(clip);
        const EpeResult r = epe(video, queries, targets);
        worst = std::max(worst, r.epe);
        CHECK(r.epe <= 0.5);
    }
    INFO("worst clip epe " << worst);
}

TEST_CASE("identity similarity: self, cross-identity, corruption ranking") {
    const auto clip = world::render_clip(world::generate_scene(801, 1, 8, {64, 64}));
    const auto pool = world::reference_pool(clip);
    const Tensor ref = world::make_reference_image(clip, 0, pool, clip.train_frames);

    // reference vs itself
    std::vector<std::optional<Box>> full_frame(1, Box{0, 0, 64, 64});
    CHECK(identity_similarity(ref, full_frame, ref) == Catch::Approx(1.0).margin(1e-9));

    // red circle vs blue square descriptors stay far apart
    world::SceneSpec red = world::generate_scene(802, 1, 8, {64, 64});
    red.subjects[0].shape = world::Shape::kCircle;
    red.subjects[0].palette_index = 0;
    red.subjects[0].color = world::palette()[0].rgb;
    world::SceneSpec blue = red;
    blue.subjects[0].shape = world::Shape::kSquare;
    blue.subjects[0].palette_index = 8;
    blue.subjects[0].color = world::palette()[8].rgb;
    const auto red_clip = world::render_clip(red);
    const auto blue_clip = world::render_clip(blue);
    const Tensor red_ref =
        world::make_reference_image(red_clip, 0, world::reference_pool(red_clip), 8);
    const Tensor blue_ref =
        world::make_reference_image(blue_clip, 0, world::reference_pool(blue_clip), 8);
    CHECK(identity_similarity(red_ref, full_frame, blue_ref) < 0.3);

    // hue-shifted corruption scores strictly below the original
    const auto pair = world::make_preference_pair(clip, world::Corruption::kHueShift, 5);
    std::vector<std::optional<Box>> boxes;
    for (int f = 0; f < clip.train_frames; ++f)
        boxes.push_back(clip.boxes[0][static_cast<size_t>(f)]);
    const double win_sim = identity_similarity(pair.win, boxes, ref);
    const double lose_sim = identity_similarity(pair.lose, boxes, ref);
    CHECK(lose_sim < win_sim);
}

TEST_CASE("identity descriptor is translation invariant") {
    const auto clip = world::render_clip(world::generate_scene(803, 1, 8, {64, 64}));
    const auto pool = world::reference_pool(clip);
    const Tensor ref = world::make_reference_image(clip, 0, pool, clip.train_frames);
    // shift the whole reference by an integer offset on a fresh white canvas
    Tensor shifted({1, 64, 64, 3});
    shifted.fill(1.0f);
    const int dx = 9, dy = -5;
    for (int y = 0; y < 64; ++y)
        for (int x = 0; x < 64; ++x) {
            const int sx = x - dx, sy = y - dy;
            if (sx < 0 || sx >= 64 || sy < 0 || sy >= 64) continue;
            for (int c = 0; c < 3; ++c) shifted.at(0, y, x, c) = ref.at(0, sy, sx, c);
        }
    std::vector<std::optional<Box>> full_frame(1, Box{0, 0, 64, 64});
    CHECK(identity_similarity(shifted, full_frame, ref) == Catch::Approx(1.0).margin(1e-9));
}

TEST_CASE("hue-shift corruption preserves the detected box track within 1px") {
    for (uint64_t seed = 820; seed < 824; ++seed) {
        const auto clip = world::render_clip(world::generate_scene(seed, 1, 8, {64, 64}));
        const auto pair = world::make_preference_pair(clip, world::Corruption::kHueShift, seed);

        const auto det_win = detect_subjects(pair.win, clip.scene.subjects);
        world::SubjectSpec shifted = clip.scene.subjects[0];
        // hue rotation is the channel cycle (r,g,b) -> (b,r,g)
        shifted.color = {clip.scene.subjects[0].color[2], clip.scene.subjects[0].color[0],
                         clip.scene.subjects[0].color[1]};
        const auto det_lose = detect_subjects(pair.lose, {shifted});
        for (int f = 0; f < clip.train_frames; ++f) {
            REQUIRE(det_win[0][static_cast<size_t>(f)].has_value());
            REQUIRE(det_lose[0][static_cast<size_t>(f)].has_value());
            for (int c = 0; c < 4; ++c)
                CHECK(std::abs((*det_win[0][static_cast<size_t>(f)])[static_cast<size_t>(c)] -
                               (*det_lose[0][static_cast<size_t>(f)])[static_cast<size_t>(c)]) <=
                      1.0f);
        }
    }
}

TEST_CASE("binding_correct scores assignments") {
    // two subjects on clean separated tracks
    std::vector<std::vector<Box>> asg = {{{0, 0, 8, 8}}, {{40, 40, 48, 48}}};
    std::vector<std::vector<std::optional<Box>>> good = {{Box{1, 1, 9, 9}},
                                                         {Box{40, 40, 48, 48}}};
    CHECK(binding_correct(good, asg, good, asg) == 1);
    // swapped detections fail
    std::vector<std::vector<std::optional<Box>>> swapped = {{Box{40, 40, 48, 48}},
                                                            {Box{0, 0, 8, 8}}};
    CHECK(binding_correct(swapped, asg, good, asg) == 0);
}
