#include <catch2/catch_amalgamated.hpp>

#include "spritelab/cond/augment.hpp"
#include "spritelab/cond/boxes.hpp"
#include "spritelab/cond/dropout.hpp"
#include "spritelab/cond/trajectory.hpp"
#include "spritelab/world/render.hpp"

using namespace spritelab;
using namespace spritelab::cond;

TEST_CASE("iou unit cases") {
    CHECK(iou({0, 0, 2, 2}, {0, 0, 2, 2}) == 1.0f);
    CHECK(iou({0, 0, 2, 2}, {5, 5, 7, 7}) == 0.0f);
    CHECK(iou({0, 0, 2, 2}, {1, 1, 3, 3}) == Catch::Approx(1.0 / 7.0).epsilon(1e-6));
    // degenerate boxes score 0, identical or not
    CHECK(iou({1, 1, 1, 3}, {1, 1, 1, 3}) == 0.0f);
    CHECK(iou({1, 1, 1, 1}, {0, 0, 2, 2}) == 0.0f);
}

TEST_CASE("stability filter: static, teleport, slow drift") {
    BoxTrack still;
    still.boxes = {{10, 10, 26, 26}, {10, 10, 26, 26}, {10, 10, 26, 26}};
    CHECK(stability_filter(still, 1.0f));

    BoxTrack teleport;
    teleport.boxes = {{0, 0, 16, 16}, {40, 40, 56, 56}};
    CHECK_FALSE(stability_filter(teleport, 0.01f));

    // 16 px box drifting 2 px/frame: adjacent IoU = (14*16)/(2*256-14*16) = 7/9
    BoxTrack drift;
    for (int f = 0; f < 8; ++f)
        drift.boxes.push_back({static_cast<float>(2 * f), 4.0f, static_cast<float>(16 + 2 * f), 20.0f});
    CHECK(min_adjacent_iou(drift) == Catch::Approx(7.0 / 9.0).epsilon(1e-6));
    CHECK(stability_filter(drift, 0.3f));

    // monotone in threshold
    const float m = min_adjacent_iou(drift);
    for (float th = 0.0f; th <= 1.0f; th += 0.1f)
        CHECK(stability_filter(drift, th) == (m >= th));

    BoxTrack single;
    single.boxes = {{0, 0, 1, 1}};
    CHECK_THROWS_AS(stability_filter(single, 0.5f), DataError);
}

TEST_CASE("render_box_video: white canvas, fills, overlap averaging") {
    const Tensor empty = render_box_video({}, {16, 16}, 2);
    for (int64_t i = 0; i < empty.numel(); ++i) REQUIRE(empty[i] == 1.0f);

    BoxTrack full;
    full.assigned_color = {0.2f, 0.4f, 0.6f};
    full.boxes = {{0, 0, 16, 16}};
    const Tensor filled = render_box_video({full}, {16, 16}, 1);
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x) {
            CHECK(filled.at(0, y, x, 0) == 0.2f);
            CHECK(filled.at(0, y, x, 1) == 0.4f);
            CHECK(filled.at(0, y, x, 2) == 0.6f);
        }

    BoxTrack red, blue;
    red.assigned_color = {1, 0, 0};
    red.boxes = {{0, 0, 8, 8}};
    blue.assigned_color = {0, 0, 1};
    blue.boxes = {{4, 4, 12, 12}};
    const Tensor overlap = render_box_video({red, blue}, {16, 16}, 1);
    CHECK(overlap.at(0, 5, 5, 0) == 0.5f);
    CHECK(overlap.at(0, 5, 5, 1) == 0.0f);
    CHECK(overlap.at(0, 5, 5, 2) == 0.5f);
    // commutative averaging: order does not matter
    const Tensor swapped = render_box_video({blue, red}, {16, 16}, 1);
    CHECK(overlap.same_bits(swapped));
}

TEST_CASE("interpolate_box_track densifies sparse keys") {
    const auto track = interpolate_box_track(
        {{0, {0, 0, 10, 10}}, {4, {8, 4, 18, 14}}}, 5);
    CHECK(track[0] == Box{0, 0, 10, 10});
    CHECK(track[4] == Box{8, 4, 18, 14});
    CHECK(track[2][0] == Catch::Approx(4.0));
    CHECK(track[2][1] == Catch::Approx(2.0));
}

TEST_CASE("object_aware sampling stays in masks; grid follows ground truth") {
    const auto clip = world::render_clip(world::generate_scene(301, 1, 8, {64, 64}));
    const TrajectorySet obj = sample_trajectories(clip, SampleMode::kObjectAware, 12, 5);
    REQUIRE(obj.tracks.size() == 12);
    for (const auto& tr : obj.tracks) {
        CHECK(tr.subject_id == 0);
        const int x = static_cast<int>(std::lround(tr.points[0][0]));
        const int y = static_cast<int>(std::lround(tr.points[0][1]));
        CHECK(clip.masks[0].at(0, y, x) > 0.5f);
    }

    world::SceneSpec still = world::generate_scene(302, 1, 8, {64, 64});
    still.motions[0].path = world::PathKind::kStatic;
    still.motions[0].local = world::LocalMode::kNone;
    still.camera_pan = {0, 0};
    const auto still_clip = world::render_clip(still);
    const TrajectorySet grid = sample_trajectories(still_clip, SampleMode::kGrid, 25, 6);
    for (const auto& tr : grid.tracks)
        for (size_t f = 1; f < tr.points.size(); ++f) CHECK(tr.points[f] == tr.points[0]);
}

TEST_CASE("drop_tracks retains the seeded subset") {
    const auto clip = world::render_clip(world::generate_scene(303, 2, 8, {64, 64}));
    const TrajectorySet all = sample_trajectories(clip, SampleMode::kGrid, 40, 9);
    const TrajectorySet kept = drop_tracks(all, 0.5, 77);
    const TrajectorySet again = drop_tracks(all, 0.5, 77);
    REQUIRE(kept.tracks.size() == again.tracks.size());
    for (size_t i = 0; i < kept.tracks.size(); ++i)
        CHECK(kept.tracks[i].track_id == again.tracks[i].track_id);
    CHECK(kept.tracks.size() >= 10);
    CHECK(kept.tracks.size() <= 30);
}

TEST_CASE("trajectory token scattering") {
    // zero tracks -> all-zero map
    TrajectorySet none;
    none.frames = 2;
    const auto zero = encode_trajectory_tokens(none, {2, 8, 8}, 32);
    CHECK(zero.map.sq_norm() == 0.0);

    // distinct ids get distinct codes
    const auto c1 = track_code(1, 32), c2 = track_code(2, 32);
    double d2 = 0.0;
    for (size_t i = 0; i < c1.size(); ++i) d2 += (c1[i] - c2[i]) * (c1[i] - c2[i]);
    CHECK(d2 > 1e-4);

    // a single static track at pixel (8,8) writes exactly cell (1,1) per frame
    TrajTrack tr;
    tr.track_id = 3;
    tr.subject_id = 0;
    for (int f = 0; f < 2; ++f) {
        tr.points.push_back({8.0f, 8.0f});
        tr.visible.push_back(1);
    }
    TrajectorySet one;
    one.frames = 2;
    one.tracks.push_back(tr);
    const auto map = encode_trajectory_tokens(one, {2, 8, 8}, 32);
    for (int t = 0; t < 2; ++t)
        for (int y = 0; y < 8; ++y)
            for (int x = 0; x < 8; ++x) {
                double n = 0.0;
                for (int j = 0; j < 32; ++j) n += std::abs(map.map.at(t, y, x, j));
                if (y == 1 && x == 1) {
                    CHECK(n > 0.0);
                    CHECK(map.cell_subjects[static_cast<size_t>((t * 8 + 1) * 8 + 1)] ==
                          std::vector<int>{0});
                } else {
                    CHECK(n == 0.0);
                }
            }

    // permutation invariance is exact (canonical accumulation order)
    const auto clip = world::render_clip(world::generate_scene(304, 2, 8, {64, 64}));
    TrajectorySet set = sample_trajectories(clip, SampleMode::kGrid, 30, 11);
    TrajectorySet shuffled = set;
    Rng rng(5);
    rng.shuffle(shuffled.tracks);
    const auto a = encode_trajectory_tokens(set, {8, 8, 8}, 32);
    const auto b = encode_trajectory_tokens(shuffled, {8, 8, 8}, 32);
    CHECK(a.map.same_bits(b.map));
}

TEST_CASE("augment_reference: identity, determinism, hue preservation") {
    const auto clip = world::render_clip(world::generate_scene(305, 1, 8, {64, 64}));
    const Tensor ref = world::make_reference_image(clip, 0, world::reference_pool(clip),
                                                   clip.train_frames);

    const Tensor same = augment_reference(ref, 1, 0.0);
    CHECK(same.same_bits(ref));

    const Tensor a = augment_reference(ref, 42, 1.0);
    const Tensor b = augment_reference(ref, 42, 1.0);
    CHECK(a.same_bits(b));
    CHECK(max_abs_diff(a, ref) > 0.0);

    // subject mean hue drifts < 5 degrees across 100 seeded augmentations
    auto mean_hue = [](const Tensor& img) {
        double sx = 0.0, sy = 0.0;
        int n = 0;
        for (int y = 0; y < img.dim(1); ++y)
            for (int x = 0; x < img.dim(2); ++x) {
                const float r = img.at(0, y, x, 0), g = img.at(0, y, x, 1), b2 = img.at(0, y, x, 2);
                // skip unsaturated pixels: background stays on the gray axis
                if (std::max({r, g, b2}) - std::min({r, g, b2}) < 0.1f) continue;
                const double h = pixel_hue_deg(r, g, b2) * M_PI / 180.0;
                sx += std::cos(h);
                sy += std::sin(h);
                ++n;
            }
        return std::atan2(sy / n, sx / n) * 180.0 / M_PI;
    };
    const double h0 = mean_hue(ref);
    for (uint64_t s = 0; s < 100; ++s) {
        const double h1 = mean_hue(augment_reference(ref, 1000 + s, 1.0));
        double d = std::abs(h1 - h0);
        if (d > 180.0) d = 360.0 - d;
        CHECK(d < 5.0);
    }
}

TEST_CASE("drop_conditions edge and Monte Carlo rates") {
    std::vector<ControlTriplet> base(3);
    for (int i = 0; i < 3; ++i) {
        base[static_cast<size_t>(i)].group_id = i;
        base[static_cast<size_t>(i)].subject_id = i;
        base[static_cast<size_t>(i)].has_reference = true;
        base[static_cast<size_t>(i)].has_box = true;
        base[static_cast<size_t>(i)].has_trajectories = true;
    }
    const auto keep = drop_conditions(base, 0.0, 1);
    for (const auto& t : keep) {
        CHECK(t.has_box);
        CHECK(t.has_trajectories);
        CHECK(t.has_reference);
    }
    const auto gone = drop_conditions(base, 1.0, 1);
    for (const auto& t : gone) {
        CHECK_FALSE(t.has_box);
        CHECK_FALSE(t.has_trajectories);
        CHECK(t.has_reference);
    }

    int dropped_box = 0, dropped_traj = 0;
    const int n = 1000;
    for (int i = 0; i < n; ++i) {
        const auto out = drop_conditions(base, 0.5, static_cast<uint64_t>(i));
        for (const auto& t : out) {
            dropped_box += t.has_box ? 0 : 1;
            dropped_traj += t.has_trajectories ? 0 : 1;
        }
    }
    const double fb = dropped_box / (3.0 * n), ft = dropped_traj / (3.0 * n);
    CHECK(fb >= 0.45);
    CHECK(fb <= 0.55);
    CHECK(ft >= 0.45);
    CHECK(ft <= 0.55);

    CHECK_THROWS_AS(drop_conditions(base, 1.5, 1), DataError);
}
