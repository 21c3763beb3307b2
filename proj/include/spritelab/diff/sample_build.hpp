#pragma once

#include "spritelab/codec/patchify.hpp"
#include "spritelab/cond/augment.hpp"
#include "spritelab/cond/boxes.hpp"
#include "spritelab/cond/dropout.hpp"
#include "spritelab/cond/trajectory.hpp"
#include "spritelab/dit/model.hpp"
#include "spritelab/world/render.hpp"

namespace spritelab::diff {

struct BuildOptions {
    double drop_p = 0.5;        // box / trajectory condition dropout
    double aug_prob = 0.5;      // reference augmentation probability
    double text_drop = 0.1;     // null-caption probability (CFG branch)
    int traj_points = 24;
    double traj_drop_rate = 0.3;
    bool force_all_conditions = false;  // evaluation: everything on, no aug
    bool drop_all_conditions = false;   // unconditional baseline
};

struct BuiltSample {
    dit::DitInputs inputs;
    dit::TokenLayout layout;
    Tensor z0;                                // clean video latent tokens
    std::vector<cond::BoxTrack> gt_box_tracks;  // all subjects (loss mask, eval targets)
    int kept_boxes = 0, kept_trajs = 0, text_kept = 1;  // dropout audit
};

// Turns one annotated clip into model inputs under the training protocol:
// per-subject control triplets, seeded condition dropout, reference
// augmentation, hybrid trajectory sampling, and the caption pathway.
inline BuiltSample build_sample(const world::AnnotatedClip& clip, const dit::ModelConfig& cfg,
                                uint64_t seed, const BuildOptions& opt) {
    const codec::PatchSize patch{1, cfg.lat_h ? clip.height() / cfg.lat_h : 8,
                                 cfg.lat_w ? clip.width() / cfg.lat_w : 8};
    Rng rng(derive_seed(seed, 0xB117D));
    BuiltSample out;

    // clean latent
    out.z0 = codec::encode(world::train_window_video(clip), patch).token_matrix();

    const int ns = static_cast<int>(clip.scene.subjects.size());
    std::vector<cond::ControlTriplet> triplets(static_cast<size_t>(ns));
    for (int s = 0; s < ns; ++s) {
        triplets[static_cast<size_t>(s)].group_id = s;
        triplets[static_cast<size_t>(s)].subject_id = s;
        triplets[static_cast<size_t>(s)].has_reference = true;
        triplets[static_cast<size_t>(s)].has_box = true;
        triplets[static_cast<size_t>(s)].has_trajectories = true;
    }
    bool camera_tracks = true;
    if (opt.drop_all_conditions) {
        for (auto& t : triplets) {
            t.has_box = false;
            t.has_trajectories = false;
        }
        camera_tracks = false;
    } else if (!opt.force_all_conditions) {
        triplets = cond::drop_conditions(triplets, opt.drop_p, rng.next_u64());
        camera_tracks = !rng.bernoulli(opt.drop_p);
    }

    // ground-truth box tracks over the training window (stable colors)
    out.gt_box_tracks = cond::clip_box_tracks(clip, clip.train_frames, clip.seed);

    // references: never dropped; temporally disjoint pool; seeded augmentation
    const auto pool = world::reference_pool(clip);
    for (int s = 0; s < ns; ++s) {
        std::vector<int> pf(pool.begin(), pool.end());
        const int pick = pf[static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(pf.size()) - 1))];
        Tensor ref = world::make_reference_image(clip, s, {pick}, clip.train_frames);
        if (!opt.force_all_conditions)
            ref = cond::augment_reference(ref, rng.next_u64(), opt.aug_prob);
        out.inputs.refs.push_back(codec::encode(ref, patch).token_matrix());
    }

    // box canvas from the kept subjects (empty list renders the white canvas)
    std::vector<cond::BoxTrack> kept_tracks;
    for (int s = 0; s < ns; ++s)
        if (triplets[static_cast<size_t>(s)].has_box) {
            kept_tracks.push_back(out.gt_box_tracks[static_cast<size_t>(s)]);
            ++out.kept_boxes;
        }
    const Tensor box_video = cond::render_box_video(kept_tracks, {clip.height(), clip.width()},
                                                    clip.train_frames);
    out.inputs.z_box = codec::encode(box_video, patch).token_matrix();
    for (const auto& tr : kept_tracks)
        out.inputs.box_cells[tr.subject_id] =
            dit::latent_cells_for_boxes(tr.boxes, cfg, {patch.ph, patch.pw});

    // trajectories: hybrid sampling, density dropout, then triplet filtering
    cond::TrajectorySet trajs;
    trajs.frames = clip.train_frames;
    if (!opt.drop_all_conditions) {
        const auto mode = rng.bernoulli(0.5) ? cond::SampleMode::kGrid
                                             : cond::SampleMode::kObjectAware;
        cond::TrajectorySet sampled =
            cond::sample_trajectories(clip, mode, opt.traj_points, rng.next_u64());
        sampled = cond::drop_tracks(sampled, opt.traj_drop_rate, rng.next_u64());
        for (auto& tr : sampled.tracks) {
            const bool keep =
                tr.subject_id == cond::kBackgroundSubject
                    ? camera_tracks
                    : triplets[static_cast<size_t>(tr.subject_id)].has_trajectories;
            if (keep) trajs.tracks.push_back(std::move(tr));
        }
    }
    for (const auto& t : triplets)
        if (t.has_trajectories) ++out.kept_trajs;
    const auto tmap = cond::encode_trajectory_tokens(
        trajs, {cfg.frames, cfg.lat_h, cfg.lat_w}, cfg.width, {patch.ph, patch.pw});
    out.inputs.traj_map = tmap.token_matrix();
    out.inputs.traj_cell_subjects = tmap.cell_subjects;

    // caption, with CFG text dropout
    if (opt.drop_all_conditions || (!opt.force_all_conditions && rng.bernoulli(opt.text_drop))) {
        out.inputs.caption.assign(static_cast<size_t>(cfg.caption_len), world::kNullToken);
        out.text_kept = 0;
    } else {
        out.inputs.caption = clip.caption_tokens;
    }

    out.inputs.triplets = triplets;
    out.layout = dit::build_layout(cfg, triplets);
    return out;
}

}  // namespace spritelab::diff
