#pragma once

#include <array>
#include <vector>

#include "spritelab/ad/attention.hpp"
#include "spritelab/cond/boxes.hpp"
#include "spritelab/cond/dropout.hpp"
#include "spritelab/dit/config.hpp"

namespace spritelab::dit {

enum class Role { kVideo = 0, kTrajectory = 1, kReference = 2, kPadding = 3 };

// Sequence = [video | trajectory | reference slots | padding slots]. All
// positional information lives in the rope indices; padding tokens are
// excluded as attention keys/values.
struct TokenLayout {
    int n_video = 0, n_traj = 0, tokens_per_ref = 0, n_slots = 0, n_present = 0;
    int total = 0;
    std::vector<std::array<int, 3>> rope_idx;
    std::vector<uint8_t> key_valid;
    std::vector<Role> role;
    std::vector<int> slot_group;  // per slot: group id, or -1 for padding
    std::shared_ptr<ad::RopeTable> rope;

    int video_off() const { return 0; }
    int traj_off() const { return n_video; }
    int ref_off(int slot) const { return n_video + n_traj + slot * tokens_per_ref; }
};

// Present reference slots come first (triplet order), padding slots fill the
// remaining capacity.
inline TokenLayout build_layout(const ModelConfig& cfg,
                                const std::vector<cond::ControlTriplet>& triplets) {
    const int n_present = static_cast<int>(triplets.size());
    if (n_present > cfg.n_max_refs) throw DataError("capacity exceeded");

    TokenLayout lay;
    lay.n_video = cfg.video_tokens();
    lay.n_traj = cfg.video_tokens();
    lay.tokens_per_ref = cfg.ref_tokens();
    lay.n_slots = cfg.n_max_refs;
    lay.n_present = n_present;
    lay.total = lay.n_video + lay.n_traj + lay.n_slots * lay.tokens_per_ref;
    lay.rope_idx.reserve(static_cast<size_t>(lay.total));
    lay.key_valid.assign(static_cast<size_t>(lay.total), 1);
    lay.role.assign(static_cast<size_t>(lay.total), Role::kVideo);

    // video tokens: sequential temporal indices
    for (int t = 0; t < cfg.frames; ++t)
        for (int y = 0; y < cfg.lat_h; ++y)
            for (int x = 0; x < cfg.lat_w; ++x) lay.rope_idx.push_back({t, y, x});
    // trajectory tokens inherit the video indices
    for (int t = 0; t < cfg.frames; ++t)
        for (int y = 0; y < cfg.lat_h; ++y)
            for (int x = 0; x < cfg.lat_w; ++x) {
                lay.rope_idx.push_back({t, y, x});
                lay.role[static_cast<size_t>(lay.n_video + (t * cfg.lat_h + y) * cfg.lat_w + x)] =
                    Role::kTrajectory;
            }
    // reference slots: shared t_ref; padding slots: invalid t_pad, masked out
    for (int slot = 0; slot < cfg.n_max_refs; ++slot) {
        const bool present = slot < n_present;
        lay.slot_group.push_back(present ? triplets[static_cast<size_t>(slot)].group_id : -1);
        for (int y = 0; y < cfg.lat_h; ++y)
            for (int x = 0; x < cfg.lat_w; ++x) {
                lay.rope_idx.push_back({present ? cfg.t_ref() : cfg.t_pad(), y, x});
                const int row = lay.ref_off(slot) + y * cfg.lat_w + x;
                lay.role[static_cast<size_t>(row)] = present ? Role::kReference : Role::kPadding;
                if (!present) lay.key_valid[static_cast<size_t>(row)] = 0;
            }
    }

    if (cfg.rope_flat) {
        // ablation arm: flat sequential indices for every token
        for (int i = 0; i < lay.total; ++i) lay.rope_idx[static_cast<size_t>(i)] = {i, 0, 0};
    }
    lay.rope = std::make_shared<ad::RopeTable>(ad::build_rope_table(lay.rope_idx, cfg.head_dim()));
    return lay;
}

// Latent cells whose pixel footprint intersects a box, per frame.
inline std::vector<int> latent_cells_for_boxes(const std::vector<cond::Box>& boxes,
                                               const ModelConfig& cfg,
                                               std::array<int, 2> patch_hw = {8, 8}) {
    std::vector<int> cells;
    for (int f = 0; f < cfg.frames && f < static_cast<int>(boxes.size()); ++f) {
        const auto& b = boxes[static_cast<size_t>(f)];
        for (int cy = 0; cy < cfg.lat_h; ++cy)
            for (int cx = 0; cx < cfg.lat_w; ++cx) {
                const float px0 = static_cast<float>(cx * patch_hw[1]);
                const float py0 = static_cast<float>(cy * patch_hw[0]);
                const float px1 = px0 + patch_hw[1], py1 = py0 + patch_hw[0];
                if (b[0] < px1 && b[2] > px0 && b[1] < py1 && b[3] > py0)
                    cells.push_back((f * cfg.lat_h + cy) * cfg.lat_w + cx);
            }
    }
    return cells;
}

}  // namespace spritelab::dit
