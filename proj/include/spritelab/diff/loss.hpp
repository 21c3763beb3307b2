#pragma once

#include "spritelab/ad/ops.hpp"
#include "spritelab/cond/boxes.hpp"
#include "spritelab/diff/schedule.hpp"
#include "spritelab/dit/model.hpp"

namespace spritelab::diff {

// Binary latent mask: cell = 1 iff its pixel footprint intersects any box in
// that frame. Shape [video_tokens].
inline std::vector<float> box_mask_latent(const std::vector<cond::BoxTrack>& tracks,
                                          const dit::ModelConfig& cfg,
                                          std::array<int, 2> patch_hw = {8, 8}) {
    std::vector<float> mask(static_cast<size_t>(cfg.video_tokens()), 0.0f);
    for (const auto& tr : tracks)
        for (int cell : dit::latent_cells_for_boxes(tr.boxes, cfg, patch_hw))
            mask[static_cast<size_t>(cell)] = 1.0f;
    return mask;
}

// (1 + lambda1 M) broadcast over latent channels.
inline Tensor box_loss_weight(const std::vector<float>& mask, const dit::ModelConfig& cfg,
                              float lambda1) {
    Tensor w({cfg.video_tokens(), cfg.lat_c});
    for (int i = 0; i < cfg.video_tokens(); ++i) {
        const float v = 1.0f + lambda1 * mask[static_cast<size_t>(i)];
        for (int c = 0; c < cfg.lat_c; ++c) w.at(i, c) = v;
    }
    return w;
}

// Reweighted epsilon objective: mean over cells/channels of
// (1 + lambda1 M) * (eps - eps_theta(z_t, C, t))^2.
inline ad::Node* sft_loss(ad::Graph& g, dit::DitModel& model, dit::DitInputs inputs,
                          const dit::TokenLayout& lay, const Tensor& z0, const Tensor& eps,
                          const NoiseSchedule& sched, int t,
                          const std::vector<cond::BoxTrack>& gt_boxes, float lambda1) {
    inputs.z_t = sched.forward_noise(z0, eps, t);
    inputs.timestep = t;
    ad::Node* pred = model.forward(g, inputs, lay);
    const auto mask = box_mask_latent(gt_boxes, model.config());
    return ad::weighted_sse_mean(g, pred, eps, box_loss_weight(mask, model.config(), lambda1));
}

}  // namespace spritelab::diff
