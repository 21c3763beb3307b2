#pragma once

#include <fstream>

#include "spritelab/ad/adamw.hpp"
#include "spritelab/diff/loss.hpp"
#include "spritelab/diff/sample_build.hpp"
#include "spritelab/world/archive.hpp"

namespace spritelab::diff {

struct SftTrainConfig {
    int steps = 1500;
    int batch = 1;
    float lr = 1e-3f;
    float weight_decay = 1e-3f;
    int warmup = 100;
    float lambda1 = 2.0f;  // in-box loss amplification
    BuildOptions build;
    uint64_t seed = 0;
    int ckpt_every = 0;  // 0 = final only
    int log_every = 25;
};

inline json sft_config_to_json(const SftTrainConfig& c) {
    return json{{"steps", c.steps},
                {"batch", c.batch},
                {"lr", c.lr},
                {"weight_decay", c.weight_decay},
                {"warmup", c.warmup},
                {"lambda1", c.lambda1},
                {"drop_p", c.build.drop_p},
                {"aug_prob", c.build.aug_prob},
                {"text_drop", c.build.text_drop},
                {"traj_points", c.build.traj_points},
                {"traj_drop_rate", c.build.traj_drop_rate},
                {"seed", c.seed}};
}

struct SftTrainStats {
    double final_loss = 0.0;
    double mean_loss_tail = 0.0;  // mean over the last 10% of steps
    double box_drop_frac = 0.0, traj_drop_frac = 0.0, text_drop_frac = 0.0;
    int steps = 0;
};

struct DropoutAudit {
    int64_t box_total = 0, box_kept = 0, traj_total = 0, traj_kept = 0;
    int64_t text_total = 0, text_kept = 0;
};

// One gradient micro-batch of the reweighted epsilon objective. Accumulates
// into the model's param grads (scaled to the batch mean) and returns the
// mean loss. Reward feedback training reuses this exact stream structure so
// a lambda2 = 0 run reproduces plain training bit for bit.
inline double sft_microbatch(dit::DitModel& model, const std::vector<fs::path>& clip_dirs,
                             const SftTrainConfig& cfg, const NoiseSchedule& sched, Rng& pick_rng,
                             int step, DropoutAudit* audit, fs::path* last_clip = nullptr) {
    double loss_acc = 0.0;
    for (int b = 0; b < cfg.batch; ++b) {
        const auto& dir = clip_dirs[static_cast<size_t>(pick_rng.uniform_int(
            0, static_cast<int64_t>(clip_dirs.size()) - 1))];
        if (last_clip) *last_clip = dir;
        const world::AnnotatedClip clip = world::load_clip(dir);
        const uint64_t sseed = derive_seed(cfg.seed, 0x1000 + static_cast<uint64_t>(step) * 64 +
                                                         static_cast<uint64_t>(b));
        BuiltSample sample = build_sample(clip, model.config(), sseed, cfg.build);

        Rng noise_rng(derive_seed(sseed, 0x4015E));
        const int t = static_cast<int>(noise_rng.uniform_int(1, sched.steps()));
        Tensor eps({model.config().video_tokens(), model.config().lat_c});
        noise_rng.fill_normal(eps);

        ad::Graph g(true);
        ad::Node* loss = sft_loss(g, model, sample.inputs, sample.layout, sample.z0, eps, sched, t,
                                  sample.gt_box_tracks, cfg.lambda1);
        const double lv = loss->value[0];
        if (!std::isfinite(lv)) throw NumericError("train_sft: non-finite loss");
        if (cfg.batch > 1) loss = ad::scale(g, loss, 1.0f / cfg.batch);
        g.backward(loss);
        loss_acc += lv;

        if (audit) {
            const int ns = static_cast<int>(clip.scene.subjects.size());
            audit->box_total += ns;
            audit->traj_total += ns;
            audit->box_kept += sample.kept_boxes;
            audit->traj_kept += sample.kept_trajs;
            ++audit->text_total;
            audit->text_kept += sample.text_kept;
        }
    }
    return loss_acc / cfg.batch;
}

// Stage-1 training. Clips load lazily from the archive; every sample is a
// pure function of (seed, step, slot). The log is line-delimited JSON.
inline SftTrainStats train_sft(dit::DitModel& model, const std::vector<fs::path>& clip_dirs,
                               const SftTrainConfig& cfg, const NoiseSchedule& sched,
                               std::ostream* log = nullptr,
                               const std::function<void(int)>& on_step = {}) {
    ad::AdamW opt;
    opt.lr = cfg.lr;
    opt.weight_decay = cfg.weight_decay;
    opt.warmup_steps = cfg.warmup;

    Rng pick_rng(derive_seed(cfg.seed, 0x51C3));
    SftTrainStats stats;
    DropoutAudit audit;
    double tail_acc = 0.0;
    int tail_n = 0;
    const int tail_start = cfg.steps - std::max(1, cfg.steps / 10);

    for (int step = 0; step < cfg.steps; ++step) {
        model.params().zero_grads();
        const double mean_loss = sft_microbatch(model, clip_dirs, cfg, sched, pick_rng, step,
                                                &audit);
        opt.step(model.params());
        stats.final_loss = mean_loss;
        if (step >= tail_start) {
            tail_acc += mean_loss;
            ++tail_n;
        }
        if (log && (step % cfg.log_every == 0 || step + 1 == cfg.steps)) {
            json line{{"step", step},
                      {"loss", mean_loss},
                      {"lr", opt.current_lr()},
                      {"seed", cfg.seed},
                      {"box_keep_frac",
                       audit.box_total ? static_cast<double>(audit.box_kept) / audit.box_total : 1.0},
                      {"traj_keep_frac",
                       audit.traj_total ? static_cast<double>(audit.traj_kept) / audit.traj_total
                                        : 1.0},
                      {"text_keep_frac",
                       audit.text_total ? static_cast<double>(audit.text_kept) / audit.text_total
                                        : 1.0}};
            (*log) << line.dump() << "\n";
            log->flush();
        }
        if (on_step) on_step(step);
    }
    stats.steps = cfg.steps;
    stats.mean_loss_tail = tail_n ? tail_acc / tail_n : stats.final_loss;
    stats.box_drop_frac =
        audit.box_total ? 1.0 - static_cast<double>(audit.box_kept) / audit.box_total : 0.0;
    stats.traj_drop_frac =
        audit.traj_total ? 1.0 - static_cast<double>(audit.traj_kept) / audit.traj_total : 0.0;
    stats.text_drop_frac =
        audit.text_total ? 1.0 - static_cast<double>(audit.text_kept) / audit.text_total : 0.0;
    return stats;
}

}  // namespace spritelab::diff
