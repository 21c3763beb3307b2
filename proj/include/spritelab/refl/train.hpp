#pragma once

#include <fstream>

#include "spritelab/diff/sampler.hpp"
#include "spritelab/diff/train_sft.hpp"
#include "spritelab/lirm/model.hpp"

namespace spritelab::refl {

enum class TmPolicy { kAllSteps = 0, kLastK = 1 };

struct ReflConfig {
    float lambda2 = 0.1f;
    TmPolicy policy = TmPolicy::kAllSteps;
    int last_k = 3;
    int sampler_steps = 10;
    float rollout_cfg = 1.0f;   // guidance for the gradient-free prefix
    int rollouts_per_step = 1;
    bool sft_batch_interleave = true;  // independent SFT regularizer batch

    void validate() const {
        if (lambda2 < 0.0f) throw DataError("refl: lambda2 >= 0");
        if (last_k < 1 || last_k > sampler_steps) throw DataError("refl: bad last_k");
    }
};

struct RolloutOutcome {
    double reward = 0.0;
    int t_m = 0;                // schedule timestep handed to the reward model
    int transition = 0;         // tracked transition index in [0, sampler_steps)
    size_t tracked_bytes = 0;   // tape bytes of the gradient-enabled graph
    int64_t tracked_forwards = 0;
};

// One reward-feedback rollout: gradient-free denoising down to the sampled
// transition, one gradient-enabled solver step, reward in latent space, and
// backward of -lambda2 * r into the generator grads. No decoder call may
// happen anywhere on this path.
inline RolloutOutcome lirefl_rollout(dit::DitModel& gen, lirm::RewardModel& reward_model,
                                     const world::AnnotatedClip& clip,
                                     const diff::NoiseSchedule& sched, const ReflConfig& rc,
                                     const diff::BuildOptions& build, uint64_t seed,
                                     bool apply_grad = true, int force_transition = -1) {
    rc.validate();
    if (!reward_model.fully_frozen())
        throw std::logic_error("lirefl: reward model must be frozen");

    const uint64_t decode_before = codec::decode_calls().load();

    // conditions from the training distribution, same dropout protocol
    diff::BuiltSample sample = diff::build_sample(clip, gen.config(), derive_seed(seed, 0xC01D),
                                                  build);
    // clean references and caption for the reward side
    std::vector<Tensor> reward_refs;
    std::vector<int> reward_groups;
    const auto pool = world::reference_pool(clip);
    const codec::PatchSize patch{};
    for (size_t s = 0; s < clip.scene.subjects.size(); ++s) {
        reward_refs.push_back(codec::encode(world::make_reference_image(
                                                clip, static_cast<int>(s), pool, clip.train_frames),
                                            patch)
                                  .token_matrix());
        reward_groups.push_back(static_cast<int>(s));
    }

    Rng rng(derive_seed(seed, 0x9011));
    const auto ts = sched.sampler_timesteps(rc.sampler_steps);
    const int s_total = rc.sampler_steps;
    int transition;
    if (force_transition >= 0) {
        if (force_transition >= s_total) throw DataError("lirefl: t_m outside schedule");
        transition = force_transition;
    } else if (rc.policy == TmPolicy::kAllSteps) {
        transition = static_cast<int>(rng.uniform_int(0, s_total - 1));
    } else {
        transition = static_cast<int>(rng.uniform_int(s_total - rc.last_k, s_total - 1));
    }

    dit::DitInputs in = sample.inputs;
    in.z_t = Tensor({gen.config().video_tokens(), gen.config().lat_c});
    rng.fill_normal(in.z_t);

    // gradient-free prefix T .. t_{m+1}
    for (int j = 0; j < transition; ++j)
        in.z_t = diff::solver_step(gen, in, sample.layout, sched,
                                   ts[static_cast<size_t>(j)], ts[static_cast<size_t>(j) + 1],
                                   rc.rollout_cfg);

    // the single gradient-enabled step, conditional branch only
    ad::Graph g(true);
    const int64_t forwards_before = gen.tracked_forwards();
    ad::Node* z_tm = diff::solver_step_tracked(g, gen, in, sample.layout, sched,
                                               ts[static_cast<size_t>(transition)],
                                               ts[static_cast<size_t>(transition) + 1]);
    const int t_m = ts[static_cast<size_t>(transition) + 1];
    ad::Node* r = reward_model.reward(g, z_tm, t_m, reward_refs, reward_groups,
                                      clip.caption_tokens);
    if (codec::decode_calls().load() != decode_before)
        throw std::logic_error("lirefl: decode called on the reward path");

    RolloutOutcome out;
    out.reward = r->value[0];
    out.t_m = t_m;
    out.transition = transition;
    out.tracked_bytes = g.bytes();
    out.tracked_forwards = gen.tracked_forwards() - forwards_before;
    if (apply_grad && rc.lambda2 > 0.0f) {
        ad::Node* loss = ad::scale(g, r, -rc.lambda2 / static_cast<float>(rc.rollouts_per_step));
        g.backward(loss);
    }
    return out;
}

struct ReflTrainConfig {
    int steps = 400;
    float lr = 2e-4f;
    float weight_decay = 1e-3f;
    int warmup = 20;
    diff::SftTrainConfig sft;  // regularizer stream (steps field unused)
    ReflConfig refl;
    uint64_t seed = 0;
    int log_every = 10;
};

struct ReflTrainStats {
    std::vector<double> sft_losses;   // per step
    std::vector<double> rewards;      // per step (mean over rollouts)
    std::vector<int> tm_histogram;    // counts per transition index
    double mean_reward_tail = 0.0, mean_sft_tail = 0.0;
    uint64_t reward_params_hash_before = 0, reward_params_hash_after = 0;
};

// Stage-2 training: combined objective L = L_sft + lambda2 * L_LIReFL with a
// frozen reward model. With lambda2 = 0 the parameter trajectory equals the
// plain training loop bit for bit (same streams, rollout skipped).
inline ReflTrainStats train_lirefl(dit::DitModel& gen, lirm::RewardModel& reward_model,
                                   const std::vector<fs::path>& clip_dirs,
                                   const ReflTrainConfig& cfg, const diff::NoiseSchedule& sched,
                                   std::ostream* log = nullptr) {
    cfg.refl.validate();
    reward_model.freeze_all();

    ad::AdamW opt;
    opt.lr = cfg.lr;
    opt.weight_decay = cfg.weight_decay;
    opt.warmup_steps = cfg.warmup;

    diff::SftTrainConfig sft_cfg = cfg.sft;
    sft_cfg.seed = cfg.seed;

    ReflTrainStats stats;
    stats.tm_histogram.assign(static_cast<size_t>(cfg.refl.sampler_steps), 0);
    stats.reward_params_hash_before =
        params_hash(reward_model.backbone().params()) ^ params_hash(reward_model.head_params());

    Rng pick_rng(derive_seed(cfg.seed, 0x51C3));        // same stream as train_sft
    Rng rollout_pick(derive_seed(cfg.seed, 0x9A01));  // independent rollout stream

    for (int step = 0; step < cfg.steps; ++step) {
        gen.params().zero_grads();
        fs::path last_sft_clip;
        const double sft_value = diff::sft_microbatch(gen, clip_dirs, sft_cfg, sched, pick_rng,
                                                      step, nullptr, &last_sft_clip);
        if (!std::isfinite(sft_value)) throw NumericError("train_lirefl: non-finite sft loss");

        double reward_mean = 0.0;
        if (cfg.refl.lambda2 > 0.0f) {
            for (int roll = 0; roll < cfg.refl.rollouts_per_step; ++roll) {
                const fs::path dir =
                    cfg.refl.sft_batch_interleave
                        ? clip_dirs[static_cast<size_t>(rollout_pick.uniform_int(
                              0, static_cast<int64_t>(clip_dirs.size()) - 1))]
                        : last_sft_clip;
                const world::AnnotatedClip clip = world::load_clip(dir);
                const RolloutOutcome o = lirefl_rollout(
                    gen, reward_model, clip, sched, cfg.refl, sft_cfg.build,
                    derive_seed(cfg.seed, 0xF00D + static_cast<uint64_t>(step) * 8 +
                                              static_cast<uint64_t>(roll)));
                if (!std::isfinite(o.reward)) throw NumericError("train_lirefl: non-finite reward");
                reward_mean += o.reward;
                ++stats.tm_histogram[static_cast<size_t>(o.transition)];
            }
            reward_mean /= cfg.refl.rollouts_per_step;
        }

        opt.step(gen.params());
        stats.sft_losses.push_back(sft_value);
        stats.rewards.push_back(reward_mean);
        if (log && (step % cfg.log_every == 0 || step + 1 == cfg.steps)) {
            dit::json line{{"step", step},
                           {"sft_loss", sft_value},
                           {"reward", reward_mean},
                           {"lambda2", cfg.refl.lambda2},
                           {"lr", opt.current_lr()}};
            (*log) << line.dump() << "\n";
            log->flush();
        }
    }

    const size_t tail = std::max<size_t>(1, stats.sft_losses.size() / 10);
    double racc = 0.0, sacc = 0.0;
    for (size_t i = stats.sft_losses.size() - tail; i < stats.sft_losses.size(); ++i) {
        racc += stats.rewards[i];
        sacc += stats.sft_losses[i];
    }
    stats.mean_reward_tail = racc / static_cast<double>(tail);
    stats.mean_sft_tail = sacc / static_cast<double>(tail);
    stats.reward_params_hash_after =
        params_hash(reward_model.backbone().params()) ^ params_hash(reward_model.head_params());
    if (stats.reward_params_hash_after != stats.reward_params_hash_before)
        throw NumericError("train_lirefl: reward model parameters changed");
    return stats;
}

}  // namespace spritelab::refl
