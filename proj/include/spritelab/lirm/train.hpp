#pragma once

#include <fstream>

#include "spritelab/ad/adamw.hpp"
#include "spritelab/codec/patchify.hpp"
#include "spritelab/diff/schedule.hpp"
#include "spritelab/lirm/model.hpp"
#include "spritelab/world/archive.hpp"

namespace spritelab::lirm {

struct EncodedPair {
    Tensor win, lose;           // latent token matrices
    std::vector<Tensor> refs;   // latent token matrices
    std::vector<int> ref_groups;
    std::vector<int> caption;
};

inline EncodedPair encode_pair(const world::PreferencePair& p, const codec::PatchSize& patch) {
    EncodedPair e;
    e.win = codec::encode(p.win, patch).token_matrix();
    e.lose = codec::encode(p.lose, patch).token_matrix();
    for (const auto& r : p.refs) e.refs.push_back(codec::encode(r, patch).token_matrix());
    for (size_t i = 0; i < p.refs.size(); ++i) e.ref_groups.push_back(static_cast<int>(i));
    e.caption = p.caption_tokens;
    return e;
}

struct LirmTrainConfig {
    int steps = 240;
    int pairs_per_step = 2;
    float lr = 1e-3f;
    float backbone_lr_mult = 0.1f;  // differential learning rates
    float weight_decay = 1e-2f;
    int warmup = 20;
    uint64_t seed = 0;
    bool bt_loss = false;  // Bradley-Terry ablation
    int log_every = 20;
};

inline dit::json lirm_train_config_to_json(const LirmTrainConfig& c) {
    return dit::json{{"steps", c.steps},
                     {"pairs_per_step", c.pairs_per_step},
                     {"lr", c.lr},
                     {"backbone_lr_mult", c.backbone_lr_mult},
                     {"weight_decay", c.weight_decay},
                     {"warmup", c.warmup},
                     {"seed", c.seed},
                     {"bt_loss", c.bt_loss}};
}

// Reward both videos of a pair at one shared timestep with fresh noise.
inline std::pair<ad::Node*, ad::Node*> pair_rewards(ad::Graph& g, RewardModel& model,
                                                    const EncodedPair& e,
                                                    const diff::NoiseSchedule& sched, int t,
                                                    Rng& noise_rng) {
    Tensor eps_w(e.win.shape()), eps_l(e.lose.shape());
    noise_rng.fill_normal(eps_w);
    noise_rng.fill_normal(eps_l);
    ad::Node* zw = g.leaf(sched.forward_noise(e.win, eps_w, t));
    ad::Node* zl = g.leaf(sched.forward_noise(e.lose, eps_l, t));
    ad::Node* rw = model.reward(g, zw, t, e.refs, e.ref_groups, e.caption);
    ad::Node* rl = model.reward(g, zl, t, e.refs, e.ref_groups, e.caption);
    return {rw, rl};
}

struct LirmTrainStats {
    double final_loss = 0.0;
    uint64_t frozen_hash_before = 0, frozen_hash_after = 0;
};

// Joint training of backbone (small lr), identity attention and head (full
// lr) with BCE on win/lose labels; text and patch embeddings stay frozen.
inline LirmTrainStats train_lirm(RewardModel& model, const std::vector<fs::path>& pair_dirs,
                                 const LirmTrainConfig& cfg, const diff::NoiseSchedule& sched,
                                 std::ostream* log = nullptr) {
    for (ad::Param* p : model.backbone().params().all()) p->lr_mult = cfg.backbone_lr_mult;
    for (ad::Param* p : model.head_params().all()) p->lr_mult = 1.0f;
    model.freeze_embeddings();

    ad::AdamW opt;
    opt.lr = cfg.lr;
    opt.weight_decay = cfg.weight_decay;
    opt.warmup_steps = cfg.warmup;

    LirmTrainStats stats;
    stats.frozen_hash_before = model.frozen_hash();

    const codec::PatchSize patch{};
    Rng pick(derive_seed(cfg.seed, 0x9A12));
    for (int step = 0; step < cfg.steps; ++step) {
        model.zero_grads();
        double loss_acc = 0.0;
        for (int b = 0; b < cfg.pairs_per_step; ++b) {
            const auto& dir = pair_dirs[static_cast<size_t>(
                pick.uniform_int(0, static_cast<int64_t>(pair_dirs.size()) - 1))];
            const EncodedPair e = encode_pair(world::load_pair(dir), patch);
            Rng noise(derive_seed(cfg.seed, 0xE000 + static_cast<uint64_t>(step) * 64 +
                                                static_cast<uint64_t>(b)));
            const int t = static_cast<int>(noise.uniform_int(0, sched.steps() - 1));

            ad::Graph g(true);
            auto [rw, rl] = pair_rewards(g, model, e, sched, t, noise);
            ad::Node* loss;
            if (cfg.bt_loss) {
                // -log sigmoid(r_win - r_lose)
                ad::Node* diff = ad::add_scaled(g, rw, rl, -1.0f);
                loss = ad::bce_with_logits(g, diff, Tensor({1}, {1.0f}));
            } else {
                ad::Node* lw = ad::bce_with_logits(g, rw, Tensor({1}, {1.0f}));
                ad::Node* ll = ad::bce_with_logits(g, rl, Tensor({1}, {0.0f}));
                loss = ad::scale(g, ad::add(g, lw, ll), 0.5f);
            }
            const double lv = loss->value[0];
            if (!std::isfinite(lv)) throw NumericError("train_lirm: non-finite loss");
            g.backward(loss);
            loss_acc += lv;
        }
        for (ad::Param* p : model.backbone().params().all())
            p->grad.scale_(1.0f / cfg.pairs_per_step);
        for (ad::Param* p : model.head_params().all()) p->grad.scale_(1.0f / cfg.pairs_per_step);
        opt.step(model.backbone().params());
        opt.step(model.head_params());
        stats.final_loss = loss_acc / cfg.pairs_per_step;
        if (log && (step % cfg.log_every == 0 || step + 1 == cfg.steps)) {
            dit::json line{{"step", step}, {"loss", stats.final_loss}, {"lr", opt.current_lr()}};
            (*log) << line.dump() << "\n";
            log->flush();
        }
    }
    stats.frozen_hash_after = model.frozen_hash();
    if (stats.frozen_hash_after != stats.frozen_hash_before)
        throw NumericError("train_lirm: frozen embeddings changed");
    return stats;
}

// Pairwise accuracy (ties incorrect) per normalized-timestep bin. Every pair
// is scored once per bin at the bin-center timestep with seeded noise.
struct BinAccuracy {
    std::vector<double> per_bin;  // 5 bins over normalized t
    double average = 0.0;
    int n_pairs = 0;
};

inline BinAccuracy eval_pairwise_accuracy(RewardModel& model,
                                          const std::vector<fs::path>& pair_dirs,
                                          const diff::NoiseSchedule& sched, uint64_t seed) {
    const codec::PatchSize patch{};
    constexpr int kBins = 5;
    std::vector<int64_t> correct(kBins, 0), total(kBins, 0);
    for (size_t pi = 0; pi < pair_dirs.size(); ++pi) {
        const EncodedPair e = encode_pair(world::load_pair(pair_dirs[pi]), patch);
        for (int bin = 0; bin < kBins; ++bin) {
            const double center = (bin + 0.5) / kBins;
            const int t = std::min(sched.steps() - 1,
                                   static_cast<int>(std::lround(center * sched.steps())));
            Rng noise(derive_seed(seed, 0xACC0 + pi * 16 + static_cast<uint64_t>(bin)));
            ad::Graph g(false);
            auto [rw, rl] = pair_rewards(g, model, e, sched, t, noise);
            if (rw->value[0] > rl->value[0]) ++correct[static_cast<size_t>(bin)];
            ++total[static_cast<size_t>(bin)];
        }
    }
    BinAccuracy out;
    double sum = 0.0;
    for (int b = 0; b < kBins; ++b) {
        const double acc = total[static_cast<size_t>(b)]
                               ? static_cast<double>(correct[static_cast<size_t>(b)]) /
                                     static_cast<double>(total[static_cast<size_t>(b)])
                               : 0.0;
        out.per_bin.push_back(acc);
        sum += acc;
    }
    out.average = sum / kBins;
    out.n_pairs = static_cast<int>(pair_dirs.size());
    return out;
}

inline dit::json bin_accuracy_to_json(const BinAccuracy& a) {
    dit::json j;
    j["bins"] = {"[0,0.2]", "(0.2,0.4]", "(0.4,0.6]", "(0.6,0.8]", "(0.8,1.0]"};
    j["accuracy"] = a.per_bin;
    j["average"] = a.average;
    j["n_pairs"] = a.n_pairs;
    return j;
}

}  // namespace spritelab::lirm
