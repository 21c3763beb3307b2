#include <catch2/catch_amalgamated.hpp>

#include "spritelab/refl/train.hpp"
#include "spritelab/world/archive.hpp"

using namespace spritelab;
using namespace spritelab::refl;

namespace {

dit::ModelConfig small_config() {
    dit::ModelConfig c;
    c.layers = 2;
    c.width = 48;
    c.heads = 2;
    c.mlp_ratio = 2;
    return c;
}

std::vector<fs::path> make_clip_archive(const fs::path& root, uint64_t seed0, int n) {
    fs::remove_all(root);
    std::vector<fs::path> dirs;
    for (int i = 0; i < n; ++i) {
        const auto clip = world::render_clip(
            world::generate_scene(seed0 + static_cast<uint64_t>(i), 1 + i % 2, 8, {64, 64}));
        char name[16];
        std::snprintf(name, sizeof(name), "clip%04d", i);
        world::save_clip(root / name, clip);
        dirs.push_back(root / name);
    }
    return dirs;
}

lirm::RewardModel make_reward(uint64_t seed) {
    lirm::LirmConfig cfg;
    cfg.backbone = small_config();
    cfg.backbone_blocks = 2;
    lirm::RewardModel rm(cfg, seed);
    return rm;
}

}  // namespace

TEST_CASE("lambda2 = 0 reproduces plain training bit for bit") {
    const auto root = fs::temp_directory_path() / "spritelab_test_refl_clips";
    const auto dirs = make_clip_archive(root, 3100, 4);
    const diff::NoiseSchedule sched(200);

    diff::SftTrainConfig sft;
    sft.steps = 3;
    sft.batch = 1;
    sft.lr = 1e-3f;
    sft.warmup = 0;
    sft.seed = 77;
    sft.log_every = 1000;

    dit::DitModel a(small_config(), 61);
    dit::DitModel b(small_config(), 61);

    diff::train_sft(a, dirs, sft, sched);

    lirm::RewardModel rm = make_reward(62);
    rm.freeze_all();
    ReflTrainConfig rc;
    rc.steps = 3;
    rc.lr = sft.lr;
    rc.weight_decay = sft.weight_decay;
    rc.warmup = sft.warmup;
    rc.sft = sft;
    rc.refl.lambda2 = 0.0f;
    rc.seed = 77;
    train_lirefl(b, rm, dirs, rc, sched);

    for (ad::Param* p : a.params().all())
        REQUIRE(b.params().get(p->name).value.same_bits(p->value));
    fs::remove_all(root);
}

TEST_CASE("rollout contract: one tracked forward, constant tracked memory, no decode") {
    const auto root = fs::temp_directory_path() / "spritelab_test_refl_clips2";
    const auto dirs = make_clip_archive(root, 3200, 2);
    const diff::NoiseSchedule sched(200);
    const auto clip = world::load_clip(dirs[0]);

    dit::DitModel gen(small_config(), 63);
    lirm::RewardModel rm = make_reward(64);
    rm.freeze_all();

    ReflConfig rc;
    rc.lambda2 = 0.1f;
    rc.sampler_steps = 10;
    diff::BuildOptions build;

    std::vector<size_t> bytes;
    for (int transition : {0, 5, 9}) {
        const RolloutOutcome o = lirefl_rollout(gen, rm, clip, sched, rc, build, 900,
                                                /*apply_grad=*/true, transition);
        CHECK(o.tracked_forwards == 1);
        CHECK(o.transition == transition);
        bytes.push_back(o.tracked_bytes);
    }
    // peak tracked-activation memory is independent of t_m
    CHECK(bytes[0] == bytes[1]);
    CHECK(bytes[1] == bytes[2]);

    // t_m outside the schedule is rejected
    CHECK_THROWS_AS(lirefl_rollout(gen, rm, clip, sched, rc, build, 900, true, 10), DataError);
    fs::remove_all(root);
}

TEST_CASE("an unfrozen reward model is rejected") {
    const auto root = fs::temp_directory_path() / "spritelab_test_refl_clips3";
    const auto dirs = make_clip_archive(root, 3300, 1);
    const diff::NoiseSchedule sched(100);
    const auto clip = world::load_clip(dirs[0]);

    dit::DitModel gen(small_config(), 65);
    lirm::RewardModel rm = make_reward(66);  // not frozen
    ReflConfig rc;
    diff::BuildOptions build;
    CHECK_THROWS_AS(lirefl_rollout(gen, rm, clip, sched, rc, build, 1), std::logic_error);
    fs::remove_all(root);
}

TEST_CASE("last-k policy samples only the final transitions") {
    const auto root = fs::temp_directory_path() / "spritelab_test_refl_clips4";
    const auto dirs = make_clip_archive(root, 3400, 2);
    const diff::NoiseSchedule sched(200);

    dit::DitModel gen(small_config(), 67);
    lirm::RewardModel rm = make_reward(68);
    rm.freeze_all();

    ReflTrainConfig rc;
    rc.steps = 6;
    rc.sft.batch = 1;
    rc.sft.build.drop_p = 0.5;
    rc.refl.lambda2 = 0.05f;
    rc.refl.policy = TmPolicy::kLastK;
    rc.refl.last_k = 3;
    rc.refl.sampler_steps = 10;
    rc.seed = 5;
    const ReflTrainStats stats = train_lirefl(gen, rm, dirs, rc, sched);
    for (int j = 0; j < 7; ++j) CHECK(stats.tm_histogram[static_cast<size_t>(j)] == 0);
    int later = 0;
    for (int j = 7; j < 10; ++j) later += stats.tm_histogram[static_cast<size_t>(j)];
    CHECK(later == 6);
    CHECK(stats.reward_params_hash_before == stats.reward_params_hash_after);
    fs::remove_all(root);
}

TEST_CASE("combined objective: reward improvement decreases the loss") {
    // L = L_sft + lambda2 * (-r): the sign is the whole contract
    ad::Graph g(false);
    ad::Node* r_low = g.leaf(Tensor::scalar(0.2f));
    ad::Node* r_high = g.leaf(Tensor::scalar(1.2f));
    ad::Node* sft = g.leaf(Tensor::scalar(0.8f));
    const float lambda2 = 0.1f;
    ad::Node* loss_low = ad::add_scaled(g, sft, ad::scale(g, r_low, -1.0f), lambda2);
    ad::Node* loss_high = ad::add_scaled(g, sft, ad::scale(g, r_high, -1.0f), lambda2);
    CHECK(loss_high->value[0] < loss_low->value[0]);
}
