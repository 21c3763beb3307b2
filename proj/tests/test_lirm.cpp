#include <catch2/catch_amalgamated.hpp>

#include "spritelab/lirm/train.hpp"
#include "spritelab/world/render.hpp"

using namespace spritelab;
using namespace spritelab::lirm;

namespace {

dit::ModelConfig tiny_config() {
    dit::ModelConfig c;
    c.layers = 2;
    c.width = 24;
    c.heads = 2;
    c.mlp_ratio = 2;
    c.frames = 2;
    c.lat_h = 2;
    c.lat_w = 2;
    c.lat_c = 12;
    c.n_max_refs = 2;
    c.vocab = 10;
    c.caption_len = 4;
    return c;
}

// real-shape config at reduced width, for tests that consume world clips
dit::ModelConfig small_config() {
    dit::ModelConfig c;
    c.layers = 2;
    c.width = 48;
    c.heads = 2;
    c.mlp_ratio = 2;
    return c;
}

void perturb(ad::ParamStore& params, uint64_t seed, float stddev) {
    Rng rng(seed);
    for (ad::Param* p : params.all()) {
        const float s = p->value.sq_norm() == 0.0 ? 6.0f * stddev : stddev;
        for (int64_t i = 0; i < p->value.numel(); ++i)
            p->value[i] += static_cast<float>(rng.normal() * s);
    }
}

std::vector<fs::path> make_pair_archive(const fs::path& root, uint64_t seed0, int n) {
    fs::remove_all(root);
    std::vector<fs::path> dirs;
    for (int i = 0; i < n; ++i) {
        const auto clip = world::render_clip(
            world::generate_scene(seed0 + static_cast<uint64_t>(i), 1 + i % 2, 8, {64, 64}));
        const auto kind = static_cast<world::Corruption>(i % 3);
        const auto pair = world::make_preference_pair(clip, kind, seed0 + static_cast<uint64_t>(i));
        const fs::path dir = root / ("pair" + std::to_string(i));
        world::save_pair(dir, pair);
        dirs.push_back(dir);
    }
    return dirs;
}

}  // namespace

TEST_CASE("attention with one head reproduces the hand-computed softmax output") {
    // two keys, one query, d = 4
    Tensor q({1, 4}, {1.0f, 0.0f, -1.0f, 0.5f});
    Tensor k({2, 4}, {0.5f, 0.2f, 0.0f, -0.3f, -0.1f, 0.4f, 0.7f, 0.2f});
    Tensor v({2, 4}, {1.0f, 2.0f, 3.0f, 4.0f, -1.0f, 0.5f, 0.0f, 2.0f});
    ad::Graph g(false);
    ad::Node* out = ad::attention(g, g.leaf(q), g.leaf(k), g.leaf(v), 1, nullptr, nullptr, nullptr);

    const double s0 = (1.0 * 0.5 + 0.0 * 0.2 + -1.0 * 0.0 + 0.5 * -0.3) / 2.0;  // /sqrt(4)
    const double s1 = (1.0 * -0.1 + 0.0 * 0.4 + -1.0 * 0.7 + 0.5 * 0.2) / 2.0;
    const double e0 = std::exp(s0), e1 = std::exp(s1);
    const double p0 = e0 / (e0 + e1), p1 = e1 / (e0 + e1);
    for (int j = 0; j < 4; ++j)
        CHECK(out->value[j] == Catch::Approx(p0 * v.at(0, j) + p1 * v.at(1, j)).margin(1e-6));
}

TEST_CASE("reward gradient w.r.t. the noisy video latent matches finite differences") {
    LirmConfig cfg;
    cfg.backbone = tiny_config();
    cfg.backbone_blocks = 2;
    RewardModel model(cfg, 7);
    perturb(model.backbone().params(), 8, 0.05f);
    perturb(model.head_params(), 9, 0.3f);

    Rng rng(10);
    Tensor z = rng.normal_tensor({cfg.backbone.video_tokens(), cfg.backbone.lat_c});
    const std::vector<Tensor> refs = {rng.normal_tensor({cfg.backbone.ref_tokens(), cfg.backbone.lat_c})};
    const std::vector<int> groups = {0};
    const std::vector<int> caption = {1, 2, 3, 4};
    const int t = 13;

    auto reward_value = [&](const Tensor& zv) {
        ad::Graph g(true);
        return static_cast<double>(
            model.reward(g, g.leaf(zv, true), t, refs, groups, caption)->value[0]);
    };

    ad::Graph g(true);
    ad::Node* zn = g.leaf(z, true);
    ad::Node* r = model.reward(g, zn, t, refs, groups, caption);
    g.backward(r);
    REQUIRE(!zn->grad.empty());

    // top-gradient coordinates, step 1e-3
    std::vector<int64_t> order(static_cast<size_t>(z.numel()));
    for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int64_t>(i);
    std::sort(order.begin(), order.end(),
              [&](int64_t a, int64_t b) { return std::abs(zn->grad[a]) > std::abs(zn->grad[b]); });
    int checked = 0;
    for (int c = 0; c < 24 && checked < 16; ++c) {
        const int64_t i = order[static_cast<size_t>(c)];
        const double an = zn->grad[i];
        const double h = 1e-3;
        if (2.0 * h * std::abs(an) < 1e-6) continue;
        Tensor zp = z, zm = z;
        zp[i] += static_cast<float>(h);
        zm[i] -= static_cast<float>(h);
        const double fd = (reward_value(zp) - reward_value(zm)) / (2.0 * h);
        const double rel = std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-8});
        INFO("coord " << i << " analytic " << an << " fd " << fd);
        CHECK(rel <= 1e-3);
        ++checked;
    }
    CHECK(checked >= 16);
}

TEST_CASE("reward is invariant to reference slot permutation") {
    LirmConfig cfg;
    cfg.backbone = tiny_config();
    cfg.backbone_blocks = 2;
    RewardModel model(cfg, 21);
    perturb(model.backbone().params(), 22, 0.05f);
    perturb(model.head_params(), 23, 0.3f);

    Rng rng(24);
    Tensor z = rng.normal_tensor({cfg.backbone.video_tokens(), cfg.backbone.lat_c});
    const Tensor ref0 = rng.normal_tensor({cfg.backbone.ref_tokens(), cfg.backbone.lat_c});
    const Tensor ref1 = rng.normal_tensor({cfg.backbone.ref_tokens(), cfg.backbone.lat_c});
    const std::vector<int> caption = {1, 2, 3, 4};

    ad::Graph g(false);
    ad::Node* a = model.reward(g, g.leaf(z), 9, {ref0, ref1}, {0, 1}, caption);
    ad::Node* b = model.reward(g, g.leaf(z), 9, {ref1, ref0}, {1, 0}, caption);
    CHECK(std::abs(a->value[0] - b->value[0]) < 1e-5);
}

TEST_CASE("bce loss values at the reward head") {
    ad::Graph g(false);
    ad::Node* at_zero = ad::bce_with_logits(g, g.leaf(Tensor({1}, {0.0f})), Tensor({1}, {1.0f}));
    CHECK(at_zero->value[0] == Catch::Approx(std::log(2.0)).epsilon(1e-6));
    ad::Node* confident =
        ad::bce_with_logits(g, g.leaf(Tensor({1}, {30.0f})), Tensor({1}, {1.0f}));
    CHECK(confident->value[0] < 1e-6);
}

TEST_CASE("lirm training: loss falls, frozen embeddings stay bit-identical") {
    const auto root = fs::temp_directory_path() / "spritelab_test_pairs";
    const auto dirs = make_pair_archive(root, 2600, 4);

    LirmConfig cfg;
    cfg.backbone = small_config();
    cfg.backbone_blocks = 2;
    RewardModel model(cfg, 31);
    model.freeze_embeddings();

    const uint64_t frozen_before = model.frozen_hash();
    const uint64_t all_before =
        params_hash(model.backbone().params()) ^ params_hash(model.head_params());

    LirmTrainConfig tc;
    tc.steps = 24;
    tc.pairs_per_step = 1;
    tc.lr = 2e-3f;
    tc.warmup = 4;
    tc.seed = 5;
    const diff::NoiseSchedule sched(1000);
    const LirmTrainStats stats = train_lirm(model, dirs, tc, sched);

    CHECK(stats.frozen_hash_before == frozen_before);
    CHECK(stats.frozen_hash_after == frozen_before);
    CHECK(params_hash(model.backbone().params()) ^ params_hash(model.head_params()) != all_before);
    CHECK(std::isfinite(stats.final_loss));

    // pairwise accuracy machinery runs and reports five bins
    const BinAccuracy acc = eval_pairwise_accuracy(model, dirs, sched, 77);
    REQUIRE(acc.per_bin.size() == 5);
    for (double a : acc.per_bin) {
        CHECK(a >= 0.0);
        CHECK(a <= 1.0);
    }
    fs::remove_all(root);
}

TEST_CASE("ref-as-kv ablation flag changes the reward computation") {
    LirmConfig cfg;
    cfg.backbone = tiny_config();
    cfg.backbone_blocks = 2;
    RewardModel q_model(cfg, 41);
    cfg.ref_as_kv = true;
    RewardModel kv_model(cfg, 41);  // same init seed
    perturb(q_model.backbone().params(), 42, 0.05f);
    perturb(kv_model.backbone().params(), 42, 0.05f);
    perturb(q_model.head_params(), 43, 0.3f);
    perturb(kv_model.head_params(), 43, 0.3f);

    Rng rng(44);
    Tensor z = rng.normal_tensor({cfg.backbone.video_tokens(), cfg.backbone.lat_c});
    const Tensor ref = rng.normal_tensor({cfg.backbone.ref_tokens(), cfg.backbone.lat_c});
    ad::Graph g(false);
    ad::Node* rq = q_model.reward(g, g.leaf(z), 5, {ref}, {0}, {1, 2, 3, 4});
    ad::Node* rkv = kv_model.reward(g, g.leaf(z), 5, {ref}, {0}, {1, 2, 3, 4});
    CHECK(rq->value[0] != rkv->value[0]);
}
