#include <catch2/catch_amalgamated.hpp>

#include "spritelab/core/serialize.hpp"
#include "spritelab/diff/loss.hpp"
#include "spritelab/diff/sample_build.hpp"
#include "spritelab/diff/sampler.hpp"
#include "spritelab/dit/model.hpp"
#include "spritelab/world/render.hpp"

using namespace spritelab;
using namespace spritelab::dit;

namespace {

ModelConfig tiny_config() {
    ModelConfig c;
    c.layers = 2;
    c.width = 24;
    c.heads = 2;  // head dim 12
    c.mlp_ratio = 2;
    c.frames = 2;
    c.lat_h = 2;
    c.lat_w = 2;
    c.lat_c = 12;  // patch (1,2,2)
    c.n_max_refs = 2;
    c.vocab = 10;
    c.caption_len = 4;
    return c;
}

DitInputs random_inputs(const ModelConfig& cfg, int n_refs, uint64_t seed) {
    Rng rng(seed);
    DitInputs in;
    in.z_t = rng.normal_tensor({cfg.video_tokens(), cfg.lat_c});
    in.timestep = 17;
    for (int i = 0; i < cfg.caption_len; ++i)
        in.caption.push_back(static_cast<int>(rng.uniform_int(0, cfg.vocab - 1)));
    for (int r = 0; r < n_refs; ++r)
        in.refs.push_back(rng.normal_tensor({cfg.ref_tokens(), cfg.lat_c}));
    in.z_box = rng.normal_tensor({cfg.video_tokens(), cfg.lat_c});
    in.traj_map = rng.normal_tensor({cfg.video_tokens(), cfg.width});
    for (int r = 0; r < n_refs; ++r) {
        cond::ControlTriplet t;
        t.group_id = r;
        t.subject_id = r;
        t.has_reference = true;
        t.has_box = true;
        t.has_trajectories = true;
        in.triplets.push_back(t);
    }
    in.traj_cell_subjects.assign(static_cast<size_t>(cfg.video_tokens()), {});
    if (n_refs > 0) {
        in.traj_cell_subjects[1] = {0};
        if (n_refs > 1) in.traj_cell_subjects[3] = {1, 0};
        in.box_cells[0] = {0, 1};
        if (n_refs > 1) in.box_cells[1] = {2, 3};
    }
    return in;
}

// Zero-initialized parameters (gates, zero-convs, final head) get a stronger
// kick so every computation path carries a measurable gradient.
void perturb_params(ad::ParamStore& params, uint64_t seed, float stddev) {
    Rng rng(seed);
    for (ad::Param* p : params.all()) {
        const bool was_zero = p->value.sq_norm() == 0.0;
        const float s = was_zero ? 6.0f * stddev : stddev;
        for (int64_t i = 0; i < p->value.numel(); ++i)
            p->value[i] += static_cast<float>(rng.normal() * s);
    }
}

}  // namespace

TEST_CASE("zero-init box injection neutrality is exact") {
    const ModelConfig cfg = tiny_config();
    DitModel model(cfg, 11);
    const DitInputs base = random_inputs(cfg, 2, 21);
    const TokenLayout lay = build_layout(cfg, base.triplets);

    DitInputs zeroed = base;
    zeroed.z_box = Tensor::zeros({cfg.video_tokens(), cfg.lat_c});

    ad::Graph g(false);
    ad::Node* a = model.forward(g, base, lay);
    ad::Node* b = model.forward(g, zeroed, lay);
    CHECK(a->value.same_bits(b->value));
}

TEST_CASE("padding invariance: extra masked slots leave the output bit-identical") {
    ModelConfig cfg3 = tiny_config();
    cfg3.n_max_refs = 2;
    ModelConfig cfg4 = cfg3;
    cfg4.n_max_refs = 4;

    DitModel small(cfg3, 31);
    perturb_params(small.params(), 99, 0.05f);
    DitModel big(cfg4, 31);
    // share every parameter; the larger group bank copies the shared rows
    for (ad::Param* p : small.params().all()) {
        ad::Param& q = big.params().get(p->name);
        if (p->name == "group_emb") {
            for (int r = 0; r < cfg3.n_max_refs; ++r)
                for (int c = 0; c < cfg3.width; ++c) q.value.at(r, c) = p->value.at(r, c);
        } else {
            q.value = p->value;
        }
    }

    const DitInputs in = random_inputs(cfg3, 1, 41);
    ad::Graph g(false);
    ad::Node* a = small.forward(g, in, build_layout(cfg3, in.triplets));
    ad::Node* b = big.forward(g, in, build_layout(cfg4, in.triplets));
    CHECK(a->value.same_bits(b->value));
}

TEST_CASE("binding equivariance: permuting triplets with their group ids") {
    const ModelConfig cfg = tiny_config();
    DitModel model(cfg, 51);
    perturb_params(model.params(), 52, 0.05f);
    const DitInputs in = random_inputs(cfg, 2, 61);

    DitInputs swapped = in;
    std::swap(swapped.refs[0], swapped.refs[1]);
    std::swap(swapped.triplets[0], swapped.triplets[1]);

    ad::Graph g(false);
    ad::Node* a = model.forward(g, in, build_layout(cfg, in.triplets));
    ad::Node* b = model.forward(g, swapped, build_layout(cfg, swapped.triplets));
    CHECK(max_abs_diff(a->value, b->value) < 1e-6);
}

TEST_CASE("reference/video rope interaction depends only on the index offset") {
    const int dh = 12;
    Rng rng(71);
    const Tensor q = rng.normal_tensor({dh});
    const Tensor k = rng.normal_tensor({dh});
    // t_ref = T, t_pad = T+1: dot products depend only on t_ref - t
    auto dot_at = [&](int tq, int tk) {
        const Tensor qr = ad::rope_rotate(q, {tq, 0, 0});
        const Tensor kr = ad::rope_rotate(k, {tk, 0, 0});
        double d = 0.0;
        for (int i = 0; i < dh; ++i) d += static_cast<double>(qr[i]) * kr[i];
        return d;
    };
    const int T = 8;
    CHECK(std::abs(dot_at(T, 3) - dot_at(T - 3, 0)) < 1e-5);
    CHECK(std::abs(dot_at(T + 1, 5) - dot_at(T + 1 - 5, 0)) < 1e-5);
}

TEST_CASE("capacity overflow is rejected") {
    const ModelConfig cfg = tiny_config();
    std::vector<cond::ControlTriplet> too_many(static_cast<size_t>(cfg.n_max_refs) + 1);
    CHECK_THROWS_WITH(build_layout(cfg, too_many),
                      Catch::Matchers::ContainsSubstring("capacity exceeded"));
}

TEST_CASE("gradient correctness through the full model (sft loss)") {
    const ModelConfig cfg = tiny_config();
    DitModel model(cfg, 81);
    perturb_params(model.params(), 82, 0.05f);
    const DitInputs in = random_inputs(cfg, 2, 91);
    const TokenLayout lay = build_layout(cfg, in.triplets);
    Rng rng(93);
    const Tensor z0 = rng.normal_tensor({cfg.video_tokens(), cfg.lat_c});
    const Tensor eps = rng.normal_tensor({cfg.video_tokens(), cfg.lat_c});
    const diff::NoiseSchedule sched(100);
    const int t = 37;

    std::vector<cond::BoxTrack> boxes;
    cond::BoxTrack tr;
    tr.subject_id = 0;
    tr.boxes = {{0, 0, 2, 2}, {1, 1, 3, 3}};
    boxes.push_back(tr);

    auto loss_value = [&]() {
        ad::Graph g(true);
        return static_cast<double>(
            diff::sft_loss(g, model, in, lay, z0, eps, sched, t, boxes, 2.0f)->value[0]);
    };

    // analytic gradients
    model.params().zero_grads();
    {
        ad::Graph g(true);
        ad::Node* loss = diff::sft_loss(g, model, in, lay, z0, eps, sched, t, boxes, 2.0f);
        g.backward(loss);
    }

    // central differences on >=16 coordinates spread over parameters. In
    // float32 a coordinate is resolvable only when the step moves the loss
    // by well over one ulp, so candidates come from the top-gradient
    // coordinates of each tensor; step is 1e-3 at unit scale.
    const std::vector<std::string> names = {"block0.qkv.w",   "block1.mlp1.w", "patch_embed.w",
                                            "box_proj.w",     "group_emb",     "block0.zconv.w",
                                            "block1.ada.w",   "text.embed",    "final.out.w",
                                            "traj_proj.w",    "block0.cross_kv.w"};
    const double loss0 = loss_value();
    int checked = 0;
    for (const auto& name : names) {
        ad::Param& p = model.params().get(name);
        // largest-gradient coordinates of this tensor
        std::vector<int64_t> order(static_cast<size_t>(p.grad.numel()));
        for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int64_t>(i);
        std::partial_sort(order.begin(), order.begin() + 4, order.end(),
                          [&](int64_t a, int64_t b) {
                              return std::abs(p.grad[a]) > std::abs(p.grad[b]);
                          });
        for (int c = 0; c < 4; ++c) {
            const int64_t i = order[static_cast<size_t>(c)];
            const double an = p.grad[i];
            const double h = 1e-3;
            // skip coordinates whose step cannot move the loss measurably
            if (2.0 * h * std::abs(an) < 2e-4 * loss0) continue;
            const float keep = p.value[i];
            p.value[i] = static_cast<float>(keep + h);
            const double lp = loss_value();
            p.value[i] = static_cast<float>(keep - h);
            const double lm = loss_value();
            p.value[i] = keep;
            const double fd = (lp - lm) / (2.0 * h);
            const double rel = std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-8});
            INFO(name << "[" << i << "] analytic " << an << " fd " << fd);
            CHECK(rel <= 1e-3);
            ++checked;
        }
    }
    CHECK(checked >= 16);
}

TEST_CASE("tracked-forward audit counter") {
    const ModelConfig cfg = tiny_config();
    DitModel model(cfg, 101);
    const DitInputs in = random_inputs(cfg, 1, 102);
    const TokenLayout lay = build_layout(cfg, in.triplets);
    model.reset_tracked_forwards();
    {
        ad::Graph g(false);
        model.forward(g, in, lay);
    }
    CHECK(model.tracked_forwards() == 0);
    {
        ad::Graph g(true);
        model.forward(g, in, lay);
    }
    CHECK(model.tracked_forwards() == 1);
}

TEST_CASE("checkpoint round trip preserves parameters and config") {
    const ModelConfig cfg = tiny_config();
    DitModel model(cfg, 111);
    perturb_params(model.params(), 112, 0.1f);
    const auto dir = fs::temp_directory_path() / "spritelab_test_ckpt";
    fs::remove_all(dir);
    save_params(dir, model.params(), config_to_json(cfg));

    DitModel other(cfg, 999);  // different init
    const json back = load_params(dir, other.params());
    const ModelConfig cfg2 = config_from_json(back);
    CHECK(cfg2.width == cfg.width);
    for (ad::Param* p : model.params().all())
        CHECK(other.params().get(p->name).value.same_bits(p->value));
    fs::remove_all(dir);
}
