#pragma once

#include "spritelab/ad/attention.hpp"
#include "spritelab/core/serialize.hpp"
#include "spritelab/dit/model.hpp"

namespace spritelab::lirm {

using ad::Graph;
using ad::Node;

struct LirmConfig {
    dit::ModelConfig backbone;
    int backbone_blocks = 8;  // first K blocks of the generator
    bool ref_as_kv = false;   // ablation: reference as key/value instead of query

    dit::json to_json() const {
        dit::json j;
        j["backbone"] = dit::config_to_json(backbone);
        j["backbone_blocks"] = backbone_blocks;
        j["ref_as_kv"] = ref_as_kv;
        return j;
    }
    static LirmConfig from_json(const dit::json& j) {
        LirmConfig c;
        c.backbone = dit::config_from_json(j.at("backbone"));
        c.backbone_blocks = j.at("backbone_blocks");
        c.ref_as_kv = j.at("ref_as_kv");
        return c;
    }
};

// Latent identity reward model: a trainable copy of the generator prefix
// extracts features from the noisy video latents and the clean reference
// latents; the reference features query the video features through a
// bias-free multi-head cross attention; a two-layer head maps the fused
// representation to a scalar reward.
class RewardModel {
public:
    explicit RewardModel(const LirmConfig& cfg, uint64_t seed = 0x11F3)
        : cfg_(cfg), backbone_(cfg.backbone, derive_seed(seed, 1)) {
        const int d = cfg_.backbone.width;
        Rng rng(derive_seed(seed, 2));
        head_.add("idattn.wq", rng.normal_tensor({d, d}, 0.02f));
        head_.add("idattn.wk", rng.normal_tensor({d, d}, 0.02f));
        head_.add("idattn.wv", rng.normal_tensor({d, d}, 0.02f));
        head_.add("head.l1.w", rng.normal_tensor({d, d}, 0.02f));
        head_.add("head.l1.b", Tensor::zeros({d}));
        head_.add("head.l2.w", rng.normal_tensor({d, 1}, 0.02f));
        head_.add("head.l2.b", Tensor::zeros({1}));
    }

    const LirmConfig& config() const { return cfg_; }
    dit::DitModel& backbone() { return backbone_; }
    ad::ParamStore& head_params() { return head_; }
    const ad::ParamStore& head_params() const { return head_; }

    // Initialize the backbone from a Stage-1 generator checkpoint and freeze
    // the text and patch embedding layers.
    void init_from_generator(const dit::DitModel& gen) {
        for (const ad::Param* p : gen.params().all())
            backbone_.params().get(p->name).value = p->value;
        freeze_embeddings();
    }

    void freeze_embeddings() {
        for (ad::Param* p : backbone_.params().all())
            if (is_frozen_name(p->name)) p->trainable = false;
    }

    static bool is_frozen_name(const std::string& name) {
        return name.rfind("text.", 0) == 0 || name.rfind("patch_embed.", 0) == 0;
    }

    uint64_t frozen_hash() const {
        return params_hash(backbone_.params(), {"text.", "patch_embed."});
    }

    // Freeze everything (reward model used inside reward feedback learning).
    void freeze_all() {
        for (ad::Param* p : backbone_.params().all()) p->trainable = false;
        for (ad::Param* p : head_.all()) p->trainable = false;
        frozen_all_ = true;
    }

    bool fully_frozen() const { return frozen_all_; }

    // r_t: scalar reward node. z_video enters as a graph node so gradients
    // can flow into a sampler output; z_refs are clean reference latents.
    Node* reward(Graph& g, Node* z_video, int t, const std::vector<Tensor>& z_refs,
                 const std::vector<int>& ref_groups, const std::vector<int>& caption) {
        if (z_refs.empty()) throw DataError("reward: need at least one reference");
        const bool freeze_here = frozen_all_;
        if (freeze_here) g.set_params_frozen(true);

        Node* f_v = backbone_.features(g, z_video, t, caption, /*as_reference=*/false, {},
                                       cfg_.backbone_blocks);
        Tensor ref_cat({static_cast<int>(z_refs.size()) * z_refs[0].dim(0), z_refs[0].dim(1)});
        for (size_t i = 0; i < z_refs.size(); ++i)
            std::copy_n(z_refs[i].data(), z_refs[i].numel(),
                        ref_cat.data() + static_cast<int64_t>(i) * z_refs[i].numel());
        Node* f_ref = backbone_.features(g, g.leaf(ref_cat), /*t0=*/0, caption,
                                         /*as_reference=*/true, ref_groups, cfg_.backbone_blocks);

        Node* wq = g.param(head_.get("idattn.wq"));
        Node* wk = g.param(head_.get("idattn.wk"));
        Node* wv = g.param(head_.get("idattn.wv"));
        Node* q_src = cfg_.ref_as_kv ? f_v : f_ref;
        Node* kv_src = cfg_.ref_as_kv ? f_ref : f_v;
        Node* q = ad::matmul(g, q_src, wq);
        Node* k = ad::matmul(g, kv_src, wk);
        Node* v = ad::matmul(g, kv_src, wv);
        Node* h_attn = ad::attention(g, q, k, v, cfg_.backbone.heads, nullptr, nullptr, nullptr);
        Node* fused = ad::add(g, h_attn, q);
        Node* hid = ad::silu(g, ad::linear(g, fused, g.param(head_.get("head.l1.w")),
                                           g.param(head_.get("head.l1.b"))));
        Node* per_token = ad::linear(g, hid, g.param(head_.get("head.l2.w")),
                                     g.param(head_.get("head.l2.b")));
        Node* r = ad::mean_all(g, per_token);
        if (freeze_here) g.set_params_frozen(false);
        return r;
    }

    void zero_grads() {
        backbone_.params().zero_grads();
        head_.zero_grads();
    }

    void save(const fs::path& dir) const {
        save_params(dir / "backbone", backbone_.params(), cfg_.to_json());
        save_params(dir / "head", head_, cfg_.to_json());
    }

    void load(const fs::path& dir) {
        load_params(dir / "backbone", backbone_.params());
        load_params(dir / "head", head_);
        freeze_embeddings();
    }

private:
    LirmConfig cfg_;
    dit::DitModel backbone_;
    ad::ParamStore head_;
    bool frozen_all_ = false;
};

}  // namespace spritelab::lirm
