#pragma once

#include <map>
#include <string>
#include <vector>

#include "spritelab/ad/attention.hpp"
#include "spritelab/ad/graph.hpp"
#include "spritelab/ad/ops.hpp"
#include "spritelab/cond/trajectory.hpp"
#include "spritelab/dit/layout.hpp"

namespace spritelab::dit {

using ad::Graph;
using ad::Node;
using ad::Param;

inline Tensor timestep_sinusoid(int t, int d) {
    Tensor out({1, d});
    const int half = d / 2;
    for (int i = 0; i < half; ++i) {
        const double freq = std::exp(-std::log(10000.0) * i / half);
        out[i] = static_cast<float>(std::sin(t * freq));
        out[half + i] = static_cast<float>(std::cos(t * freq));
    }
    return out;
}

// Everything the denoiser consumes for one sample. Absent conditions arrive
// as their neutral canvases (white box video, zero trajectory map); binding
// metadata is empty for whatever is absent.
struct DitInputs {
    Tensor z_t;          // [video_tokens, lat_c]
    int timestep = 0;
    std::vector<int> caption;        // caption_len ids
    std::vector<Tensor> refs;        // per present triplet: [ref_tokens, lat_c]
    Tensor z_box;                    // [video_tokens, lat_c]
    Tensor traj_map;                 // [video_tokens, width]
    std::vector<cond::ControlTriplet> triplets;
    // trajectory cell -> subject ids that wrote it
    std::vector<std::vector<int>> traj_cell_subjects;
    // subject id -> latent cells covered by its box track
    std::map<int, std::vector<int>> box_cells;
};

// The toy omni-conditioned diffusion transformer.
class DitModel {
public:
    explicit DitModel(const ModelConfig& cfg, uint64_t init_seed = 0x5EED) : cfg_(cfg) {
        cfg_.validate();
        Rng rng(derive_seed(init_seed, 0xD17));
        const int d = cfg_.width;
        auto lin = [&](const std::string& name, int din, int dout, bool zero = false,
                       bool bias = true) {
            params_.add(name + ".w", zero ? Tensor::zeros({din, dout})
                                          : rng.normal_tensor({din, dout}, 0.02f));
            if (bias) params_.add(name + ".b", Tensor::zeros({dout}));
        };
        lin("patch_embed", cfg_.lat_c, d);
        lin("box_proj", cfg_.lat_c, d);
        lin("traj_proj", d, d);
        params_.add("text.embed", rng.normal_tensor({cfg_.vocab, d}, 0.02f));
        params_.add("text.pos", rng.normal_tensor({cfg_.caption_len, d}, 0.02f));
        lin("time.l1", d, d);
        lin("time.l2", d, d);
        params_.add("group_emb", rng.normal_tensor({cfg_.n_max_refs, d}, 0.02f));
        params_.add("object_emb", rng.normal_tensor({1, d}, 0.02f));
        params_.add("control_emb", rng.normal_tensor({1, d}, 0.02f));
        params_.add("zconv_in.w", Tensor::zeros({d, d}));  // zero conv: no bias
        for (int l = 0; l < cfg_.layers; ++l) {
            const std::string p = "block" + std::to_string(l) + ".";
            lin(p + "qkv", d, 3 * d);
            lin(p + "attn_out", d, d);
            params_.add(p + "cross_q.w", rng.normal_tensor({d, d}, 0.02f));
            params_.add(p + "cross_kv.w", rng.normal_tensor({d, 2 * d}, 0.02f));
            lin(p + "cross_out", d, d);
            lin(p + "mlp1", d, cfg_.mlp_ratio * d);
            lin(p + "mlp2", cfg_.mlp_ratio * d, d);
            lin(p + "ada", d, 6 * d, /*zero=*/true);
            params_.add(p + "zconv.w", Tensor::zeros({d, d}));
        }
        lin("final.ada", d, 2 * d, /*zero=*/true);
        lin("final.out", d, cfg_.lat_c, /*zero=*/true);
    }

    const ModelConfig& config() const { return cfg_; }
    ad::ParamStore& params() { return params_; }
    const ad::ParamStore& params() const { return params_; }

    // Gradient-enabled forward passes, for the reward-feedback audit.
    int64_t tracked_forwards() const { return tracked_forwards_; }
    void reset_tracked_forwards() { tracked_forwards_ = 0; }

    // Epsilon prediction read from the video-token positions, [video_tokens, lat_c].
    Node* forward(Graph& g, const DitInputs& in, const TokenLayout& lay) {
        if (g.grad_enabled()) ++tracked_forwards_;
        const int d = cfg_.width;
        if (in.z_t.dim(0) != cfg_.video_tokens() || in.z_t.dim(1) != cfg_.lat_c)
            throw DataError("forward: z_t shape mismatch");
        if (static_cast<int>(in.refs.size()) != lay.n_present)
            throw DataError("forward: refs/layout mismatch");

        Node* temb_act = time_embedding(g, in.timestep);
        Node* cap = caption_features(g, in.caption);

        // video tokens
        Node* video = ad::linear(g, g.leaf(in.z_t), pp(g, "patch_embed.w"), pp(g, "patch_embed.b"));

        // trajectory tokens: projected codes + control role + group binding
        Node* traj = ad::linear(g, g.leaf(in.traj_map), pp(g, "traj_proj.w"), pp(g, "traj_proj.b"));
        if (cfg_.group_role) {
            traj = ad::add_row_vector(g, traj, g.param(params_.get("control_emb")));
            traj = add_group_rows(g, traj, in, lay);
        }

        // reference slots; padding slots are zero images through the embed
        std::vector<Node*> parts = {video, traj};
        Node* gemb = cfg_.group_role ? g.param(params_.get("group_emb")) : nullptr;
        for (int slot = 0; slot < lay.n_slots; ++slot) {
            Node* tok;
            if (slot < lay.n_present) {
                tok = ad::linear(g, g.leaf(in.refs[static_cast<size_t>(slot)]), pp(g, "patch_embed.w"),
                                 pp(g, "patch_embed.b"));
                if (cfg_.group_role) {
                    tok = ad::add_row_vector(g, tok, g.param(params_.get("object_emb")));
                    const int gid = lay.slot_group[static_cast<size_t>(slot)];
                    tok = ad::add_row_vector(g, tok, ad::slice_rows(g, gemb, gid, 1));
                }
            } else {
                tok = ad::linear(g, g.leaf(Tensor::zeros({lay.tokens_per_ref, cfg_.lat_c})),
                                 pp(g, "patch_embed.w"), pp(g, "patch_embed.b"));
            }
            parts.push_back(tok);
        }
        Node* h = ad::concat_rows(g, parts);

        // box latent features: projected canvas + control role + group binding
        Node* bfeat = ad::linear(g, g.leaf(in.z_box), pp(g, "box_proj.w"), pp(g, "box_proj.b"));
        if (cfg_.group_role) {
            bfeat = ad::add_row_vector(g, bfeat, g.param(params_.get("control_emb")));
            for (const auto& [subject, cells] : in.box_cells) {
                const int gid = group_of(in, subject);
                if (gid < 0 || cells.empty()) continue;
                bfeat = ad::add_rows_indexed(g, bfeat, cells, ad::slice_rows(g, gemb, gid, 1));
            }
        }

        // hierarchical zero-conv injection: input stage
        h = ad::add_rows_range(g, h, 0, ad::matmul(g, bfeat, g.param(params_.get("zconv_in.w"))));

        h = run_blocks(g, h, temb_act, cap, lay.rope, &lay.key_valid, bfeat);

        // final layer over video tokens only
        Node* mod = ad::linear(g, temb_act, pp(g, "final.ada.w"), pp(g, "final.ada.b"));
        Node* sh = ad::slice_cols(g, mod, 0, d);
        Node* sc = ad::slice_cols(g, mod, d, d);
        Node* v = ad::slice_rows(g, h, 0, lay.n_video);
        Node* out = ad::modulate(g, ad::layer_norm(g, v), sh, sc);
        return ad::linear(g, out, pp(g, "final.out.w"), pp(g, "final.out.b"));
    }

    // Backbone features for the reward model: one latent grid as a plain
    // token sequence (video indexing or reference indexing), cross-attending
    // to the caption, no box or trajectory pathway. Returns the hidden state
    // after the last block.
    Node* features(Graph& g, Node* latent_tokens, int timestep,
                   const std::vector<int>& caption, bool as_reference,
                   const std::vector<int>& slot_groups = {}, int n_blocks = -1) {
        if (g.grad_enabled()) ++tracked_forwards_;
        Node* temb_act = time_embedding(g, timestep);
        Node* cap = caption_features(g, caption);
        Node* tok = ad::linear(g, latent_tokens, pp(g, "patch_embed.w"), pp(g, "patch_embed.b"));

        std::vector<std::array<int, 3>> idx;
        const int per = cfg_.ref_tokens();
        const int rows = latent_tokens->value.dim(0);
        if (as_reference) {
            for (int s = 0; s < rows / per; ++s)
                for (int y = 0; y < cfg_.lat_h; ++y)
                    for (int x = 0; x < cfg_.lat_w; ++x) idx.push_back({cfg_.t_ref(), y, x});
            if (cfg_.group_role) {
                tok = ad::add_row_vector(g, tok, g.param(params_.get("object_emb")));
                Node* gemb = g.param(params_.get("group_emb"));
                for (size_t s = 0; s < slot_groups.size(); ++s) {
                    std::vector<int> rows_s(static_cast<size_t>(per));
                    for (int i = 0; i < per; ++i) rows_s[static_cast<size_t>(i)] = static_cast<int>(s) * per + i;
                    tok = ad::add_rows_indexed(g, tok, rows_s,
                                               ad::slice_rows(g, gemb, slot_groups[s], 1));
                }
            }
        } else {
            for (int t = 0; t < rows / (cfg_.lat_h * cfg_.lat_w); ++t)
                for (int y = 0; y < cfg_.lat_h; ++y)
                    for (int x = 0; x < cfg_.lat_w; ++x) idx.push_back({t, y, x});
        }
        if (cfg_.rope_flat)
            for (int i = 0; i < rows; ++i) idx[static_cast<size_t>(i)] = {i, 0, 0};
        auto rope = std::make_shared<ad::RopeTable>(ad::build_rope_table(idx, cfg_.head_dim()));
        return run_blocks(g, tok, temb_act, cap, rope, nullptr, nullptr, n_blocks);
    }

private:
    Node* pp(Graph& g, const std::string& n) { return g.param(params_.get(n)); }

    int group_of(const DitInputs& in, int subject) const {
        for (const auto& t : in.triplets)
            if (t.subject_id == subject) return t.group_id;
        return -1;
    }

    Node* add_group_rows(Graph& g, Node* traj, const DitInputs& in, const TokenLayout& lay) {
        Node* gemb = g.param(params_.get("group_emb"));
        std::map<int, std::vector<int>> rows_per_group;
        for (size_t cell = 0; cell < in.traj_cell_subjects.size(); ++cell)
            for (int subject : in.traj_cell_subjects[cell]) {
                const int gid = group_of(in, subject);
                if (gid >= 0) rows_per_group[gid].push_back(static_cast<int>(cell));
            }
        for (auto& [gid, rows] : rows_per_group)
            traj = ad::add_rows_indexed(g, traj, rows, ad::slice_rows(g, gemb, gid, 1));
        return traj;
    }

    Node* time_embedding(Graph& g, int timestep) {
        Node* ts = g.leaf(timestep_sinusoid(timestep, cfg_.width));
        Node* t1 = ad::silu(g, ad::linear(g, ts, pp(g, "time.l1.w"), pp(g, "time.l1.b")));
        Node* temb = ad::linear(g, t1, pp(g, "time.l2.w"), pp(g, "time.l2.b"));
        return ad::silu(g, temb);
    }

    Node* caption_features(Graph& g, const std::vector<int>& caption) {
        if (static_cast<int>(caption.size()) != cfg_.caption_len)
            throw DataError("caption length mismatch");
        Node* emb = ad::rows_lookup(g, g.param(params_.get("text.embed")), caption);
        return ad::add(g, emb, g.param(params_.get("text.pos")));
    }

    Node* run_blocks(Graph& g, Node* h, Node* temb_act, Node* cap,
                     const std::shared_ptr<ad::RopeTable>& rope,
                     const std::vector<uint8_t>* key_valid, Node* bfeat, int n_blocks = -1) {
        const int d = cfg_.width;
        const int limit = n_blocks < 0 ? cfg_.layers : std::min(n_blocks, cfg_.layers);
        for (int l = 0; l < limit; ++l) {
            const std::string p = "block" + std::to_string(l) + ".";
            Node* mod = ad::linear(g, temb_act, pp(g, p + "ada.w"), pp(g, p + "ada.b"));
            Node* sh1 = ad::slice_cols(g, mod, 0, d);
            Node* sc1 = ad::slice_cols(g, mod, d, d);
            Node* g1 = ad::slice_cols(g, mod, 2 * d, d);
            Node* sh2 = ad::slice_cols(g, mod, 3 * d, d);
            Node* sc2 = ad::slice_cols(g, mod, 4 * d, d);
            Node* g2 = ad::slice_cols(g, mod, 5 * d, d);

            Node* x = ad::modulate(g, ad::layer_norm(g, h), sh1, sc1);
            Node* qkv = ad::linear(g, x, pp(g, p + "qkv.w"), pp(g, p + "qkv.b"));
            Node* q = ad::slice_cols(g, qkv, 0, d);
            Node* k = ad::slice_cols(g, qkv, d, d);
            Node* v = ad::slice_cols(g, qkv, 2 * d, d);
            Node* attn = ad::attention(g, q, k, v, cfg_.heads, rope, rope, key_valid);
            Node* ao = ad::linear(g, attn, pp(g, p + "attn_out.w"), pp(g, p + "attn_out.b"));
            h = ad::add(g, h, ad::mul_row_vector(g, ao, g1));

            Node* cx = ad::layer_norm(g, h);
            Node* cq = ad::matmul(g, cx, pp(g, p + "cross_q.w"));
            Node* ckv = ad::matmul(g, cap, pp(g, p + "cross_kv.w"));
            Node* ck = ad::slice_cols(g, ckv, 0, d);
            Node* cv = ad::slice_cols(g, ckv, d, d);
            Node* ca = ad::attention(g, cq, ck, cv, cfg_.heads, nullptr, nullptr, nullptr);
            h = ad::add(g, h, ad::linear(g, ca, pp(g, p + "cross_out.w"), pp(g, p + "cross_out.b")));

            Node* mx = ad::modulate(g, ad::layer_norm(g, h), sh2, sc2);
            Node* mlp = ad::linear(g, ad::gelu(g, ad::linear(g, mx, pp(g, p + "mlp1.w"), pp(g, p + "mlp1.b"))),
                                   pp(g, p + "mlp2.w"), pp(g, p + "mlp2.b"));
            h = ad::add(g, h, ad::mul_row_vector(g, mlp, g2));

            if (bfeat && cfg_.hierarchical)
                h = ad::add_rows_range(g, h, 0,
                                       ad::matmul(g, bfeat, pp(g, p + "zconv.w")));
        }
        return h;
    }

    ModelConfig cfg_;
    ad::ParamStore params_;
    int64_t tracked_forwards_ = 0;
};

}  // namespace spritelab::dit
