#pragma once

#include <json.hpp>

#include "spritelab/core/error.hpp"

namespace spritelab::dit {

using json = nlohmann::json;

struct ModelConfig {
    int layers = 8;
    int width = 96;
    int heads = 4;  // head dim must divide by 6 (three rope axes, paired dims)
    int mlp_ratio = 4;
    int frames = 8, lat_h = 8, lat_w = 8, lat_c = 192;
    int n_max_refs = 3;
    int vocab = 36, caption_len = 24;
    int time_steps = 1000;
    // ablation switches
    bool rope_flat = false;   // flat sequential indices for all tokens
    bool group_role = true;   // group + role embeddings
    bool hierarchical = true; // per-block box injection (false: input only)

    int head_dim() const { return width / heads; }
    int t_ref() const { return frames; }
    int t_pad() const { return frames + 1; }
    int video_tokens() const { return frames * lat_h * lat_w; }
    int ref_tokens() const { return lat_h * lat_w; }
    int total_tokens() const { return 2 * video_tokens() + n_max_refs * ref_tokens(); }

    void validate() const {
        if (width % heads) throw DataError("config: width must divide by heads");
        if ((width / heads) % 6) throw DataError("config: head dim must divide by 6");
        if (layers < 1 || n_max_refs < 1) throw DataError("config: bad sizes");
    }
};

inline json config_to_json(const ModelConfig& c) {
    return json{{"layers", c.layers},       {"width", c.width},
                {"heads", c.heads},         {"mlp_ratio", c.mlp_ratio},
                {"frames", c.frames},       {"lat_h", c.lat_h},
                {"lat_w", c.lat_w},         {"lat_c", c.lat_c},
                {"n_max_refs", c.n_max_refs}, {"vocab", c.vocab},
                {"caption_len", c.caption_len}, {"time_steps", c.time_steps},
                {"rope_flat", c.rope_flat}, {"group_role", c.group_role},
                {"hierarchical", c.hierarchical}};
}

inline ModelConfig config_from_json(const json& j) {
    ModelConfig c;
    c.layers = j.at("layers");
    c.width = j.at("width");
    c.heads = j.at("heads");
    c.mlp_ratio = j.at("mlp_ratio");
    c.frames = j.at("frames");
    c.lat_h = j.at("lat_h");
    c.lat_w = j.at("lat_w");
    c.lat_c = j.at("lat_c");
    c.n_max_refs = j.at("n_max_refs");
    c.vocab = j.at("vocab");
    c.caption_len = j.at("caption_len");
    c.time_steps = j.at("time_steps");
    c.rope_flat = j.at("rope_flat");
    c.group_role = j.at("group_role");
    c.hierarchical = j.at("hierarchical");
    c.validate();
    return c;
}

}  // namespace spritelab::dit
