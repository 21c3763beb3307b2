#pragma once

#include "spritelab/diff/sample_build.hpp"
#include "spritelab/diff/sampler.hpp"
#include "spritelab/eval/metrics.hpp"
#include "spritelab/world/archive.hpp"

namespace spritelab::evalkit {

constexpr int kReportSchemaVersion = 1;

struct EvalRunConfig {
    int n_samples = 32;
    uint64_t seed = 9000;        // held-out scene seeds derive from this
    int sampler_steps = 10;
    float cfg_scale = 5.0f;
    int binding_pairs = 0;       // extra two-subject swap evaluations
    bool drop_conditions = false;  // unconditional baseline mode
    int frames = 8, height = 64, width = 64;

    dit::json to_json() const {
        return dit::json{{"n_samples", n_samples},   {"seed", seed},
                         {"sampler_steps", sampler_steps}, {"cfg_scale", cfg_scale},
                         {"binding_pairs", binding_pairs},  {"drop_conditions", drop_conditions},
                         {"frames", frames},          {"height", height},
                         {"width", width}};
    }
    static EvalRunConfig from_json(const dit::json& j) {
        EvalRunConfig c;
        c.n_samples = j.at("n_samples");
        c.seed = j.at("seed");
        c.sampler_steps = j.at("sampler_steps");
        c.cfg_scale = j.at("cfg_scale");
        c.binding_pairs = j.at("binding_pairs");
        c.drop_conditions = j.at("drop_conditions");
        c.frames = j.at("frames");
        c.height = j.at("height");
        c.width = j.at("width");
        return c;
    }
};

struct SampleScores {
    double miou = 0.0, epe = 0.0, identity = 0.0;
    bool epe_clamped = false;
    int n_subjects = 0;
};

// Generate one held-out scene, sample a video under its controls, and score
// it against the exact annotations.
inline SampleScores score_one(dit::DitModel& model, const diff::NoiseSchedule& sched,
                              const EvalRunConfig& cfg, uint64_t scene_seed, uint64_t noise_seed,
                              const world::SceneSpec* scene_override = nullptr,
                              Tensor* video_out = nullptr) {
    const world::SceneSpec scene =
        scene_override ? *scene_override
                       : world::generate_scene(scene_seed,
                                               1 + static_cast<int>(scene_seed % 2),
                                               cfg.frames, {cfg.height, cfg.width});
    const world::AnnotatedClip clip = world::render_clip(scene);

    diff::BuildOptions build;
    if (cfg.drop_conditions)
        build.drop_all_conditions = true;
    else
        build.force_all_conditions = true;
    const diff::BuiltSample sample =
        diff::build_sample(clip, model.config(), derive_seed(scene_seed, 0xE7A1), build);

    const diff::SamplerConfig scfg{cfg.sampler_steps, cfg.cfg_scale};
    const Tensor latent =
        diff::sample_latent(model, sample.inputs, sample.layout, sched, scfg, noise_seed);
    const Tensor video = codec::decode_tokens(latent, model.config().frames, model.config().lat_h,
                                              model.config().lat_w);
    if (video_out) *video_out = video;

    SampleScores s;
    s.n_subjects = static_cast<int>(scene.subjects.size());

    const auto detected = detect_subjects(video, scene.subjects);
    std::vector<std::vector<Box>> targets;
    for (const auto& tr : sample.gt_box_tracks) targets.push_back(tr.boxes);
    s.miou = miou(detected, targets);

    // trajectory EPE against the annotation tracks (training window)
    std::vector<std::array<float, 2>> queries;
    std::vector<std::vector<std::array<float, 2>>> target_traj;
    for (const auto& tr : clip.tracks) {
        queries.push_back(tr.points[0]);
        target_traj.emplace_back(tr.points.begin(),
                                 tr.points.begin() + clip.train_frames);
    }
    const EpeResult er = epe(video, queries, target_traj);
    s.epe = er.epe;
    s.epe_clamped = er.clamped;

    // identity similarity per subject: detected crop (target box fallback)
    const auto pool = world::reference_pool(clip);
    double id_acc = 0.0;
    for (int sub = 0; sub < s.n_subjects; ++sub) {
        const Tensor ref = world::make_reference_image(clip, sub, pool, clip.train_frames);
        std::vector<std::optional<Box>> boxes = detected[static_cast<size_t>(sub)];
        for (int f = 0; f < clip.train_frames; ++f)
            if (!boxes[static_cast<size_t>(f)])
                boxes[static_cast<size_t>(f)] = targets[static_cast<size_t>(sub)][static_cast<size_t>(f)];
        id_acc += identity_similarity(video, boxes, ref);
    }
    s.identity = id_acc / std::max(1, s.n_subjects);
    return s;
}

// Two-subject swap counterfactual: same subjects, exchanged motions.
inline int score_binding_pair(dit::DitModel& model, const diff::NoiseSchedule& sched,
                              const EvalRunConfig& cfg, uint64_t scene_seed,
                              uint64_t noise_seed) {
    world::SceneSpec a = world::generate_scene(scene_seed, 2, cfg.frames, {cfg.height, cfg.width});
    world::SceneSpec b = a;
    std::swap(b.motions[0], b.motions[1]);
    b.motions[0].subject_id = 0;
    b.motions[1].subject_id = 1;
    b.caption_tokens = world::build_caption(b);

    auto run = [&](const world::SceneSpec& scene,
                   std::vector<std::vector<std::optional<Box>>>& det,
                   std::vector<std::vector<Box>>& assigned) {
        const world::AnnotatedClip clip = world::render_clip(scene);
        diff::BuildOptions build;
        build.force_all_conditions = true;
        const diff::BuiltSample sample =
            diff::build_sample(clip, model.config(), derive_seed(scene_seed, 0xE7A1), build);
        const diff::SamplerConfig scfg{cfg.sampler_steps, cfg.cfg_scale};
        const Tensor latent =
            diff::sample_latent(model, sample.inputs, sample.layout, sched, scfg, noise_seed);
        const Tensor video = codec::decode_tokens(latent, model.config().frames,
                                                  model.config().lat_h, model.config().lat_w);
        det = detect_subjects(video, scene.subjects);
        assigned.clear();
        for (const auto& tr : sample.gt_box_tracks) assigned.push_back(tr.boxes);
    };

    std::vector<std::vector<std::optional<Box>>> det_a, det_b;
    std::vector<std::vector<Box>> asg_a, asg_b;
    run(a, det_a, asg_a);
    run(b, det_b, asg_b);
    return binding_correct(det_a, asg_a, det_b, asg_b);
}

// Full evaluation pass; the report embeds config + seed + checkpoint hash so
// any run can be regenerated bit-identically.
inline dit::json evaluate_checkpoint(dit::DitModel& model, const diff::NoiseSchedule& sched,
                                     const EvalRunConfig& cfg) {
    dit::json report;
    report["schema_version"] = kReportSchemaVersion;
    report["config"] = cfg.to_json();
    report["model_config"] = dit::config_to_json(model.config());
    report["checkpoint_hash"] = hex64(params_hash(model.params()));
    report["seed"] = cfg.seed;

    dit::json samples = dit::json::array();
    double miou_acc = 0.0, epe_acc = 0.0, id_acc = 0.0;
    for (int i = 0; i < cfg.n_samples; ++i) {
        const uint64_t scene_seed = derive_seed(cfg.seed, 0x5CE0 + static_cast<uint64_t>(i));
        const uint64_t noise_seed = derive_seed(cfg.seed, 0x401 + static_cast<uint64_t>(i));
        const SampleScores s = score_one(model, sched, cfg, scene_seed, noise_seed);
        samples.push_back({{"scene_seed", scene_seed},
                           {"miou", s.miou},
                           {"epe_px", s.epe},
                           {"epe_normalized", s.epe / std::hypot(cfg.width, cfg.height)},
                           {"identity_sim", s.identity},
                           {"epe_clamped", s.epe_clamped},
                           {"n_subjects", s.n_subjects}});
        miou_acc += s.miou;
        epe_acc += s.epe;
        id_acc += s.identity;
    }
    report["samples"] = samples;

    int bind_ok = 0;
    dit::json binding = dit::json::array();
    for (int i = 0; i < cfg.binding_pairs; ++i) {
        const uint64_t scene_seed = derive_seed(cfg.seed, 0xB1AD + static_cast<uint64_t>(i));
        const uint64_t noise_seed = derive_seed(cfg.seed, 0xB01 + static_cast<uint64_t>(i));
        const int ok = score_binding_pair(model, sched, cfg, scene_seed, noise_seed);
        binding.push_back({{"scene_seed", scene_seed}, {"correct", ok}});
        bind_ok += ok;
    }
    report["binding_samples"] = binding;

    report["aggregate"] = {
        {"miou", miou_acc / std::max(1, cfg.n_samples)},
        {"epe_px", epe_acc / std::max(1, cfg.n_samples)},
        {"identity_sim", id_acc / std::max(1, cfg.n_samples)},
        {"binding_accuracy",
         cfg.binding_pairs ? static_cast<double>(bind_ok) / cfg.binding_pairs : -1.0}};
    return report;
}

}  // namespace spritelab::evalkit
