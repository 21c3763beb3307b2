#pragma once

#include "spritelab/ad/ops.hpp"
#include "spritelab/diff/schedule.hpp"
#include "spritelab/dit/model.hpp"
#include "spritelab/world/caption.hpp"

namespace spritelab::diff {

struct SamplerConfig {
    int steps = 10;
    float cfg_scale = 5.0f;  // text-condition guidance only
};

// DDIM coefficients for one deterministic update t_hi -> t_lo:
// z' = a * z + b * eps_hat.
struct StepCoeffs {
    float a, b;
};

inline StepCoeffs ddim_coeffs(const NoiseSchedule& sched, int t_hi, int t_lo) {
    const double ah = sched.alpha_bar(t_hi), al = sched.alpha_bar(t_lo);
    const double a = std::sqrt(al / ah);
    const double b = std::sqrt(1.0 - al) - std::sqrt(al) * std::sqrt(1.0 - ah) / std::sqrt(ah);
    return {static_cast<float>(a), static_cast<float>(b)};
}

// Classifier-free guidance over the text condition. Scale 1 short-circuits
// to the conditional prediction (exact identity, single forward).
inline Tensor predict_eps_cfg(dit::DitModel& model, const dit::DitInputs& in,
                              const dit::TokenLayout& lay, float cfg_scale) {
    ad::Graph g(false);
    dit::DitInputs cond = in;
    ad::Node* ec = model.forward(g, cond, lay);
    if (cfg_scale == 1.0f) return ec->value;
    dit::DitInputs uncond = in;
    uncond.caption.assign(static_cast<size_t>(model.config().caption_len), world::kNullToken);
    ad::Node* eu = model.forward(g, uncond, lay);
    Tensor out = eu->value;
    for (int64_t i = 0; i < out.numel(); ++i)
        out[i] = out[i] + cfg_scale * (ec->value[i] - out[i]);
    return out;
}

// One deterministic solver step (evaluation mode).
inline Tensor solver_step(dit::DitModel& model, const dit::DitInputs& in,
                          const dit::TokenLayout& lay, const NoiseSchedule& sched, int t_hi,
                          int t_lo, float cfg_scale) {
    dit::DitInputs step_in = in;
    step_in.timestep = t_hi;
    const Tensor eps = predict_eps_cfg(model, step_in, lay, cfg_scale);
    const StepCoeffs c = ddim_coeffs(sched, t_hi, t_lo);
    Tensor out = step_in.z_t;
    for (int64_t i = 0; i < out.numel(); ++i) out[i] = c.a * out[i] + c.b * eps[i];
    return out;
}

// One gradient-enabled solver step; uses the conditional branch only, so it
// costs exactly one tracked generator forward.
inline ad::Node* solver_step_tracked(ad::Graph& g, dit::DitModel& model, const dit::DitInputs& in,
                                     const dit::TokenLayout& lay, const NoiseSchedule& sched,
                                     int t_hi, int t_lo) {
    dit::DitInputs step_in = in;
    step_in.timestep = t_hi;
    ad::Node* eps = model.forward(g, step_in, lay);
    const StepCoeffs c = ddim_coeffs(sched, t_hi, t_lo);
    ad::Node* zn = g.leaf(step_in.z_t);
    return ad::add_scaled(g, ad::scale(g, zn, c.a), eps, c.b);
}

// Full deterministic sampling loop from pure noise down to t = 0. Returns
// the clean video latent tokens.
inline Tensor sample_latent(dit::DitModel& model, const dit::DitInputs& conditions,
                            const dit::TokenLayout& lay, const NoiseSchedule& sched,
                            const SamplerConfig& cfg, uint64_t seed) {
    Rng rng(derive_seed(seed, 0x5A3));
    dit::DitInputs in = conditions;
    in.z_t = rng.normal_tensor({model.config().video_tokens(), model.config().lat_c});
    const auto ts = sched.sampler_timesteps(cfg.steps);
    for (size_t i = 0; i + 1 < ts.size(); ++i) {
        in.z_t = solver_step(model, in, lay, sched, ts[i], ts[i + 1], cfg.cfg_scale);
    }
    return in.z_t;
}

}  // namespace spritelab::diff
