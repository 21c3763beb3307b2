#pragma once

#include <cmath>

#include "spritelab/ad/graph.hpp"
#include "spritelab/core/error.hpp"

namespace spritelab::ad {

// Decoupled weight decay Adam with linear warmup.
class AdamW {
public:
    float lr = 1e-3f;
    float beta1 = 0.9f;
    float beta2 = 0.999f;
    float eps = 1e-8f;
    float weight_decay = 1e-3f;
    int warmup_steps = 100;

    float current_lr() const {
        const float w = warmup_steps > 0
                            ? std::min(1.0f, static_cast<float>(t_) / static_cast<float>(warmup_steps))
                            : 1.0f;
        return lr * w;
    }

    int step_count() const { return t_; }

    void step(ParamStore& params) {
        ++t_;
        const float lr_t = current_lr();
        const float bc1 = 1.0f - std::pow(beta1, static_cast<float>(t_));
        const float bc2 = 1.0f - std::pow(beta2, static_cast<float>(t_));
        for (Param* p : params.all()) {
            if (!p->trainable) continue;
            if (p->adam_m.empty()) {
                p->adam_m = Tensor::zeros(p->value.shape());
                p->adam_v = Tensor::zeros(p->value.shape());
            }
            const float plr = lr_t * p->lr_mult;
            for (int64_t i = 0; i < p->value.numel(); ++i) {
                const float gi = p->grad[i];
                if (!std::isfinite(gi)) throw NumericError("non-finite gradient in " + p->name);
                p->adam_m[i] = beta1 * p->adam_m[i] + (1.0f - beta1) * gi;
                p->adam_v[i] = beta2 * p->adam_v[i] + (1.0f - beta2) * gi * gi;
                const float mh = p->adam_m[i] / bc1;
                const float vh = p->adam_v[i] / bc2;
                float upd = mh / (std::sqrt(vh) + eps);
                if (p->decay) upd += weight_decay * p->value[i];
                p->value[i] -= plr * upd;
            }
        }
    }

private:
    int t_ = 0;
};

}  // namespace spritelab::ad
