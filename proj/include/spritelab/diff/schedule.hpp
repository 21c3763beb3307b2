#pragma once

#include <cmath>
#include <vector>

#include "spritelab/core/error.hpp"
#include "spritelab/core/rng.hpp"
#include "spritelab/core/tensor.hpp"

namespace spritelab::diff {

// Cosine cumulative-signal schedule. alpha_bar(0) == 1 (clean); strictly
// decreasing and positive through t = steps.
class NoiseSchedule {
public:
    explicit NoiseSchedule(int steps = 1000, double s = 0.008) : steps_(steps) {
        if (steps < 2) throw DataError("schedule: steps >= 2");
        auto f = [s](double t) {
            const double v = std::cos((t + s) / (1.0 + s) * M_PI / 2.0);
            return v * v;
        };
        const double f0 = f(0.0);
        alpha_bar_.assign(static_cast<size_t>(steps_) + 1, 0.0);
        for (int t = 0; t <= steps_; ++t)
            alpha_bar_[static_cast<size_t>(t)] =
                std::max(1e-8, f(static_cast<double>(t) / steps_) / f0);
        for (int t = 1; t <= steps_; ++t)
            if (alpha_bar_[static_cast<size_t>(t)] >= alpha_bar_[static_cast<size_t>(t - 1)])
                throw NumericError("schedule: alpha_bar not strictly decreasing");
    }

    int steps() const { return steps_; }

    double alpha_bar(int t) const {
        if (t < 0 || t > steps_) throw DataError("schedule: t out of range");
        return alpha_bar_[static_cast<size_t>(t)];
    }

    // z_t = sqrt(abar_t) z0 + sqrt(1 - abar_t) eps
    Tensor forward_noise(const Tensor& z0, const Tensor& eps, int t) const {
        const float a = static_cast<float>(std::sqrt(alpha_bar(t)));
        const float b = static_cast<float>(std::sqrt(1.0 - alpha_bar(t)));
        Tensor out = z0;
        for (int64_t i = 0; i < out.numel(); ++i) out[i] = a * out[i] + b * eps[i];
        return out;
    }

    // Deterministic solver sub-schedule: steps+1 descending timesteps from
    // `steps_` down to 0.
    std::vector<int> sampler_timesteps(int sampler_steps) const {
        if (sampler_steps < 1 || sampler_steps > steps_)
            throw DataError("schedule: bad sampler step count");
        std::vector<int> ts;
        for (int i = sampler_steps; i >= 0; --i)
            ts.push_back(static_cast<int>(std::lround(static_cast<double>(steps_) * i / sampler_steps)));
        return ts;
    }

private:
    int steps_;
    std::vector<double> alpha_bar_;
};

}  // namespace spritelab::diff
