#pragma once

#include <vector>

#include "spritelab/core/error.hpp"
#include "spritelab/core/rng.hpp"

namespace spritelab::cond {

// Presence flags of one control unit <Reference Subject, Global Box, Local
// Trajectory>. The actual tensors live in the sample structures; these flags
// say which pieces are injected.
struct ControlTriplet {
    int group_id = 0;
    int subject_id = 0;
    bool has_reference = false;
    bool has_box = false;
    bool has_trajectories = false;

    bool any() const { return has_reference || has_box || has_trajectories; }
};

// Independently per triplet and per condition kind, replace box/trajectory
// with ABSENT with probability p. Reference images are never dropped here
// (text dropout for CFG lives in the diffusion module).
inline std::vector<ControlTriplet> drop_conditions(std::vector<ControlTriplet> triplets, double p,
                                                   uint64_t seed) {
    if (p < 0.0 || p > 1.0) throw DataError("drop_conditions: p must be in [0,1]");
    Rng rng(derive_seed(seed, 0xD209));
    for (auto& t : triplets) {
        if (t.has_box && rng.bernoulli(p)) t.has_box = false;
        if (t.has_trajectories && rng.bernoulli(p)) t.has_trajectories = false;
        if (!t.any()) throw DataError("drop_conditions: triplet lost all fields");
    }
    return triplets;
}

}  // namespace spritelab::cond
