#pragma once

#include <cstdint>
#include <vector>
#include <utility>

#include "ggan/network.hpp"

namespace ggan {

struct AdamHyperparams {
    double learning_rate = 2e-4;
    double beta1 = 0.5;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    bool operator==(const AdamHyperparams&) const = default;
};

/// First/second moments mirroring a ParameterSet, plus the step counter.
struct AdamState {
    AdamHyperparams hyper;
    std::int64_t step = 0;
    ParameterSet first_moment;
    ParameterSet second_moment;

    bool operator==(const AdamState&) const = default;
};

AdamState make_adam_state(const NetworkSpec& spec, AdamHyperparams hyper = {});

/// In-place bias-corrected Adam update. When `layer_mask` is non-empty only
/// layers whose flag is set are touched (parameters and moments alike).
void adam_update(ParameterSet& params, const ParameterSet& grads, AdamState& state,
                 const std::vector<bool>& layer_mask = {});

/// Value-returning form of adam_update.
std::pair<ParameterSet, AdamState> adam_step(ParameterSet params, const ParameterSet& grads, AdamState state,
                                             const std::vector<bool>& layer_mask = {});

}  // namespace ggan
