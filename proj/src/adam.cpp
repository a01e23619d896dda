#include "ggan/adam.hpp"

#include <cmath>

#include "ggan/error.hpp"

namespace ggan {

AdamState make_adam_state(const NetworkSpec& spec, AdamHyperparams hyper) {
    AdamState state;
    state.hyper = hyper;
    state.first_moment = zero_parameters(spec);
    state.second_moment = zero_parameters(spec);
    return state;
}

namespace {

void update_tensor(Tensor& p, const Tensor& g, Tensor& m, Tensor& v, const AdamHyperparams& h,
                   double correction1, double correction2) {
    for (std::size_t i = 0; i < p.size(); ++i) {
        m.data[i] = h.beta1 * m.data[i] + (1.0 - h.beta1) * g.data[i];
        v.data[i] = h.beta2 * v.data[i] + (1.0 - h.beta2) * g.data[i] * g.data[i];
        const double m_hat = m.data[i] / correction1;
        const double v_hat = v.data[i] / correction2;
        p.data[i] -= h.learning_rate * m_hat / (std::sqrt(v_hat) + h.epsilon);
    }
}

}  // namespace

void adam_update(ParameterSet& params, const ParameterSet& grads, AdamState& state,
                 const std::vector<bool>& layer_mask) {
    const std::size_t n = params.layers.size();
    if (grads.layers.size() != n || state.first_moment.layers.size() != n ||
        state.second_moment.layers.size() != n || (!layer_mask.empty() && layer_mask.size() != n)) {
        fail(ErrorKind::ArtifactMismatch, "Adam update on mismatched parameter layouts");
    }
    for (std::size_t l = 0; l < n; ++l) {
        if (!layer_mask.empty() && !layer_mask[l]) continue;
        if (grads.layers[l].weight.shape != params.layers[l].weight.shape ||
            grads.layers[l].bias.shape != params.layers[l].bias.shape) {
            fail(ErrorKind::ArtifactMismatch, "gradient shape mismatch at layer " + std::to_string(l));
        }
        if (!grads.layers[l].weight.all_finite() || !grads.layers[l].bias.all_finite()) {
            fail(ErrorKind::Numeric, "non-finite gradient at layer " + std::to_string(l));
        }
    }

    ++state.step;
    const auto t = static_cast<double>(state.step);
    const double correction1 = 1.0 - std::pow(state.hyper.beta1, t);
    const double correction2 = 1.0 - std::pow(state.hyper.beta2, t);
    for (std::size_t l = 0; l < n; ++l) {
        if (!layer_mask.empty() && !layer_mask[l]) continue;
        auto& p = params.layers[l];
        const auto& g = grads.layers[l];
        auto& m = state.first_moment.layers[l];
        auto& v = state.second_moment.layers[l];
        update_tensor(p.weight, g.weight, m.weight, v.weight, state.hyper, correction1, correction2);
        update_tensor(p.bias, g.bias, m.bias, v.bias, state.hyper, correction1, correction2);
    }
}

std::pair<ParameterSet, AdamState> adam_step(ParameterSet params, const ParameterSet& grads, AdamState state,
                                             const std::vector<bool>& layer_mask) {
    adam_update(params, grads, state, layer_mask);
    return {std::move(params), std::move(state)};
}

}  // namespace ggan
