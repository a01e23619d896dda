#include <algorithm>
#include <cmath>
#include <numeric>

#include "ggan/error.hpp"
#include "ggan/network.hpp"

namespace ggan {

namespace {

constexpr double kRelativeFloor = 1e-6;

double objective(const NetworkSpec& spec, const ParameterSet& params, const Tensor& input, std::size_t head,
                 const Tensor& weights, std::vector<Tensor>* pre_activations) {
    auto result = forward(spec, params, input, Mode::Infer);
    const auto& out = result.heads[head];
    double total = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) total += weights.data[i] * out.data[i];
    if (pre_activations) *pre_activations = std::move(result.cache.pre_activations);
    return total;
}

int sign_of(double x) { return (x > 0.0) - (x < 0.0); }

/// True when no ReLU input changed sign, counting an exact zero as its own state.
bool same_relu_pattern(const std::vector<Tensor>& a, const std::vector<Tensor>& b) {
    for (std::size_t l = 0; l < a.size(); ++l) {
        for (std::size_t i = 0; i < a[l].size(); ++i) {
            if (sign_of(a[l].data[i]) != sign_of(b[l].data[i])) return false;
        }
    }
    return true;
}

std::vector<std::size_t> pick_entries(std::size_t n, std::size_t cap, Rng& rng) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    if (cap == 0 || cap >= n) return idx;
    for (std::size_t i = 0; i < cap; ++i) std::swap(idx[i], idx[i + rng.below(n - i)]);
    idx.resize(cap);
    std::sort(idx.begin(), idx.end());
    return idx;
}

}  // namespace

GradCheckResult finite_diff_check(const NetworkSpec& spec, const ParameterSet& params, const Tensor& input,
                                  std::size_t head, double epsilon, std::size_t max_entries_per_tensor,
                                  std::uint64_t seed) {
    if (!(epsilon > 0.0)) fail(ErrorKind::Usage, "finite-difference epsilon must be positive");
    if (head >= spec.heads.size()) fail(ErrorKind::Usage, "head index out of range");

    Rng rng(seed);
    auto base = forward(spec, params, input, Mode::Infer);
    Tensor weights(base.heads[head].shape);
    for (auto& w : weights.data) w = rng.uniform(-1.0, 1.0);

    std::vector<Tensor> head_grads(spec.heads.size());
    head_grads[head] = weights;
    const auto analytic = backward(spec, params, base.cache, head_grads);
    const auto& base_pattern = base.cache.pre_activations;

    GradCheckResult result;
    auto compare = [&](double& slot, double expected, auto&& evaluate) {
        const double original = slot;
        std::vector<Tensor> plus_pattern, minus_pattern;
        slot = original + epsilon;
        const double f_plus = evaluate(&plus_pattern);
        slot = original - epsilon;
        const double f_minus = evaluate(&minus_pattern);
        slot = original;
        if (!same_relu_pattern(base_pattern, plus_pattern) ||
            !same_relu_pattern(base_pattern, minus_pattern)) {
            ++result.excluded;
            return;
        }
        const double numeric = (f_plus - f_minus) / (2.0 * epsilon);
        const double scale = std::max({std::abs(expected), std::abs(numeric), kRelativeFloor});
        result.max_relative_error = std::max(result.max_relative_error, std::abs(expected - numeric) / scale);
        ++result.compared;
    };

    ParameterSet probe = params;
    auto eval_params = [&](std::vector<Tensor>* pattern) {
        return objective(spec, probe, input, head, weights, pattern);
    };
    for (std::size_t l = 0; l < probe.layers.size(); ++l) {
        for (Tensor LayerParams::*which : {&LayerParams::weight, &LayerParams::bias}) {
            Tensor& t = probe.layers[l].*which;
            const Tensor& g = analytic.grads.layers[l].*which;
            for (const auto i : pick_entries(t.size(), max_entries_per_tensor, rng)) {
                compare(t.data[i], g.data[i], eval_params);
            }
        }
    }

    Tensor probe_input = input;
    auto eval_input = [&](std::vector<Tensor>* pattern) {
        return objective(spec, params, probe_input, head, weights, pattern);
    };
    for (const auto i : pick_entries(probe_input.size(), max_entries_per_tensor, rng)) {
        compare(probe_input.data[i], analytic.input_grad.data[i], eval_input);
    }
    return result;
}

}  // namespace ggan
