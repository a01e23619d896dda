#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "ggan/rng.hpp"
#include "ggan/tensor.hpp"

namespace ggan {

enum class LayerKind { Dense, Conv1D, UpSample1D, Flatten, Reshape, Dropout, SoftmaxHead };
enum class Activation { None, ReLU, Softmax };

std::string_view to_string(LayerKind kind);
std::string_view to_string(Activation act);

struct LayerSpec {
    LayerKind kind = LayerKind::Dense;
    /// Output width for Dense and SoftmaxHead.
    std::size_t units = 0;
    /// Output channels for Conv1D.
    std::size_t filters = 0;
    std::size_t kernel = 3;
    double rate = 0.0;
    Shape target_shape;
    Activation activation = Activation::None;

    static LayerSpec dense(std::size_t units, Activation act = Activation::ReLU);
    static LayerSpec conv1d(std::size_t filters, std::size_t kernel = 3, Activation act = Activation::ReLU);
    static LayerSpec upsample1d();
    static LayerSpec flatten();
    static LayerSpec reshape(Shape target);
    static LayerSpec dropout(double rate);
    static LayerSpec softmax_head(std::size_t units = 2);

    bool has_parameters() const {
        return kind == LayerKind::Dense || kind == LayerKind::Conv1D || kind == LayerKind::SoftmaxHead;
    }

    bool operator==(const LayerSpec&) const = default;
};

struct HeadSpec {
    std::string name;
    std::vector<LayerSpec> layers;

    bool operator==(const HeadSpec&) const = default;
};

/// Feed-forward network: a shared trunk followed by one or more named heads.
/// Shapes exclude the batch axis.
///
/// Layers are addressed by a flat index: trunk layers first, then each head's
/// layers in head order. ParameterSet and the forward cache use the same order.
struct NetworkSpec {
    Shape input_shape;
    std::vector<LayerSpec> trunk;
    std::vector<HeadSpec> heads;

    /// Throws on invalid layer parameters or inconsistent shapes.
    void validate() const;

    std::size_t layer_count() const;
    const LayerSpec& layer(std::size_t flat_index) const;
    std::size_t head_index(std::string_view name) const;
    /// Flat indices of the given head's layers.
    std::vector<std::size_t> head_layers(std::size_t head) const;

    /// Per-sample output shape of every layer in flat order.
    std::vector<Shape> output_shapes() const;
    Shape head_output_shape(std::size_t head) const;

    /// Stable human-readable layout, one line per layer with its activation shape.
    std::string describe() const;

    bool operator==(const NetworkSpec&) const = default;
};

nlohmann::ordered_json to_json(const NetworkSpec& spec);
NetworkSpec network_spec_from_json(const nlohmann::json& j);

struct LayerParams {
    Tensor weight;
    Tensor bias;

    bool operator==(const LayerParams&) const = default;
};

/// Weights and biases per layer in flat order; parameter-free layers hold empty tensors.
struct ParameterSet {
    std::vector<LayerParams> layers;

    std::size_t parameter_count() const;
    bool operator==(const ParameterSet&) const = default;
};

/// Zero-valued parameter set with the shapes required by `spec`.
ParameterSet zero_parameters(const NetworkSpec& spec);

/// Glorot-uniform weights, zero biases.
ParameterSet init_parameters(const NetworkSpec& spec, std::uint64_t seed);

enum class Mode { Train, Infer };

struct ForwardCache {
    /// Input to each layer in flat order (batch axis leading).
    std::vector<Tensor> inputs;
    /// Pre-activation values for ReLU layers, empty otherwise.
    std::vector<Tensor> pre_activations;
    /// Output of each layer.
    std::vector<Tensor> outputs;
    /// Scaled keep-masks for dropout layers run in train mode.
    std::vector<Tensor> dropout_masks;
    std::size_t batch = 0;
};

struct ForwardResult {
    std::vector<Tensor> heads;
    ForwardCache cache;
};

/// Runs the network on a batch whose shape is (batch, input_shape...).
/// `rng` is required only when mode is Train and the network contains dropout.
ForwardResult forward(const NetworkSpec& spec, const ParameterSet& params, const Tensor& input,
                      Mode mode, Rng* rng = nullptr);

struct BackwardResult {
    ParameterSet grads;
    Tensor input_grad;
};

struct BackwardOptions {
    /// When false, BackwardResult::grads stays zero.
    bool parameter_grads = true;
    /// When false, BackwardResult::input_grad is zero-filled.
    bool input_grad = true;
};

/// Backpropagates per-head output gradients. An empty tensor means no gradient for that head.
BackwardResult backward(const NetworkSpec& spec, const ParameterSet& params, const ForwardCache& cache,
                        std::span<const Tensor> head_grads, BackwardOptions options = {});

/// Mean cross-entropy over a (batch, k) pair of one-hot targets and probabilities.
/// Probabilities are clamped to [1e-7, 1 - 1e-7] before the log.
double cross_entropy(const Tensor& targets, const Tensor& probs);
/// Gradient of cross_entropy with respect to probs.
Tensor cross_entropy_grad(const Tensor& targets, const Tensor& probs);

constexpr double kProbClamp = 1e-7;

struct GradCheckResult {
    double max_relative_error = 0.0;
    std::size_t compared = 0;
    /// Entries skipped because a perturbation crossed a ReLU kink.
    std::size_t excluded = 0;
};

/// Compares backward() against central differences of a fixed random linear
/// functional of one head's output, over every parameter and every input entry.
/// Runs in infer mode, so dropout is disabled. Relative error is
/// |analytic - numeric| / max(|analytic|, |numeric|, 1e-6).
///
/// `max_entries_per_tensor` > 0 checks a seeded random sample of that many
/// entries from each weight, bias and input tensor instead of all of them.
GradCheckResult finite_diff_check(const NetworkSpec& spec, const ParameterSet& params, const Tensor& input,
                                  std::size_t head, double epsilon, std::size_t max_entries_per_tensor = 0,
                                  std::uint64_t seed = 0);

}  // namespace ggan
