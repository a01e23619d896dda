#include "ggan/network.hpp"

#include "gemm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ggan/error.hpp"

namespace ggan {

std::string_view to_string(LayerKind kind) {
    switch (kind) {
        case LayerKind::Dense: return "Dense";
        case LayerKind::Conv1D: return "Conv1D";
        case LayerKind::UpSample1D: return "UpSample1D";
        case LayerKind::Flatten: return "Flatten";
        case LayerKind::Reshape: return "Reshape";
        case LayerKind::Dropout: return "Dropout";
        case LayerKind::SoftmaxHead: return "SoftmaxHead";
    }
    return "?";
}

std::string_view to_string(Activation act) {
    switch (act) {
        case Activation::None: return "none";
        case Activation::ReLU: return "relu";
        case Activation::Softmax: return "softmax";
    }
    return "?";
}


namespace {

LayerKind parse_kind(const std::string& s) {
    for (auto k : {LayerKind::Dense, LayerKind::Conv1D, LayerKind::UpSample1D, LayerKind::Flatten,
                   LayerKind::Reshape, LayerKind::Dropout, LayerKind::SoftmaxHead}) {
        if (to_string(k) == s) return k;
    }
    fail(ErrorKind::Parse, "unknown layer kind '" + s + "'");
}

Activation parse_activation(const std::string& s) {
    for (auto a : {Activation::None, Activation::ReLU, Activation::Softmax}) {
        if (to_string(a) == s) return a;
    }
    fail(ErrorKind::Parse, "unknown activation '" + s + "'");
}

[[noreturn]] void bad_layer(std::size_t index, const std::string& what) {
    fail(ErrorKind::Config, "layer " + std::to_string(index) + ": " + what);
}

/// Output shape of one layer, validating its parameters against the input shape.
Shape infer_shape(const LayerSpec& l, const Shape& in, std::size_t index) {
    const bool act_ok = [&] {
        switch (l.kind) {
            case LayerKind::Dense:
            case LayerKind::Conv1D: return l.activation != Activation::Softmax;
            case LayerKind::SoftmaxHead: return l.activation == Activation::Softmax;
            default: return l.activation == Activation::None;
        }
    }();
    if (!act_ok) bad_layer(index, "activation not allowed for " + std::string(to_string(l.kind)));

    switch (l.kind) {
        case LayerKind::Dense:
        case LayerKind::SoftmaxHead:
            if (l.units < 1) bad_layer(index, "units must be >= 1");
            if (in.size() != 1) bad_layer(index, "expects a rank-1 input, got " + shape_string(in));
            return {l.units};
        case LayerKind::Conv1D:
            if (l.filters < 1) bad_layer(index, "filters must be >= 1");
            if (l.kernel < 1 || l.kernel % 2 == 0) bad_layer(index, "kernel must be odd");
            if (in.size() != 2) bad_layer(index, "expects a (length, channels) input, got " + shape_string(in));
            return {in[0], l.filters};
        case LayerKind::UpSample1D:
            if (in.size() == 1) return {2 * in[0]};
            if (in.size() == 2) return {2 * in[0], in[1]};
            bad_layer(index, "expects a rank-1 or rank-2 input, got " + shape_string(in));
        case LayerKind::Flatten:
            return {shape_size(in)};
        case LayerKind::Reshape:
            if (l.target_shape.empty() || shape_size(l.target_shape) != shape_size(in)) {
                bad_layer(index, "cannot reshape " + shape_string(in) + " to " + shape_string(l.target_shape));
            }
            return l.target_shape;
        case LayerKind::Dropout:
            if (!(l.rate >= 0.0 && l.rate < 1.0)) bad_layer(index, "dropout rate must lie in [0, 1)");
            return in;
    }
    bad_layer(index, "unknown layer kind");
}

}  // namespace

LayerSpec LayerSpec::dense(std::size_t units, Activation act) {
    LayerSpec l;
    l.kind = LayerKind::Dense;
    l.units = units;
    l.activation = act;
    return l;
}

LayerSpec LayerSpec::conv1d(std::size_t filters, std::size_t kernel, Activation act) {
    LayerSpec l;
    l.kind = LayerKind::Conv1D;
    l.filters = filters;
    l.kernel = kernel;
    l.activation = act;
    return l;
}

LayerSpec LayerSpec::upsample1d() {
    LayerSpec l;
    l.kind = LayerKind::UpSample1D;
    return l;
}

LayerSpec LayerSpec::flatten() {
    LayerSpec l;
    l.kind = LayerKind::Flatten;
    return l;
}

LayerSpec LayerSpec::reshape(Shape target) {
    LayerSpec l;
    l.kind = LayerKind::Reshape;
    l.target_shape = std::move(target);
    return l;
}

LayerSpec LayerSpec::dropout(double rate) {
    LayerSpec l;
    l.kind = LayerKind::Dropout;
    l.rate = rate;
    return l;
}

LayerSpec LayerSpec::softmax_head(std::size_t units) {
    LayerSpec l;
    l.kind = LayerKind::SoftmaxHead;
    l.units = units;
    l.activation = Activation::Softmax;
    return l;
}

std::size_t NetworkSpec::layer_count() const {
    std::size_t n = trunk.size();
    for (const auto& h : heads) n += h.layers.size();
    return n;
}

const LayerSpec& NetworkSpec::layer(std::size_t flat_index) const {
    if (flat_index < trunk.size()) return trunk[flat_index];
    flat_index -= trunk.size();
    for (const auto& h : heads) {
        if (flat_index < h.layers.size()) return h.layers[flat_index];
        flat_index -= h.layers.size();
    }
    fail(ErrorKind::Config, "layer index out of range");
}

std::size_t NetworkSpec::head_index(std::string_view name) const {
    for (std::size_t h = 0; h < heads.size(); ++h) {
        if (heads[h].name == name) return h;
    }
    fail(ErrorKind::Config, "no head named '" + std::string(name) + "'");
}

std::vector<std::size_t> NetworkSpec::head_layers(std::size_t head) const {
    std::size_t start = trunk.size();
    for (std::size_t h = 0; h < head; ++h) start += heads.at(h).layers.size();
    std::vector<std::size_t> out(heads.at(head).layers.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = start + i;
    return out;
}

std::vector<Shape> NetworkSpec::output_shapes() const {
    if (input_shape.empty() || shape_size(input_shape) == 0) {
        fail(ErrorKind::Config, "network input shape must be non-empty");
    }
    if (heads.empty()) fail(ErrorKind::Config, "network needs at least one output head");
    std::vector<Shape> shapes;
    shapes.reserve(layer_count());
    Shape current = input_shape;
    std::size_t index = 0;
    for (const auto& l : trunk) {
        current = infer_shape(l, current, index++);
        shapes.push_back(current);
    }
    const Shape trunk_out = current;
    for (const auto& h : heads) {
        current = trunk_out;
        for (const auto& l : h.layers) {
            current = infer_shape(l, current, index++);
            shapes.push_back(current);
        }
    }
    return shapes;
}

void NetworkSpec::validate() const { (void)output_shapes(); }

Shape NetworkSpec::head_output_shape(std::size_t head) const {
    const auto shapes = output_shapes();
    const auto idx = head_layers(head);
    if (!idx.empty()) return shapes[idx.back()];
    return trunk.empty() ? input_shape : shapes[trunk.size() - 1];
}

std::string NetworkSpec::describe() const {
    const auto shapes = output_shapes();
    std::string out = "input" + shape_string(input_shape) + "\n";
    auto line = [&](const LayerSpec& l, const Shape& s) {
        std::string text(to_string(l.kind));
        if (l.kind == LayerKind::Conv1D) text += " k=" + std::to_string(l.kernel);
        if (l.kind == LayerKind::Dropout) {
            char buf[32];
            std::snprintf(buf, sizeof buf, " p=%g", l.rate);
            text += buf;
        }
        if (l.activation != Activation::None) text += " " + std::string(to_string(l.activation));
        return text + " " + shape_string(s) + "\n";
    };
    std::size_t index = 0;
    for (const auto& l : trunk) out += line(l, shapes[index++]);
    for (const auto& h : heads) {
        for (const auto& l : h.layers) out += "[" + h.name + "] " + line(l, shapes[index++]);
    }
    return out;
}

namespace {

nlohmann::ordered_json layer_json(const LayerSpec& l) {
    return {{"kind", to_string(l.kind)},      {"units", l.units},
            {"filters", l.filters},           {"kernel", l.kernel},
            {"rate", l.rate},                 {"target_shape", l.target_shape},
            {"activation", to_string(l.activation)}};
}

LayerSpec layer_from_json(const nlohmann::json& j) {
    LayerSpec l;
    l.kind = parse_kind(j.at("kind").get<std::string>());
    l.units = j.at("units").get<std::size_t>();
    l.filters = j.at("filters").get<std::size_t>();
    l.kernel = j.at("kernel").get<std::size_t>();
    l.rate = j.at("rate").get<double>();
    l.target_shape = j.at("target_shape").get<Shape>();
    l.activation = parse_activation(j.at("activation").get<std::string>());
    return l;
}

}  // namespace

nlohmann::ordered_json to_json(const NetworkSpec& spec) {
    nlohmann::ordered_json j;
    j["input_shape"] = spec.input_shape;
    j["trunk"] = nlohmann::ordered_json::array();
    for (const auto& l : spec.trunk) j["trunk"].push_back(layer_json(l));
    j["heads"] = nlohmann::ordered_json::array();
    for (const auto& h : spec.heads) {
        nlohmann::ordered_json hj;
        hj["name"] = h.name;
        hj["layers"] = nlohmann::ordered_json::array();
        for (const auto& l : h.layers) hj["layers"].push_back(layer_json(l));
        j["heads"].push_back(hj);
    }
    return j;
}

NetworkSpec network_spec_from_json(const nlohmann::json& j) {
    NetworkSpec spec;
    try {
        spec.input_shape = j.at("input_shape").get<Shape>();
        for (const auto& l : j.at("trunk")) spec.trunk.push_back(layer_from_json(l));
        for (const auto& hj : j.at("heads")) {
            HeadSpec h;
            h.name = hj.at("name").get<std::string>();
            for (const auto& l : hj.at("layers")) h.layers.push_back(layer_from_json(l));
            spec.heads.push_back(std::move(h));
        }
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Parse, std::string("network spec: ") + e.what());
    }
    spec.validate();
    return spec;
}

std::size_t ParameterSet::parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.weight.size() + l.bias.size();
    return n;
}

ParameterSet zero_parameters(const NetworkSpec& spec) {
    const auto shapes = spec.output_shapes();
    ParameterSet params;
    params.layers.resize(spec.layer_count());

    auto fill = [&](std::size_t index, const Shape& in) {
        const auto& l = spec.layer(index);
        auto& p = params.layers[index];
        switch (l.kind) {
            case LayerKind::Dense:
            case LayerKind::SoftmaxHead:
                p.weight = Tensor({in[0], l.units});
                p.bias = Tensor({l.units});
                break;
            case LayerKind::Conv1D:
                p.weight = Tensor({l.kernel, in[1], l.filters});
                p.bias = Tensor({l.filters});
                break;
            default:
                break;
        }
    };

    Shape in = spec.input_shape;
    std::size_t index = 0;
    for (; index < spec.trunk.size(); ++index) {
        fill(index, in);
        in = shapes[index];
    }
    const Shape trunk_out = in;
    for (const auto& h : spec.heads) {
        in = trunk_out;
        for (std::size_t k = 0; k < h.layers.size(); ++k, ++index) {
            fill(index, in);
            in = shapes[index];
        }
    }
    return params;
}

ParameterSet init_parameters(const NetworkSpec& spec, std::uint64_t seed) {
    auto params = zero_parameters(spec);
    Rng rng(seed);
    for (std::size_t i = 0; i < params.layers.size(); ++i) {
        auto& w = params.layers[i].weight;
        if (w.empty()) continue;
        std::size_t fan_in, fan_out;
        if (w.shape.size() == 3) {
            fan_in = w.shape[0] * w.shape[1];
            fan_out = w.shape[0] * w.shape[2];
        } else {
            fan_in = w.shape[0];
            fan_out = w.shape[1];
        }
        const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        for (auto& x : w.data) x = rng.uniform(-limit, limit);
    }
    return params;
}

namespace {

Shape with_batch(std::size_t batch, const Shape& s) {
    Shape out{batch};
    out.insert(out.end(), s.begin(), s.end());
    return out;
}

void relu_inplace(Tensor& t) {
    for (auto& x : t.data) x = x > 0.0 ? x : 0.0;
}

std::vector<double> transpose(const double* m, std::size_t rows, std::size_t cols) {
    std::vector<double> t(rows * cols);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) t[c * rows + r] = m[r * cols + c];
    return t;
}

/// (batch, length, channels) copied with `pad` zero rows on both ends of each sequence.
std::vector<double> pad_sequence(const Tensor& in, std::size_t batch, std::size_t length, std::size_t channels,
                                 std::size_t pad) {
    const std::size_t stride = (length + 2 * pad) * channels;
    std::vector<double> out(batch * stride, 0.0);
    for (std::size_t b = 0; b < batch; ++b) {
        std::copy_n(in.data.begin() + static_cast<std::ptrdiff_t>(b * length * channels), length * channels,
                    out.begin() + static_cast<std::ptrdiff_t>(b * stride + pad * channels));
    }
    return out;
}

Tensor dense_forward(const Tensor& in, const LayerParams& p, std::size_t batch) {
    const std::size_t d_in = p.weight.shape[0];
    const std::size_t d_out = p.weight.shape[1];
    Tensor out({batch, d_out});
    for (std::size_t b = 0; b < batch; ++b) {
        std::copy(p.bias.data.begin(), p.bias.data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(b * d_out));
    }
    detail::gemm_nn(batch, d_in, d_out, in.data.data(), d_in, p.weight.data.data(), d_out, out.data.data(), d_out);
    return out;
}

void dense_backward(const Tensor& in, const LayerParams& p, const Tensor& g, std::size_t batch,
                    LayerParams& grad, Tensor& dx, bool want_params, bool want_input) {
    const std::size_t d_in = p.weight.shape[0];
    const std::size_t d_out = p.weight.shape[1];
    if (want_params) {
        for (std::size_t b = 0; b < batch; ++b)
            for (std::size_t u = 0; u < d_out; ++u) grad.bias.data[u] += g.data[b * d_out + u];
        detail::gemm_tn(batch, d_in, d_out, in.data.data(), d_in, g.data.data(), d_out, grad.weight.data.data(),
                        d_out);
    }
    if (want_input) {
        const auto wt = transpose(p.weight.data.data(), d_in, d_out);
        detail::gemm_nn(batch, d_out, d_in, g.data.data(), d_out, wt.data(), d_in, dx.data.data(), d_in);
    }
}

Tensor conv_forward(const Tensor& in, const LayerParams& p, std::size_t batch) {
    const std::size_t kernel = p.weight.shape[0];
    const std::size_t c_in = p.weight.shape[1];
    const std::size_t c_out = p.weight.shape[2];
    const std::size_t length = in.shape[1];
    const auto padded = pad_sequence(in, batch, length, c_in, kernel / 2);
    const std::size_t stride = (length + kernel - 1) * c_in;
    Tensor out({batch, length, c_out});
    for (std::size_t r = 0; r < batch * length; ++r) {
        std::copy(p.bias.data.begin(), p.bias.data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(r * c_out));
    }
    // Each output position reads a contiguous window of kernel * c_in inputs.
    for (std::size_t b = 0; b < batch; ++b) {
        detail::gemm_nn(length, kernel * c_in, c_out, padded.data() + b * stride, c_in, p.weight.data.data(), c_out,
                        out.data.data() + b * length * c_out, c_out);
    }
    return out;
}

void conv_backward(const Tensor& in, const LayerParams& p, const Tensor& g, std::size_t batch,
                   LayerParams& grad, Tensor& dx, bool want_params, bool want_input) {
    const std::size_t kernel = p.weight.shape[0];
    const std::size_t c_in = p.weight.shape[1];
    const std::size_t c_out = p.weight.shape[2];
    const std::size_t length = in.shape[1];
    const std::size_t pad = kernel / 2;
    const std::size_t window = kernel * c_in;
    if (want_params) {
        const auto padded = pad_sequence(in, batch, length, c_in, pad);
        const std::size_t stride = (length + kernel - 1) * c_in;
        for (std::size_t r = 0; r < batch * length; ++r)
            for (std::size_t f = 0; f < c_out; ++f) grad.bias.data[f] += g.data[r * c_out + f];
        for (std::size_t b = 0; b < batch; ++b) {
            detail::gemm_tn(length, window, c_out, padded.data() + b * stride, c_in, g.data.data() + b * length * c_out,
                            c_out, grad.weight.data.data(), c_out);
        }
    }
    if (want_input) {
        const auto wt = transpose(p.weight.data.data(), window, c_out);
        std::vector<double> windows(length * window);
        for (std::size_t b = 0; b < batch; ++b) {
            std::fill(windows.begin(), windows.end(), 0.0);
            detail::gemm_nn(length, c_out, window, g.data.data() + b * length * c_out, c_out, wt.data(), window,
                            windows.data(), window);
            // Window l covers padded rows l .. l+kernel-1, i.e. input rows l-pad .. l+pad.
            double* dxb = dx.data.data() + b * length * c_in;
            for (std::size_t l = 0; l < length; ++l) {
                for (std::size_t k = 0; k < kernel; ++k) {
                    const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(l + k) - static_cast<std::ptrdiff_t>(pad);
                    if (src < 0 || src >= static_cast<std::ptrdiff_t>(length)) continue;
                    const double* w = windows.data() + l * window + k * c_in;
                    double* d = dxb + static_cast<std::size_t>(src) * c_in;
                    for (std::size_t c = 0; c < c_in; ++c) d[c] += w[c];
                }
            }
        }
    }
}

Tensor upsample_forward(const Tensor& in, const Shape& out_shape, std::size_t batch) {
    Tensor out(with_batch(batch, out_shape));
    const std::size_t length = in.shape[1];
    const std::size_t channels = in.shape.size() == 3 ? in.shape[2] : 1;
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t i = 0; i < length; ++i) {
            const double* src = in.data.data() + (b * length + i) * channels;
            double* dst = out.data.data() + (b * 2 * length + 2 * i) * channels;
            std::copy(src, src + channels, dst);
            std::copy(src, src + channels, dst + channels);
        }
    }
    return out;
}

Tensor upsample_backward(const Tensor& g, const Shape& in_shape, std::size_t batch) {
    Tensor dx(in_shape);
    const std::size_t length = in_shape[1];
    const std::size_t channels = in_shape.size() == 3 ? in_shape[2] : 1;
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t i = 0; i < length; ++i) {
            double* dst = dx.data.data() + (b * length + i) * channels;
            const double* src = g.data.data() + (b * 2 * length + 2 * i) * channels;
            for (std::size_t c = 0; c < channels; ++c) dst[c] = src[c] + src[channels + c];
        }
    }
    return dx;
}

constexpr double kSoftmaxFloor = 0x1p-53;

void softmax_rows(Tensor& t) {
    const std::size_t rows = t.shape[0];
    const std::size_t cols = t.shape[1];
    for (std::size_t r = 0; r < rows; ++r) {
        double* z = t.data.data() + r * cols;
        const double peak = *std::max_element(z, z + cols);
        double total = 0.0;
        for (std::size_t c = 0; c < cols; ++c) {
            z[c] = std::exp(z[c] - peak);
            total += z[c];
        }
        // Saturated logits would otherwise round to exactly 0 or 1.
        for (std::size_t c = 0; c < cols; ++c) z[c] = std::clamp(z[c] / total, kSoftmaxFloor, 1.0 - kSoftmaxFloor);
    }
}

void check_finite(const Tensor& t, std::size_t index) {
    if (!t.all_finite()) {
        fail(ErrorKind::Numeric, "non-finite activation at layer " + std::to_string(index));
    }
}

Tensor run_layer(const LayerSpec& l, const LayerParams& p, const Tensor& in, const Shape& out_shape,
                 std::size_t index, Mode mode, Rng* rng, ForwardCache& cache) {
    const std::size_t batch = cache.batch;
    Tensor out;
    switch (l.kind) {
        case LayerKind::Dense:
        case LayerKind::Conv1D:
            out = l.kind == LayerKind::Dense ? dense_forward(in, p, batch) : conv_forward(in, p, batch);
            if (l.activation == Activation::ReLU) {
                cache.pre_activations[index] = out;
                relu_inplace(out);
            }
            break;
        case LayerKind::SoftmaxHead:
            out = dense_forward(in, p, batch);
            check_finite(out, index);
            softmax_rows(out);
            break;
        case LayerKind::UpSample1D:
            out = upsample_forward(in, out_shape, batch);
            break;
        case LayerKind::Flatten:
        case LayerKind::Reshape:
            out = Tensor(with_batch(batch, out_shape), in.data);
            break;
        case LayerKind::Dropout:
            out = in;
            if (mode == Mode::Train && l.rate > 0.0) {
                if (!rng) fail(ErrorKind::Config, "train-mode dropout needs a random source");
                Tensor mask(in.shape);
                const double keep_scale = 1.0 / (1.0 - l.rate);
                for (auto& m : mask.data) m = rng->uniform() >= l.rate ? keep_scale : 0.0;
                for (std::size_t i = 0; i < out.size(); ++i) out.data[i] *= mask.data[i];
                cache.dropout_masks[index] = std::move(mask);
            }
            break;
    }
    check_finite(out, index);
    return out;
}

Tensor backprop_layer(const LayerSpec& l, const LayerParams& p, const ForwardCache& cache,
                      std::size_t index, Tensor g, LayerParams& grad, bool want_params, bool want_input) {
    const std::size_t batch = cache.batch;
    const Tensor& in = cache.inputs[index];
    switch (l.kind) {
        case LayerKind::Dense:
        case LayerKind::Conv1D: {
            if (l.activation == Activation::ReLU) {
                const auto& pre = cache.pre_activations[index];
                for (std::size_t i = 0; i < g.size(); ++i) {
                    if (!(pre.data[i] > 0.0)) g.data[i] = 0.0;
                }
            }
            Tensor dx(in.shape);
            if (l.kind == LayerKind::Dense) {
                dense_backward(in, p, g, batch, grad, dx, want_params, want_input);
            } else {
                conv_backward(in, p, g, batch, grad, dx, want_params, want_input);
            }
            return dx;
        }
        case LayerKind::SoftmaxHead: {
            const Tensor& probs = cache.outputs[index];
            const std::size_t cols = probs.shape[1];
            Tensor dz(probs.shape);
            for (std::size_t b = 0; b < batch; ++b) {
                const double* pb = probs.data.data() + b * cols;
                const double* gb = g.data.data() + b * cols;
                double dot = 0.0;
                for (std::size_t c = 0; c < cols; ++c) dot += pb[c] * gb[c];
                for (std::size_t c = 0; c < cols; ++c) dz.data[b * cols + c] = pb[c] * (gb[c] - dot);
            }
            Tensor dx(in.shape);
            dense_backward(in, p, dz, batch, grad, dx, want_params, want_input);
            return dx;
        }
        case LayerKind::UpSample1D:
            return upsample_backward(g, in.shape, batch);
        case LayerKind::Flatten:
        case LayerKind::Reshape:
            return Tensor(in.shape, std::move(g.data));
        case LayerKind::Dropout: {
            const auto& mask = cache.dropout_masks[index];
            if (!mask.empty()) {
                for (std::size_t i = 0; i < g.size(); ++i) g.data[i] *= mask.data[i];
            }
            return Tensor(in.shape, std::move(g.data));
        }
    }
    fail(ErrorKind::Config, "unknown layer kind");
}

}  // namespace

ForwardResult forward(const NetworkSpec& spec, const ParameterSet& params, const Tensor& input,
                      Mode mode, Rng* rng) {
    const auto shapes = spec.output_shapes();
    if (params.layers.size() != spec.layer_count()) {
        fail(ErrorKind::ArtifactMismatch, "parameter set does not match network spec");
    }
    if (input.shape.size() != spec.input_shape.size() + 1 ||
        !std::equal(spec.input_shape.begin(), spec.input_shape.end(), input.shape.begin() + 1)) {
        fail(ErrorKind::DataMismatch, "input shape " + shape_string(input.shape) + " does not match network input " +
                                          shape_string(spec.input_shape));
    }
    if (!input.all_finite()) fail(ErrorKind::Numeric, "non-finite network input");

    ForwardResult result;
    auto& cache = result.cache;
    const std::size_t n = spec.layer_count();
    cache.batch = input.shape[0];
    cache.inputs.resize(n);
    cache.outputs.resize(n);
    cache.pre_activations.resize(n);
    cache.dropout_masks.resize(n);

    const Tensor* current = &input;
    std::size_t index = 0;
    for (const auto& l : spec.trunk) {
        cache.inputs[index] = *current;
        cache.outputs[index] = run_layer(l, params.layers[index], *current, shapes[index], index, mode, rng, cache);
        current = &cache.outputs[index];
        ++index;
    }
    const Tensor* trunk_out = current;
    for (const auto& h : spec.heads) {
        current = trunk_out;
        for (const auto& l : h.layers) {
            cache.inputs[index] = *current;
            cache.outputs[index] = run_layer(l, params.layers[index], *current, shapes[index], index, mode, rng, cache);
            current = &cache.outputs[index];
            ++index;
        }
        result.heads.push_back(*current);
    }
    return result;
}

BackwardResult backward(const NetworkSpec& spec, const ParameterSet& params, const ForwardCache& cache,
                        std::span<const Tensor> head_grads, BackwardOptions options) {
    const std::size_t n = spec.layer_count();
    if (cache.inputs.size() != n || params.layers.size() != n || head_grads.size() != spec.heads.size()) {
        fail(ErrorKind::ArtifactMismatch, "forward cache does not match network spec");
    }
    BackwardResult result;
    result.grads = zero_parameters(spec);

    const Shape trunk_shape =
        spec.trunk.empty() ? cache.inputs[0].shape : cache.outputs[spec.trunk.size() - 1].shape;
    Tensor trunk_grad(trunk_shape);

    for (std::size_t h = 0; h < spec.heads.size(); ++h) {
        if (head_grads[h].empty()) continue;
        const auto layers = spec.head_layers(h);
        Tensor g = head_grads[h];
        const Shape expected = layers.empty() ? trunk_shape : cache.outputs[layers.back()].shape;
        if (g.shape != expected) {
            fail(ErrorKind::DataMismatch, "gradient for head '" + spec.heads[h].name + "' has shape " +
                                              shape_string(g.shape) + ", expected " + shape_string(expected));
        }
        for (auto it = layers.rbegin(); it != layers.rend(); ++it) {
            g = backprop_layer(spec.layer(*it), params.layers[*it], cache, *it, std::move(g), result.grads.layers[*it],
                               options.parameter_grads, true);
        }
        for (std::size_t i = 0; i < g.size(); ++i) trunk_grad.data[i] += g.data[i];
    }

    Tensor g = std::move(trunk_grad);
    for (std::size_t i = spec.trunk.size(); i-- > 0;) {
        // The first layer's input gradient is only needed when the caller asks for it.
        g = backprop_layer(spec.trunk[i], params.layers[i], cache, i, std::move(g), result.grads.layers[i],
                           options.parameter_grads, i > 0 || options.input_grad);
    }
    result.input_grad = std::move(g);
    return result;
}

double cross_entropy(const Tensor& targets, const Tensor& probs) {
    if (targets.shape != probs.shape || targets.shape.size() != 2) {
        fail(ErrorKind::DataMismatch, "cross-entropy needs equal (batch, classes) shapes");
    }
    const std::size_t batch = targets.shape[0];
    if (batch == 0) fail(ErrorKind::DataMismatch, "cross-entropy of an empty batch");
    double total = 0.0;
    for (std::size_t i = 0; i < targets.size(); ++i) {
        if (targets.data[i] == 0.0) continue;
        const double p = std::clamp(probs.data[i], kProbClamp, 1.0 - kProbClamp);
        total -= targets.data[i] * std::log(p);
    }
    return total / static_cast<double>(batch);
}

Tensor cross_entropy_grad(const Tensor& targets, const Tensor& probs) {
    if (targets.shape != probs.shape || targets.shape.size() != 2 || targets.shape[0] == 0) {
        fail(ErrorKind::DataMismatch, "cross-entropy needs equal non-empty (batch, classes) shapes");
    }
    // The clamp only guards the log; the gradient uses the unclamped
    // probability so a confidently wrong head still receives signal.
    const double inv_batch = 1.0 / static_cast<double>(targets.shape[0]);
    Tensor g(targets.shape);
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (targets.data[i] == 0.0) continue;
        const double p = std::max(probs.data[i], std::numeric_limits<double>::min());
        g.data[i] = -targets.data[i] * inv_batch / p;
    }
    return g;
}

}  // namespace ggan
