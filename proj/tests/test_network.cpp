#include <doctest.h>

#include <cmath>
#include <numeric>

#include "ggan/checkpoint.hpp"
#include "ggan/error.hpp"
#include "ggan/model.hpp"
#include "ggan/network.hpp"

using namespace ggan;

namespace {

NetworkSpec single(LayerSpec layer, Shape input) {
    NetworkSpec spec;
    spec.input_shape = std::move(input);
    spec.trunk = {std::move(layer)};
    spec.heads = {{"out", {}}};
    return spec;
}

Tensor random_input(Shape shape, std::uint64_t seed) {
    Tensor t(std::move(shape));
    Rng rng(seed);
    for (auto& x : t.data) x = rng.uniform(-1.0, 1.0);
    return t;
}

}  // namespace

TEST_CASE("init_parameters shapes and determinism") {
    NetworkSpec spec;
    spec.input_shape = {12};
    spec.trunk = {LayerSpec::dense(24)};
    spec.heads = {{"out", {}}};
    const auto a = init_parameters(spec, 5);
    CHECK(a.layers[0].weight.shape == Shape{12, 24});
    CHECK(a.layers[0].bias.shape == Shape{24});
    CHECK(a == init_parameters(spec, 5));
    CHECK_FALSE(a == init_parameters(spec, 6));
    const double limit = std::sqrt(6.0 / 36.0);
    for (double w : a.layers[0].weight.data) CHECK(std::abs(w) <= limit);
    for (double b : a.layers[0].bias.data) CHECK(b == 0.0);
}

TEST_CASE("spec validation") {
    CHECK_THROWS_AS(single(LayerSpec::conv1d(4, 2), {5, 1}).validate(), Error);
    CHECK_THROWS_AS(single(LayerSpec::dense(0), {5}).validate(), Error);
    CHECK_THROWS_AS(single(LayerSpec::dropout(1.0), {5}).validate(), Error);
    CHECK_THROWS_AS(single(LayerSpec::dense(3), {5, 1}).validate(), Error);
    CHECK_THROWS_AS(single(LayerSpec::reshape({4}), {5}).validate(), Error);
    NetworkSpec no_heads;
    no_heads.input_shape = {3};
    CHECK_THROWS_AS(no_heads.validate(), Error);
}

TEST_CASE("upsample duplicates each element adjacently") {
    const auto spec = single(LayerSpec::upsample1d(), {2});
    const Tensor in({1, 2}, {1.0, 2.0});
    const auto out = forward(spec, zero_parameters(spec), in, Mode::Infer).heads[0];
    CHECK(out.shape == Shape{1, 4});
    CHECK(out.data == std::vector<double>{1.0, 1.0, 2.0, 2.0});

    const auto spec2 = single(LayerSpec::upsample1d(), {2, 2});
    const Tensor in2({1, 2, 2}, {1.0, 10.0, 2.0, 20.0});
    const auto out2 = forward(spec2, zero_parameters(spec2), in2, Mode::Infer).heads[0];
    CHECK(out2.data == std::vector<double>{1.0, 10.0, 1.0, 10.0, 2.0, 20.0, 2.0, 20.0});
}

TEST_CASE("conv1d keeps length, flatten and reshape keep values") {
    NetworkSpec spec;
    spec.input_shape = {7, 1};
    spec.trunk = {LayerSpec::conv1d(3, 3, Activation::None), LayerSpec::flatten(), LayerSpec::reshape({7, 3})};
    spec.heads = {{"out", {}}};
    const auto shapes = spec.output_shapes();
    CHECK(shapes[0] == Shape{7, 3});
    CHECK(shapes[1] == Shape{21});
    CHECK(shapes[2] == Shape{7, 3});
    const auto params = init_parameters(spec, 1);
    const auto in = random_input({2, 7, 1}, 3);
    const auto res = forward(spec, params, in, Mode::Infer);
    CHECK(res.cache.outputs[0].data == res.heads[0].data);
}

TEST_CASE("conv1d matches a direct same-padding convolution") {
    const auto spec = single(LayerSpec::conv1d(2, 3, Activation::None), {4, 1});
    auto params = init_parameters(spec, 9);
    params.layers[0].bias.data = {0.25, -0.5};
    const Tensor in({1, 4, 1}, {1.0, 2.0, 3.0, 4.0});
    const auto out = forward(spec, params, in, Mode::Infer).heads[0];
    const auto& w = params.layers[0].weight;  // (k, c_in, c_out)
    for (int l = 0; l < 4; ++l) {
        for (int f = 0; f < 2; ++f) {
            double expected = params.layers[0].bias.data[f];
            for (int k = 0; k < 3; ++k) {
                const int src = l + k - 1;
                if (src >= 0 && src < 4) expected += in.data[src] * w.data[k * 2 + f];
            }
            CHECK(out.data[l * 2 + f] == doctest::Approx(expected).epsilon(1e-14));
        }
    }
}

TEST_CASE("softmax head with zero parameters is uniform") {
    const auto spec = single(LayerSpec::softmax_head(), {5});
    const auto out = forward(spec, zero_parameters(spec), random_input({3, 5}, 1), Mode::Infer).heads[0];
    for (double p : out.data) CHECK(p == 0.5);
}

TEST_CASE("property: softmax outputs lie in (0,1) and sum to 1") {
    const auto spec = single(LayerSpec::softmax_head(), {6});
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        auto params = init_parameters(spec, seed);
        for (auto& w : params.layers[0].weight.data) w *= 10.0;
        auto in = random_input({8, 6}, seed + 100);
        for (auto& x : in.data) x *= 5.0;
        const auto out = forward(spec, params, in, Mode::Infer).heads[0];
        for (std::size_t b = 0; b < 8; ++b) {
            CHECK(out.data[2 * b] > 0.0);
            CHECK(out.data[2 * b] < 1.0);
            CHECK(std::abs(out.data[2 * b] + out.data[2 * b + 1] - 1.0) <= 1e-6);
        }
    }
}

TEST_CASE("dropout") {
    const auto spec = single(LayerSpec::dropout(0.4), {10});
    const auto in = random_input({1, 10}, 4);
    const auto params = zero_parameters(spec);

    SUBCASE("identity in infer mode") {
        CHECK(forward(spec, params, in, Mode::Infer).heads[0] == in);
    }
    SUBCASE("train mode needs a random source") {
        CHECK_THROWS_AS(forward(spec, params, in, Mode::Train), Error);
    }
    SUBCASE("expectation over masks equals the infer output") {
        Rng rng(17);
        std::vector<double> mean(10, 0.0);
        const int draws = 20000;
        for (int i = 0; i < draws; ++i) {
            const auto out = forward(spec, params, in, Mode::Train, &rng).heads[0];
            for (std::size_t k = 0; k < 10; ++k) mean[k] += out.data[k] / draws;
        }
        for (std::size_t k = 0; k < 10; ++k) CHECK(std::abs(mean[k] - in.data[k]) <= 0.02 * std::abs(in.data[k]) + 1e-3);
    }
}

TEST_CASE("non-finite activations are reported with the layer index") {
    NetworkSpec spec;
    spec.input_shape = {2};
    spec.trunk = {LayerSpec::dense(2, Activation::None), LayerSpec::dense(2, Activation::None)};
    spec.heads = {{"out", {}}};
    auto params = init_parameters(spec, 1);
    params.layers[1].weight.data[0] = 1e308;
    params.layers[1].weight.data[2] = 1e308;
    const Tensor in({1, 2}, {1e10, 1e10});
    params.layers[0].weight.data = {1.0, 1.0, 1.0, 1.0};
    try {
        forward(spec, params, in, Mode::Infer);
        FAIL("no error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Numeric);
        CHECK(std::string(e.what()).find("layer 1") != std::string::npos);
    }
}

TEST_CASE("cross entropy") {
    const Tensor y({1, 2}, {1.0, 0.0});
    CHECK(cross_entropy(y, Tensor({1, 2}, {0.5, 0.5})) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
    const double perfect = cross_entropy(y, Tensor({1, 2}, {1.0, 0.0}));
    CHECK(perfect >= 0.0);
    CHECK(perfect < 2e-7);
    const Tensor y2({2, 2}, {1.0, 0.0, 1.0, 0.0});
    // Per-sample losses ln 2 and ln 4; their mean is 1.5 ln 2.
    CHECK(cross_entropy(y2, Tensor({2, 2}, {0.5, 0.5, 0.25, 0.75})) == doctest::Approx(1.0397207708399179).epsilon(1e-12));
    CHECK_THROWS_AS(cross_entropy(Tensor({0, 2}), Tensor({0, 2})), Error);
}

TEST_CASE("property: cross entropy is non-negative") {
    Rng rng(3);
    for (int i = 0; i < 200; ++i) {
        const double p = rng.uniform();
        const std::size_t cls = rng.below(2);
        Tensor y({1, 2});
        y.data[cls] = 1.0;
        CHECK(cross_entropy(y, Tensor({1, 2}, {p, 1.0 - p})) >= 0.0);
    }
}

TEST_CASE("backward with zero head gradients yields zero gradients") {
    const auto spec = build_discriminator(12, 0.0);
    const auto params = init_parameters(spec, 2);
    const auto fwd = forward(spec, params, random_input({3, 12, 1}, 5), Mode::Infer);
    const std::vector<Tensor> grads{Tensor({3, 2}), Tensor({3, 2})};
    const auto bwd = backward(spec, params, fwd.cache, grads);
    CHECK(bwd.grads == zero_parameters(spec));
    for (double g : bwd.input_grad.data) CHECK(g == 0.0);
}

TEST_CASE("gradient checks") {
    SUBCASE("linear single unit is exact up to roundoff") {
        const auto spec = single(LayerSpec::dense(1, Activation::None), {4});
        const auto r = finite_diff_check(spec, init_parameters(spec, 1), random_input({2, 4}, 2), 0, 1e-5);
        CHECK(r.compared == 5 + 8);
        CHECK(r.max_relative_error < 1e-8);
    }
    SUBCASE("single dense relu layer") {
        const auto spec = single(LayerSpec::dense(6), {5});
        auto params = init_parameters(spec, 3);
        for (auto& b : params.layers[0].bias.data) b = 0.1;
        const auto r = finite_diff_check(spec, params, random_input({3, 5}, 4), 0, 1e-5);
        CHECK(r.compared > 0);
        CHECK(r.max_relative_error < 1e-4);
    }
    SUBCASE("single conv layer") {
        const auto spec = single(LayerSpec::conv1d(4), {6, 2});
        const auto r = finite_diff_check(spec, init_parameters(spec, 3), random_input({2, 6, 2}, 4), 0, 1e-5);
        CHECK(r.max_relative_error < 1e-4);
    }
    SUBCASE("single softmax head") {
        const auto spec = single(LayerSpec::softmax_head(), {5});
        NetworkSpec s = spec;
        s.trunk.clear();
        s.heads = {{"p", {LayerSpec::softmax_head()}}};
        const auto r = finite_diff_check(s, init_parameters(s, 3), random_input({3, 5}, 4), 0, 1e-5);
        CHECK(r.max_relative_error < 1e-4);
    }
    SUBCASE("discriminator n=12, both heads") {
        const auto spec = build_discriminator(12, 0.4);
        const auto params = init_parameters(spec, 7);
        Tensor in({2, 12, 1});
        Rng rng(8);
        for (auto& x : in.data) x = 0.5 * static_cast<double>(rng.below(3));
        for (std::size_t head = 0; head < 2; ++head) {
            const auto r = finite_diff_check(spec, params, in, head, 1e-5, 25);
            CHECK(r.compared > 100);
            CHECK(r.max_relative_error < 1e-3);
        }
    }
    SUBCASE("generator n=12") {
        const auto spec = build_generator(12, 100);
        const auto r = finite_diff_check(spec, init_parameters(spec, 7), random_input({2, 100}, 9), 0, 1e-5, 40);
        CHECK(r.compared > 100);
        CHECK(r.max_relative_error < 1e-3);
    }
    SUBCASE("epsilon must be positive") {
        const auto spec = single(LayerSpec::dense(1), {2});
        CHECK_THROWS_AS(finite_diff_check(spec, init_parameters(spec, 1), random_input({1, 2}, 1), 0, 0.0), Error);
    }
    SUBCASE("relu inputs sitting exactly at zero are excluded") {
        const auto spec = single(LayerSpec::dense(3), {2});
        const auto r = finite_diff_check(spec, init_parameters(spec, 1), Tensor({1, 2}), 0, 1e-5);
        CHECK(r.excluded > 0);
        CHECK(r.max_relative_error < 1e-8);
    }
}

TEST_CASE("parameter checkpoint") {
    const auto spec = build_generator(12, 100);
    const auto params = init_parameters(spec, 4);
    const auto bytes = serialize_parameters(spec, params);
    CHECK(bytes.substr(0, 4) == "GGAN");
    CHECK(deserialize_parameters(bytes, spec) == params);
    CHECK(serialize_parameters(spec, deserialize_parameters(bytes, spec)) == bytes);
    CHECK_THROWS_AS(deserialize_parameters(bytes, build_generator(25, 100)), Error);
    CHECK_THROWS_AS(deserialize_parameters(bytes.substr(0, bytes.size() - 3), spec), Error);
    std::string bad = bytes;
    bad[0] = 'X';
    CHECK_THROWS_AS(deserialize_parameters(bad, spec), Error);
}

TEST_CASE("network spec json round trip") {
    const auto spec = build_discriminator(25, 0.3);
    CHECK(network_spec_from_json(nlohmann::json::parse(to_json(spec).dump())) == spec);
}
