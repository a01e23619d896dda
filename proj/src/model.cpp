#include "ggan/model.hpp"

#include <algorithm>
#include <cstdio>
#include <ostream>

#include "ggan/error.hpp"

namespace ggan {

ConvWidths discriminator_widths(std::size_t n_snps) {
    if (n_snps == 96) return {180, 360, 180};
    return {2 * n_snps, 4 * n_snps, 2 * n_snps};
}

GeneratorWidths generator_widths(std::size_t n_snps) {
    if (n_snps == 96) return {90, 180};
    return {2 * n_snps, 4 * n_snps};
}

NetworkSpec build_discriminator(std::size_t n_snps, double dropout_rate) {
    if (n_snps < 2) fail(ErrorKind::Config, "discriminator needs at least 2 SNPs");
    const auto w = discriminator_widths(n_snps);
    NetworkSpec spec;
    spec.input_shape = {n_snps, 1};
    spec.trunk = {
        LayerSpec::conv1d(w.first),
        LayerSpec::conv1d(w.second),
        LayerSpec::conv1d(w.third),
        LayerSpec::flatten(),
        LayerSpec::dropout(dropout_rate),
    };
    spec.heads = {
        {"label", {LayerSpec::softmax_head(2)}},
        {"realness", {LayerSpec::softmax_head(2)}},
    };
    spec.validate();
    return spec;
}

NetworkSpec build_generator(std::size_t n_snps, std::size_t noise_dim) {
    if (n_snps < 2) fail(ErrorKind::Config, "generator needs at least 2 SNPs");
    if (noise_dim < 1) fail(ErrorKind::Config, "noise dimension must be >= 1");
    const auto w = generator_widths(n_snps);
    NetworkSpec spec;
    spec.input_shape = {noise_dim};
    spec.trunk = {
        LayerSpec::dense(w.first),
        LayerSpec::upsample1d(),
        LayerSpec::dense(w.second),
        LayerSpec::upsample1d(),
        LayerSpec::dense(n_snps),
        LayerSpec::reshape({n_snps, 1}),
    };
    spec.heads = {{"profile", {}}};
    spec.validate();
    return spec;
}

GganModel GganModel::create(std::size_t n_snps, std::size_t noise_dim, double dropout_rate, std::uint64_t seed) {
    GganModel model;
    model.n_snps = n_snps;
    model.noise_dim = noise_dim;
    model.generator_spec = build_generator(n_snps, noise_dim);
    model.discriminator_spec = build_discriminator(n_snps, dropout_rate);
    Rng seeds(seed);
    model.generator = init_parameters(model.generator_spec, seeds.next_u64());
    model.discriminator = init_parameters(model.discriminator_spec, seeds.next_u64());
    return model;
}

void GganModel::validate() const {
    const Shape profile{n_snps, 1};
    if (generator_spec.head_output_shape(0) != profile || discriminator_spec.input_shape != profile) {
        fail(ErrorKind::ArtifactMismatch, "generator output and discriminator input disagree");
    }
    if (generator_spec.input_shape != Shape{noise_dim}) {
        fail(ErrorKind::ArtifactMismatch, "generator input does not match noise dimension");
    }
    if (discriminator_spec.heads.size() != 2) {
        fail(ErrorKind::ArtifactMismatch, "discriminator must expose exactly two heads");
    }
    const auto check = [](const NetworkSpec& spec, const ParameterSet& params) {
        const auto expected = zero_parameters(spec);
        if (expected.layers.size() != params.layers.size()) {
            fail(ErrorKind::ArtifactMismatch, "parameter layout does not match network");
        }
        for (std::size_t l = 0; l < params.layers.size(); ++l) {
            if (expected.layers[l].weight.shape != params.layers[l].weight.shape ||
                expected.layers[l].bias.shape != params.layers[l].bias.shape) {
                fail(ErrorKind::ArtifactMismatch, "parameter shape mismatch at layer " + std::to_string(l));
            }
        }
    };
    check(generator_spec, generator);
    check(discriminator_spec, discriminator);
}

NoiseBatch sample_noise(std::size_t batch, std::size_t noise_dim, Rng& rng, NoiseKind kind) {
    if (batch < 1) fail(ErrorKind::Usage, "noise batch must be >= 1");
    NoiseBatch noise{Tensor({batch, noise_dim})};
    for (auto& x : noise.values.data) x = kind == NoiseKind::Normal ? rng.normal() : rng.uniform();
    return noise;
}

SyntheticBatch generate(const GganModel& model, const NoiseBatch& noise) {
    if (noise.values.shape.size() != 2 || noise.values.shape[1] != model.noise_dim) {
        fail(ErrorKind::DataMismatch, "noise shape " + shape_string(noise.values.shape) +
                                          " does not match generator input " + std::to_string(model.noise_dim));
    }
    auto result = forward(model.generator_spec, model.generator, noise.values, Mode::Infer);
    SyntheticBatch out;
    out.raw = std::move(result.heads[0]);
    out.profiles = out.raw;
    for (auto& x : out.profiles.data) x = std::clamp(x, 0.0, 1.0);
    return out;
}

Discrimination discriminate(const GganModel& model, const Tensor& profiles, Mode mode, Rng* rng) {
    if (profiles.shape != Shape{profiles.shape.empty() ? 0 : profiles.shape[0], model.n_snps, 1}) {
        fail(ErrorKind::DataMismatch, "profiles shape " + shape_string(profiles.shape) + " does not match (batch," +
                                          std::to_string(model.n_snps) + ",1)");
    }
    auto result = forward(model.discriminator_spec, model.discriminator, profiles, mode, rng);
    return {std::move(result.heads[kLabelHead]), std::move(result.heads[kRealnessHead])};
}

ProfileSet make_profile_set(const GenotypeMatrix& m, const SnpSubset& subset, MissingPolicy policy) {
    const auto encoded = encode_profiles(m, subset, policy);
    ProfileSet set;
    set.ids = m.sample_ids();
    set.profiles = Tensor({m.n_samples(), subset.size(), 1});
    for (std::size_t s = 0; s < encoded.size(); ++s) {
        std::copy(encoded[s].values.begin(), encoded[s].values.end(),
                  set.profiles.data.begin() + static_cast<std::ptrdiff_t>(s * subset.size()));
    }
    set.labels = m.labels();
    return set;
}

Tensor gather_rows(const Tensor& t, std::span<const std::size_t> rows) {
    Shape shape = t.shape;
    shape[0] = rows.size();
    Tensor out(shape);
    const std::size_t stride = t.shape[0] ? t.size() / t.shape[0] : 0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto src = t.slice(rows[i]);
        std::copy(src.begin(), src.end(), out.data.begin() + static_cast<std::ptrdiff_t>(i * stride));
    }
    return out;
}

namespace {

double quantize_value(double v) { return encode_genotype(decode_genotype(v)); }

}  // namespace

void write_synthetic_csv(std::ostream& out, const Tensor& profiles, const std::vector<std::string>& snp_ids,
                         bool quantize, const std::optional<std::vector<Phenotype>>& labels) {
    const std::size_t n = snp_ids.size();
    if (profiles.shape.size() < 2 || profiles.shape[1] != n) {
        fail(ErrorKind::DataMismatch, "synthetic profiles do not match SNP list");
    }
    out << "sample_id";
    for (const auto& id : snp_ids) out << ',' << id;
    if (labels) out << ",label";
    out << '\n';
    const std::size_t batch = profiles.shape[0];
    char buf[32];
    for (std::size_t b = 0; b < batch; ++b) {
        out << "synthetic_" << b;
        for (std::size_t j = 0; j < n; ++j) {
            const double v = profiles.data[b * n + j];
            if (quantize) {
                out << ',' << static_cast<int>(quantize_value(v) * 2.0);
            } else {
                std::snprintf(buf, sizeof buf, "%.17g", v);
                out << ',' << buf;
            }
        }
        if (labels) out << ',' << to_string((*labels)[b]);
        out << '\n';
    }
}

GenotypeMatrix synthetic_matrix(const Tensor& profiles, const std::vector<std::string>& snp_ids,
                                const std::optional<std::vector<Phenotype>>& labels) {
    const std::size_t n = snp_ids.size();
    const std::size_t batch = profiles.shape.at(0);
    std::vector<std::string> ids;
    std::vector<Genotype> grid;
    grid.reserve(batch * n);
    for (std::size_t b = 0; b < batch; ++b) {
        ids.push_back("synthetic_" + std::to_string(b));
        for (std::size_t j = 0; j < n; ++j) grid.push_back(decode_genotype(profiles.data[b * n + j]));
    }
    return GenotypeMatrix(std::move(ids), snp_ids, std::move(grid), labels);
}

}  // namespace ggan
