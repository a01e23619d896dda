#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ggan/network.hpp"
#include "ggan/snp_data.hpp"

namespace ggan {

inline constexpr std::size_t kDefaultNoiseDim = 100;

/// Head indices of the discriminator. Label head order is (DF, SD);
/// realness head order is (fake, real).
inline constexpr std::size_t kLabelHead = 0;
inline constexpr std::size_t kRealnessHead = 1;
inline constexpr std::size_t kFakeIndex = 0;
inline constexpr std::size_t kRealIndex = 1;

struct ConvWidths {
    std::size_t first, second, third;
};
struct GeneratorWidths {
    std::size_t first, second;
};

/// Channel widths of the three convolutions. (2n, 4n, 2n), except 180/360/180
/// at n = 96.
ConvWidths discriminator_widths(std::size_t n_snps);
/// Widths of the first two dense layers. (2n, 4n), except 90/180 at n = 96.
GeneratorWidths generator_widths(std::size_t n_snps);

/// input(n,1) -> 3x Conv1D(relu) -> Flatten -> Dropout -> {label, realness} softmax heads.
NetworkSpec build_discriminator(std::size_t n_snps, double dropout_rate);
/// input(noise) -> Dense -> UpSample -> Dense -> UpSample -> Dense(n) -> Reshape(n,1).
NetworkSpec build_generator(std::size_t n_snps, std::size_t noise_dim = kDefaultNoiseDim);

struct GganModel {
    NetworkSpec generator_spec;
    ParameterSet generator;
    NetworkSpec discriminator_spec;
    ParameterSet discriminator;
    std::size_t n_snps = 0;
    std::size_t noise_dim = kDefaultNoiseDim;

    static GganModel create(std::size_t n_snps, std::size_t noise_dim, double dropout_rate, std::uint64_t seed);

    /// Checks shape agreement between the two networks and their parameters.
    void validate() const;

    bool operator==(const GganModel&) const = default;
};

enum class NoiseKind { Normal, Uniform };

struct NoiseBatch {
    Tensor values;  // (batch, noise_dim)
};

/// Generator output. `profiles` is clipped to [0,1]; `raw` is the unclipped output.
struct SyntheticBatch {
    Tensor profiles;  // (batch, n_snps, 1)
    Tensor raw;
};

NoiseBatch sample_noise(std::size_t batch, std::size_t noise_dim, Rng& rng, NoiseKind kind = NoiseKind::Normal);

SyntheticBatch generate(const GganModel& model, const NoiseBatch& noise);

struct Discrimination {
    Tensor label_probs;     // (batch, 2): DF, SD
    Tensor realness_probs;  // (batch, 2): fake, real
};

Discrimination discriminate(const GganModel& model, const Tensor& profiles, Mode mode = Mode::Infer,
                            Rng* rng = nullptr);

/// Index of the larger entry of a probability pair; ties go to index 0.
inline std::size_t argmax_pair(double p0, double p1) { return p1 > p0 ? 1 : 0; }

/// Encoded profiles as a (batch, n_snps, 1) tensor, with ids and optional labels.
struct ProfileSet {
    std::vector<std::string> ids;
    Tensor profiles;
    std::optional<std::vector<Phenotype>> labels;

    std::size_t size() const { return ids.size(); }
    std::size_t n_snps() const { return profiles.shape.size() > 1 ? profiles.shape[1] : 0; }
};

ProfileSet make_profile_set(const GenotypeMatrix& m, const SnpSubset& subset, MissingPolicy policy);

/// Rows `rows` of a (batch, ...) tensor stacked in order.
Tensor gather_rows(const Tensor& t, std::span<const std::size_t> rows);

/// Synthetic profiles as genotype CSV rows named synthetic_<k>. With `quantize`
/// values snap to the nearest of {0, 0.5, 1} and are written as 0/1/2 tokens,
/// otherwise the continuous values are written. The label column comes from
/// the label head's argmax when `labels` is given.
void write_synthetic_csv(std::ostream& out, const Tensor& profiles, const std::vector<std::string>& snp_ids,
                         bool quantize, const std::optional<std::vector<Phenotype>>& labels);

/// Quantized synthetic profiles as a GenotypeMatrix.
GenotypeMatrix synthetic_matrix(const Tensor& profiles, const std::vector<std::string>& snp_ids,
                                const std::optional<std::vector<Phenotype>>& labels);

}  // namespace ggan
