#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace ggan {

enum class Genotype : std::uint8_t { HomRef, Het, HomAlt, Missing };

/// Disease label. DF is index 0 and SD index 1 on the label head.
enum class Phenotype : std::uint8_t { DF = 0, SD = 1 };

std::string_view to_string(Phenotype p);
Phenotype parse_phenotype(std::string_view token);

/// Individuals x SNPs grid of biallelic diploid genotypes.
class GenotypeMatrix {
public:
    GenotypeMatrix() = default;
    /// Validates dimensions, id uniqueness and label coverage.
    GenotypeMatrix(std::vector<std::string> sample_ids, std::vector<std::string> snp_ids,
                   std::vector<Genotype> genotypes,
                   std::optional<std::vector<Phenotype>> labels = std::nullopt);

    std::size_t n_samples() const { return sample_ids_.size(); }
    std::size_t n_snps() const { return snp_ids_.size(); }

    const std::vector<std::string>& sample_ids() const { return sample_ids_; }
    const std::vector<std::string>& snp_ids() const { return snp_ids_; }
    const std::optional<std::vector<Phenotype>>& labels() const { return labels_; }
    bool has_labels() const { return labels_.has_value(); }

    Genotype at(std::size_t sample, std::size_t snp) const {
        return genotypes_[sample * snp_ids_.size() + snp];
    }
    std::span<const Genotype> row(std::size_t sample) const {
        return {genotypes_.data() + sample * snp_ids_.size(), snp_ids_.size()};
    }

    std::optional<std::size_t> snp_index(std::string_view id) const;

    /// Rows in the given order (indices may repeat only if ids stay unique, so they must not).
    GenotypeMatrix select_samples(std::span<const std::size_t> rows) const;
    /// Columns in the given order.
    GenotypeMatrix select_snps(std::span<const std::string> ids) const;
    GenotypeMatrix without_labels() const;

private:
    std::vector<std::string> sample_ids_;
    std::vector<std::string> snp_ids_;
    std::vector<Genotype> genotypes_;
    std::optional<std::vector<Phenotype>> labels_;
    std::unordered_map<std::string, std::size_t> snp_lookup_;
};

/// Per-SNP allele frequencies of one cohort.
struct SnpFrequencies {
    std::string snp_id;
    /// Allele name -> frequency; biallelic SNPs carry "ref" and "alt".
    std::vector<std::pair<std::string, double>> freqs;
    int allele_count = 2;
    std::int64_t total_alleles_observed = 0;

    double frequency(std::string_view allele) const;
};

struct AlleleFrequencyTable {
    std::vector<SnpFrequencies> snps;

    const SnpFrequencies* find(std::string_view snp_id) const;
};

struct AfdEntry {
    std::string snp_id;
    double afd = 0.0;
};
using AfdMap = std::vector<AfdEntry>;

struct SnpSubset {
    enum class Source { AfdThreshold, ExplicitList };

    std::vector<std::string> snp_ids;
    Source source = Source::ExplicitList;
    double afd_threshold = 0.0;
    /// Aligned with snp_ids when the subset came from an AFD table.
    std::optional<std::vector<double>> afd_values;
    /// Set when a threshold selected nothing.
    bool empty_warning = false;

    std::size_t size() const { return snp_ids.size(); }
};

struct EncodedProfile {
    std::vector<double> values;
};

enum class MissingPolicy { Reject, ImputeMode };

GenotypeMatrix parse_genotype_matrix(std::istream& in, bool has_labels);
GenotypeMatrix read_genotype_csv(const std::string& path, bool has_labels);
void write_genotype_csv(std::ostream& out, const GenotypeMatrix& m);

double encode_genotype(Genotype g);
/// Inverse of encode_genotype on {0, 0.5, 1}; anything else decodes to the nearest level.
Genotype decode_genotype(double value);

std::vector<EncodedProfile> encode_profiles(const GenotypeMatrix& m, const SnpSubset& subset,
                                            MissingPolicy policy);

AlleleFrequencyTable allele_frequencies(const GenotypeMatrix& m);

/// Per-SNP maximum absolute allele-frequency difference, in the labeled table's order.
AfdMap afd(const AlleleFrequencyTable& labeled, const AlleleFrequencyTable& unlabeled);

/// SNPs whose AFD is strictly below threshold, in AFD-map order.
SnpSubset select_snps_by_afd(const AfdMap& afd_map, double threshold);
SnpSubset select_snps_by_list(std::span<const std::string> available_snps,
                              std::span<const std::string> ids);
SnpSubset select_snps_by_list(const GenotypeMatrix& m, std::span<const std::string> ids);

/// Returns (train, test); |test| = round(test_fraction * n).
std::pair<GenotypeMatrix, GenotypeMatrix> split_train_test(const GenotypeMatrix& m,
                                                           double test_fraction,
                                                           std::uint64_t seed);

/// Subset file: one id per line, plus `<path>.json` holding provenance and AFD values.
void write_subset(const std::string& path, const SnpSubset& subset);
SnpSubset read_subset(const std::string& path);

}  // namespace ggan
