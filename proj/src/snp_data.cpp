#include "ggan/snp_data.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "ggan/error.hpp"
#include "ggan/rng.hpp"

namespace ggan {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        if (pos == std::string_view::npos) {
            out.push_back(trim(line.substr(start)));
            break;
        }
        out.push_back(trim(line.substr(start, pos - start)));
        start = pos + 1;
    }
    return out;
}

Genotype parse_genotype_token(std::string_view token, std::size_t line_no, std::string_view snp) {
    if (token == "0") return Genotype::HomRef;
    if (token == "1") return Genotype::Het;
    if (token == "2") return Genotype::HomAlt;
    if (token == ".") return Genotype::Missing;
    fail(ErrorKind::Parse, "line " + std::to_string(line_no) + ": unknown genotype token '" +
                               std::string(token) + "' at SNP " + std::string(snp));
}

char genotype_token(Genotype g) {
    switch (g) {
        case Genotype::HomRef: return '0';
        case Genotype::Het: return '1';
        case Genotype::HomAlt: return '2';
        case Genotype::Missing: return '.';
    }
    return '.';
}

}  // namespace

std::string_view to_string(Phenotype p) { return p == Phenotype::DF ? "DF" : "SD"; }

Phenotype parse_phenotype(std::string_view token) {
    if (token == "DF") return Phenotype::DF;
    if (token == "SD") return Phenotype::SD;
    fail(ErrorKind::Parse, "unknown label token '" + std::string(token) + "'");
}

GenotypeMatrix::GenotypeMatrix(std::vector<std::string> sample_ids, std::vector<std::string> snp_ids,
                               std::vector<Genotype> genotypes,
                               std::optional<std::vector<Phenotype>> labels)
    : sample_ids_(std::move(sample_ids)),
      snp_ids_(std::move(snp_ids)),
      genotypes_(std::move(genotypes)),
      labels_(std::move(labels)) {
    if (genotypes_.size() != sample_ids_.size() * snp_ids_.size()) {
        fail(ErrorKind::Parse, "genotype grid size does not match samples x SNPs");
    }
    snp_lookup_.reserve(snp_ids_.size());
    for (std::size_t j = 0; j < snp_ids_.size(); ++j) {
        if (!snp_lookup_.emplace(snp_ids_[j], j).second) {
            fail(ErrorKind::Parse, "duplicate SNP id '" + snp_ids_[j] + "'");
        }
    }
    std::unordered_set<std::string_view> seen;
    for (const auto& id : sample_ids_) {
        if (!seen.insert(id).second) fail(ErrorKind::Parse, "duplicate sample id '" + id + "'");
    }
    if (labels_ && labels_->size() != sample_ids_.size()) {
        fail(ErrorKind::Parse, "labels do not cover every sample");
    }
}

std::optional<std::size_t> GenotypeMatrix::snp_index(std::string_view id) const {
    const auto it = snp_lookup_.find(std::string(id));
    if (it == snp_lookup_.end()) return std::nullopt;
    return it->second;
}

GenotypeMatrix GenotypeMatrix::select_samples(std::span<const std::size_t> rows) const {
    std::vector<std::string> ids;
    std::vector<Genotype> grid;
    std::optional<std::vector<Phenotype>> labels;
    if (labels_) labels.emplace();
    ids.reserve(rows.size());
    grid.reserve(rows.size() * n_snps());
    for (const auto r : rows) {
        ids.push_back(sample_ids_.at(r));
        const auto src = row(r);
        grid.insert(grid.end(), src.begin(), src.end());
        if (labels) labels->push_back((*labels_)[r]);
    }
    return GenotypeMatrix(std::move(ids), snp_ids_, std::move(grid), std::move(labels));
}

GenotypeMatrix GenotypeMatrix::select_snps(std::span<const std::string> ids) const {
    std::vector<std::size_t> cols;
    cols.reserve(ids.size());
    for (const auto& id : ids) {
        const auto idx = snp_index(id);
        if (!idx) fail(ErrorKind::DataMismatch, "SNP '" + id + "' absent from matrix");
        cols.push_back(*idx);
    }
    std::vector<Genotype> grid;
    grid.reserve(n_samples() * cols.size());
    for (std::size_t s = 0; s < n_samples(); ++s) {
        for (const auto c : cols) grid.push_back(at(s, c));
    }
    return GenotypeMatrix(sample_ids_, {ids.begin(), ids.end()}, std::move(grid), labels_);
}

GenotypeMatrix GenotypeMatrix::without_labels() const {
    return GenotypeMatrix(sample_ids_, snp_ids_, genotypes_, std::nullopt);
}

double SnpFrequencies::frequency(std::string_view allele) const {
    for (const auto& [name, f] : freqs) {
        if (name == allele) return f;
    }
    return 0.0;
}

const SnpFrequencies* AlleleFrequencyTable::find(std::string_view snp_id) const {
    for (const auto& s : snps) {
        if (s.snp_id == snp_id) return &s;
    }
    return nullptr;
}

GenotypeMatrix parse_genotype_matrix(std::istream& in, bool has_labels) {
    std::string line;
    std::size_t line_no = 0;
    if (!std::getline(in, line)) fail(ErrorKind::Parse, "empty genotype file");
    ++line_no;
    const auto header = split_fields(line);
    if (header.empty() || header.front() != "sample_id") {
        fail(ErrorKind::Parse, "line 1: header must start with 'sample_id'");
    }
    const bool label_column = header.size() > 1 && header.back() == "label";
    if (has_labels && !label_column) fail(ErrorKind::Parse, "label column missing");
    const std::size_t n_snps = header.size() - 1 - (label_column ? 1 : 0);

    std::vector<std::string> snp_ids;
    snp_ids.reserve(n_snps);
    for (std::size_t j = 0; j < n_snps; ++j) snp_ids.emplace_back(header[j + 1]);

    std::vector<std::string> sample_ids;
    std::vector<Genotype> grid;
    std::optional<std::vector<Phenotype>> labels;
    if (has_labels) labels.emplace();

    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto fields = split_fields(line);
        if (fields.size() != header.size()) {
            fail(ErrorKind::Parse, "line " + std::to_string(line_no) + ": wrong column count (expected " +
                                       std::to_string(header.size()) + ", got " +
                                       std::to_string(fields.size()) + ")");
        }
        sample_ids.emplace_back(fields[0]);
        for (std::size_t j = 0; j < n_snps; ++j) {
            grid.push_back(parse_genotype_token(fields[j + 1], line_no, snp_ids[j]));
        }
        if (has_labels) {
            try {
                labels->push_back(parse_phenotype(fields.back()));
            } catch (const Error& e) {
                fail(ErrorKind::Parse, "line " + std::to_string(line_no) + ": " + e.what());
            }
        }
    }
    return GenotypeMatrix(std::move(sample_ids), std::move(snp_ids), std::move(grid), std::move(labels));
}

GenotypeMatrix read_genotype_csv(const std::string& path, bool has_labels) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::Parse, "cannot open " + path);
    try {
        return parse_genotype_matrix(in, has_labels);
    } catch (const Error& e) {
        fail(e.kind(), path + ": " + e.what());
    }
}

void write_genotype_csv(std::ostream& out, const GenotypeMatrix& m) {
    out << "sample_id";
    for (const auto& id : m.snp_ids()) out << ',' << id;
    if (m.has_labels()) out << ",label";
    out << '\n';
    for (std::size_t s = 0; s < m.n_samples(); ++s) {
        out << m.sample_ids()[s];
        for (const auto g : m.row(s)) out << ',' << genotype_token(g);
        if (m.has_labels()) out << ',' << to_string((*m.labels())[s]);
        out << '\n';
    }
}

double encode_genotype(Genotype g) {
    switch (g) {
        case Genotype::HomRef: return 0.0;
        case Genotype::Het: return 0.5;
        case Genotype::HomAlt: return 1.0;
        case Genotype::Missing: break;
    }
    fail(ErrorKind::DataMismatch, "cannot encode a missing genotype");
}

Genotype decode_genotype(double value) {
    if (value < 0.25) return Genotype::HomRef;
    if (value < 0.75) return Genotype::Het;
    return Genotype::HomAlt;
}

std::vector<EncodedProfile> encode_profiles(const GenotypeMatrix& m, const SnpSubset& subset,
                                            MissingPolicy policy) {
    std::vector<std::size_t> cols;
    cols.reserve(subset.size());
    for (const auto& id : subset.snp_ids) {
        const auto idx = m.snp_index(id);
        if (!idx) fail(ErrorKind::DataMismatch, "subset SNP '" + id + "' absent from matrix");
        cols.push_back(*idx);
    }

    // Imputed value per column, computed lazily from the full column.
    std::vector<std::optional<double>> imputed(cols.size());
    auto mode_of = [&](std::size_t k) {
        if (!imputed[k]) {
            std::array<std::size_t, 3> counts{};
            for (std::size_t s = 0; s < m.n_samples(); ++s) {
                const auto g = m.at(s, cols[k]);
                if (g != Genotype::Missing) ++counts[static_cast<std::size_t>(g)];
            }
            // max_element returns the first maximum, so ties go toward HomRef.
            const auto best = std::max_element(counts.begin(), counts.end()) - counts.begin();
            imputed[k] = encode_genotype(static_cast<Genotype>(best));
        }
        return *imputed[k];
    };

    std::vector<EncodedProfile> out(m.n_samples());
    for (std::size_t s = 0; s < m.n_samples(); ++s) {
        auto& values = out[s].values;
        values.reserve(cols.size());
        for (std::size_t k = 0; k < cols.size(); ++k) {
            const auto g = m.at(s, cols[k]);
            if (g != Genotype::Missing) {
                values.push_back(encode_genotype(g));
            } else if (policy == MissingPolicy::Reject) {
                fail(ErrorKind::DataMismatch, "missing genotype for sample '" + m.sample_ids()[s] +
                                                  "' at SNP '" + subset.snp_ids[k] + "'");
            } else {
                values.push_back(mode_of(k));
            }
        }
    }
    return out;
}

AlleleFrequencyTable allele_frequencies(const GenotypeMatrix& m) {
    if (m.n_samples() == 0) fail(ErrorKind::DataMismatch, "allele frequencies of an empty matrix");
    AlleleFrequencyTable table;
    table.snps.reserve(m.n_snps());
    for (std::size_t j = 0; j < m.n_snps(); ++j) {
        std::int64_t ref = 0, observed = 0;
        for (std::size_t s = 0; s < m.n_samples(); ++s) {
            switch (m.at(s, j)) {
                case Genotype::HomRef: ref += 2; observed += 2; break;
                case Genotype::Het: ref += 1; observed += 2; break;
                case Genotype::HomAlt: observed += 2; break;
                case Genotype::Missing: break;
            }
        }
        if (observed == 0) {
            fail(ErrorKind::DataMismatch, "SNP '" + m.snp_ids()[j] + "' has no observed genotypes");
        }
        const double f_ref = static_cast<double>(ref) / static_cast<double>(observed);
        const double f_alt = static_cast<double>(observed - ref) / static_cast<double>(observed);
        table.snps.push_back({m.snp_ids()[j], {{"ref", f_ref}, {"alt", f_alt}}, 2, observed});
    }
    return table;
}

AfdMap afd(const AlleleFrequencyTable& labeled, const AlleleFrequencyTable& unlabeled) {
    for (const auto& u : unlabeled.snps) {
        if (!labeled.find(u.snp_id)) {
            fail(ErrorKind::DataMismatch, "SNP '" + u.snp_id + "' present in one table only");
        }
    }
    AfdMap out;
    out.reserve(labeled.snps.size());
    for (const auto& l : labeled.snps) {
        const auto* u = unlabeled.find(l.snp_id);
        if (!u) fail(ErrorKind::DataMismatch, "SNP '" + l.snp_id + "' present in one table only");
        double best = 0.0;
        for (const auto& [allele, f] : l.freqs) best = std::max(best, std::abs(f - u->frequency(allele)));
        for (const auto& [allele, f] : u->freqs) best = std::max(best, std::abs(l.frequency(allele) - f));
        out.push_back({l.snp_id, best});
    }
    return out;
}

SnpSubset select_snps_by_afd(const AfdMap& afd_map, double threshold) {
    if (!(threshold >= 0.0 && threshold <= 1.0)) {
        fail(ErrorKind::Usage, "AFD threshold must lie in [0, 1]");
    }
    SnpSubset subset;
    subset.source = SnpSubset::Source::AfdThreshold;
    subset.afd_threshold = threshold;
    subset.afd_values.emplace();
    for (const auto& e : afd_map) {
        if (e.afd < threshold) {
            subset.snp_ids.push_back(e.snp_id);
            subset.afd_values->push_back(e.afd);
        }
    }
    subset.empty_warning = subset.snp_ids.empty();
    return subset;
}

SnpSubset select_snps_by_list(std::span<const std::string> available_snps,
                              std::span<const std::string> ids) {
    std::unordered_set<std::string_view> seen;
    for (const auto& id : ids) {
        if (!seen.insert(id).second) fail(ErrorKind::Usage, "duplicate SNP id '" + id + "' in list");
    }
    const std::unordered_set<std::string_view> known(available_snps.begin(), available_snps.end());
    std::string unknown;
    for (const auto& id : ids) {
        if (!known.count(id)) unknown += (unknown.empty() ? "" : ", ") + id;
    }
    if (!unknown.empty()) fail(ErrorKind::DataMismatch, "SNP ids not present: " + unknown);
    SnpSubset subset;
    subset.source = SnpSubset::Source::ExplicitList;
    subset.snp_ids.assign(ids.begin(), ids.end());
    return subset;
}

SnpSubset select_snps_by_list(const GenotypeMatrix& m, std::span<const std::string> ids) {
    return select_snps_by_list(std::span<const std::string>(m.snp_ids()), ids);
}

std::pair<GenotypeMatrix, GenotypeMatrix> split_train_test(const GenotypeMatrix& m,
                                                           double test_fraction,
                                                           std::uint64_t seed) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
        fail(ErrorKind::Config, "test fraction must lie strictly between 0 and 1");
    }
    const std::size_t n = m.n_samples();
    const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(n)));
    if (n_test == 0 || n_test >= n) {
        fail(ErrorKind::Config, "split of " + std::to_string(n) + " samples at fraction " +
                                    std::to_string(test_fraction) + " leaves one side empty");
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(seed);
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

    std::vector<std::size_t> test(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_test));
    std::vector<std::size_t> train(order.begin() + static_cast<std::ptrdiff_t>(n_test), order.end());
    std::sort(test.begin(), test.end());
    std::sort(train.begin(), train.end());
    return {m.select_samples(train), m.select_samples(test)};
}

void write_subset(const std::string& path, const SnpSubset& subset) {
    {
        std::ofstream out(path);
        if (!out) fail(ErrorKind::Usage, "cannot write " + path);
        for (const auto& id : subset.snp_ids) out << id << '\n';
    }
    nlohmann::ordered_json side;
    if (subset.source == SnpSubset::Source::AfdThreshold) {
        side["provenance"] = {{"kind", "afd_threshold"}, {"afd_threshold", subset.afd_threshold}};
    } else {
        side["provenance"] = {{"kind", "explicit_list"}};
    }
    side["snp_ids"] = subset.snp_ids;
    if (subset.afd_values) {
        nlohmann::ordered_json values = nlohmann::ordered_json::object();
        for (std::size_t k = 0; k < subset.size(); ++k) values[subset.snp_ids[k]] = (*subset.afd_values)[k];
        side["afd_values"] = values;
    } else {
        side["afd_values"] = nullptr;
    }
    side["empty_warning"] = subset.empty_warning;
    std::ofstream out(path + ".json");
    if (!out) fail(ErrorKind::Usage, "cannot write " + path + ".json");
    out << side.dump(2) << '\n';
}

SnpSubset read_subset(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::Parse, "cannot open " + path);
    SnpSubset subset;
    std::string line;
    while (std::getline(in, line)) {
        const auto id = trim(line);
        if (!id.empty()) subset.snp_ids.emplace_back(id);
    }
    std::ifstream side_in(path + ".json");
    if (!side_in) return subset;
    try {
        const auto side = nlohmann::json::parse(side_in);
        const auto& prov = side.at("provenance");
        if (prov.at("kind") == "afd_threshold") {
            subset.source = SnpSubset::Source::AfdThreshold;
            subset.afd_threshold = prov.at("afd_threshold").get<double>();
        }
        if (side.contains("afd_values") && side["afd_values"].is_object()) {
            std::vector<double> values;
            for (const auto& id : subset.snp_ids) values.push_back(side["afd_values"].at(id).get<double>());
            subset.afd_values = std::move(values);
        }
        subset.empty_warning = side.value("empty_warning", false);
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Parse, path + ".json: " + e.what());
    }
    return subset;
}

}  // namespace ggan
