#include <doctest.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "ggan/error.hpp"
#include "ggan/snp_data.hpp"
#include "oracles.hpp"

using namespace ggan;

namespace {

GenotypeMatrix parse(const std::string& text, bool labels) {
    std::istringstream in(text);
    return parse_genotype_matrix(in, labels);
}

ErrorKind kind_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.kind();
    }
    FAIL("expected an error");
    return ErrorKind::Usage;
}

AlleleFrequencyTable table(double ref) {
    return {{{"rs1", {{"ref", ref}, {"alt", 1.0 - ref}}, 2, 4}}};
}

}  // namespace

TEST_CASE("parse genotype matrix without labels") {
    const auto m = parse("sample_id,rs1,rs2,rs3\na,0,1,2\nb,.,0,1\n", false);
    CHECK(m.n_samples() == 2);
    CHECK(m.n_snps() == 3);
    CHECK_FALSE(m.has_labels());
    CHECK(m.at(0, 2) == Genotype::HomAlt);
    CHECK(m.at(1, 0) == Genotype::Missing);
    CHECK(m.sample_ids() == std::vector<std::string>{"a", "b"});
}

TEST_CASE("parse genotype matrix with labels") {
    const auto m = parse("sample_id,rs1,rs2,rs3,label\na,0,1,2,SD\nb,2,0,1,DF\n", true);
    REQUIRE(m.has_labels());
    CHECK(*m.labels() == std::vector<Phenotype>{Phenotype::SD, Phenotype::DF});
}

TEST_CASE("parse errors") {
    SUBCASE("wrong column count") {
        try {
            parse("sample_id,rs1,rs2,rs3\na,0,1\n", false);
            FAIL("no error");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::Parse);
            CHECK(std::string(e.what()).find("wrong column count") != std::string::npos);
        }
    }
    SUBCASE("unknown token") {
        CHECK(kind_of([] { parse("sample_id,rs1\na,3\n", false); }) == ErrorKind::Parse);
    }
    SUBCASE("duplicate ids") {
        CHECK(kind_of([] { parse("sample_id,rs1,rs1\na,0,0\n", false); }) == ErrorKind::Parse);
        CHECK(kind_of([] { parse("sample_id,rs1\na,0\na,1\n", false); }) == ErrorKind::Parse);
    }
    SUBCASE("label column missing") {
        CHECK(kind_of([] { parse("sample_id,rs1\na,0\n", true); }) == ErrorKind::Parse);
    }
    SUBCASE("bad label token") {
        CHECK(kind_of([] { parse("sample_id,rs1,label\na,0,XX\n", true); }) == ErrorKind::Parse);
    }
}

TEST_CASE("label column is skipped when labels are not requested") {
    const auto m = parse("sample_id,rs1,label\na,0,SD\n", false);
    CHECK(m.n_snps() == 1);
    CHECK_FALSE(m.has_labels());
}

TEST_CASE("csv write/parse round trip") {
    const auto m = parse("sample_id,rs1,rs2,label\na,0,.,SD\nb,2,1,DF\n", true);
    std::ostringstream out;
    write_genotype_csv(out, m);
    CHECK(out.str() == "sample_id,rs1,rs2,label\na,0,.,SD\nb,2,1,DF\n");
}

TEST_CASE("encode profiles") {
    const auto m = parse("sample_id,rs1,rs2,rs3\na,0,1,2\nb,2,2,.\nc,2,2,2\n", false);
    SnpSubset all;
    all.snp_ids = {"rs1", "rs2", "rs3"};

    SUBCASE("three-point encoding") {
        SnpSubset two;
        two.snp_ids = {"rs1", "rs2"};
        const auto p = encode_profiles(m, two, MissingPolicy::Reject);
        CHECK(p[0].values == std::vector<double>{0.0, 0.5});
        CHECK(p[1].values == std::vector<double>{1.0, 1.0});
    }
    SUBCASE("missing under reject names sample and SNP") {
        try {
            encode_profiles(m, all, MissingPolicy::Reject);
            FAIL("no error");
        } catch (const Error& e) {
            const std::string what = e.what();
            CHECK(what.find("'b'") != std::string::npos);
            CHECK(what.find("'rs3'") != std::string::npos);
        }
    }
    SUBCASE("mode imputation") {
        // Column rs3 is {HomAlt, Missing, HomAlt}: HomAlt appears twice.
        const auto p = encode_profiles(m, all, MissingPolicy::ImputeMode);
        CHECK(p[1].values[2] == 1.0);
    }
    SUBCASE("mode ties go to HomRef") {
        const auto t = parse("sample_id,rs1\na,0\nb,2\nc,.\n", false);
        SnpSubset s;
        s.snp_ids = {"rs1"};
        CHECK(encode_profiles(t, s, MissingPolicy::ImputeMode)[2].values[0] == 0.0);
    }
    SUBCASE("absent SNP") {
        SnpSubset s;
        s.snp_ids = {"rs9"};
        CHECK(kind_of([&] { encode_profiles(m, s, MissingPolicy::Reject); }) == ErrorKind::DataMismatch);
    }
}

TEST_CASE("encode/decode closure") {
    for (auto g : {Genotype::HomRef, Genotype::Het, Genotype::HomAlt}) {
        const double v = encode_genotype(g);
        CHECK((v == 0.0 || v == 0.5 || v == 1.0));
        CHECK(decode_genotype(v) == g);
    }
}

TEST_CASE("allele frequencies") {
    SUBCASE("HomRef + Het") {
        const auto t = allele_frequencies(parse("sample_id,rs1\na,0\nb,1\n", false));
        CHECK(t.snps[0].frequency("ref") == 0.75);
        CHECK(t.snps[0].frequency("alt") == 0.25);
    }
    SUBCASE("all HomAlt") {
        const auto t = allele_frequencies(parse("sample_id,rs1\na,2\nb,2\n", false));
        CHECK(t.snps[0].frequency("ref") == 0.0);
        CHECK(t.snps[0].frequency("alt") == 1.0);
    }
    SUBCASE("missing excluded") {
        const auto t = allele_frequencies(parse("sample_id,rs1\na,0\nb,.\n", false));
        CHECK(t.snps[0].frequency("ref") == 1.0);
        CHECK(t.snps[0].total_alleles_observed == 2);
    }
    SUBCASE("SNP with nothing observed") {
        CHECK(kind_of([] { allele_frequencies(parse("sample_id,rs1\na,.\n", false)); }) ==
              ErrorKind::DataMismatch);
    }
}

TEST_CASE("afd") {
    CHECK(afd(table(0.75), table(0.75))[0].afd == 0.0);
    CHECK(afd(table(0.75), table(0.25))[0].afd == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(afd(table(1.0), table(0.0))[0].afd == 1.0);

    AlleleFrequencyTable other = table(0.5);
    other.snps[0].snp_id = "rs2";
    CHECK(kind_of([&] { afd(table(0.5), other); }) == ErrorKind::DataMismatch);
}

TEST_CASE("select by afd threshold") {
    const AfdMap m{{"a", 0.05}, {"b", 0.2}, {"c", 0.07}, {"d", 1.0}};
    const auto s = select_snps_by_afd(m, 0.07);
    CHECK(s.snp_ids == std::vector<std::string>{"a"});
    CHECK(s.afd_values == std::vector<double>{0.05});
    CHECK(select_snps_by_afd(m, 0.0).snp_ids.empty());
    CHECK(select_snps_by_afd(m, 0.0).empty_warning);
    CHECK(select_snps_by_afd(m, 1.0).snp_ids == std::vector<std::string>{"a", "b", "c"});
    CHECK(kind_of([&] { select_snps_by_afd(m, 1.0 + 1e-9); }) == ErrorKind::Usage);
}

TEST_CASE("select by list") {
    std::vector<std::string> cols;
    for (int i = 0; i < 20; ++i) cols.push_back("rs" + std::to_string(i));
    std::vector<std::string> ids{"rs5", "rs1", "rs7", "rs2", "rs11", "rs3", "rs9", "rs0", "rs13", "rs4", "rs19", "rs6"};
    const auto s = select_snps_by_list(std::span<const std::string>(cols), ids);
    CHECK(s.size() == 12);
    CHECK(s.snp_ids == ids);
    CHECK(s.source == SnpSubset::Source::ExplicitList);
    CHECK(select_snps_by_list(std::span<const std::string>(cols), std::vector<std::string>{}).size() == 0);
    try {
        select_snps_by_list(std::span<const std::string>(cols), std::vector<std::string>{"rs1", "rs404"});
        FAIL("no error");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("rs404") != std::string::npos);
    }
}

TEST_CASE("train/test split") {
    std::mt19937_64 gen(7);
    const auto m = oracle::random_matrix(gen, 102, 3, 0.0);
    const auto [train, test] = split_train_test(m, 0.2, 11);
    CHECK(train.n_samples() == 82);
    CHECK(test.n_samples() == 20);

    std::set<std::string> all(train.sample_ids().begin(), train.sample_ids().end());
    for (const auto& id : test.sample_ids()) CHECK(all.insert(id).second);
    CHECK(all.size() == 102);

    const auto small = oracle::random_matrix(gen, 10, 2, 0.0);
    const auto a = split_train_test(small, 0.2, 3);
    const auto b = split_train_test(small, 0.2, 3);
    CHECK(a.second.sample_ids() == b.second.sample_ids());
    CHECK(a.first.sample_ids() == b.first.sample_ids());

    const auto tiny = oracle::random_matrix(gen, 2, 2, 0.0);
    CHECK(kind_of([&] { split_train_test(tiny, 0.99, 1); }) == ErrorKind::Config);
    CHECK(kind_of([&] { split_train_test(tiny, 0.0, 1); }) == ErrorKind::Config);
}

TEST_CASE("property: frequencies and AFD agree with the allele-string oracle") {
    std::mt19937_64 gen(2024);
    std::uniform_int_distribution<std::size_t> dim(1, 20);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t snps = dim(gen);
        const auto l = oracle::random_matrix(gen, dim(gen), snps, 0.1);
        const auto u = oracle::random_matrix(gen, dim(gen), snps, 0.1);
        const auto fl = allele_frequencies(l);
        const auto fu = allele_frequencies(u);
        const auto cl = oracle::count_alleles(l);
        const auto cu = oracle::count_alleles(u);
        const auto d = afd(fl, fu);
        const auto d_swapped = afd(fu, fl);
        for (std::size_t j = 0; j < snps; ++j) {
            const double total = static_cast<double>(cl[j].total);
            CHECK(fl.snps[j].frequency("ref") == static_cast<double>(cl[j].counts.at('A')) / total);
            CHECK(fl.snps[j].frequency("alt") == static_cast<double>(cl[j].counts.at('T')) / total);
            CHECK(std::abs(fl.snps[j].frequency("ref") + fl.snps[j].frequency("alt") - 1.0) <= 1e-9);
            CHECK(std::abs(d[j].afd - oracle::afd_rational(cl[j], cu[j])) <= 1e-12);
            CHECK(d[j].afd == d_swapped[j].afd);
            CHECK(d[j].afd >= 0.0);
            CHECK(d[j].afd <= 1.0);
        }
        for (const auto& e : afd(fl, fl)) CHECK(e.afd == 0.0);
    }
}

TEST_CASE("property: threshold monotonicity") {
    std::mt19937_64 gen(99);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        AfdMap m;
        for (int j = 0; j < 30; ++j) m.push_back({"rs" + std::to_string(j), u(gen) * 0.4});
        double t1 = u(gen) * 0.5, t2 = u(gen) * 0.5;
        if (t1 > t2) std::swap(t1, t2);
        const auto a = select_snps_by_afd(m, t1).snp_ids;
        const auto b = select_snps_by_afd(m, t2).snp_ids;
        const std::set<std::string> bs(b.begin(), b.end());
        for (const auto& id : a) CHECK(bs.count(id) == 1);
    }
}

TEST_CASE("subset file round trip") {
    const auto path = (std::filesystem::temp_directory_path() / "ggan_subset_test.snps").string();
    const auto s = select_snps_by_afd(AfdMap{{"a", 0.01}, {"b", 0.5}, {"c", 0.02}}, 0.1);
    write_subset(path, s);
    const auto r = read_subset(path);
    CHECK(r.snp_ids == s.snp_ids);
    CHECK(r.source == SnpSubset::Source::AfdThreshold);
    CHECK(r.afd_threshold == 0.1);
    CHECK(r.afd_values == s.afd_values);
    std::filesystem::remove(path);
    std::filesystem::remove(path + ".json");
}
