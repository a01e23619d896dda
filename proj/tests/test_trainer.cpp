#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <set>

#include "ggan/checkpoint.hpp"
#include "ggan/error.hpp"
#include "ggan/trainer.hpp"
#include "oracles.hpp"

using namespace ggan;

namespace {

struct Fixture {
    GenotypeMatrix labeled;
    GenotypeMatrix unlabeled;
    SnpSubset subset;
    TrainConfig config;

    Fixture() {
        std::mt19937_64 gen(42);
        labeled = oracle::random_labeled(gen, 40, 8);
        unlabeled = oracle::random_matrix(gen, 60, 8, 0.0, "u");
        subset = select_snps_by_list(labeled, std::vector<std::string>{"rs0", "rs2", "rs3", "rs5", "rs6", "rs7"});
        config.n_labeled_batch = 5;
        config.n_unsup_batch = 10;
        config.n_gen_batch = 8;
        config.noise_dim = 8;
        config.epochs = 4;
        config.seed = 11;
    }

    TrainingData data() const { return prepare_training_data(config, labeled, unlabeled, subset); }
    TrainState state() const { return init_train_state(config, subset.snp_ids); }
};

void zero_head(TrainState& s, std::size_t head) {
    for (const auto l : s.model.discriminator_spec.head_layers(head)) {
        s.model.discriminator.layers[l].weight.data.assign(s.model.discriminator.layers[l].weight.size(), 0.0);
        s.model.discriminator.layers[l].bias.data.assign(s.model.discriminator.layers[l].bias.size(), 0.0);
    }
}

bool head_equal(const TrainState& a, const TrainState& b, std::size_t head) {
    for (const auto l : a.model.discriminator_spec.head_layers(head)) {
        if (!(a.model.discriminator.layers[l] == b.model.discriminator.layers[l])) return false;
    }
    return true;
}

bool trunk_equal(const TrainState& a, const TrainState& b) {
    for (std::size_t l = 0; l < a.model.discriminator_spec.trunk.size(); ++l) {
        if (!(a.model.discriminator.layers[l] == b.model.discriminator.layers[l])) return false;
    }
    return true;
}

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / ("ggan_test_" + name)).string();
}

}  // namespace

TEST_CASE("batch sampling") {
    Rng rng(1);
    const auto rows = sample_indices(10, 72, rng);
    CHECK(rows.size() == 10);
    CHECK(std::set<std::size_t>(rows.begin(), rows.end()).size() == 10);
    for (auto r : rows) CHECK(r < 72);
    const auto with_replacement = sample_indices(20, 5, rng);
    CHECK(with_replacement.size() == 20);
    for (auto r : with_replacement) CHECK(r < 5);
}

TEST_CASE("training data preparation") {
    Fixture f;
    const auto d = f.data();
    CHECK(d.labeled_train.size() == 32);
    CHECK(d.labeled_test.size() == 8);
    CHECK(d.unlabeled_train.size() == 48);
    CHECK(d.unlabeled_test.size() == 12);
    CHECK(d.labeled_train.n_snps() == 6);
    CHECK(d.labeled_train.labels.has_value());
    CHECK_FALSE(d.unlabeled_train.labels.has_value());
    std::set<std::string> train(d.unlabeled_train.ids.begin(), d.unlabeled_train.ids.end());
    for (const auto& id : d.unlabeled_test.ids) CHECK(train.count(id) == 0);

    CHECK_THROWS_AS(prepare_training_data(f.config, f.unlabeled, f.unlabeled, f.subset), Error);
}

TEST_CASE("uniform heads give ln 2 losses") {
    Fixture f;
    const auto d = f.data();
    auto s = f.state();
    zero_head(s, kLabelHead);
    zero_head(s, kRealnessHead);
    Rng rng(3);
    CHECK(std::abs(supervised_step(s, d.labeled_train, rng).loss - std::log(2.0)) <= 1e-9);

    s = f.state();
    zero_head(s, kRealnessHead);
    CHECK(std::abs(unsupervised_step(s, d.unlabeled_train, rng).loss - std::log(2.0)) <= 1e-9);

    s = f.state();
    zero_head(s, kRealnessHead);
    CHECK(std::abs(generator_step(s, rng).loss - std::log(2.0)) <= 1e-9);
}

TEST_CASE("head isolation and freezing") {
    Fixture f;
    const auto d = f.data();
    Rng rng(5);

    auto s = f.state();
    auto before = s;
    supervised_step(s, d.labeled_train, rng);
    CHECK_FALSE(trunk_equal(s, before));
    CHECK_FALSE(head_equal(s, before, kLabelHead));
    CHECK(head_equal(s, before, kRealnessHead));
    CHECK(s.model.generator == before.model.generator);

    before = s;
    unsupervised_step(s, d.unlabeled_train, rng);
    CHECK_FALSE(trunk_equal(s, before));
    CHECK_FALSE(head_equal(s, before, kRealnessHead));
    CHECK(head_equal(s, before, kLabelHead));
    CHECK(s.model.generator == before.model.generator);

    before = s;
    generator_step(s, rng);
    CHECK(s.model.discriminator == before.model.discriminator);
    CHECK_FALSE(s.model.generator == before.model.generator);
}

TEST_CASE("empty training sets are rejected") {
    Fixture f;
    auto s = f.state();
    Rng rng(1);
    ProfileSet empty{{}, Tensor({0, 6, 1}), std::vector<Phenotype>{}};
    CHECK_THROWS_AS(supervised_step(s, empty, rng), Error);
    CHECK_THROWS_AS(unsupervised_step(s, empty, rng), Error);
}

TEST_CASE("train: bookkeeping, determinism and loss range") {
    Fixture f;
    f.config.epochs = 1;
    const auto one = train(f.config, f.labeled, f.unlabeled, f.subset);
    REQUIRE(one.history.size() == 1);
    CHECK(one.epoch == 1);

    f.config.epochs = 5;
    std::vector<EpochRecord> seen;
    const auto a = train(f.config, f.labeled, f.unlabeled, f.subset, [&](const EpochRecord& r) { seen.push_back(r); });
    const auto b = train(f.config, f.labeled, f.unlabeled, f.subset);
    CHECK(a.history == b.history);
    CHECK(a.model == b.model);
    CHECK(seen == a.history);
    const double ceiling = -std::log(kProbClamp);
    for (const auto& r : a.history) {
        for (double loss : {r.loss_supervised, r.loss_unsupervised, r.loss_generator}) {
            CHECK(std::isfinite(loss));
            CHECK(loss >= 0.0);
            CHECK(loss <= ceiling);
        }
    }

    f.config.seed = 12;
    CHECK_FALSE(train(f.config, f.labeled, f.unlabeled, f.subset).history == a.history);

    f.config.generator_loss = GeneratorLoss::Literal;
    CHECK(train(f.config, f.labeled, f.unlabeled, f.subset).history.size() == 5);
}

TEST_CASE("checkpoints") {
    Fixture f;
    const auto d = f.data();
    auto s = f.state();
    run_epochs(s, d, 3);
    const auto path = temp_path("a.ggan");
    const auto path2 = temp_path("b.ggan");
    save_checkpoint(s, path);
    const auto loaded = load_checkpoint(path);
    CHECK(loaded == s);
    save_checkpoint(loaded, path2);
    CHECK(read_file_bytes(path) == read_file_bytes(path2));

    SUBCASE("resume equals an uninterrupted run") {
        auto straight = f.state();
        run_epochs(straight, d, 6);
        auto resumed = load_checkpoint(path);
        run_epochs(resumed, d, 6);
        CHECK(resumed.history == straight.history);
        CHECK(resumed == straight);
    }
    SUBCASE("truncated file is corrupted") {
        const auto bytes = read_file_bytes(path);
        write_file_bytes(path2, bytes.substr(0, bytes.size() / 2));
        try {
            load_checkpoint(path2);
            FAIL("no error");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::ArtifactMismatch);
        }
    }
    SUBCASE("wrong version") {
        auto bytes = read_file_bytes(path);
        bytes[4] = 9;
        CHECK_THROWS_AS(deserialize_train_state(bytes), Error);
    }
    SUBCASE("parameter file is not a training checkpoint") {
        CHECK_THROWS_AS(deserialize_train_state(serialize_parameters(s.model.generator_spec, s.model.generator)),
                        Error);
    }
    SUBCASE("data with another SNP count") {
        Fixture g;
        g.subset = select_snps_by_list(g.labeled, std::vector<std::string>{"rs0", "rs1", "rs2"});
        auto state = load_checkpoint(path);
        CHECK_THROWS_AS(run_epochs(state, g.data(), 5), Error);
    }
    std::filesystem::remove(path);
    std::filesystem::remove(path2);
}

TEST_CASE("config validation and json") {
    TrainConfig c;
    CHECK_NOTHROW(c.validate());
    CHECK(train_config_from_json(nlohmann::json::parse(to_json(c).dump())) == c);

    auto expect_config_error = [](const TrainConfig& bad) {
        try {
            bad.validate();
            FAIL("no error");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::Config);
        }
    };
    TrainConfig odd = c;
    odd.n_unsup_batch = 7;
    expect_config_error(odd);
    TrainConfig zero = c;
    zero.n_labeled_batch = 0;
    expect_config_error(zero);
    TrainConfig no_epochs = c;
    no_epochs.epochs = 0;
    expect_config_error(no_epochs);

    const auto j = nlohmann::json::parse(R"({"epochs": 7, "generator_loss": "literal", "optimizer": {"learning_rate": 0.001}})");
    const auto parsed = train_config_from_json(j);
    CHECK(parsed.epochs == 7);
    CHECK(parsed.generator_loss == GeneratorLoss::Literal);
    CHECK(parsed.optimizer.learning_rate == 0.001);
    CHECK(parsed.optimizer.beta1 == 0.5);
    CHECK_THROWS_AS(train_config_from_json(nlohmann::json::parse(R"({"epoch": 7})")), Error);
    CHECK_THROWS_AS(train_config_from_json(nlohmann::json::parse(R"({"noise": "cauchy"})")), Error);
}

TEST_CASE("history json keys") {
    EpochRecord r{3, 0.5, 0.6, 0.7, 1.0, 0.5};
    const auto j = to_json(r);
    CHECK(j["epoch"] == 3);
    CHECK(j["L_sup"] == 0.5);
    CHECK(j["L_unsup"] == 0.6);
    CHECK(j["L_gen"] == 0.7);
}
