#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ggan/adam.hpp"
#include "ggan/model.hpp"
#include "ggan/snp_data.hpp"

namespace ggan {

enum class GeneratorLoss {
    /// Generator targets "real" on the realness head.
    NonSaturating,
    /// Generator targets "fake", as the loss is literally written.
    Literal,
};

struct TrainConfig {
    std::size_t n_labeled_batch = 10;
    /// Half real unlabeled profiles, half synthetic.
    std::size_t n_unsup_batch = 100;
    std::size_t n_gen_batch = 100;
    std::size_t noise_dim = kDefaultNoiseDim;
    std::int64_t epochs = 5000;
    std::uint64_t seed = 0;
    AdamHyperparams optimizer;
    double dropout_rate = 0.4;
    double test_fraction = 0.2;
    std::size_t steps_per_epoch = 1;
    GeneratorLoss generator_loss = GeneratorLoss::NonSaturating;
    NoiseKind noise = NoiseKind::Normal;
    MissingPolicy missing_policy = MissingPolicy::Reject;

    /// Throws ErrorKind::Config on invalid values.
    void validate() const;

    bool operator==(const TrainConfig&) const = default;
};

nlohmann::ordered_json to_json(const TrainConfig& config);
/// Missing fields keep their defaults; unknown fields are rejected.
TrainConfig train_config_from_json(const nlohmann::json& j);

struct EpochRecord {
    std::int64_t epoch = 0;
    double loss_supervised = 0.0;
    double loss_unsupervised = 0.0;
    double loss_generator = 0.0;
    /// Training-batch accuracies of the label and realness heads.
    double acc_supervised = 0.0;
    double acc_unsupervised = 0.0;

    bool operator==(const EpochRecord&) const = default;
};

nlohmann::ordered_json to_json(const EpochRecord& r);

struct TrainState {
    TrainConfig config;
    GganModel model;
    std::vector<std::string> snp_ids;
    AdamState supervised_optimizer;
    AdamState unsupervised_optimizer;
    AdamState generator_optimizer;
    std::int64_t epoch = 0;
    Rng rng;
    std::vector<EpochRecord> history;

    bool operator==(const TrainState&) const = default;
};

/// Fresh model and optimizers. All randomness derives from config.seed.
TrainState init_train_state(const TrainConfig& config, std::vector<std::string> snp_ids);

struct TrainingData {
    ProfileSet labeled_train;
    ProfileSet labeled_test;
    ProfileSet unlabeled_train;
    ProfileSet unlabeled_test;
};

/// Restricts both cohorts to `subset`, splits each into train/test with the
/// configured fraction and encodes them.
TrainingData prepare_training_data(const TrainConfig& config, const GenotypeMatrix& labeled,
                                   const GenotypeMatrix& unlabeled, const SnpSubset& subset);

/// N distinct indices from [0, available), or N draws with replacement when N > available.
std::vector<std::size_t> sample_indices(std::size_t n, std::size_t available, Rng& rng);

struct StepResult {
    double loss = 0.0;
    double accuracy = 0.0;
};

/// Label-head update on N labeled profiles (trunk + label head).
StepResult supervised_step(TrainState& state, const ProfileSet& labeled_train, Rng& rng);
/// Realness-head update on M/2 real + M/2 synthetic profiles (trunk + realness head).
StepResult unsupervised_step(TrainState& state, const ProfileSet& unlabeled_train, Rng& rng);
/// Generator update through the frozen discriminator's realness head.
StepResult generator_step(TrainState& state, Rng& rng);

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Runs epochs until state.epoch reaches `until_epoch`.
void run_epochs(TrainState& state, const TrainingData& data, std::int64_t until_epoch,
                const EpochCallback& on_epoch = {});

TrainState train(const TrainConfig& config, const GenotypeMatrix& labeled, const GenotypeMatrix& unlabeled,
                 const SnpSubset& subset, const EpochCallback& on_epoch = {});

std::string serialize_train_state(const TrainState& state);
TrainState deserialize_train_state(std::string_view bytes);

void save_checkpoint(const TrainState& state, const std::string& path);
TrainState load_checkpoint(const std::string& path);

}  // namespace ggan
