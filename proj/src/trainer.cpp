#include "ggan/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ggan/checkpoint.hpp"
#include "ggan/error.hpp"

namespace ggan {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

std::string_view to_string(GeneratorLoss g) { return g == GeneratorLoss::Literal ? "literal" : "non_saturating"; }
std::string_view to_string(NoiseKind k) { return k == NoiseKind::Uniform ? "uniform" : "normal"; }
std::string_view to_string(MissingPolicy p) { return p == MissingPolicy::ImputeMode ? "impute_mode" : "reject"; }

[[noreturn]] void bad_config(const std::string& what) { fail(ErrorKind::Config, "config: " + what); }

}  // namespace

std::vector<std::size_t> sample_indices(std::size_t n, std::size_t available, Rng& rng) {
    std::vector<std::size_t> out;
    out.reserve(n);
    if (n > available) {
        for (std::size_t i = 0; i < n; ++i) out.push_back(rng.below(available));
        return out;
    }
    std::vector<std::size_t> pool(available);
    std::iota(pool.begin(), pool.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
        std::swap(pool[i], pool[i + rng.below(available - i)]);
        out.push_back(pool[i]);
    }
    return out;
}

namespace {

/// Layers updated when training one discriminator head: the trunk plus that head.
std::vector<bool> head_mask(const NetworkSpec& spec, std::size_t head) {
    std::vector<bool> mask(spec.layer_count(), false);
    std::fill(mask.begin(), mask.begin() + static_cast<std::ptrdiff_t>(spec.trunk.size()), true);
    for (const auto l : spec.head_layers(head)) mask[l] = true;
    return mask;
}

double batch_accuracy(const Tensor& targets, const Tensor& probs) {
    const std::size_t batch = probs.shape[0];
    std::size_t correct = 0;
    for (std::size_t b = 0; b < batch; ++b) {
        const auto pred = argmax_pair(probs.data[2 * b], probs.data[2 * b + 1]);
        if (targets.data[2 * b + pred] == 1.0) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(batch);
}

/// Runs one discriminator head on a batch and applies the masked Adam update.
StepResult discriminator_update(TrainState& state, AdamState& optimizer, std::size_t head, const Tensor& inputs,
                                const Tensor& targets, Rng& rng) {
    auto& model = state.model;
    auto fwd = forward(model.discriminator_spec, model.discriminator, inputs, Mode::Train, &rng);
    const auto& probs = fwd.heads[head];
    StepResult result{cross_entropy(targets, probs), batch_accuracy(targets, probs)};
    std::vector<Tensor> grads(model.discriminator_spec.heads.size());
    grads[head] = cross_entropy_grad(targets, probs);
    const auto bwd = backward(model.discriminator_spec, model.discriminator, fwd.cache, grads, {true, false});
    const auto mask = head_mask(model.discriminator_spec, head);
    adam_update(model.discriminator, bwd.grads, optimizer, mask);
    return result;
}

}  // namespace

void TrainConfig::validate() const {
    if (n_labeled_batch < 1) bad_config("n_labeled_batch must be >= 1");
    if (n_unsup_batch < 2 || n_unsup_batch % 2 != 0) bad_config("n_unsup_batch must be even and >= 2");
    if (n_gen_batch < 1) bad_config("n_gen_batch must be >= 1");
    if (noise_dim < 1) bad_config("noise_dim must be >= 1");
    if (epochs < 1) bad_config("epochs must be >= 1");
    if (steps_per_epoch < 1) bad_config("steps_per_epoch must be >= 1");
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) bad_config("dropout_rate must lie in [0, 1)");
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) bad_config("test_fraction must lie in (0, 1)");
    if (!(optimizer.learning_rate > 0.0)) bad_config("learning_rate must be positive");
    if (!(optimizer.beta1 >= 0.0 && optimizer.beta1 < 1.0)) bad_config("beta1 must lie in [0, 1)");
    if (!(optimizer.beta2 >= 0.0 && optimizer.beta2 < 1.0)) bad_config("beta2 must lie in [0, 1)");
    if (!(optimizer.epsilon > 0.0)) bad_config("epsilon must be positive");
}

ordered_json to_json(const TrainConfig& c) {
    return {{"n_labeled_batch", c.n_labeled_batch},
            {"n_unsup_batch", c.n_unsup_batch},
            {"n_gen_batch", c.n_gen_batch},
            {"noise_dim", c.noise_dim},
            {"epochs", c.epochs},
            {"seed", c.seed},
            {"optimizer",
             {{"learning_rate", c.optimizer.learning_rate},
              {"beta1", c.optimizer.beta1},
              {"beta2", c.optimizer.beta2},
              {"epsilon", c.optimizer.epsilon}}},
            {"dropout_rate", c.dropout_rate},
            {"test_fraction", c.test_fraction},
            {"steps_per_epoch", c.steps_per_epoch},
            {"generator_loss", to_string(c.generator_loss)},
            {"noise", to_string(c.noise)},
            {"missing_policy", to_string(c.missing_policy)}};
}

TrainConfig train_config_from_json(const json& j) {
    if (!j.is_object()) bad_config("expected a JSON object");
    TrainConfig c;
    auto count = [&](const char* key, std::size_t& field) {
        if (!j.contains(key)) return;
        const auto& v = j[key];
        if (!v.is_number_integer() || v.get<std::int64_t>() < 0) bad_config(std::string(key) + " must be a non-negative integer");
        field = v.get<std::size_t>();
    };
    auto real = [&](const json& obj, const char* key, double& field) {
        if (!obj.contains(key)) return;
        if (!obj[key].is_number()) bad_config(std::string(key) + " must be a number");
        field = obj[key].get<double>();
    };
    auto choice = [&](const char* key, auto& field, auto... options) {
        if (!j.contains(key)) return;
        if (!j[key].is_string()) bad_config(std::string(key) + " must be a string");
        const auto s = j[key].get<std::string>();
        bool matched = false;
        ((s == to_string(options) ? (field = options, matched = true) : false), ...);
        if (!matched) bad_config("unknown " + std::string(key) + " '" + s + "'");
    };

    static const std::vector<std::string> known = {
        "n_labeled_batch", "n_unsup_batch", "n_gen_batch", "noise_dim",      "epochs",
        "seed",            "optimizer",     "dropout_rate", "test_fraction", "steps_per_epoch",
        "generator_loss",  "noise",         "missing_policy"};
    for (const auto& [key, _] : j.items()) {
        if (std::find(known.begin(), known.end(), key) == known.end()) bad_config("unknown field '" + key + "'");
    }

    count("n_labeled_batch", c.n_labeled_batch);
    count("n_unsup_batch", c.n_unsup_batch);
    count("n_gen_batch", c.n_gen_batch);
    count("noise_dim", c.noise_dim);
    count("steps_per_epoch", c.steps_per_epoch);
    if (j.contains("epochs")) {
        if (!j["epochs"].is_number_integer()) bad_config("epochs must be an integer");
        c.epochs = j["epochs"].get<std::int64_t>();
    }
    if (j.contains("seed")) {
        if (!j["seed"].is_number_unsigned()) bad_config("seed must be a non-negative integer");
        c.seed = j["seed"].get<std::uint64_t>();
    }
    if (j.contains("optimizer")) {
        const auto& o = j["optimizer"];
        if (!o.is_object()) bad_config("optimizer must be an object");
        for (const auto& [key, _] : o.items()) {
            if (key != "learning_rate" && key != "beta1" && key != "beta2" && key != "epsilon") {
                bad_config("unknown optimizer field '" + key + "'");
            }
        }
        real(o, "learning_rate", c.optimizer.learning_rate);
        real(o, "beta1", c.optimizer.beta1);
        real(o, "beta2", c.optimizer.beta2);
        real(o, "epsilon", c.optimizer.epsilon);
    }
    real(j, "dropout_rate", c.dropout_rate);
    real(j, "test_fraction", c.test_fraction);
    choice("generator_loss", c.generator_loss, GeneratorLoss::NonSaturating, GeneratorLoss::Literal);
    choice("noise", c.noise, NoiseKind::Normal, NoiseKind::Uniform);
    choice("missing_policy", c.missing_policy, MissingPolicy::Reject, MissingPolicy::ImputeMode);
    c.validate();
    return c;
}

ordered_json to_json(const EpochRecord& r) {
    return {{"epoch", r.epoch},
            {"L_sup", r.loss_supervised},
            {"L_unsup", r.loss_unsupervised},
            {"L_gen", r.loss_generator},
            {"acc_sup", r.acc_supervised},
            {"acc_unsup", r.acc_unsupervised}};
}

TrainState init_train_state(const TrainConfig& config, std::vector<std::string> snp_ids) {
    config.validate();
    Rng master(config.seed);
    // The first two draws seed the data splits (see prepare_training_data).
    master.next_u64();
    master.next_u64();
    TrainState state;
    state.config = config;
    state.model = GganModel::create(snp_ids.size(), config.noise_dim, config.dropout_rate, master.next_u64());
    state.snp_ids = std::move(snp_ids);
    state.supervised_optimizer = make_adam_state(state.model.discriminator_spec, config.optimizer);
    state.unsupervised_optimizer = make_adam_state(state.model.discriminator_spec, config.optimizer);
    state.generator_optimizer = make_adam_state(state.model.generator_spec, config.optimizer);
    state.rng = master.fork();
    return state;
}

TrainingData prepare_training_data(const TrainConfig& config, const GenotypeMatrix& labeled,
                                   const GenotypeMatrix& unlabeled, const SnpSubset& subset) {
    config.validate();
    if (!labeled.has_labels()) fail(ErrorKind::DataMismatch, "labeled cohort carries no labels");
    if (subset.size() < 2) fail(ErrorKind::DataMismatch, "training needs a subset of at least 2 SNPs");
    Rng master(config.seed);
    const auto labeled_seed = master.next_u64();
    const auto unlabeled_seed = master.next_u64();
    const auto [l_train, l_test] = split_train_test(labeled, config.test_fraction, labeled_seed);
    const auto [u_train, u_test] = split_train_test(unlabeled.without_labels(), config.test_fraction, unlabeled_seed);
    return {make_profile_set(l_train, subset, config.missing_policy),
            make_profile_set(l_test, subset, config.missing_policy),
            make_profile_set(u_train, subset, config.missing_policy),
            make_profile_set(u_test, subset, config.missing_policy)};
}

StepResult supervised_step(TrainState& state, const ProfileSet& labeled_train, Rng& rng) {
    if (labeled_train.size() == 0) fail(ErrorKind::DataMismatch, "empty labeled training set");
    if (!labeled_train.labels) fail(ErrorKind::DataMismatch, "labeled training set carries no labels");
    const auto rows = sample_indices(state.config.n_labeled_batch, labeled_train.size(), rng);
    const Tensor inputs = gather_rows(labeled_train.profiles, rows);
    Tensor targets({rows.size(), 2});
    for (std::size_t b = 0; b < rows.size(); ++b) {
        targets.data[2 * b + static_cast<std::size_t>((*labeled_train.labels)[rows[b]])] = 1.0;
    }
    return discriminator_update(state, state.supervised_optimizer, kLabelHead, inputs, targets, rng);
}

StepResult unsupervised_step(TrainState& state, const ProfileSet& unlabeled_train, Rng& rng) {
    if (unlabeled_train.size() == 0) fail(ErrorKind::DataMismatch, "empty unlabeled training set");
    const std::size_t half = state.config.n_unsup_batch / 2;
    const auto rows = sample_indices(half, unlabeled_train.size(), rng);
    const Tensor real = gather_rows(unlabeled_train.profiles, rows);
    const auto fake =
        generate(state.model, sample_noise(half, state.model.noise_dim, rng, state.config.noise)).profiles;

    Tensor inputs({2 * half, state.model.n_snps, 1});
    std::copy(real.data.begin(), real.data.end(), inputs.data.begin());
    std::copy(fake.data.begin(), fake.data.end(), inputs.data.begin() + static_cast<std::ptrdiff_t>(real.size()));
    Tensor targets({2 * half, 2});
    for (std::size_t b = 0; b < 2 * half; ++b) targets.data[2 * b + (b < half ? kRealIndex : kFakeIndex)] = 1.0;
    return discriminator_update(state, state.unsupervised_optimizer, kRealnessHead, inputs, targets, rng);
}

StepResult generator_step(TrainState& state, Rng& rng) {
    auto& model = state.model;
    const std::size_t batch = state.config.n_gen_batch;
    const auto noise = sample_noise(batch, model.noise_dim, rng, state.config.noise);

    auto gen = forward(model.generator_spec, model.generator, noise.values, Mode::Train, &rng);
    const Tensor& raw = gen.heads[0];
    Tensor clipped = raw;
    for (auto& x : clipped.data) x = std::clamp(x, 0.0, 1.0);

    auto disc = forward(model.discriminator_spec, model.discriminator, clipped, Mode::Train, &rng);
    const auto& probs = disc.heads[kRealnessHead];
    const std::size_t target = state.config.generator_loss == GeneratorLoss::NonSaturating ? kRealIndex : kFakeIndex;
    Tensor targets({batch, 2});
    for (std::size_t b = 0; b < batch; ++b) targets.data[2 * b + target] = 1.0;

    StepResult result{cross_entropy(targets, probs), 0.0};
    // Fraction of generated profiles the discriminator takes for real.
    std::size_t fooled = 0;
    for (std::size_t b = 0; b < batch; ++b) {
        if (argmax_pair(probs.data[2 * b], probs.data[2 * b + 1]) == kRealIndex) ++fooled;
    }
    result.accuracy = static_cast<double>(fooled) / static_cast<double>(batch);

    std::vector<Tensor> disc_grads(model.discriminator_spec.heads.size());
    disc_grads[kRealnessHead] = cross_entropy_grad(targets, probs);
    auto through =
        backward(model.discriminator_spec, model.discriminator, disc.cache, disc_grads, {false, true}).input_grad;
    for (std::size_t i = 0; i < through.size(); ++i) {
        if (raw.data[i] < 0.0 || raw.data[i] > 1.0) through.data[i] = 0.0;
    }
    const std::vector<Tensor> gen_grads{std::move(through)};
    const auto bwd = backward(model.generator_spec, model.generator, gen.cache, gen_grads, {true, false});
    adam_update(model.generator, bwd.grads, state.generator_optimizer);
    return result;
}

void run_epochs(TrainState& state, const TrainingData& data, std::int64_t until_epoch, const EpochCallback& on_epoch) {
    if (data.labeled_train.n_snps() != state.model.n_snps || data.unlabeled_train.n_snps() != state.model.n_snps) {
        fail(ErrorKind::ArtifactMismatch, "training data SNP count does not match the model");
    }
    while (state.epoch < until_epoch) {
        const std::int64_t epoch = state.epoch + 1;
        EpochRecord record;
        record.epoch = epoch;
        try {
            const auto steps = static_cast<double>(state.config.steps_per_epoch);
            for (std::size_t s = 0; s < state.config.steps_per_epoch; ++s) {
                const auto sup = supervised_step(state, data.labeled_train, state.rng);
                const auto unsup = unsupervised_step(state, data.unlabeled_train, state.rng);
                const auto gen = generator_step(state, state.rng);
                record.loss_supervised += sup.loss / steps;
                record.loss_unsupervised += unsup.loss / steps;
                record.loss_generator += gen.loss / steps;
                record.acc_supervised += sup.accuracy / steps;
                record.acc_unsupervised += unsup.accuracy / steps;
            }
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::Numeric) throw;
            fail(ErrorKind::Numeric, "epoch " + std::to_string(epoch) + ": " + e.what());
        }
        for (const double loss : {record.loss_supervised, record.loss_unsupervised, record.loss_generator}) {
            if (!std::isfinite(loss)) fail(ErrorKind::Numeric, "epoch " + std::to_string(epoch) + ": non-finite loss");
        }
        state.history.push_back(record);
        state.epoch = epoch;
        if (on_epoch) on_epoch(record);
    }
}

TrainState train(const TrainConfig& config, const GenotypeMatrix& labeled, const GenotypeMatrix& unlabeled,
                 const SnpSubset& subset, const EpochCallback& on_epoch) {
    const auto data = prepare_training_data(config, labeled, unlabeled, subset);
    auto state = init_train_state(config, subset.snp_ids);
    run_epochs(state, data, config.epochs, on_epoch);
    return state;
}

namespace {

ordered_json optimizer_json(const AdamState& s) {
    return {{"step", s.step},
            {"learning_rate", s.hyper.learning_rate},
            {"beta1", s.hyper.beta1},
            {"beta2", s.hyper.beta2},
            {"epsilon", s.hyper.epsilon}};
}

void optimizer_from_json(const json& j, AdamState& s) {
    s.step = j.at("step").get<std::int64_t>();
    s.hyper.learning_rate = j.at("learning_rate").get<double>();
    s.hyper.beta1 = j.at("beta1").get<double>();
    s.hyper.beta2 = j.at("beta2").get<double>();
    s.hyper.epsilon = j.at("epsilon").get<double>();
}

}  // namespace

std::string serialize_train_state(const TrainState& state) {
    ordered_json header;
    header["config"] = to_json(state.config);
    header["n_snps"] = state.model.n_snps;
    header["noise_dim"] = state.model.noise_dim;
    header["snp_ids"] = state.snp_ids;
    header["generator_spec"] = to_json(state.model.generator_spec);
    header["discriminator_spec"] = to_json(state.model.discriminator_spec);
    header["epoch"] = state.epoch;
    header["rng"] = state.rng.serialize();
    header["optimizers"] = {
        {"supervised", optimizer_json(state.supervised_optimizer)},
        {"unsupervised", optimizer_json(state.unsupervised_optimizer)},
        {"generator", optimizer_json(state.generator_optimizer)},
    };
    header["history"] = ordered_json::array();
    for (const auto& r : state.history) header["history"].push_back(to_json(r));

    BinaryWriter w;
    write_checkpoint_preamble(w, CheckpointKind::TrainState);
    w.string(header.dump());
    const std::size_t n_gen = state.model.generator.parameter_count();
    const std::size_t n_disc = state.model.discriminator.parameter_count();
    w.u64(n_gen * 3 + n_disc * 5);
    w.parameters(state.model.generator);
    w.parameters(state.model.discriminator);
    for (const auto* opt : {&state.supervised_optimizer, &state.unsupervised_optimizer, &state.generator_optimizer}) {
        w.parameters(opt->first_moment);
        w.parameters(opt->second_moment);
    }
    return w.buffer();
}

TrainState deserialize_train_state(std::string_view bytes) {
    BinaryReader r(bytes);
    read_checkpoint_preamble(r, CheckpointKind::TrainState);
    TrainState state;
    try {
        const auto header = json::parse(r.string());
        state.config = train_config_from_json(header.at("config"));
        state.snp_ids = header.at("snp_ids").get<std::vector<std::string>>();
        auto& model = state.model;
        model.n_snps = header.at("n_snps").get<std::size_t>();
        model.noise_dim = header.at("noise_dim").get<std::size_t>();
        model.generator_spec = network_spec_from_json(header.at("generator_spec"));
        model.discriminator_spec = network_spec_from_json(header.at("discriminator_spec"));
        if (!(model.generator_spec == build_generator(model.n_snps, model.noise_dim)) ||
            !(model.discriminator_spec == build_discriminator(model.n_snps, state.config.dropout_rate)) ||
            state.snp_ids.size() != model.n_snps) {
            fail(ErrorKind::ArtifactMismatch, "checkpoint network layout is inconsistent");
        }
        state.epoch = header.at("epoch").get<std::int64_t>();
        state.rng = Rng::deserialize(header.at("rng").get<std::string>());
        const auto& opts = header.at("optimizers");
        state.supervised_optimizer = make_adam_state(model.discriminator_spec);
        state.unsupervised_optimizer = make_adam_state(model.discriminator_spec);
        state.generator_optimizer = make_adam_state(model.generator_spec);
        optimizer_from_json(opts.at("supervised"), state.supervised_optimizer);
        optimizer_from_json(opts.at("unsupervised"), state.unsupervised_optimizer);
        optimizer_from_json(opts.at("generator"), state.generator_optimizer);
        for (const auto& h : header.at("history")) {
            EpochRecord rec;
            rec.epoch = h.at("epoch").get<std::int64_t>();
            rec.loss_supervised = h.at("L_sup").get<double>();
            rec.loss_unsupervised = h.at("L_unsup").get<double>();
            rec.loss_generator = h.at("L_gen").get<double>();
            rec.acc_supervised = h.at("acc_sup").get<double>();
            rec.acc_unsupervised = h.at("acc_unsup").get<double>();
            state.history.push_back(rec);
        }
    } catch (const json::exception& e) {
        fail(ErrorKind::ArtifactMismatch, std::string("corrupted checkpoint header: ") + e.what());
    }

    auto& model = state.model;
    model.generator = zero_parameters(model.generator_spec);
    model.discriminator = zero_parameters(model.discriminator_spec);
    const std::size_t n_gen = model.generator.parameter_count();
    const std::size_t n_disc = model.discriminator.parameter_count();
    if (r.u64() != n_gen * 3 + n_disc * 5) fail(ErrorKind::ArtifactMismatch, "corrupted checkpoint: payload size");
    r.parameters_into(model.generator);
    r.parameters_into(model.discriminator);
    for (auto* opt : {&state.supervised_optimizer, &state.unsupervised_optimizer, &state.generator_optimizer}) {
        r.parameters_into(opt->first_moment);
        r.parameters_into(opt->second_moment);
    }
    if (r.remaining() != 0) fail(ErrorKind::ArtifactMismatch, "corrupted checkpoint: trailing bytes");
    return state;
}

void save_checkpoint(const TrainState& state, const std::string& path) {
    write_file_bytes(path, serialize_train_state(state));
}

TrainState load_checkpoint(const std::string& path) { return deserialize_train_state(read_file_bytes(path)); }

}  // namespace ggan
