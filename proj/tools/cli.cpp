#include "cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "ggan/checkpoint.hpp"
#include "ggan/error.hpp"
#include "ggan/eval.hpp"
#include "ggan/trainer.hpp"

namespace ggan::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

/// Flag value, else GGAN_SEED, else `fallback`.
std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag, std::uint64_t fallback) {
    if (flag) return *flag;
    if (const char* env = std::getenv("GGAN_SEED"); env && *env) {
        try {
            std::size_t used = 0;
            const auto v = std::stoull(env, &used);
            if (used == std::string(env).size()) return v;
        } catch (const std::exception&) {
        }
        fail(ErrorKind::Usage, std::string("GGAN_SEED is not a non-negative integer: ") + env);
    }
    return fallback;
}

struct Manifest {
    std::string command;
    std::string config_path;
    std::vector<std::string> inputs;
    std::string output;
    std::uint64_t seed = 0;
};

void write_manifest(const std::string& path, const Manifest& m) {
    ordered_json j;
    j["command"] = m.command;
    j["config_path"] = m.config_path.empty() ? ordered_json(nullptr) : ordered_json(m.config_path);
    j["inputs"] = m.inputs;
    j["output"] = m.output;
    j["seed"] = m.seed;
    j["tool_version"] = kToolVersion;
    j["started_at"] = utc_timestamp();
    std::ofstream out(path);
    if (!out) fail(ErrorKind::Usage, "cannot write " + path);
    out << j.dump(2) << '\n';
}

std::ofstream open_output(const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::Usage, "cannot write " + path);
    return out;
}

json read_json_file(const std::string& path, ErrorKind kind) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::Parse, "cannot open " + path);
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        fail(kind, path + ": " + e.what());
    }
}

ordered_json frequency_json(const SnpFrequencies& f) {
    ordered_json j = ordered_json::object();
    for (const auto& [allele, value] : f.freqs) j[allele] = value;
    return j;
}

// ---------------------------------------------------------------------------

struct FreqsArgs {
    std::string labeled, unlabeled, out;
};

int cmd_freqs(const FreqsArgs& a, std::ostream& out, std::ostream& err) {
    write_manifest(a.out + ".manifest.json", {"freqs", "", {a.labeled, a.unlabeled}, a.out, 0});
    const auto labeled = read_genotype_csv(a.labeled, false);
    const auto unlabeled = read_genotype_csv(a.unlabeled, false);

    std::vector<std::string> shared, unshared;
    for (const auto& id : labeled.snp_ids()) (unlabeled.snp_index(id) ? shared : unshared).push_back(id);
    for (const auto& id : unlabeled.snp_ids()) {
        if (!labeled.snp_index(id)) unshared.push_back(id);
    }
    if (shared.empty()) fail(ErrorKind::DataMismatch, "the two cohorts share no SNP columns");
    if (!unshared.empty()) err << "warning: " << unshared.size() << " SNP(s) not shared by both cohorts are ignored\n";

    const auto f_l = allele_frequencies(labeled.select_snps(shared));
    const auto f_u = allele_frequencies(unlabeled.select_snps(shared));
    const auto distances = afd(f_l, f_u);

    ordered_json j;
    j["labeled"] = {{"path", a.labeled}, {"samples", labeled.n_samples()}};
    j["unlabeled"] = {{"path", a.unlabeled}, {"samples", unlabeled.n_samples()}};
    j["snps"] = ordered_json::array();
    for (std::size_t k = 0; k < shared.size(); ++k) {
        j["snps"].push_back({{"snp_id", shared[k]},
                             {"labeled", frequency_json(f_l.snps[k])},
                             {"unlabeled", frequency_json(f_u.snps[k])},
                             {"afd", distances[k].afd}});
    }
    j["unshared_snps"] = unshared;
    open_output(a.out) << j.dump(2) << '\n';
    out << "wrote " << shared.size() << " SNP frequency entries to " << a.out << '\n';
    return 0;
}

struct SelectArgs {
    std::string freqs, out, list;
    std::optional<double> threshold;
};

int cmd_select(const SelectArgs& a, std::ostream& out, std::ostream& err) {
    if (a.threshold.has_value() == !a.list.empty()) {
        fail(ErrorKind::Usage, "exactly one of --threshold or --list is required");
    }
    write_manifest(a.out + ".manifest.json",
                   {"select", "", a.list.empty() ? std::vector{a.freqs} : std::vector{a.freqs, a.list}, a.out, 0});
    const auto j = read_json_file(a.freqs, ErrorKind::Parse);
    AfdMap distances;
    std::vector<std::string> ids;
    try {
        for (const auto& e : j.at("snps")) {
            distances.push_back({e.at("snp_id").get<std::string>(), e.at("afd").get<double>()});
            ids.push_back(distances.back().snp_id);
        }
    } catch (const json::exception& e) {
        fail(ErrorKind::Parse, a.freqs + ": " + e.what());
    }

    SnpSubset subset;
    if (a.threshold) {
        subset = select_snps_by_afd(distances, *a.threshold);
        if (subset.empty_warning) err << "warning: no SNP has AFD below " << *a.threshold << '\n';
    } else {
        std::ifstream in(a.list);
        if (!in) fail(ErrorKind::Parse, "cannot open " + a.list);
        std::vector<std::string> wanted;
        for (std::string line; std::getline(in, line);) {
            while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
            if (!line.empty()) wanted.push_back(line);
        }
        subset = select_snps_by_list(std::span<const std::string>(ids), wanted);
    }
    write_subset(a.out, subset);
    out << "selected " << subset.size() << " SNPs -> " << a.out << '\n';
    return 0;
}

struct TrainArgs {
    std::string config, labeled, unlabeled, subset, outdir, resume;
    std::optional<std::uint64_t> seed;
    bool quiet = false;
};

int cmd_train(const TrainArgs& a, std::ostream& out, std::ostream&) {
    const auto config_json = read_json_file(a.config, ErrorKind::Config);
    auto config = train_config_from_json(config_json);
    const bool config_has_seed = config_json.is_object() && config_json.contains("seed");
    // --seed, then the config's own seed, then GGAN_SEED.
    if (a.seed || !config_has_seed) config.seed = resolve_seed(a.seed, config.seed);

    fs::create_directories(a.outdir);
    const fs::path dir(a.outdir);
    std::vector<std::string> inputs{a.labeled, a.unlabeled, a.subset};
    if (!a.resume.empty()) inputs.push_back(a.resume);
    write_manifest((dir / "manifest.json").string(), {"train", a.config, inputs, a.outdir, config.seed});

    const auto labeled = read_genotype_csv(a.labeled, true);
    const auto unlabeled = read_genotype_csv(a.unlabeled, false);
    const auto subset = read_subset(a.subset);
    for (const auto* m : {&labeled, &unlabeled}) {
        for (const auto& id : subset.snp_ids) {
            if (!m->snp_index(id)) fail(ErrorKind::DataMismatch, "subset SNP '" + id + "' absent from a cohort");
        }
    }
    const auto data = prepare_training_data(config, labeled, unlabeled, subset);

    TrainState state;
    if (!a.resume.empty()) {
        state = load_checkpoint(a.resume);
        if (state.snp_ids != subset.snp_ids) fail(ErrorKind::ArtifactMismatch, "resume checkpoint uses other SNPs");
        auto resumed = state.config;
        resumed.epochs = config.epochs;
        if (!(resumed == config)) fail(ErrorKind::ArtifactMismatch, "resume checkpoint was trained with another config");
        state.config = config;
    } else {
        state = init_train_state(config, subset.snp_ids);
    }

    const auto report_every = std::max<std::int64_t>(1, config.epochs / 10);
    run_epochs(state, data, config.epochs, [&](const EpochRecord& r) {
        if (!a.quiet && (r.epoch % report_every == 0 || r.epoch == config.epochs)) {
            out << "epoch " << r.epoch << ": L_sup=" << r.loss_supervised << " L_unsup=" << r.loss_unsupervised
                << " L_gen=" << r.loss_generator << '\n';
        }
    });

    save_checkpoint(state, (dir / "checkpoint.ggan").string());
    {
        auto hist = open_output((dir / "history.jsonl").string());
        for (const auto& r : state.history) {
            hist << ordered_json{{"epoch", r.epoch},
                                 {"L_sup", r.loss_supervised},
                                 {"L_unsup", r.loss_unsupervised},
                                 {"L_gen", r.loss_generator}}
                        .dump()
                 << '\n';
        }
    }
    {
        const auto restrict = [&](const GenotypeMatrix& m, const ProfileSet& set) {
            std::vector<std::size_t> rows;
            for (const auto& id : set.ids) {
                const auto it = std::find(m.sample_ids().begin(), m.sample_ids().end(), id);
                rows.push_back(static_cast<std::size_t>(it - m.sample_ids().begin()));
            }
            return m.select_samples(rows).select_snps(subset.snp_ids);
        };
        auto l_out = open_output((dir / "labeled_test.csv").string());
        write_genotype_csv(l_out, restrict(labeled, data.labeled_test));
        auto u_out = open_output((dir / "unlabeled_test.csv").string());
        write_genotype_csv(u_out, restrict(unlabeled.without_labels(), data.unlabeled_test));
    }

    const auto& last = state.history.back();
    out << "final losses: L_sup=" << last.loss_supervised << " L_unsup=" << last.loss_unsupervised
        << " L_gen=" << last.loss_generator << '\n';
    return 0;
}

/// Test cohort restricted to the checkpoint's SNPs in checkpoint order.
ProfileSet load_test_set(const std::string& path, bool has_labels, const TrainState& state, bool allow_wider) {
    const auto m = read_genotype_csv(path, has_labels);
    const bool same_set = m.n_snps() == state.snp_ids.size() &&
                          std::all_of(state.snp_ids.begin(), state.snp_ids.end(),
                                      [&](const std::string& id) { return m.snp_index(id).has_value(); });
    const bool covers = std::all_of(state.snp_ids.begin(), state.snp_ids.end(),
                                    [&](const std::string& id) { return m.snp_index(id).has_value(); });
    if (!(same_set || (allow_wider && covers))) {
        fail(ErrorKind::ArtifactMismatch, path + ": SNP columns (" + std::to_string(m.n_snps()) +
                                              ") do not match the checkpoint's " +
                                              std::to_string(state.snp_ids.size()) + " SNPs");
    }
    SnpSubset subset;
    subset.snp_ids = state.snp_ids;
    return make_profile_set(m, subset, state.config.missing_policy);
}

struct EvalArgs {
    std::string checkpoint, labeled;
    std::vector<std::string> rest;
    std::string subset, model_id, decisions;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> synthetic;
    bool t2_only = false;
    bool real_only = false;
};

int cmd_eval(const EvalArgs& a, std::ostream& out, std::ostream&) {
    std::string unlabeled_path, out_path;
    if (a.rest.size() == 2) {
        unlabeled_path = a.rest[0];
        out_path = a.rest[1];
    } else if (a.rest.size() == 1 && a.t2_only) {
        out_path = a.rest[0];
    } else {
        fail(ErrorKind::Usage, "usage: eval CHECKPOINT LABELED_TEST UNLABELED_TEST OUT (UNLABELED_TEST optional with --t2-only)");
    }
    const auto state = load_checkpoint(a.checkpoint);
    const auto seed = resolve_seed(a.seed, state.config.seed);
    std::vector<std::string> inputs{a.checkpoint, a.labeled};
    if (!unlabeled_path.empty()) inputs.push_back(unlabeled_path);
    write_manifest(out_path + ".manifest.json", {"eval", "", inputs, out_path, seed});

    const auto labeled = load_test_set(a.labeled, true, state, !a.subset.empty());
    std::optional<ProfileSet> unlabeled;
    if (!unlabeled_path.empty() && !a.t2_only) unlabeled = load_test_set(unlabeled_path, false, state, !a.subset.empty());

    std::vector<Decision> log;
    std::optional<T1Result> t1;
    std::size_t synthetic = 0;
    if (!a.t2_only) {
        synthetic = a.real_only ? 0 : a.synthetic.value_or(unlabeled->size());
        Rng rng(seed);
        t1 = t1_evaluate(state.model, labeled, *unlabeled, synthetic, rng, state.config.noise, &log);
    }
    std::vector<Decision> t2_log;
    const auto t2 = t2_evaluate(state.model, labeled, &t2_log);
    if (a.t2_only) log = t2_log;

    ordered_json subset_json;
    subset_json["snp_ids"] = state.snp_ids;
    if (!a.subset.empty()) {
        const auto s = read_subset(a.subset);
        if (s.snp_ids != state.snp_ids) fail(ErrorKind::ArtifactMismatch, "subset file does not match the checkpoint");
        subset_json["provenance"] = s.source == SnpSubset::Source::AfdThreshold
                                        ? ordered_json{{"kind", "afd_threshold"}, {"afd_threshold", s.afd_threshold}}
                                        : ordered_json{{"kind", "explicit_list"}};
    }
    const auto model_id = a.model_id.empty() ? fs::path(a.checkpoint).stem().string() : a.model_id;
    const auto report = make_report(model_id, t1, t2,
                                    {labeled.size(), unlabeled ? unlabeled->size() : 0, synthetic, seed,
                                     json(subset_json)});
    open_output(out_path) << to_json(report).dump(2) << '\n';

    const auto decisions_path =
        a.decisions.empty() ? fs::path(out_path).replace_extension(".decisions.csv").string() : a.decisions;
    auto dl = open_output(decisions_path);
    write_decision_log(dl, log);

    if (t1) out << "T1: acc_labeled=" << t1->acc_labeled << " acc_unlabeled=" << t1->acc_unlabeled << '\n';
    out << "T2: acc1=" << t2.acc1 << " acc2=";
    if (t2.acc2) {
        out << *t2.acc2;
    } else {
        out << "undefined";
    }
    out << " (n_passed=" << t2.n_passed << ")\n";
    return 0;
}

struct GenerateArgs {
    std::string checkpoint, out;
    long long count = 0;
    bool quantize = false;
    bool no_labels = false;
    std::optional<std::uint64_t> seed;
};

int cmd_generate(const GenerateArgs& a, std::ostream& out, std::ostream&) {
    if (a.count < 1) fail(ErrorKind::Usage, "--count must be >= 1");
    const auto state = load_checkpoint(a.checkpoint);
    const auto seed = resolve_seed(a.seed, state.config.seed);
    write_manifest(a.out + ".manifest.json", {"generate", "", {a.checkpoint}, a.out, seed});

    Rng rng(seed);
    const auto count = static_cast<std::size_t>(a.count);
    const auto batch = generate(state.model, sample_noise(count, state.model.noise_dim, rng, state.config.noise));
    Tensor emitted = batch.profiles;
    if (a.quantize) {
        for (auto& v : emitted.data) v = encode_genotype(decode_genotype(v));
    }
    std::optional<std::vector<Phenotype>> labels;
    if (!a.no_labels) {
        const auto d = discriminate(state.model, emitted, Mode::Infer);
        labels.emplace();
        for (std::size_t b = 0; b < count; ++b) {
            labels->push_back(static_cast<Phenotype>(argmax_pair(d.label_probs.data[2 * b], d.label_probs.data[2 * b + 1])));
        }
    }
    auto file = open_output(a.out);
    write_synthetic_csv(file, emitted, state.snp_ids, a.quantize, labels);
    out << "wrote " << count << " synthetic profiles to " << a.out << '\n';
    return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Semi-supervised GAN for SNP genotype profiles"};
    app.name("ggan");
    app.require_subcommand(1);
    app.set_version_flag("--version", kToolVersion);

    FreqsArgs freqs;
    auto* freqs_cmd = app.add_subcommand("freqs", "Allele frequencies of two cohorts and their AFD per SNP");
    freqs_cmd->add_option("labeled", freqs.labeled, "Labeled cohort CSV")->required();
    freqs_cmd->add_option("unlabeled", freqs.unlabeled, "Unlabeled cohort CSV")->required();
    freqs_cmd->add_option("out", freqs.out, "Output JSON")->required();

    SelectArgs select;
    auto* select_cmd = app.add_subcommand("select", "Select a SNP subset by AFD threshold or explicit list");
    select_cmd->add_option("freqs", select.freqs, "Frequency JSON from 'freqs'")->required();
    select_cmd->add_option("out", select.out, "Output subset file (a .json sidecar is written next to it)")->required();
    select_cmd->add_option("--threshold", select.threshold, "Keep SNPs with AFD strictly below this value");
    select_cmd->add_option("--list", select.list, "File with one SNP id per line");

    TrainArgs train_args;
    auto* train_cmd = app.add_subcommand("train", "Train generator and discriminator");
    train_cmd->add_option("config", train_args.config, "Training config JSON")->required();
    train_cmd->add_option("labeled", train_args.labeled, "Labeled cohort CSV")->required();
    train_cmd->add_option("unlabeled", train_args.unlabeled, "Unlabeled cohort CSV")->required();
    train_cmd->add_option("subset", train_args.subset, "SNP subset file")->required();
    train_cmd->add_option("outdir", train_args.outdir, "Output directory")->required();
    train_cmd->add_option("--seed", train_args.seed, "Seed (overrides config and GGAN_SEED)");
    train_cmd->add_option("--resume", train_args.resume, "Continue from a checkpoint");
    train_cmd->add_flag("--quiet", train_args.quiet, "Only print final losses");

    EvalArgs eval_args;
    auto* eval_cmd = app.add_subcommand("eval", "Run T1/T2 evaluation on held-out profiles");
    eval_cmd->add_option("checkpoint", eval_args.checkpoint, "Checkpoint from 'train'")->required();
    eval_cmd->add_option("labeled_test", eval_args.labeled, "Labeled test CSV")->required();
    eval_cmd->add_option("files", eval_args.rest, "UNLABELED_TEST OUT, or OUT alone with --t2-only")
        ->required()
        ->expected(1, 2);
    eval_cmd->add_flag("--t2-only", eval_args.t2_only, "Skip T1");
    eval_cmd->add_flag("--real-only", eval_args.real_only, "T1 realness accuracy on real profiles only");
    eval_cmd->add_option("--synthetic", eval_args.synthetic, "Synthetic profiles for T1 (default: unlabeled test size)");
    eval_cmd->add_option("--subset", eval_args.subset, "Subset file; allows test CSVs with extra SNP columns");
    eval_cmd->add_option("--model-id", eval_args.model_id, "Model id recorded in the report");
    eval_cmd->add_option("--decisions", eval_args.decisions, "Decision log CSV path");
    eval_cmd->add_option("--seed", eval_args.seed, "Seed for synthetic profiles");

    GenerateArgs gen;
    auto* gen_cmd = app.add_subcommand("generate", "Emit synthetic genotype profiles");
    gen_cmd->add_option("checkpoint", gen.checkpoint, "Checkpoint from 'train'")->required();
    gen_cmd->add_option("out", gen.out, "Output CSV")->required();
    gen_cmd->add_option("--count", gen.count, "Number of profiles")->required();
    gen_cmd->add_flag("--quantize", gen.quantize, "Snap to {0, 0.5, 1} and write 0/1/2 tokens");
    gen_cmd->add_flag("--no-labels", gen.no_labels, "Omit the label column");
    gen_cmd->add_option("--seed", gen.seed, "Seed for the noise draw");

    std::vector<std::string> argv_storage{"ggan"};
    argv_storage.insert(argv_storage.end(), args.begin(), args.end());
    std::vector<char*> argv;
    for (auto& s : argv_storage) argv.push_back(s.data());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : static_cast<int>(ErrorKind::Usage);
    }

    try {
        if (*freqs_cmd) return cmd_freqs(freqs, out, err);
        if (*select_cmd) return cmd_select(select, out, err);
        if (*train_cmd) return cmd_train(train_args, out, err);
        if (*eval_cmd) return cmd_eval(eval_args, out, err);
        if (*gen_cmd) return cmd_generate(gen, out, err);
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return e.exit_code();
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return static_cast<int>(ErrorKind::Usage);
    }
    return static_cast<int>(ErrorKind::Usage);
}

void tune_allocator() {
#if defined(__GLIBC__)
    mallopt(M_MMAP_THRESHOLD, 64 << 20);
    mallopt(M_TRIM_THRESHOLD, 128 << 20);
#endif
}

}  // namespace ggan::cli
