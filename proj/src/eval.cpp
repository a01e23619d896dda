#include "ggan/eval.hpp"

#include <cstdio>
#include <ostream>

#include "ggan/error.hpp"

namespace ggan {

std::vector<Decision> score_profiles(const GganModel& model, const ProfileSet& profiles) {
    std::vector<Decision> out;
    if (profiles.size() == 0) return out;
    const auto d = discriminate(model, profiles.profiles, Mode::Infer);
    out.reserve(profiles.size());
    for (std::size_t i = 0; i < profiles.size(); ++i) {
        Decision dec;
        dec.sample_id = profiles.ids[i];
        dec.p_df = d.label_probs.data[2 * i];
        dec.p_sd = d.label_probs.data[2 * i + 1];
        dec.p_fake = d.realness_probs.data[2 * i + kFakeIndex];
        dec.p_real = d.realness_probs.data[2 * i + kRealIndex];
        dec.label_pred = static_cast<Phenotype>(argmax_pair(dec.p_df, dec.p_sd));
        dec.predicted_real = argmax_pair(dec.p_fake, dec.p_real) == kRealIndex;
        out.push_back(std::move(dec));
    }
    return out;
}

T1Result t1_from_decisions(std::span<const Decision> labeled, std::span<const Phenotype> truth,
                           std::span<const Decision> real, std::span<const Decision> synthetic) {
    if (labeled.empty() || labeled.size() != truth.size()) fail(ErrorKind::DataMismatch, "T1 needs a labeled test set");
    if (real.empty() && synthetic.empty()) fail(ErrorKind::DataMismatch, "T1 needs an unlabeled test set");
    std::size_t label_correct = 0;
    for (std::size_t i = 0; i < labeled.size(); ++i) label_correct += labeled[i].label_pred == truth[i];
    std::size_t realness_correct = 0;
    for (const auto& d : real) realness_correct += d.predicted_real;
    for (const auto& d : synthetic) realness_correct += !d.predicted_real;
    T1Result r;
    r.n_labeled = labeled.size();
    r.n_unlabeled_real = real.size();
    r.n_synthetic = synthetic.size();
    r.acc_labeled = static_cast<double>(label_correct) / static_cast<double>(labeled.size());
    r.acc_unlabeled = static_cast<double>(realness_correct) / static_cast<double>(real.size() + synthetic.size());
    return r;
}

T2Result t2_from_decisions(std::span<const Decision> labeled, std::span<const Phenotype> truth) {
    if (labeled.empty() || labeled.size() != truth.size()) fail(ErrorKind::DataMismatch, "T2 needs a labeled test set");
    std::size_t passed = 0, correct = 0;
    for (std::size_t i = 0; i < labeled.size(); ++i) {
        if (!labeled[i].predicted_real) continue;
        ++passed;
        correct += labeled[i].label_pred == truth[i];
    }
    T2Result r;
    r.n_total = labeled.size();
    r.n_passed = passed;
    r.acc1 = static_cast<double>(passed) / static_cast<double>(labeled.size());
    if (passed > 0) r.acc2 = static_cast<double>(correct) / static_cast<double>(passed);
    return r;
}

T1Result t1_evaluate(const GganModel& model, const ProfileSet& labeled_test, const ProfileSet& unlabeled_test,
                     std::size_t synthetic_count, Rng& rng, NoiseKind noise, std::vector<Decision>* log) {
    if (labeled_test.size() == 0 || !labeled_test.labels) fail(ErrorKind::DataMismatch, "empty labeled test set");
    if (unlabeled_test.size() == 0) fail(ErrorKind::DataMismatch, "empty unlabeled test set");
    const auto labeled = score_profiles(model, labeled_test);
    const auto real = score_profiles(model, unlabeled_test);
    std::vector<Decision> synthetic;
    if (synthetic_count > 0) {
        const auto batch = generate(model, sample_noise(synthetic_count, model.noise_dim, rng, noise));
        ProfileSet fakes;
        fakes.profiles = batch.profiles;
        for (std::size_t k = 0; k < synthetic_count; ++k) fakes.ids.push_back("synthetic_" + std::to_string(k));
        synthetic = score_profiles(model, fakes);
    }
    if (log) {
        log->insert(log->end(), labeled.begin(), labeled.end());
        log->insert(log->end(), real.begin(), real.end());
        log->insert(log->end(), synthetic.begin(), synthetic.end());
    }
    return t1_from_decisions(labeled, *labeled_test.labels, real, synthetic);
}

T2Result t2_evaluate(const GganModel& model, const ProfileSet& labeled_test, std::vector<Decision>* log) {
    if (labeled_test.size() == 0 || !labeled_test.labels) fail(ErrorKind::DataMismatch, "empty labeled test set");
    const auto labeled = score_profiles(model, labeled_test);
    if (log) log->insert(log->end(), labeled.begin(), labeled.end());
    return t2_from_decisions(labeled, *labeled_test.labels);
}

EvalReport make_report(std::string model_id, std::optional<T1Result> t1, T2Result t2, ReportMetadata meta) {
    EvalReport r;
    r.model_id = std::move(model_id);
    r.t1 = t1;
    r.t2 = t2;
    r.labeled_test_size = meta.labeled_test_size;
    r.unlabeled_test_size = meta.unlabeled_test_size;
    r.synthetic_count = meta.synthetic_count;
    r.seed = meta.seed;
    r.subset = std::move(meta.subset);
    return r;
}

nlohmann::ordered_json to_json(const EvalReport& report) {
    nlohmann::ordered_json j;
    j["model_id"] = report.model_id;
    if (report.t1) {
        j["t1"] = {{"acc_labeled", report.t1->acc_labeled}, {"acc_unlabeled", report.t1->acc_unlabeled}};
    }
    j["t2"] = {{"acc1", report.t2.acc1},
               {"acc2", report.t2.acc2 ? nlohmann::ordered_json(*report.t2.acc2) : nlohmann::ordered_json(nullptr)},
               {"n_passed", report.t2.n_passed}};
    j["sizes"] = {{"labeled_test", report.labeled_test_size},
                  {"unlabeled_test", report.unlabeled_test_size},
                  {"synthetic", report.synthetic_count}};
    j["seed"] = report.seed;
    j["subset"] = report.subset;
    return j;
}

EvalReport eval_report_from_json(const nlohmann::json& j) {
    EvalReport r;
    try {
        r.model_id = j.at("model_id").get<std::string>();
        r.labeled_test_size = j.at("sizes").at("labeled_test").get<std::size_t>();
        r.unlabeled_test_size = j.at("sizes").at("unlabeled_test").get<std::size_t>();
        r.synthetic_count = j.at("sizes").at("synthetic").get<std::size_t>();
        if (j.contains("t1")) {
            T1Result t1;
            t1.acc_labeled = j["t1"].at("acc_labeled").get<double>();
            t1.acc_unlabeled = j["t1"].at("acc_unlabeled").get<double>();
            t1.n_labeled = r.labeled_test_size;
            t1.n_unlabeled_real = r.unlabeled_test_size;
            t1.n_synthetic = r.synthetic_count;
            r.t1 = t1;
        }
        const auto& t2 = j.at("t2");
        r.t2.acc1 = t2.at("acc1").get<double>();
        if (!t2.at("acc2").is_null()) r.t2.acc2 = t2["acc2"].get<double>();
        r.t2.n_passed = t2.at("n_passed").get<std::size_t>();
        r.t2.n_total = r.labeled_test_size;
        r.seed = j.at("seed").get<std::uint64_t>();
        r.subset = j.value("subset", nlohmann::json::object());
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Parse, std::string("eval report: ") + e.what());
    }
    return r;
}

void write_decision_log(std::ostream& out, std::span<const Decision> decisions) {
    out << "sample_id,p_df,p_sd,p_fake,p_real,label_pred,realness_pred\n";
    char buf[160];
    for (const auto& d : decisions) {
        std::snprintf(buf, sizeof buf, "%.10g,%.10g,%.10g,%.10g", d.p_df, d.p_sd, d.p_fake, d.p_real);
        out << d.sample_id << ',' << buf << ',' << to_string(d.label_pred) << ','
            << (d.predicted_real ? "real" : "fake") << '\n';
    }
}

}  // namespace ggan
