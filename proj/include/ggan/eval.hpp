#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ggan/model.hpp"

namespace ggan {

/// Per-profile scoring record for audit logs.
struct Decision {
    std::string sample_id;
    double p_df = 0.0;
    double p_sd = 0.0;
    double p_fake = 0.0;
    double p_real = 0.0;
    Phenotype label_pred = Phenotype::DF;
    bool predicted_real = false;

    bool operator==(const Decision&) const = default;
};

struct T1Result {
    double acc_labeled = 0.0;
    double acc_unlabeled = 0.0;
    std::size_t n_labeled = 0;
    std::size_t n_unlabeled_real = 0;
    std::size_t n_synthetic = 0;

    bool operator==(const T1Result&) const = default;
};

struct T2Result {
    double acc1 = 0.0;
    /// Undefined when no profile passes the realness gate.
    std::optional<double> acc2;
    std::size_t n_passed = 0;
    std::size_t n_total = 0;

    bool operator==(const T2Result&) const = default;
};

/// Scores every profile of a set on both heads (infer mode).
std::vector<Decision> score_profiles(const GganModel& model, const ProfileSet& profiles);

/// Independent per-head accuracies: the label head on labeled_test, and the
/// realness head on unlabeled_test (target real) plus `synthetic_count`
/// freshly generated profiles (target fake). Decisions are appended to `log`.
T1Result t1_evaluate(const GganModel& model, const ProfileSet& labeled_test, const ProfileSet& unlabeled_test,
                     std::size_t synthetic_count, Rng& rng, NoiseKind noise = NoiseKind::Normal,
                     std::vector<Decision>* log = nullptr);

/// Two-step gate: acc1 is the fraction judged real; acc2 is label accuracy
/// among only those that passed.
T2Result t2_evaluate(const GganModel& model, const ProfileSet& labeled_test, std::vector<Decision>* log = nullptr);

/// T1 counts from decision lists; exposed for independent recomputation.
T1Result t1_from_decisions(std::span<const Decision> labeled, std::span<const Phenotype> truth,
                           std::span<const Decision> real, std::span<const Decision> synthetic);
T2Result t2_from_decisions(std::span<const Decision> labeled, std::span<const Phenotype> truth);

struct EvalReport {
    std::string model_id;
    std::optional<T1Result> t1;
    T2Result t2;
    std::size_t labeled_test_size = 0;
    std::size_t unlabeled_test_size = 0;
    std::size_t synthetic_count = 0;
    std::uint64_t seed = 0;
    nlohmann::json subset = nlohmann::json::object();

    bool operator==(const EvalReport&) const = default;
};

struct ReportMetadata {
    std::size_t labeled_test_size = 0;
    std::size_t unlabeled_test_size = 0;
    std::size_t synthetic_count = 0;
    std::uint64_t seed = 0;
    nlohmann::json subset = nlohmann::json::object();
};

EvalReport make_report(std::string model_id, std::optional<T1Result> t1, T2Result t2, ReportMetadata meta);

nlohmann::ordered_json to_json(const EvalReport& report);
EvalReport eval_report_from_json(const nlohmann::json& j);

/// Decision log CSV: sample_id,p_df,p_sd,p_fake,p_real,label_pred,realness_pred.
void write_decision_log(std::ostream& out, std::span<const Decision> decisions);

}  // namespace ggan
