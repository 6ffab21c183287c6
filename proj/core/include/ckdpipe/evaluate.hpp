#pragma once

#include <ckdpipe/dataset.hpp>
#include <ckdpipe/matrix.hpp>
#include <ckdpipe/models.hpp>

#include <nlohmann/json.hpp>

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace ckdpipe {

/// Counts with class 1 as the positive class.
struct ConfusionCounts {
    std::size_t tp = 0;
    std::size_t tn = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;

    [[nodiscard]] std::size_t total() const noexcept { return tp + tn + fp + fn; }

    friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

[[nodiscard]] ConfusionCounts confusion(std::span<const int> y_true, std::span<const int> y_pred);
/// (TP + TN) / total; throws MetricError on an empty table.
[[nodiscard]] double accuracy(const ConfusionCounts& c);
/// Mean of the two per-class F1 scores; a class with precision + recall = 0 scores 0.
[[nodiscard]] double f1_macro(const ConfusionCounts& c);
[[nodiscard]] double f1_macro(std::span<const int> y_true, std::span<const int> y_pred);

/// Fraction of (positive, negative) pairs where the positive scores higher, ties
/// counted one half. Throws MetricError unless both classes are present.
[[nodiscard]] double auc(std::span<const int> y_true, std::span<const double> scores);

/// k disjoint folds covering every index. Each class is shuffled separately and dealt
/// round-robin, the deal continuing from class to class, so per-fold class counts are
/// within one of proportional. Throws ArgumentError when a class has fewer than k rows.
[[nodiscard]] std::vector<std::vector<std::size_t>> stratified_folds(std::span<const int> y, std::size_t k,
                                                                     std::uint64_t seed);

struct CvReport {
    std::string algorithm;
    std::string feature_set;
    std::string mode;
    std::size_t folds = 10;
    std::size_t repeats = 10;
    std::uint64_t seed = 0;
    /// repeat-major: fold_accuracy[r * folds + f].
    std::vector<double> fold_accuracy;
    double mean = 0.0;
    /// Population standard deviation of fold_accuracy.
    double stddev = 0.0;

    friend bool operator==(const CvReport&, const CvReport&) = default;
};

/// Fits on `train` rows and returns the accuracy on `validate` rows.
using FoldEvaluator = std::function<double(std::span<const std::size_t> train, std::span<const std::size_t> validate,
                                           std::uint64_t fit_seed)>;

/// Drives folds x repeats evaluations. Repeat r shuffles with derive_seed(seed, r); fit
/// seeds are derive_seed(seed, r, f). folds == n is leave-one-out (one row per fold).
[[nodiscard]] CvReport repeated_cv(std::span<const int> y, std::size_t folds, std::size_t repeats, std::uint64_t seed,
                                   const FoldEvaluator& evaluate);

/// Repeated stratified k-fold accuracy of `spec` on an already prepared matrix.
[[nodiscard]] CvReport repeated_cv(const ModelSpec& spec, const Matrix& x, std::span<const int> y, std::size_t folds,
                                   std::size_t repeats, std::uint64_t seed);

struct MetricReport {
    std::string algorithm;
    std::string feature_set;
    double accuracy = 0.0;
    double f1_macro = 0.0;
    double auc = 0.0;
    ConfusionCounts counts;

    friend bool operator==(const MetricReport&, const MetricReport&) = default;
};

/// Metrics of `model` on a processed test matrix; throws SchemaError on a feature mismatch.
[[nodiscard]] MetricReport evaluate_test(const TrainedModel& model, const LabeledMatrix& test);

void to_json(nlohmann::json& j, const ConfusionCounts& c);
void from_json(const nlohmann::json& j, ConfusionCounts& c);
void to_json(nlohmann::json& j, const CvReport& r);
void from_json(const nlohmann::json& j, CvReport& r);
void to_json(nlohmann::json& j, const MetricReport& r);
void from_json(const nlohmann::json& j, MetricReport& r);

} // namespace ckdpipe
