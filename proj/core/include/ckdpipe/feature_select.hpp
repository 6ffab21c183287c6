#pragma once

#include <ckdpipe/dataset.hpp>
#include <ckdpipe/matrix.hpp>
#include <ckdpipe/models.hpp>

#include <nlohmann/json.hpp>

#include <cstddef>
#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ckdpipe {

/// Feature names, kept sorted.
using FeatureSet = std::set<std::string>;

struct ScoreTable {
    std::string scorer;
    nlohmann::json parameters = nlohmann::json::object();
    std::vector<std::string> features;
    std::vector<double> scores;

    /// Throws SchemaError for an unknown feature.
    [[nodiscard]] double at(std::string_view feature) const;

    friend bool operator==(const ScoreTable&, const ScoreTable&) = default;
};

/// Chi-square statistic of each non-negative feature against the binary label, from the
/// per-class feature sums and the sums expected under the class priors. A cell with
/// zero expectation contributes 0. Throws ArgumentError on a negative cell.
[[nodiscard]] ScoreTable chi2_scores(const Matrix& x, std::span<const int> y, std::span<const std::string> features);

/// Mutual information (nats) between each feature and the label. Continuous features use
/// the nearest-neighbour estimator for a continuous/discrete pair with k neighbours;
/// features flagged in `discrete` are rounded to {0, 1} and use the plug-in estimator.
/// Continuous columns are scaled to unit variance and jittered by 1e-10 (seeded) so that
/// tied values stay separable. Scores are clamped at 0. Throws ArgumentError when k >=
/// the smaller class count.
[[nodiscard]] ScoreTable mi_scores(const Matrix& x, std::span<const int> y, std::span<const std::string> features,
                                   std::span<const bool> discrete, std::size_t k = 3, std::uint64_t seed = 0);

/// The ceil(fraction * m) best-scoring features; equal scores are ordered by name.
[[nodiscard]] FeatureSet top_fraction(const ScoreTable& scores, double fraction);

enum class RfeEstimator { gboost, rforest, logistic };

[[nodiscard]] std::string_view to_string(RfeEstimator e) noexcept;
[[nodiscard]] Algorithm algorithm_of(RfeEstimator e) noexcept;

struct RfecvResult {
    FeatureSet selected;
    /// mean_accuracy[c - 1] is the mean validation accuracy with c features.
    std::vector<double> mean_accuracy;
    std::size_t best_count = 0;
    /// Features eliminated on the full data down to best_count, first removed first.
    std::vector<std::string> elimination_order;

    friend bool operator==(const RfecvResult&, const RfecvResult&) = default;
};

/// Recursive elimination (one feature per step, lowest importance first, ties to the
/// lowest column) scored by stratified k-fold accuracy at every feature count. The count
/// with the best mean accuracy wins, ties to the smaller count.
[[nodiscard]] RfecvResult rfecv(const Matrix& x, std::span<const int> y, std::span<const std::string> features,
                                RfeEstimator estimator, const Hyperparameters& hp, std::size_t folds,
                                std::uint64_t seed);

struct ImportanceResult {
    FeatureSet selected;
    std::vector<double> mean_importance;

    friend bool operator==(const ImportanceResult&, const ImportanceResult&) = default;
};

/// Averages impurity importances over `repeats` fits (seeds derived from `seed`) and keeps
/// features whose mean importance is at least the uniform share (1/m of the total).
[[nodiscard]] ImportanceResult importance_select(const Matrix& x, std::span<const int> y,
                                                 std::span<const std::string> features, Algorithm model,
                                                 const Hyperparameters& hp, std::size_t repeats, std::uint64_t seed);

/// Symmetric m x m Pearson matrix with unit diagonal; zero-variance columns correlate 0.
[[nodiscard]] Matrix pearson_matrix(const Matrix& x);

/// For every pair with |r| >= threshold, the member with the lower chi-square score
/// (equal scores: the larger name). `corr` columns follow `chi2.features`.
[[nodiscard]] FeatureSet high_corr_set(const Matrix& corr, const ScoreTable& chi2, double threshold);

struct CorrelatedPair {
    std::string a;
    std::string b;
    double r = 0.0;
    friend bool operator==(const CorrelatedPair&, const CorrelatedPair&) = default;
};

/// Pairs with |r| >= threshold, strongest first.
[[nodiscard]] std::vector<CorrelatedPair> correlated_pairs(const Matrix& corr, std::span<const std::string> features,
                                                           double threshold);

inline constexpr std::array<std::string_view, 14> selection_set_names{
    "chi2", "mi", "r_g", "r_r", "r_l", "rf", "dt", "s_w", "s_f", "s_e", "s_cor", "f1", "f2", "f3",
};

struct SelectionReport {
    std::map<std::string, FeatureSet> sets;
    std::vector<ScoreTable> score_tables;
    std::map<std::string, RfecvResult> rfecv;
    std::map<std::string, ImportanceResult> importance;
    std::vector<CorrelatedPair> correlated;
    std::uint64_t seed = 0;
    nlohmann::json parameters = nlohmann::json::object();

    [[nodiscard]] const FeatureSet& set(std::string_view name) const;

    friend bool operator==(const SelectionReport&, const SelectionReport&) = default;
};

/// S_w = chi2 & mi; S_f = pairwise intersections of the three RFECV sets, united;
/// S_e = rf & dt; F1 = (S_w | S_f | S_e) - S_cor; F2 = pairwise intersections of
/// S_w, S_f, S_e united, minus S_cor; F3 = S_w & S_f & S_e - S_cor.
[[nodiscard]] SelectionReport assemble_sets(const FeatureSet& chi2, const FeatureSet& mi, const FeatureSet& rg,
                                            const FeatureSet& rr, const FeatureSet& rl, const FeatureSet& rf,
                                            const FeatureSet& dt, const FeatureSet& s_cor);

struct SelectionConfig {
    double top_fraction = 0.70;
    std::size_t mi_neighbors = 3;
    std::size_t rfe_folds = 10;
    std::size_t importance_repeats = 5;
    double corr_threshold = 0.85;
    /// Pairs at or above this |r| are listed in the report.
    double corr_report_threshold = 0.70;

    friend bool operator==(const SelectionConfig&, const SelectionConfig&) = default;
};

void to_json(nlohmann::json& j, const SelectionConfig& c);
void from_json(const nlohmann::json& j, SelectionConfig& c);

/// Runs every scorer on a prepared (non-negative, fully imputed) training matrix and
/// assembles F1/F2/F3. `discrete` flags 0/1 indicator columns for the MI scorer.
[[nodiscard]] SelectionReport hybrid_select(const LabeledMatrix& data, std::span<const bool> discrete,
                                            const SelectionConfig& cfg, const Hyperparameters& hp,
                                            std::uint64_t seed);

void to_json(nlohmann::json& j, const ScoreTable& t);
void from_json(const nlohmann::json& j, ScoreTable& t);
void to_json(nlohmann::json& j, const SelectionReport& r);
void from_json(const nlohmann::json& j, SelectionReport& r);

/// Correlated-pair table followed by the three selected sets.
[[nodiscard]] std::string selection_markdown(const SelectionReport& r);

} // namespace ckdpipe
