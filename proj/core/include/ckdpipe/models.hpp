#pragma once

#include <ckdpipe/dataset.hpp>
#include <ckdpipe/matrix.hpp>
#include <ckdpipe/tree.hpp>

#include <nlohmann/json.hpp>

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace ckdpipe {

enum class Algorithm { svm_rbf, gaussian_nb, dtree, rforest, logistic, knn, gboost, adaboost, xgb_like };

inline constexpr std::array<Algorithm, 9> all_algorithms{
    Algorithm::svm_rbf, Algorithm::gaussian_nb, Algorithm::dtree,    Algorithm::rforest, Algorithm::logistic,
    Algorithm::knn,     Algorithm::gboost,      Algorithm::adaboost, Algorithm::xgb_like,
};

[[nodiscard]] std::string_view to_string(Algorithm a) noexcept;
[[nodiscard]] Algorithm parse_algorithm(std::string_view s);

/// Every tunable of the nine classifiers. Defaults are the full-size profile.
struct Hyperparameters {
    double svm_c = 1.0;
    double svm_tolerance = 1e-3;
    std::size_t svm_max_iter = 10'000'000;
    /// <= 0 selects 1 / (n_features * element variance of the training matrix).
    double svm_gamma = 0.0;

    double nb_var_smoothing = 1e-9;

    Criterion dtree_criterion = Criterion::gini;
    std::size_t dtree_max_depth = 0;

    std::size_t rf_trees = 1000;
    Criterion rf_criterion = Criterion::gini;
    std::size_t rf_max_depth = 0;

    double lr_c = 1.0;
    std::size_t lr_max_iter = 100;
    double lr_tolerance = 1e-6;
    std::size_t lr_memory = 10;

    std::size_t knn_k = 25;

    std::size_t gb_stages = 1000;
    double gb_learning_rate = 0.01;
    std::size_t gb_max_depth = 3;

    std::size_t ada_estimators = 50;
    double ada_learning_rate = 1.0;
    std::size_t ada_max_depth = 1;

    std::size_t xgb_rounds = 1000;
    double xgb_eta = 0.3;
    std::size_t xgb_max_depth = 3;
    double xgb_lambda = 1.0;
    double xgb_min_child_weight = 1.0;
    double xgb_base_score = 0.5;
    /// Replace every hessian by 1 (turns the booster into plain gradient boosting).
    bool xgb_unit_hessian = false;

    /// 100 trees / stages / rounds instead of 1000; everything else unchanged.
    [[nodiscard]] static Hyperparameters reduced();

    friend bool operator==(const Hyperparameters&, const Hyperparameters&) = default;
};

void to_json(nlohmann::json& j, const Hyperparameters& h);
/// Missing keys keep their defaults; unknown keys throw SchemaError.
void from_json(const nlohmann::json& j, Hyperparameters& h);

struct ModelSpec {
    Algorithm algorithm = Algorithm::rforest;
    Hyperparameters hp;
    std::uint64_t seed = 0;

    friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

struct SvmState {
    Matrix support;
    /// alpha_i * y_i per support vector, y in {-1, +1}.
    std::vector<double> coef;
    double rho = 0.0;
    double gamma = 0.0;
    double c = 1.0;
    std::size_t iterations = 0;
    friend bool operator==(const SvmState&, const SvmState&) = default;
};

struct NaiveBayesState {
    std::array<double, 2> log_prior{};
    /// 2 x m.
    Matrix mean;
    Matrix var;
    friend bool operator==(const NaiveBayesState&, const NaiveBayesState&) = default;
};

struct TreeState {
    Tree tree;
    friend bool operator==(const TreeState&, const TreeState&) = default;
};

struct ForestState {
    std::vector<Tree> trees;
    friend bool operator==(const ForestState&, const ForestState&) = default;
};

struct LogisticState {
    std::vector<double> w;
    double b = 0.0;
    std::size_t iterations = 0;
    friend bool operator==(const LogisticState&, const LogisticState&) = default;
};

struct KnnState {
    Matrix x;
    std::vector<int> y;
    std::size_t k = 25;
    friend bool operator==(const KnnState&, const KnnState&) = default;
};

/// Additive logit model: score = sigmoid(init + learning_rate * sum of tree outputs).
struct BoostState {
    double init = 0.0;
    double learning_rate = 0.1;
    std::vector<Tree> trees;
    /// Mean logistic loss on the training rows after each stage.
    std::vector<double> train_loss;
    friend bool operator==(const BoostState&, const BoostState&) = default;
};

/// SAMME.R: each stump leaf holds a class-1 probability.
struct AdaBoostState {
    std::vector<Tree> stumps;
    friend bool operator==(const AdaBoostState&, const AdaBoostState&) = default;
};

using FitState = std::variant<SvmState, NaiveBayesState, TreeState, ForestState, LogisticState, KnnState,
                              BoostState, AdaBoostState>;

struct TrainedModel {
    Algorithm algorithm = Algorithm::rforest;
    std::vector<std::string> features;
    FitState state;
    /// Feature importances normalised to sum 1 (impurity for trees, |coefficient| for
    /// logistic); empty for algorithms without a natural importance.
    std::vector<double> importances;
    /// False when an iterative solver stopped at its iteration cap.
    bool converged = true;
    std::vector<std::string> warnings;

    friend bool operator==(const TrainedModel&, const TrainedModel&) = default;
};

/// 1 / (n_features * variance). Throws ArgumentError for n_features < 1 or variance <= 0.
[[nodiscard]] double rbf_gamma(std::size_t n_features, double variance);

/// Throw ArgumentError unless p >= 0 and sums to 1 within 1e-9.
[[nodiscard]] double gini(std::span<const double> p);
/// Base-2 Shannon entropy with 0 log 0 = 0.
[[nodiscard]] double entropy(std::span<const double> p);

/// Throws ArgumentError on single-class y, length mismatch or an empty matrix.
[[nodiscard]] TrainedModel train(const ModelSpec& spec, const Matrix& x, std::span<const int> y,
                                 std::vector<std::string> features = {});
[[nodiscard]] TrainedModel train(const ModelSpec& spec, const LabeledMatrix& data);

/// Decision threshold on score(): 0 for margin models (svm_rbf), 0.5 otherwise.
[[nodiscard]] double decision_threshold(Algorithm a) noexcept;

/// Confidence for class 1. Only the column count is checked.
[[nodiscard]] std::vector<double> score(const TrainedModel& model, const Matrix& x);
/// Labels as [score >= threshold].
[[nodiscard]] std::vector<int> predict(const TrainedModel& model, const Matrix& x);

/// As above; throws SchemaError unless data.features equals model.features.
[[nodiscard]] std::vector<double> score(const TrainedModel& model, const LabeledMatrix& data);
[[nodiscard]] std::vector<int> predict(const TrainedModel& model, const LabeledMatrix& data);

/// Class posteriors (row sums to 1) for gaussian_nb.
[[nodiscard]] std::vector<std::array<double, 2>> nb_posteriors(const NaiveBayesState& s, const Matrix& x);

inline constexpr int model_format_version = 1;

[[nodiscard]] nlohmann::json to_json(const TrainedModel& m);
[[nodiscard]] TrainedModel model_from_json(const nlohmann::json& j);

} // namespace ckdpipe
