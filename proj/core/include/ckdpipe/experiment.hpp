#pragma once

#include <ckdpipe/dataset.hpp>
#include <ckdpipe/evaluate.hpp>
#include <ckdpipe/feature_select.hpp>
#include <ckdpipe/models.hpp>
#include <ckdpipe/resample.hpp>
#include <ckdpipe/transforms.hpp>

#include <nlohmann/json.hpp>

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ckdpipe {

enum class CvMode {
    /// Prepare the training partition once (including resampling), then cross-validate.
    prepared_once,
    /// Refit encoding, scaling, imputation, LOF and SMOTE inside every training fold.
    strict,
};

[[nodiscard]] std::string_view to_string(CvMode m) noexcept;
/// Accepts "paper" (alias "prepared_once") and "strict".
[[nodiscard]] CvMode parse_cv_mode(std::string_view s);

enum class FeatureChoice { f1, f2, f3, all };

[[nodiscard]] std::string_view to_string(FeatureChoice f) noexcept;
[[nodiscard]] FeatureChoice parse_feature_choice(std::string_view s);
[[nodiscard]] std::vector<std::string> feature_set_names(FeatureChoice f);

enum class ResampleMode {
    /// One LOF + SMOTE pass on the full-feature training partition.
    single_pass,
    /// Repeat encode / scale / impute / LOF / SMOTE on each projected feature set.
    per_set,
};

[[nodiscard]] std::string_view to_string(ResampleMode m) noexcept;
[[nodiscard]] ResampleMode parse_resample_mode(std::string_view s);

struct ExperimentConfig {
    std::string dataset = "data/chronic_kidney_disease_full.arff";
    /// nullopt = infer from the file extension.
    std::optional<FileFormat> format;
    RepairTable repairs = RepairTable::builtin();

    double split_ratio = 0.75;
    bool stratify_split = false;
    std::uint64_t seed = 2022;

    std::size_t k_impute = 5;
    LofConfig lof;
    std::size_t k_smote = 5;
    ResampleMode resample_mode = ResampleMode::single_pass;

    SelectionConfig selection;

    std::size_t cv_folds = 10;
    std::size_t cv_repeats = 10;
    CvMode cv_mode = CvMode::prepared_once;
    bool run_cv = true;

    FeatureChoice features = FeatureChoice::all;
    std::vector<Algorithm> models{all_algorithms.begin(), all_algorithms.end()};
    /// "full" or "reduced"; selects the base hyperparameters before `hyperparameters` overrides.
    std::string profile = "full";
    Hyperparameters hyperparameters;

    friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

/// Throws ArgumentError naming the first invalid field.
void validate(const ExperimentConfig& c);

[[nodiscard]] nlohmann::json render_config(const ExperimentConfig& c);
/// Missing keys keep their defaults; unknown keys throw SchemaError. A "profile" key
/// without "hyperparameters" selects that profile's hyperparameters.
[[nodiscard]] ExperimentConfig parse_config(const nlohmann::json& j);

struct ClassCount {
    std::size_t positive = 0;
    std::size_t negative = 0;
    friend bool operator==(const ClassCount&, const ClassCount&) = default;
};

struct DatasetSummary {
    std::size_t rows = 0;
    std::vector<std::string> class_names;
    std::vector<std::size_t> class_counts;
    std::size_t missing_cells = 0;
    std::size_t duplicate_pairs = 0;
};

struct ResampleSummary {
    std::string feature_set;
    ClassCount training;
    ClassCount after_lof;
    ClassCount after_smote;
    std::size_t lof_removed = 0;
    std::size_t smote_k = 0;
};

/// Everything produced before any classifier is trained.
struct PreparedData {
    Frame train_raw;
    Frame test_raw;
    FittedPipeline preparation;
    /// Encoded, scaled, imputed, outlier-filtered and balanced training frame.
    Frame train_balanced;
    ResampleSummary resample;
    std::vector<std::string> warnings;
};

/// Fits encode / minmax / impute on `train_raw` and runs LOF and SMOTE.
[[nodiscard]] PreparedData prepare_training(const Frame& train_raw, const Frame& test_raw,
                                            const ExperimentConfig& cfg, std::uint64_t smote_seed);

/// Model-ready matrices for one feature set.
struct SetData {
    std::string name;
    std::vector<std::string> features;
    LabeledMatrix train;
    LabeledMatrix test;
    /// project -> encode -> minmax -> impute -> standardize, all fitted on training rows.
    FittedPipeline test_pipeline;
    ResampleSummary resample;
};

[[nodiscard]] SetData build_set(const PreparedData& prepared, std::string name, const FeatureSet& features,
                                const ExperimentConfig& cfg, std::uint64_t smote_seed);

[[nodiscard]] LabeledMatrix selection_input(const Frame& balanced, std::vector<bool>& discrete);

struct RunReport {
    nlohmann::json config;
    DatasetSummary dataset;
    std::size_t train_rows = 0;
    std::size_t test_rows = 0;
    std::vector<ResampleSummary> resampling;
    SelectionReport selection;
    /// Pearson matrix of the selection input; columns follow `correlation_features`.
    std::vector<std::string> correlation_features;
    Matrix correlation;
    std::vector<CvReport> cv;
    std::vector<MetricReport> test;
    nlohmann::json assumptions;
    std::vector<std::string> warnings;
    double wall_clock_seconds = 0.0;
};

[[nodiscard]] DatasetSummary summarize(const Frame& frame);

/// Fully prepared stages of a run, exposed for the CLI subcommands and tests.
struct Workflow {
    Frame data;
    SplitPair split;
    PreparedData prepared;
    SelectionReport selection;
    std::vector<SetData> sets;
};

[[nodiscard]] Frame load_clean(const ExperimentConfig& cfg);
[[nodiscard]] Workflow prepare_workflow(const ExperimentConfig& cfg, const Frame& data, bool with_selection = true);

/// Trained model for one (feature set, algorithm) cell with its derived seed.
[[nodiscard]] TrainedModel fit_cell(const ExperimentConfig& cfg, const SetData& set, Algorithm algorithm,
                                    std::size_t set_index);
[[nodiscard]] CvReport validate_cell(const ExperimentConfig& cfg, const Workflow& wf, const SetData& set,
                                     Algorithm algorithm, std::size_t set_index);

[[nodiscard]] RunReport run(const ExperimentConfig& cfg);
[[nodiscard]] RunReport run(const ExperimentConfig& cfg, const Frame& data);

/// Defaults chosen where the method description is silent, recorded in every report.
[[nodiscard]] nlohmann::json assumption_ledger(const ExperimentConfig& cfg);

inline constexpr int report_format_version = 1;

[[nodiscard]] nlohmann::json to_json(const RunReport& r);
[[nodiscard]] std::string to_markdown(const RunReport& r);

struct ComparisonRow {
    std::string table;
    std::string cell;
    std::string published;
    std::string reproduced;
    /// "pass" or "flag".
    std::string marker;
};

[[nodiscard]] std::vector<ComparisonRow> compare_with_published(const RunReport& r,
                                                                const std::vector<std::string>& tables);
[[nodiscard]] nlohmann::json to_json(const std::vector<ComparisonRow>& rows);
[[nodiscard]] std::string comparison_markdown(const std::vector<ComparisonRow>& rows);

/// Published cross-validation mean accuracy (percent) for set f1/f2/f3, nullopt if absent.
[[nodiscard]] std::optional<double> published_cv_accuracy(Algorithm a, std::string_view set);
/// Published test accuracy (percent), macro-F1 (percent) and AUC (percent).
struct PublishedTest {
    double accuracy;
    double f1;
    double auc;
};
[[nodiscard]] std::optional<PublishedTest> published_test(Algorithm a, std::string_view set);

} // namespace ckdpipe
