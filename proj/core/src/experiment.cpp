#include <ckdpipe/experiment.hpp>

#include <ckdpipe/error.hpp>
#include <ckdpipe/random.hpp>

#include "json_util.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <memory>

#ifndef CKDPIPE_VERSION
#define CKDPIPE_VERSION "unknown"
#endif

namespace ckdpipe {

std::string_view to_string(CvMode m) noexcept {
    return m == CvMode::prepared_once ? "paper" : "strict";
}

CvMode parse_cv_mode(std::string_view s) {
    if (s == "paper" || s == "prepared_once") {
        return CvMode::prepared_once;
    }
    if (s == "strict") {
        return CvMode::strict;
    }
    throw ArgumentError("unknown CV mode '" + std::string(s) + "' (expected paper or strict)");
}

std::string_view to_string(FeatureChoice f) noexcept {
    switch (f) {
    case FeatureChoice::f1:
        return "f1";
    case FeatureChoice::f2:
        return "f2";
    case FeatureChoice::f3:
        return "f3";
    case FeatureChoice::all:
        return "all";
    }
    return "all";
}

FeatureChoice parse_feature_choice(std::string_view s) {
    for (auto f : {FeatureChoice::f1, FeatureChoice::f2, FeatureChoice::f3, FeatureChoice::all}) {
        if (to_string(f) == s) {
            return f;
        }
    }
    throw ArgumentError("unknown feature set '" + std::string(s) + "' (expected f1, f2, f3 or all)");
}

std::vector<std::string> feature_set_names(FeatureChoice f) {
    if (f == FeatureChoice::all) {
        return {"f1", "f2", "f3"};
    }
    return {std::string(to_string(f))};
}

std::string_view to_string(ResampleMode m) noexcept {
    return m == ResampleMode::single_pass ? "single_pass" : "per_set";
}

ResampleMode parse_resample_mode(std::string_view s) {
    if (s == "single_pass") {
        return ResampleMode::single_pass;
    }
    if (s == "per_set") {
        return ResampleMode::per_set;
    }
    throw ArgumentError("unknown resample mode '" + std::string(s) + "' (expected single_pass or per_set)");
}

// ---------------------------------------------------------------------------
// Config

void validate(const ExperimentConfig& c) {
    const auto fail = [](const std::string& msg) { throw ArgumentError("config: " + msg); };
    if (c.dataset.empty()) {
        fail("dataset path is empty");
    }
    if (!(c.split_ratio > 0.0 && c.split_ratio < 1.0)) {
        fail("split_ratio must lie strictly between 0 and 1");
    }
    if (c.k_impute < 1) {
        fail("k_impute must be at least 1");
    }
    if (c.lof.k < 1) {
        fail("lof.k must be at least 1");
    }
    if (c.lof.mode == LofMode::contamination && !(c.lof.contamination >= 0.0 && c.lof.contamination <= 0.5)) {
        fail("lof.contamination must lie in [0, 0.5]");
    }
    if (c.k_smote < 1) {
        fail("k_smote must be at least 1");
    }
    if (!(c.selection.top_fraction > 0.0 && c.selection.top_fraction <= 1.0)) {
        fail("selection.top_fraction must lie in (0, 1]");
    }
    if (!(c.selection.corr_threshold > 0.0 && c.selection.corr_threshold <= 1.0)) {
        fail("selection.corr_threshold must lie in (0, 1]");
    }
    if (c.selection.mi_neighbors < 1 || c.selection.rfe_folds < 2 || c.selection.importance_repeats < 1) {
        fail("selection counts must be positive (rfe_folds >= 2)");
    }
    if (c.cv_folds < 2 || c.cv_repeats < 1) {
        fail("cv needs folds >= 2 and repeats >= 1");
    }
    if (c.models.empty()) {
        fail("model list is empty");
    }
    if (c.profile != "full" && c.profile != "reduced") {
        fail("profile must be 'full' or 'reduced'");
    }
}

nlohmann::json render_config(const ExperimentConfig& c) {
    nlohmann::json j;
    j["dataset"] = c.dataset;
    j["format"] = c.format ? std::string(to_string(*c.format)) : "auto";
    j["repairs"] = c.repairs;
    j["split_ratio"] = c.split_ratio;
    j["stratify_split"] = c.stratify_split;
    j["seed"] = c.seed;
    j["k_impute"] = c.k_impute;
    j["lof"] = c.lof;
    j["k_smote"] = c.k_smote;
    j["resample_mode"] = to_string(c.resample_mode);
    j["selection"] = c.selection;
    j["cv"] = {{"folds", c.cv_folds}, {"repeats", c.cv_repeats}, {"mode", to_string(c.cv_mode)}, {"enabled", c.run_cv}};
    j["features"] = to_string(c.features);
    j["models"] = nlohmann::json::array();
    for (auto a : c.models) {
        j["models"].push_back(to_string(a));
    }
    j["profile"] = c.profile;
    j["hyperparameters"] = c.hyperparameters;
    return j;
}

ExperimentConfig parse_config(const nlohmann::json& j) {
    detail::require_keys(j, "config",
                         {"dataset", "format", "repairs", "split_ratio", "stratify_split", "seed", "k_impute", "lof",
                          "k_smote", "resample_mode", "selection", "cv", "features", "models", "profile",
                          "hyperparameters"});
    ExperimentConfig c;
    try {
        detail::read_optional(j, "dataset", c.dataset);
        if (const auto it = j.find("format"); it != j.end()) {
            const auto f = it->get<std::string>();
            c.format = f == "auto" ? std::nullopt : std::optional(parse_file_format(f));
        }
        detail::read_optional(j, "repairs", c.repairs);
        detail::read_optional(j, "split_ratio", c.split_ratio);
        detail::read_optional(j, "stratify_split", c.stratify_split);
        detail::read_optional(j, "seed", c.seed);
        detail::read_optional(j, "k_impute", c.k_impute);
        detail::read_optional(j, "lof", c.lof);
        detail::read_optional(j, "k_smote", c.k_smote);
        if (const auto it = j.find("resample_mode"); it != j.end()) {
            c.resample_mode = parse_resample_mode(it->get<std::string>());
        }
        detail::read_optional(j, "selection", c.selection);
        if (const auto it = j.find("cv"); it != j.end()) {
            detail::require_keys(*it, "cv", {"folds", "repeats", "mode", "enabled"});
            detail::read_optional(*it, "folds", c.cv_folds);
            detail::read_optional(*it, "repeats", c.cv_repeats);
            detail::read_optional(*it, "enabled", c.run_cv);
            if (const auto m = it->find("mode"); m != it->end()) {
                c.cv_mode = parse_cv_mode(m->get<std::string>());
            }
        }
        if (const auto it = j.find("features"); it != j.end()) {
            c.features = parse_feature_choice(it->get<std::string>());
        }
        if (const auto it = j.find("models"); it != j.end()) {
            c.models.clear();
            for (const auto& m : *it) {
                c.models.push_back(parse_algorithm(m.get<std::string>()));
            }
        }
        detail::read_optional(j, "profile", c.profile);
        c.hyperparameters = c.profile == "reduced" ? Hyperparameters::reduced() : Hyperparameters{};
        if (const auto it = j.find("hyperparameters"); it != j.end()) {
            from_json(*it, c.hyperparameters);
        }
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("config: ") + e.what());
    }
    return c;
}

// ---------------------------------------------------------------------------
// Workflow

namespace {

ClassCount count_classes(const Frame& f) {
    ClassCount c;
    for (int v : f.binary_labels()) {
        (v == 1 ? c.positive : c.negative) += 1;
    }
    return c;
}

std::size_t set_index(std::string_view name) {
    if (name == "f1") {
        return 0;
    }
    if (name == "f2") {
        return 1;
    }
    if (name == "f3") {
        return 2;
    }
    return 3;
}

constexpr std::array<Stage, 3> preparation_stages{Stage::encode, Stage::minmax, Stage::impute};

} // namespace

DatasetSummary summarize(const Frame& frame) {
    DatasetSummary s;
    s.rows = frame.rows();
    s.class_names = frame.column(frame.label_index()).categories;
    s.class_counts = class_counts(frame);
    s.missing_cells = count_missing(frame);
    s.duplicate_pairs = find_duplicates(frame).size();
    return s;
}

PreparedData prepare_training(const Frame& train_raw, const Frame& test_raw, const ExperimentConfig& cfg,
                              std::uint64_t smote_seed) {
    PreparedData p;
    p.train_raw = train_raw;
    p.test_raw = test_raw;
    p.preparation = pipeline_fit(train_raw, preparation_stages, PipelineOptions{cfg.k_impute, {}});
    const Frame prepared = p.preparation.apply(train_raw);
    auto lof = detect_outliers(prepared, cfg.lof);
    auto balanced = smote_balance(lof.frame, SmoteConfig{cfg.k_smote, smote_seed});
    p.resample.feature_set = "all";
    p.resample.training = count_classes(train_raw);
    p.resample.after_lof = count_classes(lof.frame);
    p.resample.after_smote = count_classes(balanced.frame);
    p.resample.lof_removed = lof.removed.size();
    p.resample.smote_k = balanced.k_used;
    p.warnings = std::move(balanced.warnings);
    p.train_balanced = std::move(balanced.frame);
    return p;
}

SetData build_set(const PreparedData& prepared, std::string name, const FeatureSet& features,
                  const ExperimentConfig& cfg, std::uint64_t smote_seed) {
    if (features.empty()) {
        throw ArgumentError("feature set '" + name + "' is empty");
    }
    const std::vector<std::string> feature_list(features.begin(), features.end());
    SetData s;
    s.name = std::move(name);
    Frame train;
    const FittedPipeline* prep = &prepared.preparation;
    PreparedData local;
    if (cfg.resample_mode == ResampleMode::single_pass) {
        train = prepared.train_balanced.project(feature_list);
        s.resample = prepared.resample;
    } else {
        local = prepare_training(prepared.train_raw.project(feature_list), prepared.test_raw, cfg, smote_seed);
        train = local.train_balanced;
        s.resample = local.resample;
        prep = &local.preparation;
    }
    s.resample.feature_set = s.name;

    const auto standard = standard_fit(train);
    s.test_pipeline.append(FittedStage{Stage::project, "train", Projection{feature_list}});
    for (const auto& stage : prep->stages()) {
        s.test_pipeline.append(stage);
    }
    s.test_pipeline.append(FittedStage{Stage::standardize, "train", standard});

    s.train = to_matrix(standard_apply(train, standard));
    s.test = to_matrix(s.test_pipeline.apply(prepared.test_raw));
    s.features = s.train.features;
    return s;
}

LabeledMatrix selection_input(const Frame& balanced, std::vector<bool>& discrete) {
    discrete.clear();
    for (std::size_t j : balanced.feature_indices()) {
        discrete.push_back(balanced.column(j).indicator);
    }
    return to_matrix(balanced);
}

Frame load_clean(const ExperimentConfig& cfg) {
    const auto format = cfg.format ? *cfg.format : format_from_path(cfg.dataset);
    return clean(load_dataset(cfg.dataset, format, cfg.repairs), cfg.repairs);
}

Workflow prepare_workflow(const ExperimentConfig& cfg, const Frame& data, bool with_selection) {
    validate(cfg);
    Workflow wf;
    wf.data = data;
    wf.split = split(data, cfg.split_ratio, derive_seed(cfg.seed, stream::split), cfg.stratify_split);
    wf.prepared = prepare_training(wf.split.train, wf.split.test, cfg, derive_seed(cfg.seed, stream::smote));
    if (!with_selection) {
        return wf;
    }
    std::vector<bool> discrete;
    const auto input = selection_input(wf.prepared.train_balanced, discrete);
    const auto flags = std::make_unique<bool[]>(discrete.size());
    std::copy(discrete.begin(), discrete.end(), flags.get());
    wf.selection = hybrid_select(input, std::span<const bool>(flags.get(), discrete.size()), cfg.selection,
                                 cfg.hyperparameters, derive_seed(cfg.seed, stream::selection));
    for (const auto& name : feature_set_names(cfg.features)) {
        const auto& set = wf.selection.set(name);
        if (set.empty()) {
            continue;
        }
        wf.sets.push_back(
            build_set(wf.prepared, name, set, cfg, derive_seed(cfg.seed, stream::smote, set_index(name) + 1)));
    }
    return wf;
}

TrainedModel fit_cell(const ExperimentConfig& cfg, const SetData& set, Algorithm algorithm, std::size_t) {
    const ModelSpec spec{algorithm, cfg.hyperparameters,
                         derive_seed(cfg.seed, stream::models, set_index(set.name), static_cast<int>(algorithm))};
    return train(spec, set.train);
}

CvReport validate_cell(const ExperimentConfig& cfg, const Workflow& wf, const SetData& set, Algorithm algorithm,
                       std::size_t) {
    const std::uint64_t seed =
        derive_seed(cfg.seed, stream::validation, set_index(set.name), static_cast<int>(algorithm));
    const ModelSpec spec{algorithm, cfg.hyperparameters, 0};
    CvReport report;
    if (cfg.cv_mode == CvMode::prepared_once) {
        report = repeated_cv(spec, set.train.x, set.train.y, cfg.cv_folds, cfg.cv_repeats, seed);
    } else {
        const Frame& raw = wf.split.train;
        const FeatureSet features(set.features.begin(), set.features.end());
        report = repeated_cv(raw.binary_labels(), cfg.cv_folds, cfg.cv_repeats, seed,
                             [&](std::span<const std::size_t> train_rows, std::span<const std::size_t> validate_rows,
                                 std::uint64_t fit_seed) {
                                 const auto fold = prepare_training(raw.select_rows(train_rows),
                                                                    raw.select_rows(validate_rows), cfg,
                                                                    derive_seed(fit_seed, stream::smote));
                                 const auto data = build_set(fold, set.name, features, cfg,
                                                             derive_seed(fit_seed, stream::smote, 1));
                                 ModelSpec s = spec;
                                 s.seed = fit_seed;
                                 const auto model = train(s, data.train);
                                 return accuracy(confusion(data.test.y, predict(model, data.test)));
                             });
        report.algorithm = std::string(to_string(algorithm));
    }
    report.feature_set = set.name;
    report.mode = std::string(to_string(cfg.cv_mode));
    return report;
}

nlohmann::json assumption_ledger(const ExperimentConfig& cfg) {
    nlohmann::json a;
    a["positive_class"] = "first label category (ckd)";
    a["split"] = cfg.stratify_split ? "stratified shuffle" : "unstratified shuffle";
    a["sg_al_su"] = "coerced to numeric";
    a["encoding"] = "one 0/1 indicator per two-category column";
    a["minmax"] = "no clipping; constant column maps to 0";
    a["imputer_distance"] = "Euclidean over shared observed coordinates scaled by features/shared; indicators included";
    a["imputer_fallback"] = "training column mean";
    a["standard_deviation"] = "population";
    a["lof"] = cfg.lof;
    a["lof_neighbors"] = "exactly k, ties by row index";
    a["lof_density_floor"] = lof_density_floor;
    a["smote_k"] = cfg.k_smote;
    a["resample_mode"] = to_string(cfg.resample_mode);
    a["selection_input"] = "training partition after LOF and SMOTE, min-max scaled";
    a["chi2"] = "chi-square statistic of per-class feature sums";
    a["mutual_information"] = "kNN estimator on unit-variance columns with seeded 1e-10 jitter (continuous) or plug-in (indicators)";
    a["top_fraction_rounding"] = "ceil; ties by feature name";
    a["rfecv"] = "step 1; lowest importance removed (ties: lowest column); best count ties to fewer features";
    a["importance_threshold"] = "mean importance (1/m of total)";
    a["s_cor_rule"] = "drop the lower chi2 member of each pair";
    a["tree_ties"] = "lowest feature index, then lowest threshold; midpoint thresholds";
    a["svm_gamma"] = "1 / (n_features * variance of all training cells)";
    a["svm_tie"] = "margin 0 is class 1";
    a["rforest_score"] = "fraction of tree votes";
    a["adaboost"] = "SAMME.R over depth-1 trees";
    a["xgb_like"] = "second-order boosting, depth 3, lambda 1, eta 0.3, base score 0.5, min child weight 1";
    a["gboost_depth"] = cfg.hyperparameters.gb_max_depth;
    a["auc"] = "Mann-Whitney on model scores, ties 1/2";
    a["f1_zero_rule"] = "class F1 = 0 when precision + recall = 0";
    a["cv_mode"] = to_string(cfg.cv_mode);
    a["strict_cv_selection"] = "feature sets are selected once on the full training partition";
    a["hyperparameters"] = cfg.hyperparameters;
    return a;
}

RunReport run(const ExperimentConfig& cfg, const Frame& data) {
    const auto start = std::chrono::steady_clock::now();
    validate(cfg);
    RunReport r;
    r.config = render_config(cfg);
    r.dataset = summarize(data);
    const auto wf = prepare_workflow(cfg, data);
    r.train_rows = wf.split.train.rows();
    r.test_rows = wf.split.test.rows();
    r.selection = wf.selection;
    std::vector<bool> discrete;
    const auto input = selection_input(wf.prepared.train_balanced, discrete);
    r.correlation_features = input.features;
    r.correlation = pearson_matrix(input.x);
    r.warnings = wf.prepared.warnings;
    if (cfg.resample_mode == ResampleMode::single_pass) {
        r.resampling.push_back(wf.prepared.resample);
    }
    for (const auto& name : feature_set_names(cfg.features)) {
        if (wf.selection.set(name).empty()) {
            r.warnings.push_back("feature set " + name + " is empty; no models trained on it");
        }
    }
    for (const auto& set : wf.sets) {
        if (cfg.resample_mode == ResampleMode::per_set) {
            r.resampling.push_back(set.resample);
        }
        for (auto algorithm : cfg.models) {
            if (cfg.run_cv) {
                r.cv.push_back(validate_cell(cfg, wf, set, algorithm, 0));
            }
            const auto model = fit_cell(cfg, set, algorithm, 0);
            for (const auto& w : model.warnings) {
                r.warnings.push_back(set.name + ": " + w);
            }
            auto metrics = evaluate_test(model, set.test);
            metrics.feature_set = set.name;
            r.test.push_back(std::move(metrics));
        }
    }
    r.assumptions = assumption_ledger(cfg);
    r.wall_clock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return r;
}

RunReport run(const ExperimentConfig& cfg) {
    validate(cfg);
    return run(cfg, load_clean(cfg));
}

nlohmann::json to_json(const RunReport& r) {
    nlohmann::json j;
    j["format_version"] = report_format_version;
    j["tool"] = {{"name", "ckdpipe"}, {"version", CKDPIPE_VERSION}};
    j["config"] = r.config;
    nlohmann::json counts = nlohmann::json::object();
    for (std::size_t c = 0; c < r.dataset.class_names.size(); ++c) {
        counts[r.dataset.class_names[c]] = r.dataset.class_counts[c];
    }
    j["dataset"] = {{"rows", r.dataset.rows},
                    {"class_counts", counts},
                    {"missing_cells", r.dataset.missing_cells},
                    {"duplicate_pairs", r.dataset.duplicate_pairs}};
    j["split"] = {{"train_rows", r.train_rows}, {"test_rows", r.test_rows}};
    j["resampling"] = nlohmann::json::array();
    for (const auto& s : r.resampling) {
        const auto cc = [](const ClassCount& c) {
            return nlohmann::json{{"positive", c.positive}, {"negative", c.negative}};
        };
        j["resampling"].push_back({{"feature_set", s.feature_set},
                                   {"training", cc(s.training)},
                                   {"after_lof", cc(s.after_lof)},
                                   {"after_smote", cc(s.after_smote)},
                                   {"lof_removed", s.lof_removed},
                                   {"smote_k", s.smote_k}});
    }
    j["selection"] = r.selection;
    nlohmann::json corr = nlohmann::json::array();
    for (std::size_t i = 0; i < r.correlation.rows(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (std::size_t k = 0; k < r.correlation.cols(); ++k) {
            row.push_back(r.correlation(i, k));
        }
        corr.push_back(std::move(row));
    }
    j["correlation"] = {{"features", r.correlation_features}, {"matrix", std::move(corr)}};
    j["cv"] = r.cv;
    j["test"] = r.test;
    j["assumptions"] = r.assumptions;
    j["warnings"] = r.warnings;
    j["wall_clock_seconds"] = r.wall_clock_seconds;
    return j;
}

// ---------------------------------------------------------------------------
// Published reference values

namespace {

struct PublishedRow {
    Algorithm algorithm;
    std::array<double, 3> cv;
    std::array<PublishedTest, 3> test;
};

constexpr std::array<PublishedRow, 9> published_rows{{
    {Algorithm::svm_rbf, {100.00, 99.39, 98.34}, {{{98, 98, 98.48}, {99, 99, 98.53}, {98, 98, 97.77}}}},
    {Algorithm::gaussian_nb, {100.00, 99.14, 88.23}, {{{99, 99, 98.52}, {99, 99, 99.24}, {82, 82, 86.36}}}},
    {Algorithm::dtree, {99.63, 98.93, 97.95}, {{{99, 99, 99.24}, {98, 98, 98.49}, {96, 96, 96.30}}}},
    {Algorithm::rforest, {100.00, 100.00, 98.91}, {{{100, 100, 100.00}, {100, 100, 100.00}, {97, 97, 97.01}}}},
    {Algorithm::logistic, {100.00, 99.69, 98.34}, {{{97, 97, 97.73}, {99, 99, 99.24}, {95, 95, 96.21}}}},
    {Algorithm::knn, {98.33, 99.51, 97.81}, {{{95, 95, 96.21}, {97, 97, 97.73}, {98, 98, 98.48}}}},
    {Algorithm::gboost, {99.50, 99.05, 98.31}, {{{99, 99, 99.24}, {98, 98, 98.48}, {98, 98, 97.78}}}},
    {Algorithm::adaboost, {99.82, 99.89, 98.61}, {{{97, 97, 97.72}, {98, 98, 98.48}, {98, 98, 97.78}}}},
    {Algorithm::xgb_like, {100.00, 99.51, 98.18}, {{{99, 99, 99.24}, {98, 98, 98.48}, {97, 97, 96.30}}}},
}};

const PublishedRow* find_published(Algorithm a) {
    for (const auto& row : published_rows) {
        if (row.algorithm == a) {
            return &row;
        }
    }
    return nullptr;
}


} // namespace

std::optional<double> published_cv_accuracy(Algorithm a, std::string_view set) {
    const auto* row = find_published(a);
    const std::size_t i = set_index(set);
    if (row == nullptr || i > 2) {
        return std::nullopt;
    }
    return row->cv[i];
}

std::optional<PublishedTest> published_test(Algorithm a, std::string_view set) {
    const auto* row = find_published(a);
    const std::size_t i = set_index(set);
    if (row == nullptr || i > 2) {
        return std::nullopt;
    }
    return row->test[i];
}

} // namespace ckdpipe
