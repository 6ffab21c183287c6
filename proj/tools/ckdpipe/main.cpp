// ckdpipe command line runner.

#include <ckdpipe/error.hpp>
#include <ckdpipe/experiment.hpp>
#include <ckdpipe/parallel.hpp>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace ckdpipe;

namespace {

enum Exit : int { ok = 0, config_error = 2, missing_data = 3, runtime_failure = 4 };

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct MissingData : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Options {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out = "ckdpipe-out";
    std::optional<std::string> mode;
    std::optional<std::string> features;
    std::string format = "both";
    bool stratify_split = false;
    std::optional<std::string> profile;
    std::optional<std::string> dataset;
    bool no_cv = false;
    std::size_t threads = 0;
    std::vector<std::string> tables;
};

constexpr const char* fetch_instructions =
    "The UCI Chronic Kidney Disease dataset is not bundled. To fetch it:\n"
    "  1. Download chronic_kidney_disease.zip from\n"
    "     https://archive.ics.uci.edu/dataset/336/chronic+kidney+disease\n"
    "  2. Extract chronic_kidney_disease_full.arff into ./data/\n"
    "  3. Or point CKDPIPE_DATASET (or \"dataset\" in --config) at the file.\n";

void add_common(CLI::App* app, Options& o) {
    app->add_option("--config", o.config, "JSON experiment config")->check(CLI::ExistingFile);
    app->add_option("--seed", o.seed, "Master seed");
    app->add_option("--out", o.out, "Output directory")->capture_default_str();
    app->add_option("--mode", o.mode, "CV mode")->check(CLI::IsMember({"paper", "strict"}));
    app->add_option("--features", o.features, "Feature set")->check(CLI::IsMember({"f1", "f2", "f3", "all"}));
    app->add_option("--format", o.format, "Report format")
        ->check(CLI::IsMember({"json", "markdown", "both"}))
        ->capture_default_str();
    app->add_flag("--stratify-split", o.stratify_split, "Stratify the train/test split by class");
    app->add_option("--profile", o.profile, "Estimator sizes")->check(CLI::IsMember({"full", "reduced"}));
    app->add_option("--dataset", o.dataset, "Dataset path (overrides CKDPIPE_DATASET and the config)");
    app->add_flag("--no-cv", o.no_cv, "Skip cross-validation");
    app->add_option("--threads", o.threads, "Worker threads (0 = all cores)");
}

ExperimentConfig load_config(const Options& o) {
    ExperimentConfig cfg;
    try {
        if (!o.config.empty()) {
            std::ifstream in(o.config);
            cfg = parse_config(nlohmann::json::parse(in));
        }
        if (o.profile) {
            cfg.profile = *o.profile;
            const auto base = cfg.profile == "reduced" ? Hyperparameters::reduced() : Hyperparameters{};
            cfg.hyperparameters.rf_trees = base.rf_trees;
            cfg.hyperparameters.gb_stages = base.gb_stages;
            cfg.hyperparameters.xgb_rounds = base.xgb_rounds;
        }
        if (const char* env = std::getenv("CKDPIPE_DATASET"); env != nullptr && *env != '\0') {
            cfg.dataset = env;
        }
        if (o.dataset) {
            cfg.dataset = *o.dataset;
        }
        if (o.seed) {
            cfg.seed = *o.seed;
        }
        if (o.mode) {
            cfg.cv_mode = parse_cv_mode(*o.mode);
        }
        if (o.features) {
            cfg.features = parse_feature_choice(*o.features);
        }
        if (o.stratify_split) {
            cfg.stratify_split = true;
        }
        if (o.no_cv) {
            cfg.run_cv = false;
        }
        validate(cfg);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    } catch (const SchemaError& e) {
        throw ConfigError(e.what());
    } catch (const ArgumentError& e) {
        throw ConfigError(e.what());
    }
    return cfg;
}

Frame load_data(const ExperimentConfig& cfg) {
    if (!fs::exists(cfg.dataset)) {
        throw MissingData("dataset not found: " + cfg.dataset);
    }
    return load_clean(cfg);
}

void write_text(const fs::path& path, const std::string& text) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    out << text;
    if (!out) {
        throw Error("cannot write " + path.string());
    }
}

void emit(const Options& o, const std::string& stem, const nlohmann::json& json, const std::string& markdown) {
    const fs::path dir(o.out);
    if (o.format != "markdown") {
        write_text(dir / (stem + ".json"), json.dump(2) + "\n");
    }
    if (o.format != "json" && !markdown.empty()) {
        write_text(dir / (stem + ".md"), markdown);
    }
    std::cerr << "wrote " << (dir / stem).string() << " (" << o.format << ")\n";
}

int cmd_prepare(const Options& o) {
    const auto cfg = load_config(o);
    const auto wf = prepare_workflow(cfg, load_data(cfg), false);
    const fs::path dir(o.out);
    fs::create_directories(dir);
    write_csv(wf.split.train, dir / "train_raw.csv");
    write_csv(wf.split.test, dir / "test_raw.csv");
    write_csv(wf.prepared.train_balanced, dir / "train_prepared.csv");
    write_csv(wf.prepared.preparation.apply(wf.split.test), dir / "test_prepared.csv");
    const auto& s = wf.prepared.resample;
    nlohmann::json j{{"pipeline", to_json(wf.prepared.preparation)},
                     {"resampling",
                      {{"training", {s.training.positive, s.training.negative}},
                       {"after_lof", {s.after_lof.positive, s.after_lof.negative}},
                       {"after_smote", {s.after_smote.positive, s.after_smote.negative}},
                       {"lof_removed", s.lof_removed},
                       {"smote_k", s.smote_k}}},
                     {"warnings", wf.prepared.warnings}};
    emit(o, "prepare", j, "");
    return ok;
}

int cmd_select(const Options& o) {
    const auto cfg = load_config(o);
    const auto wf = prepare_workflow(cfg, load_data(cfg));
    emit(o, "selection", nlohmann::json(wf.selection), selection_markdown(wf.selection));
    return ok;
}

int cmd_train(const Options& o) {
    const auto cfg = load_config(o);
    const auto wf = prepare_workflow(cfg, load_data(cfg));
    const fs::path dir = fs::path(o.out) / "models";
    for (const auto& set : wf.sets) {
        write_text(dir / (set.name + "_pipeline.json"), to_json(set.test_pipeline).dump(2) + "\n");
        for (auto a : cfg.models) {
            const auto model = fit_cell(cfg, set, a, 0);
            write_text(dir / fmt::format("{}_{}.json", set.name, to_string(a)), to_json(model).dump(2) + "\n");
        }
    }
    std::cerr << "wrote " << dir.string() << "\n";
    return ok;
}

int cmd_validate(const Options& o) {
    const auto cfg = load_config(o);
    const auto wf = prepare_workflow(cfg, load_data(cfg));
    RunReport r;
    r.selection = wf.selection;
    for (const auto& set : wf.sets) {
        for (auto a : cfg.models) {
            r.cv.push_back(validate_cell(cfg, wf, set, a, 0));
        }
    }
    emit(o, "validation", nlohmann::json(r.cv), to_markdown(r));
    return ok;
}

int cmd_evaluate(const Options& o) {
    auto cfg = load_config(o);
    cfg.run_cv = false;
    const auto r = run(cfg, load_data(cfg));
    emit(o, "evaluation", nlohmann::json(r.test), to_markdown(r));
    return ok;
}

int cmd_run(const Options& o) {
    const auto cfg = load_config(o);
    const auto r = run(cfg, load_data(cfg));
    emit(o, "report", to_json(r), to_markdown(r));
    return ok;
}

int cmd_reproduce(const Options& o) {
    auto cfg = load_config(o);
    if (!o.mode) {
        cfg.cv_mode = CvMode::prepared_once;
    }
    if (!fs::exists(cfg.dataset)) {
        throw MissingData("dataset not found: " + cfg.dataset);
    }
    for (const auto& t : o.tables) {
        if (t != "II" && t != "III" && t != "IV" && t != "V" && t != "VI" && t != "VII") {
            throw ConfigError("unknown table '" + t + "' (expected II, III, IV, V, VI or VII)");
        }
    }
    const bool needs_cv = o.tables.empty() || std::find(o.tables.begin(), o.tables.end(), "IV") != o.tables.end();
    if (!needs_cv) {
        cfg.run_cv = false;
    }
    const auto r = run(cfg, load_clean(cfg));
    const auto rows = compare_with_published(r, o.tables);
    const auto md = comparison_markdown(rows);
    std::cout << md;
    emit(o, "report", to_json(r), to_markdown(r));
    emit(o, "comparison", to_json(rows), md);
    return ok;
}

void report_error(const char* type, const std::string& message, int code) {
    nlohmann::json j{{"error", {{"type", type}, {"message", message}, {"exit_code", code}}}};
    std::cerr << j.dump() << "\n";
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"ckdpipe: chronic kidney disease detection pipeline"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "ckdpipe 0.1.0");

    Options o;
    struct Command {
        const char* name;
        const char* help;
        int (*fn)(const Options&);
    };
    const std::vector<Command> commands{
        {"prepare", "Split, encode, scale, impute, remove outliers and oversample; write frames", cmd_prepare},
        {"select", "Run hybrid feature selection and write the selection report", cmd_select},
        {"train", "Train every model on every feature set and write the fitted models", cmd_train},
        {"validate", "Repeated stratified cross-validation of every model", cmd_validate},
        {"evaluate", "Train and score every model on the held-out split", cmd_evaluate},
        {"run", "Full workflow; writes report.json and report.md", cmd_run},
        {"reproduce", "Full workflow plus a cell-by-cell comparison with the published tables", cmd_reproduce},
    };
    std::vector<std::pair<CLI::App*, int (*)(const Options&)>> subs;
    for (const auto& c : commands) {
        auto* sub = app.add_subcommand(c.name, c.help);
        add_common(sub, o);
        if (std::string_view(c.name) == "reproduce") {
            sub->add_option("--tables", o.tables, "Subset of II III IV V VI VII (default: all)")->delimiter(',');
        }
        subs.emplace_back(sub, c.fn);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        report_error("usage", e.what(), config_error);
        return config_error;
    }

    set_worker_threads(o.threads);
    try {
        for (const auto& [sub, fn] : subs) {
            if (sub->parsed()) {
                return fn(o);
            }
        }
    } catch (const ConfigError& e) {
        report_error("config", e.what(), config_error);
        return config_error;
    } catch (const MissingData& e) {
        std::cerr << fetch_instructions;
        report_error("missing_data", e.what(), missing_data);
        return missing_data;
    } catch (const Error& e) {
        report_error("runtime", e.what(), runtime_failure);
        return runtime_failure;
    } catch (const std::exception& e) {
        report_error("runtime", e.what(), runtime_failure);
        return runtime_failure;
    }
    return runtime_failure;
}
