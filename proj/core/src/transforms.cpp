#include <ckdpipe/transforms.hpp>

#include <ckdpipe/error.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <utility>

namespace ckdpipe {

// ---------------------------------------------------------------------------
// One-hot (single 0/1 indicator per two-category column)

std::string_view encoded_positive(std::string_view column, std::span<const std::string> categories) {
    static constexpr std::array<std::pair<std::string_view, std::string_view>, 10> table{{
        {"rbc", "normal"},
        {"pc", "normal"},
        {"pcc", "present"},
        {"ba", "present"},
        {"htn", "yes"},
        {"dm", "yes"},
        {"cad", "yes"},
        {"pe", "yes"},
        {"ane", "yes"},
        {"appet", "poor"},
    }};
    for (const auto& [name, token] : table) {
        if (name == column && std::find(categories.begin(), categories.end(), token) != categories.end()) {
            return token;
        }
    }
    return categories.front();
}

EncoderMap onehot_fit(const Frame& train) {
    EncoderMap map;
    for (std::size_t j : train.feature_indices()) {
        const auto& spec = train.column(j);
        if (spec.kind != ColumnKind::categorical) {
            continue;
        }
        if (spec.categories.size() != 2) {
            throw EncodingError("column '" + spec.name + "' has " + std::to_string(spec.categories.size()) +
                                " categories; only two-category columns can be encoded");
        }
        const auto one = std::string(encoded_positive(spec.name, spec.categories));
        const auto zero = spec.categories[0] == one ? spec.categories[1] : spec.categories[0];
        map.columns.emplace(spec.name, EncoderMap::Pair{one, zero});
    }
    return map;
}

Frame onehot_apply(const Frame& frame, const EncoderMap& map) {
    std::vector<ColumnSpec> schema = frame.schema();
    std::vector<const EncoderMap::Pair*> pairs(frame.cols(), nullptr);
    for (std::size_t j : frame.feature_indices()) {
        auto& spec = schema[j];
        if (spec.kind != ColumnKind::categorical) {
            continue;
        }
        const auto it = map.columns.find(spec.name);
        if (it == map.columns.end()) {
            throw EncodingError("no encoding fitted for column '" + spec.name + "'");
        }
        pairs[j] = &it->second;
        spec.kind = ColumnKind::numeric;
        spec.categories.clear();
        spec.indicator = true;
        spec.unit = "1 = " + it->second.one;
    }
    Frame out(std::move(schema), frame.label());
    std::vector<double> values(frame.cols());
    std::vector<std::uint8_t> mask(frame.cols());
    for (std::size_t r = 0; r < frame.rows(); ++r) {
        for (std::size_t j = 0; j < frame.cols(); ++j) {
            mask[j] = frame.missing(r, j) ? 1 : 0;
            values[j] = frame.value(r, j);
            if (pairs[j] && !mask[j]) {
                const auto& token = frame.token(r, j);
                if (token == pairs[j]->one) {
                    values[j] = 1.0;
                } else if (token == pairs[j]->zero) {
                    values[j] = 0.0;
                } else {
                    throw EncodingError("column '" + frame.column(j).name + "': unseen token '" + token + "'");
                }
            }
        }
        out.append_row(values, mask);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Min-max scaling

namespace {

void require_numeric(const ColumnSpec& spec, std::string_view stage) {
    if (spec.kind != ColumnKind::numeric) {
        throw SchemaError(std::string(stage) + ": column '" + spec.name + "' is not numeric");
    }
}

} // namespace

MinMaxParams minmax_fit(const Frame& train) {
    MinMaxParams params;
    for (std::size_t j : train.feature_indices()) {
        const auto& spec = train.column(j);
        require_numeric(spec, "minmax");
        double lo = 0.0;
        double hi = 0.0;
        bool any = false;
        for (std::size_t r = 0; r < train.rows(); ++r) {
            if (train.missing(r, j)) {
                continue;
            }
            const double v = train.value(r, j);
            lo = any ? std::min(lo, v) : v;
            hi = any ? std::max(hi, v) : v;
            any = true;
        }
        params.columns.emplace(spec.name, MinMaxParams::Range{lo, hi});
    }
    return params;
}

Frame minmax_apply(const Frame& frame, const MinMaxParams& params) {
    Frame out = frame;
    for (std::size_t j : frame.feature_indices()) {
        const auto& spec = frame.column(j);
        require_numeric(spec, "minmax");
        const auto it = params.columns.find(spec.name);
        if (it == params.columns.end()) {
            throw SchemaError("minmax: no parameters for column '" + spec.name + "'");
        }
        const auto [lo, hi] = it->second;
        const double range = hi - lo;
        for (std::size_t r = 0; r < frame.rows(); ++r) {
            if (!frame.missing(r, j)) {
                out.set_value(r, j, range > 0.0 ? (frame.value(r, j) - lo) / range : 0.0);
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// KNN imputation

std::optional<double> nan_euclidean_sq(std::span<const double> a, std::span<const std::uint8_t> a_mask,
                                       std::span<const double> b, std::span<const std::uint8_t> b_mask) {
    double sum = 0.0;
    std::size_t shared = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a_mask[i] || b_mask[i]) {
            continue;
        }
        const double d = a[i] - b[i];
        sum += d * d;
        ++shared;
    }
    if (shared == 0) {
        return std::nullopt;
    }
    return sum * (static_cast<double>(a.size()) / static_cast<double>(shared));
}

ImputerModel knn_impute_fit(const Frame& train, std::size_t k) {
    if (k < 1) {
        throw ArgumentError("knn imputer needs k >= 1");
    }
    if (k > train.rows()) {
        throw ArgumentError("knn imputer: k = " + std::to_string(k) + " exceeds training rows " +
                            std::to_string(train.rows()));
    }
    ImputerModel model;
    model.k = k;
    const auto features = train.feature_indices();
    for (std::size_t j : features) {
        require_numeric(train.column(j), "impute");
        model.features.push_back(train.column(j).name);
    }
    model.reference = Matrix(train.rows(), features.size());
    model.mask.assign(train.rows() * features.size(), 0);
    model.column_means.assign(features.size(), 0.0);
    std::vector<std::size_t> observed(features.size(), 0);
    for (std::size_t r = 0; r < train.rows(); ++r) {
        for (std::size_t c = 0; c < features.size(); ++c) {
            if (train.missing(r, features[c])) {
                model.mask[r * features.size() + c] = 1;
                continue;
            }
            const double v = train.value(r, features[c]);
            model.reference(r, c) = v;
            model.column_means[c] += v;
            ++observed[c];
        }
    }
    for (std::size_t c = 0; c < features.size(); ++c) {
        model.column_means[c] = observed[c] ? model.column_means[c] / static_cast<double>(observed[c]) : 0.0;
    }
    return model;
}

Frame knn_impute_apply(const Frame& frame, const ImputerModel& model) {
    const auto features = frame.feature_indices();
    // Map each frame feature onto its reference column.
    std::vector<std::size_t> ref_col(features.size());
    for (std::size_t c = 0; c < features.size(); ++c) {
        const auto& name = frame.column(features[c]).name;
        const auto it = std::find(model.features.begin(), model.features.end(), name);
        if (it == model.features.end()) {
            throw SchemaError("impute: column '" + name + "' was not present at fit time");
        }
        ref_col[c] = static_cast<std::size_t>(it - model.features.begin());
    }

    const std::size_t m = features.size();
    const std::size_t n_ref = model.reference.rows();
    const std::size_t width = model.features.size();
    // Reference rows restricted to the frame's columns.
    Matrix ref(n_ref, m);
    std::vector<std::uint8_t> ref_mask(n_ref * m);
    for (std::size_t i = 0; i < n_ref; ++i) {
        for (std::size_t c = 0; c < m; ++c) {
            ref(i, c) = model.reference(i, ref_col[c]);
            ref_mask[i * m + c] = model.mask[i * width + ref_col[c]];
        }
    }

    Frame out = frame;
    std::vector<double> row(m);
    std::vector<std::uint8_t> row_mask(m);
    std::vector<std::pair<double, std::size_t>> dist;
    std::vector<std::pair<double, std::size_t>> donors;
    for (std::size_t r = 0; r < frame.rows(); ++r) {
        bool any_missing = false;
        for (std::size_t c = 0; c < m; ++c) {
            row[c] = frame.value(r, features[c]);
            row_mask[c] = frame.missing(r, features[c]) ? 1 : 0;
            any_missing = any_missing || row_mask[c];
        }
        if (!any_missing) {
            continue;
        }
        dist.clear();
        for (std::size_t i = 0; i < n_ref; ++i) {
            const auto d = nan_euclidean_sq(row, row_mask, ref.row(i), {ref_mask.data() + i * m, m});
            if (d) {
                dist.emplace_back(*d, i);
            }
        }
        for (std::size_t c = 0; c < m; ++c) {
            if (!row_mask[c]) {
                continue;
            }
            donors.clear();
            for (const auto& d : dist) {
                if (!ref_mask[d.second * m + c]) {
                    donors.push_back(d);
                }
            }
            double fill = model.column_means[ref_col[c]];
            if (!donors.empty()) {
                const std::size_t take = std::min(model.k, donors.size());
                std::partial_sort(donors.begin(), donors.begin() + static_cast<std::ptrdiff_t>(take), donors.end());
                double sum = 0.0;
                for (std::size_t t = 0; t < take; ++t) {
                    sum += ref(donors[t].second, c);
                }
                fill = sum / static_cast<double>(take);
            }
            out.set_value(r, features[c], fill);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Standardization

StandardParams standard_fit(const Frame& train) {
    StandardParams params;
    const double n = static_cast<double>(train.rows());
    for (std::size_t j : train.feature_indices()) {
        const auto& spec = train.column(j);
        require_numeric(spec, "standardize");
        double mean = 0.0;
        for (std::size_t r = 0; r < train.rows(); ++r) {
            if (train.missing(r, j)) {
                throw ContractError("standardize: masked cell in column '" + spec.name + "'");
            }
            mean += train.value(r, j);
        }
        mean = train.rows() ? mean / n : 0.0;
        double ss = 0.0;
        for (std::size_t r = 0; r < train.rows(); ++r) {
            const double d = train.value(r, j) - mean;
            ss += d * d;
        }
        params.columns.emplace(spec.name, StandardParams::Moments{mean, train.rows() ? std::sqrt(ss / n) : 0.0});
    }
    return params;
}

Frame standard_apply(const Frame& frame, const StandardParams& params) {
    Frame out = frame;
    for (std::size_t j : frame.feature_indices()) {
        const auto& spec = frame.column(j);
        require_numeric(spec, "standardize");
        const auto it = params.columns.find(spec.name);
        if (it == params.columns.end()) {
            throw SchemaError("standardize: no parameters for column '" + spec.name + "'");
        }
        const auto [mean, sd] = it->second;
        for (std::size_t r = 0; r < frame.rows(); ++r) {
            if (frame.missing(r, j)) {
                throw ContractError("standardize: masked cell in column '" + spec.name + "'");
            }
            out.set_value(r, j, sd > 0.0 ? (frame.value(r, j) - mean) / sd : 0.0);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Pipeline

std::string_view to_string(Stage s) noexcept {
    switch (s) {
    case Stage::project:
        return "project";
    case Stage::encode:
        return "encode";
    case Stage::minmax:
        return "minmax";
    case Stage::impute:
        return "impute";
    case Stage::standardize:
        return "standardize";
    }
    return "unknown";
}

Stage parse_stage(std::string_view s) {
    for (Stage st : {Stage::project, Stage::encode, Stage::minmax, Stage::impute, Stage::standardize}) {
        if (to_string(st) == s) {
            return st;
        }
    }
    throw ArgumentError("unknown pipeline stage '" + std::string(s) + "'");
}

const FittedStage* FittedPipeline::find(Stage s) const noexcept {
    for (const auto& st : stages_) {
        if (st.stage == s) {
            return &st;
        }
    }
    return nullptr;
}

void FittedPipeline::append(FittedStage stage) {
    if (stage.provenance != "train") {
        throw StateError("stage '" + std::string(to_string(stage.stage)) + "' was fitted on '" + stage.provenance +
                         "', not on the training partition");
    }
    if (!stages_.empty() && static_cast<int>(stage.stage) <= static_cast<int>(stages_.back().stage)) {
        throw StateError("stage '" + std::string(to_string(stage.stage)) + "' cannot follow '" +
                         std::string(to_string(stages_.back().stage)) + "'");
    }
    stages_.push_back(std::move(stage));
}

namespace {

Frame apply_stage(const Frame& frame, const FittedStage& stage) {
    if (stage.provenance != "train") {
        throw StateError("refusing to apply a stage fitted on '" + stage.provenance + "'");
    }
    return std::visit(
        [&](const auto& p) -> Frame {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, Projection>) {
                return frame.project(p.features);
            } else if constexpr (std::is_same_v<T, EncoderMap>) {
                return onehot_apply(frame, p);
            } else if constexpr (std::is_same_v<T, MinMaxParams>) {
                return minmax_apply(frame, p);
            } else if constexpr (std::is_same_v<T, ImputerModel>) {
                return knn_impute_apply(frame, p);
            } else {
                return standard_apply(frame, p);
            }
        },
        stage.params);
}

} // namespace

Frame FittedPipeline::apply(const Frame& frame) const {
    if (!fitted()) {
        throw StateError("pipeline applied before it was fitted");
    }
    Frame current = frame;
    for (const auto& stage : stages_) {
        current = apply_stage(current, stage);
    }
    return current;
}

FittedPipeline pipeline_fit(const Frame& train, std::span<const Stage> stages, const PipelineOptions& options) {
    if (stages.empty()) {
        throw ArgumentError("pipeline needs at least one stage");
    }
    FittedPipeline pipeline;
    Frame current = train;
    for (Stage s : stages) {
        FittedStage fitted{s, "train", Projection{}};
        switch (s) {
        case Stage::project:
            fitted.params = Projection{options.projection};
            break;
        case Stage::encode:
            fitted.params = onehot_fit(current);
            break;
        case Stage::minmax:
            fitted.params = minmax_fit(current);
            break;
        case Stage::impute:
            fitted.params = knn_impute_fit(current, options.k_impute);
            break;
        case Stage::standardize:
            fitted.params = standard_fit(current);
            break;
        }
        pipeline.append(fitted);
        current = apply_stage(current, pipeline.stages().back());
    }
    return pipeline;
}

Frame pipeline_apply(const Frame& frame, const FittedPipeline& fitted) {
    return fitted.apply(frame);
}

// ---------------------------------------------------------------------------
// JSON

namespace {

nlohmann::json params_json(const StageParams& params) {
    return std::visit(
        [](const auto& p) -> nlohmann::json {
            using T = std::decay_t<decltype(p)>;
            nlohmann::json j;
            if constexpr (std::is_same_v<T, Projection>) {
                j["features"] = p.features;
            } else if constexpr (std::is_same_v<T, EncoderMap>) {
                for (const auto& [name, pair] : p.columns) {
                    j["columns"][name] = {{"one", pair.one}, {"zero", pair.zero}};
                }
                if (p.columns.empty()) {
                    j["columns"] = nlohmann::json::object();
                }
            } else if constexpr (std::is_same_v<T, MinMaxParams>) {
                j["columns"] = nlohmann::json::object();
                for (const auto& [name, range] : p.columns) {
                    j["columns"][name] = {{"min", range.min}, {"max", range.max}};
                }
            } else if constexpr (std::is_same_v<T, ImputerModel>) {
                j["k"] = p.k;
                j["weighting"] = "uniform";
                j["features"] = p.features;
                j["column_means"] = p.column_means;
                j["rows"] = p.reference.rows();
                j["reference"] = p.reference.data();
                j["mask"] = p.mask;
            } else {
                j["columns"] = nlohmann::json::object();
                for (const auto& [name, m] : p.columns) {
                    j["columns"][name] = {{"mean", m.mean}, {"sd", m.sd}};
                }
            }
            return j;
        },
        params);
}

StageParams params_from_json(Stage stage, const nlohmann::json& j) {
    switch (stage) {
    case Stage::project:
        return Projection{j.at("features").get<std::vector<std::string>>()};
    case Stage::encode: {
        EncoderMap m;
        for (const auto& [name, pair] : j.at("columns").items()) {
            m.columns.emplace(name, EncoderMap::Pair{pair.at("one"), pair.at("zero")});
        }
        return m;
    }
    case Stage::minmax: {
        MinMaxParams m;
        for (const auto& [name, range] : j.at("columns").items()) {
            m.columns.emplace(name, MinMaxParams::Range{range.at("min"), range.at("max")});
        }
        return m;
    }
    case Stage::impute: {
        ImputerModel m;
        m.k = j.at("k");
        m.features = j.at("features").get<std::vector<std::string>>();
        m.column_means = j.at("column_means").get<std::vector<double>>();
        const std::size_t rows = j.at("rows");
        m.reference = Matrix(rows, m.features.size());
        m.reference.data() = j.at("reference").get<std::vector<double>>();
        m.mask = j.at("mask").get<std::vector<std::uint8_t>>();
        if (m.reference.data().size() != rows * m.features.size() || m.mask.size() != m.reference.data().size()) {
            throw SchemaError("impute stage: reference matrix has the wrong size");
        }
        return m;
    }
    case Stage::standardize: {
        StandardParams m;
        for (const auto& [name, mo] : j.at("columns").items()) {
            m.columns.emplace(name, StandardParams::Moments{mo.at("mean"), mo.at("sd")});
        }
        return m;
    }
    }
    throw SchemaError("unknown stage");
}

} // namespace

nlohmann::json to_json(const FittedPipeline& p) {
    nlohmann::json j;
    j["version"] = pipeline_format_version;
    j["stages"] = nlohmann::json::array();
    for (const auto& st : p.stages()) {
        j["stages"].push_back({{"stage", to_string(st.stage)},
                               {"provenance", st.provenance},
                               {"params", params_json(st.params)}});
    }
    return j;
}

FittedPipeline pipeline_from_json(const nlohmann::json& j) {
    if (j.at("version").get<int>() != pipeline_format_version) {
        throw SchemaError("unsupported pipeline format version " + j.at("version").dump());
    }
    FittedPipeline p;
    for (const auto& st : j.at("stages")) {
        const auto stage = parse_stage(st.at("stage").get<std::string>());
        p.append(FittedStage{stage, st.at("provenance").get<std::string>(), params_from_json(stage, st.at("params"))});
    }
    return p;
}

} // namespace ckdpipe
