#include <ckdpipe/resample.hpp>

#include <ckdpipe/error.hpp>
#include <ckdpipe/parallel.hpp>
#include <ckdpipe/random.hpp>

#include "json_util.hpp"
#include "neighbors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ckdpipe {

std::string_view to_string(LofMode m) noexcept {
    return m == LofMode::threshold ? "threshold" : "contamination";
}

LofMode parse_lof_mode(std::string_view s) {
    if (s == "threshold" || s == "auto") {
        return LofMode::threshold;
    }
    if (s == "contamination") {
        return LofMode::contamination;
    }
    throw ArgumentError("unknown LOF mode '" + std::string(s) + "' (expected threshold or contamination)");
}

std::vector<double> lof_scores(const Matrix& x, std::size_t k) {
    const std::size_t n = x.rows();
    if (k < 1 || k >= n) {
        throw ArgumentError("LOF needs 1 <= k < rows (k = " + std::to_string(k) + ", rows = " + std::to_string(n) +
                            ")");
    }
    const auto all = detail::iota_indices(n);
    std::vector<std::vector<detail::Neighbor>> nn(n);
    parallel_for(n, [&](std::size_t i) { nn[i] = detail::k_nearest(x, all, x.row(i), k, i); });

    std::vector<double> k_distance(n);
    for (std::size_t i = 0; i < n; ++i) {
        k_distance[i] = std::sqrt(nn[i].back().dist2);
    }
    std::vector<double> lrd(n);
    for (std::size_t i = 0; i < n; ++i) {
        double sum = 0.0;
        for (const auto& o : nn[i]) {
            sum += std::max(k_distance[o.index], std::sqrt(o.dist2));
        }
        lrd[i] = 1.0 / std::max(sum / static_cast<double>(k), lof_density_floor);
    }
    std::vector<double> scores(n);
    for (std::size_t i = 0; i < n; ++i) {
        double sum = 0.0;
        for (const auto& o : nn[i]) {
            sum += lrd[o.index];
        }
        scores[i] = sum / static_cast<double>(k) / lrd[i];
    }
    return scores;
}

namespace {

Matrix feature_matrix(const Frame& frame, std::string_view stage) {
    const auto features = frame.feature_indices();
    Matrix x(frame.rows(), features.size());
    for (std::size_t r = 0; r < frame.rows(); ++r) {
        for (std::size_t c = 0; c < features.size(); ++c) {
            if (frame.missing(r, features[c])) {
                throw ContractError(std::string(stage) + ": masked cell in column '" +
                                    frame.column(features[c]).name + "'");
            }
            if (frame.column(features[c]).kind != ColumnKind::numeric) {
                throw ContractError(std::string(stage) + ": column '" + frame.column(features[c]).name +
                                    "' is not numeric");
            }
            x(r, c) = frame.value(r, features[c]);
        }
    }
    return x;
}

} // namespace

OutlierResult detect_outliers(const Frame& train, const LofConfig& cfg) {
    if (train.rows() < cfg.k + 1) {
        throw ArgumentError("LOF needs at least k + 1 = " + std::to_string(cfg.k + 1) + " rows, got " +
                            std::to_string(train.rows()));
    }
    OutlierResult result;
    result.scores = lof_scores(feature_matrix(train, "lof"), cfg.k);
    const std::size_t n = train.rows();
    std::vector<std::uint8_t> flagged(n, 0);
    if (cfg.mode == LofMode::threshold) {
        for (std::size_t i = 0; i < n; ++i) {
            flagged[i] = result.scores[i] > cfg.threshold ? 1 : 0;
        }
    } else {
        if (!(cfg.contamination >= 0.0 && cfg.contamination <= 0.5)) {
            throw ArgumentError("LOF contamination must lie in [0, 0.5]");
        }
        auto order = detail::iota_indices(n);
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return result.scores[a] > result.scores[b]; });
        const auto count = static_cast<std::size_t>(std::llround(cfg.contamination * static_cast<double>(n)));
        for (std::size_t t = 0; t < count; ++t) {
            flagged[order[t]] = 1;
        }
    }
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < n; ++i) {
        (flagged[i] ? result.removed : keep).push_back(i);
    }
    result.frame = train.select_rows(keep);
    return result;
}

Frame remove_outliers(const Frame& train, const LofConfig& cfg) {
    return detect_outliers(train, cfg).frame;
}

SmoteResult smote_balance(const Frame& train, const SmoteConfig& cfg) {
    if (cfg.k < 1) {
        throw ArgumentError("SMOTE needs k >= 1");
    }
    const auto counts = class_counts(train);
    if (counts.size() != 2 || counts[0] == 0 || counts[1] == 0) {
        throw ArgumentError("SMOTE needs two classes with at least one row each");
    }
    SmoteResult result;
    result.frame = train;
    result.k_used = cfg.k;
    if (counts[0] == counts[1]) {
        return result;
    }
    const std::size_t minority_class = counts[0] < counts[1] ? 0 : 1;
    const std::size_t n_min = counts[minority_class];
    const std::size_t n_maj = counts[1 - minority_class];
    if (n_min < 2) {
        throw ArgumentError("SMOTE needs at least two minority rows");
    }
    if (n_min <= cfg.k) {
        result.k_used = n_min - 1;
        result.warnings.push_back("SMOTE: minority class has " + std::to_string(n_min) + " rows; k reduced from " +
                                  std::to_string(cfg.k) + " to " + std::to_string(result.k_used));
    }

    const Matrix x = feature_matrix(train, "smote");
    const std::size_t label = train.label_index();
    std::vector<std::size_t> minority;
    for (std::size_t r = 0; r < train.rows(); ++r) {
        if (static_cast<std::size_t>(train.value(r, label)) == minority_class) {
            minority.push_back(r);
        }
    }
    std::vector<std::vector<detail::Neighbor>> nn(minority.size());
    parallel_for(minority.size(), [&](std::size_t i) {
        nn[i] = detail::k_nearest(x, minority, x.row(minority[i]), result.k_used, minority[i]);
    });

    result.synthetic = n_maj - n_min;
    const auto features = train.feature_indices();
    std::vector<std::vector<double>> rows(result.synthetic, std::vector<double>(train.cols(), 0.0));
    parallel_for(result.synthetic, [&](std::size_t s) {
        Rng rng(derive_seed(cfg.seed, s));
        const std::size_t base = rng.below(minority.size());
        const std::size_t other = nn[base][rng.below(nn[base].size())].index;
        const double delta = rng.uniform();
        auto& row = rows[s];
        const auto a = x.row(minority[base]);
        const auto b = x.row(other);
        for (std::size_t c = 0; c < features.size(); ++c) {
            row[features[c]] = a[c] + delta * (b[c] - a[c]);
        }
        row[label] = static_cast<double>(minority_class);
    });
    const std::vector<std::uint8_t> no_mask(train.cols(), 0);
    for (const auto& row : rows) {
        result.frame.append_row(row, no_mask);
    }
    return result;
}

Frame smote(const Frame& train, const SmoteConfig& cfg) {
    return smote_balance(train, cfg).frame;
}

void to_json(nlohmann::json& j, const LofConfig& c) {
    j = {{"k", c.k}, {"mode", to_string(c.mode)}, {"threshold", c.threshold}, {"contamination", c.contamination}};
}

void from_json(const nlohmann::json& j, LofConfig& c) {
    detail::require_keys(j, "lof", {"k", "mode", "threshold", "contamination"});
    detail::read_optional(j, "k", c.k);
    if (const auto it = j.find("mode"); it != j.end()) {
        c.mode = parse_lof_mode(it->get<std::string>());
    }
    detail::read_optional(j, "threshold", c.threshold);
    detail::read_optional(j, "contamination", c.contamination);
}

void to_json(nlohmann::json& j, const SmoteConfig& c) {
    j = {{"k", c.k}, {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, SmoteConfig& c) {
    detail::require_keys(j, "smote", {"k", "seed"});
    detail::read_optional(j, "k", c.k);
    detail::read_optional(j, "seed", c.seed);
}

} // namespace ckdpipe
