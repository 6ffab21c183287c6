#include <ckdpipe/feature_select.hpp>

#include <ckdpipe/error.hpp>
#include <ckdpipe/evaluate.hpp>
#include <ckdpipe/parallel.hpp>
#include <ckdpipe/random.hpp>

#include "json_util.hpp"

#include <boost/math/special_functions/digamma.hpp>
#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ckdpipe {

double ScoreTable::at(std::string_view feature) const {
    const auto it = std::find(features.begin(), features.end(), feature);
    if (it == features.end()) {
        throw SchemaError(scorer + ": no score for feature '" + std::string(feature) + "'");
    }
    return scores[static_cast<std::size_t>(it - features.begin())];
}

namespace {

void check_shape(const Matrix& x, std::span<const int> y, std::span<const std::string> features) {
    if (x.rows() != y.size() || x.cols() != features.size()) {
        throw ArgumentError("feature scorer: matrix, labels and feature names disagree in size");
    }
}

std::array<std::size_t, 2> label_counts(std::span<const int> y) {
    std::array<std::size_t, 2> c{};
    for (int v : y) {
        ++c[v == 1 ? 1 : 0];
    }
    return c;
}

double digamma(double v) {
    return boost::math::digamma(v);
}

double mi_continuous(std::span<const double> x, std::span<const int> y, std::size_t k) {
    const std::size_t n = x.size();
    const auto counts = label_counts(y);
    std::vector<double> radius(n);
    std::vector<double> dist;
    double sum_k = 0.0;
    double sum_n = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const int c = y[i];
        const std::size_t kc = std::min(k, counts[c == 1 ? 1 : 0] - 1);
        dist.clear();
        for (std::size_t j = 0; j < n; ++j) {
            if (j != i && y[j] == c) {
                dist.push_back(std::abs(x[j] - x[i]));
            }
        }
        std::nth_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(kc - 1), dist.end());
        radius[i] = std::nextafter(dist[kc - 1], 0.0);
        sum_k += digamma(static_cast<double>(kc));
        sum_n += digamma(static_cast<double>(counts[c == 1 ? 1 : 0]));
    }
    double sum_m = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t m = 0;
        for (std::size_t j = 0; j < n; ++j) {
            if (std::abs(x[j] - x[i]) <= radius[i]) {
                ++m;
            }
        }
        sum_m += digamma(static_cast<double>(m));
    }
    const double dn = static_cast<double>(n);
    return std::max(0.0, digamma(dn) + (sum_k - sum_n - sum_m) / dn);
}

double mi_plugin(std::span<const double> x, std::span<const int> y) {
    double joint[2][2] = {{0, 0}, {0, 0}};
    for (std::size_t i = 0; i < x.size(); ++i) {
        joint[x[i] >= 0.5 ? 1 : 0][y[i] == 1 ? 1 : 0] += 1.0;
    }
    const double n = static_cast<double>(x.size());
    double mi = 0.0;
    for (int a = 0; a < 2; ++a) {
        for (int b = 0; b < 2; ++b) {
            if (joint[a][b] > 0.0) {
                const double pa = joint[a][0] + joint[a][1];
                const double pb = joint[0][b] + joint[1][b];
                mi += joint[a][b] / n * std::log(n * joint[a][b] / (pa * pb));
            }
        }
    }
    return std::max(0.0, mi);
}

} // namespace

ScoreTable chi2_scores(const Matrix& x, std::span<const int> y, std::span<const std::string> features) {
    check_shape(x, y, features);
    for (double v : x.data()) {
        if (v < 0.0) {
            throw ArgumentError("chi2: input contains a negative value");
        }
    }
    const auto counts = label_counts(y);
    const double n = static_cast<double>(y.size());
    ScoreTable t{"chi2", {}, {features.begin(), features.end()}, std::vector<double>(x.cols(), 0.0)};
    for (std::size_t f = 0; f < x.cols(); ++f) {
        double observed[2] = {0.0, 0.0};
        for (std::size_t i = 0; i < x.rows(); ++i) {
            observed[y[i] == 1 ? 1 : 0] += x(i, f);
        }
        const double total = observed[0] + observed[1];
        double stat = 0.0;
        for (int c = 0; c < 2; ++c) {
            const double expected = total * static_cast<double>(counts[c]) / n;
            if (expected > 0.0) {
                const double d = observed[c] - expected;
                stat += d * d / expected;
            }
        }
        t.scores[f] = stat;
    }
    return t;
}

ScoreTable mi_scores(const Matrix& x, std::span<const int> y, std::span<const std::string> features,
                     std::span<const bool> discrete, std::size_t k, std::uint64_t seed) {
    check_shape(x, y, features);
    if (!discrete.empty() && discrete.size() != x.cols()) {
        throw ArgumentError("mi: discrete flags do not match the number of features");
    }
    const auto counts = label_counts(y);
    if (k < 1 || k >= std::min(counts[0], counts[1])) {
        throw ArgumentError("mi: k = " + std::to_string(k) + " must be in [1, smaller class count)");
    }
    ScoreTable t{"mi", {{"n_neighbors", k}}, {features.begin(), features.end()}, std::vector<double>(x.cols(), 0.0)};
    parallel_for(x.cols(), [&](std::size_t f) {
        auto col = x.column(f);
        if (!discrete.empty() && discrete[f]) {
            t.scores[f] = mi_plugin(col, y);
            return;
        }
        // Unit variance, then a tiny jitter so tied values do not give a zero k-th distance.
        const double n = static_cast<double>(col.size());
        const double mean = std::accumulate(col.begin(), col.end(), 0.0) / n;
        double var = 0.0;
        for (double v : col) {
            var += (v - mean) * (v - mean);
        }
        const double sd = std::sqrt(var / n);
        double abs_mean = 0.0;
        for (double& v : col) {
            v = sd > 0.0 ? v / sd : v;
            abs_mean += std::abs(v);
        }
        const double noise = 1e-10 * std::max(1.0, abs_mean / n);
        Rng rng(derive_seed(seed, f));
        for (double& v : col) {
            v += noise * rng.normal();
        }
        t.scores[f] = mi_continuous(col, y, k);
    });
    return t;
}

FeatureSet top_fraction(const ScoreTable& scores, double fraction) {
    if (scores.features.empty()) {
        throw ArgumentError("top_fraction: empty score table");
    }
    if (!(fraction > 0.0 && fraction <= 1.0)) {
        throw ArgumentError("top_fraction: fraction must lie in (0, 1]");
    }
    std::vector<std::size_t> order(scores.features.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (scores.scores[a] != scores.scores[b]) {
            return scores.scores[a] > scores.scores[b];
        }
        return scores.features[a] < scores.features[b];
    });
    // The small epsilon keeps 0.7 * 10 at 7 instead of 8 after rounding error.
    const auto keep = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(order.size()) - 1e-9));
    FeatureSet out;
    for (std::size_t i = 0; i < keep; ++i) {
        out.insert(scores.features[order[i]]);
    }
    return out;
}

std::string_view to_string(RfeEstimator e) noexcept {
    switch (e) {
    case RfeEstimator::gboost:
        return "gboost";
    case RfeEstimator::rforest:
        return "rforest";
    case RfeEstimator::logistic:
        return "logistic";
    }
    return "unknown";
}

Algorithm algorithm_of(RfeEstimator e) noexcept {
    switch (e) {
    case RfeEstimator::gboost:
        return Algorithm::gboost;
    case RfeEstimator::rforest:
        return Algorithm::rforest;
    case RfeEstimator::logistic:
        return Algorithm::logistic;
    }
    return Algorithm::logistic;
}

namespace {

/// Index into `cols` of the column with the smallest importance; ties to the first.
std::size_t weakest(const std::vector<double>& importances) {
    return static_cast<std::size_t>(std::min_element(importances.begin(), importances.end()) - importances.begin());
}

} // namespace

RfecvResult rfecv(const Matrix& x, std::span<const int> y, std::span<const std::string> features,
                  RfeEstimator estimator, const Hyperparameters& hp, std::size_t folds, std::uint64_t seed) {
    check_shape(x, y, features);
    const std::size_t m = x.cols();
    if (m < 1) {
        throw ArgumentError("rfecv: needs at least one feature");
    }
    ModelSpec spec{algorithm_of(estimator), hp, 0};
    RfecvResult result;
    result.mean_accuracy.assign(m, 0.0);
    if (m > 1) {
        const auto fold_sets = stratified_folds(y, folds, derive_seed(seed, 0));
        std::vector<std::vector<double>> acc(folds, std::vector<double>(m, 0.0));
        parallel_for(folds, [&](std::size_t f) {
            std::vector<std::size_t> train_rows;
            for (std::size_t g = 0; g < folds; ++g) {
                if (g != f) {
                    train_rows.insert(train_rows.end(), fold_sets[g].begin(), fold_sets[g].end());
                }
            }
            std::sort(train_rows.begin(), train_rows.end());
            const auto& val_rows = fold_sets[f];
            const Matrix x_train = x.select_rows(train_rows);
            const Matrix x_val = x.select_rows(val_rows);
            std::vector<int> y_train;
            std::vector<int> y_val;
            for (std::size_t i : train_rows) {
                y_train.push_back(y[i]);
            }
            for (std::size_t i : val_rows) {
                y_val.push_back(y[i]);
            }
            std::vector<std::size_t> cols = [&] {
                std::vector<std::size_t> c(m);
                std::iota(c.begin(), c.end(), 0);
                return c;
            }();
            while (true) {
                ModelSpec s = spec;
                s.seed = derive_seed(seed, 1 + f, cols.size());
                const auto model = train(s, x_train.select_columns(cols), y_train);
                acc[f][cols.size() - 1] =
                    accuracy(confusion(y_val, predict(model, x_val.select_columns(cols))));
                if (cols.size() == 1) {
                    break;
                }
                cols.erase(cols.begin() + static_cast<std::ptrdiff_t>(weakest(model.importances)));
            }
        });
        for (std::size_t c = 0; c < m; ++c) {
            double sum = 0.0;
            for (std::size_t f = 0; f < folds; ++f) {
                sum += acc[f][c];
            }
            result.mean_accuracy[c] = sum / static_cast<double>(folds);
        }
    }
    result.best_count = 1;
    for (std::size_t c = 2; c <= m; ++c) {
        if (result.mean_accuracy[c - 1] > result.mean_accuracy[result.best_count - 1]) {
            result.best_count = c;
        }
    }
    std::vector<std::size_t> cols(m);
    std::iota(cols.begin(), cols.end(), 0);
    while (cols.size() > result.best_count) {
        ModelSpec s = spec;
        s.seed = derive_seed(seed, 0, cols.size());
        const auto model = train(s, x.select_columns(cols), y);
        const std::size_t drop = weakest(model.importances);
        result.elimination_order.push_back(features[cols[drop]]);
        cols.erase(cols.begin() + static_cast<std::ptrdiff_t>(drop));
    }
    for (std::size_t c : cols) {
        result.selected.insert(features[c]);
    }
    return result;
}

ImportanceResult importance_select(const Matrix& x, std::span<const int> y, std::span<const std::string> features,
                                   Algorithm model, const Hyperparameters& hp, std::size_t repeats,
                                   std::uint64_t seed) {
    check_shape(x, y, features);
    if (model != Algorithm::rforest && model != Algorithm::dtree) {
        throw ArgumentError("importance_select: model must be rforest or dtree");
    }
    if (repeats < 1) {
        throw ArgumentError("importance_select: repeats must be at least 1");
    }
    ImportanceResult r;
    r.mean_importance.assign(x.cols(), 0.0);
    for (std::size_t rep = 0; rep < repeats; ++rep) {
        const auto fitted = train(ModelSpec{model, hp, derive_seed(seed, rep)}, x, y);
        for (std::size_t f = 0; f < x.cols(); ++f) {
            r.mean_importance[f] += fitted.importances[f];
        }
    }
    for (double& v : r.mean_importance) {
        v /= static_cast<double>(repeats);
    }
    const double total = std::accumulate(r.mean_importance.begin(), r.mean_importance.end(), 0.0);
    const double cut = total / static_cast<double>(x.cols());
    for (std::size_t f = 0; f < x.cols(); ++f) {
        if (r.mean_importance[f] >= cut) {
            r.selected.insert(features[f]);
        }
    }
    return r;
}

Matrix pearson_matrix(const Matrix& x) {
    const std::size_t n = x.rows();
    const std::size_t m = x.cols();
    std::vector<std::vector<double>> centered(m);
    std::vector<double> norm(m, 0.0);
    for (std::size_t f = 0; f < m; ++f) {
        centered[f] = x.column(f);
        const double mean = std::accumulate(centered[f].begin(), centered[f].end(), 0.0) / static_cast<double>(n);
        for (double& v : centered[f]) {
            v -= mean;
            norm[f] += v * v;
        }
        norm[f] = std::sqrt(norm[f]);
    }
    Matrix r(m, m, 0.0);
    for (std::size_t a = 0; a < m; ++a) {
        r(a, a) = 1.0;
        for (std::size_t b = a + 1; b < m; ++b) {
            double v = 0.0;
            if (norm[a] > 0.0 && norm[b] > 0.0) {
                for (std::size_t i = 0; i < n; ++i) {
                    v += centered[a][i] * centered[b][i];
                }
                v = std::clamp(v / (norm[a] * norm[b]), -1.0, 1.0);
            }
            r(a, b) = v;
            r(b, a) = v;
        }
    }
    return r;
}

FeatureSet high_corr_set(const Matrix& corr, const ScoreTable& chi2, double threshold) {
    if (!(threshold > 0.0 && threshold <= 1.0)) {
        throw ArgumentError("high_corr_set: threshold must lie in (0, 1]");
    }
    const std::size_t m = chi2.features.size();
    if (corr.rows() != m || corr.cols() != m) {
        throw ArgumentError("high_corr_set: correlation matrix does not match the score table");
    }
    FeatureSet out;
    for (std::size_t a = 0; a < m; ++a) {
        for (std::size_t b = a + 1; b < m; ++b) {
            if (std::abs(corr(a, b)) < threshold) {
                continue;
            }
            const auto& fa = chi2.features[a];
            const auto& fb = chi2.features[b];
            const double sa = chi2.scores[a];
            const double sb = chi2.scores[b];
            if (sa != sb) {
                out.insert(sa < sb ? fa : fb);
            } else {
                out.insert(std::max(fa, fb));
            }
        }
    }
    return out;
}

std::vector<CorrelatedPair> correlated_pairs(const Matrix& corr, std::span<const std::string> features,
                                             double threshold) {
    std::vector<CorrelatedPair> out;
    for (std::size_t a = 0; a < features.size(); ++a) {
        for (std::size_t b = a + 1; b < features.size(); ++b) {
            if (std::abs(corr(a, b)) >= threshold) {
                out.push_back({features[a], features[b], corr(a, b)});
            }
        }
    }
    std::stable_sort(out.begin(), out.end(),
                     [](const CorrelatedPair& p, const CorrelatedPair& q) { return std::abs(p.r) > std::abs(q.r); });
    return out;
}

namespace {

FeatureSet intersect(const FeatureSet& a, const FeatureSet& b) {
    FeatureSet out;
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::inserter(out, out.end()));
    return out;
}

FeatureSet unite(const FeatureSet& a, const FeatureSet& b) {
    FeatureSet out;
    std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::inserter(out, out.end()));
    return out;
}

FeatureSet minus(const FeatureSet& a, const FeatureSet& b) {
    FeatureSet out;
    std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::inserter(out, out.end()));
    return out;
}

FeatureSet pairwise_union(const FeatureSet& a, const FeatureSet& b, const FeatureSet& c) {
    return unite(unite(intersect(a, b), intersect(a, c)), intersect(b, c));
}

} // namespace

const FeatureSet& SelectionReport::set(std::string_view name) const {
    const auto it = sets.find(std::string(name));
    if (it == sets.end()) {
        throw SchemaError("selection report has no set '" + std::string(name) + "'");
    }
    return it->second;
}

SelectionReport assemble_sets(const FeatureSet& chi2, const FeatureSet& mi, const FeatureSet& rg,
                              const FeatureSet& rr, const FeatureSet& rl, const FeatureSet& rf,
                              const FeatureSet& dt, const FeatureSet& s_cor) {
    SelectionReport r;
    const auto s_w = intersect(chi2, mi);
    const auto s_f = pairwise_union(rg, rr, rl);
    const auto s_e = intersect(rf, dt);
    r.sets = {
        {"chi2", chi2},
        {"mi", mi},
        {"r_g", rg},
        {"r_r", rr},
        {"r_l", rl},
        {"rf", rf},
        {"dt", dt},
        {"s_w", s_w},
        {"s_f", s_f},
        {"s_e", s_e},
        {"s_cor", s_cor},
        {"f1", minus(unite(unite(s_w, s_f), s_e), s_cor)},
        {"f2", minus(pairwise_union(s_w, s_f, s_e), s_cor)},
        {"f3", minus(intersect(intersect(s_w, s_f), s_e), s_cor)},
    };
    return r;
}

void to_json(nlohmann::json& j, const SelectionConfig& c) {
    j = {{"top_fraction", c.top_fraction},
         {"mi_neighbors", c.mi_neighbors},
         {"rfe_folds", c.rfe_folds},
         {"importance_repeats", c.importance_repeats},
         {"corr_threshold", c.corr_threshold},
         {"corr_report_threshold", c.corr_report_threshold}};
}

void from_json(const nlohmann::json& j, SelectionConfig& c) {
    detail::require_keys(j, "selection",
                         {"top_fraction", "mi_neighbors", "rfe_folds", "importance_repeats", "corr_threshold",
                          "corr_report_threshold"});
    detail::read_optional(j, "top_fraction", c.top_fraction);
    detail::read_optional(j, "mi_neighbors", c.mi_neighbors);
    detail::read_optional(j, "rfe_folds", c.rfe_folds);
    detail::read_optional(j, "importance_repeats", c.importance_repeats);
    detail::read_optional(j, "corr_threshold", c.corr_threshold);
    detail::read_optional(j, "corr_report_threshold", c.corr_report_threshold);
}

SelectionReport hybrid_select(const LabeledMatrix& data, std::span<const bool> discrete, const SelectionConfig& cfg,
                              const Hyperparameters& hp, std::uint64_t seed) {
    const auto& x = data.x;
    const auto& y = data.y;
    const auto& names = data.features;
    const auto chi2 = chi2_scores(x, y, names);
    const auto mi = mi_scores(x, y, names, discrete, cfg.mi_neighbors, derive_seed(seed, stream::mutual_info));

    std::map<std::string, RfecvResult> wrappers;
    for (auto [id, est] : {std::pair{1, RfeEstimator::gboost}, std::pair{2, RfeEstimator::rforest},
                           std::pair{3, RfeEstimator::logistic}}) {
        wrappers.emplace(std::string(to_string(est)),
                         rfecv(x, y, names, est, hp, cfg.rfe_folds, derive_seed(seed, id)));
    }
    Hyperparameters tree_hp = hp;
    tree_hp.dtree_criterion = Criterion::entropy;
    auto rf = importance_select(x, y, names, Algorithm::rforest, hp, cfg.importance_repeats, derive_seed(seed, 4));
    auto dt = importance_select(x, y, names, Algorithm::dtree, tree_hp, cfg.importance_repeats, derive_seed(seed, 5));

    const Matrix corr = pearson_matrix(x);
    const auto s_cor = high_corr_set(corr, chi2, cfg.corr_threshold);

    auto report = assemble_sets(top_fraction(chi2, cfg.top_fraction), top_fraction(mi, cfg.top_fraction),
                                wrappers.at("gboost").selected, wrappers.at("rforest").selected,
                                wrappers.at("logistic").selected, rf.selected, dt.selected, s_cor);
    report.score_tables = {chi2, mi};
    report.rfecv = std::move(wrappers);
    report.importance = {{"rforest", std::move(rf)}, {"dtree", std::move(dt)}};
    report.correlated = correlated_pairs(corr, names, cfg.corr_report_threshold);
    report.seed = seed;
    report.parameters = cfg;
    report.parameters["rfe_estimators"] = {
        {"gboost", {{"stages", hp.gb_stages}, {"learning_rate", hp.gb_learning_rate}, {"max_depth", hp.gb_max_depth}}},
        {"rforest", {{"trees", hp.rf_trees}}},
        {"logistic", {{"c", hp.lr_c}, {"max_iter", hp.lr_max_iter}}},
    };
    report.parameters["importance_models"] = {{"rforest", {{"trees", hp.rf_trees}, {"criterion", "gini"}}},
                                              {"dtree", {{"criterion", "entropy"}}}};
    report.parameters["rfe_step"] = 1;
    report.parameters["importance_threshold"] = "mean";
    report.parameters["s_cor_rule"] = "drop lower chi2";
    return report;
}

void to_json(nlohmann::json& j, const ScoreTable& t) {
    j = {{"scorer", t.scorer}, {"parameters", t.parameters}, {"features", t.features}, {"scores", t.scores}};
}

void from_json(const nlohmann::json& j, ScoreTable& t) {
    j.at("scorer").get_to(t.scorer);
    t.parameters = j.at("parameters");
    j.at("features").get_to(t.features);
    j.at("scores").get_to(t.scores);
}

void to_json(nlohmann::json& j, const SelectionReport& r) {
    j = nlohmann::json::object();
    for (const auto& [name, set] : r.sets) {
        j["sets"][name] = set;
    }
    j["score_tables"] = r.score_tables;
    for (const auto& [name, res] : r.rfecv) {
        j["rfecv"][name] = {{"selected", res.selected},
                            {"mean_accuracy", res.mean_accuracy},
                            {"best_count", res.best_count},
                            {"elimination_order", res.elimination_order}};
    }
    for (const auto& [name, res] : r.importance) {
        j["importance"][name] = {{"selected", res.selected}, {"mean_importance", res.mean_importance}};
    }
    j["correlated"] = nlohmann::json::array();
    for (const auto& p : r.correlated) {
        j["correlated"].push_back({{"a", p.a}, {"b", p.b}, {"r", p.r}});
    }
    j["seed"] = r.seed;
    j["parameters"] = r.parameters;
}

void from_json(const nlohmann::json& j, SelectionReport& r) {
    r = SelectionReport{};
    for (const auto& [name, set] : j.at("sets").items()) {
        r.sets[name] = set.get<FeatureSet>();
    }
    j.at("score_tables").get_to(r.score_tables);
    if (j.contains("rfecv")) {
        for (const auto& [name, v] : j.at("rfecv").items()) {
            r.rfecv[name] = RfecvResult{v.at("selected").get<FeatureSet>(), v.at("mean_accuracy"),
                                        v.at("best_count"), v.at("elimination_order")};
        }
    }
    if (j.contains("importance")) {
        for (const auto& [name, v] : j.at("importance").items()) {
            r.importance[name] = ImportanceResult{v.at("selected").get<FeatureSet>(), v.at("mean_importance")};
        }
    }
    for (const auto& p : j.at("correlated")) {
        r.correlated.push_back({p.at("a"), p.at("b"), p.at("r")});
    }
    j.at("seed").get_to(r.seed);
    r.parameters = j.at("parameters");
}

std::string selection_markdown(const SelectionReport& r) {
    std::string out = "| Feature | Feature | Pearson r |\n|---|---|---:|\n";
    for (const auto& p : r.correlated) {
        out += fmt::format("| {} | {} | {:.2f} |\n", p.a, p.b, p.r);
    }
    out += "\n| Set | Size | Features |\n|---|---:|---|\n";
    for (const auto name : selection_set_names) {
        const auto it = r.sets.find(std::string(name));
        if (it == r.sets.end()) {
            continue;
        }
        out += fmt::format("| {} | {} | {} |\n", name, it->second.size(), fmt::join(it->second, ", "));
    }
    return out;
}

} // namespace ckdpipe
