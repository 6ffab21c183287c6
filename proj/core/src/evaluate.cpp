#include <ckdpipe/evaluate.hpp>

#include <ckdpipe/error.hpp>
#include <ckdpipe/parallel.hpp>
#include <ckdpipe/random.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ckdpipe {

ConfusionCounts confusion(std::span<const int> y_true, std::span<const int> y_pred) {
    if (y_true.size() != y_pred.size()) {
        throw ArgumentError("confusion: " + std::to_string(y_true.size()) + " labels vs " +
                            std::to_string(y_pred.size()) + " predictions");
    }
    ConfusionCounts c;
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        const bool t = y_true[i] == 1;
        const bool p = y_pred[i] == 1;
        if (t && p) {
            ++c.tp;
        } else if (t) {
            ++c.fn;
        } else if (p) {
            ++c.fp;
        } else {
            ++c.tn;
        }
    }
    return c;
}

double accuracy(const ConfusionCounts& c) {
    if (c.total() == 0) {
        throw MetricError("accuracy of an empty confusion table");
    }
    return static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
}

namespace {

double f1_of(std::size_t tp, std::size_t fp, std::size_t fn) {
    const double ppv = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
    const double tpr = tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
    return ppv + tpr > 0.0 ? 2.0 * ppv * tpr / (ppv + tpr) : 0.0;
}

} // namespace

double f1_macro(const ConfusionCounts& c) {
    return (f1_of(c.tp, c.fp, c.fn) + f1_of(c.tn, c.fn, c.fp)) / 2.0;
}

double f1_macro(std::span<const int> y_true, std::span<const int> y_pred) {
    return f1_macro(confusion(y_true, y_pred));
}

double auc(std::span<const int> y_true, std::span<const double> scores) {
    if (y_true.size() != scores.size()) {
        throw ArgumentError("auc: label and score lengths differ");
    }
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    for (double s : scores) {
        if (!std::isfinite(s)) {
            throw MetricError("auc: non-finite score");
        }
    }
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    // Twice the Mann-Whitney U statistic, kept integral.
    std::uint64_t twice_u = 0;
    std::uint64_t neg_below = 0;
    std::uint64_t n_pos = 0;
    std::uint64_t n_neg = 0;
    for (std::size_t g = 0; g < order.size();) {
        std::size_t end = g;
        std::uint64_t pos = 0;
        std::uint64_t neg = 0;
        while (end < order.size() && scores[order[end]] == scores[order[g]]) {
            (y_true[order[end]] == 1 ? pos : neg) += 1;
            ++end;
        }
        twice_u += pos * (2 * neg_below + neg);
        neg_below += neg;
        n_pos += pos;
        n_neg += neg;
        g = end;
    }
    if (n_pos == 0 || n_neg == 0) {
        throw MetricError("auc is undefined unless both classes are present");
    }
    return static_cast<double>(twice_u) / (2.0 * static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

std::vector<std::vector<std::size_t>> stratified_folds(std::span<const int> y, std::size_t k, std::uint64_t seed) {
    if (k < 2) {
        throw ArgumentError("stratified_folds: k must be at least 2");
    }
    std::array<std::vector<std::size_t>, 2> by_class;
    for (std::size_t i = 0; i < y.size(); ++i) {
        by_class[y[i] == 1 ? 1 : 0].push_back(i);
    }
    for (const auto& c : by_class) {
        if (c.size() < k) {
            throw ArgumentError("stratified_folds: a class has " + std::to_string(c.size()) + " rows, fewer than k = " +
                                std::to_string(k));
        }
    }
    Rng rng(seed);
    std::vector<std::vector<std::size_t>> folds(k);
    std::size_t next = 0;
    for (auto& members : by_class) {
        rng.shuffle(members.begin(), members.end());
        for (std::size_t i : members) {
            folds[next++ % k].push_back(i);
        }
    }
    for (auto& f : folds) {
        std::sort(f.begin(), f.end());
    }
    return folds;
}

CvReport repeated_cv(std::span<const int> y, std::size_t folds, std::size_t repeats, std::uint64_t seed,
                     const FoldEvaluator& evaluate) {
    if (repeats < 1) {
        throw ArgumentError("repeated_cv: repeats must be at least 1");
    }
    const std::size_t n = y.size();
    std::vector<std::vector<std::vector<std::size_t>>> plan(repeats);
    for (std::size_t r = 0; r < repeats; ++r) {
        if (folds == n) {
            plan[r].resize(n);
            for (std::size_t i = 0; i < n; ++i) {
                plan[r][i] = {i};
            }
        } else {
            plan[r] = stratified_folds(y, folds, derive_seed(seed, r));
        }
    }
    CvReport report;
    report.folds = folds;
    report.repeats = repeats;
    report.seed = seed;
    report.fold_accuracy.assign(folds * repeats, 0.0);
    parallel_for(folds * repeats, [&](std::size_t job) {
        const std::size_t r = job / folds;
        const std::size_t f = job % folds;
        const auto& validate = plan[r][f];
        std::vector<std::size_t> train;
        train.reserve(n - validate.size());
        for (std::size_t g = 0; g < folds; ++g) {
            if (g != f) {
                train.insert(train.end(), plan[r][g].begin(), plan[r][g].end());
            }
        }
        std::sort(train.begin(), train.end());
        report.fold_accuracy[job] = evaluate(train, validate, derive_seed(seed, r, f));
    });
    const double count = static_cast<double>(report.fold_accuracy.size());
    report.mean = std::accumulate(report.fold_accuracy.begin(), report.fold_accuracy.end(), 0.0) / count;
    double ss = 0.0;
    for (double a : report.fold_accuracy) {
        ss += (a - report.mean) * (a - report.mean);
    }
    report.stddev = std::sqrt(ss / count);
    return report;
}

CvReport repeated_cv(const ModelSpec& spec, const Matrix& x, std::span<const int> y, std::size_t folds,
                     std::size_t repeats, std::uint64_t seed) {
    if (x.rows() != y.size()) {
        throw ArgumentError("repeated_cv: matrix rows and labels differ");
    }
    auto report = repeated_cv(y, folds, repeats, seed,
                              [&](std::span<const std::size_t> train_rows, std::span<const std::size_t> validate,
                                  std::uint64_t fit_seed) {
                                  std::vector<int> y_train;
                                  std::vector<int> y_val;
                                  for (std::size_t i : train_rows) {
                                      y_train.push_back(y[i]);
                                  }
                                  for (std::size_t i : validate) {
                                      y_val.push_back(y[i]);
                                  }
                                  ModelSpec s = spec;
                                  s.seed = fit_seed;
                                  const auto model = train(s, x.select_rows(train_rows), y_train);
                                  return accuracy(confusion(y_val, predict(model, x.select_rows(validate))));
                              });
    report.algorithm = std::string(to_string(spec.algorithm));
    return report;
}

MetricReport evaluate_test(const TrainedModel& model, const LabeledMatrix& test) {
    const auto scores = score(model, test);
    const double t = decision_threshold(model.algorithm);
    std::vector<int> pred(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) {
        pred[i] = scores[i] >= t ? 1 : 0;
    }
    MetricReport r;
    r.algorithm = std::string(to_string(model.algorithm));
    r.counts = confusion(test.y, pred);
    r.accuracy = accuracy(r.counts);
    r.f1_macro = f1_macro(r.counts);
    r.auc = auc(test.y, scores);
    return r;
}

void to_json(nlohmann::json& j, const ConfusionCounts& c) {
    j = {{"tp", c.tp}, {"tn", c.tn}, {"fp", c.fp}, {"fn", c.fn}};
}

void from_json(const nlohmann::json& j, ConfusionCounts& c) {
    c = {j.at("tp"), j.at("tn"), j.at("fp"), j.at("fn")};
}

void to_json(nlohmann::json& j, const CvReport& r) {
    j = {{"algorithm", r.algorithm},
         {"feature_set", r.feature_set},
         {"mode", r.mode},
         {"folds", r.folds},
         {"repeats", r.repeats},
         {"seed", r.seed},
         {"fold_accuracy", r.fold_accuracy},
         {"mean", r.mean},
         {"stddev", r.stddev}};
}

void from_json(const nlohmann::json& j, CvReport& r) {
    j.at("algorithm").get_to(r.algorithm);
    j.at("feature_set").get_to(r.feature_set);
    j.at("mode").get_to(r.mode);
    j.at("folds").get_to(r.folds);
    j.at("repeats").get_to(r.repeats);
    j.at("seed").get_to(r.seed);
    j.at("fold_accuracy").get_to(r.fold_accuracy);
    j.at("mean").get_to(r.mean);
    j.at("stddev").get_to(r.stddev);
}

void to_json(nlohmann::json& j, const MetricReport& r) {
    j = {{"algorithm", r.algorithm}, {"feature_set", r.feature_set}, {"accuracy", r.accuracy},
         {"f1_macro", r.f1_macro},   {"auc", r.auc},                 {"confusion", r.counts}};
}

void from_json(const nlohmann::json& j, MetricReport& r) {
    j.at("algorithm").get_to(r.algorithm);
    j.at("feature_set").get_to(r.feature_set);
    j.at("accuracy").get_to(r.accuracy);
    j.at("f1_macro").get_to(r.f1_macro);
    j.at("auc").get_to(r.auc);
    j.at("confusion").get_to(r.counts);
}

} // namespace ckdpipe
