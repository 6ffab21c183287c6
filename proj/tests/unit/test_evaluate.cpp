#include <ckdpipe/error.hpp>
#include <ckdpipe/evaluate.hpp>

#include "generators.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ckdpipe {
namespace {

using testing::for_cases;

TEST(Metrics, ConfusionAndAccuracy) {
    const std::vector<int> y{1, 1, 1, 0, 0, 0, 0, 1};
    const std::vector<int> p{1, 1, 0, 0, 0, 1, 0, 1};
    const auto c = confusion(y, p);
    EXPECT_EQ(c, (ConfusionCounts{3, 3, 1, 1}));
    EXPECT_DOUBLE_EQ(accuracy(c), 0.75);
    EXPECT_DOUBLE_EQ(f1_macro(c), 0.75);
    EXPECT_THROW((void)accuracy(ConfusionCounts{}), MetricError);
    EXPECT_THROW((void)confusion(y, std::vector<int>{1}), ArgumentError);
}

TEST(Metrics, MacroF1Examples) {
    // Positive F1 = 2*8/(16+2+0) = 0.888.., negative F1 = 2*0/(0+0+2) = 0.
    EXPECT_NEAR(f1_macro(ConfusionCounts{8, 0, 2, 0}), (16.0 / 18.0) / 2.0, 1e-15);
    // A class never predicted and never present scores 0.
    EXPECT_DOUBLE_EQ(f1_macro(ConfusionCounts{5, 0, 0, 0}), 0.5);
}

TEST(Metrics, MacroF1IsSymmetricUnderClassSwap) {
    for_cases(200, 51, [](Rng& rng, std::size_t) {
        const ConfusionCounts c{rng.below(50), rng.below(50), rng.below(50), rng.below(50) + 1};
        EXPECT_NEAR(f1_macro(c), f1_macro(ConfusionCounts{c.tn, c.tp, c.fn, c.fp}), 1e-15);
    });
}

TEST(Auc, Examples) {
    const std::vector<int> y{1, 1, 0, 0};
    EXPECT_DOUBLE_EQ(auc(y, std::vector<double>{0.9, 0.8, 0.2, 0.1}), 1.0);
    EXPECT_DOUBLE_EQ(auc(y, std::vector<double>{0.1, 0.2, 0.8, 0.9}), 0.0);
    EXPECT_DOUBLE_EQ(auc(y, std::vector<double>{0.5, 0.5, 0.5, 0.5}), 0.5);
    EXPECT_DOUBLE_EQ(auc(y, std::vector<double>{0.9, 0.3, 0.5, 0.1}), 0.75);
    EXPECT_THROW((void)auc(std::vector<int>{1, 1}, std::vector<double>{0.1, 0.2}), MetricError);
}


TEST(Auc, MatchesPairwiseOracle) {
    for_cases(200, 52, [](Rng& rng, std::size_t) {
        const std::size_t n = testing::between(rng, 2, 200);
        const auto y = testing::random_labels(rng, n);
        std::vector<double> s(n);
        const std::size_t levels = testing::between(rng, 2, 20);
        for (auto& v : s) {
            v = static_cast<double>(rng.below(levels)) / static_cast<double>(levels);
        }
        EXPECT_NEAR(auc(y, s), oracle::auc(y, s), 1e-12);
    });
}

TEST(Auc, InvariantUnderMonotoneTransform) {
    for_cases(100, 53, [](Rng& rng, std::size_t) {
        const std::size_t n = testing::between(rng, 2, 100);
        const auto y = testing::random_labels(rng, n);
        std::vector<double> s(n);
        for (auto& v : s) {
            v = testing::uniform(rng, -3.0, 3.0);
        }
        std::vector<double> t(n);
        std::transform(s.begin(), s.end(), t.begin(), [](double v) { return std::exp(2.0 * v) + 7.0; });
        EXPECT_DOUBLE_EQ(auc(y, s), auc(y, t));
    });
}

TEST(Folds, PartitionWithProportionalClasses) {
    for_cases(200, 54, [](Rng& rng, std::size_t) {
        const std::size_t k = testing::between(rng, 2, 10);
        const std::size_t n = testing::between(rng, 2 * k, 300);
        const auto y = testing::random_labels(rng, n, k);
        const auto folds = stratified_folds(y, k, rng());
        ASSERT_EQ(folds.size(), k);
        std::vector<std::size_t> all;
        for (const auto& f : folds) {
            all.insert(all.end(), f.begin(), f.end());
        }
        std::sort(all.begin(), all.end());
        std::vector<std::size_t> expect(n);
        std::iota(expect.begin(), expect.end(), 0);
        EXPECT_EQ(all, expect);
        const double pos = static_cast<double>(std::count(y.begin(), y.end(), 1));
        for (const auto& f : folds) {
            const auto p = static_cast<double>(std::count_if(f.begin(), f.end(), [&](std::size_t i) { return y[i] == 1; }));
            EXPECT_LE(std::abs(p - pos / static_cast<double>(k)), 1.0);
            EXPECT_LE(std::abs(static_cast<double>(f.size()) - static_cast<double>(n) / static_cast<double>(k)), 1.0);
        }
    });
}

TEST(Folds, BalancedAndUnbalancedExamples) {
    std::vector<int> y(320, 0);
    std::fill(y.begin(), y.begin() + 160, 1);
    for (const auto& f : stratified_folds(y, 10, 3)) {
        EXPECT_EQ(f.size(), 32u);
        EXPECT_EQ(std::count_if(f.begin(), f.end(), [&](std::size_t i) { return y[i] == 1; }), 16);
    }
    std::vector<int> z(300, 0);
    std::fill(z.begin(), z.begin() + 114, 1);
    for (const auto& f : stratified_folds(z, 10, 3)) {
        const auto p = std::count_if(f.begin(), f.end(), [&](std::size_t i) { return z[i] == 1; });
        EXPECT_TRUE(p == 11 || p == 12) << p;
    }
    EXPECT_THROW((void)stratified_folds(std::vector<int>{1, 0, 0, 0}, 2, 1), ArgumentError);
}

TEST(Folds, Deterministic) {
    Rng rng(5);
    const auto y = testing::random_labels(rng, 50, 10);
    EXPECT_EQ(stratified_folds(y, 5, 9), stratified_folds(y, 5, 9));
    EXPECT_NE(stratified_folds(y, 5, 9), stratified_folds(y, 5, 10));
}

TEST(RepeatedCv, ShapeAndMoments) {
    Rng rng(6);
    const auto y = testing::random_labels(rng, 60, 10);
    std::size_t calls = 0;
    const auto r = repeated_cv(y, 5, 3, 11, [&](auto train, auto validate, std::uint64_t) {
        ++calls;
        EXPECT_EQ(train.size() + validate.size(), 60u);
        return static_cast<double>(validate.size()) / 100.0;
    });
    EXPECT_EQ(calls, 15u);
    ASSERT_EQ(r.fold_accuracy.size(), 15u);
    const double mean = std::accumulate(r.fold_accuracy.begin(), r.fold_accuracy.end(), 0.0) / 15.0;
    EXPECT_NEAR(r.mean, mean, 1e-15);
    double ss = 0.0;
    for (double a : r.fold_accuracy) {
        ss += (a - mean) * (a - mean);
    }
    EXPECT_NEAR(r.stddev, std::sqrt(ss / 15.0), 1e-15);
}

TEST(RepeatedCv, LeaveOneOutMatchesDirectLoop) {
    for_cases(10, 55, [](Rng& rng, std::size_t) {
        const std::size_t n = testing::between(rng, 6, 30);
        const auto x = testing::random_matrix(rng, n, 2);
        const auto y = testing::random_labels(rng, n, 3);
        const ModelSpec spec{Algorithm::gaussian_nb, {}, 0};
        const auto r = repeated_cv(spec, x, y, n, 1, 4);
        double correct = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            std::vector<std::size_t> keep;
            for (std::size_t j = 0; j < n; ++j) {
                if (j != i) {
                    keep.push_back(j);
                }
            }
            std::vector<int> yk;
            for (auto j : keep) {
                yk.push_back(y[j]);
            }
            const auto model = train(spec, x.select_rows(keep), yk);
            correct += predict(model, x.select_rows(std::vector<std::size_t>{i}))[0] == y[i] ? 1.0 : 0.0;
        }
        EXPECT_NEAR(r.mean, correct / static_cast<double>(n), 1e-12);
        EXPECT_EQ(r.fold_accuracy.size(), n);
    });
}

TEST(RepeatedCv, UninformativeFeaturesScoreNearHalf) {
    Rng rng(7);
    const auto x = testing::random_matrix(rng, 400, 3);
    std::vector<int> y(400);
    for (std::size_t i = 0; i < 400; ++i) {
        y[i] = static_cast<int>(i % 2);
    }
    const auto r = repeated_cv(ModelSpec{Algorithm::logistic, {}, 0}, x, y, 10, 2, 8);
    EXPECT_NEAR(r.mean, 0.5, 0.08);
}

TEST(Evaluate, ReportsAllMetrics) {
    Rng rng(9);
    LabeledMatrix d;
    d.x = testing::random_matrix(rng, 40, 2);
    d.y = testing::random_labels(rng, 40, 5);
    for (std::size_t i = 0; i < 40; ++i) {
        d.x(i, 0) += d.y[i] == 1 ? 2.0 : 0.0;
    }
    d.features = testing::feature_names(2);
    const auto model = train(ModelSpec{Algorithm::gaussian_nb, {}, 0}, d);
    const auto r = evaluate_test(model, d);
    EXPECT_EQ(r.algorithm, "gaussian_nb");
    EXPECT_DOUBLE_EQ(r.accuracy, 1.0);
    EXPECT_DOUBLE_EQ(r.f1_macro, 1.0);
    EXPECT_DOUBLE_EQ(r.auc, 1.0);
    EXPECT_EQ(r.counts.total(), 40u);
    auto other = d;
    other.features = {"a", "b"};
    EXPECT_THROW((void)evaluate_test(model, other), SchemaError);
}

TEST(Reports, JsonRoundTrip) {
    CvReport cv{"knn", "f1", "paper", 10, 10, 3, {0.9, 1.0}, 0.95, 0.05};
    EXPECT_EQ(nlohmann::json(cv).get<CvReport>(), cv);
    MetricReport m{"svm_rbf", "f2", 0.97, 0.96, 0.99, {40, 57, 1, 2}};
    EXPECT_EQ(nlohmann::json(m).get<MetricReport>(), m);
}

} // namespace
} // namespace ckdpipe
