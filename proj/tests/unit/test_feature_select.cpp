#include <ckdpipe/error.hpp>
#include <ckdpipe/feature_select.hpp>

#include "generators.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <iterator>
#include <numeric>

namespace ckdpipe {
namespace {

using testing::for_cases;

using oracle::both;
using oracle::either;
using oracle::without;
using oracle::subset;


TEST(Chi2, Examples) {
    const std::vector<std::string> names{"a", "b"};
    Matrix x(4, 2);
    const std::vector<double> a{1, 1, 0, 0};
    for (std::size_t i = 0; i < 4; ++i) {
        x(i, 0) = a[i];
        x(i, 1) = 0.0;
    }
    const std::vector<int> y{1, 1, 0, 0};
    const auto t = chi2_scores(x, y, names);
    EXPECT_DOUBLE_EQ(t.at("a"), 2.0);
    EXPECT_DOUBLE_EQ(t.at("b"), 0.0);
    EXPECT_THROW((void)t.at("c"), SchemaError);
    x(0, 1) = -1.0;
    EXPECT_THROW((void)chi2_scores(x, y, names), ArgumentError);
}

TEST(Chi2, IndependentFeatureScoresZero) {
    Matrix x(4, 1);
    const std::vector<double> v{3, 5, 3, 5};
    for (std::size_t i = 0; i < 4; ++i) {
        x(i, 0) = v[i];
    }
    const std::vector<std::string> names{"a"};
    EXPECT_NEAR(chi2_scores(x, std::vector<int>{1, 1, 0, 0}, names).at("a"), 0.0, 1e-12);
}

TEST(Chi2, MatchesContingencyFormula) {
    for_cases(200, 61, [](Rng& rng, std::size_t) {
        const std::size_t n = testing::between(rng, 2, 60);
        const std::size_t m = testing::between(rng, 1, 5);
        const auto x = testing::random_matrix(rng, n, m, 0.0, 10.0);
        const auto y = testing::random_labels(rng, n);
        const auto names = testing::feature_names(m);
        const auto t = chi2_scores(x, y, names);
        for (std::size_t j = 0; j < m; ++j) {
            const double want = oracle::chi2(x, y, j);
            EXPECT_NEAR(t.scores[j], want, 1e-9 * std::max(1.0, want));
        }
    });
}

TEST(MutualInformation, DiscreteCopyOfLabelIsLn2) {
    Matrix x(100, 1);
    std::vector<int> y(100);
    for (std::size_t i = 0; i < 100; ++i) {
        y[i] = static_cast<int>(i % 2);
        x(i, 0) = y[i];
    }
    const std::vector<std::string> names{"copy"};
    const bool discrete[] = {true};
    EXPECT_NEAR(mi_scores(x, y, names, discrete).at("copy"), std::log(2.0), 1e-12);
}

TEST(MutualInformation, IndependentAndConstantFeatures) {
    Rng rng(3);
    Matrix x = testing::random_matrix(rng, 500, 2);
    for (std::size_t i = 0; i < 500; ++i) {
        x(i, 1) = 4.0;
    }
    const auto y = testing::random_labels(rng, 500);
    const auto names = testing::feature_names(2);
    const bool discrete[] = {false, false};
    const auto t = mi_scores(x, y, names, discrete, 3, 7);
    EXPECT_LT(t.at("x0"), 0.05);
    EXPECT_GE(t.at("x0"), 0.0);
    EXPECT_LT(t.at("x1"), 0.05);
    EXPECT_THROW((void)mi_scores(x, y, names, discrete, 500, 7), ArgumentError);
}

TEST(MutualInformation, InformativeBeatsNoise) {
    Rng rng(4);
    const auto y = testing::random_labels(rng, 300, 20);
    Matrix x = testing::random_matrix(rng, 300, 2);
    for (std::size_t i = 0; i < 300; ++i) {
        x(i, 0) += y[i] == 1 ? 1.0 : 0.0;
    }
    const bool discrete[] = {false, false};
    const auto t = mi_scores(x, y, testing::feature_names(2), discrete, 3, 1);
    EXPECT_GT(t.at("x0"), 0.3);
    EXPECT_GT(t.at("x0"), 5.0 * t.at("x1"));
    EXPECT_EQ(mi_scores(x, y, testing::feature_names(2), discrete, 3, 1), t);
}

TEST(TopFraction, CountAndTies) {
    ScoreTable t;
    t.features = testing::feature_names(24);
    for (std::size_t j = 0; j < 24; ++j) {
        t.scores.push_back(static_cast<double>(j));
    }
    const auto top = top_fraction(t, 0.70);
    EXPECT_EQ(top.size(), 17u);
    EXPECT_FALSE(top.count("x6"));
    EXPECT_TRUE(top.count("x7"));
    EXPECT_EQ(top_fraction(t, 1.0).size(), 24u);

    ScoreTable tied;
    tied.features = {"c", "a", "b"};
    tied.scores = {1.0, 1.0, 1.0};
    EXPECT_EQ(top_fraction(tied, 0.5), (FeatureSet{"a", "b"}));
    EXPECT_THROW((void)top_fraction(ScoreTable{}, 0.5), ArgumentError);
}

TEST(AssembleSets, WorkedExample) {
    const auto r = assemble_sets({"a", "b", "c"}, {"a", "b", "d"}, {"a", "e"}, {"a", "e", "f"}, {"b"},
                                 {"a", "b", "g"}, {"a", "g"}, {"b"});
    EXPECT_EQ(r.set("s_w"), (FeatureSet{"a", "b"}));
    EXPECT_EQ(r.set("s_f"), (FeatureSet{"a", "e"}));
    EXPECT_EQ(r.set("s_e"), (FeatureSet{"a", "g"}));
    EXPECT_EQ(r.set("f1"), (FeatureSet{"a", "e", "g"}));
    EXPECT_EQ(r.set("f2"), (FeatureSet{"a"}));
    EXPECT_EQ(r.set("f3"), (FeatureSet{"a"}));
}

TEST(AssembleSets, EmptyInputsGiveEmptySets) {
    const auto r = assemble_sets({}, {}, {}, {}, {}, {}, {}, {});
    for (const char* name : {"f1", "f2", "f3"}) {
        EXPECT_TRUE(r.set(name).empty()) << name;
    }
}

TEST(AssembleSets, MatchesSetAlgebra) {
    const auto universe = testing::feature_names(10);
    for_cases(10'000, 62, [&](Rng& rng, std::size_t) {
        std::vector<FeatureSet> in;
        for (int k = 0; k < 8; ++k) {
            in.push_back(testing::random_subset(rng, universe, testing::uniform(rng, 0.2, 0.9)));
        }
        const auto r = assemble_sets(in[0], in[1], in[2], in[3], in[4], in[5], in[6], in[7]);
        const auto s_w = both(in[0], in[1]);
        const auto s_f = either(either(both(in[2], in[3]), both(in[2], in[4])), both(in[3], in[4]));
        const auto s_e = both(in[5], in[6]);
        const auto& s_cor = in[7];
        ASSERT_EQ(r.set("s_w"), s_w);
        ASSERT_EQ(r.set("s_f"), s_f);
        ASSERT_EQ(r.set("s_e"), s_e);
        ASSERT_EQ(r.set("f1"), without(either(either(s_w, s_f), s_e), s_cor));
        ASSERT_EQ(r.set("f2"), without(either(either(both(s_w, s_f), both(s_w, s_e)), both(s_f, s_e)), s_cor));
        ASSERT_EQ(r.set("f3"), without(both(both(s_w, s_f), s_e), s_cor));
        ASSERT_TRUE(subset(r.set("f3"), r.set("f2")));
        ASSERT_TRUE(subset(r.set("f2"), r.set("f1")));
        ASSERT_TRUE(both(r.set("f1"), s_cor).empty());
    });
}

TEST(AssembleSets, InvariantUnderRenaming) {
    // Renaming features by a bijection commutes with the assembly.
    const auto universe = testing::feature_names(8);
    for_cases(200, 63, [&](Rng& rng, std::size_t) {
        std::vector<std::size_t> perm(universe.size());
        std::iota(perm.begin(), perm.end(), 0);
        rng.shuffle(perm.begin(), perm.end());
        const auto rename = [&](const FeatureSet& s) {
            FeatureSet out;
            for (const auto& name : s) {
                out.insert("y" + std::to_string(perm[static_cast<std::size_t>(std::stoi(name.substr(1)))]));
            }
            return out;
        };
        std::vector<FeatureSet> in;
        for (int k = 0; k < 8; ++k) {
            in.push_back(testing::random_subset(rng, universe));
        }
        const auto a = assemble_sets(in[0], in[1], in[2], in[3], in[4], in[5], in[6], in[7]);
        const auto b = assemble_sets(rename(in[0]), rename(in[1]), rename(in[2]), rename(in[3]), rename(in[4]),
                                     rename(in[5]), rename(in[6]), rename(in[7]));
        for (const char* name : {"f1", "f2", "f3"}) {
            EXPECT_EQ(rename(a.set(name)), b.set(name)) << name;
        }
    });
}

LabeledMatrix two_informative(Rng& rng, std::size_t n) {
    LabeledMatrix d;
    d.x = Matrix(n, 5);
    d.features = testing::feature_names(5);
    std::size_t i = 0;
    while (i < n) {
        const double a = rng.uniform();
        const double b = rng.uniform();
        if (std::abs(a + b - 1.0) < 0.2) {
            continue;
        }
        d.x(i, 0) = a;
        d.x(i, 1) = b;
        for (std::size_t j = 2; j < 5; ++j) {
            d.x(i, j) = rng.uniform();
        }
        d.y.push_back(a + b > 1.0 ? 1 : 0);
        ++i;
    }
    // Noise first so the informative pair sits in the middle of the column order.
    std::swap(d.features[0], d.features[3]);
    for (std::size_t r = 0; r < n; ++r) {
        std::swap(d.x(r, 0), d.x(r, 3));
    }
    return d;
}

TEST(Rfecv, FindsTheInformativePair) {
    Rng rng(5);
    const auto d = two_informative(rng, 200);
    Hyperparameters hp;
    hp.lr_c = 100.0;
    const auto r = rfecv(d.x, d.y, d.features, RfeEstimator::logistic, hp, 5, 11);
    EXPECT_EQ(r.selected, (FeatureSet{"x0", "x1"}));
    EXPECT_EQ(r.best_count, 2u);
    ASSERT_EQ(r.mean_accuracy.size(), 5u);
    EXPECT_EQ(r.elimination_order.size(), 3u);
    const double best = *std::max_element(r.mean_accuracy.begin(), r.mean_accuracy.end());
    EXPECT_DOUBLE_EQ(r.mean_accuracy[r.best_count - 1], best);
    EXPECT_GE(best, r.mean_accuracy.back() - 1e-12);
}

TEST(Rfecv, SingleFeatureIsKept) {
    Rng rng(6);
    LabeledMatrix d;
    d.x = testing::random_matrix(rng, 40, 1);
    d.y = testing::random_labels(rng, 40, 10);
    d.features = {"only"};
    const auto r = rfecv(d.x, d.y, d.features, RfeEstimator::gboost, Hyperparameters::reduced(), 5, 1);
    EXPECT_EQ(r.selected, (FeatureSet{"only"}));
    EXPECT_TRUE(r.elimination_order.empty());
}

TEST(Importance, LabelCopyIsSelected) {
    Rng rng(7);
    const std::size_t n = 120;
    Matrix x = testing::random_matrix(rng, n, 4);
    const auto y = testing::random_labels(rng, n, 10);
    for (std::size_t i = 0; i < n; ++i) {
        x(i, 2) = y[i] + 0.01 * rng.uniform();
    }
    auto hp = Hyperparameters::reduced();
    hp.rf_trees = 20;
    const auto names = testing::feature_names(4);
    const auto dt = importance_select(x, y, names, Algorithm::dtree, hp, 3, 9);
    EXPECT_EQ(dt.selected, (FeatureSet{"x2"}));
    EXPECT_NEAR(std::accumulate(dt.mean_importance.begin(), dt.mean_importance.end(), 0.0), 1.0, 1e-12);
    const auto rf = importance_select(x, y, names, Algorithm::rforest, hp, 2, 9);
    EXPECT_TRUE(rf.selected.count("x2"));
    EXPECT_EQ(importance_select(x, y, names, Algorithm::rforest, hp, 2, 9), rf);
}

TEST(Pearson, DiagonalSymmetryAndZeroVariance) {
    Rng rng(8);
    Matrix x = testing::random_matrix(rng, 30, 4);
    for (std::size_t i = 0; i < 30; ++i) {
        x(i, 3) = 2.0;
        x(i, 1) = -3.0 * x(i, 0) + 1.0;
    }
    const auto c = pearson_matrix(x);
    for (std::size_t a = 0; a < 4; ++a) {
        EXPECT_DOUBLE_EQ(c(a, a), 1.0);
        for (std::size_t b = 0; b < 4; ++b) {
            EXPECT_DOUBLE_EQ(c(a, b), c(b, a));
            EXPECT_LE(std::abs(c(a, b)), 1.0);
        }
    }
    EXPECT_NEAR(c(0, 1), -1.0, 1e-12);
    EXPECT_DOUBLE_EQ(c(0, 3), 0.0);
}

TEST(Pearson, InvariantUnderRowPermutation) {
    for_cases(50, 64, [](Rng& rng, std::size_t) {
        const std::size_t n = testing::between(rng, 3, 50);
        const auto x = testing::random_matrix(rng, n, 3);
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        rng.shuffle(order.begin(), order.end());
        const auto a = pearson_matrix(x);
        const auto b = pearson_matrix(x.select_rows(order));
        for (std::size_t i = 0; i < 3; ++i) {
            for (std::size_t j = 0; j < 3; ++j) {
                EXPECT_NEAR(a(i, j), b(i, j), 1e-12);
            }
        }
    });
}

TEST(HighCorrelation, DropsTheLowerChiSquareMember) {
    Matrix corr(3, 3, 0.0);
    for (std::size_t i = 0; i < 3; ++i) {
        corr(i, i) = 1.0;
    }
    corr(0, 1) = corr(1, 0) = -0.9;
    corr(1, 2) = corr(2, 1) = 0.84;
    ScoreTable chi2;
    chi2.features = {"hemo", "pcv", "sg"};
    chi2.scores = {5.0, 3.0, 1.0};
    EXPECT_EQ(high_corr_set(corr, chi2, 0.85), (FeatureSet{"pcv"}));
    chi2.scores = {3.0, 3.0, 1.0};
    EXPECT_EQ(high_corr_set(corr, chi2, 0.85), (FeatureSet{"pcv"}));
    EXPECT_EQ(high_corr_set(corr, chi2, 0.80), (FeatureSet{"pcv", "sg"}));

    const auto pairs = correlated_pairs(corr, chi2.features, 0.80);
    ASSERT_EQ(pairs.size(), 2u);
    EXPECT_EQ(pairs[0], (CorrelatedPair{"hemo", "pcv", -0.9}));
}

TEST(HybridSelect, NestedSetsOnSyntheticData) {
    Rng rng(9);
    auto d = two_informative(rng, 120);
    auto hp = Hyperparameters::reduced();
    hp.rf_trees = 10;
    hp.gb_stages = 10;
    hp.xgb_rounds = 10;
    SelectionConfig cfg;
    cfg.rfe_folds = 3;
    cfg.importance_repeats = 2;
    const bool discrete[] = {false, false, false, false, false};
    const auto r = hybrid_select(d, discrete, cfg, hp, 21);
    EXPECT_TRUE(subset(r.set("f3"), r.set("f2")));
    EXPECT_TRUE(subset(r.set("f2"), r.set("f1")));
    EXPECT_TRUE(both(r.set("f1"), r.set("s_cor")).empty());
    for (auto name : selection_set_names) {
        EXPECT_NO_THROW((void)r.set(name)) << name;
    }
    EXPECT_EQ(nlohmann::json(r).get<SelectionReport>(), r);
    EXPECT_EQ(hybrid_select(d, discrete, cfg, hp, 21), r);
}

TEST(SelectionConfig, JsonRoundTrip) {
    SelectionConfig c;
    c.top_fraction = 0.5;
    c.rfe_folds = 4;
    EXPECT_EQ(nlohmann::json(c).get<SelectionConfig>(), c);
}

} // namespace
} // namespace ckdpipe
