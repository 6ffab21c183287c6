#include <ckdpipe/error.hpp>
#include <ckdpipe/transforms.hpp>

#include "generators.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <tuple>

namespace ckdpipe {
namespace {

using testing::for_cases;

Frame one_column(std::string name, std::vector<std::string> categories, const std::vector<double>& cells,
                 const std::vector<std::uint8_t>& mask = {}) {
    std::vector<ColumnSpec> schema{{std::move(name), ColumnKind::categorical, std::move(categories), "", false},
                                   {"class", ColumnKind::categorical, {"ckd", "notckd"}, "", false}};
    Frame f(schema, "class");
    for (std::size_t i = 0; i < cells.size(); ++i) {
        const std::uint8_t m = mask.empty() ? 0 : mask[i];
        f.append_row(std::vector<double>{cells[i], static_cast<double>(i % 2)}, std::vector<std::uint8_t>{m, 0});
    }
    return f;
}

TEST(OneHot, KnownOrientation) {
    const auto htn = one_column("htn", {"yes", "no"}, {0, 1});
    const auto a = onehot_apply(htn, onehot_fit(htn));
    EXPECT_DOUBLE_EQ(a.value(0, 0), 1.0);
    EXPECT_DOUBLE_EQ(a.value(1, 0), 0.0);
    EXPECT_TRUE(a.column(0).indicator);
    EXPECT_EQ(a.column(0).kind, ColumnKind::numeric);

    const auto appet = one_column("appet", {"good", "poor"}, {0, 1});
    const auto b = onehot_apply(appet, onehot_fit(appet));
    EXPECT_DOUBLE_EQ(b.value(0, 0), 0.0);
    EXPECT_DOUBLE_EQ(b.value(1, 0), 1.0);

    const auto rbc = one_column("rbc", {"normal", "abnormal"}, {1, 0});
    const auto c = onehot_apply(rbc, onehot_fit(rbc));
    EXPECT_DOUBLE_EQ(c.value(0, 0), 0.0);
    EXPECT_DOUBLE_EQ(c.value(1, 0), 1.0);
}

TEST(OneHot, MaskedCellStaysMasked) {
    const auto pc = one_column("pc", {"normal", "abnormal"}, {0, 1, 0}, {0, 0, 1});
    const auto out = onehot_apply(pc, onehot_fit(pc));
    EXPECT_TRUE(out.missing(2, 0));
    EXPECT_FALSE(out.missing(0, 0));
}

TEST(OneHot, UnseenTokenIsEncodingError) {
    const auto train = one_column("pc", {"normal", "abnormal"}, {0, 1});
    const auto test = one_column("pc", {"normal", "weird"}, {1});
    EXPECT_THROW((void)onehot_apply(test, onehot_fit(train)), EncodingError);
}

TEST(MinMax, EndpointsExtrapolationAndDegenerate) {
    Matrix train(2, 2);
    train(0, 0) = 3;
    train(1, 0) = 7;
    train(0, 1) = 5;
    train(1, 1) = 5;
    const auto p = minmax_fit(testing::numeric_frame(train, {1, 0}));
    Matrix test(3, 2);
    test(0, 0) = 3;
    test(1, 0) = 7;
    test(2, 0) = 9;
    test(2, 1) = 123;
    const auto out = minmax_apply(testing::numeric_frame(test, {1, 0, 1}), p);
    EXPECT_DOUBLE_EQ(out.value(0, 0), 0.0);
    EXPECT_DOUBLE_EQ(out.value(1, 0), 1.0);
    EXPECT_DOUBLE_EQ(out.value(2, 0), 1.5);
    EXPECT_DOUBLE_EQ(out.value(2, 1), 0.0);
}

TEST(MinMax, UnknownColumnIsSchemaError) {
    Rng rng(1);
    const auto p = minmax_fit(testing::numeric_frame(testing::random_matrix(rng, 4, 2), {1, 0, 1, 0}));
    const auto wider = testing::numeric_frame(testing::random_matrix(rng, 4, 3), {1, 0, 1, 0});
    EXPECT_THROW((void)minmax_apply(wider, p), SchemaError);
}

TEST(MinMax, TrainingOutputInUnitInterval) {
    for_cases(100, 21, [](Rng& rng, std::size_t) {
        const std::size_t n = testing::between(rng, 2, 40);
        const std::size_t m = testing::between(rng, 1, 6);
        const auto x = testing::random_matrix(rng, n, m, -100.0, 100.0);
        const auto f = testing::numeric_frame(x, testing::random_labels(rng, n), testing::random_mask(rng, n, m, 0.2));
        const auto out = minmax_apply(f, minmax_fit(f));
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < m; ++j) {
                if (!out.missing(i, j)) {
                    EXPECT_GE(out.value(i, j), 0.0);
                    EXPECT_LE(out.value(i, j), 1.0);
                }
            }
        }
    });
}

TEST(Impute, WorkedExample) {
    Matrix train(3, 2);
    train(0, 0) = 1;
    train(0, 1) = 1;
    train(1, 0) = 3;
    train(1, 1) = 1;
    train(2, 0) = 9;
    train(2, 1) = 9;
    const auto model = knn_impute_fit(testing::numeric_frame(train, {1, 0, 1}), 2);
    Matrix q(1, 2);
    q(0, 0) = 2;
    const auto out = knn_impute_apply(testing::numeric_frame(q, {1}, {0, 1}), model);
    EXPECT_DOUBLE_EQ(out.value(0, 1), 1.0);
    EXPECT_EQ(out.masked_cells(), 0u);
}

TEST(Impute, NoMaskedCellsIsIdentity) {
    Rng rng(2);
    const auto f = testing::numeric_frame(testing::random_matrix(rng, 10, 3), testing::random_labels(rng, 10));
    EXPECT_EQ(knn_impute_apply(f, knn_impute_fit(f, 5)), f);
}

TEST(Impute, ColumnMeanFallbackWhenNoDonor) {
    Matrix train(3, 2);
    train(0, 0) = 0;
    train(1, 0) = 1;
    train(2, 0) = 2;
    train(2, 1) = 6;
    // Column 1 is observed only in row 2, so the fallback mean is 6.
    const auto model = knn_impute_fit(testing::numeric_frame(train, {1, 0, 1}, {0, 1, 0, 1, 0, 0}), 2);
    Matrix q(1, 2);
    const auto out = knn_impute_apply(testing::numeric_frame(q, {1}, {1, 1}), model);
    EXPECT_DOUBLE_EQ(out.value(0, 0), 1.0);
    EXPECT_DOUBLE_EQ(out.value(0, 1), 6.0);
}

TEST(Impute, RejectsZeroK) {
    Rng rng(3);
    const auto f = testing::numeric_frame(testing::random_matrix(rng, 4, 2), {1, 0, 1, 0});
    EXPECT_THROW((void)knn_impute_fit(f, 0), ArgumentError);
}


TEST(Impute, MatchesBruteForceOracle) {
    for_cases(200, 22, [](Rng& rng, std::size_t) {
        const std::size_t n = testing::between(rng, 3, 50);
        const std::size_t m = testing::between(rng, 2, 6);
        const std::size_t k = testing::between(rng, 1, std::min<std::size_t>(n, 7));
        const auto x = rng.below(2) ? testing::grid_matrix(rng, n, m, 4) : testing::random_matrix(rng, n, m);
        auto mask = testing::random_mask(rng, n, m, 0.3);
        // Keep every column observed at least once so the fallback mean exists.
        for (std::size_t j = 0; j < m; ++j) {
            mask[j] = 0;
        }
        const auto train = testing::numeric_frame(x, testing::random_labels(rng, n), mask);
        const std::size_t nq = testing::between(rng, 1, 20);
        const auto q = testing::numeric_frame(testing::random_matrix(rng, nq, m), testing::random_labels(rng, nq),
                                              testing::random_mask(rng, nq, m, 0.4));
        const auto model = knn_impute_fit(train, k);
        EXPECT_EQ(knn_impute_apply(q, model), oracle::impute(train, q, k));
        EXPECT_EQ(knn_impute_apply(train, model), oracle::impute(train, train, k));
    });
}

TEST(Impute, ObservedCellsUntouchedAndMaskCleared) {
    for_cases(100, 23, [](Rng& rng, std::size_t) {
        const std::size_t n = testing::between(rng, 6, 40);
        const std::size_t m = testing::between(rng, 2, 5);
        const auto f = testing::numeric_frame(testing::random_matrix(rng, n, m), testing::random_labels(rng, n),
                                              testing::random_mask(rng, n, m, 0.3));
        const auto out = knn_impute_apply(f, knn_impute_fit(f, 5 < n ? 5 : n));
        EXPECT_EQ(out.masked_cells(), 0u);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < m; ++j) {
                if (!f.missing(i, j)) {
                    EXPECT_EQ(out.value(i, j), f.value(i, j));
                }
            }
        }
    });
}

TEST(Standard, WorkedExampleAndDegenerate) {
    Matrix x(2, 2);
    x(0, 0) = 8;
    x(1, 0) = 12;
    x(0, 1) = 4;
    x(1, 1) = 4;
    const auto p = standard_fit(testing::numeric_frame(x, {1, 0}));
    EXPECT_DOUBLE_EQ(p.columns.at("x0").mean, 10.0);
    EXPECT_DOUBLE_EQ(p.columns.at("x0").sd, 2.0);
    Matrix q(2, 2);
    q(0, 0) = 12;
    q(1, 0) = 10;
    q(0, 1) = 99;
    const auto out = standard_apply(testing::numeric_frame(q, {1, 0}), p);
    EXPECT_DOUBLE_EQ(out.value(0, 0), 1.0);
    EXPECT_DOUBLE_EQ(out.value(1, 0), 0.0);
    EXPECT_DOUBLE_EQ(out.value(0, 1), 0.0);
}

TEST(Standard, MaskedCellIsContractError) {
    Matrix x(2, 1, 1.0);
    EXPECT_THROW((void)standard_fit(testing::numeric_frame(x, {1, 0}, {0, 1})), ContractError);
}

TEST(Standard, TrainingMomentsAreZeroAndOne) {
    for_cases(100, 24, [](Rng& rng, std::size_t) {
        const std::size_t n = testing::between(rng, 2, 200);
        const std::size_t m = testing::between(rng, 1, 8);
        const auto f =
            testing::numeric_frame(testing::random_matrix(rng, n, m, -1e3, 1e3), testing::random_labels(rng, n));
        const auto z = to_matrix(standard_apply(f, standard_fit(f)));
        for (std::size_t j = 0; j < m; ++j) {
            double mean = 0.0;
            double sq = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                mean += z.x(i, j);
            }
            mean /= static_cast<double>(n);
            for (std::size_t i = 0; i < n; ++i) {
                sq += (z.x(i, j) - mean) * (z.x(i, j) - mean);
            }
            EXPECT_NEAR(mean, 0.0, 1e-9);
            EXPECT_NEAR(std::sqrt(sq / static_cast<double>(n)), 1.0, 1e-9);
        }
    });
}

constexpr std::array<Stage, 4> full_stages{Stage::encode, Stage::minmax, Stage::impute, Stage::standardize};

TEST(Pipeline, CompositionLaw) {
    Rng rng(5);
    const auto train = testing::mixed_frame(rng, 40, 3, 2, 0.15);
    const auto p = pipeline_fit(train, full_stages, {3, {}});
    const auto enc = onehot_fit(train);
    const auto e = onehot_apply(train, enc);
    const auto mm = minmax_fit(e);
    const auto s = minmax_apply(e, mm);
    const auto imp = knn_impute_fit(s, 3);
    const auto i = knn_impute_apply(s, imp);
    const auto st = standard_apply(i, standard_fit(i));
    EXPECT_EQ(p.apply(train), st);
}

TEST(Pipeline, ApplyIsDeterministicAndProjects) {
    Rng rng(6);
    const auto all = testing::mixed_frame(rng, 60, 3, 2, 0.15);
    const auto parts = split(all, 0.75, 1);
    const std::vector<Stage> stages{Stage::project, Stage::encode, Stage::minmax, Stage::impute, Stage::standardize};
    const auto p = pipeline_fit(parts.train, stages, {3, {"n0", "c1"}});
    const auto a = p.apply(parts.test);
    EXPECT_EQ(a, p.apply(parts.test));
    EXPECT_EQ(a.feature_names(), (std::vector<std::string>{"n0", "c1"}));
    EXPECT_EQ(a.masked_cells(), 0u);
}

TEST(Pipeline, UnfittedApplyIsStateError) {
    Rng rng(7);
    EXPECT_THROW((void)pipeline_apply(testing::mixed_frame(rng, 5, 1, 1, 0.0), FittedPipeline{}), StateError);
}

TEST(Pipeline, OutOfOrderAppendIsStateError) {
    FittedPipeline p;
    p.append(FittedStage{Stage::minmax, "train", MinMaxParams{}});
    EXPECT_THROW(p.append(FittedStage{Stage::encode, "train", EncoderMap{}}), StateError);
    FittedPipeline q;
    EXPECT_THROW(q.append(FittedStage{Stage::encode, "test", EncoderMap{}}), StateError);
}

TEST(Pipeline, JsonRoundTrip) {
    Rng rng(8);
    const auto train = testing::mixed_frame(rng, 30, 3, 2, 0.2);
    const auto p = pipeline_fit(train, full_stages);
    const auto j = to_json(p);
    EXPECT_EQ(j.at("version"), pipeline_format_version);
    EXPECT_EQ(pipeline_from_json(j), p);
    EXPECT_EQ(pipeline_from_json(nlohmann::json::parse(j.dump())).apply(train), p.apply(train));
}

TEST(Pipeline, TestRowMutationsNeverChangeParameters) {
    for_cases(100, 25, [](Rng& rng, std::size_t) {
        const auto all = testing::mixed_frame(rng, 50, 3, 2, 0.2);
        const auto parts = split(all, 0.75, 3);
        Frame mutated = all;
        const std::size_t r = parts.test_rows[rng.below(parts.test_rows.size())];
        const auto numeric = mutated.column_index("n" + std::to_string(rng.below(3)));
        mutated.set_value(r, numeric, testing::uniform(rng, -1e6, 1e6));
        const auto again = split(mutated, 0.75, 3);
        EXPECT_EQ(again.train, parts.train);
        EXPECT_EQ(pipeline_fit(again.train, full_stages), pipeline_fit(parts.train, full_stages));
    });
}

} // namespace
} // namespace ckdpipe
