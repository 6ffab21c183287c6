#include <ckdpipe/error.hpp>
#include <ckdpipe/resample.hpp>

#include "generators.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ckdpipe {
namespace {

using testing::for_cases;


TEST(Lof, MatchesDirectFormula) {
    for_cases(100, 31, [](Rng& rng, std::size_t) {
        const std::size_t n = testing::between(rng, 3, 100);
        const std::size_t m = testing::between(rng, 1, 5);
        const std::size_t k = testing::between(rng, 1, n - 1);
        const auto x = rng.below(3) == 0 ? testing::grid_matrix(rng, n, m, 3) : testing::random_matrix(rng, n, m);
        const auto got = lof_scores(x, k);
        const auto want = oracle::lof(x, k);
        ASSERT_EQ(got.size(), want.size());
        for (std::size_t i = 0; i < n; ++i) {
            EXPECT_NEAR(got[i], want[i], 1e-9 * std::max(1.0, std::abs(want[i])));
        }
    });
}

TEST(Lof, GridInteriorIsInlier) {
    Matrix x(25, 2);
    for (std::size_t i = 0; i < 25; ++i) {
        x(i, 0) = static_cast<double>(i % 5);
        x(i, 1) = static_cast<double>(i / 5);
    }
    const auto s = lof_scores(x, 4);
    EXPECT_NEAR(s[12], 1.0, 0.1);
}

TEST(Lof, DistantPointIsOutlier) {
    Rng rng(2);
    Matrix x = testing::random_matrix(rng, 21, 2);
    x(20, 0) = 100.0;
    x(20, 1) = 0.0;
    EXPECT_GT(lof_scores(x, 10)[20], 1.5);
}

TEST(Lof, IdenticalPointsScoreOne) {
    Matrix x(21, 3, 0.25);
    for (double s : lof_scores(x, 20)) {
        EXPECT_DOUBLE_EQ(s, 1.0);
    }
}

TEST(Lof, RejectsKOutOfRange) {
    Matrix x(5, 2, 0.0);
    EXPECT_THROW((void)lof_scores(x, 5), ArgumentError);
    EXPECT_THROW((void)lof_scores(x, 0), ArgumentError);
}

TEST(RemoveOutliers, IdenticalRowsKeepEverything) {
    Matrix x(30, 2, 1.0);
    const auto f = testing::numeric_frame(x, std::vector<int>(30, 1));
    EXPECT_EQ(remove_outliers(f, LofConfig{}).rows(), 30u);
}

TEST(RemoveOutliers, PreservesOrderOfKeptRows) {
    for_cases(30, 32, [](Rng& rng, std::size_t) {
        const std::size_t n = testing::between(rng, 25, 80);
        auto x = testing::random_matrix(rng, n, 3);
        for (std::size_t t = 0; t < 3; ++t) {
            x(rng.below(n), rng.below(3)) = testing::uniform(rng, 5.0, 50.0);
        }
        const auto f = testing::numeric_frame(x, testing::random_labels(rng, n));
        const auto res = detect_outliers(f, LofConfig{});
        std::vector<std::size_t> kept;
        for (std::size_t i = 0; i < n; ++i) {
            if (!std::binary_search(res.removed.begin(), res.removed.end(), i)) {
                kept.push_back(i);
            }
        }
        EXPECT_EQ(res.frame, f.select_rows(kept));
        for (std::size_t i = 0; i < n; ++i) {
            const bool flagged = res.scores[i] > 1.5;
            EXPECT_EQ(flagged, std::binary_search(res.removed.begin(), res.removed.end(), i));
        }
    });
}

TEST(RemoveOutliers, ContaminationModeRemovesFixedCount) {
    Rng rng(3);
    const auto f = testing::numeric_frame(testing::random_matrix(rng, 100, 3), testing::random_labels(rng, 100));
    LofConfig cfg;
    cfg.mode = LofMode::contamination;
    cfg.contamination = 0.1;
    EXPECT_EQ(detect_outliers(f, cfg).removed.size(), 10u);
}

TEST(RemoveOutliers, TooFewRowsIsArgumentError) {
    Rng rng(4);
    const auto f = testing::numeric_frame(testing::random_matrix(rng, 10, 2), testing::random_labels(rng, 10));
    EXPECT_THROW((void)remove_outliers(f, LofConfig{}), ArgumentError);
}

bool on_segment(std::span<const double> p, std::span<const double> a, std::span<const double> b) {
    // p = a + t (b - a) with a common t in [0, 1].
    double t = -1.0;
    for (std::size_t j = 0; j < p.size(); ++j) {
        const double d = b[j] - a[j];
        if (std::abs(d) < 1e-12) {
            if (std::abs(p[j] - a[j]) > 1e-12) {
                return false;
            }
            continue;
        }
        const double tj = (p[j] - a[j]) / d;
        if (t < 0.0) {
            t = tj;
        } else if (std::abs(tj - t) > 1e-9) {
            return false;
        }
    }
    return t < 0.0 || (t >= -1e-12 && t <= 1.0 + 1e-12);
}

TEST(Smote, TwoMinorityRowsGiveSegmentPoints) {
    Matrix x(6, 2);
    x(0, 0) = 0;
    x(0, 1) = 0;
    x(1, 0) = 1;
    x(1, 1) = 1;
    for (std::size_t i = 2; i < 6; ++i) {
        x(i, 0) = 5.0 + static_cast<double>(i);
        x(i, 1) = -3.0;
    }
    const auto f = testing::numeric_frame(x, {1, 1, 0, 0, 0, 0});
    const auto res = smote_balance(f, SmoteConfig{5, 9});
    EXPECT_EQ(res.k_used, 1u);
    EXPECT_FALSE(res.warnings.empty());
    ASSERT_EQ(res.frame.rows(), 8u);
    for (std::size_t r = 6; r < 8; ++r) {
        const auto row = res.frame.row_values(r);
        EXPECT_GE(row[0], 0.0);
        EXPECT_LE(row[0], 1.0);
        EXPECT_DOUBLE_EQ(row[0], row[1]);
    }
}

TEST(Smote, BalancedInputUnchanged) {
    Rng rng(5);
    const auto f = testing::numeric_frame(testing::random_matrix(rng, 10, 2), {1, 0, 1, 0, 1, 0, 1, 0, 1, 0});
    const auto res = smote_balance(f, SmoteConfig{5, 1});
    EXPECT_EQ(res.frame, f);
    EXPECT_EQ(res.synthetic, 0u);
}

TEST(Smote, SingleClassIsArgumentError) {
    Rng rng(6);
    const auto f = testing::numeric_frame(testing::random_matrix(rng, 5, 2), std::vector<int>(5, 1));
    EXPECT_THROW((void)smote(f, SmoteConfig{}), ArgumentError);
}

TEST(Smote, Properties) {
    for_cases(100, 33, [](Rng& rng, std::size_t) {
        const std::size_t n = testing::between(rng, 8, 80);
        const std::size_t m = testing::between(rng, 1, 5);
        const auto y = testing::random_labels(rng, n, 2);
        const auto f = testing::numeric_frame(testing::random_matrix(rng, n, m), y);
        const SmoteConfig cfg{testing::between(rng, 1, 6), rng()};
        const auto res = smote_balance(f, cfg);
        const auto counts = class_counts(res.frame);
        EXPECT_EQ(counts[0], counts[1]);
        const auto before = class_counts(f);
        EXPECT_EQ(res.synthetic, std::max(before[0], before[1]) - std::min(before[0], before[1]));
        for (std::size_t i = 0; i < n; ++i) {
            EXPECT_TRUE(std::equal(f.row_values(i).begin(), f.row_values(i).end(), res.frame.row_values(i).begin()));
        }
        const int minority = before[0] < before[1] ? 1 : 0;
        std::vector<std::size_t> min_rows;
        for (std::size_t i = 0; i < n; ++i) {
            if (y[i] == minority) {
                min_rows.push_back(i);
            }
        }
        const auto labels = res.frame.binary_labels();
        for (std::size_t r = n; r < res.frame.rows(); ++r) {
            EXPECT_EQ(labels[r], minority);
            const auto p = res.frame.row_values(r).first(m);
            bool found = false;
            for (std::size_t a = 0; a < min_rows.size() && !found; ++a) {
                for (std::size_t b = 0; b < min_rows.size() && !found; ++b) {
                    found = a != b && on_segment(p, f.row_values(min_rows[a]).first(m),
                                                 f.row_values(min_rows[b]).first(m));
                }
            }
            EXPECT_TRUE(found) << "synthetic row " << r << " is not a convex combination of two minority rows";
        }
        EXPECT_EQ(smote_balance(f, cfg).frame, res.frame);
    });
}

TEST(Configs, JsonRoundTrip) {
    LofConfig lof{15, LofMode::contamination, 2.0, 0.05};
    EXPECT_EQ(nlohmann::json(lof).get<LofConfig>(), lof);
    SmoteConfig sm{3, 77};
    EXPECT_EQ(nlohmann::json(sm).get<SmoteConfig>(), sm);
    EXPECT_EQ(parse_lof_mode("auto"), LofMode::threshold);
}

} // namespace
} // namespace ckdpipe
