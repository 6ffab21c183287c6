#include <ckdpipe/dataset.hpp>
#include <ckdpipe/error.hpp>

#include "generators.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <cmath>
#include <map>
#include <numeric>

namespace ckdpipe {
namespace {

using testing::for_cases;

const char* const tiny_arff = R"(% comment line
@relation ckd

@attribute 'age' numeric
@attribute 'pcv' numeric
@attribute 'htn' {yes,no}
@attribute 'class' {ckd,notckd}

@data
48,44,yes,ckd
7,?,no,ckd
62,31,	yes,ckd
51,	35,no ,notckd
)";

TEST(Arff, ParsesRowsMaskAndTrimmedTokens) {
    const auto f = clean(parse_arff(tiny_arff));
    ASSERT_EQ(f.rows(), 4u);
    ASSERT_EQ(f.cols(), 4u);
    EXPECT_EQ(f.label(), "class");
    const auto pcv = f.column_index("pcv");
    EXPECT_TRUE(f.missing(1, pcv));
    EXPECT_DOUBLE_EQ(f.value(3, pcv), 35.0);
    const auto htn = f.column_index("htn");
    EXPECT_EQ(f.token(2, htn), "yes");
    EXPECT_EQ(f.token(3, htn), "no");
    EXPECT_EQ(f.binary_labels(), (std::vector<int>{1, 1, 1, 0}));
}

TEST(Arff, EmptyDataSectionKeepsSchema) {
    const auto f = parse_arff("@relation x\n@attribute a numeric\n@attribute class {ckd,notckd}\n@data\n");
    EXPECT_EQ(f.rows(), 0u);
    EXPECT_EQ(f.cols(), 2u);
}

TEST(Arff, MalformedDirectiveReportsLine) {
    try {
        (void)parse_arff("@relation x\n@attribute a numeric\n@attribut b numeric\n@data\n");
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 3u);
    }
}

TEST(Arff, WrongFieldCountReportsLine) {
    try {
        (void)parse_arff("@relation x\n@attribute a numeric\n@attribute class {ckd,notckd}\n@data\n1,ckd\n2\n");
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 6u);
    }
}

TEST(Clean, CoercesNumeralsAndRepairsTokens) {
    const char* text = "@relation x\n@attribute pcv {41,\t43,?}\n@attribute dm {yes,no,' yes'}\n"
                       "@attribute class {ckd,'ckd\t',notckd}\n@data\n41,yes,ckd\n'\t43',' yes','ckd\t'\n?,?,notckd\n";
    const auto f = clean(parse_arff(text));
    const auto pcv = f.column_index("pcv");
    EXPECT_EQ(f.column(pcv).kind, ColumnKind::numeric);
    EXPECT_DOUBLE_EQ(f.value(0, pcv), 41.0);
    EXPECT_DOUBLE_EQ(f.value(1, pcv), 43.0);
    EXPECT_TRUE(f.missing(2, pcv));
    const auto dm = f.column_index("dm");
    EXPECT_EQ(f.token(1, dm), "yes");
    EXPECT_TRUE(f.missing(2, dm));
    EXPECT_EQ(f.binary_labels(), (std::vector<int>{1, 1, 0}));
}

TEST(Clean, UnrepairableTokenIsSchemaError) {
    const char* text = "@relation x\n@attribute dm {yes,no,maybe}\n@attribute class {ckd,notckd}\n@data\nmaybe,ckd\n";
    EXPECT_THROW((void)clean(parse_arff(text)), SchemaError);
}

TEST(Clean, IsIdempotent) {
    const auto once = clean(parse_arff(tiny_arff));
    EXPECT_EQ(clean(once), once);
}

TEST(Csv, RoundTripOfCleanedFrame) {
    const auto f = clean(parse_arff(tiny_arff));
    const auto back = clean(parse_csv(to_csv(f)));
    EXPECT_EQ(back, f);
}

TEST(Csv, EmptyCellIsMissing) {
    const auto f = parse_csv("a,b,class\n1,,ckd\n2,3,notckd\n");
    EXPECT_TRUE(f.missing(0, 1));
    EXPECT_FALSE(f.missing(1, 1));
}

TEST(Csv, LabelOrderDoesNotDependOnFirstRow) {
    const auto f = parse_csv("a,class\n1,notckd\n2,ckd\n");
    EXPECT_EQ(f.binary_labels(), (std::vector<int>{0, 1}));
}

TEST(Csv, RandomFramesRoundTrip) {
    for_cases(50, 11, [](Rng& rng, std::size_t) {
        const auto f = testing::mixed_frame(rng, testing::between(rng, 3, 30), 3, 2, 0.2);
        EXPECT_EQ(parse_csv(to_csv(f)), f);
    });
}

TEST(Missing, CountsFeatureCellsOnly) {
    Rng rng(3);
    const auto x = testing::random_matrix(rng, 1, 24);
    std::vector<std::uint8_t> mask(24, 0);
    mask[0] = mask[5] = mask[23] = 1;
    EXPECT_EQ(count_missing(testing::numeric_frame(x, {1}, mask)), 3u);
    EXPECT_EQ(count_missing(testing::numeric_frame(x, {1})), 0u);
}

TEST(Missing, InvariantUnderRowShuffle) {
    for_cases(50, 12, [](Rng& rng, std::size_t) {
        const auto f = testing::mixed_frame(rng, 25, 4, 3, 0.25);
        std::vector<std::size_t> order(f.rows());
        std::iota(order.begin(), order.end(), 0);
        rng.shuffle(order.begin(), order.end());
        EXPECT_EQ(count_missing(f.select_rows(order)), count_missing(f));
    });
}

TEST(Duplicates, RepeatedRowGivesOnePair) {
    Rng rng(4);
    auto x = testing::random_matrix(rng, 5, 3);
    for (std::size_t j = 0; j < 3; ++j) {
        x(4, j) = x(1, j);
    }
    const auto dups = find_duplicates(testing::numeric_frame(x, {1, 0, 1, 0, 0}));
    ASSERT_EQ(dups.size(), 1u);
    EXPECT_EQ(dups[0], (std::pair<std::size_t, std::size_t>{1, 4}));
}

TEST(Duplicates, MaskBitParticipates) {
    Matrix x(2, 2, 0.0);
    std::vector<std::uint8_t> mask{0, 0, 0, 1};
    EXPECT_TRUE(find_duplicates(testing::numeric_frame(x, {1, 1}, mask)).empty());
    EXPECT_EQ(find_duplicates(testing::numeric_frame(x, {1, 1})).size(), 1u);
}

TEST(Split, SizesAndDeterminism) {
    Rng rng(5);
    const auto f = testing::mixed_frame(rng, 400, 2, 1, 0.0);
    const auto a = split(f, 0.75, 99);
    const auto b = split(f, 0.75, 99);
    EXPECT_EQ(a.train.rows(), 300u);
    EXPECT_EQ(a.test.rows(), 100u);
    EXPECT_EQ(a.train_rows, b.train_rows);
    EXPECT_EQ(a.train, b.train);
    EXPECT_NE(split(f, 0.75, 100).train_rows, a.train_rows);
}

TEST(Split, RejectsBoundaryRatios) {
    Rng rng(6);
    const auto f = testing::mixed_frame(rng, 10, 2, 1, 0.0);
    EXPECT_THROW((void)split(f, 1.0, 1), ArgumentError);
    EXPECT_THROW((void)split(f, 0.0, 1), ArgumentError);
}

TEST(Split, ConservesRowMultiset) {
    for_cases(100, 13, [](Rng& rng, std::size_t) {
        const auto f = testing::mixed_frame(rng, testing::between(rng, 4, 60), 3, 2, 0.2);
        const double ratio = testing::uniform(rng, 0.1, 0.9);
        const bool stratify = rng.below(2) == 1;
        const auto s = split(f, ratio, rng(), stratify);
        EXPECT_EQ(s.train.rows(), static_cast<std::size_t>(std::lround(ratio * static_cast<double>(f.rows()))));
        std::vector<std::size_t> all = s.train_rows;
        all.insert(all.end(), s.test_rows.begin(), s.test_rows.end());
        std::sort(all.begin(), all.end());
        std::vector<std::size_t> expected(f.rows());
        std::iota(expected.begin(), expected.end(), 0);
        EXPECT_EQ(all, expected);
        for (std::size_t i = 0; i < s.train_rows.size(); ++i) {
            EXPECT_TRUE(std::equal(s.train.row_values(i).begin(), s.train.row_values(i).end(),
                                   f.row_values(s.train_rows[i]).begin()));
        }
    });
}

TEST(Split, StratifiedKeepsProportions) {
    Rng rng(7);
    const auto f = testing::mixed_frame(rng, 400, 2, 1, 0.0);
    const auto counts = class_counts(f);
    const auto s = split(f, 0.75, 1, true);
    const auto train = class_counts(s.train);
    for (std::size_t c = 0; c < 2; ++c) {
        EXPECT_LE(std::abs(static_cast<double>(train[c]) - 0.75 * static_cast<double>(counts[c])), 1.0);
    }
}

TEST(Formats, FromPath) {
    EXPECT_EQ(format_from_path("a/b.arff"), FileFormat::arff);
    EXPECT_EQ(format_from_path("x.CSV"), FileFormat::csv);
    EXPECT_THROW((void)format_from_path("x.txt"), ArgumentError);
}

TEST(Repairs, JsonRoundTrip) {
    const auto t = RepairTable::builtin();
    EXPECT_EQ(nlohmann::json(t).get<RepairTable>(), t);
}

class CkdFile : public ::testing::Test {
protected:
    void SetUp() override {
        if (!std::filesystem::exists(CKDPIPE_DATA_FILE)) {
            GTEST_SKIP() << "dataset not present";
        }
    }
};

TEST_F(CkdFile, ShapeAndClassCounts) {
    const auto f = clean(load_dataset(CKDPIPE_DATA_FILE, FileFormat::arff));
    EXPECT_EQ(f.rows(), 400u);
    EXPECT_EQ(f.feature_indices().size(), 24u);
    EXPECT_EQ(class_counts(f), (std::vector<std::size_t>{250, 150}));
    EXPECT_TRUE(find_duplicates(f).empty());
    for (const auto& name : {"pcv", "wc", "rc", "sg", "al", "su"}) {
        EXPECT_EQ(f.column(f.column_index(name)).kind, ColumnKind::numeric) << name;
    }
}

} // namespace
} // namespace ckdpipe
