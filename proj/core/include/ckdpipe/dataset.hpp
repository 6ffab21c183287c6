#pragma once

#include <ckdpipe/matrix.hpp>

#include <nlohmann/json.hpp>

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace ckdpipe {

enum class ColumnKind { numeric, categorical };

struct ColumnSpec {
    std::string name;
    ColumnKind kind = ColumnKind::numeric;
    /// Allowed tokens, categorical columns only. Cells store the index into this list.
    std::vector<std::string> categories;
    std::string unit;
    /// Set by the one-hot encoder on 0/1 columns derived from a two-category column.
    bool indicator = false;

    friend bool operator==(const ColumnSpec&, const ColumnSpec&) = default;
};

/// Column-typed table with a per-cell missing mask and one designated label column.
///
/// Numeric cells hold their value; categorical cells hold the index of their token in
/// ColumnSpec::categories. Masked cells always store 0.0 so that equality is exact.
/// The first category of the label column is the positive class.
class Frame {
public:
    Frame() = default;
    Frame(std::vector<ColumnSpec> schema, std::string label);

    [[nodiscard]] const std::vector<ColumnSpec>& schema() const noexcept { return schema_; }
    [[nodiscard]] const ColumnSpec& column(std::size_t j) const { return schema_.at(j); }
    [[nodiscard]] ColumnSpec& mutable_column(std::size_t j) { return schema_.at(j); }
    [[nodiscard]] std::optional<std::size_t> find_column(std::string_view name) const noexcept;
    /// Throws SchemaError when the column does not exist.
    [[nodiscard]] std::size_t column_index(std::string_view name) const;

    [[nodiscard]] const std::string& label() const noexcept { return label_; }
    [[nodiscard]] std::size_t label_index() const noexcept { return label_index_; }
    [[nodiscard]] std::vector<std::size_t> feature_indices() const;
    [[nodiscard]] std::vector<std::string> feature_names() const;

    [[nodiscard]] std::size_t rows() const noexcept { return rows_; }
    [[nodiscard]] std::size_t cols() const noexcept { return schema_.size(); }

    [[nodiscard]] double value(std::size_t r, std::size_t c) const { return values_[r * cols() + c]; }
    [[nodiscard]] bool missing(std::size_t r, std::size_t c) const { return mask_[r * cols() + c] != 0; }
    [[nodiscard]] const std::string& token(std::size_t r, std::size_t c) const;

    void set_value(std::size_t r, std::size_t c, double v);
    void set_missing(std::size_t r, std::size_t c);

    [[nodiscard]] std::span<const double> row_values(std::size_t r) const {
        return {values_.data() + r * cols(), cols()};
    }
    [[nodiscard]] std::span<const std::uint8_t> row_mask(std::size_t r) const {
        return {mask_.data() + r * cols(), cols()};
    }

    /// Appends a row; values at masked positions are normalised to 0.0.
    void append_row(std::span<const double> values, std::span<const std::uint8_t> mask);

    [[nodiscard]] Frame select_rows(std::span<const std::size_t> rows) const;
    /// Keeps the named feature columns (in frame order) plus the label column.
    [[nodiscard]] Frame project(std::span<const std::string> features) const;

    /// 1 where the label equals the first label category, 0 otherwise.
    [[nodiscard]] std::vector<int> binary_labels() const;

    [[nodiscard]] std::size_t masked_cells() const noexcept;

    friend bool operator==(const Frame&, const Frame&) = default;

private:
    std::vector<ColumnSpec> schema_;
    std::string label_;
    std::size_t label_index_ = 0;
    std::size_t rows_ = 0;
    std::vector<double> values_;
    std::vector<std::uint8_t> mask_;
};

/// Fully numeric view of a frame's feature columns, ready for the classifiers.
struct LabeledMatrix {
    Matrix x;
    std::vector<int> y;
    std::vector<std::string> features;
};

/// Throws ContractError when a feature cell is masked or a feature column is categorical.
[[nodiscard]] LabeledMatrix to_matrix(const Frame& frame);

struct SplitPair {
    Frame train;
    Frame test;
    std::uint64_t seed = 0;
    double ratio = 0.0;
    /// Original row indices of each partition, in partition order.
    std::vector<std::size_t> train_rows;
    std::vector<std::size_t> test_rows;
};

enum class FileFormat { arff, csv };

[[nodiscard]] FileFormat format_from_path(const std::filesystem::path& path);
[[nodiscard]] std::string_view to_string(FileFormat f) noexcept;
[[nodiscard]] FileFormat parse_file_format(std::string_view s);

/// Token repairs and type coercions applied by clean(). Data-driven so a run can
/// override the built-in table from its config file.
struct RepairTable {
    /// Exact raw token (after trimming) -> canonical token.
    std::map<std::string, std::string> token_map;
    /// Columns coerced from categorical to numeric.
    std::vector<std::string> numeric_columns;
    /// Alternative column names -> canonical names.
    std::map<std::string, std::string> column_aliases;

    [[nodiscard]] static RepairTable builtin();
    [[nodiscard]] std::string repair(std::string_view token) const;
    [[nodiscard]] std::string canonical_column(std::string_view name) const;

    friend bool operator==(const RepairTable&, const RepairTable&) = default;
};

void to_json(nlohmann::json& j, const RepairTable& t);
void from_json(const nlohmann::json& j, RepairTable& t);

/// Canonical cleaned schema of the UCI chronic kidney disease table (24 features + class).
[[nodiscard]] const std::vector<ColumnSpec>& ckd_schema();
inline constexpr std::string_view ckd_label = "class";

[[nodiscard]] Frame load_dataset(const std::filesystem::path& path, FileFormat format,
                                 const RepairTable& repairs = RepairTable::builtin());
[[nodiscard]] Frame parse_arff(std::string_view text, const RepairTable& repairs = RepairTable::builtin());
[[nodiscard]] Frame parse_csv(std::string_view text, const RepairTable& repairs = RepairTable::builtin());

/// Writes a header row followed by one line per row; masked cells are written as "?".
[[nodiscard]] std::string to_csv(const Frame& frame);
void write_csv(const Frame& frame, const std::filesystem::path& path);

[[nodiscard]] Frame clean(const Frame& frame, const RepairTable& repairs = RepairTable::builtin());

/// Masked cells over the feature columns.
[[nodiscard]] std::size_t count_missing(const Frame& frame);

/// Pairs (i, j), i < j, of rows equal in every cell and mask bit.
[[nodiscard]] std::vector<std::pair<std::size_t, std::size_t>> find_duplicates(const Frame& frame);

/// Shuffles rows with a generator seeded by `seed` and sends the first round(ratio * n)
/// rows to train. With `stratify`, class proportions are preserved per partition.
[[nodiscard]] SplitPair split(const Frame& frame, double ratio, std::uint64_t seed, bool stratify = false);

/// Count of rows per label category, in category order.
[[nodiscard]] std::vector<std::size_t> class_counts(const Frame& frame);

} // namespace ckdpipe
