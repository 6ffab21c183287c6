#include <ckdpipe/dataset.hpp>

#include <ckdpipe/error.hpp>
#include <ckdpipe/random.hpp>

#include "text.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace ckdpipe {

// ---------------------------------------------------------------------------
// Frame

Frame::Frame(std::vector<ColumnSpec> schema, std::string label) : schema_(std::move(schema)), label_(std::move(label)) {
    for (std::size_t i = 0; i < schema_.size(); ++i) {
        if (schema_[i].kind == ColumnKind::categorical && schema_[i].categories.empty()) {
            throw SchemaError("categorical column '" + schema_[i].name + "' has no categories");
        }
        for (std::size_t k = i + 1; k < schema_.size(); ++k) {
            if (schema_[i].name == schema_[k].name) {
                throw SchemaError("duplicate column name '" + schema_[i].name + "'");
            }
        }
    }
    label_index_ = column_index(label_);
}

std::optional<std::size_t> Frame::find_column(std::string_view name) const noexcept {
    for (std::size_t j = 0; j < schema_.size(); ++j) {
        if (schema_[j].name == name) {
            return j;
        }
    }
    return std::nullopt;
}

std::size_t Frame::column_index(std::string_view name) const {
    if (auto j = find_column(name)) {
        return *j;
    }
    throw SchemaError("no column named '" + std::string(name) + "'");
}

std::vector<std::size_t> Frame::feature_indices() const {
    std::vector<std::size_t> out;
    out.reserve(schema_.size());
    for (std::size_t j = 0; j < schema_.size(); ++j) {
        if (j != label_index_) {
            out.push_back(j);
        }
    }
    return out;
}

std::vector<std::string> Frame::feature_names() const {
    std::vector<std::string> out;
    for (std::size_t j : feature_indices()) {
        out.push_back(schema_[j].name);
    }
    return out;
}

const std::string& Frame::token(std::size_t r, std::size_t c) const {
    const auto& spec = schema_.at(c);
    if (spec.kind != ColumnKind::categorical) {
        throw SchemaError("column '" + spec.name + "' is not categorical");
    }
    if (missing(r, c)) {
        throw SchemaError("cell (" + std::to_string(r) + ", " + spec.name + ") is missing");
    }
    return spec.categories.at(static_cast<std::size_t>(value(r, c)));
}

void Frame::set_value(std::size_t r, std::size_t c, double v) {
    values_[r * cols() + c] = v;
    mask_[r * cols() + c] = 0;
}

void Frame::set_missing(std::size_t r, std::size_t c) {
    values_[r * cols() + c] = 0.0;
    mask_[r * cols() + c] = 1;
}

void Frame::append_row(std::span<const double> values, std::span<const std::uint8_t> mask) {
    if (values.size() != cols() || mask.size() != cols()) {
        throw SchemaError("row width " + std::to_string(values.size()) + " does not match schema width " +
                          std::to_string(cols()));
    }
    for (std::size_t j = 0; j < cols(); ++j) {
        values_.push_back(mask[j] ? 0.0 : values[j]);
        mask_.push_back(mask[j] ? 1 : 0);
    }
    ++rows_;
}

Frame Frame::select_rows(std::span<const std::size_t> rows) const {
    Frame out(schema_, label_);
    out.values_.reserve(rows.size() * cols());
    out.mask_.reserve(rows.size() * cols());
    for (std::size_t r : rows) {
        out.append_row(row_values(r), row_mask(r));
    }
    return out;
}

Frame Frame::project(std::span<const std::string> features) const {
    for (const auto& f : features) {
        if (!find_column(f)) {
            throw SchemaError("cannot project onto unknown feature '" + f + "'");
        }
    }
    std::vector<std::size_t> keep;
    for (std::size_t j = 0; j < cols(); ++j) {
        if (j == label_index_ || std::find(features.begin(), features.end(), schema_[j].name) != features.end()) {
            keep.push_back(j);
        }
    }
    std::vector<ColumnSpec> schema;
    for (std::size_t j : keep) {
        schema.push_back(schema_[j]);
    }
    Frame out(std::move(schema), label_);
    std::vector<double> v(keep.size());
    std::vector<std::uint8_t> m(keep.size());
    for (std::size_t r = 0; r < rows_; ++r) {
        for (std::size_t k = 0; k < keep.size(); ++k) {
            v[k] = value(r, keep[k]);
            m[k] = mask_[r * cols() + keep[k]];
        }
        out.append_row(v, m);
    }
    return out;
}

std::vector<int> Frame::binary_labels() const {
    const auto& spec = schema_[label_index_];
    if (spec.kind != ColumnKind::categorical || spec.categories.size() > 2) {
        throw SchemaError("label column '" + label_ + "' must be categorical with at most two classes");
    }
    std::vector<int> y(rows_);
    for (std::size_t r = 0; r < rows_; ++r) {
        if (missing(r, label_index_)) {
            throw SchemaError("label missing in row " + std::to_string(r));
        }
        y[r] = value(r, label_index_) == 0.0 ? 1 : 0;
    }
    return y;
}

std::size_t Frame::masked_cells() const noexcept {
    return static_cast<std::size_t>(std::count(mask_.begin(), mask_.end(), std::uint8_t{1}));
}

LabeledMatrix to_matrix(const Frame& frame) {
    LabeledMatrix out;
    const auto features = frame.feature_indices();
    out.x = Matrix(frame.rows(), features.size());
    for (std::size_t k = 0; k < features.size(); ++k) {
        const auto& spec = frame.column(features[k]);
        if (spec.kind != ColumnKind::numeric) {
            throw ContractError("feature '" + spec.name + "' is still categorical");
        }
        out.features.push_back(spec.name);
    }
    for (std::size_t r = 0; r < frame.rows(); ++r) {
        for (std::size_t k = 0; k < features.size(); ++k) {
            if (frame.missing(r, features[k])) {
                throw ContractError("feature '" + out.features[k] + "' is missing in row " + std::to_string(r));
            }
            out.x(r, k) = frame.value(r, features[k]);
        }
    }
    out.y = frame.binary_labels();
    return out;
}

// ---------------------------------------------------------------------------
// Formats

FileFormat format_from_path(const std::filesystem::path& path) {
    const auto ext = text::lower(path.extension().string());
    if (ext == ".arff") {
        return FileFormat::arff;
    }
    if (ext == ".csv") {
        return FileFormat::csv;
    }
    throw ArgumentError("cannot infer file format from '" + path.string() + "'");
}

std::string_view to_string(FileFormat f) noexcept {
    return f == FileFormat::arff ? "arff" : "csv";
}

FileFormat parse_file_format(std::string_view s) {
    const auto v = text::lower(s);
    if (v == "arff") {
        return FileFormat::arff;
    }
    if (v == "csv") {
        return FileFormat::csv;
    }
    throw ArgumentError("unknown format '" + std::string(s) + "' (expected arff or csv)");
}

// ---------------------------------------------------------------------------
// Repair table

RepairTable RepairTable::builtin() {
    RepairTable t;
    // Variants observed in the UCI file. Surrounding whitespace is also trimmed
    // generically; the explicit entries document the known typos.
    t.token_map = {
        {"ckd\t", "ckd"}, {"\tno", "no"},   {"\tyes", "yes"}, {" yes", "yes"},
        {"no ", "no"},    {"\t?", "?"},     {"\t43", "43"},   {"\t6200", "6200"},
        {"\t8400", "8400"},
    };
    // pcv, wc and rc carry stray tabs in the raw file and are read as text by naive
    // loaders; sg, al and su are declared nominal but are ordinal measurements.
    t.numeric_columns = {"pcv", "wc", "rc", "sg", "al", "su"};
    t.column_aliases = {{"wbcc", "wc"}, {"rbcc", "rc"}};
    return t;
}

std::string RepairTable::repair(std::string_view token) const {
    if (auto it = token_map.find(std::string(token)); it != token_map.end()) {
        return it->second;
    }
    const auto trimmed = std::string(text::trim(token));
    if (auto it = token_map.find(trimmed); it != token_map.end()) {
        return it->second;
    }
    return trimmed;
}

std::string RepairTable::canonical_column(std::string_view name) const {
    if (auto it = column_aliases.find(std::string(name)); it != column_aliases.end()) {
        return it->second;
    }
    return std::string(name);
}

void to_json(nlohmann::json& j, const RepairTable& t) {
    j = nlohmann::json{{"token_map", t.token_map},
                       {"numeric_columns", t.numeric_columns},
                       {"column_aliases", t.column_aliases}};
}

void from_json(const nlohmann::json& j, RepairTable& t) {
    for (const auto& [key, _] : j.items()) {
        if (key != "token_map" && key != "numeric_columns" && key != "column_aliases") {
            throw SchemaError("unknown repair table key '" + key + "'");
        }
    }
    t = RepairTable{};
    if (j.contains("token_map")) {
        j.at("token_map").get_to(t.token_map);
    }
    if (j.contains("numeric_columns")) {
        j.at("numeric_columns").get_to(t.numeric_columns);
    }
    if (j.contains("column_aliases")) {
        j.at("column_aliases").get_to(t.column_aliases);
    }
}

const std::vector<ColumnSpec>& ckd_schema() {
    static const std::vector<ColumnSpec> schema = [] {
        auto num = [](std::string name, std::string unit) {
            return ColumnSpec{std::move(name), ColumnKind::numeric, {}, std::move(unit), false};
        };
        auto cat = [](std::string name, std::vector<std::string> cats) {
            return ColumnSpec{std::move(name), ColumnKind::categorical, std::move(cats), "", false};
        };
        return std::vector<ColumnSpec>{
            num("age", "years"),
            num("bp", "mm/Hg"),
            num("sg", "specific gravity"),
            num("al", "albumin grade 0-5"),
            num("su", "sugar grade 0-5"),
            cat("rbc", {"normal", "abnormal"}),
            cat("pc", {"normal", "abnormal"}),
            cat("pcc", {"present", "notpresent"}),
            cat("ba", {"present", "notpresent"}),
            num("bgr", "mgs/dl"),
            num("bu", "mgs/dl"),
            num("sc", "mgs/dl"),
            num("sod", "mEq/L"),
            num("pot", "mEq/L"),
            num("hemo", "gms"),
            num("pcv", "%"),
            num("wc", "cells/cumm"),
            num("rc", "millions/cmm"),
            cat("htn", {"yes", "no"}),
            cat("dm", {"yes", "no"}),
            cat("cad", {"yes", "no"}),
            cat("appet", {"good", "poor"}),
            cat("pe", {"yes", "no"}),
            cat("ane", {"yes", "no"}),
            cat("class", {"ckd", "notckd"}),
        };
    }();
    return schema;
}

namespace {

const ColumnSpec* find_canonical(std::string_view name) {
    for (const auto& spec : ckd_schema()) {
        if (spec.name == name) {
            return &spec;
        }
    }
    return nullptr;
}

bool is_missing_token(std::string_view t) {
    return t.empty() || t == "?";
}

/// Accumulates rows while validating tokens against a schema.
class FrameBuilder {
public:
    FrameBuilder(std::vector<ColumnSpec> schema, std::string label, const RepairTable& repairs)
        : schema_(std::move(schema)), label_(std::move(label)), repairs_(repairs) {}

    void add_row(const std::vector<std::string_view>& tokens, std::size_t line) {
        std::vector<double> values(schema_.size(), 0.0);
        std::vector<std::uint8_t> mask(schema_.size(), 0);
        for (std::size_t j = 0; j < schema_.size(); ++j) {
            const auto raw = text::trim(text::unquote(text::trim(tokens[j])));
            if (is_missing_token(raw)) {
                if (schema_[j].name == label_) {
                    throw SchemaError("line " + std::to_string(line) + ": label '" + label_ + "' is missing");
                }
                mask[j] = 1;
                continue;
            }
            values[j] = convert(j, raw);
        }
        values_.push_back(std::move(values));
        masks_.push_back(std::move(mask));
    }

    Frame finish() && {
        Frame frame(std::move(schema_), std::move(label_));
        for (std::size_t r = 0; r < values_.size(); ++r) {
            frame.append_row(values_[r], masks_[r]);
        }
        return frame;
    }

private:
    double convert(std::size_t j, std::string_view token) {
        auto& spec = schema_[j];
        if (spec.kind == ColumnKind::numeric) {
            if (auto v = text::parse_double(token)) {
                return *v;
            }
            const auto repaired = repairs_.repair(token);
            if (auto v = text::parse_double(repaired)) {
                return *v;
            }
            throw SchemaError("column '" + spec.name + "': token '" + std::string(token) + "' is not numeric");
        }
        const auto& cats = spec.categories;
        if (auto it = std::find(cats.begin(), cats.end(), token); it != cats.end()) {
            return static_cast<double>(it - cats.begin());
        }
        const auto repaired = repairs_.repair(token);
        if (std::find(cats.begin(), cats.end(), repaired) == cats.end()) {
            throw SchemaError("column '" + spec.name + "': unknown category token '" + std::string(token) + "'");
        }
        // Keep the variant as its own category; clean() folds it into the canonical one.
        spec.categories.emplace_back(token);
        return static_cast<double>(spec.categories.size() - 1);
    }

    std::vector<ColumnSpec> schema_;
    std::string label_;
    const RepairTable& repairs_;
    std::vector<std::vector<double>> values_;
    std::vector<std::vector<std::uint8_t>> masks_;
};

std::string pick_label(const std::vector<ColumnSpec>& schema) {
    for (const auto& spec : schema) {
        if (spec.name == ckd_label) {
            return spec.name;
        }
    }
    if (schema.empty()) {
        throw SchemaError("table has no columns");
    }
    return schema.back().name;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error("cannot open '" + path.string() + "'");
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

// ---------------------------------------------------------------------------
// ARFF subset: @relation, @attribute (nominal | numeric | real | integer), @data,
// '%' comments, '?' for missing.

Frame parse_arff(std::string_view input, const RepairTable& repairs) {
    const auto lines = text::split_lines(input);
    std::vector<ColumnSpec> schema;
    bool seen_relation = false;
    bool seen_data = false;
    std::size_t i = 0;
    for (; i < lines.size(); ++i) {
        const auto line = text::trim(lines[i]);
        const std::size_t lineno = i + 1;
        if (line.empty() || line.front() == '%') {
            continue;
        }
        if (line.front() != '@') {
            throw ParseError("expected a directive before @data", lineno);
        }
        const auto [directive, rest] = text::split_word(line);
        const auto d = text::lower(directive);
        if (d == "@relation") {
            if (text::trim(rest).empty()) {
                throw ParseError("@relation needs a name", lineno);
            }
            seen_relation = true;
        } else if (d == "@attribute") {
            const auto [raw_name, type] = text::split_word(text::trim(rest));
            const auto name = repairs.canonical_column(text::unquote(raw_name));
            const auto t = text::trim(type);
            if (name.empty() || t.empty()) {
                throw ParseError("@attribute needs a name and a type", lineno);
            }
            ColumnSpec spec{name, ColumnKind::numeric, {}, "", false};
            if (t.front() == '{') {
                if (t.back() != '}') {
                    throw ParseError("unterminated nominal value list", lineno);
                }
                for (auto v : text::split(t.substr(1, t.size() - 2), ',')) {
                    const auto token = text::trim(text::unquote(text::trim(v)));
                    if (token.empty()) {
                        throw ParseError("empty nominal value", lineno);
                    }
                    spec.categories.emplace_back(token);
                }
                spec.kind = ColumnKind::categorical;
            } else {
                const auto lt = text::lower(t);
                if (lt != "numeric" && lt != "real" && lt != "integer") {
                    throw ParseError("unsupported attribute type '" + std::string(t) + "'", lineno);
                }
            }
            if (std::any_of(schema.begin(), schema.end(), [&](const ColumnSpec& s) { return s.name == name; })) {
                throw ParseError("duplicate attribute '" + name + "'", lineno);
            }
            schema.push_back(std::move(spec));
        } else if (d == "@data") {
            seen_data = true;
            ++i;
            break;
        } else {
            throw ParseError("unknown directive '" + std::string(directive) + "'", lineno);
        }
    }
    if (!seen_relation) {
        throw ParseError("missing @relation", 1);
    }
    if (schema.empty()) {
        throw ParseError("no @attribute declarations", i);
    }
    if (!seen_data) {
        throw ParseError("missing @data", lines.size());
    }

    const std::size_t width = schema.size();
    auto label = pick_label(schema);
    FrameBuilder builder(std::move(schema), std::move(label), repairs);
    for (; i < lines.size(); ++i) {
        const auto line = text::trim(lines[i]);
        if (line.empty() || line.front() == '%') {
            continue;
        }
        auto tokens = text::split(line, ',');
        if (tokens.size() > width) {
            // Stray empty fields (",," or a trailing comma) occur in the UCI file.
            std::erase_if(tokens, [](std::string_view t) { return text::trim(t).empty(); });
        }
        if (tokens.size() != width) {
            throw ParseError("expected " + std::to_string(width) + " fields, found " + std::to_string(tokens.size()),
                             i + 1);
        }
        builder.add_row(tokens, i + 1);
    }
    return std::move(builder).finish();
}

// ---------------------------------------------------------------------------
// CSV with a header row. Columns named like the CKD schema take their canonical
// types; other columns are numeric when every present token parses as a number.

Frame parse_csv(std::string_view input, const RepairTable& repairs) {
    const auto lines = text::split_lines(input);
    std::size_t i = 0;
    while (i < lines.size() && text::trim(lines[i]).empty()) {
        ++i;
    }
    if (i == lines.size()) {
        throw ParseError("missing header row", 1);
    }
    auto header = text::split_csv_record(lines[i]);
    const std::size_t header_line = i + 1;
    bool index_column = false;
    if (!header.empty()) {
        const auto first = text::lower(text::trim(header.front()));
        index_column = first.empty() || first == "id";
    }
    std::vector<std::string> names;
    for (std::size_t k = index_column ? 1 : 0; k < header.size(); ++k) {
        names.push_back(repairs.canonical_column(text::trim(header[k])));
        if (names.back().empty()) {
            throw ParseError("empty column name", header_line);
        }
    }

    std::vector<std::vector<std::string>> cells;
    std::vector<std::size_t> line_numbers;
    for (++i; i < lines.size(); ++i) {
        if (text::trim(lines[i]).empty()) {
            continue;
        }
        auto fields = text::split_csv_record(lines[i]);
        if (fields.size() != header.size()) {
            throw ParseError("expected " + std::to_string(header.size()) + " fields, found " +
                                 std::to_string(fields.size()),
                             i + 1);
        }
        if (index_column) {
            fields.erase(fields.begin());
        }
        cells.push_back(std::move(fields));
        line_numbers.push_back(i + 1);
    }

    const bool canonical = std::all_of(names.begin(), names.end(), [](const std::string& n) {
        return find_canonical(n) != nullptr;
    });
    std::vector<ColumnSpec> schema;
    for (std::size_t j = 0; j < names.size(); ++j) {
        if (canonical) {
            schema.push_back(*find_canonical(names[j]));
            continue;
        }
        ColumnSpec spec{names[j], ColumnKind::numeric, {}, "", false};
        for (const auto& row : cells) {
            const auto t = text::trim(row[j]);
            if (!is_missing_token(t) && !text::parse_double(t)) {
                spec.kind = ColumnKind::categorical;
                break;
            }
        }
        if (spec.kind == ColumnKind::categorical) {
            // Known columns keep their canonical category order so the positive class stays first.
            if (const auto* canon = find_canonical(names[j]); canon && canon->kind == ColumnKind::categorical) {
                spec.categories = canon->categories;
            }
            for (const auto& row : cells) {
                const auto t = std::string(text::trim(row[j]));
                if (!is_missing_token(t) &&
                    std::find(spec.categories.begin(), spec.categories.end(), t) == spec.categories.end()) {
                    spec.categories.push_back(t);
                }
            }
        }
        schema.push_back(std::move(spec));
    }

    auto label = pick_label(schema);
    FrameBuilder builder(std::move(schema), std::move(label), repairs);
    std::vector<std::string_view> views;
    for (std::size_t r = 0; r < cells.size(); ++r) {
        views.assign(cells[r].begin(), cells[r].end());
        builder.add_row(views, line_numbers[r]);
    }
    return std::move(builder).finish();
}

Frame load_dataset(const std::filesystem::path& path, FileFormat format, const RepairTable& repairs) {
    const auto content = read_file(path);
    return format == FileFormat::arff ? parse_arff(content, repairs) : parse_csv(content, repairs);
}

std::string to_csv(const Frame& frame) {
    std::string out;
    for (std::size_t j = 0; j < frame.cols(); ++j) {
        if (j) {
            out += ',';
        }
        out += frame.column(j).name;
    }
    out += '\n';
    for (std::size_t r = 0; r < frame.rows(); ++r) {
        for (std::size_t j = 0; j < frame.cols(); ++j) {
            if (j) {
                out += ',';
            }
            if (frame.missing(r, j)) {
                out += '?';
            } else if (frame.column(j).kind == ColumnKind::categorical) {
                out += frame.token(r, j);
            } else {
                out += text::format_double(frame.value(r, j));
            }
        }
        out += '\n';
    }
    return out;
}

void write_csv(const Frame& frame, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error("cannot write '" + path.string() + "'");
    }
    out << to_csv(frame);
}

// ---------------------------------------------------------------------------
// Cleaning

Frame clean(const Frame& frame, const RepairTable& repairs) {
    std::vector<ColumnSpec> schema;
    // Per column: old category index -> new value (NaN marks "becomes missing").
    std::vector<std::vector<double>> remap(frame.cols());
    std::vector<bool> coerce(frame.cols(), false);

    for (std::size_t j = 0; j < frame.cols(); ++j) {
        ColumnSpec spec = frame.column(j);
        spec.name = repairs.canonical_column(spec.name);
        const ColumnSpec* canon = find_canonical(spec.name);
        const bool to_numeric =
            spec.kind == ColumnKind::categorical &&
            (std::find(repairs.numeric_columns.begin(), repairs.numeric_columns.end(), spec.name) !=
                 repairs.numeric_columns.end() ||
             (canon && canon->kind == ColumnKind::numeric));
        if (to_numeric) {
            for (const auto& c : spec.categories) {
                const auto v = text::parse_double(repairs.repair(c));
                remap[j].push_back(v ? *v : std::nan(""));
            }
            spec.kind = ColumnKind::numeric;
            spec.categories.clear();
            coerce[j] = true;
        } else if (spec.kind == ColumnKind::categorical) {
            std::vector<std::string> target;
            if (canon && canon->kind == ColumnKind::categorical) {
                target = canon->categories;
            }
            for (const auto& c : spec.categories) {
                const auto fixed = repairs.repair(c);
                auto it = std::find(target.begin(), target.end(), fixed);
                if (it == target.end()) {
                    if (canon) {
                        throw SchemaError("column '" + spec.name + "': token '" + c + "' cannot be repaired");
                    }
                    target.push_back(fixed);
                    it = target.end() - 1;
                }
                remap[j].push_back(static_cast<double>(it - target.begin()));
            }
            spec.categories = std::move(target);
        }
        if (canon) {
            spec.unit = canon->unit;
        }
        schema.push_back(std::move(spec));
    }

    Frame out(std::move(schema), repairs.canonical_column(frame.label()));
    std::vector<double> values(frame.cols());
    std::vector<std::uint8_t> mask(frame.cols());
    for (std::size_t r = 0; r < frame.rows(); ++r) {
        for (std::size_t j = 0; j < frame.cols(); ++j) {
            mask[j] = frame.missing(r, j) ? 1 : 0;
            values[j] = frame.value(r, j);
            if (!mask[j] && !remap[j].empty()) {
                const double v = remap[j][static_cast<std::size_t>(values[j])];
                if (std::isnan(v)) {
                    mask[j] = 1;
                } else {
                    values[j] = v;
                }
            }
        }
        if (mask[out.label_index()]) {
            throw SchemaError("label missing in row " + std::to_string(r));
        }
        out.append_row(values, mask);
    }
    return out;
}

std::size_t count_missing(const Frame& frame) {
    std::size_t n = 0;
    const auto features = frame.feature_indices();
    for (std::size_t r = 0; r < frame.rows(); ++r) {
        for (std::size_t j : features) {
            n += frame.missing(r, j) ? 1 : 0;
        }
    }
    return n;
}

std::vector<std::pair<std::size_t, std::size_t>> find_duplicates(const Frame& frame) {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    for (std::size_t a = 0; a < frame.rows(); ++a) {
        for (std::size_t b = a + 1; b < frame.rows(); ++b) {
            const auto va = frame.row_values(a);
            const auto vb = frame.row_values(b);
            const auto ma = frame.row_mask(a);
            const auto mb = frame.row_mask(b);
            if (std::equal(ma.begin(), ma.end(), mb.begin()) && std::equal(va.begin(), va.end(), vb.begin())) {
                out.emplace_back(a, b);
            }
        }
    }
    return out;
}

std::vector<std::size_t> class_counts(const Frame& frame) {
    const auto& spec = frame.column(frame.label_index());
    std::vector<std::size_t> counts(spec.categories.size(), 0);
    for (std::size_t r = 0; r < frame.rows(); ++r) {
        ++counts.at(static_cast<std::size_t>(frame.value(r, frame.label_index())));
    }
    return counts;
}

SplitPair split(const Frame& frame, double ratio, std::uint64_t seed, bool stratify) {
    if (!(ratio > 0.0 && ratio < 1.0)) {
        throw ArgumentError("split ratio must lie in (0, 1), got " + text::format_double(ratio));
    }
    const std::size_t n = frame.rows();
    if (n == 0) {
        throw ArgumentError("cannot split an empty frame");
    }
    const auto n_train = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(n)));
    Rng rng(seed);
    SplitPair out;
    out.seed = seed;
    out.ratio = ratio;

    if (!stratify) {
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        rng.shuffle(order.begin(), order.end());
        out.train_rows.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
        out.test_rows.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
    } else {
        const auto& spec = frame.column(frame.label_index());
        std::vector<std::vector<std::size_t>> by_class(spec.categories.size());
        for (std::size_t r = 0; r < n; ++r) {
            by_class[static_cast<std::size_t>(frame.value(r, frame.label_index()))].push_back(r);
        }
        // Largest-remainder allocation keeps |train| = round(ratio * n).
        std::vector<std::size_t> take(by_class.size());
        std::vector<std::pair<double, std::size_t>> remainders;
        std::size_t assigned = 0;
        for (std::size_t c = 0; c < by_class.size(); ++c) {
            const double exact = ratio * static_cast<double>(by_class[c].size());
            take[c] = static_cast<std::size_t>(std::floor(exact));
            assigned += take[c];
            remainders.emplace_back(-(exact - std::floor(exact)), c);
        }
        std::sort(remainders.begin(), remainders.end());
        for (std::size_t k = 0; assigned < n_train && k < remainders.size(); ++k, ++assigned) {
            ++take[remainders[k].second];
        }
        for (std::size_t c = 0; c < by_class.size(); ++c) {
            rng.shuffle(by_class[c].begin(), by_class[c].end());
            out.train_rows.insert(out.train_rows.end(), by_class[c].begin(),
                                  by_class[c].begin() + static_cast<std::ptrdiff_t>(take[c]));
            out.test_rows.insert(out.test_rows.end(), by_class[c].begin() + static_cast<std::ptrdiff_t>(take[c]),
                                 by_class[c].end());
        }
        rng.shuffle(out.train_rows.begin(), out.train_rows.end());
        rng.shuffle(out.test_rows.begin(), out.test_rows.end());
    }
    out.train = frame.select_rows(out.train_rows);
    out.test = frame.select_rows(out.test_rows);
    return out;
}

} // namespace ckdpipe
