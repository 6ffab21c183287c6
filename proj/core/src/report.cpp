#include <ckdpipe/experiment.hpp>

#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <iterator>
#include <map>

namespace ckdpipe {

namespace {

constexpr std::array<std::string_view, 3> set_order{"f1", "f2", "f3"};

std::string pct(double fraction) { return fmt::format("{:.2f}", 100.0 * fraction); }

std::string counts(const ClassCount& c) { return fmt::format("{}/{}", c.positive, c.negative); }

std::string join_set(const FeatureSet& s) {
    return s.empty() ? std::string("(empty)") : fmt::format("{}", fmt::join(s, ", "));
}

const CvReport* find_cv(const RunReport& r, std::string_view alg, std::string_view set) {
    for (const auto& c : r.cv) {
        if (c.algorithm == alg && c.feature_set == set) {
            return &c;
        }
    }
    return nullptr;
}

const MetricReport* find_test(const RunReport& r, std::string_view alg, std::string_view set) {
    for (const auto& m : r.test) {
        if (m.algorithm == alg && m.feature_set == set) {
            return &m;
        }
    }
    return nullptr;
}

std::vector<std::string> present_sets(const RunReport& r) {
    std::vector<std::string> out;
    for (auto s : set_order) {
        const bool any = std::any_of(r.test.begin(), r.test.end(), [&](const auto& m) { return m.feature_set == s; }) ||
                         std::any_of(r.cv.begin(), r.cv.end(), [&](const auto& c) { return c.feature_set == s; });
        if (any) {
            out.emplace_back(s);
        }
    }
    return out;
}

std::vector<std::string> present_algorithms(const RunReport& r) {
    std::vector<std::string> out;
    for (auto a : all_algorithms) {
        const auto name = std::string(to_string(a));
        const bool any = std::any_of(r.test.begin(), r.test.end(), [&](const auto& m) { return m.algorithm == name; }) ||
                         std::any_of(r.cv.begin(), r.cv.end(), [&](const auto& c) { return c.algorithm == name; });
        if (any) {
            out.push_back(name);
        }
    }
    return out;
}

std::optional<double> lookup_r(const RunReport& r, std::string_view a, std::string_view b) {
    const auto& f = r.correlation_features;
    const auto ia = std::find(f.begin(), f.end(), a);
    const auto ib = std::find(f.begin(), f.end(), b);
    if (ia == f.end() || ib == f.end() || r.correlation.rows() != f.size()) {
        return std::nullopt;
    }
    return r.correlation(static_cast<std::size_t>(ia - f.begin()), static_cast<std::size_t>(ib - f.begin()));
}

struct PublishedResample {
    std::string_view set;
    ClassCount training;
    ClassCount after_lof;
    std::size_t smote_per_class;
};

constexpr std::array<PublishedResample, 3> published_resample{{
    {"f1", {116, 184}, {114, 160}, 160},
    {"f2", {116, 184}, {113, 166}, 169},
    {"f3", {116, 184}, {109, 158}, 158},
}};

constexpr std::size_t lof_removed_tolerance = 8;

struct PublishedPair {
    std::string_view a;
    std::string_view b;
    double r;
};

constexpr std::array<PublishedPair, 5> published_pairs{{
    {"rbc", "su", 0.74},
    {"sc", "bu", 0.87},
    {"pot", "bu", 0.78},
    {"pot", "sc", 0.78},
    {"dm", "htn", 0.71},
}};

struct SizeBand {
    std::string_view set;
    std::size_t published;
    std::size_t lo;
    std::size_t hi;
};

constexpr std::array<SizeBand, 3> size_bands{{{"f1", 13, 10, 16}, {"f2", 8, 6, 11}, {"f3", 5, 3, 8}}};

constexpr double cv_tolerance = 2.5;
constexpr double rf_cv_floor = 98.5;
constexpr double test_tolerance = 4.0;

std::string_view test_table(std::string_view set) {
    if (set == "f1") {
        return "V";
    }
    if (set == "f2") {
        return "VI";
    }
    return "VII";
}

bool wanted(const std::vector<std::string>& tables, std::string_view t) {
    return tables.empty() || std::find(tables.begin(), tables.end(), t) != tables.end();
}

const char* mark(bool ok) { return ok ? "pass" : "flag"; }

} // namespace

std::string to_markdown(const RunReport& r) {
    std::string out;
    auto it = std::back_inserter(out);

    fmt::format_to(it, "# ckdpipe run\n\n");
    fmt::format_to(it, "## Dataset\n\n");
    fmt::format_to(it, "| rows | classes | missing cells | duplicate pairs | train | test |\n");
    fmt::format_to(it, "|---|---|---|---|---|---|\n");
    std::vector<std::string> classes;
    for (std::size_t c = 0; c < r.dataset.class_names.size(); ++c) {
        classes.push_back(fmt::format("{} {}", r.dataset.class_names[c], r.dataset.class_counts[c]));
    }
    fmt::format_to(it, "| {} | {} | {} | {} | {} | {} |\n\n", r.dataset.rows, fmt::join(classes, ", "),
                   r.dataset.missing_cells, r.dataset.duplicate_pairs, r.train_rows, r.test_rows);

    fmt::format_to(it, "## Table II: resampling (positive/negative)\n\n");
    fmt::format_to(it, "| feature set | training | after LOF | LOF removed | after SMOTE | SMOTE k |\n");
    fmt::format_to(it, "|---|---|---|---|---|---|\n");
    for (const auto& s : r.resampling) {
        fmt::format_to(it, "| {} | {} | {} | {} | {} | {} |\n", s.feature_set, counts(s.training),
                       counts(s.after_lof), s.lof_removed, counts(s.after_smote), s.smote_k);
    }
    out += "\n";

    fmt::format_to(it, "## Table III: correlated feature pairs\n\n");
    out += selection_markdown(r.selection);
    fmt::format_to(it, "\nS_cor: {}\n\n", join_set(r.selection.set("s_cor")));

    const auto sets = present_sets(r);
    const auto algorithms = present_algorithms(r);

    if (!r.cv.empty()) {
        fmt::format_to(it, "## Table IV: cross-validation mean accuracy (%)\n\n| model |");
        for (const auto& s : sets) {
            fmt::format_to(it, " {} |", s);
        }
        out += "\n|---|";
        for (std::size_t i = 0; i < sets.size(); ++i) {
            out += "---|";
        }
        out += "\n";
        for (const auto& a : algorithms) {
            fmt::format_to(it, "| {} |", a);
            for (const auto& s : sets) {
                const auto* c = find_cv(r, a, s);
                fmt::format_to(it, " {} |", c ? fmt::format("{} ± {}", pct(c->mean), pct(c->stddev)) : "-");
            }
            out += "\n";
        }
        out += "\n";
    }

    for (const auto& s : sets) {
        fmt::format_to(it, "## Table {}: test metrics on {} (%)\n\n", test_table(s), s);
        fmt::format_to(it, "| model | accuracy | macro F1 | AUC | TP | FP | TN | FN |\n");
        fmt::format_to(it, "|---|---|---|---|---|---|---|---|\n");
        for (const auto& a : algorithms) {
            if (const auto* m = find_test(r, a, s)) {
                fmt::format_to(it, "| {} | {} | {} | {} | {} | {} | {} | {} |\n", a, pct(m->accuracy),
                               pct(m->f1_macro), pct(m->auc), m->counts.tp, m->counts.fp, m->counts.tn,
                               m->counts.fn);
            }
        }
        out += "\n";
    }

    if (!r.test.empty()) {
        fmt::format_to(it, "## Table VIII: best test accuracy per feature set\n\n");
        fmt::format_to(it, "| feature set | features | model | accuracy | AUC |\n|---|---|---|---|---|\n");
        for (const auto& s : sets) {
            const MetricReport* best = nullptr;
            for (const auto& m : r.test) {
                if (m.feature_set == s && (best == nullptr || m.accuracy > best->accuracy)) {
                    best = &m;
                }
            }
            if (best != nullptr) {
                fmt::format_to(it, "| {} | {} | {} | {} | {} |\n", s, r.selection.set(s).size(), best->algorithm,
                               pct(best->accuracy), pct(best->auc));
            }
        }
        out += "\n";
    }

    if (!r.warnings.empty()) {
        out += "## Warnings\n\n";
        for (const auto& w : r.warnings) {
            fmt::format_to(it, "- {}\n", w);
        }
        out += "\n";
    }
    fmt::format_to(it, "Wall clock: {:.1f} s\n", r.wall_clock_seconds);
    return out;
}

std::vector<ComparisonRow> compare_with_published(const RunReport& r, const std::vector<std::string>& tables) {
    std::vector<ComparisonRow> rows;

    if (wanted(tables, "II")) {
        for (const auto& s : r.resampling) {
            // A single pass over all features is compared with the 13-feature row.
            const std::string_view key = s.feature_set == "all" ? "f1" : std::string_view(s.feature_set);
            const auto pub = std::find_if(published_resample.begin(), published_resample.end(),
                                          [&](const auto& p) { return p.set == key; });
            if (pub == published_resample.end()) {
                continue;
            }
            const std::size_t pub_removed = pub->training.positive + pub->training.negative -
                                            pub->after_lof.positive - pub->after_lof.negative;
            const auto lo = std::min(s.training.positive, s.training.negative);
            const auto hi = std::max(s.training.positive, s.training.negative);
            rows.push_back({"II", fmt::format("{} training", s.feature_set), counts(pub->training),
                            counts(s.training), mark(lo == pub->training.positive && hi == pub->training.negative)});
            const auto diff = s.lof_removed > pub_removed ? s.lof_removed - pub_removed : pub_removed - s.lof_removed;
            rows.push_back({"II", fmt::format("{} LOF removed", s.feature_set),
                            fmt::format("{} ± {}", pub_removed, lof_removed_tolerance),
                            fmt::format("{}", s.lof_removed), mark(diff <= lof_removed_tolerance)});
            rows.push_back({"II", fmt::format("{} after SMOTE", s.feature_set),
                            fmt::format("{0}/{0}", pub->smote_per_class), counts(s.after_smote),
                            mark(s.after_smote.positive == s.after_smote.negative)});
        }
    }

    if (wanted(tables, "III")) {
        for (const auto& p : published_pairs) {
            const auto v = lookup_r(r, p.a, p.b);
            rows.push_back({"III", fmt::format("r({}, {})", p.a, p.b), fmt::format("{:.2f}", p.r),
                            v ? fmt::format("{:.2f}", *v) : "-", mark(v && std::abs(*v - p.r) <= 0.05)});
        }
        const auto& s_cor = r.selection.set("s_cor");
        rows.push_back({"III", "S_cor", "bu", join_set(s_cor), mark(s_cor == FeatureSet{"bu"})});
        for (const auto& b : size_bands) {
            const auto n = r.selection.set(b.set).size();
            rows.push_back({"III", fmt::format("|{}|", b.set), fmt::format("{}", b.published), fmt::format("{}", n),
                            mark(n >= b.lo && n <= b.hi)});
        }
    }

    if (wanted(tables, "IV")) {
        for (const auto& c : r.cv) {
            const auto alg = parse_algorithm(c.algorithm);
            const auto pub = published_cv_accuracy(alg, c.feature_set);
            if (!pub) {
                continue;
            }
            const double got = 100.0 * c.mean;
            bool ok = got >= *pub - cv_tolerance;
            if (alg == Algorithm::rforest && c.feature_set == "f1") {
                ok = ok && got >= rf_cv_floor;
            }
            rows.push_back({"IV", fmt::format("{} {}", c.algorithm, c.feature_set), fmt::format("{:.2f}", *pub),
                            fmt::format("{:.2f}", got), mark(ok)});
        }
    }

    for (const auto& m : r.test) {
        const auto table = test_table(m.feature_set);
        if (!wanted(tables, table)) {
            continue;
        }
        const auto pub = published_test(parse_algorithm(m.algorithm), m.feature_set);
        if (!pub) {
            continue;
        }
        const std::array<std::pair<const char*, std::pair<double, double>>, 3> metrics{{
            {"accuracy", {pub->accuracy, 100.0 * m.accuracy}},
            {"F1", {pub->f1, 100.0 * m.f1_macro}},
            {"AUC", {pub->auc, 100.0 * m.auc}},
        }};
        for (const auto& [name, v] : metrics) {
            rows.push_back({std::string(table), fmt::format("{} {}", m.algorithm, name),
                            fmt::format("{:.2f}", v.first), fmt::format("{:.2f}", v.second),
                            mark(v.second >= v.first - test_tolerance)});
        }
    }
    return rows;
}

nlohmann::json to_json(const std::vector<ComparisonRow>& rows) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& row : rows) {
        j.push_back({{"table", row.table},
                     {"cell", row.cell},
                     {"published", row.published},
                     {"reproduced", row.reproduced},
                     {"marker", row.marker}});
    }
    return j;
}

std::string comparison_markdown(const std::vector<ComparisonRow>& rows) {
    std::string out = "| table | cell | published | reproduced | marker |\n|---|---|---|---|---|\n";
    auto it = std::back_inserter(out);
    std::size_t flagged = 0;
    for (const auto& row : rows) {
        fmt::format_to(it, "| {} | {} | {} | {} | {} |\n", row.table, row.cell, row.published, row.reproduced,
                       row.marker);
        flagged += row.marker == "flag" ? 1 : 0;
    }
    fmt::format_to(it, "\n{} of {} cells flagged\n", flagged, rows.size());
    return out;
}

} // namespace ckdpipe
