#pragma once

#include <ckdpipe/dataset.hpp>
#include <ckdpipe/matrix.hpp>

#include <nlohmann/json.hpp>

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace ckdpipe {

enum class LofMode {
    /// Flag rows whose factor exceeds LofConfig::threshold.
    threshold,
    /// Flag the round(contamination * n) rows with the largest factors.
    contamination,
};

[[nodiscard]] std::string_view to_string(LofMode m) noexcept;
[[nodiscard]] LofMode parse_lof_mode(std::string_view s);

struct LofConfig {
    std::size_t k = 20;
    LofMode mode = LofMode::threshold;
    double threshold = 1.5;
    double contamination = 0.1;

    friend bool operator==(const LofConfig&, const LofConfig&) = default;
};

struct SmoteConfig {
    std::size_t k = 5;
    std::uint64_t seed = 0;

    friend bool operator==(const SmoteConfig&, const SmoteConfig&) = default;
};

/// Floor applied to the mean reachability distance so duplicate points get a finite density.
inline constexpr double lof_density_floor = 1e-12;

/// Local outlier factor of every row against its k nearest neighbours (Euclidean,
/// exactly k neighbours, ties by row index). Throws ArgumentError unless 1 <= k < n.
[[nodiscard]] std::vector<double> lof_scores(const Matrix& x, std::size_t k);

struct OutlierResult {
    Frame frame;
    std::vector<double> scores;
    /// Indices (into the input frame) of the removed rows, ascending.
    std::vector<std::size_t> removed;
};

/// Scores the feature columns of a fully imputed training frame and drops flagged rows.
[[nodiscard]] OutlierResult detect_outliers(const Frame& train, const LofConfig& cfg);
[[nodiscard]] Frame remove_outliers(const Frame& train, const LofConfig& cfg);

struct SmoteResult {
    Frame frame;
    std::size_t synthetic = 0;
    std::size_t k_used = 0;
    std::vector<std::string> warnings;
};

/// Appends synthetic minority rows until both classes have the same count. Synthetic
/// row s draws from its own generator derived from (cfg.seed, s).
[[nodiscard]] SmoteResult smote_balance(const Frame& train, const SmoteConfig& cfg);
[[nodiscard]] Frame smote(const Frame& train, const SmoteConfig& cfg);

void to_json(nlohmann::json& j, const LofConfig& c);
void from_json(const nlohmann::json& j, LofConfig& c);
void to_json(nlohmann::json& j, const SmoteConfig& c);
void from_json(const nlohmann::json& j, SmoteConfig& c);

} // namespace ckdpipe
