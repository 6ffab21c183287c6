#pragma once

#include <ckdpipe/dataset.hpp>
#include <ckdpipe/matrix.hpp>

#include <nlohmann/json.hpp>

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace ckdpipe {

// Every fit function below reads only the frame it is given; the pipeline tags each
// fitted stage with the partition it came from and refuses to replay anything else.

/// Two-category column -> the token encoded as 1 and the token encoded as 0.
struct EncoderMap {
    struct Pair {
        std::string one;
        std::string zero;
        friend bool operator==(const Pair&, const Pair&) = default;
    };
    std::map<std::string, Pair> columns;

    friend bool operator==(const EncoderMap&, const EncoderMap&) = default;
};

/// Token that encodes to 1 for the known CKD columns (rbc/pc: normal, pcc/ba: present,
/// appet: poor, yes/no columns: yes). Unknown columns use their first category.
[[nodiscard]] std::string_view encoded_positive(std::string_view column, std::span<const std::string> categories);

[[nodiscard]] EncoderMap onehot_fit(const Frame& train);
[[nodiscard]] Frame onehot_apply(const Frame& frame, const EncoderMap& map);

struct MinMaxParams {
    struct Range {
        double min = 0.0;
        double max = 0.0;
        friend bool operator==(const Range&, const Range&) = default;
    };
    std::map<std::string, Range> columns;

    friend bool operator==(const MinMaxParams&, const MinMaxParams&) = default;
};

/// x_n = (x - x_min) / (x_max - x_min) with training min/max over unmasked cells.
[[nodiscard]] MinMaxParams minmax_fit(const Frame& train);
/// No clipping; a constant training column maps every value to 0.
[[nodiscard]] Frame minmax_apply(const Frame& frame, const MinMaxParams& params);

struct ImputerModel {
    std::vector<std::string> features;
    Matrix reference;
    /// reference.rows() x features.size(), 1 = masked.
    std::vector<std::uint8_t> mask;
    /// Training mean of each feature over unmasked cells (fallback value).
    std::vector<double> column_means;
    std::size_t k = 5;

    friend bool operator==(const ImputerModel&, const ImputerModel&) = default;
};

[[nodiscard]] ImputerModel knn_impute_fit(const Frame& train, std::size_t k);

/// Fills each masked cell with the unweighted mean of that column over the k nearest
/// training rows that observe it. Distance is Euclidean over coordinates observed in
/// both rows, scaled by (features / shared coordinates). Donors sharing no observed
/// coordinate are skipped; with no donors left the training column mean is used.
[[nodiscard]] Frame knn_impute_apply(const Frame& frame, const ImputerModel& model);

/// Squared NaN-aware distance used by the imputer; nullopt when nothing is shared.
[[nodiscard]] std::optional<double> nan_euclidean_sq(std::span<const double> a, std::span<const std::uint8_t> a_mask,
                                                     std::span<const double> b,
                                                     std::span<const std::uint8_t> b_mask);

struct StandardParams {
    struct Moments {
        double mean = 0.0;
        double sd = 0.0;
        friend bool operator==(const Moments&, const Moments&) = default;
    };
    std::map<std::string, Moments> columns;

    friend bool operator==(const StandardParams&, const StandardParams&) = default;
};

/// Mean and population standard deviation per feature. Throws ContractError on masked cells.
[[nodiscard]] StandardParams standard_fit(const Frame& train);
/// z = (x - mean) / sd; sd == 0 maps to 0. Throws ContractError on masked cells.
[[nodiscard]] Frame standard_apply(const Frame& frame, const StandardParams& params);

enum class Stage { project, encode, minmax, impute, standardize };

[[nodiscard]] std::string_view to_string(Stage s) noexcept;
[[nodiscard]] Stage parse_stage(std::string_view s);

struct Projection {
    std::vector<std::string> features;
    friend bool operator==(const Projection&, const Projection&) = default;
};

using StageParams = std::variant<Projection, EncoderMap, MinMaxParams, ImputerModel, StandardParams>;

struct FittedStage {
    Stage stage = Stage::encode;
    /// Partition the parameters were learned from; only "train" may be applied.
    std::string provenance = "train";
    StageParams params;

    friend bool operator==(const FittedStage&, const FittedStage&) = default;
};

struct PipelineOptions {
    std::size_t k_impute = 5;
    /// Features kept by a project stage.
    std::vector<std::string> projection;
};

/// Ordered, immutable sequence of fitted stages. Stages must follow the canonical
/// order project -> encode -> minmax -> impute -> standardize (any may be absent).
class FittedPipeline {
public:
    FittedPipeline() = default;

    [[nodiscard]] bool fitted() const noexcept { return !stages_.empty(); }
    [[nodiscard]] const std::vector<FittedStage>& stages() const noexcept { return stages_; }
    [[nodiscard]] const FittedStage* find(Stage s) const noexcept;

    /// Appends a stage; throws StateError when it breaks the canonical order.
    void append(FittedStage stage);

    [[nodiscard]] Frame apply(const Frame& frame) const;

    friend bool operator==(const FittedPipeline&, const FittedPipeline&) = default;

private:
    std::vector<FittedStage> stages_;
};

/// Fits each stage on the output of the previous one, starting from `train`.
[[nodiscard]] FittedPipeline pipeline_fit(const Frame& train, std::span<const Stage> stages,
                                          const PipelineOptions& options = {});
/// Throws StateError when the pipeline has not been fitted.
[[nodiscard]] Frame pipeline_apply(const Frame& frame, const FittedPipeline& fitted);

inline constexpr int pipeline_format_version = 1;

[[nodiscard]] nlohmann::json to_json(const FittedPipeline& p);
[[nodiscard]] FittedPipeline pipeline_from_json(const nlohmann::json& j);

} // namespace ckdpipe
