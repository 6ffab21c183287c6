#pragma once

#include <ckdpipe/matrix.hpp>
#include <ckdpipe/random.hpp>

#include <nlohmann/json.hpp>

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace ckdpipe {

enum class Criterion {
    gini,
    entropy,
    /// Squared-error regression; split quality wl*wr/(wl+wr) * (mean_l - mean_r)^2.
    friedman_mse,
    /// Second-order boosting on (gradient, hessian) pairs with L2 leaf penalty.
    newton,
};

[[nodiscard]] std::string_view to_string(Criterion c) noexcept;
[[nodiscard]] Criterion parse_criterion(std::string_view s);

struct TreeParams {
    Criterion criterion = Criterion::gini;
    /// 0 = unlimited.
    std::size_t max_depth = 0;
    /// Features drawn per split; 0 = all. Requires an Rng when non-zero.
    std::size_t max_features = 0;
    std::size_t min_samples_split = 2;
    /// newton: minimum hessian sum per child, leaf penalty, minimum gain to split.
    double min_child_weight = 1.0;
    double lambda = 1.0;
    double min_split_gain = 1e-6;
};

struct TreeNode {
    int feature = -1;
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    /// Class-1 fraction (classification), mean target (regression), or -G/(H+lambda) (newton).
    double value = 0.0;
    double weight = 0.0;
    /// Weighted impurity decrease achieved by this node's split (0 for leaves).
    double gain = 0.0;

    [[nodiscard]] bool leaf() const noexcept { return feature < 0; }

    friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

/// Per-sample training inputs. Samples with zero weight do not participate.
struct TreeTargets {
    /// 0/1 label (classification), target (regression), or gradient (newton).
    std::span<const double> y;
    /// Sample weights; empty means all ones.
    std::span<const double> w;
    /// Hessians (newton only).
    std::span<const double> h;
};

/// Binary decision tree. Rows go left when x[feature] <= threshold.
class Tree {
public:
    Tree() = default;
    Tree(std::vector<TreeNode> nodes, std::size_t n_features) : nodes_(std::move(nodes)), n_features_(n_features) {}

    [[nodiscard]] const std::vector<TreeNode>& nodes() const noexcept { return nodes_; }
    [[nodiscard]] std::vector<TreeNode>& nodes() noexcept { return nodes_; }
    [[nodiscard]] std::size_t n_features() const noexcept { return n_features_; }

    [[nodiscard]] std::size_t leaf_index(std::span<const double> row) const;
    [[nodiscard]] double predict(std::span<const double> row) const { return nodes_[leaf_index(row)].value; }
    [[nodiscard]] std::size_t depth() const;

    /// Per-feature sum of split gains; normalised to sum to 1 unless `normalize` is false.
    /// A tree without splits yields all zeros.
    [[nodiscard]] std::vector<double> importances(bool normalize = true) const;

    friend bool operator==(const Tree&, const Tree&) = default;

private:
    std::vector<TreeNode> nodes_;
    std::size_t n_features_ = 0;
};

/// Greedy top-down growth. Candidate thresholds are midpoints between consecutive
/// distinct values; among equal-quality splits the lowest feature index and then the
/// lowest threshold win.
[[nodiscard]] Tree grow_tree(const Matrix& x, const TreeTargets& targets, const TreeParams& params,
                             Rng* rng = nullptr);

/// Weighted class-1 fraction impurity helpers shared with the models module.
[[nodiscard]] double gini_binary(double w0, double w1) noexcept;
[[nodiscard]] double entropy_binary(double w0, double w1) noexcept;

void to_json(nlohmann::json& j, const Tree& t);
void from_json(const nlohmann::json& j, Tree& t);

} // namespace ckdpipe
