#include <ckdpipe/tree.hpp>

#include <ckdpipe/error.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

namespace ckdpipe {

std::string_view to_string(Criterion c) noexcept {
    switch (c) {
    case Criterion::gini:
        return "gini";
    case Criterion::entropy:
        return "entropy";
    case Criterion::friedman_mse:
        return "friedman_mse";
    case Criterion::newton:
        return "newton";
    }
    return "unknown";
}

Criterion parse_criterion(std::string_view s) {
    for (auto c : {Criterion::gini, Criterion::entropy, Criterion::friedman_mse, Criterion::newton}) {
        if (to_string(c) == s) {
            return c;
        }
    }
    throw ArgumentError("unknown split criterion '" + std::string(s) + "'");
}

double gini_binary(double w0, double w1) noexcept {
    const double w = w0 + w1;
    if (w <= 0.0) {
        return 0.0;
    }
    const double p0 = w0 / w;
    const double p1 = w1 / w;
    return 1.0 - p0 * p0 - p1 * p1;
}

double entropy_binary(double w0, double w1) noexcept {
    const double w = w0 + w1;
    double h = 0.0;
    for (double c : {w0, w1}) {
        if (c > 0.0) {
            const double p = c / w;
            h -= p * std::log2(p);
        }
    }
    return h;
}

namespace {

/// Running sums over a set of samples: weight, weighted target, weighted squared target, hessian.
struct Stats {
    double w = 0.0;
    double wy = 0.0;
    double wyy = 0.0;
    double h = 0.0;

    void add(double wi, double yi, double hi) {
        w += wi;
        wy += wi * yi;
        wyy += wi * yi * yi;
        h += hi;
    }
    Stats minus(const Stats& o) const { return {w - o.w, wy - o.wy, wyy - o.wyy, h - o.h}; }
};

class Grower {
public:
    Grower(const Matrix& x, const TreeTargets& t, const TreeParams& p, Rng* rng)
        : x_(x), t_(t), p_(p), rng_(rng) {}

    Tree run() {
        std::vector<std::size_t> samples;
        for (std::size_t i = 0; i < x_.rows(); ++i) {
            if (weight(i) > 0.0) {
                samples.push_back(i);
            }
        }
        if (samples.empty()) {
            throw ArgumentError("tree: no samples with positive weight");
        }
        grow(samples, 0);
        return Tree(std::move(nodes_), x_.cols());
    }

private:
    double weight(std::size_t i) const { return t_.w.empty() ? 1.0 : t_.w[i]; }
    double hess(std::size_t i) const { return t_.h.empty() ? 0.0 : t_.h[i]; }

    Stats stats_of(const std::vector<std::size_t>& samples) const {
        Stats s;
        for (std::size_t i : samples) {
            s.add(weight(i), t_.y[i], hess(i));
        }
        return s;
    }

    double leaf_value(const Stats& s) const {
        if (p_.criterion == Criterion::newton) {
            return -s.wy / (s.h + p_.lambda);
        }
        return s.w > 0.0 ? s.wy / s.w : 0.0;
    }

    double impurity(const Stats& s) const {
        switch (p_.criterion) {
        case Criterion::gini:
            return gini_binary(s.w - s.wy, s.wy);
        case Criterion::entropy:
            return entropy_binary(s.w - s.wy, s.wy);
        case Criterion::friedman_mse: {
            if (s.w <= 0.0) {
                return 0.0;
            }
            const double mean = s.wy / s.w;
            return std::max(0.0, s.wyy / s.w - mean * mean);
        }
        case Criterion::newton:
            return 0.0;
        }
        return 0.0;
    }

    double split_gain(const Stats& parent, const Stats& l, const Stats& r) const {
        switch (p_.criterion) {
        case Criterion::gini:
        case Criterion::entropy:
            return parent.w * impurity(parent) - l.w * impurity(l) - r.w * impurity(r);
        case Criterion::friedman_mse: {
            const double diff = l.wy / l.w - r.wy / r.w;
            return l.w * r.w / parent.w * diff * diff;
        }
        case Criterion::newton:
            return l.wy * l.wy / (l.h + p_.lambda) + r.wy * r.wy / (r.h + p_.lambda) -
                   parent.wy * parent.wy / (parent.h + p_.lambda);
        }
        return 0.0;
    }

    bool is_terminal(const Stats& s, std::size_t n_samples, std::size_t depth) const {
        if (p_.max_depth != 0 && depth >= p_.max_depth) {
            return true;
        }
        if (n_samples < p_.min_samples_split) {
            return true;
        }
        switch (p_.criterion) {
        case Criterion::gini:
        case Criterion::entropy:
            return s.wy <= 0.0 || s.wy >= s.w;
        case Criterion::friedman_mse:
            return impurity(s) <= std::numeric_limits<double>::epsilon();
        case Criterion::newton:
            return false;
        }
        return false;
    }

    std::vector<std::size_t> candidate_features(const std::vector<std::size_t>& samples) {
        std::vector<std::size_t> varying;
        for (std::size_t f = 0; f < x_.cols(); ++f) {
            const double first = x_(samples.front(), f);
            for (std::size_t i : samples) {
                if (x_(i, f) != first) {
                    varying.push_back(f);
                    break;
                }
            }
        }
        if (p_.max_features != 0 && p_.max_features < varying.size()) {
            if (rng_ == nullptr) {
                throw ArgumentError("tree: feature subsampling needs a random generator");
            }
            for (std::size_t i = 0; i < p_.max_features; ++i) {
                std::swap(varying[i], varying[i + rng_->below(varying.size() - i)]);
            }
            varying.resize(p_.max_features);
            std::sort(varying.begin(), varying.end());
        }
        return varying;
    }

    struct Split {
        int feature = -1;
        double threshold = 0.0;
        double gain = -std::numeric_limits<double>::infinity();
    };

    Split best_split(const std::vector<std::size_t>& samples, const Stats& parent) {
        Split best;
        std::vector<std::pair<double, std::size_t>> sorted(samples.size());
        for (std::size_t f : candidate_features(samples)) {
            for (std::size_t k = 0; k < samples.size(); ++k) {
                sorted[k] = {x_(samples[k], f), samples[k]};
            }
            std::sort(sorted.begin(), sorted.end());
            Stats left;
            for (std::size_t k = 0; k + 1 < sorted.size(); ++k) {
                const std::size_t i = sorted[k].second;
                left.add(weight(i), t_.y[i], hess(i));
                const double a = sorted[k].first;
                const double b = sorted[k + 1].first;
                if (a == b) {
                    continue;
                }
                const Stats right = parent.minus(left);
                // Hessian sums carry rounding from parent.minus(left); allow a few ulps.
                const double min_h = p_.min_child_weight * (1.0 - 1e-12);
                if (p_.criterion == Criterion::newton && (left.h < min_h || right.h < min_h)) {
                    continue;
                }
                const double gain = split_gain(parent, left, right);
                // Rounding noise must not beat an earlier split of equal quality.
                if (best.feature < 0 || gain > best.gain + 1e-12 * std::max(1.0, std::abs(best.gain))) {
                    double t = a / 2.0 + b / 2.0;
                    if (t >= b || !std::isfinite(t)) {
                        t = a;
                    }
                    best = {static_cast<int>(f), t, gain};
                }
            }
        }
        if (p_.criterion == Criterion::newton && best.gain <= p_.min_split_gain) {
            best.feature = -1;
        }
        return best;
    }

    int grow(const std::vector<std::size_t>& samples, std::size_t depth) {
        const Stats s = stats_of(samples);
        const int id = static_cast<int>(nodes_.size());
        nodes_.push_back(TreeNode{});
        nodes_[id].value = leaf_value(s);
        nodes_[id].weight = s.w;
        if (is_terminal(s, samples.size(), depth)) {
            return id;
        }
        const Split split = best_split(samples, s);
        if (split.feature < 0) {
            return id;
        }
        std::vector<std::size_t> left;
        std::vector<std::size_t> right;
        for (std::size_t i : samples) {
            (x_(i, static_cast<std::size_t>(split.feature)) <= split.threshold ? left : right).push_back(i);
        }
        nodes_[id].feature = split.feature;
        nodes_[id].threshold = split.threshold;
        nodes_[id].gain = std::max(0.0, split.gain);
        const int l = grow(left, depth + 1);
        const int r = grow(right, depth + 1);
        nodes_[id].left = l;
        nodes_[id].right = r;
        return id;
    }

    const Matrix& x_;
    const TreeTargets& t_;
    const TreeParams& p_;
    Rng* rng_;
    std::vector<TreeNode> nodes_;
};

} // namespace

Tree grow_tree(const Matrix& x, const TreeTargets& targets, const TreeParams& params, Rng* rng) {
    if (targets.y.size() != x.rows() || (!targets.w.empty() && targets.w.size() != x.rows()) ||
        (params.criterion == Criterion::newton && targets.h.size() != x.rows())) {
        throw ArgumentError("tree: target length does not match the number of rows");
    }
    if (x.rows() == 0 || x.cols() == 0) {
        throw ArgumentError("tree: empty training matrix");
    }
    return Grower(x, targets, params, rng).run();
}

std::size_t Tree::leaf_index(std::span<const double> row) const {
    std::size_t id = 0;
    while (!nodes_[id].leaf()) {
        const auto& n = nodes_[id];
        id = static_cast<std::size_t>(row[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right);
    }
    return id;
}

std::size_t Tree::depth() const {
    std::vector<std::size_t> d(nodes_.size(), 0);
    std::size_t deepest = 0;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        deepest = std::max(deepest, d[i]);
        if (!nodes_[i].leaf()) {
            d[static_cast<std::size_t>(nodes_[i].left)] = d[i] + 1;
            d[static_cast<std::size_t>(nodes_[i].right)] = d[i] + 1;
        }
    }
    return deepest;
}

std::vector<double> Tree::importances(bool normalize) const {
    std::vector<double> imp(n_features_, 0.0);
    double total = 0.0;
    for (const auto& n : nodes_) {
        if (!n.leaf()) {
            imp[static_cast<std::size_t>(n.feature)] += n.gain;
            total += n.gain;
        }
    }
    if (normalize && total > 0.0) {
        for (double& v : imp) {
            v /= total;
        }
    }
    return imp;
}

void to_json(nlohmann::json& j, const Tree& t) {
    j = nlohmann::json::object();
    j["n_features"] = t.n_features();
    auto& nodes = j["nodes"] = nlohmann::json::array();
    for (const auto& n : t.nodes()) {
        nodes.push_back({n.feature, n.threshold, n.left, n.right, n.value, n.weight, n.gain});
    }
}

void from_json(const nlohmann::json& j, Tree& t) {
    std::vector<TreeNode> nodes;
    for (const auto& a : j.at("nodes")) {
        if (!a.is_array() || a.size() != 7) {
            throw SchemaError("tree node must be a 7-element array");
        }
        nodes.push_back({a[0].get<int>(), a[1].get<double>(), a[2].get<int>(), a[3].get<int>(), a[4].get<double>(),
                         a[5].get<double>(), a[6].get<double>()});
    }
    const std::size_t nf = j.at("n_features");
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const auto& n = nodes[i];
        const auto bad = [&](int c) { return c <= static_cast<int>(i) || c >= static_cast<int>(nodes.size()); };
        if (!n.leaf() && (static_cast<std::size_t>(n.feature) >= nf || bad(n.left) || bad(n.right))) {
            throw SchemaError("tree node " + std::to_string(i) + " has invalid links");
        }
    }
    if (nodes.empty()) {
        throw SchemaError("tree has no nodes");
    }
    t = Tree(std::move(nodes), nf);
}

} // namespace ckdpipe
