#include <ckdpipe/models.hpp>

#include <ckdpipe/error.hpp>
#include <ckdpipe/parallel.hpp>
#include <ckdpipe/random.hpp>

#include "json_util.hpp"
#include "neighbors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace ckdpipe {

namespace {

constexpr std::array<std::string_view, 9> algorithm_names{
    "svm_rbf", "gaussian_nb", "dtree", "rforest", "logistic", "knn", "gboost", "adaboost", "xgb_like",
};

double sigmoid(double z) {
    if (z >= 0.0) {
        return 1.0 / (1.0 + std::exp(-z));
    }
    const double e = std::exp(z);
    return e / (1.0 + e);
}

/// log(1 + exp(z)) without overflow.
double softplus(double z) {
    return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z)));
}

double log_loss(std::span<const double> f, std::span<const double> y) {
    double sum = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) {
        sum += softplus(f[i]) - y[i] * f[i];
    }
    return sum / static_cast<double>(f.size());
}

std::vector<double> normalized(std::vector<double> v) {
    const double total = std::accumulate(v.begin(), v.end(), 0.0);
    if (total > 0.0) {
        for (double& x : v) {
            x /= total;
        }
    }
    return v;
}

// ---------------------------------------------------------------------------
// SVM (SMO, maximal violating pair)

SvmState fit_svm(const Hyperparameters& hp, const Matrix& x, std::span<const int> labels, bool& converged) {
    const std::size_t n = x.rows();
    double gamma = hp.svm_gamma;
    if (gamma <= 0.0) {
        const auto& d = x.data();
        const double mean = std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(d.size());
        double ss = 0.0;
        for (double v : d) {
            ss += (v - mean) * (v - mean);
        }
        const double var = ss / static_cast<double>(d.size());
        gamma = var > 0.0 ? rbf_gamma(x.cols(), var) : 1.0;
    }
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        y[i] = labels[i] == 1 ? 1.0 : -1.0;
    }
    std::vector<double> k(n * n);
    parallel_for(n, [&](std::size_t i) {
        for (std::size_t j = 0; j < n; ++j) {
            k[i * n + j] = std::exp(-gamma * squared_distance(x.row(i), x.row(j)));
        }
    });
    const auto q = [&](std::size_t i, std::size_t j) { return y[i] * y[j] * k[i * n + j]; };

    const double c = hp.svm_c;
    constexpr double tau = 1e-12;
    std::vector<double> alpha(n, 0.0);
    std::vector<double> grad(n, -1.0);
    const auto in_up = [&](std::size_t t) { return (y[t] > 0 && alpha[t] < c) || (y[t] < 0 && alpha[t] > 0); };
    const auto in_low = [&](std::size_t t) { return (y[t] > 0 && alpha[t] > 0) || (y[t] < 0 && alpha[t] < c); };

    std::size_t iter = 0;
    converged = false;
    for (; iter < hp.svm_max_iter; ++iter) {
        double g_max = -std::numeric_limits<double>::infinity();
        double g_min = std::numeric_limits<double>::infinity();
        std::size_t i = n;
        std::size_t j = n;
        for (std::size_t t = 0; t < n; ++t) {
            const double v = -y[t] * grad[t];
            if (in_up(t) && v > g_max) {
                g_max = v;
                i = t;
            }
            if (in_low(t) && v < g_min) {
                g_min = v;
                j = t;
            }
        }
        if (i == n || j == n || g_max - g_min < hp.svm_tolerance) {
            converged = true;
            break;
        }
        const double ai = alpha[i];
        const double aj = alpha[j];
        if (y[i] != y[j]) {
            double quad = q(i, i) + q(j, j) + 2.0 * q(i, j);
            if (quad <= 0.0) {
                quad = tau;
            }
            const double delta = (-grad[i] - grad[j]) / quad;
            const double diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if (diff > 0.0) {
                if (alpha[j] < 0.0) {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if (alpha[i] < 0.0) {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if (diff > 0.0) {
                if (alpha[i] > c) {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if (alpha[j] > c) {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            double quad = q(i, i) + q(j, j) - 2.0 * q(i, j);
            if (quad <= 0.0) {
                quad = tau;
            }
            const double delta = (grad[i] - grad[j]) / quad;
            const double sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if (sum > c) {
                if (alpha[i] > c) {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if (alpha[j] < 0.0) {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if (sum > c) {
                if (alpha[j] > c) {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if (alpha[i] < 0.0) {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        const double di = alpha[i] - ai;
        const double dj = alpha[j] - aj;
        for (std::size_t t = 0; t < n; ++t) {
            grad[t] += q(i, t) * di + q(j, t) * dj;
        }
    }

    // rho: average over free vectors, midpoint of the feasible interval otherwise.
    double ub = std::numeric_limits<double>::infinity();
    double lb = -std::numeric_limits<double>::infinity();
    double free_sum = 0.0;
    std::size_t n_free = 0;
    for (std::size_t t = 0; t < n; ++t) {
        const double yg = y[t] * grad[t];
        if (alpha[t] >= c) {
            if (y[t] < 0) {
                ub = std::min(ub, yg);
            } else {
                lb = std::max(lb, yg);
            }
        } else if (alpha[t] <= 0.0) {
            if (y[t] > 0) {
                ub = std::min(ub, yg);
            } else {
                lb = std::max(lb, yg);
            }
        } else {
            free_sum += yg;
            ++n_free;
        }
    }
    SvmState s;
    s.rho = n_free > 0 ? free_sum / static_cast<double>(n_free) : (ub + lb) / 2.0;
    s.gamma = gamma;
    s.c = c;
    s.iterations = iter;
    for (std::size_t t = 0; t < n; ++t) {
        if (alpha[t] > 0.0) {
            s.support.append_row(x.row(t));
            s.coef.push_back(alpha[t] * y[t]);
        }
    }
    if (s.support.rows() == 0) {
        s.support = Matrix(0, x.cols());
    }
    return s;
}

double svm_margin(const SvmState& s, std::span<const double> row) {
    double f = 0.0;
    for (std::size_t i = 0; i < s.coef.size(); ++i) {
        f += s.coef[i] * std::exp(-s.gamma * squared_distance(s.support.row(i), row));
    }
    return f - s.rho;
}

// ---------------------------------------------------------------------------
// Gaussian naive Bayes

NaiveBayesState fit_nb(const Hyperparameters& hp, const Matrix& x, std::span<const int> y) {
    const std::size_t n = x.rows();
    const std::size_t m = x.cols();
    NaiveBayesState s;
    s.mean = Matrix(2, m);
    s.var = Matrix(2, m);
    std::array<double, 2> count{};
    for (std::size_t i = 0; i < n; ++i) {
        const auto c = static_cast<std::size_t>(y[i]);
        count[c] += 1.0;
        for (std::size_t f = 0; f < m; ++f) {
            s.mean(c, f) += x(i, f);
        }
    }
    for (std::size_t c = 0; c < 2; ++c) {
        for (std::size_t f = 0; f < m; ++f) {
            s.mean(c, f) /= count[c];
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        const auto c = static_cast<std::size_t>(y[i]);
        for (std::size_t f = 0; f < m; ++f) {
            const double d = x(i, f) - s.mean(c, f);
            s.var(c, f) += d * d;
        }
    }
    double max_var = 0.0;
    for (std::size_t f = 0; f < m; ++f) {
        const auto col = x.column(f);
        const double mu = std::accumulate(col.begin(), col.end(), 0.0) / static_cast<double>(n);
        double ss = 0.0;
        for (double v : col) {
            ss += (v - mu) * (v - mu);
        }
        max_var = std::max(max_var, ss / static_cast<double>(n));
    }
    const double eps = hp.nb_var_smoothing * max_var;
    for (std::size_t c = 0; c < 2; ++c) {
        for (std::size_t f = 0; f < m; ++f) {
            s.var(c, f) = s.var(c, f) / count[c] + eps;
        }
        s.log_prior[c] = std::log(count[c] / static_cast<double>(n));
    }
    return s;
}

std::array<double, 2> nb_joint_log(const NaiveBayesState& s, std::span<const double> row) {
    constexpr double two_pi = 6.283185307179586476925286766559;
    std::array<double, 2> jl{};
    for (std::size_t c = 0; c < 2; ++c) {
        double v = s.log_prior[c];
        for (std::size_t f = 0; f < row.size(); ++f) {
            const double var = s.var(c, f);
            const double d = row[f] - s.mean(c, f);
            v -= 0.5 * std::log(two_pi * var) + 0.5 * d * d / var;
        }
        jl[c] = v;
    }
    return jl;
}

// ---------------------------------------------------------------------------
// Logistic regression (L-BFGS on the mean loss plus ||w||^2 / (2 C n))

struct LogisticObjective {
    const Matrix& x;
    std::vector<double> s;
    double inv_cn;

    double eval(std::span<const double> theta, std::span<double> grad) const {
        const std::size_t n = x.rows();
        const std::size_t m = x.cols();
        const double inv_n = 1.0 / static_cast<double>(n);
        std::fill(grad.begin(), grad.end(), 0.0);
        double f = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const auto row = x.row(i);
            double z = theta[m];
            for (std::size_t j = 0; j < m; ++j) {
                z += theta[j] * row[j];
            }
            const double margin = s[i] * z;
            f += softplus(-margin);
            const double coef = -s[i] * sigmoid(-margin) * inv_n;
            for (std::size_t j = 0; j < m; ++j) {
                grad[j] += coef * row[j];
            }
            grad[m] += coef;
        }
        f *= inv_n;
        for (std::size_t j = 0; j < m; ++j) {
            f += 0.5 * inv_cn * theta[j] * theta[j];
            grad[j] += inv_cn * theta[j];
        }
        return f;
    }
};

double max_abs(std::span<const double> v) {
    double r = 0.0;
    for (double x : v) {
        r = std::max(r, std::abs(x));
    }
    return r;
}

double dot(std::span<const double> a, std::span<const double> b) {
    double r = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        r += a[i] * b[i];
    }
    return r;
}

LogisticState fit_logistic(const Hyperparameters& hp, const Matrix& x, std::span<const int> y, bool& converged) {
    const std::size_t n = x.rows();
    const std::size_t dim = x.cols() + 1;
    LogisticObjective obj{x, std::vector<double>(n), 1.0 / (hp.lr_c * static_cast<double>(n))};
    for (std::size_t i = 0; i < n; ++i) {
        obj.s[i] = y[i] == 1 ? 1.0 : -1.0;
    }
    std::vector<double> theta(dim, 0.0);
    std::vector<double> grad(dim);
    double f = obj.eval(theta, grad);

    std::vector<std::vector<double>> s_hist;
    std::vector<std::vector<double>> y_hist;
    std::vector<double> rho_hist;
    std::vector<double> dir(dim);
    std::vector<double> next(dim);
    std::vector<double> next_grad(dim);
    std::vector<double> alpha_buf;

    converged = max_abs(grad) <= hp.lr_tolerance;
    std::size_t iter = 0;
    while (!converged && iter < hp.lr_max_iter) {
        // Two-loop recursion.
        dir = grad;
        const std::size_t h = s_hist.size();
        alpha_buf.assign(h, 0.0);
        for (std::size_t k = h; k-- > 0;) {
            alpha_buf[k] = rho_hist[k] * dot(s_hist[k], dir);
            for (std::size_t d = 0; d < dim; ++d) {
                dir[d] -= alpha_buf[k] * y_hist[k][d];
            }
        }
        const double scale = h > 0 ? dot(s_hist.back(), y_hist.back()) / dot(y_hist.back(), y_hist.back()) : 1.0;
        for (double& v : dir) {
            v *= scale;
        }
        for (std::size_t k = 0; k < h; ++k) {
            const double beta = rho_hist[k] * dot(y_hist[k], dir);
            for (std::size_t d = 0; d < dim; ++d) {
                dir[d] += (alpha_buf[k] - beta) * s_hist[k][d];
            }
        }
        for (double& v : dir) {
            v = -v;
        }
        double slope = dot(grad, dir);
        if (slope >= 0.0) {
            for (std::size_t d = 0; d < dim; ++d) {
                dir[d] = -grad[d];
            }
            slope = dot(grad, dir);
            s_hist.clear();
            y_hist.clear();
            rho_hist.clear();
        }
        double step = h == 0 ? std::min(1.0, 1.0 / std::sqrt(dot(grad, grad))) : 1.0;
        double f_next = f;
        bool accepted = false;
        for (int ls = 0; ls < 60; ++ls) {
            for (std::size_t d = 0; d < dim; ++d) {
                next[d] = theta[d] + step * dir[d];
            }
            f_next = obj.eval(next, next_grad);
            if (f_next <= f + 1e-4 * step * slope) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        ++iter;
        if (!accepted) {
            break;
        }
        std::vector<double> sv(dim);
        std::vector<double> yv(dim);
        for (std::size_t d = 0; d < dim; ++d) {
            sv[d] = next[d] - theta[d];
            yv[d] = next_grad[d] - grad[d];
        }
        const double sy = dot(sv, yv);
        if (sy > 1e-300) {
            if (s_hist.size() == hp.lr_memory) {
                s_hist.erase(s_hist.begin());
                y_hist.erase(y_hist.begin());
                rho_hist.erase(rho_hist.begin());
            }
            s_hist.push_back(std::move(sv));
            y_hist.push_back(std::move(yv));
            rho_hist.push_back(1.0 / sy);
        }
        theta.swap(next);
        grad.swap(next_grad);
        f = f_next;
        converged = max_abs(grad) <= hp.lr_tolerance;
    }
    LogisticState st;
    st.w.assign(theta.begin(), theta.end() - 1);
    st.b = theta.back();
    st.iterations = iter;
    return st;
}

// ---------------------------------------------------------------------------
// Tree ensembles

std::vector<double> to_double(std::span<const int> y) {
    return {y.begin(), y.end()};
}

ForestState fit_forest(const Hyperparameters& hp, const Matrix& x, std::span<const int> y, std::uint64_t seed,
                       std::vector<double>& importances) {
    const std::size_t n = x.rows();
    const auto yd = to_double(y);
    TreeParams params;
    params.criterion = hp.rf_criterion;
    params.max_depth = hp.rf_max_depth;
    params.max_features =
        std::max<std::size_t>(1, static_cast<std::size_t>(std::sqrt(static_cast<double>(x.cols()))));
    ForestState s;
    s.trees.resize(hp.rf_trees);
    parallel_for(hp.rf_trees, [&](std::size_t t) {
        Rng rng(derive_seed(seed, t));
        std::vector<double> w(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            w[rng.below(n)] += 1.0;
        }
        s.trees[t] = grow_tree(x, TreeTargets{yd, w, {}}, params, &rng);
    });
    importances.assign(x.cols(), 0.0);
    for (const auto& t : s.trees) {
        const auto imp = t.importances();
        for (std::size_t f = 0; f < imp.size(); ++f) {
            importances[f] += imp[f];
        }
    }
    importances = normalized(std::move(importances));
    return s;
}

double forest_score(const ForestState& s, std::span<const double> row) {
    double votes = 0.0;
    for (const auto& t : s.trees) {
        const double p = t.predict(row);
        votes += p > 0.5 ? 1.0 : (p == 0.5 ? 0.5 : 0.0);
    }
    return votes / static_cast<double>(s.trees.size());
}

double boost_raw(const BoostState& s, std::span<const double> row) {
    double f = s.init;
    for (const auto& t : s.trees) {
        f += s.learning_rate * t.predict(row);
    }
    return f;
}

BoostState fit_gboost(const Hyperparameters& hp, const Matrix& x, std::span<const int> y,
                      std::vector<double>& importances) {
    const std::size_t n = x.rows();
    const auto yd = to_double(y);
    const double prior = std::accumulate(yd.begin(), yd.end(), 0.0) / static_cast<double>(n);
    BoostState s;
    s.init = std::log(prior / (1.0 - prior));
    s.learning_rate = hp.gb_learning_rate;
    TreeParams params;
    params.criterion = Criterion::friedman_mse;
    params.max_depth = hp.gb_max_depth;

    std::vector<double> f(n, s.init);
    std::vector<double> p(n);
    std::vector<double> r(n);
    importances.assign(x.cols(), 0.0);
    std::vector<std::size_t> leaf(n);
    for (std::size_t stage = 0; stage < hp.gb_stages; ++stage) {
        for (std::size_t i = 0; i < n; ++i) {
            p[i] = sigmoid(f[i]);
            r[i] = yd[i] - p[i];
        }
        Tree tree = grow_tree(x, TreeTargets{r, {}, {}}, params);
        auto& nodes = tree.nodes();
        std::vector<double> num(nodes.size(), 0.0);
        std::vector<double> den(nodes.size(), 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            leaf[i] = tree.leaf_index(x.row(i));
            num[leaf[i]] += r[i];
            den[leaf[i]] += p[i] * (1.0 - p[i]);
        }
        for (std::size_t k = 0; k < nodes.size(); ++k) {
            if (nodes[k].leaf()) {
                nodes[k].value = std::abs(den[k]) < 1e-150 ? 0.0 : num[k] / den[k];
            }
        }
        for (std::size_t i = 0; i < n; ++i) {
            f[i] += s.learning_rate * nodes[leaf[i]].value;
        }
        const auto imp = tree.importances(false);
        for (std::size_t k = 0; k < imp.size(); ++k) {
            importances[k] += imp[k];
        }
        s.train_loss.push_back(log_loss(f, yd));
        s.trees.push_back(std::move(tree));
    }
    importances = normalized(std::move(importances));
    return s;
}

BoostState fit_xgb(const Hyperparameters& hp, const Matrix& x, std::span<const int> y,
                   std::vector<double>& importances) {
    const std::size_t n = x.rows();
    const auto yd = to_double(y);
    BoostState s;
    s.init = std::log(hp.xgb_base_score / (1.0 - hp.xgb_base_score));
    s.learning_rate = hp.xgb_eta;
    TreeParams params;
    params.criterion = Criterion::newton;
    params.max_depth = hp.xgb_max_depth;
    params.lambda = hp.xgb_lambda;
    params.min_child_weight = hp.xgb_min_child_weight;

    std::vector<double> f(n, s.init);
    std::vector<double> g(n);
    std::vector<double> h(n);
    importances.assign(x.cols(), 0.0);
    for (std::size_t round = 0; round < hp.xgb_rounds; ++round) {
        for (std::size_t i = 0; i < n; ++i) {
            const double p = sigmoid(f[i]);
            g[i] = p - yd[i];
            h[i] = hp.xgb_unit_hessian ? 1.0 : std::max(p * (1.0 - p), 1e-16);
        }
        Tree tree = grow_tree(x, TreeTargets{g, {}, h}, params);
        for (std::size_t i = 0; i < n; ++i) {
            f[i] += s.learning_rate * tree.predict(x.row(i));
        }
        const auto imp = tree.importances(false);
        for (std::size_t k = 0; k < imp.size(); ++k) {
            importances[k] += imp[k];
        }
        s.train_loss.push_back(log_loss(f, yd));
        s.trees.push_back(std::move(tree));
    }
    importances = normalized(std::move(importances));
    return s;
}

constexpr double prob_eps = std::numeric_limits<double>::epsilon();

double ada_log_odds(const Tree& stump, std::span<const double> row) {
    const double p1 = std::max(stump.predict(row), prob_eps);
    const double p0 = std::max(1.0 - stump.predict(row), prob_eps);
    return std::log(p1) - std::log(p0);
}

AdaBoostState fit_adaboost(const Hyperparameters& hp, const Matrix& x, std::span<const int> y,
                           std::vector<double>& importances) {
    const std::size_t n = x.rows();
    const auto yd = to_double(y);
    std::vector<double> w(n, 1.0 / static_cast<double>(n));
    TreeParams params;
    params.criterion = Criterion::gini;
    params.max_depth = hp.ada_max_depth;
    AdaBoostState s;
    importances.assign(x.cols(), 0.0);
    for (std::size_t t = 0; t < hp.ada_estimators; ++t) {
        Tree stump = grow_tree(x, TreeTargets{yd, w, {}}, params);
        double error = 0.0;
        std::vector<double> lo(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double p1 = stump.predict(x.row(i));
            const int label = p1 > 0.5 ? 1 : 0;
            if (label != y[i]) {
                error += w[i];
            }
            lo[i] = ada_log_odds(stump, x.row(i));
        }
        const auto imp = stump.importances();
        for (std::size_t k = 0; k < imp.size(); ++k) {
            importances[k] += imp[k];
        }
        s.stumps.push_back(std::move(stump));
        if (error <= 0.0) {
            break;
        }
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double signed_lo = y[i] == 1 ? lo[i] : -lo[i];
            w[i] *= std::exp(-hp.ada_learning_rate * 0.5 * signed_lo);
            total += w[i];
        }
        if (!(total > 0.0) || !std::isfinite(total)) {
            break;
        }
        for (double& v : w) {
            v /= total;
        }
    }
    importances = normalized(std::move(importances));
    return s;
}

// ---------------------------------------------------------------------------

void check_inputs(const Matrix& x, std::span<const int> y) {
    if (x.rows() == 0 || x.cols() == 0) {
        throw ArgumentError("train: empty training matrix");
    }
    if (y.size() != x.rows()) {
        throw ArgumentError("train: " + std::to_string(y.size()) + " labels for " + std::to_string(x.rows()) +
                            " rows");
    }
    std::size_t ones = 0;
    for (int v : y) {
        if (v != 0 && v != 1) {
            throw ArgumentError("train: labels must be 0 or 1");
        }
        ones += static_cast<std::size_t>(v);
    }
    if (ones == 0 || ones == y.size()) {
        throw ArgumentError("train: both classes must be present");
    }
    for (double v : x.data()) {
        if (!std::isfinite(v)) {
            throw ArgumentError("train: non-finite value in the training matrix");
        }
    }
}

} // namespace

std::string_view to_string(Algorithm a) noexcept {
    return algorithm_names[static_cast<std::size_t>(a)];
}

Algorithm parse_algorithm(std::string_view s) {
    for (std::size_t i = 0; i < algorithm_names.size(); ++i) {
        if (algorithm_names[i] == s) {
            return static_cast<Algorithm>(i);
        }
    }
    throw ArgumentError("unknown algorithm '" + std::string(s) + "'");
}

Hyperparameters Hyperparameters::reduced() {
    Hyperparameters h;
    h.rf_trees = 100;
    h.gb_stages = 100;
    h.xgb_rounds = 100;
    return h;
}

double rbf_gamma(std::size_t n_features, double variance) {
    if (n_features < 1) {
        throw ArgumentError("rbf_gamma: n_features must be >= 1");
    }
    if (!(variance > 0.0)) {
        throw ArgumentError("rbf_gamma: variance must be positive");
    }
    return 1.0 / (static_cast<double>(n_features) * variance);
}

namespace {

void check_distribution(std::span<const double> p) {
    double sum = 0.0;
    for (double v : p) {
        if (!(v >= 0.0)) {
            throw ArgumentError("probability vector has a negative entry");
        }
        sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
        throw ArgumentError("probability vector does not sum to 1");
    }
}

} // namespace

double gini(std::span<const double> p) {
    check_distribution(p);
    double g = 1.0;
    for (double v : p) {
        g -= v * v;
    }
    return g;
}

double entropy(std::span<const double> p) {
    check_distribution(p);
    double h = 0.0;
    for (double v : p) {
        if (v > 0.0) {
            h -= v * std::log2(v);
        }
    }
    return h;
}

TrainedModel train(const ModelSpec& spec, const Matrix& x, std::span<const int> y, std::vector<std::string> features) {
    check_inputs(x, y);
    if (features.empty()) {
        for (std::size_t f = 0; f < x.cols(); ++f) {
            features.push_back("x" + std::to_string(f));
        }
    }
    if (features.size() != x.cols()) {
        throw ArgumentError("train: feature names do not match the matrix width");
    }
    const auto& hp = spec.hp;
    TrainedModel m;
    m.algorithm = spec.algorithm;
    m.features = std::move(features);
    switch (spec.algorithm) {
    case Algorithm::svm_rbf:
        m.state = fit_svm(hp, x, y, m.converged);
        if (!m.converged) {
            m.warnings.push_back("svm_rbf: iteration cap reached before the KKT tolerance");
        }
        break;
    case Algorithm::gaussian_nb:
        m.state = fit_nb(hp, x, y);
        break;
    case Algorithm::dtree: {
        TreeParams params;
        params.criterion = hp.dtree_criterion;
        params.max_depth = hp.dtree_max_depth;
        const auto yd = to_double(y);
        Tree t = grow_tree(x, TreeTargets{yd, {}, {}}, params);
        m.importances = t.importances();
        m.state = TreeState{std::move(t)};
        break;
    }
    case Algorithm::rforest:
        m.state = fit_forest(hp, x, y, spec.seed, m.importances);
        break;
    case Algorithm::logistic: {
        auto st = fit_logistic(hp, x, y, m.converged);
        if (!m.converged) {
            m.warnings.push_back("logistic: no convergence within " + std::to_string(hp.lr_max_iter) +
                                 " iterations");
        }
        m.importances.resize(st.w.size());
        std::transform(st.w.begin(), st.w.end(), m.importances.begin(), [](double v) { return std::abs(v); });
        m.importances = normalized(std::move(m.importances));
        m.state = std::move(st);
        break;
    }
    case Algorithm::knn:
        if (hp.knn_k < 1 || hp.knn_k > x.rows()) {
            throw ArgumentError("knn: k = " + std::to_string(hp.knn_k) + " must lie in [1, rows]");
        }
        m.state = KnnState{x, std::vector<int>(y.begin(), y.end()), hp.knn_k};
        break;
    case Algorithm::gboost:
        m.state = fit_gboost(hp, x, y, m.importances);
        break;
    case Algorithm::adaboost:
        m.state = fit_adaboost(hp, x, y, m.importances);
        break;
    case Algorithm::xgb_like:
        m.state = fit_xgb(hp, x, y, m.importances);
        break;
    }
    return m;
}

TrainedModel train(const ModelSpec& spec, const LabeledMatrix& data) {
    return train(spec, data.x, data.y, data.features);
}

double decision_threshold(Algorithm a) noexcept {
    return a == Algorithm::svm_rbf ? 0.0 : 0.5;
}

std::vector<std::array<double, 2>> nb_posteriors(const NaiveBayesState& s, const Matrix& x) {
    std::vector<std::array<double, 2>> out(x.rows());
    for (std::size_t i = 0; i < x.rows(); ++i) {
        const auto jl = nb_joint_log(s, x.row(i));
        const double mx = std::max(jl[0], jl[1]);
        const double lse = mx + std::log(std::exp(jl[0] - mx) + std::exp(jl[1] - mx));
        out[i] = {std::exp(jl[0] - lse), std::exp(jl[1] - lse)};
    }
    return out;
}

std::vector<double> score(const TrainedModel& model, const Matrix& x) {
    if (x.cols() != model.features.size()) {
        throw SchemaError("score: matrix has " + std::to_string(x.cols()) + " columns, model expects " +
                          std::to_string(model.features.size()));
    }
    std::vector<double> out(x.rows());
    std::visit(
        [&](const auto& s) {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, NaiveBayesState>) {
                const auto post = nb_posteriors(s, x);
                for (std::size_t i = 0; i < x.rows(); ++i) {
                    out[i] = post[i][1];
                }
                return;
            } else if constexpr (std::is_same_v<T, KnnState>) {
                const auto all = detail::iota_indices(s.x.rows());
                parallel_for(x.rows(), [&](std::size_t i) {
                    const auto nn = detail::k_nearest(s.x, all, x.row(i), s.k);
                    double votes = 0.0;
                    for (const auto& v : nn) {
                        votes += s.y[v.index];
                    }
                    out[i] = votes / static_cast<double>(s.k);
                });
                return;
            } else {
                for (std::size_t i = 0; i < x.rows(); ++i) {
                    const auto row = x.row(i);
                    if constexpr (std::is_same_v<T, SvmState>) {
                        out[i] = svm_margin(s, row);
                    } else if constexpr (std::is_same_v<T, TreeState>) {
                        out[i] = s.tree.predict(row);
                    } else if constexpr (std::is_same_v<T, ForestState>) {
                        out[i] = forest_score(s, row);
                    } else if constexpr (std::is_same_v<T, LogisticState>) {
                        out[i] = sigmoid(dot(s.w, row) + s.b);
                    } else if constexpr (std::is_same_v<T, BoostState>) {
                        out[i] = sigmoid(boost_raw(s, row));
                    } else if constexpr (std::is_same_v<T, AdaBoostState>) {
                        double sum = 0.0;
                        for (const auto& st : s.stumps) {
                            sum += ada_log_odds(st, row);
                        }
                        out[i] = sigmoid(sum / static_cast<double>(s.stumps.size()));
                    }
                }
            }
        },
        model.state);
    return out;
}

std::vector<int> predict(const TrainedModel& model, const Matrix& x) {
    const auto s = score(model, x);
    const double t = decision_threshold(model.algorithm);
    std::vector<int> out(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        out[i] = s[i] >= t ? 1 : 0;
    }
    return out;
}

namespace {

void check_features(const TrainedModel& model, const LabeledMatrix& data) {
    if (data.features != model.features) {
        throw SchemaError("feature list does not match the one the model was trained on");
    }
}

} // namespace

std::vector<double> score(const TrainedModel& model, const LabeledMatrix& data) {
    check_features(model, data);
    return score(model, data.x);
}

std::vector<int> predict(const TrainedModel& model, const LabeledMatrix& data) {
    check_features(model, data);
    return predict(model, data.x);
}

// ---------------------------------------------------------------------------
// JSON

namespace {

template <typename H, typename F>
void for_each_hyperparameter(H& h, F&& f) {
    f("svm_c", h.svm_c);
    f("svm_tolerance", h.svm_tolerance);
    f("svm_max_iter", h.svm_max_iter);
    f("svm_gamma", h.svm_gamma);
    f("nb_var_smoothing", h.nb_var_smoothing);
    f("dtree_criterion", h.dtree_criterion);
    f("dtree_max_depth", h.dtree_max_depth);
    f("rf_trees", h.rf_trees);
    f("rf_criterion", h.rf_criterion);
    f("rf_max_depth", h.rf_max_depth);
    f("lr_c", h.lr_c);
    f("lr_max_iter", h.lr_max_iter);
    f("lr_tolerance", h.lr_tolerance);
    f("lr_memory", h.lr_memory);
    f("knn_k", h.knn_k);
    f("gb_stages", h.gb_stages);
    f("gb_learning_rate", h.gb_learning_rate);
    f("gb_max_depth", h.gb_max_depth);
    f("ada_estimators", h.ada_estimators);
    f("ada_learning_rate", h.ada_learning_rate);
    f("ada_max_depth", h.ada_max_depth);
    f("xgb_rounds", h.xgb_rounds);
    f("xgb_eta", h.xgb_eta);
    f("xgb_max_depth", h.xgb_max_depth);
    f("xgb_lambda", h.xgb_lambda);
    f("xgb_min_child_weight", h.xgb_min_child_weight);
    f("xgb_base_score", h.xgb_base_score);
    f("xgb_unit_hessian", h.xgb_unit_hessian);
}

nlohmann::json matrix_json(const Matrix& m) {
    return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", m.data()}};
}

Matrix matrix_from(const nlohmann::json& j) {
    Matrix m(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>());
    m.data() = j.at("data").get<std::vector<double>>();
    if (m.data().size() != m.rows() * m.cols()) {
        throw SchemaError("matrix data has the wrong length");
    }
    return m;
}

std::vector<Tree> trees_from(const nlohmann::json& j) {
    std::vector<Tree> out;
    for (const auto& t : j) {
        out.push_back(t.get<Tree>());
    }
    return out;
}

} // namespace

void to_json(nlohmann::json& j, const Hyperparameters& h) {
    j = nlohmann::json::object();
    for_each_hyperparameter(h, [&](const char* name, const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, Criterion>) {
            j[name] = to_string(v);
        } else {
            j[name] = v;
        }
    });
}

void from_json(const nlohmann::json& j, Hyperparameters& h) {
    if (!j.is_object()) {
        throw SchemaError("hyperparameters: expected an object");
    }
    std::size_t matched = 0;
    for_each_hyperparameter(h, [&](const char* name, auto& v) {
        const auto it = j.find(name);
        if (it == j.end()) {
            return;
        }
        ++matched;
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, Criterion>) {
            v = parse_criterion(it->template get<std::string>());
        } else {
            it->get_to(v);
        }
    });
    if (matched != j.size()) {
        for (const auto& item : j.items()) {
            bool known = false;
            for_each_hyperparameter(h, [&](const char* name, const auto&) { known = known || item.key() == name; });
            if (!known) {
                throw SchemaError("hyperparameters: unknown key '" + item.key() + "'");
            }
        }
    }
}

nlohmann::json to_json(const TrainedModel& m) {
    nlohmann::json j;
    j["version"] = model_format_version;
    j["algorithm"] = to_string(m.algorithm);
    j["features"] = m.features;
    j["importances"] = m.importances;
    j["converged"] = m.converged;
    j["warnings"] = m.warnings;
    j["state"] = std::visit(
        [](const auto& s) -> nlohmann::json {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, SvmState>) {
                return {{"support", matrix_json(s.support)}, {"coef", s.coef},   {"rho", s.rho},
                        {"gamma", s.gamma},                  {"c", s.c},         {"iterations", s.iterations}};
            } else if constexpr (std::is_same_v<T, NaiveBayesState>) {
                return {{"log_prior", s.log_prior}, {"mean", matrix_json(s.mean)}, {"var", matrix_json(s.var)}};
            } else if constexpr (std::is_same_v<T, TreeState>) {
                return {{"tree", s.tree}};
            } else if constexpr (std::is_same_v<T, ForestState>) {
                return {{"trees", s.trees}};
            } else if constexpr (std::is_same_v<T, LogisticState>) {
                return {{"w", s.w}, {"b", s.b}, {"iterations", s.iterations}};
            } else if constexpr (std::is_same_v<T, KnnState>) {
                return {{"x", matrix_json(s.x)}, {"y", s.y}, {"k", s.k}};
            } else if constexpr (std::is_same_v<T, BoostState>) {
                return {{"init", s.init},
                        {"learning_rate", s.learning_rate},
                        {"trees", s.trees},
                        {"train_loss", s.train_loss}};
            } else {
                return {{"stumps", s.stumps}};
            }
        },
        m.state);
    return j;
}

TrainedModel model_from_json(const nlohmann::json& j) {
    if (j.at("version").get<int>() != model_format_version) {
        throw SchemaError("unsupported model format version " + j.at("version").dump());
    }
    TrainedModel m;
    m.algorithm = parse_algorithm(j.at("algorithm").get<std::string>());
    m.features = j.at("features").get<std::vector<std::string>>();
    m.importances = j.at("importances").get<std::vector<double>>();
    m.converged = j.at("converged").get<bool>();
    m.warnings = j.at("warnings").get<std::vector<std::string>>();
    const auto& s = j.at("state");
    switch (m.algorithm) {
    case Algorithm::svm_rbf:
        m.state = SvmState{matrix_from(s.at("support")), s.at("coef").get<std::vector<double>>(), s.at("rho"),
                           s.at("gamma"),                s.at("c"),                                  s.at("iterations")};
        break;
    case Algorithm::gaussian_nb:
        m.state = NaiveBayesState{s.at("log_prior").get<std::array<double, 2>>(), matrix_from(s.at("mean")),
                                  matrix_from(s.at("var"))};
        break;
    case Algorithm::dtree:
        m.state = TreeState{s.at("tree").get<Tree>()};
        break;
    case Algorithm::rforest:
        m.state = ForestState{trees_from(s.at("trees"))};
        break;
    case Algorithm::logistic:
        m.state = LogisticState{s.at("w").get<std::vector<double>>(), s.at("b"), s.at("iterations")};
        break;
    case Algorithm::knn:
        m.state = KnnState{matrix_from(s.at("x")), s.at("y").get<std::vector<int>>(), s.at("k")};
        break;
    case Algorithm::gboost:
    case Algorithm::xgb_like:
        m.state = BoostState{s.at("init"), s.at("learning_rate"), trees_from(s.at("trees")),
                             s.at("train_loss").get<std::vector<double>>()};
        break;
    case Algorithm::adaboost:
        m.state = AdaBoostState{trees_from(s.at("stumps"))};
        break;
    }
    return m;
}

} // namespace ckdpipe
