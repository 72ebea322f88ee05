#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>
#include <vector>

#include "rednet/rng.hpp"
#include "rednet/types.hpp"

namespace rednet {

/// Weighted l1 regression problem with objective
///   (1/n) ||response - design b||^2 + lambda * sum_j weights_j |b_j|.
struct AdaLassoProblem {
    Matrix design;
    Vector response;
    Vector weights;
    double lambda = 0.0;
};

/// omega_j = 1 / (|beta_init_j| + epsilon).
inline Vector adaptive_weights(const Vector& beta_init, double epsilon) {
    if (epsilon <= 0.0) throw ValidationError("adaptive_weights: epsilon must be > 0");
    return (beta_init.cwiseAbs().array() + epsilon).inverse().matrix();
}

/// Epsilon guard used by the pipeline: relative to the largest initial
/// coefficient so near-zero initials stay heavily penalized without
/// producing infinite weights.
inline double weight_epsilon(const Vector& beta_init, double rel = 1e-4) {
    return rel * (beta_init.cwiseAbs().maxCoeff() + 1e-12);
}

struct LassoFit {
    Vector beta;
    int iterations = 0;  // coordinate-descent sweeps (full + active-set)
    bool converged = false;
};

/// Smallest lambda with an all-zero solution: max_j 2|xty_j| / (n w_j),
/// nudged up a few ulps so the zero solution survives the rounding of the
/// per-coordinate thresholds at lambda >= the returned value.
inline double null_lambda(const Vector& xty, Index n_rows, const Vector& weights) {
    double lam = 0.0;
    for (Index j = 0; j < xty.size(); ++j)
        lam = std::max(lam, 2.0 * std::abs(xty[j]) / (static_cast<double>(n_rows) * weights[j]));
    return lam * (1.0 + 1e-15);
}

namespace detail {

inline double soft_threshold(double z, double t) {
    if (z > t) return z - t;
    if (z < -t) return z + t;
    return 0.0;
}

inline void check_weights(const Vector& weights) {
    for (Index j = 0; j < weights.size(); ++j)
        if (!(weights[j] > 0.0) || !std::isfinite(weights[j]))
            throw ValidationError("adaptive lasso: weight " + std::to_string(j) +
                                  " must be finite and > 0");
}

inline double kkt_from_gradient(const Vector& grad2n, const Vector& weights, double lambda,
                                const Vector& beta) {
    double worst = 0.0;
    for (Index j = 0; j < beta.size(); ++j) {
        const double bound = lambda * weights[j];
        double r;
        if (beta[j] != 0.0)
            r = std::abs(grad2n[j] - bound * (beta[j] > 0.0 ? 1.0 : -1.0));
        else
            r = std::max(0.0, std::abs(grad2n[j]) - bound);
        worst = std::max(worst, r);
    }
    return worst;
}

/// Cyclic coordinate descent on the Gram form of the objective. Covariance
/// updates only: no row sums occur after the Gram is formed, so column sign
/// flips of the design map solutions to exact sign flips of the iterates.
/// Convergence requires both a quiet full sweep (max coefficient change <
/// tol) and a KKT residual within 10 tol.
inline LassoFit cd_solve(const Matrix& gram, const Vector& xty, double yty, Index n_rows,
                         const Vector& weights, double lambda, double tol, int max_iter,
                         const Vector* warm_start = nullptr) {
    check_weights(weights);
    if (tol <= 0.0) throw ValidationError("cd_solve: tol must be > 0");
    const Index m = gram.rows();
    const double n = static_cast<double>(n_rows);

    LassoFit fit;
    fit.beta = warm_start != nullptr ? *warm_start : Vector::Zero(m);
    Vector gb = warm_start != nullptr ? Vector(gram * fit.beta) : Vector::Zero(m);

    std::vector<Index> active;
    std::vector<char> is_active(static_cast<std::size_t>(m), 0);
    for (Index j = 0; j < m; ++j)
        if (fit.beta[j] != 0.0) {
            active.push_back(j);
            is_active[static_cast<std::size_t>(j)] = 1;
        }

#ifndef NDEBUG
    auto objective = [&](const Vector& b) {
        double fitpart = (yty - 2.0 * b.dot(xty) + b.dot(gram * b)) / n;
        return fitpart + lambda * weights.cwiseProduct(b.cwiseAbs()).sum();
    };
    double last_obj = objective(fit.beta);
#else
    (void)yty;
#endif

    auto update_coord = [&](Index j) -> double {
        const double gjj = gram(j, j);
        if (gjj <= 0.0) return 0.0;
        const double u = xty[j] - gb[j] + gjj * fit.beta[j];
        const double threshold = n * lambda * weights[j] / 2.0;
        // treat |u| within rounding distance of the threshold as at it, so
        // borderline coordinates become exact zeros instead of 1e-17 dust
        const double next = std::abs(u) <= threshold * (1.0 + 1e-12)
                                ? 0.0
                                : soft_threshold(u, threshold) / gjj;
        const double delta = next - fit.beta[j];
        if (delta != 0.0) {
            gb += delta * gram.col(j);
            fit.beta[j] = next;
            if (next != 0.0 && !is_active[static_cast<std::size_t>(j)]) {
                is_active[static_cast<std::size_t>(j)] = 1;
                active.push_back(j);
            }
        }
        return std::abs(delta);
    };

    while (fit.iterations < max_iter) {
        // full sweep
        double max_delta = 0.0;
        for (Index j = 0; j < m; ++j) max_delta = std::max(max_delta, update_coord(j));
        ++fit.iterations;
#ifndef NDEBUG
        {
            double obj = objective(fit.beta);
            assert(obj <= last_obj + 1e-10 * (1.0 + std::abs(last_obj)));
            last_obj = obj;
        }
#endif
        if (max_delta < tol) {
            gb = gram * fit.beta;  // discard incremental drift before certifying
            Vector grad2n = (xty - gb) * (2.0 / n);
            if (kkt_from_gradient(grad2n, weights, lambda, fit.beta) <= 10.0 * tol) {
                fit.converged = true;
                return fit;
            }
        }
        // active-set sweeps until quiet, then re-check with a full sweep
        while (fit.iterations < max_iter) {
            double active_delta = 0.0;
            for (Index j : active) active_delta = std::max(active_delta, update_coord(j));
            ++fit.iterations;
            if (active_delta < tol) break;
        }
    }
    return fit;  // best iterate, converged = false
}

}  // namespace detail

/// Max KKT violation of beta for the weighted-l1 objective: stationarity on
/// the active coordinates, subgradient bound on the rest.
inline double kkt_residual(const AdaLassoProblem& prob, const Vector& beta) {
    const double n = static_cast<double>(prob.design.rows());
    Vector residual = prob.response - prob.design * beta;
    Vector grad2n = (prob.design.transpose() * residual) * (2.0 / n);
    return detail::kkt_from_gradient(grad2n, prob.weights, prob.lambda, beta);
}

/// Coordinate-descent solve of an AdaLassoProblem. Unselected coordinates are
/// exact zeros. Returns the best iterate with converged = false when the
/// sweep budget runs out.
inline LassoFit adalasso_fit(const AdaLassoProblem& prob, double tol = 1e-7,
                             int max_iter = 100000) {
    Matrix gram = prob.design.transpose() * prob.design;
    Vector xty = prob.design.transpose() * prob.response;
    return detail::cd_solve(gram, xty, prob.response.squaredNorm(), prob.design.rows(),
                            prob.weights, prob.lambda, tol, max_iter);
}

/// Contiguous-block fold assignment from a seeded shuffle; returns the fold
/// id of each row.
inline std::vector<int> make_folds(Index n_rows, int folds, Rng& rng) {
    std::vector<Index> order(static_cast<std::size_t>(n_rows));
    std::iota(order.begin(), order.end(), Index{0});
    rng.shuffle(order);
    std::vector<int> fold_of(static_cast<std::size_t>(n_rows));
    for (Index r = 0; r < n_rows; ++r) {
        // block f covers positions [f n / K, (f+1) n / K)
        auto f = static_cast<int>((static_cast<long long>(r) * folds) / n_rows);
        fold_of[static_cast<std::size_t>(order[static_cast<std::size_t>(r)])] = f;
    }
    return fold_of;
}

struct CvSelection {
    double lambda_star = 0.0;
    std::vector<double> curve;  // mean held-out squared error per grid value
};

/// K-fold cross-validation over a descending lambda grid with warm starts.
/// lambda_star is the held-out-MSE minimizer; ties resolve to the larger
/// (sparser) lambda.
inline CvSelection cv_select_lambda(const Matrix& design, const Vector& response,
                                    const Vector& weights, int folds,
                                    const std::vector<double>& grid, std::uint64_t seed,
                                    double tol = 1e-7, int max_iter = 100000) {
    if (folds < 2) throw ValidationError("cv_select_lambda: need folds >= 2");
    if (grid.empty()) throw ValidationError("cv_select_lambda: empty grid");
    for (std::size_t i = 1; i < grid.size(); ++i)
        if (grid[i] > grid[i - 1])
            throw ValidationError("cv_select_lambda: grid must be sorted descending");
    const Index n = design.rows();
    if (n < folds) throw ValidationError("cv_select_lambda: fewer rows than folds");

    Rng rng(seed);
    std::vector<int> fold_of = make_folds(n, folds, rng);

    Matrix gram_all = design.transpose() * design;
    Vector xty_all = design.transpose() * response;

    CvSelection sel;
    sel.curve.assign(grid.size(), 0.0);
    for (int f = 0; f < folds; ++f) {
        std::vector<Index> held;
        for (Index r = 0; r < n; ++r)
            if (fold_of[static_cast<std::size_t>(r)] == f) held.push_back(r);
        Matrix held_x(static_cast<Index>(held.size()), design.cols());
        Vector held_y(static_cast<Index>(held.size()));
        for (Index r = 0; r < static_cast<Index>(held.size()); ++r) {
            held_x.row(r) = design.row(held[static_cast<std::size_t>(r)]);
            held_y[r] = response[held[static_cast<std::size_t>(r)]];
        }
        Matrix gram = gram_all - held_x.transpose() * held_x;
        Vector xty = xty_all - held_x.transpose() * held_y;
        const Index n_train = n - static_cast<Index>(held.size());

        Vector warm = Vector::Zero(design.cols());
        for (std::size_t g = 0; g < grid.size(); ++g) {
            auto fit = detail::cd_solve(gram, xty, 0.0, n_train, weights, grid[g], tol, max_iter,
                                        &warm);
            warm = fit.beta;
            sel.curve[g] += (held_y - held_x * fit.beta).squaredNorm();
        }
    }
    for (double& v : sel.curve) v /= static_cast<double>(n);

    std::size_t best = 0;
    for (std::size_t g = 1; g < grid.size(); ++g)
        if (sel.curve[g] < sel.curve[best]) best = g;
    sel.lambda_star = grid[best];
    return sel;
}

}  // namespace rednet
