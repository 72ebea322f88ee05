#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "rednet/adalasso.hpp"
#include "rednet/linalg.hpp"
#include "rednet/parallel.hpp"
#include "rednet/reparam.hpp"
#include "rednet/rng.hpp"
#include "rednet/screening.hpp"
#include "rednet/types.hpp"

namespace rednet {

/// All analysis knobs. One run-level seed derives every per-node fold seed,
/// so the worker count can never change results.
struct RunConfig {
    double screen_exponent = 0.9;  // d = floor(n^exponent), capped by q
    Index screen_count = 0;        // explicit d; 0 means use the rule
    int screen_rounds = 1;         // >1 enables iterative residual re-screening
    int ridge_grid_size = 50;
    int cv_folds = 10;
    int lasso_grid_size = 100;
    double lasso_grid_ratio = 1e-4;  // grid spans [ratio * lambda_max, lambda_max]
    bool cv_one_se = true;  // pick the sparsest lambda within one SE of the CV minimum
    double cd_tol = 1e-7;
    int cd_max_iter = 100000;
    // sweep budget for the warm-started fits inside cross-validation; the
    // deep-overfit end of the path would otherwise burn thousands of sweeps
    // per fold on near-singular systems whose held-out error is already flat.
    // Final fits always get the full cd_max_iter and a KKT certificate.
    int cv_sweep_cap = 50;
    double classify_tol = 0.0;
    double weight_epsilon_rel = 1e-4;
    std::uint64_t seed = 0;
    int threads = 1;
    bool strict = true;             // abort on node failures (vs flag and continue)
    bool anchors_warn_only = false; // permissive anchor validation
    bool fit_phi = true;            // recover anchoring effects after the l1 fit
};

/// Stage-1 output for one (node, network) task.
struct NodeCalibration {
    std::vector<Index> support;     // screened indices, ascending; support of pi_hat
    Vector pi_values;               // aligned with support
    std::vector<Index> screen_by_score;  // the ScreenSet order, for reporting
    double ridge_lambda = 0.0;
};

struct NetworkCalibration {
    Matrix y_hat;  // n_k x p, column i = X_M pi_hat_M
    std::vector<NodeCalibration> nodes;
};

/// Stage-1 result: a pure function of (pair, config); no RNG involved.
struct CalibrationResult {
    std::array<NetworkCalibration, 2> net;
};

namespace detail {

inline Matrix take_columns(const Matrix& x, const std::vector<Index>& cols) {
    Matrix sub(x.rows(), static_cast<Index>(cols.size()));
    for (std::size_t j = 0; j < cols.size(); ++j) sub.col(static_cast<Index>(j)) = x.col(cols[j]);
    return sub;
}

inline Index screen_size(const RunConfig& cfg, Index n, Index q) {
    if (cfg.screen_count > 0) return std::min(cfg.screen_count, q);
    return default_screen_count(n, q, cfg.screen_exponent);
}

}  // namespace detail

/// Stage 1 for one node: screen the exogenous columns (skipped when q <= n),
/// ridge-fit the reduced form with a GCV-chosen penalty, predict.
inline std::pair<NodeCalibration, Vector> calibrate_node(
    const Vector& y_i, const Matrix& x, Index d, const std::vector<double>& grid,
    int screen_rounds = 1, std::shared_ptr<const RidgeGcvCache::Svd> shared_svd = nullptr) {
    const Index q = x.cols();
    const Index n = x.rows();
    NodeCalibration cal;

    ScreenSet set = screen_rounds > 1 ? sis_select_iterative(x, y_i, d, screen_rounds)
                                      : sis_select(x, y_i, d);
    cal.screen_by_score = set.selected;
    cal.support = set.selected;
    std::sort(cal.support.begin(), cal.support.end());

    if (q <= n) {
        // skip branch: all columns kept, the design is x itself
        auto svd = shared_svd != nullptr ? std::move(shared_svd) : RidgeGcvCache::decompose(x);
        RidgeGcvCache cache(std::move(svd), n, y_i);
        auto sel = gcv_select(cache, grid);
        cal.ridge_lambda = sel.lambda_star;
        cal.pi_values = cache.fit(sel.lambda_star);
    } else {
        Matrix x_m = detail::take_columns(x, cal.support);
        RidgeGcvCache cache(x_m, y_i);
        auto sel = gcv_select(cache, grid);
        cal.ridge_lambda = sel.lambda_star;
        cal.pi_values = cache.fit(sel.lambda_star);
    }
    // accumulate column by column so the reconstruction identity
    // y_hat = X pi_hat holds bit-for-bit against the scattered coefficients
    Vector y_hat = Vector::Zero(n);
    for (std::size_t j = 0; j < cal.support.size(); ++j)
        y_hat += x.col(cal.support[j]) * cal.pi_values[static_cast<Index>(j)];
    return {std::move(cal), std::move(y_hat)};
}

/// Stage 1 over all 2p (node, network) tasks. Deterministic; tasks are
/// independent and may run on any number of workers.
inline CalibrationResult calibrate_all(const ObservationPair& pair, const RunConfig& cfg) {
    check_dimensions(pair);
    const Index p = pair.p();
    const Index q = pair.q();
    CalibrationResult result;

    std::array<const Matrix*, 2> xs{&pair.x1, &pair.x2};
    std::array<const Matrix*, 2> ys{&pair.y1, &pair.y2};
    std::array<std::shared_ptr<const RidgeGcvCache::Svd>, 2> shared_svd{nullptr, nullptr};
    std::array<std::vector<double>, 2> grids;
    std::array<Index, 2> d{};
    for (int k = 0; k < 2; ++k) {
        const Index n_k = xs[static_cast<std::size_t>(k)]->rows();
        d[static_cast<std::size_t>(k)] = detail::screen_size(cfg, n_k, q);
        grids[static_cast<std::size_t>(k)] = default_ridge_grid(n_k, cfg.ridge_grid_size);
        if (q <= n_k)  // one factorization serves every node
            shared_svd[static_cast<std::size_t>(k)] =
                RidgeGcvCache::decompose(*xs[static_cast<std::size_t>(k)]);
        result.net[static_cast<std::size_t>(k)].y_hat.resize(n_k, p);
        result.net[static_cast<std::size_t>(k)].nodes.resize(static_cast<std::size_t>(p));
    }

    parallel_for(static_cast<std::size_t>(2 * p), cfg.threads, [&](std::size_t task) {
        const int k = static_cast<int>(task / static_cast<std::size_t>(p));
        const Index i = static_cast<Index>(task % static_cast<std::size_t>(p));
        try {
            auto [cal, y_hat] = calibrate_node(ys[static_cast<std::size_t>(k)]->col(i),
                                               *xs[static_cast<std::size_t>(k)],
                                               d[static_cast<std::size_t>(k)],
                                               grids[static_cast<std::size_t>(k)],
                                               cfg.screen_rounds,
                                               shared_svd[static_cast<std::size_t>(k)]);
            result.net[static_cast<std::size_t>(k)].nodes[static_cast<std::size_t>(i)] =
                std::move(cal);
            result.net[static_cast<std::size_t>(k)].y_hat.col(i) = y_hat;
        } catch (const std::exception& e) {
            throw NumericalError("calibration failed at node " + std::to_string(i) +
                                 " network " + std::to_string(k + 1) + ": " + e.what());
        }
    });
    return result;
}

/// Dense stacked construction-stage problem for one node:
///   response = [Y_i^(1); Y_i^(2)],
///   z_hat    = [[Yhat_-i^(1), Yhat_-i^(1)]; [Yhat_-i^(2), -Yhat_-i^(2)]],
/// with the observed anchor blocks kept alongside for projection checks.
struct StackedNodeProblem {
    Index node = 0;
    Vector response;
    Matrix z_hat;
    Matrix anchors1, anchors2;  // X_{A_i}^{(k)}, observed
};

namespace detail {

inline Matrix drop_column(const Matrix& m, Index i) {
    Matrix out(m.rows(), m.cols() - 1);
    if (i > 0) out.leftCols(i) = m.leftCols(i);
    if (i + 1 < m.cols()) out.rightCols(m.cols() - i - 1) = m.rightCols(m.cols() - i - 1);
    return out;
}

}  // namespace detail

inline StackedNodeProblem build_stacked_problem(Index i, const ObservationPair& pair,
                                                const CalibrationResult& calib) {
    const Index n1 = pair.n1(), n2 = pair.n2(), p = pair.p();
    StackedNodeProblem prob;
    prob.node = i;
    prob.response.resize(n1 + n2);
    prob.response.head(n1) = pair.y1.col(i);
    prob.response.tail(n2) = pair.y2.col(i);
    Matrix top = detail::drop_column(calib.net[0].y_hat, i);
    Matrix bottom = detail::drop_column(calib.net[1].y_hat, i);
    prob.z_hat.resize(n1 + n2, 2 * (p - 1));
    prob.z_hat.topLeftCorner(n1, p - 1) = top;
    prob.z_hat.topRightCorner(n1, p - 1) = top;
    prob.z_hat.bottomLeftCorner(n2, p - 1) = bottom;
    prob.z_hat.bottomRightCorner(n2, p - 1) = -bottom;
    prob.anchors1 = detail::take_columns(pair.x1, pair.anchors1[static_cast<std::size_t>(i)]);
    prob.anchors2 = detail::take_columns(pair.x2, pair.anchors2[static_cast<std::size_t>(i)]);
    return prob;
}

/// Result of the construction stage for one node. The four coefficient
/// vectors are mutually consistent in exact float arithmetic:
/// gamma1/gamma2 = beta_plus +/- beta_minus and beta_plus/beta_minus =
/// (gamma1 +/- gamma2)/2 (halving is exact, so re-reparameterizing the
/// emitted gammas reproduces the emitted betas bit for bit).
struct NodeEstimate {
    Index node = 0;
    Vector beta_plus;   // length p, zero at `node`
    Vector beta_minus;  // length p, zero at `node`
    Vector gamma1, gamma2;
    Vector phi1, phi2;  // aligned with the node's anchor sets (empty if not fit)
    NodeTuning tuning;
};

namespace detail {

/// Per-network ingredients of the stacked node problem. All stacked-level
/// quantities are assembled from these by single commutative adds or
/// subtractions, which is what makes a network-swap run reproduce bit-for-bit
/// negated differential estimates.
struct NetworkBlock {
    Matrix pz;    // H_k Yhat_-i^(k), n_k x (p-1)
    Vector py;    // H_k Y_i^(k)
    Matrix gram;  // pz' pz
    Vector xty;   // pz' py
    double ysq = 0.0;
    Eigen::SelfAdjointEigenSolver<Matrix> eig;  // of gram
    Vector vtb;                                 // eigvecs' xty
};

inline NetworkBlock make_block(const Matrix& x, const IndexSet& anchor_set, const Matrix& y_hat,
                               const Vector& y_obs, Index drop_node) {
    NetworkBlock b;
    Matrix x_a = take_columns(x, anchor_set);
    Matrix reduced = drop_column(y_hat, drop_node);
    Matrix both(x.rows(), reduced.cols() + 1);
    both.leftCols(reduced.cols()) = reduced;
    both.col(reduced.cols()) = y_obs;
    Matrix projected = apply_annihilator(x_a, both);
    b.pz = projected.leftCols(reduced.cols());
    b.py = projected.col(reduced.cols());
    b.gram.noalias() = b.pz.transpose() * b.pz;
    b.xty.noalias() = b.pz.transpose() * b.py;
    b.ysq = b.py.squaredNorm();
    b.eig.compute(b.gram);
    if (b.eig.info() != Eigen::Success)
        throw NumericalError("stage 2: eigendecomposition failed");
    b.vtb = b.eig.eigenvectors().transpose() * b.xty;
    return b;
}

/// Ridge solution of one network block in its own coordinates:
/// (2 gram + lambda I)^{-1} xty via the cached eigendecomposition.
inline Vector block_ridge(const NetworkBlock& b, double lambda) {
    Vector scaled(b.vtb.size());
    for (Index j = 0; j < b.vtb.size(); ++j)
        scaled[j] = b.vtb[j] / (2.0 * b.eig.eigenvalues()[j] + lambda);
    return b.eig.eigenvectors() * scaled;
}

/// tr(A(lambda)) contribution of one block: sum 2 mu / (2 mu + lambda).
inline double block_trace(const NetworkBlock& b, double lambda) {
    double tr = 0.0;
    for (Index j = 0; j < b.eig.eigenvalues().size(); ++j) {
        const double mu2 = 2.0 * std::max(b.eig.eigenvalues()[j], 0.0);
        tr += mu2 / (mu2 + lambda);
    }
    return tr;
}

/// Residual sum of squares of one block at per-network coefficients theta.
inline double block_rss(const NetworkBlock& b, const Vector& theta) {
    return b.ysq - 2.0 * b.xty.dot(theta) + theta.dot(b.gram * theta);
}

/// Stacked Gram [[A1+A2, A1-A2], [A1-A2, A1+A2]] and xty [b1+b2; b1-b2].
inline void assemble_stacked(const Matrix& a1, const Matrix& a2, const Vector& b1,
                             const Vector& b2, Matrix& gram, Vector& xty) {
    const Index m = a1.rows();
    gram.resize(2 * m, 2 * m);
    gram.topLeftCorner(m, m) = a1 + a2;
    gram.topRightCorner(m, m) = a1 - a2;
    gram.bottomLeftCorner(m, m) = gram.topRightCorner(m, m);
    gram.bottomRightCorner(m, m) = gram.topLeftCorner(m, m);
    xty.resize(2 * m);
    xty.head(m) = b1 + b2;
    xty.tail(m) = b1 - b2;
}

/// GCV-selected ridge initial estimator for the stacked problem, computed
/// per network block so it is exact under a network swap.
inline std::pair<Vector, double> stacked_ridge_init(const NetworkBlock& b1,
                                                    const NetworkBlock& b2, Index n_total,
                                                    int grid_size) {
    auto grid = default_ridge_grid(n_total, grid_size);
    const Index m = b1.gram.rows();
    const double n = static_cast<double>(n_total);
    double best_score = std::numeric_limits<double>::infinity();
    double best_lambda = grid.front();
    Vector best_init(2 * m);
    for (double lambda : grid) {
        Vector u1 = block_ridge(b1, lambda);
        Vector u2 = block_ridge(b2, lambda);
        Vector beta_plus = u1 + u2;
        Vector beta_minus = u1 - u2;
        Vector theta1 = beta_plus + beta_minus;
        Vector theta2 = beta_plus - beta_minus;
        double rss = std::max(block_rss(b1, theta1) + block_rss(b2, theta2), 0.0);
        double tr_a = block_trace(b1, lambda) + block_trace(b2, lambda);
        double denom = (n - tr_a) / n;
        double score = (rss / n) / (denom * denom);
        if (score < best_score || (score == best_score && lambda < best_lambda)) {
            best_score = score;
            best_lambda = lambda;
            best_init.head(m) = beta_plus;
            best_init.tail(m) = beta_minus;
        }
    }
    return {std::move(best_init), best_lambda};
}

struct FoldPieces {
    Matrix pz;  // held-out rows of the block design
    Vector py;
    Matrix gram_train;  // block gram minus the held-out gram
    Vector xty_train;
};

inline std::vector<FoldPieces> split_block(const NetworkBlock& block,
                                           const std::vector<int>& fold_of, int folds) {
    std::vector<FoldPieces> out(static_cast<std::size_t>(folds));
    const Index n = block.pz.rows();
    for (int f = 0; f < folds; ++f) {
        std::vector<Index> rows;
        for (Index r = 0; r < n; ++r)
            if (fold_of[static_cast<std::size_t>(r)] == f) rows.push_back(r);
        auto& piece = out[static_cast<std::size_t>(f)];
        piece.pz.resize(static_cast<Index>(rows.size()), block.pz.cols());
        piece.py.resize(static_cast<Index>(rows.size()));
        for (Index r = 0; r < static_cast<Index>(rows.size()); ++r) {
            piece.pz.row(r) = block.pz.row(rows[static_cast<std::size_t>(r)]);
            piece.py[r] = block.py[rows[static_cast<std::size_t>(r)]];
        }
        piece.gram_train = block.gram - piece.pz.transpose() * piece.pz;
        piece.xty_train = block.xty - piece.pz.transpose() * piece.py;
    }
    return out;
}

/// Cross-validated, warm-started lasso path on the stacked problem. Fold
/// assignment is seeded per (run seed, node, n_k), so fold membership of a
/// physical row never depends on which slot its network occupies.
struct StackedCvResult {
    double lambda_star = 0.0;
    std::vector<double> grid;
    std::vector<double> curve;  // mean held-out squared error
};

/// lambda choice from per-fold mean squared errors: the argmin, or with the
/// one-SE rule the sparsest lambda whose error is within one standard error
/// of the minimum.
inline std::size_t pick_lambda_index(const std::vector<std::vector<double>>& fold_mse,
                                     bool one_se) {
    const std::size_t n_lambda = fold_mse.size();
    const std::size_t folds = fold_mse.front().size();
    std::vector<double> cvm(n_lambda, 0.0), cvsd(n_lambda, 0.0);
    for (std::size_t g = 0; g < n_lambda; ++g) {
        double mean = 0.0;
        for (double v : fold_mse[g]) mean += v;
        mean /= static_cast<double>(folds);
        double var = 0.0;
        for (double v : fold_mse[g]) var += (v - mean) * (v - mean);
        cvm[g] = mean;
        cvsd[g] = folds > 1 ? std::sqrt(var / static_cast<double>(folds - 1)) /
                                  std::sqrt(static_cast<double>(folds))
                            : 0.0;
    }
    std::size_t best = 0;
    for (std::size_t g = 1; g < n_lambda; ++g)
        if (cvm[g] < cvm[best]) best = g;
    if (!one_se) return best;
    const double bound = cvm[best] + cvsd[best];
    for (std::size_t g = 0; g <= best; ++g)  // descending grid: first hit is sparsest
        if (cvm[g] <= bound) return g;
    return best;
}

inline StackedCvResult stacked_cv(const NetworkBlock& b1, const NetworkBlock& b2,
                                  const Vector& weights, double lambda_max, Index node,
                                  const RunConfig& cfg) {
    StackedCvResult cv;
    cv.grid = log_grid(lambda_max, cfg.lasso_grid_ratio * lambda_max, cfg.lasso_grid_size);
    cv.curve.assign(cv.grid.size(), 0.0);

    const Index n1 = b1.pz.rows(), n2 = b2.pz.rows();
    const Index m = b1.gram.rows();
    Rng rng1(derive_seed(cfg.seed, static_cast<std::uint64_t>(node),
                         static_cast<std::uint64_t>(n1)));
    Rng rng2(derive_seed(cfg.seed, static_cast<std::uint64_t>(node),
                         static_cast<std::uint64_t>(n2)));
    auto folds1 = make_folds(n1, cfg.cv_folds, rng1);
    auto folds2 = make_folds(n2, cfg.cv_folds, rng2);
    auto pieces1 = split_block(b1, folds1, cfg.cv_folds);
    auto pieces2 = split_block(b2, folds2, cfg.cv_folds);

    std::vector<std::vector<double>> fold_mse(
        cv.grid.size(), std::vector<double>(static_cast<std::size_t>(cfg.cv_folds), 0.0));
    Matrix gram_train;
    Vector xty_train;
    for (int f = 0; f < cfg.cv_folds; ++f) {
        const auto& p1 = pieces1[static_cast<std::size_t>(f)];
        const auto& p2 = pieces2[static_cast<std::size_t>(f)];
        assemble_stacked(p1.gram_train, p2.gram_train, p1.xty_train, p2.xty_train, gram_train,
                         xty_train);
        const Index n_train = (n1 - p1.py.size()) + (n2 - p2.py.size());
        const Index n_held = p1.py.size() + p2.py.size();
        Vector warm = Vector::Zero(2 * m);
        const int cv_iters = std::min(cfg.cd_max_iter, cfg.cv_sweep_cap);
        for (std::size_t g = 0; g < cv.grid.size(); ++g) {
            auto fit = cd_solve(gram_train, xty_train, 0.0, n_train, weights, cv.grid[g],
                                cfg.cd_tol, cv_iters, &warm);
            warm = fit.beta;
            Vector theta1 = fit.beta.head(m) + fit.beta.tail(m);
            Vector theta2 = fit.beta.head(m) - fit.beta.tail(m);
            const double sse = (p1.py - p1.pz * theta1).squaredNorm() +
                               (p2.py - p2.pz * theta2).squaredNorm();
            cv.curve[g] += sse;
            if (n_held > 0)
                fold_mse[g][static_cast<std::size_t>(f)] = sse / static_cast<double>(n_held);
        }
    }
    const double n_total = static_cast<double>(n1 + n2);
    for (double& v : cv.curve) v /= n_total;
    cv.lambda_star = cv.grid[pick_lambda_index(fold_mse, cfg.cv_one_se)];
    return cv;
}

inline Vector expand_to_p(const Vector& compact, Index p, Index node) {
    Vector full = Vector::Zero(p);
    for (Index j = 0; j < p - 1; ++j) full[j < node ? j : j + 1] = compact[j];
    return full;
}

}  // namespace detail

/// Stage 2 for one node: project out the anchors, build the stacked design
/// from the calibrated predictions, ridge-initialize the adaptive weights,
/// cross-validate the l1 penalty, fit, and split the coefficients into
/// average and differential halves.
inline NodeEstimate construct_node(Index i, const ObservationPair& pair,
                                   const CalibrationResult& calib, const RunConfig& cfg) {
    const Index p = pair.p();
    const Index m = p - 1;
    NodeEstimate est;
    est.node = i;
    est.tuning.node = i;
    est.beta_plus = Vector::Zero(p);
    est.beta_minus = Vector::Zero(p);
    est.gamma1 = Vector::Zero(p);
    est.gamma2 = Vector::Zero(p);
    if (m == 0) return est;

    auto b1 = detail::make_block(pair.x1, pair.anchors1[static_cast<std::size_t>(i)],
                                 calib.net[0].y_hat, pair.y1.col(i), i);
    auto b2 = detail::make_block(pair.x2, pair.anchors2[static_cast<std::size_t>(i)],
                                 calib.net[1].y_hat, pair.y2.col(i), i);
    const Index n_total = pair.n1() + pair.n2();

    auto [beta_init, ridge_lambda] = detail::stacked_ridge_init(b1, b2, n_total,
                                                                cfg.ridge_grid_size);
    est.tuning.ridge_init_lambda = ridge_lambda;
    Vector weights = adaptive_weights(beta_init, weight_epsilon(beta_init,
                                                                cfg.weight_epsilon_rel));
    est.tuning.weights = weights;

    Matrix gram;
    Vector xty;
    detail::assemble_stacked(b1.gram, b2.gram, b1.xty, b2.xty, gram, xty);
    const double lambda_max = null_lambda(xty, n_total, weights);
    est.tuning.lambda_max = lambda_max;

    Vector beta = Vector::Zero(2 * m);
    if (lambda_max > 0.0) {
        auto cv = detail::stacked_cv(b1, b2, weights, lambda_max, i, cfg);
        est.tuning.lambda = cv.lambda_star;
        // final fit: warm-started path on the full data down to lambda_star
        Vector warm = Vector::Zero(2 * m);
        LassoFit fit;
        for (double lambda : cv.grid) {
            fit = detail::cd_solve(gram, xty, b1.ysq + b2.ysq, n_total, weights, lambda,
                                   cfg.cd_tol, cfg.cd_max_iter, &warm);
            warm = fit.beta;
            if (lambda == cv.lambda_star) break;
        }
        beta = fit.beta;
        est.tuning.iterations = fit.iterations;
        est.tuning.converged = fit.converged;
        Vector grad2n = (xty - gram * beta) * (2.0 / static_cast<double>(n_total));
        est.tuning.kkt = detail::kkt_from_gradient(grad2n, weights, cv.lambda_star, beta);
        if (!fit.converged && cfg.strict)
            throw NumericalError("stage 2: coordinate descent did not converge at node " +
                                 std::to_string(i));
    } else {
        est.tuning.lambda = 0.0;
    }

    // emit all four coefficient vectors in exact mutual consistency
    est.gamma1 = detail::expand_to_p(beta.head(m) + beta.tail(m), p, i);
    est.gamma2 = detail::expand_to_p(beta.head(m) - beta.tail(m), p, i);
    est.beta_plus = (est.gamma1 + est.gamma2) / 2.0;
    est.beta_minus = (est.gamma1 - est.gamma2) / 2.0;

    if (cfg.fit_phi) {
        Vector theta1 = beta.head(m) + beta.tail(m);
        Vector theta2 = beta.head(m) - beta.tail(m);
        Matrix yh1 = detail::drop_column(calib.net[0].y_hat, i);
        Matrix yh2 = detail::drop_column(calib.net[1].y_hat, i);
        Matrix xa1 = detail::take_columns(pair.x1, pair.anchors1[static_cast<std::size_t>(i)]);
        Matrix xa2 = detail::take_columns(pair.x2, pair.anchors2[static_cast<std::size_t>(i)]);
        if (xa1.cols() > 0) est.phi1 = ols_fit(xa1, pair.y1.col(i) - yh1 * theta1);
        if (xa2.cols() > 0) est.phi2 = ols_fit(xa2, pair.y2.col(i) - yh2 * theta2);
    }
    return est;
}

/// Full two-stage differential analysis plus classification.
struct RednetResult {
    DifferentialEstimate estimate;
    EdgeReport report;
};

namespace detail {

inline void run_anchor_check(const ObservationPair& pair, const RunConfig& cfg,
                             std::vector<std::string>* warnings) {
    auto check = validate_anchors(pair);
    if (check.ok()) return;
    std::string all;
    for (const auto& v : check.violations) all += (all.empty() ? "" : "; ") + v.describe();
    if (cfg.anchors_warn_only) {
        if (warnings != nullptr) warnings->push_back("anchor validation: " + all);
        return;
    }
    throw ValidationError("anchor validation failed: " + all);
}

}  // namespace detail

inline RednetResult rednet_run(const ObservationPair& pair, const RunConfig& cfg,
                               const CalibrationResult* precomputed = nullptr,
                               std::vector<std::string>* warnings = nullptr) {
    check_dimensions(pair);
    if (cfg.cv_folds < 2 || cfg.cv_folds > std::min(pair.n1(), pair.n2()))
        throw ValidationError("rednet_run: cv_folds must be in [2, min(n1, n2)]");
    detail::run_anchor_check(pair, cfg, warnings);
    CalibrationResult local;
    const CalibrationResult* calib = precomputed;
    if (calib == nullptr) {
        local = calibrate_all(pair, cfg);
        calib = &local;
    }

    const Index p = pair.p();
    const Index q = pair.q();
    RednetResult out;
    out.estimate.beta_plus = Matrix::Zero(p, p);
    out.estimate.beta_minus = Matrix::Zero(p, p);
    out.estimate.gamma1 = Matrix::Zero(p, p);
    out.estimate.gamma2 = Matrix::Zero(p, p);
    out.estimate.phi1 = Matrix::Zero(q, p);
    out.estimate.phi2 = Matrix::Zero(q, p);
    out.estimate.tuning.resize(static_cast<std::size_t>(p));

    parallel_for(static_cast<std::size_t>(p), cfg.threads, [&](std::size_t task) {
        const Index i = static_cast<Index>(task);
        try {
            NodeEstimate est = construct_node(i, pair, *calib, cfg);
            out.estimate.beta_plus.col(i) = est.beta_plus;
            out.estimate.beta_minus.col(i) = est.beta_minus;
            out.estimate.gamma1.col(i) = est.gamma1;
            out.estimate.gamma2.col(i) = est.gamma2;
            const auto& a1 = pair.anchors1[task];
            for (std::size_t a = 0; a < a1.size() && a < static_cast<std::size_t>(est.phi1.size()); ++a)
                out.estimate.phi1(a1[a], i) = est.phi1[static_cast<Index>(a)];
            const auto& a2 = pair.anchors2[task];
            for (std::size_t a = 0; a < a2.size() && a < static_cast<std::size_t>(est.phi2.size()); ++a)
                out.estimate.phi2(a2[a], i) = est.phi2[static_cast<Index>(a)];
            out.estimate.tuning[task] = est.tuning;
        } catch (const std::exception& e) {
            if (cfg.strict)
                throw NumericalError("construction failed at node " + std::to_string(i) + ": " +
                                     e.what());
            out.estimate.tuning[task].node = i;
            out.estimate.tuning[task].failed = true;
            out.estimate.tuning[task].message = e.what();
        }
    });

    out.report = classify_edges(out.estimate, cfg.classify_tol, pair.node_names);
    return out;
}

/// Per-network baseline: the same calibration stage, then an independent
/// adaptive lasso per node per network. Differential edges are the ordered
/// pairs whose estimated presence or sign differs between the two fitted
/// networks; common edges are selected in both with the same sign.
struct NaiveResult {
    Matrix gamma1, gamma2;
    Matrix beta_plus, beta_minus;  // (gamma1 +/- gamma2)/2, for reporting
    EdgeReport report;
    std::vector<NodeTuning> tuning1, tuning2;
};

inline NaiveResult naive_run(const ObservationPair& pair, const RunConfig& cfg,
                             const CalibrationResult* precomputed = nullptr,
                             std::vector<std::string>* warnings = nullptr) {
    check_dimensions(pair);
    if (cfg.cv_folds < 2 || cfg.cv_folds > std::min(pair.n1(), pair.n2()))
        throw ValidationError("naive_run: cv_folds must be in [2, min(n1, n2)]");
    detail::run_anchor_check(pair, cfg, warnings);
    CalibrationResult local;
    const CalibrationResult* calib = precomputed;
    if (calib == nullptr) {
        local = calibrate_all(pair, cfg);
        calib = &local;
    }

    const Index p = pair.p();
    NaiveResult out;
    out.gamma1 = Matrix::Zero(p, p);
    out.gamma2 = Matrix::Zero(p, p);
    out.tuning1.resize(static_cast<std::size_t>(p));
    out.tuning2.resize(static_cast<std::size_t>(p));

    parallel_for(static_cast<std::size_t>(2 * p), cfg.threads, [&](std::size_t task) {
        const int k = static_cast<int>(task / static_cast<std::size_t>(p));
        const Index i = static_cast<Index>(task % static_cast<std::size_t>(p));
        auto& tuning = (k == 0 ? out.tuning1 : out.tuning2)[static_cast<std::size_t>(i)];
        tuning.node = i;
        try {
            const auto& x = k == 0 ? pair.x1 : pair.x2;
            const auto& y = k == 0 ? pair.y1 : pair.y2;
            const auto& anchors = k == 0 ? pair.anchors1 : pair.anchors2;
            auto block = detail::make_block(x, anchors[static_cast<std::size_t>(i)],
                                            calib->net[static_cast<std::size_t>(k)].y_hat,
                                            y.col(i), i);
            const Index n_k = x.rows();
            const Index m = p - 1;
            if (m == 0) return;

            // GCV ridge init on this network alone
            auto grid = default_ridge_grid(n_k, cfg.ridge_grid_size);
            double best_score = std::numeric_limits<double>::infinity();
            double best_lambda = grid.front();
            Vector init(m);
            const double nk_d = static_cast<double>(n_k);
            for (double lambda : grid) {
                Vector u = detail::block_ridge(block, 2.0 * lambda) * 2.0;
                // (gram + lambda I)^{-1} xty == 2 (2 gram + 2 lambda I)^{-1} xty
                double rss = std::max(detail::block_rss(block, u), 0.0);
                double tr_a = 0.0;
                for (Index j = 0; j < block.eig.eigenvalues().size(); ++j) {
                    const double mu = std::max(block.eig.eigenvalues()[j], 0.0);
                    tr_a += mu / (mu + lambda);
                }
                double denom = (nk_d - tr_a) / nk_d;
                double score = (rss / nk_d) / (denom * denom);
                if (score < best_score || (score == best_score && lambda < best_lambda)) {
                    best_score = score;
                    best_lambda = lambda;
                    init = u;
                }
            }
            tuning.ridge_init_lambda = best_lambda;
            Vector weights = adaptive_weights(init, weight_epsilon(init, cfg.weight_epsilon_rel));
            tuning.weights = weights;
            const double lambda_max = null_lambda(block.xty, n_k, weights);
            tuning.lambda_max = lambda_max;

            Vector beta = Vector::Zero(m);
            if (lambda_max > 0.0) {
                auto lgrid = log_grid(lambda_max, cfg.lasso_grid_ratio * lambda_max,
                                      cfg.lasso_grid_size);
                Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(i),
                                    static_cast<std::uint64_t>(n_k)));
                auto fold_of = make_folds(n_k, cfg.cv_folds, rng);
                auto pieces = detail::split_block(block, fold_of, cfg.cv_folds);
                std::vector<std::vector<double>> fold_mse(
                    lgrid.size(), std::vector<double>(static_cast<std::size_t>(cfg.cv_folds), 0.0));
                const int cv_iters = std::min(cfg.cd_max_iter, cfg.cv_sweep_cap);
                for (int f = 0; f < cfg.cv_folds; ++f) {
                    const auto& piece = pieces[static_cast<std::size_t>(f)];
                    const Index n_train = n_k - piece.py.size();
                    Vector warm = Vector::Zero(m);
                    for (std::size_t g = 0; g < lgrid.size(); ++g) {
                        auto fit = detail::cd_solve(piece.gram_train, piece.xty_train, 0.0,
                                                    n_train, weights, lgrid[g], cfg.cd_tol,
                                                    cv_iters, &warm);
                        warm = fit.beta;
                        if (piece.py.size() > 0)
                            fold_mse[g][static_cast<std::size_t>(f)] =
                                (piece.py - piece.pz * fit.beta).squaredNorm() /
                                static_cast<double>(piece.py.size());
                    }
                }
                const std::size_t best = detail::pick_lambda_index(fold_mse, cfg.cv_one_se);
                tuning.lambda = lgrid[best];

                Vector warm = Vector::Zero(m);
                LassoFit fit;
                for (double lambda : lgrid) {
                    fit = detail::cd_solve(block.gram, block.xty, block.ysq, n_k, weights,
                                           lambda, cfg.cd_tol, cfg.cd_max_iter, &warm);
                    warm = fit.beta;
                    if (lambda == lgrid[best]) break;
                }
                beta = fit.beta;
                tuning.iterations = fit.iterations;
                tuning.converged = fit.converged;
                Vector grad2n = (block.xty - block.gram * beta) * (2.0 / nk_d);
                tuning.kkt = detail::kkt_from_gradient(grad2n, weights, tuning.lambda, beta);
                if (!fit.converged && cfg.strict)
                    throw NumericalError("naive stage 2: coordinate descent did not converge");
            }
            (k == 0 ? out.gamma1 : out.gamma2).col(i) = detail::expand_to_p(beta, p, i);
        } catch (const std::exception& e) {
            if (cfg.strict)
                throw NumericalError("naive construction failed at node " + std::to_string(i) +
                                     " network " + std::to_string(k + 1) + ": " + e.what());
            tuning.failed = true;
            tuning.message = e.what();
        }
    });

    out.beta_plus = (out.gamma1 + out.gamma2) / 2.0;
    out.beta_minus = (out.gamma1 - out.gamma2) / 2.0;

    out.report.node_names = pair.node_names;
    if (out.report.node_names.empty())
        for (Index i = 0; i < p; ++i) out.report.node_names.push_back("Y" + std::to_string(i + 1));
    auto sign3 = [&](double v) { return std::abs(v) > cfg.classify_tol ? (v > 0.0 ? 1 : -1) : 0; };
    for (Index target = 0; target < p; ++target) {
        for (Index source = 0; source < p; ++source) {
            if (source == target) continue;
            Edge e;
            e.source = source;
            e.target = target;
            e.gamma1 = out.gamma1(source, target);
            e.gamma2 = out.gamma2(source, target);
            e.beta_plus = out.beta_plus(source, target);
            e.beta_minus = out.beta_minus(source, target);
            const int s1 = sign3(e.gamma1), s2 = sign3(e.gamma2);
            if (s1 != s2)
                e.label = EdgeLabel::differential;
            else if (s1 != 0)
                e.label = EdgeLabel::common;
            else
                e.label = EdgeLabel::absent;
            out.report.edges.push_back(e);
        }
    }
    return out;
}

}  // namespace rednet
