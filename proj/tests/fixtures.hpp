#pragma once

// Shared test fixtures and independent oracles. Everything here must stay
// independent of the implementation paths it checks.

#include <cmath>
#include <vector>

#include "rednet/adalasso.hpp"
#include "rednet/rng.hpp"
#include "rednet/types.hpp"

namespace fixtures {

using rednet::AdaLassoProblem;
using rednet::Index;
using rednet::Matrix;
using rednet::Rng;
using rednet::Vector;

inline double lasso_objective(const AdaLassoProblem& prob, const Vector& beta) {
    const double n = static_cast<double>(prob.design.rows());
    double fit = (prob.response - prob.design * beta).squaredNorm() / n;
    return fit + prob.lambda * prob.weights.cwiseProduct(beta.cwiseAbs()).sum();
}

/// Brute-force minimizer by multi-resolution grid descent over [lo, hi]^m.
/// Four rounds of a 41-point-per-axis grid, each zooming into a window of
/// two coarse steps around the incumbent; final effective resolution is well
/// under 1e-3 for the [-2, 2] box.
inline Vector brute_force_lasso(const AdaLassoProblem& prob, double lo = -2.0, double hi = 2.0,
                                int points = 41, int rounds = 4) {
    const Index m = prob.design.cols();
    Matrix gram = prob.design.transpose() * prob.design;
    Vector xty = prob.design.transpose() * prob.response;
    const double yty = prob.response.squaredNorm();
    const double n = static_cast<double>(prob.design.rows());

    auto objective = [&](const Vector& b) {
        double fit = (yty - 2.0 * b.dot(xty) + b.dot(gram * b)) / n;
        return fit + prob.lambda * prob.weights.cwiseProduct(b.cwiseAbs()).sum();
    };

    Vector center = Vector::Zero(m);
    double half = (hi - lo) / 2.0;
    center.setConstant((hi + lo) / 2.0);
    Vector best = center;

    for (int round = 0; round < rounds; ++round) {
        const double step = 2.0 * half / (points - 1);
        std::vector<int> idx(static_cast<std::size_t>(m), 0);
        double best_obj = std::numeric_limits<double>::infinity();
        Vector point(m), best_point(m);
        for (;;) {
            for (Index j = 0; j < m; ++j)
                point[j] = center[j] - half + step * idx[static_cast<std::size_t>(j)];
            double obj = objective(point);
            if (obj < best_obj) {
                best_obj = obj;
                best_point = point;
            }
            Index j = 0;
            while (j < m && ++idx[static_cast<std::size_t>(j)] == points) {
                idx[static_cast<std::size_t>(j)] = 0;
                ++j;
            }
            if (j == m) break;
        }
        best = best_point;
        center = best_point;
        half = 2.0 * step;  // window padded to two coarse steps on each side
    }
    return best;
}

/// Small weighted-l1 instances (m <= 4) used by the unit tests and the
/// acceptance suite. Deterministic.
inline std::vector<AdaLassoProblem> small_lasso_instances() {
    std::vector<AdaLassoProblem> out;
    Rng rng(20240811);
    auto random_instance = [&](Index n, Index m, double lambda, bool sparse_weights) {
        AdaLassoProblem prob;
        prob.design.resize(n, m);
        for (Index j = 0; j < m; ++j)
            for (Index r = 0; r < n; ++r) prob.design(r, j) = rng.normal();
        Vector beta_true = Vector::Zero(m);
        for (Index j = 0; j < m; ++j)
            if (rng.uniform01() < 0.6) beta_true[j] = rng.uniform(-1.2, 1.2);
        prob.response.resize(n);
        for (Index r = 0; r < n; ++r)
            prob.response[r] = prob.design.row(r).dot(beta_true) + 0.3 * rng.normal();
        prob.weights = Vector::Ones(m);
        if (sparse_weights)
            for (Index j = 0; j < m; ++j) prob.weights[j] = rng.uniform(0.5, 3.0);
        prob.lambda = lambda;
        return prob;
    };
    out.push_back(random_instance(12, 2, 0.05, false));
    out.push_back(random_instance(15, 3, 0.1, false));
    out.push_back(random_instance(20, 3, 0.3, true));
    out.push_back(random_instance(18, 4, 0.05, true));
    out.push_back(random_instance(20, 4, 0.5, false));
    // near-duplicate columns: correlated design
    {
        AdaLassoProblem prob = random_instance(16, 3, 0.2, false);
        prob.design.col(1) = prob.design.col(0) + 0.1 * prob.design.col(1);
        out.push_back(prob);
    }
    return out;
}

}  // namespace fixtures
