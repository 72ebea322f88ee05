#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "rednet/linalg.hpp"
#include "rednet/types.hpp"

namespace rednet {

/// Screening output for one (node, network) task.
struct ScreenSet {
    Index node = 0;
    int network = 1;
    std::vector<Index> selected;  // ordered by score, nonincreasing
    std::vector<double> scores;
};

/// Default screened-set size: floor(n^exponent), capped by q.
inline Index default_screen_count(Index n, Index q, double exponent = 0.9) {
    auto d = static_cast<Index>(std::floor(std::pow(static_cast<double>(n), exponent)));
    return std::min(std::max<Index>(d, 1), q);
}

/// Rank all exogenous columns by |x_j' y| descending (marginal correlation
/// under column standardization). Ties break toward the lower column index so
/// runs are reproducible.
inline std::pair<std::vector<Index>, std::vector<double>> sis_rank(const Matrix& x,
                                                                   const Vector& y) {
    const Index q = x.cols();
    Vector score = (x.transpose() * y).cwiseAbs();
    std::vector<Index> order(static_cast<std::size_t>(q));
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](Index a, Index b) { return score[a] > score[b]; });
    std::vector<double> ranked(static_cast<std::size_t>(q));
    for (std::size_t i = 0; i < order.size(); ++i) ranked[i] = score[order[i]];
    return {order, ranked};
}

/// Keep the d columns with the largest marginal scores. Screening is skipped
/// entirely when q <= n: all columns are returned.
inline ScreenSet sis_select(const Matrix& x, const Vector& y, Index d) {
    const Index q = x.cols();
    const Index n = x.rows();
    if (d < 1 || d > q)
        throw ValidationError("sis_select: d = " + std::to_string(d) + " outside [1, q = " +
                              std::to_string(q) + "]");
    auto [order, scores] = sis_rank(x, y);
    ScreenSet set;
    const Index keep = q <= n ? q : d;
    set.selected.assign(order.begin(), order.begin() + keep);
    set.scores.assign(scores.begin(), scores.begin() + keep);
    return set;
}

/// Iterative variant: r rounds of residual re-screening, each round claiming
/// ceil(d/r) columns ranked against the current ridge residual. r = 1 is
/// plain SIS and the default path.
inline ScreenSet sis_select_iterative(const Matrix& x, const Vector& y, Index d, int rounds) {
    const Index q = x.cols();
    const Index n = x.rows();
    if (rounds <= 1 || q <= n) return sis_select(x, y, d);
    if (d < 1 || d > q)
        throw ValidationError("sis_select_iterative: d outside [1, q]");
    std::vector<char> taken(static_cast<std::size_t>(q), 0);
    std::vector<Index> selected;
    std::vector<double> sel_scores;
    Vector residual = y;
    const Index chunk = (d + rounds - 1) / rounds;
    while (static_cast<Index>(selected.size()) < d) {
        auto [order, scores] = sis_rank(x, residual);
        Index added = 0;
        for (std::size_t i = 0; i < order.size() && added < chunk &&
                                static_cast<Index>(selected.size()) < d;
             ++i) {
            if (taken[static_cast<std::size_t>(order[i])]) continue;
            taken[static_cast<std::size_t>(order[i])] = 1;
            selected.push_back(order[i]);
            sel_scores.push_back(scores[i]);
            ++added;
        }
        // refit on everything claimed so far, re-screen the residual
        Matrix sub(x.rows(), static_cast<Index>(selected.size()));
        for (std::size_t j = 0; j < selected.size(); ++j) sub.col(static_cast<Index>(j)) = x.col(selected[j]);
        Vector coef = ridge_fit(sub, y, 1e-6 * static_cast<double>(n));
        residual = y - sub * coef;
    }
    ScreenSet set;
    set.selected = std::move(selected);
    set.scores = std::move(sel_scores);
    return set;
}

}  // namespace rednet
