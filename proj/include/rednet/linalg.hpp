#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "rednet/types.hpp"

namespace rednet {

struct StandardizedColumns {
    Matrix x;       // each column has l2 norm exactly sqrt(n)
    Vector scales;  // original column j = x.col(j) * scales[j]
};

/// Scale every column of x to l2 norm sqrt(n). No centering.
inline StandardizedColumns standardize_columns(const Matrix& x) {
    const Index n = x.rows();
    StandardizedColumns out;
    out.x = x;
    out.scales = Vector::Ones(x.cols());
    const double root_n = std::sqrt(static_cast<double>(n));
    for (Index j = 0; j < x.cols(); ++j) {
        double norm = x.col(j).norm();
        if (norm == 0.0)
            throw NumericalError("standardize_columns: column " + std::to_string(j) +
                                 " is identically zero");
        out.scales[j] = norm / root_n;
        out.x.col(j) /= out.scales[j];
    }
    return out;
}

inline std::vector<double> log_grid(double lo, double hi, int count) {
    std::vector<double> grid(static_cast<std::size_t>(count));
    if (count == 1) {
        grid[0] = lo;
        return grid;
    }
    const double llo = std::log(lo), lhi = std::log(hi);
    for (int i = 0; i < count; ++i)
        grid[static_cast<std::size_t>(i)] = std::exp(llo + (lhi - llo) * i / (count - 1));
    return grid;
}

/// Default ridge search grid: 50 log-spaced points in [1e-4 n, 1e2 n].
inline std::vector<double> default_ridge_grid(Index n, int count = 50) {
    return log_grid(1e-4 * static_cast<double>(n), 1e2 * static_cast<double>(n), count);
}

/// Minimizer of ||y - x b||^2 + lambda ||b||^2 via a SPD solve of
/// (x'x + lambda I) b = x'y. Never forms an explicit inverse.
inline Vector ridge_fit(const Matrix& x, const Vector& y, double lambda) {
    if (lambda < 0.0) throw ValidationError("ridge_fit: lambda must be >= 0");
    if (lambda == 0.0) {
        Eigen::ColPivHouseholderQR<Matrix> qr(x);
        if (qr.rank() < x.cols())
            throw NumericalError(
                "ridge_fit: x'x is singular at lambda = 0; pass lambda > 0 to regularize");
    }
    Matrix gram = x.transpose() * x;
    gram.diagonal().array() += lambda;
    Vector xty = x.transpose() * y;
    Eigen::LLT<Matrix> llt(gram);
    if (llt.info() == Eigen::Success) return llt.solve(xty);
    // Cholesky refused the system; fall back to a rank-revealing factorization.
    return Eigen::ColPivHouseholderQR<Matrix>(gram).solve(xty);
}

/// Least squares via column-pivoted QR. Errors on rank deficiency.
inline Vector ols_fit(const Matrix& x, const Vector& y) {
    Eigen::ColPivHouseholderQR<Matrix> qr(x);
    if (qr.rank() < x.cols())
        throw NumericalError("ols_fit: design is rank deficient (rank " +
                             std::to_string(qr.rank()) + " of " + std::to_string(x.cols()) + ")");
    return qr.solve(y);
}

/// One SVD of the design, reused to evaluate ridge fits and GCV scores for
/// any number of penalty values. The SVD can be shared across responses on
/// the same design (several nodes regressed on one exogenous matrix).
class RidgeGcvCache {
public:
    using Svd = Eigen::BDCSVD<Matrix>;

    static std::shared_ptr<const Svd> decompose(const Matrix& x) {
        return std::make_shared<const Svd>(x, Eigen::ComputeThinU | Eigen::ComputeThinV);
    }

    RidgeGcvCache(const Matrix& x, const Vector& y) : RidgeGcvCache(decompose(x), x.rows(), y) {}

    RidgeGcvCache(std::shared_ptr<const Svd> svd, Index n_rows, const Vector& y)
        : n_(n_rows),
          svd_(std::move(svd)),
          uty_(svd_->matrixU().transpose() * y),
          y_sq_(y.squaredNorm()) {}

    Index rows() const { return n_; }

    /// Generalized cross-validation score
    ///   GCV(l) = (1/n)||(I - A(l)) y||^2 / [(1/n) tr(I - A(l))]^2,
    ///   A(l) = x (x'x + l I)^{-1} x'.
    double gcv(double lambda) const {
        const auto& s = svd_->singularValues();
        const double n = static_cast<double>(n_);
        double rss = y_sq_;
        double tr_a = 0.0;
        for (Index i = 0; i < s.size(); ++i) {
            const double s2 = s[i] * s[i];
            const double shrink = s2 / (s2 + lambda);
            // ||(I-A)y||^2 = ||y||^2 - sum (2 g - g^2) u_i^2 with g the mode shrinkage
            rss -= (2.0 * shrink - shrink * shrink) * uty_[i] * uty_[i];
            tr_a += shrink;
        }
        rss = std::max(rss, 0.0);
        const double denom = (n - tr_a) / n;
        return (rss / n) / (denom * denom);
    }

    Vector fit(double lambda) const {
        const auto& s = svd_->singularValues();
        Vector scaled(s.size());
        for (Index i = 0; i < s.size(); ++i)
            scaled[i] = s[i] / (s[i] * s[i] + lambda) * uty_[i];
        return svd_->matrixV() * scaled;
    }

private:
    Index n_;
    std::shared_ptr<const Svd> svd_;
    Vector uty_;
    double y_sq_;
};

struct GcvSelection {
    double lambda_star = 0.0;
    std::vector<double> scores;  // aligned with the input grid
};

/// Pick the grid value minimizing GCV. Ties resolve to the smallest lambda so
/// the choice cannot depend on grid order.
inline GcvSelection gcv_select(const RidgeGcvCache& cache, const std::vector<double>& grid) {
    if (grid.empty()) throw ValidationError("gcv_select: empty grid");
    GcvSelection sel;
    sel.scores.reserve(grid.size());
    double best = std::numeric_limits<double>::infinity();
    for (double lambda : grid) {
        if (lambda <= 0.0) throw ValidationError("gcv_select: grid entries must be > 0");
        double score = cache.gcv(lambda);
        sel.scores.push_back(score);
        if (score < best || (score == best && lambda < sel.lambda_star)) {
            best = score;
            sel.lambda_star = lambda;
        }
    }
    return sel;
}

inline GcvSelection gcv_select(const Matrix& x, const Vector& y, const std::vector<double>& grid) {
    RidgeGcvCache cache(x, y);
    return gcv_select(cache, grid);
}

namespace detail {

inline Eigen::LLT<Matrix> anchor_gram_llt(const Matrix& x_a) {
    Eigen::ColPivHouseholderQR<Matrix> qr(x_a);
    if (qr.rank() < x_a.cols())
        throw NumericalError("annihilator: anchor columns are collinear (rank " +
                             std::to_string(qr.rank()) + " of " + std::to_string(x_a.cols()) +
                             ")");
    return Eigen::LLT<Matrix>(Matrix(x_a.transpose() * x_a));
}

}  // namespace detail

/// Residual-maker matrix H = I - x_a (x_a' x_a)^{-1} x_a'. Symmetric,
/// idempotent, annihilates span(x_a). An empty anchor block gives the
/// identity. Use apply_annihilator for anything large; this materializes
/// n x n.
inline Matrix annihilator(const Matrix& x_a) {
    const Index n = x_a.rows();
    if (x_a.cols() == 0) return Matrix::Identity(n, n);
    if (x_a.cols() >= n)
        throw ValidationError("annihilator: need fewer anchor columns than rows");
    auto llt = detail::anchor_gram_llt(x_a);
    Matrix h = -x_a * llt.solve(Matrix(x_a.transpose()));
    h.diagonal().array() += 1.0;
    return h;
}

/// annihilator(x_a) * m computed as m - x_a ((x_a'x_a)^{-1} (x_a' m)),
/// O(n a c) without the n x n matrix.
inline Matrix apply_annihilator(const Matrix& x_a, const Matrix& m) {
    if (x_a.rows() != m.rows())
        throw ValidationError("apply_annihilator: row counts differ");
    if (x_a.cols() == 0) return m;
    if (x_a.cols() >= x_a.rows())
        throw ValidationError("apply_annihilator: need fewer anchor columns than rows");
    auto llt = detail::anchor_gram_llt(x_a);
    return m - x_a * llt.solve(Matrix(x_a.transpose() * m));
}

}  // namespace rednet
