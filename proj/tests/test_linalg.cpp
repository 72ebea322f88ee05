#include <catch2/catch.hpp>

#include <Eigen/Eigenvalues>
#include <cmath>

#include "rednet/linalg.hpp"
#include "rednet/rng.hpp"

using namespace rednet;

namespace {

Matrix random_matrix(Index n, Index d, Rng& rng) {
    Matrix m(n, d);
    for (Index j = 0; j < d; ++j)
        for (Index r = 0; r < n; ++r) m(r, j) = rng.normal();
    return m;
}

Vector random_vector(Index n, Rng& rng) {
    Vector v(n);
    for (Index r = 0; r < n; ++r) v[r] = rng.normal();
    return v;
}

// dense reference: explicit inverse, independent of the Cholesky path
Vector ridge_reference(const Matrix& x, const Vector& y, double lambda) {
    Matrix gram = x.transpose() * x;
    gram.diagonal().array() += lambda;
    return gram.inverse() * (x.transpose() * y);
}

double gcv_reference(const Matrix& x, const Vector& y, double lambda) {
    const double n = static_cast<double>(x.rows());
    Matrix gram = x.transpose() * x;
    gram.diagonal().array() += lambda;
    Matrix a = x * gram.inverse() * x.transpose();
    Matrix i_minus_a = Matrix::Identity(x.rows(), x.rows()) - a;
    double rss = (i_minus_a * y).squaredNorm();
    double tr = i_minus_a.trace();
    return (rss / n) / ((tr / n) * (tr / n));
}

}  // namespace

TEST_CASE("standardize_columns: ones column is a fixed point") {
    Matrix x = Matrix::Ones(9, 1);
    auto std_x = standardize_columns(x);
    CHECK((std_x.x - x).cwiseAbs().maxCoeff() == 0.0);
    CHECK(std_x.scales[0] == Approx(1.0));
}

TEST_CASE("standardize_columns: (2,0,0,0) already has norm sqrt(4)") {
    Matrix x(4, 1);
    x << 2, 0, 0, 0;
    auto std_x = standardize_columns(x);
    CHECK((std_x.x - x).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("standardize_columns: (3,4) scales by sqrt(2)/5") {
    Matrix x(2, 1);
    x << 3, 4;
    auto std_x = standardize_columns(x);
    CHECK(std_x.x(0, 0) == Approx(3.0 * std::sqrt(2.0) / 5.0).epsilon(1e-14));
    CHECK(std_x.x(1, 0) == Approx(4.0 * std::sqrt(2.0) / 5.0).epsilon(1e-14));
    CHECK(std_x.x.col(0).norm() == Approx(std::sqrt(2.0)).epsilon(1e-14));
    // scales restore the original column
    CHECK((std_x.x.col(0) * std_x.scales[0] - x.col(0)).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("standardize_columns: zero column error names the column") {
    Matrix x = Matrix::Ones(4, 3);
    x.col(1).setZero();
    try {
        standardize_columns(x);
        FAIL("expected NumericalError");
    } catch (const NumericalError& e) {
        CHECK(std::string(e.what()).find("column 1") != std::string::npos);
    }
}

TEST_CASE("ridge_fit: identity design at lambda 0 returns y") {
    Matrix x = Matrix::Identity(5, 5);
    Vector y(5);
    y << 1, -2, 3, 0.5, -0.25;
    CHECK((ridge_fit(x, y, 0.0) - y).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("ridge_fit: infinite shrinkage sends coefficients to zero") {
    Rng rng(11);
    Matrix x = random_matrix(30, 4, rng);
    Vector y = random_vector(30, rng);
    CHECK(ridge_fit(x, y, 1e9).norm() <= 1e-5);
}

TEST_CASE("ridge_fit: scalar closed form") {
    Matrix x(2, 1);
    x << 1, 1;
    Vector y(2);
    y << 1, 1;
    CHECK(ridge_fit(x, y, 2.0)[0] == Approx(0.5).epsilon(1e-14));
}

TEST_CASE("ridge_fit: singular system at lambda 0 advises lambda > 0") {
    Matrix x(4, 2);
    x.col(0) << 1, 2, 3, 4;
    x.col(1) = x.col(0);  // duplicate column
    Vector y(4);
    y << 1, 0, 0, 1;
    try {
        ridge_fit(x, y, 0.0);
        FAIL("expected NumericalError");
    } catch (const NumericalError& e) {
        CHECK(std::string(e.what()).find("lambda > 0") != std::string::npos);
    }
    CHECK_NOTHROW(ridge_fit(x, y, 0.5));
    CHECK_THROWS_AS(ridge_fit(x, y, -1.0), ValidationError);
}

TEST_CASE("ridge_fit matches the dense reference on 100 random instances") {
    Rng rng(2024);
    for (int rep = 0; rep < 100; ++rep) {
        const Index n = 10 + static_cast<Index>(rng.below(30));
        const Index d = 1 + static_cast<Index>(rng.below(8));
        Matrix x = random_matrix(n, d, rng);
        Vector y = random_vector(n, rng);
        const double lambda = std::exp(rng.uniform(-6.0, 4.0));
        Vector ours = ridge_fit(x, y, lambda);
        Vector ref = ridge_reference(x, y, lambda);
        CHECK((ours - ref).cwiseAbs().maxCoeff() <= 1e-8);
    }
}

TEST_CASE("ridge_fit residual optimality under coordinate perturbations") {
    Rng rng(5);
    Matrix x = random_matrix(25, 4, rng);
    Vector y = random_vector(25, rng);
    const double lambda = 3.0;
    Vector beta = ridge_fit(x, y, lambda);
    auto objective = [&](const Vector& b) {
        return (y - x * b).squaredNorm() + lambda * b.squaredNorm();
    };
    const double base = objective(beta);
    for (Index j = 0; j < beta.size(); ++j) {
        for (double delta : {1e-4, -1e-4}) {
            Vector perturbed = beta;
            perturbed[j] += delta;
            CHECK(objective(perturbed) >= base);
        }
    }
}

TEST_CASE("gcv_select: single-element grid returns that element") {
    Rng rng(13);
    Matrix x = random_matrix(12, 3, rng);
    Vector y = random_vector(12, rng);
    auto sel = gcv_select(x, y, {2.5});
    CHECK(sel.lambda_star == 2.5);
    REQUIRE(sel.scores.size() == 1);
    CHECK_THROWS_AS(gcv_select(x, y, {}), ValidationError);
    CHECK_THROWS_AS(gcv_select(x, y, {0.0}), ValidationError);
}

TEST_CASE("gcv scores match the dense oracle") {
    Rng rng(17);
    Matrix x = random_matrix(20, 5, rng);
    Vector y = random_vector(20, rng);
    auto grid = default_ridge_grid(20, 12);
    auto sel = gcv_select(x, y, grid);
    for (std::size_t g = 0; g < grid.size(); ++g) {
        double ref = gcv_reference(x, y, grid[g]);
        CHECK(sel.scores[g] == Approx(ref).epsilon(1e-8));
    }
}

TEST_CASE("gcv_select: response in the column span picks the grid minimum") {
    Rng rng(19);
    Matrix x = random_matrix(40, 3, rng);
    Vector beta = random_vector(3, rng);
    Vector y = x * beta;
    for (Index r = 0; r < y.size(); ++r) y[r] += 1e-9 * rng.normal();
    auto grid = default_ridge_grid(40);
    auto sel = gcv_select(x, y, grid);
    CHECK(sel.lambda_star == *std::min_element(grid.begin(), grid.end()));
}

TEST_CASE("gcv_select is invariant to grid order") {
    Rng rng(23);
    Matrix x = random_matrix(18, 4, rng);
    Vector y = random_vector(18, rng);
    auto grid = default_ridge_grid(18, 20);
    auto sel = gcv_select(x, y, grid);
    std::vector<double> reversed(grid.rbegin(), grid.rend());
    auto sel_rev = gcv_select(x, y, reversed);
    CHECK(sel.lambda_star == sel_rev.lambda_star);
}

TEST_CASE("ridge norm is nonincreasing in lambda") {
    Rng rng(29);
    Matrix x = random_matrix(25, 5, rng);
    Vector y = random_vector(25, rng);
    auto grid = default_ridge_grid(25, 30);
    std::sort(grid.begin(), grid.end());
    double last = std::numeric_limits<double>::infinity();
    for (double lambda : grid) {
        double norm = ridge_fit(x, y, lambda).norm();
        CHECK(norm <= last * (1.0 + 1e-12));
        last = norm;
    }
}

TEST_CASE("annihilator of the ones column is the centering matrix") {
    const Index n = 6;
    Matrix ones = Matrix::Ones(n, 1);
    Matrix h = annihilator(ones);
    Matrix centering = Matrix::Identity(n, n) - Matrix::Constant(n, n, 1.0 / n);
    CHECK((h - centering).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("annihilator properties on random anchor blocks") {
    Rng rng(31);
    for (int rep = 0; rep < 50; ++rep) {
        const Index n = 8 + static_cast<Index>(rng.below(20));
        const Index a = 1 + static_cast<Index>(rng.below(3));
        Matrix x_a = random_matrix(n, a, rng);
        Matrix h = annihilator(x_a);
        CHECK((h * x_a).cwiseAbs().maxCoeff() <= 1e-10);
        CHECK((h * h - h).cwiseAbs().maxCoeff() <= 1e-10);
        Eigen::SelfAdjointEigenSolver<Matrix> eig(h);
        Index zeros = 0;
        for (Index i = 0; i < n; ++i) {
            const double ev = eig.eigenvalues()[i];
            const bool near_zero = std::abs(ev) <= 1e-10;
            const bool near_one = std::abs(ev - 1.0) <= 1e-10;
            CHECK((near_zero || near_one));
            if (near_zero) ++zeros;
        }
        CHECK(zeros == a);
    }
}

TEST_CASE("apply_annihilator edge cases and dense-oracle agreement") {
    Rng rng(37);
    const Index n = 20, a = 2, c = 5;
    Matrix x_a = random_matrix(n, a, rng);

    // columns inside span(x_a) project to zero
    Matrix in_span = x_a * random_matrix(a, c, rng);
    CHECK(apply_annihilator(x_a, in_span).cwiseAbs().maxCoeff() <= 1e-10);

    // columns orthogonal to x_a are unchanged
    Matrix h = annihilator(x_a);
    Matrix orth = h * random_matrix(n, c, rng);  // already annihilated
    CHECK((apply_annihilator(x_a, orth) - orth).cwiseAbs().maxCoeff() <= 1e-10);

    // random m matches the explicit product
    Matrix m = random_matrix(n, c, rng);
    CHECK((apply_annihilator(x_a, m) - h * m).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("annihilator rejects collinear anchors") {
    Matrix x_a(6, 2);
    x_a.col(0) << 1, 2, 3, 4, 5, 6;
    x_a.col(1) = 2.0 * x_a.col(0);
    CHECK_THROWS_AS(annihilator(x_a), NumericalError);
    CHECK_THROWS_AS(apply_annihilator(x_a, Matrix::Ones(6, 1)), NumericalError);
}

TEST_CASE("ols_fit: identity, exact recovery, ridge limit") {
    Matrix eye = Matrix::Identity(4, 4);
    Vector y(4);
    y << 4, 3, 2, 1;
    CHECK((ols_fit(eye, y) - y).cwiseAbs().maxCoeff() <= 1e-12);

    Rng rng(41);
    Matrix x = random_matrix(30, 4, rng);
    Vector beta = random_vector(4, rng);
    Vector exact = x * beta;
    CHECK((ols_fit(x, exact) - beta).cwiseAbs().maxCoeff() <= 1e-10);

    Vector noisy = exact + 0.1 * random_vector(30, rng);
    CHECK((ols_fit(x, noisy) - ridge_fit(x, noisy, 1e-12)).cwiseAbs().maxCoeff() <= 1e-6);

    Matrix deficient(5, 2);
    deficient.col(0) << 1, 1, 1, 1, 1;
    deficient.col(1) = deficient.col(0);
    CHECK_THROWS_AS(ols_fit(deficient, Vector::Ones(5)), NumericalError);
}
