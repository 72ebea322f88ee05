#include <catch2/catch.hpp>

#include <cmath>
#include <set>

#include "rednet/evaluation.hpp"
#include "rednet/pipeline.hpp"
#include "rednet/synthgen.hpp"

using namespace rednet;

namespace {

Matrix random_std_matrix(Index n, Index q, Rng& rng) {
    Matrix x(n, q);
    for (Index j = 0; j < q; ++j)
        for (Index r = 0; r < n; ++r) x(r, j) = rng.normal();
    return standardize_columns(x).x;
}

RunConfig fast_config(std::uint64_t seed = 0) {
    RunConfig cfg;
    cfg.seed = seed;
    cfg.cv_folds = 5;
    cfg.ridge_grid_size = 20;
    cfg.lasso_grid_size = 40;
    return cfg;
}

ObservationPair swap_networks(const ObservationPair& pair) {
    ObservationPair swapped;
    swapped.y1 = pair.y2;
    swapped.x1 = pair.x2;
    swapped.x1_scales = pair.x2_scales;
    swapped.anchors1 = pair.anchors2;
    swapped.y2 = pair.y1;
    swapped.x2 = pair.x1;
    swapped.x2_scales = pair.x1_scales;
    swapped.anchors2 = pair.anchors1;
    swapped.node_names = pair.node_names;
    swapped.exo_names = pair.exo_names;
    return swapped;
}

ObservationPair duplicated_pair(const SyntheticDataset& data) {
    ObservationPair pair = data.pair;
    pair.y2 = pair.y1;
    pair.x2 = pair.x1;
    pair.x2_scales = pair.x1_scales;
    pair.anchors2 = pair.anchors1;
    return pair;
}

}  // namespace

TEST_CASE("calibrate_node: q <= n skips screening and keeps every column") {
    Rng rng(201);
    Matrix x = random_std_matrix(60, 8, rng);
    Vector y(60);
    for (Index r = 0; r < 60; ++r) y[r] = rng.normal();
    auto [cal, y_hat] = calibrate_node(y, x, 4, default_ridge_grid(60, 15));
    CHECK(cal.support.size() == 8);
    CHECK(y_hat.size() == 60);
}

TEST_CASE("calibrate_node: noiseless sparse reduced form is recovered") {
    Rng rng(202);
    const Index n = 30, q = 60;
    Matrix x = random_std_matrix(n, q, rng);
    Vector pi = Vector::Zero(q);
    pi[3] = 1.2;
    pi[17] = -0.9;
    pi[41] = 0.8;
    Vector y = x * pi;  // exact, noiseless
    auto [cal, y_hat] = calibrate_node(y, x, 15, default_ridge_grid(n, 30));
    CHECK((y_hat - y).norm() / y.norm() <= 1e-3);
    std::set<Index> support(cal.support.begin(), cal.support.end());
    CHECK(support.count(3) == 1);
    CHECK(support.count(17) == 1);
    CHECK(support.count(41) == 1);
}

TEST_CASE("calibrate_node: column permutation permutes the support identically") {
    Rng rng(203);
    const Index n = 25, q = 50, d = 10;
    Matrix x = random_std_matrix(n, q, rng);
    Vector y(n);
    for (Index r = 0; r < n; ++r) y[r] = rng.normal();

    std::vector<Index> perm(q);
    std::iota(perm.begin(), perm.end(), Index{0});
    rng.shuffle(perm);
    Matrix xp(n, q);
    for (Index j = 0; j < q; ++j) xp.col(perm[static_cast<std::size_t>(j)]) = x.col(j);

    auto grid = default_ridge_grid(n, 15);
    auto [cal, yh] = calibrate_node(y, x, d, grid);
    auto [cal_p, yh_p] = calibrate_node(y, xp, d, grid);
    std::set<Index> mapped;
    for (Index j : cal.support) mapped.insert(perm[static_cast<std::size_t>(j)]);
    CHECK(mapped == std::set<Index>(cal_p.support.begin(), cal_p.support.end()));
    CHECK((yh - yh_p).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("calibrate_all: p = 1 degenerate pair yields one prediction column") {
    ObservationPair pair;
    Rng rng(204);
    pair.y1 = Matrix(30, 1);
    pair.y2 = Matrix(25, 1);
    pair.x1 = random_std_matrix(30, 2, rng);
    pair.x2 = random_std_matrix(25, 2, rng);
    for (Index r = 0; r < 30; ++r) pair.y1(r, 0) = pair.x1(r, 0) + 0.1 * rng.normal();
    for (Index r = 0; r < 25; ++r) pair.y2(r, 0) = pair.x2(r, 0) + 0.1 * rng.normal();
    pair.anchors1 = {{0}};
    pair.anchors2 = {{0}};
    auto calib = calibrate_all(pair, fast_config());
    CHECK(calib.net[0].y_hat.cols() == 1);
    CHECK(calib.net[1].y_hat.cols() == 1);
    CHECK(calib.net[0].y_hat.rows() == 30);
}

TEST_CASE("calibrate_all is deterministic (no RNG in stage 1)") {
    PairConfig pcfg;
    pcfg.p_total = 8;
    pcfg.sub_p = 8;
    pcfg.n_opposite = 1;
    pcfg.n_unique_each = 1;
    pcfg.seed = 205;
    auto data = generate_dataset(pcfg, 50, 50);
    auto a = calibrate_all(data.pair, fast_config());
    auto b = calibrate_all(data.pair, fast_config());
    CHECK((a.net[0].y_hat - b.net[0].y_hat).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.net[1].y_hat - b.net[1].y_hat).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("calibration invariants: reconstruction identity and support containment") {
    PairConfig pcfg;
    pcfg.p_total = 10;
    pcfg.sub_p = 10;
    pcfg.n_opposite = 2;
    pcfg.n_unique_each = 2;
    pcfg.seed = 206;
    auto data = generate_dataset(pcfg, 40, 40);
    auto cfg = fast_config();
    auto calib = calibrate_all(data.pair, cfg);
    for (int k = 0; k < 2; ++k) {
        const Matrix& x = k == 0 ? data.pair.x1 : data.pair.x2;
        for (Index i = 0; i < 10; ++i) {
            const auto& node = calib.net[k].nodes[static_cast<std::size_t>(i)];
            // y_hat column = X * scattered pi_hat, built with the same
            // column-order accumulation the pipeline uses
            Vector full = Vector::Zero(x.rows());
            for (std::size_t j = 0; j < node.support.size(); ++j)
                full += x.col(node.support[j]) * node.pi_values[static_cast<Index>(j)];
            CHECK((full - calib.net[k].y_hat.col(i)).cwiseAbs().maxCoeff() == 0.0);
            // support is contained in the screen set (identical here)
            std::set<Index> screen(node.screen_by_score.begin(), node.screen_by_score.end());
            for (Index j : node.support) CHECK(screen.count(j) == 1);
        }
    }
}

TEST_CASE("calibrate_all matches a straight-line scripted reference on a tiny instance") {
    // p = 3, q = 3, n = 50, q <= n so screening keeps everything
    PairConfig pcfg;
    pcfg.p_total = 3;
    pcfg.sub_p = 3;
    pcfg.avg_degree = 0.7;
    pcfg.n_opposite = 1;
    pcfg.n_unique_each = 0;
    pcfg.seed = 207;
    auto data = generate_dataset(pcfg, 50, 50);
    auto cfg = fast_config();
    auto calib = calibrate_all(data.pair, cfg);

    for (int k = 0; k < 2; ++k) {
        const Matrix& x = k == 0 ? data.pair.x1 : data.pair.x2;
        const Matrix& y = k == 0 ? data.pair.y1 : data.pair.y2;
        const double n = static_cast<double>(x.rows());
        auto grid = default_ridge_grid(x.rows(), cfg.ridge_grid_size);
        for (Index i = 0; i < 3; ++i) {
            // scripted reference: dense GCV at every grid point, then the
            // closed-form ridge solve at the winner
            double best = std::numeric_limits<double>::infinity();
            double best_lambda = 0.0;
            for (double lambda : grid) {
                Matrix gram = x.transpose() * x;
                gram.diagonal().array() += lambda;
                Matrix a = x * gram.inverse() * x.transpose();
                Matrix i_minus_a = Matrix::Identity(x.rows(), x.rows()) - a;
                double rss = (i_minus_a * y.col(i)).squaredNorm();
                double score = (rss / n) / std::pow(i_minus_a.trace() / n, 2.0);
                if (score < best || (score == best && lambda < best_lambda)) {
                    best = score;
                    best_lambda = lambda;
                }
            }
            Matrix gram = x.transpose() * x;
            gram.diagonal().array() += best_lambda;
            Vector pi = gram.inverse() * (x.transpose() * y.col(i));
            Vector y_hat = x * pi;
            const auto& node = calib.net[k].nodes[static_cast<std::size_t>(i)];
            CHECK(node.ridge_lambda == Approx(best_lambda).epsilon(1e-12));
            CHECK((y_hat - calib.net[k].y_hat.col(i)).cwiseAbs().maxCoeff() <= 1e-10);
        }
    }
}

TEST_CASE("stacked problem blocks carry the sign pattern of the reparameterization") {
    PairConfig pcfg;
    pcfg.p_total = 5;
    pcfg.sub_p = 5;
    pcfg.n_opposite = 1;
    pcfg.n_unique_each = 1;
    pcfg.seed = 208;
    auto data = generate_dataset(pcfg, 30, 35);
    auto calib = calibrate_all(data.pair, fast_config());
    auto prob = build_stacked_problem(2, data.pair, calib);
    const Index n1 = 30, n2 = 35, m = 4;
    REQUIRE(prob.z_hat.rows() == n1 + n2);
    REQUIRE(prob.z_hat.cols() == 2 * m);
    Matrix top = prob.z_hat.topLeftCorner(n1, m);
    CHECK((prob.z_hat.topRightCorner(n1, m) - top).cwiseAbs().maxCoeff() == 0.0);
    Matrix bottom = prob.z_hat.bottomLeftCorner(n2, m);
    CHECK((prob.z_hat.bottomRightCorner(n2, m) + bottom).cwiseAbs().maxCoeff() == 0.0);
    CHECK(prob.response.head(n1) == data.pair.y1.col(2));
    CHECK(prob.response.tail(n2) == data.pair.y2.col(2));
}

TEST_CASE("projection removes the anchor blocks from the stage-2 design") {
    PairConfig pcfg;
    pcfg.p_total = 8;
    pcfg.sub_p = 8;
    pcfg.n_opposite = 2;
    pcfg.n_unique_each = 1;
    pcfg.seed = 209;
    auto data = generate_dataset(pcfg, 45, 40);
    for (Index i = 0; i < 8; ++i) {
        Matrix xa1(45, 1), xa2(40, 1);
        xa1.col(0) = data.pair.x1.col(i);
        xa2.col(0) = data.pair.x2.col(i);
        CHECK(apply_annihilator(xa1, xa1).cwiseAbs().maxCoeff() <= 1e-8);
        CHECK(apply_annihilator(xa2, xa2).cwiseAbs().maxCoeff() <= 1e-8);
    }
}

TEST_CASE("identical networks in both slots produce exactly zero differential effects") {
    PairConfig pcfg;
    pcfg.p_total = 10;
    pcfg.sub_p = 10;
    pcfg.n_opposite = 2;
    pcfg.n_unique_each = 2;
    pcfg.seed = 210;
    auto data = generate_dataset(pcfg, 60, 60);
    auto pair = duplicated_pair(data);
    auto result = rednet_run(pair, fast_config(3));
    CHECK(result.estimate.beta_minus.cwiseAbs().maxCoeff() == 0.0);
    for (const auto& e : result.report.edges) CHECK(e.label != EdgeLabel::differential);
}

TEST_CASE("strong signals at large n recover the true union support") {
    PairConfig pcfg;
    pcfg.p_total = 6;
    pcfg.sub_p = 6;
    pcfg.avg_degree = 1.0;
    pcfg.n_opposite = 1;
    pcfg.n_unique_each = 1;
    pcfg.effect_lo = 0.5;
    pcfg.effect_hi = 0.8;
    pcfg.noise_sd = 0.01;
    pcfg.seed = 211;
    auto data = generate_dataset(pcfg, 800, 800);
    auto result = rednet_run(data.pair, fast_config(4));
    for (Index i = 0; i < 6; ++i)
        for (Index j = 0; j < 6; ++j) {
            if (i == j) continue;
            const bool est = result.estimate.beta_plus(i, j) != 0.0 ||
                             result.estimate.beta_minus(i, j) != 0.0;
            const bool truth = data.truth.gamma1(i, j) != 0.0 || data.truth.gamma2(i, j) != 0.0;
            CHECK(est == truth);
            // a sign present in exactly one network must be flagged differential
            if ((data.truth.gamma1(i, j) != 0.0) != (data.truth.gamma2(i, j) != 0.0))
                CHECK(result.estimate.beta_minus(i, j) != 0.0);
        }
}

TEST_CASE("a grid pinned at the null threshold yields an empty node") {
    PairConfig pcfg;
    pcfg.p_total = 6;
    pcfg.sub_p = 6;
    pcfg.n_opposite = 1;
    pcfg.n_unique_each = 1;
    pcfg.seed = 212;
    auto data = generate_dataset(pcfg, 50, 50);
    auto cfg = fast_config(5);
    cfg.lasso_grid_ratio = 1.0;  // grid collapses to lambda_max everywhere
    auto result = rednet_run(data.pair, cfg);
    CHECK(result.estimate.beta_plus.cwiseAbs().maxCoeff() == 0.0);
    CHECK(result.estimate.beta_minus.cwiseAbs().maxCoeff() == 0.0);
    for (const auto& e : result.report.edges) CHECK(e.label == EdgeLabel::absent);
}

TEST_CASE("stage separation: injecting the calibration reproduces the run bit for bit") {
    PairConfig pcfg;
    pcfg.p_total = 8;
    pcfg.sub_p = 8;
    pcfg.n_opposite = 2;
    pcfg.n_unique_each = 1;
    pcfg.seed = 213;
    auto data = generate_dataset(pcfg, 60, 55);
    auto cfg = fast_config(6);
    auto end_to_end = rednet_run(data.pair, cfg);
    auto calib = calibrate_all(data.pair, cfg);
    auto injected = rednet_run(data.pair, cfg, &calib);
    CHECK((end_to_end.estimate.beta_plus - injected.estimate.beta_plus).cwiseAbs().maxCoeff() ==
          0.0);
    CHECK((end_to_end.estimate.beta_minus - injected.estimate.beta_minus).cwiseAbs().maxCoeff() ==
          0.0);
}

TEST_CASE("node independence: construct_node equals the full run's column") {
    PairConfig pcfg;
    pcfg.p_total = 7;
    pcfg.sub_p = 7;
    pcfg.n_opposite = 1;
    pcfg.n_unique_each = 1;
    pcfg.seed = 214;
    auto data = generate_dataset(pcfg, 50, 50);
    auto cfg = fast_config(7);
    auto calib = calibrate_all(data.pair, cfg);
    auto run = rednet_run(data.pair, cfg, &calib);
    for (Index i : {Index{0}, Index{3}, Index{6}}) {
        auto est = construct_node(i, data.pair, calib, cfg);
        CHECK((est.beta_plus - run.estimate.beta_plus.col(i)).cwiseAbs().maxCoeff() == 0.0);
        CHECK((est.beta_minus - run.estimate.beta_minus.col(i)).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("reparameterization consistency of the emitted estimates") {
    PairConfig pcfg;
    pcfg.p_total = 8;
    pcfg.sub_p = 8;
    pcfg.n_opposite = 2;
    pcfg.n_unique_each = 1;
    pcfg.seed = 215;
    auto data = generate_dataset(pcfg, 55, 50);
    auto result = rednet_run(data.pair, fast_config(8));
    Matrix lhs = result.estimate.gamma1 - result.estimate.gamma2;
    Matrix rhs = 2.0 * result.estimate.beta_minus;
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("swapping the networks negates the differential half bit for bit") {
    PairConfig pcfg;
    pcfg.p_total = 9;
    pcfg.sub_p = 9;
    pcfg.n_opposite = 2;
    pcfg.n_unique_each = 2;
    pcfg.seed = 216;
    auto data = generate_dataset(pcfg, 48, 60);  // unequal sample sizes on purpose
    auto cfg = fast_config(9);
    auto base = rednet_run(data.pair, cfg);
    auto swapped = rednet_run(swap_networks(data.pair), cfg);
    CHECK((swapped.estimate.beta_plus - base.estimate.beta_plus).cwiseAbs().maxCoeff() == 0.0);
    CHECK((swapped.estimate.beta_minus + base.estimate.beta_minus).cwiseAbs().maxCoeff() == 0.0);
    CHECK((swapped.estimate.gamma1 - base.estimate.gamma2).cwiseAbs().maxCoeff() == 0.0);
    CHECK((swapped.estimate.gamma2 - base.estimate.gamma1).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("worker count never changes the result") {
    PairConfig pcfg;
    pcfg.p_total = 8;
    pcfg.sub_p = 8;
    pcfg.n_opposite = 1;
    pcfg.n_unique_each = 1;
    pcfg.seed = 217;
    auto data = generate_dataset(pcfg, 45, 45);
    auto cfg1 = fast_config(10);
    cfg1.threads = 1;
    auto cfg4 = fast_config(10);
    cfg4.threads = 4;
    auto serial = rednet_run(data.pair, cfg1);
    auto threaded = rednet_run(data.pair, cfg4);
    CHECK((serial.estimate.beta_plus - threaded.estimate.beta_plus).cwiseAbs().maxCoeff() == 0.0);
    CHECK((serial.estimate.beta_minus - threaded.estimate.beta_minus).cwiseAbs().maxCoeff() ==
          0.0);
}

TEST_CASE("anchor validation gates the run") {
    PairConfig pcfg;
    pcfg.p_total = 6;
    pcfg.sub_p = 6;
    pcfg.n_opposite = 1;
    pcfg.n_unique_each = 1;
    pcfg.seed = 218;
    auto data = generate_dataset(pcfg, 40, 40);
    auto pair = data.pair;
    pair.anchors1[2].clear();  // violate the nonempty requirement
    auto cfg = fast_config(11);
    CHECK_THROWS_AS(rednet_run(pair, cfg), ValidationError);

    cfg.anchors_warn_only = true;
    cfg.strict = false;
    std::vector<std::string> warnings;
    CHECK_NOTHROW(rednet_run(pair, cfg, nullptr, &warnings));
    CHECK_FALSE(warnings.empty());
}

TEST_CASE("naive baseline: identical data in both slots yields no differential edges") {
    PairConfig pcfg;
    pcfg.p_total = 8;
    pcfg.sub_p = 8;
    pcfg.n_opposite = 2;
    pcfg.n_unique_each = 1;
    pcfg.seed = 219;
    auto data = generate_dataset(pcfg, 60, 60);
    auto pair = duplicated_pair(data);
    auto result = naive_run(pair, fast_config(12));
    CHECK((result.gamma1 - result.gamma2).cwiseAbs().maxCoeff() == 0.0);
    for (const auto& e : result.report.edges) CHECK(e.label != EdgeLabel::differential);
}

TEST_CASE("naive baseline: single-network recovery has high power on strong signals") {
    int tp = 0, fn = 0;
    for (std::uint64_t seed : {301u, 302u, 303u, 304u, 305u}) {
        PairConfig pcfg;
        pcfg.p_total = 20;
        pcfg.sub_p = 20;
        pcfg.avg_degree = 1.0;
        pcfg.n_opposite = 2;
        pcfg.n_unique_each = 2;
        pcfg.seed = seed;
        auto data = generate_dataset(pcfg, 400, 400);
        auto result = naive_run(data.pair, fast_config(seed));
        for (Index i = 0; i < 20; ++i)
            for (Index j = 0; j < 20; ++j) {
                if (i == j) continue;
                if (data.truth.gamma1(i, j) != 0.0) {
                    if (result.gamma1(i, j) != 0.0)
                        ++tp;
                    else
                        ++fn;
                }
            }
    }
    const double power = static_cast<double>(tp) / static_cast<double>(tp + fn);
    CHECK(power >= 0.9);
}

TEST_CASE("two-node network with one strong edge: exact recovery across seeds") {
    int exact = 0;
    const int reps = 100;
    for (int rep = 0; rep < reps; ++rep) {
        PairConfig pcfg;
        pcfg.p_total = 2;
        pcfg.sub_p = 2;
        pcfg.avg_degree = 0.5;  // exactly one shared edge
        pcfg.n_opposite = 0;
        pcfg.n_unique_each = 0;
        pcfg.effect_lo = 0.5;
        pcfg.effect_hi = 0.8;
        pcfg.noise_sd = 0.01;
        pcfg.seed = 400 + static_cast<std::uint64_t>(rep);
        auto data = generate_dataset(pcfg, 1000, 1000);
        auto cfg = fast_config(pcfg.seed);
        auto result = rednet_run(data.pair, cfg);
        bool ok = true;
        for (Index i = 0; i < 2; ++i)
            for (Index j = 0; j < 2; ++j) {
                if (i == j) continue;
                if ((result.estimate.gamma1(i, j) != 0.0) != (data.truth.gamma1(i, j) != 0.0))
                    ok = false;
                if ((result.estimate.gamma2(i, j) != 0.0) != (data.truth.gamma2(i, j) != 0.0))
                    ok = false;
            }
        if (ok) ++exact;
    }
    CHECK(exact >= 95);
}
