#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "rednet/linalg.hpp"
#include "rednet/rng.hpp"
#include "rednet/types.hpp"

namespace rednet {

/// Paired-network generation protocol: a differential subnetwork embedded in
/// a larger system, genotype-like exogenous variables, one anchor per node.
struct PairConfig {
    Index p_total = 1000;
    Index sub_p = 50;          // size of the differential subnetwork (nodes 0..sub_p-1)
    double avg_degree = 1.0;   // expected regulatory in-degree (1 sparse, 3 dense)
    bool acyclic = true;
    Index n_opposite = 5;      // shared support, opposite sign
    Index n_unique_each = 5;   // edges present in exactly one network
    double effect_lo = 0.3;
    double effect_hi = 0.8;
    double noise_sd = 0.1;
    std::array<double, 3> genotype_probs{0.25, 0.5, 0.25};
    bool shared_x = false;  // X^(1) = X^(2)
    std::uint64_t seed = 0;

    void validate() const {
        if (!(effect_lo > 0.0) || !(effect_hi > effect_lo))
            throw ValidationError("pair config: need 0 < effect_lo < effect_hi");
        if (sub_p > p_total || sub_p < 2)
            throw ValidationError("pair config: need 2 <= sub_p <= p_total");
        double psum = genotype_probs[0] + genotype_probs[1] + genotype_probs[2];
        if (std::abs(psum - 1.0) > 1e-12)
            throw ValidationError("pair config: genotype probabilities must sum to 1");
    }
};

enum class TruthEdgeLabel { common, diff_opposite, diff_unique1, diff_unique2, absent };

inline const char* to_string(TruthEdgeLabel label) {
    switch (label) {
        case TruthEdgeLabel::common: return "common";
        case TruthEdgeLabel::diff_opposite: return "differential-opposite";
        case TruthEdgeLabel::diff_unique1: return "differential-unique-1";
        case TruthEdgeLabel::diff_unique2: return "differential-unique-2";
        case TruthEdgeLabel::absent: return "absent";
    }
    return "absent";
}

struct TruthLabels {
    Index p = 0;
    std::vector<Index> subnetwork;  // node indices under differential scrutiny
    // non-absent ordered edges (source, target, label), subnetwork and outside
    std::vector<std::tuple<Index, Index, TruthEdgeLabel>> labeled;
    Matrix gamma1, gamma2;  // full p x p ground truth

    Index count(TruthEdgeLabel want) const {
        Index c = 0;
        for (const auto& [s, t, label] : labeled)
            if (label == want) ++c;
        return c;
    }
    Index count_differential() const {
        return count(TruthEdgeLabel::diff_opposite) + count(TruthEdgeLabel::diff_unique1) +
               count(TruthEdgeLabel::diff_unique2);
    }
};

/// Edge supports of the pair, split by role. Network 1 support =
/// shared + opposite + unique1; network 2 support = shared + opposite + unique2.
struct TopologyPair {
    Index p = 0;
    Index sub_p = 0;
    std::vector<std::pair<Index, Index>> shared;    // identical effect in both networks
    std::vector<std::pair<Index, Index>> opposite;  // effect v in net 1, -v in net 2
    std::vector<std::pair<Index, Index>> unique1;
    std::vector<std::pair<Index, Index>> unique2;
};

/// Smallest singular value of (I - gamma); the generator keeps only models
/// with value >= 0.1.
inline double check_stability(const Matrix& gamma) {
    Matrix m = Matrix::Identity(gamma.rows(), gamma.cols()) - gamma;
    Eigen::BDCSVD<Matrix> svd(m);
    return svd.singularValues().minCoeff();
}

namespace detail {

// Does the directed edge set contain a cycle? (Kahn's algorithm)
inline bool has_cycle(Index p, const std::vector<std::pair<Index, Index>>& edges) {
    std::vector<std::vector<Index>> out(static_cast<std::size_t>(p));
    std::vector<Index> indeg(static_cast<std::size_t>(p), 0);
    for (auto [s, t] : edges) {
        out[static_cast<std::size_t>(s)].push_back(t);
        ++indeg[static_cast<std::size_t>(t)];
    }
    std::vector<Index> queue;
    for (Index v = 0; v < p; ++v)
        if (indeg[static_cast<std::size_t>(v)] == 0) queue.push_back(v);
    Index removed = 0;
    while (!queue.empty()) {
        Index v = queue.back();
        queue.pop_back();
        ++removed;
        for (Index w : out[static_cast<std::size_t>(v)])
            if (--indeg[static_cast<std::size_t>(w)] == 0) queue.push_back(w);
    }
    return removed < p;
}

// Sample `count` distinct ordered pairs among `nodes`, oriented from the
// sigma-earlier to the sigma-later node, avoiding `used`.
inline std::vector<std::pair<Index, Index>> sample_forward_pairs(
    const std::vector<Index>& nodes, const std::vector<Index>& pos, Index count,
    std::set<std::pair<Index, Index>>& used, Rng& rng) {
    std::vector<std::pair<Index, Index>> out;
    const auto m = static_cast<std::uint64_t>(nodes.size());
    while (static_cast<Index>(out.size()) < count) {
        Index a = nodes[static_cast<std::size_t>(rng.below(m))];
        Index b = nodes[static_cast<std::size_t>(rng.below(m))];
        if (a == b) continue;
        if (pos[static_cast<std::size_t>(a)] > pos[static_cast<std::size_t>(b)]) std::swap(a, b);
        if (!used.emplace(a, b).second) continue;
        out.emplace_back(a, b);
    }
    return out;
}

}  // namespace detail

/// Draw the paired edge supports. Acyclic mode orders all edges by a random
/// permutation; cyclic mode additionally closes at least one directed cycle
/// inside the subnetwork by reversing an existing shared edge. The two
/// supports agree everywhere except the unique-edge sets.
inline TopologyPair gen_topology(const PairConfig& cfg, Rng& rng) {
    cfg.validate();
    const Index p = cfg.p_total;
    const Index sub_p = cfg.sub_p;

    const Index shared_sub = static_cast<Index>(std::llround(cfg.avg_degree * sub_p));
    const Index capacity = sub_p * (sub_p - 1) / 2;
    if (shared_sub < cfg.n_opposite || shared_sub + 2 * cfg.n_unique_each > capacity)
        throw ValidationError(
            "gen_topology: avg_degree " + std::to_string(cfg.avg_degree) + " with sub_p " +
            std::to_string(sub_p) + " cannot host " +
            std::to_string(cfg.n_opposite + 2 * cfg.n_unique_each) + " differential edges");

    // random topological order over all nodes
    std::vector<Index> order(static_cast<std::size_t>(p));
    std::iota(order.begin(), order.end(), Index{0});
    rng.shuffle(order);
    std::vector<Index> pos(static_cast<std::size_t>(p));
    for (Index r = 0; r < p; ++r) pos[static_cast<std::size_t>(order[static_cast<std::size_t>(r)])] = r;

    std::vector<Index> sub_nodes(static_cast<std::size_t>(sub_p));
    std::iota(sub_nodes.begin(), sub_nodes.end(), Index{0});

    TopologyPair topo;
    topo.p = p;
    topo.sub_p = sub_p;
    std::set<std::pair<Index, Index>> used;
    topo.shared = detail::sample_forward_pairs(sub_nodes, pos, shared_sub, used, rng);

    // carve the opposite-sign edges out of the shared subnetwork support
    for (Index k = 0; k < cfg.n_opposite; ++k) {
        auto idx = static_cast<std::size_t>(rng.below(static_cast<std::uint64_t>(topo.shared.size())));
        topo.opposite.push_back(topo.shared[idx]);
        topo.shared.erase(topo.shared.begin() + static_cast<std::ptrdiff_t>(idx));
    }
    topo.unique1 = detail::sample_forward_pairs(sub_nodes, pos, cfg.n_unique_each, used, rng);
    topo.unique2 = detail::sample_forward_pairs(sub_nodes, pos, cfg.n_unique_each, used, rng);

    // nodes outside the subnetwork carry shared structure only
    if (p > sub_p) {
        std::vector<Index> out_nodes(static_cast<std::size_t>(p - sub_p));
        std::iota(out_nodes.begin(), out_nodes.end(), sub_p);
        const Index shared_out = static_cast<Index>(std::llround(cfg.avg_degree * (p - sub_p)));
        const Index cap_out = (p - sub_p) * (p - sub_p - 1) / 2;
        auto outside = detail::sample_forward_pairs(out_nodes, pos, std::min(shared_out, cap_out),
                                                    used, rng);
        topo.shared.insert(topo.shared.end(), outside.begin(), outside.end());
    }

    if (!cfg.acyclic) {
        // reverse shared subnetwork edges until the joint support is cyclic
        std::vector<std::pair<Index, Index>> sub_support;
        for (const auto* group : {&topo.shared, &topo.opposite, &topo.unique1, &topo.unique2})
            for (auto [s, t] : *group)
                if (s < sub_p && t < sub_p) sub_support.emplace_back(s, t);
        std::vector<std::pair<Index, Index>> candidates = sub_support;
        while (!detail::has_cycle(sub_p, sub_support)) {
            if (candidates.empty())
                throw ValidationError("gen_topology: no shared edge available to close a cycle");
            auto idx = static_cast<std::size_t>(
                rng.below(static_cast<std::uint64_t>(candidates.size())));
            auto [s, t] = candidates[idx];
            candidates.erase(candidates.begin() + static_cast<std::ptrdiff_t>(idx));
            if (!used.emplace(t, s).second) continue;
            topo.shared.emplace_back(t, s);
            sub_support.emplace_back(t, s);
        }
    }
    return topo;
}

/// Effect magnitudes: uniform on [effect_lo, effect_hi] with a random sign.
/// Shared edges take identical values in both networks; opposite-sign edges
/// take v and -v; unique edges appear in exactly one network.
inline std::tuple<Matrix, Matrix, TruthLabels> sample_effects(const TopologyPair& topo,
                                                              const PairConfig& cfg, Rng& rng) {
    auto draw = [&]() {
        double mag = rng.uniform(cfg.effect_lo, cfg.effect_hi);
        return rng.uniform01() < 0.5 ? mag : -mag;
    };
    TruthLabels truth;
    truth.p = topo.p;
    truth.subnetwork.resize(static_cast<std::size_t>(topo.sub_p));
    std::iota(truth.subnetwork.begin(), truth.subnetwork.end(), Index{0});
    truth.gamma1 = Matrix::Zero(topo.p, topo.p);
    truth.gamma2 = Matrix::Zero(topo.p, topo.p);

    for (auto [s, t] : topo.shared) {
        double v = draw();
        truth.gamma1(s, t) = v;
        truth.gamma2(s, t) = v;
        truth.labeled.emplace_back(s, t, TruthEdgeLabel::common);
    }
    for (auto [s, t] : topo.opposite) {
        double v = draw();
        truth.gamma1(s, t) = v;
        truth.gamma2(s, t) = -v;
        truth.labeled.emplace_back(s, t, TruthEdgeLabel::diff_opposite);
    }
    for (auto [s, t] : topo.unique1) {
        truth.gamma1(s, t) = draw();
        truth.labeled.emplace_back(s, t, TruthEdgeLabel::diff_unique1);
    }
    for (auto [s, t] : topo.unique2) {
        truth.gamma2(s, t) = draw();
        truth.labeled.emplace_back(s, t, TruthEdgeLabel::diff_unique2);
    }
    return {truth.gamma1, truth.gamma2, truth};
}

struct AnchorsPhi {
    std::vector<IndexSet> anchors;  // anchor set of node i = {i}
    Matrix phi1, phi2;              // q x p, diagonal support
};

/// One exogenous anchor per node (q = p_total), disjoint by construction;
/// anchoring strengths follow the same magnitude law as the inter-node
/// effects, drawn independently per network.
inline AnchorsPhi gen_anchors_and_phi(const PairConfig& cfg, Rng& rng) {
    const Index p = cfg.p_total;
    AnchorsPhi out;
    out.anchors.resize(static_cast<std::size_t>(p));
    out.phi1 = Matrix::Zero(p, p);
    out.phi2 = Matrix::Zero(p, p);
    auto draw = [&]() {
        double mag = rng.uniform(cfg.effect_lo, cfg.effect_hi);
        return rng.uniform01() < 0.5 ? mag : -mag;
    };
    for (Index i = 0; i < p; ++i) {
        out.anchors[static_cast<std::size_t>(i)] = {i};
        out.phi1(i, i) = draw();
        out.phi2(i, i) = draw();
    }
    return out;
}

struct SampledData {
    Matrix y;
    Matrix x_std;  // columns scaled to l2 norm sqrt(n)
    Matrix x_raw;  // genotype values, retained for shared-X reuse
    Vector x_scales;
};

/// Draw one dataset through the reduced form Y = (X phi + E)(I - gamma)^{-1}.
/// Genotypes are i.i.d. {0,1,2}; pass shared_x_raw to reuse a partner's
/// genotype matrix. The endogenous solve goes through an LU factorization of
/// (I - gamma)^T, never an explicit inverse.
inline SampledData sample_data(const SemModel& model, Index n, const Matrix* shared_x_raw,
                               Rng& rng,
                               const std::array<double, 3>& genotype_probs = {0.25, 0.5, 0.25}) {
    const Index p = model.gamma.rows();
    const Index q = model.phi.rows();
    if (check_stability(model.gamma) < 1e-8)
        throw NumericalError("sample_data: I - gamma is numerically singular");

    SampledData out;
    if (shared_x_raw != nullptr) {
        if (shared_x_raw->rows() != n)
            throw ValidationError("sample_data: shared X has the wrong row count");
        out.x_raw = *shared_x_raw;
    } else {
        out.x_raw.resize(n, q);
        for (Index j = 0; j < q; ++j)
            for (Index r = 0; r < n; ++r)
                out.x_raw(r, j) = static_cast<double>(
                    rng.trinary(genotype_probs[0], genotype_probs[1]));
    }
    auto std_x = standardize_columns(out.x_raw);
    out.x_std = std::move(std_x.x);
    out.x_scales = std::move(std_x.scales);

    Matrix rhs = out.x_std * model.phi;  // n x p
    for (Index i = 0; i < p; ++i) {
        const double sd = model.sigma[i];
        for (Index r = 0; r < n; ++r) rhs(r, i) += rng.normal(sd);
    }
    Matrix i_minus_gamma_t = (Matrix::Identity(p, p) - model.gamma).transpose();
    Eigen::PartialPivLU<Matrix> lu(i_minus_gamma_t);
    out.y = lu.solve(rhs.transpose()).transpose();
    return out;
}

struct SyntheticDataset {
    ObservationPair pair;
    TruthLabels truth;
    SemModel model1, model2;
    Matrix x1_raw, x2_raw;
};

/// Full protocol: topology, anchors, effects (resampled until both networks
/// clear the stability floor), then data for both networks. Deterministic in
/// cfg.seed.
inline SyntheticDataset generate_dataset(const PairConfig& cfg, Index n1, Index n2) {
    cfg.validate();
    if (cfg.shared_x && n1 != n2)
        throw ValidationError("generate_dataset: shared_x requires n1 == n2");
    Rng rng(cfg.seed);
    TopologyPair topo = gen_topology(cfg, rng);
    AnchorsPhi anchors = gen_anchors_and_phi(cfg, rng);

    constexpr double kStabilityFloor = 0.1;
    SyntheticDataset data;
    bool stable = false;
    for (int attempt = 0; attempt < 500 && !stable; ++attempt) {
        auto [g1, g2, truth] = sample_effects(topo, cfg, rng);
        if (check_stability(g1) >= kStabilityFloor && check_stability(g2) >= kStabilityFloor) {
            data.truth = std::move(truth);
            stable = true;
        }
    }
    if (!stable)
        throw NumericalError("generate_dataset: could not reach the stability floor in 500 draws");

    const Index p = cfg.p_total;
    data.model1 = {data.truth.gamma1, anchors.phi1, Vector::Constant(p, cfg.noise_sd)};
    data.model2 = {data.truth.gamma2, anchors.phi2, Vector::Constant(p, cfg.noise_sd)};

    SampledData d1 = sample_data(data.model1, n1, nullptr, rng, cfg.genotype_probs);
    SampledData d2 = sample_data(data.model2, n2, cfg.shared_x ? &d1.x_raw : nullptr, rng,
                                 cfg.genotype_probs);

    data.pair.y1 = std::move(d1.y);
    data.pair.x1 = std::move(d1.x_std);
    data.pair.x1_scales = std::move(d1.x_scales);
    data.pair.y2 = std::move(d2.y);
    data.pair.x2 = std::move(d2.x_std);
    data.pair.x2_scales = std::move(d2.x_scales);
    data.pair.anchors1 = anchors.anchors;
    data.pair.anchors2 = anchors.anchors;
    data.x1_raw = std::move(d1.x_raw);
    data.x2_raw = std::move(d2.x_raw);
    for (Index i = 0; i < p; ++i) data.pair.node_names.push_back("Y" + std::to_string(i + 1));
    for (Index j = 0; j < p; ++j) data.pair.exo_names.push_back("X" + std::to_string(j + 1));
    check_dimensions(data.pair);
    return data;
}

}  // namespace rednet
