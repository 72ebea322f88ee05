#pragma once

#include <algorithm>
#include <map>
#include <string>
#include <vector>

#include "rednet/types.hpp"

namespace rednet {

/// beta_minus = (gamma1 - gamma2)/2 (differential effects),
/// beta_plus  = (gamma1 + gamma2)/2 (average effects).
inline std::pair<Vector, Vector> reparameterize(const Vector& gamma1, const Vector& gamma2) {
    if (gamma1.size() != gamma2.size())
        throw ValidationError("reparameterize: length mismatch, " + std::to_string(gamma1.size()) +
                              " vs " + std::to_string(gamma2.size()));
    Vector beta_plus = (gamma1 + gamma2) / 2.0;
    Vector beta_minus = (gamma1 - gamma2) / 2.0;
    return {beta_plus, beta_minus};
}

/// Exact inverse: gamma1 = beta_plus + beta_minus, gamma2 = beta_plus - beta_minus.
inline std::pair<Vector, Vector> recover_gammas(const Vector& beta_plus,
                                                const Vector& beta_minus) {
    if (beta_plus.size() != beta_minus.size())
        throw ValidationError("recover_gammas: length mismatch, " +
                              std::to_string(beta_plus.size()) + " vs " +
                              std::to_string(beta_minus.size()));
    Vector gamma1 = beta_plus + beta_minus;
    Vector gamma2 = beta_plus - beta_minus;
    return {gamma1, gamma2};
}

/// Label every off-diagonal ordered pair. The l1 solver produces hard zeros,
/// so tol = 0 (any nonzero coefficient counts) is the default; a positive tol
/// exists for post-hoc filtering.
inline EdgeReport classify_edges(const DifferentialEstimate& est, double tol = 0.0,
                                 std::vector<std::string> node_names = {}) {
    if (tol < 0.0) throw ValidationError("classify_edges: tol must be >= 0");
    const Index p = est.beta_plus.rows();
    EdgeReport report;
    if (node_names.empty())
        for (Index i = 0; i < p; ++i) node_names.push_back("Y" + std::to_string(i + 1));
    report.node_names = std::move(node_names);
    report.edges.reserve(static_cast<std::size_t>(p) * static_cast<std::size_t>(p - 1));
    for (Index target = 0; target < p; ++target) {
        for (Index source = 0; source < p; ++source) {
            if (source == target) continue;
            Edge e;
            e.source = source;
            e.target = target;
            e.beta_plus = est.beta_plus(source, target);
            e.beta_minus = est.beta_minus(source, target);
            e.gamma1 = est.gamma1(source, target);
            e.gamma2 = est.gamma2(source, target);
            if (std::abs(e.beta_minus) > tol)
                e.label = EdgeLabel::differential;
            else if (std::abs(e.beta_plus) > tol)
                e.label = EdgeLabel::common;
            else
                e.label = EdgeLabel::absent;
            report.edges.push_back(e);
        }
    }
    return report;
}

struct AnchorViolation {
    int network = 0;  // 1 or 2
    enum class Kind { empty_set, overlap } kind = Kind::empty_set;
    Index node_a = 0;
    Index node_b = 0;      // overlap only
    Index shared_exo = 0;  // overlap only
    std::string describe() const {
        if (kind == Kind::empty_set)
            return "network " + std::to_string(network) + ": node " + std::to_string(node_a) +
                   " has an empty anchor set";
        return "network " + std::to_string(network) + ": nodes " + std::to_string(node_a) +
               " and " + std::to_string(node_b) + " share anchor index " +
               std::to_string(shared_exo);
    }
};

struct AnchorCheck {
    std::vector<AnchorViolation> violations;
    bool ok() const { return violations.empty(); }
};

/// Identifiability check: within each network every node needs a nonempty
/// anchor set and the sets must be pairwise disjoint. Nonemptiness is
/// required for every node, not only regulators, since regulator status is
/// unknown before the analysis.
inline AnchorCheck validate_anchors(const ObservationPair& pair) {
    AnchorCheck check;
    for (int k = 0; k < 2; ++k) {
        const auto& anchors = k == 0 ? pair.anchors1 : pair.anchors2;
        std::map<Index, Index> owner;  // exo index -> first claiming node
        for (Index i = 0; i < static_cast<Index>(anchors.size()); ++i) {
            const auto& set = anchors[static_cast<std::size_t>(i)];
            if (set.empty()) {
                AnchorViolation v;
                v.network = k + 1;
                v.kind = AnchorViolation::Kind::empty_set;
                v.node_a = i;
                check.violations.push_back(v);
                continue;
            }
            for (Index a : set) {
                auto [it, inserted] = owner.emplace(a, i);
                if (!inserted && it->second != i) {
                    AnchorViolation v;
                    v.network = k + 1;
                    v.kind = AnchorViolation::Kind::overlap;
                    v.node_a = it->second;
                    v.node_b = i;
                    v.shared_exo = a;
                    check.violations.push_back(v);
                }
            }
        }
    }
    return check;
}

}  // namespace rednet
