#pragma once

#include <Eigen/Dense>

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace rednet {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Bad inputs: dimension mismatches, anchor violations, schema errors. Exit code 2.
struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Numerical failures: singular systems, rank-deficient anchors, instability. Exit code 3.
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Filesystem / parsing failures. Exit code 4.
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

using IndexSet = std::vector<Index>;

/// The two observed datasets plus per-node anchor index sets; the sole input
/// of the analysis. Exogenous matrices are stored column-standardized to
/// l2 norm sqrt(n); `x*_scales` restore the original columns.
struct ObservationPair {
    Matrix y1, x1;  // network 1: n1 x p, n1 x q
    Matrix y2, x2;  // network 2: n2 x p, n2 x q
    Vector x1_scales, x2_scales;
    std::vector<IndexSet> anchors1, anchors2;  // one index set per node
    std::vector<std::string> node_names;
    std::vector<std::string> exo_names;

    Index p() const { return y1.cols(); }
    Index q() const { return x1.cols(); }
    Index n1() const { return y1.rows(); }
    Index n2() const { return y2.rows(); }
};

/// Dimension/shape invariants. Throws ValidationError on violation.
inline void check_dimensions(const ObservationPair& pair) {
    if (pair.y1.cols() != pair.y2.cols())
        throw ValidationError("observation pair: y1 and y2 must share the node count, got " +
                              std::to_string(pair.y1.cols()) + " vs " +
                              std::to_string(pair.y2.cols()));
    if (pair.x1.cols() != pair.x2.cols())
        throw ValidationError("observation pair: x1 and x2 must share the exogenous count, got " +
                              std::to_string(pair.x1.cols()) + " vs " +
                              std::to_string(pair.x2.cols()));
    if (pair.y1.rows() != pair.x1.rows() || pair.y2.rows() != pair.x2.rows())
        throw ValidationError("observation pair: y and x row counts differ within a network");
    if (pair.anchors1.size() != static_cast<std::size_t>(pair.p()) ||
        pair.anchors2.size() != static_cast<std::size_t>(pair.p()))
        throw ValidationError("observation pair: need one anchor set per node");
    for (int k = 0; k < 2; ++k) {
        const auto& anchors = k == 0 ? pair.anchors1 : pair.anchors2;
        for (std::size_t i = 0; i < anchors.size(); ++i)
            for (Index a : anchors[i])
                if (a < 0 || a >= pair.q())
                    throw ValidationError("anchor index " + std::to_string(a) + " of node " +
                                          std::to_string(i) + " is outside [0, q) in network " +
                                          std::to_string(k + 1));
    }
}

/// Ground truth for one network: inter-node effects (column i holds the
/// incoming effects of node i), anchoring effects, and noise scales.
struct SemModel {
    Matrix gamma;  // p x p, zero diagonal
    Matrix phi;    // q x p, column i supported on the anchor set of node i
    Vector sigma;  // p noise standard deviations
};

enum class EdgeLabel { differential, common, absent };

inline const char* to_string(EdgeLabel label) {
    switch (label) {
        case EdgeLabel::differential: return "differential";
        case EdgeLabel::common: return "common";
        case EdgeLabel::absent: return "absent";
    }
    return "absent";
}

inline std::optional<EdgeLabel> edge_label_from_string(const std::string& s) {
    if (s == "differential") return EdgeLabel::differential;
    if (s == "common") return EdgeLabel::common;
    if (s == "absent") return EdgeLabel::absent;
    return std::nullopt;
}

struct Edge {
    Index source = 0;  // regulator j
    Index target = 0;  // regulated node i
    EdgeLabel label = EdgeLabel::absent;
    double beta_plus = 0.0;
    double beta_minus = 0.0;
    double gamma1 = 0.0;
    double gamma2 = 0.0;
    std::optional<double> boot_freq;
};

/// Every ordered off-diagonal pair, labeled.
struct EdgeReport {
    std::vector<std::string> node_names;
    std::vector<Edge> edges;
};

/// Per-node tuning metadata recorded by the pipeline.
struct NodeTuning {
    Index node = 0;
    double lambda = 0.0;       // selected l1 tuning parameter
    double lambda_max = 0.0;   // null threshold of the node problem
    double ridge_init_lambda = 0.0;
    double kkt = 0.0;
    int iterations = 0;
    bool converged = true;
    bool failed = false;       // permissive mode only
    std::string message;
    Vector weights;            // adaptive weights actually used
};

/// Output of the two-stage analysis: average effects, differential effects,
/// recovered per-network effects, and optional anchoring-effect estimates.
struct DifferentialEstimate {
    Matrix beta_plus;   // p x p, zero diagonal; column i = average effects on node i
    Matrix beta_minus;  // p x p, zero diagonal
    Matrix gamma1, gamma2;  // recovered: beta_plus +/- beta_minus
    Matrix phi1, phi2;      // q x p, nonzero only on anchor sets (optional post-step)
    std::vector<NodeTuning> tuning;
};

}  // namespace rednet
