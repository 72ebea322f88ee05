#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include "rednet/parallel.hpp"
#include "rednet/pipeline.hpp"
#include "rednet/rng.hpp"
#include "rednet/synthgen.hpp"
#include "rednet/types.hpp"

namespace rednet {

enum class Category { differential, common, average };

inline const char* to_string(Category c) {
    switch (c) {
        case Category::differential: return "differential";
        case Category::common: return "common";
        case Category::average: return "average";
    }
    return "differential";
}

struct ConfusionCounts {
    long tp = 0, tn = 0, fp = 0, fn = 0;
    Category category = Category::differential;
    long total() const { return tp + tn + fp + fn; }
};

namespace detail {

/// Positivity of an edge under a category, given its labels/values.
inline bool est_positive(const Edge& e, Category c) {
    switch (c) {
        case Category::differential: return e.label == EdgeLabel::differential;
        case Category::common: return e.label == EdgeLabel::common;
        case Category::average: return e.beta_plus != 0.0;
    }
    return false;
}

inline bool truth_positive(const TruthLabels& truth, Index s, Index t, Category c) {
    const double g1 = truth.gamma1(s, t), g2 = truth.gamma2(s, t);
    const double bplus = (g1 + g2) / 2.0, bminus = (g1 - g2) / 2.0;
    switch (c) {
        case Category::differential: return bminus != 0.0;
        case Category::common: return bplus != 0.0 && bminus == 0.0;
        case Category::average: return bplus != 0.0;
    }
    return false;
}

}  // namespace detail

/// Confusion counts over the scored ordered pairs (the truth's subnetwork by
/// default, every pair when restrict_to_subnetwork is off). Nonzero effects
/// are positives.
inline ConfusionCounts confusion(const EdgeReport& estimated, const TruthLabels& truth,
                                 Category category, bool restrict_to_subnetwork = true) {
    if (static_cast<Index>(estimated.node_names.size()) != truth.p)
        throw ValidationError("confusion: estimate covers " +
                              std::to_string(estimated.node_names.size()) + " nodes, truth " +
                              std::to_string(truth.p));
    std::vector<char> scored(static_cast<std::size_t>(truth.p), 1);
    if (restrict_to_subnetwork && !truth.subnetwork.empty()) {
        scored.assign(static_cast<std::size_t>(truth.p), 0);
        for (Index v : truth.subnetwork) scored[static_cast<std::size_t>(v)] = 1;
    }
    ConfusionCounts counts;
    counts.category = category;
    for (const Edge& e : estimated.edges) {
        if (!scored[static_cast<std::size_t>(e.source)] ||
            !scored[static_cast<std::size_t>(e.target)])
            continue;
        const bool est = detail::est_positive(e, category);
        const bool real = detail::truth_positive(truth, e.source, e.target, category);
        if (est && real)
            ++counts.tp;
        else if (est && !real)
            ++counts.fp;
        else if (!est && real)
            ++counts.fn;
        else
            ++counts.tn;
    }
    return counts;
}

/// Matthews correlation coefficient; any zero factor in the denominator makes
/// the value undefined (reported as a missing value, never as 0).
inline std::optional<double> mcc(const ConfusionCounts& c) {
    const double tp = static_cast<double>(c.tp), tn = static_cast<double>(c.tn);
    const double fp = static_cast<double>(c.fp), fn = static_cast<double>(c.fn);
    const double f1 = tp + fp, f2 = tp + fn, f3 = tn + fp, f4 = tn + fn;
    if (f1 == 0.0 || f2 == 0.0 || f3 == 0.0 || f4 == 0.0) return std::nullopt;
    return (tp * tn - fp * fn) / std::sqrt(f1 * f2 * f3 * f4);
}

inline std::optional<double> fdr(const ConfusionCounts& c) {
    if (c.tp + c.fp == 0) return std::nullopt;
    return static_cast<double>(c.fp) / static_cast<double>(c.tp + c.fp);
}

inline std::optional<double> power(const ConfusionCounts& c) {
    if (c.tp + c.fn == 0) return std::nullopt;
    return static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
}

/// Missing metric values serialize as the literal "NA".
inline std::string metric_to_string(const std::optional<double>& v);

/// Bootstrap stability of the identified edges. Each replicate resamples
/// rows with replacement independently within each network (paired Y/X rows
/// move together), reruns the full analysis, and counts how often every
/// (edge, label) is identified.
struct ThresholdSummary {
    double threshold = 0.0;
    long common = 0;
    long differential = 0;
};

struct BootstrapResult {
    EdgeReport original;                  // run on the unresampled data, freq attached
    std::vector<double> freq_differential;  // aligned with original.edges
    std::vector<double> freq_common;
    std::vector<ThresholdSummary> summaries;
    long original_common = 0;
    long original_differential = 0;
    std::size_t replicates_requested = 0;
    std::size_t replicates_failed = 0;
    std::vector<std::string> warnings;
};

namespace detail {

inline ObservationPair resample_pair(const ObservationPair& pair, Rng& rng) {
    ObservationPair out = pair;
    auto resample_network = [&](const Matrix& y, const Matrix& x, Matrix& ry, Matrix& rx,
                                Vector& scales) {
        const Index n = y.rows();
        ry.resize(n, y.cols());
        rx.resize(n, x.cols());
        for (Index r = 0; r < n; ++r) {
            const auto pick = static_cast<Index>(rng.below(static_cast<std::uint64_t>(n)));
            ry.row(r) = y.row(pick);
            rx.row(r) = x.row(pick);
        }
        auto std_x = standardize_columns(rx);  // resampling changes column norms
        rx = std::move(std_x.x);
        scales = scales.cwiseProduct(std_x.scales);
    };
    resample_network(pair.y1, pair.x1, out.y1, out.x1, out.x1_scales);
    resample_network(pair.y2, pair.x2, out.y2, out.x2, out.x2_scales);
    return out;
}

}  // namespace detail

inline BootstrapResult bootstrap_stability(const ObservationPair& pair, const RunConfig& cfg,
                                           std::size_t n_boot,
                                           const std::vector<double>& thresholds) {
    if (n_boot < 1) throw ValidationError("bootstrap_stability: need n_boot >= 1");
    BootstrapResult out;
    out.replicates_requested = n_boot;

    RednetResult base = rednet_run(pair, cfg);
    out.original = base.report;
    for (const Edge& e : out.original.edges) {
        if (e.label == EdgeLabel::common) ++out.original_common;
        if (e.label == EdgeLabel::differential) ++out.original_differential;
    }

    const std::size_t n_edges = out.original.edges.size();
    std::vector<std::vector<char>> hit_diff(n_boot), hit_common(n_boot);
    std::vector<char> failed(n_boot, 0);

    parallel_for(n_boot, cfg.threads, [&](std::size_t r) {
        RunConfig rep_cfg = cfg;
        rep_cfg.threads = 1;
        rep_cfg.seed = derive_seed(cfg.seed, r, 0x626f6f74ULL);  // replicate stream
        try {
            Rng rng(rep_cfg.seed);
            ObservationPair resampled = detail::resample_pair(pair, rng);
            RednetResult rep = rednet_run(resampled, rep_cfg);
            std::vector<char> d(n_edges, 0), c(n_edges, 0);
            for (std::size_t e = 0; e < n_edges; ++e) {
                d[e] = rep.report.edges[e].label == EdgeLabel::differential ? 1 : 0;
                c[e] = rep.report.edges[e].label == EdgeLabel::common ? 1 : 0;
            }
            hit_diff[r] = std::move(d);
            hit_common[r] = std::move(c);
        } catch (const std::exception&) {
            failed[r] = 1;
        }
    });

    std::size_t ok = 0;
    out.freq_differential.assign(n_edges, 0.0);
    out.freq_common.assign(n_edges, 0.0);
    for (std::size_t r = 0; r < n_boot; ++r) {
        if (failed[r]) {
            ++out.replicates_failed;
            continue;
        }
        ++ok;
        for (std::size_t e = 0; e < n_edges; ++e) {
            out.freq_differential[e] += hit_diff[r][e];
            out.freq_common[e] += hit_common[r][e];
        }
    }
    if (ok == 0) throw NumericalError("bootstrap_stability: every replicate failed");
    for (std::size_t e = 0; e < n_edges; ++e) {
        out.freq_differential[e] /= static_cast<double>(ok);
        out.freq_common[e] /= static_cast<double>(ok);
    }
    if (out.replicates_failed * 20 > n_boot)  // > 5%
        out.warnings.push_back("bootstrap: " + std::to_string(out.replicates_failed) + " of " +
                               std::to_string(n_boot) + " replicates failed and were excluded");

    // annotate the original report with the frequency of its own label
    for (std::size_t e = 0; e < n_edges; ++e) {
        Edge& edge = out.original.edges[e];
        if (edge.label == EdgeLabel::differential)
            edge.boot_freq = out.freq_differential[e];
        else if (edge.label == EdgeLabel::common)
            edge.boot_freq = out.freq_common[e];
    }

    for (double t : thresholds) {
        ThresholdSummary row;
        row.threshold = t;
        for (std::size_t e = 0; e < n_edges; ++e) {
            if (out.freq_common[e] > t) ++row.common;
            if (out.freq_differential[e] > t) ++row.differential;
        }
        out.summaries.push_back(row);
    }
    return out;
}

inline std::string metric_to_string(const std::optional<double>& v) {
    if (!v.has_value()) return "NA";
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", *v);
    return buf;
}

}  // namespace rednet
