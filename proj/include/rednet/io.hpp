#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "rednet/evaluation.hpp"
#include "rednet/synthgen.hpp"
#include "rednet/types.hpp"

namespace rednet::io {

namespace fs = std::filesystem;

/// 17 significant digits: doubles round-trip exactly through the text formats.
inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline double parse_double(const std::string& s, const std::string& context) {
    const char* begin = s.c_str();
    char* end = nullptr;
    double v = std::strtod(begin, &end);
    if (end == begin) throw IoError("could not parse number '" + s + "' in " + context);
    return v;
}

inline std::vector<std::string> split(const std::string& line, char delim) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream stream(line);
    while (std::getline(stream, field, delim)) out.push_back(field);
    if (!line.empty() && line.back() == delim) out.emplace_back();
    return out;
}

inline std::ofstream open_out(const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    return out;
}

inline std::ifstream open_in(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string() + " for reading");
    return in;
}

/// Headered delimiter-separated matrix: first row = variable names,
/// rows = samples.
inline void write_matrix_csv(const fs::path& path, const Matrix& m,
                             const std::vector<std::string>& names, char delim = ',') {
    if (static_cast<Index>(names.size()) != m.cols())
        throw ValidationError("write_matrix_csv: " + std::to_string(names.size()) +
                              " names for " + std::to_string(m.cols()) + " columns");
    auto out = open_out(path);
    for (std::size_t j = 0; j < names.size(); ++j)
        out << (j == 0 ? "" : std::string(1, delim)) << names[j];
    out << "\n";
    for (Index r = 0; r < m.rows(); ++r) {
        for (Index c = 0; c < m.cols(); ++c)
            out << (c == 0 ? "" : std::string(1, delim)) << format_double(m(r, c));
        out << "\n";
    }
}

struct NamedMatrix {
    Matrix values;
    std::vector<std::string> names;
};

inline NamedMatrix read_matrix_csv(const fs::path& path, char delim = ',') {
    auto in = open_in(path);
    std::string line;
    if (!std::getline(in, line)) throw IoError("empty matrix file " + path.string());
    NamedMatrix out;
    out.names = split(line, delim);
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto fields = split(line, delim);
        if (fields.size() != out.names.size())
            throw IoError("row " + std::to_string(rows.size() + 2) + " of " + path.string() +
                          " has " + std::to_string(fields.size()) + " fields, expected " +
                          std::to_string(out.names.size()));
        std::vector<double> row;
        row.reserve(fields.size());
        for (const auto& f : fields) row.push_back(parse_double(f, path.string()));
        rows.push_back(std::move(row));
    }
    out.values.resize(static_cast<Index>(rows.size()), static_cast<Index>(out.names.size()));
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < rows[r].size(); ++c)
            out.values(static_cast<Index>(r), static_cast<Index>(c)) = rows[r][c];
    return out;
}

/// Anchor map: one line per node, "node_name: exo_name[,exo_name...]".
inline void write_anchors(const fs::path& path, const std::vector<std::string>& node_names,
                          const std::vector<std::string>& exo_names,
                          const std::vector<IndexSet>& anchors) {
    auto out = open_out(path);
    for (std::size_t i = 0; i < anchors.size(); ++i) {
        out << node_names[i] << ":";
        for (std::size_t a = 0; a < anchors[i].size(); ++a)
            out << (a == 0 ? " " : ",") << exo_names[static_cast<std::size_t>(anchors[i][a])];
        out << "\n";
    }
}

inline std::vector<IndexSet> read_anchors(const fs::path& path,
                                          const std::vector<std::string>& node_names,
                                          const std::vector<std::string>& exo_names) {
    std::map<std::string, Index> node_of, exo_of;
    for (std::size_t i = 0; i < node_names.size(); ++i)
        node_of[node_names[i]] = static_cast<Index>(i);
    for (std::size_t j = 0; j < exo_names.size(); ++j)
        exo_of[exo_names[j]] = static_cast<Index>(j);

    std::vector<IndexSet> anchors(node_names.size());
    std::vector<char> seen(node_names.size(), 0);
    auto in = open_in(path);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        auto colon = line.find(':');
        if (colon == std::string::npos)
            throw IoError("anchor map " + path.string() + " line " + std::to_string(line_no) +
                          ": missing ':'");
        std::string node = line.substr(0, colon);
        auto node_it = node_of.find(node);
        if (node_it == node_of.end())
            throw ValidationError("anchor map names unknown node '" + node + "'");
        IndexSet set;
        for (auto& name : split(line.substr(colon + 1), ',')) {
            // trim surrounding spaces
            auto b = name.find_first_not_of(" \t");
            if (b == std::string::npos) continue;
            auto e = name.find_last_not_of(" \t\r");
            std::string exo = name.substr(b, e - b + 1);
            auto exo_it = exo_of.find(exo);
            if (exo_it == exo_of.end())
                throw ValidationError("anchor map names unknown exogenous variable '" + exo +
                                      "'");
            set.push_back(exo_it->second);
        }
        std::sort(set.begin(), set.end());
        set.erase(std::unique(set.begin(), set.end()), set.end());
        anchors[static_cast<std::size_t>(node_it->second)] = std::move(set);
        seen[static_cast<std::size_t>(node_it->second)] = 1;
    }
    for (std::size_t i = 0; i < seen.size(); ++i)
        if (!seen[i])
            throw ValidationError("anchor map has no line for node '" + node_names[i] + "'");
    return anchors;
}

/// Edge report: source,target,label,beta_plus,beta_minus,gamma1,gamma2[,boot_freq].
inline void write_edge_report(const fs::path& path, const EdgeReport& report,
                              bool with_freq = false) {
    auto out = open_out(path);
    out << "source,target,label,beta_plus,beta_minus,gamma1,gamma2";
    if (with_freq) out << ",boot_freq";
    out << "\n";
    for (const Edge& e : report.edges) {
        out << report.node_names[static_cast<std::size_t>(e.source)] << ','
            << report.node_names[static_cast<std::size_t>(e.target)] << ',' << to_string(e.label)
            << ',' << format_double(e.beta_plus) << ',' << format_double(e.beta_minus) << ','
            << format_double(e.gamma1) << ',' << format_double(e.gamma2);
        if (with_freq) out << ',' << (e.boot_freq ? format_double(*e.boot_freq) : "NA");
        out << "\n";
    }
}

inline EdgeReport read_edge_report(const fs::path& path) {
    auto in = open_in(path);
    std::string line;
    if (!std::getline(in, line)) throw IoError("empty edge report " + path.string());
    auto header = split(line, ',');
    if (header.size() < 7 || header[0] != "source" || header[1] != "target")
        throw IoError("edge report " + path.string() + ": unexpected header");
    const bool with_freq = header.size() > 7 && header[7] == "boot_freq";

    struct Row {
        std::string source, target;
        Edge edge;
    };
    std::vector<Row> rows;
    std::set<std::string> names;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto f = split(line, ',');
        if (f.size() < 7) throw IoError("edge report " + path.string() + ": short row");
        Row row;
        row.source = f[0];
        row.target = f[1];
        auto label = edge_label_from_string(f[2]);
        if (!label) throw IoError("edge report: unknown label '" + f[2] + "'");
        row.edge.label = *label;
        row.edge.beta_plus = parse_double(f[3], "edge report");
        row.edge.beta_minus = parse_double(f[4], "edge report");
        row.edge.gamma1 = parse_double(f[5], "edge report");
        row.edge.gamma2 = parse_double(f[6], "edge report");
        if (with_freq && f.size() > 7 && f[7] != "NA")
            row.edge.boot_freq = parse_double(f[7], "edge report");
        names.insert(row.source);
        names.insert(row.target);
        rows.push_back(std::move(row));
    }
    EdgeReport report;
    report.node_names.assign(names.begin(), names.end());
    std::map<std::string, Index> index_of;
    for (std::size_t i = 0; i < report.node_names.size(); ++i)
        index_of[report.node_names[i]] = static_cast<Index>(i);
    for (auto& row : rows) {
        row.edge.source = index_of[row.source];
        row.edge.target = index_of[row.target];
        report.edges.push_back(row.edge);
    }
    return report;
}

/// Truth labels: non-absent edges with their generation role and values.
inline void write_truth(const fs::path& edges_path, const fs::path& subnetwork_path,
                        const TruthLabels& truth, const std::vector<std::string>& node_names) {
    auto out = open_out(edges_path);
    out << "source,target,label,gamma1,gamma2\n";
    for (const auto& [s, t, label] : truth.labeled)
        out << node_names[static_cast<std::size_t>(s)] << ','
            << node_names[static_cast<std::size_t>(t)] << ',' << to_string(label) << ','
            << format_double(truth.gamma1(s, t)) << ',' << format_double(truth.gamma2(s, t))
            << "\n";
    auto sub = open_out(subnetwork_path);
    for (Index v : truth.subnetwork) sub << node_names[static_cast<std::size_t>(v)] << "\n";
}

/// Rebuild TruthLabels against a node universe (typically the edge report's
/// node names). Unknown names are a node-set mismatch.
inline TruthLabels read_truth(const fs::path& edges_path, const fs::path& subnetwork_path,
                              const std::vector<std::string>& universe) {
    std::map<std::string, Index> index_of;
    for (std::size_t i = 0; i < universe.size(); ++i)
        index_of[universe[i]] = static_cast<Index>(i);
    auto lookup = [&](const std::string& name) {
        auto it = index_of.find(name);
        if (it == index_of.end())
            throw ValidationError("truth references node '" + name +
                                  "' absent from the edge report (node-set mismatch)");
        return it->second;
    };

    TruthLabels truth;
    truth.p = static_cast<Index>(universe.size());
    truth.gamma1 = Matrix::Zero(truth.p, truth.p);
    truth.gamma2 = Matrix::Zero(truth.p, truth.p);

    auto in = open_in(edges_path);
    std::string line;
    if (!std::getline(in, line)) throw IoError("empty truth file " + edges_path.string());
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto f = split(line, ',');
        if (f.size() < 5) throw IoError("truth file " + edges_path.string() + ": short row");
        Index s = lookup(f[0]);
        Index t = lookup(f[1]);
        TruthEdgeLabel label;
        if (f[2] == "common")
            label = TruthEdgeLabel::common;
        else if (f[2] == "differential-opposite")
            label = TruthEdgeLabel::diff_opposite;
        else if (f[2] == "differential-unique-1")
            label = TruthEdgeLabel::diff_unique1;
        else if (f[2] == "differential-unique-2")
            label = TruthEdgeLabel::diff_unique2;
        else
            throw IoError("truth file: unknown label '" + f[2] + "'");
        truth.gamma1(s, t) = parse_double(f[3], "truth file");
        truth.gamma2(s, t) = parse_double(f[4], "truth file");
        truth.labeled.emplace_back(s, t, label);
    }
    if (!subnetwork_path.empty() && fs::exists(subnetwork_path)) {
        auto sub = open_in(subnetwork_path);
        while (std::getline(sub, line)) {
            if (line.empty()) continue;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            truth.subnetwork.push_back(lookup(line));
        }
    }
    return truth;
}

struct MetricRow {
    std::string category;
    std::string metric;
    std::string value;
};

inline void write_metrics_csv(const fs::path& path, const std::vector<MetricRow>& rows) {
    auto out = open_out(path);
    out << "category,metric,value\n";
    for (const auto& row : rows) out << row.category << ',' << row.metric << ',' << row.value << "\n";
}

inline std::vector<MetricRow> metric_rows(const EdgeReport& report, const TruthLabels& truth,
                                          bool restrict_to_subnetwork = true) {
    std::vector<MetricRow> rows;
    for (Category cat : {Category::differential, Category::common, Category::average}) {
        auto c = confusion(report, truth, cat, restrict_to_subnetwork);
        const std::string name = to_string(cat);
        rows.push_back({name, "tp", std::to_string(c.tp)});
        rows.push_back({name, "tn", std::to_string(c.tn)});
        rows.push_back({name, "fp", std::to_string(c.fp)});
        rows.push_back({name, "fn", std::to_string(c.fn)});
        rows.push_back({name, "mcc", metric_to_string(mcc(c))});
        rows.push_back({name, "fdr", metric_to_string(fdr(c))});
        rows.push_back({name, "power", metric_to_string(power(c))});
    }
    return rows;
}

/// Per-edge bootstrap identification frequencies.
inline void write_bootstrap_freq(const fs::path& path, const BootstrapResult& boot) {
    auto out = open_out(path);
    out << "source,target,freq_common,freq_differential\n";
    for (std::size_t e = 0; e < boot.original.edges.size(); ++e) {
        const Edge& edge = boot.original.edges[e];
        out << boot.original.node_names[static_cast<std::size_t>(edge.source)] << ','
            << boot.original.node_names[static_cast<std::size_t>(edge.target)] << ','
            << format_double(boot.freq_common[e]) << ','
            << format_double(boot.freq_differential[e]) << "\n";
    }
}

/// Threshold summary in the two-row (common/differential) orientation:
/// label,original,<threshold columns>.
inline void write_bootstrap_summary(const fs::path& path, const BootstrapResult& boot) {
    auto out = open_out(path);
    out << "label,original";
    for (const auto& s : boot.summaries) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%g", s.threshold);
        out << ',' << buf;
    }
    out << "\n";
    out << "common," << boot.original_common;
    for (const auto& s : boot.summaries) out << ',' << s.common;
    out << "\n";
    out << "differential," << boot.original_differential;
    for (const auto& s : boot.summaries) out << ',' << s.differential;
    out << "\n";
}

inline std::uint64_t fnv1a64(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot digest " + path.string());
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    char buf[1 << 14];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
        for (std::streamsize i = 0; i < in.gcount(); ++i) {
            hash ^= static_cast<unsigned char>(buf[i]);
            hash *= 0x100000001b3ULL;
        }
    }
    return hash;
}

inline std::string fnv1a64_hex(const fs::path& path) {
    char hex[20];
    std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(fnv1a64(path)));
    return hex;
}

}  // namespace rednet::io
