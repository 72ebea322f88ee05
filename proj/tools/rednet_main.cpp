// Command-line front end: simulate | analyze | evaluate | bootstrap.
// The only component with side effects; everything else is the library.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "rednet/rednet.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace rednet;

namespace {

struct AnalysisFlags {
    std::string data_dir;
    std::string y1_file, y2_file, x1_file, x2_file, anchors_file;  // per-file overrides
    std::string out_dir;
    std::string method = "rednet";
    RunConfig cfg;
    bool permissive = false;
    bool no_phi = false;

    void apply() {
        cfg.strict = !permissive;
        cfg.anchors_warn_only = permissive;
        cfg.fit_phi = !no_phi;
    }

    fs::path input(const std::string& override_path, const char* name) const {
        if (!override_path.empty()) return override_path;
        if (data_dir.empty())
            throw ValidationError(std::string("no --data directory and no --") + name + " file");
        return fs::path(data_dir) / (std::string(name) +
                                     (std::string(name) == "anchors" ? ".txt" : ".csv"));
    }
    std::vector<fs::path> inputs() const {
        return {input(y1_file, "y1"), input(y2_file, "y2"), input(x1_file, "x1"),
                input(x2_file, "x2"), input(anchors_file, "anchors")};
    }
};

void add_analysis_options(CLI::App* cmd, AnalysisFlags& flags) {
    cmd->add_option("--data", flags.data_dir, "directory with y1/y2/x1/x2 csv and anchors.txt");
    cmd->add_option("--y1", flags.y1_file, "endogenous matrix of network 1");
    cmd->add_option("--y2", flags.y2_file, "endogenous matrix of network 2");
    cmd->add_option("--x1", flags.x1_file, "exogenous matrix of network 1");
    cmd->add_option("--x2", flags.x2_file, "exogenous matrix of network 2");
    cmd->add_option("--anchors", flags.anchors_file, "anchor map file");
    cmd->add_option("--out", flags.out_dir, "output directory")->required();
    cmd->add_option("--seed", flags.cfg.seed, "master seed; derives all per-node fold seeds");
    cmd->add_option("--threads", flags.cfg.threads, "worker count (results do not depend on it)")
        ->envname("REDNET_THREADS");
    cmd->add_option("--folds", flags.cfg.cv_folds, "cross-validation folds");
    cmd->add_option("--screen-d", flags.cfg.screen_count,
                    "screened set size (0 = floor(n^exponent))");
    cmd->add_option("--screen-exponent", flags.cfg.screen_exponent, "screening size exponent");
    cmd->add_option("--screen-rounds", flags.cfg.screen_rounds,
                    "residual re-screening rounds (1 = plain screening)");
    cmd->add_option("--ridge-grid", flags.cfg.ridge_grid_size, "ridge penalty grid size");
    cmd->add_option("--lasso-grid", flags.cfg.lasso_grid_size, "l1 penalty grid size");
    cmd->add_option("--lasso-grid-ratio", flags.cfg.lasso_grid_ratio,
                    "smallest l1 penalty as a fraction of the null threshold");
    cmd->add_option("--cd-tol", flags.cfg.cd_tol, "coordinate descent tolerance");
    cmd->add_option("--cd-max-iter", flags.cfg.cd_max_iter, "coordinate descent sweep budget");
    cmd->add_option("--classify-tol", flags.cfg.classify_tol, "edge classification tolerance");
    cmd->add_flag("--permissive", flags.permissive,
                  "flag node failures and anchor violations instead of aborting");
    cmd->add_flag("--no-phi", flags.no_phi, "skip anchoring-effect recovery");
}

ObservationPair load_pair(const std::vector<fs::path>& files) {
    auto y1 = io::read_matrix_csv(files[0]);
    auto y2 = io::read_matrix_csv(files[1]);
    auto x1 = io::read_matrix_csv(files[2]);
    auto x2 = io::read_matrix_csv(files[3]);
    ObservationPair pair;
    pair.y1 = std::move(y1.values);
    pair.y2 = std::move(y2.values);
    auto s1 = standardize_columns(x1.values);  // column l2 norm sqrt(n) at load time
    auto s2 = standardize_columns(x2.values);
    pair.x1 = std::move(s1.x);
    pair.x1_scales = std::move(s1.scales);
    pair.x2 = std::move(s2.x);
    pair.x2_scales = std::move(s2.scales);
    pair.node_names = y1.names;
    pair.exo_names = x1.names;
    if (y2.names != y1.names)
        throw ValidationError("y1 and y2 matrices disagree on node names");
    if (x2.names != x1.names)
        throw ValidationError("x1 and x2 matrices disagree on exogenous names");
    auto anchors = io::read_anchors(files[4], pair.node_names, pair.exo_names);
    pair.anchors1 = anchors;
    pair.anchors2 = std::move(anchors);
    check_dimensions(pair);
    return pair;
}

json config_json(const RunConfig& cfg) {
    // thread count deliberately omitted: outputs are worker-count invariant
    return json{{"seed", cfg.seed},
                {"cv_folds", cfg.cv_folds},
                {"screen_count", cfg.screen_count},
                {"screen_exponent", cfg.screen_exponent},
                {"screen_rounds", cfg.screen_rounds},
                {"ridge_grid_size", cfg.ridge_grid_size},
                {"lasso_grid_size", cfg.lasso_grid_size},
                {"lasso_grid_ratio", cfg.lasso_grid_ratio},
                {"cd_tol", cfg.cd_tol},
                {"cd_max_iter", cfg.cd_max_iter},
                {"classify_tol", cfg.classify_tol},
                {"weight_epsilon_rel", cfg.weight_epsilon_rel},
                {"strict", cfg.strict},
                {"anchors_warn_only", cfg.anchors_warn_only},
                {"fit_phi", cfg.fit_phi}};
}

void write_manifest(const fs::path& dir, const std::string& command, const json& settings,
                    const std::vector<fs::path>& inputs, const std::vector<std::string>& outputs) {
    json manifest;
    manifest["tool"] = "rednet";
    manifest["version"] = kVersion;
    manifest["command"] = command;
    manifest["settings"] = settings;
    json digests = json::object();
    for (const auto& path : inputs) digests[path.filename().string()] = io::fnv1a64_hex(path);
    manifest["input_digests"] = digests;
    manifest["outputs"] = outputs;
    auto out = io::open_out(dir / "manifest.json");
    out << manifest.dump(2) << "\n";
}

void write_tuning_csv(const fs::path& path, const std::vector<NodeTuning>& tuning,
                      const std::vector<std::string>& node_names) {
    auto out = io::open_out(path);
    out << "node,lambda,lambda_max,ridge_init_lambda,kkt,iterations,converged,failed,message\n";
    for (const auto& t : tuning) {
        out << node_names[static_cast<std::size_t>(t.node)] << ',' << io::format_double(t.lambda)
            << ',' << io::format_double(t.lambda_max) << ','
            << io::format_double(t.ridge_init_lambda) << ',' << io::format_double(t.kkt) << ','
            << t.iterations << ',' << (t.converged ? 1 : 0) << ',' << (t.failed ? 1 : 0) << ','
            << t.message << "\n";
    }
}

void write_scales_csv(const fs::path& path, const Vector& scales,
                      const std::vector<std::string>& exo_names) {
    Matrix row(1, scales.size());
    row.row(0) = scales.transpose();
    io::write_matrix_csv(path, row, exo_names);
}

int cmd_simulate(const std::string& out_dir, PairConfig& pcfg, Index n1, Index n2) {
    fs::create_directories(out_dir);
    const fs::path dir(out_dir);
    auto data = generate_dataset(pcfg, n1, n2);

    io::write_matrix_csv(dir / "y1.csv", data.pair.y1, data.pair.node_names);
    io::write_matrix_csv(dir / "y2.csv", data.pair.y2, data.pair.node_names);
    io::write_matrix_csv(dir / "x1.csv", data.x1_raw, data.pair.exo_names);
    io::write_matrix_csv(dir / "x2.csv", data.x2_raw, data.pair.exo_names);
    io::write_anchors(dir / "anchors.txt", data.pair.node_names, data.pair.exo_names,
                      data.pair.anchors1);
    io::write_truth(dir / "truth_edges.csv", dir / "subnetwork.txt", data.truth,
                    data.pair.node_names);

    json settings{{"p_total", pcfg.p_total},
                  {"sub_p", pcfg.sub_p},
                  {"avg_degree", pcfg.avg_degree},
                  {"acyclic", pcfg.acyclic},
                  {"n_opposite", pcfg.n_opposite},
                  {"n_unique_each", pcfg.n_unique_each},
                  {"effect_lo", pcfg.effect_lo},
                  {"effect_hi", pcfg.effect_hi},
                  {"noise_sd", pcfg.noise_sd},
                  {"genotype_probs", pcfg.genotype_probs},
                  {"shared_x", pcfg.shared_x},
                  {"seed", pcfg.seed},
                  {"n1", n1},
                  {"n2", n2}};
    write_manifest(dir, "simulate", settings, {},
                   {"y1.csv", "y2.csv", "x1.csv", "x2.csv", "anchors.txt", "truth_edges.csv",
                    "subnetwork.txt"});
    std::cout << "simulate: wrote " << out_dir << " (p=" << pcfg.p_total << ", n1=" << n1
              << ", n2=" << n2 << ", differential edges=" << data.truth.count_differential()
              << ")\n";
    return 0;
}

int cmd_analyze(AnalysisFlags& flags) {
    flags.apply();
    fs::create_directories(flags.out_dir);
    const fs::path dir(flags.out_dir);
    const auto inputs = flags.inputs();
    ObservationPair pair = load_pair(inputs);

    std::vector<std::string> warnings;
    std::vector<std::string> outputs;
    if (flags.method == "rednet") {
        RednetResult result = rednet_run(pair, flags.cfg, nullptr, &warnings);
        io::write_edge_report(dir / "edges.csv", result.report);
        io::write_matrix_csv(dir / "beta_plus.csv", result.estimate.beta_plus, pair.node_names);
        io::write_matrix_csv(dir / "beta_minus.csv", result.estimate.beta_minus, pair.node_names);
        io::write_matrix_csv(dir / "gamma1.csv", result.estimate.gamma1, pair.node_names);
        io::write_matrix_csv(dir / "gamma2.csv", result.estimate.gamma2, pair.node_names);
        write_tuning_csv(dir / "tuning.csv", result.estimate.tuning, pair.node_names);
        outputs = {"edges.csv", "beta_plus.csv", "beta_minus.csv", "gamma1.csv", "gamma2.csv",
                   "tuning.csv"};
        if (flags.cfg.fit_phi) {
            // anchoring effects reported on the original X scale
            Matrix phi1 = result.estimate.phi1, phi2 = result.estimate.phi2;
            for (Index j = 0; j < phi1.rows(); ++j) {
                phi1.row(j) /= pair.x1_scales[j];
                phi2.row(j) /= pair.x2_scales[j];
            }
            io::write_matrix_csv(dir / "phi1.csv", phi1, pair.node_names);
            io::write_matrix_csv(dir / "phi2.csv", phi2, pair.node_names);
            outputs.push_back("phi1.csv");
            outputs.push_back("phi2.csv");
        }
    } else if (flags.method == "naive") {
        NaiveResult result = naive_run(pair, flags.cfg, nullptr, &warnings);
        io::write_edge_report(dir / "edges.csv", result.report);
        io::write_matrix_csv(dir / "beta_plus.csv", result.beta_plus, pair.node_names);
        io::write_matrix_csv(dir / "beta_minus.csv", result.beta_minus, pair.node_names);
        io::write_matrix_csv(dir / "gamma1.csv", result.gamma1, pair.node_names);
        io::write_matrix_csv(dir / "gamma2.csv", result.gamma2, pair.node_names);
        write_tuning_csv(dir / "tuning_net1.csv", result.tuning1, pair.node_names);
        write_tuning_csv(dir / "tuning_net2.csv", result.tuning2, pair.node_names);
        outputs = {"edges.csv", "beta_plus.csv", "beta_minus.csv", "gamma1.csv", "gamma2.csv",
                   "tuning_net1.csv", "tuning_net2.csv"};
    } else {
        throw ValidationError("unknown --method '" + flags.method + "' (rednet or naive)");
    }
    write_scales_csv(dir / "x1_scales.csv", pair.x1_scales, pair.exo_names);
    write_scales_csv(dir / "x2_scales.csv", pair.x2_scales, pair.exo_names);
    outputs.push_back("x1_scales.csv");
    outputs.push_back("x2_scales.csv");

    {
        auto log = io::open_out(dir / "run.log");
        log << "method: " << flags.method << "\n";
        log << "data: " << flags.data_dir << "\n";
        for (const auto& w : warnings) log << "warning: " << w << "\n";
    }
    outputs.push_back("run.log");

    json settings = config_json(flags.cfg);
    settings["method"] = flags.method;
    write_manifest(dir, "analyze", settings, inputs, outputs);
    for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
    std::cout << "analyze (" << flags.method << "): wrote " << flags.out_dir << "\n";
    return 0;
}

int cmd_evaluate(const std::string& edges_file, const std::string& truth_file,
                 const std::string& subnetwork_file, const std::string& out_dir,
                 bool full_matrix) {
    EdgeReport report = io::read_edge_report(edges_file);
    fs::path subnet = subnetwork_file;
    if (subnetwork_file.empty()) {
        fs::path candidate = fs::path(truth_file).parent_path() / "subnetwork.txt";
        if (fs::exists(candidate)) subnet = candidate;
    }
    TruthLabels truth = io::read_truth(truth_file, subnet, report.node_names);
    auto rows = io::metric_rows(report, truth, !full_matrix);
    if (out_dir.empty()) {
        std::cout << "category,metric,value\n";
        for (const auto& r : rows) std::cout << r.category << ',' << r.metric << ',' << r.value << "\n";
        return 0;
    }
    fs::create_directories(out_dir);
    const fs::path dir(out_dir);
    io::write_metrics_csv(dir / "metrics.csv", rows);
    json settings{{"full_matrix", full_matrix}};
    write_manifest(dir, "evaluate", settings,
                   {fs::path(edges_file), fs::path(truth_file)}, {"metrics.csv"});
    std::cout << "evaluate: wrote " << out_dir << "/metrics.csv\n";
    return 0;
}

int cmd_bootstrap(AnalysisFlags& flags, std::size_t n_boot, std::vector<double>& thresholds) {
    flags.apply();
    fs::create_directories(flags.out_dir);
    const fs::path dir(flags.out_dir);
    const auto inputs = flags.inputs();
    ObservationPair pair = load_pair(inputs);

    BootstrapResult boot = bootstrap_stability(pair, flags.cfg, n_boot, thresholds);
    io::write_edge_report(dir / "edges.csv", boot.original, /*with_freq=*/true);
    io::write_bootstrap_freq(dir / "freq.csv", boot);
    io::write_bootstrap_summary(dir / "summary.csv", boot);
    {
        auto log = io::open_out(dir / "run.log");
        log << "replicates: " << boot.replicates_requested << "\n";
        log << "failed: " << boot.replicates_failed << "\n";
        for (const auto& w : boot.warnings) log << "warning: " << w << "\n";
    }
    json settings = config_json(flags.cfg);
    settings["n_boot"] = n_boot;
    settings["thresholds"] = thresholds;
    write_manifest(dir, "bootstrap", settings, inputs,
                   {"edges.csv", "freq.csv", "summary.csv", "run.log"});
    for (const auto& w : boot.warnings) std::cerr << "warning: " << w << "\n";
    std::cout << "bootstrap: wrote " << flags.out_dir << " (" << n_boot << " replicates, "
              << boot.replicates_failed << " failed)\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Differential analysis of paired directed networks"};
    app.require_subcommand(1);
    app.set_config("--config", "", "key-value config file with [subcommand] sections");
    app.set_version_flag("--version", std::string(kVersion));

    // simulate
    auto* sim = app.add_subcommand("simulate", "generate a paired synthetic dataset with truth");
    PairConfig pcfg;
    pcfg.p_total = 200;
    pcfg.sub_p = 30;
    Index n1 = 250, n2 = 250;
    std::string sim_out;
    bool cyclic = false;
    sim->add_option("--out", sim_out, "output directory")->required();
    sim->add_option("--p-total", pcfg.p_total, "total endogenous variables (q anchors follow)");
    sim->add_option("--sub-p", pcfg.sub_p, "differential subnetwork size");
    sim->add_option("--avg-degree", pcfg.avg_degree, "expected in-degree (1 sparse, 3 dense)");
    sim->add_flag("--cyclic", cyclic, "allow directed cycles in the subnetwork");
    sim->add_option("--n-opposite", pcfg.n_opposite, "shared edges with opposite signs");
    sim->add_option("--n-unique-each", pcfg.n_unique_each, "unique edges per network");
    sim->add_option("--effect-lo", pcfg.effect_lo, "smallest effect magnitude");
    sim->add_option("--effect-hi", pcfg.effect_hi, "largest effect magnitude");
    sim->add_option("--noise-sd", pcfg.noise_sd, "noise standard deviation");
    sim->add_flag("--shared-x", pcfg.shared_x, "reuse the same genotypes in both networks");
    sim->add_option("--n1", n1, "samples in network 1");
    sim->add_option("--n2", n2, "samples in network 2");
    sim->add_option("--seed", pcfg.seed, "generator seed");

    // analyze
    auto* ana = app.add_subcommand("analyze", "two-stage differential analysis (or the naive baseline)");
    AnalysisFlags ana_flags;
    add_analysis_options(ana, ana_flags);
    ana->add_option("--method", ana_flags.method, "rednet (joint) or naive (per-network)");

    // evaluate
    auto* eva = app.add_subcommand("evaluate", "score an edge report against truth labels");
    std::string eva_edges, eva_truth, eva_subnet, eva_out;
    bool eva_full = false;
    eva->add_option("--edges", eva_edges, "edge report csv")->required();
    eva->add_option("--truth", eva_truth, "truth edges csv")->required();
    eva->add_option("--subnetwork", eva_subnet,
                    "subnetwork node list (default: subnetwork.txt beside the truth file)");
    eva->add_option("--out", eva_out, "output directory (metrics print to stdout if omitted)");
    eva->add_flag("--full-matrix", eva_full, "score all ordered pairs, not just the subnetwork");

    // bootstrap
    auto* boo = app.add_subcommand("bootstrap", "bootstrap stability of the identified edges");
    AnalysisFlags boo_flags;
    add_analysis_options(boo, boo_flags);
    std::size_t n_boot = 100;
    std::vector<double> thresholds{0.7, 0.8, 0.9};
    boo->add_option("--n-boot", n_boot, "bootstrap replicates");
    boo->add_option("--thresholds", thresholds, "frequency thresholds")->delimiter(',');

    try {
        app.parse(argc, argv);
        if (sim->parsed()) {
            pcfg.acyclic = !cyclic;
            return cmd_simulate(sim_out, pcfg, n1, n2);
        }
        if (ana->parsed()) return cmd_analyze(ana_flags);
        if (eva->parsed()) return cmd_evaluate(eva_edges, eva_truth, eva_subnet, eva_out, eva_full);
        if (boo->parsed()) return cmd_bootstrap(boo_flags, n_boot, thresholds);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    } catch (const ValidationError& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return 2;
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return 3;
    } catch (const IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
