// Command-line front end for the surrogate meta-analysis pipeline.
// Subcommands: screen, evaluate, simulate, aggregate-genesets, split.

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <numeric>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "surrmeta/data.hpp"
#include "surrmeta/errors.hpp"
#include "surrmeta/pipeline.hpp"
#include "surrmeta/sim.hpp"

namespace fs = std::filesystem;
using namespace surrmeta;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

unsigned env_threads() {
    if (const char* v = std::getenv("SURRMETA_THREADS")) {
        const long n = std::strtol(v, nullptr, 10);
        if (n > 0) return static_cast<unsigned>(n);
    }
    return 1;
}

PoolMethod parse_method(const std::string& s, VarianceMethod& var_method) {
    if (s == "re-hksj") {
        var_method = VarianceMethod::HKSJ;
        return PoolMethod::RE;
    }
    if (s == "re-conv") {
        var_method = VarianceMethod::conventional;
        return PoolMethod::RE;
    }
    if (s == "fe") {
        var_method = VarianceMethod::conventional;
        return PoolMethod::FE;
    }
    throw CLI::ValidationError("--meta must be one of re-hksj, re-conv, fe");
}

std::ofstream open_out(const fs::path& dir, const std::string& name) {
    fs::create_directories(dir);
    std::ofstream out(dir / name);
    if (!out) throw DataError("cannot write " + (dir / name).string());
    out.precision(12);
    return out;
}

// Values from --config <file.json> become option defaults; explicit flags win.
void apply_config_defaults(CLI::App& app, int argc, char** argv) {
    std::string config_path;
    for (int i = 1; i + 1 < argc; ++i)
        if (std::string(argv[i]) == "--config") config_path = argv[i + 1];
    if (config_path.empty()) return;
    std::ifstream in(config_path);
    if (!in) throw DataError("cannot open config file: " + config_path);
    nlohmann::json j;
    in >> j;
    for (auto& [key, value] : j.items()) {
        auto* opt = app.get_option_no_throw("--" + key);
        if (!opt) continue;
        opt->default_str(value.is_string() ? value.get<std::string>() : value.dump());
        opt->force_callback();
    }
}

struct CommonOpts {
    std::string input;
    std::string out_dir = ".";
    double alpha = 0.05;
    double epsilon = 0.0;
    std::vector<double> epsilon_power; // {alpha, power}
    std::string meta = "re-hksj";
    std::uint64_t seed = 1;
    std::size_t min_n = 5;
    unsigned threads = env_threads();
    std::string config_file;

    void attach(CLI::App* cmd, bool needs_input = true) {
        if (needs_input) cmd->add_option("--data", input, "input study CSV")->required();
        cmd->add_option("--out", out_dir, "output directory");
        cmd->add_option("--alpha", alpha, "significance level");
        cmd->add_option("--epsilon", epsilon, "fixed equivalence bound");
        cmd->add_option("--epsilon-power", epsilon_power,
                        "power-based bound: one-sided alpha and target power")
            ->expected(2);
        cmd->add_option("--meta", meta, "pooling method: re-hksj, re-conv, fe");
        cmd->add_option("--seed", seed, "RNG seed");
        cmd->add_option("--min-n", min_n, "minimum complete-case study size");
        cmd->add_option("--threads", threads, "worker threads");
        cmd->add_option("--config", config_file, "JSON config file (flags override)");
    }

    EpsilonPolicy epsilon_policy() const {
        EpsilonPolicy policy;
        if (epsilon > 0.0) {
            policy.fixed = epsilon;
        } else if (epsilon_power.size() == 2) {
            policy.alpha = epsilon_power[0];
            policy.power = epsilon_power[1];
        }
        return policy;
    }
};

void write_forest_csv(const fs::path& dir, const MarkerScreenRow& row,
                      const std::vector<WithinStudyEstimate>& per_study) {
    auto out = open_out(dir, "forest_" + row.marker_id + ".csv");
    out << "row_type,study,delta,se,weight,n\n";
    double sw = 0.0;
    for (const auto& est : per_study) sw += 1.0 / (est.var_delta + row.pooled.tau2_hat);
    for (const auto& est : per_study) {
        const double w = 1.0 / (est.var_delta + row.pooled.tau2_hat) / sw;
        out << "study," << est.study_id << ',' << est.delta << ',' << std::sqrt(est.var_delta) << ','
            << w << ',' << est.n_effective << '\n';
    }
    out << "pooled,," << row.pooled.mu_hat << ',' << row.pooled.se_pooled << ",1,\n";
    out << "ci,," << row.pooled.ci_low << ',' << row.pooled.ci_high << ",,\n";
    out << "pi,," << row.pooled.pi_low << ',' << row.pooled.pi_high << ",,\n";
}

int cmd_screen(const CommonOpts& opts, std::size_t top_k, double split_fraction) {
    auto data = parse_study_csv(opts.input);
    FilterReport report;
    data = filter_studies(data, opts.min_n, &report);
    for (const auto& [study, n] : report.dropped)
        std::cerr << "dropped study " << study << " (complete-case n=" << n << ")\n";
    if (data.size() < 2) {
        std::cerr << "error: meta-analysis requires at least 2 studies after filtering\n";
        return kExitData;
    }

    if (split_fraction > 0.0) {
        std::vector<StudyDataset> screen_part, eval_part;
        for (const auto& study : data) {
            auto [a, b] = split_within_study(study, split_fraction, opts.seed);
            screen_part.push_back(std::move(a));
            eval_part.push_back(std::move(b));
        }
        write_study_csv(eval_part, (fs::path(opts.out_dir) / "holdout.csv").string());
        data = std::move(screen_part);
    }

    ScreenConfig config;
    config.alpha = opts.alpha;
    config.epsilon = opts.epsilon_policy();
    config.method = parse_method(opts.meta, config.variance_method);
    config.threads = opts.threads;
    const auto result = run_screen(data, config);

    auto out = open_out(opts.out_dir, "screen_results.csv");
    out << "marker,n_studies,mu_hat,tau2_hat,se,q,ci_low,ci_high,pi_low,pi_high,"
           "p_lower,p_upper,p_tost,p_adjusted,significant\n";
    for (const auto& row : result.rows) {
        out << row.marker_id << ',' << row.n_studies << ',' << row.pooled.mu_hat << ','
            << row.pooled.tau2_hat << ',' << row.pooled.se_pooled << ',' << row.pooled.q_scale << ','
            << row.pooled.ci_low << ',' << row.pooled.ci_high << ',' << row.pooled.pi_low << ','
            << row.pooled.pi_high << ',' << row.equivalence.p_lower << ',' << row.equivalence.p_upper
            << ',' << row.equivalence.p_tost << ',' << row.equivalence.p_adjusted << ','
            << (row.equivalence.significant ? 1 : 0) << '\n';
    }

    auto sig = open_out(opts.out_dir, "signature.json");
    sig << result.spec.to_json() << '\n';
    if (result.gamma.empty())
        std::cerr << "warning: no markers passed screening; signature is empty\n";

    // Forest data for the top-K markers by raw TOST p-value.
    std::vector<std::size_t> order(result.rows.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return result.rows[a].equivalence.p_tost < result.rows[b].equivalence.p_tost;
    });
    const auto& markers = data.front().marker_names;
    for (std::size_t k = 0; k < std::min(top_k, order.size()); ++k) {
        const auto& row = result.rows[order[k]];
        const auto it = std::find(markers.begin(), markers.end(), row.marker_id);
        const auto j = static_cast<std::size_t>(it - markers.begin());
        write_forest_csv(opts.out_dir, row, result.per_study[j]);
    }

    std::cout << "epsilon=" << result.epsilon_used << " markers=" << result.rows.size()
              << " significant=" << result.gamma.size() << '\n';
    return kExitOk;
}

int cmd_evaluate(const CommonOpts& opts, const std::string& signature_path, std::size_t n_boot) {
    std::ifstream sig_in(signature_path);
    if (!sig_in) throw DataError("cannot open signature file: " + signature_path);
    std::stringstream buffer;
    buffer << sig_in.rdbuf();
    auto spec = SignatureSpec::from_json(buffer.str());
    if (spec.empty()) {
        std::cerr << "error: signature has no members\n";
        return kExitData;
    }

    auto holdout = parse_study_csv(opts.input);
    EvaluateConfig config;
    config.alpha = opts.alpha;
    config.epsilon = opts.epsilon_policy();
    config.method = parse_method(opts.meta, config.variance_method);
    config.min_n = opts.min_n;
    config.n_boot = n_boot;
    config.seed = opts.seed;
    const auto report = run_evaluate(holdout, spec, config);
    for (const auto& study : report.skipped_studies)
        std::cerr << "warning: holdout study " << study << " skipped\n";

    auto out = open_out(opts.out_dir, "evaluate_results.csv");
    out << "row_type,study,delta,se,weight,n,u_y,u_s\n";
    double sw = 0.0;
    for (const auto& est : report.per_study) sw += 1.0 / (est.var_delta + report.pooled.tau2_hat);
    for (const auto& est : report.per_study) {
        const double w = 1.0 / (est.var_delta + report.pooled.tau2_hat) / sw;
        out << "study," << est.study_id << ',' << est.delta << ',' << std::sqrt(est.var_delta) << ','
            << w << ',' << est.n_effective << ',' << est.u_y << ',' << est.u_s << '\n';
    }
    out << "pooled,," << report.pooled.mu_hat << ',' << report.pooled.se_pooled << ",1,,,\n";
    out << "ci,," << report.pooled.ci_low << ',' << report.pooled.ci_high << ",,,,\n";
    out << "pi,," << report.pooled.pi_low << ',' << report.pooled.pi_high << ",,,,\n";

    auto metrics_out = open_out(opts.out_dir, "metrics.csv");
    metrics_out << "metric,value,ci_low,ci_high,defined\n";
    metrics_out << "ccc," << report.ccc_value << ',' << report.ccc_ci.low << ',' << report.ccc_ci.high
                << ",1\n";
    metrics_out << "icc21," << report.icc_value << ',' << report.icc_ci.low << ','
                << report.icc_ci.high << ',' << (report.icc_defined ? 1 : 0) << '\n';
    metrics_out << "r2_trial," << report.r2_value << ',' << report.r2_ci.low << ','
                << report.r2_ci.high << ',' << (report.r2_defined ? 1 : 0) << '\n';

    std::cout << "epsilon=" << report.epsilon_used << " mu=" << report.pooled.mu_hat
              << " p_tost=" << report.equivalence.p_tost << " tau2=" << report.pooled.tau2_hat
              << " ccc=" << report.ccc_value << '\n';
    return kExitOk;
}

int cmd_simulate(const CommonOpts& opts, const std::string& mode, std::size_t n_markers,
                 const std::vector<std::size_t>& m_list, const std::vector<std::size_t>& n_list,
                 const std::vector<double>& u_tau2_list, const std::vector<double>& u_nu_list,
                 const std::vector<double>& alpha_grid, std::size_t n_reps, std::size_t subsample_n,
                 std::size_t subsample_studies) {
    if (mode == "permutation") {
        auto data = parse_study_csv(opts.input);
        PermutationConfig config;
        config.n_reps = n_reps;
        config.subsample_n = subsample_n;
        config.subsample_studies = subsample_studies;
        config.alpha = opts.alpha;
        config.epsilon = opts.epsilon;
        config.seed = opts.seed;
        const auto summary = run_permutation_fpr(data, config);
        auto out = open_out(opts.out_dir, "sim_permutation.csv");
        out << "replicate,fpr\n";
        for (std::size_t r = 0; r < summary.fpr_per_rep.size(); ++r)
            out << r << ',' << summary.fpr_per_rep[r] << '\n';
        std::cout << "mean_fpr=" << summary.mean_fpr << " max_fpr=" << summary.max_fpr << '\n';
        return kExitOk;
    }

    auto out = open_out(opts.out_dir,
                        mode == "power" ? "sim_power.csv" : "sim_calibration.csv");
    out << "m,n,u_tau2_max,u_nu_max,alpha,rate,mc_se,j\n";
    for (std::size_t m : m_list) {
        for (std::size_t n : n_list) {
            for (double ut : u_tau2_list) {
                for (double un : u_nu_list) {
                    SimConfig config;
                    config.n_markers = n_markers;
                    config.n_studies = m;
                    config.n_per_study = {n};
                    config.epsilon = opts.epsilon > 0.0 ? opts.epsilon : 0.1;
                    config.alpha = opts.alpha;
                    config.u_tau2_max = ut;
                    config.u_nu_max = un;
                    config.seed = opts.seed;
                    config.threads = opts.threads;
                    config.method = parse_method(opts.meta, config.variance_method);
                    SimSummary summary;
                    if (mode == "power") {
                        config.mu_regime = MuRegime::uniform_valid;
                        summary = run_power(config);
                    } else {
                        config.mu_regime = MuRegime::LFC;
                        summary = run_calibration(config, alpha_grid);
                    }
                    for (std::size_t a = 0; a < summary.alpha_grid.size(); ++a)
                        out << m << ',' << n << ',' << ut << ',' << un << ','
                            << summary.alpha_grid[a] << ',' << summary.rate[a] << ','
                            << summary.mc_se[a] << ',' << summary.n_markers << '\n';
                }
            }
        }
    }
    std::cout << "wrote " << (mode == "power" ? "sim_power.csv" : "sim_calibration.csv") << '\n';
    return kExitOk;
}

int cmd_aggregate(const CommonOpts& opts, const std::string& geneset_path) {
    auto data = parse_study_csv(opts.input);
    const auto catalog = parse_geneset_csv(geneset_path);
    std::vector<StudyDataset> aggregated;
    std::vector<std::string> dropped;
    for (const auto& study : data) {
        dropped.clear();
        aggregated.push_back(aggregate_genesets(study, catalog, &dropped));
    }
    for (const auto& name : dropped)
        std::cerr << "dropped geneset with no available members: " << name << '\n';
    write_study_csv(aggregated, (fs::path(opts.out_dir) / "aggregated.csv").string());
    std::cout << "wrote aggregated.csv with " << aggregated.front().n_markers() << " genesets\n";
    return kExitOk;
}

int cmd_split(const CommonOpts& opts, double fraction) {
    auto data = parse_study_csv(opts.input);
    std::vector<StudyDataset> part_a, part_b;
    for (const auto& study : data) {
        auto [a, b] = split_within_study(study, fraction, opts.seed);
        part_a.push_back(std::move(a));
        part_b.push_back(std::move(b));
    }
    write_study_csv(part_a, (fs::path(opts.out_dir) / "screening.csv").string());
    write_study_csv(part_b, (fs::path(opts.out_dir) / "holdout.csv").string());
    std::cout << "wrote screening.csv and holdout.csv\n";
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Trial-level surrogate marker screening and meta-analysis"};
    app.require_subcommand(1);

    CommonOpts screen_opts, eval_opts, sim_opts, agg_opts, split_opts;

    auto* screen = app.add_subcommand("screen", "within-study estimation, pooling, equivalence screen");
    screen_opts.attach(screen);
    std::size_t top_k = 10;
    double screen_split = 0.0;
    screen->add_option("--top-k", top_k, "markers to emit forest data for");
    screen->add_option("--split-fraction", screen_split,
                       "split each study first; screening part gets floor(f*n)");

    auto* evaluate = app.add_subcommand("evaluate", "evaluate a composite signature on holdout data");
    eval_opts.attach(evaluate);
    std::string signature_path;
    std::size_t n_boot = 2000;
    evaluate->add_option("--signature", signature_path, "signature.json from screen")->required();
    evaluate->add_option("--n-boot", n_boot, "bootstrap replicates for metric CIs");

    auto* simulate = app.add_subcommand("simulate", "calibration / power / permutation studies");
    sim_opts.attach(simulate, false);
    simulate->add_option("--data", sim_opts.input, "paired study CSV (permutation mode)");
    std::string sim_mode = "calibration";
    std::size_t sim_j = 20000, sim_reps = 500, sub_n = 0, sub_m = 0;
    std::vector<std::size_t> m_list{3, 10, 25}, n_list{10, 50, 250};
    std::vector<double> u_tau2_list{0.01}, u_nu_list{10.0};
    std::vector<double> alpha_grid{0.01, 0.025, 0.05, 0.1};
    simulate->add_option("--mode", sim_mode, "calibration, power, or permutation");
    simulate->add_option("--j", sim_j, "markers per configuration");
    simulate->add_option("--m-list", m_list, "study counts");
    simulate->add_option("--n-list", n_list, "per-study sizes");
    simulate->add_option("--u-tau2-list", u_tau2_list, "max between-study variances");
    simulate->add_option("--u-nu-list", u_nu_list, "max within-study variability");
    simulate->add_option("--alpha-grid", alpha_grid, "nominal levels (calibration mode)");
    simulate->add_option("--reps", sim_reps, "permutation replicates");
    simulate->add_option("--subsample-n", sub_n, "subjects per study to subsample (0 = all)");
    simulate->add_option("--subsample-studies", sub_m, "studies to subsample (0 = all)");

    auto* aggregate = app.add_subcommand("aggregate-genesets", "replace markers by geneset means");
    agg_opts.attach(aggregate);
    std::string geneset_path;
    aggregate->add_option("--genesets", geneset_path, "two-column CSV geneset,member")->required();

    auto* split = app.add_subcommand("split", "seeded within-study subject split");
    split_opts.attach(split);
    double fraction = 0.66;
    split->add_option("--split-fraction", fraction, "fraction for the screening part");

    try {
        apply_config_defaults(app, argc, argv);
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitData;
    }

    try {
        if (screen->parsed()) return cmd_screen(screen_opts, top_k, screen_split);
        if (evaluate->parsed()) return cmd_evaluate(eval_opts, signature_path, n_boot);
        if (simulate->parsed())
            return cmd_simulate(sim_opts, sim_mode, sim_j, m_list, n_list, u_tau2_list, u_nu_list,
                                alpha_grid, sim_reps, sub_n, sub_m);
        if (aggregate->parsed()) return cmd_aggregate(agg_opts, geneset_path);
        if (split->parsed()) return cmd_split(split_opts, fraction);
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitData;
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << '\n';
        return kExitNumeric;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitNumeric;
    }
    return kExitUsage;
}
