// ccge: fit, simulate, replicate and diagnose from the command line.

#include <chrono>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ccge/ccge.hpp"

namespace {

using namespace ccge;

struct Common {
    std::optional<double> pi1;
    bool rare = false;
    int B = 200;
    std::optional<std::uint64_t> seed;
    unsigned workers = default_workers();
    std::string methods;
    std::string out;
};

PrevalenceSpec prevalence(const Common& c) {
    if (c.rare == c.pi1.has_value()) throw ConfigError("give exactly one of --pi1 or --rare");
    return c.rare ? PrevalenceSpec::rare() : PrevalenceSpec::known(*c.pi1);
}

std::vector<Method> parse_methods(const std::string& s) {
    std::vector<Method> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ','))
        if (!tok.empty()) out.push_back(parse_method(tok));
    if (out.empty()) throw ConfigError("--methods is empty");
    return out;
}

void emit(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot write '" + path + "'");
    f << text;
}

Scenario scenario_arg(const std::string& name, const std::string& config) {
    if (!name.empty() && !config.empty()) throw ConfigError("give either --scenario or --config, not both");
    if (!config.empty()) return load_scenario(config);
    if (name.empty()) throw ConfigError("--scenario or --config is required");
    return preset(name);
}

int exit_code(const Error& e) {
    switch (e.category()) {
        case Error::Category::Config: return 2;
        case Error::Category::Data: return 3;
        case Error::Category::Convergence: return 4;
        case Error::Category::Internal: return 5;
    }
    return 5;
}

void add_common(CLI::App* cmd, Common& c, bool with_methods, const std::string& default_methods) {
    cmd->add_option("--pi1", c.pi1, "Known population disease rate in (0, 1)");
    cmd->add_flag("--rare", c.rare, "Use the rare-disease approximation");
    cmd->add_option("--B", c.B, "Bootstrap replicates")->capture_default_str();
    cmd->add_option("--workers", c.workers, "Worker threads")->capture_default_str();
    cmd->add_option("--out", c.out, "Output path (stdout when omitted)");
    if (with_methods) {
        c.methods = default_methods;
        cmd->add_option("--methods", c.methods, "Comma-separated: logistic,spmle_x,spmle_g,composite,symmetric")
            ->capture_default_str();
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Case-control gene-environment interaction estimation"};
    app.require_subcommand(1);

    Common fit_c, rep_c, sim_c;
    std::string input, scenario, config, estimates_csv, g_kind = "auto", prs;
    bool percentile = false;
    std::string lambda = "bootstrap";
    int R = 200;
    Eigen::Index n0 = 500, n1 = 500;
    std::string diag_out;

    auto* fit = app.add_subcommand("fit", "Fit estimators to a case-control CSV");
    add_common(fit, fit_c, true, "logistic,spmle_x,spmle_g,symmetric");
    fit->add_option("--input", input, "CSV with columns d,g1..,x1..")->required();
    fit->add_option("--seed", fit_c.seed, "Bootstrap seed (default 0)");
    fit->add_flag("--percentile-ci", percentile, "Percentile bootstrap intervals for bootstrap-based methods");
    fit->add_option("--lambda", lambda, "Cross-covariance source for symmetric: bootstrap or asymptotic")
        ->check(CLI::IsMember({"bootstrap", "asymptotic"}));

    auto* sim = app.add_subcommand("simulate", "Draw a case-control dataset from a scenario");
    sim->add_option("--scenario", scenario, "Preset name");
    sim->add_option("--config", config, "Scenario JSON file");
    sim->add_option("--n0", n0, "Controls")->capture_default_str();
    sim->add_option("--n1", n1, "Cases")->capture_default_str();
    sim->add_option("--seed", sim_c.seed, "Seed")->required();
    sim->add_option("--out", sim_c.out, "Output CSV (stdout when omitted)");

    auto* rep = app.add_subcommand("replicate", "Monte Carlo study of a scenario");
    add_common(rep, rep_c, true, "logistic,spmle_x,symmetric");
    rep->add_option("--scenario", scenario, "Preset name");
    rep->add_option("--config", config, "Scenario JSON file");
    rep->add_option("--R", R, "Replications")->capture_default_str();
    rep->add_option("--n0", n0, "Controls per replication")->capture_default_str();
    rep->add_option("--n1", n1, "Cases per replication")->capture_default_str();
    rep->add_option("--seed", rep_c.seed, "Seed")->required();
    rep->add_option("--estimates", estimates_csv, "Also write per-replication estimates to this CSV");
    rep->add_option("--lambda", lambda, "Cross-covariance source for symmetric: bootstrap or asymptotic")
        ->check(CLI::IsMember({"bootstrap", "asymptotic"}));

    auto* diag = app.add_subcommand("diagnose", "Independence screen of G and X among controls");
    diag->add_option("--input", input, "CSV with columns d,g1..,x1..")->required();
    diag->add_option("--g-kind", g_kind, "snp, continuous or auto (per column)")
        ->check(CLI::IsMember({"auto", "snp", "continuous"}))
        ->capture_default_str();
    diag->add_option("--prs", prs, "Screen the polygenic score built from all G columns with this weight set");
    diag->add_option("--out", diag_out, "Output JSON (stdout when omitted)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    const auto t0 = std::chrono::steady_clock::now();
    try {
        if (*fit) {
            const auto prev = prevalence(fit_c);
            const auto methods = parse_methods(fit_c.methods);
            const auto data = load_csv(input);
            const RiskSpec spec(static_cast<int>(data.q()), static_cast<int>(data.px()));
            FitOptions opts;
            opts.workers = std::max(1u, fit_c.workers);
            opts.percentile_ci = percentile;
            opts.lambda_source = lambda == "asymptotic" ? LambdaSource::Asymptotic : LambdaSource::Bootstrap;
            const std::uint64_t seed = fit_c.seed.value_or(0);
            const auto res = fit_methods(data, spec, prev, methods, fit_c.B, seed, opts);
            emit(fit_c.out, fit_report_json(res, spec, prev, data, fit_c.B, seed).dump(2) + "\n");
        } else if (*sim) {
            const Scenario sc = calibrated(scenario_arg(scenario, config));
            const auto data = gen_case_control(sc, n0, n1, *sim_c.seed);
            std::ostringstream os;
            write_csv(os, data);
            emit(sim_c.out, os.str());
        } else if (*rep) {
            ReplicationConfig cfg;
            cfg.prevalence = prevalence(rep_c);
            cfg.methods = parse_methods(rep_c.methods);
            cfg.R = R;
            cfg.n0 = n0;
            cfg.n1 = n1;
            cfg.B = rep_c.B;
            cfg.seed = *rep_c.seed;
            cfg.workers = std::max(1u, rep_c.workers);
            cfg.lambda_source = lambda == "asymptotic" ? LambdaSource::Asymptotic : LambdaSource::Bootstrap;
            const auto report = run_replication(scenario_arg(scenario, config), cfg);
            emit(rep_c.out, to_json(report).dump(2) + "\n");
            if (!estimates_csv.empty()) {
                std::ostringstream os;
                write_estimates_csv(os, report);
                emit(estimates_csv, os.str());
            }
        } else if (*diag) {
            const auto data = load_csv(input);
            auto [g, x] = control_rows(data);
            std::vector<GKind> kinds;
            if (!prs.empty()) {
                const auto w = PrsWeights::bundled(prs);
                const MatrixXd score = polygenic_score(g, w);
                g = score;
                kinds = {GKind::Continuous};
            } else {
                for (Eigen::Index k = 0; k < g.cols(); ++k) {
                    bool snp_like = true;
                    for (Eigen::Index i = 0; i < g.rows(); ++i) {
                        const double v = g(i, k);
                        snp_like &= v == 0.0 || v == 1.0 || v == 2.0;
                    }
                    if (g_kind == "snp") kinds.push_back(GKind::Snp);
                    else if (g_kind == "continuous") kinds.push_back(GKind::Continuous);
                    else kinds.push_back(snp_like ? GKind::Snp : GKind::Continuous);
                }
            }
            emit(diag_out, to_json(independence_screen_controls(g, x, kinds)).dump(2) + "\n");
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code(e);
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 5;
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cerr << "done in " << secs << " s\n";
    return 0;
}
