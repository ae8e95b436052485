// qfg: batch experiment runner for quantum-filtering diffusions, detection
// scheme diagnostics, HJB-Isaacs solves, and feedback game evaluation.
//
// Exit codes: 0 success, 2 configuration error, 3 numerical failure.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <string>

#include "qfg/experiment.hpp"

namespace {

struct CommonArgs {
    std::string config_path;
    std::string out_dir = "qfg-out";
    int threads = 4;
    long long seed = -1;  // -1: keep the config value
};

using Runner = int (*)(qfg::cli::ConfigMap, const std::filesystem::path&, int);

void add_subcommand(CLI::App& app, const char* name, const char* brief, const char* columns,
                    const qfg::cli::Schema& schema, Runner runner, const char* seed_key,
                    std::vector<std::function<int()>>& jobs, CommonArgs& args) {
    auto* cmd = app.add_subcommand(name, brief);
    cmd->description(std::string(brief) + "\n\nOutput files:\n" + columns +
                     "\nConfig keys:\n" + qfg::cli::describe(schema));
    cmd->add_option("--config", args.config_path, "structured-text config file");
    cmd->add_option("--out", args.out_dir, "output directory");
    cmd->add_option("--seed", args.seed, "override the config seed");
    cmd->add_option("--threads", args.threads, "worker thread cap");

    cmd->callback([&args, runner, seed_key, &jobs]() {
        jobs.push_back([&args, runner, seed_key]() {
            qfg::cli::ConfigMap config;
            if (!args.config_path.empty())
                config = qfg::cli::ConfigMap::parse_file(args.config_path);
            if (args.seed >= 0 && seed_key)
                config.set(seed_key, std::to_string(args.seed));
            return runner(std::move(config), args.out_dir, std::max(1, args.threads));
        });
    });
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"quantum filtering, detection-scheme analysis and dynamic game toolkit"};
    app.require_subcommand(1);
    CommonArgs args;
    std::vector<std::function<int()>> jobs;

    add_subcommand(app, "simulate", "integrate one controlled filtering trajectory",
                   "  trajectory.csv: t, chart coordinates (re_wk/im_wk or phi_k),\n"
                   "    per-channel increments dY_<label>, controls u, v\n"
                   "  summary.json, resolved.cfg\n",
                   qfg::cli::simulate_schema(), &qfg::cli::run_simulate, "run.seed", jobs, args);
    add_subcommand(app, "analyze-scheme", "drift/variance residuals and isothermality verdicts",
                   "  report.json: points tested, max residuals, isothermal verdict\n"
                   "  resolved.cfg\n",
                   qfg::cli::analyze_scheme_schema(), &qfg::cli::run_analyze_scheme,
                   "analysis.seed", jobs, args);
    add_subcommand(app, "solve-hjb", "backward HJB solve on circle/torus/sphere",
                   "  value.csv: t, c1, c2, value per node (c1/c2 = native coordinates)\n"
                   "  convergence.json, resolved.cfg\n",
                   qfg::cli::solve_hjb_schema(), &qfg::cli::run_solve_hjb, nullptr, jobs, args);
    add_subcommand(app, "exact-circle", "closed-form circle game solutions",
                   "  profile.csv: phi, stationary_profile[, discounted_value]\n"
                   "  summary.json: lambda (closed form and numeric), discounted constants\n",
                   qfg::cli::exact_circle_schema(), &qfg::cli::run_exact_circle, nullptr, jobs,
                   args);
    add_subcommand(app, "policy-eval", "solve a zero-sum game and verify the policy by MC",
                   "  summary.json: value, lambda, mc_mean, mc_stderr, chart_exit_fraction\n",
                   qfg::cli::policy_eval_schema(), &qfg::cli::run_policy_eval, "mc.seed", jobs,
                   args);
    add_subcommand(app, "two-atom", "coupled two-atom filtering simulation and drift report",
                   "  trajectory.csv: t, re/im of (w01, w10, w11)\n"
                   "  summary.json: start drift coefficients, final state\n",
                   qfg::cli::two_atom_schema(), &qfg::cli::run_two_atom, "run.seed", jobs, args);

    // convenience flags for the exactly solvable game
    auto* exact = app.get_subcommand("exact-circle");
    static std::string alpha_override, delta_override;
    exact->add_option("--alpha", alpha_override, "drift advantage alpha");
    exact->add_option("--delta", delta_override, "discount rate delta");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        // flags mirroring config keys of the exactly solvable game
        if (!alpha_override.empty() || !delta_override.empty()) {
            qfg::cli::ConfigMap config;
            if (!args.config_path.empty())
                config = qfg::cli::ConfigMap::parse_file(args.config_path);
            if (!alpha_override.empty()) config.set("alpha", alpha_override);
            if (!delta_override.empty()) config.set("delta", delta_override);
            return qfg::cli::run_exact_circle(std::move(config), args.out_dir,
                                              std::max(1, args.threads));
        }
        for (auto& job : jobs) {
            const int rc = job();
            if (rc != 0) return rc;
        }
        return 0;
    } catch (const qfg::ConfigError& e) {
        if (e.line > 0)
            std::fprintf(stderr, "config error (line %d): %s\n", e.line, e.what());
        else
            std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const qfg::ConvergenceError& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        for (std::size_t k = 0; k < e.residuals.size(); ++k)
            std::fprintf(stderr, "  sweep %zu residual %.3e\n", k + 1, e.residuals[k]);
        return 3;
    } catch (const qfg::Error& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
}
