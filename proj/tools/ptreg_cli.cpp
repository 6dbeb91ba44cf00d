#include <ptreg/ptreg.hpp>

#include <CLI11.hpp>

#include <cstdio>
#include <exception>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

int run_solve(const ptreg::RunConfig& config, bool quiet)
{
    auto progress = [quiet](const ptreg::LevelRow& r) {
        if (quiet)
            return;
        std::printf("level %2d  dof %7d  it %3d  %-13s  |r| %.3e  g10 %.4g  s01 %.3g  delta %.4g  eta %.3e\n",
                    r.level, r.dof, r.iterations, ptreg::to_string(r.exit), r.r_norm, r.gamma10, r.sigma01,
                    r.delta, r.eta);
        std::fflush(stdout);
    };
    const ptreg::RunSummary summary = ptreg::run(config, progress);
    ptreg::write_outputs(config, summary, config.out_dir);
    std::printf("%zu levels, wall time %.2f s, outputs in %s\n", summary.levels.size(), summary.wall_seconds,
                config.out_dir.c_str());
    if (summary.aborted) {
        std::fprintf(stderr, "aborted: %s\n", summary.abort_reason.c_str());
        return 2;
    }
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Adaptive FEM with pseudo-time regularized Newton iteration"};
    app.require_subcommand(1);

    ptreg::RunConfig config;
    std::optional<double> gamma_max;
    std::optional<double> gamma_init;
    std::optional<double> delta_init;
    bool quiet = false;

    app.set_config("--config", "", "TOML file with a [solve] section; command-line flags take precedence")
        ->check(CLI::ExistingFile);
    app.fallthrough();
    app.allow_config_extras(CLI::config_extras_mode::error);

    CLI::App* solve = app.add_subcommand("solve", "Run the adaptive loop on a model problem");
    solve->add_option("--problem", config.problem_name, "Model problem")
        ->check(CLI::IsMember({"ex1", "ex2", "linear"}))
        ->capture_default_str();
    solve->add_option("--q", config.q, "Regularization reduction factor")->capture_default_str();
    solve->add_option("--gamma-max", gamma_max, "Override the problem's gamma_max");
    solve->add_option("--tol", config.tol, "Residual tolerance")->capture_default_str();
    solve->add_option("--theta", config.theta, "Dorfler bulk fraction")->capture_default_str();
    solve->add_option("--max-levels", config.max_levels, "Number of mesh levels")->capture_default_str();
    solve->add_option("--quad-degree", config.quad_degree, "Element quadrature degree")->capture_default_str();
    solve->add_option("--out", config.out_dir, "Output directory")->capture_default_str();
    solve->add_option("--export-levels", config.export_levels, "Levels written as VTK")->delimiter(',');
    solve->add_flag("--monotone-gamma", config.monotone_gamma, "Accept only predicted-decreasing gamma10 updates");
    solve->add_option("--eta-floor", config.eta_floor, "Stop after a converged level with eta below this")
        ->capture_default_str();
    solve->add_option("--gamma-init", gamma_init, "Initial gamma10 (default gamma_max)");
    solve->add_option("--delta-init", delta_init, "Initial delta (default 1/gamma_max)");
    solve->add_flag("--quiet", quiet, "No per-level progress");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }
    config.gamma_max_override = gamma_max;
    config.initial_gamma10 = gamma_init;
    config.initial_delta = delta_init;

    try {
        return run_solve(config, quiet);
    } catch (const ptreg::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
}
