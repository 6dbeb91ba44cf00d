#pragma once

#include <ptreg/assembly.hpp>
#include <ptreg/controller.hpp>
#include <ptreg/error.hpp>
#include <ptreg/estimator.hpp>
#include <ptreg/mesh.hpp>
#include <ptreg/problems.hpp>
#include <ptreg/vtk.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace ptreg {

struct RunConfig {
    std::string problem_name = "ex2";
    std::optional<double> gamma_max_override;
    double q = 0.865;
    double tol = 1e-7;
    int max_levels = 40;
    double theta = 0.5;
    int quad_degree = 4;
    std::string out_dir = "out";
    std::vector<int> export_levels;
    bool monotone_gamma = false;
    /// Stop after a converged level whose estimator is below this (0 disables).
    double eta_floor = 0.0;
    /// Overrides for the start values gamma10 = gamma_max and delta = 1/gamma_max.
    std::optional<double> initial_gamma10;
    std::optional<double> initial_delta;

    void validate() const
    {
        if (!(q > 0.0 && q < 1.0))
            throw ConfigError("q must lie in (0, 1)");
        if (!(theta > 0.0 && theta <= 1.0))
            throw ConfigError("theta must lie in (0, 1]");
        if (!(tol > 0.0))
            throw ConfigError("tol must be positive");
        if (max_levels < 0)
            throw ConfigError("max_levels must be nonnegative");
        if (gamma_max_override && !(*gamma_max_override > 1.0))
            throw ConfigError("gamma_max must exceed 1");
        if (!(eta_floor >= 0.0))
            throw ConfigError("eta_floor must be nonnegative");
        if (quad_degree < 1 || quad_degree > 6)
            throw ConfigError("quad_degree must lie in 1..6");
    }
};

struct LevelRow {
    int level = 0;
    Index dof = 0;
    int iterations = 0;
    ExitReason exit = ExitReason::Failed;
    double r_norm = 0.0;
    double gamma10 = 0.0;
    double gamma01 = 0.0;
    double sigma01 = 0.0;
    double alpha = 0.0;
    double alpha_Rw = 0.0;
    double delta = 0.0;
    double eta = 0.0;
    double l2_error = std::numeric_limits<double>::quiet_NaN();
    double h1_error = std::numeric_limits<double>::quiet_NaN();
};

struct LevelIteration {
    int level = 0;
    IterationRecord record;
};

struct LevelSnapshot {
    int level = 0;
    Mesh mesh;
    std::vector<double> solution;
    std::vector<double> eta_sq;
};

struct RunSummary {
    std::vector<LevelRow> levels;
    std::vector<LevelIteration> iterations;
    std::vector<LevelSnapshot> snapshots;
    double gamma_max = 0.0;
    double eps_T = 0.0;
    double gamma_mono = 0.0;
    double wall_seconds = 0.0;
    bool aborted = false;
    std::string abort_reason;
};

/// Outer adaptive loop: solve on the level, update delta, estimate, mark,
/// refine and transfer the terminal iterate. A failed level is recorded and
/// refined anyway; two consecutive failures abort the run.
inline RunSummary run(const RunConfig& config, const std::function<void(const LevelRow&)>& on_level = {})
{
    config.validate();
    const auto start = std::chrono::steady_clock::now();
    ProblemSpec problem = problem_by_name(config.problem_name);
    if (config.gamma_max_override)
        problem.gamma_max = *config.gamma_max_override;
    const QuadratureRule rule = quadrature_rule(config.quad_degree);

    RegParams params = RegParams::initial(problem.gamma_max, config.q);
    if (config.initial_gamma10)
        params.gamma10 = *config.initial_gamma10;
    if (config.initial_delta)
        params.delta = *config.initial_delta;
    params.validate();

    RunSummary summary;
    summary.gamma_max = problem.gamma_max;
    summary.eps_T = params.eps_T();
    summary.gamma_mono = params.gamma_mono();

    LevelOptions options;
    options.tol = config.tol;
    options.monotone_gamma = config.monotone_gamma;

    Mesh mesh = uniform_initial_mesh();
    std::vector<double> nodal(static_cast<std::size_t>(mesh.vertex_count()), 0.0);
    std::optional<double> r_prev_level;
    int consecutive_failed = 0;

    for (int k = 0; k < config.max_levels; ++k) {
        const FeSpace space(mesh);
        const Discretization disc{space, problem, rule};
        const Vector u0 = space.restrict_to_dofs(nodal);
        const double delta_used = params.delta;
        LevelResult level = solve_level(disc, params, u0, r_prev_level, options);

        for (const auto& rec : level.records)
            summary.iterations.push_back({k, rec});

        params = level.terminal_params;
        const bool accepted = level.exit != ExitReason::Failed;
        if (params.delta < 1.0 && accepted && level.last_step) {
            const Vector fQ = assemble_fQ(space, rule, problem.source);
            params.delta = std::max(update_delta(*level.last_step, fQ, params, level.gamma_updates),
                                    std::numeric_limits<double>::min());
        }

        const IndicatorField indicators = element_indicators(space, level.terminal_u, problem, rule);
        LevelRow row;
        row.level = k;
        row.dof = space.dof_count();
        row.iterations = static_cast<int>(level.records.size());
        row.exit = level.exit;
        row.r_norm = level.terminal_residual_norm;
        row.gamma10 = level.terminal_params.gamma10;
        row.gamma01 = level.terminal_params.gamma01();
        row.sigma01 = level.terminal_params.sigma01;
        row.alpha = level.terminal_params.alpha;
        row.alpha_Rw = level.records.empty() ? 0.0 : level.records.back().alpha_Rw;
        row.delta = delta_used;
        row.eta = global_estimator(indicators);
        if (problem.exact) {
            const ErrorNorms err = error_norms(space, level.terminal_u, problem.exact);
            row.l2_error = err.l2;
            row.h1_error = err.h1;
        }
        summary.levels.push_back(row);
        if (on_level)
            on_level(row);

        nodal = space.expand(level.terminal_u);
        if (std::find(config.export_levels.begin(), config.export_levels.end(), k) != config.export_levels.end())
            summary.snapshots.push_back({k, mesh, nodal, indicators.eta_sq});

        r_prev_level = level.terminal_residual_norm;
        consecutive_failed = accepted ? 0 : consecutive_failed + 1;
        if (consecutive_failed >= 2) {
            summary.aborted = true;
            summary.abort_reason = "two consecutive failed levels (" + std::to_string(k - 1) + ", " +
                                   std::to_string(k) + ")" +
                                   (level.diagnostic.empty() ? std::string() : ": " + level.diagnostic);
            break;
        }
        if (level.exit == ExitReason::Converged && row.eta < config.eta_floor)
            break;
        if (k + 1 == config.max_levels)
            break;

        const auto marked = mark_dorfler(indicators.eta_sq, config.theta);
        Mesh fine = refine(mesh, marked);
        nodal = interpolate_p1(nodal, mesh, fine);
        mesh = std::move(fine);
    }
    summary.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return summary;
}

namespace detail {

inline std::string fmt_double(double v)
{
    if (std::isnan(v))
        return "nan";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline void write_atomic(const std::filesystem::path& path, const std::string& content)
{
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os)
            throw Error("cannot open " + tmp.string() + " for writing");
        os << content;
        os.flush();
        if (!os)
            throw Error("write failed for " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec)
        throw Error("cannot move " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

} // namespace detail

inline const char* levels_csv_header()
{
    return "level,dof,iterations,exit,r_norm,gamma10,gamma01,sigma01,alpha,alpha_Rw,delta,eta,l2_error,h1_error";
}

inline const char* iterations_csv_header()
{
    return "level,n,r_norm,beta,gamma10,gamma01,sigma01,alpha,alpha_Rw,delta,w_norm,lin_norm,fl_estimate,exit_flag";
}

inline std::string levels_csv(const RunSummary& s)
{
    using detail::fmt_double;
    std::ostringstream os;
    os << levels_csv_header() << '\n';
    for (const auto& r : s.levels) {
        os << r.level << ',' << r.dof << ',' << r.iterations << ',' << to_string(r.exit) << ','
           << fmt_double(r.r_norm) << ',' << fmt_double(r.gamma10) << ',' << fmt_double(r.gamma01) << ','
           << fmt_double(r.sigma01) << ',' << fmt_double(r.alpha) << ',' << fmt_double(r.alpha_Rw) << ','
           << fmt_double(r.delta) << ',' << fmt_double(r.eta) << ',' << fmt_double(r.l2_error) << ','
           << fmt_double(r.h1_error) << '\n';
    }
    return os.str();
}

inline std::string iterations_csv(const RunSummary& s)
{
    using detail::fmt_double;
    std::ostringstream os;
    os << iterations_csv_header() << '\n';
    for (const auto& [level, r] : s.iterations) {
        os << level << ',' << r.n << ',' << fmt_double(r.residual_norm) << ',' << fmt_double(r.beta) << ','
           << fmt_double(r.gamma10) << ',' << fmt_double(r.gamma01) << ',' << fmt_double(r.sigma01) << ','
           << fmt_double(r.alpha) << ',' << fmt_double(r.alpha_Rw) << ',' << fmt_double(r.delta) << ','
           << fmt_double(r.step_norm) << ',' << fmt_double(r.lin_norm) << ',' << fmt_double(r.fl_estimate) << ','
           << (r.exit ? to_string(*r.exit) : "none") << '\n';
    }
    return os.str();
}

/// Resolved configuration as a TOML [solve] section, readable back with --config.
inline std::string config_echo(const RunConfig& c, const RunSummary& s)
{
    using detail::fmt_double;
    std::ostringstream os;
    os << "[solve]\n";
    os << "problem = " << c.problem_name << '\n';
    os << "gamma-max = " << fmt_double(s.gamma_max) << '\n';
    os << "q = " << fmt_double(c.q) << '\n';
    os << "tol = " << fmt_double(c.tol) << '\n';
    os << "theta = " << fmt_double(c.theta) << '\n';
    os << "max-levels = " << c.max_levels << '\n';
    os << "quad-degree = " << c.quad_degree << '\n';
    if (!c.export_levels.empty()) {
        os << "export-levels = [";
        for (std::size_t i = 0; i < c.export_levels.size(); ++i)
            os << (i ? ", " : "") << c.export_levels[i];
        os << "]\n";
    }
    os << "monotone-gamma = " << (c.monotone_gamma ? "true" : "false") << '\n';
    os << "eta-floor = " << fmt_double(c.eta_floor) << '\n';
    if (c.initial_gamma10)
        os << "gamma-init = " << fmt_double(*c.initial_gamma10) << '\n';
    if (c.initial_delta)
        os << "delta-init = " << fmt_double(*c.initial_delta) << '\n';
    os << "# derived: eps_T = " << fmt_double(s.eps_T) << ", gamma_mono = " << fmt_double(s.gamma_mono) << '\n';
    return os.str();
}

/// Writes levels.csv, iterations.csv, config.echo and level_<k>.vtk for each snapshot.
inline void write_outputs(const RunConfig& config, const RunSummary& summary, const std::filesystem::path& out_dir)
{
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec)
        throw Error("cannot create output directory " + out_dir.string() + ": " + ec.message());
    detail::write_atomic(out_dir / "levels.csv", levels_csv(summary));
    detail::write_atomic(out_dir / "iterations.csv", iterations_csv(summary));
    detail::write_atomic(out_dir / "config.echo", config_echo(config, summary));
    for (const auto& snap : summary.snapshots) {
        std::ostringstream os;
        write_vtk(os, snap.mesh, {{"u", snap.solution}}, {{"eta_sq", snap.eta_sq}},
                  "level " + std::to_string(snap.level));
        detail::write_atomic(out_dir / ("level_" + std::to_string(snap.level) + ".vtk"), os.str());
    }
}

} // namespace ptreg
