#pragma once

#include <ptreg/assembly.hpp>
#include <ptreg/error.hpp>
#include <ptreg/problems.hpp>
#include <ptreg/quadrature.hpp>

#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace ptreg {

/// Regularization state of the pseudo-time iteration.
///
/// gamma10 is the numerical dissipation (Newmark) weight on the Jacobian term,
/// sigma01 the extra Picard-like weight on A2'(u), alpha the Tikhonov-like
/// scale of R and delta the source scaling. q and gamma_max are user-set and
/// fix the rate tolerance eps_T = q / gamma_max and the threshold
/// gamma_mono = gamma_max (1/q - 1) below which gamma10 updates are monotone.
struct RegParams {
    double gamma10 = 1.0;
    double sigma01 = 0.0;
    double alpha = 0.0;
    double delta = 1.0;
    double q = 0.865;
    double gamma_max = 2.0;

    double gamma01() const { return gamma10 * (1.0 + sigma01); }
    double eps_T() const { return q / gamma_max; }
    double gamma_mono(double qbar = 1.0) const { return (1.0 / eps_T()) * (1.0 - q / qbar); }

    /// Start of a run: gamma10 = gamma_max, delta = 1 / gamma_max, sigma01 = 0.
    static RegParams initial(double gamma_max, double q)
    {
        RegParams p;
        p.gamma_max = gamma_max;
        p.q = q;
        p.gamma10 = gamma_max;
        p.delta = 1.0 / gamma_max;
        p.validate();
        return p;
    }

    void validate() const
    {
        if (!(q > 0.0 && q < 1.0))
            throw ConfigError("q must lie in (0, 1)");
        if (!(gamma_max > 1.0))
            throw ConfigError("gamma_max must exceed 1");
        if (!(gamma10 >= 1.0 && gamma10 <= gamma_max))
            throw ConfigError("gamma10 must lie in [1, gamma_max]");
        if (!(sigma01 >= 0.0) || !(alpha >= 0.0))
            throw ConfigError("sigma01 and alpha must be nonnegative");
        if (!(delta > 0.0 && delta <= 1.0))
            throw ConfigError("delta must lie in (0, 1]");
    }
};

enum class ExitReason { CoarseAccept, PreasymptoticAccept, Converged, Failed };

inline const char* to_string(ExitReason e)
{
    switch (e) {
    case ExitReason::CoarseAccept:
        return "coarse";
    case ExitReason::PreasymptoticAccept:
        return "preasymptotic";
    case ExitReason::Converged:
        return "converged";
    case ExitReason::Failed:
        return "failed";
    }
    return "?";
}

/// One completed step n, which produced r^{n+1}. Parameter fields hold the
/// state after the updates made on this step; `gamma_step` is the gamma10
/// that was used to compute it.
struct IterationRecord {
    int n = 0;
    double residual_norm = 0.0;
    double beta = 0.0;
    double gamma_step = 1.0;
    double gamma10 = 1.0;
    double gamma01 = 1.0;
    double sigma01 = 0.0;
    double alpha = 0.0;
    double alpha_Rw = 0.0;
    double delta = 1.0;
    double step_norm = 0.0;
    double lin_norm = 0.0;
    double fl_estimate = 0.0;
    bool gamma_updated = false;
    std::optional<ExitReason> exit;
};

/// Quantities of the terminal step needed by the delta update.
struct LastStep {
    Vector Rw;
    Vector Auu;      // A(u^n; u^n)
    Vector Auu_next; // A(u^{n+1}; u^{n+1})
    Vector Aw;       // A(u^n; w^n)
    double alpha = 0.0;
    double gamma10 = 1.0;
    double sigma01 = 0.0;
};

struct LevelResult {
    Vector terminal_u;
    std::vector<IterationRecord> records;
    ExitReason exit = ExitReason::Failed;
    RegParams terminal_params;
    double terminal_residual_norm = 0.0;
    double initial_residual_norm = 0.0;
    int gamma_updates = 0;
    int itmax = 0;
    std::optional<LastStep> last_step;
    std::string diagnostic;
};

/// Everything needed to assemble on one mesh level.
struct Discretization {
    const FeSpace& space;
    const ProblemSpec& problem;
    QuadratureRule rule;
};

struct StepResult {
    Vector w;
    Vector u_next;
    Vector r_next;
    SparseMatrix A2p_next;
    Vector Auu_next;
};

/// M^n = (alpha/gamma10) R + A1'(u^n; u^n) + (1 + sigma01) A2'(u^n).
inline SparseMatrix iteration_matrix(const AssembledOperators& ops, const RegParams& p)
{
    return (p.alpha / p.gamma10) * (*ops.R) + ops.A1p + (1.0 + p.sigma01) * ops.A2p;
}

/// Sparse LU solve of a general (nonsymmetric) system, with one step of
/// iterative refinement when the relative residual exceeds 1e-12.
inline Vector solve_sparse(const SparseMatrix& M, const Vector& rhs)
{
    if (rhs.size() == 0)
        return rhs;
    Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>> lu;
    lu.analyzePattern(M);
    lu.factorize(M);
    if (lu.info() != Eigen::Success)
        throw LinearSolveError("sparse LU factorization failed: " + lu.lastErrorMessage());
    Vector w = lu.solve(rhs);
    if (lu.info() != Eigen::Success || !w.allFinite())
        throw LinearSolveError("sparse LU solve produced a non-finite step");
    const double bnorm = rhs.norm();
    if (bnorm > 0.0) {
        const Vector res = rhs - M * w;
        if (res.norm() > 1e-12 * bnorm) {
            w += lu.solve(res);
            if (!w.allFinite())
                throw LinearSolveError("iterative refinement produced a non-finite step");
        }
    }
    return w;
}

/// Solves M^n w = r^n / gamma10 and evaluates the new residual with freshly
/// assembled operators.
inline StepResult newton_step(const Discretization& disc, const AssembledOperators& ops, const Vector& u,
                              const Vector& r, const RegParams& p)
{
    StepResult s;
    s.w = solve_sparse(iteration_matrix(ops, p), r / p.gamma10);
    s.u_next = u + s.w;
    s.A2p_next = assemble_A2p(disc.space, disc.problem.law, disc.rule, s.u_next);
    s.Auu_next = s.A2p_next * s.u_next;
    s.r_next = p.delta * (*ops.fQ) - s.Auu_next;
    return s;
}

/// Gate for the gamma10 update: gamma10 > 1, the rate has settled
/// (|beta - beta_prev| <= eps_T), it matches the predicted rate
/// (|beta - (1 - 1/gamma10)| < eps_T), and gamma10 was not changed on the
/// previous two steps.
inline bool gamma10_update_allowed(double beta, double beta_prev, double gamma_n, double gamma_n_minus_2,
                                   double eps_T)
{
    return gamma_n > 1.0 && std::abs(beta - beta_prev) <= eps_T &&
           std::abs(beta - (1.0 - 1.0 / gamma_n)) < eps_T && gamma_n == gamma_n_minus_2;
}

/// gamma10 <- max{1, q ||r^n||^2 / <r^n, r^n - r^{n+1}>}; gamma_max when the
/// inner product carries no rate information (<= 0).
inline double update_gamma10(const Vector& r_n, const Vector& r_next, const RegParams& p)
{
    const double rr = r_n.squaredNorm();
    if (rr == 0.0)
        return p.gamma10;
    const double denom = r_n.dot(r_n - r_next);
    if (!(denom > 0.0))
        return p.gamma_max;
    return std::min(p.gamma_max, std::max(1.0, p.q * rr / denom));
}

/// Sufficient condition for the next gamma10 update to satisfy
/// gamma_new < qbar gamma10 or gamma_new = 1.
inline bool predict_gamma_decrease(double beta_observed, double gamma10, double q, double qbar = 1.0)
{
    const double excess = beta_observed - (1.0 - 1.0 / gamma10);
    return excess < (1.0 / gamma10) * (1.0 - q / qbar);
}

/// Projection of the (estimated) linearization error onto -A(u^{n+1}; w^n),
/// clamped at zero so the Picard-like term only adds diffusion.
inline double update_sigma01(const Vector& r_next, const Vector& r_n, const Vector& Rw, const Vector& Aw_next,
                             const RegParams& p)
{
    const double aa = Aw_next.squaredNorm();
    if (aa == 0.0)
        return p.sigma01;
    const Vector bracket = -r_next + (1.0 - 1.0 / p.gamma10) * r_n + (p.alpha / p.gamma10) * Rw + p.sigma01 * Aw_next;
    return std::max(0.0, bracket.dot(Aw_next) / aa);
}

inline double update_alpha(const Vector& r_next, const Vector& r_n, const Vector& Rw, const RegParams& p)
{
    const double rw = Rw.norm();
    if (rw == 0.0)
        return 0.0;
    const double mismatch = (r_next - (1.0 - 1.0 / p.gamma10) * r_n - (p.alpha / p.gamma10) * Rw).norm();
    return (p.gamma10 / rw) * std::min(mismatch, 0.5 * p.eps_T() * r_next.norm());
}

/// q_k = min{q^P, q^(1 + 1/gamma10)} for P gamma10 updates on the level.
inline double delta_reduction_factor(double q, int gamma_updates, double gamma10)
{
    return std::min(std::pow(q, gamma_updates), std::pow(q, 1.0 + 1.0 / gamma10));
}

/// delta for the next level: the least-squares fit of the linearized
/// residual along f_Q, divided by q_k and clamped at one. `p` carries the
/// terminal state of the level (current delta, q, gamma10).
inline double update_delta(const LastStep& last, const Vector& fQ, const RegParams& p, int gamma_updates)
{
    const double ff = fQ.squaredNorm();
    if (ff == 0.0)
        return p.delta;
    const Vector target = last.alpha * last.Rw + last.gamma10 * (last.Auu_next - last.Auu) +
                          last.sigma01 * last.gamma10 * last.Aw + last.Auu;
    const double fit = fQ.dot(target) / ff;
    const double qk = delta_reduction_factor(p.q, gamma_updates, p.gamma10);
    return std::min(fit / qk, 1.0);
}

struct ExitCheck {
    int n = 0;
    double r_n_norm = 0.0;    // ||r^n||
    double r_next_norm = 0.0; // ||r^{n+1}||
    double beta = 0.0;        // ||r^{n+1}|| / ||r^n||
    std::optional<double> beta_prev;
    double gamma10 = 1.0; // value used on step n
    double r0_norm = 0.0;
    double r_prev_level_norm = 0.0;
    double tol = 1e-7;
    int itmax = 20;
    double eps_T = 0.0;
    double gamma_mono = 0.0;
};

/// Exit criteria; priority converged, coarse, preasymptotic, failed.
inline std::optional<ExitReason> check_exit(const ExitCheck& c)
{
    if (c.r_next_norm <= c.tol)
        return ExitReason::Converged;
    const double predicted = 1.0 - 1.0 / c.gamma10;
    if (c.beta_prev) {
        const double drift = std::abs(c.beta - *c.beta_prev);
        if (c.gamma10 > c.gamma_mono && drift <= c.eps_T && std::abs(c.beta - predicted) < c.eps_T && c.n > 2)
            return ExitReason::CoarseAccept;
        if (c.gamma10 <= c.gamma_mono && c.r_next_norm < c.r_n_norm && c.r_n_norm <= std::min(c.r0_norm, c.r_prev_level_norm) &&
            c.beta < 1.0 - 1.0 / (2.0 * c.gamma10) && drift <= 0.5 * c.eps_T)
            return ExitReason::PreasymptoticAccept;
    }
    if (!(c.beta <= 1.0 + 1.0 / c.gamma10) || c.n > c.itmax)
        return ExitReason::Failed;
    return std::nullopt;
}

/// Iteration cap for residual reduction from ||r^0|| to ||r_{k-1}|| at the
/// accepted rate 1 - 1/(2 gamma10); the default applies when gamma10 = 1 or
/// the target is already met.
inline int compute_itmax(double r_prev_level_norm, double r0_norm, double gamma10, int default_itmax = 20)
{
    if (!(gamma10 > 1.0) || !(r_prev_level_norm > 0.0) || !(r0_norm > 0.0))
        return default_itmax;
    const double numer = std::log(r_prev_level_norm) - std::log(r0_norm);
    if (numer >= 0.0)
        return default_itmax;
    const double steps = std::ceil(numer / std::log(1.0 - 1.0 / (2.0 * gamma10)));
    if (!(steps < 1e9))
        return std::numeric_limits<int>::max() / 2;
    return 1 + static_cast<int>(steps);
}

/// lin(u^n) = -(A(u^{n+1}; u^{n+1}) - A(u^n; u^{n+1}) - A1'(u^n; u^n) w^n).
inline Vector linearization_error_direct(const Vector& Auu_next, const SparseMatrix& A2p_n, const Vector& u_next,
                                         const SparseMatrix& A1p_n, const Vector& w)
{
    return -(Auu_next - A2p_n * u_next - A1p_n * w);
}

/// lin(u^n) + fl isolated from the residual representation.
inline Vector linearization_error_representation(const Vector& r_next, const Vector& r_n, const Vector& Rw,
                                                 const Vector& Aw_n, const RegParams& p)
{
    return r_next - (1.0 - 1.0 / p.gamma10) * r_n - (p.alpha / p.gamma10) * Rw - p.sigma01 * Aw_n;
}

/// Floating-point error estimate: distance between the two evaluations of lin(u^n).
inline double estimate_fl(const Vector& lin_direct, const Vector& lin_representation)
{
    return (lin_direct - lin_representation).norm();
}

struct LevelOptions {
    double tol = 1e-7;
    int default_itmax = 20;
    /// Reject gamma10 updates the decrease predictor cannot vouch for.
    bool monotone_gamma = false;
    double qbar = 1.0;
};

/// Regularized iteration on one mesh level until an exit criterion fires.
/// `params` enters with gamma10, sigma01 and delta carried from the previous
/// level; alpha is reset to ||r^0||. `r_prev_level_norm` is the terminal
/// residual norm of the previous level (absent on level 0).
inline LevelResult solve_level(const Discretization& disc, RegParams params, const Vector& u0,
                               std::optional<double> r_prev_level_norm, const LevelOptions& opt = {})
{
    const FeSpace& space = disc.space;
    const DiffusionLaw& law = disc.problem.law;

    LevelResult res;
    const SparseMatrix R = assemble_R(space, disc.rule, disc.problem.beta, u0);
    const Vector fQ = assemble_fQ(space, disc.rule, disc.problem.source);

    AssembledOperators ops;
    ops.R = &R;
    ops.fQ = &fQ;
    ops.A2p = assemble_A2p(space, law, disc.rule, u0);
    ops.Auu = ops.A2p * u0;

    Vector u = u0;
    Vector r = residual(ops.A2p, u, fQ, params.delta);
    const double r0 = r.norm();
    const double r_prev_level = r_prev_level_norm.value_or(r0);
    params.alpha = r0;
    res.initial_residual_norm = r0;
    res.itmax = compute_itmax(r_prev_level, r0, params.gamma10, opt.default_itmax);

    // Lowest-residual state seen so far; a failed level hands this back instead of the last iterate.
    Vector best_u = u;
    RegParams best_params = params;
    double best_norm = r0;

    auto finish = [&](ExitReason why) {
        res.exit = why;
        if (why == ExitReason::Failed && !(r.norm() <= best_norm)) {
            res.terminal_u = best_u;
            res.terminal_params = best_params;
            res.terminal_residual_norm = best_norm;
        } else {
            res.terminal_u = u;
            res.terminal_params = params;
            res.terminal_residual_norm = r.norm();
        }
        return res;
    };

    if (!std::isfinite(r0)) {
        res.diagnostic = "non-finite initial residual";
        return finish(ExitReason::Failed);
    }
    if (r0 <= opt.tol)
        return finish(ExitReason::Converged);

    std::vector<double> gamma_history;
    std::optional<double> beta_prev;
    for (int n = 0;; ++n) {
        const RegParams step = params;
        gamma_history.push_back(step.gamma10);
        ops.A1p = assemble_A1p(space, law, disc.rule, u);

        StepResult s;
        try {
            s = newton_step(disc, ops, u, r, step);
        } catch (const LinearSolveError& e) {
            res.diagnostic = std::string("step ") + std::to_string(n) + ": " + e.what();
            return finish(ExitReason::Failed);
        } catch (const AssemblyError& e) {
            res.diagnostic = std::string("step ") + std::to_string(n) + ": " + e.what();
            return finish(ExitReason::Failed);
        }
        const double r_norm = r.norm();
        const double r_next_norm = s.r_next.norm();
        if (!std::isfinite(r_next_norm)) {
            res.diagnostic = "non-finite residual at step " + std::to_string(n);
            return finish(ExitReason::Failed);
        }
        const double beta = r_next_norm / r_norm;

        const Vector Rw = R * s.w;
        const Vector Aw_n = ops.A2p * s.w;
        const Vector Aw_next = s.A2p_next * s.w;
        const Vector lin = linearization_error_direct(s.Auu_next, ops.A2p, s.u_next, ops.A1p, s.w);
        const Vector lin_rep = linearization_error_representation(s.r_next, r, Rw, Aw_n, step);

        IterationRecord rec;
        rec.n = n;
        rec.residual_norm = r_next_norm;
        rec.beta = beta;
        rec.gamma_step = step.gamma10;
        rec.delta = step.delta;
        rec.step_norm = s.w.norm();
        rec.lin_norm = lin.norm();
        rec.fl_estimate = estimate_fl(lin, lin_rep);

        if (n >= 2 && beta_prev &&
            gamma10_update_allowed(beta, *beta_prev, step.gamma10, gamma_history[static_cast<std::size_t>(n - 2)],
                                   step.eps_T()) &&
            (!opt.monotone_gamma || predict_gamma_decrease(beta, step.gamma10, step.q, opt.qbar))) {
            params.gamma10 = update_gamma10(r, s.r_next, step);
            rec.gamma_updated = true;
            ++res.gamma_updates;
        }
        params.sigma01 = update_sigma01(s.r_next, r, Rw, Aw_next, step);
        params.alpha = update_alpha(s.r_next, r, Rw, step);

        ExitCheck check;
        check.n = n;
        check.r_n_norm = r_norm;
        check.r_next_norm = r_next_norm;
        check.beta = beta;
        check.beta_prev = beta_prev;
        check.gamma10 = step.gamma10;
        check.r0_norm = r0;
        check.r_prev_level_norm = r_prev_level;
        check.tol = opt.tol;
        check.itmax = res.itmax;
        check.eps_T = step.eps_T();
        check.gamma_mono = step.gamma_mono();
        const auto exit = check_exit(check);

        rec.gamma10 = params.gamma10;
        rec.gamma01 = params.gamma01();
        rec.sigma01 = params.sigma01;
        rec.alpha = params.alpha;
        rec.alpha_Rw = params.alpha * Rw.norm();
        rec.exit = exit;
        res.records.push_back(rec);

        res.last_step = LastStep{Rw, ops.Auu, s.Auu_next, Aw_n, step.alpha, step.gamma10, step.sigma01};

        u = std::move(s.u_next);
        r = std::move(s.r_next);
        ops.A2p = std::move(s.A2p_next);
        ops.Auu = std::move(s.Auu_next);
        beta_prev = beta;
        if (r_next_norm < best_norm) {
            best_u = u;
            best_params = params;
            best_norm = r_next_norm;
        }
        if (exit)
            return finish(*exit);
    }
}

} // namespace ptreg
