#pragma once

#include <ptreg/error.hpp>
#include <ptreg/mesh.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>

namespace ptreg {

/// Diagonal 2x2 matrix, used for the diffusion tensor and related weights.
struct Diag2 {
    double xx = 0.0;
    double yy = 0.0;
};

using ScalarLaw = std::function<double(double)>;
using SpatialFunction = std::function<double(double, double)>;

/// kappa(s) = diag(kappa11(s), kappa22(s)) with its entrywise derivative.
struct DiffusionLaw {
    ScalarLaw kappa11;
    ScalarLaw kappa22;
    ScalarLaw dkappa11;
    ScalarLaw dkappa22;

    Diag2 kappa(double s) const { return {kappa11(s), kappa22(s)}; }
    Diag2 dkappa(double s) const { return {dkappa11(s), dkappa22(s)}; }

    static DiffusionLaw isotropic(ScalarLaw k, ScalarLaw dk)
    {
        return {k, k, dk, dk};
    }
};

struct ExactSolution {
    SpatialFunction value;
    std::function<Point(double, double)> gradient;
};

struct ProblemSpec {
    std::string name;
    DiffusionLaw law;
    SpatialFunction source;
    /// Regularization weight as a function of the level-initial iterate value.
    std::function<Diag2(double)> beta;
    double gamma_max = 2.0;
    std::optional<ExactSolution> exact;
    /// Interval used when sampling the law for sanity checks.
    double sample_lo = -10.0;
    double sample_hi = 10.0;
};

namespace detail {

inline ProblemSpec checked(ProblemSpec p)
{
    if (!(p.gamma_max > 1.0))
        throw Error("problem '" + p.name + "': gamma_max must exceed 1");
    return p;
}

} // namespace detail

/// Anisotropic law with a kink in kappa' at s = a.
inline ProblemSpec example1()
{
    constexpr double a = 0.5;
    constexpr double k = 2.0;
    constexpr double eps1 = 4e-4;
    constexpr double eps2 = 4e-2;

    auto kappa = [=](double eps) {
        return [=](double s) {
            const double t = s - a;
            return k + std::tanh(std::copysign(t * t, t) / eps);
        };
    };
    // d/ds [ t^2 sign(t) ] = 2|t|; the right and left limits agree at t = 0.
    auto dkappa = [=](double eps) {
        return [=](double s) {
            const double t = s - a;
            const double th = std::tanh(std::copysign(t * t, t) / eps);
            return (1.0 - th * th) * 2.0 * std::abs(t) / eps;
        };
    };

    ProblemSpec p;
    p.name = "ex1";
    p.law = {kappa(eps1), kappa(eps2), dkappa(eps1), dkappa(eps2)};
    p.source = [](double x, double y) {
        return 2.0 * (1.0 - x) * (1.0 - y) * std::expm1(6.0 * x * x) * std::expm1(6.0 * y * y);
    };
    const DiffusionLaw law = p.law;
    p.beta = [law](double u0) {
        return Diag2{1.0 + std::abs(law.dkappa11(u0)), 1.0 + std::abs(law.dkappa22(u0))};
    };
    p.gamma_max = 5.0;
    return detail::checked(std::move(p));
}

/// Thin diffusion layer at s = a with a manufactured smooth solution.
inline ProblemSpec example2()
{
    constexpr double a = 0.5;
    constexpr double k = 1.0;
    constexpr double eps = 1e-5;

    auto kappa = [=](double s) {
        const double t = s - a;
        return k + 1.0 / (eps + t * t);
    };
    auto dkappa = [=](double s) {
        const double t = s - a;
        const double d = eps + t * t;
        return -2.0 * t / (d * d);
    };

    ProblemSpec p;
    p.name = "ex2";
    p.law = DiffusionLaw::isotropic(kappa, dkappa);
    p.exact = ExactSolution{
        [](double x, double y) { return std::sin(M_PI * x) * std::sin(M_PI * y); },
        [](double x, double y) {
            return Point{M_PI * std::cos(M_PI * x) * std::sin(M_PI * y),
                         M_PI * std::sin(M_PI * x) * std::cos(M_PI * y)};
        }};
    // -div(kappa(u) grad u) = -kappa'(u) |grad u|^2 - kappa(u) lap u, lap u = -2 pi^2 u
    p.source = [=](double x, double y) {
        const double sx = std::sin(M_PI * x);
        const double sy = std::sin(M_PI * y);
        const double ux = M_PI * std::cos(M_PI * x) * sy;
        const double uy = M_PI * sx * std::cos(M_PI * y);
        const double u = sx * sy;
        return -dkappa(u) * (ux * ux + uy * uy) + 2.0 * M_PI * M_PI * kappa(u) * u;
    };
    p.beta = [](double) { return Diag2{1.0, 1.0}; };
    p.gamma_max = 0.5 * std::sqrt(3.0) / std::sqrt(eps);
    p.sample_lo = 0.0;
    p.sample_hi = 1.0;
    return detail::checked(std::move(p));
}

/// Constant isotropic diffusion with exact solution sin(pi x) sin(pi y).
inline ProblemSpec linear_problem(double kappa = 1.0, double gamma_max = 2.0)
{
    ProblemSpec p;
    p.name = "linear";
    p.law = DiffusionLaw::isotropic([kappa](double) { return kappa; }, [](double) { return 0.0; });
    p.exact = ExactSolution{
        [](double x, double y) { return std::sin(M_PI * x) * std::sin(M_PI * y); },
        [](double x, double y) {
            return Point{M_PI * std::cos(M_PI * x) * std::sin(M_PI * y),
                         M_PI * std::sin(M_PI * x) * std::cos(M_PI * y)};
        }};
    p.source = [kappa](double x, double y) {
        return 2.0 * M_PI * M_PI * kappa * std::sin(M_PI * x) * std::sin(M_PI * y);
    };
    p.beta = [](double) { return Diag2{1.0, 1.0}; };
    p.gamma_max = gamma_max;
    return detail::checked(std::move(p));
}

inline ProblemSpec problem_by_name(const std::string& name)
{
    if (name == "ex1")
        return example1();
    if (name == "ex2")
        return example2();
    if (name == "linear")
        return linear_problem();
    throw ConfigError("unknown problem '" + name + "' (expected ex1, ex2 or linear)");
}

struct LawComponentReport {
    double min_kappa = std::numeric_limits<double>::infinity();
    double max_kappa = -std::numeric_limits<double>::infinity();
    double max_abs_dkappa = 0.0;
    double lipschitz_kappa = 0.0;
    double lipschitz_dkappa = 0.0;
    /// Largest jump between consecutive difference quotients of kappa', and where it occurs.
    /// A kink keeps this O(1) under sampling refinement; smooth laws make it O(h).
    double max_slope_jump = 0.0;
    double slope_jump_location = 0.0;
    bool dkappa_kink = false;
};

struct LawReport {
    LawComponentReport xx;
    LawComponentReport yy;
};

namespace detail {

inline LawComponentReport sample_component(const ScalarLaw& k, const ScalarLaw& dk, double lo, double hi,
                                           long samples)
{
    LawComponentReport rep;
    const double h = (hi - lo) / static_cast<double>(samples - 1);
    double prev_k = 0.0;
    double prev_dk = 0.0;
    double prev_slope = 0.0;
    for (long i = 0; i < samples; ++i) {
        const double s = lo + h * static_cast<double>(i);
        const double kv = k(s);
        const double dv = dk(s);
        if (!std::isfinite(kv) || !std::isfinite(dv))
            throw Error("diffusion law is not finite at s = " + std::to_string(s));
        if (!(kv > 0.0))
            throw Error("diffusion law is not positive at s = " + std::to_string(s));
        rep.min_kappa = std::min(rep.min_kappa, kv);
        rep.max_kappa = std::max(rep.max_kappa, kv);
        rep.max_abs_dkappa = std::max(rep.max_abs_dkappa, std::abs(dv));
        if (i > 0) {
            rep.lipschitz_kappa = std::max(rep.lipschitz_kappa, std::abs(kv - prev_k) / h);
            const double slope = (dv - prev_dk) / h;
            rep.lipschitz_dkappa = std::max(rep.lipschitz_dkappa, std::abs(slope));
            if (i > 1 && std::abs(slope - prev_slope) > rep.max_slope_jump) {
                rep.max_slope_jump = std::abs(slope - prev_slope);
                rep.slope_jump_location = s - h;
            }
            prev_slope = slope;
        }
        prev_k = kv;
        prev_dk = dv;
    }
    rep.dkappa_kink = rep.lipschitz_dkappa > 0.0 && rep.max_slope_jump > 0.5 * rep.lipschitz_dkappa;
    return rep;
}

} // namespace detail

/// Dense sampling of both diagonal entries on [lo, hi]. Throws if kappa is
/// not positive (or not finite) at any sample.
inline LawReport validate_law(const DiffusionLaw& law, double lo, double hi, long samples)
{
    if (samples < 2)
        throw Error("validate_law needs at least two samples");
    if (!(hi > lo))
        throw Error("validate_law needs a nonempty interval");
    return {detail::sample_component(law.kappa11, law.dkappa11, lo, hi, samples),
            detail::sample_component(law.kappa22, law.dkappa22, lo, hi, samples)};
}

} // namespace ptreg
