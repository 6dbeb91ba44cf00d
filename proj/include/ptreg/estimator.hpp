#pragma once

#include <ptreg/assembly.hpp>
#include <ptreg/error.hpp>
#include <ptreg/problems.hpp>
#include <ptreg/quadrature.hpp>

#include <cmath>
#include <numeric>
#include <optional>
#include <vector>

namespace ptreg {

/// Squared residual indicators per element: eta_sq = interior + zeta_sq,
/// where zeta_sq is the flux-jump part.
struct IndicatorField {
    std::vector<double> eta_sq;
    std::vector<double> zeta_sq;
    int level = 0;
};

/// Residual-based indicators for a P1 iterate.
///
/// Interior term: h_T^2 || sum_j kappa_jj'(u) (d_j u)^2 + f ||^2_{L2(T)}, which
/// is the strong residual for diagonal kappa since grad u is constant on T.
/// Jump term: for every interior edge E, |E| || [kappa(u) grad u . n] ||^2_{L2(E)}
/// with 2-point Gauss on E; half is charged to each neighbour. Boundary
/// edges contribute nothing.
inline IndicatorField element_indicators(const FeSpace& space, const Vector& u, const ProblemSpec& problem,
                                         const QuadratureRule& rule)
{
    const Mesh& mesh = space.mesh();
    const auto nodal = space.expand(u);
    const EdgeRule edge_rule;
    IndicatorField field;
    field.level = mesh.level();
    field.eta_sq.assign(static_cast<std::size_t>(mesh.triangle_count()), 0.0);
    field.zeta_sq.assign(static_cast<std::size_t>(mesh.triangle_count()), 0.0);

    std::vector<Point> gradients(static_cast<std::size_t>(mesh.triangle_count()));
    for (Index t = 0; t < mesh.triangle_count(); ++t)
        gradients[static_cast<std::size_t>(t)] = element_field(space, nodal, t).gradient;

    for (Index t = 0; t < mesh.triangle_count(); ++t) {
        const auto& g = space.geometry(t);
        const auto f = element_field(space, nodal, t);
        double interior = 0.0;
        for (std::size_t q = 0; q < rule.size(); ++q) {
            const Point x = quadrature_point(mesh, t, rule.points[q]);
            const Diag2 dk = problem.law.dkappa(f.at(rule.points[q]));
            const double strong = dk.xx * f.gradient.x * f.gradient.x + dk.yy * f.gradient.y * f.gradient.y +
                                  problem.source(x.x, x.y);
            interior += rule.weights[q] * g.area * strong * strong;
        }

        double jump = 0.0;
        for (int e = 0; e < 3; ++e) {
            auto [a, b] = mesh.triangle(t).edge(e);
            const EdgeAdjacency* adj = mesh.find_edge(a, b);
            if (adj == nullptr || adj->count != 2)
                continue;
            const Index other = adj->elements[0] == t ? adj->elements[1] : adj->elements[0];
            if (a > b)
                std::swap(a, b);
            const Point pa = mesh.point(a);
            const Point pb = mesh.point(b);
            const Point tangent = pb - pa;
            const double len = norm(tangent);
            const Point n{tangent.y / len, -tangent.x / len};
            const Point dg = gradients[static_cast<std::size_t>(t)] - gradients[static_cast<std::size_t>(other)];
            double sq = 0.0;
            for (int k = 0; k < 2; ++k) {
                const double s = edge_rule.points[static_cast<std::size_t>(k)];
                const double us = (1.0 - s) * nodal[static_cast<std::size_t>(a)] + s * nodal[static_cast<std::size_t>(b)];
                const Diag2 kap = problem.law.kappa(us);
                const double j = kap.xx * dg.x * n.x + kap.yy * dg.y * n.y;
                sq += edge_rule.weights[static_cast<std::size_t>(k)] * j * j;
            }
            jump += 0.5 * len * (len * sq);
        }
        field.zeta_sq[static_cast<std::size_t>(t)] = jump;
        field.eta_sq[static_cast<std::size_t>(t)] = g.diameter * g.diameter * interior + jump;
    }
    return field;
}

/// eta = sqrt(sum_T eta_T^2).
inline double global_estimator(const IndicatorField& field)
{
    return std::sqrt(std::accumulate(field.eta_sq.begin(), field.eta_sq.end(), 0.0));
}

struct ErrorNorms {
    double l2 = 0.0;
    double h1 = 0.0; // seminorm
};

/// ||u_h - u||_{L2} and |u_h - u|_{H1} by element quadrature (degree >= 4).
inline ErrorNorms error_norms(const FeSpace& space, const Vector& u, const std::optional<ExactSolution>& exact,
                              const QuadratureRule& rule = quadrature_rule(6))
{
    if (!exact)
        throw Error("error norms need an exact solution");
    if (rule.degree < 4)
        throw Error("error norms need a quadrature rule of degree at least 4");
    const Mesh& mesh = space.mesh();
    const auto nodal = space.expand(u);
    double l2 = 0.0;
    double h1 = 0.0;
    for (Index t = 0; t < mesh.triangle_count(); ++t) {
        const auto& g = space.geometry(t);
        const auto f = element_field(space, nodal, t);
        for (std::size_t q = 0; q < rule.size(); ++q) {
            const Point x = quadrature_point(mesh, t, rule.points[q]);
            const double w = rule.weights[q] * g.area;
            const double e = f.at(rule.points[q]) - exact->value(x.x, x.y);
            const Point de = f.gradient - exact->gradient(x.x, x.y);
            l2 += w * e * e;
            h1 += w * dot(de, de);
        }
    }
    return {std::sqrt(l2), std::sqrt(h1)};
}

} // namespace ptreg
