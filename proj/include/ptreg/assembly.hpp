#pragma once

#include <ptreg/error.hpp>
#include <ptreg/mesh.hpp>
#include <ptreg/problems.hpp>
#include <ptreg/quadrature.hpp>

#include <Eigen/Sparse>

#include <cmath>
#include <iomanip>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace ptreg {

using Vector = Eigen::VectorXd;
using SparseMatrix = Eigen::SparseMatrix<double>;

/// Continuous P1 space on a mesh with homogeneous Dirichlet conditions.
/// Unknowns are the non-boundary vertices, numbered by ascending vertex index.
/// The mesh must outlive the space.
class FeSpace {
public:
    explicit FeSpace(const Mesh& mesh) : mesh_(&mesh)
    {
        dof_of_vertex_.assign(static_cast<std::size_t>(mesh.vertex_count()), -1);
        for (Index v = 0; v < mesh.vertex_count(); ++v) {
            if (!mesh.vertex(v).on_boundary) {
                dof_of_vertex_[static_cast<std::size_t>(v)] = static_cast<Index>(interior_dofs_.size());
                interior_dofs_.push_back(v);
            }
        }
        geometry_.reserve(static_cast<std::size_t>(mesh.triangle_count()));
        for (Index t = 0; t < mesh.triangle_count(); ++t)
            geometry_.push_back(element_geometry(mesh, t));
    }

    const Mesh& mesh() const { return *mesh_; }
    Index dof_count() const { return static_cast<Index>(interior_dofs_.size()); }
    const std::vector<Index>& interior_dofs() const { return interior_dofs_; }
    /// -1 for constrained (boundary) vertices.
    Index dof_of_vertex(Index v) const { return dof_of_vertex_[static_cast<std::size_t>(v)]; }
    const ElementGeometry& geometry(Index t) const { return geometry_[static_cast<std::size_t>(t)]; }

    std::array<Index, 3> local_dofs(Index t) const
    {
        const auto& ids = mesh_->triangle(t).vertex_ids;
        return {dof_of_vertex(ids[0]), dof_of_vertex(ids[1]), dof_of_vertex(ids[2])};
    }

    /// Nodal values on all vertices, zero on the boundary.
    std::vector<double> expand(const Vector& u) const
    {
        check_size(u);
        std::vector<double> out(static_cast<std::size_t>(mesh_->vertex_count()), 0.0);
        for (Index d = 0; d < dof_count(); ++d)
            out[static_cast<std::size_t>(interior_dofs_[static_cast<std::size_t>(d)])] = u[d];
        return out;
    }

    Vector restrict_to_dofs(std::span<const double> nodal) const
    {
        if (static_cast<Index>(nodal.size()) != mesh_->vertex_count())
            throw AssemblyError("nodal vector does not match the mesh");
        Vector u(dof_count());
        for (Index d = 0; d < dof_count(); ++d)
            u[d] = nodal[static_cast<std::size_t>(interior_dofs_[static_cast<std::size_t>(d)])];
        return u;
    }

    /// Dof vector of the nodal interpolant of g.
    Vector interpolate(const SpatialFunction& g) const
    {
        Vector u(dof_count());
        for (Index d = 0; d < dof_count(); ++d) {
            const Point p = mesh_->point(interior_dofs_[static_cast<std::size_t>(d)]);
            u[d] = g(p.x, p.y);
        }
        return u;
    }

    void check_size(const Vector& u) const
    {
        if (u.size() != dof_count())
            throw AssemblyError("coefficient vector has " + std::to_string(u.size()) + " entries, space has " +
                                std::to_string(dof_count()) + " dofs");
    }

private:
    const Mesh* mesh_;
    std::vector<Index> interior_dofs_;
    std::vector<Index> dof_of_vertex_;
    std::vector<ElementGeometry> geometry_;
};

/// Values of a P1 field at the quadrature points of one element, plus its gradient.
struct ElementField {
    std::array<double, 3> nodal{};
    Point gradient{};

    double at(const std::array<double, 3>& bary) const
    {
        return bary[0] * nodal[0] + bary[1] * nodal[1] + bary[2] * nodal[2];
    }
};

inline ElementField element_field(const FeSpace& space, const std::vector<double>& nodal, Index t)
{
    const auto& ids = space.mesh().triangle(t).vertex_ids;
    const auto& g = space.geometry(t);
    ElementField f;
    for (int i = 0; i < 3; ++i) {
        const double v = nodal[static_cast<std::size_t>(ids[static_cast<std::size_t>(i)])];
        f.nodal[static_cast<std::size_t>(i)] = v;
        f.gradient.x += v * g.grads[static_cast<std::size_t>(i)].x;
        f.gradient.y += v * g.grads[static_cast<std::size_t>(i)].y;
    }
    return f;
}

inline Point quadrature_point(const Mesh& mesh, Index t, const std::array<double, 3>& bary)
{
    const auto p = mesh.corners(t);
    return {bary[0] * p[0].x + bary[1] * p[1].x + bary[2] * p[2].x,
            bary[0] * p[0].y + bary[1] * p[1].y + bary[2] * p[2].y};
}

namespace detail {

inline void check_finite(double v, const char* what, Index t, std::size_t q)
{
    if (!std::isfinite(v))
        throw AssemblyError(std::string("non-finite ") + what + " at element " + std::to_string(t) +
                            ", quadrature point " + std::to_string(q));
}

inline SparseMatrix from_triplets(Index n, const std::vector<Eigen::Triplet<double>>& triplets)
{
    SparseMatrix m(n, n);
    m.setFromTriplets(triplets.begin(), triplets.end());
    m.makeCompressed();
    return m;
}

} // namespace detail

/// Matrix of  sum_T sum_q w_q |T| (C(x_q) grad phi_i) . grad phi_j  for a
/// diagonal coefficient C given per element and quadrature point as
/// `coefficient(t, q) -> Diag2`. Every element contributes all of its
/// interior-dof pairs, so all matrices share the vertex-adjacency pattern.
template <class Coefficient>
SparseMatrix assemble_stiffness_like(const FeSpace& space, const QuadratureRule& rule, Coefficient&& coefficient)
{
    const Mesh& mesh = space.mesh();
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(static_cast<std::size_t>(mesh.triangle_count()) * 9);
    for (Index t = 0; t < mesh.triangle_count(); ++t) {
        const auto dofs = space.local_dofs(t);
        const auto& g = space.geometry(t);
        Diag2 c{};
        for (std::size_t q = 0; q < rule.size(); ++q) {
            const Diag2 cq = coefficient(t, q);
            detail::check_finite(cq.xx, "coefficient", t, q);
            detail::check_finite(cq.yy, "coefficient", t, q);
            c.xx += rule.weights[q] * cq.xx;
            c.yy += rule.weights[q] * cq.yy;
        }
        for (int i = 0; i < 3; ++i) {
            if (dofs[static_cast<std::size_t>(i)] < 0)
                continue;
            const Point gi = g.grads[static_cast<std::size_t>(i)];
            for (int j = 0; j < 3; ++j) {
                if (dofs[static_cast<std::size_t>(j)] < 0)
                    continue;
                const Point gj = g.grads[static_cast<std::size_t>(j)];
                triplets.emplace_back(dofs[static_cast<std::size_t>(j)], dofs[static_cast<std::size_t>(i)],
                                      g.area * (c.xx * gi.x * gj.x + c.yy * gi.y * gj.y));
            }
        }
    }
    return detail::from_triplets(space.dof_count(), triplets);
}

/// A2'(u): entries  int kappa(u) grad phi_i . grad phi_j  under the rule.
inline SparseMatrix assemble_A2p(const FeSpace& space, const DiffusionLaw& law, const QuadratureRule& rule,
                                 const Vector& u)
{
    const auto nodal = space.expand(u);
    std::vector<double> uq(rule.size());
    Index current = -1;
    return assemble_stiffness_like(space, rule, [&](Index t, std::size_t q) {
        if (t != current) {
            const auto f = element_field(space, nodal, t);
            for (std::size_t k = 0; k < rule.size(); ++k)
                uq[k] = f.at(rule.points[k]);
            current = t;
        }
        return law.kappa(uq[q]);
    });
}

/// A(u; z) assembled directly as a vector, without forming A2'(u).
inline Vector apply_A(const FeSpace& space, const DiffusionLaw& law, const QuadratureRule& rule, const Vector& u,
                      const Vector& z)
{
    const auto un = space.expand(u);
    const auto zn = space.expand(z);
    Vector out = Vector::Zero(space.dof_count());
    for (Index t = 0; t < space.mesh().triangle_count(); ++t) {
        const auto fu = element_field(space, un, t);
        const auto fz = element_field(space, zn, t);
        const auto dofs = space.local_dofs(t);
        const auto& g = space.geometry(t);
        for (std::size_t q = 0; q < rule.size(); ++q) {
            const Diag2 k = law.kappa(fu.at(rule.points[q]));
            const double w = rule.weights[q] * g.area;
            for (int j = 0; j < 3; ++j) {
                if (dofs[static_cast<std::size_t>(j)] < 0)
                    continue;
                const Point gj = g.grads[static_cast<std::size_t>(j)];
                out[dofs[static_cast<std::size_t>(j)]] += w * (k.xx * fz.gradient.x * gj.x + k.yy * fz.gradient.y * gj.y);
            }
        }
    }
    return out;
}

/// A1'(u; z): Gateaux derivative of A(.; z) at u. Entry (j, i) is
/// sum_q w_q |T| phi_i(x_q) (kappa'(u(x_q)) grad z) . grad phi_j. Not symmetric.
inline SparseMatrix assemble_A1p(const FeSpace& space, const DiffusionLaw& law, const QuadratureRule& rule,
                                 const Vector& u, const Vector& z)
{
    const auto un = space.expand(u);
    const auto zn = space.expand(z);
    const Mesh& mesh = space.mesh();
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(static_cast<std::size_t>(mesh.triangle_count()) * 9);
    for (Index t = 0; t < mesh.triangle_count(); ++t) {
        const auto fu = element_field(space, un, t);
        const auto fz = element_field(space, zn, t);
        const auto dofs = space.local_dofs(t);
        const auto& g = space.geometry(t);
        // local[j][i] accumulates over quadrature points
        std::array<std::array<double, 3>, 3> local{};
        for (std::size_t q = 0; q < rule.size(); ++q) {
            const Diag2 dk = law.dkappa(fu.at(rule.points[q]));
            detail::check_finite(dk.xx, "kappa'", t, q);
            detail::check_finite(dk.yy, "kappa'", t, q);
            const double w = rule.weights[q] * g.area;
            const Point flux{dk.xx * fz.gradient.x, dk.yy * fz.gradient.y};
            for (int j = 0; j < 3; ++j) {
                const double fj = dot(flux, g.grads[static_cast<std::size_t>(j)]);
                for (int i = 0; i < 3; ++i)
                    local[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)] +=
                        w * rule.points[q][static_cast<std::size_t>(i)] * fj;
            }
        }
        for (int j = 0; j < 3; ++j) {
            if (dofs[static_cast<std::size_t>(j)] < 0)
                continue;
            for (int i = 0; i < 3; ++i)
                if (dofs[static_cast<std::size_t>(i)] >= 0)
                    triplets.emplace_back(dofs[static_cast<std::size_t>(j)], dofs[static_cast<std::size_t>(i)],
                                          local[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)]);
        }
    }
    return detail::from_triplets(space.dof_count(), triplets);
}

inline SparseMatrix assemble_A1p(const FeSpace& space, const DiffusionLaw& law, const QuadratureRule& rule,
                                 const Vector& u)
{
    return assemble_A1p(space, law, rule, u, u);
}

/// R from a weight given per element and quadrature point; weights must be nonnegative.
template <class Weight>
SparseMatrix assemble_R(const FeSpace& space, const QuadratureRule& rule, Weight&& beta)
{
    return assemble_stiffness_like(space, rule, [&](Index t, std::size_t q) {
        const Diag2 b = beta(t, q);
        if (b.xx < 0.0 || b.yy < 0.0)
            throw AssemblyError("negative regularization weight at element " + std::to_string(t) +
                                ", quadrature point " + std::to_string(q));
        return b;
    });
}

/// R with weight beta(u0(x_q)) for a level-initial iterate u0.
inline SparseMatrix assemble_R(const FeSpace& space, const QuadratureRule& rule,
                               const std::function<Diag2(double)>& beta, const Vector& u0)
{
    const auto nodal = space.expand(u0);
    return assemble_R(space, rule, [&](Index t, std::size_t q) {
        return beta(element_field(space, nodal, t).at(rule.points[q]));
    });
}

namespace detail {

inline void accumulate_load(const Mesh& mesh, const ElementGeometry& g, Index t, const QuadratureRule& rule,
                            const SpatialFunction& f, std::array<double, 3>& local)
{
    for (std::size_t q = 0; q < rule.size(); ++q) {
        const Point x = quadrature_point(mesh, t, rule.points[q]);
        const double fv = f(x.x, x.y);
        check_finite(fv, "source", t, q);
        for (int i = 0; i < 3; ++i)
            local[static_cast<std::size_t>(i)] += rule.weights[q] * g.area * fv * rule.points[q][static_cast<std::size_t>(i)];
    }
}

} // namespace detail

/// f_Q: quadrature load vector over interior dofs.
inline Vector assemble_fQ(const FeSpace& space, const QuadratureRule& rule, const SpatialFunction& f)
{
    Vector out = Vector::Zero(space.dof_count());
    for (Index t = 0; t < space.mesh().triangle_count(); ++t) {
        std::array<double, 3> local{};
        detail::accumulate_load(space.mesh(), space.geometry(t), t, rule, f, local);
        const auto dofs = space.local_dofs(t);
        for (int i = 0; i < 3; ++i)
            if (dofs[static_cast<std::size_t>(i)] >= 0)
                out[dofs[static_cast<std::size_t>(i)]] += local[static_cast<std::size_t>(i)];
    }
    return out;
}

/// Diagnostic load vector over all vertices, boundary included.
inline std::vector<double> assemble_load_all_vertices(const Mesh& mesh, const QuadratureRule& rule,
                                                      const SpatialFunction& f)
{
    std::vector<double> out(static_cast<std::size_t>(mesh.vertex_count()), 0.0);
    for (Index t = 0; t < mesh.triangle_count(); ++t) {
        std::array<double, 3> local{};
        detail::accumulate_load(mesh, element_geometry(mesh, t), t, rule, f, local);
        for (int i = 0; i < 3; ++i)
            out[static_cast<std::size_t>(mesh.triangle(t).vertex_ids[static_cast<std::size_t>(i)])] +=
                local[static_cast<std::size_t>(i)];
    }
    return out;
}

/// r = delta f_Q - A(u; u) given A2'(u).
inline Vector residual(const SparseMatrix& A2p, const Vector& u, const Vector& fQ, double delta)
{
    return delta * fQ - A2p * u;
}

inline Vector residual(const FeSpace& space, const DiffusionLaw& law, const QuadratureRule& rule, const Vector& u,
                       const Vector& fQ, double delta)
{
    return residual(assemble_A2p(space, law, rule, u), u, fQ, delta);
}

/// Operators at the current iterate used by one regularized step.
struct AssembledOperators {
    SparseMatrix A2p;
    SparseMatrix A1p;
    const SparseMatrix* R = nullptr;
    const Vector* fQ = nullptr;
    Vector Auu;
};

/// Coordinate-format dump, one "row col value" line per stored entry (0-based).
inline void write_coo(std::ostream& os, const SparseMatrix& m)
{
    os << std::setprecision(17) << m.rows() << ' ' << m.cols() << ' ' << m.nonZeros() << '\n';
    for (int k = 0; k < m.outerSize(); ++k)
        for (SparseMatrix::InnerIterator it(m, k); it; ++it)
            os << it.row() << ' ' << it.col() << ' ' << it.value() << '\n';
}

} // namespace ptreg
