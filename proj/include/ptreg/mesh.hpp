#pragma once

#include <ptreg/error.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace ptreg {

using Index = std::int32_t;

struct Point {
    double x = 0.0;
    double y = 0.0;
};

inline Point operator-(Point a, Point b) { return {a.x - b.x, a.y - b.y}; }
inline double dot(Point a, Point b) { return a.x * b.x + a.y * b.y; }
inline double cross(Point a, Point b) { return a.x * b.y - a.y * b.x; }
inline double norm(Point a) { return std::hypot(a.x, a.y); }

/// True for points on the boundary of the unit square.
inline bool on_unit_square_boundary(double x, double y)
{
    return x == 0.0 || x == 1.0 || y == 0.0 || y == 1.0;
}

struct Vertex {
    double x = 0.0;
    double y = 0.0;
    bool on_boundary = false;

    Point point() const { return {x, y}; }
};

/// Counter-clockwise triangle. Local edge i joins the two vertices other than
/// vertex i, so `refinement_edge` also names the newest vertex.
struct Triangle {
    std::array<Index, 3> vertex_ids{};
    int refinement_edge = 0;
    std::optional<Index> parent_id;

    std::pair<Index, Index> edge(int local) const
    {
        return {vertex_ids[(local + 1) % 3], vertex_ids[(local + 2) % 3]};
    }
};

inline std::uint64_t edge_key(Index a, Index b)
{
    const auto lo = static_cast<std::uint64_t>(std::min(a, b));
    const auto hi = static_cast<std::uint64_t>(std::max(a, b));
    return (hi << 32) | lo;
}

struct EdgeAdjacency {
    std::array<Index, 2> elements{-1, -1};
    int count = 0;
};

using EdgeTable = std::unordered_map<std::uint64_t, EdgeAdjacency>;

struct ElementGeometry {
    double area = 0.0;
    double diameter = 0.0;
    std::array<Point, 3> grads{};
};

/// Conforming triangulation with one level of refinement genealogy.
class Mesh {
public:
    Mesh() = default;

    Mesh(std::vector<Vertex> vertices, std::vector<Triangle> triangles, int level = 0,
         std::vector<std::array<Index, 2>> new_vertex_parents = {},
         Index coarse_vertex_count = 0)
        : vertices_(std::move(vertices)), triangles_(std::move(triangles)), level_(level),
          new_vertex_parents_(std::move(new_vertex_parents)),
          coarse_vertex_count_(coarse_vertex_count)
    {
        if (new_vertex_parents_.empty() && coarse_vertex_count_ == 0)
            coarse_vertex_count_ = vertex_count();
        build_edge_table();
    }

    const std::vector<Vertex>& vertices() const { return vertices_; }
    const std::vector<Triangle>& triangles() const { return triangles_; }
    const Vertex& vertex(Index v) const { return vertices_[static_cast<std::size_t>(v)]; }
    const Triangle& triangle(Index t) const { return triangles_[static_cast<std::size_t>(t)]; }
    Point point(Index v) const { return vertex(v).point(); }
    Index vertex_count() const { return static_cast<Index>(vertices_.size()); }
    Index triangle_count() const { return static_cast<Index>(triangles_.size()); }
    int level() const { return level_; }

    const EdgeTable& edge_table() const { return edges_; }

    const EdgeAdjacency* find_edge(Index a, Index b) const
    {
        auto it = edges_.find(edge_key(a, b));
        return it == edges_.end() ? nullptr : &it->second;
    }

    /// Vertices [0, coarse_vertex_count()) were inherited from the parent mesh.
    Index coarse_vertex_count() const { return coarse_vertex_count_; }

    /// Edge endpoints (parent-mesh indices) of vertex v created by the last refinement.
    const std::array<Index, 2>& vertex_parents(Index v) const
    {
        return new_vertex_parents_[static_cast<std::size_t>(v - coarse_vertex_count_)];
    }

    std::array<Point, 3> corners(Index t) const
    {
        const auto& ids = triangle(t).vertex_ids;
        return {point(ids[0]), point(ids[1]), point(ids[2])};
    }

    double signed_area(Index t) const
    {
        const auto p = corners(t);
        return 0.5 * cross(p[1] - p[0], p[2] - p[0]);
    }

    double total_area() const
    {
        double sum = 0.0;
        for (Index t = 0; t < triangle_count(); ++t)
            sum += signed_area(t);
        return sum;
    }

    Index boundary_vertex_count() const
    {
        return static_cast<Index>(std::count_if(vertices_.begin(), vertices_.end(),
                                                [](const Vertex& v) { return v.on_boundary; }));
    }

    /// Smallest interior angle over all triangles, in degrees.
    double min_angle_degrees() const
    {
        double smallest = 180.0;
        for (Index t = 0; t < triangle_count(); ++t) {
            const auto p = corners(t);
            for (int i = 0; i < 3; ++i) {
                const Point a = p[(i + 1) % 3] - p[i];
                const Point b = p[(i + 2) % 3] - p[i];
                const double angle = std::atan2(std::abs(cross(a, b)), dot(a, b));
                smallest = std::min(smallest, angle * 180.0 / M_PI);
            }
        }
        return smallest;
    }

    /// Checks orientation, edge multiplicity, boundary edge placement and area coverage.
    /// Together these exclude hanging vertices: a hanging vertex leaves an
    /// interior edge with a single neighbour.
    bool is_conforming(double area_tol = 1e-12) const
    {
        for (Index t = 0; t < triangle_count(); ++t)
            if (!(signed_area(t) > 0.0))
                return false;
        for (const auto& [key, adj] : edges_) {
            if (adj.count == 1) {
                const auto a = static_cast<Index>(key & 0xffffffffu);
                const auto b = static_cast<Index>(key >> 32);
                const Point pa = point(a);
                const Point pb = point(b);
                const bool same_side = (pa.x == 0.0 && pb.x == 0.0) || (pa.x == 1.0 && pb.x == 1.0) ||
                                       (pa.y == 0.0 && pb.y == 0.0) || (pa.y == 1.0 && pb.y == 1.0);
                if (!same_side)
                    return false;
            } else if (adj.count != 2) {
                return false;
            }
        }
        return std::abs(total_area() - 1.0) <= area_tol;
    }

private:
    void build_edge_table()
    {
        edges_.clear();
        edges_.reserve(triangles_.size() * 2);
        for (Index t = 0; t < triangle_count(); ++t) {
            for (int e = 0; e < 3; ++e) {
                const auto [a, b] = triangle(t).edge(e);
                auto& adj = edges_[edge_key(a, b)];
                if (adj.count == 2)
                    throw MeshError("edge (" + std::to_string(a) + "," + std::to_string(b) +
                                    ") has more than two adjacent triangles");
                adj.elements[static_cast<std::size_t>(adj.count++)] = t;
            }
        }
    }

    std::vector<Vertex> vertices_;
    std::vector<Triangle> triangles_;
    int level_ = 0;
    std::vector<std::array<Index, 2>> new_vertex_parents_;
    Index coarse_vertex_count_ = 0;
    EdgeTable edges_;
};

namespace detail {

inline int longest_edge(const std::vector<Vertex>& vertices, const std::array<Index, 3>& ids)
{
    std::array<double, 3> len{};
    for (int e = 0; e < 3; ++e) {
        const auto& a = vertices[static_cast<std::size_t>(ids[(e + 1) % 3])];
        const auto& b = vertices[static_cast<std::size_t>(ids[(e + 2) % 3])];
        len[static_cast<std::size_t>(e)] = norm(a.point() - b.point());
    }
    const double longest = *std::max_element(len.begin(), len.end());
    // ties go to the edge whose opposite vertex has the lowest index
    int best = -1;
    for (int e = 0; e < 3; ++e)
        if (len[static_cast<std::size_t>(e)] >= longest * (1.0 - 1e-12) && (best < 0 || ids[e] < ids[best]))
            best = e;
    return best;
}

} // namespace detail

/// Builds a level-0 mesh from raw connectivity; orientation is normalised to
/// counter-clockwise and each refinement edge is set to the longest edge.
inline Mesh make_mesh(const std::vector<Point>& points, std::vector<std::array<Index, 3>> cells)
{
    std::vector<Vertex> vertices;
    vertices.reserve(points.size());
    for (const auto& p : points) {
        if (p.x < 0.0 || p.x > 1.0 || p.y < 0.0 || p.y > 1.0)
            throw MeshError("vertex outside the unit square");
        vertices.push_back({p.x, p.y, on_unit_square_boundary(p.x, p.y)});
    }
    std::vector<Triangle> triangles;
    triangles.reserve(cells.size());
    for (auto ids : cells) {
        const Point a = points[static_cast<std::size_t>(ids[0])];
        const Point b = points[static_cast<std::size_t>(ids[1])];
        const Point c = points[static_cast<std::size_t>(ids[2])];
        if (cross(b - a, c - a) < 0.0)
            std::swap(ids[1], ids[2]);
        triangles.push_back({ids, detail::longest_edge(vertices, ids), std::nullopt});
    }
    return Mesh(std::move(vertices), std::move(triangles), 0);
}

/// n x n squares, each split criss-cross into four triangles about its centre.
/// The default n = 6 gives 144 triangles and 85 vertices.
inline Mesh uniform_initial_mesh(int cells_per_side = 6)
{
    const int n = cells_per_side;
    std::vector<Point> points;
    points.reserve(static_cast<std::size_t>((n + 1) * (n + 1) + n * n));
    for (int j = 0; j <= n; ++j)
        for (int i = 0; i <= n; ++i)
            points.push_back({static_cast<double>(i) / n, static_cast<double>(j) / n});
    const Index center0 = static_cast<Index>(points.size());
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i)
            points.push_back({(i + 0.5) / n, (j + 0.5) / n});

    auto grid = [n](int i, int j) { return static_cast<Index>(j * (n + 1) + i); };
    std::vector<std::array<Index, 3>> cells;
    cells.reserve(static_cast<std::size_t>(4 * n * n));
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
            const Index c = center0 + j * n + i;
            const std::array<Index, 4> ring{grid(i, j), grid(i + 1, j), grid(i + 1, j + 1), grid(i, j + 1)};
            for (int s = 0; s < 4; ++s)
                cells.push_back({c, ring[static_cast<std::size_t>(s)], ring[static_cast<std::size_t>((s + 1) % 4)]});
        }
    }
    return make_mesh(points, std::move(cells));
}

/// Area, diameter (longest edge) and the constant gradients of the three
/// barycentric basis functions.
inline ElementGeometry element_geometry(const Mesh& mesh, Index element)
{
    if (element < 0 || element >= mesh.triangle_count())
        throw MeshError("element index " + std::to_string(element) + " out of range");
    const auto p = mesh.corners(element);
    const double twice_area = cross(p[1] - p[0], p[2] - p[0]);
    ElementGeometry g;
    g.diameter = std::max({norm(p[1] - p[0]), norm(p[2] - p[1]), norm(p[0] - p[2])});
    if (!(twice_area > 1e-14 * g.diameter * g.diameter))
        throw MeshError("degenerate triangle " + std::to_string(element));
    g.area = 0.5 * twice_area;
    for (int i = 0; i < 3; ++i) {
        const Point a = p[static_cast<std::size_t>((i + 1) % 3)];
        const Point b = p[static_cast<std::size_t>((i + 2) % 3)];
        g.grads[static_cast<std::size_t>(i)] = {(a.y - b.y) / twice_area, (b.x - a.x) / twice_area};
    }
    return g;
}

/// Greedy bulk marking: the smallest prefix of elements ordered by descending
/// indicator (ascending index on ties) whose sum reaches theta of the total.
/// Returned indices are sorted ascending.
inline std::vector<Index> mark_dorfler(std::span<const double> indicators, double theta)
{
    if (indicators.empty())
        throw MeshError("cannot mark an empty mesh");
    if (!(theta > 0.0 && theta <= 1.0))
        throw MeshError("marking fraction must lie in (0, 1]");
    double total = 0.0;
    for (double v : indicators) {
        if (!(v >= 0.0))
            throw MeshError("error indicators must be nonnegative");
        total += v;
    }
    std::vector<Index> order(indicators.size());
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
        return indicators[static_cast<std::size_t>(a)] > indicators[static_cast<std::size_t>(b)];
    });
    const double target = theta * total;
    double acc = 0.0;
    std::vector<Index> marked;
    for (std::size_t i = 0; i < order.size() && acc < target; ++i) {
        marked.push_back(order[i]);
        acc += indicators[static_cast<std::size_t>(order[i])];
    }
    std::sort(marked.begin(), marked.end());
    return marked;
}

/// Newest-vertex bisection of the marked elements plus the closure needed to
/// keep the mesh conforming. Every marked edge is bisected exactly once, so
/// all new vertices are midpoints of edges of the input mesh.
inline Mesh refine(const Mesh& mesh, std::span<const Index> marked)
{
    const auto& tris = mesh.triangles();
    std::unordered_map<std::uint64_t, Index> midpoint; // marked edge -> new vertex (or -1)
    std::vector<std::uint64_t> work;

    auto mark_edge = [&](std::uint64_t key) {
        if (midpoint.emplace(key, -1).second)
            work.push_back(key);
    };
    auto refinement_key = [&](Index t) {
        const auto [a, b] = tris[static_cast<std::size_t>(t)].edge(tris[static_cast<std::size_t>(t)].refinement_edge);
        return edge_key(a, b);
    };

    for (Index t : marked) {
        if (t < 0 || t >= mesh.triangle_count())
            throw MeshError("marked element " + std::to_string(t) + " out of range");
        mark_edge(refinement_key(t));
    }
    // closure: any element touching a marked edge must have its refinement edge marked
    while (!work.empty()) {
        const std::uint64_t key = work.back();
        work.pop_back();
        const auto& adj = mesh.edge_table().at(key);
        for (int i = 0; i < adj.count; ++i)
            mark_edge(refinement_key(adj.elements[static_cast<std::size_t>(i)]));
    }

    std::vector<Vertex> vertices = mesh.vertices();
    std::vector<std::array<Index, 2>> parents;
    // deterministic numbering: element order, then local edge order
    for (Index t = 0; t < mesh.triangle_count(); ++t) {
        for (int e = 0; e < 3; ++e) {
            const auto [a, b] = tris[static_cast<std::size_t>(t)].edge(e);
            auto it = midpoint.find(edge_key(a, b));
            if (it == midpoint.end() || it->second >= 0)
                continue;
            const Point pa = mesh.point(a);
            const Point pb = mesh.point(b);
            const double x = 0.5 * (pa.x + pb.x);
            const double y = 0.5 * (pa.y + pb.y);
            it->second = static_cast<Index>(vertices.size());
            vertices.push_back({x, y, on_unit_square_boundary(x, y)});
            parents.push_back({std::min(a, b), std::max(a, b)});
        }
    }

    std::vector<Triangle> out;
    out.reserve(tris.size() + 2 * midpoint.size());
    struct Pending {
        std::array<Index, 3> ids;
        int newest;
    };
    std::vector<Pending> stack;
    for (Index t = 0; t < mesh.triangle_count(); ++t) {
        const auto& tri = tris[static_cast<std::size_t>(t)];
        stack.push_back({tri.vertex_ids, tri.refinement_edge});
        while (!stack.empty()) {
            const Pending cur = stack.back();
            stack.pop_back();
            const int k = cur.newest;
            const Index p = cur.ids[static_cast<std::size_t>(k)];
            const Index a = cur.ids[static_cast<std::size_t>((k + 1) % 3)];
            const Index b = cur.ids[static_cast<std::size_t>((k + 2) % 3)];
            auto it = midpoint.find(edge_key(a, b));
            if (it == midpoint.end()) {
                out.push_back({cur.ids, k, t});
                continue;
            }
            const Index m = it->second;
            // children (p, a, m) and (p, m, b) keep the orientation; m is newest in both.
            // Pushed in reverse so the first child is emitted first.
            stack.push_back({{p, m, b}, 1});
            stack.push_back({{p, a, m}, 2});
        }
    }
    return Mesh(std::move(vertices), std::move(out), mesh.level() + 1, std::move(parents),
                mesh.vertex_count());
}

/// Nodal P1 transfer from `coarse` to its one-step refinement `fine`.
inline std::vector<double> interpolate_p1(std::span<const double> coarse_values, const Mesh& coarse,
                                          const Mesh& fine)
{
    if (static_cast<Index>(coarse_values.size()) != coarse.vertex_count())
        throw MeshError("nodal value count does not match the coarse mesh");
    if (fine.level() != coarse.level() + 1 || fine.coarse_vertex_count() != coarse.vertex_count())
        throw MeshError("meshes are not nested by a single refinement");
    for (Index v = 0; v < coarse.vertex_count(); ++v) {
        const auto& a = coarse.vertex(v);
        const auto& b = fine.vertex(v);
        if (a.x != b.x || a.y != b.y)
            throw MeshError("meshes are not nested: vertex " + std::to_string(v) + " moved");
    }
    std::vector<double> out(static_cast<std::size_t>(fine.vertex_count()));
    std::copy(coarse_values.begin(), coarse_values.end(), out.begin());
    for (Index v = coarse.vertex_count(); v < fine.vertex_count(); ++v) {
        const auto [a, b] = fine.vertex_parents(v);
        out[static_cast<std::size_t>(v)] =
            0.5 * (coarse_values[static_cast<std::size_t>(a)] + coarse_values[static_cast<std::size_t>(b)]);
    }
    for (Index v = 0; v < fine.vertex_count(); ++v)
        if (fine.vertex(v).on_boundary)
            out[static_cast<std::size_t>(v)] = 0.0;
    return out;
}

} // namespace ptreg
