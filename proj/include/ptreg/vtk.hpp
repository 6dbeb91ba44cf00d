#pragma once

#include <ptreg/mesh.hpp>

#include <iomanip>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace ptreg {

struct NamedField {
    std::string name;
    std::span<const double> values;
};

/// Legacy ASCII unstructured grid: triangles (cell type 5), optional nodal and
/// per-cell scalar fields. Vertex and cell order follow the mesh.
inline void write_vtk(std::ostream& os, const Mesh& mesh, const std::vector<NamedField>& point_data,
                      const std::vector<NamedField>& cell_data, const std::string& title = "ptreg mesh")
{
    os << "# vtk DataFile Version 3.0\n" << title << "\nASCII\nDATASET UNSTRUCTURED_GRID\n";
    os << std::setprecision(17);
    os << "POINTS " << mesh.vertex_count() << " double\n";
    for (const auto& v : mesh.vertices())
        os << v.x << ' ' << v.y << " 0\n";
    os << "CELLS " << mesh.triangle_count() << ' ' << 4 * mesh.triangle_count() << '\n';
    for (const auto& t : mesh.triangles())
        os << "3 " << t.vertex_ids[0] << ' ' << t.vertex_ids[1] << ' ' << t.vertex_ids[2] << '\n';
    os << "CELL_TYPES " << mesh.triangle_count() << '\n';
    for (Index t = 0; t < mesh.triangle_count(); ++t)
        os << "5\n";

    auto write_fields = [&](const char* section, Index count, const std::vector<NamedField>& fields) {
        if (fields.empty())
            return;
        os << section << ' ' << count << '\n';
        for (const auto& f : fields) {
            if (static_cast<Index>(f.values.size()) != count)
                throw Error("VTK field '" + f.name + "' has the wrong length");
            os << "SCALARS " << f.name << " double 1\nLOOKUP_TABLE default\n";
            for (double v : f.values)
                os << v << '\n';
        }
    };
    write_fields("POINT_DATA", mesh.vertex_count(), point_data);
    write_fields("CELL_DATA", mesh.triangle_count(), cell_data);
}

} // namespace ptreg
