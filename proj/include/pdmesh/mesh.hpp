#pragma once

#include "pdmesh/geometry.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace pdmesh {

/// Indexed triangle mesh.
struct TriangleMesh {
    std::vector<Point3> vertices;
    std::vector<std::array<std::uint32_t, 3>> faces;

    double area() const;
};

struct ComponentInfo {
    std::size_t vertices = 0;
    std::size_t edges = 0;
    std::size_t faces = 0;
    long euler = 0;
};

struct TopologyReport {
    std::size_t vertices = 0;
    std::size_t edges = 0;
    std::size_t faces = 0;
    long euler = 0;
    /// Edges with exactly one incident face.
    std::size_t boundary_edges = 0;
    /// Edges with three or more incident faces.
    std::size_t nonmanifold_edges = 0;
    std::vector<ComponentInfo> components;

    bool closed() const { return boundary_edges == 0 && nonmanifold_edges == 0; }
};

/// Topology of a polygon complex given as vertex-index loops (sizes 3 or 4).
/// Only referenced vertices are counted. Components are face-connected through
/// shared vertices.
TopologyReport analyze_polygons(std::span<const std::uint32_t> indices, std::span<const std::uint8_t> sizes);
TopologyReport analyze(const TriangleMesh& mesh);

/// Merges vertices closer than `tol` and drops faces that collapse, along with
/// pairs of faces that end up on the same three vertices with opposite winding.
/// Vertices are kept in first-seen order.
TriangleMesh weld(const TriangleMesh& mesh, double tol = 1e-12);

void write_obj(const std::filesystem::path& path, const TriangleMesh& mesh);
/// Binary little-endian PLY with float vertices and uchar/int faces.
void write_ply(const std::filesystem::path& path, const TriangleMesh& mesh);
/// Reads `v` and `f` records; polygons are fan-triangulated. Texture and normal
/// indices after '/' are ignored; negative indices are relative.
TriangleMesh read_obj(const std::filesystem::path& path);
/// Reads what write_ply produces (and ASCII PLY with the same layout).
TriangleMesh read_ply(const std::filesystem::path& path);
/// Dispatches on the extension (.obj or .ply).
TriangleMesh read_mesh(const std::filesystem::path& path);
void write_mesh(const std::filesystem::path& path, const TriangleMesh& mesh);

} // namespace pdmesh
