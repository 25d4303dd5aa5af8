#pragma once

#include "pdmesh/delaunay.hpp"
#include "pdmesh/geometry.hpp"
#include "pdmesh/mesh.hpp"
#include "pdmesh/sdf.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <unordered_map>
#include <vector>

namespace pdmesh {

/// Samples with |value| below this are treated as lying on the surface.
inline const double kDefaultSurfaceBand = 10.0 * ProjectionConfig{}.tol;

/// Classifies a site. Samples inside the surface band become projections of
/// their sign; a sample with value exactly zero counts as a projection of a
/// positive sample. For projections only `of_sign` matters.
SiteClass classify_site(double value, bool is_projection, Sign of_sign, double band = kDefaultSurfaceBand);

/// Undirected triangulation edge, smaller id first.
struct EdgeKey {
    SiteId a = -1;
    SiteId b = -1;

    EdgeKey() = default;
    EdgeKey(SiteId u, SiteId v) : a(u < v ? u : v), b(u < v ? v : u) {}

    friend bool operator==(const EdgeKey&, const EdgeKey&) = default;
    friend auto operator<=>(const EdgeKey&, const EdgeKey&) = default;
};

struct EdgeKeyHash {
    std::size_t operator()(const EdgeKey& e) const noexcept
    {
        const auto k = (static_cast<std::uint64_t>(static_cast<std::uint32_t>(e.a)) << 32) |
                       static_cast<std::uint32_t>(e.b);
        return std::hash<std::uint64_t>{}(k * 0x9e3779b97f4a7c15ull);
    }
};

enum class DualRule : std::uint8_t {
    /// SampleNeg with ProjOfNeg: the projection point.
    NegProjection,
    /// SamplePos with ProjOfPos: the projection point.
    PosProjection,
    /// SampleNeg with SamplePos: linear zero crossing.
    ZeroCrossing,
    /// ProjOfNeg with ProjOfPos: the midpoint.
    Midpoint,
};

struct DualVertex {
    Point3 position;
    EdgeKey source_edge;
    DualRule rule = DualRule::ZeroCrossing;
};

/// Thrown for an edge whose endpoints share a category.
class SameCategoryEdge : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Surface vertex for a cross-category edge; symmetric in its arguments.
DualVertex edge_dual_vertex(const WeightedSite& v1, const WeightedSite& v2);

/// Triangle (size 3) or quad (size 4) of a mixed tet. `edges[i]` is the source
/// edge of polygon vertex i; the winding faces from Cat1 toward Cat2.
struct SurfacePatch {
    TetId tet = kOutside;
    std::uint64_t generation = 0;
    std::uint8_t size = 0;
    std::array<EdgeKey, 4> edges{};
    /// Indices into SurfaceMesh::vertices; filled by extract_patch.
    std::array<std::uint32_t, 4> vertices{};
};

/// Polygon over the cross edges of a tet, without any vertex table.
/// Returns nothing for a tet whose sites all share a category.
std::optional<SurfacePatch> patch_topology(const Tet& tet, TetId id, const std::array<SiteClass, 4>& classes);

using DualTable = std::unordered_map<EdgeKey, std::uint32_t, EdgeKeyHash>;

/// patch_topology plus vertex lookup. Throws std::logic_error when a cross
/// edge has no entry in `duals`.
std::optional<SurfacePatch> extract_patch(const Tet& tet, TetId id, const std::array<SiteClass, 4>& classes,
                                          const DualTable& duals);

/// Corner positions of the mixed-tet patch, computed directly from the sites.
/// Empty for non-mixed tets.
std::vector<Point3> patch_polygon(const Tetrahedralization& t, TetId id);

/// Splits a polygon of 3 or 4 corners into triangles (quads along the shorter
/// diagonal, ties to the 0-2 diagonal). Output indexes into the polygon.
std::vector<std::array<int, 3>> split_polygon(const Point3* corners, int size);

struct SurfaceMesh {
    /// Sorted by source edge.
    std::vector<DualVertex> vertices;
    DualTable vertex_index;
    /// In live-tet id order.
    std::vector<SurfacePatch> patches;
    /// Derived triangles; quads are split.
    std::vector<std::array<std::uint32_t, 3>> triangles;
    /// Owning patch of each derived triangle.
    std::vector<std::uint32_t> triangle_patch;

    /// Unwelded triangle soup view with one vertex per dual vertex.
    TriangleMesh to_triangle_mesh() const;
    /// Patch-level topology: edges are pairs of dual vertices on patch boundaries.
    TopologyReport patch_topology() const;
};

/// Dual vertices for every cross-category edge and a patch for every mixed tet.
SurfaceMesh extract_mesh(const Tetrahedralization& t);

/// Number of distinct cross-category edges among live tets.
std::size_t count_cross_edges(const Tetrahedralization& t);

} // namespace pdmesh
