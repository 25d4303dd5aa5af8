#include "pdmesh/extraction.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>

namespace pdmesh {

namespace {

// The twelve even permutations of (0,1,2,3).
constexpr std::array<std::array<int, 4>, 12> kEven = {{
    {0, 1, 2, 3}, {0, 2, 3, 1}, {0, 3, 1, 2}, {1, 0, 3, 2}, {1, 2, 0, 3}, {1, 3, 2, 0},
    {2, 0, 1, 3}, {2, 1, 3, 0}, {2, 3, 0, 1}, {3, 0, 2, 1}, {3, 1, 0, 2}, {3, 2, 1, 0},
}};

} // namespace

SiteClass classify_site(double value, bool is_projection, Sign of_sign, double band)
{
    if (!std::isfinite(value)) {
        throw std::invalid_argument("site value must be finite");
    }
    if (is_projection) {
        return of_sign == Sign::Negative ? SiteClass::ProjOfNeg : SiteClass::ProjOfPos;
    }
    if (value == 0.0) {
        spdlog::debug("sample with zero field value classified as ProjOfPos");
        return SiteClass::ProjOfPos;
    }
    if (std::abs(value) < band) {
        return value < 0.0 ? SiteClass::ProjOfNeg : SiteClass::ProjOfPos;
    }
    return value < 0.0 ? SiteClass::SampleNeg : SiteClass::SamplePos;
}

DualVertex edge_dual_vertex(const WeightedSite& v1, const WeightedSite& v2)
{
    if (category(v1.site_class) == category(v2.site_class)) {
        throw SameCategoryEdge("dual vertex requested for a same-category edge");
    }
    DualVertex d;
    d.source_edge = EdgeKey(v1.id, v2.id);
    // Order so that `a` is the sample (or the negative-side site).
    const WeightedSite* a = &v1;
    const WeightedSite* b = &v2;
    if (is_projection(a->site_class) && !is_projection(b->site_class)) {
        std::swap(a, b);
    }
    const bool pa = is_projection(a->site_class);
    const bool pb = is_projection(b->site_class);
    if (!pa && pb) {
        d.rule = a->site_class == SiteClass::SampleNeg ? DualRule::NegProjection : DualRule::PosProjection;
        d.position = b->position;
    } else if (!pa && !pb) {
        if (a->site_class != SiteClass::SampleNeg) {
            std::swap(a, b);
        }
        d.rule = DualRule::ZeroCrossing;
        const double f1 = a->value;
        const double f2 = b->value;
        d.position = (a->position * f2 - b->position * f1) / (f2 - f1);
    } else {
        if (a->site_class != SiteClass::ProjOfNeg) {
            std::swap(a, b);
        }
        d.rule = DualRule::Midpoint;
        d.position = (a->position + b->position) * 0.5;
    }
    return d;
}

std::optional<SurfacePatch> patch_topology(const Tet& tet, TetId id, const std::array<SiteClass, 4>& classes)
{
    int cat1 = 0;
    for (auto c : classes) {
        cat1 += category(c) == Category::Cat1;
    }
    if (cat1 == 0 || cat1 == 4) {
        return std::nullopt;
    }
    auto is1 = [&](int i) { return category(classes[i]) == Category::Cat1; };
    SurfacePatch p;
    p.tet = id;
    p.generation = tet.generation;
    auto e = [&](int i, int j) { return EdgeKey(tet.v[i], tet.v[j]); };
    if (cat1 == 2) {
        for (const auto& q : kEven) {
            if (is1(q[0]) && is1(q[1])) {
                const int a = q[0], b = q[1], c = q[2], d = q[3];
                p.size = 4;
                p.edges = {e(a, c), e(a, d), e(b, d), e(b, c)};
                return p;
            }
        }
    } else {
        const bool single_is_cat1 = cat1 == 1;
        for (const auto& q : kEven) {
            if (is1(q[0]) == single_is_cat1) {
                const int a = q[0], b = q[1], c = q[2], d = q[3];
                p.size = 3;
                if (single_is_cat1) {
                    p.edges = {e(a, b), e(a, c), e(a, d), EdgeKey{}};
                } else {
                    p.edges = {e(a, b), e(a, d), e(a, c), EdgeKey{}};
                }
                return p;
            }
        }
    }
    throw std::logic_error("no even permutation matches the tet split");
}

std::optional<SurfacePatch> extract_patch(const Tet& tet, TetId id, const std::array<SiteClass, 4>& classes,
                                          const DualTable& duals)
{
    auto p = patch_topology(tet, id, classes);
    if (!p) {
        return p;
    }
    for (int i = 0; i < p->size; ++i) {
        auto it = duals.find(p->edges[i]);
        if (it == duals.end()) {
            throw std::logic_error("missing dual vertex for a cross-category edge");
        }
        p->vertices[i] = it->second;
    }
    return p;
}

namespace {

std::array<SiteClass, 4> tet_classes(const Tetrahedralization& t, const Tet& tet)
{
    return {t.site(tet.v[0]).site_class, t.site(tet.v[1]).site_class, t.site(tet.v[2]).site_class,
            t.site(tet.v[3]).site_class};
}

} // namespace

std::vector<Point3> patch_polygon(const Tetrahedralization& t, TetId id)
{
    const Tet& tet = t.tet(id);
    const auto p = patch_topology(tet, id, tet_classes(t, tet));
    if (!p) {
        return {};
    }
    std::vector<Point3> out(p->size);
    for (int i = 0; i < p->size; ++i) {
        out[i] = edge_dual_vertex(t.site(p->edges[i].a), t.site(p->edges[i].b)).position;
    }
    return out;
}

std::vector<std::array<int, 3>> split_polygon(const Point3* c, int size)
{
    if (size == 3) {
        return {{0, 1, 2}};
    }
    if (size != 4) {
        throw std::invalid_argument("patches have 3 or 4 corners");
    }
    if (squared_distance(c[0], c[2]) <= squared_distance(c[1], c[3])) {
        return {{0, 1, 2}, {0, 2, 3}};
    }
    return {{0, 1, 3}, {1, 2, 3}};
}

SurfaceMesh extract_mesh(const Tetrahedralization& t)
{
    SurfaceMesh mesh;
    std::vector<SurfacePatch> patches;
    std::vector<EdgeKey> cross;
    for (TetId id = 0; id < static_cast<TetId>(t.tets().size()); ++id) {
        const Tet& tet = t.tets()[id];
        if (!tet.alive) {
            continue;
        }
        if (auto p = patch_topology(tet, id, tet_classes(t, tet))) {
            for (int i = 0; i < p->size; ++i) {
                cross.push_back(p->edges[i]);
            }
            patches.push_back(*p);
        }
    }
    std::sort(cross.begin(), cross.end());
    cross.erase(std::unique(cross.begin(), cross.end()), cross.end());

    mesh.vertices.reserve(cross.size());
    mesh.vertex_index.reserve(cross.size());
    for (const auto& e : cross) {
        mesh.vertex_index.emplace(e, static_cast<std::uint32_t>(mesh.vertices.size()));
        mesh.vertices.push_back(edge_dual_vertex(t.site(e.a), t.site(e.b)));
    }

    mesh.patches.reserve(patches.size());
    for (auto& p : patches) {
        for (int i = 0; i < p.size; ++i) {
            p.vertices[i] = mesh.vertex_index.at(p.edges[i]);
        }
        Point3 corners[4];
        for (int i = 0; i < p.size; ++i) {
            corners[i] = mesh.vertices[p.vertices[i]].position;
        }
        const auto patch_id = static_cast<std::uint32_t>(mesh.patches.size());
        for (const auto& tri : split_polygon(corners, p.size)) {
            mesh.triangles.push_back({p.vertices[tri[0]], p.vertices[tri[1]], p.vertices[tri[2]]});
            mesh.triangle_patch.push_back(patch_id);
        }
        mesh.patches.push_back(p);
    }
    return mesh;
}

TriangleMesh SurfaceMesh::to_triangle_mesh() const
{
    TriangleMesh m;
    m.vertices.reserve(vertices.size());
    for (const auto& v : vertices) {
        m.vertices.push_back(v.position);
    }
    m.faces = triangles;
    return m;
}

TopologyReport SurfaceMesh::patch_topology() const
{
    std::vector<std::uint32_t> idx;
    std::vector<std::uint8_t> sizes;
    idx.reserve(patches.size() * 4);
    sizes.reserve(patches.size());
    for (const auto& p : patches) {
        idx.insert(idx.end(), p.vertices.begin(), p.vertices.begin() + p.size);
        sizes.push_back(p.size);
    }
    return analyze_polygons(idx, sizes);
}

std::size_t count_cross_edges(const Tetrahedralization& t)
{
    std::vector<EdgeKey> edges;
    for (const auto& tet : t.tets()) {
        if (!tet.alive) {
            continue;
        }
        for (int i = 0; i < 4; ++i) {
            for (int j = i + 1; j < 4; ++j) {
                if (category(t.site(tet.v[i]).site_class) != category(t.site(tet.v[j]).site_class)) {
                    edges.emplace_back(tet.v[i], tet.v[j]);
                }
            }
        }
    }
    std::sort(edges.begin(), edges.end());
    return static_cast<std::size_t>(std::unique(edges.begin(), edges.end()) - edges.begin());
}

} // namespace pdmesh
