#include "mc_tables.hpp"
#include "pdmesh/metrics.hpp"

#include <stdexcept>
#include <unordered_map>

namespace pdmesh {

namespace {

// Cell corner offsets in table order and the corners joined by each table edge.
constexpr int kCorner[8][3] = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0},
                               {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}};
constexpr int kEdge[12][2] = {{0, 1}, {1, 2}, {2, 3}, {3, 0}, {4, 5}, {5, 6},
                              {6, 7}, {7, 4}, {0, 4}, {1, 5}, {2, 6}, {3, 7}};

} // namespace

TriangleMesh marching_cubes(const std::vector<double>& values, int resolution, const Box3& domain)
{
    if (resolution < 2) {
        throw std::invalid_argument("marching cubes needs at least 2 nodes per axis");
    }
    const auto n = static_cast<std::size_t>(resolution);
    if (values.size() != n * n * n) {
        throw std::invalid_argument("value count does not match the resolution");
    }
    const Vec3 h = domain.extent() / static_cast<double>(resolution - 1);
    auto node_index = [&](std::size_t i, std::size_t j, std::size_t k) { return (k * n + j) * n + i; };
    auto node_pos = [&](std::size_t i, std::size_t j, std::size_t k) {
        return Point3{domain.lo.x + i * h.x, domain.lo.y + j * h.y, domain.lo.z + k * h.z};
    };

    TriangleMesh mesh;
    // Key: lower node index * 3 + axis of the grid edge.
    std::unordered_map<std::uint64_t, std::uint32_t> edge_vertex;
    auto vertex_on = [&](std::size_t ci, std::size_t cj, std::size_t ck, int e) {
        const int* a = kCorner[kEdge[e][0]];
        const int* b = kCorner[kEdge[e][1]];
        std::size_t ia[3] = {ci + a[0], cj + a[1], ck + a[2]};
        std::size_t ib[3] = {ci + b[0], cj + b[1], ck + b[2]};
        int axis = 0;
        while (ia[axis] == ib[axis]) {
            ++axis;
        }
        if (ib[axis] < ia[axis]) {
            std::swap(ia, ib);
        }
        const std::size_t lo = node_index(ia[0], ia[1], ia[2]);
        const std::uint64_t key = static_cast<std::uint64_t>(lo) * 3 + axis;
        auto [it, fresh] = edge_vertex.try_emplace(key, static_cast<std::uint32_t>(mesh.vertices.size()));
        if (fresh) {
            const double va = values[lo];
            const double vb = values[node_index(ib[0], ib[1], ib[2])];
            const Point3 pa = node_pos(ia[0], ia[1], ia[2]);
            const Point3 pb = node_pos(ib[0], ib[1], ib[2]);
            const double t = va / (va - vb);
            mesh.vertices.push_back(pa + (pb - pa) * t);
        }
        return it->second;
    };

    for (std::size_t k = 0; k + 1 < n; ++k) {
        for (std::size_t j = 0; j + 1 < n; ++j) {
            for (std::size_t i = 0; i + 1 < n; ++i) {
                int cube = 0;
                for (int c = 0; c < 8; ++c) {
                    if (values[node_index(i + kCorner[c][0], j + kCorner[c][1], k + kCorner[c][2])] < 0.0) {
                        cube |= 1 << c;
                    }
                }
                const auto* tri = detail::kMcTriTable[cube];
                for (int t = 0; tri[t] >= 0; t += 3) {
                    // The table winds toward the negative corners; reverse for outward normals.
                    mesh.faces.push_back({vertex_on(i, j, k, tri[t]), vertex_on(i, j, k, tri[t + 2]),
                                          vertex_on(i, j, k, tri[t + 1])});
                }
            }
        }
    }
    return mesh;
}

TriangleMesh marching_cubes(const ScalarField& field, int resolution, const Box3& domain)
{
    if (resolution < 2) {
        throw std::invalid_argument("marching cubes needs at least 2 nodes per axis");
    }
    const auto n = static_cast<std::size_t>(resolution);
    const Vec3 h = domain.extent() / static_cast<double>(resolution - 1);
    std::vector<double> values;
    values.reserve(n * n * n);
    for (std::size_t k = 0; k < n; ++k) {
        for (std::size_t j = 0; j < n; ++j) {
            for (std::size_t i = 0; i < n; ++i) {
                values.push_back(field.eval({domain.lo.x + i * h.x, domain.lo.y + j * h.y, domain.lo.z + k * h.z}).value);
            }
        }
    }
    return marching_cubes(values, resolution, domain);
}

} // namespace pdmesh
