#pragma once

#include "pdmesh/geometry.hpp"
#include "pdmesh/mesh.hpp"
#include "pdmesh/sdf.hpp"

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

namespace pdmesh {

struct MeshSampleSet {
    std::vector<Point3> points;
    /// Unit face normals.
    std::vector<Vec3> normals;
    std::uint64_t seed = 0;

    std::size_t size() const { return points.size(); }
};

/// Area-weighted uniform samples. Deterministic for a given seed. Throws
/// std::invalid_argument when the mesh has no positive-area face.
MeshSampleSet sample_mesh(const TriangleMesh& mesh, std::size_t n, std::uint64_t seed);

/// Static 3-d tree over a point set for exact nearest-neighbour queries.
class KdTree {
public:
    explicit KdTree(const std::vector<Point3>& points);

    struct Hit {
        std::uint32_t index = 0;
        double distance2 = 0.0;
    };

    /// Exact nearest neighbour; ties go to the smaller index.
    Hit nearest(const Point3& q) const;

private:
    struct Node {
        std::uint32_t begin, end;
        std::int32_t left = -1, right = -1;
        std::uint8_t axis = 0;
        double split = 0.0;
    };

    std::int32_t build(std::uint32_t begin, std::uint32_t end);
    void search(std::int32_t node, const Point3& q, Hit& best) const;

    const std::vector<Point3>& points_;
    std::vector<std::uint32_t> order_;
    std::vector<Node> nodes_;
    std::int32_t root_ = -1;
};

/// For each point of `from`, its nearest neighbour in `to`.
std::vector<KdTree::Hit> nearest_neighbors(const std::vector<Point3>& from, const std::vector<Point3>& to);

/// Symmetric L2 Chamfer: half the sum of the two mean squared nearest distances.
double chamfer(const MeshSampleSet& a, const MeshSampleSet& b);
/// Symmetric mean of |n . n_nearest|.
double normal_consistency(const MeshSampleSet& a, const MeshSampleSet& b);
inline constexpr double kDefaultF1Threshold = 0.005;
/// Harmonic mean of precision (a within tau of b) and recall (b within tau of a).
double f1_score(const MeshSampleSet& a, const MeshSampleSet& b, double tau = kDefaultF1Threshold);

struct MetricsReport {
    /// Mean squared distances; the 1e5 display factor is applied when formatting.
    double cd = 0.0;
    double nc = 0.0;
    double f1 = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double tau = kDefaultF1Threshold;
    std::size_t samples_a = 0;
    std::size_t samples_b = 0;
    double seconds = 0.0;

    /// `key: value` lines, starting with a line that states the CD convention.
    void write_text(std::ostream& out) const;
    static std::string csv_header();
    std::string csv_row() const;
};

/// All three metrics from one pair of nearest-neighbour passes.
MetricsReport compare(const MeshSampleSet& a, const MeshSampleSet& b, double tau = kDefaultF1Threshold);

/// Lookup-table marching cubes over `resolution` nodes per axis spanning
/// `domain`, with linear interpolation along cell edges. Vertices are shared
/// between cells; normals point from negative to positive values. Costs
/// resolution^3 field queries.
TriangleMesh marching_cubes(const ScalarField& field, int resolution, const Box3& domain = kDefaultDomain);

/// Same, over already sampled values (x-fastest).
TriangleMesh marching_cubes(const std::vector<double>& values, int resolution, const Box3& domain);

/// Grid resolution whose node count matches a field-query budget.
int budget_resolution(std::uint64_t queries);

} // namespace pdmesh
