#include "pdmesh/metrics.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>
#include <sstream>

using namespace pdmesh;

namespace {

// Quadratic-time references for the metric oracles.
double brute_nearest2(const Point3& q, const std::vector<Point3>& to, std::uint32_t* index = nullptr)
{
    double best = std::numeric_limits<double>::infinity();
    for (std::uint32_t i = 0; i < to.size(); ++i) {
        const double d = squared_distance(q, to[i]);
        if (d < best) {
            best = d;
            if (index) {
                *index = i;
            }
        }
    }
    return best;
}

MeshSampleSet random_set(std::size_t n, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    MeshSampleSet s;
    for (std::size_t i = 0; i < n; ++i) {
        s.points.push_back({u(rng), u(rng), u(rng)});
        Vec3 n{u(rng), u(rng), u(rng)};
        s.normals.push_back(n / norm(n));
    }
    return s;
}

TriangleMesh unit_square(double z, bool flip)
{
    TriangleMesh m;
    m.vertices = {{0, 0, z}, {1, 0, z}, {1, 1, z}, {0, 1, z}};
    m.faces = flip ? std::vector<std::array<std::uint32_t, 3>>{{0, 2, 1}, {0, 3, 2}}
                   : std::vector<std::array<std::uint32_t, 3>>{{0, 1, 2}, {0, 2, 3}};
    return m;
}

} // namespace

TEST_CASE("area-weighted sampling")
{
    SUBCASE("points lie in the triangle")
    {
        TriangleMesh m;
        m.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
        m.faces = {{0, 1, 2}};
        const auto s = sample_mesh(m, 3, 1);
        REQUIRE(s.size() == 3);
        for (std::size_t i = 0; i < 3; ++i) {
            const auto& p = s.points[i];
            CHECK(p.x >= 0.0);
            CHECK(p.y >= 0.0);
            CHECK(p.x + p.y <= 1.0 + 1e-15);
            CHECK(p.z == 0.0);
            CHECK(s.normals[i] == Vec3{0, 0, 1});
        }
    }
    SUBCASE("9:1 area split is respected within 3 sigma")
    {
        TriangleMesh m;
        m.vertices = {{0, 0, 0}, {3, 0, 0}, {0, 3, 0}, {10, 0, 0}, {11, 0, 0}, {10, 1, 0}};
        m.faces = {{0, 1, 2}, {3, 4, 5}};
        const std::size_t n = 10000;
        const auto s = sample_mesh(m, n, 7);
        std::size_t big = 0;
        for (const auto& p : s.points) {
            big += p.x < 5.0;
        }
        const double sigma = std::sqrt(n * 0.9 * 0.1);
        CHECK(std::abs(static_cast<double>(big) - 9000.0) <= 3.0 * sigma);
    }
    SUBCASE("determinism")
    {
        const auto m = unit_square(0.0, false);
        const auto a = sample_mesh(m, 500, 42);
        const auto b = sample_mesh(m, 500, 42);
        CHECK(a.points == b.points);
        CHECK(a.normals == b.normals);
        CHECK(sample_mesh(m, 500, 43).points != a.points);
    }
    SUBCASE("zero area")
    {
        TriangleMesh m;
        m.vertices = {{0, 0, 0}, {1, 0, 0}, {2, 0, 0}};
        m.faces = {{0, 1, 2}};
        CHECK_THROWS_AS(sample_mesh(m, 10, 1), std::invalid_argument);
        CHECK_THROWS_AS(sample_mesh(TriangleMesh{}, 10, 1), std::invalid_argument);
    }
}

TEST_CASE("kd-tree nearest neighbours equal brute force")
{
    const auto a = random_set(1000, 1);
    const auto b = random_set(1000, 2);
    const KdTree tree(b.points);
    for (const auto& q : a.points) {
        std::uint32_t idx = 0;
        const double d = brute_nearest2(q, b.points, &idx);
        const auto hit = tree.nearest(q);
        CHECK(hit.distance2 == d);
        CHECK(hit.index == idx);
    }
    // Duplicated points: the smaller index wins.
    std::vector<Point3> dup(50, Point3{0.5, 0.5, 0.5});
    dup.push_back({0, 0, 0});
    const KdTree t2(dup);
    CHECK(t2.nearest({0.5, 0.5, 0.6}).index == 0);
    CHECK_THROWS(KdTree(std::vector<Point3>{}).nearest({0, 0, 0}));
}

TEST_CASE("metrics against brute force on 200-point sets")
{
    const auto a = random_set(200, 11);
    const auto b = random_set(200, 12);
    double ab = 0.0, ba = 0.0, nab = 0.0, nba = 0.0;
    std::size_t pa = 0, pb = 0;
    const double tau = 0.2;
    for (std::size_t i = 0; i < 200; ++i) {
        std::uint32_t j = 0;
        const double d = brute_nearest2(a.points[i], b.points, &j);
        ab += d;
        nab += std::abs(dot(a.normals[i], b.normals[j]));
        pa += d < tau * tau;
        const double e = brute_nearest2(b.points[i], a.points, &j);
        ba += e;
        nba += std::abs(dot(b.normals[i], a.normals[j]));
        pb += e < tau * tau;
    }
    const double cd = 0.5 * (ab / 200 + ba / 200);
    const double nc = 0.5 * (nab / 200 + nba / 200);
    const double prec = pa / 200.0, rec = pb / 200.0;
    const double f1 = 2 * prec * rec / (prec + rec);
    CHECK(std::abs(chamfer(a, b) - cd) <= 1e-12);
    CHECK(std::abs(normal_consistency(a, b) - nc) <= 1e-12);
    CHECK(std::abs(f1_score(a, b, tau) - f1) <= 1e-12);
    const auto r = compare(a, b, tau);
    CHECK(r.cd == chamfer(a, b));
    CHECK(r.precision == prec);
    CHECK(r.recall == rec);
    CHECK(chamfer(a, b) == chamfer(b, a));
}

TEST_CASE("metric conventions")
{
    SUBCASE("identical sets")
    {
        const auto a = random_set(300, 5);
        CHECK(chamfer(a, a) == 0.0);
        CHECK(normal_consistency(a, a) == doctest::Approx(1.0).epsilon(1e-15));
        CHECK(f1_score(a, a) == 1.0);
    }
    SUBCASE("single points")
    {
        MeshSampleSet a, b;
        a.points = {{0, 0, 0}};
        a.normals = {{0, 0, 1}};
        b.points = {{0.3, -0.4, 1.2}};
        b.normals = {{0, 0, 1}};
        CHECK(chamfer(a, b) == doctest::Approx(0.09 + 0.16 + 1.44));
    }
    SUBCASE("flipped plane")
    {
        const auto a = sample_mesh(unit_square(0.0, false), 2000, 1);
        const auto b = sample_mesh(unit_square(0.0, true), 2000, 2);
        CHECK(b.normals[0] == Vec3{0, 0, -1});
        CHECK(normal_consistency(a, b) == doctest::Approx(1.0));
    }
    SUBCASE("concentric spheres two thresholds apart")
    {
        auto sphere_set = [](double r, std::uint64_t seed) {
            std::mt19937_64 rng(seed);
            std::normal_distribution<double> g;
            MeshSampleSet s;
            for (int i = 0; i < 5000; ++i) {
                const Vec3 d{g(rng), g(rng), g(rng)};
                s.points.push_back(d * (r / norm(d)));
                s.normals.push_back(d / norm(d));
            }
            return s;
        };
        const auto a = sphere_set(0.5, 1);
        const auto b = sphere_set(0.5 + 2 * kDefaultF1Threshold, 2);
        CHECK(f1_score(a, b) == 0.0);
    }
    SUBCASE("empty sets")
    {
        MeshSampleSet a, b = random_set(3, 1);
        CHECK_THROWS_AS(chamfer(a, b), std::invalid_argument);
        CHECK_THROWS_AS(compare(b, a), std::invalid_argument);
    }
    SUBCASE("report formatting")
    {
        MetricsReport r;
        r.cd = 2.5e-5;
        std::ostringstream out;
        r.write_text(out);
        CHECK(out.str().find("cd_x1e5: 2.5\n") != std::string::npos);
        CHECK(r.csv_row().rfind("2.5,", 0) == 0);
        CHECK(MetricsReport::csv_header().rfind("cd_x1e5,nc,f1", 0) == 0);
    }
}

TEST_CASE("marching cubes")
{
    SUBCASE("sphere at 64^3")
    {
        AnalyticField s("sphere:0.5");
        const auto m = marching_cubes(s, 64, kDefaultDomain);
        CHECK(s.query_count() == 64u * 64u * 64u);
        const auto r = analyze(m);
        CHECK(r.closed());
        CHECK(r.euler == 2);
        CHECK(r.components.size() == 1);
        const double cell_diag = std::sqrt(3.0) * 2.0 / 63.0;
        double worst = 0.0;
        for (const auto& p : m.vertices) {
            worst = std::max(worst, std::abs(norm(p) - 0.5));
        }
        CHECK(worst <= cell_diag);
        // Normals point from negative to positive values, i.e. outward.
        double volume = 0.0;
        for (const auto& f : m.faces) {
            volume += dot(m.vertices[f[0]], cross(m.vertices[f[1]], m.vertices[f[2]])) / 6.0;
        }
        CHECK(volume == doctest::Approx(4.0 / 3.0 * 3.141592653589793 * 0.125).epsilon(0.02));
    }
    SUBCASE("torus")
    {
        const auto m = marching_cubes(AnalyticField("torus:0.5,0.2"), 48, kDefaultDomain);
        const auto r = analyze(m);
        CHECK(r.closed());
        CHECK(r.euler == 0);
    }
    SUBCASE("all positive")
    {
        CHECK(marching_cubes(AnalyticField("sphere:0.1,5,5,5"), 16, kDefaultDomain).faces.empty());
    }
    SUBCASE("plane")
    {
        for (int res : {2, 5, 17, 33}) {
            // Node spacing that does not hit z = 0 exactly at odd counts.
            const auto m = marching_cubes(AnalyticField("plane:0,0,1"), res, kDefaultDomain);
            REQUIRE_FALSE(m.faces.empty());
            for (const auto& p : m.vertices) {
                CHECK(std::abs(p.z) <= 1e-6);
            }
            for (const auto& f : m.faces) {
                CHECK(cross(m.vertices[f[1]] - m.vertices[f[0]], m.vertices[f[2]] - m.vertices[f[0]]).z > 0.0);
            }
        }
    }
    SUBCASE("argument checks")
    {
        CHECK_THROWS_AS(marching_cubes(AnalyticField("sphere:0.5"), 1, kDefaultDomain), std::invalid_argument);
        CHECK_THROWS_AS(marching_cubes(std::vector<double>(7, 1.0), 2, kDefaultDomain), std::invalid_argument);
    }
}

TEST_CASE("budget resolution")
{
    CHECK(budget_resolution(27000) == 30);
    CHECK(budget_resolution(27001) == 31);
    CHECK(budget_resolution(125000) == 50);
    CHECK(budget_resolution(1) == 2);
    for (std::uint64_t q : {1000ull, 1001ull, 999ull, 85000ull, 4096000ull}) {
        const auto r = static_cast<std::uint64_t>(budget_resolution(q));
        CHECK(r * r * r >= q);
        CHECK((r - 1) * (r - 1) * (r - 1) < q);
    }
}
