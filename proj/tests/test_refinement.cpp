#include "pdmesh/metrics.hpp"
#include "pdmesh/refinement.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>
#include <map>
#include <random>
#include <sstream>

using namespace pdmesh;

namespace {

// Independent restatement of the three-point incenter rule.
double incenter_rule(const Point3& a, const Point3& b, const Point3& c, const AnalyticField& f)
{
    const Vec3 n = cross(b - a, c - a) / norm(cross(b - a, c - a));
    const double wa = norm(b - c), wb = norm(c - a), wc = norm(a - b);
    const Point3 in = (wa * a + wb * b + wc * c) / (wa + wb + wc);
    double sum = 0.0;
    for (auto [p, q] : {std::pair{a, b}, std::pair{b, c}, std::pair{c, a}}) {
        const Vec3 g = f.eval((in + p + q) / 3.0).gradient;
        sum += 0.5 * norm(cross(p - in, q - in)) * norm(g - dot(g, n) * n);
    }
    return sum;
}

std::string csv(const RunStats& s)
{
    std::ostringstream out;
    s.write_csv(out, false);
    return out.str();
}

} // namespace

TEST_CASE("RefineConfig validation")
{
    RefineConfig c;
    CHECK_NOTHROW(c.validate());
    c.init_resolution = 1;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = {};
    c.k_max = -1;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = {};
    c.eps = -1e-3;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = {};
    c.batch_size = 0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    CHECK(RefineConfig{}.surface_band() == doctest::Approx(kDefaultSurfaceBand));
}

TEST_CASE("triangle deviation")
{
    AnalyticField plane("plane:0,0,1");
    SUBCASE("aligned with the gradient")
    {
        plane.reset_query_count();
        const auto r = triangle_deviation({0, 0, 0}, {0.3, 0.1, 0}, {-0.2, 0.4, 0}, plane);
        CHECK(r.delta == 0.0);
        CHECK_FALSE(r.degenerate);
        CHECK(plane.query_count() == 3);
    }
    SUBCASE("orthogonal to the gradient")
    {
        // Unit area in the plane x = 0.
        const auto r = triangle_deviation({0, 0, 0}, {0, 2, 0}, {0, 0, 1}, plane);
        CHECK(r.delta == doctest::Approx(1.0).epsilon(1e-14));
    }
    SUBCASE("tilted plane gives area times sin")
    {
        const double t = 0.3;
        const auto r = triangle_deviation({0, 0, 0}, {1, 0, 0}, {0, std::cos(t), std::sin(t)}, plane);
        CHECK(r.delta == doctest::Approx(0.5 * std::sin(t)));
    }
    SUBCASE("degenerate")
    {
        plane.reset_query_count();
        const auto r = triangle_deviation({0, 0, 0}, {1, 0, 0}, {2, 0, 0}, plane);
        CHECK(r.degenerate);
        CHECK(r.delta == 0.0);
        CHECK(plane.query_count() == 0);
    }
    SUBCASE("matches an independent evaluation on the sphere")
    {
        const AnalyticField s("sphere:0.5");
        std::mt19937_64 rng(9);
        std::uniform_real_distribution<double> u(-0.6, 0.6);
        for (int i = 0; i < 100; ++i) {
            const Point3 a{u(rng), u(rng), u(rng)}, b{u(rng), u(rng), u(rng)}, c{u(rng), u(rng), u(rng)};
            CHECK(triangle_deviation(a, b, c, s).delta == doctest::Approx(incenter_rule(a, b, c, s)).epsilon(1e-12));
        }
    }
}

TEST_CASE("patch deviation")
{
    const AnalyticField plane("plane:0,0,1");
    const AnalyticField sphere("sphere:0.5");
    const Point3 tri[3] = {{0.5, 0, 0}, {0, 0.5, 0}, {0, 0, 0.5}};
    CHECK(patch_deviation(tri, 3, sphere) == triangle_deviation(tri[0], tri[1], tri[2], sphere).delta);
    const Point3 quad[4] = {{0, 0, 0}, {1, 0, 0}, {1.2, 1, 0}, {0, 0.8, 0}};
    CHECK(patch_deviation(quad, 4, plane) == 0.0);

    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(-0.5, 0.5);
    for (int i = 0; i < 50; ++i) {
        Point3 q[4];
        for (auto& p : q) {
            p = {u(rng), u(rng), u(rng)};
        }
        const bool short02 = squared_distance(q[0], q[2]) <= squared_distance(q[1], q[3]);
        const double expect =
            short02 ? triangle_deviation(q[0], q[1], q[2], sphere).delta + triangle_deviation(q[0], q[2], q[3], sphere).delta
                    : triangle_deviation(q[0], q[1], q[3], sphere).delta + triangle_deviation(q[1], q[2], q[3], sphere).delta;
        CHECK(patch_deviation(q, 4, sphere) == expect);
    }
}

TEST_CASE("surface must be detected")
{
    const AnalyticField far("sphere:0.2,5,5,5");
    CHECK_THROWS_AS(Refiner(far, RefineConfig{}), SurfaceNotDetected);
    const AnalyticField inside("sphere:3");
    CHECK_THROWS_AS(Refiner(inside, RefineConfig{}), DomainError);
}

TEST_CASE("a duplicate orthocenter is skipped")
{
    const AnalyticField f("sphere:0.4");
    RefineConfig cfg;
    cfg.k_max = 1000;
    Refiner r(f, cfg);
    for (int i = 0; i < 50; ++i) {
        r.step();
    }
    const auto top = r.peek();
    REQUIRE(top.has_value());
    const Point3 x = orthocenter(r.triangulation().weighted_tet(top->tet)).center;
    r.triangulation_for_testing().add_hidden_site_for_testing(x, 0.0, f.eval(x).value, SiteClass::SamplePos);
    const std::size_t before = r.queue_size();
    const auto inserted = r.inserted();
    const auto out = r.step();
    CHECK(out.kind == StepOutcome::Kind::Skipped);
    CHECK(out.reason == SkipReason::Duplicate);
    CHECK(out.tet == top->tet);
    CHECK(r.queue_size() == before - 1);
    CHECK(r.inserted() == inserted);
    CHECK(r.stats().skipped == 1);
    // The skipped tet is still live and keeps its parked entry.
    CHECK(r.triangulation().is_live(top->tet));
    CHECK(r.audit_heap().bijective());
}

TEST_CASE("sphere run: heap audit, targeting and locality")
{
    const AnalyticField f("sphere:0.5");
    const AnalyticField probe("sphere:0.5");
    RefineConfig cfg;
    cfg.k_max = 1500;
    Refiner r(f, cfg);
    CHECK(r.audit_heap().bijective());
    CHECK(r.inserted() == 0);
    CHECK(r.stats().initial_sites > 8);

    int checked = 0;
    while (!r.finished()) {
        const auto top = r.peek();
        if (!top) {
            break;
        }
        const auto& t = r.triangulation();
        const std::uint64_t gen = t.tet(top->tet).generation;
        CHECK(gen == top->generation);

        // Surviving patches keep their corners: dual vertices are per edge.
        std::map<TetId, std::pair<std::uint64_t, std::vector<Point3>>> before;
        if (checked % 100 == 0) {
            for (TetId id = 0; id < static_cast<TetId>(t.tets().size()); ++id) {
                if (t.is_live(id)) {
                    before.emplace(id, std::pair{t.tet(id).generation, patch_polygon(t, id)});
                }
            }
        }
        const auto o = orthocenter(t.weighted_tet(top->tet));
        const double v = probe.eval(o.center).value;
        const bool conflicts =
            in_conflict_perturbed(t.weighted_tet(top->tet), {o.center, v * v, static_cast<std::int64_t>(t.sites().size())}) ==
            Sign::Positive;
        const auto site_count = t.sites().size();

        const auto out = r.step();
        if (out.kind == StepOutcome::Kind::BudgetReached) {
            break;
        }
        CHECK(out.tet == top->tet);
        CHECK(out.delta == top->delta);
        if (out.kind == StepOutcome::Kind::Inserted && out.reason == SkipReason::None) {
            CHECK(t.sites().size() > site_count);
            // p_c lies in the power cell it was aimed at, so that tet is gone.
            if (conflicts) {
                CHECK((!t.is_live(top->tet) || t.tet(top->tet).generation != gen));
            }
        }
        for (const auto& [id, old] : before) {
            if (t.is_live(id) && t.tet(id).generation == old.first) {
                CHECK(patch_polygon(t, id) == old.second);
            }
        }
        if (++checked % 250 == 0) {
            const auto audit = r.audit_heap();
            CHECK(audit.bijective());
            CHECK(audit.missing == 0);
            CHECK(audit.duplicated == 0);
        }
    }
    CHECK(r.inserted() >= cfg.k_max);
    CHECK(r.inserted() <= cfg.k_max + 1);
    CHECK(r.triangulation().verify_regularity().empty());

    // Queries per step are bounded by scoring the created patches plus one projection.
    const auto& steps = r.stats().steps;
    REQUIRE(steps.size() > 100);
    for (std::size_t i = 1; i < steps.size(); ++i) {
        CHECK(steps[i].queries >= steps[i - 1].queries);
        CHECK(steps[i].inserted >= steps[i - 1].inserted);
        const std::uint64_t dq = steps[i].queries - steps[i - 1].queries;
        CHECK(dq <= 3 * 2 * (4 * steps[i].cavity + 8) + cfg.projection.max_iters + 1);
    }
    const double early = static_cast<double>(steps[steps.size() / 2].queries - steps[0].queries) /
                         static_cast<double>(steps[steps.size() / 2].inserted - steps[0].inserted);
    const double late = static_cast<double>(steps.back().queries - steps[steps.size() / 2].queries) /
                        static_cast<double>(steps.back().inserted - steps[steps.size() / 2].inserted);
    CHECK(late <= 2.0 * early);

    const auto mesh = r.extract();
    const auto topo = mesh.patch_topology();
    CHECK(topo.closed());
    CHECK(topo.euler == 2);
    CHECK(topo.components.size() == 1);
}

TEST_CASE("plane field: initialization alone is exact")
{
    const AnalyticField f("plane:0,0,1");
    RefineConfig cfg;
    cfg.k_max = 0;
    cfg.allow_open_boundary = true;
    Refiner r(f, cfg);
    CHECK(r.step().kind == StepOutcome::Kind::BudgetReached);
    CHECK(r.finished());
    const auto m = r.extract();
    REQUIRE_FALSE(m.patches.empty());
    double worst = 0.0;
    for (const auto& p : m.patches) {
        Point3 c[4];
        for (int i = 0; i < p.size; ++i) {
            c[i] = m.vertices[p.vertices[i]].position;
            CHECK(std::abs(c[i].z) <= 1e-12);
        }
        worst = std::max(worst, patch_deviation(c, p.size, f));
    }
    CHECK(worst <= 1e-12);
    const auto topo = m.patch_topology();
    CHECK(topo.nonmanifold_edges == 0);
    CHECK(topo.components.size() == 1);
    CHECK(topo.euler == 1);
}

TEST_CASE("eps stops the loop before inserting")
{
    const AnalyticField f("sphere:0.5");
    RefineConfig cfg;
    cfg.eps = 1e9;
    Refiner r(f, cfg);
    const auto q = r.queue_size();
    const auto out = r.step();
    CHECK(out.kind == StepOutcome::Kind::Converged);
    CHECK(r.finished());
    CHECK(r.inserted() == 0);
    CHECK(r.queue_size() == q);
    CHECK(r.step().kind == StepOutcome::Kind::Exhausted);
}

TEST_CASE("runs are deterministic and batching keeps the invariants")
{
    const AnalyticField f("torus:0.5,0.2");
    RefineConfig cfg;
    cfg.k_max = 3000;
    const auto a = run(f, cfg);
    const auto b = run(f, cfg);
    CHECK(csv(a.stats) == csv(b.stats));
    CHECK(a.mesh.vertices.size() == b.mesh.vertices.size());
    CHECK(a.mesh.triangles == b.mesh.triangles);
    CHECK(a.sites == b.sites);
    CHECK(csv(a.stats).rfind("iter,inserted,delta,queries,cavity,ms\n", 0) == 0);

    cfg.batch_size = 4;
    Refiner r(f, cfg);
    r.run_to_completion();
    CHECK(r.audit_heap().bijective());
    CHECK(r.inserted() >= cfg.k_max);
    const auto topo = r.extract().patch_topology();
    CHECK(topo.closed());
    CHECK(topo.euler == 0);
    const auto c = run(f, cfg);
    CHECK(csv(c.stats) == csv(r.stats()));
}

TEST_CASE("chamfer to the exact surface does not grow with the budget")
{
    // Area-uniform samples of the exact surfaces; the torus parameter v is
    // rejection-sampled with density proportional to R + r cos v.
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> g;
    const double pi = std::acos(-1.0);
    MeshSampleSet sphere, torus;
    while (sphere.size() < 100000) {
        Vec3 d{g(rng), g(rng), g(rng)};
        d = d / norm(d);
        sphere.points.push_back(d * 0.5);
        sphere.normals.push_back(d);
    }
    while (torus.size() < 100000) {
        const double a = 2 * pi * u(rng), v = 2 * pi * u(rng);
        if (u(rng) * 0.7 > 0.5 + 0.2 * std::cos(v)) {
            continue;
        }
        const Vec3 n{std::cos(v) * std::cos(a), std::cos(v) * std::sin(a), std::sin(v)};
        torus.points.push_back(Point3{0.5 * std::cos(a), 0.5 * std::sin(a), 0.0} + n * 0.2);
        torus.normals.push_back(n);
    }

    for (const auto& [spec, truth] : {std::pair{"sphere:0.5", &sphere}, std::pair{"torus:0.5,0.2", &torus}}) {
        CAPTURE(spec);
        double previous = std::numeric_limits<double>::infinity();
        for (std::int64_t k : {1000, 2000, 5000}) {
            const AnalyticField f(spec);
            RefineConfig cfg;
            cfg.k_max = k;
            const auto r = run(f, cfg);
            const double cd = chamfer(sample_mesh(weld(r.mesh.to_triangle_mesh()), 100000, 5), *truth);
            CAPTURE(k);
            CHECK(cd <= previous);
            previous = cd;
        }
    }
}
