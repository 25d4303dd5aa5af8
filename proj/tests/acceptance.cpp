// Acceptance checks: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include "pdmesh/cli.hpp"
#include "pdmesh/metrics.hpp"
#include "pdmesh/refinement.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <memory>
#include <random>
#include <sstream>
#include <string>

using namespace pdmesh;

namespace {

constexpr double kPi = 3.141592653589793;

int failures = 0;

void report(int id, const char* name, bool ok, const std::string& detail)
{
    std::printf("[%s] %d %s: %s\n", ok ? "PASS" : "FAIL", id, name, detail.c_str());
    std::fflush(stdout);
    failures += !ok;
}

template <typename... Args>
std::string strf(const char* f, Args... args)
{
    char buf[1024];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

struct Run {
    std::unique_ptr<AnalyticField> field;
    std::unique_ptr<Refiner> refiner;
};

Run start(const std::string& spec, std::int64_t k_max)
{
    Run r;
    r.field = analytic_field(spec);
    RefineConfig cfg;
    cfg.k_max = k_max;
    r.refiner = std::make_unique<Refiner>(*r.field, cfg);
    return r;
}

void step_until(Refiner& r, std::int64_t inserted)
{
    while (!r.finished() && r.inserted() < inserted) {
        r.step();
    }
}

// Dense samples on the exact sphere |x| = r.
MeshSampleSet analytic_sphere_samples(double r, std::size_t n, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    MeshSampleSet s;
    s.seed = seed;
    for (std::size_t i = 0; i < n; ++i) {
        Vec3 d{g(rng), g(rng), g(rng)};
        d = d / norm(d);
        s.points.push_back(d * r);
        s.normals.push_back(d);
    }
    return s;
}

constexpr std::size_t kMetricSamples = 100'000;

double chamfer_to_sphere(const TriangleMesh& m, const MeshSampleSet& truth)
{
    return chamfer(sample_mesh(m, kMetricSamples, 17), truth);
}

// ---------------------------------------------------------------------------

void regularity_oracle()
{
    const auto t0 = std::chrono::steady_clock::now();
    const AnalyticField f("sphere:0.5");
    std::array<FieldSample, 8> corners;
    for (int i = 0; i < 8; ++i) {
        corners[i] = f.eval(kDefaultDomain.corner(i));
    }
    auto t = Tetrahedralization::init_domain(kDefaultDomain, corners);
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> u(-0.999, 0.999);
    std::size_t hidden = 0;
    for (int i = 0; i < 1000; ++i) {
        const Point3 p{u(rng), u(rng), u(rng)};
        const double v = f.eval(p).value;
        hidden += t.insert(p, v * v, v, v < 0 ? SiteClass::SampleNeg : SiteClass::SamplePos).status ==
                  InsertStatus::Hidden;
    }
    const auto violations = t.verify_regularity();
    const double secs = seconds_since(t0);
    report(1, "regularity oracle", violations.empty() && secs < 60.0,
           strf("1000 sites, %zu hidden, %zu live tets, %zu violations, %.2f s", hidden, t.live_tet_count(),
               violations.size(), secs));
}

std::size_t penetrations(const Tetrahedralization& t, const SurfaceMesh& m, double& worst)
{
    std::size_t bad = 0;
    for (const auto& d : m.vertices) {
        for (SiteId id : {d.source_edge.a, d.source_edge.b}) {
            const auto& s = t.site(id);
            const double p = squared_distance(d.position, s.position) - s.value * s.value;
            worst = std::min(worst, p);
            bad += p < -1e-9;
        }
    }
    return bad;
}

struct TopologyCheck {
    bool ok = false;
    std::string detail;
};

TopologyCheck topology(const SurfaceMesh& m, std::size_t components, long euler_each)
{
    const auto patches = m.patch_topology();
    const auto welded = analyze(weld(m.to_triangle_mesh()));
    bool ok = patches.closed() && patches.components.size() == components && welded.closed() &&
              welded.components.size() == components;
    std::string chis;
    for (const auto& c : patches.components) {
        ok = ok && c.euler == euler_each;
        chis += (chis.empty() ? "" : ",") + std::to_string(c.euler);
    }
    return {ok, strf("%zu comps chi=[%s] boundary=%zu nonmanifold=%zu, welded chi=%ld closed=%d", patches.components.size(),
                    chis.c_str(), patches.boundary_edges, patches.nonmanifold_edges, welded.euler, welded.closed())};
}

void deviation_oracle()
{
    const AnalyticField sphere("sphere:0.5");
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> g;
    double worst = 0.0, ratio_sum = 0.0;
    int within = 0;
    for (int n = 0; n < 100; ++n) {
        // Random triangle in the tangent plane at a random sphere point, shifted so
        // its incenter is the tangency point.
        Vec3 d{g(rng), g(rng), g(rng)};
        d = d / norm(d);
        const Vec3 helper = std::abs(d.x) < 0.9 ? Vec3{1, 0, 0} : Vec3{0, 1, 0};
        const Vec3 e1 = cross(d, helper) / norm(cross(d, helper));
        const Vec3 e2 = cross(d, e1);
        double xy[3][2];
        double area2 = 0.0;
        do {
            for (auto& v : xy) {
                const double rad = 0.02 + 0.08 * u(rng), ang = 2 * kPi * u(rng);
                v[0] = rad * std::cos(ang);
                v[1] = rad * std::sin(ang);
            }
            area2 = (xy[1][0] - xy[0][0]) * (xy[2][1] - xy[0][1]) - (xy[2][0] - xy[0][0]) * (xy[1][1] - xy[0][1]);
        } while (std::abs(area2) < 1e-3);
        Point3 p[3];
        for (int i = 0; i < 3; ++i) {
            p[i] = e1 * xy[i][0] + e2 * xy[i][1];
        }
        const double la = distance(p[1], p[2]), lb = distance(p[2], p[0]), lc = distance(p[0], p[1]);
        const Point3 in = (p[0] * la + p[1] * lb + p[2] * lc) / (la + lb + lc);
        for (auto& q : p) {
            q = q - in + d * 0.5;
        }
        const double delta = triangle_deviation(p[0], p[1], p[2], sphere).delta;

        // Monte Carlo estimate of the area integral of the gradient's rejection.
        const Vec3 nrm = cross(p[1] - p[0], p[2] - p[0]);
        const double area = 0.5 * norm(nrm);
        const Vec3 unit = nrm / norm(nrm);
        double sum = 0.0;
        for (int k = 0; k < 1000; ++k) {
            const double s = std::sqrt(u(rng)), t = u(rng);
            const Point3 x = p[0] * (1 - s) + p[1] * (s * (1 - t)) + p[2] * (s * t);
            const Vec3 grad = sphere.eval(x).gradient;
            sum += norm(grad - unit * dot(grad, unit));
        }
        const double integral = area * sum / 1000.0;
        const double rel = std::abs(delta - integral) / integral;
        worst = std::max(worst, rel);
        ratio_sum += delta / integral;
        within += rel <= 0.10;
    }

    const AnalyticField plane("plane:0,0,1");
    double plane_max = 0.0;
    std::uniform_real_distribution<double> c(-0.8, 0.8);
    for (int n = 0; n < 100; ++n) {
        const double z = n % 2 ? 0.0 : c(rng);
        const Point3 a{c(rng), c(rng), z}, b{c(rng), c(rng), z}, e{c(rng), c(rng), z};
        plane_max = std::max(plane_max, triangle_deviation(a, b, e, plane).delta);
    }
    report(5, "deviation-metric oracle", within == 100 && plane_max == 0.0,
           strf("%d/100 tangent triangles within 10%% of Monte Carlo (worst %.1f%%, mean ratio %.3f); "
               "coplanar max delta %g",
               within, 100 * worst, ratio_sum / 100, plane_max));
}

struct Window {
    double ms = 0.0;
    std::size_t cavity = 0;
    std::int64_t sites = 0;
};

Window window(const RunStats& s, std::int64_t first, std::int64_t last)
{
    Window w;
    std::int64_t prev = 0;
    for (const auto& r : s.steps) {
        if (r.inserted > prev && prev + 1 >= first && r.inserted <= last) {
            w.ms += r.ms;
            w.cavity += r.cavity;
            w.sites += r.inserted - prev;
        }
        prev = r.inserted;
    }
    return w;
}

void metric_oracles()
{
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    auto random_set = [&](std::size_t n) {
        MeshSampleSet s;
        for (std::size_t i = 0; i < n; ++i) {
            s.points.push_back({u(rng), u(rng), u(rng)});
            const Vec3 v{u(rng), u(rng), u(rng)};
            s.normals.push_back(v / norm(v));
        }
        return s;
    };
    const auto a = random_set(200), b = random_set(200);
    const double tau = 0.25;
    auto one_way = [&](const MeshSampleSet& from, const MeshSampleSet& to, double& d2, double& nc, double& hit) {
        for (std::size_t i = 0; i < from.size(); ++i) {
            double best = std::numeric_limits<double>::infinity();
            std::size_t j = 0;
            for (std::size_t k = 0; k < to.size(); ++k) {
                const double d = squared_distance(from.points[i], to.points[k]);
                if (d < best) {
                    best = d;
                    j = k;
                }
            }
            d2 += best / from.size();
            nc += std::abs(dot(from.normals[i], to.normals[j])) / from.size();
            hit += (best < tau * tau ? 1.0 : 0.0) / from.size();
        }
    };
    double dab = 0, nab = 0, pab = 0, dba = 0, nba = 0, pba = 0;
    one_way(a, b, dab, nab, pab);
    one_way(b, a, dba, nba, pba);
    const double cd = 0.5 * (dab + dba), nc = 0.5 * (nab + nba), f1 = 2 * pab * pba / (pab + pba);
    const double e_cd = std::abs(chamfer(a, b) - cd);
    const double e_nc = std::abs(normal_consistency(a, b) - nc);
    const double e_f1 = std::abs(f1_score(a, b, tau) - f1);

    const auto mesh = marching_cubes(AnalyticField("sphere:0.5"), 40, kDefaultDomain);
    const auto s1 = sample_mesh(mesh, 20000, 3), s2 = sample_mesh(mesh, 20000, 3);
    const auto same = compare(s1, s2);
    const bool ok = e_cd <= 1e-12 && e_nc <= 1e-12 && e_f1 <= 1e-12 && same.cd == 0.0 &&
                    std::abs(same.nc - 1.0) <= 1e-12 && same.f1 == 1.0;
    report(9, "metric oracles", ok,
           strf("|cd-bf|=%g |nc-bf|=%g |f1-bf|=%g; identical mesh cd=%g nc=%.15g f1=%g", e_cd, e_nc, e_f1, same.cd,
               same.nc, same.f1));
}

std::string slurp(const std::filesystem::path& p)
{
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

void determinism()
{
    const auto dir = std::filesystem::temp_directory_path() / "pdmesh_acceptance";
    std::filesystem::create_directories(dir);
    std::string csv[2], summary[2];
    std::size_t faces[2] = {0, 0}, verts[2] = {0, 0};
    int codes[2] = {0, 0};
    for (int i = 0; i < 2; ++i) {
        const auto stats = dir / ("run" + std::to_string(i) + ".csv");
        const auto obj = dir / ("run" + std::to_string(i) + ".obj");
        std::ostringstream out, err;
        codes[i] = cli::run({"extract", "--field", "torus:0.5,0.2", "--init", "8", "--max-points", "5000", "--seed", "1",
                             "--no-timing", "--out", obj.string(), "--stats", stats.string()},
                            out, err);
        csv[i] = slurp(stats);
        const auto m = read_obj(obj);
        faces[i] = m.faces.size();
        verts[i] = m.vertices.size();
    }
    std::filesystem::remove_all(dir);
    const bool ok = codes[0] == 0 && codes[1] == 0 && !csv[0].empty() && csv[0] == csv[1] && faces[0] == faces[1] &&
                    verts[0] == verts[1];
    report(8, "determinism", ok,
           strf("stats csv %zu bytes, identical=%d; mesh V=%zu/%zu F=%zu/%zu", csv[0].size(), csv[0] == csv[1], verts[0],
               verts[1], faces[0], faces[1]));
}

} // namespace

int main()
{
    spdlog::set_level(spdlog::level::warn);
    regularity_oracle();

    // Sphere run to 5k inserted sites, with checkpoints for the heap audit and
    // the convergence series.
    const auto truth = analytic_sphere_samples(0.5, kMetricSamples, 11);
    Run sphere = start("sphere:0.5", 5000);
    std::string audits;
    bool audit_ok = true;
    std::vector<double> cds;
    auto audit = [&]() {
        const auto a = sphere.refiner->audit_heap();
        audit_ok = audit_ok && a.bijective();
        audits += strf("%s[%lld: live mixed %zu, queued %zu, parked %zu, stale %zu, missing %zu, dup %zu]",
                      audits.empty() ? "" : " ", static_cast<long long>(sphere.refiner->inserted()), a.live_mixed,
                      a.fresh_queued, a.fresh_parked, a.stale, a.missing, a.duplicated);
    };
    for (std::int64_t checkpoint : {1000, 2000, 2500}) {
        step_until(*sphere.refiner, checkpoint);
        if (checkpoint != 2500) {
            cds.push_back(chamfer_to_sphere(weld(sphere.refiner->extract().to_triangle_mesh()), truth));
        }
        if (checkpoint != 2000) {
            audit();
        }
    }
    sphere.refiner->run_to_completion();
    audit();
    const SurfaceMesh sphere_mesh = sphere.refiner->extract();
    cds.push_back(chamfer_to_sphere(weld(sphere_mesh.to_triangle_mesh()), truth));

    Run torus5 = start("torus:0.5,0.2", 5000);
    torus5.refiner->run_to_completion();
    Run twin = start("union(sphere:0.2,-0.25,0,0;sphere:0.2,0.25,0,0)", 5000);
    twin.refiner->run_to_completion();

    {
        double worst = std::numeric_limits<double>::infinity();
        std::size_t bad = 0, vertices = 0;
        for (const Run* r : {&sphere, &torus5, &twin}) {
            const auto m = r->refiner->extract();
            bad += penetrations(r->refiner->triangulation(), m, worst);
            vertices += m.vertices.size();
        }
        report(2, "non-penetration", bad == 0,
               strf("%zu dual vertices over sphere/torus/union at 5k, %zu violations, min power %.3g", vertices, bad,
                   worst));
    }

    Run torus = start("torus:0.5,0.2", 20000);
    torus.refiner->run_to_completion();
    {
        const auto s = topology(sphere_mesh, 1, 2);
        const auto t = topology(torus.refiner->extract(), 1, 0);
        const auto u = topology(twin.refiner->extract(), 2, 2);
        report(3, "topology", s.ok && t.ok && u.ok,
               "sphere " + s.detail + "; torus " + t.detail + "; union " + u.detail);
    }

    {
        const std::uint64_t budget = sphere.field->query_count();
        const int res = budget_resolution(budget);
        const auto mc = marching_cubes(AnalyticField("sphere:0.5"), res, kDefaultDomain);
        const double mc_cd = chamfer_to_sphere(mc, truth);
        double max_phi = 0.0;
        for (const auto& v : sphere_mesh.vertices) {
            max_phi = std::max(max_phi, std::abs(norm(v.position) - 0.5));
        }
        const bool monotone = cds[1] <= cds[0] && cds[2] <= cds[1];
        report(4, "geometric convergence", monotone && cds[2] < mc_cd && max_phi <= 0.01,
               strf("CD x1e5 at 1k/2k/5k = %.4f/%.4f/%.4f; MC %d^3 (%llu queries) CD x1e5 = %.4f; max |phi| = %.3g",
                   cds[0] * 1e5, cds[1] * 1e5, cds[2] * 1e5, res, static_cast<unsigned long long>(budget),
                   mc_cd * 1e5, max_phi));
    }

    deviation_oracle();

    {
        const auto& st = torus.refiner->stats();
        const Window early = window(st, 1001, 2000);
        const Window late = window(st, 10001, 20000);
        const double t_early = early.ms / early.sites, t_late = late.ms / late.sites;
        const double c_early = static_cast<double>(early.cavity) / early.sites;
        const double c_late = static_cast<double>(late.cavity) / late.sites;
        const double rt = t_late / t_early, rc = c_late / c_early;
        report(6, "locality and scaling", rt <= 3.0 && rc <= 3.0 && rc >= 1.0 / 3.0,
               strf("torus to %lld sites: ms/site %.4f -> %.4f (x%.2f), cavity/site %.2f -> %.2f (x%.2f)",
                   static_cast<long long>(torus.refiner->inserted()), t_early, t_late, rt, c_early, c_late, rc));
    }

    report(7, "lazy-heap audit", audit_ok, audits);
    determinism();
    metric_oracles();

    std::printf("%d criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
