#include "pdmesh/cli.hpp"
#include "pdmesh/mesh.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

using namespace pdmesh;

namespace {

struct Result {
    int code;
    std::string out, err;
};

Result invoke(std::vector<std::string> args)
{
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

std::string path(const std::string& name)
{
    return (std::filesystem::temp_directory_path() / ("pdmesh_cli_" + name)).string();
}

std::string slurp(const std::string& p)
{
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

std::map<std::string, std::string> key_values(const std::string& text)
{
    std::map<std::string, std::string> kv;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        const auto c = line.find(": ");
        if (c != std::string::npos) {
            kv[line.substr(0, c)] = line.substr(c + 2);
        }
    }
    return kv;
}

} // namespace

TEST_CASE("extract writes a closed mesh and stats")
{
    const auto obj = path("s.obj"), ply = path("s.ply"), csv = path("s.csv");
    const auto r = invoke({"extract", "--field", "sphere:0.5", "--init", "8", "--max-points", "2000", "--out", obj,
                        "--out", ply, "--stats", csv});
    REQUIRE(r.code == 0);
    const auto kv = key_values(r.out);
    for (const char* k : {"sites", "patches", "max_delta_at_stop", "queries", "wall_seconds"}) {
        CHECK(kv.count(k) == 1);
    }
    const auto m = read_obj(obj);
    const auto topo = analyze(m);
    CHECK(topo.closed());
    CHECK(topo.euler == 2);
    CHECK(std::to_string(m.faces.size()) == kv.at("faces"));
    const auto p = read_ply(ply);
    CHECK(p.vertices.size() == m.vertices.size());
    CHECK(p.faces == m.faces);
    const auto stats = slurp(csv);
    CHECK(stats.rfind("iter,inserted,delta,queries,cavity,ms\n", 0) == 0);
    for (const auto& f : {obj, ply, csv}) {
        std::filesystem::remove(f);
    }
}

TEST_CASE("usage and runtime errors")
{
    CHECK(invoke({}).code == cli::kExitUsage);
    CHECK(invoke({"extract", "--field", "sphere:0.5"}).code == cli::kExitUsage);
    CHECK(invoke({"extract", "--field", "sphere:0.5", "--out", path("x.stl")}).code == cli::kExitUsage);
    CHECK(invoke({"extract", "--field", "sphere:0.5", "--out", path("x.obj"), "--init", "1"}).code == cli::kExitUsage);
    CHECK(invoke({"metrics", "--a", "x.obj", "--b", "y.obj", "--samples", "2000000"}).code == cli::kExitUsage);
    CHECK(invoke({"frobnicate"}).code == cli::kExitUsage);
    CHECK(invoke({"--help"}).code == cli::kExitOk);

    CHECK(invoke({"extract", "--field", "cone:1", "--out", path("x.obj")}).code == cli::kExitRuntime);
    CHECK(invoke({"extract", "--field", "grid:/nonexistent.sdfg", "--out", path("x.obj")}).code == cli::kExitRuntime);
    const auto far = invoke({"extract", "--field", "sphere:0.2,5,5,5", "--out", path("x.obj")});
    CHECK(far.code == cli::kExitRuntime);
    CHECK(far.err.find("surface not detected") != std::string::npos);
    CHECK(invoke({"extract", "--field", "sphere:0.5", "--max-points", "10", "--out", "/nonexistent/dir/x.obj"}).code ==
          cli::kExitRuntime);
    CHECK(invoke({"metrics", "--a", path("missing_a.obj"), "--b", path("missing_b.obj")}).code == cli::kExitRuntime);
    CHECK(invoke({"gen-grid", "--field", "sphere:1.2", "--res", "16", "--out", path("big.sdfg")}).code ==
          cli::kExitRuntime);
}

TEST_CASE("gen-grid round trip and grid-driven extraction")
{
    const auto sdfg = path("t.sdfg");
    REQUIRE(invoke({"gen-grid", "--field", "torus:0.5,0.2", "--res", "64", "--out", sdfg}).code == 0);
    const GridField g = read_sdfg(sdfg);
    CHECK(g.dims() == std::array<std::uint32_t, 3>{64, 64, 64});
    CHECK(g.valid_box().lo.x == doctest::Approx(-1.0).epsilon(1e-6));
    CHECK(g.valid_box().hi.x == doctest::Approx(1.0).epsilon(1e-6));
    const AnalyticField torus("torus:0.5,0.2");
    // Values are the f32 rounding of the field at the double-precision node positions.
    const double h = 2.0 / 61.0, o = -1.0 - h;
    std::size_t mismatches = 0;
    for (std::uint32_t k = 0; k < 64; k += 3) {
        for (std::uint32_t j = 0; j < 64; j += 5) {
            for (std::uint32_t i = 0; i < 64; ++i) {
                const float expect = static_cast<float>(torus.eval({o + i * h, o + j * h, o + k * h}).value);
                mismatches += static_cast<float>(g.at(i, j, k)) != expect;
            }
        }
    }
    CHECK(mismatches == 0);
    std::filesystem::remove(sdfg);

    const auto sphere_grid = path("s.sdfg");
    REQUIRE(invoke({"gen-grid", "--field", "sphere:0.5", "--res", "64", "--out", sphere_grid}).code == 0);
    const auto a = path("ga.obj"), b = path("gb.obj");
    REQUIRE(invoke({"extract", "--field", "grid:" + sphere_grid, "--max-points", "3000", "--out", a}).code == 0);
    REQUIRE(invoke({"extract", "--field", "sphere:0.5", "--max-points", "3000", "--out", b}).code == 0);
    CHECK(analyze(read_obj(a)).euler == analyze(read_obj(b)).euler);
    CHECK(analyze(read_obj(a)).closed());
    for (const auto& f : {sphere_grid, a, b}) {
        std::filesystem::remove(f);
    }
}

TEST_CASE("metrics and baseline commands")
{
    const auto obj = path("mc.obj");
    const auto r = invoke({"baseline", "--field", "sphere:0.5", "--res", "30", "--out", obj});
    REQUIRE(r.code == 0);
    CHECK(key_values(r.out).at("queries") == "27000");
    CHECK(analyze(read_obj(obj)).euler == 2);
    const auto m = invoke({"metrics", "--a", obj, "--b", obj, "--samples", "5000"});
    REQUIRE(m.code == 0);
    const auto kv = key_values(m.out);
    CHECK(std::stod(kv.at("cd")) == 0.0);
    CHECK(std::stod(kv.at("nc")) == doctest::Approx(1.0));
    CHECK(std::stod(kv.at("f1")) == 1.0);
    CHECK(m.out.rfind("cd_convention:", 0) == 0);
    const auto c = invoke({"metrics", "--a", obj, "--b", obj, "--samples", "100", "--csv"});
    CHECK(c.out.rfind("cd_x1e5,", 0) == 0);
    std::filesystem::remove(obj);
}

TEST_CASE("identical jobs give byte-identical stats")
{
    const auto s1 = path("d1.csv"), s2 = path("d2.csv"), o1 = path("d1.obj"), o2 = path("d2.obj");
    for (const auto& [s, o] : {std::pair{s1, o1}, std::pair{s2, o2}}) {
        REQUIRE(invoke({"extract", "--field", "torus:0.5,0.2", "--max-points", "1500", "--seed", "7", "--no-timing",
                     "--out", o, "--stats", s})
                    .code == 0);
    }
    CHECK(slurp(s1) == slurp(s2));
    CHECK(slurp(o1) == slurp(o2));
    for (const auto& f : {s1, s2, o1, o2}) {
        std::filesystem::remove(f);
    }
}
