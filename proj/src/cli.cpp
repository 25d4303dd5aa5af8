#include "pdmesh/cli.hpp"

#include "pdmesh/delaunay.hpp"
#include "pdmesh/metrics.hpp"
#include "pdmesh/refinement.hpp"

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <chrono>
#include <fstream>
#include <sstream>
#include <ostream>

namespace pdmesh::cli {

namespace {

constexpr std::size_t kMaxSamples = 1'000'000;

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

double seconds_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void check_mesh_path(const std::string& path)
{
    const auto ext = std::filesystem::path(path).extension();
    if (ext != ".obj" && ext != ".ply") {
        throw UsageError("mesh output must end in .obj or .ply: " + path);
    }
}

struct ExtractArgs {
    std::string field;
    int init = RefineConfig{}.init_resolution;
    std::int64_t max_points = RefineConfig{}.k_max;
    double eps = 0.0;
    int batch = 1;
    std::vector<std::string> out;
    std::string stats;
    bool no_timing = false;
    std::uint64_t seed = 0;
    bool allow_open_boundary = false;
};

struct BaselineArgs {
    std::string field;
    int res = 0;
    std::string out;
};

struct MetricsArgs {
    std::string a, b;
    std::size_t samples = 100'000;
    double tau = kDefaultF1Threshold;
    std::uint64_t seed = 0;
    bool csv = false;
};

struct GenGridArgs {
    std::string field;
    int res = 0;
    std::string out;
};

int cmd_extract(const ExtractArgs& a, std::ostream& out)
{
    for (const auto& p : a.out) {
        check_mesh_path(p);
    }
    RefineConfig cfg;
    cfg.init_resolution = a.init;
    cfg.k_max = a.max_points;
    cfg.eps = a.eps;
    cfg.batch_size = a.batch;
    cfg.allow_open_boundary = a.allow_open_boundary;
    try {
        cfg.validate();
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }

    const auto t0 = std::chrono::steady_clock::now();
    const auto field = load_field(a.field);
    // Refinement has no random choices; the seed is part of the job record only.
    spdlog::debug("extract: field {} seed {}", a.field, a.seed);
    const RunResult r = run(*field, cfg);
    const TriangleMesh mesh = weld(r.mesh.to_triangle_mesh());
    for (const auto& p : a.out) {
        write_mesh(p, mesh);
    }
    if (!a.stats.empty()) {
        std::ofstream s(a.stats, std::ios::binary);
        if (!s) {
            throw std::runtime_error("cannot open stats file " + a.stats);
        }
        r.stats.write_csv(s, !a.no_timing);
        if (!s) {
            throw std::runtime_error("failed writing stats file " + a.stats);
        }
    }
    out << "sites: " << r.sites << '\n'
        << "inserted: " << r.inserted << '\n'
        << "patches: " << r.mesh.patches.size() << '\n'
        << "vertices: " << mesh.vertices.size() << '\n'
        << "faces: " << mesh.faces.size() << '\n'
        << "max_delta_at_stop: " << r.last_delta << '\n'
        << "queries: " << field->query_count() << '\n'
        << "wall_seconds: " << seconds_since(t0) << '\n';
    return kExitOk;
}

int cmd_baseline(const BaselineArgs& a, std::ostream& out)
{
    if (!a.out.empty()) {
        check_mesh_path(a.out);
    }
    const auto t0 = std::chrono::steady_clock::now();
    const auto field = load_field(a.field);
    const TriangleMesh mesh = weld(marching_cubes(*field, a.res, kDefaultDomain));
    if (!a.out.empty()) {
        write_mesh(a.out, mesh);
    }
    out << "resolution: " << a.res << '\n'
        << "vertices: " << mesh.vertices.size() << '\n'
        << "faces: " << mesh.faces.size() << '\n'
        << "queries: " << field->query_count() << '\n'
        << "wall_seconds: " << seconds_since(t0) << '\n';
    return kExitOk;
}

int cmd_metrics(const MetricsArgs& a, std::ostream& out)
{
    const TriangleMesh ma = read_mesh(a.a);
    const TriangleMesh mb = read_mesh(a.b);
    const auto sa = sample_mesh(ma, a.samples, a.seed);
    const auto sb = sample_mesh(mb, a.samples, a.seed);
    const MetricsReport r = compare(sa, sb, a.tau);
    if (a.csv) {
        out << MetricsReport::csv_header() << '\n' << r.csv_row() << '\n';
    } else {
        r.write_text(out);
    }
    return kExitOk;
}

int cmd_gen_grid(const GenGridArgs& a, std::ostream& out)
{
    const auto field = load_field(a.field);
    const GridField g = domain_grid(*field, a.res);
    write_sdfg(a.out, g);
    out << "dims: " << a.res << ' ' << a.res << ' ' << a.res << '\n'
        << "spacing: " << g.spacing() << '\n'
        << "origin: " << g.origin().x << '\n';
    return kExitOk;
}

} // namespace

GridField domain_grid(const ScalarField& field, int res)
{
    if (res < 4) {
        throw std::invalid_argument("grid resolution must be at least 4");
    }
    const double spacing = 2.0 / (res - 3);
    const double o = -1.0 - spacing;
    const auto n = static_cast<std::uint32_t>(res);
    GridField g = sample_grid(field, {n, n, n}, {o, o, o}, spacing);
    // Nodes on the domain boundary and the padding layer around it must be outside the object.
    for (std::uint32_t k = 0; k < n; ++k) {
        for (std::uint32_t j = 0; j < n; ++j) {
            for (std::uint32_t i = 0; i < n; ++i) {
                const bool inner = i > 1 && i + 2 < n && j > 1 && j + 2 < n && k > 1 && k + 2 < n;
                if (!inner && !(g.at(i, j, k) > 0.0)) {
                    throw DomainError("field is not positive on the domain boundary; the object must fit inside [-1,1]^3");
                }
            }
        }
    }
    return g;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Adaptive power-diagram surface extraction from signed distance fields", "pdmesh"};
    app.require_subcommand(1);
    bool verbose = false;
    app.add_flag("-v,--verbose", verbose, "Debug logging");

    ExtractArgs ex;
    auto* extract = app.add_subcommand("extract", "Adaptive extraction");
    extract->add_option("--field", ex.field, "Analytic spec or grid:<file.sdfg>")->required();
    extract->add_option("--init", ex.init, "Initial grid samples per axis")->capture_default_str();
    extract->add_option("--max-points", ex.max_points, "Sites added by refinement")->capture_default_str();
    extract->add_option("--eps", ex.eps, "Stop when the worst deviation drops below this")->capture_default_str();
    extract->add_option("--batch", ex.batch, "Heap entries per step")->capture_default_str();
    extract->add_option("--out", ex.out, "Mesh output (.obj or .ply); may repeat")->required();
    extract->add_option("--stats", ex.stats, "Per-step CSV");
    extract->add_flag("--no-timing", ex.no_timing, "Write 0 in the ms column so the CSV is reproducible");
    extract->add_option("--seed", ex.seed, "Recorded with the job")->capture_default_str();
    extract->add_flag("--allow-open-boundary", ex.allow_open_boundary, "Permit domain corners inside the object");

    BaselineArgs bl;
    auto* baseline = app.add_subcommand("baseline", "Uniform marching cubes over [-1,1]^3");
    baseline->add_option("--field", bl.field, "Analytic spec or grid:<file.sdfg>")->required();
    baseline->add_option("--res", bl.res, "Nodes per axis")->required()->check(CLI::Range(2, 2048));
    baseline->add_option("--out", bl.out, "Mesh output (.obj or .ply)");

    MetricsArgs mt;
    auto* metrics = app.add_subcommand("metrics", "Chamfer, normal consistency and F1 between two meshes");
    metrics->add_option("--a", mt.a, "First mesh")->required();
    metrics->add_option("--b", mt.b, "Second mesh")->required();
    metrics->add_option("--samples", mt.samples, "Samples per mesh")
        ->capture_default_str()
        ->check(CLI::Range(std::size_t{1}, kMaxSamples));
    metrics->add_option("--tau", mt.tau, "F1 distance threshold")->capture_default_str()->check(CLI::PositiveNumber);
    metrics->add_option("--seed", mt.seed, "Sampling seed")->capture_default_str();
    metrics->add_flag("--csv", mt.csv, "One CSV row instead of key-value lines");

    GenGridArgs gg;
    auto* gen = app.add_subcommand("gen-grid", "Sample an analytic field into an SDFG file");
    gen->add_option("--field", gg.field, "Analytic spec")->required();
    gen->add_option("--res", gg.res, "Nodes per axis")->required()->check(CLI::Range(4, 1024));
    gen->add_option("--out", gg.out, "SDFG output")->required();

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        std::ostringstream o, d;
        const int code = app.exit(e, o, d);
        out << o.str();
        err << d.str();
        return code == 0 ? kExitOk : kExitUsage;
    }
    spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::warn);

    try {
        if (*extract) {
            return cmd_extract(ex, out);
        }
        if (*baseline) {
            return cmd_baseline(bl, out);
        }
        if (*metrics) {
            return cmd_metrics(mt, out);
        }
        return cmd_gen_grid(gg, out);
    } catch (const UsageError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
}

} // namespace pdmesh::cli
