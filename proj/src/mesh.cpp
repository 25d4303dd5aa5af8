#include "pdmesh/mesh.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>

namespace pdmesh {

double TriangleMesh::area() const
{
    double a = 0.0;
    for (const auto& f : faces) {
        a += 0.5 * norm(cross(vertices[f[1]] - vertices[f[0]], vertices[f[2]] - vertices[f[0]]));
    }
    return a;
}

namespace {

struct DisjointSets {
    std::vector<std::uint32_t> parent;

    explicit DisjointSets(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0u); }

    std::uint32_t find(std::uint32_t x)
    {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    }
    void unite(std::uint32_t a, std::uint32_t b)
    {
        a = find(a);
        b = find(b);
        if (a != b) {
            parent[std::max(a, b)] = std::min(a, b);
        }
    }
};

} // namespace

TopologyReport analyze_polygons(std::span<const std::uint32_t> indices, std::span<const std::uint8_t> sizes)
{
    TopologyReport r;
    std::uint32_t max_index = 0;
    for (auto i : indices) {
        max_index = std::max(max_index, i + 1);
    }
    std::vector<char> used(max_index, 0);
    std::vector<std::uint64_t> edges;
    DisjointSets sets(max_index);
    std::vector<std::uint32_t> face_first;

    std::size_t pos = 0;
    for (auto n : sizes) {
        if (pos + n > indices.size() || n < 3) {
            throw std::invalid_argument("polygon sizes do not match the index list");
        }
        face_first.push_back(indices[pos]);
        for (std::size_t k = 0; k < n; ++k) {
            const std::uint32_t a = indices[pos + k];
            const std::uint32_t b = indices[pos + (k + 1) % n];
            used[a] = 1;
            sets.unite(a, b);
            edges.push_back((static_cast<std::uint64_t>(std::min(a, b)) << 32) | std::max(a, b));
        }
        pos += n;
    }
    std::sort(edges.begin(), edges.end());

    std::unordered_map<std::uint32_t, std::size_t> comp_of;
    auto component = [&](std::uint32_t v) -> ComponentInfo& {
        const auto root = sets.find(v);
        auto [it, fresh] = comp_of.try_emplace(root, r.components.size());
        if (fresh) {
            r.components.emplace_back();
        }
        return r.components[it->second];
    };

    for (std::uint32_t v = 0; v < max_index; ++v) {
        if (used[v]) {
            ++r.vertices;
            ++component(v).vertices;
        }
    }
    for (std::size_t i = 0; i < edges.size();) {
        std::size_t j = i;
        while (j < edges.size() && edges[j] == edges[i]) {
            ++j;
        }
        const std::size_t count = j - i;
        ++r.edges;
        ++component(static_cast<std::uint32_t>(edges[i] >> 32)).edges;
        if (count == 1) {
            ++r.boundary_edges;
        } else if (count > 2) {
            ++r.nonmanifold_edges;
        }
        i = j;
    }
    for (auto v : face_first) {
        ++r.faces;
        ++component(v).faces;
    }
    r.euler = static_cast<long>(r.vertices) - static_cast<long>(r.edges) + static_cast<long>(r.faces);
    for (auto& c : r.components) {
        c.euler = static_cast<long>(c.vertices) - static_cast<long>(c.edges) + static_cast<long>(c.faces);
    }
    return r;
}

TopologyReport analyze(const TriangleMesh& mesh)
{
    std::vector<std::uint32_t> idx;
    idx.reserve(mesh.faces.size() * 3);
    for (const auto& f : mesh.faces) {
        idx.insert(idx.end(), f.begin(), f.end());
    }
    const std::vector<std::uint8_t> sizes(mesh.faces.size(), 3);
    return analyze_polygons(idx, sizes);
}

TriangleMesh weld(const TriangleMesh& mesh, double tol)
{
    struct Key {
        std::int64_t x, y, z;
        bool operator==(const Key&) const = default;
    };
    struct KeyHash {
        std::size_t operator()(const Key& k) const noexcept
        {
            return std::hash<std::int64_t>{}(k.x * 73856093 ^ k.y * 19349663 ^ k.z * 83492791);
        }
    };
    auto key = [&](const Point3& p) {
        return Key{static_cast<std::int64_t>(std::floor(p.x / tol)), static_cast<std::int64_t>(std::floor(p.y / tol)),
                   static_cast<std::int64_t>(std::floor(p.z / tol))};
    };

    TriangleMesh out;
    std::unordered_map<Key, std::vector<std::uint32_t>, KeyHash> cells;
    std::vector<std::uint32_t> remap(mesh.vertices.size());
    const double tol2 = tol * tol;
    for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
        const Point3& p = mesh.vertices[i];
        const Key k = key(p);
        std::int64_t found = -1;
        for (std::int64_t dz = -1; dz <= 1 && found < 0; ++dz) {
            for (std::int64_t dy = -1; dy <= 1 && found < 0; ++dy) {
                for (std::int64_t dx = -1; dx <= 1 && found < 0; ++dx) {
                    auto it = cells.find({k.x + dx, k.y + dy, k.z + dz});
                    if (it == cells.end()) {
                        continue;
                    }
                    for (auto j : it->second) {
                        if (squared_distance(out.vertices[j], p) <= tol2) {
                            found = j;
                            break;
                        }
                    }
                }
            }
        }
        if (found < 0) {
            found = static_cast<std::int64_t>(out.vertices.size());
            out.vertices.push_back(p);
            cells[k].push_back(static_cast<std::uint32_t>(found));
        }
        remap[i] = static_cast<std::uint32_t>(found);
    }
    std::vector<std::array<std::uint32_t, 3>> faces;
    for (const auto& f : mesh.faces) {
        const std::array<std::uint32_t, 3> g{remap[f[0]], remap[f[1]], remap[f[2]]};
        if (g[0] != g[1] && g[1] != g[2] && g[0] != g[2]) {
            faces.push_back(g);
        }
    }
    // A face and its reverse over the same three vertices form a zero-volume
    // fold once welded; both go.
    auto canonical = [](std::array<std::uint32_t, 3> f) {
        const int m = f[0] < f[1] ? (f[0] < f[2] ? 0 : 2) : (f[1] < f[2] ? 1 : 2);
        std::rotate(f.begin(), f.begin() + m, f.end());
        return f;
    };
    std::map<std::array<std::uint32_t, 3>, std::vector<std::size_t>> by_winding;
    for (std::size_t i = 0; i < faces.size(); ++i) {
        by_winding[canonical(faces[i])].push_back(i);
    }
    std::vector<char> cancelled(faces.size(), 0);
    for (auto& [f, ids] : by_winding) {
        const std::array<std::uint32_t, 3> rev = canonical({f[0], f[2], f[1]});
        if (rev < f) {
            continue;
        }
        auto it = by_winding.find(rev);
        if (it == by_winding.end()) {
            continue;
        }
        const std::size_t pairs = std::min(ids.size(), it->second.size());
        for (std::size_t k = 0; k < pairs; ++k) {
            cancelled[ids[k]] = cancelled[it->second[k]] = 1;
        }
    }
    std::vector<char> referenced(out.vertices.size(), 0);
    for (std::size_t i = 0; i < faces.size(); ++i) {
        if (cancelled[i]) {
            continue;
        }
        out.faces.push_back(faces[i]);
        for (auto v : faces[i]) {
            referenced[v] = 1;
        }
    }
    // Drop vertices that only belonged to collapsed faces.
    std::vector<std::uint32_t> compact(out.vertices.size());
    std::vector<Point3> kept;
    for (std::size_t i = 0; i < out.vertices.size(); ++i) {
        if (referenced[i]) {
            compact[i] = static_cast<std::uint32_t>(kept.size());
            kept.push_back(out.vertices[i]);
        }
    }
    for (auto& f : out.faces) {
        for (auto& v : f) {
            v = compact[v];
        }
    }
    out.vertices = std::move(kept);
    return out;
}

namespace {

std::ofstream open_out(const std::filesystem::path& path, bool binary)
{
    std::ofstream f(path, binary ? std::ios::binary : std::ios::out);
    if (!f) {
        throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    }
    return f;
}

std::ifstream open_in(const std::filesystem::path& path)
{
    std::ifstream f(path, std::ios::binary);
    if (!f) {
        throw std::runtime_error("cannot open '" + path.string() + "'");
    }
    return f;
}

void check_written(const std::ofstream& f, const std::filesystem::path& path)
{
    if (!f) {
        throw std::runtime_error("failed writing '" + path.string() + "'");
    }
}

void check_indices(const TriangleMesh& m, const std::filesystem::path& path)
{
    for (const auto& f : m.faces) {
        for (auto v : f) {
            if (v >= m.vertices.size()) {
                throw std::runtime_error("face index out of range in '" + path.string() + "'");
            }
        }
    }
}

} // namespace

void write_obj(const std::filesystem::path& path, const TriangleMesh& mesh)
{
    auto f = open_out(path, false);
    f << std::setprecision(17);
    for (const auto& v : mesh.vertices) {
        f << "v " << v.x << ' ' << v.y << ' ' << v.z << '\n';
    }
    for (const auto& t : mesh.faces) {
        f << "f " << t[0] + 1 << ' ' << t[1] + 1 << ' ' << t[2] + 1 << '\n';
    }
    check_written(f, path);
}

void write_ply(const std::filesystem::path& path, const TriangleMesh& mesh)
{
    auto f = open_out(path, true);
    f << "ply\nformat binary_little_endian 1.0\n"
      << "element vertex " << mesh.vertices.size() << "\nproperty float x\nproperty float y\nproperty float z\n"
      << "element face " << mesh.faces.size() << "\nproperty list uchar int vertex_indices\nend_header\n";
    std::string buf;
    auto put32 = [&](std::uint32_t v) {
        for (int i = 0; i < 4; ++i) {
            buf.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
        }
    };
    for (const auto& v : mesh.vertices) {
        put32(std::bit_cast<std::uint32_t>(static_cast<float>(v.x)));
        put32(std::bit_cast<std::uint32_t>(static_cast<float>(v.y)));
        put32(std::bit_cast<std::uint32_t>(static_cast<float>(v.z)));
    }
    for (const auto& t : mesh.faces) {
        buf.push_back(3);
        for (auto i : t) {
            put32(i);
        }
    }
    f.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    check_written(f, path);
}

TriangleMesh read_obj(const std::filesystem::path& path)
{
    auto f = open_in(path);
    TriangleMesh m;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        std::istringstream ls(line);
        std::string tag;
        if (!(ls >> tag)) {
            continue;
        }
        if (tag == "v") {
            Point3 p;
            if (!(ls >> p.x >> p.y >> p.z)) {
                throw std::runtime_error("bad vertex on line " + std::to_string(lineno) + " of '" + path.string() + "'");
            }
            m.vertices.push_back(p);
        } else if (tag == "f") {
            std::vector<std::uint32_t> poly;
            std::string tok;
            while (ls >> tok) {
                const long idx = std::stol(tok.substr(0, tok.find('/')));
                const long resolved = idx < 0 ? static_cast<long>(m.vertices.size()) + idx : idx - 1;
                if (idx == 0 || resolved < 0) {
                    throw std::runtime_error("bad face index on line " + std::to_string(lineno));
                }
                poly.push_back(static_cast<std::uint32_t>(resolved));
            }
            for (std::size_t k = 1; k + 1 < poly.size(); ++k) {
                m.faces.push_back({poly[0], poly[k], poly[k + 1]});
            }
        }
    }
    check_indices(m, path);
    return m;
}

TriangleMesh read_ply(const std::filesystem::path& path)
{
    auto f = open_in(path);
    std::string line;
    std::getline(f, line);
    if (line != "ply") {
        throw std::runtime_error("'" + path.string() + "' is not a PLY file");
    }
    bool binary = false;
    std::size_t nv = 0, nf = 0;
    while (std::getline(f, line) && line != "end_header") {
        std::istringstream ls(line);
        std::string tag;
        ls >> tag;
        if (tag == "format") {
            std::string fmt;
            ls >> fmt;
            if (fmt == "binary_little_endian") {
                binary = true;
            } else if (fmt != "ascii") {
                throw std::runtime_error("unsupported PLY format '" + fmt + "'");
            }
        } else if (tag == "element") {
            std::string what;
            std::size_t n;
            ls >> what >> n;
            (what == "vertex" ? nv : nf) = n;
        }
    }
    TriangleMesh m;
    m.vertices.resize(nv);
    if (binary) {
        auto get32 = [&]() {
            unsigned char b[4];
            if (!f.read(reinterpret_cast<char*>(b), 4)) {
                throw std::runtime_error("truncated PLY '" + path.string() + "'");
            }
            return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
                   (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
        };
        for (auto& v : m.vertices) {
            v.x = std::bit_cast<float>(get32());
            v.y = std::bit_cast<float>(get32());
            v.z = std::bit_cast<float>(get32());
        }
        for (std::size_t i = 0; i < nf; ++i) {
            char n = 0;
            if (!f.get(n)) {
                throw std::runtime_error("truncated PLY '" + path.string() + "'");
            }
            std::vector<std::uint32_t> poly(static_cast<unsigned char>(n));
            for (auto& p : poly) {
                p = get32();
            }
            for (std::size_t k = 1; k + 1 < poly.size(); ++k) {
                m.faces.push_back({poly[0], poly[k], poly[k + 1]});
            }
        }
    } else {
        for (auto& v : m.vertices) {
            f >> v.x >> v.y >> v.z;
            f.ignore(std::numeric_limits<std::streamsize>::max(), '\n');
        }
        for (std::size_t i = 0; i < nf; ++i) {
            std::size_t n;
            f >> n;
            std::vector<std::uint32_t> poly(n);
            for (auto& p : poly) {
                f >> p;
            }
            for (std::size_t k = 1; k + 1 < poly.size(); ++k) {
                m.faces.push_back({poly[0], poly[k], poly[k + 1]});
            }
        }
        if (!f) {
            throw std::runtime_error("truncated PLY '" + path.string() + "'");
        }
    }
    check_indices(m, path);
    return m;
}

namespace {

std::string lower_extension(const std::filesystem::path& path)
{
    auto ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext;
}

} // namespace

TriangleMesh read_mesh(const std::filesystem::path& path)
{
    const auto ext = lower_extension(path);
    if (ext == ".ply") {
        return read_ply(path);
    }
    if (ext == ".obj") {
        return read_obj(path);
    }
    throw std::runtime_error("unknown mesh extension '" + ext + "'");
}

void write_mesh(const std::filesystem::path& path, const TriangleMesh& mesh)
{
    const auto ext = lower_extension(path);
    if (ext == ".ply") {
        write_ply(path, mesh);
    } else if (ext == ".obj") {
        write_obj(path, mesh);
    } else {
        throw std::runtime_error("unknown mesh extension '" + ext + "'");
    }
}

} // namespace pdmesh
