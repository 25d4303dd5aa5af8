#include "pdmesh/metrics.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>

namespace pdmesh {

namespace {

// Fixed conversion so sample sets do not depend on the library's distribution code.
double unit_double(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

} // namespace

MeshSampleSet sample_mesh(const TriangleMesh& mesh, std::size_t n, std::uint64_t seed)
{
    std::vector<double> cumulative;
    cumulative.reserve(mesh.faces.size());
    std::vector<Vec3> face_normals;
    face_normals.reserve(mesh.faces.size());
    double total = 0.0;
    for (const auto& f : mesh.faces) {
        const Vec3 c = cross(mesh.vertices[f[1]] - mesh.vertices[f[0]], mesh.vertices[f[2]] - mesh.vertices[f[0]]);
        const double len = norm(c);
        total += 0.5 * len;
        cumulative.push_back(total);
        face_normals.push_back(len > 0.0 ? c / len : Vec3{});
    }
    if (!(total > 0.0)) {
        throw std::invalid_argument("cannot sample a mesh with zero area");
    }

    MeshSampleSet out;
    out.seed = seed;
    out.points.reserve(n);
    out.normals.reserve(n);
    std::mt19937_64 rng(seed);
    for (std::size_t i = 0; i < n; ++i) {
        const double u = unit_double(rng) * total;
        auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
        if (it == cumulative.end()) {
            it = std::prev(it);
        }
        const auto fi = static_cast<std::size_t>(it - cumulative.begin());
        const auto& f = mesh.faces[fi];
        const double s = std::sqrt(unit_double(rng));
        const double r = unit_double(rng);
        const Point3& a = mesh.vertices[f[0]];
        const Point3& b = mesh.vertices[f[1]];
        const Point3& c = mesh.vertices[f[2]];
        out.points.push_back(a * (1.0 - s) + b * (s * (1.0 - r)) + c * (s * r));
        out.normals.push_back(face_normals[fi]);
    }
    return out;
}

KdTree::KdTree(const std::vector<Point3>& points) : points_(points), order_(points.size())
{
    std::iota(order_.begin(), order_.end(), 0u);
    if (!points.empty()) {
        nodes_.reserve(2 * points.size() / 8 + 1);
        root_ = build(0, static_cast<std::uint32_t>(points.size()));
    }
}

std::int32_t KdTree::build(std::uint32_t begin, std::uint32_t end)
{
    constexpr std::uint32_t kLeaf = 8;
    const auto id = static_cast<std::int32_t>(nodes_.size());
    nodes_.push_back({begin, end});
    if (end - begin <= kLeaf) {
        return id;
    }
    Point3 lo = points_[order_[begin]], hi = lo;
    for (std::uint32_t i = begin; i < end; ++i) {
        const Point3& p = points_[order_[i]];
        lo = {std::min(lo.x, p.x), std::min(lo.y, p.y), std::min(lo.z, p.z)};
        hi = {std::max(hi.x, p.x), std::max(hi.y, p.y), std::max(hi.z, p.z)};
    }
    const Vec3 ext = hi - lo;
    const int axis = ext.x >= ext.y && ext.x >= ext.z ? 0 : (ext.y >= ext.z ? 1 : 2);
    const std::uint32_t mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                     [&](std::uint32_t a, std::uint32_t b) { return points_[a][axis] < points_[b][axis]; });
    const double split = points_[order_[mid]][axis];
    const std::int32_t left = build(begin, mid);
    const std::int32_t right = build(mid, end);
    Node& n = nodes_[id];
    n.axis = static_cast<std::uint8_t>(axis);
    n.split = split;
    n.left = left;
    n.right = right;
    return id;
}

void KdTree::search(std::int32_t id, const Point3& q, Hit& best) const
{
    const Node& n = nodes_[id];
    if (n.left < 0) {
        for (std::uint32_t i = n.begin; i < n.end; ++i) {
            const std::uint32_t idx = order_[i];
            const double d = squared_distance(points_[idx], q);
            if (d < best.distance2 || (d == best.distance2 && idx < best.index)) {
                best = {idx, d};
            }
        }
        return;
    }
    const double diff = q[n.axis] - n.split;
    const std::int32_t near = diff < 0.0 ? n.left : n.right;
    const std::int32_t far = diff < 0.0 ? n.right : n.left;
    search(near, q, best);
    // `<=` keeps equal-distance candidates reachable for the index tie-break.
    if (diff * diff <= best.distance2) {
        search(far, q, best);
    }
}

KdTree::Hit KdTree::nearest(const Point3& q) const
{
    if (root_ < 0) {
        throw std::logic_error("nearest neighbour query on an empty tree");
    }
    Hit best{std::numeric_limits<std::uint32_t>::max(), std::numeric_limits<double>::infinity()};
    search(root_, q, best);
    return best;
}

std::vector<KdTree::Hit> nearest_neighbors(const std::vector<Point3>& from, const std::vector<Point3>& to)
{
    const KdTree tree(to);
    std::vector<KdTree::Hit> out(from.size());
    for (std::size_t i = 0; i < from.size(); ++i) {
        out[i] = tree.nearest(from[i]);
    }
    return out;
}

namespace {

void require_samples(const MeshSampleSet& a, const MeshSampleSet& b)
{
    if (a.points.empty() || b.points.empty()) {
        throw std::invalid_argument("metrics need non-empty sample sets");
    }
}

double mean_distance2(const std::vector<KdTree::Hit>& hits)
{
    double s = 0.0;
    for (const auto& h : hits) {
        s += h.distance2;
    }
    return s / static_cast<double>(hits.size());
}

double mean_alignment(const MeshSampleSet& from, const MeshSampleSet& to, const std::vector<KdTree::Hit>& hits)
{
    double s = 0.0;
    for (std::size_t i = 0; i < hits.size(); ++i) {
        s += std::abs(dot(from.normals[i], to.normals[hits[i].index]));
    }
    return s / static_cast<double>(hits.size());
}

double fraction_within(const std::vector<KdTree::Hit>& hits, double tau)
{
    std::size_t n = 0;
    for (const auto& h : hits) {
        n += h.distance2 < tau * tau;
    }
    return static_cast<double>(n) / static_cast<double>(hits.size());
}

} // namespace

double chamfer(const MeshSampleSet& a, const MeshSampleSet& b)
{
    require_samples(a, b);
    return 0.5 * (mean_distance2(nearest_neighbors(a.points, b.points)) +
                  mean_distance2(nearest_neighbors(b.points, a.points)));
}

double normal_consistency(const MeshSampleSet& a, const MeshSampleSet& b)
{
    require_samples(a, b);
    return 0.5 * (mean_alignment(a, b, nearest_neighbors(a.points, b.points)) +
                  mean_alignment(b, a, nearest_neighbors(b.points, a.points)));
}

double f1_score(const MeshSampleSet& a, const MeshSampleSet& b, double tau)
{
    return compare(a, b, tau).f1;
}

MetricsReport compare(const MeshSampleSet& a, const MeshSampleSet& b, double tau)
{
    require_samples(a, b);
    const auto t0 = std::chrono::steady_clock::now();
    const auto ab = nearest_neighbors(a.points, b.points);
    const auto ba = nearest_neighbors(b.points, a.points);
    MetricsReport r;
    r.cd = 0.5 * (mean_distance2(ab) + mean_distance2(ba));
    r.nc = 0.5 * (mean_alignment(a, b, ab) + mean_alignment(b, a, ba));
    r.precision = fraction_within(ab, tau);
    r.recall = fraction_within(ba, tau);
    r.f1 = r.precision + r.recall > 0.0 ? 2.0 * r.precision * r.recall / (r.precision + r.recall) : 0.0;
    r.tau = tau;
    r.samples_a = a.size();
    r.samples_b = b.size();
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return r;
}

void MetricsReport::write_text(std::ostream& out) const
{
    const auto flags = out.flags();
    const auto prec = out.precision();
    out << "cd_convention: symmetric mean squared nearest-neighbour distance, shown x1e5\n"
        << std::setprecision(9) << "cd_x1e5: " << cd * 1e5 << '\n'
        << "cd: " << cd << '\n'
        << "nc: " << nc << '\n'
        << "f1: " << f1 << '\n'
        << "precision: " << precision << '\n'
        << "recall: " << recall << '\n'
        << "tau: " << tau << '\n'
        << "samples_a: " << samples_a << '\n'
        << "samples_b: " << samples_b << '\n'
        << "seconds: " << seconds << '\n';
    out.flags(flags);
    out.precision(prec);
}

std::string MetricsReport::csv_header() { return "cd_x1e5,nc,f1,precision,recall,tau,samples_a,samples_b,seconds"; }

std::string MetricsReport::csv_row() const
{
    std::ostringstream s;
    s << std::setprecision(9) << cd * 1e5 << ',' << nc << ',' << f1 << ',' << precision << ',' << recall << ','
      << tau << ',' << samples_a << ',' << samples_b << ',' << seconds;
    return s.str();
}

int budget_resolution(std::uint64_t queries)
{
    int r = static_cast<int>(std::ceil(std::cbrt(static_cast<double>(queries))));
    // cbrt of a perfect cube can land a hair above the integer.
    while (r > 1 && static_cast<std::uint64_t>(r - 1) * (r - 1) * (r - 1) >= queries) {
        --r;
    }
    return std::max(r, 2);
}

} // namespace pdmesh
