#include "pdmesh/delaunay.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>

namespace pdmesh {

namespace {

constexpr double kMergeFraction = 1e-9;

std::uint64_t splitmix64(std::uint64_t& state)
{
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

std::uint64_t face_key(SiteId a, SiteId b, SiteId c)
{
    SiteId s[3] = {a, b, c};
    std::sort(s, s + 3);
    return (static_cast<std::uint64_t>(s[0]) << 42) ^ (static_cast<std::uint64_t>(s[1]) << 21) ^
           static_cast<std::uint64_t>(s[2]);
}

std::uint64_t edge_key(SiteId a, SiteId b)
{
    if (a > b) {
        std::swap(a, b);
    }
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) | static_cast<std::uint32_t>(b);
}

} // namespace

std::size_t Tetrahedralization::CellKeyHash::operator()(const CellKey& k) const noexcept
{
    std::uint64_t h = static_cast<std::uint64_t>(k.x) * 0x9e3779b97f4a7c15ull;
    h ^= static_cast<std::uint64_t>(k.y) * 0xc2b2ae3d27d4eb4full + (h << 6) + (h >> 2);
    h ^= static_cast<std::uint64_t>(k.z) * 0x165667b19e3779f9ull + (h << 6) + (h >> 2);
    return static_cast<std::size_t>(h);
}

Tetrahedralization::Tetrahedralization(const Box3& box) : domain_(box), merge_tol_(kMergeFraction * box.diagonal()) {}

Tetrahedralization Tetrahedralization::init_domain(const Box3& box, std::span<const FieldSample, 8> corners,
                                                   bool allow_interior_corners)
{
    const Vec3 ext = box.extent();
    if (!is_finite(box.lo) || !is_finite(box.hi) || !(ext.x > 0.0) || !(ext.y > 0.0) || !(ext.z > 0.0)) {
        throw std::invalid_argument("domain box is degenerate");
    }
    Tetrahedralization t(box);
    for (int i = 0; i < 8; ++i) {
        const double v = corners[i].value;
        if (!std::isfinite(v)) {
            throw std::invalid_argument("corner field sample is not finite");
        }
        if (v <= 0.0 && !allow_interior_corners) {
            throw DomainError("domain corner lies inside the object; the domain is too small");
        }
        WeightedSite s;
        s.id = i;
        s.position = box.corner(i);
        s.weight = v * v;
        s.value = v;
        s.site_class = v < 0.0 ? SiteClass::SampleNeg : SiteClass::SamplePos;
        s.is_boundary = true;
        t.sites_.push_back(s);
        t.index_site(i);
    }

    // Eight points: keep every positively oriented quadruple whose perturbed
    // orthosphere is empty of the other corners.
    std::vector<std::array<SiteId, 4>> cells;
    for (int a = 0; a < 8; ++a) {
        for (int b = a + 1; b < 8; ++b) {
            for (int c = b + 1; c < 8; ++c) {
                for (int d = c + 1; d < 8; ++d) {
                    std::array<SiteId, 4> v{a, b, c, d};
                    const Sign o = orient3d(t.sites_[a].position, t.sites_[b].position, t.sites_[c].position,
                                            t.sites_[d].position);
                    if (o == Sign::Zero) {
                        continue;
                    }
                    if (o == Sign::Negative) {
                        std::swap(v[2], v[3]);
                    }
                    const WeightedTet wt{t.sites_[v[0]].weighted_point(), t.sites_[v[1]].weighted_point(),
                                         t.sites_[v[2]].weighted_point(), t.sites_[v[3]].weighted_point()};
                    bool empty = true;
                    for (int m = 0; m < 8 && empty; ++m) {
                        if (m != a && m != b && m != c && m != d) {
                            empty = detail::power_side_oriented_perturbed(wt, t.sites_[m].weighted_point()) !=
                                    Sign::Positive;
                        }
                    }
                    if (empty) {
                        cells.push_back(v);
                    }
                }
            }
        }
    }

    double volume = 0.0;
    std::unordered_map<std::uint64_t, std::pair<TetId, int>> open_faces;
    for (const auto& v : cells) {
        const TetId id = t.allocate_tet();
        Tet& tet = t.tets_[id];
        tet.v = v;
        const Vec3 p0 = t.sites_[v[0]].position;
        volume += dot(t.sites_[v[1]].position - p0,
                      cross(t.sites_[v[2]].position - p0, t.sites_[v[3]].position - p0)) / 6.0;
        for (int f = 0; f < 4; ++f) {
            const auto key = face_key(v[kTetFace[f][0]], v[kTetFace[f][1]], v[kTetFace[f][2]]);
            auto it = open_faces.find(key);
            if (it == open_faces.end()) {
                open_faces.emplace(key, std::pair{id, f});
            } else {
                tet.n[f] = it->second.first;
                t.tets_[it->second.first].n[it->second.second] = id;
                open_faces.erase(it);
            }
        }
    }
    const double box_volume = ext.x * ext.y * ext.z;
    if (std::abs(volume - box_volume) > 1e-9 * box_volume || open_faces.size() != 12) {
        throw std::logic_error("initial corner triangulation does not tile the box");
    }
    return t;
}

Tetrahedralization::CellKey Tetrahedralization::cell_of(const Point3& p) const
{
    return {static_cast<std::int64_t>(std::floor(p.x / merge_tol_)),
            static_cast<std::int64_t>(std::floor(p.y / merge_tol_)),
            static_cast<std::int64_t>(std::floor(p.z / merge_tol_))};
}

SiteId Tetrahedralization::find_duplicate(const Point3& p) const
{
    const CellKey c = cell_of(p);
    const double tol2 = merge_tol_ * merge_tol_;
    for (std::int64_t dz = -1; dz <= 1; ++dz) {
        for (std::int64_t dy = -1; dy <= 1; ++dy) {
            for (std::int64_t dx = -1; dx <= 1; ++dx) {
                auto it = site_index_.find({c.x + dx, c.y + dy, c.z + dz});
                if (it == site_index_.end()) {
                    continue;
                }
                for (SiteId id : it->second) {
                    if (squared_distance(sites_[id].position, p) < tol2) {
                        return id;
                    }
                }
            }
        }
    }
    return -1;
}

void Tetrahedralization::index_site(SiteId id) { site_index_[cell_of(sites_[id].position)].push_back(id); }

TetId Tetrahedralization::allocate_tet()
{
    TetId id;
    if (!free_.empty()) {
        id = free_.back();
        free_.pop_back();
        tets_[id] = Tet{};
    } else {
        id = static_cast<TetId>(tets_.size());
        tets_.emplace_back();
        visit_epoch_.push_back(0);
        visit_state_.push_back(0);
    }
    Tet& t = tets_[id];
    t.alive = true;
    t.generation = ++generation_;
    ++live_count_;
    last_created_ = id;
    return id;
}

WeightedTet Tetrahedralization::weighted_tet(TetId id) const
{
    const Tet& t = tets_.at(static_cast<std::size_t>(id));
    return {sites_[t.v[0]].weighted_point(), sites_[t.v[1]].weighted_point(), sites_[t.v[2]].weighted_point(),
            sites_[t.v[3]].weighted_point()};
}

Sign Tetrahedralization::conflict(TetId t, const WeightedPoint& s) const
{
    return detail::power_side_oriented_perturbed(weighted_tet(t), s);
}

TetId Tetrahedralization::locate(const Point3& p, TetId hint) const
{
    if (!is_finite(p) || !domain_.contains(p)) {
        throw std::out_of_range("point lies outside the domain box");
    }
    TetId cur = is_live(hint) ? hint : last_created_;
    if (!is_live(cur)) {
        cur = kOutside;
        for (TetId i = static_cast<TetId>(tets_.size()) - 1; i >= 0; --i) {
            if (tets_[i].alive) {
                cur = i;
                break;
            }
        }
        if (cur == kOutside) {
            throw std::logic_error("triangulation has no live tets");
        }
    }

    std::uint64_t rng = std::bit_cast<std::uint64_t>(p.x) ^ (std::bit_cast<std::uint64_t>(p.y) * 3) ^
                        (std::bit_cast<std::uint64_t>(p.z) * 7);
    TetId previous = kOutside;
    const std::size_t max_steps = 4 * tets_.size() + 64;
    for (std::size_t step = 0; step < max_steps; ++step) {
        const Tet& t = tets_[cur];
        const int start = static_cast<int>(splitmix64(rng) & 3u);
        TetId next = kOutside;
        bool crossed = false;
        for (int k = 0; k < 4; ++k) {
            const int f = (start + k) & 3;
            if (t.n[f] == previous && previous != kOutside) {
                continue;
            }
            Point3 q[4] = {sites_[t.v[0]].position, sites_[t.v[1]].position, sites_[t.v[2]].position,
                           sites_[t.v[3]].position};
            q[f] = p;
            if (orient3d(q[0], q[1], q[2], q[3]) == Sign::Negative) {
                if (t.n[f] == kOutside) {
                    throw std::logic_error("walk left the convex hull");
                }
                next = t.n[f];
                crossed = true;
                break;
            }
        }
        if (!crossed) {
            return cur;
        }
        previous = cur;
        cur = next;
    }
    return locate_brute_force(p);
}

TetId Tetrahedralization::locate_brute_force(const Point3& p) const
{
    if (!is_finite(p) || !domain_.contains(p)) {
        throw std::out_of_range("point lies outside the domain box");
    }
    for (TetId id = 0; id < static_cast<TetId>(tets_.size()); ++id) {
        const Tet& t = tets_[id];
        if (!t.alive) {
            continue;
        }
        bool inside = true;
        for (int f = 0; f < 4 && inside; ++f) {
            Point3 q[4] = {sites_[t.v[0]].position, sites_[t.v[1]].position, sites_[t.v[2]].position,
                           sites_[t.v[3]].position};
            q[f] = p;
            inside = orient3d(q[0], q[1], q[2], q[3]) != Sign::Negative;
        }
        if (inside) {
            return id;
        }
    }
    throw std::logic_error("no live tet contains the point");
}

InsertionResult Tetrahedralization::insert(const Point3& position, double weight, double value,
                                           SiteClass site_class, TetId hint)
{
    if (!is_finite(position) || !std::isfinite(weight) || !std::isfinite(value)) {
        throw std::invalid_argument("site position, weight and value must be finite");
    }
    if (weight < 0.0) {
        throw std::invalid_argument("site weight must be non-negative");
    }
    if (!domain_.contains_strictly(position, merge_tol_)) {
        throw std::out_of_range("site lies outside the domain interior");
    }

    InsertionResult result;
    if (const SiteId dup = find_duplicate(position); dup >= 0) {
        result.status = InsertStatus::Duplicate;
        result.duplicate_of = dup;
        return result;
    }

    const TetId start = locate(position, hint);
    const SiteId id = static_cast<SiteId>(sites_.size());
    WeightedSite site;
    site.id = id;
    site.position = position;
    site.weight = weight;
    site.value = value;
    site.site_class = site_class;
    const WeightedPoint wp = site.weighted_point();
    result.site = id;

    if (conflict(start, wp) != Sign::Positive) {
        site.hidden = true;
        sites_.push_back(site);
        index_site(id);
        hidden_.push_back(id);
        result.status = InsertStatus::Hidden;
        return result;
    }

    // Grow the conflict cavity breadth-first over neighbor links.
    constexpr std::uint8_t kInCavity = 1, kOutsideCavity = 2;
    ++epoch_;
    auto state = [&](TetId t) -> std::uint8_t { return visit_epoch_[t] == epoch_ ? visit_state_[t] : 0; };
    auto set_state = [&](TetId t, std::uint8_t s) {
        visit_epoch_[t] = epoch_;
        visit_state_[t] = s;
    };

    struct BoundaryFace {
        TetId outer;
        TetId inner;
        int face;
    };
    std::vector<BoundaryFace> boundary;
    std::vector<TetId>& cavity = result.destroyed;
    cavity.push_back(start);
    set_state(start, kInCavity);
    for (std::size_t i = 0; i < cavity.size(); ++i) {
        const TetId t = cavity[i];
        for (int f = 0; f < 4; ++f) {
            const TetId nb = tets_[t].n[f];
            if (nb == kOutside) {
                boundary.push_back({kOutside, t, f});
                continue;
            }
            std::uint8_t st = state(nb);
            if (st == 0) {
                st = conflict(nb, wp) == Sign::Positive ? kInCavity : kOutsideCavity;
                set_state(nb, st);
                if (st == kInCavity) {
                    cavity.push_back(nb);
                }
            }
            if (st == kOutsideCavity) {
                boundary.push_back({nb, t, f});
            }
        }
    }

    sites_.push_back(site);
    index_site(id);

    // Cone the new site to every boundary face.
    std::unordered_map<std::uint64_t, std::pair<TetId, int>> open_edges;
    open_edges.reserve(boundary.size() * 2);
    result.created.reserve(boundary.size());
    for (const auto& bf : boundary) {
        std::array<SiteId, 4> v = tets_[bf.inner].v;
        v[bf.face] = id;
        const TetId nt = allocate_tet();
        Tet& tet = tets_[nt];
        tet.v = v;
        tet.n[bf.face] = bf.outer;
        if (bf.outer != kOutside) {
            Tet& outer = tets_[bf.outer];
            for (int g = 0; g < 4; ++g) {
                if (outer.n[g] == bf.inner) {
                    outer.n[g] = nt;
                    break;
                }
            }
        }
        for (int j = 0; j < 4; ++j) {
            if (j == bf.face) {
                continue;
            }
            // Face opposite j contains the new site and the two remaining vertices.
            SiteId rest[2];
            int r = 0;
            for (int k = 0; k < 4; ++k) {
                if (k != j && k != bf.face) {
                    rest[r++] = v[k];
                }
            }
            const auto key = edge_key(rest[0], rest[1]);
            auto it = open_edges.find(key);
            if (it == open_edges.end()) {
                open_edges.emplace(key, std::pair{nt, j});
            } else {
                tet.n[j] = it->second.first;
                tets_[it->second.first].n[it->second.second] = nt;
                open_edges.erase(it);
            }
        }
        result.created.push_back(nt);
    }
    if (!open_edges.empty()) {
        throw std::logic_error("cavity boundary is not a closed surface");
    }
    for (TetId nt : result.created) {
        const Tet& t = tets_[nt];
        if (orient3d(sites_[t.v[0]].position, sites_[t.v[1]].position, sites_[t.v[2]].position,
                     sites_[t.v[3]].position) != Sign::Positive) {
            throw std::logic_error("insertion produced a non-positive tet");
        }
    }

    // Vertices interior to the cavity lose their power cells.
    std::vector<SiteId> on_boundary;
    on_boundary.reserve(boundary.size() * 3);
    for (const auto& bf : boundary) {
        for (int k = 0; k < 4; ++k) {
            if (k != bf.face) {
                on_boundary.push_back(tets_[bf.inner].v[k]);
            }
        }
    }
    std::sort(on_boundary.begin(), on_boundary.end());
    std::vector<SiteId> in_cavity;
    for (TetId t : cavity) {
        for (SiteId s : tets_[t].v) {
            in_cavity.push_back(s);
        }
    }
    std::sort(in_cavity.begin(), in_cavity.end());
    in_cavity.erase(std::unique(in_cavity.begin(), in_cavity.end()), in_cavity.end());
    for (SiteId s : in_cavity) {
        if (!std::binary_search(on_boundary.begin(), on_boundary.end(), s)) {
            sites_[s].hidden = true;
            hidden_.push_back(s);
            result.newly_hidden.push_back(s);
        }
    }

    for (TetId t : cavity) {
        tets_[t].alive = false;
        --live_count_;
        free_.push_back(t);
    }
    return result;
}

SiteId Tetrahedralization::add_hidden_site_for_testing(const Point3& position, double weight, double value,
                                                      SiteClass site_class)
{
    WeightedSite s;
    s.id = static_cast<SiteId>(sites_.size());
    s.position = position;
    s.weight = weight;
    s.value = value;
    s.site_class = site_class;
    s.hidden = true;
    sites_.push_back(s);
    index_site(s.id);
    hidden_.push_back(s.id);
    return s.id;
}

std::vector<std::string> Tetrahedralization::verify_regularity() const
{
    std::vector<std::string> out;
    auto report = [&](auto&&... parts) {
        std::ostringstream s;
        (s << ... << parts);
        out.push_back(s.str());
    };

    std::vector<char> used(sites_.size(), 0);
    for (TetId id = 0; id < static_cast<TetId>(tets_.size()); ++id) {
        const Tet& t = tets_[id];
        if (!t.alive) {
            continue;
        }
        for (SiteId s : t.v) {
            if (s < 0 || static_cast<std::size_t>(s) >= sites_.size()) {
                report("tet ", id, " references unknown site ", s);
                return out;
            }
            used[s] = 1;
            if (sites_[s].hidden) {
                report("tet ", id, " uses hidden site ", s);
            }
        }
        if (orient3d(sites_[t.v[0]].position, sites_[t.v[1]].position, sites_[t.v[2]].position,
                     sites_[t.v[3]].position) != Sign::Positive) {
            report("tet ", id, " is not positively oriented");
        }
        for (int f = 0; f < 4; ++f) {
            const TetId nb = t.n[f];
            if (nb == kOutside) {
                continue;
            }
            if (!is_live(nb)) {
                report("tet ", id, " links to dead tet ", nb);
                continue;
            }
            const Tet& o = tets_[nb];
            int back = -1;
            for (int g = 0; g < 4; ++g) {
                if (o.n[g] == id) {
                    back = g;
                }
            }
            if (back < 0) {
                report("tet ", id, " -> ", nb, " link is not mutual");
                continue;
            }
            if (face_key(t.v[kTetFace[f][0]], t.v[kTetFace[f][1]], t.v[kTetFace[f][2]]) !=
                face_key(o.v[kTetFace[back][0]], o.v[kTetFace[back][1]], o.v[kTetFace[back][2]])) {
                report("tets ", id, " and ", nb, " do not share the linked face");
            }
        }
    }

    for (const auto& s : sites_) {
        if (!s.hidden && !used[s.id]) {
            report("visible site ", s.id, " is in no live tet");
        }
    }

    for (TetId id = 0; id < static_cast<TetId>(tets_.size()); ++id) {
        const Tet& t = tets_[id];
        if (!t.alive) {
            continue;
        }
        const WeightedTet wt = weighted_tet(id);
        for (const auto& s : sites_) {
            if (s.hidden || s.id == t.v[0] || s.id == t.v[1] || s.id == t.v[2] || s.id == t.v[3]) {
                continue;
            }
            if (detail::power_side_oriented_perturbed(wt, s.weighted_point()) == Sign::Positive) {
                report("site ", s.id, " conflicts with tet ", id);
            }
        }
    }
    return out;
}

void Tetrahedralization::dump(std::ostream& out) const
{
    const auto flags = out.flags();
    const auto prec = out.precision();
    out << std::setprecision(17);
    for (const auto& s : sites_) {
        out << "v " << s.id << ' ' << s.position.x << ' ' << s.position.y << ' ' << s.position.z << ' ' << s.weight
            << ' ' << to_string(s.site_class) << '\n';
    }
    for (const auto& t : tets_) {
        if (t.alive) {
            out << "t " << t.v[0] << ' ' << t.v[1] << ' ' << t.v[2] << ' ' << t.v[3] << '\n';
        }
    }
    out.flags(flags);
    out.precision(prec);
}

} // namespace pdmesh
