#pragma once

#include "pdmesh/geometry.hpp"
#include "pdmesh/predicates.hpp"
#include "pdmesh/sdf.hpp"

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace pdmesh {

using SiteId = std::int32_t;
using TetId = std::int32_t;

/// Neighbor sentinel for faces on the convex hull.
inline constexpr TetId kOutside = -1;

/// A power-diagram site. `weight` is the squared field value for sample sites.
struct WeightedSite {
    SiteId id = -1;
    Point3 position;
    double weight = 0.0;
    /// Signed field value at `position`.
    double value = 0.0;
    SiteClass site_class = SiteClass::SamplePos;
    bool is_boundary = false;
    bool hidden = false;

    WeightedPoint weighted_point() const { return {position, weight, id}; }
};

/// Cell of the regular triangulation. Vertices are positively oriented and
/// neighbor i is across the face opposite vertex i.
struct Tet {
    std::array<SiteId, 4> v{};
    std::array<TetId, 4> n{kOutside, kOutside, kOutside, kOutside};
    bool alive = false;
    std::uint64_t generation = 0;
};

enum class InsertStatus { Inserted, Hidden, Duplicate };

struct InsertionResult {
    InsertStatus status = InsertStatus::Inserted;
    /// Id of the new site; -1 for Duplicate.
    SiteId site = -1;
    /// Existing site the new position merged with (Duplicate only).
    SiteId duplicate_of = -1;
    std::vector<TetId> destroyed;
    std::vector<TetId> created;
    /// Previously visible sites whose power cells vanished with this insertion.
    std::vector<SiteId> newly_hidden;
};

class DomainError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Faces of a positively oriented tet, wound so the normal points away from
/// the opposite vertex.
inline constexpr int kTetFace[4][3] = {{1, 2, 3}, {0, 3, 2}, {0, 1, 3}, {0, 2, 1}};

/// Incremental 3D regular triangulation inside a box bounded by its eight
/// corners.
///
/// Ties in the conflict test are resolved by symbolic weight perturbation (the
/// larger site id is infinitesimally heavier), so every input, including grid
/// samples, has a unique triangulation. One writer at a time; const members are
/// safe to call concurrently on an unchanging instance.
class Tetrahedralization {
public:
    /// Box corners become permanent boundary sites weighted by their field
    /// samples (corner i at box.corner(i)). Throws DomainError when a corner
    /// sample is not strictly positive unless `allow_interior_corners` is set,
    /// and std::invalid_argument for a degenerate box.
    static Tetrahedralization init_domain(const Box3& box, std::span<const FieldSample, 8> corners,
                                          bool allow_interior_corners = false);

    const Box3& domain() const { return domain_; }
    /// Positions closer than this are the same site.
    double merge_tolerance() const { return merge_tol_; }

    /// A live tet containing p, found by a remembering stochastic walk from
    /// `hint` (or the most recently created tet). Throws std::out_of_range for
    /// points outside the domain box.
    TetId locate(const Point3& p, TetId hint = kOutside) const;

    /// Reference point location by scanning every live tet.
    TetId locate_brute_force(const Point3& p) const;

    /// Bowyer-Watson insertion of a weighted site.
    /// Throws std::out_of_range when the position is not strictly inside the
    /// domain and std::invalid_argument for non-finite or negative weights.
    InsertionResult insert(const Point3& position, double weight, double value, SiteClass site_class,
                           TetId hint = kOutside);

    /// Brute-force audit: orientation, neighbor symmetry, regularity under the
    /// perturbation, and coverage of visible sites. O(sites * tets).
    std::vector<std::string> verify_regularity() const;

    const std::vector<WeightedSite>& sites() const { return sites_; }
    const WeightedSite& site(SiteId id) const { return sites_.at(static_cast<std::size_t>(id)); }
    const std::vector<Tet>& tets() const { return tets_; }
    const Tet& tet(TetId id) const { return tets_.at(static_cast<std::size_t>(id)); }
    bool is_live(TetId id) const { return id >= 0 && static_cast<std::size_t>(id) < tets_.size() && tets_[id].alive; }
    std::size_t live_tet_count() const { return live_count_; }
    const std::vector<SiteId>& hidden_sites() const { return hidden_; }
    std::uint64_t generation_counter() const { return generation_; }

    WeightedTet weighted_tet(TetId id) const;

    /// Line-based debug dump: `v id x y z w class` per site, `t s0 s1 s2 s3` per live tet.
    void dump(std::ostream& out) const;

    /// Direct mutable access for fault-injection tests.
    Tet& tet_for_testing(TetId id) { return tets_.at(static_cast<std::size_t>(id)); }
    /// Records a hidden site without any conflict test.
    SiteId add_hidden_site_for_testing(const Point3& position, double weight, double value, SiteClass site_class);

private:
    Tetrahedralization(const Box3& box);

    struct CellKey {
        std::int64_t x, y, z;
        bool operator==(const CellKey&) const = default;
    };
    struct CellKeyHash {
        std::size_t operator()(const CellKey& k) const noexcept;
    };

    CellKey cell_of(const Point3& p) const;
    SiteId find_duplicate(const Point3& p) const;
    void index_site(SiteId id);
    TetId allocate_tet();
    Sign conflict(TetId t, const WeightedPoint& s) const;

    Box3 domain_;
    double merge_tol_;
    std::vector<WeightedSite> sites_;
    std::vector<Tet> tets_;
    std::vector<TetId> free_;
    std::vector<SiteId> hidden_;
    std::size_t live_count_ = 0;
    std::uint64_t generation_ = 0;
    TetId last_created_ = kOutside;
    std::unordered_map<CellKey, std::vector<SiteId>, CellKeyHash> site_index_;

    // Per-tet scratch state for cavity search, stamped with the insertion epoch.
    std::vector<std::uint32_t> visit_epoch_;
    std::vector<std::uint8_t> visit_state_;
    std::uint32_t epoch_ = 0;
};

} // namespace pdmesh
