#pragma once

#include "pdmesh/delaunay.hpp"
#include "pdmesh/extraction.hpp"
#include "pdmesh/sdf.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace pdmesh {

struct RefineConfig {
    /// Samples per axis of the initial grid over the model cube.
    int init_resolution = 8;
    /// Sites added by refinement before the loop stops (initial sites excluded).
    std::int64_t k_max = 5000;
    /// Stop once the largest remaining deviation drops below this.
    double eps = 0.0;
    ProjectionConfig projection;
    /// Heap entries processed per step before their new patches are scored
    /// together; scoring runs on worker threads when this exceeds one.
    int batch_size = 1;
    Box3 domain = kDefaultDomain;
    Box3 model_box = kModelCube;
    /// Permit domain corners inside the object (the surface then leaves the box).
    bool allow_open_boundary = false;

    double surface_band() const { return 10.0 * projection.tol; }
    /// Throws std::invalid_argument when out of range.
    void validate() const;
};

struct DeviationResult {
    double delta = 0.0;
    bool degenerate = false;
};

/// Area-weighted gradient rejection over the incenter split of a triangle.
/// Three field queries; a triangle with area at most 1e-16 gives zero and the
/// degenerate flag without querying.
DeviationResult triangle_deviation(const Point3& a, const Point3& b, const Point3& c, const ScalarField& field);

/// Sum over the triangles of a 3- or 4-corner patch (quads split as in
/// split_polygon).
double patch_deviation(const Point3* corners, int size, const ScalarField& field);

struct HeapEntry {
    TetId tet = kOutside;
    std::uint64_t generation = 0;
    double delta = 0.0;
};

/// Max-order on delta; equal deltas favour the newer generation.
inline bool heap_less(const HeapEntry& a, const HeapEntry& b)
{
    return a.delta < b.delta || (a.delta == b.delta && a.generation < b.generation);
}

struct StepRecord {
    std::int64_t iter = 0;
    /// Sites added by refinement so far.
    std::int64_t inserted = 0;
    double delta = 0.0;
    /// Field queries since the run started.
    std::uint64_t queries = 0;
    /// Tets destroyed during the step.
    std::size_t cavity = 0;
    double ms = 0.0;
};

struct RunStats {
    std::vector<StepRecord> steps;
    std::size_t initial_sites = 0;
    std::uint64_t initial_queries = 0;
    std::size_t skipped = 0;

    /// `iter,inserted,delta,queries,cavity,ms`; ms is written as 0 without timing.
    void write_csv(std::ostream& out, bool timing = true) const;
};

enum class SkipReason { None, OutsideDomain, IllConditioned, NotConverged, Duplicate, Hidden };

std::string_view to_string(SkipReason r);

struct StepOutcome {
    enum class Kind { Inserted, Skipped, Exhausted, Converged, BudgetReached };
    Kind kind = Kind::Exhausted;
    SkipReason reason = SkipReason::None;
    TetId tet = kOutside;
    double delta = 0.0;
    /// Sites added by this step (0, 1 or 2 per processed entry).
    int sites_added = 0;
    std::size_t cavity = 0;
};

/// Result of comparing queued entries against the live mixed tets.
struct HeapAudit {
    std::size_t live_mixed = 0;
    std::size_t fresh_queued = 0;
    std::size_t fresh_parked = 0;
    std::size_t stale = 0;
    /// Live mixed tets with no fresh entry.
    std::size_t missing = 0;
    /// Tets with more than one fresh entry.
    std::size_t duplicated = 0;

    bool bijective() const { return missing == 0 && duplicated == 0 && fresh_queued + fresh_parked == live_mixed; }
};

class SurfaceNotDetected : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// The adaptive loop. The constructor builds the initial triangulation, so a
/// freshly constructed Refiner already has a scored heap.
///
/// Entries popped but not acted on (skipped, or whose tet survived the step)
/// are parked: they stay fresh for auditing but are never popped again.
class Refiner {
public:
    /// Throws SurfaceNotDetected when the initial sites produce no mixed tet.
    Refiner(const ScalarField& field, RefineConfig cfg);

    StepOutcome step();
    /// Runs steps until the budget, eps or the heap stops the loop.
    void run_to_completion();
    bool finished() const { return finished_; }

    SurfaceMesh extract() const { return extract_mesh(tri_); }
    const Tetrahedralization& triangulation() const { return tri_; }
    const RunStats& stats() const { return stats_; }
    const RefineConfig& config() const { return cfg_; }
    std::int64_t inserted() const { return inserted_; }
    std::size_t queue_size() const { return heap_.size(); }
    std::size_t parked_size() const { return parked_.size(); }
    double last_delta() const { return last_delta_; }
    HeapAudit audit_heap() const;
    /// Largest fresh queued entry, discarding stale ones on the way.
    std::optional<HeapEntry> peek();

    Tetrahedralization& triangulation_for_testing() { return tri_; }

private:
    void initialize();
    /// Inserts one site; returns the insertion result with status.
    InsertionResult add_site(const Point3& p, double value, SiteClass c, TetId hint);
    std::optional<HeapEntry> pop_fresh();
    bool is_fresh(const HeapEntry& e) const;
    void score_and_push(std::vector<TetId> tets);
    StepOutcome process(const HeapEntry& e);

    const ScalarField& field_;
    RefineConfig cfg_;
    std::uint64_t query_base_ = 0;
    Tetrahedralization tri_;
    std::vector<HeapEntry> heap_;
    std::vector<HeapEntry> parked_;
    RunStats stats_;
    std::int64_t inserted_ = 0;
    std::int64_t iter_ = 0;
    double last_delta_ = 0.0;
    bool finished_ = false;
};

struct RunResult {
    SurfaceMesh mesh;
    RunStats stats;
    std::int64_t inserted = 0;
    double last_delta = 0.0;
    std::size_t sites = 0;
};

RunResult run(const ScalarField& field, const RefineConfig& cfg);

} // namespace pdmesh
