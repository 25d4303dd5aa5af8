#pragma once

#include "pdmesh/geometry.hpp"

#include <array>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace pdmesh {

/// Field value and gradient at a point.
struct FieldSample {
    double value = 0.0;
    Vec3 gradient;
};

/// A signed distance field: negative inside, positive outside.
///
/// eval() is const and may be called from any number of threads; the query
/// counter is updated atomically.
class ScalarField {
public:
    ScalarField() = default;
    // Copies start with a fresh query counter.
    ScalarField(const ScalarField&) noexcept {}
    ScalarField& operator=(const ScalarField&) noexcept { return *this; }
    virtual ~ScalarField() = default;

    FieldSample eval(const Point3& p) const
    {
        queries_.fetch_add(1, std::memory_order_relaxed);
        return evaluate(p);
    }

    std::uint64_t query_count() const { return queries_.load(std::memory_order_relaxed); }
    void reset_query_count() { queries_.store(0, std::memory_order_relaxed); }

protected:
    virtual FieldSample evaluate(const Point3& p) const = 0;

private:
    mutable std::atomic<std::uint64_t> queries_{0};
};

class FieldSpecError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Analytic primitives and min/max CSG composition.
///
/// Spec grammar (whitespace-free):
///   sphere:r[,cx,cy,cz]
///   box:hx,hy,hz[,cx,cy,cz]
///   torus:R,r[,cx,cy,cz]          ring in the xy-plane around the z axis
///   plane:nx,ny,nz[,offset]       value = n.x/|n| - offset
///   union(A;B;...)  intersection(A;B;...)  difference(A;B)
///
/// CSG gradients are taken from the operand that attains the min/max; on a tie
/// the operand listed first wins.
class AnalyticField final : public ScalarField {
public:
    struct Node;

    explicit AnalyticField(std::string_view spec);
    ~AnalyticField() override;
    AnalyticField(AnalyticField&&) noexcept;
    AnalyticField& operator=(AnalyticField&&) noexcept;

    const std::string& spec() const { return spec_; }

protected:
    FieldSample evaluate(const Point3& p) const override;

private:
    std::string spec_;
    std::unique_ptr<Node> root_;
};

std::unique_ptr<AnalyticField> analytic_field(std::string_view spec);

/// Regular grid of samples, x-fastest, trilinearly interpolated.
class GridField final : public ScalarField {
public:
    GridField(std::array<std::uint32_t, 3> dims, Point3 origin, double spacing, std::vector<double> values);

    const std::array<std::uint32_t, 3>& dims() const { return dims_; }
    const Point3& origin() const { return origin_; }
    double spacing() const { return spacing_; }
    const std::vector<double>& values() const { return values_; }

    double at(std::uint32_t i, std::uint32_t j, std::uint32_t k) const
    {
        return values_[(static_cast<std::size_t>(k) * dims_[1] + j) * dims_[0] + i];
    }

    Point3 node(std::uint32_t i, std::uint32_t j, std::uint32_t k) const
    {
        return {origin_.x + i * spacing_, origin_.y + j * spacing_, origin_.z + k * spacing_};
    }

    /// Box where eval() is defined: the grid box inset by one cell.
    Box3 valid_box() const;

    /// Trilinear value without touching the query counter. Requires p in the grid box.
    double interpolate(const Point3& p) const;

protected:
    /// Trilinear value; gradient by central differences of the interpolant at
    /// half-spacing. Throws std::out_of_range outside valid_box().
    FieldSample evaluate(const Point3& p) const override;

private:
    std::array<std::uint32_t, 3> dims_;
    Point3 origin_;
    double spacing_;
    std::vector<double> values_;
};

/// Samples `field` at every grid node.
GridField sample_grid(const ScalarField& field, std::array<std::uint32_t, 3> dims, Point3 origin, double spacing);

/// SDFG binary format: "SDFG", u32 nx ny nz, f32 origin[3], f32 spacing,
/// then nx*ny*nz f32 values, little-endian, x-fastest.
void write_sdfg(const std::filesystem::path& path, const GridField& grid);
GridField read_sdfg(const std::filesystem::path& path);

/// `grid:<path>` loads an SDFG file; anything else is an analytic spec.
std::unique_ptr<ScalarField> load_field(std::string_view spec);

struct ProjectionConfig {
    int max_iters = 20;
    double tol = 1e-6 * kDefaultDomain.diagonal();
};

struct ProjectionResult {
    Point3 point;
    bool converged = false;
    int iterations = 0;
    /// Field value at `point` (the last evaluated sample).
    double value = 0.0;
    /// Field value at the starting point.
    double start_value = 0.0;
};

/// Moves p onto the zero level set by repeated q <- q - phi(q) * grad(q)/|grad(q)|.
/// Stops when |phi(q)| <= tol; a vanishing gradient ends the iteration unconverged.
ProjectionResult project_to_surface(const ScalarField& field, const Point3& p, const ProjectionConfig& cfg = {});

} // namespace pdmesh
