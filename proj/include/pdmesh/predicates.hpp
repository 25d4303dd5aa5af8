#pragma once

#include "pdmesh/geometry.hpp"

#include <array>
#include <cstdint>
#include <stdexcept>

namespace pdmesh {

/// A point with a power weight and an identifier used for symbolic perturbation.
struct WeightedPoint {
    Point3 position;
    double weight = 0.0;
    std::int64_t id = -1;
};

using WeightedTet = std::array<WeightedPoint, 4>;

/// Thrown when a predicate or construction receives a degenerate simplex.
class DegenerateSimplex : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Sign of det[b-a; c-a; d-a]. Positive for (0,0,0),(1,0,0),(0,1,0),(0,0,1).
///
/// Evaluated in floating point under a forward error bound, with an exact
/// integer re-evaluation when the filter cannot certify the sign.
/// Throws std::invalid_argument on non-finite input.
Sign orient3d(const Point3& a, const Point3& b, const Point3& c, const Point3& d);

/// Power-distance conflict of `s` with the orthosphere of `tet`.
///
/// Positive when s is strictly inside the orthosphere in the power metric
/// (|s - x|^2 - w_s < R^2), Zero when on it, Negative when outside. No
/// perturbation is applied, so a tet vertex tested against its own tet gives Zero.
/// Throws DegenerateSimplex when the tet is flat.
Sign in_conflict(const WeightedTet& tet, const WeightedPoint& s);

/// Same test with ties broken symbolically: the point with the larger id is
/// treated as infinitesimally heavier. Never returns Zero as long as all five
/// ids are distinct and the tet is positively oriented.
Sign in_conflict_perturbed(const WeightedTet& tet, const WeightedPoint& s);

struct Orthosphere {
    Point3 center;
    /// Common power distance |center - p_i|^2 - w_i; negative when the weighted
    /// balls share a common interior point.
    double power_radius2 = 0.0;
    /// Set when the linear system is too badly conditioned to trust `center`.
    bool ill_conditioned = false;
};

/// Orthocenter of a weighted tetrahedron (the dual power-diagram vertex).
/// Throws DegenerateSimplex when the tet is flat.
Orthosphere orthocenter(const WeightedTet& tet);

/// Ratio above which the orthocenter system is flagged as ill-conditioned.
inline constexpr double kOrthocenterConditionLimit = 1e8;

namespace detail {

/// Unperturbed conflict sign for a tet already known to be positively oriented.
Sign power_side_oriented(const WeightedTet& tet, const WeightedPoint& s);

/// Perturbed conflict sign for a tet already known to be positively oriented.
Sign power_side_oriented_perturbed(const WeightedTet& tet, const WeightedPoint& s);

/// Exact sign of the lifted 4x4 power determinant; exposed for tests.
Sign power_determinant_exact(const WeightedTet& tet, const WeightedPoint& s);

/// Exact orientation sign with no filter; exposed for tests.
Sign orient3d_exact(const Point3& a, const Point3& b, const Point3& c, const Point3& d);

} // namespace detail

} // namespace pdmesh
