#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string_view>

namespace pdmesh {

struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    constexpr Vec3() = default;
    constexpr Vec3(double x_, double y_, double z_) : x(x_), y(y_), z(z_) {}

    constexpr double operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }

    constexpr Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }
    constexpr Vec3& operator-=(const Vec3& o) { x -= o.x; y -= o.y; z -= o.z; return *this; }
    constexpr Vec3& operator*=(double s) { x *= s; y *= s; z *= s; return *this; }

    friend constexpr Vec3 operator+(Vec3 a, const Vec3& b) { return a += b; }
    friend constexpr Vec3 operator-(Vec3 a, const Vec3& b) { return a -= b; }
    friend constexpr Vec3 operator-(const Vec3& a) { return {-a.x, -a.y, -a.z}; }
    friend constexpr Vec3 operator*(Vec3 a, double s) { return a *= s; }
    friend constexpr Vec3 operator*(double s, Vec3 a) { return a *= s; }
    friend constexpr Vec3 operator/(const Vec3& a, double s) { return {a.x / s, a.y / s, a.z / s}; }
    friend constexpr bool operator==(const Vec3&, const Vec3&) = default;
};

/// Positions share the vector type; the alias documents intent at API boundaries.
using Point3 = Vec3;

constexpr double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }

constexpr Vec3 cross(const Vec3& a, const Vec3& b)
{
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

constexpr double squared_norm(const Vec3& a) { return dot(a, a); }
inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }
constexpr double squared_distance(const Vec3& a, const Vec3& b) { return squared_norm(a - b); }
inline double distance(const Vec3& a, const Vec3& b) { return norm(a - b); }

inline bool is_finite(const Vec3& a) { return std::isfinite(a.x) && std::isfinite(a.y) && std::isfinite(a.z); }

/// Result of an exact sign computation.
enum class Sign : std::int8_t { Negative = -1, Zero = 0, Positive = 1 };

constexpr Sign operator-(Sign s) { return static_cast<Sign>(-static_cast<int>(s)); }

template <typename T>
constexpr Sign sign_of(const T& v)
{
    return v > 0 ? Sign::Positive : (v < 0 ? Sign::Negative : Sign::Zero);
}

/// Axis-aligned box; the extraction domain.
struct Box3 {
    Point3 lo;
    Point3 hi;

    Vec3 extent() const { return hi - lo; }
    double diagonal() const { return norm(hi - lo); }
    bool contains(const Point3& p) const
    {
        return p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y && p.z >= lo.z && p.z <= hi.z;
    }
    /// Strict containment with an inset margin on every face.
    bool contains_strictly(const Point3& p, double margin) const
    {
        return p.x > lo.x + margin && p.x < hi.x - margin && p.y > lo.y + margin && p.y < hi.y - margin &&
               p.z > lo.z + margin && p.z < hi.z - margin;
    }
    Point3 corner(int i) const
    {
        return {(i & 1) ? hi.x : lo.x, (i & 2) ? hi.y : lo.y, (i & 4) ? hi.z : lo.z};
    }
};

/// [-1,1]^3, the extended extraction domain.
inline constexpr Box3 kDefaultDomain{{-1.0, -1.0, -1.0}, {1.0, 1.0, 1.0}};
/// [-1/2,1/2]^3, where models live and the initial sampling grid is placed.
inline constexpr Box3 kModelCube{{-0.5, -0.5, -0.5}, {0.5, 0.5, 0.5}};

/// Site classification for power-diagram sites.
///
/// Samples carry the sign of their field value; projections carry the sign of the
/// sample they were projected from.
enum class SiteClass : std::uint8_t { SampleNeg, SamplePos, ProjOfNeg, ProjOfPos };

/// The two site categories separated by the extracted surface.
/// Cat1 = inside samples and projections of outside samples; Cat2 = the rest.
enum class Category : std::uint8_t { Cat1, Cat2 };

constexpr Category category(SiteClass c)
{
    return (c == SiteClass::SampleNeg || c == SiteClass::ProjOfPos) ? Category::Cat1 : Category::Cat2;
}

constexpr bool is_projection(SiteClass c) { return c == SiteClass::ProjOfNeg || c == SiteClass::ProjOfPos; }

std::string_view to_string(SiteClass c);
/// Throws std::invalid_argument for unknown names.
SiteClass site_class_from_string(std::string_view s);

} // namespace pdmesh
