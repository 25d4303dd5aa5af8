#include "pdmesh/predicates.hpp"

#include <gmpxx.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace pdmesh {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon() / 2.0; // 2^-53
constexpr double kOrientErrBound = (7.0 + 56.0 * kEps) * kEps;
// Conservative bound for the lifted 4x4 determinant; entries carry a handful of
// roundings each and the expansion adds 24 products of four factors.
constexpr double kPowerErrBound = 128.0 * kEps;
// Below this magnitude the filter's relative bound is not trusted (underflow).
constexpr double kFilterFloor = 1e-150;

void require_finite(const Point3& p)
{
    if (!is_finite(p)) {
        throw std::invalid_argument("predicate input is not finite");
    }
}

// x = mantissa * 2^exponent with a 53-bit integer mantissa.
struct Dyadic {
    std::int64_t mantissa = 0;
    long exponent = 0;
};

Dyadic to_dyadic(double v)
{
    if (v == 0.0) {
        return {0, std::numeric_limits<long>::max()};
    }
    int e = 0;
    const double f = std::frexp(v, &e);
    return {static_cast<std::int64_t>(std::ldexp(f, 53)), static_cast<long>(e) - 53};
}

long min_exponent(const Dyadic* values, std::size_t n)
{
    long e = std::numeric_limits<long>::max();
    for (std::size_t i = 0; i < n; ++i) {
        e = std::min(e, values[i].exponent);
    }
    return e == std::numeric_limits<long>::max() ? 0 : e;
}

mpz_class scaled(const Dyadic& d, long base)
{
    if (d.mantissa == 0) {
        return 0;
    }
    mpz_class r(static_cast<long>(d.mantissa));
    r <<= static_cast<mp_bitcnt_t>(d.exponent - base);
    return r;
}

template <typename T>
T det3(const T& a0, const T& a1, const T& a2, const T& b0, const T& b1, const T& b2, const T& c0, const T& c1,
       const T& c2)
{
    return a0 * (b1 * c2 - b2 * c1) - a1 * (b0 * c2 - b2 * c0) + a2 * (b0 * c1 - b1 * c0);
}

// Laplace expansion over the first two columns.
template <typename T>
T det4(const T (&m)[4][4])
{
    auto lo = [&](int i, int j) { return T(m[i][0] * m[j][1] - m[j][0] * m[i][1]); };
    auto hi = [&](int i, int j) { return T(m[i][2] * m[j][3] - m[j][2] * m[i][3]); };
    return lo(0, 1) * hi(2, 3) - lo(0, 2) * hi(1, 3) + lo(0, 3) * hi(1, 2) + lo(1, 2) * hi(0, 3) -
           lo(1, 3) * hi(0, 2) + lo(2, 3) * hi(0, 1);
}

double permanent4(const double (&m)[4][4])
{
    auto lo = [&](int i, int j) { return m[i][0] * m[j][1] + m[j][0] * m[i][1]; };
    auto hi = [&](int i, int j) { return m[i][2] * m[j][3] + m[j][2] * m[i][3]; };
    return lo(0, 1) * hi(2, 3) + lo(0, 2) * hi(1, 3) + lo(0, 3) * hi(1, 2) + lo(1, 2) * hi(0, 3) +
           lo(1, 3) * hi(0, 2) + lo(2, 3) * hi(0, 1);
}

} // namespace

namespace detail {

Sign orient3d_exact(const Point3& a, const Point3& b, const Point3& c, const Point3& d)
{
    const Dyadic v[12] = {to_dyadic(a.x), to_dyadic(a.y), to_dyadic(a.z), to_dyadic(b.x),
                          to_dyadic(b.y), to_dyadic(b.z), to_dyadic(c.x), to_dyadic(c.y),
                          to_dyadic(c.z), to_dyadic(d.x), to_dyadic(d.y), to_dyadic(d.z)};
    const long base = min_exponent(v, 12);
    mpz_class q[12];
    for (int i = 0; i < 12; ++i) {
        q[i] = scaled(v[i], base);
    }
    const mpz_class ux = q[3] - q[0], uy = q[4] - q[1], uz = q[5] - q[2];
    const mpz_class vx = q[6] - q[0], vy = q[7] - q[1], vz = q[8] - q[2];
    const mpz_class wx = q[9] - q[0], wy = q[10] - q[1], wz = q[11] - q[2];
    const mpz_class det = det3<mpz_class>(ux, uy, uz, vx, vy, vz, wx, wy, wz);
    return sign_of(sgn(det));
}

Sign power_determinant_exact(const WeightedTet& tet, const WeightedPoint& s)
{
    Dyadic coords[15];
    Dyadic weights[5];
    for (int i = 0; i < 4; ++i) {
        coords[3 * i + 0] = to_dyadic(tet[i].position.x);
        coords[3 * i + 1] = to_dyadic(tet[i].position.y);
        coords[3 * i + 2] = to_dyadic(tet[i].position.z);
        weights[i] = to_dyadic(tet[i].weight);
    }
    coords[12] = to_dyadic(s.position.x);
    coords[13] = to_dyadic(s.position.y);
    coords[14] = to_dyadic(s.position.z);
    weights[4] = to_dyadic(s.weight);

    const long ec = min_exponent(coords, 15);
    const long ew = min_exponent(weights, 5);
    const bool any_weight = std::any_of(weights, weights + 5, [](const Dyadic& d) { return d.mantissa != 0; });
    const long lifted_base = any_weight ? std::min(2 * ec, ew) : 2 * ec;

    const mpz_class sx = scaled(coords[12], ec), sy = scaled(coords[13], ec), sz = scaled(coords[14], ec);
    const mpz_class ws = any_weight ? scaled(weights[4], ew) : mpz_class(0);

    mpz_class m[4][4];
    for (int i = 0; i < 4; ++i) {
        m[i][0] = scaled(coords[3 * i + 0], ec) - sx;
        m[i][1] = scaled(coords[3 * i + 1], ec) - sy;
        m[i][2] = scaled(coords[3 * i + 2], ec) - sz;
        mpz_class sq = m[i][0] * m[i][0] + m[i][1] * m[i][1] + m[i][2] * m[i][2];
        sq <<= static_cast<mp_bitcnt_t>(2 * ec - lifted_base);
        if (any_weight) {
            mpz_class dw = scaled(weights[i], ew) - ws;
            dw <<= static_cast<mp_bitcnt_t>(ew - lifted_base);
            sq -= dw;
        }
        m[i][3] = sq;
    }
    return sign_of(sgn(det4(m)));
}

Sign power_side_oriented(const WeightedTet& tet, const WeightedPoint& s)
{
    double m[4][4];
    double pm[4][4];
    const Point3& sp = s.position;
    for (int i = 0; i < 4; ++i) {
        const Point3& p = tet[i].position;
        const double dx = p.x - sp.x, dy = p.y - sp.y, dz = p.z - sp.z;
        const double sq = dx * dx + dy * dy + dz * dz;
        m[i][0] = dx;
        m[i][1] = dy;
        m[i][2] = dz;
        m[i][3] = sq - tet[i].weight + s.weight;
        pm[i][0] = std::abs(dx);
        pm[i][1] = std::abs(dy);
        pm[i][2] = std::abs(dz);
        pm[i][3] = sq + std::abs(tet[i].weight) + std::abs(s.weight);
    }
    const double det = det4(m);
    const double perm = permanent4(pm);
    Sign d = Sign::Zero;
    if (std::isfinite(det) && std::isfinite(perm) && perm > kFilterFloor && std::abs(det) > kPowerErrBound * perm) {
        d = sign_of(det);
    } else {
        d = power_determinant_exact(tet, s);
    }
    // For a positively oriented tet the lifted determinant is negative when s
    // lies inside the orthosphere.
    return -d;
}

Sign power_side_oriented_perturbed(const WeightedTet& tet, const WeightedPoint& s)
{
    const Sign base = power_side_oriented(tet, s);
    if (base != Sign::Zero) {
        return base;
    }
    // Weights are perturbed by epsilon^(rank); the heaviest point whose
    // coefficient does not vanish decides. The coefficient of s is the tet's
    // orientation, so the loop always terminates there at the latest.
    std::array<int, 5> order{0, 1, 2, 3, 4};
    auto id_of = [&](int k) { return k == 4 ? s.id : tet[k].id; };
    std::sort(order.begin(), order.end(), [&](int a, int b) { return id_of(a) > id_of(b); });
    for (int k : order) {
        if (k == 4) {
            return Sign::Positive;
        }
        Point3 rest[3];
        int r = 0;
        for (int j = 0; j < 4; ++j) {
            if (j != k) {
                rest[r++] = tet[j].position;
            }
        }
        const Sign o = orient3d(s.position, rest[0], rest[1], rest[2]);
        if (o != Sign::Zero) {
            return (k % 2 == 0) ? -o : o;
        }
    }
    return Sign::Positive;
}

} // namespace detail

Sign orient3d(const Point3& a, const Point3& b, const Point3& c, const Point3& d)
{
    require_finite(a);
    require_finite(b);
    require_finite(c);
    require_finite(d);
    const double ux = b.x - a.x, uy = b.y - a.y, uz = b.z - a.z;
    const double vx = c.x - a.x, vy = c.y - a.y, vz = c.z - a.z;
    const double wx = d.x - a.x, wy = d.y - a.y, wz = d.z - a.z;
    const double det = ux * (vy * wz - vz * wy) + uy * (vz * wx - vx * wz) + uz * (vx * wy - vy * wx);
    const double perm = std::abs(ux) * (std::abs(vy * wz) + std::abs(vz * wy)) +
                        std::abs(uy) * (std::abs(vz * wx) + std::abs(vx * wz)) +
                        std::abs(uz) * (std::abs(vx * wy) + std::abs(vy * wx));
    if (perm > kFilterFloor && std::abs(det) > kOrientErrBound * perm) {
        return sign_of(det);
    }
    if (perm == 0.0) {
        return Sign::Zero;
    }
    return detail::orient3d_exact(a, b, c, d);
}

namespace {

void require_valid(const WeightedTet& tet, const WeightedPoint& s)
{
    for (const auto& p : tet) {
        require_finite(p.position);
        if (!std::isfinite(p.weight)) {
            throw std::invalid_argument("predicate weight is not finite");
        }
    }
    require_finite(s.position);
    if (!std::isfinite(s.weight)) {
        throw std::invalid_argument("predicate weight is not finite");
    }
}

// Returns +1 or -1 for the orientation, throwing on a flat tet.
int tet_orientation(const WeightedTet& tet)
{
    const Sign o = orient3d(tet[0].position, tet[1].position, tet[2].position, tet[3].position);
    if (o == Sign::Zero) {
        throw DegenerateSimplex("tetrahedron is flat");
    }
    return static_cast<int>(o);
}

WeightedTet positively_oriented(const WeightedTet& tet)
{
    if (tet_orientation(tet) > 0) {
        return tet;
    }
    WeightedTet t = tet;
    std::swap(t[2], t[3]);
    return t;
}

} // namespace

Sign in_conflict(const WeightedTet& tet, const WeightedPoint& s)
{
    require_valid(tet, s);
    return detail::power_side_oriented(positively_oriented(tet), s);
}

Sign in_conflict_perturbed(const WeightedTet& tet, const WeightedPoint& s)
{
    require_valid(tet, s);
    return detail::power_side_oriented_perturbed(positively_oriented(tet), s);
}

Orthosphere orthocenter(const WeightedTet& tet)
{
    for (const auto& p : tet) {
        require_finite(p.position);
    }
    tet_orientation(tet);

    const Point3& p0 = tet[0].position;
    const Vec3 d1 = tet[1].position - p0;
    const Vec3 d2 = tet[2].position - p0;
    const Vec3 d3 = tet[3].position - p0;
    // 2 d_i . y = |d_i|^2 - w_i + w_0, with x = p0 + y
    const double r1 = squared_norm(d1) - tet[1].weight + tet[0].weight;
    const double r2 = squared_norm(d2) - tet[2].weight + tet[0].weight;
    const double r3 = squared_norm(d3) - tet[3].weight + tet[0].weight;

    const Vec3 c23 = cross(d2, d3);
    const Vec3 c31 = cross(d3, d1);
    const Vec3 c12 = cross(d1, d2);
    const double det = dot(d1, c23);

    const Vec3 y = (r1 * c23 + r2 * c31 + r3 * c12) / (2.0 * det);

    Orthosphere out;
    out.center = p0 + y;
    out.power_radius2 = squared_norm(y) - tet[0].weight;

    const double n1 = norm(d1), n2 = norm(d2), n3 = norm(d3);
    const double nmax = std::max({n1, n2, n3});
    const double nmin = std::min({n1, n2, n3});
    const double row_ratio = nmin > 0.0 ? nmax / nmin : std::numeric_limits<double>::infinity();
    const double hadamard = std::abs(det) > 0.0 ? (n1 * n2 * n3) / std::abs(det)
                                                : std::numeric_limits<double>::infinity();
    out.ill_conditioned = !(row_ratio <= kOrthocenterConditionLimit) || !(hadamard <= kOrthocenterConditionLimit) ||
                          !is_finite(out.center);
    return out;
}

} // namespace pdmesh
