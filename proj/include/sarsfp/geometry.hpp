#pragma once

#include <algorithm>
#include <cmath>
#include <limits>

namespace sarsfp {

struct Vec3 {
    double x = 0.0, y = 0.0, z = 0.0;

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    Vec3 operator-() const { return {-x, -y, -z}; }
    Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }

    bool operator==(const Vec3&) const = default;
};

inline double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }

inline Vec3 cross(const Vec3& a, const Vec3& b) {
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }

inline Vec3 normalized(const Vec3& a) {
    const double n = norm(a);
    return {a.x / n, a.y / n, a.z / n};
}

// Mirror reflection of direction d at unit normal n.
inline Vec3 reflect(const Vec3& d, const Vec3& n) { return d - n * (2.0 * dot(d, n)); }

inline double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

constexpr double kPi = 3.14159265358979323846;

inline double deg_to_rad(double deg) { return deg * kPi / 180.0; }

struct Aabb {
    Vec3 lo{std::numeric_limits<double>::max(), std::numeric_limits<double>::max(),
            std::numeric_limits<double>::max()};
    Vec3 hi{std::numeric_limits<double>::lowest(), std::numeric_limits<double>::lowest(),
            std::numeric_limits<double>::lowest()};

    void expand(const Vec3& p) {
        lo.x = std::min(lo.x, p.x); lo.y = std::min(lo.y, p.y); lo.z = std::min(lo.z, p.z);
        hi.x = std::max(hi.x, p.x); hi.y = std::max(hi.y, p.y); hi.z = std::max(hi.z, p.z);
    }
    void expand(const Aabb& b) { expand(b.lo); expand(b.hi); }

    Vec3 center() const { return (lo + hi) * 0.5; }

    // Slab test against a ray with precomputed inverse direction.
    bool hit(const Vec3& origin, const Vec3& inv_dir, double t_max) const {
        double t0 = 1e-30, t1 = t_max;
        const double tx0 = (lo.x - origin.x) * inv_dir.x;
        const double tx1 = (hi.x - origin.x) * inv_dir.x;
        t0 = std::max(t0, std::min(tx0, tx1));
        t1 = std::min(t1, std::max(tx0, tx1));
        const double ty0 = (lo.y - origin.y) * inv_dir.y;
        const double ty1 = (hi.y - origin.y) * inv_dir.y;
        t0 = std::max(t0, std::min(ty0, ty1));
        t1 = std::min(t1, std::max(ty0, ty1));
        const double tz0 = (lo.z - origin.z) * inv_dir.z;
        const double tz1 = (hi.z - origin.z) * inv_dir.z;
        t0 = std::max(t0, std::min(tz0, tz1));
        t1 = std::min(t1, std::max(tz0, tz1));
        return t0 <= t1;
    }
};

// Moller-Trumbore ray/triangle intersection. Returns the ray parameter t,
// or a negative value on miss. Intersections closer than t_min are rejected
// to avoid self-hits after a bounce.
inline double intersect_triangle(const Vec3& origin, const Vec3& dir, const Vec3& v0,
                                 const Vec3& v1, const Vec3& v2, double t_min) {
    const Vec3 e1 = v1 - v0;
    const Vec3 e2 = v2 - v0;
    const Vec3 p = cross(dir, e2);
    const double det = dot(e1, p);
    if (std::abs(det) < 1e-14) return -1.0;
    const double inv_det = 1.0 / det;
    const Vec3 s = origin - v0;
    const double u = dot(s, p) * inv_det;
    if (u < -1e-12 || u > 1.0 + 1e-12) return -1.0;
    const Vec3 q = cross(s, e1);
    const double v = dot(dir, q) * inv_det;
    if (v < -1e-12 || u + v > 1.0 + 1e-12) return -1.0;
    const double t = dot(e2, q) * inv_det;
    return t > t_min ? t : -1.0;
}

}  // namespace sarsfp
