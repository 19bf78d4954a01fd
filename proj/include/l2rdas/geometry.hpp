#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "l2rdas/error.hpp"

namespace l2rdas {

struct Vec3 {
    double x = 0.0, y = 0.0, z = 0.0;

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }

    double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
    double norm() const { return std::sqrt(dot(*this)); }
    bool finite() const { return std::isfinite(x) && std::isfinite(y) && std::isfinite(z); }
};

struct Vec2 {
    double x = 0.0, y = 0.0;
};

/// Wrap an angle to (-pi, pi].
inline double wrap_angle(double a) {
    a = std::fmod(a, 2.0 * M_PI);
    if (a <= -M_PI) a += 2.0 * M_PI;
    if (a > M_PI) a -= 2.0 * M_PI;
    return a;
}

/// Rotate (x,y) by yaw about +z; z unchanged.
inline Vec3 rotate_yaw(const Vec3& p, double yaw) {
    const double c = std::cos(yaw), s = std::sin(yaw);
    return {c * p.x - s * p.y, s * p.x + c * p.y, p.z};
}

/// Axis-aligned region of interest in meters.
struct RoiBounds {
    double x_min = 0.0, x_max = 0.0;
    double y_min = 0.0, y_max = 0.0;
    double z_min = 0.0, z_max = 0.0;

    void validate() const {
        if (!(x_min < x_max && y_min < y_max && z_min < z_max))
            throw_parameter("RoiBounds: min must be < max on every axis");
    }

    bool contains(const Vec3& p) const {
        return p.x >= x_min && p.x < x_max && p.y >= y_min && p.y < y_max && p.z >= z_min &&
               p.z < z_max;
    }

    bool contains_bev(double x, double y) const {
        return x >= x_min && x < x_max && y >= y_min && y < y_max;
    }

    Vec3 origin() const { return {x_min, y_min, z_min}; }
    Vec3 extent() const { return {x_max - x_min, y_max - y_min, z_max - z_min}; }

    /// Number of cells per axis at the given resolution; errors unless each
    /// extent is an exact integer multiple of the resolution.
    std::array<int, 3> grid_dims(double resolution) const {
        if (!(resolution > 0.0)) throw_parameter("resolution must be > 0");
        std::array<int, 3> dims{};
        const double ext[3] = {x_max - x_min, y_max - y_min, z_max - z_min};
        for (int a = 0; a < 3; ++a) {
            const double n = ext[a] / resolution;
            const double r = std::round(n);
            if (std::abs(n - r) > 1e-6 * std::max(1.0, r) || r < 1.0)
                throw_parameter("ROI extent is not an integer multiple of resolution");
            dims[a] = static_cast<int>(r);
        }
        return dims;
    }
};

/// Oriented 3D box: center, full dims (length along local x, width along
/// local y, height along z), yaw about +z.
struct Box3D {
    Vec3 center;
    Vec3 dims;  // length, width, height
    double yaw = 0.0;
    std::string cls;

    void validate() const {
        if (!(dims.x > 0.0 && dims.y > 0.0 && dims.z > 0.0))
            throw_input("Box3D: dims must be > 0");
        if (!(center.finite() && dims.finite() && std::isfinite(yaw)))
            throw_input("Box3D: non-finite field");
        if (!(yaw > -M_PI - 1e-12 && yaw <= M_PI + 1e-12))
            throw_input("Box3D: yaw out of (-pi, pi]");
    }

    Vec3 to_local(const Vec3& p) const { return rotate_yaw(p - center, -yaw); }
    Vec3 to_world(const Vec3& p) const { return rotate_yaw(p, yaw) + center; }

    bool contains(const Vec3& p, double tol = 0.0) const {
        const Vec3 q = to_local(p);
        return std::abs(q.x) <= dims.x / 2 + tol && std::abs(q.y) <= dims.y / 2 + tol &&
               std::abs(q.z) <= dims.z / 2 + tol;
    }

    /// BEV footprint corners, counter-clockwise.
    std::array<Vec2, 4> bev_corners() const {
        const double hx = dims.x / 2, hy = dims.y / 2;
        const double c = std::cos(yaw), s = std::sin(yaw);
        const double lx[4] = {hx, -hx, -hx, hx};
        const double ly[4] = {hy, hy, -hy, -hy};
        std::array<Vec2, 4> out;
        for (int i = 0; i < 4; ++i)
            out[i] = {center.x + c * lx[i] - s * ly[i], center.y + s * lx[i] + c * ly[i]};
        return out;
    }

    double z_lo() const { return center.z - dims.z / 2; }
    double z_hi() const { return center.z + dims.z / 2; }
    /// The 8 corners, bottom face first, same BEV winding as bev_corners().
    std::array<Vec3, 8> corners() const {
        const auto bev = bev_corners();
        std::array<Vec3, 8> out;
        for (int i = 0; i < 4; ++i) {
            out[i] = {bev[i].x, bev[i].y, z_lo()};
            out[i + 4] = {bev[i].x, bev[i].y, z_hi()};
        }
        return out;
    }
};

/// Signed area of a simple polygon (positive when counter-clockwise).
inline double polygon_area(const std::vector<Vec2>& poly) {
    double a = 0.0;
    const std::size_t n = poly.size();
    for (std::size_t i = 0; i < n; ++i) {
        const Vec2& p = poly[i];
        const Vec2& q = poly[(i + 1) % n];
        a += p.x * q.y - q.x * p.y;
    }
    return 0.5 * a;
}

/// Sutherland-Hodgman clip of `subject` against convex `clip` (both CCW).
inline std::vector<Vec2> clip_convex_polygon(const std::vector<Vec2>& subject,
                                             const std::vector<Vec2>& clip) {
    std::vector<Vec2> out = subject;
    const std::size_t m = clip.size();
    for (std::size_t i = 0; i < m && !out.empty(); ++i) {
        const Vec2 a = clip[i];
        const Vec2 b = clip[(i + 1) % m];
        auto side = [&](const Vec2& p) {
            return (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
        };
        std::vector<Vec2> in;
        in.swap(out);
        const std::size_t n = in.size();
        for (std::size_t j = 0; j < n; ++j) {
            const Vec2 p = in[j];
            const Vec2 q = in[(j + 1) % n];
            const double sp = side(p), sq = side(q);
            if (sp >= 0.0) {
                out.push_back(p);
                if (sq < 0.0) {
                    const double t = sp / (sp - sq);
                    out.push_back({p.x + t * (q.x - p.x), p.y + t * (q.y - p.y)});
                }
            } else if (sq >= 0.0) {
                const double t = sp / (sp - sq);
                out.push_back({p.x + t * (q.x - p.x), p.y + t * (q.y - p.y)});
            }
        }
    }
    return out;
}

/// Intersection area of two oriented BEV rectangles.
inline double bev_intersection_area(const Box3D& b1, const Box3D& b2) {
    const auto c1 = b1.bev_corners();
    const auto c2 = b2.bev_corners();
    const std::vector<Vec2> p1(c1.begin(), c1.end());
    const std::vector<Vec2> p2(c2.begin(), c2.end());
    const auto inter = clip_convex_polygon(p1, p2);
    if (inter.size() < 3) return 0.0;
    return std::abs(polygon_area(inter));
}

/// First intersection of ray origin+t*dir with an oriented box (slab method in
/// the box frame). Returns the hit distance t >= t_min, if any.
inline std::optional<double> ray_box_intersect(const Vec3& origin, const Vec3& dir,
                                               const Box3D& box, double t_min = 1e-9) {
    const Vec3 o = box.to_local(origin);
    const Vec3 d = rotate_yaw(dir, -box.yaw);
    const double half[3] = {box.dims.x / 2, box.dims.y / 2, box.dims.z / 2};
    const double oc[3] = {o.x, o.y, o.z};
    const double dc[3] = {d.x, d.y, d.z};
    double t_lo = t_min, t_hi = std::numeric_limits<double>::infinity();
    for (int a = 0; a < 3; ++a) {
        if (std::abs(dc[a]) < 1e-12) {
            if (std::abs(oc[a]) > half[a]) return std::nullopt;
            continue;
        }
        double t0 = (-half[a] - oc[a]) / dc[a];
        double t1 = (half[a] - oc[a]) / dc[a];
        if (t0 > t1) std::swap(t0, t1);
        t_lo = std::max(t_lo, t0);
        t_hi = std::min(t_hi, t1);
        if (t_lo > t_hi) return std::nullopt;
    }
    return t_lo;
}

/// Deterministic Fibonacci-sphere layout of n unit vectors.
inline std::vector<Vec3> fibonacci_sphere(int n) {
    std::vector<Vec3> pts;
    pts.reserve(static_cast<std::size_t>(n));
    const double golden = M_PI * (3.0 - std::sqrt(5.0));
    for (int i = 0; i < n; ++i) {
        const double z = 1.0 - 2.0 * (i + 0.5) / n;
        const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
        const double phi = golden * i;
        pts.push_back({r * std::cos(phi), r * std::sin(phi), z});
    }
    return pts;
}

}  // namespace l2rdas
