#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "l2rdas/error.hpp"
#include "l2rdas/geometry.hpp"
#include "l2rdas/grid.hpp"
#include "l2rdas/metrics.hpp"
#include "l2rdas/rng.hpp"

namespace l2rdas::toy {

struct ClassSpec {
    std::string name;
    Vec3 dims_mean;
    Vec3 dims_sigma;
    double weight = 1.0;         // class-mix weight
    double lidar_reflect = 0.8;  // base hit intensity
    double rcs = 1e15;           // per-surface-sample radar cross-section scale
};

inline std::vector<ClassSpec> default_classes() {
    return {
        {"Sedan", {4.4, 1.8, 1.5}, {0.3, 0.1, 0.08}, 0.7, 0.8, 1e15},
        {"BusTruck", {8.0, 2.5, 3.0}, {0.8, 0.2, 0.3}, 0.3, 0.6, 4e15},
    };
}

struct Wall {
    Vec2 a, b;       // BEV endpoints
    double z0, z1;   // vertical extent
};

struct SceneSpec {
    RoiBounds roi;
    double ground_z = -1.7;
    int min_objects = 1;
    int max_objects = 4;
    double wall_probability = 0.3;
    std::vector<ClassSpec> classes = default_classes();
    int max_place_attempts = 40;

    void validate() const {
        roi.validate();
        if (min_objects < 0 || max_objects < min_objects)
            throw_config("toyworld: bad object count range");
        if (classes.empty()) throw_config("toyworld: class list must be non-empty");
    }
};

struct Scene {
    std::vector<Box3D> boxes;
    std::vector<Wall> walls;
    double ground_z = -1.7;
};

/// Boxes on a flat ground plane, BEV non-overlapping, optionally a wall
/// along one ROI side.
inline Scene generate_scene(const SceneSpec& spec, std::uint64_t seed) {
    spec.validate();
    Rng rng(seed);
    Scene scene;
    scene.ground_z = spec.ground_z;

    double total_w = 0.0;
    for (const auto& c : spec.classes) total_w += c.weight;

    const int n_objects =
        static_cast<int>(rng.uniform_int(spec.min_objects, spec.max_objects));
    for (int i = 0; i < n_objects; ++i) {
        double pick = rng.uniform(0.0, total_w);
        const ClassSpec* cls = &spec.classes.back();
        for (const auto& c : spec.classes) {
            if (pick < c.weight) {
                cls = &c;
                break;
            }
            pick -= c.weight;
        }
        for (int attempt = 0; attempt < spec.max_place_attempts; ++attempt) {
            Box3D box;
            box.dims = {std::max(0.5, rng.normal(cls->dims_mean.x, cls->dims_sigma.x)),
                        std::max(0.5, rng.normal(cls->dims_mean.y, cls->dims_sigma.y)),
                        std::max(0.5, rng.normal(cls->dims_mean.z, cls->dims_sigma.z))};
            box.center = {rng.uniform(spec.roi.x_min, spec.roi.x_max),
                          rng.uniform(spec.roi.y_min, spec.roi.y_max),
                          spec.ground_z + box.dims.z / 2};
            box.yaw = wrap_angle(rng.uniform(-M_PI, M_PI));
            box.cls = cls->name;

            bool ok = true;
            for (const auto& c : box.bev_corners())
                if (!spec.roi.contains_bev(c.x, c.y)) ok = false;
            if (ok)
                for (const auto& other : scene.boxes)
                    if (bev_intersection_area(box, other) > 0.0) {
                        ok = false;
                        break;
                    }
            if (!ok) continue;
            scene.boxes.push_back(box);
            break;
        }
    }

    if (rng.uniform() < spec.wall_probability) {
        // wall along the far x edge, slightly inside the ROI
        const double x = spec.roi.x_max - 0.3;
        scene.walls.push_back({{x, spec.roi.y_min},
                               {x, spec.roi.y_max},
                               spec.ground_z,
                               spec.ground_z + 3.0});
    }
    return scene;
}

struct LidarConfig {
    int azimuth_rays = 128;
    int elevation_rays = 24;
    double az_fov_deg = 170.0;  // centered on +x
    double el_min_deg = -25.0;
    double el_max_deg = 8.0;
    double range_sigma = 0.02;  // meters along the ray
    double max_range = 120.0;
    double ground_reflect = 0.3;
    double wall_reflect = 0.6;
};

namespace detail {

struct Hit {
    double t = std::numeric_limits<double>::infinity();
    double reflect = 0.0;
    Vec3 normal;
};

inline void hit_ground(const Vec3& origin, const Vec3& dir, double ground_z, double reflect,
                       Hit& best) {
    if (dir.z >= -1e-9) return;
    const double t = (ground_z - origin.z) / dir.z;
    if (t > 1e-6 && t < best.t) best = {t, reflect, {0, 0, 1}};
}

inline void hit_wall(const Vec3& origin, const Vec3& dir, const Wall& w, double reflect,
                     Hit& best) {
    const Vec2 seg{w.b.x - w.a.x, w.b.y - w.a.y};
    const Vec2 n{-seg.y, seg.x};  // BEV normal
    const double denom = dir.x * n.x + dir.y * n.y;
    if (std::abs(denom) < 1e-12) return;
    const double t = ((w.a.x - origin.x) * n.x + (w.a.y - origin.y) * n.y) / denom;
    if (t <= 1e-6 || t >= best.t) return;
    const Vec3 p = origin + dir * t;
    const double seg_len2 = seg.x * seg.x + seg.y * seg.y;
    const double u = ((p.x - w.a.x) * seg.x + (p.y - w.a.y) * seg.y) / seg_len2;
    if (u < 0.0 || u > 1.0 || p.z < w.z0 || p.z > w.z1) return;
    const double nn = std::sqrt(n.x * n.x + n.y * n.y);
    best = {t, reflect, {n.x / nn, n.y / nn, 0.0}};
}

}  // namespace detail

/// First-hit ray casting over a regular az/el grid; hit intensity is the
/// surface base reflectivity times the cosine of incidence, range carries
/// seeded Gaussian noise.
inline PointCloud lidar_sample(const Scene& scene, const SceneSpec& spec, const LidarConfig& cfg,
                               std::uint64_t seed) {
    Rng rng(seed);
    PointCloud pc;
    const Vec3 origin{0, 0, 0};
    std::map<std::string, const ClassSpec*> class_by_name;
    for (const auto& c : spec.classes) class_by_name[c.name] = &c;

    const double az0 = -cfg.az_fov_deg / 2 * M_PI / 180.0;
    const double az1 = cfg.az_fov_deg / 2 * M_PI / 180.0;
    const double el0 = cfg.el_min_deg * M_PI / 180.0;
    const double el1 = cfg.el_max_deg * M_PI / 180.0;
    for (int ei = 0; ei < cfg.elevation_rays; ++ei)
        for (int ai = 0; ai < cfg.azimuth_rays; ++ai) {
            const double az = az0 + (ai + 0.5) * (az1 - az0) / cfg.azimuth_rays;
            const double el = el0 + (ei + 0.5) * (el1 - el0) / cfg.elevation_rays;
            const Vec3 dir{std::cos(el) * std::cos(az), std::cos(el) * std::sin(az),
                           std::sin(el)};
            detail::Hit best;
            detail::hit_ground(origin, dir, scene.ground_z, cfg.ground_reflect, best);
            for (const auto& w : scene.walls)
                detail::hit_wall(origin, dir, w, cfg.wall_reflect, best);
            for (const auto& box : scene.boxes) {
                const auto t = ray_box_intersect(origin, dir, box);
                if (t && *t < best.t) {
                    // incidence normal from the local face the hit lies on
                    const Vec3 local = box.to_local(origin + dir * *t);
                    Vec3 n_local{0, 0, 0};
                    const double fx = std::abs(std::abs(local.x) - box.dims.x / 2);
                    const double fy = std::abs(std::abs(local.y) - box.dims.y / 2);
                    const double fz = std::abs(std::abs(local.z) - box.dims.z / 2);
                    if (fx <= fy && fx <= fz)
                        n_local = {local.x > 0 ? 1.0 : -1.0, 0, 0};
                    else if (fy <= fz)
                        n_local = {0, local.y > 0 ? 1.0 : -1.0, 0};
                    else
                        n_local = {0, 0, local.z > 0 ? 1.0 : -1.0};
                    const double reflect = class_by_name.count(box.cls)
                                               ? class_by_name.at(box.cls)->lidar_reflect
                                               : 0.5;
                    best = {*t, reflect, rotate_yaw(n_local, box.yaw)};
                }
            }
            if (!std::isfinite(best.t) || best.t > cfg.max_range) continue;
            const double cos_inc = std::abs(best.normal.dot(dir));
            const double r = best.t + rng.normal(0.0, cfg.range_sigma);
            if (r <= 0) continue;
            Point p;
            p.pos = origin + dir * r;
            p.intensity = best.reflect * cos_inc;
            pc.points.push_back(std::move(p));
        }
    return pc;
}

struct PolarSpec {
    double range_step = 0.2;      // m
    double az_step_deg = 1.0;
    double el_step_deg = 2.5;
};

struct RadarForwardConfig {
    double range_exponent = 2.0;
    double sigma_range = 0.3;     // m
    double sigma_az_deg = 1.2;
    double sigma_el_deg = 2.0;
    double clutter_floor = 1e5;   // power added inside the FOV
    bool speckle = false;         // multiplicative exponential(1) noise
    double samples_per_m2 = 30.0;
    double ground_samples_per_m2 = 2.0;
    double ground_rcs = 2e12;
    double wall_rcs = 2e13;
    PolarSpec polar;

    void validate() const {
        if (!(sigma_range > 0 && sigma_az_deg > 0 && sigma_el_deg > 0))
            throw_config("radar forward: sigmas must be > 0");
        if (range_exponent < 0) throw_config("radar forward: range exponent must be >= 0");
    }
};

struct SurfaceSample {
    Vec3 pos;
    double power_scale;  // RCS for this sample; deposited power is rcs/r^alpha
};

namespace detail {

inline void sample_box_surface(const Box3D& box, double rcs, double samples_per_m2, Rng& rng,
                               std::vector<SurfaceSample>& out) {
    const double areas[3] = {box.dims.y * box.dims.z, box.dims.x * box.dims.z,
                             box.dims.x * box.dims.y};
    for (int axis = 0; axis < 3; ++axis)
        for (int side = 0; side < 2; ++side) {
            const int n = std::max(1, static_cast<int>(std::ceil(areas[axis] * samples_per_m2)));
            for (int i = 0; i < n; ++i) {
                const double u = rng.uniform(-0.5, 0.5);
                const double v = rng.uniform(-0.5, 0.5);
                Vec3 local;
                const double s = side == 0 ? -0.5 : 0.5;
                if (axis == 0)
                    local = {s * box.dims.x, u * box.dims.y, v * box.dims.z};
                else if (axis == 1)
                    local = {u * box.dims.x, s * box.dims.y, v * box.dims.z};
                else
                    local = {u * box.dims.x, v * box.dims.y, s * box.dims.z};
                out.push_back({box.to_world(local), rcs});
            }
        }
}

}  // namespace detail

/// Deterministic surface returns of the whole scene (boxes, ground, walls).
inline std::vector<SurfaceSample> sample_scene_returns(const Scene& scene, const SceneSpec& spec,
                                                       const RadarForwardConfig& fwd,
                                                       std::uint64_t seed) {
    fwd.validate();
    Rng rng(seed);
    std::vector<SurfaceSample> samples;
    std::map<std::string, const ClassSpec*> class_by_name;
    for (const auto& c : spec.classes) class_by_name[c.name] = &c;
    for (const auto& box : scene.boxes) {
        const double rcs =
            class_by_name.count(box.cls) ? class_by_name.at(box.cls)->rcs : 1e14;
        detail::sample_box_surface(box, rcs, fwd.samples_per_m2, rng, samples);
    }
    {
        const double area =
            (spec.roi.x_max - spec.roi.x_min) * (spec.roi.y_max - spec.roi.y_min);
        const int n = std::max(1, static_cast<int>(std::ceil(area * fwd.ground_samples_per_m2)));
        for (int i = 0; i < n; ++i)
            samples.push_back({{rng.uniform(spec.roi.x_min, spec.roi.x_max),
                                rng.uniform(spec.roi.y_min, spec.roi.y_max), scene.ground_z},
                               fwd.ground_rcs});
    }
    for (const auto& w : scene.walls) {
        const double len = std::hypot(w.b.x - w.a.x, w.b.y - w.a.y);
        const double area = len * (w.z1 - w.z0);
        const int n = std::max(1, static_cast<int>(std::ceil(area * fwd.samples_per_m2)));
        for (int i = 0; i < n; ++i) {
            const double u = rng.uniform(0.0, 1.0);
            const double z = rng.uniform(w.z0, w.z1);
            samples.push_back(
                {{w.a.x + u * (w.b.x - w.a.x), w.a.y + u * (w.b.y - w.a.y), z}, fwd.wall_rcs});
        }
    }
    return samples;
}

/// Polar grid sized to cover every voxel center of the ROI at r_out, with
/// margin for the PSF tails.
inline PolarGrid3D make_polar_cover(const RoiBounds& roi, double r_out,
                                    const RadarForwardConfig& fwd) {
    const auto dims = roi.grid_dims(r_out);
    double r_max = 0.0;
    double az_min = M_PI, az_max = -M_PI, el_min = M_PI / 2, el_max = -M_PI / 2;
    for (int ix = 0; ix < dims[0]; ++ix)
        for (int iy = 0; iy < dims[1]; ++iy)
            for (int iz = 0; iz < dims[2]; ++iz) {
                const Vec3 p{roi.x_min + (ix + 0.5) * r_out, roi.y_min + (iy + 0.5) * r_out,
                             roi.z_min + (iz + 0.5) * r_out};
                r_max = std::max(r_max, p.norm());
                az_min = std::min(az_min, std::atan2(p.y, p.x));
                az_max = std::max(az_max, std::atan2(p.y, p.x));
                const double el = std::atan2(p.z, std::sqrt(p.x * p.x + p.y * p.y));
                el_min = std::min(el_min, el);
                el_max = std::max(el_max, el);
            }
    const double az_step = fwd.polar.az_step_deg * M_PI / 180.0;
    const double el_step = fwd.polar.el_step_deg * M_PI / 180.0;
    const double az_margin = 4.0 * fwd.sigma_az_deg * M_PI / 180.0 + az_step;
    const double el_margin = 4.0 * fwd.sigma_el_deg * M_PI / 180.0 + el_step;
    const double r_margin = 4.0 * fwd.sigma_range + fwd.polar.range_step;
    AxisBins rb{0.0, fwd.polar.range_step,
                static_cast<int>(std::ceil((r_max + r_margin) / fwd.polar.range_step))};
    AxisBins ab{az_min - az_margin, az_step,
                static_cast<int>(std::ceil((az_max - az_min + 2 * az_margin) / az_step))};
    AxisBins eb{el_min - el_margin, el_step,
                static_cast<int>(std::ceil((el_max - el_min + 2 * el_margin) / el_step))};
    return PolarGrid3D::zeros(rb, ab, eb);
}

/// Deposit P = rcs / r^alpha per sample into the nearest polar bin.
inline void deposit_returns(PolarGrid3D& pg, const std::vector<SurfaceSample>& samples,
                            double range_exponent) {
    for (const auto& s : samples) {
        const double r = s.pos.norm();
        if (r < 1e-6) continue;
        const double az = std::atan2(s.pos.y, s.pos.x);
        const double el = std::atan2(s.pos.z, std::sqrt(s.pos.x * s.pos.x + s.pos.y * s.pos.y));
        const int ir = static_cast<int>(std::floor((r - pg.range.lo) / pg.range.step));
        const int ia = static_cast<int>(std::floor((az - pg.azimuth.lo) / pg.azimuth.step));
        const int ie =
            static_cast<int>(std::floor((el - pg.elevation.lo) / pg.elevation.step));
        if (ir < 0 || ir >= pg.range.count || ia < 0 || ia >= pg.azimuth.count || ie < 0 ||
            ie >= pg.elevation.count)
            continue;
        pg.at(ir, ia, ie) += s.power_scale / std::pow(r, range_exponent);
    }
}

/// Separable Gaussian blur along (range, azimuth, elevation); kernels are
/// normalized so interior power is conserved.
inline void psf_blur_polar(PolarGrid3D& pg, const RadarForwardConfig& fwd) {
    auto kernel_for = [](double sigma_bins) {
        const int radius = std::max(1, static_cast<int>(std::ceil(3.5 * sigma_bins)));
        std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
        double sum = 0;
        for (int i = -radius; i <= radius; ++i) {
            k[static_cast<std::size_t>(i + radius)] =
                std::exp(-0.5 * (i / sigma_bins) * (i / sigma_bins));
            sum += k[static_cast<std::size_t>(i + radius)];
        }
        for (auto& v : k) v /= sum;
        return k;
    };
    const double sig_bins[3] = {fwd.sigma_range / pg.range.step,
                                fwd.sigma_az_deg * M_PI / 180.0 / pg.azimuth.step,
                                fwd.sigma_el_deg * M_PI / 180.0 / pg.elevation.step};
    const int counts[3] = {pg.range.count, pg.azimuth.count, pg.elevation.count};
    std::vector<double> tmp(pg.values.size());
    for (int axis = 0; axis < 3; ++axis) {
        const auto k = kernel_for(sig_bins[axis]);
        const int radius = (static_cast<int>(k.size()) - 1) / 2;
        std::fill(tmp.begin(), tmp.end(), 0.0);
        for (int ir = 0; ir < counts[0]; ++ir)
            for (int ia = 0; ia < counts[1]; ++ia)
                for (int ie = 0; ie < counts[2]; ++ie) {
                    const double v = pg.at(ir, ia, ie);
                    if (v == 0.0) continue;
                    int idx[3] = {ir, ia, ie};
                    for (int o = -radius; o <= radius; ++o) {
                        int j[3] = {idx[0], idx[1], idx[2]};
                        j[axis] += o;
                        if (j[axis] < 0 || j[axis] >= counts[axis]) continue;
                        tmp[pg.index(j[0], j[1], j[2])] +=
                            v * k[static_cast<std::size_t>(o + radius)];
                    }
                }
        pg.values = tmp;
    }
}

/// Physics-inspired ground truth: surface returns deposited in polar space,
/// PSF-blurred, resampled to the Cartesian ROI, plus clutter floor and
/// optional speckle inside the FOV.
inline DenseGrid3D radar_truth(const Scene& scene, const SceneSpec& spec,
                               const RadarForwardConfig& fwd, const RoiBounds& roi, double r_out,
                               std::uint64_t seed) {
    fwd.validate();
    auto pg = make_polar_cover(roi, r_out, fwd);
    const auto samples = sample_scene_returns(scene, spec, fwd, seed);
    deposit_returns(pg, samples, fwd.range_exponent);
    psf_blur_polar(pg, fwd);
    auto cart = polar_to_cartesian(pg, roi, r_out);
    Rng speckle_rng(seed ^ 0x9e3779b97f4a7c15ull);
    for (int ix = 0; ix < cart.dims[0]; ++ix)
        for (int iy = 0; iy < cart.dims[1]; ++iy)
            for (int iz = 0; iz < cart.dims[2]; ++iz) {
                const Vec3 p = cart.voxel_center(ix, iy, iz);
                if (!in_polar_fov(pg, p)) {
                    cart.at(ix, iy, iz) = 0.0;
                    continue;
                }
                double v = cart.at(ix, iy, iz) + fwd.clutter_floor;
                if (fwd.speckle) v *= speckle_rng.exponential();
                cart.at(ix, iy, iz) = v;
            }
    return cart;
}

}  // namespace l2rdas::toy
