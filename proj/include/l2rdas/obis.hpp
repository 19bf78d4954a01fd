#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "l2rdas/error.hpp"
#include "l2rdas/geometry.hpp"
#include "l2rdas/grid.hpp"

namespace l2rdas {

/// Object information supplement: injects box-edge points and Gaussian-valued
/// shell points so the generator sees explicit object extent and class cues.
struct ObisConfig {
    double edge_interval = 0.1;  // meters between edge samples
    int shells = 4;
    int points_per_shell = 64;
    std::vector<double> shell_radii_fraction = {0.25, 0.5, 0.75, 1.0};
    std::vector<std::string> class_channels = {"Sedan", "BusTruck"};

    void validate() const {
        if (!(edge_interval > 0.0)) throw_config("obis: edge_interval must be > 0");
        if (shells != static_cast<int>(shell_radii_fraction.size()))
            throw_config("obis: shells must match shell_radii_fraction length");
        double prev = 0.0;
        for (double f : shell_radii_fraction) {
            if (!(f > prev && f <= 1.0))
                throw_config("obis: shell radii must be strictly increasing in (0,1]");
            prev = f;
        }
        if (class_channels.empty()) throw_config("obis: class list must be non-empty");
        for (std::size_t i = 0; i < class_channels.size(); ++i)
            for (std::size_t j = i + 1; j < class_channels.size(); ++j)
                if (class_channels[i] == class_channels[j])
                    throw_config("obis: duplicate class channel");
        if (points_per_shell <= 0) throw_config("obis: points_per_shell must be > 0");
    }

    std::string class_channel_name(const std::string& cls) const { return "class_" + cls; }
};

namespace detail {

/// Edge samples of a box in its local frame, corner-deduplicated. The 12
/// edges are walked in a fixed order; corners are produced by identical
/// arithmetic on every edge so exact-equality dedupe removes them.
inline std::vector<Vec3> box_edge_points_local(const Box3D& box, double interval) {
    const double hx = box.dims.x / 2, hy = box.dims.y / 2, hz = box.dims.z / 2;
    const Vec3 corner[8] = {
        {-hx, -hy, -hz}, {hx, -hy, -hz}, {hx, hy, -hz}, {-hx, hy, -hz},
        {-hx, -hy, hz},  {hx, -hy, hz},  {hx, hy, hz},  {-hx, hy, hz},
    };
    static const int edges[12][2] = {{0, 1}, {1, 2}, {2, 3}, {3, 0}, {4, 5}, {5, 6},
                                     {6, 7}, {7, 4}, {0, 4}, {1, 5}, {2, 6}, {3, 7}};
    std::vector<Vec3> out;
    std::map<std::tuple<double, double, double>, bool> seen;
    for (const auto& e : edges) {
        const Vec3 a = corner[e[0]];
        const Vec3 b = corner[e[1]];
        const double len = (b - a).norm();
        const int n = static_cast<int>(std::ceil(len / interval));
        for (int i = 0; i <= n; ++i) {
            Vec3 p;
            if (i == 0) {
                p = a;
            } else if (i == n) {
                p = b;  // endpoints exact so corners coincide bitwise
            } else {
                const double t = static_cast<double>(i) / n;
                p = a + (b - a) * t;
            }
            auto key = std::make_tuple(p.x, p.y, p.z);
            if (seen.emplace(key, true).second) out.push_back(p);
        }
    }
    return out;
}

}  // namespace detail

/// Sample points along every box edge at cfg.edge_interval, marked via the
/// "edge" channel and carrying the frame-mean intensity.
inline PointCloud add_boundary_points(const PointCloud& pc, const std::vector<Box3D>& boxes,
                                      const ObisConfig& cfg) {
    cfg.validate();
    PointCloud out = pc;
    const int edge_ch = out.ensure_channel("edge");
    const double mean_int = pc.mean_intensity();
    const std::size_t nc = out.channel_schema.size();
    for (const auto& box : boxes) {
        box.validate();
        for (const Vec3& local : detail::box_edge_points_local(box, cfg.edge_interval)) {
            Point p;
            p.pos = box.to_world(local);
            p.intensity = mean_int;
            p.aux.assign(nc, 0.0);
            p.aux[edge_ch] = 1.0;
            out.points.push_back(std::move(p));
        }
    }
    return out;
}

/// Add a center point plus Fibonacci-sphere shells scaled to the box's
/// half-extents; each point's class channel holds exp(-0.5*sum((d_i/s_i)^2))
/// with s_i = dim_i/2.
inline PointCloud add_gaussian_points(const PointCloud& pc, const std::vector<Box3D>& boxes,
                                      const ObisConfig& cfg) {
    cfg.validate();
    PointCloud out = pc;
    std::vector<int> class_ch;
    class_ch.reserve(cfg.class_channels.size());
    for (const auto& cls : cfg.class_channels)
        class_ch.push_back(out.ensure_channel(cfg.class_channel_name(cls)));
    const double mean_int = pc.mean_intensity();
    const std::size_t nc = out.channel_schema.size();
    for (const auto& box : boxes) {
        box.validate();
        int ch = -1;
        for (std::size_t c = 0; c < cfg.class_channels.size(); ++c)
            if (cfg.class_channels[c] == box.cls) ch = class_ch[c];
        if (ch < 0) throw_config("obis: box class '" + box.cls + "' has no class channel");

        auto push = [&](const Vec3& local, double value) {
            Point p;
            p.pos = box.to_world(local);
            p.intensity = mean_int;
            p.aux.assign(nc, 0.0);
            p.aux[ch] = value;
            out.points.push_back(std::move(p));
        };
        push({0, 0, 0}, 1.0);
        const auto dirs = fibonacci_sphere(cfg.points_per_shell);
        for (double f : cfg.shell_radii_fraction) {
            const double value = std::exp(-0.5 * f * f);  // unit sphere scaled per axis
            for (const Vec3& u : dirs)
                push({f * u.x * box.dims.x / 2, f * u.y * box.dims.y / 2,
                      f * u.z * box.dims.z / 2},
                     value);
        }
    }
    return out;
}

/// Full supplement: per box (input order) edge points then Gaussian points.
/// Output schema = original channels + "edge" + one channel per class.
inline PointCloud obis_augment(const PointCloud& pc, const std::vector<Box3D>& boxes,
                               const ObisConfig& cfg) {
    cfg.validate();
    const double mean_int = pc.mean_intensity();
    PointCloud out = pc;
    const int edge_ch = out.ensure_channel("edge");
    std::vector<int> class_ch;
    for (const auto& cls : cfg.class_channels)
        class_ch.push_back(out.ensure_channel(cfg.class_channel_name(cls)));
    const std::size_t nc = out.channel_schema.size();

    for (const auto& box : boxes) {
        box.validate();
        int ch = -1;
        for (std::size_t c = 0; c < cfg.class_channels.size(); ++c)
            if (cfg.class_channels[c] == box.cls) ch = class_ch[c];
        if (ch < 0) throw_config("obis: box class '" + box.cls + "' has no class channel");

        for (const Vec3& local : detail::box_edge_points_local(box, cfg.edge_interval)) {
            Point p;
            p.pos = box.to_world(local);
            p.intensity = mean_int;
            p.aux.assign(nc, 0.0);
            p.aux[edge_ch] = 1.0;
            out.points.push_back(std::move(p));
        }
        auto push = [&](const Vec3& local, double value) {
            Point p;
            p.pos = box.to_world(local);
            p.intensity = mean_int;
            p.aux.assign(nc, 0.0);
            p.aux[ch] = value;
            out.points.push_back(std::move(p));
        };
        push({0, 0, 0}, 1.0);
        const auto dirs = fibonacci_sphere(cfg.points_per_shell);
        for (double f : cfg.shell_radii_fraction) {
            const double value = std::exp(-0.5 * f * f);
            for (const Vec3& u : dirs)
                push({f * u.x * box.dims.x / 2, f * u.y * box.dims.y / 2,
                      f * u.z * box.dims.z / 2},
                     value);
        }
    }
    return out;
}

/// Names of the channels obis_augment adds for this configuration.
inline std::vector<std::string> obis_channel_names(const ObisConfig& cfg) {
    std::vector<std::string> names{"edge"};
    for (const auto& cls : cfg.class_channels) names.push_back(cfg.class_channel_name(cls));
    return names;
}

}  // namespace l2rdas
