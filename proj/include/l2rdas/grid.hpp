#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "l2rdas/error.hpp"
#include "l2rdas/geometry.hpp"

namespace l2rdas {

/// One LiDAR return: position, intensity, and the auxiliary channels named by
/// the owning cloud's schema.
struct Point {
    Vec3 pos;
    double intensity = 0.0;
    std::vector<double> aux;
};

struct PointCloud {
    std::vector<Point> points;
    std::vector<std::string> channel_schema;  // names of the aux channels

    std::size_t size() const { return points.size(); }

    void validate() const {
        for (const auto& p : points) {
            if (!p.pos.finite() || !std::isfinite(p.intensity))
                throw_input("PointCloud: non-finite point");
            if (p.aux.size() != channel_schema.size())
                throw_input("PointCloud: aux length does not match schema");
            for (double a : p.aux)
                if (!std::isfinite(a)) throw_input("PointCloud: non-finite aux channel");
        }
    }

    /// Index of a named aux channel, or -1.
    int channel_index(const std::string& name) const {
        for (std::size_t i = 0; i < channel_schema.size(); ++i)
            if (channel_schema[i] == name) return static_cast<int>(i);
        return -1;
    }

    /// Ensure a named aux channel exists (zero-filled on existing points);
    /// returns its index.
    int ensure_channel(const std::string& name) {
        int idx = channel_index(name);
        if (idx >= 0) return idx;
        channel_schema.push_back(name);
        for (auto& p : points) p.aux.push_back(0.0);
        return static_cast<int>(channel_schema.size()) - 1;
    }

    double mean_intensity() const {
        if (points.empty()) return 0.0;
        double s = 0.0;
        for (const auto& p : points) s += p.intensity;
        return s / static_cast<double>(points.size());
    }
};

struct VoxelIndex {
    int ix = 0, iy = 0, iz = 0;
    auto operator<=>(const VoxelIndex&) const = default;
};

/// Hash-indexed occupied voxels over a fixed lattice. Iteration over `cells`
/// is lexicographic in (ix,iy,iz), which fixes every reduction order.
struct SparseVoxelGrid {
    Vec3 origin;
    double resolution = 0.0;
    std::array<int, 3> dims{};                    // NX, NY, NZ
    std::map<VoxelIndex, std::vector<double>> cells;
    std::vector<std::string> channel_schema;

    std::size_t channel_count() const { return channel_schema.size(); }

    Vec3 voxel_center(const VoxelIndex& v) const {
        return {origin.x + (v.ix + 0.5) * resolution, origin.y + (v.iy + 0.5) * resolution,
                origin.z + (v.iz + 0.5) * resolution};
    }
};

enum class ScaleDomain : std::uint8_t { raw_power = 0, log_normalized = 1 };

/// Dense scalar grid; linear index ((ix*NY)+iy)*NZ+iz.
struct DenseGrid3D {
    Vec3 origin;
    double resolution = 0.0;
    std::array<int, 3> dims{};
    std::vector<double> values;
    ScaleDomain scale_domain = ScaleDomain::raw_power;

    static DenseGrid3D zeros(const Vec3& origin, double resolution, std::array<int, 3> dims,
                             ScaleDomain domain) {
        DenseGrid3D g;
        g.origin = origin;
        g.resolution = resolution;
        g.dims = dims;
        g.scale_domain = domain;
        g.values.assign(static_cast<std::size_t>(dims[0]) * dims[1] * dims[2], 0.0);
        return g;
    }

    std::size_t index(int ix, int iy, int iz) const {
        return (static_cast<std::size_t>(ix) * dims[1] + iy) * dims[2] + iz;
    }
    double& at(int ix, int iy, int iz) { return values[index(ix, iy, iz)]; }
    double at(int ix, int iy, int iz) const { return values[index(ix, iy, iz)]; }

    Vec3 voxel_center(int ix, int iy, int iz) const {
        return {origin.x + (ix + 0.5) * resolution, origin.y + (iy + 0.5) * resolution,
                origin.z + (iz + 0.5) * resolution};
    }

    bool same_layout(const DenseGrid3D& o) const { return dims == o.dims; }
};

/// Dense multichannel grid (channel-last layout); produced by densify().
struct DenseFeatureGrid {
    Vec3 origin;
    double resolution = 0.0;
    std::array<int, 3> dims{};
    int channels = 0;
    std::vector<double> values;  // (((ix*NY)+iy)*NZ+iz)*C + c
    std::vector<std::string> channel_schema;

    std::size_t index(int ix, int iy, int iz, int c) const {
        return ((static_cast<std::size_t>(ix) * dims[1] + iy) * dims[2] + iz) *
                   static_cast<std::size_t>(channels) +
               c;
    }
    double& at(int ix, int iy, int iz, int c) { return values[index(ix, iy, iz, c)]; }
    double at(int ix, int iy, int iz, int c) const { return values[index(ix, iy, iz, c)]; }
};

struct AxisBins {
    double lo = 0.0;     // lower edge of bin 0
    double step = 0.0;   // bin width
    int count = 0;

    double hi() const { return lo + step * count; }
    double center(int i) const { return lo + (i + 0.5) * step; }
    bool covers(double v) const { return v >= lo && v <= hi(); }
};

/// Radar power over (range, azimuth, elevation) bins; linear index
/// ((ir*NA)+ia)*NE+ie.
struct PolarGrid3D {
    AxisBins range, azimuth, elevation;
    std::vector<double> values;

    static PolarGrid3D zeros(AxisBins r, AxisBins az, AxisBins el) {
        PolarGrid3D g;
        g.range = r;
        g.azimuth = az;
        g.elevation = el;
        if (!(r.step > 0 && az.step > 0 && el.step > 0))
            throw_parameter("PolarGrid3D: bin steps must be > 0");
        g.values.assign(static_cast<std::size_t>(r.count) * az.count * el.count, 0.0);
        return g;
    }

    std::size_t index(int ir, int ia, int ie) const {
        return (static_cast<std::size_t>(ir) * azimuth.count + ia) * elevation.count + ie;
    }
    double& at(int ir, int ia, int ie) { return values[index(ir, ia, ie)]; }
    double at(int ir, int ia, int ie) const { return values[index(ir, ia, ie)]; }
};

/// 2D matrix for BEV projections, row index = ix, column index = iy.
struct Mat2D {
    int nx = 0, ny = 0;
    std::vector<double> values;

    static Mat2D zeros(int nx, int ny) {
        Mat2D m;
        m.nx = nx;
        m.ny = ny;
        m.values.assign(static_cast<std::size_t>(nx) * ny, 0.0);
        return m;
    }
    double& at(int ix, int iy) { return values[static_cast<std::size_t>(ix) * ny + iy]; }
    double at(int ix, int iy) const { return values[static_cast<std::size_t>(ix) * ny + iy]; }
};

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

/// Bin in-ROI points into voxels. Per-voxel features are
/// [occupancy=1, mean intensity, mean of each aux channel].
inline SparseVoxelGrid voxelize(const PointCloud& pc, const RoiBounds& roi, double resolution) {
    roi.validate();
    pc.validate();
    SparseVoxelGrid g;
    g.origin = roi.origin();
    g.resolution = resolution;
    g.dims = roi.grid_dims(resolution);
    g.channel_schema.reserve(2 + pc.channel_schema.size());
    g.channel_schema.push_back("occupancy");
    g.channel_schema.push_back("intensity");
    for (const auto& n : pc.channel_schema) g.channel_schema.push_back(n);

    const std::size_t nc = g.channel_schema.size();
    std::map<VoxelIndex, std::pair<std::vector<double>, int>> acc;  // sums, count
    for (const auto& p : pc.points) {
        if (!roi.contains(p.pos)) continue;
        VoxelIndex v{static_cast<int>(std::floor((p.pos.x - roi.x_min) / resolution)),
                     static_cast<int>(std::floor((p.pos.y - roi.y_min) / resolution)),
                     static_cast<int>(std::floor((p.pos.z - roi.z_min) / resolution))};
        if (v.ix < 0 || v.ix >= g.dims[0] || v.iy < 0 || v.iy >= g.dims[1] || v.iz < 0 ||
            v.iz >= g.dims[2])
            continue;  // boundary rounding
        auto& slot = acc[v];
        if (slot.first.empty()) slot.first.assign(nc, 0.0);
        slot.first[1] += p.intensity;
        for (std::size_t c = 0; c < p.aux.size(); ++c) slot.first[2 + c] += p.aux[c];
        slot.second += 1;
    }
    for (auto& [v, slot] : acc) {
        std::vector<double> feat(nc, 0.0);
        feat[0] = 1.0;
        for (std::size_t c = 1; c < nc; ++c) feat[c] = slot.first[c] / slot.second;
        g.cells.emplace(v, std::move(feat));
    }
    return g;
}

namespace detail {

/// Clamped trilinear interpolation over bin centers of a polar grid.
inline double sample_polar_trilinear(const PolarGrid3D& pg, double r, double az, double el) {
    auto locate = [](const AxisBins& b, double v, int& i0, double& frac) {
        const double u = (v - b.lo) / b.step - 0.5;
        double fl = std::floor(u);
        i0 = static_cast<int>(fl);
        frac = u - fl;
        if (i0 < 0) {
            i0 = 0;
            frac = 0.0;
        }
        if (i0 >= b.count - 1) {
            i0 = std::max(0, b.count - 2);
            frac = (b.count > 1) ? 1.0 : 0.0;
        }
    };
    int ir, ia, ie;
    double fr, fa, fe;
    locate(pg.range, r, ir, fr);
    locate(pg.azimuth, az, ia, fa);
    locate(pg.elevation, el, ie, fe);
    const int ir1 = std::min(ir + 1, pg.range.count - 1);
    const int ia1 = std::min(ia + 1, pg.azimuth.count - 1);
    const int ie1 = std::min(ie + 1, pg.elevation.count - 1);
    double out = 0.0;
    const double wr[2] = {1.0 - fr, fr};
    const double wa[2] = {1.0 - fa, fa};
    const double we[2] = {1.0 - fe, fe};
    const int irs[2] = {ir, ir1}, ias[2] = {ia, ia1}, ies[2] = {ie, ie1};
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b)
            for (int c = 0; c < 2; ++c)
                out += wr[a] * wa[b] * we[c] * pg.at(irs[a], ias[b], ies[c]);
    return out;
}

}  // namespace detail

/// Resample a polar power grid onto a Cartesian ROI grid. Voxel centers
/// outside the polar field of view become 0.
inline DenseGrid3D polar_to_cartesian(const PolarGrid3D& pg, const RoiBounds& roi,
                                      double resolution) {
    roi.validate();
    auto out = DenseGrid3D::zeros(roi.origin(), resolution, roi.grid_dims(resolution),
                                  ScaleDomain::raw_power);
    for (int ix = 0; ix < out.dims[0]; ++ix)
        for (int iy = 0; iy < out.dims[1]; ++iy)
            for (int iz = 0; iz < out.dims[2]; ++iz) {
                const Vec3 p = out.voxel_center(ix, iy, iz);
                const double r = p.norm();
                const double az = std::atan2(p.y, p.x);
                const double el = std::atan2(p.z, std::sqrt(p.x * p.x + p.y * p.y));
                if (!pg.range.covers(r) || !pg.azimuth.covers(az) || !pg.elevation.covers(el))
                    continue;
                out.at(ix, iy, iz) = detail::sample_polar_trilinear(pg, r, az, el);
            }
    return out;
}

/// True iff the voxel center lies inside the polar field of view; mirrors the
/// masking rule of polar_to_cartesian.
inline bool in_polar_fov(const PolarGrid3D& pg, const Vec3& p) {
    const double r = p.norm();
    const double az = std::atan2(p.y, p.x);
    const double el = std::atan2(p.z, std::sqrt(p.x * p.x + p.y * p.y));
    return pg.range.covers(r) && pg.azimuth.covers(az) && pg.elevation.covers(el);
}

/// v' = log10(1+v)/log10(1+v_ref), clamped to [0,1].
inline DenseGrid3D log_normalize(const DenseGrid3D& g, double v_ref) {
    if (g.scale_domain != ScaleDomain::raw_power)
        throw_parameter("log_normalize: input must be raw_power");
    if (!(v_ref > 0.0)) throw_parameter("log_normalize: v_ref must be > 0");
    DenseGrid3D out = g;
    out.scale_domain = ScaleDomain::log_normalized;
    const double denom = std::log10(1.0 + v_ref);
    for (auto& v : out.values) v = std::clamp(std::log10(1.0 + v) / denom, 0.0, 1.0);
    return out;
}

/// Per-frame default reference: the grid maximum (1.0 for all-zero grids).
inline double default_v_ref(const DenseGrid3D& g) {
    double m = 0.0;
    for (double v : g.values) m = std::max(m, v);
    return m > 0.0 ? m : 1.0;
}

inline DenseGrid3D log_normalize(const DenseGrid3D& g) { return log_normalize(g, default_v_ref(g)); }

/// Inverse of log_normalize for the same v_ref.
inline DenseGrid3D log_denormalize(const DenseGrid3D& g, double v_ref) {
    if (g.scale_domain != ScaleDomain::log_normalized)
        throw_parameter("log_denormalize: input must be log_normalized");
    if (!(v_ref > 0.0)) throw_parameter("log_denormalize: v_ref must be > 0");
    DenseGrid3D out = g;
    out.scale_domain = ScaleDomain::raw_power;
    const double denom = std::log10(1.0 + v_ref);
    for (auto& v : out.values) v = std::max(0.0, std::pow(10.0, v * denom) - 1.0);
    return out;
}

/// Mean over the height axis.
inline Mat2D bev_mean_pool(const DenseGrid3D& g) {
    Mat2D m = Mat2D::zeros(g.dims[0], g.dims[1]);
    const double inv = 1.0 / g.dims[2];
    for (int ix = 0; ix < g.dims[0]; ++ix)
        for (int iy = 0; iy < g.dims[1]; ++iy) {
            double s = 0.0;
            for (int iz = 0; iz < g.dims[2]; ++iz) s += g.at(ix, iy, iz);
            m.at(ix, iy) = s * inv;
        }
    return m;
}

/// Keep the top-k% power cells as points at their voxel centers. Exactly
/// ceil(k/100 * N) points; ties broken lexicographically by (ix,iy,iz).
inline PointCloud percentile_sparsify(const DenseGrid3D& g, double k_percent) {
    if (!(k_percent > 0.0 && k_percent <= 100.0))
        throw_parameter("percentile_sparsify: k must be in (0, 100]");
    if (g.scale_domain != ScaleDomain::raw_power)
        throw_parameter("percentile_sparsify: input must be raw_power");
    const std::size_t n = g.values.size();
    // multiply before dividing so integral k*N/100 stays exact
    const std::size_t m =
        static_cast<std::size_t>(std::ceil(k_percent * static_cast<double>(n) / 100.0));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (g.values[a] != g.values[b]) return g.values[a] > g.values[b];
        return a < b;  // linear index order == lexicographic (ix,iy,iz)
    });
    PointCloud pc;
    pc.points.reserve(m);
    std::vector<std::size_t> pick(order.begin(), order.begin() + static_cast<long>(m));
    std::sort(pick.begin(), pick.end());
    for (std::size_t idx : pick) {
        const int iz = static_cast<int>(idx % g.dims[2]);
        const int iy = static_cast<int>((idx / g.dims[2]) % g.dims[1]);
        const int ix = static_cast<int>(idx / (static_cast<std::size_t>(g.dims[1]) * g.dims[2]));
        Point p;
        p.pos = g.voxel_center(ix, iy, iz);
        p.intensity = g.values[idx];
        pc.points.push_back(std::move(p));
    }
    return pc;
}

/// Downsample a sparse grid to resolution*factor; each coarse cell averages
/// the occupied fine voxels it contains (0 if none).
inline DenseFeatureGrid densify(const SparseVoxelGrid& svg, int factor) {
    if (factor < 1) throw_parameter("densify: factor must be >= 1");
    for (int a = 0; a < 3; ++a)
        if (svg.dims[a] % factor != 0) throw_parameter("densify: factor must divide dims");
    DenseFeatureGrid out;
    out.origin = svg.origin;
    out.resolution = svg.resolution * factor;
    out.dims = {svg.dims[0] / factor, svg.dims[1] / factor, svg.dims[2] / factor};
    out.channels = static_cast<int>(svg.channel_count());
    out.channel_schema = svg.channel_schema;
    out.values.assign(static_cast<std::size_t>(out.dims[0]) * out.dims[1] * out.dims[2] *
                          out.channels,
                      0.0);
    std::vector<int> counts(static_cast<std::size_t>(out.dims[0]) * out.dims[1] * out.dims[2], 0);
    for (const auto& [v, feat] : svg.cells) {
        const int cx = v.ix / factor, cy = v.iy / factor, cz = v.iz / factor;
        const std::size_t cell =
            (static_cast<std::size_t>(cx) * out.dims[1] + cy) * out.dims[2] + cz;
        counts[cell] += 1;
        for (int c = 0; c < out.channels; ++c) out.values[cell * out.channels + c] += feat[c];
    }
    for (std::size_t cell = 0; cell < counts.size(); ++cell) {
        if (counts[cell] == 0) continue;
        for (int c = 0; c < out.channels; ++c)
            out.values[cell * static_cast<std::size_t>(out.channels) + c] /= counts[cell];
    }
    return out;
}

}  // namespace l2rdas
