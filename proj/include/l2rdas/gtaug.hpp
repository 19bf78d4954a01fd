#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "l2rdas/error.hpp"
#include "l2rdas/geometry.hpp"
#include "l2rdas/grid.hpp"
#include "l2rdas/metrics.hpp"
#include "l2rdas/rng.hpp"

namespace l2rdas {

/// An annotated object cluster, normalized so the box sits at the origin with
/// yaw 0 and the points are expressed in the box frame.
struct ObjectBankEntry {
    Box3D box;  // center (0,0,0), yaw 0
    PointCloud points;
    std::string source_frame_id;
};

struct FrameSample {
    std::string frame_id;
    PointCloud cloud;
    std::vector<Box3D> boxes;
};

/// Cut every annotated box's points out into normalized bank entries;
/// clusters with fewer than min_points points are discarded.
inline std::vector<ObjectBankEntry> build_bank(const std::vector<FrameSample>& frames,
                                               int min_points = 5) {
    std::vector<ObjectBankEntry> bank;
    for (const auto& frame : frames) {
        frame.cloud.validate();
        for (const auto& box : frame.boxes) {
            box.validate();
            ObjectBankEntry entry;
            entry.box = box;
            entry.box.center = {0, 0, 0};
            entry.box.yaw = 0.0;
            entry.points.channel_schema = frame.cloud.channel_schema;
            entry.source_frame_id = frame.frame_id;
            for (const auto& p : frame.cloud.points) {
                if (!box.contains(p.pos)) continue;
                Point q = p;
                q.pos = box.to_local(p.pos);
                entry.points.points.push_back(std::move(q));
            }
            if (static_cast<int>(entry.points.size()) >= min_points)
                bank.push_back(std::move(entry));
        }
    }
    return bank;
}

struct InsertConfig {
    int n_insert = 2;
    double ground_z = -1.7;
    int max_attempts = 20;
    RoiBounds roi;
};

struct InsertResult {
    PointCloud cloud;
    std::vector<Box3D> boxes;
    int inserted = 0;
};

/// Place up to n_insert bank objects at collision-free ground poses; fewer
/// placements than requested is a valid outcome.
inline InsertResult insert_objects(const PointCloud& pc, const std::vector<Box3D>& boxes,
                                   const std::vector<ObjectBankEntry>& bank,
                                   const InsertConfig& cfg, std::uint64_t seed) {
    if (cfg.n_insert < 0) throw_parameter("insert_objects: n_insert must be >= 0");
    cfg.roi.validate();
    InsertResult res;
    res.cloud = pc;
    res.boxes = boxes;
    if (cfg.n_insert == 0 || bank.empty()) return res;

    Rng rng(seed);
    for (int k = 0; k < cfg.n_insert; ++k) {
        const auto& entry =
            bank[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(bank.size()) - 1))];
        for (int attempt = 0; attempt < cfg.max_attempts; ++attempt) {
            Box3D placed = entry.box;
            placed.center = {rng.uniform(cfg.roi.x_min, cfg.roi.x_max),
                             rng.uniform(cfg.roi.y_min, cfg.roi.y_max),
                             cfg.ground_z + entry.box.dims.z / 2};
            placed.yaw = wrap_angle(rng.uniform(-M_PI, M_PI));

            bool ok = true;
            for (const auto& c : placed.bev_corners())
                if (!cfg.roi.contains_bev(c.x, c.y)) ok = false;
            if (ok) {
                for (const auto& other : res.boxes)
                    if (bev_intersection_area(placed, other) > 0.0) {
                        ok = false;
                        break;
                    }
            }
            if (!ok) continue;

            for (const auto& p : entry.points.points) {
                Point q = p;
                q.pos = placed.to_world(p.pos);
                // schema may differ between bank and scene; keep scene schema
                q.aux.assign(res.cloud.channel_schema.size(), 0.0);
                for (std::size_t c = 0; c < entry.points.channel_schema.size(); ++c) {
                    const int dst = res.cloud.channel_index(entry.points.channel_schema[c]);
                    if (dst >= 0) q.aux[static_cast<std::size_t>(dst)] = p.aux[c];
                }
                res.cloud.points.push_back(std::move(q));
            }
            res.boxes.push_back(placed);
            res.inserted += 1;
            break;
        }
    }
    return res;
}

}  // namespace l2rdas
