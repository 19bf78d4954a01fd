#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "l2rdas/error.hpp"
#include "l2rdas/geometry.hpp"
#include "l2rdas/grid.hpp"
#include "l2rdas/rng.hpp"

namespace l2rdas {

/// 10*log10(max_val^2 / MSE); +inf when the inputs are identical.
inline double psnr(const Mat2D& a, const Mat2D& b, double max_val = 1.0) {
    if (a.nx != b.nx || a.ny != b.ny) throw_parameter("psnr: dimension mismatch");
    double mse = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i) {
        const double d = a.values[i] - b.values[i];
        mse += d * d;
    }
    mse /= static_cast<double>(a.values.size());
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(max_val * max_val / mse);
}

struct SsimParams {
    int window = 11;
    double sigma = 1.5;
    double k1 = 0.01;
    double k2 = 0.03;
    double max_val = 1.0;
};

/// Mean local SSIM over all fully-contained Gaussian windows.
inline double ssim(const Mat2D& a, const Mat2D& b, const SsimParams& prm = {}) {
    if (a.nx != b.nx || a.ny != b.ny) throw_parameter("ssim: dimension mismatch");
    const int w = prm.window;
    if (a.nx < w || a.ny < w) throw_parameter("ssim: image smaller than window");
    const int half = w / 2;

    std::vector<double> kernel(static_cast<std::size_t>(w) * w);
    double ksum = 0.0;
    for (int i = 0; i < w; ++i)
        for (int j = 0; j < w; ++j) {
            const double dx = i - half, dy = j - half;
            const double v = std::exp(-(dx * dx + dy * dy) / (2.0 * prm.sigma * prm.sigma));
            kernel[static_cast<std::size_t>(i) * w + j] = v;
            ksum += v;
        }
    for (auto& v : kernel) v /= ksum;

    const double c1 = (prm.k1 * prm.max_val) * (prm.k1 * prm.max_val);
    const double c2 = (prm.k2 * prm.max_val) * (prm.k2 * prm.max_val);

    double total = 0.0;
    int count = 0;
    for (int cx = half; cx < a.nx - half; ++cx)
        for (int cy = half; cy < a.ny - half; ++cy) {
            double mu_a = 0, mu_b = 0;
            for (int i = 0; i < w; ++i)
                for (int j = 0; j < w; ++j) {
                    const double k = kernel[static_cast<std::size_t>(i) * w + j];
                    mu_a += k * a.at(cx - half + i, cy - half + j);
                    mu_b += k * b.at(cx - half + i, cy - half + j);
                }
            double var_a = 0, var_b = 0, cov = 0;
            for (int i = 0; i < w; ++i)
                for (int j = 0; j < w; ++j) {
                    const double k = kernel[static_cast<std::size_t>(i) * w + j];
                    const double da = a.at(cx - half + i, cy - half + j) - mu_a;
                    const double db = b.at(cx - half + i, cy - half + j) - mu_b;
                    var_a += k * da * da;
                    var_b += k * db * db;
                    cov += k * da * db;
                }
            const double num = (2 * mu_a * mu_b + c1) * (2 * cov + c2);
            const double den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2);
            total += num / den;
            ++count;
        }
    return total / count;
}

/// Rotated-rectangle IoU of the BEV footprints.
inline double bev_iou(const Box3D& b1, const Box3D& b2) {
    const double inter = bev_intersection_area(b1, b2);
    const double a1 = b1.dims.x * b1.dims.y;
    const double a2 = b2.dims.x * b2.dims.y;
    const double uni = a1 + a2 - inter;
    if (uni <= 0.0) return 0.0;
    return std::clamp(inter / uni, 0.0, 1.0);
}

/// Volume IoU: BEV intersection area times z-overlap, over the union.
inline double iou_3d(const Box3D& b1, const Box3D& b2) {
    const double inter_area = bev_intersection_area(b1, b2);
    const double z_overlap =
        std::max(0.0, std::min(b1.z_hi(), b2.z_hi()) - std::max(b1.z_lo(), b2.z_lo()));
    const double inter = inter_area * z_overlap;
    const double v1 = b1.dims.x * b1.dims.y * b1.dims.z;
    const double v2 = b2.dims.x * b2.dims.y * b2.dims.z;
    const double uni = v1 + v2 - inter;
    if (uni <= 0.0) return 0.0;
    return std::clamp(inter / uni, 0.0, 1.0);
}

struct DetectionRecord {
    std::string frame_id;
    Box3D box;
    double score = 0.0;

    void validate() const {
        box.validate();
        if (!(std::isfinite(score) && score >= 0.0 && score <= 1.0))
            throw_input("DetectionRecord: score must be finite in [0,1]");
    }
};

enum class IouMode { bev, volume };

/// 40-recall-point interpolated average precision with greedy highest-IoU
/// matching per frame. Score ties break by frame id, then input order.
inline double average_precision(const std::vector<DetectionRecord>& detections,
                                const std::map<std::string, std::vector<Box3D>>& gts,
                                double iou_thresh = 0.3, IouMode mode = IouMode::bev) {
    std::size_t n_gt = 0;
    for (const auto& [frame, boxes] : gts) n_gt += boxes.size();
    if (n_gt == 0) return 0.0;

    std::vector<std::size_t> order(detections.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
        if (detections[i].score != detections[j].score)
            return detections[i].score > detections[j].score;
        if (detections[i].frame_id != detections[j].frame_id)
            return detections[i].frame_id < detections[j].frame_id;
        return i < j;
    });

    std::map<std::string, std::vector<bool>> matched;
    for (const auto& [frame, boxes] : gts) matched[frame].assign(boxes.size(), false);

    std::vector<int> tp_flags;
    tp_flags.reserve(detections.size());
    for (std::size_t idx : order) {
        const auto& det = detections[idx];
        det.validate();
        auto it = gts.find(det.frame_id);
        int best = -1;
        double best_iou = iou_thresh;
        if (it != gts.end()) {
            for (std::size_t g = 0; g < it->second.size(); ++g) {
                if (matched[det.frame_id][g]) continue;
                const double iou = (mode == IouMode::bev) ? bev_iou(det.box, it->second[g])
                                                          : iou_3d(det.box, it->second[g]);
                if (iou >= best_iou) {
                    best_iou = iou;
                    best = static_cast<int>(g);
                }
            }
        }
        if (best >= 0) {
            matched[det.frame_id][static_cast<std::size_t>(best)] = true;
            tp_flags.push_back(1);
        } else {
            tp_flags.push_back(0);
        }
    }

    std::vector<double> precision(tp_flags.size()), recall(tp_flags.size());
    int tp = 0;
    for (std::size_t i = 0; i < tp_flags.size(); ++i) {
        tp += tp_flags[i];
        precision[i] = static_cast<double>(tp) / static_cast<double>(i + 1);
        recall[i] = static_cast<double>(tp) / static_cast<double>(n_gt);
    }

    double ap = 0.0;
    for (int k = 1; k <= 40; ++k) {
        const double r = static_cast<double>(k) / 40.0;
        double p_best = 0.0;
        for (std::size_t i = 0; i < recall.size(); ++i)
            if (recall[i] >= r - 1e-12) p_best = std::max(p_best, precision[i]);
        ap += p_best;
    }
    return ap / 40.0;
}

// ---------------------------------------------------------------------------
// Voxel-quantization center-shift study
// ---------------------------------------------------------------------------

struct CenterShiftResult {
    std::vector<double> resolutions;
    std::vector<double> mean_shift;  // meters, same order as resolutions
};

/// For n random boxes with class-typical dims, sample surface points,
/// quantize them at each resolution, and measure the displacement between the
/// point centroid and the centroid of occupied voxel centers.
inline CenterShiftResult center_shift_study(int n, const std::vector<double>& resolutions,
                                            std::uint64_t seed, int samples_per_box = 200) {
    if (n <= 0) throw_parameter("center_shift_study: n must be > 0");
    for (double r : resolutions)
        if (!(r > 0)) throw_parameter("center_shift_study: resolutions must be > 0");

    struct ClassDims {
        Vec3 mean, sigma;
    };
    // Sedan-like and bus/truck-like dims, 70/30 mix.
    const ClassDims classes[2] = {{{4.4, 1.8, 1.5}, {0.3, 0.1, 0.08}},
                                  {{8.0, 2.5, 3.0}, {0.8, 0.2, 0.3}}};

    Rng rng(seed);
    CenterShiftResult out;
    out.resolutions = resolutions;
    out.mean_shift.assign(resolutions.size(), 0.0);

    for (int bi = 0; bi < n; ++bi) {
        const ClassDims& cd = classes[rng.uniform() < 0.7 ? 0 : 1];
        Box3D box;
        box.dims = {std::max(0.5, rng.normal(cd.mean.x, cd.sigma.x)),
                    std::max(0.5, rng.normal(cd.mean.y, cd.sigma.y)),
                    std::max(0.5, rng.normal(cd.mean.z, cd.sigma.z))};
        box.center = {rng.uniform(5.0, 70.0), rng.uniform(-30.0, 30.0), rng.uniform(-1.0, 1.0)};
        box.yaw = wrap_angle(rng.uniform(-M_PI, M_PI));
        box.cls = "study";

        // area-weighted face sampling
        const double ax = box.dims.y * box.dims.z;
        const double ay = box.dims.x * box.dims.z;
        const double az = box.dims.x * box.dims.y;
        const double total = 2 * (ax + ay + az);
        std::vector<Vec3> pts;
        pts.reserve(static_cast<std::size_t>(samples_per_box));
        for (int s = 0; s < samples_per_box; ++s) {
            double u = rng.uniform() * total;
            int face;
            if (u < 2 * ax)
                face = (u < ax) ? 0 : 1;
            else if (u < 2 * ax + 2 * ay)
                face = (u < 2 * ax + ay) ? 2 : 3;
            else
                face = (u < 2 * ax + 2 * ay + az) ? 4 : 5;
            const double a = rng.uniform(-0.5, 0.5);
            const double b = rng.uniform(-0.5, 0.5);
            Vec3 local;
            switch (face) {
                case 0: local = {box.dims.x / 2, a * box.dims.y, b * box.dims.z}; break;
                case 1: local = {-box.dims.x / 2, a * box.dims.y, b * box.dims.z}; break;
                case 2: local = {a * box.dims.x, box.dims.y / 2, b * box.dims.z}; break;
                case 3: local = {a * box.dims.x, -box.dims.y / 2, b * box.dims.z}; break;
                case 4: local = {a * box.dims.x, b * box.dims.y, box.dims.z / 2}; break;
                default: local = {a * box.dims.x, b * box.dims.y, -box.dims.z / 2}; break;
            }
            pts.push_back(box.to_world(local));
        }
        Vec3 centroid{0, 0, 0};
        for (const auto& p : pts) centroid = centroid + p;
        centroid = centroid / static_cast<double>(pts.size());

        for (std::size_t ri = 0; ri < resolutions.size(); ++ri) {
            const double res = resolutions[ri];
            std::map<VoxelIndex, bool> occupied;
            for (const auto& p : pts) {
                occupied.emplace(VoxelIndex{static_cast<int>(std::floor(p.x / res)),
                                            static_cast<int>(std::floor(p.y / res)),
                                            static_cast<int>(std::floor(p.z / res))},
                                 true);
            }
            Vec3 vc{0, 0, 0};
            for (const auto& [v, _] : occupied)
                vc = vc + Vec3{(v.ix + 0.5) * res, (v.iy + 0.5) * res, (v.iz + 0.5) * res};
            vc = vc / static_cast<double>(occupied.size());
            out.mean_shift[ri] += (vc - centroid).norm();
        }
    }
    for (auto& s : out.mean_shift) s /= n;
    return out;
}

}  // namespace l2rdas
