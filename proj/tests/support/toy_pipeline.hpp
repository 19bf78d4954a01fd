#pragma once

// Shared desk-scale pipeline pieces for the unit and acceptance suites.

#include <string>
#include <vector>

#include "l2rdas/gan.hpp"
#include "l2rdas/obis.hpp"
#include "l2rdas/toyworld.hpp"
#include "l2rdas/train.hpp"

namespace testsupport {

struct DeskWorld {
    l2rdas::toy::SceneSpec scene;
    l2rdas::toy::LidarConfig lidar;
    l2rdas::toy::RadarForwardConfig radar;
    l2rdas::ObisConfig obis;
    double r_in = 0.2;
    double r_out = 0.4;
    bool use_obis = true;
};

/// Small forward-looking world: 6.4 x 6.4 x 2.4 m ROI, lidar at 0.2 m,
/// radar at 0.4 m (16x16x6 grid), sparse lidar on small boxes.
inline DeskWorld desk_world() {
    DeskWorld w;
    w.scene.roi = l2rdas::RoiBounds{0.8, 7.2, -3.2, 3.2, -2.0, 0.4};
    w.scene.ground_z = -1.7;
    w.scene.min_objects = 1;
    w.scene.max_objects = 3;
    w.scene.wall_probability = 0.4;
    w.scene.classes = {
        {"Sedan", {1.4, 0.8, 0.7}, {0.12, 0.06, 0.05}, 0.7, 0.8, 2e14},
        {"BusTruck", {2.4, 1.1, 1.1}, {0.2, 0.1, 0.08}, 0.3, 0.6, 8e14},
    };
    w.lidar.azimuth_rays = 96;
    w.lidar.elevation_rays = 20;
    w.lidar.az_fov_deg = 170.0;
    w.lidar.el_min_deg = -28.0;
    w.lidar.el_max_deg = 10.0;
    w.lidar.range_sigma = 0.01;
    w.radar.clutter_floor = 1e5;
    w.radar.speckle = false;
    w.radar.samples_per_m2 = 60.0;
    w.radar.ground_samples_per_m2 = 6.0;
    w.radar.ground_rcs = 1e12;
    w.radar.wall_rcs = 5e13;
    w.radar.sigma_range = 0.25;
    w.radar.sigma_az_deg = 1.6;
    w.radar.sigma_el_deg = 2.4;
    w.radar.polar.range_step = 0.15;
    w.radar.polar.az_step_deg = 1.2;
    w.radar.polar.el_step_deg = 2.8;
    return w;
}

inline l2rdas::train::TrainSample make_sample(const DeskWorld& w, std::uint64_t seed) {
    using namespace l2rdas;
    const auto scene = toy::generate_scene(w.scene, seed);
    PointCloud cloud = toy::lidar_sample(scene, w.scene, w.lidar, seed + 1);
    if (w.use_obis) cloud = obis_augment(cloud, scene.boxes, w.obis);
    train::TrainSample s;
    s.id = "toy_" + std::to_string(seed);
    s.input = voxelize(cloud, w.scene.roi, w.r_in);
    if (w.use_obis) {
        // frames may legitimately contain zero boxes; keep the schema stable
        std::vector<std::string> expected{"occupancy", "intensity"};
        for (const auto& n : obis_channel_names(w.obis)) expected.push_back(n);
        if (s.input.channel_schema != expected)
            throw_input("toy sample: unexpected schema");
    }
    const int factor = static_cast<int>(std::lround(w.r_out / w.r_in));
    s.condition = densify(s.input, factor);
    const auto truth = toy::radar_truth(scene, w.scene, w.radar, w.scene.roi, w.r_out, seed + 2);
    s.truth_log = log_normalize(truth);
    return s;
}

inline l2rdas::gan::GeneratorConfig desk_generator_config(const DeskWorld& w,
                                                          bool sparse_decoder = false) {
    l2rdas::gan::GeneratorConfig g;
    g.encoder_stages = 2;
    g.decoder_stages = 1;
    g.base_channels = 8;
    g.r_in = w.r_in;
    g.r_out = w.r_out;
    g.sparse_decoder = sparse_decoder;
    return g;
}

inline l2rdas::gan::DiscriminatorConfig desk_discriminator_config() {
    l2rdas::gan::DiscriminatorConfig d;
    d.base_channels = 8;
    return d;
}

inline int desk_in_channels(const DeskWorld& w) {
    return 2 + (w.use_obis ? 1 + static_cast<int>(w.obis.class_channels.size()) : 0);
}

}  // namespace testsupport
