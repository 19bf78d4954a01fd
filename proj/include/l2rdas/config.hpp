#pragma once

#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "l2rdas/autodiff.hpp"
#include "l2rdas/error.hpp"
#include "l2rdas/gan.hpp"
#include "l2rdas/gtaug.hpp"
#include "l2rdas/obis.hpp"
#include "l2rdas/toyworld.hpp"

namespace l2rdas {

struct ToyworldConfig {
    toy::SceneSpec scene;     // roi is mirrored from the top-level roi
    toy::LidarConfig lidar;
    toy::RadarForwardConfig radar;
    int count = 64;           // scenes emitted by gen-scenes
    int val_count = 48;       // trailing scenes marked split=val
};

enum class PoolOrder { normalize_then_pool, pool_then_normalize };

struct MetricsConfig {
    SsimParams ssim;
    double iou_thresh = 0.3;
    IouMode ap_mode = IouMode::bev;
    PoolOrder pool_order = PoolOrder::normalize_then_pool;
    double v_ref = 0.0;  // 0: per-frame max
};

struct GtaugConfig {
    int n_insert = 2;
    double ground_z = -1.7;
    int max_attempts = 20;
    int min_points = 5;
};

/// The whole-pipeline configuration document. Unknown keys anywhere are
/// rejected; defaults below are materialized into run logs.
struct PipelineConfig {
    std::uint64_t seed = 0;
    RoiBounds roi{0.0, 76.8, -38.4, 38.4, -2.0, 10.8};
    double r_in = 0.05;
    double r_out = 0.4;
    bool obis_enabled = true;
    ObisConfig obis;
    GtaugConfig gtaug;
    gan::GeneratorConfig generator;       // r_in/r_out mirrored from resolutions
    gan::DiscriminatorConfig discriminator;
    gan::LossWeights loss_weights;
    ad::AdamConfig adam;
    int epochs = 40;
    ToyworldConfig toyworld;
    MetricsConfig metrics;
    std::string dataset_manifest;  // optional; subcommand flags may override

    void finalize() {
        generator.r_in = r_in;
        generator.r_out = r_out;
        toyworld.scene.roi = roi;
        roi.validate();
        generator.validate();
        obis.validate();
        loss_weights.validate();
        toyworld.scene.validate();
        toyworld.radar.validate();
        if (epochs < 1) throw_config("epochs must be >= 1");
    }
};

namespace detail {

class StrictReader {
public:
    StrictReader(const nlohmann::json& j, std::string path) : j_(&j), path_(std::move(path)) {
        if (!j.is_object()) throw_config("config: " + path_ + " must be an object");
    }
    ~StrictReader() = default;

    bool has(const std::string& key) {
        seen_.insert(key);
        return j_->contains(key);
    }

    template <typename T>
    void get(const std::string& key, T& out) {
        if (!has(key)) return;
        try {
            out = j_->at(key).get<T>();
        } catch (const nlohmann::json::exception& e) {
            throw_config("config: bad value for " + path_ + "." + key + ": " + e.what());
        }
    }

    void get_vec3(const std::string& key, Vec3& out) {
        if (!has(key)) return;
        const auto& a = j_->at(key);
        if (!a.is_array() || a.size() != 3)
            throw_config("config: " + path_ + "." + key + " must be a 3-array");
        out = {a.at(0).get<double>(), a.at(1).get<double>(), a.at(2).get<double>()};
    }

    void get_range(const std::string& key, double& lo, double& hi) {
        if (!has(key)) return;
        const auto& a = j_->at(key);
        if (!a.is_array() || a.size() != 2)
            throw_config("config: " + path_ + "." + key + " must be a 2-array");
        lo = a.at(0).get<double>();
        hi = a.at(1).get<double>();
    }

    const nlohmann::json* sub(const std::string& key) {
        if (!has(key)) return nullptr;
        return &j_->at(key);
    }

    void finish() {
        for (auto it = j_->begin(); it != j_->end(); ++it)
            if (!seen_.count(it.key()))
                throw_config("config: unknown key " + path_ + "." + it.key());
    }

    const std::string& path() const { return path_; }

private:
    const nlohmann::json* j_;
    std::string path_;
    std::set<std::string> seen_;
};

inline void parse_obis(const nlohmann::json& j, ObisConfig& o) {
    StrictReader r(j, "obis");
    r.has("enabled");  // read by the caller; mark as known
    r.get("edge_interval", o.edge_interval);
    r.get("shells", o.shells);
    r.get("points_per_shell", o.points_per_shell);
    r.get("shell_radii_fraction", o.shell_radii_fraction);
    r.get("class_channels", o.class_channels);
    if (r.has("shells") && !j.contains("shell_radii_fraction")) {
        // shells may shrink/extend the default radii evenly
        o.shell_radii_fraction.clear();
        for (int i = 1; i <= o.shells; ++i)
            o.shell_radii_fraction.push_back(static_cast<double>(i) / o.shells);
    }
    r.finish();
}

inline void parse_classes(const nlohmann::json& j, std::vector<toy::ClassSpec>& classes) {
    if (!j.is_object()) throw_config("config: toyworld.classes must be an object");
    classes.clear();
    for (auto it = j.begin(); it != j.end(); ++it) {
        StrictReader r(it.value(), "toyworld.classes." + it.key());
        toy::ClassSpec c;
        c.name = it.key();
        r.get_vec3("dims_mean", c.dims_mean);
        r.get_vec3("dims_sigma", c.dims_sigma);
        r.get("weight", c.weight);
        r.get("lidar_reflect", c.lidar_reflect);
        r.get("rcs", c.rcs);
        r.finish();
        classes.push_back(std::move(c));
    }
}

inline void parse_toyworld(const nlohmann::json& j, ToyworldConfig& t) {
    StrictReader r(j, "toyworld");
    r.get("count", t.count);
    r.get("val_count", t.val_count);
    if (const auto* s = r.sub("scene")) {
        StrictReader rs(*s, "toyworld.scene");
        rs.get("ground_z", t.scene.ground_z);
        rs.get("min_objects", t.scene.min_objects);
        rs.get("max_objects", t.scene.max_objects);
        rs.get("wall_probability", t.scene.wall_probability);
        rs.get("max_place_attempts", t.scene.max_place_attempts);
        rs.finish();
    }
    if (const auto* c = r.sub("classes")) parse_classes(*c, t.scene.classes);
    if (const auto* l = r.sub("lidar")) {
        StrictReader rl(*l, "toyworld.lidar");
        rl.get("azimuth_rays", t.lidar.azimuth_rays);
        rl.get("elevation_rays", t.lidar.elevation_rays);
        rl.get("az_fov_deg", t.lidar.az_fov_deg);
        rl.get("el_min_deg", t.lidar.el_min_deg);
        rl.get("el_max_deg", t.lidar.el_max_deg);
        rl.get("range_sigma", t.lidar.range_sigma);
        rl.get("max_range", t.lidar.max_range);
        rl.get("ground_reflect", t.lidar.ground_reflect);
        rl.get("wall_reflect", t.lidar.wall_reflect);
        rl.finish();
    }
    if (const auto* rd = r.sub("radar")) {
        StrictReader rr(*rd, "toyworld.radar");
        rr.get("range_exponent", t.radar.range_exponent);
        rr.get("sigma_range", t.radar.sigma_range);
        rr.get("sigma_azimuth_deg", t.radar.sigma_az_deg);
        rr.get("sigma_elevation_deg", t.radar.sigma_el_deg);
        rr.get("clutter_floor", t.radar.clutter_floor);
        rr.get("speckle", t.radar.speckle);
        rr.get("samples_per_m2", t.radar.samples_per_m2);
        rr.get("ground_samples_per_m2", t.radar.ground_samples_per_m2);
        rr.get("ground_rcs", t.radar.ground_rcs);
        rr.get("wall_rcs", t.radar.wall_rcs);
        if (const auto* p = rr.sub("polar_bins")) {
            StrictReader rp(*p, "toyworld.radar.polar_bins");
            rp.get("range_step", t.radar.polar.range_step);
            rp.get("azimuth_step_deg", t.radar.polar.az_step_deg);
            rp.get("elevation_step_deg", t.radar.polar.el_step_deg);
            rp.finish();
        }
        rr.finish();
    }
    r.finish();
}

}  // namespace detail

inline PipelineConfig parse_config(const nlohmann::json& j) {
    PipelineConfig cfg;
    detail::StrictReader r(j, "root");
    r.get("seed", cfg.seed);
    if (const auto* roi = r.sub("roi")) {
        detail::StrictReader rr(*roi, "roi");
        rr.get_range("x", cfg.roi.x_min, cfg.roi.x_max);
        rr.get_range("y", cfg.roi.y_min, cfg.roi.y_max);
        rr.get_range("z", cfg.roi.z_min, cfg.roi.z_max);
        rr.finish();
    }
    if (const auto* res = r.sub("resolutions")) {
        detail::StrictReader rr(*res, "resolutions");
        rr.get("lidar", cfg.r_in);
        rr.get("radar", cfg.r_out);
        rr.finish();
    }
    if (const auto* o = r.sub("obis")) {
        if (o->contains("enabled")) {
            if (!o->at("enabled").is_boolean())
                throw_config("config: obis.enabled must be a boolean");
            cfg.obis_enabled = o->at("enabled").get<bool>();
        }
        detail::parse_obis(*o, cfg.obis);  // marks "enabled" as a known key
    }
    if (const auto* g = r.sub("gtaug")) {
        detail::StrictReader rg(*g, "gtaug");
        rg.get("n_insert", cfg.gtaug.n_insert);
        rg.get("ground_z", cfg.gtaug.ground_z);
        rg.get("max_attempts", cfg.gtaug.max_attempts);
        rg.get("min_points", cfg.gtaug.min_points);
        rg.finish();
    }
    if (const auto* g = r.sub("generator")) {
        detail::StrictReader rg(*g, "generator");
        rg.get("encoder_stages", cfg.generator.encoder_stages);
        rg.get("decoder_stages", cfg.generator.decoder_stages);
        rg.get("base_channels", cfg.generator.base_channels);
        rg.get("kernel", cfg.generator.kernel);
        rg.get("leaky_slope", cfg.generator.leaky_slope);
        std::string decoder = "dense";
        rg.get("decoder", decoder);
        if (decoder == "dense")
            cfg.generator.sparse_decoder = false;
        else if (decoder == "sparse")
            cfg.generator.sparse_decoder = true;
        else
            throw_config("config: generator.decoder must be dense or sparse");
        rg.get("discriminator_base_channels", cfg.discriminator.base_channels);
        rg.get("discriminator_scales", cfg.discriminator.scales);
        rg.get("discriminator_blocks", cfg.discriminator.blocks);
        rg.finish();
    }
    if (const auto* w = r.sub("loss_weights")) {
        detail::StrictReader rw(*w, "loss_weights");
        rw.get("lambda_fm", cfg.loss_weights.lambda_fm);
        rw.get("lambda_l1", cfg.loss_weights.lambda_l1);
        std::string form = "log_form";
        rw.get("adversarial", form);
        if (form == "log_form")
            cfg.loss_weights.form = gan::LossWeights::AdvForm::log_form;
        else if (form == "least_squares")
            cfg.loss_weights.form = gan::LossWeights::AdvForm::least_squares;
        else
            throw_config("config: loss_weights.adversarial must be log_form or least_squares");
        rw.finish();
    }
    if (const auto* o = r.sub("optimizer")) {
        detail::StrictReader ro(*o, "optimizer");
        ro.get("lr", cfg.adam.lr);
        ro.get("beta1", cfg.adam.beta1);
        ro.get("beta2", cfg.adam.beta2);
        ro.get("eps", cfg.adam.eps);
        ro.get("epochs", cfg.epochs);
        ro.finish();
    }
    r.get("epochs", cfg.epochs);
    if (const auto* t = r.sub("toyworld")) detail::parse_toyworld(*t, cfg.toyworld);
    if (const auto* m = r.sub("metrics")) {
        detail::StrictReader rm(*m, "metrics");
        rm.get("ssim_window", cfg.metrics.ssim.window);
        rm.get("ssim_sigma", cfg.metrics.ssim.sigma);
        rm.get("k1", cfg.metrics.ssim.k1);
        rm.get("k2", cfg.metrics.ssim.k2);
        rm.get("iou_thresh", cfg.metrics.iou_thresh);
        std::string mode = "bev";
        rm.get("ap_mode", mode);
        if (mode == "bev")
            cfg.metrics.ap_mode = IouMode::bev;
        else if (mode == "3d")
            cfg.metrics.ap_mode = IouMode::volume;
        else
            throw_config("config: metrics.ap_mode must be bev or 3d");
        std::string order = "normalize_then_pool";
        rm.get("pool_order", order);
        if (order == "normalize_then_pool")
            cfg.metrics.pool_order = PoolOrder::normalize_then_pool;
        else if (order == "pool_then_normalize")
            cfg.metrics.pool_order = PoolOrder::pool_then_normalize;
        else
            throw_config("config: metrics.pool_order invalid");
        rm.get("v_ref", cfg.metrics.v_ref);
        rm.finish();
    }
    if (const auto* d = r.sub("dataset")) {
        detail::StrictReader rd(*d, "dataset");
        rd.get("manifest", cfg.dataset_manifest);
        rd.finish();
    }
    r.finish();
    cfg.finalize();
    return cfg;
}

inline PipelineConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::io, "cannot open config: " + path);
    nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded()) throw_format("config is not valid JSON", path, 0);
    try {
        return parse_config(j);
    } catch (const Error& e) {
        throw Error(e.kind(), std::string(e.what()) + " (in " + path + ")");
    }
}

/// Serialize the effective configuration with every default materialized.
inline nlohmann::json materialize_config(const PipelineConfig& cfg) {
    nlohmann::json classes = nlohmann::json::object();
    for (const auto& c : cfg.toyworld.scene.classes)
        classes[c.name] = {{"dims_mean", {c.dims_mean.x, c.dims_mean.y, c.dims_mean.z}},
                           {"dims_sigma", {c.dims_sigma.x, c.dims_sigma.y, c.dims_sigma.z}},
                           {"weight", c.weight},
                           {"lidar_reflect", c.lidar_reflect},
                           {"rcs", c.rcs}};
    return nlohmann::json{
        {"seed", cfg.seed},
        {"roi",
         {{"x", {cfg.roi.x_min, cfg.roi.x_max}},
          {"y", {cfg.roi.y_min, cfg.roi.y_max}},
          {"z", {cfg.roi.z_min, cfg.roi.z_max}}}},
        {"resolutions", {{"lidar", cfg.r_in}, {"radar", cfg.r_out}}},
        {"obis",
         {{"enabled", cfg.obis_enabled},
          {"edge_interval", cfg.obis.edge_interval},
          {"shells", cfg.obis.shells},
          {"points_per_shell", cfg.obis.points_per_shell},
          {"shell_radii_fraction", cfg.obis.shell_radii_fraction},
          {"class_channels", cfg.obis.class_channels}}},
        {"gtaug",
         {{"n_insert", cfg.gtaug.n_insert},
          {"ground_z", cfg.gtaug.ground_z},
          {"max_attempts", cfg.gtaug.max_attempts},
          {"min_points", cfg.gtaug.min_points}}},
        {"generator",
         {{"encoder_stages", cfg.generator.encoder_stages},
          {"decoder_stages", cfg.generator.decoder_stages},
          {"base_channels", cfg.generator.base_channels},
          {"kernel", cfg.generator.kernel},
          {"leaky_slope", cfg.generator.leaky_slope},
          {"decoder", cfg.generator.sparse_decoder ? "sparse" : "dense"},
          {"discriminator_base_channels", cfg.discriminator.base_channels},
          {"discriminator_scales", cfg.discriminator.scales},
          {"discriminator_blocks", cfg.discriminator.blocks}}},
        {"loss_weights",
         {{"lambda_fm", cfg.loss_weights.lambda_fm},
          {"lambda_l1", cfg.loss_weights.lambda_l1},
          {"adversarial",
           cfg.loss_weights.form == gan::LossWeights::AdvForm::log_form ? "log_form"
                                                                        : "least_squares"}}},
        {"optimizer",
         {{"lr", cfg.adam.lr},
          {"beta1", cfg.adam.beta1},
          {"beta2", cfg.adam.beta2},
          {"eps", cfg.adam.eps},
          {"epochs", cfg.epochs}}},
        {"toyworld",
         {{"count", cfg.toyworld.count},
          {"val_count", cfg.toyworld.val_count},
          {"scene",
           {{"ground_z", cfg.toyworld.scene.ground_z},
            {"min_objects", cfg.toyworld.scene.min_objects},
            {"max_objects", cfg.toyworld.scene.max_objects},
            {"wall_probability", cfg.toyworld.scene.wall_probability},
            {"max_place_attempts", cfg.toyworld.scene.max_place_attempts}}},
          {"classes", classes},
          {"lidar",
           {{"azimuth_rays", cfg.toyworld.lidar.azimuth_rays},
            {"elevation_rays", cfg.toyworld.lidar.elevation_rays},
            {"az_fov_deg", cfg.toyworld.lidar.az_fov_deg},
            {"el_min_deg", cfg.toyworld.lidar.el_min_deg},
            {"el_max_deg", cfg.toyworld.lidar.el_max_deg},
            {"range_sigma", cfg.toyworld.lidar.range_sigma},
            {"max_range", cfg.toyworld.lidar.max_range},
            {"ground_reflect", cfg.toyworld.lidar.ground_reflect},
            {"wall_reflect", cfg.toyworld.lidar.wall_reflect}}},
          {"radar",
           {{"range_exponent", cfg.toyworld.radar.range_exponent},
            {"sigma_range", cfg.toyworld.radar.sigma_range},
            {"sigma_azimuth_deg", cfg.toyworld.radar.sigma_az_deg},
            {"sigma_elevation_deg", cfg.toyworld.radar.sigma_el_deg},
            {"clutter_floor", cfg.toyworld.radar.clutter_floor},
            {"speckle", cfg.toyworld.radar.speckle},
            {"samples_per_m2", cfg.toyworld.radar.samples_per_m2},
            {"ground_samples_per_m2", cfg.toyworld.radar.ground_samples_per_m2},
            {"ground_rcs", cfg.toyworld.radar.ground_rcs},
            {"wall_rcs", cfg.toyworld.radar.wall_rcs},
            {"polar_bins",
             {{"range_step", cfg.toyworld.radar.polar.range_step},
              {"azimuth_step_deg", cfg.toyworld.radar.polar.az_step_deg},
              {"elevation_step_deg", cfg.toyworld.radar.polar.el_step_deg}}}}}}},
        {"metrics",
         {{"ssim_window", cfg.metrics.ssim.window},
          {"ssim_sigma", cfg.metrics.ssim.sigma},
          {"k1", cfg.metrics.ssim.k1},
          {"k2", cfg.metrics.ssim.k2},
          {"iou_thresh", cfg.metrics.iou_thresh},
          {"ap_mode", cfg.metrics.ap_mode == IouMode::bev ? "bev" : "3d"},
          {"pool_order",
           cfg.metrics.pool_order == PoolOrder::normalize_then_pool ? "normalize_then_pool"
                                                                    : "pool_then_normalize"},
          {"v_ref", cfg.metrics.v_ref}}},
        {"dataset", {{"manifest", cfg.dataset_manifest}}},
    };
}

/// BEV matrix for metric evaluation, honoring the configured v_ref and
/// pool/normalize order. Log-normalized inputs are used as-is.
inline Mat2D metric_bev(const DenseGrid3D& g, const MetricsConfig& mc) {
    if (g.scale_domain == ScaleDomain::log_normalized) return bev_mean_pool(g);
    const double v_ref = mc.v_ref > 0.0 ? mc.v_ref : default_v_ref(g);
    if (mc.pool_order == PoolOrder::normalize_then_pool)
        return bev_mean_pool(log_normalize(g, v_ref));
    Mat2D m = bev_mean_pool(g);
    const double denom = std::log10(1.0 + v_ref);
    for (auto& v : m.values) v = std::clamp(std::log10(1.0 + v) / denom, 0.0, 1.0);
    return m;
}

}  // namespace l2rdas
