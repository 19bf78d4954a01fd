// l2rdas command-line surface: toy dataset generation, preprocessing,
// training, synthesis, metrics, and diagnostics.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "l2rdas/checkpoint.hpp"
#include "l2rdas/config.hpp"
#include "l2rdas/gan.hpp"
#include "l2rdas/gradcheck.hpp"
#include "l2rdas/gtaug.hpp"
#include "l2rdas/image.hpp"
#include "l2rdas/io.hpp"
#include "l2rdas/metrics.hpp"
#include "l2rdas/obis.hpp"
#include "l2rdas/toyworld.hpp"
#include "l2rdas/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace l2rdas;

namespace {

struct CommonArgs {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "pipeline config JSON");
    cmd->add_option("--seed", args.seed, "override the config seed");
    cmd->add_option("--out", args.out, "output path (file or directory)");
}

PipelineConfig load_effective_config(const CommonArgs& args) {
    PipelineConfig cfg;
    if (!args.config_path.empty()) {
        cfg = load_config(args.config_path);
    } else {
        cfg.finalize();
    }
    if (args.seed) cfg.seed = *args.seed;
    return cfg;
}

std::string frame_name(int index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "frame_%04d", index);
    return buf;
}

/// Hashes of every artifact in a directory tree, sorted by relative path.
json hash_directory(const fs::path& dir, const std::string& skip_name = "hashes.json") {
    std::vector<std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(dir))
        if (e.is_regular_file() && e.path().filename() != skip_name)
            files.push_back(fs::relative(e.path(), dir).generic_string());
    std::sort(files.begin(), files.end());
    json out = json::object();
    for (const auto& f : files) out[f] = file_hash_hex((dir / f).string());
    return out;
}

void write_json_file(const fs::path& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::io, "cannot open for writing: " + path.string());
    out << j.dump(2) << "\n";
}

json psnr_to_json(double v) {
    if (std::isinf(v)) return "inf";
    return v;
}

// --------------------------------------------------------------------------
// gen-scenes
// --------------------------------------------------------------------------

int cmd_gen_scenes(const CommonArgs& args) {
    const auto cfg = load_effective_config(args);
    if (args.out.empty()) throw_parameter("gen-scenes: --out directory required");
    const fs::path dir(args.out);
    fs::create_directories(dir);

    const auto& tw = cfg.toyworld;
    if (tw.val_count < 0 || tw.val_count > tw.count)
        throw_config("toyworld: val_count must be in [0, count]");

    std::vector<ManifestEntry> manifest;
    for (int i = 0; i < tw.count; ++i) {
        const std::uint64_t base = cfg.seed * 1000003ull + static_cast<std::uint64_t>(i) * 3ull;
        const auto scene = toy::generate_scene(tw.scene, base);
        const auto cloud = toy::lidar_sample(scene, tw.scene, tw.lidar, base + 1);
        const auto truth = toy::radar_truth(scene, tw.scene, tw.radar, cfg.roi, cfg.r_out, base + 2);

        const std::string stem = frame_name(i);
        write_lpc1((dir / (stem + ".lpc1")).string(), cloud);
        write_rdt1((dir / (stem + ".rdt1")).string(), truth);
        write_boxes_jsonl((dir / (stem + ".jsonl")).string(), scene.boxes);
        manifest.push_back({stem + ".lpc1", stem + ".rdt1", stem + ".jsonl",
                            i < tw.count - tw.val_count ? "train" : "val"});
    }
    write_manifest((dir / "manifest.jsonl").string(), manifest);
    write_json_file(dir / "run_config.json", materialize_config(cfg));
    write_json_file(dir / "hashes.json", hash_directory(dir));
    std::cout << json{{"scenes", tw.count}, {"val", tw.val_count}, {"dir", dir.string()}}.dump()
              << "\n";
    return 0;
}

// --------------------------------------------------------------------------
// voxelize / obis / sparsify
// --------------------------------------------------------------------------

int cmd_voxelize(const CommonArgs& args, const std::string& in) {
    const auto cfg = load_effective_config(args);
    if (args.out.empty()) throw_parameter("voxelize: --out required");
    const auto cloud = read_lpc1(in);
    const auto svg = voxelize(cloud, cfg.roi, cfg.r_in);

    PointCloud centers;
    centers.channel_schema.assign(svg.channel_schema.begin() + 2, svg.channel_schema.end());
    for (const auto& [v, feat] : svg.cells) {
        Point p;
        p.pos = svg.voxel_center(v);
        p.intensity = feat[1];
        p.aux.assign(feat.begin() + 2, feat.end());
        centers.points.push_back(std::move(p));
    }
    write_lpc1(args.out, centers);
    std::cout << json{{"cells", svg.cells.size()},
                      {"dims", {svg.dims[0], svg.dims[1], svg.dims[2]}},
                      {"resolution", svg.resolution}}
                     .dump()
              << "\n";
    return 0;
}

int cmd_obis(const CommonArgs& args, const std::string& in, const std::string& boxes_path) {
    const auto cfg = load_effective_config(args);
    if (args.out.empty()) throw_parameter("obis: --out required");
    const auto cloud = read_lpc1(in);
    const auto boxes = boxes_path.empty() ? std::vector<Box3D>{} : read_boxes_jsonl(boxes_path);
    const auto out = obis_augment(cloud, boxes, cfg.obis);
    write_lpc1(args.out, out);
    std::cout << json{{"input_points", cloud.size()},
                      {"output_points", out.size()},
                      {"channels", out.channel_schema}}
                     .dump()
              << "\n";
    return 0;
}

int cmd_sparsify(const CommonArgs& args, const std::string& in, double k, double vref) {
    if (args.out.empty()) throw_parameter("sparsify: --out required");
    auto g = read_rdt1(in);
    if (g.scale_domain == ScaleDomain::log_normalized) {
        if (!(vref > 0))
            throw_parameter("sparsify: log-normalized input needs --vref to recover power");
        g = log_denormalize(g, vref);
    }
    const auto pc = percentile_sparsify(g, k);
    write_lpc1(args.out, pc);
    std::cout << json{{"points", pc.size()}, {"k_percent", k}}.dump() << "\n";
    return 0;
}

// --------------------------------------------------------------------------
// gtaug
// --------------------------------------------------------------------------

int cmd_gtaug_build(const CommonArgs& args, const std::string& manifest_path) {
    const auto cfg = load_effective_config(args);
    if (args.out.empty()) throw_parameter("gtaug build-bank: --out directory required");
    const fs::path dir(args.out);
    fs::create_directories(dir);
    const fs::path base = fs::path(manifest_path).parent_path();

    std::vector<FrameSample> frames;
    for (const auto& e : read_manifest(manifest_path)) {
        FrameSample f;
        f.frame_id = fs::path(e.lidar).stem().string();
        f.cloud = read_lpc1((base / e.lidar).string());
        f.boxes = read_boxes_jsonl((base / e.boxes).string());
        frames.push_back(std::move(f));
    }
    const auto bank = build_bank(frames, cfg.gtaug.min_points);

    std::ofstream index(dir / "index.jsonl");
    if (!index) throw Error(ErrorKind::io, "cannot open bank index");
    for (std::size_t i = 0; i < bank.size(); ++i) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "entry_%04zu.lpc1", i);
        write_lpc1((dir / buf).string(), bank[i].points);
        index << json{{"file", buf},
                      {"dims", {bank[i].box.dims.x, bank[i].box.dims.y, bank[i].box.dims.z}},
                      {"class", bank[i].box.cls},
                      {"source_frame_id", bank[i].source_frame_id}}
                     .dump()
              << "\n";
    }
    index.close();
    std::cout << json{{"entries", bank.size()}, {"dir", dir.string()}}.dump() << "\n";
    return 0;
}

std::vector<ObjectBankEntry> load_bank(const std::string& bank_dir) {
    std::vector<ObjectBankEntry> bank;
    std::ifstream index(fs::path(bank_dir) / "index.jsonl");
    if (!index) throw Error(ErrorKind::io, "cannot open bank index in " + bank_dir);
    std::string line;
    while (std::getline(index, line)) {
        if (line.empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded()) throw_format("invalid bank index line", bank_dir + "/index.jsonl", 0);
        ObjectBankEntry e;
        e.box.center = {0, 0, 0};
        e.box.yaw = 0;
        e.box.dims = {j.at("dims").at(0).get<double>(), j.at("dims").at(1).get<double>(),
                      j.at("dims").at(2).get<double>()};
        e.box.cls = j.at("class").get<std::string>();
        e.source_frame_id = j.value("source_frame_id", "");
        e.points = read_lpc1((fs::path(bank_dir) / j.at("file").get<std::string>()).string());
        bank.push_back(std::move(e));
    }
    return bank;
}

int cmd_gtaug_insert(const CommonArgs& args, const std::string& in, const std::string& boxes_path,
                     const std::string& bank_dir, const std::string& out_boxes, int n_override) {
    const auto cfg = load_effective_config(args);
    if (args.out.empty()) throw_parameter("gtaug insert: --out required (augmented cloud)");
    if (out_boxes.empty()) throw_parameter("gtaug insert: --out-boxes required");
    const auto cloud = read_lpc1(in);
    const auto boxes = boxes_path.empty() ? std::vector<Box3D>{} : read_boxes_jsonl(boxes_path);
    const auto bank = load_bank(bank_dir);

    InsertConfig icfg;
    icfg.n_insert = n_override >= 0 ? n_override : cfg.gtaug.n_insert;
    icfg.ground_z = cfg.gtaug.ground_z;
    icfg.max_attempts = cfg.gtaug.max_attempts;
    icfg.roi = cfg.roi;
    const auto res = insert_objects(cloud, boxes, bank, icfg, cfg.seed);
    write_lpc1(args.out, res.cloud);
    write_boxes_jsonl(out_boxes, res.boxes);
    std::cout << json{{"requested", icfg.n_insert}, {"inserted", res.inserted}}.dump() << "\n";
    return 0;
}

// --------------------------------------------------------------------------
// train / synth
// --------------------------------------------------------------------------

train::DatasetConfig dataset_config(const PipelineConfig& cfg) {
    train::DatasetConfig d;
    d.roi = cfg.roi;
    d.r_in = cfg.r_in;
    d.r_out = cfg.r_out;
    d.use_obis = cfg.obis_enabled;
    d.obis = cfg.obis;
    return d;
}

int cmd_train(const CommonArgs& args, std::string manifest_path) {
    const auto cfg = load_effective_config(args);
    if (manifest_path.empty()) manifest_path = cfg.dataset_manifest;
    if (manifest_path.empty()) throw_parameter("train: --manifest required");
    if (args.out.empty()) throw_parameter("train: --out run directory required");
    const fs::path rundir(args.out);
    fs::create_directories(rundir);

    const auto dcfg = dataset_config(cfg);
    const fs::path base = fs::path(manifest_path).parent_path();
    std::vector<train::TrainSample> train_set, val_set;
    for (const auto& e : read_manifest(manifest_path)) {
        auto s = train::load_sample(e, dcfg, base);
        if (e.split == "train")
            train_set.push_back(std::move(s));
        else
            val_set.push_back(std::move(s));
    }
    if (train_set.empty()) throw_input("train: no samples with split=train");
    const int in_ch = static_cast<int>(train_set.front().input.channel_count());

    train::Trainer trainer(cfg.generator, cfg.discriminator, in_ch, cfg.seed);
    train::TrainOptions opt;
    opt.epochs = cfg.epochs;
    opt.adam = cfg.adam;
    opt.weights = cfg.loss_weights;
    opt.seed = cfg.seed;
    opt.checkpoint_dir = rundir.string();
    opt.log_path = (rundir / "train_log.jsonl").string();

    write_json_file(rundir / "run_config.json", materialize_config(cfg));
    const auto result = trainer.fit(train_set, val_set, opt);
    write_json_file(rundir / "hashes.json", hash_directory(rundir));
    std::cout << json{{"epochs", cfg.epochs},
                      {"train_frames", train_set.size()},
                      {"val_frames", val_set.size()},
                      {"final_checkpoint", result.final_checkpoint},
                      {"final_val_psnr", psnr_to_json(result.history.back().val_psnr)}}
                     .dump()
              << "\n";
    return 0;
}

int cmd_synth(const CommonArgs& args, const std::string& checkpoint, const std::string& in,
              const std::string& boxes_path, bool raw, double vref) {
    const auto cfg = load_effective_config(args);
    if (args.out.empty()) throw_parameter("synth: --out required");
    const auto cloud = read_lpc1(in);
    const auto boxes = boxes_path.empty() ? std::vector<Box3D>{} : read_boxes_jsonl(boxes_path);

    PointCloud pre = cfg.obis_enabled ? obis_augment(cloud, boxes, cfg.obis) : cloud;
    const auto svg = voxelize(pre, cfg.roi, cfg.r_in);
    const int in_ch = static_cast<int>(svg.channel_count());

    train::Trainer trainer(cfg.generator, cfg.discriminator, in_ch, cfg.seed);
    trainer.load_checkpoint(checkpoint);
    auto out = trainer.synthesize(svg);
    if (raw) {
        if (!(vref > 0)) throw_parameter("synth: --raw requires --vref > 0");
        out = log_denormalize(out, vref);
    }
    write_rdt1(args.out, out);
    std::cout << json{{"out", args.out},
                      {"dims", {out.dims[0], out.dims[1], out.dims[2]}},
                      {"scale_domain",
                       out.scale_domain == ScaleDomain::raw_power ? "raw_power" : "log_normalized"}}
                     .dump()
              << "\n";
    return 0;
}

// --------------------------------------------------------------------------
// metrics
// --------------------------------------------------------------------------

DetectionRecord detection_from_json(const json& j) {
    DetectionRecord d;
    d.frame_id = j.at("frame").get<std::string>();
    d.score = j.at("score").get<double>();
    d.box = box_from_json(j);
    return d;
}

int cmd_metrics(const CommonArgs& args, const std::string& mode, const std::string& a,
                const std::string& b, const std::string& manifest_path,
                const std::string& synth_dir, const std::string& detections_path,
                const std::string& gt_path) {
    const auto cfg = load_effective_config(args);
    json report;
    if (mode == "psnr-ssim") {
        std::vector<std::pair<std::string, std::pair<std::string, std::string>>> pairs;
        if (!a.empty() && !b.empty()) {
            pairs.push_back({fs::path(a).stem().string(), {a, b}});
        } else if (!manifest_path.empty() && !synth_dir.empty()) {
            const fs::path base = fs::path(manifest_path).parent_path();
            for (const auto& e : read_manifest(manifest_path)) {
                if (e.split != "val") continue;
                const std::string stem = fs::path(e.radar).stem().string();
                pairs.push_back({stem,
                                 {(fs::path(synth_dir) / (stem + ".rdt1")).string(),
                                  (base / e.radar).string()}});
            }
        } else {
            throw_parameter("metrics psnr-ssim: need --a/--b or --manifest/--synth-dir");
        }
        double psnr_sum = 0, ssim_sum = 0;
        json frames = json::array();
        for (const auto& [id, paths] : pairs) {
            const auto ga = read_rdt1(paths.first);
            const auto gb = read_rdt1(paths.second);
            const auto ma = metric_bev(ga, cfg.metrics);
            const auto mb = metric_bev(gb, cfg.metrics);
            const double p = psnr(ma, mb);
            const double s = ssim(ma, mb, cfg.metrics.ssim);
            psnr_sum += p;
            ssim_sum += s;
            frames.push_back({{"id", id}, {"psnr_db", psnr_to_json(p)}, {"ssim", s}});
        }
        if (pairs.empty()) throw_input("metrics: no val frames found");
        report = {{"mode", "psnr_ssim"},
                  {"frames", frames},
                  {"mean_psnr_db", psnr_to_json(psnr_sum / static_cast<double>(pairs.size()))},
                  {"mean_ssim", ssim_sum / static_cast<double>(pairs.size())}};
    } else if (mode == "ap") {
        if (detections_path.empty() || gt_path.empty())
            throw_parameter("metrics ap: --detections and --ground-truth required");
        std::vector<DetectionRecord> dets;
        {
            std::ifstream in(detections_path);
            if (!in) throw Error(ErrorKind::io, "cannot open: " + detections_path);
            std::string line;
            std::uint64_t offset = 0;
            while (std::getline(in, line)) {
                if (!line.empty()) {
                    json j = json::parse(line, nullptr, false);
                    if (j.is_discarded() || !j.is_object())
                        throw_format("invalid detection line", detections_path, offset);
                    try {
                        dets.push_back(detection_from_json(j));
                    } catch (const std::exception& e) {
                        throw_format(e.what(), detections_path, offset);
                    }
                }
                offset += line.size() + 1;
            }
        }
        std::map<std::string, std::vector<Box3D>> gts;
        {
            std::ifstream in(gt_path);
            if (!in) throw Error(ErrorKind::io, "cannot open: " + gt_path);
            std::string line;
            std::uint64_t offset = 0;
            while (std::getline(in, line)) {
                if (!line.empty()) {
                    json j = json::parse(line, nullptr, false);
                    if (j.is_discarded() || !j.is_object())
                        throw_format("invalid ground-truth line", gt_path, offset);
                    try {
                        gts[j.at("frame").get<std::string>()].push_back(box_from_json(j));
                    } catch (const std::exception& e) {
                        throw_format(e.what(), gt_path, offset);
                    }
                }
                offset += line.size() + 1;
            }
        }
        const double ap = average_precision(dets, gts, cfg.metrics.iou_thresh, cfg.metrics.ap_mode);
        report = {{"mode", "ap"},
                  {"iou_thresh", cfg.metrics.iou_thresh},
                  {"kind", cfg.metrics.ap_mode == IouMode::bev ? "bev" : "3d"},
                  {"detections", dets.size()},
                  {"ap", ap}};
    } else {
        throw_parameter("metrics: --mode must be psnr-ssim or ap");
    }
    if (!args.out.empty())
        write_json_file(args.out, report);
    else
        std::cout << report.dump(2) << "\n";
    return 0;
}

// --------------------------------------------------------------------------
// bev / center-shift / gradcheck
// --------------------------------------------------------------------------

int cmd_bev(const CommonArgs& args, const std::string& in) {
    const auto cfg = load_effective_config(args);
    if (args.out.empty()) throw_parameter("bev: --out required");
    const auto g = read_rdt1(in);
    bev_render(metric_bev(g, cfg.metrics), args.out);
    std::cout << json{{"out", args.out}, {"width", g.dims[1]}, {"height", g.dims[0]}}.dump()
              << "\n";
    return 0;
}

int cmd_center_shift(const CommonArgs& args, int n, std::vector<double> resolutions,
                     int samples) {
    const auto cfg = load_effective_config(args);
    if (resolutions.empty()) resolutions = {0.05, 0.1, 0.2, 0.4};
    const auto res = center_shift_study(n, resolutions, cfg.seed, samples);
    json per = json::array();
    for (std::size_t i = 0; i < res.resolutions.size(); ++i)
        per.push_back({{"resolution", res.resolutions[i]}, {"mean_shift", res.mean_shift[i]}});
    const json report{{"n", n}, {"samples_per_box", samples}, {"results", per}};
    if (!args.out.empty())
        write_json_file(args.out, report);
    else
        std::cout << report.dump(2) << "\n";
    return 0;
}

int cmd_gradcheck(const CommonArgs& args, int seeds) {
    json ops = json::array();
    bool all_pass = true;
    for (const auto& c : ad::standard_op_cases()) {
        double worst = 0;
        for (int s = 0; s < seeds; ++s) {
            const auto rep = ad::run_grad_check(c, 1000 + static_cast<std::uint64_t>(s));
            worst = std::max(worst, rep.max_rel_err);
        }
        const bool pass = worst < 1e-4;
        all_pass = all_pass && pass;
        ops.push_back({{"name", c.name}, {"max_rel_err", worst}, {"pass", pass}});
    }
    const json report{{"seeds", seeds}, {"ops", ops}, {"pass", all_pass}};
    if (!args.out.empty())
        write_json_file(args.out, report);
    else
        std::cout << report.dump(2) << "\n";
    return all_pass ? 0 : 2;
}

void print_error(const Error& e) {
    json j{{"error",
            {{"kind", to_string(e.kind())}, {"message", e.what()}}}};
    if (e.has_location()) {
        j["error"]["file"] = e.file();
        j["error"]["offset"] = e.offset();
    }
    std::cerr << j.dump() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"lidar-to-radar tensor synthesis toolkit"};
    app.require_subcommand(1);

    CommonArgs args;
    std::function<int()> run;

    // gen-scenes
    {
        auto* c = app.add_subcommand("gen-scenes", "generate a paired toy dataset");
        add_common(c, args);
        c->callback([&] { run = [&] { return cmd_gen_scenes(args); }; });
    }
    // voxelize
    {
        auto* c = app.add_subcommand("voxelize", "voxelize a point cloud to occupied-cell points");
        add_common(c, args);
        auto in = std::make_shared<std::string>();
        c->add_option("--in", *in, "input LPC1 cloud")->required();
        c->callback([&, in] { run = [&, in] { return cmd_voxelize(args, *in); }; });
    }
    // obis
    {
        auto* c = app.add_subcommand("obis", "add object boundary and gaussian points");
        add_common(c, args);
        auto in = std::make_shared<std::string>();
        auto boxes = std::make_shared<std::string>();
        c->add_option("--in", *in, "input LPC1 cloud")->required();
        c->add_option("--boxes", *boxes, "box annotations JSONL");
        c->callback([&, in, boxes] { run = [&, in, boxes] { return cmd_obis(args, *in, *boxes); }; });
    }
    // gtaug
    {
        auto* c = app.add_subcommand("gtaug", "ground-truth augmentation");
        c->require_subcommand(1);
        auto* build = c->add_subcommand("build-bank", "cut annotated objects into a bank");
        add_common(build, args);
        auto manifest = std::make_shared<std::string>();
        build->add_option("--manifest", *manifest, "dataset manifest")->required();
        build->callback(
            [&, manifest] { run = [&, manifest] { return cmd_gtaug_build(args, *manifest); }; });

        auto* insert = c->add_subcommand("insert", "insert bank objects into a frame");
        add_common(insert, args);
        auto in = std::make_shared<std::string>();
        auto boxes = std::make_shared<std::string>();
        auto bank = std::make_shared<std::string>();
        auto out_boxes = std::make_shared<std::string>();
        auto n = std::make_shared<int>(-1);
        insert->add_option("--in", *in, "input LPC1 cloud")->required();
        insert->add_option("--boxes", *boxes, "existing annotations JSONL");
        insert->add_option("--bank", *bank, "bank directory")->required();
        insert->add_option("--out-boxes", *out_boxes, "augmented annotations path")->required();
        insert->add_option("--n", *n, "number of objects to insert (default from config)");
        insert->callback([&, in, boxes, bank, out_boxes, n] {
            run = [&, in, boxes, bank, out_boxes, n] {
                return cmd_gtaug_insert(args, *in, *boxes, *bank, *out_boxes, *n);
            };
        });
    }
    // train
    {
        auto* c = app.add_subcommand("train", "train the generator/discriminator");
        add_common(c, args);
        auto manifest = std::make_shared<std::string>();
        c->add_option("--manifest", *manifest, "dataset manifest (overrides config)");
        c->callback([&, manifest] { run = [&, manifest] { return cmd_train(args, *manifest); }; });
    }
    // synth
    {
        auto* c = app.add_subcommand("synth", "synthesize a radar tensor from lidar");
        add_common(c, args);
        auto ckpt = std::make_shared<std::string>();
        auto in = std::make_shared<std::string>();
        auto boxes = std::make_shared<std::string>();
        auto raw = std::make_shared<bool>(false);
        auto vref = std::make_shared<double>(0.0);
        c->add_option("--checkpoint", *ckpt, "CKP1 checkpoint")->required();
        c->add_option("--in", *in, "input LPC1 cloud")->required();
        c->add_option("--boxes", *boxes, "box annotations JSONL (for OBIS)");
        c->add_flag("--raw", *raw, "export raw power instead of log-normalized");
        c->add_option("--vref", *vref, "reference power for --raw export");
        c->callback([&, ckpt, in, boxes, raw, vref] {
            run = [&, ckpt, in, boxes, raw, vref] {
                return cmd_synth(args, *ckpt, *in, *boxes, *raw, *vref);
            };
        });
    }
    // sparsify
    {
        auto* c = app.add_subcommand("sparsify", "keep the top-k% power cells as points");
        add_common(c, args);
        auto in = std::make_shared<std::string>();
        auto k = std::make_shared<double>(7.0);
        auto vref = std::make_shared<double>(0.0);
        c->add_option("--in", *in, "input RDT1 tensor")->required();
        c->add_option("--k", *k, "percentile threshold (default 7)");
        c->add_option("--vref", *vref, "reference power when the input is log-normalized");
        c->callback([&, in, k, vref] {
            run = [&, in, k, vref] { return cmd_sparsify(args, *in, *k, *vref); };
        });
    }
    // metrics
    {
        auto* c = app.add_subcommand("metrics", "PSNR/SSIM or AP evaluation");
        add_common(c, args);
        auto mode = std::make_shared<std::string>("psnr-ssim");
        auto a = std::make_shared<std::string>();
        auto b = std::make_shared<std::string>();
        auto manifest = std::make_shared<std::string>();
        auto synth_dir = std::make_shared<std::string>();
        auto dets = std::make_shared<std::string>();
        auto gt = std::make_shared<std::string>();
        c->add_option("--mode", *mode, "psnr-ssim | ap");
        c->add_option("--a", *a, "first RDT1 (synthesized)");
        c->add_option("--b", *b, "second RDT1 (ground truth)");
        c->add_option("--manifest", *manifest, "dataset manifest for val-set evaluation");
        c->add_option("--synth-dir", *synth_dir, "directory with synthesized frame_*.rdt1");
        c->add_option("--detections", *dets, "detections JSONL");
        c->add_option("--ground-truth", *gt, "ground-truth boxes JSONL");
        c->callback([&, mode, a, b, manifest, synth_dir, dets, gt] {
            run = [&, mode, a, b, manifest, synth_dir, dets, gt] {
                return cmd_metrics(args, *mode, *a, *b, *manifest, *synth_dir, *dets, *gt);
            };
        });
    }
    // bev
    {
        auto* c = app.add_subcommand("bev", "render a BEV heatmap image (PPM, jet colormap)");
        add_common(c, args);
        auto in = std::make_shared<std::string>();
        c->add_option("--in", *in, "input RDT1 tensor")->required();
        c->callback([&, in] { run = [&, in] { return cmd_bev(args, *in); }; });
    }
    // center-shift
    {
        auto* c = app.add_subcommand("center-shift", "voxel-quantization center-shift study");
        add_common(c, args);
        auto n = std::make_shared<int>(1000);
        auto res = std::make_shared<std::vector<double>>();
        auto samples = std::make_shared<int>(200);
        c->add_option("--n", *n, "number of random boxes");
        c->add_option("--resolutions", *res, "list of voxel resolutions (m)");
        c->add_option("--samples", *samples, "surface samples per box");
        c->callback([&, n, res, samples] {
            run = [&, n, res, samples] { return cmd_center_shift(args, *n, *res, *samples); };
        });
    }
    // gradcheck
    {
        auto* c = app.add_subcommand("gradcheck", "finite-difference checks for every op");
        add_common(c, args);
        auto seeds = std::make_shared<int>(20);
        c->add_option("--seeds", *seeds, "random seeds per op");
        c->callback([&, seeds] { run = [&, seeds] { return cmd_gradcheck(args, *seeds); }; });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        std::cerr << json{{"error", {{"kind", "usage"}, {"message", e.what()}}}}.dump() << "\n";
        return 2;
    }

    try {
        return run ? run() : 2;
    } catch (const Error& e) {
        print_error(e);
        return 2;
    } catch (const std::exception& e) {
        std::cerr << json{{"error", {{"kind", "internal"}, {"message", e.what()}}}}.dump() << "\n";
        return 2;
    }
}
