#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "l2rdas/checkpoint.hpp"
#include "l2rdas/gan.hpp"
#include "l2rdas/grid.hpp"
#include "l2rdas/io.hpp"
#include "l2rdas/metrics.hpp"
#include "l2rdas/obis.hpp"

namespace l2rdas::train {

struct TrainSample {
    std::string id;
    SparseVoxelGrid input;       // voxelized (possibly OBIS-augmented) lidar
    DenseFeatureGrid condition;  // input densified to the radar grid
    DenseGrid3D truth_log;       // log-normalized radar truth
};

struct DatasetConfig {
    RoiBounds roi;
    double r_in = 0.05;
    double r_out = 0.4;
    bool use_obis = true;
    ObisConfig obis;
};

/// Load and preprocess one manifest entry (paths relative to base_dir).
inline TrainSample load_sample(const ManifestEntry& entry, const DatasetConfig& cfg,
                               const std::filesystem::path& base_dir) {
    TrainSample s;
    s.id = std::filesystem::path(entry.lidar).stem().string();
    PointCloud cloud = read_lpc1((base_dir / entry.lidar).string());
    std::vector<Box3D> boxes = read_boxes_jsonl((base_dir / entry.boxes).string());
    if (cfg.use_obis) cloud = obis_augment(cloud, boxes, cfg.obis);
    s.input = voxelize(cloud, cfg.roi, cfg.r_in);
    // OBIS channels must exist even for annotation-free frames
    if (cfg.use_obis) {
        std::vector<std::string> expected{"occupancy", "intensity"};
        for (const auto& n : obis_channel_names(cfg.obis)) expected.push_back(n);
        if (s.input.channel_schema != expected)
            throw_input("sample " + s.id + ": unexpected channel schema");
    }
    const int factor = static_cast<int>(std::lround(cfg.r_out / cfg.r_in));
    s.condition = densify(s.input, factor);

    DenseGrid3D truth = read_rdt1((base_dir / entry.radar).string());
    if (truth.scale_domain == ScaleDomain::raw_power) truth = log_normalize(truth);
    s.truth_log = std::move(truth);
    return s;
}

struct TrainOptions {
    int epochs = 40;
    ad::AdamConfig adam;        // lr 0.001, beta1 0.5 defaults
    gan::LossWeights weights;
    std::uint64_t seed = 0;
    bool adversarial = true;    // false: pure L1 regression updates
    int val_max = -1;           // cap on validation frames per epoch
    std::string checkpoint_dir; // empty: keep checkpoints off disk
    std::string log_path;       // empty: no JSONL log
    int log_every_epoch = 1;
};

struct EpochStats {
    int epoch = 0;
    double d_loss = 0.0;
    double g_adv = 0.0;
    double g_fm = 0.0;
    double g_l1 = 0.0;
    double g_total = 0.0;
    double val_psnr = 0.0;
    double val_ssim = 0.0;
};

struct TrainResult {
    std::vector<EpochStats> history;
    std::string final_checkpoint;
};

/// Owns the generator/discriminator parameters and runs the alternating
/// per-sample update loop (batch size 1).
class Trainer {
public:
    Trainer(gan::GeneratorConfig gcfg, gan::DiscriminatorConfig dcfg, int in_channels,
            std::uint64_t init_seed)
        : gcfg_(gcfg), dcfg_(dcfg) {
        Rng rng(init_seed);
        generator_.emplace(gcfg, in_channels, g_store_, rng);
        discriminator_.emplace(dcfg, in_channels + 1, d_store_, rng);
    }

    ad::ParamStore<float>& generator_store() { return g_store_; }
    ad::ParamStore<float>& discriminator_store() { return d_store_; }
    const gan::Generator<float>& generator() const { return *generator_; }

    /// Forward-only synthesis into a log-normalized dense grid.
    DenseGrid3D synthesize(const SparseVoxelGrid& input) const {
        ad::Tape<float> tape;
        ad::GraphBinding<float> bind;
        const int out = generator_->forward(tape, input, bind);
        const auto& n = tape.node(out);
        DenseGrid3D g;
        g.origin = input.origin;
        g.resolution = gcfg_.r_out;
        g.dims = {n.dims[0], n.dims[1], n.dims[2]};
        g.scale_domain = ScaleDomain::log_normalized;
        g.values.assign(n.val.begin(), n.val.end());
        return g;
    }

    TrainResult fit(const std::vector<TrainSample>& train_set,
                    const std::vector<TrainSample>& val_set, const TrainOptions& opt) {
        if (train_set.empty()) throw_input("train: dataset must be non-empty");
        for (const auto& s : train_set) check_sample(s);
        for (const auto& s : val_set) check_sample(s);

        Rng shuffle_rng(opt.seed);
        std::ofstream log;
        if (!opt.log_path.empty()) {
            log.open(opt.log_path);
            if (!log) throw Error(ErrorKind::io, "cannot open log: " + opt.log_path);
        }

        TrainResult result;
        std::vector<std::size_t> order(train_set.size());
        std::iota(order.begin(), order.end(), 0);

        for (int epoch = 1; epoch <= opt.epochs; ++epoch) {
            shuffle_rng.shuffle(order);
            EpochStats stats;
            stats.epoch = epoch;
            for (std::size_t idx : order) {
                const auto& s = train_set[idx];
                if (opt.adversarial) stats.d_loss += discriminator_step(s, opt);
                const auto g = generator_step(s, opt);
                stats.g_adv += g.adv;
                stats.g_fm += g.fm;
                stats.g_l1 += g.l1;
                stats.g_total += g.total;
            }
            const double inv = 1.0 / static_cast<double>(train_set.size());
            stats.d_loss *= inv;
            stats.g_adv *= inv;
            stats.g_fm *= inv;
            stats.g_l1 *= inv;
            stats.g_total *= inv;

            int n_val = static_cast<int>(val_set.size());
            if (opt.val_max >= 0) n_val = std::min(n_val, opt.val_max);
            if (n_val > 0) {
                double psnr_sum = 0, ssim_sum = 0;
                for (int i = 0; i < n_val; ++i) {
                    const auto& s = val_set[static_cast<std::size_t>(i)];
                    const auto synth = synthesize(s.input);
                    psnr_sum += psnr(bev_mean_pool(synth), bev_mean_pool(s.truth_log));
                    ssim_sum += ssim(bev_mean_pool(synth), bev_mean_pool(s.truth_log));
                }
                stats.val_psnr = psnr_sum / n_val;
                stats.val_ssim = ssim_sum / n_val;
            }
            result.history.push_back(stats);

            if (log && (epoch % opt.log_every_epoch == 0 || epoch == opt.epochs)) {
                nlohmann::json j{{"epoch", stats.epoch},   {"d_loss", stats.d_loss},
                                 {"g_adv", stats.g_adv},   {"g_fm", stats.g_fm},
                                 {"g_l1", stats.g_l1},     {"g_total", stats.g_total},
                                 {"val_psnr", stats.val_psnr}, {"val_ssim", stats.val_ssim}};
                log << j.dump() << "\n";
            }
            if (!opt.checkpoint_dir.empty()) {
                char name[64];
                std::snprintf(name, sizeof(name), "ckpt_epoch_%04d.ckp1", epoch);
                write_checkpoint((std::filesystem::path(opt.checkpoint_dir) / name).string());
            }
        }
        if (!opt.checkpoint_dir.empty()) {
            const auto final_path =
                (std::filesystem::path(opt.checkpoint_dir) / "ckpt_final.ckp1").string();
            write_checkpoint(final_path);
            result.final_checkpoint = final_path;
        }
        return result;
    }

    void write_checkpoint(const std::string& path) const {
        write_ckp1(path, {{"G", &g_store_}, {"D", &d_store_}});
    }

    void load_checkpoint(const std::string& path) {
        auto stores = read_ckp1(path);
        for (auto& [label, store] : stores) {
            if (label == "G")
                restore_store(g_store_, store);
            else if (label == "D")
                restore_store(d_store_, store);
        }
    }

private:
    void check_sample(const TrainSample& s) const {
        if (std::abs(s.input.resolution - gcfg_.r_in) > 1e-9 ||
            std::abs(s.truth_log.resolution - gcfg_.r_out) > 1e-6)
            throw_input("train: sample resolution does not match generator config");
        const int f = gcfg_.upsample_factor();
        for (int a = 0; a < 3; ++a)
            if (s.input.dims[a] != s.truth_log.dims[a] * f)
                throw_input("train: lidar/radar grid dims mismatch");
    }

    int condition_leaf(ad::Tape<float>& t, const TrainSample& s) const {
        std::vector<float> v(s.condition.values.size());
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<float>(s.condition.values[i]);
        return t.leaf({s.condition.dims[0], s.condition.dims[1], s.condition.dims[2],
                       s.condition.channels},
                      std::move(v));
    }

    int truth_leaf(ad::Tape<float>& t, const TrainSample& s) const {
        std::vector<float> v(s.truth_log.values.size());
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<float>(s.truth_log.values[i]);
        return t.leaf({s.truth_log.dims[0], s.truth_log.dims[1], s.truth_log.dims[2], 1},
                      std::move(v));
    }

    double discriminator_step(const TrainSample& s, const TrainOptions& opt) {
        ad::Tape<float> tape;
        ad::GraphBinding<float> gb, db;
        const int fake = generator_->forward(tape, s.input, gb);
        const int fake_const = ad::detach(tape, fake);
        const int cond = condition_leaf(tape, s);
        const int real = truth_leaf(tape, s);
        const auto out_real = discriminator_->forward(tape, cond, real, db);
        const auto out_fake = discriminator_->forward(tape, cond, fake_const, db);
        const int loss = gan::discriminator_objective(tape, out_real.scores, out_fake.scores,
                                                      opt.weights.form);
        const double value = tape.node(loss).val[0];
        tape.backward(loss);
        d_store_.zero_grads();
        db.collect(tape);
        ad::adam_step(d_store_, opt.adam);
        return value;
    }

    struct GenLosses {
        double adv = 0, fm = 0, l1 = 0, total = 0;
    };

    GenLosses generator_step(const TrainSample& s, const TrainOptions& opt) {
        ad::Tape<float> tape;
        ad::GraphBinding<float> gb, db;
        const int fake = generator_->forward(tape, s.input, gb);
        const int real = truth_leaf(tape, s);
        GenLosses out;
        int loss;
        if (opt.adversarial) {
            const int cond = condition_leaf(tape, s);
            const auto out_fake = discriminator_->forward(tape, cond, fake, db);
            const auto out_real = discriminator_->forward(tape, cond, real, db);
            // same composition as gan::total_objective, kept in pieces so the
            // per-term values can be logged
            auto adv_terms = gan::cgan_scale_terms(tape, out_real.scores, out_fake.scores,
                                                   gan::AdvRole::generator, opt.weights.form);
            auto fm_terms = gan::fm_scale_terms(tape, out_real.taps, out_fake.taps);
            int adv_sum = adv_terms[0];
            int fm_sum = fm_terms[0];
            for (std::size_t k = 1; k < adv_terms.size(); ++k) {
                adv_sum = ad::add(tape, adv_sum, adv_terms[k]);
                fm_sum = ad::add(tape, fm_sum, fm_terms[k]);
            }
            const int l1 = gan::loss_l1(tape, fake, real);
            loss = ad::add(tape, adv_sum,
                           ad::add(tape, ad::scale(tape, fm_sum, opt.weights.lambda_fm),
                                   ad::scale(tape, l1, opt.weights.lambda_l1)));
            out.adv = tape.node(adv_sum).val[0];
            out.fm = tape.node(fm_sum).val[0];
            out.l1 = tape.node(l1).val[0];
        } else {
            const int l1 = gan::loss_l1(tape, fake, real);
            loss = ad::scale(tape, l1, opt.weights.lambda_l1);
            out.l1 = tape.node(l1).val[0];
        }
        out.total = tape.node(loss).val[0];
        tape.backward(loss);
        g_store_.zero_grads();
        gb.collect(tape);
        ad::adam_step(g_store_, opt.adam);
        return out;
    }

    gan::GeneratorConfig gcfg_;
    gan::DiscriminatorConfig dcfg_;
    ad::ParamStore<float> g_store_;
    ad::ParamStore<float> d_store_;
    std::optional<gan::Generator<float>> generator_;
    std::optional<gan::Discriminator<float>> discriminator_;
};

}  // namespace l2rdas::train
