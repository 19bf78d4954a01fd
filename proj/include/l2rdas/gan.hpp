#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "l2rdas/autodiff.hpp"
#include "l2rdas/error.hpp"
#include "l2rdas/grid.hpp"
#include "l2rdas/sparse.hpp"

namespace l2rdas::gan {

using ad::GraphBinding;
using ad::ParamStore;
using ad::SparseMap;
using ad::Tape;

struct GeneratorConfig {
    int encoder_stages = 4;   // stride-2 sparse stages
    int decoder_stages = 1;   // x2 upsampling stages
    int base_channels = 16;   // doubles per encoder stage
    int kernel = 3;
    double leaky_slope = 0.2;
    bool sparse_decoder = false;  // ablation: sparse convs in the decoder
    double r_in = 0.05;           // lidar voxel resolution, meters
    double r_out = 0.4;           // radar voxel resolution, meters

    void validate() const {
        if (encoder_stages < 2 || decoder_stages < 1 || decoder_stages >= encoder_stages)
            throw_config("generator: need encoder_stages > decoder_stages >= 1");
        if (base_channels < 1) throw_config("generator: base_channels must be >= 1");
        if (kernel % 2 == 0) throw_config("generator: kernel must be odd");
        const double expect = r_in * std::pow(2.0, encoder_stages - decoder_stages);
        if (std::abs(expect - r_out) > 1e-9 * std::max(1.0, r_out))
            throw_config("generator: resolution alignment r_in*2^(E-D) = r_out violated");
    }

    int stage_channels(int stage) const {  // stage in [1, encoder_stages]
        return base_channels << (stage - 1);
    }
    int upsample_factor() const { return 1 << (encoder_stages - decoder_stages); }
};

struct DiscriminatorConfig {
    int scales = 3;
    int blocks = 3;          // stride-2 conv blocks per scale
    int base_channels = 16;  // doubles per block
    int kernel = 3;
    double leaky_slope = 0.2;
    int feature_taps() const { return blocks + 1; }  // blocks plus score map
};

struct LossWeights {
    double lambda_fm = 10.0;
    double lambda_l1 = 100.0;
    enum class AdvForm { log_form, least_squares } form = AdvForm::log_form;

    void validate() const {
        if (lambda_fm < 0 || lambda_l1 < 0) throw_config("loss weights must be >= 0");
    }
};

// ---------------------------------------------------------------------------
// Generator
// ---------------------------------------------------------------------------

/// Sparse encoder (stride-2 sparse conv + submanifold conv per stage), dense
/// decoder with densified skip connections, sigmoid head over the radar grid.
template <typename T>
class Generator {
public:
    Generator(GeneratorConfig cfg, int in_channels, ParamStore<T>& store, Rng& rng)
        : cfg_(cfg), in_channels_(in_channels), store_(&store) {
        cfg_.validate();
        if (in_channels < 1) throw_config("generator: in_channels must be >= 1");
        const int k3 = cfg_.kernel * cfg_.kernel * cfg_.kernel;
        int cin = in_channels;
        for (int s = 1; s <= cfg_.encoder_stages; ++s) {
            const int cout = cfg_.stage_channels(s);
            add_conv("G.enc" + std::to_string(s) + ".down", k3, cin, cout, rng);
            add_conv("G.enc" + std::to_string(s) + ".sub", k3, cout, cout, rng);
            cin = cout;
        }
        for (int j = 1; j <= cfg_.decoder_stages; ++j) {
            const int from = cfg_.stage_channels(cfg_.encoder_stages - j + 1);
            const int to = cfg_.stage_channels(cfg_.encoder_stages - j);
            add_conv("G.dec" + std::to_string(j) + ".up", k3, from, to, rng);
            add_conv("G.dec" + std::to_string(j) + ".post", k3, 2 * to, to, rng);
        }
        add_conv("G.head", 1, cfg_.stage_channels(cfg_.encoder_stages - cfg_.decoder_stages), 1,
                 rng);
    }

    const GeneratorConfig& config() const { return cfg_; }
    int in_channels() const { return in_channels_; }

    /// Returns a dense node {NX, NY, NZ, 1} over the radar grid, values in
    /// (0,1) on computed sites (sparse-decoder variant leaves inactive sites
    /// at exactly 0).
    int forward(Tape<T>& t, const SparseVoxelGrid& input, GraphBinding<T>& bind) const {
        if (static_cast<int>(input.channel_count()) != in_channels_)
            throw_input("generator: input channel count mismatch");
        if (std::abs(input.resolution - cfg_.r_in) > 1e-9)
            throw_input("generator: input resolution does not match config");
        for (int a = 0; a < 3; ++a)
            if (input.dims[a] % (1 << cfg_.encoder_stages) != 0)
                throw_input("generator: input dims must divide by 2^encoder_stages");

        SparseMap<T> x = ad::sparse_leaf_from_grid(t, input);
        std::vector<SparseMap<T>> stage_out;  // index s-1
        for (int s = 1; s <= cfg_.encoder_stages; ++s) {
            x = ad::sparse_conv3d(t, x, bindw("G.enc" + std::to_string(s) + ".down", t, bind),
                                  bindb("G.enc" + std::to_string(s) + ".down", t, bind),
                                  cfg_.kernel, 2);
            x = ad::sparse_map_features(x, [&](int f) { return ad::leaky_relu(t, f, cfg_.leaky_slope); });
            x = ad::submanifold_conv3d(t, x, bindw("G.enc" + std::to_string(s) + ".sub", t, bind),
                                       bindb("G.enc" + std::to_string(s) + ".sub", t, bind),
                                       cfg_.kernel);
            x = ad::sparse_map_features(x, [&](int f) { return ad::leaky_relu(t, f, cfg_.leaky_slope); });
            stage_out.push_back(x);
        }

        if (!cfg_.sparse_decoder) {
            int h = ad::sparse_to_dense(t, stage_out.back());
            for (int j = 1; j <= cfg_.decoder_stages; ++j) {
                h = ad::upsample_conv3d(t, h, bindw("G.dec" + std::to_string(j) + ".up", t, bind),
                                        bindb("G.dec" + std::to_string(j) + ".up", t, bind),
                                        cfg_.kernel, 2);
                h = ad::leaky_relu(t, h, cfg_.leaky_slope);
                const int skip = ad::sparse_to_dense(
                    t, stage_out[static_cast<std::size_t>(cfg_.encoder_stages - j - 1)]);
                h = ad::concat_channels(t, h, skip);
                h = ad::dense_conv3d(t, h, bindw("G.dec" + std::to_string(j) + ".post", t, bind),
                                     bindb("G.dec" + std::to_string(j) + ".post", t, bind),
                                     cfg_.kernel, 1);
                h = ad::leaky_relu(t, h, cfg_.leaky_slope);
            }
            h = ad::dense_conv3d(t, h, bindw("G.head", t, bind), bindb("G.head", t, bind), 1, 1);
            return ad::sigmoid(t, h);
        }

        // ablation: decoder stays sparse, so spatial coverage stays tied to
        // the (dilated) encoder active set; inactive sites output 0
        SparseMap<T> h = stage_out.back();
        for (int j = 1; j <= cfg_.decoder_stages; ++j) {
            h = ad::sparse_upsample2(t, h);
            h = ad::sparse_conv3d(t, h, bindw("G.dec" + std::to_string(j) + ".up", t, bind),
                                  bindb("G.dec" + std::to_string(j) + ".up", t, bind), cfg_.kernel,
                                  1);
            h = ad::sparse_map_features(h, [&](int f) { return ad::leaky_relu(t, f, cfg_.leaky_slope); });
            h = ad::sparse_concat(
                t, h, stage_out[static_cast<std::size_t>(cfg_.encoder_stages - j - 1)]);
            h = ad::sparse_conv3d(t, h, bindw("G.dec" + std::to_string(j) + ".post", t, bind),
                                  bindb("G.dec" + std::to_string(j) + ".post", t, bind),
                                  cfg_.kernel, 1);
            h = ad::sparse_map_features(h, [&](int f) { return ad::leaky_relu(t, f, cfg_.leaky_slope); });
        }
        h = ad::sparse_conv3d(t, h, bindw("G.head", t, bind), bindb("G.head", t, bind), 1, 1);
        h = ad::sparse_map_features(h, [&](int f) { return ad::sigmoid(t, f); });
        return ad::sparse_to_dense(t, h);
    }

private:
    void add_conv(const std::string& name, int k3, int cin, int cout, Rng& rng) {
        store_->add(name + ".w", {k3, cin, cout}, ad::init_conv_weights<T>(k3, cin, cout, rng));
        store_->add(name + ".b", {cout}, ad::init_bias<T>(cout, rng));
    }
    int bindw(const std::string& name, Tape<T>& t, GraphBinding<T>& bind) const {
        return bind.bind(t, *store_->find(name + ".w"));
    }
    int bindb(const std::string& name, Tape<T>& t, GraphBinding<T>& bind) const {
        return bind.bind(t, *store_->find(name + ".b"));
    }

    GeneratorConfig cfg_;
    int in_channels_;
    ParamStore<T>* store_;
};

// ---------------------------------------------------------------------------
// Discriminator
// ---------------------------------------------------------------------------

template <typename T>
struct DiscriminatorOutput {
    std::vector<int> scores;              // one raw score map per scale
    std::vector<std::vector<int>> taps;   // per scale: block outputs + score map
};

/// Multi-scale patch discriminator over channel-concatenated
/// (condition, radar) grids; scales see x1, x1/2, x1/4 pooled inputs.
template <typename T>
class Discriminator {
public:
    Discriminator(DiscriminatorConfig cfg, int in_channels, ParamStore<T>& store, Rng& rng)
        : cfg_(cfg), in_channels_(in_channels), store_(&store) {
        if (cfg_.scales < 1 || cfg_.blocks < 1) throw_config("discriminator: bad scale/block count");
        const int k3 = cfg_.kernel * cfg_.kernel * cfg_.kernel;
        for (int s = 0; s < cfg_.scales; ++s) {
            int cin = in_channels;
            for (int i = 0; i < cfg_.blocks; ++i) {
                const int cout = cfg_.base_channels << i;
                add_conv(scale_name(s) + ".b" + std::to_string(i), k3, cin, cout, rng);
                cin = cout;
            }
            add_conv(scale_name(s) + ".head", k3, cin, 1, rng);
        }
    }

    const DiscriminatorConfig& config() const { return cfg_; }
    int in_channels() const { return in_channels_; }

    DiscriminatorOutput<T> forward(Tape<T>& t, int condition, int radar,
                                   GraphBinding<T>& bind) const {
        const auto& nc = t.node(condition);
        const auto& nr = t.node(radar);
        if (nc.dims.size() != 4 || nr.dims.size() != 4) throw_input("discriminator: 4-d inputs required");
        for (int a = 0; a < 3; ++a)
            if (nc.dims[a] != nr.dims[a]) throw_input("discriminator: condition/radar dims mismatch");

        const int joint = ad::concat_channels(t, condition, radar);
        DiscriminatorOutput<T> out;
        int scale_input = joint;
        for (int s = 0; s < cfg_.scales; ++s) {
            if (s > 0) scale_input = ad::avg_pool3d(t, scale_input, 2);
            int h = scale_input;
            std::vector<int> taps;
            for (int i = 0; i < cfg_.blocks; ++i) {
                h = ad::dense_conv3d(t, h, bindw(scale_name(s) + ".b" + std::to_string(i), t, bind),
                                     bindb(scale_name(s) + ".b" + std::to_string(i), t, bind),
                                     cfg_.kernel, 2);
                h = ad::leaky_relu(t, h, cfg_.leaky_slope);
                taps.push_back(h);
            }
            const int score = ad::dense_conv3d(t, h, bindw(scale_name(s) + ".head", t, bind),
                                               bindb(scale_name(s) + ".head", t, bind),
                                               cfg_.kernel, 1);
            taps.push_back(score);
            out.scores.push_back(score);
            out.taps.push_back(std::move(taps));
        }
        return out;
    }

private:
    static std::string scale_name(int s) { return "D.s" + std::to_string(s); }
    void add_conv(const std::string& name, int k3, int cin, int cout, Rng& rng) {
        store_->add(name + ".w", {k3, cin, cout}, ad::init_conv_weights<T>(k3, cin, cout, rng));
        store_->add(name + ".b", {cout}, ad::init_bias<T>(cout, rng));
    }
    int bindw(const std::string& name, Tape<T>& t, GraphBinding<T>& bind) const {
        return bind.bind(t, *store_->find(name + ".w"));
    }
    int bindb(const std::string& name, Tape<T>& t, GraphBinding<T>& bind) const {
        return bind.bind(t, *store_->find(name + ".b"));
    }

    DiscriminatorConfig cfg_;
    int in_channels_;
    ParamStore<T>* store_;
};

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

enum class AdvRole { discriminator, generator };

/// Per-scale adversarial terms. log_form discriminator:
/// -mean(log sigma(s_real)) - mean(log(1 - sigma(s_fake))); generator uses
/// the non-saturating -mean(log sigma(s_fake)). Logs clamp at 1e-12.
template <typename T>
std::vector<int> cgan_scale_terms(Tape<T>& t, const std::vector<int>& scores_real,
                                  const std::vector<int>& scores_fake, AdvRole role,
                                  LossWeights::AdvForm form) {
    if (role == AdvRole::discriminator && scores_real.size() != scores_fake.size())
        throw_input("cgan loss: scale count mismatch");
    std::vector<int> terms;
    const std::size_t n_scales =
        role == AdvRole::discriminator ? scores_real.size() : scores_fake.size();
    for (std::size_t k = 0; k < n_scales; ++k) {
        int term;
        if (form == LossWeights::AdvForm::log_form) {
            if (role == AdvRole::discriminator) {
                const int lr = ad::mean_all(t, ad::log_clamped(t, ad::sigmoid(t, scores_real[k])));
                // log(1 - sigma(s)) == log(sigma(-s))
                const int lf = ad::mean_all(
                    t, ad::log_clamped(t, ad::sigmoid(t, ad::neg(t, scores_fake[k]))));
                term = ad::neg(t, ad::add(t, lr, lf));
            } else {
                term = ad::neg(
                    t, ad::mean_all(t, ad::log_clamped(t, ad::sigmoid(t, scores_fake[k]))));
            }
        } else {
            if (role == AdvRole::discriminator) {
                const int r1 = ad::add_const(t, scores_real[k], -1.0);
                const int tr = ad::mean_all(t, ad::mul(t, r1, r1));
                const int tf = ad::mean_all(t, ad::mul(t, scores_fake[k], scores_fake[k]));
                term = ad::add(t, tr, tf);
            } else {
                const int f1 = ad::add_const(t, scores_fake[k], -1.0);
                term = ad::mean_all(t, ad::mul(t, f1, f1));
            }
        }
        terms.push_back(term);
    }
    return terms;
}

/// Adversarial loss aggregated as the mean over score-map elements and scales.
template <typename T>
int loss_cgan(Tape<T>& t, const std::vector<int>& scores_real, const std::vector<int>& scores_fake,
              AdvRole role, LossWeights::AdvForm form = LossWeights::AdvForm::log_form) {
    auto terms = cgan_scale_terms(t, scores_real, scores_fake, role, form);
    int total = terms[0];
    for (std::size_t k = 1; k < terms.size(); ++k) total = ad::add(t, total, terms[k]);
    return ad::scale(t, total, 1.0 / static_cast<double>(terms.size()));
}

/// Per-scale feature-matching terms: sum_i mean|real_i - fake_i| with the
/// real branch detached so gradients only reach the generator.
template <typename T>
std::vector<int> fm_scale_terms(Tape<T>& t, const std::vector<std::vector<int>>& real_taps,
                                const std::vector<std::vector<int>>& fake_taps) {
    if (real_taps.size() != fake_taps.size()) throw_input("fm loss: scale count mismatch");
    std::vector<int> terms;
    for (std::size_t k = 0; k < real_taps.size(); ++k) {
        if (real_taps[k].size() != fake_taps[k].size()) throw_input("fm loss: tap count mismatch");
        int term = -1;
        for (std::size_t i = 0; i < real_taps[k].size(); ++i) {
            const int real_const = ad::detach(t, real_taps[k][i]);
            const int d = ad::mean_all(t, ad::abs_op(t, ad::sub(t, real_const, fake_taps[k][i])));
            term = (term < 0) ? d : ad::add(t, term, d);
        }
        terms.push_back(term);
    }
    return terms;
}

/// Feature-matching loss summed over scales (and taps within each scale).
template <typename T>
int loss_fm(Tape<T>& t, const std::vector<std::vector<int>>& real_taps,
            const std::vector<std::vector<int>>& fake_taps) {
    auto terms = fm_scale_terms(t, real_taps, fake_taps);
    int total = terms[0];
    for (std::size_t k = 1; k < terms.size(); ++k) total = ad::add(t, total, terms[k]);
    return total;
}

/// Mean absolute voxel difference.
template <typename T>
int loss_l1(Tape<T>& t, int fake, int real) {
    const auto& nf = t.node(fake);
    const auto& nr = t.node(real);
    if (nf.dims != nr.dims) throw_input("l1 loss: dims mismatch");
    return ad::mean_all(t, ad::abs_op(t, ad::sub(t, fake, real)));
}

/// Generator objective: sum_k (adv_k + lambda_fm * fm_k) + lambda_l1 * l1.
template <typename T>
int total_objective(Tape<T>& t, const std::vector<int>& scores_real,
                    const std::vector<int>& scores_fake,
                    const std::vector<std::vector<int>>& real_taps,
                    const std::vector<std::vector<int>>& fake_taps, int fake, int real,
                    const LossWeights& w) {
    w.validate();
    auto adv = cgan_scale_terms(t, scores_real, scores_fake, AdvRole::generator, w.form);
    auto fm = fm_scale_terms(t, real_taps, fake_taps);
    if (adv.size() != fm.size()) throw_input("total objective: scale count mismatch");
    int total = -1;
    for (std::size_t k = 0; k < adv.size(); ++k) {
        const int term = ad::add(t, adv[k], ad::scale(t, fm[k], w.lambda_fm));
        total = (total < 0) ? term : ad::add(t, total, term);
    }
    total = ad::add(t, total, ad::scale(t, loss_l1(t, fake, real), w.lambda_l1));
    return total;
}

/// Discriminator objective: sum over scales of the per-scale terms.
template <typename T>
int discriminator_objective(Tape<T>& t, const std::vector<int>& scores_real,
                            const std::vector<int>& scores_fake, LossWeights::AdvForm form) {
    auto terms = cgan_scale_terms(t, scores_real, scores_fake, AdvRole::discriminator, form);
    int total = terms[0];
    for (std::size_t k = 1; k < terms.size(); ++k) total = ad::add(t, total, terms[k]);
    return total;
}

}  // namespace l2rdas::gan
