#pragma once

#include <functional>
#include <string>
#include <vector>

#include "l2rdas/autodiff.hpp"
#include "l2rdas/rng.hpp"
#include "l2rdas/sparse.hpp"

namespace l2rdas::ad {

/// A differentiable scalar expression of a set of leaf tensors, used for
/// central finite-difference verification. The builder only runs forward
/// passes, so the check is independent of every backward implementation.
struct GradCheckCase {
    std::string name;
    std::vector<std::vector<int>> leaf_dims;
    // builds the scalar root from freshly-created leaves
    std::function<int(Tape<double>&, const std::vector<int>&)> build;
    // value range for leaf initialization (log-like ops need positive input)
    double init_lo = -1.0;
    double init_hi = 1.0;
};

struct GradCheckReport {
    std::string name;
    double max_rel_err = 0.0;
    bool pass = false;
};

namespace detail {

inline double eval_forward(const GradCheckCase& c, const std::vector<std::vector<double>>& values) {
    Tape<double> t;
    std::vector<int> leaves;
    for (std::size_t i = 0; i < c.leaf_dims.size(); ++i)
        leaves.push_back(t.leaf(c.leaf_dims[i], values[i]));
    const int root = c.build(t, leaves);
    return t.node(root).val[0];
}

}  // namespace detail

/// Verify d(root)/d(leaf) for every leaf element against central differences.
/// Relative error uses max(1, |fd|, |ad|) as the scale.
inline GradCheckReport run_grad_check(const GradCheckCase& c, std::uint64_t seed,
                                      double eps = 1e-4, double tol = 1e-4) {
    Rng rng(seed);
    std::vector<std::vector<double>> values(c.leaf_dims.size());
    for (std::size_t i = 0; i < c.leaf_dims.size(); ++i) {
        values[i].resize(Tape<double>::numel(c.leaf_dims[i]));
        for (auto& v : values[i]) v = rng.uniform(c.init_lo, c.init_hi);
    }

    Tape<double> t;
    std::vector<int> leaves;
    for (std::size_t i = 0; i < c.leaf_dims.size(); ++i)
        leaves.push_back(t.leaf(c.leaf_dims[i], values[i]));
    const int root = c.build(t, leaves);
    t.backward(root);

    GradCheckReport rep;
    rep.name = c.name;
    for (std::size_t li = 0; li < leaves.size(); ++li) {
        const auto& grad = t.node(leaves[li]).grad;
        for (std::size_t e = 0; e < values[li].size(); ++e) {
            auto vp = values;
            auto vm = values;
            vp[li][e] += eps;
            vm[li][e] -= eps;
            const double fd = (detail::eval_forward(c, vp) - detail::eval_forward(c, vm)) /
                              (2.0 * eps);
            const double ad = grad[e];
            const double scale = std::max({1.0, std::abs(fd), std::abs(ad)});
            rep.max_rel_err = std::max(rep.max_rel_err, std::abs(fd - ad) / scale);
        }
    }
    rep.pass = rep.max_rel_err < tol;
    return rep;
}

/// The standard per-op check suite (tensors <= 6^3), shared by the gradcheck
/// CLI subcommand, the unit tests, and the acceptance suite.
inline std::vector<GradCheckCase> standard_op_cases() {
    std::vector<GradCheckCase> cases;
    const std::vector<int> t4 = {4, 3, 3, 2};  // {nx,ny,nz,nc}

    // weight the output by a fixed pattern so gradients are non-uniform
    auto scalarize_weighted = [](Tape<double>& t, int x) {
        const auto& n = t.node(x);
        std::vector<double> w(n.val.size());
        for (std::size_t i = 0; i < w.size(); ++i)
            w[i] = 0.25 + 0.5 * static_cast<double>((i * 2654435761u) % 97) / 97.0;
        const int wl = t.leaf(n.dims, w);
        return mean_all(t, mul(t, x, wl));
    };

    cases.push_back({"add", {t4, t4},
                     [=](Tape<double>& t, const std::vector<int>& l) {
                         return scalarize_weighted(t, add(t, l[0], l[1]));
                     }});
    cases.push_back({"sub", {t4, t4},
                     [=](Tape<double>& t, const std::vector<int>& l) {
                         return scalarize_weighted(t, sub(t, l[0], l[1]));
                     }});
    cases.push_back({"mul", {t4, t4},
                     [=](Tape<double>& t, const std::vector<int>& l) {
                         return scalarize_weighted(t, mul(t, l[0], l[1]));
                     }});
    cases.push_back({"scale_add_const", {t4},
                     [=](Tape<double>& t, const std::vector<int>& l) {
                         return scalarize_weighted(t, add_const(t, scale(t, l[0], -1.7), 0.3));
                     }});
    cases.push_back({"abs", {t4},
                     [=](Tape<double>& t, const std::vector<int>& l) {
                         return scalarize_weighted(t, abs_op(t, l[0]));
                     },
                     0.1, 1.0});  // keep away from the kink at 0
    cases.push_back({"leaky_relu", {t4},
                     [=](Tape<double>& t, const std::vector<int>& l) {
                         return scalarize_weighted(t, leaky_relu(t, l[0], 0.2));
                     }});
    cases.push_back({"sigmoid", {t4},
                     [=](Tape<double>& t, const std::vector<int>& l) {
                         return scalarize_weighted(t, sigmoid(t, l[0]));
                     }});
    cases.push_back({"log_clamped", {t4},
                     [=](Tape<double>& t, const std::vector<int>& l) {
                         return scalarize_weighted(t, log_clamped(t, l[0]));
                     },
                     0.1, 2.0});
    cases.push_back({"mean_all", {t4},
                     [=](Tape<double>& t, const std::vector<int>& l) {
                         return mean_all(t, l[0]);
                     }});
    cases.push_back({"concat_channels", {t4, {4, 3, 3, 3}},
                     [=](Tape<double>& t, const std::vector<int>& l) {
                         return scalarize_weighted(t, concat_channels(t, l[0], l[1]));
                     }});
    cases.push_back({"avg_pool3d", {{4, 4, 4, 2}},
                     [=](Tape<double>& t, const std::vector<int>& l) {
                         return scalarize_weighted(t, avg_pool3d(t, l[0], 2));
                     }});
    cases.push_back({"nearest_upsample3d", {{3, 3, 2, 2}},
                     [=](Tape<double>& t, const std::vector<int>& l) {
                         return scalarize_weighted(t, nearest_upsample3d(t, l[0], 2));
                     }});

    const int k = 3, cin = 2, cout = 3;
    const std::vector<int> wdims = {k * k * k, cin, cout};
    const std::vector<int> bdims = {cout};
    cases.push_back({"dense_conv3d_s1", {{5, 4, 4, cin}, wdims, bdims},
                     [=](Tape<double>& t, const std::vector<int>& l) {
                         return scalarize_weighted(t, dense_conv3d(t, l[0], l[1], l[2], k, 1));
                     }});
    cases.push_back({"dense_conv3d_s2", {{5, 4, 4, cin}, wdims, bdims},
                     [=](Tape<double>& t, const std::vector<int>& l) {
                         return scalarize_weighted(t, dense_conv3d(t, l[0], l[1], l[2], k, 2));
                     }});
    cases.push_back({"upsample_conv3d", {{3, 3, 2, cin}, wdims, bdims},
                     [=](Tape<double>& t, const std::vector<int>& l) {
                         return scalarize_weighted(t, upsample_conv3d(t, l[0], l[1], l[2], k, 2));
                     }});

    // sparse ops share an active-set pattern over a 6^3 lattice
    const std::vector<std::array<int, 3>> coords = {
        {0, 0, 0}, {1, 2, 3}, {2, 2, 2}, {3, 1, 4}, {4, 4, 1}, {5, 5, 5}, {5, 0, 2}};
    const int n_active = static_cast<int>(coords.size());
    auto as_sparse = [coords](int feat) {
        SparseMap<double> m;
        m.dims = {6, 6, 6};
        std::vector<std::array<int, 3>> sorted = coords;
        std::sort(sorted.begin(), sorted.end());
        m.coords = sorted;
        m.feat = feat;
        return m;
    };
    cases.push_back({"sparse_conv3d_s1", {{n_active, cin}, wdims, bdims},
                     [=](Tape<double>& t, const std::vector<int>& l) {
                         auto x = as_sparse(l[0]);
                         auto y = sparse_conv3d(t, x, l[1], l[2], k, 1);
                         return scalarize_weighted(t, y.feat);
                     }});
    cases.push_back({"sparse_conv3d_s2", {{n_active, cin}, wdims, bdims},
                     [=](Tape<double>& t, const std::vector<int>& l) {
                         auto x = as_sparse(l[0]);
                         auto y = sparse_conv3d(t, x, l[1], l[2], k, 2);
                         return scalarize_weighted(t, y.feat);
                     }});
    cases.push_back({"submanifold_conv3d", {{n_active, cin}, wdims, bdims},
                     [=](Tape<double>& t, const std::vector<int>& l) {
                         auto x = as_sparse(l[0]);
                         auto y = submanifold_conv3d(t, x, l[1], l[2], k);
                         return scalarize_weighted(t, y.feat);
                     }});
    cases.push_back({"sparse_to_dense", {{n_active, cin}},
                     [=](Tape<double>& t, const std::vector<int>& l) {
                         auto x = as_sparse(l[0]);
                         return scalarize_weighted(t, sparse_to_dense(t, x));
                     }});
    cases.push_back({"sparse_upsample2", {{n_active, cin}},
                     [=](Tape<double>& t, const std::vector<int>& l) {
                         auto x = as_sparse(l[0]);
                         auto y = sparse_upsample2(t, x);
                         return scalarize_weighted(t, y.feat);
                     }});
    cases.push_back({"sparse_concat", {{n_active, cin}, {3, 2}},
                     [=](Tape<double>& t, const std::vector<int>& l) {
                         auto x = as_sparse(l[0]);
                         SparseMap<double> other;
                         other.dims = {6, 6, 6};
                         other.coords = {{0, 0, 0}, {2, 3, 1}, {5, 5, 5}};
                         other.feat = l[1];
                         auto y = sparse_concat(t, x, other);
                         return scalarize_weighted(t, y.feat);
                     }});
    return cases;
}

}  // namespace l2rdas::ad
