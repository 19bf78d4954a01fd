#pragma once

#include <algorithm>
#include <array>
#include <map>
#include <vector>

#include "l2rdas/autodiff.hpp"
#include "l2rdas/error.hpp"
#include "l2rdas/grid.hpp"

namespace l2rdas::ad {

/// A sparse feature map on the tape: a sorted unique active set over a voxel
/// lattice plus a {N, C} feature node holding one row per active site.
template <typename T>
struct SparseMap {
    std::array<int, 3> dims{};                     // lattice extents
    std::vector<std::array<int, 3>> coords;        // sorted lexicographic
    int feat = -1;                                 // tape node, dims {N, C}

    int active_count() const { return static_cast<int>(coords.size()); }
    int channels(const Tape<T>& t) const { return t.node(feat).dims[1]; }
};

/// Build a tape leaf from a SparseVoxelGrid (no gradient flows to the input).
template <typename T>
SparseMap<T> sparse_leaf_from_grid(Tape<T>& t, const SparseVoxelGrid& g) {
    SparseMap<T> m;
    m.dims = g.dims;
    const int nc = static_cast<int>(g.channel_count());
    std::vector<T> feat;
    feat.reserve(g.cells.size() * static_cast<std::size_t>(nc));
    m.coords.reserve(g.cells.size());
    for (const auto& [v, f] : g.cells) {  // std::map iterates sorted
        m.coords.push_back({v.ix, v.iy, v.iz});
        for (double x : f) feat.push_back(static_cast<T>(x));
    }
    m.feat = t.leaf({m.active_count(), nc}, std::move(feat));
    return m;
}

namespace detail {

struct KernelMapEntry {
    int out;  // row in output feature matrix
    int in;   // row in input feature matrix
    int tap;  // kernel tap, same convention as dense_conv3d
};

/// Kernel map for an (ordinary) sparse convolution: output actives are all
/// strided sites whose receptive field touches an input active site.
inline void build_sparse_kernel_map(const std::vector<std::array<int, 3>>& in_coords,
                                    const std::array<int, 3>& in_dims, int k, int stride,
                                    std::vector<std::array<int, 3>>& out_coords,
                                    std::array<int, 3>& out_dims,
                                    std::vector<KernelMapEntry>& entries) {
    const int p = k / 2;
    for (int a = 0; a < 3; ++a) out_dims[a] = conv_out_dim(in_dims[a], k, stride);

    // candidate (out coord -> entries)
    std::map<std::array<int, 3>, std::vector<std::pair<int, int>>> by_out;  // (in, tap)
    for (int ii = 0; ii < static_cast<int>(in_coords.size()); ++ii) {
        const auto& c = in_coords[static_cast<std::size_t>(ii)];
        // output o covers inputs o*stride - p + d for d in [0,k)
        for (int dx = 0; dx < k; ++dx) {
            const int nxs = c[0] + p - dx;
            if (nxs < 0 || nxs % stride != 0) continue;
            const int ox = nxs / stride;
            if (ox >= out_dims[0]) continue;
            for (int dy = 0; dy < k; ++dy) {
                const int nys = c[1] + p - dy;
                if (nys < 0 || nys % stride != 0) continue;
                const int oy = nys / stride;
                if (oy >= out_dims[1]) continue;
                for (int dz = 0; dz < k; ++dz) {
                    const int nzs = c[2] + p - dz;
                    if (nzs < 0 || nzs % stride != 0) continue;
                    const int oz = nzs / stride;
                    if (oz >= out_dims[2]) continue;
                    const int tap = (dx * k + dy) * k + dz;
                    by_out[{ox, oy, oz}].push_back({ii, tap});
                }
            }
        }
    }
    out_coords.clear();
    out_coords.reserve(by_out.size());
    entries.clear();
    for (const auto& [oc, pairs] : by_out) {
        const int oi = static_cast<int>(out_coords.size());
        out_coords.push_back(oc);
        for (const auto& [ii, tap] : pairs) entries.push_back({oi, ii, tap});
    }
    // fixed reduction order: by (out, tap, in)
    std::sort(entries.begin(), entries.end(), [](const KernelMapEntry& a, const KernelMapEntry& b) {
        if (a.out != b.out) return a.out < b.out;
        if (a.tap != b.tap) return a.tap < b.tap;
        return a.in < b.in;
    });
}

/// Shared forward/backward for sparse convolutions given a kernel map.
template <typename T>
int sparse_conv_apply(Tape<T>& t, int feat, int w, int b, int n_out,
                      std::vector<KernelMapEntry> entries) {
    const auto& nf = t.node(feat);
    const auto& nw = t.node(w);
    const auto& nb = t.node(b);
    const int cin = nf.dims[1];
    if (nw.dims.size() != 3 || nw.dims[1] != cin) throw_input("sparse conv: weight shape mismatch");
    const int cout = nw.dims[2];
    if (nb.dims.size() != 1 || nb.dims[0] != cout) throw_input("sparse conv: bias shape mismatch");

    std::vector<double> acc(static_cast<std::size_t>(n_out) * cout, 0.0);
    for (int oi = 0; oi < n_out; ++oi)
        for (int co = 0; co < cout; ++co)
            acc[static_cast<std::size_t>(oi) * cout + co] = static_cast<double>(nb.val[co]);
    for (const auto& e : entries) {
        const T* xrow = nf.val.data() + static_cast<std::size_t>(e.in) * cin;
        const T* wtap = nw.val.data() + static_cast<std::size_t>(e.tap) * cin * cout;
        double* arow = acc.data() + static_cast<std::size_t>(e.out) * cout;
        for (int ci = 0; ci < cin; ++ci) {
            const double xc = static_cast<double>(xrow[ci]);
            const T* wrow = wtap + static_cast<std::size_t>(ci) * cout;
            for (int co = 0; co < cout; ++co) arow[co] += xc * static_cast<double>(wrow[co]);
        }
    }
    std::vector<T> out(acc.size());
    for (std::size_t i = 0; i < acc.size(); ++i) out[i] = static_cast<T>(acc[i]);

    auto backward = [feat, w, b, entries = std::move(entries)](Tape<T>& tp, int self) {
        const auto& n = tp.node(self);
        auto& nf2 = tp.node(feat);
        auto& nw2 = tp.node(w);
        auto& nb2 = tp.node(b);
        const int cin = nf2.dims[1];
        const int cout = n.dims[1];
        std::vector<double> gx(nf2.val.size(), 0.0);
        std::vector<double> gw(nw2.val.size(), 0.0);
        std::vector<double> gb(nb2.val.size(), 0.0);
        const int n_out = n.dims[0];
        for (int oi = 0; oi < n_out; ++oi) {
            const T* grow = n.grad.data() + static_cast<std::size_t>(oi) * cout;
            for (int co = 0; co < cout; ++co) gb[co] += static_cast<double>(grow[co]);
        }
        for (const auto& e : entries) {
            const T* grow = n.grad.data() + static_cast<std::size_t>(e.out) * cout;
            const T* xrow = nf2.val.data() + static_cast<std::size_t>(e.in) * cin;
            const std::size_t wi = static_cast<std::size_t>(e.tap) * cin * cout;
            for (int ci = 0; ci < cin; ++ci) {
                const double xc = static_cast<double>(xrow[ci]);
                const T* wrow = nw2.val.data() + wi + static_cast<std::size_t>(ci) * cout;
                double* gwrow = gw.data() + wi + static_cast<std::size_t>(ci) * cout;
                double gxc = 0.0;
                for (int co = 0; co < cout; ++co) {
                    const double g = static_cast<double>(grow[co]);
                    gxc += g * static_cast<double>(wrow[co]);
                    gwrow[co] += g * xc;
                }
                gx[static_cast<std::size_t>(e.in) * cin + ci] += gxc;
            }
        }
        for (std::size_t i = 0; i < gx.size(); ++i) nf2.grad[i] += static_cast<T>(gx[i]);
        for (std::size_t i = 0; i < gw.size(); ++i) nw2.grad[i] += static_cast<T>(gw[i]);
        for (std::size_t i = 0; i < gb.size(); ++i) nb2.grad[i] += static_cast<T>(gb[i]);
    };
    return make_op<T>(t, {n_out, cout}, std::move(out), backward);
}

}  // namespace detail

/// Sparse convolution: the active set dilates to every strided site whose
/// receptive field intersects an input-active site; values equal the dense
/// convolution of the zero-embedded input restricted to that set.
template <typename T>
SparseMap<T> sparse_conv3d(Tape<T>& t, const SparseMap<T>& x, int w, int b, int k, int stride) {
    if (k % 2 == 0) throw_input("sparse_conv3d: kernel size must be odd");
    if (stride != 1 && stride != 2) throw_input("sparse_conv3d: stride must be 1 or 2");
    SparseMap<T> out;
    std::vector<detail::KernelMapEntry> entries;
    detail::build_sparse_kernel_map(x.coords, x.dims, k, stride, out.coords, out.dims, entries);
    out.feat = detail::sparse_conv_apply(t, x.feat, w, b, out.active_count(), std::move(entries));
    return out;
}

/// Submanifold convolution: stride 1, output active set == input active set,
/// inactive neighbors contribute nothing.
template <typename T>
SparseMap<T> submanifold_conv3d(Tape<T>& t, const SparseMap<T>& x, int w, int b, int k) {
    if (k % 2 == 0) throw_input("submanifold_conv3d: kernel size must be odd");
    const int p = k / 2;
    std::map<std::array<int, 3>, int> index;
    for (int i = 0; i < x.active_count(); ++i) index[x.coords[static_cast<std::size_t>(i)]] = i;
    std::vector<detail::KernelMapEntry> entries;
    for (int oi = 0; oi < x.active_count(); ++oi) {
        const auto& c = x.coords[static_cast<std::size_t>(oi)];
        for (int dx = 0; dx < k; ++dx)
            for (int dy = 0; dy < k; ++dy)
                for (int dz = 0; dz < k; ++dz) {
                    const std::array<int, 3> nb = {c[0] - p + dx, c[1] - p + dy, c[2] - p + dz};
                    if (nb[0] < 0 || nb[0] >= x.dims[0] || nb[1] < 0 || nb[1] >= x.dims[1] ||
                        nb[2] < 0 || nb[2] >= x.dims[2])
                        continue;
                    auto it = index.find(nb);
                    if (it == index.end()) continue;
                    entries.push_back({oi, it->second, (dx * k + dy) * k + dz});
                }
    }
    std::sort(entries.begin(), entries.end(),
              [](const detail::KernelMapEntry& a, const detail::KernelMapEntry& b) {
                  if (a.out != b.out) return a.out < b.out;
                  if (a.tap != b.tap) return a.tap < b.tap;
                  return a.in < b.in;
              });
    SparseMap<T> out;
    out.dims = x.dims;
    out.coords = x.coords;
    out.feat = detail::sparse_conv_apply(t, x.feat, w, b, out.active_count(), std::move(entries));
    return out;
}

/// Apply an elementwise tape op to the features, keeping the active set.
template <typename T, typename Fn>
SparseMap<T> sparse_map_features(const SparseMap<T>& x, Fn&& fn) {
    SparseMap<T> out;
    out.dims = x.dims;
    out.coords = x.coords;
    out.feat = fn(x.feat);
    return out;
}

/// Scatter a sparse map into a dense {nx,ny,nz,C} tensor (zeros elsewhere).
template <typename T>
int sparse_to_dense(Tape<T>& t, const SparseMap<T>& x) {
    const auto& nf = t.node(x.feat);
    const int nc = nf.dims[1];
    const std::vector<int> odims = {x.dims[0], x.dims[1], x.dims[2], nc};
    std::vector<T> out(Tape<T>::numel(odims), T(0));
    for (int i = 0; i < x.active_count(); ++i) {
        const auto& c = x.coords[static_cast<std::size_t>(i)];
        std::copy(nf.val.begin() + static_cast<std::size_t>(i) * nc,
                  nf.val.begin() + static_cast<std::size_t>(i + 1) * nc,
                  out.begin() + site_index(odims, c[0], c[1], c[2]) * nc);
    }
    const int feat = x.feat;
    const auto coords = x.coords;
    return make_op<T>(t, odims, std::move(out), [feat, coords](Tape<T>& tp, int self) {
        const auto& n = tp.node(self);
        auto& nf2 = tp.node(feat);
        const int nc = nf2.dims[1];
        for (int i = 0; i < static_cast<int>(coords.size()); ++i) {
            const auto& c = coords[static_cast<std::size_t>(i)];
            const T* g = n.grad.data() + site_index(n.dims, c[0], c[1], c[2]) * nc;
            T* dst = nf2.grad.data() + static_cast<std::size_t>(i) * nc;
            for (int ch = 0; ch < nc; ++ch) dst[ch] += g[ch];
        }
    });
}

/// Nearest-neighbor x2 upsampling of a sparse map: each active site expands
/// into its 8 children with copied features.
template <typename T>
SparseMap<T> sparse_upsample2(Tape<T>& t, const SparseMap<T>& x) {
    const auto& nf = t.node(x.feat);
    const int nc = nf.dims[1];
    SparseMap<T> out;
    out.dims = {x.dims[0] * 2, x.dims[1] * 2, x.dims[2] * 2};
    out.coords.reserve(x.coords.size() * 8);
    std::vector<int> parent;  // per output row
    parent.reserve(x.coords.size() * 8);
    // children of sorted parents enumerated in lexicographic order stay sorted
    for (int i = 0; i < x.active_count(); ++i) {
        const auto& c = x.coords[static_cast<std::size_t>(i)];
        for (int dx = 0; dx < 2; ++dx)
            for (int dy = 0; dy < 2; ++dy)
                for (int dz = 0; dz < 2; ++dz) {
                    out.coords.push_back({c[0] * 2 + dx, c[1] * 2 + dy, c[2] * 2 + dz});
                    parent.push_back(i);
                }
    }
    std::vector<std::size_t> order(out.coords.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return out.coords[a] < out.coords[b]; });
    std::vector<std::array<int, 3>> sorted_coords(out.coords.size());
    std::vector<int> sorted_parent(parent.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
        sorted_coords[i] = out.coords[order[i]];
        sorted_parent[i] = parent[order[i]];
    }
    out.coords = std::move(sorted_coords);

    std::vector<T> feat(out.coords.size() * static_cast<std::size_t>(nc));
    for (std::size_t i = 0; i < out.coords.size(); ++i)
        std::copy(nf.val.begin() + static_cast<std::size_t>(sorted_parent[i]) * nc,
                  nf.val.begin() + static_cast<std::size_t>(sorted_parent[i] + 1) * nc,
                  feat.begin() + i * nc);
    const int feat_in = x.feat;
    out.feat = make_op<T>(t, {static_cast<int>(out.coords.size()), nc}, std::move(feat),
                          [feat_in, sorted_parent](Tape<T>& tp, int self) {
                              const auto& n = tp.node(self);
                              auto& nf2 = tp.node(feat_in);
                              const int nc = nf2.dims[1];
                              for (std::size_t i = 0; i < sorted_parent.size(); ++i) {
                                  const T* g = n.grad.data() + i * nc;
                                  T* dst = nf2.grad.data() +
                                           static_cast<std::size_t>(sorted_parent[i]) * nc;
                                  for (int c = 0; c < nc; ++c) dst[c] += g[c];
                              }
                          });
    return out;
}

/// Channel concat on the union of two active sets (zero-filled where a side
/// is inactive).
template <typename T>
SparseMap<T> sparse_concat(Tape<T>& t, const SparseMap<T>& a, const SparseMap<T>& b) {
    if (a.dims != b.dims) throw_input("sparse_concat: lattice dims mismatch");
    const auto& na = t.node(a.feat);
    const auto& nb = t.node(b.feat);
    const int ca = na.dims[1], cb = nb.dims[1];

    SparseMap<T> out;
    out.dims = a.dims;
    std::vector<int> row_a, row_b;  // -1 when inactive
    {
        std::size_t i = 0, j = 0;
        while (i < a.coords.size() || j < b.coords.size()) {
            if (j >= b.coords.size() || (i < a.coords.size() && a.coords[i] < b.coords[j])) {
                out.coords.push_back(a.coords[i]);
                row_a.push_back(static_cast<int>(i));
                row_b.push_back(-1);
                ++i;
            } else if (i >= a.coords.size() || b.coords[j] < a.coords[i]) {
                out.coords.push_back(b.coords[j]);
                row_a.push_back(-1);
                row_b.push_back(static_cast<int>(j));
                ++j;
            } else {
                out.coords.push_back(a.coords[i]);
                row_a.push_back(static_cast<int>(i));
                row_b.push_back(static_cast<int>(j));
                ++i;
                ++j;
            }
        }
    }
    const int n = static_cast<int>(out.coords.size());
    std::vector<T> feat(static_cast<std::size_t>(n) * (ca + cb), T(0));
    for (int r = 0; r < n; ++r) {
        if (row_a[static_cast<std::size_t>(r)] >= 0)
            std::copy(na.val.begin() + static_cast<std::size_t>(row_a[r]) * ca,
                      na.val.begin() + static_cast<std::size_t>(row_a[r] + 1) * ca,
                      feat.begin() + static_cast<std::size_t>(r) * (ca + cb));
        if (row_b[static_cast<std::size_t>(r)] >= 0)
            std::copy(nb.val.begin() + static_cast<std::size_t>(row_b[r]) * cb,
                      nb.val.begin() + static_cast<std::size_t>(row_b[r] + 1) * cb,
                      feat.begin() + static_cast<std::size_t>(r) * (ca + cb) + ca);
    }
    const int fa = a.feat, fb = b.feat;
    out.feat = make_op<T>(t, {n, ca + cb}, std::move(feat),
                          [fa, fb, ca, cb, row_a, row_b](Tape<T>& tp, int self) {
                              const auto& g = tp.node(self).grad;
                              auto& ga = tp.node(fa).grad;
                              auto& gb = tp.node(fb).grad;
                              for (std::size_t r = 0; r < row_a.size(); ++r) {
                                  if (row_a[r] >= 0)
                                      for (int c = 0; c < ca; ++c)
                                          ga[static_cast<std::size_t>(row_a[r]) * ca + c] +=
                                              g[r * (ca + cb) + c];
                                  if (row_b[r] >= 0)
                                      for (int c = 0; c < cb; ++c)
                                          gb[static_cast<std::size_t>(row_b[r]) * cb + c] +=
                                              g[r * (ca + cb) + ca + c];
                              }
                          });
    return out;
}

}  // namespace l2rdas::ad
