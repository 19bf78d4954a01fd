#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "l2rdas/error.hpp"
#include "l2rdas/rng.hpp"

namespace l2rdas::ad {

/// Reverse-mode tape. Nodes are appended in topological order, so the
/// backward pass is a single reverse sweep that visits each node once.
/// Values are T (float for training, double for gradient checks); reductions
/// accumulate in double regardless of T.
template <typename T>
class Tape {
public:
    struct Node {
        std::vector<int> dims;
        std::vector<T> val;
        std::vector<T> grad;
        std::function<void(Tape&)> backward;  // empty for leaves
    };

    Node& node(int id) { return nodes_[static_cast<std::size_t>(id)]; }
    const Node& node(int id) const { return nodes_[static_cast<std::size_t>(id)]; }
    std::size_t size() const { return nodes_.size(); }

    static std::size_t numel(const std::vector<int>& dims) {
        std::size_t n = 1;
        for (int d : dims) n *= static_cast<std::size_t>(d);
        return n;
    }

    int add_node(std::vector<int> dims, std::vector<T> val) {
        Node n;
        n.dims = std::move(dims);
        if (val.size() != numel(n.dims)) throw_input("tape node: value size does not match dims");
        n.grad.assign(val.size(), T(0));
        n.val = std::move(val);
        nodes_.push_back(std::move(n));
        return static_cast<int>(nodes_.size()) - 1;
    }

    int leaf(std::vector<int> dims, std::vector<T> val) {
        return add_node(std::move(dims), std::move(val));
    }

    int scalar_leaf(T v) { return leaf({1}, {v}); }

    /// Accumulate dRoot/d(everything); root must be scalar. A second call
    /// without reset() is an error.
    void backward(int root) {
        if (backward_done_) throw_input("tape: backward called twice without reset");
        auto& r = node(root);
        if (r.val.size() != 1) throw_input("tape: backward root must be scalar");
        backward_done_ = true;
        r.grad[0] = T(1);
        for (int i = root; i >= 0; --i) {
            auto& n = nodes_[static_cast<std::size_t>(i)];
            if (n.backward) n.backward(*this);
        }
    }

    void reset() {
        nodes_.clear();
        backward_done_ = false;
    }

    bool backward_done() const { return backward_done_; }

private:
    std::vector<Node> nodes_;
    bool backward_done_ = false;
};

/// Create a node and attach a backward closure that receives the node's own
/// id (so it can read its output gradient from the tape).
template <typename T>
int make_op(Tape<T>& t, std::vector<int> dims, std::vector<T> val,
            std::function<void(Tape<T>&, int)> backward) {
    const int id = t.add_node(std::move(dims), std::move(val));
    if (backward)
        t.node(id).backward = [backward = std::move(backward), id](Tape<T>& tp) {
            backward(tp, id);
        };
    return id;
}

// ---------------------------------------------------------------------------
// Elementwise ops
// ---------------------------------------------------------------------------

template <typename T>
int add(Tape<T>& t, int a, int b) {
    const auto& na = t.node(a);
    const auto& nb = t.node(b);
    if (na.val.size() != nb.val.size()) throw_input("add: size mismatch");
    std::vector<T> out(na.val.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = na.val[i] + nb.val[i];
    return make_op<T>(t, na.dims, std::move(out), [a, b](Tape<T>& tp, int self) {
        const auto& g = tp.node(self).grad;
        auto& ga = tp.node(a).grad;
        auto& gb = tp.node(b).grad;
        for (std::size_t i = 0; i < g.size(); ++i) {
            ga[i] += g[i];
            gb[i] += g[i];
        }
    });
}

template <typename T>
int sub(Tape<T>& t, int a, int b) {
    const auto& na = t.node(a);
    const auto& nb = t.node(b);
    if (na.val.size() != nb.val.size()) throw_input("sub: size mismatch");
    std::vector<T> out(na.val.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = na.val[i] - nb.val[i];
    return make_op<T>(t, na.dims, std::move(out), [a, b](Tape<T>& tp, int self) {
        const auto& g = tp.node(self).grad;
        auto& ga = tp.node(a).grad;
        auto& gb = tp.node(b).grad;
        for (std::size_t i = 0; i < g.size(); ++i) {
            ga[i] += g[i];
            gb[i] -= g[i];
        }
    });
}

template <typename T>
int mul(Tape<T>& t, int a, int b) {
    const auto& na = t.node(a);
    const auto& nb = t.node(b);
    if (na.val.size() != nb.val.size()) throw_input("mul: size mismatch");
    std::vector<T> out(na.val.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = na.val[i] * nb.val[i];
    return make_op<T>(t, na.dims, std::move(out), [a, b](Tape<T>& tp, int self) {
        const auto& g = tp.node(self).grad;
        auto& nb2 = tp.node(b);
        auto& na2 = tp.node(a);
        for (std::size_t i = 0; i < g.size(); ++i) {
            na2.grad[i] += g[i] * nb2.val[i];
            nb2.grad[i] += g[i] * na2.val[i];
        }
    });
}

template <typename T>
int scale(Tape<T>& t, int a, double c) {
    const auto& na = t.node(a);
    std::vector<T> out(na.val.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<T>(na.val[i] * c);
    return make_op<T>(t, na.dims, std::move(out), [a, c](Tape<T>& tp, int self) {
        const auto& g = tp.node(self).grad;
        auto& ga = tp.node(a).grad;
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += static_cast<T>(g[i] * c);
    });
}

template <typename T>
int add_const(Tape<T>& t, int a, double c) {
    const auto& na = t.node(a);
    std::vector<T> out(na.val.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<T>(na.val[i] + c);
    return make_op<T>(t, na.dims, std::move(out), [a](Tape<T>& tp, int self) {
        const auto& g = tp.node(self).grad;
        auto& ga = tp.node(a).grad;
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    });
}

template <typename T>
int neg(Tape<T>& t, int a) {
    return scale(t, a, -1.0);
}

template <typename T>
int abs_op(Tape<T>& t, int a) {
    const auto& na = t.node(a);
    std::vector<T> out(na.val.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::abs(na.val[i]);
    return make_op<T>(t, na.dims, std::move(out), [a](Tape<T>& tp, int self) {
        const auto& g = tp.node(self).grad;
        auto& na2 = tp.node(a);
        for (std::size_t i = 0; i < g.size(); ++i)
            na2.grad[i] += na2.val[i] >= T(0) ? g[i] : -g[i];
    });
}

template <typename T>
int leaky_relu(Tape<T>& t, int a, double slope = 0.2) {
    const auto& na = t.node(a);
    std::vector<T> out(na.val.size());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = na.val[i] > T(0) ? na.val[i] : static_cast<T>(slope * na.val[i]);
    return make_op<T>(t, na.dims, std::move(out), [a, slope](Tape<T>& tp, int self) {
        const auto& g = tp.node(self).grad;
        auto& na2 = tp.node(a);
        for (std::size_t i = 0; i < g.size(); ++i)
            na2.grad[i] += na2.val[i] > T(0) ? g[i] : static_cast<T>(slope * g[i]);
    });
}

template <typename T>
int sigmoid(Tape<T>& t, int a) {
    const auto& na = t.node(a);
    std::vector<T> out(na.val.size());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = static_cast<T>(1.0 / (1.0 + std::exp(-static_cast<double>(na.val[i]))));
    return make_op<T>(t, na.dims, std::move(out), [a](Tape<T>& tp, int self) {
        const auto& n = tp.node(self);
        auto& ga = tp.node(a).grad;
        for (std::size_t i = 0; i < n.grad.size(); ++i) {
            const double s = static_cast<double>(n.val[i]);
            ga[i] += static_cast<T>(n.grad[i] * s * (1.0 - s));
        }
    });
}

/// log(max(x, eps)); gradient 0 in the clamped region.
template <typename T>
int log_clamped(Tape<T>& t, int a, double eps = 1e-12) {
    const auto& na = t.node(a);
    std::vector<T> out(na.val.size());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = static_cast<T>(std::log(std::max(static_cast<double>(na.val[i]), eps)));
    return make_op<T>(t, na.dims, std::move(out), [a, eps](Tape<T>& tp, int self) {
        const auto& g = tp.node(self).grad;
        auto& na2 = tp.node(a);
        for (std::size_t i = 0; i < g.size(); ++i) {
            const double x = static_cast<double>(na2.val[i]);
            if (x > eps) na2.grad[i] += static_cast<T>(g[i] / x);
        }
    });
}

/// Stop-gradient: copies values into a fresh leaf.
template <typename T>
int detach(Tape<T>& t, int a) {
    const auto& na = t.node(a);
    return t.leaf(na.dims, na.val);
}

// ---------------------------------------------------------------------------
// Reductions
// ---------------------------------------------------------------------------

template <typename T>
int mean_all(Tape<T>& t, int a) {
    const auto& na = t.node(a);
    double s = 0.0;
    for (const T& v : na.val) s += static_cast<double>(v);
    const double inv = 1.0 / static_cast<double>(na.val.size());
    return make_op<T>(t, {1}, {static_cast<T>(s * inv)}, [a, inv](Tape<T>& tp, int self) {
        const T g = tp.node(self).grad[0];
        auto& ga = tp.node(a).grad;
        for (auto& v : ga) v += static_cast<T>(static_cast<double>(g) * inv);
    });
}

// ---------------------------------------------------------------------------
// Spatial tensors: dims {nx, ny, nz, nc}, channel-last layout.
// Conv weights: dims {k^3, c_in, c_out}, tap index ((dx*k)+dy)*k+dz.
// ---------------------------------------------------------------------------

inline std::size_t site_index(const std::vector<int>& dims, int ix, int iy, int iz) {
    return (static_cast<std::size_t>(ix) * dims[1] + iy) * dims[2] + iz;
}

inline int conv_out_dim(int in, int k, int stride) {
    const int p = k / 2;
    return (in + 2 * p - k) / stride + 1;
}

/// Standard zero-padded cross-correlation; stride 1 or 2.
template <typename T>
int dense_conv3d(Tape<T>& t, int x, int w, int b, int k, int stride) {
    const auto& nx = t.node(x);
    const auto& nw = t.node(w);
    const auto& nb = t.node(b);
    if (nx.dims.size() != 4) throw_input("dense_conv3d: input must be 4-d");
    if (k % 2 == 0) throw_input("dense_conv3d: kernel size must be odd");
    if (stride != 1 && stride != 2) throw_input("dense_conv3d: stride must be 1 or 2");
    const int cin = nx.dims[3];
    if (nw.dims.size() != 3 || nw.dims[0] != k * k * k || nw.dims[1] != cin)
        throw_input("dense_conv3d: weight shape mismatch");
    const int cout = nw.dims[2];
    if (nb.dims.size() != 1 || nb.dims[0] != cout) throw_input("dense_conv3d: bias shape mismatch");
    const int p = k / 2;
    const std::vector<int> odims = {conv_out_dim(nx.dims[0], k, stride),
                                    conv_out_dim(nx.dims[1], k, stride),
                                    conv_out_dim(nx.dims[2], k, stride), cout};

    std::vector<T> out(Tape<T>::numel(odims));
    std::vector<double> acc(static_cast<std::size_t>(cout));
    const T* xv = nx.val.data();
    const T* wv = nw.val.data();
    for (int ox = 0; ox < odims[0]; ++ox)
        for (int oy = 0; oy < odims[1]; ++oy)
            for (int oz = 0; oz < odims[2]; ++oz) {
                for (int co = 0; co < cout; ++co) acc[co] = static_cast<double>(nb.val[co]);
                for (int dx = 0; dx < k; ++dx) {
                    const int ix = ox * stride - p + dx;
                    if (ix < 0 || ix >= nx.dims[0]) continue;
                    for (int dy = 0; dy < k; ++dy) {
                        const int iy = oy * stride - p + dy;
                        if (iy < 0 || iy >= nx.dims[1]) continue;
                        for (int dz = 0; dz < k; ++dz) {
                            const int iz = oz * stride - p + dz;
                            if (iz < 0 || iz >= nx.dims[2]) continue;
                            const int tap = (dx * k + dy) * k + dz;
                            const T* xrow = xv + site_index(nx.dims, ix, iy, iz) * cin;
                            const T* wtap = wv + static_cast<std::size_t>(tap) * cin * cout;
                            for (int ci = 0; ci < cin; ++ci) {
                                const double xc = static_cast<double>(xrow[ci]);
                                const T* wrow = wtap + static_cast<std::size_t>(ci) * cout;
                                for (int co = 0; co < cout; ++co)
                                    acc[co] += xc * static_cast<double>(wrow[co]);
                            }
                        }
                    }
                }
                T* orow = out.data() + site_index(odims, ox, oy, oz) * cout;
                for (int co = 0; co < cout; ++co) orow[co] = static_cast<T>(acc[co]);
            }

    auto backward = [x, w, b, k, stride](Tape<T>& tp, int self) {
        const auto& n = tp.node(self);
        auto& nx2 = tp.node(x);
        auto& nw2 = tp.node(w);
        auto& nb2 = tp.node(b);
        const int cin = nx2.dims[3];
        const int cout = n.dims[3];
        const int p = k / 2;
        std::vector<double> gx(nx2.val.size(), 0.0);
        std::vector<double> gw(nw2.val.size(), 0.0);
        std::vector<double> gb(nb2.val.size(), 0.0);
        const T* xv = nx2.val.data();
        const T* wv = nw2.val.data();
        const T* gv = n.grad.data();
        for (int ox = 0; ox < n.dims[0]; ++ox)
            for (int oy = 0; oy < n.dims[1]; ++oy)
                for (int oz = 0; oz < n.dims[2]; ++oz) {
                    const T* grow = gv + site_index(n.dims, ox, oy, oz) * cout;
                    for (int co = 0; co < cout; ++co) gb[co] += static_cast<double>(grow[co]);
                    for (int dx = 0; dx < k; ++dx) {
                        const int ix = ox * stride - p + dx;
                        if (ix < 0 || ix >= nx2.dims[0]) continue;
                        for (int dy = 0; dy < k; ++dy) {
                            const int iy = oy * stride - p + dy;
                            if (iy < 0 || iy >= nx2.dims[1]) continue;
                            for (int dz = 0; dz < k; ++dz) {
                                const int iz = oz * stride - p + dz;
                                if (iz < 0 || iz >= nx2.dims[2]) continue;
                                const int tap = (dx * k + dy) * k + dz;
                                const std::size_t xi = site_index(nx2.dims, ix, iy, iz) * cin;
                                const std::size_t wi =
                                    static_cast<std::size_t>(tap) * cin * cout;
                                for (int ci = 0; ci < cin; ++ci) {
                                    const double xc = static_cast<double>(xv[xi + ci]);
                                    double gxc = 0.0;
                                    const T* wrow = wv + wi + static_cast<std::size_t>(ci) * cout;
                                    double* gwrow = gw.data() + wi + static_cast<std::size_t>(ci) * cout;
                                    for (int co = 0; co < cout; ++co) {
                                        const double g = static_cast<double>(grow[co]);
                                        gxc += g * static_cast<double>(wrow[co]);
                                        gwrow[co] += g * xc;
                                    }
                                    gx[xi + ci] += gxc;
                                }
                            }
                        }
                    }
                }
        for (std::size_t i = 0; i < gx.size(); ++i) nx2.grad[i] += static_cast<T>(gx[i]);
        for (std::size_t i = 0; i < gw.size(); ++i) nw2.grad[i] += static_cast<T>(gw[i]);
        for (std::size_t i = 0; i < gb.size(); ++i) nb2.grad[i] += static_cast<T>(gb[i]);
    };
    return make_op<T>(t, odims, std::move(out), backward);
}

/// Nearest-neighbor spatial upsampling by an integer factor.
template <typename T>
int nearest_upsample3d(Tape<T>& t, int x, int factor = 2) {
    const auto& nx = t.node(x);
    if (nx.dims.size() != 4) throw_input("nearest_upsample3d: input must be 4-d");
    if (factor < 1) throw_input("nearest_upsample3d: factor must be >= 1");
    const int nc = nx.dims[3];
    const std::vector<int> odims = {nx.dims[0] * factor, nx.dims[1] * factor,
                                    nx.dims[2] * factor, nc};
    std::vector<T> out(Tape<T>::numel(odims));
    for (int ox = 0; ox < odims[0]; ++ox)
        for (int oy = 0; oy < odims[1]; ++oy)
            for (int oz = 0; oz < odims[2]; ++oz) {
                const T* src =
                    nx.val.data() +
                    site_index(nx.dims, ox / factor, oy / factor, oz / factor) * nc;
                T* dst = out.data() + site_index(odims, ox, oy, oz) * nc;
                std::copy(src, src + nc, dst);
            }
    return make_op<T>(t, odims, std::move(out), [x, factor](Tape<T>& tp, int self) {
        const auto& n = tp.node(self);
        auto& nx2 = tp.node(x);
        const int nc = nx2.dims[3];
        for (int ox = 0; ox < n.dims[0]; ++ox)
            for (int oy = 0; oy < n.dims[1]; ++oy)
                for (int oz = 0; oz < n.dims[2]; ++oz) {
                    const T* g = n.grad.data() + site_index(n.dims, ox, oy, oz) * nc;
                    T* dst = nx2.grad.data() +
                             site_index(nx2.dims, ox / factor, oy / factor, oz / factor) * nc;
                    for (int c = 0; c < nc; ++c) dst[c] += g[c];
                }
    });
}

/// Nearest-neighbor x2 upsample followed by a stride-1 convolution.
template <typename T>
int upsample_conv3d(Tape<T>& t, int x, int w, int b, int k, int factor = 2) {
    return dense_conv3d(t, nearest_upsample3d(t, x, factor), w, b, k, 1);
}

/// Average pooling with cube window == stride; trailing remainder sites are
/// dropped (floor semantics).
template <typename T>
int avg_pool3d(Tape<T>& t, int x, int window = 2) {
    const auto& nx = t.node(x);
    if (nx.dims.size() != 4) throw_input("avg_pool3d: input must be 4-d");
    const int nc = nx.dims[3];
    const std::vector<int> odims = {std::max(1, nx.dims[0] / window),
                                    std::max(1, nx.dims[1] / window),
                                    std::max(1, nx.dims[2] / window), nc};
    const double inv = 1.0 / (static_cast<double>(window) * window * window);
    std::vector<T> out(Tape<T>::numel(odims));
    std::vector<double> acc(static_cast<std::size_t>(nc));
    for (int ox = 0; ox < odims[0]; ++ox)
        for (int oy = 0; oy < odims[1]; ++oy)
            for (int oz = 0; oz < odims[2]; ++oz) {
                std::fill(acc.begin(), acc.end(), 0.0);
                for (int dx = 0; dx < window; ++dx)
                    for (int dy = 0; dy < window; ++dy)
                        for (int dz = 0; dz < window; ++dz) {
                            const int ix = std::min(ox * window + dx, nx.dims[0] - 1);
                            const int iy = std::min(oy * window + dy, nx.dims[1] - 1);
                            const int iz = std::min(oz * window + dz, nx.dims[2] - 1);
                            const T* src = nx.val.data() + site_index(nx.dims, ix, iy, iz) * nc;
                            for (int c = 0; c < nc; ++c) acc[c] += static_cast<double>(src[c]);
                        }
                T* dst = out.data() + site_index(odims, ox, oy, oz) * nc;
                for (int c = 0; c < nc; ++c) dst[c] = static_cast<T>(acc[c] * inv);
            }
    return make_op<T>(t, odims, std::move(out), [x, window, inv](Tape<T>& tp, int self) {
        const auto& n = tp.node(self);
        auto& nx2 = tp.node(x);
        const int nc = nx2.dims[3];
        for (int ox = 0; ox < n.dims[0]; ++ox)
            for (int oy = 0; oy < n.dims[1]; ++oy)
                for (int oz = 0; oz < n.dims[2]; ++oz) {
                    const T* g = n.grad.data() + site_index(n.dims, ox, oy, oz) * nc;
                    for (int dx = 0; dx < window; ++dx)
                        for (int dy = 0; dy < window; ++dy)
                            for (int dz = 0; dz < window; ++dz) {
                                const int ix = std::min(ox * window + dx, nx2.dims[0] - 1);
                                const int iy = std::min(oy * window + dy, nx2.dims[1] - 1);
                                const int iz = std::min(oz * window + dz, nx2.dims[2] - 1);
                                T* dst =
                                    nx2.grad.data() + site_index(nx2.dims, ix, iy, iz) * nc;
                                for (int c = 0; c < nc; ++c)
                                    dst[c] += static_cast<T>(static_cast<double>(g[c]) * inv);
                            }
                }
    });
}

/// Channel-axis concatenation of two tensors with identical spatial dims.
template <typename T>
int concat_channels(Tape<T>& t, int a, int b) {
    const auto& na = t.node(a);
    const auto& nb = t.node(b);
    if (na.dims.size() != 4 || nb.dims.size() != 4) throw_input("concat: inputs must be 4-d");
    for (int i = 0; i < 3; ++i)
        if (na.dims[i] != nb.dims[i]) throw_input("concat: spatial dims mismatch");
    const int ca = na.dims[3], cb = nb.dims[3];
    const std::vector<int> odims = {na.dims[0], na.dims[1], na.dims[2], ca + cb};
    std::vector<T> out(Tape<T>::numel(odims));
    const std::size_t sites =
        static_cast<std::size_t>(na.dims[0]) * na.dims[1] * na.dims[2];
    for (std::size_t s = 0; s < sites; ++s) {
        std::copy(na.val.begin() + s * ca, na.val.begin() + (s + 1) * ca,
                  out.begin() + s * (ca + cb));
        std::copy(nb.val.begin() + s * cb, nb.val.begin() + (s + 1) * cb,
                  out.begin() + s * (ca + cb) + ca);
    }
    return make_op<T>(t, odims, std::move(out), [a, b, ca, cb, sites](Tape<T>& tp, int self) {
        const auto& g = tp.node(self).grad;
        auto& ga = tp.node(a).grad;
        auto& gb = tp.node(b).grad;
        for (std::size_t s = 0; s < sites; ++s) {
            for (int c = 0; c < ca; ++c) ga[s * ca + c] += g[s * (ca + cb) + c];
            for (int c = 0; c < cb; ++c) gb[s * cb + c] += g[s * (ca + cb) + ca + c];
        }
    });
}

// ---------------------------------------------------------------------------
// Parameters and Adam
// ---------------------------------------------------------------------------

template <typename T>
struct Parameter {
    std::string name;
    std::vector<int> dims;
    std::vector<T> value;
    std::vector<T> grad;
    std::vector<T> adam_m;
    std::vector<T> adam_v;
};

template <typename T>
struct ParamStore {
    std::vector<Parameter<T>> params;
    std::uint64_t adam_t = 0;

    Parameter<T>& add(std::string name, std::vector<int> dims, std::vector<T> value) {
        Parameter<T> p;
        p.name = std::move(name);
        p.dims = std::move(dims);
        if (value.size() != Tape<T>::numel(p.dims))
            throw_input("parameter size does not match dims");
        p.grad.assign(value.size(), T(0));
        p.adam_m.assign(value.size(), T(0));
        p.adam_v.assign(value.size(), T(0));
        p.value = std::move(value);
        params.push_back(std::move(p));
        return params.back();
    }

    Parameter<T>* find(const std::string& name) {
        for (auto& p : params)
            if (p.name == name) return &p;
        return nullptr;
    }

    void zero_grads() {
        for (auto& p : params) std::fill(p.grad.begin(), p.grad.end(), T(0));
    }

    std::size_t total_size() const {
        std::size_t n = 0;
        for (const auto& p : params) n += p.value.size();
        return n;
    }
};

struct AdamConfig {
    double lr = 0.001;
    double beta1 = 0.5;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Bias-corrected Adam update from the currently-accumulated gradients.
template <typename T>
void adam_step(ParamStore<T>& store, const AdamConfig& cfg) {
    store.adam_t += 1;
    const double b1t = 1.0 - std::pow(cfg.beta1, static_cast<double>(store.adam_t));
    const double b2t = 1.0 - std::pow(cfg.beta2, static_cast<double>(store.adam_t));
    for (auto& p : store.params) {
        for (std::size_t i = 0; i < p.value.size(); ++i) {
            const double g = static_cast<double>(p.grad[i]);
            const double m = cfg.beta1 * static_cast<double>(p.adam_m[i]) + (1.0 - cfg.beta1) * g;
            const double v =
                cfg.beta2 * static_cast<double>(p.adam_v[i]) + (1.0 - cfg.beta2) * g * g;
            p.adam_m[i] = static_cast<T>(m);
            p.adam_v[i] = static_cast<T>(v);
            const double mhat = m / b1t;
            const double vhat = v / b2t;
            p.value[i] =
                static_cast<T>(static_cast<double>(p.value[i]) - cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps));
        }
    }
}

/// Tracks which tape leaves mirror which parameters during one graph build,
/// so gradients can be copied back after backward().
template <typename T>
struct GraphBinding {
    std::vector<std::pair<int, Parameter<T>*>> entries;

    int bind(Tape<T>& t, Parameter<T>& p) {
        const int id = t.leaf(p.dims, p.value);
        entries.push_back({id, &p});
        return id;
    }

    void collect(Tape<T>& t) {
        for (auto& [id, p] : entries) {
            const auto& g = t.node(id).grad;
            for (std::size_t i = 0; i < g.size(); ++i) p->grad[i] += g[i];
        }
    }
};

/// He-style normal init for a conv weight tensor {k^3, cin, cout}.
template <typename T>
std::vector<T> init_conv_weights(int k3, int cin, int cout, Rng& rng) {
    const double std_dev = std::sqrt(2.0 / (static_cast<double>(k3) * cin));
    std::vector<T> w(static_cast<std::size_t>(k3) * cin * cout);
    for (auto& v : w) v = static_cast<T>(rng.normal(0.0, std_dev));
    return w;
}

/// Small nonzero bias init. Exactly-zero biases would park dead sites (all
/// zero receptive fields) precisely on the leaky-relu kink, which breaks
/// finite-difference verification of otherwise-correct gradients.
template <typename T>
std::vector<T> init_bias(int cout, Rng& rng) {
    std::vector<T> b(static_cast<std::size_t>(cout));
    for (auto& v : b) v = static_cast<T>(rng.normal(0.0, 0.01));
    return b;
}

}  // namespace l2rdas::ad
