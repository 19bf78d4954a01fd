#pragma once

#include <string>
#include <utility>
#include <vector>

#include "l2rdas/autodiff.hpp"
#include "l2rdas/io.hpp"

namespace l2rdas {

/// CKP1: named-parameter tables (values + Adam moments) for a set of labeled
/// stores ("G", "D"); round-trips bit exactly.
inline void write_ckp1(const std::string& path,
                       const std::vector<std::pair<std::string, const ad::ParamStore<float>*>>& stores) {
    detail::BinWriter w(path);
    w.magic("CKP1");
    w.u32(1);
    w.u32(static_cast<std::uint32_t>(stores.size()));
    for (const auto& [label, store] : stores) {
        w.str(label);
        w.u64(store->adam_t);
        w.u32(static_cast<std::uint32_t>(store->params.size()));
        for (const auto& p : store->params) {
            w.str(p.name);
            w.u32(static_cast<std::uint32_t>(p.dims.size()));
            for (int d : p.dims) w.u32(static_cast<std::uint32_t>(d));
            w.u64(p.value.size());
            w.f32_array(p.value);
            w.f32_array(p.adam_m);
            w.f32_array(p.adam_v);
        }
    }
}

inline std::vector<std::pair<std::string, ad::ParamStore<float>>> read_ckp1(
    const std::string& path) {
    detail::BinReader r(path);
    r.expect_magic("CKP1");
    if (r.u32() != 1) throw_format("unsupported CKP1 version", path, r.offset() - 4);
    const std::uint32_t n_stores = r.u32();
    if (n_stores > 16) throw_format("store count out of range", path, r.offset() - 4);
    std::vector<std::pair<std::string, ad::ParamStore<float>>> out;
    for (std::uint32_t s = 0; s < n_stores; ++s) {
        std::string label = r.str();
        ad::ParamStore<float> store;
        store.adam_t = r.u64();
        const std::uint32_t n_params = r.u32();
        for (std::uint32_t i = 0; i < n_params; ++i) {
            ad::Parameter<float> p;
            p.name = r.str();
            const std::uint32_t ndims = r.u32();
            if (ndims == 0 || ndims > 8) throw_format("bad dim count", path, r.offset() - 4);
            std::size_t numel = 1;
            for (std::uint32_t d = 0; d < ndims; ++d) {
                p.dims.push_back(static_cast<int>(r.u32()));
                if (p.dims.back() <= 0) throw_format("bad dim", path, r.offset() - 4);
                numel *= static_cast<std::size_t>(p.dims.back());
            }
            const std::uint64_t stored = r.u64();
            if (stored != numel) throw_format("element count mismatch", path, r.offset() - 8);
            p.value.resize(numel);
            p.adam_m.resize(numel);
            p.adam_v.resize(numel);
            p.grad.assign(numel, 0.0f);
            r.bytes(p.value.data(), numel * 4);
            r.bytes(p.adam_m.data(), numel * 4);
            r.bytes(p.adam_v.data(), numel * 4);
            store.params.push_back(std::move(p));
        }
        out.emplace_back(std::move(label), std::move(store));
    }
    r.expect_eof();
    return out;
}

/// Copy values/Adam state from a loaded store into an existing one; names,
/// shapes, and order must match the architecture that created it.
inline void restore_store(ad::ParamStore<float>& dst, const ad::ParamStore<float>& src) {
    if (dst.params.size() != src.params.size())
        throw_input("checkpoint restore: parameter count mismatch");
    for (std::size_t i = 0; i < dst.params.size(); ++i) {
        auto& d = dst.params[i];
        const auto& s = src.params[i];
        if (d.name != s.name || d.dims != s.dims)
            throw_input("checkpoint restore: parameter '" + d.name + "' mismatch");
        d.value = s.value;
        d.adam_m = s.adam_m;
        d.adam_v = s.adam_v;
    }
    dst.adam_t = src.adam_t;
}

}  // namespace l2rdas
