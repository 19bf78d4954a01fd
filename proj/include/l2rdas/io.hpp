#pragma once

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "l2rdas/error.hpp"
#include "l2rdas/grid.hpp"

namespace l2rdas {

static_assert(std::endian::native == std::endian::little,
              "file formats are little-endian; big-endian hosts are unsupported");

namespace detail {

class BinWriter {
public:
    explicit BinWriter(const std::string& path) : path_(path), out_(path, std::ios::binary) {
        if (!out_) throw Error(ErrorKind::io, "cannot open for writing: " + path);
    }

    void bytes(const void* p, std::size_t n) {
        out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
        if (!out_) throw Error(ErrorKind::io, "write failed: " + path_);
    }
    void u8(std::uint8_t v) { bytes(&v, 1); }
    void u32(std::uint32_t v) { bytes(&v, 4); }
    void u64(std::uint64_t v) { bytes(&v, 8); }
    void f32(float v) { bytes(&v, 4); }
    void magic(const char m[4]) { bytes(m, 4); }
    void str(const std::string& s) {
        u32(static_cast<std::uint32_t>(s.size()));
        bytes(s.data(), s.size());
    }
    void f32_array(const std::vector<float>& v) { bytes(v.data(), v.size() * 4); }

private:
    std::string path_;
    std::ofstream out_;
};

class BinReader {
public:
    explicit BinReader(const std::string& path) : path_(path), in_(path, std::ios::binary) {
        if (!in_) throw Error(ErrorKind::io, "cannot open for reading: " + path);
    }

    void bytes(void* p, std::size_t n) {
        in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
        if (in_.gcount() != static_cast<std::streamsize>(n))
            throw_format("unexpected end of file", path_, offset_);
        offset_ += n;
    }
    std::uint8_t u8() {
        std::uint8_t v;
        bytes(&v, 1);
        return v;
    }
    std::uint32_t u32() {
        std::uint32_t v;
        bytes(&v, 4);
        return v;
    }
    std::uint64_t u64() {
        std::uint64_t v;
        bytes(&v, 8);
        return v;
    }
    float f32() {
        float v;
        bytes(&v, 4);
        return v;
    }
    void expect_magic(const char m[4]) {
        char buf[4];
        bytes(buf, 4);
        if (std::memcmp(buf, m, 4) != 0)
            throw_format(std::string("bad magic, expected ") + std::string(m, 4), path_,
                         offset_ - 4);
    }
    std::string str(std::size_t max_len = 1 << 20) {
        const std::uint32_t n = u32();
        if (n > max_len) throw_format("string length out of range", path_, offset_ - 4);
        std::string s(n, '\0');
        bytes(s.data(), n);
        return s;
    }
    void expect_eof() {
        char c;
        in_.read(&c, 1);
        if (!in_.eof()) throw_format("trailing bytes after payload", path_, offset_);
    }

    std::uint64_t offset() const { return offset_; }
    const std::string& path() const { return path_; }

private:
    std::string path_;
    std::ifstream in_;
    std::uint64_t offset_ = 0;
};

}  // namespace detail

// ---------------------------------------------------------------------------
// RDT1: dense radar tensor
// ---------------------------------------------------------------------------

inline void write_rdt1(const std::string& path, const DenseGrid3D& g) {
    detail::BinWriter w(path);
    w.magic("RDT1");
    w.u32(1);
    w.u8(static_cast<std::uint8_t>(g.scale_domain));
    for (int a = 0; a < 3; ++a) w.u32(static_cast<std::uint32_t>(g.dims[a]));
    w.f32(static_cast<float>(g.origin.x));
    w.f32(static_cast<float>(g.origin.y));
    w.f32(static_cast<float>(g.origin.z));
    w.f32(static_cast<float>(g.resolution));
    std::vector<float> payload(g.values.size());
    for (std::size_t i = 0; i < g.values.size(); ++i) payload[i] = static_cast<float>(g.values[i]);
    w.f32_array(payload);
}

inline DenseGrid3D read_rdt1(const std::string& path) {
    detail::BinReader r(path);
    r.expect_magic("RDT1");
    const std::uint32_t version = r.u32();
    if (version != 1) throw_format("unsupported RDT1 version", path, r.offset() - 4);
    const std::uint8_t domain = r.u8();
    if (domain > 1) throw_format("invalid scale_domain", path, r.offset() - 1);
    DenseGrid3D g;
    g.scale_domain = static_cast<ScaleDomain>(domain);
    for (int a = 0; a < 3; ++a) {
        g.dims[a] = static_cast<int>(r.u32());
        if (g.dims[a] <= 0 || g.dims[a] > (1 << 16))
            throw_format("dims out of range", path, r.offset() - 4);
    }
    g.origin.x = r.f32();
    g.origin.y = r.f32();
    g.origin.z = r.f32();
    g.resolution = r.f32();
    if (!(g.resolution > 0)) throw_format("resolution must be > 0", path, r.offset() - 4);
    const std::size_t n = static_cast<std::size_t>(g.dims[0]) * g.dims[1] * g.dims[2];
    g.values.resize(n);
    std::vector<float> payload(n);
    r.bytes(payload.data(), n * 4);
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(payload[i])) throw_format("non-finite value", path, r.offset());
        g.values[i] = payload[i];
    }
    r.expect_eof();
    return g;
}

// ---------------------------------------------------------------------------
// LPC1: point cloud. Row channels are x,y,z,intensity followed by the aux
// channels; the name table covers all row channels.
// ---------------------------------------------------------------------------

inline void write_lpc1(const std::string& path, const PointCloud& pc) {
    pc.validate();
    detail::BinWriter w(path);
    w.magic("LPC1");
    w.u64(pc.points.size());
    const std::uint32_t nc = 4 + static_cast<std::uint32_t>(pc.channel_schema.size());
    w.u32(nc);
    w.str("x");
    w.str("y");
    w.str("z");
    w.str("intensity");
    for (const auto& n : pc.channel_schema) w.str(n);
    std::vector<float> row(nc);
    for (const auto& p : pc.points) {
        row[0] = static_cast<float>(p.pos.x);
        row[1] = static_cast<float>(p.pos.y);
        row[2] = static_cast<float>(p.pos.z);
        row[3] = static_cast<float>(p.intensity);
        for (std::size_t c = 0; c < p.aux.size(); ++c) row[4 + c] = static_cast<float>(p.aux[c]);
        w.f32_array(row);
    }
}

inline PointCloud read_lpc1(const std::string& path) {
    detail::BinReader r(path);
    r.expect_magic("LPC1");
    const std::uint64_t count = r.u64();
    const std::uint32_t nc = r.u32();
    if (nc < 4 || nc > 4096) throw_format("channel count out of range", path, r.offset() - 4);
    const char* fixed[4] = {"x", "y", "z", "intensity"};
    for (int i = 0; i < 4; ++i) {
        const std::string name = r.str();
        if (name != fixed[i])
            throw_format("unexpected channel name '" + name + "'", path, r.offset());
    }
    PointCloud pc;
    for (std::uint32_t c = 4; c < nc; ++c) pc.channel_schema.push_back(r.str());
    pc.points.reserve(count);
    std::vector<float> row(nc);
    for (std::uint64_t i = 0; i < count; ++i) {
        r.bytes(row.data(), static_cast<std::size_t>(nc) * 4);
        Point p;
        p.pos = {row[0], row[1], row[2]};
        p.intensity = row[3];
        p.aux.assign(row.begin() + 4, row.end());
        if (!p.pos.finite() || !std::isfinite(p.intensity))
            throw_format("non-finite point", path, r.offset());
        pc.points.push_back(std::move(p));
    }
    r.expect_eof();
    return pc;
}

// ---------------------------------------------------------------------------
// Box annotations: one JSON object per line.
// ---------------------------------------------------------------------------

inline nlohmann::json box_to_json(const Box3D& b) {
    return nlohmann::json{{"center", {b.center.x, b.center.y, b.center.z}},
                          {"dims", {b.dims.x, b.dims.y, b.dims.z}},
                          {"yaw", b.yaw},
                          {"class", b.cls}};
}

inline Box3D box_from_json(const nlohmann::json& j) {
    Box3D b;
    try {
        const auto& c = j.at("center");
        const auto& d = j.at("dims");
        b.center = {c.at(0).get<double>(), c.at(1).get<double>(), c.at(2).get<double>()};
        b.dims = {d.at(0).get<double>(), d.at(1).get<double>(), d.at(2).get<double>()};
        b.yaw = j.at("yaw").get<double>();
        b.cls = j.at("class").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::format, std::string("bad box record: ") + e.what());
    }
    b.validate();
    return b;
}

inline void write_boxes_jsonl(const std::string& path, const std::vector<Box3D>& boxes) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::io, "cannot open for writing: " + path);
    for (const auto& b : boxes) out << box_to_json(b).dump() << "\n";
}

inline std::vector<Box3D> read_boxes_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::io, "cannot open for reading: " + path);
    std::vector<Box3D> boxes;
    std::string line;
    std::uint64_t offset = 0;
    while (std::getline(in, line)) {
        if (!line.empty()) {
            nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
            if (j.is_discarded()) throw_format("invalid JSON line", path, offset);
            try {
                boxes.push_back(box_from_json(j));
            } catch (const Error& e) {
                throw_format(e.what(), path, offset);
            }
        }
        offset += line.size() + 1;
    }
    return boxes;
}

// ---------------------------------------------------------------------------
// Dataset manifest: JSON lines {lidar, radar, boxes, split}.
// ---------------------------------------------------------------------------

struct ManifestEntry {
    std::string lidar;
    std::string radar;
    std::string boxes;
    std::string split;  // "train" | "val" | ...
};

inline void write_manifest(const std::string& path, const std::vector<ManifestEntry>& entries) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::io, "cannot open for writing: " + path);
    for (const auto& e : entries) {
        nlohmann::json j{{"lidar", e.lidar}, {"radar", e.radar}, {"boxes", e.boxes},
                         {"split", e.split}};
        out << j.dump() << "\n";
    }
}

inline std::vector<ManifestEntry> read_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::io, "cannot open for reading: " + path);
    std::vector<ManifestEntry> entries;
    std::string line;
    std::uint64_t offset = 0;
    while (std::getline(in, line)) {
        if (!line.empty()) {
            nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
            if (j.is_discarded()) throw_format("invalid JSON line", path, offset);
            ManifestEntry e;
            try {
                e.lidar = j.at("lidar").get<std::string>();
                e.radar = j.at("radar").get<std::string>();
                e.boxes = j.at("boxes").get<std::string>();
                e.split = j.at("split").get<std::string>();
            } catch (const nlohmann::json::exception& ex) {
                throw_format(std::string("bad manifest record: ") + ex.what(), path, offset);
            }
            entries.push_back(std::move(e));
        }
        offset += line.size() + 1;
    }
    return entries;
}

/// FNV-1a 64-bit of a file's bytes, as 16 hex digits (used for artifact
/// hashes in run logs).
inline std::string file_hash_hex(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::io, "cannot open for hashing: " + path);
    std::uint64_t h = 1469598103934665603ull;
    char buf[4096];
    while (in) {
        in.read(buf, sizeof(buf));
        const std::streamsize n = in.gcount();
        for (std::streamsize i = 0; i < n; ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 1099511628211ull;
        }
    }
    char hex[17];
    std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(h));
    return std::string(hex);
}

}  // namespace l2rdas
