#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>

#include "l2rdas/error.hpp"
#include "l2rdas/grid.hpp"

namespace l2rdas {

/// Standard 4-segment piecewise-linear jet colormap over [0,1]:
///   r(v) = clamp(1.5 - 4*|v - 0.75|)
///   g(v) = clamp(1.5 - 4*|v - 0.50|)
///   b(v) = clamp(1.5 - 4*|v - 0.25|)
/// so v=0 -> (0, 0, 128), v=1 -> (128, 0, 0) after byte quantization
/// round(255 * channel).
inline std::array<std::uint8_t, 3> jet_rgb(double v) {
    v = std::clamp(v, 0.0, 1.0);
    auto channel = [](double x) { return std::clamp(x, 0.0, 1.0); };
    const double r = channel(1.5 - 4.0 * std::abs(v - 0.75));
    const double g = channel(1.5 - 4.0 * std::abs(v - 0.50));
    const double b = channel(1.5 - 4.0 * std::abs(v - 0.25));
    return {static_cast<std::uint8_t>(std::lround(255.0 * r)),
            static_cast<std::uint8_t>(std::lround(255.0 * g)),
            static_cast<std::uint8_t>(std::lround(255.0 * b))};
}

/// Render a BEV matrix (values clamped to [0,1]) as a binary PPM (P6).
/// Rows are x indices top to bottom, columns are y indices left to right.
inline void bev_render(const Mat2D& m, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::io, "cannot open for writing: " + path);
    out << "P6\n" << m.ny << " " << m.nx << "\n255\n";
    for (int ix = 0; ix < m.nx; ++ix)
        for (int iy = 0; iy < m.ny; ++iy) {
            const auto rgb = jet_rgb(m.at(ix, iy));
            out.write(reinterpret_cast<const char*>(rgb.data()), 3);
        }
    if (!out) throw Error(ErrorKind::io, "write failed: " + path);
}

}  // namespace l2rdas
