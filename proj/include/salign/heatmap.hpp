#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include "salign/error.hpp"

namespace salign {

// 2-D scalar field, row-major. Values are real so intermediate results keep
// sub-integer precision; quantization happens only on save. Non-negative by
// convention except for subtraction output, which may be signed until clipped.
struct Heatmap {
    int width = 0;
    int height = 0;
    std::vector<double> values;  // size == width * height

    Heatmap() = default;
    Heatmap(int w, int h) : width(w), height(h), values(static_cast<size_t>(w) * h, 0.0) {
        if (w <= 0 || h <= 0) throw DataError("heatmap dimensions must be positive");
    }
    Heatmap(int w, int h, std::vector<double> v) : width(w), height(h), values(std::move(v)) {
        if (w <= 0 || h <= 0) throw DataError("heatmap dimensions must be positive");
        if (values.size() != static_cast<size_t>(w) * h)
            throw DataError("heatmap value count does not match dimensions");
    }

    double& at(int x, int y) { return values[static_cast<size_t>(y) * width + x]; }
    double at(int x, int y) const { return values[static_cast<size_t>(y) * width + x]; }
    size_t size() const { return values.size(); }

    bool same_shape(const Heatmap& o) const { return width == o.width && height == o.height; }
};

inline double max_value(const Heatmap& hm) {
    double m = 0.0;
    for (double v : hm.values) m = std::max(m, v);
    return m;
}

inline double total_mass(const Heatmap& hm) {
    double s = 0.0;
    for (double v : hm.values) s += v;
    return s;
}

// Scales so the maximum becomes 255; an all-zero map stays all-zero.
inline Heatmap normalize_max(const Heatmap& hm) {
    for (double v : hm.values)
        if (v < 0.0) throw DataError("normalize_max requires non-negative values");
    double m = max_value(hm);
    Heatmap out = hm;
    if (m > 0.0)
        for (double& v : out.values) v = v / m * 255.0;
    return out;
}

inline Heatmap clip(const Heatmap& hm, double lo, double hi) {
    if (lo >= hi) throw DataError("clip requires lo < hi");
    Heatmap out = hm;
    for (double& v : out.values) v = std::min(hi, std::max(lo, v));
    return out;
}

// Elementwise a - b; the result may be signed.
inline Heatmap subtract(const Heatmap& a, const Heatmap& b) {
    if (!a.same_shape(b)) throw DataError("subtract: dimension mismatch");
    Heatmap out = a;
    for (size_t i = 0; i < out.values.size(); ++i) out.values[i] -= b.values[i];
    return out;
}

inline Heatmap clamp_negative(const Heatmap& hm) {
    Heatmap out = hm;
    for (double& v : out.values) v = std::max(0.0, v);
    return out;
}

// Bilinear resampling with pixel centers at (i + 0.5) / n and edge clamping.
inline Heatmap resize_bilinear(const Heatmap& hm, int new_width, int new_height) {
    if (new_width <= 0 || new_height <= 0) throw DataError("resize: dimensions must be positive");
    if (new_width == hm.width && new_height == hm.height) return hm;
    Heatmap out(new_width, new_height);
    const double sx_scale = static_cast<double>(hm.width) / new_width;
    const double sy_scale = static_cast<double>(hm.height) / new_height;
    for (int dy = 0; dy < new_height; ++dy) {
        double sy = (dy + 0.5) * sy_scale - 0.5;
        sy = std::clamp(sy, 0.0, static_cast<double>(hm.height - 1));
        int y0 = static_cast<int>(sy);
        int y1 = std::min(y0 + 1, hm.height - 1);
        double fy = sy - y0;
        for (int dx = 0; dx < new_width; ++dx) {
            double sx = (dx + 0.5) * sx_scale - 0.5;
            sx = std::clamp(sx, 0.0, static_cast<double>(hm.width - 1));
            int x0 = static_cast<int>(sx);
            int x1 = std::min(x0 + 1, hm.width - 1);
            double fx = sx - x0;
            double top = hm.at(x0, y0) * (1.0 - fx) + hm.at(x1, y0) * fx;
            double bot = hm.at(x0, y1) * (1.0 - fx) + hm.at(x1, y1) * fx;
            out.at(dx, dy) = top * (1.0 - fy) + bot * fy;
        }
    }
    return out;
}

}  // namespace salign
