#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "salign/error.hpp"
#include "salign/heatmap.hpp"

namespace salign {

// Rank-3 activation tensor, row-major (h, w, c).
struct Tensor3 {
    int height = 0;
    int width = 0;
    int channels = 0;
    std::vector<double> values;

    Tensor3() = default;
    Tensor3(int h, int w, int c)
        : height(h), width(w), channels(c),
          values(static_cast<size_t>(h) * w * c, 0.0) {
        if (h <= 0 || w <= 0 || c <= 0) throw DataError("tensor dimensions must be positive");
    }

    double& at(int y, int x, int c) {
        return values[(static_cast<size_t>(y) * width + x) * channels + c];
    }
    double at(int y, int x, int c) const {
        return values[(static_cast<size_t>(y) * width + x) * channels + c];
    }
    size_t size() const { return values.size(); }
    bool same_shape(const Tensor3& o) const {
        return height == o.height && width == o.width && channels == o.channels;
    }
};

inline Tensor3 tensor_from_heatmap(const Heatmap& hm) {
    Tensor3 t(hm.height, hm.width, 1);
    t.values = hm.values;
    return t;
}

// ITU-R BT.601 luminance; grayscale passes through.
inline Heatmap luminance(const Tensor3& img) {
    Heatmap out(img.width, img.height);
    if (img.channels == 1) {
        out.values = img.values;
    } else if (img.channels == 3) {
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x)
                out.at(x, y) = 0.299 * img.at(y, x, 0) + 0.587 * img.at(y, x, 1) +
                               0.114 * img.at(y, x, 2);
    } else {
        throw DataError("luminance: expected 1 or 3 channels");
    }
    return out;
}

}  // namespace salign
