#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "salign/heatmap.hpp"
#include "salign/tensor.hpp"

namespace salign {

struct SpectralParams {
    int internal_size = 64;  // square working resolution, power of two
    int avg_kernel = 3;      // box filter width for the log-amplitude mean
    double blur_sigma = 2.5; // in internal-resolution pixels
};

namespace detail {

inline bool is_pow2(int n) { return n > 0 && (n & (n - 1)) == 0; }

// In-place radix-2 Cooley-Tukey on a power-of-two length.
inline void fft_inplace(std::vector<std::complex<double>>& a, bool inverse) {
    const size_t n = a.size();
    for (size_t i = 1, j = 0; i < n; ++i) {
        size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (size_t len = 2; len <= n; len <<= 1) {
        double ang = 2.0 * std::numbers::pi / static_cast<double>(len) * (inverse ? 1.0 : -1.0);
        std::complex<double> wlen(std::cos(ang), std::sin(ang));
        for (size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (size_t k = 0; k < len / 2; ++k) {
                auto u = a[i + k];
                auto v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wlen;
            }
        }
    }
    if (inverse)
        for (auto& x : a) x /= static_cast<double>(n);
}

inline void fft2d(std::vector<std::complex<double>>& f, int size, bool inverse) {
    std::vector<std::complex<double>> line(size);
    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) line[x] = f[static_cast<size_t>(y) * size + x];
        fft_inplace(line, inverse);
        for (int x = 0; x < size; ++x) f[static_cast<size_t>(y) * size + x] = line[x];
    }
    for (int x = 0; x < size; ++x) {
        for (int y = 0; y < size; ++y) line[y] = f[static_cast<size_t>(y) * size + x];
        fft_inplace(line, inverse);
        for (int y = 0; y < size; ++y) f[static_cast<size_t>(y) * size + x] = line[y];
    }
}

// Box filter with replicate padding, so a constant offset passes through exactly.
inline std::vector<double> box_filter(const std::vector<double>& in, int size, int k) {
    int r = k / 2;
    std::vector<double> tmp(in.size()), out(in.size());
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            double s = 0.0;
            for (int d = -r; d <= r; ++d)
                s += in[static_cast<size_t>(y) * size + std::clamp(x + d, 0, size - 1)];
            tmp[static_cast<size_t>(y) * size + x] = s / k;
        }
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            double s = 0.0;
            for (int d = -r; d <= r; ++d)
                s += tmp[static_cast<size_t>(std::clamp(y + d, 0, size - 1)) * size + x];
            out[static_cast<size_t>(y) * size + x] = s / k;
        }
    return out;
}

inline Heatmap gaussian_blur(const Heatmap& hm, double sigma) {
    int r = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<double> kernel(2 * r + 1);
    double sum = 0.0;
    for (int d = -r; d <= r; ++d) {
        kernel[d + r] = std::exp(-0.5 * d * d / (sigma * sigma));
        sum += kernel[d + r];
    }
    for (double& k : kernel) k /= sum;
    Heatmap tmp(hm.width, hm.height), out(hm.width, hm.height);
    for (int y = 0; y < hm.height; ++y)
        for (int x = 0; x < hm.width; ++x) {
            double s = 0.0;
            for (int d = -r; d <= r; ++d)
                s += kernel[d + r] * hm.at(std::clamp(x + d, 0, hm.width - 1), y);
            tmp.at(x, y) = s;
        }
    for (int y = 0; y < hm.height; ++y)
        for (int x = 0; x < hm.width; ++x) {
            double s = 0.0;
            for (int d = -r; d <= r; ++d)
                s += kernel[d + r] * tmp.at(x, std::clamp(y + d, 0, hm.height - 1));
            out.at(x, y) = s;
        }
    return out;
}

}  // namespace detail

// Spectral-residual saliency: anomalies in the log-amplitude spectrum,
// reconstructed with the original phase, become bright regions.
inline Heatmap spectral_residual(const Tensor3& image, const SpectralParams& params = {}) {
    if (image.height <= 0 || image.width <= 0) throw DataError("spectral: degenerate image");
    if (params.internal_size < 8 || !detail::is_pow2(params.internal_size))
        throw DataError("spectral: internal_size must be a power of two >= 8");
    if (params.avg_kernel < 3 || params.avg_kernel % 2 == 0)
        throw DataError("spectral: avg_kernel must be odd and >= 3");
    if (params.blur_sigma <= 0.0) throw DataError("spectral: blur_sigma must be positive");

    const int s = params.internal_size;
    Heatmap gray = luminance(image);
    Heatmap small = resize_bilinear(gray, s, s);

    std::vector<std::complex<double>> spec(small.values.begin(), small.values.end());
    detail::fft2d(spec, s, false);

    constexpr double kLogGuard = 1e-8;
    std::vector<double> log_amp(spec.size()), phase(spec.size());
    for (size_t i = 0; i < spec.size(); ++i) {
        log_amp[i] = std::log(std::abs(spec[i]) + kLogGuard);
        phase[i] = std::arg(spec[i]);
    }
    std::vector<double> mean_amp = detail::box_filter(log_amp, s, params.avg_kernel);
    for (size_t i = 0; i < spec.size(); ++i) {
        if (std::abs(spec[i]) == 0.0) continue;  // empty bins carry no residual
        double residual = log_amp[i] - mean_amp[i];
        spec[i] = std::polar(std::exp(residual), phase[i]);
    }
    detail::fft2d(spec, s, true);

    Heatmap sal(s, s);
    for (size_t i = 0; i < spec.size(); ++i) sal.values[i] = std::norm(spec[i]);
    sal = detail::gaussian_blur(sal, params.blur_sigma);
    sal = resize_bilinear(sal, image.width, image.height);
    return normalize_max(sal);
}

}  // namespace salign
