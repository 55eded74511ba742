#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "salign/model.hpp"
#include "salign/tensor.hpp"

namespace salign {

namespace detail {

// Zero-padded convolution; same-padding splits the pad with the extra row/col
// at the bottom/right.
inline Tensor3 conv2d_forward(const LayerSpec& l, const Tensor3& in) {
    int oh = conv_out_dim(in.height, l.kh, l.stride, l.same_pad);
    int ow = conv_out_dim(in.width, l.kw, l.stride, l.same_pad);
    int pad_y = 0, pad_x = 0;
    if (l.same_pad) {
        pad_y = std::max((oh - 1) * l.stride + l.kh - in.height, 0) / 2;
        pad_x = std::max((ow - 1) * l.stride + l.kw - in.width, 0) / 2;
    }
    Tensor3 out(oh, ow, l.out_channels);
    for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox) {
            for (int oc = 0; oc < l.out_channels; ++oc) {
                double acc = l.bias[oc];
                for (int ky = 0; ky < l.kh; ++ky) {
                    int iy = oy * l.stride + ky - pad_y;
                    if (iy < 0 || iy >= in.height) continue;
                    for (int kx = 0; kx < l.kw; ++kx) {
                        int ix = ox * l.stride + kx - pad_x;
                        if (ix < 0 || ix >= in.width) continue;
                        const double* ip = &in.values[(static_cast<size_t>(iy) * in.width + ix) *
                                                      in.channels];
                        const double* wp = &l.weights[((static_cast<size_t>(ky) * l.kw + kx) *
                                                       l.in_channels) * l.out_channels + oc];
                        for (int ic = 0; ic < l.in_channels; ++ic)
                            acc += ip[ic] * wp[static_cast<size_t>(ic) * l.out_channels];
                    }
                }
                out.at(oy, ox, oc) = acc;
            }
        }
    }
    return out;
}

inline Tensor3 maxpool_forward(const LayerSpec& l, const Tensor3& in) {
    int oh = pool_out_dim(in.height, l.kh, l.stride);
    int ow = pool_out_dim(in.width, l.kw, l.stride);
    Tensor3 out(oh, ow, in.channels);
    for (int oy = 0; oy < oh; ++oy)
        for (int ox = 0; ox < ow; ++ox)
            for (int c = 0; c < in.channels; ++c) {
                double m = in.at(oy * l.stride, ox * l.stride, c);
                for (int ky = 0; ky < l.kh; ++ky)
                    for (int kx = 0; kx < l.kw; ++kx)
                        m = std::max(m, in.at(oy * l.stride + ky, ox * l.stride + kx, c));
                out.at(oy, ox, c) = m;
            }
    return out;
}

}  // namespace detail

inline Tensor3 apply_preprocess(const ModelSpec& model, const Tensor3& input) {
    if (model.pre_scale.empty()) return input;
    Tensor3 out = input;
    for (int y = 0; y < out.height; ++y)
        for (int x = 0; x < out.width; ++x)
            for (int c = 0; c < out.channels; ++c)
                out.at(y, x, c) = out.at(y, x, c) * model.pre_scale[c] + model.pre_shift[c];
    return out;
}

// Runs one layer on its input activation. Dropout is identity at inference.
inline Tensor3 layer_forward(const LayerSpec& l, const Tensor3& in) {
    switch (l.kind) {
        case LayerKind::Conv2d:
            return detail::conv2d_forward(l, in);
        case LayerKind::Relu: {
            Tensor3 out = in;
            for (double& v : out.values) v = std::max(0.0, v);
            return out;
        }
        case LayerKind::MaxPool2d:
            return detail::maxpool_forward(l, in);
        case LayerKind::GlobalAveragePool: {
            Tensor3 out(1, 1, in.channels);
            double inv = 1.0 / (static_cast<double>(in.height) * in.width);
            for (int y = 0; y < in.height; ++y)
                for (int x = 0; x < in.width; ++x)
                    for (int c = 0; c < in.channels; ++c) out.at(0, 0, c) += in.at(y, x, c);
            for (double& v : out.values) v *= inv;
            return out;
        }
        case LayerKind::Dropout:
            return in;
        case LayerKind::Flatten: {
            Tensor3 out(1, 1, static_cast<int>(in.size()));
            out.values = in.values;
            return out;
        }
        case LayerKind::Dense: {
            Tensor3 out(1, 1, l.out_features);
            for (int j = 0; j < l.out_features; ++j) out.at(0, 0, j) = l.bias[j];
            for (int i = 0; i < l.in_features; ++i) {
                double a = in.values[i];
                if (a == 0.0) continue;
                const double* wp = &l.weights[static_cast<size_t>(i) * l.out_features];
                for (int j = 0; j < l.out_features; ++j) out.at(0, 0, j) += a * wp[j];
            }
            return out;
        }
    }
    throw InternalError("unreachable layer kind");
}

// Per-layer activations; element 0 is the (preprocessed) input, element k+1
// the output of layer k. The last element is the model output vector.
inline std::vector<Tensor3> forward(const ModelSpec& model, const Tensor3& input) {
    if (input.height != model.input.h || input.width != model.input.w ||
        input.channels != model.input.c)
        throw DataError("forward: input shape does not match model");
    std::vector<Tensor3> acts;
    acts.reserve(model.layers.size() + 1);
    acts.push_back(apply_preprocess(model, input));
    for (const auto& l : model.layers) acts.push_back(layer_forward(l, acts.back()));
    return acts;
}

inline std::vector<double> model_output(const ModelSpec& model, const Tensor3& input) {
    return forward(model, input).back().values;
}

}  // namespace salign
