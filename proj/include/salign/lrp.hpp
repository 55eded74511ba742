#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "salign/heatmap.hpp"
#include "salign/model.hpp"
#include "salign/nn.hpp"

namespace salign {

enum class LrpRule { Z, Epsilon };

struct LrpRuleSpec {
    LrpRule rule = LrpRule::Epsilon;
    double epsilon = 1e-7;
};

struct RelevanceMap {
    // Relevance mirroring forward() activations: index 0 is the input layer,
    // index k+1 the output of layer k. The last entry is the seed relevance.
    std::vector<Tensor3> per_layer;
    Heatmap input_heatmap;  // channels summed, negatives clamped, max-normalized
    LrpRuleSpec rule;
    std::vector<double> output_mask;
};

namespace detail {

inline double stabilize(double z, const LrpRuleSpec& rule) {
    if (rule.rule == LrpRule::Z) return z;
    return z + (z >= 0.0 ? rule.epsilon : -rule.epsilon);
}

inline Tensor3 lrp_dense(const LayerSpec& l, const Tensor3& in, const Tensor3& out,
                         const Tensor3& r_out, const LrpRuleSpec& rule) {
    Tensor3 r_in(in.height, in.width, in.channels);
    for (int j = 0; j < l.out_features; ++j) {
        double rj = r_out.values[j];
        if (rj == 0.0) continue;
        double factor = rj / stabilize(out.values[j], rule);
        for (int i = 0; i < l.in_features; ++i)
            r_in.values[i] += in.values[i] * l.weights[static_cast<size_t>(i) * l.out_features + j] *
                              factor;
    }
    return r_in;
}

inline Tensor3 lrp_conv(const LayerSpec& l, const Tensor3& in, const Tensor3& out,
                        const Tensor3& r_out, const LrpRuleSpec& rule) {
    Tensor3 r_in(in.height, in.width, in.channels);
    int pad_y = 0, pad_x = 0;
    if (l.same_pad) {
        pad_y = std::max((out.height - 1) * l.stride + l.kh - in.height, 0) / 2;
        pad_x = std::max((out.width - 1) * l.stride + l.kw - in.width, 0) / 2;
    }
    for (int oy = 0; oy < out.height; ++oy)
        for (int ox = 0; ox < out.width; ++ox)
            for (int oc = 0; oc < out.channels; ++oc) {
                double rj = r_out.at(oy, ox, oc);
                if (rj == 0.0) continue;
                double factor = rj / stabilize(out.at(oy, ox, oc), rule);
                for (int ky = 0; ky < l.kh; ++ky) {
                    int iy = oy * l.stride + ky - pad_y;
                    if (iy < 0 || iy >= in.height) continue;
                    for (int kx = 0; kx < l.kw; ++kx) {
                        int ix = ox * l.stride + kx - pad_x;
                        if (ix < 0 || ix >= in.width) continue;
                        const double* wp = &l.weights[((static_cast<size_t>(ky) * l.kw + kx) *
                                                       l.in_channels) * l.out_channels + oc];
                        for (int ic = 0; ic < l.in_channels; ++ic)
                            r_in.at(iy, ix, ic) += in.at(iy, ix, ic) *
                                                   wp[static_cast<size_t>(ic) * l.out_channels] *
                                                   factor;
                    }
                }
            }
    return r_in;
}

// Winner-take-all routing; ties break to the first window position in scan order.
inline Tensor3 lrp_maxpool(const LayerSpec& l, const Tensor3& in, const Tensor3& r_out) {
    Tensor3 r_in(in.height, in.width, in.channels);
    int oh = r_out.height, ow = r_out.width;
    for (int oy = 0; oy < oh; ++oy)
        for (int ox = 0; ox < ow; ++ox)
            for (int c = 0; c < in.channels; ++c) {
                double best = in.at(oy * l.stride, ox * l.stride, c);
                int by = oy * l.stride, bx = ox * l.stride;
                for (int ky = 0; ky < l.kh; ++ky)
                    for (int kx = 0; kx < l.kw; ++kx) {
                        double v = in.at(oy * l.stride + ky, ox * l.stride + kx, c);
                        if (v > best) {
                            best = v;
                            by = oy * l.stride + ky;
                            bx = ox * l.stride + kx;
                        }
                    }
                r_in.at(by, bx, c) += r_out.at(oy, ox, c);
            }
    return r_in;
}

}  // namespace detail

inline RelevanceMap lrp(const ModelSpec& model, const Tensor3& input,
                        const std::vector<double>& output_mask, const LrpRuleSpec& rule = {}) {
    if (rule.epsilon < 0.0) throw DataError("lrp: epsilon must be non-negative");
    std::vector<Tensor3> acts = forward(model, input);
    const Tensor3& output = acts.back();
    if (output_mask.size() != output.values.size())
        throw DataError("lrp: output mask length does not match model output dimension");

    RelevanceMap rm;
    rm.rule = rule;
    rm.output_mask = output_mask;
    rm.per_layer.resize(acts.size());
    Tensor3 seed = output;
    for (size_t i = 0; i < seed.values.size(); ++i) seed.values[i] *= output_mask[i];
    rm.per_layer.back() = seed;

    for (size_t k = model.layers.size(); k-- > 0;) {
        const LayerSpec& l = model.layers[k];
        const Tensor3& in = acts[k];
        const Tensor3& out = acts[k + 1];
        const Tensor3& r_out = rm.per_layer[k + 1];
        Tensor3 r_in;
        switch (l.kind) {
            case LayerKind::Dense:
                r_in = detail::lrp_dense(l, in, out, r_out, rule);
                break;
            case LayerKind::Conv2d:
                r_in = detail::lrp_conv(l, in, out, r_out, rule);
                break;
            case LayerKind::MaxPool2d:
                r_in = detail::lrp_maxpool(l, in, r_out);
                break;
            case LayerKind::GlobalAveragePool: {
                r_in = Tensor3(in.height, in.width, in.channels);
                double inv = 1.0 / (static_cast<double>(in.height) * in.width);
                for (int y = 0; y < in.height; ++y)
                    for (int x = 0; x < in.width; ++x)
                        for (int c = 0; c < in.channels; ++c)
                            r_in.at(y, x, c) = r_out.at(0, 0, c) * inv;
                break;
            }
            case LayerKind::Relu:
            case LayerKind::Dropout:
                r_in = r_out;
                break;
            case LayerKind::Flatten: {
                r_in = Tensor3(in.height, in.width, in.channels);
                r_in.values = r_out.values;
                break;
            }
        }
        for (double v : r_in.values)
            if (!std::isfinite(v))
                throw DataError("lrp: non-finite relevance (epsilon too small near zero z)");
        rm.per_layer[k] = std::move(r_in);
    }

    const Tensor3& r0 = rm.per_layer[0];
    Heatmap hm(input.width, input.height);
    for (int y = 0; y < input.height; ++y)
        for (int x = 0; x < input.width; ++x) {
            double s = 0.0;
            for (int c = 0; c < input.channels; ++c) s += r0.at(y, x, c);
            hm.at(x, y) = std::max(0.0, s);
        }
    rm.input_heatmap = normalize_max(hm);
    return rm;
}

// Runs LRP identically across named model variants that share an input shape.
inline std::map<std::string, Heatmap> heatmap_for_regimes(
    const std::map<std::string, ModelSpec>& variants, const Tensor3& input,
    const std::vector<double>& output_mask, const LrpRuleSpec& rule = {}) {
    std::map<std::string, Heatmap> out;
    for (const auto& [name, model] : variants)
        out.emplace(name, lrp(model, input, output_mask, rule).input_heatmap);
    return out;
}

}  // namespace salign
